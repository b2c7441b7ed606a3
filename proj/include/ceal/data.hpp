#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ceal {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// A labeled corpus. One feature row per sample.
struct Dataset {
  Matrix features;
  std::vector<int> labels;
  int num_classes = 0;
  std::string name;

  std::size_t size() const { return labels.size(); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(features.cols()); }

  /// Throws std::invalid_argument if any invariant is broken.
  void validate() const;

  /// New dataset made of the given rows, in the given order.
  Dataset subset(const std::vector<std::size_t>& rows) const;
};

bool operator==(const Dataset& a, const Dataset& b);

// IDX parse errors. Each failure mode gets its own type.
struct IdxError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IdxBadMagic : IdxError {
  using IdxError::IdxError;
};
struct IdxTruncated : IdxError {
  using IdxError::IdxError;
};
struct IdxCountMismatch : IdxError {
  using IdxError::IdxError;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;  // 2051
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;  // 2049

/// Loads an MNIST image/label IDX pair. Pixels are scaled by 1/255.
Dataset load_mnist_idx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path);

/// Writes a dataset back out as an IDX pair. Features are mapped back to
/// bytes with round(x*255), so only [0,1] data survives exactly. rows*cols
/// must equal the feature width.
void save_mnist_idx(const Dataset& data, std::size_t rows, std::size_t cols,
                    const std::filesystem::path& images_path,
                    const std::filesystem::path& labels_path);

/// 2-D Gaussian clusters with centers equally spaced on a circle of radius 5.
/// Samples are interleaved round-robin over classes.
Dataset synth_blobs(int num_classes, int samples_per_class, double spread,
                    std::uint64_t seed);

struct Split {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> train_rows;  // rows of the source dataset
  std::vector<std::size_t> test_rows;
};

/// Number of test rows holdout_split produces for n samples.
std::size_t holdout_test_count(std::size_t n, double test_fraction);

/// Deterministic shuffled split. Test size is round(n * test_fraction).
Split holdout_split(const Dataset& data, double test_fraction, std::uint64_t seed);

}  // namespace ceal
