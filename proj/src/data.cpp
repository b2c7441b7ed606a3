#include "ceal/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>

#include "ceal/rng.hpp"

namespace ceal {

void Dataset::validate() const {
  if (num_classes < 2) throw std::invalid_argument("dataset: num_classes must be >= 2");
  if (static_cast<std::size_t>(features.rows()) != labels.size())
    throw std::invalid_argument("dataset: feature rows != label count");
  for (int y : labels)
    if (y < 0 || y >= num_classes)
      throw std::invalid_argument("dataset: label out of range: " + std::to_string(y));
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.num_classes = num_classes;
  out.name = name;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(rows[i]));
    out.labels.push_back(labels[rows[i]]);
  }
  return out;
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.num_classes == b.num_classes && a.name == b.name && a.labels == b.labels &&
         a.features.rows() == b.features.rows() && a.features.cols() == b.features.cols() &&
         a.features == b.features;
}

namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset,
                        const std::filesystem::path& path) {
  if (buf.size() < offset + 4) throw IdxTruncated("truncated IDX header in " + path.string());
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                         static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(bytes, 4);
}

}  // namespace

Dataset load_mnist_idx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path) {
  const auto images = read_all(images_path);
  const auto labels = read_all(labels_path);

  const std::uint32_t image_magic = read_be32(images, 0, images_path);
  if (image_magic != kIdxImagesMagic)
    throw IdxBadMagic("bad image magic " + std::to_string(image_magic) + " in " +
                      images_path.string() + " (expected 2051)");
  const std::uint32_t label_magic = read_be32(labels, 0, labels_path);
  if (label_magic != kIdxLabelsMagic)
    throw IdxBadMagic("bad label magic " + std::to_string(label_magic) + " in " +
                      labels_path.string() + " (expected 2049)");

  const std::size_t n_images = read_be32(images, 4, images_path);
  const std::size_t rows = read_be32(images, 8, images_path);
  const std::size_t cols = read_be32(images, 12, images_path);
  const std::size_t n_labels = read_be32(labels, 4, labels_path);

  const std::size_t pixels = rows * cols;
  if (images.size() < 16 + n_images * pixels)
    throw IdxTruncated("image payload truncated in " + images_path.string());
  if (labels.size() < 8 + n_labels) throw IdxTruncated("label payload truncated in " + labels_path.string());
  if (n_images != n_labels)
    throw IdxCountMismatch("image count " + std::to_string(n_images) + " != label count " +
                           std::to_string(n_labels));

  Dataset out;
  out.name = "mnist";
  out.num_classes = 10;
  out.features.resize(static_cast<Eigen::Index>(n_images), static_cast<Eigen::Index>(pixels));
  const unsigned char* px = images.data() + 16;
  for (std::size_t i = 0; i < n_images; ++i)
    for (std::size_t j = 0; j < pixels; ++j)
      out.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<double>(px[i * pixels + j]) / 255.0;
  out.labels.resize(n_labels);
  for (std::size_t i = 0; i < n_labels; ++i) out.labels[i] = labels[8 + i];
  out.validate();
  return out;
}

void save_mnist_idx(const Dataset& data, std::size_t rows, std::size_t cols,
                    const std::filesystem::path& images_path,
                    const std::filesystem::path& labels_path) {
  if (rows * cols != data.feature_dim())
    throw std::invalid_argument("save_mnist_idx: rows*cols != feature width");
  std::ofstream img(images_path, std::ios::binary);
  std::ofstream lab(labels_path, std::ios::binary);
  if (!img || !lab) throw IdxError("cannot open IDX output files");
  write_be32(img, kIdxImagesMagic);
  write_be32(img, static_cast<std::uint32_t>(data.size()));
  write_be32(img, static_cast<std::uint32_t>(rows));
  write_be32(img, static_cast<std::uint32_t>(cols));
  for (Eigen::Index i = 0; i < data.features.rows(); ++i)
    for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
      const double v = std::clamp(data.features(i, j), 0.0, 1.0);
      img.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
  write_be32(lab, kIdxLabelsMagic);
  write_be32(lab, static_cast<std::uint32_t>(data.size()));
  for (int y : data.labels) lab.put(static_cast<char>(y));
  if (!img || !lab) throw IdxError("write failed");
}

Dataset synth_blobs(int num_classes, int samples_per_class, double spread, std::uint64_t seed) {
  if (num_classes < 2) throw std::invalid_argument("synth_blobs: num_classes must be >= 2");
  if (samples_per_class < 1) throw std::invalid_argument("synth_blobs: samples_per_class must be >= 1");
  if (!(spread > 0.0)) throw std::invalid_argument("synth_blobs: spread must be > 0");

  constexpr double kRadius = 5.0;
  Rng rng(seed);
  Dataset out;
  out.name = "blobs";
  out.num_classes = num_classes;
  const auto n = static_cast<Eigen::Index>(num_classes) * samples_per_class;
  out.features.resize(n, 2);
  out.labels.resize(static_cast<std::size_t>(n));
  Eigen::Index row = 0;
  for (int s = 0; s < samples_per_class; ++s) {
    for (int c = 0; c < num_classes; ++c, ++row) {
      const double angle = 2.0 * std::numbers::pi * c / num_classes;
      out.features(row, 0) = kRadius * std::cos(angle) + spread * rng.normal();
      out.features(row, 1) = kRadius * std::sin(angle) + spread * rng.normal();
      out.labels[static_cast<std::size_t>(row)] = c;
    }
  }
  return out;
}

std::size_t holdout_test_count(std::size_t n, double test_fraction) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
}

Split holdout_split(const Dataset& data, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("holdout_split: test_fraction must be in (0,1)");
  const std::size_t n = data.size();
  const std::size_t n_test = holdout_test_count(n, test_fraction);
  if (n_test == 0 || n_test >= n)
    throw std::invalid_argument("holdout_split: fraction leaves an empty split");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  shuffle(order, rng);

  Split out;
  out.test_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  out.train_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(out.test_rows.begin(), out.test_rows.end());
  std::sort(out.train_rows.begin(), out.train_rows.end());
  out.train = data.subset(out.train_rows);
  out.test = data.subset(out.test_rows);
  return out;
}

}  // namespace ceal
