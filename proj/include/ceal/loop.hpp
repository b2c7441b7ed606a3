#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ceal/acquisition.hpp"
#include "ceal/data.hpp"
#include "ceal/model.hpp"
#include "ceal/sampler.hpp"

namespace ceal {

enum class Strategy { random_full, full_pool, subsampled };

std::string_view to_string(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view name);

/// Where the training and test corpora come from.
struct DatasetSpec {
  std::string kind = "blobs";  // "blobs" or "mnist"

  // blobs
  int num_classes = 10;
  int samples_per_class = 600;
  double spread = 1.0;
  std::uint64_t seed = 0;
  double test_fraction = 1.0 / 6.0;

  // mnist
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;

  bool is_mnist() const { return kind == "mnist"; }
  /// Training-set size when it is known without touching the filesystem.
  std::optional<std::size_t> train_size() const;
  bool operator==(const DatasetSpec&) const = default;
};

struct LoadedData {
  Dataset train;
  Dataset test;
};

LoadedData load_data(const DatasetSpec& spec);

struct ExperimentConfig {
  std::string experiment_id;
  DatasetSpec dataset;
  Strategy strategy = Strategy::subsampled;
  AcquisitionKind acquisition = AcquisitionKind::entropy;
  int iterations = 10;
  double initial_pool_fraction = 0.01;
  int batch_size = 50;  // samples acquired per iteration
  SamplingPolicy sampling;
  std::vector<int> hidden = {32};
  double dropout_rate = 0.25;
  TrainSpec train;  // seed is ignored; training streams derive from the run seed
  int mc_passes = 25;
  std::vector<std::uint64_t> seeds = {0, 1, 2};

  /// Checks every knob. With train_size, also checks that the initial pool
  /// plus all acquisitions fit in the training set.
  void validate(std::optional<std::size_t> train_size = std::nullopt) const;
  std::size_t initial_pool_size(std::size_t train_size) const;
  std::vector<int> widths(int input_dim, int num_classes) const;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Disjoint labeled / unlabeled / dropped index sets over [0, n).
class PoolState {
 public:
  PoolState() = default;
  PoolState(std::vector<std::size_t> labeled, std::vector<std::size_t> unlabeled);

  const std::vector<std::size_t>& labeled() const { return labeled_; }
  const std::vector<std::size_t>& unlabeled() const { return unlabeled_; }
  const std::vector<std::size_t>& dropped() const { return dropped_; }
  std::size_t total() const { return labeled_.size() + unlabeled_.size() + dropped_.size(); }

  /// Moves unlabeled indices to the labeled set. Throws if any is not unlabeled.
  void label(std::span<const std::size_t> indices);
  /// Moves unlabeled indices to the dropped set. Throws if any is not unlabeled.
  void drop(std::span<const std::size_t> indices);

  /// True iff the three sets are disjoint and cover [0, n).
  bool is_partition_of(std::size_t n) const;

 private:
  std::vector<std::size_t> labeled_;
  std::vector<std::size_t> unlabeled_;
  std::vector<std::size_t> dropped_;
};

/// Last known acquisition value of each unlabeled index.
class AcquisitionCache {
 public:
  struct Entry {
    double value = 0.0;
    int last_evaluated_iteration = 0;
    bool operator==(const Entry&) const = default;
  };

  void set(std::size_t index, double value, int iteration) { entries_[index] = {value, iteration}; }
  void erase(std::span<const std::size_t> indices) {
    for (std::size_t i : indices) entries_.erase(i);
  }
  const Entry& at(std::size_t index) const { return entries_.at(index); }
  bool contains(std::size_t index) const { return entries_.count(index) != 0; }
  std::size_t size() const { return entries_.size(); }
  const std::map<std::size_t, Entry>& entries() const { return entries_; }

  std::vector<double> values_of(std::span<const std::size_t> indices) const;
  bool has_exactly_keys(std::span<const std::size_t> sorted_indices) const;

 private:
  std::map<std::size_t, Entry> entries_;
};

/// Worker threads used for scoring: $CEAL_WORKERS if set and positive,
/// otherwise the hardware concurrency.
std::size_t worker_count();

/// Class-balanced initial labeled pool of round(initial_fraction * n)
/// samples; everything else unlabeled.
PoolState init_pools(const Dataset& data, double initial_fraction, std::uint64_t seed);

struct ScoreBatch {
  std::vector<double> values;
  std::size_t mc_forward_passes = 0;
};

/// Scores each index with its own random stream keyed by (stream_seed,
/// iteration, index), so the result does not depend on `workers`.
ScoreBatch score_indices(const Classifier& model, const Dataset& data, std::span<const std::size_t> indices,
                         AcquisitionKind kind, int mc_passes, std::uint64_t stream_seed, int iteration,
                         std::size_t workers = worker_count());

/// Scores every unlabeled index once; all entries get iteration 0.
AcquisitionCache initial_full_evaluation(const Classifier& model, const Dataset& data, const PoolState& pools,
                                         AcquisitionKind kind, int mc_passes, std::uint64_t stream_seed,
                                         std::size_t* af_evaluations = nullptr,
                                         std::size_t* mc_forward_passes = nullptr);

struct IterationMetrics {
  int iteration = 0;
  std::size_t labeled_size = 0;
  double test_accuracy = 0.0;
  std::size_t af_evaluations = 0;
  std::size_t cumulative_af_evaluations = 0;
  std::size_t mc_forward_passes = 0;
  double wall_time_seconds = 0.0;
  // Evaluations a full-pool pass would have needed this iteration.
  std::size_t full_pool_equivalent = 0;
  bool candidate_size_clipped = false;
  std::vector<std::size_t> candidates;
  std::vector<std::size_t> acquired;
  std::vector<std::size_t> pruned;
};

struct LoopState {
  PoolState pools;
  AcquisitionCache cache;
  Classifier model;
};

/// Builds a classifier for the configured architecture and trains it from
/// scratch on the labeled pool, with streams keyed by (seed, iteration).
Classifier train_on_pool(const ExperimentConfig& config, const Dataset& train, const PoolState& pools,
                         std::uint64_t seed, int iteration);

/// One acquisition round. The incoming state.model was trained on the
/// current labeled pool; on return it has been retrained on the enlarged
/// pool and metrics hold its test accuracy.
IterationMetrics run_iteration(LoopState& state, const ExperimentConfig& config, const LoadedData& data,
                               int iteration, std::uint64_t seed);

struct SeedRun {
  std::uint64_t seed = 0;
  std::size_t train_size = 0;
  std::size_t initial_unlabeled = 0;
  std::vector<IterationMetrics> iterations;  // iteration 0 = initial model
};

struct RunRecord {
  ExperimentConfig config;
  std::vector<SeedRun> runs;
  std::vector<double> mean_accuracy;  // per iteration, averaged over seeds

  double final_mean_accuracy() const { return mean_accuracy.back(); }
  /// Seed-mean of the final cumulative AF evaluation count.
  double mean_total_af_evaluations() const;
  /// Seed-mean of sum over t >= 1 of (train size - labeled size before t).
  double mean_full_pool_equivalent() const;
};

using IterationObserver = std::function<void(const LoopState&, const IterationMetrics&)>;

RunRecord run_experiment(const ExperimentConfig& config);
RunRecord run_experiment(const ExperimentConfig& config, const LoadedData& data,
                         const IterationObserver& observer = {});

struct StrategySummary {
  std::string label;
  Strategy strategy = Strategy::subsampled;
  AcquisitionKind acquisition = AcquisitionKind::entropy;
  std::vector<std::size_t> labeled_size;
  std::vector<double> mean_accuracy;
  std::vector<double> min_accuracy;
  std::vector<double> max_accuracy;
  double final_accuracy = 0.0;
  double final_delta = 0.0;  // versus the first record
  double total_af_evaluations = 0.0;
  double full_pool_equivalent = 0.0;
  double savings_ratio = 0.0;  // 1 - evaluations / full-pool equivalent
  std::optional<double> savings_vs_full_pool;  // against a full_pool record, if any
};

struct ComparisonTable {
  std::vector<StrategySummary> entries;
};

struct IncompatibleRecords : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Throws IncompatibleRecords unless all records share dataset, iterations,
/// batch size, initial pool and seeds.
ComparisonTable compare_strategies(std::span<const RunRecord> records);

}  // namespace ceal
