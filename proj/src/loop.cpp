#include "ceal/loop.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iterator>
#include <thread>

namespace ceal {

namespace {

// Purpose tags for derived random streams.
enum StreamTag : std::uint64_t {
  kPoolTag = 1,
  kInitTag = 2,
  kTrainTag = 3,
  kScoreTag = 4,
  kSampleTag = 5,
  kRandomPickTag = 6,
};

std::vector<std::size_t> sorted_copy(std::span<const std::size_t> v) {
  std::vector<std::size_t> out(v.begin(), v.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> minus(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::vector<std::size_t> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::vector<std::size_t> merged(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::vector<std::size_t> out;
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::random_full: return "random_full";
    case Strategy::full_pool: return "full_pool";
    case Strategy::subsampled: return "subsampled";
  }
  return "unknown";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  if (name == "random_full") return Strategy::random_full;
  if (name == "full_pool") return Strategy::full_pool;
  if (name == "subsampled") return Strategy::subsampled;
  return std::nullopt;
}

std::optional<std::size_t> DatasetSpec::train_size() const {
  if (is_mnist()) return std::nullopt;
  const auto n = static_cast<std::size_t>(num_classes) * static_cast<std::size_t>(samples_per_class);
  return n - holdout_test_count(n, test_fraction);
}

LoadedData load_data(const DatasetSpec& spec) {
  if (spec.is_mnist()) {
    return {load_mnist_idx(spec.train_images, spec.train_labels),
            load_mnist_idx(spec.test_images, spec.test_labels)};
  }
  if (spec.kind != "blobs") throw std::invalid_argument("dataset.kind must be \"blobs\" or \"mnist\"");
  Split split = holdout_split(synth_blobs(spec.num_classes, spec.samples_per_class, spec.spread, spec.seed),
                              spec.test_fraction, mix64(spec.seed));
  return {std::move(split.train), std::move(split.test)};
}

void ExperimentConfig::validate(std::optional<std::size_t> train_size) const {
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(initial_pool_fraction > 0.0 && initial_pool_fraction < 1.0))
    throw std::invalid_argument("initial_pool_fraction must be in (0,1)");
  if (mc_passes < 1) throw std::invalid_argument("mc_passes must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("seeds must be non-empty");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw std::invalid_argument("model.dropout must be in [0,1)");
  for (int h : hidden)
    if (h < 1) throw std::invalid_argument("model.hidden widths must be positive");
  train.validate();
  sampling.validate();
  if (strategy == Strategy::subsampled && sampling.candidate_size.count &&
      *sampling.candidate_size.count < static_cast<std::size_t>(batch_size))
    throw std::invalid_argument("sampling.candidate_size must be >= batch_size");
  if (!dataset.is_mnist()) {
    if (dataset.num_classes < 2) throw std::invalid_argument("dataset.num_classes must be >= 2");
    if (dataset.samples_per_class < 1) throw std::invalid_argument("dataset.samples_per_class must be >= 1");
    if (!(dataset.spread > 0.0)) throw std::invalid_argument("dataset.spread must be > 0");
    if (!(dataset.test_fraction > 0.0 && dataset.test_fraction < 1.0))
      throw std::invalid_argument("dataset.test_fraction must be in (0,1)");
  }
  if (train_size) {
    const std::size_t needed = initial_pool_size(*train_size) +
                               static_cast<std::size_t>(iterations) * static_cast<std::size_t>(batch_size);
    if (needed > *train_size)
      throw std::invalid_argument("initial pool + iterations*batch_size (" + std::to_string(needed) +
                                  ") exceeds training-set size (" + std::to_string(*train_size) + ")");
  }
}

std::size_t ExperimentConfig::initial_pool_size(std::size_t train_size) const {
  return static_cast<std::size_t>(std::llround(initial_pool_fraction * static_cast<double>(train_size)));
}

std::vector<int> ExperimentConfig::widths(int input_dim, int num_classes) const {
  std::vector<int> w{input_dim};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(num_classes);
  return w;
}

PoolState::PoolState(std::vector<std::size_t> labeled, std::vector<std::size_t> unlabeled)
    : labeled_(std::move(labeled)), unlabeled_(std::move(unlabeled)) {
  std::sort(labeled_.begin(), labeled_.end());
  std::sort(unlabeled_.begin(), unlabeled_.end());
}

namespace {

void require_unlabeled(const std::vector<std::size_t>& unlabeled, const std::vector<std::size_t>& idx) {
  if (std::adjacent_find(idx.begin(), idx.end()) != idx.end())
    throw std::invalid_argument("pool: duplicate index in move");
  if (!std::includes(unlabeled.begin(), unlabeled.end(), idx.begin(), idx.end()))
    throw std::invalid_argument("pool: index is not in the unlabeled set");
}

}  // namespace

void PoolState::label(std::span<const std::size_t> indices) {
  const auto idx = sorted_copy(indices);
  require_unlabeled(unlabeled_, idx);
  unlabeled_ = minus(unlabeled_, idx);
  labeled_ = merged(labeled_, idx);
}

void PoolState::drop(std::span<const std::size_t> indices) {
  const auto idx = sorted_copy(indices);
  require_unlabeled(unlabeled_, idx);
  unlabeled_ = minus(unlabeled_, idx);
  dropped_ = merged(dropped_, idx);
}

bool PoolState::is_partition_of(std::size_t n) const {
  std::vector<char> seen(n, 0);
  for (const auto* set : {&labeled_, &unlabeled_, &dropped_})
    for (std::size_t i : *set) {
      if (i >= n || seen[i]) return false;
      seen[i] = 1;
    }
  return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
}

std::vector<double> AcquisitionCache::values_of(std::span<const std::size_t> indices) const {
  std::vector<double> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(entries_.at(i).value);
  return out;
}

bool AcquisitionCache::has_exactly_keys(std::span<const std::size_t> sorted_indices) const {
  if (entries_.size() != sorted_indices.size()) return false;
  auto it = entries_.begin();
  for (std::size_t i : sorted_indices) {
    if (it->first != i) return false;
    ++it;
  }
  return true;
}

std::size_t worker_count() {
  if (const char* env = std::getenv("CEAL_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

PoolState init_pools(const Dataset& data, double initial_fraction, std::uint64_t seed) {
  const std::size_t n = data.size();
  const auto size = static_cast<std::size_t>(std::llround(initial_fraction * static_cast<double>(n)));
  const auto classes = static_cast<std::size_t>(data.num_classes);
  if (size < classes)
    throw std::invalid_argument("init_pools: initial pool (" + std::to_string(size) +
                                ") smaller than the number of classes");

  Rng rng(derive_seed({seed, kPoolTag}));
  std::vector<std::size_t> class_order(classes);
  for (std::size_t c = 0; c < classes; ++c) class_order[c] = c;
  shuffle(class_order, rng);
  std::vector<std::size_t> quota(classes, size / classes);
  for (std::size_t r = 0; r < size % classes; ++r) ++quota[class_order[r]];

  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < n; ++i) by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);

  std::vector<std::size_t> labeled;
  for (std::size_t c = 0; c < classes; ++c) {
    if (by_class[c].size() < quota[c])
      throw std::invalid_argument("init_pools: class " + std::to_string(c) + " has " +
                                  std::to_string(by_class[c].size()) + " samples, needs " +
                                  std::to_string(quota[c]));
    shuffle(by_class[c], rng);
    labeled.insert(labeled.end(), by_class[c].begin(), by_class[c].begin() + static_cast<std::ptrdiff_t>(quota[c]));
  }
  std::sort(labeled.begin(), labeled.end());
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  return PoolState(labeled, minus(all, labeled));
}

ScoreBatch score_indices(const Classifier& model, const Dataset& data, std::span<const std::size_t> indices,
                         AcquisitionKind kind, int mc_passes, std::uint64_t stream_seed, int iteration,
                         std::size_t workers) {
  ScoreBatch out;
  out.values.resize(indices.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const std::size_t idx = indices[k];
      Rng rng(derive_seed({stream_seed, static_cast<std::uint64_t>(iteration), idx, kScoreTag}));
      if (kind == AcquisitionKind::random) {
        out.values[k] = rng.uniform();
        continue;
      }
      const PredictiveSamples samples =
          mc_predict(model, data.features.row(static_cast<Eigen::Index>(idx)), mc_passes, rng);
      out.values[k] = score(kind, samples, rng);
    }
  };

  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, indices.size() / 64));
  if (workers == 1) {
    work(0, indices.size());
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (indices.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(indices.size(), begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
  }
  if (kind != AcquisitionKind::random) out.mc_forward_passes = indices.size() * static_cast<std::size_t>(mc_passes);
  return out;
}

AcquisitionCache initial_full_evaluation(const Classifier& model, const Dataset& data, const PoolState& pools,
                                         AcquisitionKind kind, int mc_passes, std::uint64_t stream_seed,
                                         std::size_t* af_evaluations, std::size_t* mc_forward_passes) {
  const auto& unlabeled = pools.unlabeled();
  const ScoreBatch batch = score_indices(model, data, unlabeled, kind, mc_passes, stream_seed, 0);
  AcquisitionCache cache;
  for (std::size_t k = 0; k < unlabeled.size(); ++k) cache.set(unlabeled[k], batch.values[k], 0);
  if (af_evaluations) *af_evaluations = unlabeled.size();
  if (mc_forward_passes) *mc_forward_passes = batch.mc_forward_passes;
  return cache;
}

Classifier train_on_pool(const ExperimentConfig& config, const Dataset& train, const PoolState& pools,
                         std::uint64_t seed, int iteration) {
  const auto t = static_cast<std::uint64_t>(iteration);
  Classifier fresh = init_classifier(config.widths(static_cast<int>(train.feature_dim()), train.num_classes),
                                     config.dropout_rate, derive_seed({seed, t, kInitTag}));
  TrainSpec spec = config.train;
  spec.seed = derive_seed({seed, t, kTrainTag});
  return ceal::train(std::move(fresh), train, pools.labeled(), spec);
}

IterationMetrics run_iteration(LoopState& state, const ExperimentConfig& config, const LoadedData& data,
                               int iteration, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  const auto t = static_cast<std::uint64_t>(iteration);
  const auto batch = static_cast<std::size_t>(config.batch_size);

  IterationMetrics m;
  m.iteration = iteration;
  m.full_pool_equivalent = data.train.size() - state.pools.labeled().size();

  std::vector<std::size_t> eligible = state.pools.unlabeled();
  if (eligible.size() < batch)
    throw std::runtime_error("iteration " + std::to_string(iteration) + ": batch size " + std::to_string(batch) +
                             " exceeds remaining unlabeled pool " + std::to_string(eligible.size()));

  if (config.strategy == Strategy::random_full) {
    Rng rng(derive_seed({seed, t, kRandomPickTag}));
    shuffle(eligible, rng);
    m.acquired.assign(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(batch));
    std::sort(m.acquired.begin(), m.acquired.end());
  } else {
    if (config.strategy == Strategy::subsampled) {
      if (config.sampling.prune_mode != PruneMode::none) {
        const std::vector<double> cached = state.cache.values_of(eligible);
        const PruneResult split = prune(cached, config.sampling);
        for (std::size_t p : split.pruned) m.pruned.push_back(eligible[p]);
        std::vector<std::size_t> kept;
        for (std::size_t k : split.kept) kept.push_back(eligible[k]);
        if (kept.size() < batch)
          throw std::runtime_error("iteration " + std::to_string(iteration) +
                                   ": pruning leaves fewer eligible samples than the batch size");
        if (config.sampling.prune_mode == PruneMode::drop_permanently) {
          state.pools.drop(m.pruned);
          state.cache.erase(m.pruned);
        }
        eligible = std::move(kept);
      }
      std::size_t want = std::max(batch, config.sampling.candidate_size.resolve(eligible.size()));
      if (config.sampling.candidate_size.count && *config.sampling.candidate_size.count > eligible.size())
        m.candidate_size_clipped = true;
      want = std::min(want, eligible.size());
      Rng rng(derive_seed({seed, t, kSampleTag}));
      const std::vector<double> cached = state.cache.values_of(eligible);
      const CandidateDraw draw = sample_candidates_tempered(cached, config.sampling.temperature, want, rng);
      for (std::size_t k : draw.indices) m.candidates.push_back(eligible[k]);
    } else {
      m.candidates = eligible;
    }

    const ScoreBatch fresh = score_indices(state.model, data.train, m.candidates, config.acquisition,
                                           config.mc_passes, seed, iteration);
    for (std::size_t k = 0; k < m.candidates.size(); ++k) state.cache.set(m.candidates[k], fresh.values[k], iteration);
    m.af_evaluations = m.candidates.size();
    m.mc_forward_passes = fresh.mc_forward_passes;

    for (std::size_t k : top_k(fresh.values, batch)) m.acquired.push_back(m.candidates[k]);
    std::sort(m.acquired.begin(), m.acquired.end());
  }

  state.pools.label(m.acquired);
  state.cache.erase(m.acquired);

  state.model = train_on_pool(config, data.train, state.pools, seed, iteration);
  m.labeled_size = state.pools.labeled().size();
  m.test_accuracy = evaluate_accuracy(state.model, data.test);
  m.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return m;
}

double RunRecord::mean_total_af_evaluations() const {
  double sum = 0.0;
  for (const auto& r : runs) sum += static_cast<double>(r.iterations.back().cumulative_af_evaluations);
  return sum / static_cast<double>(runs.size());
}

double RunRecord::mean_full_pool_equivalent() const {
  double sum = 0.0;
  for (const auto& r : runs)
    for (const auto& it : r.iterations)
      if (it.iteration > 0) sum += static_cast<double>(it.full_pool_equivalent);
  return sum / static_cast<double>(runs.size());
}

RunRecord run_experiment(const ExperimentConfig& config) { return run_experiment(config, load_data(config.dataset)); }

RunRecord run_experiment(const ExperimentConfig& config, const LoadedData& data, const IterationObserver& observer) {
  data.train.validate();
  data.test.validate();
  if (data.train.feature_dim() != data.test.feature_dim())
    throw std::invalid_argument("train/test feature widths differ");
  config.validate(data.train.size());

  RunRecord record;
  record.config = config;
  for (std::uint64_t seed : config.seeds) {
    try {
      const auto start = std::chrono::steady_clock::now();
      SeedRun run;
      run.seed = seed;
      run.train_size = data.train.size();

      LoopState state;
      state.pools = init_pools(data.train, config.initial_pool_fraction, seed);
      run.initial_unlabeled = state.pools.unlabeled().size();
      state.model = train_on_pool(config, data.train, state.pools, seed, 0);

      IterationMetrics m0;
      m0.iteration = 0;
      m0.labeled_size = state.pools.labeled().size();
      m0.test_accuracy = evaluate_accuracy(state.model, data.test);
      if (config.strategy == Strategy::subsampled) {
        state.cache = initial_full_evaluation(state.model, data.train, state.pools, config.acquisition,
                                              config.mc_passes, seed, &m0.af_evaluations, &m0.mc_forward_passes);
        m0.candidates = state.pools.unlabeled();
      }
      m0.cumulative_af_evaluations = m0.af_evaluations;
      m0.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (observer) observer(state, m0);
      run.iterations.push_back(std::move(m0));

      for (int t = 1; t <= config.iterations; ++t) {
        IterationMetrics m = run_iteration(state, config, data, t, seed);
        m.cumulative_af_evaluations = run.iterations.back().cumulative_af_evaluations + m.af_evaluations;
        if (observer) observer(state, m);
        run.iterations.push_back(std::move(m));
      }
      record.runs.push_back(std::move(run));
    } catch (const std::exception& e) {
      throw std::runtime_error("seed " + std::to_string(seed) + ": " + e.what());
    }
  }

  const std::size_t n_iter = static_cast<std::size_t>(config.iterations) + 1;
  record.mean_accuracy.assign(n_iter, 0.0);
  for (std::size_t t = 0; t < n_iter; ++t) {
    for (const auto& r : record.runs) record.mean_accuracy[t] += r.iterations[t].test_accuracy;
    record.mean_accuracy[t] /= static_cast<double>(record.runs.size());
  }
  return record;
}

ComparisonTable compare_strategies(std::span<const RunRecord> records) {
  if (records.empty()) throw IncompatibleRecords("compare: no records");
  const ExperimentConfig& ref = records.front().config;
  for (const auto& r : records) {
    const ExperimentConfig& c = r.config;
    if (!(c.dataset == ref.dataset)) throw IncompatibleRecords("compare: records use different datasets");
    if (c.iterations != ref.iterations) throw IncompatibleRecords("compare: records differ in iterations");
    if (c.batch_size != ref.batch_size) throw IncompatibleRecords("compare: records differ in batch_size");
    if (c.initial_pool_fraction != ref.initial_pool_fraction)
      throw IncompatibleRecords("compare: records differ in initial_pool_fraction");
    if (c.seeds != ref.seeds) throw IncompatibleRecords("compare: records differ in seeds");
  }

  ComparisonTable table;
  std::optional<double> full_pool_evals;
  for (const auto& r : records)
    if (r.config.strategy == Strategy::full_pool) {
      full_pool_evals = r.mean_total_af_evaluations();
      break;
    }

  for (const auto& r : records) {
    StrategySummary s;
    s.label = r.config.experiment_id;
    s.strategy = r.config.strategy;
    s.acquisition = r.config.acquisition;
    s.mean_accuracy = r.mean_accuracy;
    const std::size_t n_iter = r.mean_accuracy.size();
    s.min_accuracy.assign(n_iter, 1.0);
    s.max_accuracy.assign(n_iter, 0.0);
    for (std::size_t t = 0; t < n_iter; ++t) {
      s.labeled_size.push_back(r.runs.front().iterations[t].labeled_size);
      for (const auto& run : r.runs) {
        s.min_accuracy[t] = std::min(s.min_accuracy[t], run.iterations[t].test_accuracy);
        s.max_accuracy[t] = std::max(s.max_accuracy[t], run.iterations[t].test_accuracy);
      }
    }
    s.final_accuracy = r.final_mean_accuracy();
    s.final_delta = s.final_accuracy - records.front().final_mean_accuracy();
    s.total_af_evaluations = r.mean_total_af_evaluations();
    s.full_pool_equivalent = r.mean_full_pool_equivalent();
    s.savings_ratio = 1.0 - s.total_af_evaluations / s.full_pool_equivalent;
    if (full_pool_evals && *full_pool_evals > 0.0) s.savings_vs_full_pool = 1.0 - s.total_af_evaluations / *full_pool_evals;
    table.entries.push_back(std::move(s));
  }
  return table;
}

}  // namespace ceal
