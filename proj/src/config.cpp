#include "ceal/config.hpp"

#include <fstream>
#include <set>

namespace ceal {

using nlohmann::json;

namespace {

// Reads typed fields out of one JSON object and remembers which keys were
// consumed, so leftovers can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key);
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    return as<T>(key);
  }

  template <typename T>
  T require(const std::string& key) {
    if (!has(key)) throw ConfigError(field(key), "required key is missing");
    return as<T>(key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void reject_unknown() const {
    for (const auto& [key, value] : obj_.items())
      if (!seen_.count(key)) throw ConfigError(field(key), "unknown key");
  }

 private:
  template <typename T>
  T as(const std::string& key) {
    const json& v = obj_.at(key);
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError(field(key), "expected a number");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
        if constexpr (std::is_unsigned_v<T>)
          if (v.is_number_integer() && v.get<long long>() < 0 && !v.is_number_unsigned())
            throw ConfigError(field(key), "expected a non-negative integer");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(field(key), "expected a string");
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(field(key), e.what());
    }
  }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

DatasetSpec dataset_from_json(const json& j) {
  ObjectReader r(j, "dataset");
  DatasetSpec d;
  d.kind = r.get<std::string>("kind", "blobs");
  if (d.kind == "blobs") {
    d.num_classes = r.get<int>("num_classes", d.num_classes);
    d.samples_per_class = r.get<int>("samples_per_class", d.samples_per_class);
    d.spread = r.get<double>("spread", d.spread);
    d.seed = r.get<std::uint64_t>("seed", d.seed);
    d.test_fraction = r.get<double>("test_fraction", d.test_fraction);
  } else if (d.kind == "mnist") {
    d.train_images = r.require<std::string>("train_images");
    d.train_labels = r.require<std::string>("train_labels");
    d.test_images = r.require<std::string>("test_images");
    d.test_labels = r.require<std::string>("test_labels");
  } else {
    throw ConfigError("dataset.kind", "must be \"blobs\" or \"mnist\", got \"" + d.kind + "\"");
  }
  r.reject_unknown();
  return d;
}

json dataset_to_json(const DatasetSpec& d) {
  if (d.is_mnist())
    return {{"kind", d.kind},
            {"train_images", d.train_images},
            {"train_labels", d.train_labels},
            {"test_images", d.test_images},
            {"test_labels", d.test_labels}};
  return {{"kind", d.kind},         {"num_classes", d.num_classes}, {"samples_per_class", d.samples_per_class},
          {"spread", d.spread},     {"seed", d.seed},               {"test_fraction", d.test_fraction}};
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ObjectReader r(j, "");
  ExperimentConfig c;

  if (!r.has("dataset")) throw ConfigError("dataset", "required key is missing");
  c.dataset = dataset_from_json(r.raw("dataset"));
  const bool mnist = c.dataset.is_mnist();
  c.hidden = mnist ? std::vector<int>{128} : std::vector<int>{32};
  c.train.learning_rate = mnist ? 0.1 : 0.05;

  const auto strategy = r.require<std::string>("strategy");
  if (auto s = parse_strategy(strategy)) {
    c.strategy = *s;
  } else {
    throw ConfigError("strategy", "must be random_full, full_pool or subsampled, got \"" + strategy + "\"");
  }
  const auto acquisition = r.get<std::string>("acquisition", "entropy");
  if (auto a = parse_acquisition_kind(acquisition)) {
    c.acquisition = *a;
  } else {
    throw ConfigError("acquisition", "must be entropy, variation_ratios or random, got \"" + acquisition + "\"");
  }
  c.iterations = r.require<int>("iterations");
  c.batch_size = r.require<int>("batch_size");
  c.initial_pool_fraction = r.get<double>("initial_pool_fraction", c.initial_pool_fraction);
  c.mc_passes = r.get<int>("mc_passes", c.mc_passes);
  c.seeds = r.get<std::vector<std::uint64_t>>("seeds", c.seeds);
  c.experiment_id = r.get<std::string>(
      "experiment_id", std::string(to_string(c.strategy)) + "-" + std::string(to_string(c.acquisition)));

  if (r.has("sampling")) {
    ObjectReader s(r.raw("sampling"), "sampling");
    c.sampling.temperature = s.get<double>("temperature", c.sampling.temperature);
    if (s.has("candidate_size")) {
      c.sampling.candidate_size.count = s.get<std::size_t>("candidate_size", 0);
      c.sampling.candidate_size.fraction.reset();
    }
    if (s.has("candidate_fraction")) c.sampling.candidate_size.fraction = s.get<double>("candidate_fraction", 0.0);
    const auto mode = s.get<std::string>("prune_mode", "none");
    if (auto m = parse_prune_mode(mode)) {
      c.sampling.prune_mode = *m;
    } else {
      throw ConfigError("sampling.prune_mode", "must be none, exclude_this_round or drop_permanently");
    }
    c.sampling.prune_quantile = s.get<double>("prune_quantile", c.sampling.prune_quantile);
    s.reject_unknown();
  }
  if (r.has("model")) {
    ObjectReader m(r.raw("model"), "model");
    c.hidden = m.get<std::vector<int>>("hidden", c.hidden);
    c.dropout_rate = m.get<double>("dropout", c.dropout_rate);
    m.reject_unknown();
  }
  if (r.has("train")) {
    ObjectReader t(r.raw("train"), "train");
    c.train.epochs = t.get<int>("epochs", c.train.epochs);
    c.train.batch_size = t.get<int>("batch_size", c.train.batch_size);
    c.train.learning_rate = t.get<double>("learning_rate", c.train.learning_rate);
    c.train.momentum = t.get<double>("momentum", c.train.momentum);
    t.reject_unknown();
  }
  r.reject_unknown();

  try {
    c.validate(c.dataset.train_size());
  } catch (const std::invalid_argument& e) {
    throw ConfigError("", std::string("validation failed: ") + e.what());
  }
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json sampling = {{"temperature", c.sampling.temperature},
                   {"prune_mode", std::string(to_string(c.sampling.prune_mode))},
                   {"prune_quantile", c.sampling.prune_quantile}};
  if (c.sampling.candidate_size.count) sampling["candidate_size"] = *c.sampling.candidate_size.count;
  if (c.sampling.candidate_size.fraction) sampling["candidate_fraction"] = *c.sampling.candidate_size.fraction;
  return {
      {"experiment_id", c.experiment_id},
      {"dataset", dataset_to_json(c.dataset)},
      {"strategy", std::string(to_string(c.strategy))},
      {"acquisition", std::string(to_string(c.acquisition))},
      {"iterations", c.iterations},
      {"batch_size", c.batch_size},
      {"initial_pool_fraction", c.initial_pool_fraction},
      {"mc_passes", c.mc_passes},
      {"seeds", c.seeds},
      {"sampling", sampling},
      {"model", {{"hidden", c.hidden}, {"dropout", c.dropout_rate}}},
      {"train",
       {{"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"learning_rate", c.train.learning_rate},
        {"momentum", c.train.momentum}}},
  };
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", "parse error in " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace ceal
