#include "ceal/results.hpp"

#include <charconv>
#include <fstream>
#include <ostream>

namespace ceal {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<ResultsRow> to_rows(const RunRecord& record, bool with_wall_time) {
  std::vector<ResultsRow> rows;
  for (const auto& run : record.runs)
    for (const auto& m : run.iterations) {
      ResultsRow r;
      r.experiment_id = record.config.experiment_id;
      r.strategy = std::string(to_string(record.config.strategy));
      r.acquisition = std::string(to_string(record.config.acquisition));
      r.seed = run.seed;
      r.iteration = m.iteration;
      r.labeled_size = m.labeled_size;
      r.test_accuracy = m.test_accuracy;
      r.af_evaluations = m.af_evaluations;
      r.cumulative_af_evaluations = m.cumulative_af_evaluations;
      if (with_wall_time) r.wall_time_s = m.wall_time_seconds;
      rows.push_back(std::move(r));
    }
  return rows;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_results_csv(std::ostream& out, const std::vector<ResultsRow>& rows) {
  out << kResultsHeader << '\n';
  for (const auto& r : rows) {
    out << csv_field(r.experiment_id) << ',' << csv_field(r.strategy) << ',' << csv_field(r.acquisition) << ','
        << r.seed << ',' << r.iteration << ',' << r.labeled_size << ',' << format_double(r.test_accuracy) << ','
        << r.af_evaluations << ',' << r.cumulative_af_evaluations << ','
        << (r.wall_time_s ? format_double(*r.wall_time_s) : std::string()) << '\n';
  }
}

std::vector<std::string> split_csv_record(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          fields.back() += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  if (quoted) throw MalformedResults("unterminated quoted field");
  return fields;
}

namespace {

template <typename T>
T parse_number(const std::string& s, const std::string& what) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw MalformedResults("bad " + what + " value \"" + s + "\"");
  return v;
}

}  // namespace

std::vector<ResultsRow> read_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MalformedResults("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader)
    throw MalformedResults(path.string() + ": header does not match the results schema");
  std::vector<ResultsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_record(line);
    if (f.size() != 10) throw MalformedResults(path.string() + ": expected 10 fields, got " + std::to_string(f.size()));
    ResultsRow r;
    r.experiment_id = f[0];
    r.strategy = f[1];
    r.acquisition = f[2];
    r.seed = parse_number<std::uint64_t>(f[3], "seed");
    r.iteration = parse_number<int>(f[4], "iteration");
    r.labeled_size = parse_number<std::size_t>(f[5], "labeled_size");
    r.test_accuracy = parse_number<double>(f[6], "test_accuracy");
    r.af_evaluations = parse_number<std::size_t>(f[7], "af_evaluations");
    r.cumulative_af_evaluations = parse_number<std::size_t>(f[8], "cumulative_af_evaluations");
    if (!f[9].empty()) r.wall_time_s = parse_number<double>(f[9], "wall_time_s");
    rows.push_back(std::move(r));
  }
  return rows;
}

json summary_json(const RunRecord& record) {
  const auto& cfg = record.config;
  json per_seed = json::array();
  std::size_t mc_passes = 0;
  for (const auto& run : record.runs) {
    std::size_t full_equiv = 0;
    for (const auto& m : run.iterations) {
      if (m.iteration > 0) full_equiv += m.full_pool_equivalent;
      mc_passes += m.mc_forward_passes;
    }
    per_seed.push_back({{"seed", run.seed},
                        {"final_accuracy", run.iterations.back().test_accuracy},
                        {"total_af_evaluations", run.iterations.back().cumulative_af_evaluations},
                        {"full_pool_equivalent_evaluations", full_equiv}});
  }
  const double evals = record.mean_total_af_evaluations();
  const double full = record.mean_full_pool_equivalent();
  return {
      {"experiment_id", cfg.experiment_id},
      {"strategy", std::string(to_string(cfg.strategy))},
      {"acquisition", std::string(to_string(cfg.acquisition))},
      {"iterations", cfg.iterations},
      {"batch_size", cfg.batch_size},
      {"train_size", record.runs.front().train_size},
      {"initial_unlabeled", record.runs.front().initial_unlabeled},
      {"final_labeled_size", record.runs.front().iterations.back().labeled_size},
      {"final_mean_accuracy", record.final_mean_accuracy()},
      {"mean_accuracy_curve", record.mean_accuracy},
      {"mean_total_af_evaluations", evals},
      {"mean_full_pool_equivalent_evaluations", full},
      {"savings_ratio", full > 0.0 ? 1.0 - evals / full : 0.0},
      {"total_mc_forward_passes", mc_passes},
      {"per_seed", per_seed},
  };
}

void write_plot_data(std::ostream& out, const ComparisonTable& table) {
  out << "strategy,iteration,labeled_size,mean_accuracy,min_accuracy,max_accuracy\n";
  for (const auto& e : table.entries)
    for (std::size_t t = 0; t < e.mean_accuracy.size(); ++t)
      out << csv_field(e.label) << ',' << t << ',' << e.labeled_size[t] << ',' << format_double(e.mean_accuracy[t])
          << ',' << format_double(e.min_accuracy[t]) << ',' << format_double(e.max_accuracy[t]) << '\n';
}

json comparison_json(const ComparisonTable& table) {
  json entries = json::array();
  for (const auto& e : table.entries) {
    json j = {{"label", e.label},
              {"strategy", std::string(to_string(e.strategy))},
              {"acquisition", std::string(to_string(e.acquisition))},
              {"final_accuracy", e.final_accuracy},
              {"final_delta_vs_first", e.final_delta},
              {"mean_total_af_evaluations", e.total_af_evaluations},
              {"mean_full_pool_equivalent_evaluations", e.full_pool_equivalent},
              {"savings_ratio", e.savings_ratio}};
    j["savings_vs_full_pool"] = e.savings_vs_full_pool ? json(*e.savings_vs_full_pool) : json(nullptr);
    entries.push_back(std::move(j));
  }
  return {{"entries", entries}};
}

}  // namespace ceal
