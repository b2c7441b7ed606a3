#include "ceal/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "ceal/config.hpp"
#include "ceal/results.hpp"

namespace ceal {

namespace fs = std::filesystem;

namespace {

// Collects output files in memory and writes them in one go. If anything
// fails, every file and directory it created is removed again.
class OutputSet {
 public:
  explicit OutputSet(fs::path root) : root_(std::move(root)) {}

  void add(const fs::path& relative, std::string contents) { files_.emplace_back(relative, std::move(contents)); }

  /// Creates the root directory (if needed) and checks that it is writable.
  void prepare() {
    ensure_dir(root_);
    const fs::path probe = root_ / ".ceal-write-probe";
    std::ofstream out(probe);
    if (!out) {
      rollback();
      throw std::runtime_error("output directory " + root_.string() + " is not writable");
    }
    out.close();
    fs::remove(probe);
  }

  void commit() {
    try {
      for (const auto& [rel, contents] : files_) {
        const fs::path path = root_ / rel;
        ensure_dir(path.parent_path());
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        created_files_.push_back(path);
        out << contents;
        out.close();
        if (!out) throw std::runtime_error("write failed for " + path.string());
      }
    } catch (...) {
      rollback();
      throw;
    }
  }

  void rollback() {
    std::error_code ec;
    for (const auto& f : created_files_) fs::remove(f, ec);
    for (auto it = created_dirs_.rbegin(); it != created_dirs_.rend(); ++it) fs::remove(*it, ec);
    created_files_.clear();
    created_dirs_.clear();
  }

 private:
  void ensure_dir(const fs::path& dir) {
    if (dir.empty() || fs::exists(dir)) return;
    ensure_dir(dir.parent_path());
    std::error_code ec;
    if (!fs::create_directory(dir, ec) && !fs::exists(dir))
      throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
    created_dirs_.push_back(dir);
  }

  fs::path root_;
  std::vector<std::pair<fs::path, std::string>> files_;
  std::vector<fs::path> created_files_;
  std::vector<fs::path> created_dirs_;
};

std::string results_csv_text(const RunRecord& record, const RunOptions& options) {
  std::ostringstream out;
  write_results_csv(out, to_rows(record, options.wall_time));
  return out.str();
}

void add_run_outputs(OutputSet& outputs, const fs::path& prefix, const RunRecord& record, const RunOptions& options) {
  outputs.add(prefix / "results.csv", results_csv_text(record, options));
  outputs.add(prefix / "summary.json", summary_json(record).dump(2) + "\n");
  outputs.add(prefix / "resolved-config.json", config_to_json(record.config).dump(2) + "\n");
}

void log_record(std::ostream& log, const RunRecord& r) {
  log << r.config.experiment_id << ": final mean accuracy " << format_double(r.final_mean_accuracy())
      << ", mean AF evaluations " << format_double(r.mean_total_af_evaluations()) << "\n";
  for (const auto& run : r.runs)
    for (const auto& m : run.iterations)
      if (m.candidate_size_clipped)
        log << "warning: seed " << run.seed << " iteration " << m.iteration
            << ": candidate size clipped to the eligible pool (" << m.candidates.size() << ")\n";
}

}  // namespace

void check_comparable(std::span<const ExperimentConfig> configs) {
  if (configs.empty()) throw IncompatibleRecords("compare: no configs");
  const ExperimentConfig& ref = configs.front();
  std::set<std::string> labels;
  for (const auto& c : configs) {
    if (!(c.dataset == ref.dataset)) throw IncompatibleRecords("compare: configs use different datasets");
    if (c.iterations != ref.iterations) throw IncompatibleRecords("compare: configs differ in iterations");
    if (c.batch_size != ref.batch_size) throw IncompatibleRecords("compare: configs differ in batch_size");
    if (c.initial_pool_fraction != ref.initial_pool_fraction)
      throw IncompatibleRecords("compare: configs differ in initial_pool_fraction");
    if (c.seeds != ref.seeds) throw IncompatibleRecords("compare: configs differ in seeds");
    if (c.hidden != ref.hidden || c.dropout_rate != ref.dropout_rate || !(c.train == ref.train) ||
        c.mc_passes != ref.mc_passes)
      throw IncompatibleRecords("compare: configs differ in model or training settings");
    if (!labels.insert(c.experiment_id).second)
      throw IncompatibleRecords("compare: duplicate strategy \"" + c.experiment_id + "\"");
  }
  for (std::size_t i = 0; i < configs.size(); ++i)
    for (std::size_t j = i + 1; j < configs.size(); ++j) {
      const auto& a = configs[i];
      const auto& b = configs[j];
      const bool same_policy = a.strategy != Strategy::subsampled || a.sampling == b.sampling;
      if (a.strategy == b.strategy && a.acquisition == b.acquisition && same_policy)
        throw IncompatibleRecords("compare: duplicate strategy (\"" + a.experiment_id + "\" and \"" +
                                  b.experiment_id + "\")");
    }
}

int cmd_run(const fs::path& config_path, const fs::path& out_dir, const RunOptions& options, std::ostream& log) {
  ExperimentConfig config;
  try {
    config = parse_config(config_path);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  OutputSet outputs(out_dir);
  try {
    outputs.prepare();
    const RunRecord record = run_experiment(config);
    add_run_outputs(outputs, "", record, options);
    outputs.commit();
    log_record(log, record);
  } catch (const std::exception& e) {
    outputs.rollback();
    log << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_compare(const std::vector<fs::path>& config_paths, const fs::path& out_dir, const RunOptions& options,
                std::ostream& log) {
  std::vector<ExperimentConfig> configs;
  try {
    for (const auto& p : config_paths) configs.push_back(parse_config(p));
    check_comparable(configs);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  OutputSet outputs(out_dir);
  try {
    outputs.prepare();
    const LoadedData data = load_data(configs.front().dataset);
    std::vector<RunRecord> records;
    std::vector<ResultsRow> merged;
    for (const auto& c : configs) {
      records.push_back(run_experiment(c, data));
      log_record(log, records.back());
      add_run_outputs(outputs, c.experiment_id, records.back(), options);
      auto rows = to_rows(records.back(), options.wall_time);
      merged.insert(merged.end(), rows.begin(), rows.end());
    }
    const ComparisonTable table = compare_strategies(records);
    std::ostringstream csv;
    write_results_csv(csv, merged);
    outputs.add("comparison.csv", csv.str());
    std::ostringstream plot;
    write_plot_data(plot, table);
    outputs.add("plot_data.csv", plot.str());
    outputs.add("comparison.json", comparison_json(table).dump(2) + "\n");
    outputs.commit();
  } catch (const std::exception& e) {
    outputs.rollback();
    log << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

std::vector<ReportEntry> build_report(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() == "results.csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no results found");

  // experiment id -> seed -> rows, in file discovery order.
  std::vector<std::string> order;
  std::map<std::string, std::map<std::uint64_t, std::vector<ResultsRow>>> grouped;
  for (const auto& f : files)
    for (auto& row : read_results_csv(f)) {
      if (!grouped.count(row.experiment_id)) order.push_back(row.experiment_id);
      grouped[row.experiment_id][row.seed].push_back(std::move(row));
    }

  std::vector<ReportEntry> entries;
  for (const auto& id : order) {
    ReportEntry e;
    e.experiment_id = id;
    e.final_min_accuracy = 1.0;
    double acc_sum = 0.0;
    double eval_sum = 0.0;
    for (const auto& [seed, rows] : grouped[id]) {
      const auto last = std::max_element(rows.begin(), rows.end(),
                                         [](const ResultsRow& a, const ResultsRow& b) { return a.iteration < b.iteration; });
      e.strategy = last->strategy;
      e.acquisition = last->acquisition;
      acc_sum += last->test_accuracy;
      eval_sum += static_cast<double>(last->cumulative_af_evaluations);
      e.final_min_accuracy = std::min(e.final_min_accuracy, last->test_accuracy);
      e.final_max_accuracy = std::max(e.final_max_accuracy, last->test_accuracy);
      ++e.seeds;
    }
    e.final_mean_accuracy = acc_sum / static_cast<double>(e.seeds);
    e.mean_total_af_evaluations = eval_sum / static_cast<double>(e.seeds);
    entries.push_back(std::move(e));
  }

  for (auto& e : entries) {
    // Prefer the full-pool run with the same acquisition function.
    const ReportEntry* full = nullptr;
    for (const auto& f : entries)
      if (f.strategy == "full_pool" && (full == nullptr || (f.acquisition == e.acquisition && full->acquisition != e.acquisition)))
        full = &f;
    if (full && full->mean_total_af_evaluations > 0.0)
      e.savings_ratio = 1.0 - e.mean_total_af_evaluations / full->mean_total_af_evaluations;
  }
  return entries;
}

int cmd_report(const fs::path& dir, std::ostream& out, std::ostream& err) {
  std::vector<ReportEntry> entries;
  try {
    entries = build_report(dir);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  char line[256];
  std::snprintf(line, sizeof line, "%-28s %-12s %-17s %5s %9s %19s %12s %9s\n", "experiment", "strategy",
                "acquisition", "seeds", "final_acc", "range", "af_evals", "savings");
  out << line;
  for (const auto& e : entries) {
    char range[64];
    std::snprintf(range, sizeof range, "[%.4f, %.4f]", e.final_min_accuracy, e.final_max_accuracy);
    char savings[32];
    if (e.savings_ratio) {
      std::snprintf(savings, sizeof savings, "%.6f", *e.savings_ratio);
    } else {
      std::snprintf(savings, sizeof savings, "n/a");
    }
    std::snprintf(line, sizeof line, "%-28s %-12s %-17s %5zu %9.4f %19s %12.1f %9s\n", e.experiment_id.c_str(),
                  e.strategy.c_str(), e.acquisition.c_str(), e.seeds, e.final_mean_accuracy, range,
                  e.mean_total_af_evaluations, savings);
    out << line;
  }
  return kExitOk;
}

}  // namespace ceal
