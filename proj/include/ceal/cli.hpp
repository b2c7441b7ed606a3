#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ceal/loop.hpp"

namespace ceal {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitRuntime = 2 };

struct RunOptions {
  bool wall_time = false;  // fill the wall_time_s column
};

/// Throws IncompatibleRecords when configs differ in anything other than
/// strategy, acquisition, sampling policy or experiment id, or when two
/// configs would produce the same curve label or the same strategy.
void check_comparable(std::span<const ExperimentConfig> configs);

/// Writes results.csv, summary.json and resolved-config.json into out_dir.
int cmd_run(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
            const RunOptions& options, std::ostream& log);

/// Runs every config and writes per-experiment outputs under out_dir/<id>/
/// plus comparison.csv, comparison.json and plot_data.csv.
int cmd_compare(const std::vector<std::filesystem::path>& config_paths, const std::filesystem::path& out_dir,
                const RunOptions& options, std::ostream& log);

struct ReportEntry {
  std::string experiment_id;
  std::string strategy;
  std::string acquisition;
  std::size_t seeds = 0;
  double final_mean_accuracy = 0.0;
  double final_min_accuracy = 0.0;
  double final_max_accuracy = 0.0;
  double mean_total_af_evaluations = 0.0;
  std::optional<double> savings_ratio;  // against a full_pool experiment in the same directory
};

/// Aggregates every results.csv under dir (recursively). Throws
/// std::runtime_error("no results found") when there is none.
std::vector<ReportEntry> build_report(const std::filesystem::path& dir);

int cmd_report(const std::filesystem::path& dir, std::ostream& out, std::ostream& err);

}  // namespace ceal
