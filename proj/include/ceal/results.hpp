#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ceal/loop.hpp"

namespace ceal {

/// One results.csv line: one (seed, iteration) of one experiment.
struct ResultsRow {
  std::string experiment_id;
  std::string strategy;
  std::string acquisition;
  std::uint64_t seed = 0;
  int iteration = 0;
  std::size_t labeled_size = 0;
  double test_accuracy = 0.0;
  std::size_t af_evaluations = 0;
  std::size_t cumulative_af_evaluations = 0;
  std::optional<double> wall_time_s;

  bool operator==(const ResultsRow&) const = default;
};

inline constexpr const char* kResultsHeader =
    "experiment_id,strategy,acquisition,seed,iteration,labeled_size,test_accuracy,"
    "af_evaluations,cumulative_af_evaluations,wall_time_s";

/// Rows in seed order, then iteration order. Wall time is left empty unless
/// requested, which keeps the file byte-stable across runs.
std::vector<ResultsRow> to_rows(const RunRecord& record, bool with_wall_time);

/// RFC-4180 CSV with the fixed header and '\n' line endings.
void write_results_csv(std::ostream& out, const std::vector<ResultsRow>& rows);

struct MalformedResults : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<ResultsRow> read_results_csv(const std::filesystem::path& path);

/// Splits one CSV record (no trailing newline) honoring RFC-4180 quotes.
std::vector<std::string> split_csv_record(const std::string& line);
std::string csv_field(const std::string& s);

/// Final seed-mean accuracy, evaluation totals and savings, all recomputable
/// from the rows plus the training-set size.
nlohmann::json summary_json(const RunRecord& record);

/// strategy,iteration,labeled_size,mean_accuracy,min_accuracy,max_accuracy
void write_plot_data(std::ostream& out, const ComparisonTable& table);

nlohmann::json comparison_json(const ComparisonTable& table);

/// Shortest decimal text that reads back to exactly the same double.
std::string format_double(double v);

}  // namespace ceal
