#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ceal/cli.hpp"
#include "ceal/config.hpp"
#include "ceal/results.hpp"
#include "doctest.h"

namespace fs = std::filesystem;
using namespace ceal;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ceal_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json small_json(const std::string& strategy) {
  return {{"dataset", {{"kind", "blobs"}, {"num_classes", 3}, {"samples_per_class", 80}, {"spread", 1.5}}},
          {"strategy", strategy},
          {"iterations", 3},
          {"batch_size", 5},
          {"initial_pool_fraction", 0.05},
          {"mc_passes", 4},
          {"seeds", {0, 1}},
          {"sampling", {{"candidate_size", 30}}},
          {"model", {{"hidden", {8}}}},
          {"train", {{"epochs", 3}}}};
}

fs::path write_json(const fs::path& p, const json& j) {
  std::ofstream(p) << j.dump(2);
  return p;
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("config defaults and dataset-dependent model settings") {
  const ExperimentConfig c = config_from_json(
      {{"dataset", {{"kind", "blobs"}}}, {"strategy", "subsampled"}, {"iterations", 10}, {"batch_size", 50}});
  CHECK(c.acquisition == AcquisitionKind::entropy);
  CHECK(c.mc_passes == 25);
  CHECK(c.sampling.temperature == 1.0);
  CHECK(c.sampling.prune_mode == PruneMode::none);
  CHECK(c.initial_pool_fraction == 0.01);
  CHECK(c.seeds == std::vector<std::uint64_t>{0, 1, 2});
  CHECK(c.hidden == std::vector<int>{32});
  CHECK(c.experiment_id == "subsampled-entropy");

  const json mnist = {{"dataset",
                       {{"kind", "mnist"},
                        {"train_images", "a"},
                        {"train_labels", "b"},
                        {"test_images", "c"},
                        {"test_labels", "d"}}},
                      {"strategy", "full_pool"},
                      {"iterations", 10},
                      {"batch_size", 50}};
  const ExperimentConfig m = config_from_json(mnist);
  CHECK(m.hidden == std::vector<int>{128});
  CHECK(m.train.learning_rate == 0.1);
}

TEST_CASE("config errors name the offending field") {
  json j = small_json("subsampled");
  SUBCASE("acquisitions exceed the pool") {
    j["iterations"] = 100;
    j["batch_size"] = 50;
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
  }
  SUBCASE("unknown key") {
    j["sampling"]["temprature"] = 2.0;
    try {
      config_from_json(j);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.field() == "sampling.temprature");
    }
  }
  SUBCASE("missing required key") {
    j.erase("batch_size");
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
  }
  SUBCASE("wrong type") {
    j["iterations"] = "ten";
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
  }
  SUBCASE("bad enum") {
    j["acquisition"] = "bald";
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
  }
  SUBCASE("negative temperature") {
    j["sampling"]["temperature"] = -1.0;
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
  }
}

TEST_CASE("resolved config round trips") {
  json j = small_json("subsampled");
  j["sampling"]["prune_mode"] = "exclude_this_round";
  j["sampling"]["prune_quantile"] = 0.1;
  j["acquisition"] = "variation_ratios";
  const ExperimentConfig c = config_from_json(j);
  CHECK(config_from_json(config_to_json(c)) == c);
  CHECK(config_to_json(config_from_json(config_to_json(c))) == config_to_json(c));
}

TEST_CASE("run writes one row per seed and iteration, byte-identical on repeat") {
  const fs::path dir = fresh_dir("run");
  const fs::path cfg = write_json(dir / "c.json", small_json("subsampled"));
  std::ostringstream log;
  REQUIRE(cmd_run(cfg, dir / "a", {}, log) == kExitOk);
  REQUIRE(cmd_run(cfg, dir / "b", {}, log) == kExitOk);

  const std::string a = slurp(dir / "a" / "results.csv");
  CHECK(a == slurp(dir / "b" / "results.csv"));
  CHECK(slurp(dir / "a" / "summary.json") == slurp(dir / "b" / "summary.json"));
  CHECK(a.rfind(std::string(kResultsHeader) + "\n", 0) == 0);
  CHECK(count_lines(a) == 1 + 2 * 4);

  const auto rows = read_results_csv(dir / "a" / "results.csv");
  REQUIRE(rows.size() == 8);
  for (const auto& r : rows) CHECK_FALSE(r.wall_time_s.has_value());

  // Summary values recomputed from the CSV and the training-set size.
  const json s = json::parse(slurp(dir / "a" / "summary.json"));
  const std::size_t n = s["train_size"];
  std::map<std::uint64_t, ResultsRow> last;
  std::map<std::uint64_t, double> full_equiv;
  for (const auto& r : rows) {
    if (r.iteration == 3) last[r.seed] = r;
    if (r.iteration < 3) full_equiv[r.seed] += static_cast<double>(n - r.labeled_size);
  }
  const double acc = (last[0].test_accuracy + last[1].test_accuracy) / 2.0;
  const double evals = static_cast<double>(last[0].cumulative_af_evaluations + last[1].cumulative_af_evaluations) / 2.0;
  const double full = (full_equiv[0] + full_equiv[1]) / 2.0;
  CHECK(s["final_mean_accuracy"].get<double>() == doctest::Approx(acc).epsilon(1e-15));
  CHECK(s["mean_total_af_evaluations"].get<double>() == evals);
  CHECK(s["mean_full_pool_equivalent_evaluations"].get<double>() == full);
  CHECK(s["savings_ratio"].get<double>() == doctest::Approx(1.0 - evals / full).epsilon(1e-15));

  const ExperimentConfig resolved = parse_config(dir / "a" / "resolved-config.json");
  CHECK(resolved == parse_config(cfg));

  RunOptions timed;
  timed.wall_time = true;
  REQUIRE(cmd_run(cfg, dir / "t", timed, log) == kExitOk);
  for (const auto& r : read_results_csv(dir / "t" / "results.csv")) {
    REQUIRE(r.wall_time_s.has_value());
    CHECK(*r.wall_time_s >= 0.0);
  }
}

TEST_CASE("run failures exit nonzero without partial output") {
  const fs::path dir = fresh_dir("run_fail");
  const fs::path cfg = write_json(dir / "c.json", small_json("subsampled"));
  std::ostringstream log;

  // A regular file where the output directory should go.
  std::ofstream(dir / "blocked") << "x";
  CHECK(cmd_run(cfg, dir / "blocked" / "out", {}, log) != kExitOk);
  CHECK_FALSE(fs::exists(dir / "blocked" / "out"));

  json bad = small_json("subsampled");
  bad["bogus"] = 1;
  CHECK(cmd_run(write_json(dir / "bad.json", bad), dir / "out", {}, log) == kExitUsage);
  CHECK_FALSE(fs::exists(dir / "out"));
  CHECK(cmd_run(dir / "missing.json", dir / "out", {}, log) == kExitUsage);

  // Fails at run time: every sample pruned away leaves too few to acquire.
  json starve = small_json("subsampled");
  starve["sampling"]["prune_mode"] = "drop_permanently";
  starve["sampling"]["prune_quantile"] = 0.99;
  starve["iterations"] = 8;
  CHECK(cmd_run(write_json(dir / "starve.json", starve), dir / "starved", {}, log) == kExitRuntime);
  CHECK_FALSE(fs::exists(dir / "starved"));
}

TEST_CASE("results CSV quoting round trips") {
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(split_csv_record("\"a,b\",c,\"x\"\"y\",") == std::vector<std::string>{"a,b", "c", "x\"y", ""});
  CHECK_THROWS_AS(split_csv_record("\"open"), MalformedResults);

  ResultsRow r;
  r.experiment_id = "odd, \"id\"";
  r.strategy = "subsampled";
  r.acquisition = "entropy";
  r.test_accuracy = 0.1 + 0.2;
  const fs::path dir = fresh_dir("quote");
  {
    std::ofstream out(dir / "results.csv");
    write_results_csv(out, {r});
  }
  const auto back = read_results_csv(dir / "results.csv");
  REQUIRE(back.size() == 1);
  CHECK(back[0] == r);
  CHECK(std::stod(format_double(0.1 + 0.2)) == 0.1 + 0.2);
}

TEST_CASE("compare writes per-strategy outputs and consistent deltas") {
  const fs::path dir = fresh_dir("compare");
  std::vector<fs::path> cfgs;
  for (const char* s : {"random_full", "full_pool", "subsampled"})
    cfgs.push_back(write_json(dir / (std::string(s) + ".json"), small_json(s)));
  std::ostringstream log;
  REQUIRE(cmd_compare(cfgs, dir / "out", {}, log) == kExitOk);

  const std::string plot = slurp(dir / "out" / "plot_data.csv");
  CHECK(count_lines(plot) == 1 + 3 * 4);
  std::set<std::string> labels;
  std::istringstream lines(plot);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "strategy,iteration,labeled_size,mean_accuracy,min_accuracy,max_accuracy");
  while (std::getline(lines, line)) labels.insert(split_csv_record(line)[0]);
  CHECK(labels.size() == 3);

  for (const char* id : {"random_full-entropy", "full_pool-entropy", "subsampled-entropy"}) {
    CHECK(fs::exists(dir / "out" / id / "results.csv"));
    CHECK(fs::exists(dir / "out" / id / "summary.json"));
  }
  CHECK(count_lines(slurp(dir / "out" / "comparison.csv")) == 1 + 3 * 8);

  // Deltas agree with compare_strategies over independently produced runs.
  std::vector<RunRecord> records;
  for (const auto& p : cfgs) records.push_back(run_experiment(parse_config(p)));
  const ComparisonTable table = compare_strategies(records);
  const json cj = json::parse(slurp(dir / "out" / "comparison.json"));
  REQUIRE(cj["entries"].size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(cj["entries"][i]["final_delta_vs_first"].get<double>() == table.entries[i].final_delta);
    CHECK(cj["entries"][i]["savings_ratio"].get<double>() == table.entries[i].savings_ratio);
  }

  // The same run through `report` sees the same savings.
  const auto report = build_report(dir / "out");
  REQUIRE(report.size() == 3);
  for (const auto& e : report) {
    if (e.strategy == "subsampled") {
      REQUIRE(e.savings_ratio.has_value());
      CHECK(*e.savings_ratio == doctest::Approx(*table.entries[2].savings_vs_full_pool).epsilon(1e-15));
    }
  }
}

TEST_CASE("compare rejects duplicate and incompatible configs") {
  const fs::path dir = fresh_dir("compare_bad");
  const fs::path a = write_json(dir / "a.json", small_json("subsampled"));
  std::ostringstream log;
  CHECK(cmd_compare({a, a}, dir / "out", {}, log) == kExitUsage);
  CHECK(log.str().find("duplicate") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "out"));

  json other = small_json("full_pool");
  other["iterations"] = 2;
  const fs::path b = write_json(dir / "b.json", other);
  CHECK(cmd_compare({a, b}, dir / "out", {}, log) == kExitUsage);
}

TEST_CASE("report summarizes a run directory") {
  const fs::path dir = fresh_dir("report");
  const fs::path cfg = write_json(dir / "c.json", small_json("subsampled"));
  std::ostringstream log, out, err;
  REQUIRE(cmd_run(cfg, dir / "run", {}, log) == kExitOk);
  REQUIRE(cmd_report(dir / "run", out, err) == kExitOk);
  const std::string table = out.str();
  CHECK(table.find("subsampled-entropy") != std::string::npos);
  CHECK(table.find("n/a") != std::string::npos);  // no full_pool run to compare against

  const auto rows = read_results_csv(dir / "run" / "results.csv");
  const auto entries = build_report(dir / "run");
  REQUIRE(entries.size() == 1);
  CHECK(entries[0].seeds == 2);
  double acc = 0.0;
  for (const auto& r : rows)
    if (r.iteration == 3) acc += r.test_accuracy / 2.0;
  CHECK(entries[0].final_mean_accuracy == doctest::Approx(acc).epsilon(1e-15));

  const fs::path empty = fresh_dir("report_empty");
  std::ostringstream out2, err2;
  CHECK(cmd_report(empty, out2, err2) != kExitOk);
  CHECK(err2.str().find("no results found") != std::string::npos);
}

#ifdef CEAL_CLI_PATH
TEST_CASE("command-line front end exit codes") {
  const fs::path dir = fresh_dir("binary");
  const fs::path cfg = write_json(dir / "c.json", small_json("random_full"));
  const std::string exe = CEAL_CLI_PATH;
  const auto status = [](const std::string& cmd) {
    const int raw = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  CHECK(status(exe + " run " + cfg.string() + " --out " + (dir / "o").string()) == 0);
  CHECK(fs::exists(dir / "o" / "results.csv"));
  CHECK(status(exe + " report " + (dir / "o").string()) == 0);
  CHECK(status(exe + " run") == 1);
  CHECK(status(exe + " frobnicate") == 1);
  CHECK(status(exe + " report " + (dir / "nothing").string()) != 0);
}
#endif
