// Command-line front end: run / compare / report.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ceal/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Compute-efficient active learning: experiment runner"};
  app.require_subcommand(1);

  ceal::RunOptions options;
  std::string config;
  std::string out_dir;
  auto* run = app.add_subcommand("run", "Run one experiment config");
  run->add_option("config", config, "Experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_flag("--wall-time", options.wall_time, "Fill the wall_time_s column (results no longer byte-stable)");

  std::vector<std::string> configs;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "Run several strategies on one setup and compare them");
  compare->add_option("configs", configs, "Experiment configs (JSON)")->required();
  compare->add_option("--out", compare_out, "Output directory")->required();
  compare->add_flag("--wall-time", options.wall_time, "Fill the wall_time_s column");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Summarize results.csv files under a directory");
  report->add_option("dir", report_dir, "Results directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return ceal::kExitUsage;
  }

  if (*run) return ceal::cmd_run(config, out_dir, options, std::cerr);
  if (*compare) {
    std::vector<std::filesystem::path> paths(configs.begin(), configs.end());
    return ceal::cmd_compare(paths, compare_out, options, std::cerr);
  }
  return ceal::cmd_report(report_dir, std::cout, std::cerr);
}
