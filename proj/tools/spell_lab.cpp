#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "spell/errors.hpp"
#include "spell/harness.hpp"

namespace {

namespace fs = std::filesystem;

// Relative output paths land under SPELL_LAB_OUTPUT_ROOT when it is set, so
// batch jobs can redirect a whole config tree without editing flags.
std::string resolve_out(const std::string& out) {
  if (out.empty()) return out;
  fs::path path(out);
  if (path.is_relative()) {
    if (const char* root = std::getenv("SPELL_LAB_OUTPUT_ROOT")) {
      if (*root != '\0') path = fs::path(root) / path;
    }
  }
  return path.string();
}

spell::ExperimentConfig resolve_config(const std::string& config_path,
                                       const std::string& scenario,
                                       std::optional<std::uint64_t> seed_override) {
  if (config_path.empty() == scenario.empty()) {
    throw spell::ConfigError("pass exactly one of --config or --scenario");
  }
  spell::ExperimentConfig config = config_path.empty()
                                       ? spell::make_scenario(scenario)
                                       : spell::load_config(config_path);
  if (seed_override) {
    config.seed = *seed_override;
    config.validate();
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Repellency-guided diffusion laboratory on analytic Gaussian mixtures"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed_override;
  app.add_option("--config", config_path, "Experiment config file")->expected(1);
  app.add_option("--seed", seed_override, "Override the config seed");
  app.add_option("--out", out, "Output directory (or file for build-index)");

  auto* generate = app.add_subcommand("generate", "Run one experiment and write its artifacts");
  generate->add_option("--scenario", scenario,
                       "Bundled scenario: collapse, protection, iterative");

  auto* sweep = app.add_subcommand("sweep", "Run the config's sweep grid");
  sweep->add_option("--scenario", scenario,
                    "Bundled scenario: collapse, protection, iterative");

  std::string baseline_dir;
  std::string repel_dir;
  auto* compare = app.add_subcommand("compare", "Diff two same-seed runs trajectory by trajectory");
  compare->add_option("baseline", baseline_dir, "Baseline run directory")->required();
  compare->add_option("repelled", repel_dir, "Repellency run directory")->required();

  std::vector<std::string> run_dirs;
  auto* emit = app.add_subcommand("emit-plots", "Write plot-ready CSV bundles from run directories");
  emit->add_option("runs", run_dirs, "Run or sweep directories")->required();

  auto* build_index = app.add_subcommand("build-index",
                                         "Build and save the shield index for a config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& error) {
    if (error.get_exit_code() == 0) return app.exit(error);
    app.exit(error);
    return 2;
  }

  try {
    const std::string out_path = resolve_out(out);
    if (generate->parsed()) {
      const auto config = resolve_config(config_path, scenario, seed_override);
      if (out_path.empty()) throw spell::ConfigError("generate needs --out");
      const auto artifacts = spell::run_experiment(config, out_path);
      std::cout << "samples " << artifacts.samples.rows() << "  violations "
                << artifacts.violation_count << "  out " << out_path << "\n";
    } else if (sweep->parsed()) {
      const auto config = resolve_config(config_path, scenario, seed_override);
      if (out_path.empty()) throw spell::ConfigError("sweep needs --out");
      const auto rows = spell::run_sweep(config, out_path);
      std::cout << "sweep points " << rows.size() << "  out " << out_path << "\n";
    } else if (compare->parsed()) {
      const std::string report_path =
          out_path.empty() ? (fs::path(repel_dir) / "comparison.csv").string()
                           : (fs::path(out_path) / "comparison.csv").string();
      const auto report = spell::compare_runs(baseline_dir, repel_dir, report_path);
      std::cout << "changed " << report.changed_count << " of " << report.rows.size()
                << "  report " << report_path << "\n";
    } else if (emit->parsed()) {
      if (out_path.empty()) throw spell::ConfigError("emit-plots needs --out");
      std::vector<std::string> dirs;
      for (const auto& dir : run_dirs) dirs.push_back(dir);
      spell::emit_plot_data(dirs, out_path);
      std::cout << "plot data for " << dirs.size() << " run(s)  out " << out_path << "\n";
    } else if (build_index->parsed()) {
      if (config_path.empty()) throw spell::ConfigError("build-index needs --config");
      if (out_path.empty()) throw spell::ConfigError("build-index needs --out");
      const auto config = resolve_config(config_path, scenario, seed_override);
      spell::build_index_from_config(config, out_path);
      std::cout << "index written to " << out_path << "\n";
    }
  } catch (const spell::ConfigError& error) {
    std::cerr << "config error: " << error.what() << "\n";
    return 2;
  } catch (const spell::NumericError& error) {
    std::cerr << "numeric error: " << error.what() << "\n";
    return 3;
  } catch (const spell::IoError& error) {
    std::cerr << "io error: " << error.what() << "\n";
    return 4;
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << "\n";
    return 1;
  }
  return 0;
}
