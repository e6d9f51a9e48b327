// morphmap: command-line driver for the morph attack evaluation pipeline.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "morphmap/morphmap.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct StageCommand {
  const char* name;
  const char* description;
  std::function<void(morphmap::pipeline::Workspace&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"morphmap - representation-level face morph attack evaluation"};
  app.require_subcommand(1);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Cap on worker threads (default: MORPHMAP_THREADS or all cores)");

  namespace pl = morphmap::pipeline;
  const std::vector<StageCommand> stages = {
      {"gen-cohort", "Generate the synthetic identity cohort (latent captures)", pl::gen_cohort},
      {"extract", "Extract templates for every recognizer in the ensemble", pl::extract},
      {"pairs", "Select morph pairs by non-mated reference similarity", pl::select_morph_pairs},
      {"morph", "Build SLERP morphs in the attacker space and their variants", pl::morph},
      {"score", "Export mated, non-mated and morph score sets with histograms", pl::score},
      {"calibrate", "Compute thresholds at the target FMR", pl::calibrate},
      {"map", "Compute the Morph Attack Potential matrix", pl::map},
      {"sweep", "Sweep thresholds and trace the selected MAP cell", pl::sweep},
      {"variants", "Run the stochastic morph variant study", pl::variants},
      {"run-all", "Run every stage and write report.json", pl::run_all},
  };

  std::string config_path;
  std::string out_override;
  std::string report_dir;
  std::vector<std::pair<CLI::App*, const StageCommand*>> commands;
  for (const auto& stage : stages) {
    auto* sub = app.add_subcommand(stage.name, stage.description);
    sub->add_option("-c,--config", config_path, "Experiment config (TOML)")->required();
    sub->add_option("-o,--out", out_override, "Override output_dir from the config");
    commands.emplace_back(sub, &stage);
  }
  auto* report_cmd = app.add_subcommand("report", "Summarize pipeline artifacts into report.json");
  auto* report_dir_opt = report_cmd->add_option("-d,--dir", report_dir, "Directory holding pipeline artifacts");
  auto* report_cfg_opt = report_cmd->add_option("-c,--config", config_path, "Take output_dir from this config");
  report_dir_opt->excludes(report_cfg_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  morphmap::set_max_threads(threads);

  auto load = [&]() -> std::optional<morphmap::ExperimentConfig> {
    if (!std::filesystem::is_regular_file(config_path)) {
      std::cerr << "morphmap: config file not found: " << config_path << '\n';
      return std::nullopt;
    }
    auto cfg = morphmap::load_experiment_config(config_path);
    if (!out_override.empty()) cfg.output_dir = out_override;
    return cfg;
  };

  try {
    if (report_cmd->parsed()) {
      if (report_dir.empty() && config_path.empty()) {
        std::cerr << "morphmap report: one of --dir or --config is required\n";
        return kExitUsage;
      }
      std::filesystem::path dir = report_dir;
      if (dir.empty()) {
        const auto cfg = load();
        if (!cfg) return kExitUsage;
        dir = cfg->output_dir;
      }
      pl::report(dir);
      std::cout << "wrote " << (dir / pl::files::report()).string() << '\n';
      return kExitOk;
    }

    for (const auto& [sub, stage] : commands) {
      if (!sub->parsed()) continue;
      const auto cfg = load();
      if (!cfg) return kExitUsage;
      pl::Workspace ws(*cfg);
      stage->run(ws);
      std::cout << stage->name << ": done (" << cfg->output_dir.string() << ")\n";
      return kExitOk;
    }
  } catch (const morphmap::Error& e) {
    std::cerr << "morphmap: " << e.what() << '\n';
    return e.code() == morphmap::ErrorCode::InvalidConfig ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    std::cerr << "morphmap: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
