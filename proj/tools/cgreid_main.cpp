#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cgreid/commands.hpp"
#include "cgreid/errors.hpp"

namespace {

struct SeedOverride {
  bool set = false;
  uint64_t value = 0;
};

cgreid::RunConfig load_with_overrides(const std::string& config_path, const SeedOverride& seed) {
  cgreid::RunConfig cfg = cgreid::load_config(config_path);
  if (seed.set) {
    cfg.seed = seed.value;
    cfg.train.seed = seed.value;
    cfg.data.seed = cgreid::derive_seed(seed.value, {cgreid::seed_tag::data});
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Channel-group re-identification experiments on synthetic data"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_path, checkpoint_path;
  std::string split = "query";
  std::vector<std::string> settings;
  SeedOverride seed;
  int jobs = 0;
  int k_max = 20;
  bool plurality = false;

  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option_function<uint64_t>(
        "--seed", [&](uint64_t v) { seed = {true, v}; }, "Override the config root seed");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "Generate the synthetic dataset directory");
  gen->add_option("--config", config_path, "Run configuration (JSON)")->required();
  gen->add_option("--out", out_path, "Output dataset directory")->required();
  add_seed(gen);

  CLI::App* tr = app.add_subcommand("train", "Train a model and write checkpoint + log");
  tr->add_option("--config", config_path, "Run configuration (JSON)")->required();
  tr->add_option("--data", data_dir, "Dataset directory")->required();
  tr->add_option("--out", out_path, "Output directory")->required();
  add_seed(tr);

  CLI::App* ev = app.add_subcommand("eval", "Evaluate a checkpoint; one JSON report per setting");
  ev->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  ev->add_option("--data", data_dir, "Dataset directory")->required();
  ev->add_option("--setting", settings, "standard | fast:i | concat:k | voting (repeatable)");
  ev->add_option("--k-max", k_max, "CMC curve length");
  ev->add_flag("--plurality", plurality, "Use top-1 plurality voting instead of rank aggregation");
  ev->add_option("--out", out_path, "Also write the reports to this file");

  CLI::App* cmp = app.add_subcommand("compare-variants", "Train the architecture grid and report metrics");
  cmp->add_option("--config", config_path, "Run configuration (JSON)")->required();
  cmp->add_option("--data", data_dir, "Dataset directory")->required();
  cmp->add_option("--out", out_path, "Grid JSON output path")->required();
  cmp->add_option("--jobs", jobs, "Worker threads (default: config value)");
  add_seed(cmp);

  CLI::App* ex = app.add_subcommand("export-features", "Export a descriptor matrix with JSON sidecar");
  ex->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  ex->add_option("--data", data_dir, "Dataset directory")->required();
  ex->add_option("--out", out_path, "Output feature file")->required();
  ex->add_option("--setting", settings, "standard | fast:i | concat:k");
  ex->add_option("--split", split, "train | query | gallery (default query)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      cgreid::cmd_gen_data(load_with_overrides(config_path, seed), out_path);
      std::cerr << "dataset written to " << out_path << "\n";
    } else if (tr->parsed()) {
      cgreid::TrainLog log = cgreid::cmd_train(load_with_overrides(config_path, seed), data_dir, out_path);
      std::cerr << "trained " << log.steps.size() << " steps in " << log.wall_seconds << " s; final loss "
                << (log.steps.empty() ? 0.0 : log.steps.back().total_loss) << "\n";
      std::cerr << "checkpoint written to " << out_path << "/checkpoint.bin\n";
    } else if (ev->parsed()) {
      std::vector<cgreid::InferenceSetting> parsed;
      if (settings.empty()) settings.push_back("standard");
      for (const std::string& s : settings) parsed.push_back(cgreid::InferenceSetting::parse(s));
      const auto reports = cgreid::cmd_eval(checkpoint_path, data_dir, parsed, k_max, plurality);
      std::string lines;
      for (const auto& r : reports) lines += cgreid::eval_report_to_json(r) + "\n";
      std::cout << lines;
      if (!out_path.empty()) {
        std::ofstream os(out_path);
        if (!os) throw cgreid::FormatError("cannot write " + out_path);
        os << lines;
      }
    } else if (cmp->parsed()) {
      cgreid::RunConfig cfg = load_with_overrides(config_path, seed);
      if (jobs > 0) cfg.compare.jobs = jobs;
      cgreid::cmd_compare_variants(cfg, data_dir, out_path);
      std::cerr << "grid written to " << out_path << "\n";
    } else if (ex->parsed()) {
      cgreid::InferenceSetting setting;
      if (!settings.empty()) setting = cgreid::InferenceSetting::parse(settings.front());
      cgreid::cmd_export_features(checkpoint_path, data_dir, split, setting, out_path);
      std::cerr << "features written to " << out_path << "\n";
    }
  } catch (const cgreid::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const cgreid::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 3;
  } catch (const cgreid::DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
