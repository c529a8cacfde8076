// Command-line front end for the multimodal cardiac SSL pipeline.
//
// Subcommands mirror the pipeline stages; every config key can be overridden
// with --set dotted.path=value. Exit codes: 0 success, 2 config error,
// 3 missing dependency, 4 numeric failure.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cardiomm/engine/pipeline.hpp"

namespace {

struct CommonOpts {
  std::string config_file;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("-c,--config", opts.config_file, "JSON config file");
  cmd->add_option("--set", opts.overrides,
                  "Override a config key, e.g. --set mae.epochs=5")
      ->take_all();
  cmd->add_option_function<std::string>(
      "--preset", [&](const std::string& v) { opts.overrides.push_back("preset=" + v); },
      "Config preset: desk or paper");
  cmd->add_option_function<std::uint64_t>(
      "--seed",
      [&](std::uint64_t v) { opts.overrides.push_back("run.seed=" + std::to_string(v)); },
      "Master seed");
  cmd->add_option_function<std::string>(
      "--task", [&](const std::string& v) { opts.overrides.push_back("run.task=" + v); },
      "Downstream task: mi or stroke");
  cmd->add_option_function<std::string>(
      "--name", [&](const std::string& v) { opts.overrides.push_back("run.name=" + v); },
      "Run name (directory under out_dir)");
  cmd->add_option_function<std::string>(
      "--out-dir",
      [&](const std::string& v) { opts.overrides.push_back("run.out_dir=" + v); },
      "Root directory for run artifacts");
  cmd->add_option_function<std::string>(
      "--data-dir",
      [&](const std::string& v) { opts.overrides.push_back("data.dir=" + v); },
      "Existing dataset directory (defaults to this run's synth output)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cardiomm: multimodal self-supervised cardiac disease prediction"};
  app.require_subcommand(1);

  const std::vector<std::string> stage_names = {
      "synth-data", "pretrain-ecg", "pretrain-image",
      "align",      "finetune",     "evaluate"};
  const std::vector<std::string> stage_help = {
      "Generate and save a synthetic paired cohort",
      "Stage 1: masked-autoencoder pretraining of the ECG encoder",
      "Stage 2: contrastive pretraining of the image encoder",
      "Stage 3: cross-modal alignment of the fused signal embedding",
      "Stage 4: supervised fine-tuning on a balanced subset",
      "Evaluate the fine-tuned model on the val and test splits"};

  std::vector<CommonOpts> opts(stage_names.size() + 1);
  bool from_scratch = false;
  for (std::size_t i = 0; i < stage_names.size(); ++i) {
    auto* cmd = app.add_subcommand(stage_names[i], stage_help[i]);
    add_common(cmd, opts[i]);
    if (stage_names[i] == "finetune")
      cmd->add_flag("--from-scratch", from_scratch,
                    "Random initialization instead of the align checkpoint");
  }
  auto* pipe = app.add_subcommand("pipeline", "Run the configured stages in order");
  add_common(pipe, opts.back());

  CLI11_PARSE(app, argc, argv);

  try {
    for (std::size_t i = 0; i < stage_names.size(); ++i) {
      if (!app.get_subcommand(stage_names[i])->parsed()) continue;
      auto& o = opts[i];
      if (stage_names[i] == "finetune" && from_scratch)
        o.overrides.push_back("finetune.init=scratch");
      cardiomm::Json cfg = cardiomm::resolve_config(o.config_file, o.overrides);
      if (stage_names[i] == "synth-data") {
        cardiomm::stage_synth_data(cfg);
      } else {
        auto data = cardiomm::prepare_data(cardiomm::load_dataset(cfg), cfg);
        if (stage_names[i] == "pretrain-ecg")
          cardiomm::stage_pretrain_ecg(cfg, data);
        else if (stage_names[i] == "pretrain-image")
          cardiomm::stage_pretrain_image(cfg, data);
        else if (stage_names[i] == "align")
          cardiomm::stage_align(cfg, data);
        else if (stage_names[i] == "finetune")
          cardiomm::stage_finetune(cfg, data);
        else
          cardiomm::stage_evaluate(cfg, data);
      }
      return 0;
    }
    if (pipe->parsed()) {
      auto& o = opts.back();
      cardiomm::Json cfg = cardiomm::resolve_config(o.config_file, o.overrides);
      cardiomm::run_pipeline(cfg);
      return 0;
    }
  } catch (const cardiomm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const cardiomm::DependencyError& e) {
    std::cerr << "dependency error: " << e.what() << "\n";
    return 3;
  } catch (const cardiomm::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const cardiomm::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
