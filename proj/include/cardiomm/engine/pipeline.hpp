#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "cardiomm/cohort/io.hpp"
#include "cardiomm/cohort/split.hpp"
#include "cardiomm/cohort/synthetic.hpp"
#include "cardiomm/engine/config.hpp"
#include "cardiomm/preprocess/filters.hpp"
#include "cardiomm/preprocess/tabular.hpp"

namespace cardiomm {

namespace fs_ = std::filesystem;

/// Everything the training stages consume, derived deterministically from a
/// cohort and the run configuration.
struct PreparedData {
  Cohort cohort;
  DatasetSplit split;
  std::vector<EcgRecord> filtered;  // index-aligned with cohort.samples
  MatF encoded_tab;                 // [n x F]
  std::vector<std::size_t> train_idx, val_idx, test_idx;
};

inline PreparedData prepare_data(Cohort cohort, const Json& cfg) {
  PreparedData out;
  out.cohort = std::move(cohort);
  const Json& pp = cfg.at("preprocess");
  const double hp = pp.at("highpass_hz").get<double>();
  const int order = pp.at("highpass_order").get<int>();
  const double line = pp.at("line_freq").get<double>();

  out.filtered.reserve(out.cohort.size());
  for (const auto& s : out.cohort.samples)
    out.filtered.push_back(preprocess_ecg(s.ecg, hp, order, line));

  std::vector<TabularRecord> tab;
  tab.reserve(out.cohort.size());
  bool any_missing = false;
  for (const auto& s : out.cohort.samples) {
    tab.push_back(s.tabular);
    for (const auto& cell : s.tabular.values)
      if (cell.empty()) any_missing = true;
  }
  if (any_missing) tab = impute_tabular(tab, out.cohort.schema);
  out.encoded_tab.resize(static_cast<Index>(tab.size()), out.cohort.schema.size());
  for (std::size_t i = 0; i < tab.size(); ++i)
    out.encoded_tab.row(static_cast<Index>(i)) =
        encode_tabular(tab[i], out.cohort.schema).features.transpose();

  const Json& d = cfg.at("data");
  auto ratios = d.at("ratios").get<std::vector<double>>();
  check_arg(ratios.size() == 3, "config: data.ratios must have 3 entries");
  out.split = split_dataset(out.cohort, {ratios[0], ratios[1], ratios[2]},
                            d.at("split_seed").get<std::uint64_t>());
  out.train_idx = cohort_indices_for(out.cohort, out.split.train);
  out.val_idx = cohort_indices_for(out.cohort, out.split.val);
  out.test_idx = cohort_indices_for(out.cohort, out.split.test);
  return out;
}

inline std::vector<const EcgRecord*> ecg_view(const PreparedData& data,
                                              const std::vector<std::size_t>& idx) {
  std::vector<const EcgRecord*> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(&data.filtered[i]);
  return out;
}

inline std::vector<const CmrPhaseStack*> cmr_view(
    const PreparedData& data, const std::vector<std::size_t>& idx) {
  std::vector<const CmrPhaseStack*> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(&data.cohort.samples[i].cmr);
  return out;
}

inline MatF tab_view(const PreparedData& data, const std::vector<std::size_t>& idx) {
  MatF out(static_cast<Index>(idx.size()), data.encoded_tab.cols());
  for (std::size_t k = 0; k < idx.size(); ++k)
    out.row(static_cast<Index>(k)) =
        data.encoded_tab.row(static_cast<Index>(idx[k]));
  return out;
}

inline AlignDataView align_view(const PreparedData& data,
                                const std::vector<std::size_t>& idx) {
  return {ecg_view(data, idx), cmr_view(data, idx), tab_view(data, idx)};
}

inline LabeledDataView labeled_view(const PreparedData& data,
                                    const std::vector<std::size_t>& idx,
                                    const std::string& task) {
  LabeledDataView out;
  out.ecg = ecg_view(data, idx);
  out.tabular = tab_view(data, idx);
  out.labels.reserve(idx.size());
  for (std::size_t i : idx) {
    const auto& labels = data.cohort.samples[i].labels;
    auto it = labels.find(task);
    check_arg(it != labels.end(), "task '" + task + "': no label for subject '" +
                                      data.cohort.samples[i].subject_id() + "'");
    out.labels.push_back(it->second);
  }
  return out;
}

// ---- run directory layout ----

struct RunPaths {
  fs_::path root;

  fs_::path stage(const std::string& name) const { return root / name; }
  fs_::path cohort_dir() const { return root / "cohort"; }
  fs_::path checkpoint(const std::string& stage_name) const {
    return root / stage_name / "checkpoint";
  }
};

inline RunPaths run_paths(const Json& cfg) {
  const Json& run = cfg.at("run");
  return {fs_::path(run.at("out_dir").get<std::string>()) /
          run.at("name").get<std::string>()};
}

inline fs_::path dataset_dir(const Json& cfg) {
  std::string dir = cfg.at("data").at("dir").get<std::string>();
  if (!dir.empty()) return dir;
  return run_paths(cfg).cohort_dir();
}

inline void write_resolved_config(const Json& cfg, const fs_::path& stage_dir) {
  fs_::create_directories(stage_dir);
  std::ofstream os(stage_dir / "config-resolved.json");
  if (!os) throw IoError("cannot write config-resolved.json under " + stage_dir.string());
  os << cfg.dump(2) << '\n';
}

// ---- stages ----

inline void stage_synth_data(const Json& cfg) {
  auto paths = run_paths(cfg);
  write_resolved_config(cfg, paths.stage("synth-data"));
  auto cohort = generate_synthetic_cohort(
      synth_config_from(cfg), cfg.at("run").at("seed").get<std::uint64_t>());
  save_cohort(cohort, paths.cohort_dir());
  std::cout << "[synth-data] wrote " << cohort.size() << " subjects to "
            << paths.cohort_dir().string() << "\n";
}

inline Cohort load_dataset(const Json& cfg) {
  auto dir = dataset_dir(cfg);
  if (!fs_::exists(dir / "manifest.json"))
    throw DependencyError("no dataset at " + dir.string() +
                          "; run the synth-data stage or set data.dir");
  return load_cohort(dir);
}

inline void stage_pretrain_ecg(const Json& cfg, const PreparedData& data) {
  auto paths = run_paths(cfg);
  auto dir = paths.stage("pretrain-ecg");
  write_resolved_config(cfg, dir);
  std::ofstream log(dir / "log.csv"), val_log(dir / "val.csv");
  auto result = train_mae(ecg_view(data, data.train_idx),
                          ecg_view(data, data.val_idx), mae_train_from(cfg),
                          &log, &val_log);
  save_checkpoint(result.best, paths.checkpoint("pretrain-ecg"));
  std::cout << "[pretrain-ecg] best val loss "
            << result.best.best_metric.value("val_loss", 0.0) << "\n";
}

inline void stage_pretrain_image(const Json& cfg, const PreparedData& data) {
  auto paths = run_paths(cfg);
  auto dir = paths.stage("pretrain-image");
  write_resolved_config(cfg, dir);
  std::ofstream log(dir / "log.csv"), val_log(dir / "val.csv");
  auto result = train_simclr(cmr_view(data, data.train_idx),
                             cmr_view(data, data.val_idx),
                             simclr_train_from(cfg), &log, &val_log);
  save_checkpoint(result.best, paths.checkpoint("pretrain-image"));
  std::cout << "[pretrain-image] best val loss "
            << result.best.best_metric.value("val_loss", 0.0) << "\n";
}

inline void stage_align(const Json& cfg, const PreparedData& data) {
  auto paths = run_paths(cfg);
  auto dir = paths.stage("align");
  write_resolved_config(cfg, dir);
  Checkpoint ecg_ckpt, img_ckpt;
  try {
    ecg_ckpt = load_checkpoint(paths.checkpoint("pretrain-ecg"));
  } catch (const DependencyError&) {
    throw DependencyError("align requires the pretrain-ecg checkpoint under " +
                          paths.checkpoint("pretrain-ecg").string());
  }
  try {
    img_ckpt = load_checkpoint(paths.checkpoint("pretrain-image"));
  } catch (const DependencyError&) {
    throw DependencyError("align requires the pretrain-image checkpoint under " +
                          paths.checkpoint("pretrain-image").string());
  }
  std::ofstream log(dir / "log.csv"), val_log(dir / "val.csv");
  auto result = train_multimodal(align_view(data, data.train_idx),
                                 align_view(data, data.val_idx), ecg_ckpt,
                                 img_ckpt,
                                 align_train_from(cfg, data.cohort.schema.size()),
                                 &log, &val_log);
  save_checkpoint(result.signal_branch, dir / "signal_branch");
  save_checkpoint(result.full, dir / "full");
  std::cout << "[align] best val loss " << result.best_val_loss << "\n";
}

inline void stage_finetune(const Json& cfg, const PreparedData& data) {
  auto paths = run_paths(cfg);
  auto dir = paths.stage("finetune");
  write_resolved_config(cfg, dir);
  const std::string task = cfg.at("run").at("task").get<std::string>();
  const std::string init_name = cfg.at("finetune").at("init").get<std::string>();

  FinetuneInit init;
  Checkpoint upstream;
  const Checkpoint* upstream_ptr = nullptr;
  if (init_name == "scratch") {
    init = FinetuneInit::scratch;
  } else if (init_name == "mae") {
    init = FinetuneInit::from_mae;
    try {
      upstream = load_checkpoint(paths.checkpoint("pretrain-ecg"));
    } catch (const DependencyError&) {
      throw DependencyError(
          "finetune with init=mae requires the pretrain-ecg checkpoint under " +
          paths.checkpoint("pretrain-ecg").string());
    }
    upstream_ptr = &upstream;
  } else if (init_name == "align") {
    init = FinetuneInit::from_align;
    try {
      upstream = load_checkpoint(paths.stage("align") / "signal_branch");
    } catch (const DependencyError&) {
      throw DependencyError(
          "finetune requires the align signal_branch checkpoint under " +
          (paths.stage("align") / "signal_branch").string() +
          "; run the align stage or pass finetune.init=scratch");
    }
    upstream_ptr = &upstream;
  } else {
    throw ConfigError("finetune.init must be 'align', 'mae' or 'scratch'");
  }

  auto balanced = balanced_subset_indices(
      data.cohort, data.train_idx, task,
      cfg.at("finetune").at("balanced_seed").get<std::uint64_t>());
  std::ofstream log(dir / "log.csv"), val_log(dir / "val.csv");
  auto result = train_finetune(labeled_view(data, balanced, task),
                               labeled_view(data, data.val_idx, task), init,
                               upstream_ptr,
                               finetune_train_from(cfg, data.cohort.schema.size()),
                               &log, &val_log);
  save_checkpoint(result.best, paths.checkpoint("finetune"));
  std::cout << "[finetune] best val balanced accuracy " << result.best_val_bal_acc
            << " (auc " << result.best_val_auc << ")\n";
}

inline MetricsReport stage_evaluate(const Json& cfg, const PreparedData& data) {
  auto paths = run_paths(cfg);
  auto dir = paths.stage("evaluate");
  write_resolved_config(cfg, dir);
  const std::string task = cfg.at("run").at("task").get<std::string>();
  Checkpoint ckpt;
  try {
    ckpt = load_checkpoint(paths.checkpoint("finetune"));
  } catch (const DependencyError&) {
    throw DependencyError("evaluate requires the finetune checkpoint under " +
                          paths.checkpoint("finetune").string());
  }
  Rng rng(0);
  FinetuneModel<float> model;
  model.init(finetune_train_from(cfg, data.cohort.schema.size()), rng);
  ParamRefs<float> params;
  model.collect(params);
  ckpt.apply(params);

  const auto seed = cfg.at("run").at("seed").get<std::uint64_t>();
  std::vector<double> test_scores;
  auto val_report = evaluate_model(model, labeled_view(data, data.val_idx, task),
                                   task, "val", seed, ckpt.id());
  auto test_report = evaluate_model(model, labeled_view(data, data.test_idx, task),
                                    task, "test", seed, ckpt.id(), &test_scores);
  {
    std::ofstream os(dir / "metrics.json");
    os << Json{{"val", val_report.to_json()}, {"test", test_report.to_json()}}.dump(2)
       << '\n';
  }
  {
    std::ofstream os(dir / "roc-test.csv");
    os << "threshold,tpr,fpr\n";
    LabeledDataView test = labeled_view(data, data.test_idx, task);
    for (const auto& p : roc_curve(test_scores, test.labels))
      os << log_num(p.threshold) << ',' << log_num(p.tpr) << ',' << log_num(p.fpr)
         << '\n';
  }
  std::cout << "[evaluate] " << task << " test auc " << test_report.auc
            << " balanced accuracy " << test_report.balanced_acc << "\n";
  return test_report;
}

/// Executes the configured stages in order, wiring checkpoints through the
/// run directory. Returns the final test report when `evaluate` ran.
inline MetricsReport run_pipeline(const Json& cfg) {
  const auto stages = cfg.at("run").at("stages").get<std::vector<std::string>>();
  MetricsReport last;
  bool have_data = false;
  PreparedData data;
  auto ensure_data = [&]() {
    if (!have_data) {
      data = prepare_data(load_dataset(cfg), cfg);
      have_data = true;
    }
  };
  for (const auto& stage : stages) {
    if (stage == "synth-data") {
      stage_synth_data(cfg);
    } else if (stage == "pretrain-ecg") {
      ensure_data();
      stage_pretrain_ecg(cfg, data);
    } else if (stage == "pretrain-image") {
      ensure_data();
      stage_pretrain_image(cfg, data);
    } else if (stage == "align") {
      ensure_data();
      stage_align(cfg, data);
    } else if (stage == "finetune") {
      ensure_data();
      stage_finetune(cfg, data);
    } else if (stage == "evaluate") {
      ensure_data();
      last = stage_evaluate(cfg, data);
    } else {
      throw ConfigError("unknown stage '" + stage + "'");
    }
  }
  return last;
}

}  // namespace cardiomm
