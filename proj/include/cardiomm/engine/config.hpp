#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "cardiomm/align/train.hpp"
#include "cardiomm/augment/ecg_augment.hpp"
#include "cardiomm/augment/image_augment.hpp"
#include "cardiomm/cohort/split.hpp"
#include "cardiomm/cohort/synthetic.hpp"
#include "cardiomm/core/error.hpp"
#include "cardiomm/finetune/train.hpp"
#include "cardiomm/image_ssl/train.hpp"
#include "cardiomm/mae/train.hpp"

#include <nlohmann/json.hpp>

namespace cardiomm {

using Json = nlohmann::json;

/// `desk` runs end-to-end on a laptop CPU; `paper` carries the full-scale
/// published hyperparameters (400/500/200-epoch schedules, 5000-sample ECGs,
/// the 50-layer image backbone).
inline Json default_config(const std::string& preset = "desk") {
  check_arg(preset == "desk" || preset == "paper",
            "config: preset must be 'desk' or 'paper'");
  const bool paper = preset == "paper";
  Json cfg;
  cfg["preset"] = preset;
  cfg["run"] = {{"name", "run"},
                {"out_dir", "runs"},
                {"seed", 7},
                {"task", "mi"},
                {"stages", Json::array({"synth-data", "pretrain-ecg",
                                        "pretrain-image", "align", "finetune",
                                        "evaluate"})}};
  cfg["data"] = {{"dir", ""}, {"split_seed", 1}, {"ratios", {0.8, 0.1, 0.1}}};
  cfg["synth"] = {{"n", paper ? 45112 : 2000},
                  {"ecg_leads", 12},
                  {"ecg_samples", paper ? 5000 : 500},
                  {"sampling_rate", 500.0},
                  {"image_size", paper ? 208 : 64},
                  {"prevalence", paper ? 0.031 : 0.15},
                  {"stroke_prevalence", -1.0},
                  {"image_weight", 2.0},
                  {"ecg_weight", 1.2},
                  {"tabular_weight", 0.7},
                  {"label_steepness", 2.5},
                  {"missing_rate", 0.0}};
  cfg["preprocess"] = {{"highpass_hz", 0.5}, {"highpass_order", 5}, {"line_freq", 50.0}};
  cfg["ecg_augment"] = {{"crop_ratio", 0.5},
                        {"ft_phase_noise", 0.1},
                        {"gaussian_sigma", 0.25},
                        {"rescale_factor", 0.5}};
  cfg["image_augment"] = {{"hflip_prob", 0.5},   {"max_rotation_deg", 45.0},
                          {"brightness", 0.4},   {"contrast", 0.4},
                          {"saturation", 0.4},   {"crop_scale_min", 0.7},
                          {"crop_scale_max", 1.0}};
  cfg["mae"] = {{"width", 384},
                {"depth", paper ? 3 : 2},
                {"heads", 6},
                {"mlp_ratio", paper ? 4.0 : 2.0},
                {"dec_width", 192},
                {"dec_depth", 2},
                {"dec_heads", 6},
                {"dec_mlp_ratio", paper ? 4.0 : 2.0},
                {"patch_lead", 1},
                {"patch_time", 100},
                {"mask_ratio", 0.8},
                {"lambda", 0.1},
                {"loss_on_all_patches", false},
                {"normalize_targets", false},
                {"epochs", paper ? 400 : 3},
                {"batch_size", paper ? 128 : 32},
                {"base_lr", paper ? 1e-5 : 1e-3},
                {"weight_decay", 0.15},
                {"warmup_frac", 0.1},
                {"max_steps", -1}};
  cfg["image_ssl"] = {{"backbone", paper ? "resnet50" : "small"},
                      {"width", paper ? 2048 : 128},
                      {"head_hidden", paper ? 2048 : 128},
                      {"head_out", paper ? 2048 : 128},
                      {"tau", 0.1},
                      {"epochs", paper ? 500 : 6},
                      {"batch_size", paper ? 512 : 64},
                      {"base_lr", paper ? 1e-4 : 1e-3},
                      {"weight_decay", 1e-4},
                      {"warmup_epochs", paper ? 10 : 1}};
  cfg["align"] = {{"tau", 0.1},
                  {"lambda", 0.5},
                  {"corruption_rate", 0.3},
                  {"epochs", paper ? 200 : 6},
                  {"batch_size", paper ? 256 : 64},
                  {"base_lr", paper ? 1e-4 : 3e-4},
                  {"weight_decay", 1e-4},
                  {"warmup_frac", 0.1},
                  {"freeze_encoders", false}};
  cfg["finetune"] = {{"epochs", paper ? 400 : 12},
                     {"batch_size", 64},
                     {"base_lr", paper ? 1e-5 : 1e-4},
                     {"weight_decay", 1e-4},
                     {"warmup_frac", 0.05},
                     {"balanced_seed", 11},
                     {"init", "align"}};
  return cfg;
}

namespace config_detail {

/// Overlay `patch` onto `base`, rejecting keys the schema does not declare
/// and scalar/structure type changes (typo protection).
inline void merge_checked(Json& base, const Json& patch, const std::string& path) {
  check_arg(patch.is_object(), "config: expected an object at '" +
                                   (path.empty() ? "<root>" : path) + "'");
  for (const auto& [key, value] : patch.items()) {
    std::string here = path.empty() ? key : path + "." + key;
    check_arg(base.contains(key), "config: unknown key '" + here + "'");
    Json& slot = base[key];
    if (slot.is_object()) {
      merge_checked(slot, value, here);
    } else {
      check_arg(!value.is_object(),
                "config: '" + here + "' is a value, not a section");
      bool both_numeric = slot.is_number() && value.is_number();
      check_arg(both_numeric || slot.type() == value.type(),
                "config: type mismatch at '" + here + "'");
      slot = value;
    }
  }
}

inline Json parse_scalar(const std::string& text) {
  Json parsed = Json::parse(text, nullptr, false);
  if (parsed.is_discarded()) return Json(text);  // bare strings
  return parsed;
}

}  // namespace config_detail

/// Resolves a run configuration: preset defaults, then the optional config
/// file, then `--set dotted.path=value` overrides, in that order.
inline Json resolve_config(const std::string& config_file,
                           const std::vector<std::string>& overrides) {
  Json file_cfg = Json::object();
  if (!config_file.empty()) {
    std::ifstream is(config_file);
    if (!is) throw ConfigError("config: cannot open '" + config_file + "'");
    try {
      is >> file_cfg;
    } catch (const Json::exception& e) {
      throw ConfigError("config: malformed JSON in '" + config_file + "': " + e.what());
    }
  }
  std::string preset = "desk";
  if (file_cfg.contains("preset")) preset = file_cfg.at("preset").get<std::string>();
  for (const auto& ov : overrides) {  // --set preset=... wins over the file
    if (ov.rfind("preset=", 0) == 0) preset = ov.substr(7);
  }
  Json cfg = default_config(preset);
  config_detail::merge_checked(cfg, file_cfg, "");
  for (const auto& ov : overrides) {
    auto eq = ov.find('=');
    check_arg(eq != std::string::npos && eq > 0,
              "config: override must look like path.to.key=value, got '" + ov + "'");
    std::string path = ov.substr(0, eq);
    Json patch = config_detail::parse_scalar(ov.substr(eq + 1));
    // build a nested single-key object along the dotted path
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
      auto dot = path.find('.', start);
      parts.push_back(path.substr(start, dot == std::string::npos ? dot : dot - start));
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    for (auto it = parts.rbegin(); it != parts.rend(); ++it)
      patch = Json{{*it, patch}};
    config_detail::merge_checked(cfg, patch, "");
  }
  return cfg;
}

inline std::string config_hash(const Json& cfg) {
  const std::string dump = cfg.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---- typed views over the resolved tree ----

inline SynthConfig synth_config_from(const Json& cfg) {
  const Json& s = cfg.at("synth");
  SynthConfig out;
  out.n = s.at("n").get<int>();
  out.ecg_leads = s.at("ecg_leads").get<int>();
  out.ecg_samples = s.at("ecg_samples").get<int>();
  out.sampling_rate = s.at("sampling_rate").get<double>();
  out.image_height = out.image_width = s.at("image_size").get<int>();
  out.prevalence = s.at("prevalence").get<double>();
  out.stroke_prevalence = s.at("stroke_prevalence").get<double>();
  out.image_weight = s.at("image_weight").get<double>();
  out.ecg_weight = s.at("ecg_weight").get<double>();
  out.tabular_weight = s.at("tabular_weight").get<double>();
  out.label_steepness = s.at("label_steepness").get<double>();
  out.tabular_missing_rate = s.at("missing_rate").get<double>();
  return out;
}

inline EcgAugmentConfig ecg_augment_from(const Json& cfg) {
  const Json& a = cfg.at("ecg_augment");
  EcgAugmentConfig out;
  out.crop_ratio = a.at("crop_ratio").get<double>();
  out.ft_phase_noise = a.at("ft_phase_noise").get<double>();
  out.gaussian_sigma = a.at("gaussian_sigma").get<double>();
  out.rescale_factor = a.at("rescale_factor").get<double>();
  return out;
}

inline ImageAugmentConfig image_augment_from(const Json& cfg) {
  const Json& a = cfg.at("image_augment");
  ImageAugmentConfig out;
  out.hflip_prob = a.at("hflip_prob").get<double>();
  out.max_rotation_deg = a.at("max_rotation_deg").get<double>();
  out.brightness = a.at("brightness").get<double>();
  out.contrast = a.at("contrast").get<double>();
  out.saturation = a.at("saturation").get<double>();
  out.crop_scale_min = a.at("crop_scale_min").get<double>();
  out.crop_scale_max = a.at("crop_scale_max").get<double>();
  return out;
}

inline MaeConfig mae_model_from(const Json& cfg) {
  const Json& m = cfg.at("mae");
  const Json& s = cfg.at("synth");
  MaeConfig out;
  out.leads = s.at("ecg_leads").get<Index>();
  out.samples = s.at("ecg_samples").get<Index>();
  out.patch = {m.at("patch_lead").get<Index>(), m.at("patch_time").get<Index>()};
  out.width = m.at("width").get<Index>();
  out.depth = m.at("depth").get<Index>();
  out.heads = m.at("heads").get<Index>();
  out.mlp_ratio = m.at("mlp_ratio").get<double>();
  out.dec_width = m.at("dec_width").get<Index>();
  out.dec_depth = m.at("dec_depth").get<Index>();
  out.dec_heads = m.at("dec_heads").get<Index>();
  out.dec_mlp_ratio = m.at("dec_mlp_ratio").get<double>();
  return out;
}

inline MaeTrainConfig mae_train_from(const Json& cfg) {
  const Json& m = cfg.at("mae");
  MaeTrainConfig out;
  out.model = mae_model_from(cfg);
  out.augment = ecg_augment_from(cfg);
  out.epochs = m.at("epochs").get<int>();
  out.batch_size = m.at("batch_size").get<int>();
  out.base_lr = m.at("base_lr").get<double>();
  out.weight_decay = m.at("weight_decay").get<double>();
  out.warmup_frac = m.at("warmup_frac").get<double>();
  out.mask_ratio = m.at("mask_ratio").get<double>();
  out.lambda = m.at("lambda").get<double>();
  out.loss_on_all_patches = m.at("loss_on_all_patches").get<bool>();
  out.normalize_targets = m.at("normalize_targets").get<bool>();
  out.max_steps = m.at("max_steps").get<std::int64_t>();
  out.seed = cfg.at("run").at("seed").get<std::uint64_t>();
  out.config_hash = config_hash(cfg);
  return out;
}

inline ConvBackboneConfig backbone_from(const Json& cfg) {
  const Json& i = cfg.at("image_ssl");
  const std::string kind = i.at("backbone").get<std::string>();
  if (kind == "resnet50") return resnet50_backbone_config();
  check_arg(kind == "small", "config: image_ssl.backbone must be 'small' or 'resnet50'");
  return small_backbone_config(i.at("width").get<Index>());
}

inline SimclrTrainConfig simclr_train_from(const Json& cfg) {
  const Json& i = cfg.at("image_ssl");
  SimclrTrainConfig out;
  out.backbone = backbone_from(cfg);
  out.head_hidden = i.at("head_hidden").get<Index>();
  out.head_out = i.at("head_out").get<Index>();
  out.augment = image_augment_from(cfg);
  out.epochs = i.at("epochs").get<int>();
  out.batch_size = i.at("batch_size").get<int>();
  out.base_lr = i.at("base_lr").get<double>();
  out.weight_decay = i.at("weight_decay").get<double>();
  out.warmup_epochs = i.at("warmup_epochs").get<int>();
  out.tau = i.at("tau").get<double>();
  out.seed = cfg.at("run").at("seed").get<std::uint64_t>();
  out.config_hash = config_hash(cfg);
  return out;
}

inline AlignTrainConfig align_train_from(const Json& cfg, Index tabular_features) {
  const Json& a = cfg.at("align");
  AlignTrainConfig out;
  out.mae_model = mae_model_from(cfg);
  out.image_backbone = backbone_from(cfg);
  out.tabular_features = tabular_features;
  out.ecg_augment_cfg = ecg_augment_from(cfg);
  out.image_augment_cfg = image_augment_from(cfg);
  out.corruption_rate = a.at("corruption_rate").get<double>();
  out.epochs = a.at("epochs").get<int>();
  out.batch_size = a.at("batch_size").get<int>();
  out.base_lr = a.at("base_lr").get<double>();
  out.weight_decay = a.at("weight_decay").get<double>();
  out.warmup_frac = a.at("warmup_frac").get<double>();
  out.tau = a.at("tau").get<double>();
  out.lambda = a.at("lambda").get<double>();
  out.freeze_encoders = a.at("freeze_encoders").get<bool>();
  out.seed = cfg.at("run").at("seed").get<std::uint64_t>();
  out.config_hash = config_hash(cfg);
  return out;
}

inline FinetuneTrainConfig finetune_train_from(const Json& cfg,
                                               Index tabular_features) {
  const Json& f = cfg.at("finetune");
  FinetuneTrainConfig out;
  out.mae_model = mae_model_from(cfg);
  out.tabular_features = tabular_features;
  out.epochs = f.at("epochs").get<int>();
  out.batch_size = f.at("batch_size").get<int>();
  out.base_lr = f.at("base_lr").get<double>();
  out.weight_decay = f.at("weight_decay").get<double>();
  out.warmup_frac = f.at("warmup_frac").get<double>();
  out.task = cfg.at("run").at("task").get<std::string>();
  out.seed = cfg.at("run").at("seed").get<std::uint64_t>();
  out.config_hash = config_hash(cfg);
  return out;
}

}  // namespace cardiomm
