#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "cardiomm/cohort/types.hpp"
#include "cardiomm/core/common.hpp"
#include "cardiomm/core/error.hpp"
#include "cardiomm/core/rng.hpp"

namespace cardiomm {

/// Synthetic paired-cohort generator. Every subject carries a latent vector
/// z = (disease propensity, three phenotype factors); each modality shows a
/// noisy view of it. The modality weights control how much of z0 leaks into
/// each modality; with the defaults the images are the cleanest view, ECG is
/// weaker, tabular weakest, so knowledge transfer from the image branch has
/// something real to transfer.
struct SynthConfig {
  int n = 1000;
  int ecg_leads = 12;
  int ecg_samples = 5000;
  double sampling_rate = 500.0;
  int image_height = 64;
  int image_width = 64;
  double prevalence = 0.1;          // MI task
  double stroke_prevalence = -1.0;  // < 0 means half of `prevalence`
  double image_weight = 2.0;
  double ecg_weight = 1.2;
  double tabular_weight = 0.7;
  double label_steepness = 2.5;
  double tabular_missing_rate = 0.0;
};

namespace synth_detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Solves E_{z~N(0,1)}[sigmoid(s*z + b)] = p for b, by bisection over a
/// fixed Gaussian quadrature grid.
inline double solve_intercept(double steepness, double p) {
  auto mean_prob = [&](double b) {
    const double step = 1.0 / 64.0;
    double acc = 0.0, wsum = 0.0;
    for (double x = -8.0; x <= 8.0; x += step) {
      double w = std::exp(-0.5 * x * x);
      acc += w * sigmoid(steepness * x + b);
      wsum += w;
    }
    return acc / wsum;
  };
  double lo = -60.0, hi = 60.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (mean_prob(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double gauss(double x, double mu, double sigma) {
  double d = (x - mu) / sigma;
  return std::exp(-0.5 * d * d);
}

/// One heartbeat evaluated at phase in [0,1): P wave, QRS complex and a
/// disease-modulated T wave / ST segment.
inline double beat_core(double phase) {
  return 0.15 * gauss(phase, 0.18, 0.030) - 0.12 * gauss(phase, 0.355, 0.012) +
         1.10 * gauss(phase, 0.380, 0.014) - 0.25 * gauss(phase, 0.405, 0.012);
}

inline double beat_twave(double phase, double t_amp, double st_shift) {
  return t_amp * gauss(phase, 0.62, 0.060) + st_shift * gauss(phase, 0.50, 0.050);
}

// per-lead projection of the beat template and of the T-wave prominence
inline constexpr double kLeadScale[12] = {1.0,  0.85, 0.6, -0.75, 0.5,  0.9,
                                          0.7,  1.1,  1.2, 1.05,  0.95, 0.8};
inline constexpr double kLeadTwave[12] = {1.0, 0.9, 0.7, 0.8, 0.6, 1.0,
                                          0.8, 1.1, 1.2, 1.0, 0.9, 0.85};

inline std::string fmt1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

inline std::string draw_binary(Rng& rng, double logit) {
  return rng.uniform() < sigmoid(logit) ? "Positive" : "Negative";
}

inline const std::vector<std::string>& yes_no() {
  static const std::vector<std::string> v = {"Negative", "Positive"};
  return v;
}

}  // namespace synth_detail

inline FeatureSchema synthetic_schema_template() {
  using F = FeatureSchema::Feature;
  FeatureSchema s;
  s.id = "synthcv-v1";
  auto cont = [](std::string name) {
    F f;
    f.name = std::move(name);
    f.kind = FeatureKind::continuous;
    return f;
  };
  auto cat = [](std::string name, std::vector<std::string> vocab) {
    F f;
    f.name = std::move(name);
    f.kind = FeatureKind::categorical;
    f.vocabulary = std::move(vocab);
    return f;
  };
  const auto yn = synth_detail::yes_no();
  s.features = {
      cont("age"),
      cont("waist_circumference"),
      cont("height"),
      cont("weight"),
      cont("bmi"),
      cat("sex", {"Female", "Male"}),
      cat("diabetes", yn),
      cat("health_rating", {"Poor", "Fair", "Good", "Excellent"}),
      cat("vascular_heart_problem", yn),
      cat("father_stroke", yn),
      cat("mother_stroke", yn),
      cat("siblings_stroke", yn),
      cat("breath_shortness", yn),
      cat("anxiety_visit", yn),
      cat("chest_pain", yn),
      cat("stenosis", yn),
      cat("hypertension", yn),
      cat("kidney_disease", yn),
      cat("dementia", yn),
      cat("thyrotoxicosis", yn),
      cat("migraine", yn),
      cat("atrial_fibrillation", yn),
      cat("heart_failure", yn),
      cat("embolism", yn),
      cat("deep_vein_thrombosis", yn),
      cat("smoke", {"Never", "Previous", "Current"}),
      cat("alcohol_intake",
          {"Never", "Special occasions", "One to three times a month",
           "Once or twice a week", "Three or four times a week", "Daily"}),
      cat("diet_salt", {"Never or rarely", "Sometimes", "Usually", "Always"}),
      cont("tv_time"),
      cont("pc_time"),
      cont("physical_activity"),
      cont("sleep_duration"),
      cont("coffee_intake"),
  };
  return s;
}

namespace synth_detail {

inline MatF make_ecg(const SynthConfig& cfg, const double* z, Rng& rng) {
  const int leads = cfg.ecg_leads;
  const int t_len = cfg.ecg_samples;
  const double fs = cfg.sampling_rate;
  const double d_e = cfg.ecg_weight * 0.5 * z[0] + 0.15 * rng.normal();
  const double hr = std::clamp(65.0 + 7.0 * z[1] + 4.0 * std::tanh(d_e), 45.0, 100.0);
  const double beat_len = fs * 60.0 / hr;
  const double t_amp = 0.35 * (1.0 - 0.5 * std::tanh(d_e));
  const double st_shift = -0.12 * std::tanh(d_e);
  const double amp = std::exp(0.10 * z[2]);
  const double phase0 = rng.uniform();

  MatF ecg(leads, t_len);
  std::vector<double> core(t_len), twave(t_len);
  for (int t = 0; t < t_len; ++t) {
    double phase = std::fmod(t / beat_len + phase0, 1.0);
    core[t] = beat_core(phase);
    twave[t] = beat_twave(phase, t_amp, st_shift);
  }
  for (int l = 0; l < leads; ++l) {
    double ls = kLeadScale[l % 12];
    double lt = kLeadTwave[l % 12];
    double wander_phase = rng.uniform() * 2.0 * std::numbers::pi;
    for (int t = 0; t < t_len; ++t) {
      double wander = 0.08 * std::sin(2.0 * std::numbers::pi * 0.25 * t / fs +
                                      wander_phase);
      ecg(l, t) = static_cast<float>(amp * ls * (core[t] + lt * twave[t]) +
                                     wander + 0.06 * rng.normal());
    }
  }
  return ecg;
}

inline MatF make_cmr(const SynthConfig& cfg, const double* z, Rng& rng,
                     Index* h_out, Index* w_out) {
  const int h = cfg.image_height, w = cfg.image_width;
  const double d_i = cfg.image_weight * 0.5 * z[0];
  const double dilation = 0.5 * (1.0 + std::tanh(d_i));  // 1 = diseased-like
  const double r_outer_ed =
      0.21 * std::min(h, w) * (1.0 + 0.05 * z[2] + 0.03 * rng.normal());
  const double contraction = 0.68 + 0.24 * dilation;  // ES outer / ED outer
  const double r_outer_es = r_outer_ed * contraction;
  const double cav_ed = r_outer_ed * (0.45 + 0.30 * dilation);
  const double cav_es = cav_ed * (0.50 + 0.40 * dilation);
  const double cx = 0.5 * w + 0.04 * w * z[3] + 0.6 * rng.normal();
  const double cy = 0.5 * h + 0.04 * h * z[3] + 0.6 * rng.normal();
  const double aspect = 1.0 + 0.08 * z[1];

  const double r_outer[3] = {r_outer_ed, r_outer_es,
                             0.5 * (r_outer_ed + r_outer_es)};
  const double r_cavity[3] = {cav_ed, cav_es, 0.5 * (cav_ed + cav_es)};

  MatF phases(3, h * w);
  auto smooth = [](double d) { return sigmoid(d / 0.6); };  // ~1px edge
  for (int p = 0; p < 3; ++p) {
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        double dx = (j - cx) * aspect, dy = (i - cy) / aspect;
        double r = std::sqrt(dx * dx + dy * dy);
        double inside_outer = smooth(r_outer[p] - r);
        double inside_cavity = smooth(r_cavity[p] - r);
        double v = 0.15 + 0.70 * inside_outer - 0.35 * inside_cavity +
                   0.025 * rng.normal();
        phases(p, i * w + j) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
  }
  *h_out = h;
  *w_out = w;
  return phases;
}

inline std::vector<std::string> make_tabular(const SynthConfig& cfg,
                                             const double* z, Rng& rng) {
  const double g_t = cfg.tabular_weight * 0.5 * z[0];
  std::vector<std::string> v;
  v.reserve(33);

  double age = std::clamp(64.6 + 4.0 * g_t + 6.5 * z[1] + 3.0 * rng.normal(), 40.0, 90.0);
  double height = 170.1 + 9.0 * rng.normal();
  double bmi = std::clamp(26.5 + 1.8 * g_t + 3.0 * z[2] + 2.0 * rng.normal(), 16.0, 45.0);
  double weight = bmi * (height / 100.0) * (height / 100.0) + 0.5 * rng.normal();
  double waist = 55.0 + 1.27 * bmi + 4.0 * rng.normal();

  v.push_back(fmt1(age));
  v.push_back(fmt1(waist));
  v.push_back(fmt1(height));
  v.push_back(fmt1(weight));
  v.push_back(fmt1(bmi));
  v.push_back(rng.uniform() < 0.517 ? "Female" : "Male");
  v.push_back(draw_binary(rng, -2.80 + 1.0 * g_t));  // diabetes
  {
    double score = 2.0 - 0.9 * g_t + 0.8 * rng.normal();
    v.push_back(score > 2.6   ? "Excellent"
                : score > 1.4 ? "Good"
                : score > 0.4 ? "Fair"
                              : "Poor");
  }
  v.push_back(draw_binary(rng, -2.76 + 1.3 * g_t));  // vascular_heart_problem
  v.push_back(draw_binary(rng, -1.82));              // father_stroke
  v.push_back(draw_binary(rng, -1.81));              // mother_stroke
  v.push_back(draw_binary(rng, -3.28));              // siblings_stroke
  v.push_back(draw_binary(rng, -2.60 + 0.8 * g_t));  // breath_shortness
  v.push_back(draw_binary(rng, -0.85));              // anxiety_visit
  v.push_back(draw_binary(rng, -2.15 + 1.0 * g_t));  // chest_pain
  v.push_back(draw_binary(rng, -5.80));              // stenosis
  v.push_back(draw_binary(rng, -1.28 + 1.2 * g_t));  // hypertension
  v.push_back(draw_binary(rng, -3.58));              // kidney_disease
  v.push_back(draw_binary(rng, -7.80));              // dementia
  v.push_back(draw_binary(rng, -4.28));              // thyrotoxicosis
  v.push_back(draw_binary(rng, -2.53));              // migraine
  v.push_back(draw_binary(rng, -3.41 + 0.8 * g_t));  // atrial_fibrillation
  v.push_back(draw_binary(rng, -4.95));              // heart_failure
  v.push_back(draw_binary(rng, -4.70));              // embolism
  v.push_back(draw_binary(rng, -4.11));              // deep_vein_thrombosis
  {
    double u = rng.uniform();
    v.push_back(u < 0.60 ? "Never" : u < 0.98 ? "Previous" : "Current");
  }
  {
    static const char* levels[6] = {"Never", "Special occasions",
                                    "One to three times a month",
                                    "Once or twice a week",
                                    "Three or four times a week", "Daily"};
    static const double cum[6] = {0.08, 0.20, 0.42, 0.67, 0.90, 1.0};
    double u = rng.uniform();
    int k = 0;
    while (k < 5 && u >= cum[k]) ++k;
    v.push_back(levels[k]);
  }
  {
    static const char* levels[4] = {"Never or rarely", "Sometimes", "Usually",
                                    "Always"};
    static const double cum[4] = {0.57, 0.85, 0.96, 1.0};
    double u = rng.uniform();
    int k = 0;
    while (k < 3 && u >= cum[k]) ++k;
    v.push_back(levels[k]);
  }
  v.push_back(fmt1(std::max(0.0, 2.8 + 1.5 * rng.normal())));       // tv_time
  v.push_back(fmt1(std::max(0.0, 1.5 + 1.4 * rng.normal())));       // pc_time
  v.push_back(fmt1(std::clamp(4.1 - 0.5 * g_t + 2.1 * rng.normal(), 0.0, 7.0)));
  v.push_back(fmt1(std::clamp(7.2 + 1.0 * rng.normal(), 3.0, 12.0)));
  v.push_back(fmt1(std::max(0.0, 2.0 + 1.8 * rng.normal())));       // coffee
  return v;
}

}  // namespace synth_detail

/// Generates `cfg.n` fully paired subjects. Deterministic: a fixed
/// (config, seed) yields a byte-identical cohort, with one independent RNG
/// substream per subject and modality.
inline Cohort generate_synthetic_cohort(const SynthConfig& cfg,
                                        std::uint64_t seed) {
  check_arg(cfg.n >= 10, "synth: cohort size must be >= 10");
  check_arg(cfg.prevalence > 0.0 && cfg.prevalence < 1.0,
            "synth: prevalence must lie in (0,1)");
  check_arg(cfg.ecg_leads >= 1 && cfg.ecg_leads <= 12 && cfg.ecg_samples >= 16,
            "synth: ECG shape out of range");
  check_arg(cfg.image_height >= 16 && cfg.image_width >= 16,
            "synth: image size must be >= 16");
  check_arg(cfg.tabular_missing_rate >= 0.0 && cfg.tabular_missing_rate < 0.5,
            "synth: tabular missing rate must lie in [0, 0.5)");
  const double p_stroke =
      cfg.stroke_prevalence >= 0 ? cfg.stroke_prevalence : cfg.prevalence / 2.0;
  check_arg(p_stroke > 0.0 && p_stroke < 1.0,
            "synth: stroke prevalence must lie in (0,1)");

  const double b_mi =
      synth_detail::solve_intercept(cfg.label_steepness, cfg.prevalence);
  const double b_stroke =
      synth_detail::solve_intercept(cfg.label_steepness, p_stroke);

  Cohort cohort;
  cohort.schema = synthetic_schema_template();
  cohort.tasks = {kTaskMi, kTaskStroke};

  const Index f_count = cohort.schema.size();
  std::vector<std::vector<double>> observed_continuous(
      static_cast<std::size_t>(f_count));

  for (int i = 0; i < cfg.n; ++i) {
    char sid[32];
    std::snprintf(sid, sizeof(sid), "subj%06d", i);

    Rng z_rng(derive_seed(seed, {0x01, static_cast<std::uint64_t>(i)}));
    Rng ecg_rng(derive_seed(seed, {0x02, static_cast<std::uint64_t>(i)}));
    Rng cmr_rng(derive_seed(seed, {0x03, static_cast<std::uint64_t>(i)}));
    Rng tab_rng(derive_seed(seed, {0x04, static_cast<std::uint64_t>(i)}));
    Rng label_rng(derive_seed(seed, {0x05, static_cast<std::uint64_t>(i)}));

    double z[4];
    for (double& c : z) c = z_rng.normal();

    PairedSample s;
    s.ecg.subject_id = sid;
    s.ecg.sampling_rate = cfg.sampling_rate;
    s.ecg.samples = synth_detail::make_ecg(cfg, z, ecg_rng);

    s.cmr.subject_id = sid;
    s.cmr.phases = synth_detail::make_cmr(cfg, z, cmr_rng, &s.cmr.height, &s.cmr.width);

    s.tabular.subject_id = sid;
    s.tabular.schema_id = cohort.schema.id;
    s.tabular.values = synth_detail::make_tabular(cfg, z, tab_rng);
    if (cfg.tabular_missing_rate > 0.0)
      for (auto& cell : s.tabular.values)
        if (tab_rng.uniform() < cfg.tabular_missing_rate) cell.clear();

    double mi_score = cfg.label_steepness * z[0] + b_mi;
    double stroke_driver = 0.6 * z[0] + 0.8 * z[3];
    double stroke_score = cfg.label_steepness * stroke_driver + b_stroke;
    s.labels[kTaskMi] =
        label_rng.uniform() < synth_detail::sigmoid(mi_score) ? 1 : 0;
    s.labels[kTaskStroke] =
        label_rng.uniform() < synth_detail::sigmoid(stroke_score) ? 1 : 0;

    for (Index j = 0; j < f_count; ++j) {
      if (cohort.schema.at(j).kind != FeatureKind::continuous) continue;
      const std::string& cell = s.tabular.values[static_cast<std::size_t>(j)];
      if (!cell.empty())
        observed_continuous[static_cast<std::size_t>(j)].push_back(
            std::strtod(cell.c_str(), nullptr));
    }
    cohort.samples.push_back(std::move(s));
  }

  for (Index j = 0; j < f_count; ++j) {
    auto& f = cohort.schema.features[static_cast<std::size_t>(j)];
    if (f.kind != FeatureKind::continuous) continue;
    const auto& obs = observed_continuous[static_cast<std::size_t>(j)];
    check_arg(!obs.empty(), "synth: feature '" + f.name + "' fully missing");
    f.min = *std::min_element(obs.begin(), obs.end());
    f.max = *std::max_element(obs.begin(), obs.end());
  }
  return cohort;
}

}  // namespace cardiomm
