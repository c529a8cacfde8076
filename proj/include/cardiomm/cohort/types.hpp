#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cardiomm/core/common.hpp"
#include "cardiomm/core/error.hpp"

namespace cardiomm {

/// One subject's raw multilead ECG, in millivolts.
struct EcgRecord {
  std::string subject_id;
  MatF samples;  // [C leads x T timepoints]
  double sampling_rate = 500.0;
};

inline void validate(const EcgRecord& r) {
  check_arg(r.samples.rows() >= 1 && r.samples.cols() >= 1,
            "EcgRecord: need at least one lead and one timepoint");
  check_arg(r.sampling_rate > 0, "EcgRecord: sampling rate must be positive");
  if (!r.samples.allFinite())
    throw NumericError("EcgRecord '" + r.subject_id + "': non-finite samples");
}

inline constexpr std::array<const char*, 3> kPhaseNames = {
    "end_diastolic", "end_systolic", "mid"};

/// Three cardiac-phase slices of one subject's CMR, values in [0,1].
struct CmrPhaseStack {
  std::string subject_id;
  MatF phases;  // [3 x H*W], one row per phase
  Index height = 0;
  Index width = 0;

  Eigen::Map<const MatF> phase(Index p) const {
    return Eigen::Map<const MatF>(phases.row(p).data(), height, width);
  }
  Eigen::Map<MatF> phase(Index p) {
    return Eigen::Map<MatF>(phases.row(p).data(), height, width);
  }
};

inline void validate(const CmrPhaseStack& s) {
  check_arg(s.phases.rows() == 3, "CmrPhaseStack: exactly 3 phase slices");
  check_arg(s.height >= 8 && s.width >= 8, "CmrPhaseStack: H and W must be >= 8");
  check_arg(s.phases.cols() == s.height * s.width,
            "CmrPhaseStack: pixel buffer does not match H*W");
  if (!s.phases.allFinite() || s.phases.minCoeff() < 0.0f ||
      s.phases.maxCoeff() > 1.0f)
    throw NumericError("CmrPhaseStack '" + s.subject_id +
                       "': values must be finite and in [0,1]");
}

enum class FeatureKind { categorical, continuous };

/// Declares the tabular feature layout: names, kinds, category vocabularies
/// and observed continuous ranges.
struct FeatureSchema {
  struct Feature {
    std::string name;
    FeatureKind kind = FeatureKind::continuous;
    std::vector<std::string> vocabulary;  // categorical only, ordinal order
    double min = 0.0, max = 1.0;          // continuous only, observed range
  };
  std::string id;
  std::vector<Feature> features;

  Index size() const { return static_cast<Index>(features.size()); }
  const Feature& at(Index i) const { return features[static_cast<std::size_t>(i)]; }
};

inline void validate(const FeatureSchema& s) {
  std::map<std::string, int> seen;
  for (const auto& f : s.features) {
    check_arg(++seen[f.name] == 1, "FeatureSchema: duplicate feature '" + f.name + "'");
    if (f.kind == FeatureKind::categorical)
      check_arg(!f.vocabulary.empty(),
                "FeatureSchema: empty vocabulary for '" + f.name + "'");
    else
      check_arg(f.min <= f.max, "FeatureSchema: min > max for '" + f.name + "'");
  }
}

/// Raw tabular cells as text: continuous values are decimal strings,
/// categorical values are vocabulary entries, and an empty string marks a
/// missing value.
struct TabularRecord {
  std::string subject_id;
  std::vector<std::string> values;
  std::string schema_id;

  bool missing(Index i) const { return values[static_cast<std::size_t>(i)].empty(); }
};

inline void validate(const TabularRecord& r, const FeatureSchema& schema) {
  check_arg(static_cast<Index>(r.values.size()) == schema.size(),
            "TabularRecord '" + r.subject_id + "': expected " +
                std::to_string(schema.size()) + " values, got " +
                std::to_string(r.values.size()));
}

inline constexpr const char* kTaskMi = "mi";
inline constexpr const char* kTaskStroke = "stroke";

/// One subject with all three modalities paired plus downstream labels.
struct PairedSample {
  EcgRecord ecg;
  CmrPhaseStack cmr;
  TabularRecord tabular;
  std::map<std::string, int> labels;  // task name -> {0,1}

  const std::string& subject_id() const { return ecg.subject_id; }
};

inline void validate(const PairedSample& s, const FeatureSchema& schema) {
  validate(s.ecg);
  validate(s.cmr);
  validate(s.tabular, schema);
  check_arg(s.ecg.subject_id == s.cmr.subject_id &&
                s.ecg.subject_id == s.tabular.subject_id,
            "PairedSample: modalities disagree on subject_id");
  for (const auto& [task, label] : s.labels)
    check_arg(label == 0 || label == 1,
              "PairedSample '" + s.ecg.subject_id + "': label for task '" +
                  task + "' must be 0 or 1");
}

struct Cohort {
  std::vector<PairedSample> samples;
  FeatureSchema schema;
  std::vector<std::string> tasks;

  std::size_t size() const { return samples.size(); }
};

/// Disjoint train/val/test partition of subject ids.
struct DatasetSplit {
  std::vector<std::string> train, val, test;
  std::uint64_t seed = 0;
  std::array<double, 3> ratios{0.8, 0.1, 0.1};
};

}  // namespace cardiomm
