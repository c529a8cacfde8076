#pragma once

#include <algorithm>
#include <cstdlib>
#include <map>
#include <string>
#include <vector>

#include "cardiomm/cohort/types.hpp"
#include "cardiomm/core/common.hpp"
#include "cardiomm/core/error.hpp"

namespace cardiomm {

/// Fully numeric feature vector: categorical cells as ordinal codes,
/// continuous cells min-max scaled into [0,1].
struct EncodedTabular {
  std::string subject_id;
  VecF features;
};

namespace detail {

inline double parse_number(const std::string& text, const std::string& feature) {
  char* end = nullptr;
  double v = std::strtod(text.c_str(), &end);
  check_arg(end != text.c_str() && *end == '\0',
            "tabular: cannot parse '" + text + "' as a number for feature '" +
                feature + "'");
  return v;
}

inline Index ordinal_code(const FeatureSchema::Feature& f,
                          const std::string& value) {
  auto it = std::find(f.vocabulary.begin(), f.vocabulary.end(), value);
  if (it == f.vocabulary.end())
    throw ConfigError("tabular: value '" + value +
                      "' is not in the vocabulary of feature '" + f.name + "'");
  return static_cast<Index>(it - f.vocabulary.begin());
}

}  // namespace detail

/// Ordinal-encodes categoricals and min-max normalizes continuous features
/// to [0,1] (clamped outside the observed range). Missing cells must have
/// been imputed first.
inline EncodedTabular encode_tabular(const TabularRecord& record,
                                     const FeatureSchema& schema) {
  validate(record, schema);
  EncodedTabular out;
  out.subject_id = record.subject_id;
  out.features.resize(schema.size());
  for (Index i = 0; i < schema.size(); ++i) {
    const auto& f = schema.at(i);
    const std::string& cell = record.values[static_cast<std::size_t>(i)];
    check_arg(!cell.empty(), "encode_tabular: missing value for feature '" +
                                 f.name + "' of subject '" + record.subject_id +
                                 "'; impute first");
    if (f.kind == FeatureKind::categorical) {
      out.features[i] = static_cast<float>(detail::ordinal_code(f, cell));
    } else {
      double v = detail::parse_number(cell, f.name);
      double range = f.max - f.min;
      double scaled = range > 0 ? (v - f.min) / range : 0.0;
      out.features[i] = static_cast<float>(std::clamp(scaled, 0.0, 1.0));
    }
  }
  return out;
}

inline std::vector<EncodedTabular> encode_tabular(
    const std::vector<TabularRecord>& records, const FeatureSchema& schema) {
  std::vector<EncodedTabular> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(encode_tabular(r, schema));
  return out;
}

/// Iterative multivariate imputation. Categorical gaps take the observed
/// mode; continuous gaps start at the feature mean and are refined by
/// round-robin least-squares regression on all other features for a fixed
/// number of rounds. Observed cells are never altered.
inline std::vector<TabularRecord> impute_tabular(
    const std::vector<TabularRecord>& table, const FeatureSchema& schema,
    int rounds = 10) {
  check_arg(!table.empty(), "impute_tabular: empty table");
  const Index n = static_cast<Index>(table.size());
  const Index f_count = schema.size();
  for (const auto& r : table) validate(r, schema);

  // observed flags + numeric working matrix (ordinal codes for categoricals)
  MatD values(n, f_count);
  Mat<std::uint8_t> observed(n, f_count);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < f_count; ++j) {
      const std::string& cell = table[static_cast<std::size_t>(i)]
                                    .values[static_cast<std::size_t>(j)];
      observed(i, j) = cell.empty() ? 0 : 1;
      if (cell.empty()) {
        values(i, j) = 0.0;
        continue;
      }
      const auto& feat = schema.at(j);
      values(i, j) = feat.kind == FeatureKind::categorical
                         ? static_cast<double>(detail::ordinal_code(feat, cell))
                         : detail::parse_number(cell, feat.name);
    }

  std::vector<std::string> cat_fill(static_cast<std::size_t>(f_count));
  for (Index j = 0; j < f_count; ++j) {
    const auto& feat = schema.at(j);
    Index n_obs = 0;
    for (Index i = 0; i < n; ++i) n_obs += observed(i, j);
    check_arg(n_obs > 0, "impute_tabular: feature '" + feat.name +
                             "' has no observed values");
    if (feat.kind == FeatureKind::categorical) {
      // mode of observed values; ties break toward the earlier vocab entry
      std::vector<Index> counts(feat.vocabulary.size(), 0);
      for (Index i = 0; i < n; ++i)
        if (observed(i, j))
          counts[static_cast<std::size_t>(values(i, j))]++;
      std::size_t best = 0;
      for (std::size_t k = 1; k < counts.size(); ++k)
        if (counts[k] > counts[best]) best = k;
      cat_fill[static_cast<std::size_t>(j)] = feat.vocabulary[best];
      for (Index i = 0; i < n; ++i)
        if (!observed(i, j)) values(i, j) = static_cast<double>(best);
    } else {
      double mean = 0;
      for (Index i = 0; i < n; ++i)
        if (observed(i, j)) mean += values(i, j);
      mean /= static_cast<double>(n_obs);
      for (Index i = 0; i < n; ++i)
        if (!observed(i, j)) values(i, j) = mean;
    }
  }

  // round-robin regression updates for continuous gaps only
  for (int round = 0; round < rounds; ++round) {
    for (Index j = 0; j < f_count; ++j) {
      if (schema.at(j).kind != FeatureKind::continuous) continue;
      Index n_obs = 0;
      for (Index i = 0; i < n; ++i) n_obs += observed(i, j);
      if (n_obs == n || n_obs == 0) continue;
      MatD design(n_obs, f_count);  // other features + intercept column
      VecD target(n_obs);
      Index row = 0;
      for (Index i = 0; i < n; ++i) {
        if (!observed(i, j)) continue;
        Index col = 0;
        for (Index k = 0; k < f_count; ++k)
          if (k != j) design(row, col++) = values(i, k);
        design(row, f_count - 1) = 1.0;
        target(row++) = values(i, j);
      }
      VecD beta = design.colPivHouseholderQr().solve(target);
      for (Index i = 0; i < n; ++i) {
        if (observed(i, j)) continue;
        double pred = beta(f_count - 1);
        Index col = 0;
        for (Index k = 0; k < f_count; ++k)
          if (k != j) pred += beta(col++) * values(i, k);
        values(i, j) = pred;
      }
    }
  }

  std::vector<TabularRecord> out = table;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < f_count; ++j) {
      if (observed(i, j)) continue;
      auto& cell = out[static_cast<std::size_t>(i)]
                       .values[static_cast<std::size_t>(j)];
      cell = schema.at(j).kind == FeatureKind::categorical
                 ? cat_fill[static_cast<std::size_t>(j)]
                 : format_double(values(i, j));
    }
  return out;
}

}  // namespace cardiomm
