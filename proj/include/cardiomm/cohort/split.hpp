#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cardiomm/cohort/types.hpp"
#include "cardiomm/core/error.hpp"
#include "cardiomm/core/rng.hpp"

namespace cardiomm {

/// Deterministic train/val/test partition of subject ids. Sizes are the
/// rounded ratio shares (test absorbing the remainder), so every size lands
/// within one subject of its exact share.
inline DatasetSplit split_dataset(const std::vector<std::string>& subject_ids,
                                  std::array<double, 3> ratios,
                                  std::uint64_t seed) {
  check_arg(!subject_ids.empty(), "split_dataset: empty cohort");
  double sum = ratios[0] + ratios[1] + ratios[2];
  check_arg(std::abs(sum - 1.0) <= 1e-9,
            "split_dataset: ratios must sum to 1 (got " + format_double(sum) + ")");
  check_arg(ratios[0] >= 0 && ratios[1] >= 0 && ratios[2] >= 0,
            "split_dataset: ratios must be non-negative");

  std::vector<std::string> ids = subject_ids;
  Rng rng(derive_seed(seed, {0x5B17}));
  rng.shuffle(ids);

  const auto n = static_cast<std::int64_t>(ids.size());
  auto n_train = std::llround(ratios[0] * static_cast<double>(n));
  auto n_val = std::llround(ratios[1] * static_cast<double>(n));
  n_train = std::clamp<std::int64_t>(n_train, 0, n);
  n_val = std::clamp<std::int64_t>(n_val, 0, n - n_train);

  DatasetSplit split;
  split.seed = seed;
  split.ratios = ratios;
  split.train.assign(ids.begin(), ids.begin() + n_train);
  split.val.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
  split.test.assign(ids.begin() + n_train + n_val, ids.end());
  return split;
}

inline DatasetSplit split_dataset(const Cohort& cohort,
                                  std::array<double, 3> ratios,
                                  std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(cohort.size());
  for (const auto& s : cohort.samples) ids.push_back(s.subject_id());
  return split_dataset(ids, ratios, seed);
}

inline std::vector<std::size_t> cohort_indices_for(
    const Cohort& cohort, const std::vector<std::string>& subject_ids) {
  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < cohort.size(); ++i)
    by_id.emplace(cohort.samples[i].subject_id(), i);
  std::vector<std::size_t> out;
  out.reserve(subject_ids.size());
  for (const auto& id : subject_ids) {
    auto it = by_id.find(id);
    check_arg(it != by_id.end(), "cohort: subject '" + id + "' not present");
    out.push_back(it->second);
  }
  return out;
}

/// FNV-1a; std::hash is implementation-defined, this keeps seed derivation
/// identical on every platform.
inline std::uint64_t stable_string_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// All positives for `task` plus an equal number of negatives sampled
/// without replacement, in a deterministic shuffled order.
inline std::vector<std::size_t> balanced_subset_indices(
    const Cohort& cohort, const std::vector<std::size_t>& pool,
    const std::string& task, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i : pool) {
    const auto& labels = cohort.samples[i].labels;
    auto it = labels.find(task);
    check_arg(it != labels.end(), "balanced_subset: sample '" +
                                      cohort.samples[i].subject_id() +
                                      "' lacks a label for task '" + task + "'");
    (it->second == 1 ? pos : neg).push_back(i);
  }
  check_arg(!pos.empty(), "balanced_subset: no positive samples for task '" + task + "'");
  check_arg(neg.size() >= pos.size(),
            "balanced_subset: fewer negatives (" + std::to_string(neg.size()) +
                ") than positives (" + std::to_string(pos.size()) + ")");

  Rng rng(derive_seed(seed, {0xBA1A, stable_string_hash(task)}));
  auto chosen = rng.sample_without_replacement(neg.size(), pos.size());
  std::vector<std::size_t> out = pos;
  for (std::size_t k : chosen) out.push_back(neg[k]);
  rng.shuffle(out);
  return out;
}

inline std::vector<PairedSample> build_balanced_subset(const Cohort& cohort,
                                                       const std::string& task,
                                                       std::uint64_t seed) {
  std::vector<std::size_t> pool(cohort.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  auto idx = balanced_subset_indices(cohort, pool, task, seed);
  std::vector<PairedSample> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(cohort.samples[i]);
  return out;
}

}  // namespace cardiomm
