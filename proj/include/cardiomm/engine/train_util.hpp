#pragma once

#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "cardiomm/core/rng.hpp"

namespace cardiomm {

// substream tags for the counter-based seeding policy
inline constexpr std::uint64_t kStageSynth = 0x10;
inline constexpr std::uint64_t kStageMae = 0x20;
inline constexpr std::uint64_t kStageImage = 0x30;
inline constexpr std::uint64_t kStageAlign = 0x40;
inline constexpr std::uint64_t kStageFinetune = 0x50;
inline constexpr std::uint64_t kValTag = 0xFF;

/// Epoch-shuffled minibatch index ranges over a dataset of size n.
inline std::vector<std::vector<std::size_t>> epoch_batches(
    std::size_t n, std::size_t batch_size, std::uint64_t seed,
    std::uint64_t stage, std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, {stage, 0xE0, epoch}));
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

/// Fixed-format float for log files: identical runs produce identical bytes.
inline std::string log_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace cardiomm
