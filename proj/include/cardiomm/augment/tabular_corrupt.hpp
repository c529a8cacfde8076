#pragma once

#include <cmath>
#include <vector>

#include "cardiomm/core/common.hpp"
#include "cardiomm/core/error.hpp"
#include "cardiomm/core/rng.hpp"

namespace cardiomm {

/// Per-feature lists of observed values; corruption draws replacements from
/// these and nothing else.
using EmpiricalPools = std::vector<std::vector<float>>;

inline EmpiricalPools build_empirical_pools(const MatF& encoded) {
  check_arg(encoded.rows() > 0, "empirical pools: empty feature matrix");
  EmpiricalPools pools(static_cast<std::size_t>(encoded.cols()));
  for (Index f = 0; f < encoded.cols(); ++f) {
    auto& pool = pools[static_cast<std::size_t>(f)];
    pool.reserve(static_cast<std::size_t>(encoded.rows()));
    for (Index i = 0; i < encoded.rows(); ++i) pool.push_back(encoded(i, f));
  }
  return pools;
}

/// Feature-subset corruption: for each row, round(rate * F) feature positions
/// are chosen without replacement and each is replaced by a draw (with
/// replacement) from that feature's empirical pool.
inline MatF tabular_corrupt(const MatF& batch, double rate,
                            const EmpiricalPools& pools, Rng& rng) {
  check_arg(rate >= 0.0 && rate <= 1.0, "tabular_corrupt: rate must lie in [0,1]");
  const Index f_count = batch.cols();
  check_arg(static_cast<Index>(pools.size()) == f_count,
            "tabular_corrupt: one pool per feature required");
  for (const auto& pool : pools)
    check_arg(!pool.empty(), "tabular_corrupt: empty empirical pool");

  const auto k = static_cast<std::size_t>(
      std::llround(rate * static_cast<double>(f_count)));
  MatF out = batch;
  for (Index i = 0; i < batch.rows(); ++i) {
    auto positions = rng.sample_without_replacement(
        static_cast<std::size_t>(f_count), k);
    for (std::size_t f : positions) {
      const auto& pool = pools[f];
      out(i, static_cast<Index>(f)) =
          pool[rng.uniform_int(pool.size())];
    }
  }
  return out;
}

}  // namespace cardiomm
