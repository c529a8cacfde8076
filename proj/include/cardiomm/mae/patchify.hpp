#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cardiomm/core/common.hpp"
#include "cardiomm/core/error.hpp"
#include "cardiomm/core/rng.hpp"

namespace cardiomm {

/// Non-overlapping rectangular patches over a [C x T] multilead signal,
/// flattened lead-major: patch p covers lead block p / (T/ts) and time block
/// p % (T/ts).
struct PatchShape {
  Index lead_span = 1;
  Index time_span = 100;
};

template <class S>
struct PatchGrid {
  Mat<S> patches;  // [N x D], D = lead_span * time_span
  PatchShape shape;
  Index leads = 0;   // C of the source signal
  Index samples = 0; // T of the source signal

  Index n_patches() const { return patches.rows(); }
  Index patch_dim() const { return patches.cols(); }
};

template <class S>
PatchGrid<S> patchify(const Mat<S>& signal, PatchShape shape = {}) {
  const Index c = signal.rows(), t = signal.cols();
  check_arg(shape.lead_span >= 1 && shape.time_span >= 1,
            "patchify: patch spans must be >= 1");
  if (t % shape.time_span != 0)
    throw ConfigError("patchify: T=" + std::to_string(t) +
                      " is not divisible by time span " +
                      std::to_string(shape.time_span) + "; pad the signal by " +
                      std::to_string(shape.time_span - t % shape.time_span) +
                      " samples or change the patch shape");
  if (c % shape.lead_span != 0)
    throw ConfigError("patchify: C=" + std::to_string(c) +
                      " is not divisible by lead span " +
                      std::to_string(shape.lead_span) + "; pad by " +
                      std::to_string(shape.lead_span - c % shape.lead_span) +
                      " leads or change the patch shape");
  const Index lead_blocks = c / shape.lead_span;
  const Index time_blocks = t / shape.time_span;
  PatchGrid<S> grid;
  grid.shape = shape;
  grid.leads = c;
  grid.samples = t;
  grid.patches.resize(lead_blocks * time_blocks,
                      shape.lead_span * shape.time_span);
  for (Index lb = 0; lb < lead_blocks; ++lb)
    for (Index tb = 0; tb < time_blocks; ++tb) {
      Index p = lb * time_blocks + tb;
      for (Index l = 0; l < shape.lead_span; ++l)
        grid.patches.row(p).segment(l * shape.time_span, shape.time_span) =
            signal.row(lb * shape.lead_span + l)
                .segment(tb * shape.time_span, shape.time_span);
    }
  return grid;
}

template <class S>
Mat<S> unpatchify(const PatchGrid<S>& grid) {
  return unpatchify(grid.patches, grid.shape, grid.leads, grid.samples);
}

template <class S>
Mat<S> unpatchify(const Mat<S>& patches, PatchShape shape, Index leads,
                  Index samples) {
  const Index lead_blocks = leads / shape.lead_span;
  const Index time_blocks = samples / shape.time_span;
  check_arg(patches.rows() == lead_blocks * time_blocks &&
                patches.cols() == shape.lead_span * shape.time_span,
            "unpatchify: patch matrix does not match the declared geometry");
  Mat<S> signal(leads, samples);
  for (Index lb = 0; lb < lead_blocks; ++lb)
    for (Index tb = 0; tb < time_blocks; ++tb) {
      Index p = lb * time_blocks + tb;
      for (Index l = 0; l < shape.lead_span; ++l)
        signal.row(lb * shape.lead_span + l)
            .segment(tb * shape.time_span, shape.time_span) =
            patches.row(p).segment(l * shape.time_span, shape.time_span);
    }
  return signal;
}

/// Visible/masked partition of a patch grid. Index lists are kept sorted so
/// the mask is a pure set: callers never depend on draw order.
struct PatchMask {
  std::vector<Index> visible;
  std::vector<Index> masked;
  double mask_ratio = 0.0;
};

inline PatchMask random_mask(Index n_patches, double ratio, Rng& rng) {
  check_arg(n_patches >= 1, "random_mask: need at least one patch");
  check_arg(ratio >= 0.0 && ratio < 1.0, "random_mask: ratio must be in [0,1)");
  const auto n = static_cast<std::size_t>(n_patches);
  const auto n_masked = static_cast<std::size_t>(
      std::llround(ratio * static_cast<double>(n_patches)));
  auto drawn = rng.sample_without_replacement(n, n_masked);
  std::vector<bool> is_masked(n, false);
  for (std::size_t i : drawn) is_masked[i] = true;
  PatchMask mask;
  mask.mask_ratio = ratio;
  mask.masked.reserve(n_masked);
  mask.visible.reserve(n - n_masked);
  for (std::size_t i = 0; i < n; ++i)
    (is_masked[i] ? mask.masked : mask.visible).push_back(static_cast<Index>(i));
  return mask;
}

template <class S>
PatchMask random_mask(const PatchGrid<S>& grid, double ratio, Rng& rng) {
  return random_mask(grid.n_patches(), ratio, rng);
}

}  // namespace cardiomm
