#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cardiomm/cohort/types.hpp"
#include "cardiomm/core/common.hpp"
#include "cardiomm/core/error.hpp"

namespace cardiomm {

/// Picks the end-diastolic (largest ventricle mask), end-systolic (smallest)
/// and mid (index midpoint of the two) frames out of a cine series, given
/// per-frame binary ventricle masks. Ties break toward the lowest frame
/// index. Each selected slice is min-max normalized to [0,1].
inline CmrPhaseStack select_cardiac_phases(
    const std::vector<MatF>& frames,
    const std::vector<Mat<std::uint8_t>>& masks,
    const std::string& subject_id = "") {
  check_arg(frames.size() >= 3, "select_cardiac_phases: need at least 3 frames");
  check_arg(frames.size() == masks.size(),
            "select_cardiac_phases: one mask per frame required");
  const Index h = frames[0].rows(), w = frames[0].cols();
  check_arg(h >= 8 && w >= 8, "select_cardiac_phases: frames must be >= 8x8");

  std::vector<std::int64_t> counts(frames.size());
  std::int64_t total = 0;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    check_arg(frames[f].rows() == h && frames[f].cols() == w &&
                  masks[f].rows() == h && masks[f].cols() == w,
              "select_cardiac_phases: inconsistent frame/mask shapes");
    std::int64_t c = 0;
    for (Index i = 0; i < h; ++i)
      for (Index j = 0; j < w; ++j)
        if (masks[f](i, j)) ++c;
    counts[f] = c;
    total += c;
  }
  check_arg(total > 0, "select_cardiac_phases: ventricle masks are empty on every frame");

  std::size_t ed = 0, es = 0;
  for (std::size_t f = 1; f < frames.size(); ++f) {
    if (counts[f] > counts[ed]) ed = f;
    if (counts[f] < counts[es]) es = f;
  }
  auto mid = static_cast<std::size_t>(
      std::llround((static_cast<double>(ed) + static_cast<double>(es)) / 2.0));

  CmrPhaseStack stack;
  stack.subject_id = subject_id;
  stack.height = h;
  stack.width = w;
  stack.phases.resize(3, h * w);
  const std::size_t picks[3] = {ed, es, mid};
  for (int p = 0; p < 3; ++p) {
    const MatF& src = frames[picks[p]];
    float lo = src.minCoeff(), hi = src.maxCoeff();
    float range = hi - lo;
    for (Index i = 0; i < h; ++i)
      for (Index j = 0; j < w; ++j)
        stack.phases(p, i * w + j) = range > 0 ? (src(i, j) - lo) / range : 0.0f;
  }
  return stack;
}

}  // namespace cardiomm
