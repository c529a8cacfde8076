#pragma once

#include <cmath>
#include <functional>

#include "cardiomm/core/common.hpp"
#include "cardiomm/core/rng.hpp"

namespace testutil {

using cardiomm::Index;
using cardiomm::Mat;
using cardiomm::Rng;

template <class S>
Mat<S> random_mat(Index rows, Index cols, Rng& rng, double scale = 1.0) {
  Mat<S> m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      m(i, j) = static_cast<S>(rng.normal(0.0, scale));
  return m;
}

/// Max relative error between an analytic gradient and central finite
/// differences of `f` at `x`. The floor keeps near-zero entries from
/// dominating via 0/0.
inline double gradient_check(const std::function<double(const Mat<double>&)>& f,
                             const Mat<double>& x, const Mat<double>& analytic,
                             double h = 1e-5, double floor_val = 1e-6) {
  double worst = 0.0;
  Mat<double> probe = x;
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j) {
      probe(i, j) = x(i, j) + h;
      double up = f(probe);
      probe(i, j) = x(i, j) - h;
      double down = f(probe);
      probe(i, j) = x(i, j);
      double fd = (up - down) / (2.0 * h);
      double denom = std::max({std::abs(fd), std::abs(analytic(i, j)), floor_val});
      worst = std::max(worst, std::abs(fd - analytic(i, j)) / denom);
    }
  return worst;
}

}  // namespace testutil
