#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

namespace cardiomm {

// Row-major throughout: activations are laid out as [rows = samples or
// tokens, cols = features], so per-sample slices are contiguous.
template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using MatF = Mat<float>;
using MatD = Mat<double>;
using VecF = Vec<float>;
using VecD = Vec<double>;

using Index = Eigen::Index;

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace cardiomm
