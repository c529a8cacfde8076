#pragma once

#include <cmath>
#include <vector>

#include "cardiomm/core/common.hpp"
#include "cardiomm/core/error.hpp"

namespace cardiomm {

/// Mean of -log softmax(logits)[label], stabilized by max-subtraction.
template <class S>
S cross_entropy(const Mat<S>& logits, const std::vector<int>& labels) {
  check_arg(logits.rows() == static_cast<Index>(labels.size()) && logits.rows() > 0,
            "cross_entropy: logits/labels size mismatch");
  S total = 0;
  for (Index i = 0; i < logits.rows(); ++i) {
    check_arg(labels[i] >= 0 && labels[i] < logits.cols(),
              "cross_entropy: label out of range");
    S m = logits.row(i).maxCoeff();
    S lse = 0;
    for (Index k = 0; k < logits.cols(); ++k)
      lse += std::exp(logits(i, k) - m);
    total += m + std::log(lse) - logits(i, labels[i]);
  }
  return total / static_cast<S>(logits.rows());
}

/// Gradient of cross_entropy w.r.t. logits: (softmax - onehot) / B.
template <class S>
Mat<S> cross_entropy_grad(const Mat<S>& logits, const std::vector<int>& labels) {
  check_arg(logits.rows() == static_cast<Index>(labels.size()) && logits.rows() > 0,
            "cross_entropy: logits/labels size mismatch");
  Mat<S> grad(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    check_arg(labels[i] >= 0 && labels[i] < logits.cols(),
              "cross_entropy: label out of range");
    S m = logits.row(i).maxCoeff();
    Vec<S> e = (logits.row(i).transpose().array() - m).exp();
    grad.row(i) = (e / e.sum()).transpose();
    grad(i, labels[i]) -= S(1);
  }
  return grad / static_cast<S>(logits.rows());
}

}  // namespace cardiomm
