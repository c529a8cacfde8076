#pragma once

#include <cmath>

#include "cardiomm/core/common.hpp"
#include "cardiomm/core/error.hpp"

namespace cardiomm {

/// NT-Xent over a batch of 2N projections laid out as [view A of samples
/// 0..N-1; view B of samples 0..N-1], so row i pairs with row i+N. Rows are
/// cosine-normalized internally; the loss for anchor i is
///   -log( exp(sim(i, pair(i))/tau) / sum_{k != i} exp(sim(i, k)/tau) )
/// averaged over all 2N anchors.
template <class S>
struct NtXentResult {
  S loss;
  Mat<S> grad;  // d loss / d raw (unnormalized) embeddings, [2N x P]
};

namespace detail {

template <class S>
Mat<S> normalize_rows_checked(const Mat<S>& z, const char* who) {
  Mat<S> u = z;
  for (Index i = 0; i < z.rows(); ++i) {
    S n = z.row(i).norm();
    if (!(n > S(0)) || !std::isfinite(static_cast<double>(n)))
      throw NumericError(std::string(who) +
                         ": zero-norm or non-finite embedding at row " +
                         std::to_string(i));
    u.row(i) /= n;
  }
  return u;
}

}  // namespace detail

template <class S>
NtXentResult<S> nt_xent_with_grad(const Mat<S>& z, S tau) {
  check_arg(tau > S(0), "nt_xent: tau must be > 0");
  check_arg(z.rows() >= 2 && z.rows() % 2 == 0,
            "nt_xent: batch must hold 2N rows with N >= 1");
  const Index b = z.rows();
  const Index n = b / 2;
  Mat<S> u = detail::normalize_rows_checked(z, "nt_xent");

  Mat<S> sim = u * u.transpose() / tau;  // [b x b]
  // per-anchor softmax over k != i, with the anchor's own column excluded
  Mat<S> g = Mat<S>::Zero(b, b);  // d loss / d sim entries (rows = anchors)
  S loss = 0;
  for (Index i = 0; i < b; ++i) {
    const Index pos = (i < n) ? i + n : i - n;
    S m = -std::numeric_limits<S>::infinity();
    for (Index k = 0; k < b; ++k)
      if (k != i) m = std::max(m, sim(i, k));
    S denom = 0;
    for (Index k = 0; k < b; ++k)
      if (k != i) denom += std::exp(sim(i, k) - m);
    loss += m + std::log(denom) - sim(i, pos);
    for (Index k = 0; k < b; ++k)
      if (k != i) g(i, k) = std::exp(sim(i, k) - m) / denom;
    g(i, pos) -= S(1);
  }
  loss /= static_cast<S>(b);
  g /= static_cast<S>(b) * tau;  // now g = d loss / d (u_i . u_k) per anchor i

  // sim(i,k) appears for anchor i and anchor k: fold both contributions
  Mat<S> w = g + g.transpose();
  Mat<S> du = w * u;  // d loss / d u
  // back through row normalization: dz = (du - (du.u) u) / ||z||
  Mat<S> grad(b, z.cols());
  for (Index i = 0; i < b; ++i) {
    S r = z.row(i).norm();
    S proj = du.row(i).dot(u.row(i));
    grad.row(i) = (du.row(i) - proj * u.row(i)) / r;
  }
  return {loss, std::move(grad)};
}

template <class S>
S nt_xent(const Mat<S>& z, S tau) {
  check_arg(tau > S(0), "nt_xent: tau must be > 0");
  check_arg(z.rows() >= 2 && z.rows() % 2 == 0,
            "nt_xent: batch must hold 2N rows with N >= 1");
  const Index b = z.rows();
  const Index n = b / 2;
  Mat<S> u = detail::normalize_rows_checked(z, "nt_xent");
  Mat<S> sim = u * u.transpose() / tau;
  S loss = 0;
  for (Index i = 0; i < b; ++i) {
    const Index pos = (i < n) ? i + n : i - n;
    S m = -std::numeric_limits<S>::infinity();
    for (Index k = 0; k < b; ++k)
      if (k != i) m = std::max(m, sim(i, k));
    S denom = 0;
    for (Index k = 0; k < b; ++k)
      if (k != i) denom += std::exp(sim(i, k) - m);
    loss += m + std::log(denom) - sim(i, pos);
  }
  return loss / static_cast<S>(b);
}

}  // namespace cardiomm
