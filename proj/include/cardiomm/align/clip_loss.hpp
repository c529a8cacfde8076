#pragma once

#include <cmath>

#include "cardiomm/core/common.hpp"
#include "cardiomm/core/error.hpp"

namespace cardiomm {

/// Bidirectional cross-modal contrastive loss over aligned rows of two
/// unit-norm projection batches. With the signal branch as anchor,
///   L_sig = mean_k -log( exp(zs_k . zi_k / tau) / sum_j exp(zs_k . zi_j / tau) )
/// L_img swaps the roles, and the total is (1-lambda)*L_sig + lambda*L_img.
/// The denominator runs over every image (resp. signal) row in the batch,
/// including the matched positive.
template <class S>
struct ClipLossResult {
  S total;
  S l_sig;
  S l_img;
  Mat<S> grad_sig;  // d total / d z_sig
  Mat<S> grad_img;  // d total / d z_img
};

namespace detail {

template <class S>
void check_clip_inputs(const Mat<S>& z_sig, const Mat<S>& z_img, S tau) {
  check_arg(tau > S(0), "clip_loss: tau must be > 0");
  check_arg(z_sig.rows() == z_img.rows() && z_sig.cols() == z_img.cols(),
            "clip_loss: batches must have equal shapes");
  check_arg(z_sig.rows() >= 2, "clip_loss: batch size must be >= 2");
  for (Index i = 0; i < z_sig.rows(); ++i) {
    if (std::abs(static_cast<double>(z_sig.row(i).norm()) - 1.0) > 1e-4 ||
        std::abs(static_cast<double>(z_img.row(i).norm()) - 1.0) > 1e-4)
      throw NumericError("clip_loss: rows must be L2-normalized (row " +
                         std::to_string(i) + ")");
  }
}

/// One direction: anchors are rows of `a`, candidates rows of `c`; positives
/// on the diagonal. Returns the mean loss; if `d_sim` is non-null it receives
/// d(mean loss)/d sim(a_k, c_j).
template <class S>
S clip_one_direction(const Mat<S>& a, const Mat<S>& c, S tau, Mat<S>* d_sim) {
  const Index b = a.rows();
  Mat<S> sim = a * c.transpose() / tau;
  if (d_sim) d_sim->setZero(b, b);
  S loss = 0;
  for (Index k = 0; k < b; ++k) {
    S m = sim.row(k).maxCoeff();
    S denom = 0;
    for (Index j = 0; j < b; ++j) denom += std::exp(sim(k, j) - m);
    loss += m + std::log(denom) - sim(k, k);
    if (d_sim) {
      for (Index j = 0; j < b; ++j)
        (*d_sim)(k, j) = std::exp(sim(k, j) - m) / denom;
      (*d_sim)(k, k) -= S(1);
    }
  }
  if (d_sim) *d_sim /= static_cast<S>(b) * tau;
  return loss / static_cast<S>(b);
}

}  // namespace detail

template <class S>
ClipLossResult<S> clip_loss_with_grad(const Mat<S>& z_sig, const Mat<S>& z_img,
                                      S tau, S lambda) {
  detail::check_clip_inputs(z_sig, z_img, tau);
  check_arg(lambda >= S(0) && lambda <= S(1), "clip_loss: lambda must be in [0,1]");
  Mat<S> gs_sim, gi_sim;
  S l_sig = detail::clip_one_direction(z_sig, z_img, tau, &gs_sim);
  S l_img = detail::clip_one_direction(z_img, z_sig, tau, &gi_sim);
  ClipLossResult<S> out;
  out.l_sig = l_sig;
  out.l_img = l_img;
  out.total = (S(1) - lambda) * l_sig + lambda * l_img;
  // gs_sim(k,j) weights sim(zs_k, zi_j); gi_sim(k,j) weights sim(zi_k, zs_j)
  out.grad_sig = (S(1) - lambda) * (gs_sim * z_img) + lambda * (gi_sim.transpose() * z_img);
  out.grad_img = (S(1) - lambda) * (gs_sim.transpose() * z_sig) + lambda * (gi_sim * z_sig);
  return out;
}

template <class S>
ClipLossResult<S> clip_loss(const Mat<S>& z_sig, const Mat<S>& z_img, S tau,
                            S lambda) {
  detail::check_clip_inputs(z_sig, z_img, tau);
  check_arg(lambda >= S(0) && lambda <= S(1), "clip_loss: lambda must be in [0,1]");
  ClipLossResult<S> out;
  out.l_sig = detail::clip_one_direction<S>(z_sig, z_img, tau, nullptr);
  out.l_img = detail::clip_one_direction<S>(z_img, z_sig, tau, nullptr);
  out.total = (S(1) - lambda) * out.l_sig + lambda * out.l_img;
  return out;
}

}  // namespace cardiomm
