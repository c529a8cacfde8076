#pragma once

#include <cmath>
#include <vector>

#include "cardiomm/core/common.hpp"
#include "cardiomm/core/error.hpp"
#include "cardiomm/mae/patchify.hpp"

namespace cardiomm {

/// Composite reconstruction loss over the masked patches:
///   L = (1 - lambda) * L_MSE + lambda * (1 - mean_k NCC_k)
/// L_MSE is the mean squared error over masked patch elements; NCC_k is the
/// normalized correlation coefficient of predicted vs target patch k,
/// cov / (std_pred * std_target + eps) with population statistics.
template <class S>
struct MaeLossResult {
  S total;
  S mse;
  S ncc;  // mean NCC over masked patches (1 = perfectly correlated)
};

inline constexpr double kNccEps = 1e-8;

template <class S>
MaeLossResult<S> mae_loss(const Mat<S>& pred_patches,
                          const Mat<S>& target_patches,
                          const std::vector<Index>& masked, S lambda,
                          Mat<S>* grad_pred = nullptr) {
  check_arg(pred_patches.rows() == target_patches.rows() &&
                pred_patches.cols() == target_patches.cols(),
            "mae_loss: prediction and target shapes differ");
  check_arg(!masked.empty(),
            "mae_loss: mask leaves no masked patches to score");
  check_arg(lambda >= S(0) && lambda <= S(1),
            "mae_loss: lambda must be in [0,1]");
  const Index d = pred_patches.cols();
  const auto m = static_cast<S>(masked.size());
  const S eps = static_cast<S>(kNccEps);

  if (grad_pred) grad_pred->setZero(pred_patches.rows(), pred_patches.cols());

  S mse_sum = 0, ncc_sum = 0;
  for (Index k : masked) {
    check_arg(k >= 0 && k < pred_patches.rows(),
              "mae_loss: masked index out of range");
    auto p = pred_patches.row(k);
    auto t = target_patches.row(k);
    mse_sum += (p - t).squaredNorm();

    const S p_mean = p.mean(), t_mean = t.mean();
    Vec<S> pc = (p.array() - p_mean).matrix().transpose();
    Vec<S> tc = (t.array() - t_mean).matrix().transpose();
    const S cov = pc.dot(tc) / static_cast<S>(d);
    const S var_p = pc.squaredNorm() / static_cast<S>(d);
    const S var_t = tc.squaredNorm() / static_cast<S>(d);
    const S sd_p = std::sqrt(var_p), sd_t = std::sqrt(var_t);
    const S den = sd_p * sd_t + eps;
    const S ncc = cov / den;
    ncc_sum += ncc;

    if (grad_pred) {
      // d mse / d p = 2 (p - t) / (M * D)
      grad_pred->row(k) =
          (S(2) / (m * static_cast<S>(d))) * (S(1) - lambda) * (p - t);
      // d (-ncc) / d p, averaged over masked patches, weighted by lambda
      Vec<S> d_ncc =
          tc / (static_cast<S>(d) * den);
      if (sd_p > S(0))
        d_ncc -= (cov * sd_t / (static_cast<S>(d) * sd_p * den * den)) * pc;
      grad_pred->row(k) -= (lambda / m) * d_ncc.transpose();
    }
  }
  MaeLossResult<S> out;
  out.mse = mse_sum / (m * static_cast<S>(d));
  out.ncc = ncc_sum / m;
  out.total = (S(1) - lambda) * out.mse + lambda * (S(1) - out.ncc);
  return out;
}

/// Signal-shaped convenience wrapper: patchifies both signals with `shape`
/// and scores the masked patches.
template <class S>
MaeLossResult<S> mae_loss(const Mat<S>& reconstruction, const Mat<S>& original,
                          const PatchMask& mask, PatchShape shape, S lambda) {
  check_arg(reconstruction.rows() == original.rows() &&
                reconstruction.cols() == original.cols(),
            "mae_loss: reconstruction and original shapes differ");
  auto pred = patchify(reconstruction, shape);
  auto target = patchify(original, shape);
  return mae_loss<S>(pred.patches, target.patches, mask.masked, lambda);
}

}  // namespace cardiomm
