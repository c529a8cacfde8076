#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "cardiomm/cohort/types.hpp"
#include "cardiomm/core/common.hpp"
#include "cardiomm/core/error.hpp"
#include "cardiomm/core/rng.hpp"

namespace cardiomm {

struct EcgAugmentConfig {
  double crop_ratio = 0.5;      // contiguous crop length as a fraction of T
  double ft_phase_noise = 0.1;  // phase perturbation scale, x 2*pi radians
  double gaussian_sigma = 0.25; // additive noise std as a fraction of lead std
  double rescale_factor = 0.5;  // amplitude factor range half-width around 1
  bool enable_crop = true;
  bool enable_ft = true;
  bool enable_noise = true;
  bool enable_rescale = true;
};

/// Randomizes Fourier phases while preserving the amplitude spectrum
/// bin-for-bin. DC (and the Nyquist bin for even lengths) stay untouched;
/// conjugate bins get opposite shifts so the output stays real.
template <class S>
Vec<S> ft_surrogate(const Vec<S>& lead, double phase_noise, Rng& rng) {
  const Index t_len = lead.size();
  check_arg(t_len >= 2, "ft_surrogate: need at least 2 samples");
  if (!lead.allFinite()) throw NumericError("ft_surrogate: non-finite input");

  std::vector<std::complex<double>> time(static_cast<std::size_t>(t_len));
  for (Index t = 0; t < t_len; ++t)
    time[static_cast<std::size_t>(t)] = {static_cast<double>(lead[t]), 0.0};
  std::vector<std::complex<double>> freq;
  Eigen::FFT<double> fft;
  fft.fwd(freq, time);

  const double scale = phase_noise * 2.0 * std::numbers::pi;
  for (Index k = 1; 2 * k < t_len; ++k) {  // even length: Nyquist stays put
    double delta = rng.uniform() * scale;
    std::complex<double> ph(std::cos(delta), std::sin(delta));
    freq[static_cast<std::size_t>(k)] *= ph;
    freq[static_cast<std::size_t>(t_len - k)] *= std::conj(ph);
  }

  fft.inv(time, freq);
  Vec<S> out(t_len);
  for (Index t = 0; t < t_len; ++t)
    out[t] = static_cast<S>(time[static_cast<std::size_t>(t)].real());
  return out;
}

namespace detail {

/// Linear interpolation of a segment of length `len` back to `t_len`
/// samples. A full-length segment is returned untouched.
template <class S>
Vec<S> resize_linear(const Vec<S>& seg, Index t_len) {
  const Index len = seg.size();
  if (len == t_len) return seg;
  Vec<S> out(t_len);
  if (len == 1) {
    out.setConstant(seg[0]);
    return out;
  }
  const double step = static_cast<double>(len - 1) / static_cast<double>(t_len - 1);
  for (Index t = 0; t < t_len; ++t) {
    double pos = step * static_cast<double>(t);
    Index i0 = std::min<Index>(static_cast<Index>(pos), len - 2);
    double frac = pos - static_cast<double>(i0);
    out[t] = static_cast<S>((1.0 - frac) * seg[i0] + frac * seg[i0 + 1]);
  }
  return out;
}

}  // namespace detail

/// Stochastic ECG augmentation: contiguous crop resized back to T, Fourier
/// phase surrogate, additive Gaussian noise scaled per lead, and a global
/// amplitude rescale, in that order. Zero magnitudes (with crop ratio 1)
/// make this the exact identity.
inline EcgRecord ecg_augment(const EcgRecord& x, const EcgAugmentConfig& cfg,
                             Rng& rng) {
  const Index leads = x.samples.rows(), t_len = x.samples.cols();
  check_arg(cfg.crop_ratio > 0.0 && cfg.crop_ratio <= 1.0,
            "ecg_augment: crop_ratio must lie in (0,1]");
  check_arg(cfg.ft_phase_noise >= 0 && cfg.gaussian_sigma >= 0 &&
                cfg.rescale_factor >= 0,
            "ecg_augment: magnitudes must be >= 0");
  const Index crop_len =
      static_cast<Index>(std::llround(cfg.crop_ratio * static_cast<double>(t_len)));
  check_arg(crop_len >= 1 && t_len >= 2, "ecg_augment: signal too short to crop");

  EcgRecord out = x;

  if (cfg.enable_crop && crop_len < t_len) {
    const Index start = static_cast<Index>(
        rng.uniform_int(static_cast<std::uint64_t>(t_len - crop_len + 1)));
    MatF resized(leads, t_len);
    for (Index l = 0; l < leads; ++l) {
      VecF seg = out.samples.row(l).segment(start, crop_len).transpose();
      resized.row(l) = detail::resize_linear(seg, t_len).transpose();
    }
    out.samples = std::move(resized);
  }

  if (cfg.enable_ft && cfg.ft_phase_noise > 0.0) {
    for (Index l = 0; l < leads; ++l) {
      VecF lead = out.samples.row(l).transpose();
      out.samples.row(l) = ft_surrogate(lead, cfg.ft_phase_noise, rng).transpose();
    }
  }

  if (cfg.enable_noise && cfg.gaussian_sigma > 0.0) {
    for (Index l = 0; l < leads; ++l) {
      double mean = out.samples.row(l).mean();
      double sd = std::sqrt(
          (out.samples.row(l).array() - mean).square().mean());
      for (Index t = 0; t < t_len; ++t)
        out.samples(l, t) +=
            static_cast<float>(cfg.gaussian_sigma * sd * rng.normal());
    }
  }

  if (cfg.enable_rescale && cfg.rescale_factor > 0.0) {
    double factor = rng.uniform(1.0 - cfg.rescale_factor / 2.0,
                                1.0 + cfg.rescale_factor / 2.0);
    out.samples *= static_cast<float>(factor);
  }
  return out;
}

}  // namespace cardiomm
