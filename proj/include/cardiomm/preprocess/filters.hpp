#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "cardiomm/cohort/types.hpp"
#include "cardiomm/core/common.hpp"
#include "cardiomm/core/error.hpp"

namespace cardiomm {

struct FilterSpec {
  enum class Kind { highpass, notch };
  Kind kind = Kind::highpass;
  double frequency = 0.5;  // cutoff (highpass) or center (notch), Hz
  int order = 5;
  double sampling_rate = 500.0;
  double q = 30.0;  // notch quality factor
};

/// One second-order section, direct form II transposed coefficients with
/// a0 normalized to 1.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0;
  double a1 = 0, a2 = 0;
};

using SosFilter = std::vector<Biquad>;

namespace dsp {

/// Butterworth high-pass designed via the analog prototype and the bilinear
/// transform, returned as cascaded second-order sections (odd orders get one
/// first-order section with b2 = a2 = 0).
inline SosFilter butterworth_highpass(int order, double cutoff_hz, double fs) {
  check_arg(order >= 1, "butterworth: order must be >= 1");
  check_arg(cutoff_hz > 0 && cutoff_hz < fs / 2,
            "butterworth: cutoff must lie in (0, Nyquist)");
  using C = std::complex<double>;
  const double pi = std::numbers::pi;
  const double warped = 2.0 * fs * std::tan(pi * cutoff_hz / fs);
  const double fs2 = 2.0 * fs;

  // analog low-pass prototype poles on the unit circle, left half-plane
  std::vector<C> zpoles;
  for (int k = 0; k < order; ++k) {
    double phi = pi * (2.0 * k + 1.0) / (2.0 * order) + pi / 2.0;
    C lp_pole(std::cos(phi), std::sin(phi));
    C hp_pole = warped / lp_pole;            // LP -> HP: s -> wc / s
    zpoles.push_back((fs2 + hp_pole) / (fs2 - hp_pole));  // bilinear
  }

  // pair conjugate poles into biquads; each section carries zeros at z = 1
  SosFilter sos;
  std::vector<bool> used(zpoles.size(), false);
  for (std::size_t i = 0; i < zpoles.size(); ++i) {
    if (used[i]) continue;
    used[i] = true;
    if (std::abs(zpoles[i].imag()) < 1e-12) {
      Biquad s;
      s.b0 = 1;
      s.b1 = -1;
      s.b2 = 0;
      s.a1 = -zpoles[i].real();
      s.a2 = 0;
      sos.push_back(s);
      continue;
    }
    for (std::size_t j = i + 1; j < zpoles.size(); ++j) {
      if (used[j]) continue;
      if (std::abs(zpoles[j] - std::conj(zpoles[i])) < 1e-9) {
        used[j] = true;
        break;
      }
    }
    Biquad s;
    s.b0 = 1;
    s.b1 = -2;
    s.b2 = 1;
    s.a1 = -2.0 * zpoles[i].real();
    s.a2 = std::norm(zpoles[i]);
    sos.push_back(s);
  }

  // normalize so the cascade has unit gain at z = -1 (Nyquist)
  double gain = 1.0;
  for (const auto& s : sos) {
    double num = s.b0 - s.b1 + s.b2;
    double den = 1.0 - s.a1 + s.a2;
    gain *= num / den;
  }
  sos.front().b0 /= gain;
  sos.front().b1 /= gain;
  sos.front().b2 /= gain;
  return sos;
}

/// RBJ-cookbook notch biquad centered at f0 with quality factor q.
inline SosFilter notch(double f0_hz, double q, double fs) {
  check_arg(f0_hz > 0 && f0_hz < fs / 2, "notch: center must lie in (0, Nyquist)");
  check_arg(q > 0, "notch: quality factor must be > 0");
  const double w0 = 2.0 * std::numbers::pi * f0_hz / fs;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  Biquad s;
  s.b0 = 1.0 / a0;
  s.b1 = -2.0 * std::cos(w0) / a0;
  s.b2 = 1.0 / a0;
  s.a1 = -2.0 * std::cos(w0) / a0;
  s.a2 = (1.0 - alpha) / a0;
  return {s};
}

/// Steady-state DF2T state for a unit step input, used to suppress filter
/// startup transients.
inline std::array<double, 2> step_steady_state(const Biquad& s) {
  double h1 = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
  double z2 = s.b2 - s.a2 * h1;
  double z1 = s.b1 - s.a1 * h1 + z2;
  return {z1, z2};
}

inline double dc_gain(const Biquad& s) {
  return (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
}

inline void sosfilt_inplace(const SosFilter& sos, std::vector<double>& x) {
  double section_in_scale = x.empty() ? 0.0 : x.front();
  for (const auto& s : sos) {
    auto zi = step_steady_state(s);
    double z1 = zi[0] * section_in_scale, z2 = zi[1] * section_in_scale;
    for (double& v : x) {
      double y = s.b0 * v + z1;
      z1 = s.b1 * v - s.a1 * y + z2;
      z2 = s.b2 * v - s.a2 * y;
      v = y;
    }
    section_in_scale *= dc_gain(s);
  }
}

/// Zero-phase forward-backward filtering with odd-reflection padding.
inline std::vector<double> sosfiltfilt(const SosFilter& sos,
                                       const std::vector<double>& x) {
  check_arg(x.size() >= 2, "sosfiltfilt: need at least 2 samples");
  const std::size_t n = x.size();
  const std::size_t pad =
      std::min(n - 1, 3 * (2 * sos.size() + 1));
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i)
    ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  sosfilt_inplace(sos, ext);
  std::reverse(ext.begin(), ext.end());
  sosfilt_inplace(sos, ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
          ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

inline MatF filtfilt_leads(const SosFilter& sos, const MatF& samples) {
  MatF out(samples.rows(), samples.cols());
  std::vector<double> lead(static_cast<std::size_t>(samples.cols()));
  for (Index c = 0; c < samples.rows(); ++c) {
    for (Index t = 0; t < samples.cols(); ++t)
      lead[static_cast<std::size_t>(t)] = samples(c, t);
    auto filtered = sosfiltfilt(sos, lead);
    for (Index t = 0; t < samples.cols(); ++t)
      out(c, t) = static_cast<float>(filtered[static_cast<std::size_t>(t)]);
  }
  return out;
}

}  // namespace dsp

/// Zero-phase Butterworth high-pass over every lead. Defaults follow the
/// standard resting-ECG setting: 0.5 Hz cutoff, order 5.
inline EcgRecord highpass_filter(const EcgRecord& ecg, FilterSpec spec = {}) {
  check_arg(spec.kind == FilterSpec::Kind::highpass,
            "highpass_filter: spec.kind must be highpass");
  double fs = spec.sampling_rate > 0 ? spec.sampling_rate : ecg.sampling_rate;
  check_arg(spec.frequency > 0 && spec.frequency < fs / 2,
            "highpass_filter: cutoff must lie below Nyquist");
  auto sos = dsp::butterworth_highpass(spec.order, spec.frequency, fs);
  EcgRecord out = ecg;
  out.samples = dsp::filtfilt_leads(sos, ecg.samples);
  return out;
}

/// Zero-phase powerline notch (50 Hz mains by default, quality factor 30).
inline EcgRecord powerline_notch(const EcgRecord& ecg, double line_freq = 50.0,
                                 double q = 30.0) {
  check_arg(line_freq > 0 && line_freq < ecg.sampling_rate / 2,
            "powerline_notch: line frequency must lie below Nyquist");
  auto sos = dsp::notch(line_freq, q, ecg.sampling_rate);
  EcgRecord out = ecg;
  out.samples = dsp::filtfilt_leads(sos, ecg.samples);
  return out;
}

/// The standard ECG cleanup chain: high-pass then powerline notch.
inline EcgRecord preprocess_ecg(const EcgRecord& ecg, double highpass_hz = 0.5,
                                int order = 5, double line_freq = 50.0) {
  FilterSpec spec;
  spec.kind = FilterSpec::Kind::highpass;
  spec.frequency = highpass_hz;
  spec.order = order;
  spec.sampling_rate = ecg.sampling_rate;
  return powerline_notch(highpass_filter(ecg, spec), line_freq);
}

}  // namespace cardiomm
