#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cardiomm/core/error.hpp"
#include "cardiomm/nn/param.hpp"

namespace cardiomm {

/// Adam with decoupled weight decay:
///   m <- b1*m + (1-b1)*g          v <- b2*v + (1-b2)*g^2
///   theta <- theta - lr * mhat/(sqrt(vhat)+eps) - lr * wd * theta
/// The decay term multiplies theta directly and never enters the adaptive
/// moments.
struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

template <class S>
class AdamW {
 public:
  AdamW(ParamRefs<S> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
      slots_.push_back({Mat<S>::Zero(p->value.rows(), p->value.cols()),
                        Mat<S>::Zero(p->value.rows(), p->value.cols())});
    }
  }

  std::int64_t step_count() const { return t_; }

  void zero_grad() { zero_grads(params_); }

  void step(double lr) {
    ++t_;
    const S b1 = static_cast<S>(cfg_.beta1);
    const S b2 = static_cast<S>(cfg_.beta2);
    const S bias1 = static_cast<S>(1.0 - std::pow(cfg_.beta1, double(t_)));
    const S bias2 = static_cast<S>(1.0 - std::pow(cfg_.beta2, double(t_)));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Param<S>* p = params_[i];
      if (!p->trainable) continue;
      if (!p->grad.allFinite())
        throw NumericError("optimizer: non-finite gradient for parameter '" +
                           p->name + "'");
      Slot& s = slots_[i];
      s.m = b1 * s.m + (S(1) - b1) * p->grad;
      s.v = b2 * s.v + (S(1) - b2) * p->grad.cwiseProduct(p->grad);
      Mat<S> mhat = s.m / bias1;
      Mat<S> vhat = s.v / bias2;
      // decay acts on the pre-update value, decoupled from the moments
      if (cfg_.weight_decay != 0.0 && p->decay)
        p->value -= static_cast<S>(lr * cfg_.weight_decay) * p->value;
      p->value -= static_cast<S>(lr) *
                  (mhat.array() / (vhat.array().sqrt() + static_cast<S>(cfg_.eps)))
                      .matrix();
    }
  }

 private:
  struct Slot {
    Mat<S> m, v;
  };
  ParamRefs<S> params_;
  AdamWConfig cfg_;
  std::vector<Slot> slots_;
  std::int64_t t_ = 0;
};

}  // namespace cardiomm
