#pragma once

#include <cmath>
#include <string>

#include "cardiomm/core/common.hpp"
#include "cardiomm/nn/param.hpp"

namespace cardiomm {

/// LayerNorm over the last (feature) dimension of row-major activations.
template <class S>
struct LayerNorm {
  Param<S> gamma;  // [1 x d]
  Param<S> beta;   // [1 x d]
  S eps = static_cast<S>(1e-5);

  void init(const std::string& name, Index d) {
    gamma.name = name + ".gamma";
    gamma.init_zero(1, d);
    gamma.value.setOnes();
    gamma.decay = false;
    beta.name = name + ".beta";
    beta.init_zero(1, d);
    beta.decay = false;
  }

  struct Ctx {
    Mat<S> xhat;
    Vec<S> inv_std;
  };

  Mat<S> forward(const Mat<S>& x, Ctx& ctx) {
    const Index d = x.cols();
    ctx.xhat.resize(x.rows(), d);
    ctx.inv_std.resize(x.rows());
    Mat<S> y(x.rows(), d);
    for (Index i = 0; i < x.rows(); ++i) {
      S mean = x.row(i).mean();
      S var = (x.row(i).array() - mean).square().mean();
      S inv = S(1) / std::sqrt(var + eps);
      ctx.inv_std[i] = inv;
      ctx.xhat.row(i) = (x.row(i).array() - mean) * inv;
      y.row(i) = ctx.xhat.row(i).cwiseProduct(gamma.value.row(0)) + beta.value.row(0);
    }
    return y;
  }

  Mat<S> backward(const Mat<S>& dy, const Ctx& ctx) {
    const Index d = dy.cols();
    Mat<S> dx(dy.rows(), d);
    for (Index i = 0; i < dy.rows(); ++i) {
      auto dxhat = dy.row(i).cwiseProduct(gamma.value.row(0));
      S sum_dxhat = dxhat.sum();
      S sum_dxhat_xhat = dxhat.dot(ctx.xhat.row(i));
      dx.row(i) = (ctx.inv_std[i] / static_cast<S>(d)) *
                  (static_cast<S>(d) * dxhat.array() - sum_dxhat -
                   ctx.xhat.row(i).array() * sum_dxhat_xhat)
                      .matrix();
      gamma.grad.row(0) += dy.row(i).cwiseProduct(ctx.xhat.row(i));
      beta.grad.row(0) += dy.row(i);
    }
    return dx;
  }

  void collect(ParamRefs<S>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
};

}  // namespace cardiomm
