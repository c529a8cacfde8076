#pragma once

#include <cmath>
#include <string>

#include "cardiomm/core/common.hpp"
#include "cardiomm/core/error.hpp"
#include "cardiomm/core/rng.hpp"
#include "cardiomm/nn/param.hpp"

namespace cardiomm {

template <class S>
inline void xavier_uniform(Mat<S>& w, Index fan_in, Index fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (Index i = 0; i < w.rows(); ++i)
    for (Index j = 0; j < w.cols(); ++j)
      w(i, j) = static_cast<S>(rng.uniform(-bound, bound));
}

/// Affine map y = x W^T + b over rows of x.
template <class S>
struct Linear {
  Param<S> w;  // [out x in]
  Param<S> b;  // [1 x out]

  void init(const std::string& name, Index in, Index out, Rng& rng) {
    w.name = name + ".w";
    w.init_zero(out, in);
    xavier_uniform(w.value, in, out, rng);
    b.name = name + ".b";
    b.init_zero(1, out);
    b.decay = false;
  }

  struct Ctx {
    Mat<S> input;
  };

  Mat<S> forward(const Mat<S>& x, Ctx& ctx) {
    check_arg(x.cols() == w.value.cols(),
              "linear '" + w.name + "': input width " + std::to_string(x.cols()) +
                  " != " + std::to_string(w.value.cols()));
    ctx.input = x;
    Mat<S> y = x * w.value.transpose();
    y.rowwise() += b.value.row(0);
    return y;
  }

  Mat<S> backward(const Mat<S>& dy, const Ctx& ctx) {
    w.grad.noalias() += dy.transpose() * ctx.input;
    b.grad.row(0) += dy.colwise().sum();
    return dy * w.value;
  }

  void collect(ParamRefs<S>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

template <class S>
struct Relu {
  struct Ctx {
    Mat<S> input;
  };
  Mat<S> forward(const Mat<S>& x, Ctx& ctx) {
    ctx.input = x;
    return x.cwiseMax(S(0));
  }
  Mat<S> backward(const Mat<S>& dy, const Ctx& ctx) {
    return (ctx.input.array() > S(0)).template cast<S>() * dy.array();
  }
};

template <class S>
struct Gelu {
  struct Ctx {
    Mat<S> input;
  };
  static S phi(S x) {  // standard normal pdf
    return std::exp(-S(0.5) * x * x) / std::sqrt(S(2) * std::numbers::pi_v<S>);
  }
  Mat<S> forward(const Mat<S>& x, Ctx& ctx) {
    ctx.input = x;
    return x.unaryExpr([](S v) {
      return S(0.5) * v * (S(1) + std::erf(v / std::sqrt(S(2))));
    });
  }
  Mat<S> backward(const Mat<S>& dy, const Ctx& ctx) {
    Mat<S> dx = ctx.input.unaryExpr([](S v) {
      return S(0.5) * (S(1) + std::erf(v / std::sqrt(S(2)))) + v * phi(v);
    });
    return dx.cwiseProduct(dy);
  }
};

/// Two affine maps with one rectification between: the shape used by the
/// tabular encoder and both contrastive projection heads.
template <class S>
struct Mlp2 {
  Linear<S> l1, l2;
  Relu<S> act;

  void init(const std::string& name, Index in, Index hidden, Index out, Rng& rng) {
    l1.init(name + ".l1", in, hidden, rng);
    l2.init(name + ".l2", hidden, out, rng);
  }

  struct Ctx {
    typename Linear<S>::Ctx l1, l2;
    typename Relu<S>::Ctx act;
  };

  Mat<S> forward(const Mat<S>& x, Ctx& ctx) {
    return l2.forward(act.forward(l1.forward(x, ctx.l1), ctx.act), ctx.l2);
  }
  Mat<S> backward(const Mat<S>& dy, const Ctx& ctx) {
    return l1.backward(act.backward(l2.backward(dy, ctx.l2), ctx.act), ctx.l1);
  }
  void collect(ParamRefs<S>& out) {
    l1.collect(out);
    l2.collect(out);
  }
};

/// Row-wise L2 normalization with gradient support.
template <class S>
struct L2Normalize {
  struct Ctx {
    Mat<S> unit;
    Vec<S> norms;
  };
  Mat<S> forward(const Mat<S>& x, Ctx& ctx) {
    ctx.unit.resize(x.rows(), x.cols());
    ctx.norms.resize(x.rows());
    for (Index i = 0; i < x.rows(); ++i) {
      S n = x.row(i).norm();
      if (!(n > S(0)))
        throw NumericError("l2_normalize: zero-norm row " + std::to_string(i));
      ctx.norms[i] = n;
      ctx.unit.row(i) = x.row(i) / n;
    }
    return ctx.unit;
  }
  Mat<S> backward(const Mat<S>& dy, const Ctx& ctx) {
    Mat<S> dx(dy.rows(), dy.cols());
    for (Index i = 0; i < dy.rows(); ++i) {
      S proj = dy.row(i).dot(ctx.unit.row(i));
      dx.row(i) = (dy.row(i) - proj * ctx.unit.row(i)) / ctx.norms[i];
    }
    return dx;
  }
};

}  // namespace cardiomm
