#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cardiomm/core/common.hpp"
#include "cardiomm/core/error.hpp"
#include "cardiomm/nn/linear.hpp"
#include "cardiomm/nn/param.hpp"

namespace cardiomm {

namespace detail {

template <class S>
inline void softmax_rows_inplace(Mat<S>& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    S mx = m.row(i).maxCoeff();
    m.row(i) = (m.row(i).array() - mx).exp();
    m.row(i) /= m.row(i).sum();
  }
}

/// Backward through a row-wise softmax: dx = p .* (dy - rowsum(dy .* p)).
template <class S>
inline Mat<S> softmax_rows_backward(const Mat<S>& dy, const Mat<S>& p) {
  Mat<S> dx(dy.rows(), dy.cols());
  for (Index i = 0; i < dy.rows(); ++i) {
    S dot = dy.row(i).dot(p.row(i));
    dx.row(i) = (p.row(i).array() * (dy.row(i).array() - dot)).matrix();
  }
  return dx;
}

}  // namespace detail

/// Multi-head self-attention over per-sample token blocks. Activations are
/// [B*N x W] with sample b occupying rows [b*N, (b+1)*N).
template <class S>
struct MultiHeadSelfAttention {
  Linear<S> wq, wk, wv, wo;
  Index width = 0, heads = 1;

  void init(const std::string& name, Index w, Index n_heads, Rng& rng) {
    check_arg(w % n_heads == 0, "attention: heads must divide width");
    width = w;
    heads = n_heads;
    wq.init(name + ".wq", w, w, rng);
    wk.init(name + ".wk", w, w, rng);
    wv.init(name + ".wv", w, w, rng);
    wo.init(name + ".wo", w, w, rng);
  }

  struct Ctx {
    typename Linear<S>::Ctx q_ctx, k_ctx, v_ctx, o_ctx;
    Mat<S> q, k, v;                 // [B*N x W]
    std::vector<Mat<S>> attn;       // per (sample, head): [N x N]
    Index batch = 0, tokens = 0;
  };

  Mat<S> forward(const Mat<S>& x, Index batch, Index tokens, Ctx& ctx) {
    check_arg(x.rows() == batch * tokens, "attention: rows != batch * tokens");
    const Index dh = width / heads;
    const S scale = S(1) / std::sqrt(static_cast<S>(dh));
    ctx.batch = batch;
    ctx.tokens = tokens;
    ctx.q = wq.forward(x, ctx.q_ctx);
    ctx.k = wk.forward(x, ctx.k_ctx);
    ctx.v = wv.forward(x, ctx.v_ctx);
    ctx.attn.assign(static_cast<std::size_t>(batch * heads), Mat<S>());

    Mat<S> mixed(x.rows(), width);
    for (Index b = 0; b < batch; ++b) {
      for (Index h = 0; h < heads; ++h) {
        auto q = ctx.q.block(b * tokens, h * dh, tokens, dh);
        auto k = ctx.k.block(b * tokens, h * dh, tokens, dh);
        auto v = ctx.v.block(b * tokens, h * dh, tokens, dh);
        Mat<S> scores = q * k.transpose() * scale;
        detail::softmax_rows_inplace(scores);
        mixed.block(b * tokens, h * dh, tokens, dh).noalias() = scores * v;
        ctx.attn[static_cast<std::size_t>(b * heads + h)] = std::move(scores);
      }
    }
    return wo.forward(mixed, ctx.o_ctx);
  }

  Mat<S> backward(const Mat<S>& dy, Ctx& ctx) {
    const Index batch = ctx.batch, tokens = ctx.tokens;
    const Index dh = width / heads;
    const S scale = S(1) / std::sqrt(static_cast<S>(dh));
    Mat<S> d_mixed = wo.backward(dy, ctx.o_ctx);
    Mat<S> dq(dy.rows(), width), dk(dy.rows(), width), dv(dy.rows(), width);
    for (Index b = 0; b < batch; ++b) {
      for (Index h = 0; h < heads; ++h) {
        const Mat<S>& attn = ctx.attn[static_cast<std::size_t>(b * heads + h)];
        auto q = ctx.q.block(b * tokens, h * dh, tokens, dh);
        auto k = ctx.k.block(b * tokens, h * dh, tokens, dh);
        auto v = ctx.v.block(b * tokens, h * dh, tokens, dh);
        auto dout = d_mixed.block(b * tokens, h * dh, tokens, dh);
        Mat<S> d_attn = dout * v.transpose();
        dv.block(b * tokens, h * dh, tokens, dh).noalias() =
            attn.transpose() * dout;
        Mat<S> d_scores = detail::softmax_rows_backward(d_attn, attn) * scale;
        dq.block(b * tokens, h * dh, tokens, dh).noalias() = d_scores * k;
        dk.block(b * tokens, h * dh, tokens, dh).noalias() =
            d_scores.transpose() * q;
      }
    }
    Mat<S> dx = wq.backward(dq, ctx.q_ctx);
    dx += wk.backward(dk, ctx.k_ctx);
    dx += wv.backward(dv, ctx.v_ctx);
    return dx;
  }

  void collect(ParamRefs<S>& out) {
    wq.collect(out);
    wk.collect(out);
    wv.collect(out);
    wo.collect(out);
  }
};

/// Collapses a token sequence to one vector: a single learned query attends
/// over the tokens per head, the head outputs are concatenated and mixed by
/// an output projection. Permutation-invariant in the tokens.
template <class S>
struct AttentionPool {
  Param<S> query;  // [1 x W]
  Linear<S> wq, wk, wv, wo;
  Index width = 0, heads = 1;

  void init(const std::string& name, Index w, Index n_heads, Rng& rng) {
    check_arg(w % n_heads == 0, "attention_pool: heads must divide width");
    width = w;
    heads = n_heads;
    query.name = name + ".query";
    query.init_zero(1, w);
    for (Index j = 0; j < w; ++j)
      query.value(0, j) = static_cast<S>(rng.normal(0.0, 0.02));
    query.decay = false;
    wq.init(name + ".wq", w, w, rng);
    wk.init(name + ".wk", w, w, rng);
    wv.init(name + ".wv", w, w, rng);
    wo.init(name + ".wo", w, w, rng);
  }

  struct Ctx {
    typename Linear<S>::Ctx q_ctx, k_ctx, v_ctx, o_ctx;
    Mat<S> q;                  // [1 x W]
    Mat<S> k, v;               // [B*N x W]
    std::vector<Mat<S>> attn;  // per (sample, head): [1 x N]
    Index batch = 0, tokens = 0;
  };

  /// tokens: [B*N x W] -> pooled [B x W]
  Mat<S> forward(const Mat<S>& x, Index batch, Index tokens, Ctx& ctx) {
    check_arg(tokens >= 1, "attention_pool: need at least one token");
    check_arg(x.rows() == batch * tokens, "attention_pool: rows != batch * tokens");
    const Index dh = width / heads;
    const S scale = S(1) / std::sqrt(static_cast<S>(dh));
    ctx.batch = batch;
    ctx.tokens = tokens;
    ctx.q = wq.forward(query.value, ctx.q_ctx);
    ctx.k = wk.forward(x, ctx.k_ctx);
    ctx.v = wv.forward(x, ctx.v_ctx);
    ctx.attn.assign(static_cast<std::size_t>(batch * heads), Mat<S>());

    Mat<S> mixed(batch, width);
    for (Index b = 0; b < batch; ++b)
      for (Index h = 0; h < heads; ++h) {
        auto k = ctx.k.block(b * tokens, h * dh, tokens, dh);
        auto v = ctx.v.block(b * tokens, h * dh, tokens, dh);
        Mat<S> scores = ctx.q.block(0, h * dh, 1, dh) * k.transpose() * scale;
        detail::softmax_rows_inplace(scores);
        mixed.block(b, h * dh, 1, dh).noalias() = scores * v;
        ctx.attn[static_cast<std::size_t>(b * heads + h)] = std::move(scores);
      }
    return wo.forward(mixed, ctx.o_ctx);
  }

  /// dy: [B x W] -> d tokens [B*N x W]
  Mat<S> backward(const Mat<S>& dy, Ctx& ctx) {
    const Index batch = ctx.batch, tokens = ctx.tokens;
    const Index dh = width / heads;
    const S scale = S(1) / std::sqrt(static_cast<S>(dh));
    Mat<S> d_mixed = wo.backward(dy, ctx.o_ctx);
    Mat<S> dq_total = Mat<S>::Zero(1, width);
    Mat<S> dk(batch * tokens, width), dv(batch * tokens, width);
    for (Index b = 0; b < batch; ++b)
      for (Index h = 0; h < heads; ++h) {
        const Mat<S>& attn = ctx.attn[static_cast<std::size_t>(b * heads + h)];
        auto k = ctx.k.block(b * tokens, h * dh, tokens, dh);
        auto v = ctx.v.block(b * tokens, h * dh, tokens, dh);
        auto dout = d_mixed.block(b, h * dh, 1, dh);
        Mat<S> d_attn = dout * v.transpose();  // [1 x N]
        dv.block(b * tokens, h * dh, tokens, dh).noalias() =
            attn.transpose() * dout;
        Mat<S> d_scores = detail::softmax_rows_backward(d_attn, attn) * scale;
        dq_total.block(0, h * dh, 1, dh) += d_scores * k;
        dk.block(b * tokens, h * dh, tokens, dh).noalias() =
            d_scores.transpose() * ctx.q.block(0, h * dh, 1, dh);
      }
    Mat<S> dx = wk.backward(dk, ctx.k_ctx);
    dx += wv.backward(dv, ctx.v_ctx);
    query.grad += wq.backward(dq_total, ctx.q_ctx);
    return dx;
  }

  void collect(ParamRefs<S>& out) {
    out.push_back(&query);
    wq.collect(out);
    wk.collect(out);
    wv.collect(out);
    wo.collect(out);
  }
};

}  // namespace cardiomm
