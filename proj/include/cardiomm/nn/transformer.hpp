#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cardiomm/core/common.hpp"
#include "cardiomm/nn/attention.hpp"
#include "cardiomm/nn/linear.hpp"
#include "cardiomm/nn/norm.hpp"

namespace cardiomm {

/// Pre-norm transformer block: x + MHSA(LN(x)), then x + MLP(LN(x)).
template <class S>
struct TransformerBlock {
  LayerNorm<S> ln1, ln2;
  MultiHeadSelfAttention<S> attn;
  Linear<S> fc1, fc2;
  Gelu<S> act;

  void init(const std::string& name, Index width, Index heads, Index mlp_hidden,
            Rng& rng) {
    ln1.init(name + ".ln1", width);
    ln2.init(name + ".ln2", width);
    attn.init(name + ".attn", width, heads, rng);
    fc1.init(name + ".fc1", width, mlp_hidden, rng);
    fc2.init(name + ".fc2", mlp_hidden, width, rng);
  }

  struct Ctx {
    typename LayerNorm<S>::Ctx ln1, ln2;
    typename MultiHeadSelfAttention<S>::Ctx attn;
    typename Linear<S>::Ctx fc1, fc2;
    typename Gelu<S>::Ctx act;
  };

  Mat<S> forward(const Mat<S>& x, Index batch, Index tokens, Ctx& ctx) {
    Mat<S> h = x + attn.forward(ln1.forward(x, ctx.ln1), batch, tokens, ctx.attn);
    Mat<S> m = fc2.forward(
        act.forward(fc1.forward(ln2.forward(h, ctx.ln2), ctx.fc1), ctx.act),
        ctx.fc2);
    return h + m;
  }

  Mat<S> backward(const Mat<S>& dy, Ctx& ctx) {
    Mat<S> dh = dy + ln2.backward(
                         fc1.backward(act.backward(fc2.backward(dy, ctx.fc2),
                                                   ctx.act),
                                      ctx.fc1),
                         ctx.ln2);
    return dh + ln1.backward(attn.backward(dh, ctx.attn), ctx.ln1);
  }

  void collect(ParamRefs<S>& out) {
    ln1.collect(out);
    attn.collect(out);
    ln2.collect(out);
    fc1.collect(out);
    fc2.collect(out);
  }
};

/// A stack of blocks with a final LayerNorm.
template <class S>
struct TransformerEncoder {
  std::vector<TransformerBlock<S>> blocks;
  LayerNorm<S> final_ln;

  void init(const std::string& name, Index depth, Index width, Index heads,
            Index mlp_hidden, Rng& rng) {
    blocks.resize(static_cast<std::size_t>(depth));
    for (Index d = 0; d < depth; ++d)
      blocks[static_cast<std::size_t>(d)].init(
          name + ".block" + std::to_string(d), width, heads, mlp_hidden, rng);
    final_ln.init(name + ".ln", width);
  }

  struct Ctx {
    std::vector<typename TransformerBlock<S>::Ctx> blocks;
    typename LayerNorm<S>::Ctx final_ln;
  };

  Mat<S> forward(const Mat<S>& x, Index batch, Index tokens, Ctx& ctx) {
    ctx.blocks.resize(blocks.size());
    Mat<S> h = x;
    for (std::size_t d = 0; d < blocks.size(); ++d)
      h = blocks[d].forward(h, batch, tokens, ctx.blocks[d]);
    return final_ln.forward(h, ctx.final_ln);
  }

  Mat<S> backward(const Mat<S>& dy, Ctx& ctx) {
    Mat<S> dh = final_ln.backward(dy, ctx.final_ln);
    for (std::size_t d = blocks.size(); d-- > 0;)
      dh = blocks[d].backward(dh, ctx.blocks[d]);
    return dh;
  }

  void collect(ParamRefs<S>& out) {
    for (auto& b : blocks) b.collect(out);
    final_ln.collect(out);
  }
};

/// Fixed sinusoidal positional embedding table of the usual
/// sin/cos-interleaved form.
template <class S>
inline Mat<S> sinusoidal_table(Index positions, Index width) {
  Mat<S> table(positions, width);
  for (Index p = 0; p < positions; ++p)
    for (Index j = 0; j < width; ++j) {
      double angle = static_cast<double>(p) /
                     std::pow(10000.0, 2.0 * static_cast<double>(j / 2) /
                                           static_cast<double>(width));
      table(p, j) = static_cast<S>(j % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  return table;
}

}  // namespace cardiomm
