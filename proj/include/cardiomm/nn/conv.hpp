#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cardiomm/core/common.hpp"
#include "cardiomm/core/error.hpp"
#include "cardiomm/nn/linear.hpp"
#include "cardiomm/nn/param.hpp"

namespace cardiomm {

/// Batched feature maps, stored as [B*C x H*W] with sample b occupying rows
/// [b*C, (b+1)*C).
template <class S>
struct FeatureMaps {
  Mat<S> data;
  Index batch = 0, channels = 0, height = 0, width = 0;

  Index hw() const { return height * width; }
};

template <class S>
struct Conv2d {
  Param<S> w;  // [C_out x C_in*k*k]
  Param<S> b;  // [1 x C_out]
  Index in_ch = 0, out_ch = 0, kernel = 3, stride = 1, pad = 1;

  void init(const std::string& name, Index cin, Index cout, Index k, Index s,
            Index p, Rng& rng) {
    in_ch = cin;
    out_ch = cout;
    kernel = k;
    stride = s;
    pad = p;
    w.name = name + ".w";
    w.init_zero(cout, cin * k * k);
    xavier_uniform(w.value, cin * k * k, cout * k * k, rng);
    b.name = name + ".b";
    b.init_zero(1, cout);
    b.decay = false;
  }

  Index out_size(Index in) const { return (in + 2 * pad - kernel) / stride + 1; }

  struct Ctx {
    std::vector<Mat<S>> cols;  // per sample: [C_in*k*k x H_out*W_out]
    Index in_h = 0, in_w = 0;
  };

  FeatureMaps<S> forward(const FeatureMaps<S>& x, Ctx& ctx) {
    check_arg(x.channels == in_ch, "conv '" + w.name + "': channel mismatch");
    const Index oh = out_size(x.height), ow = out_size(x.width);
    check_arg(oh >= 1 && ow >= 1, "conv '" + w.name + "': output collapsed to zero");
    ctx.in_h = x.height;
    ctx.in_w = x.width;
    ctx.cols.assign(static_cast<std::size_t>(x.batch), Mat<S>());
    FeatureMaps<S> y{Mat<S>(x.batch * out_ch, oh * ow), x.batch, out_ch, oh, ow};
    for (Index bi = 0; bi < x.batch; ++bi) {
      Mat<S>& col = ctx.cols[static_cast<std::size_t>(bi)];
      col.setZero(in_ch * kernel * kernel, oh * ow);
      for (Index c = 0; c < in_ch; ++c)
        for (Index ki = 0; ki < kernel; ++ki)
          for (Index kj = 0; kj < kernel; ++kj) {
            Index row = (c * kernel + ki) * kernel + kj;
            for (Index oy = 0; oy < oh; ++oy) {
              Index iy = oy * stride + ki - pad;
              if (iy < 0 || iy >= x.height) continue;
              for (Index ox = 0; ox < ow; ++ox) {
                Index ix = ox * stride + kj - pad;
                if (ix < 0 || ix >= x.width) continue;
                col(row, oy * ow + ox) = x.data(bi * in_ch + c, iy * x.width + ix);
              }
            }
          }
      y.data.middleRows(bi * out_ch, out_ch).noalias() = w.value * col;
      y.data.middleRows(bi * out_ch, out_ch).colwise() +=
          b.value.row(0).transpose();
    }
    return y;
  }

  FeatureMaps<S> backward(const FeatureMaps<S>& dy, const Ctx& ctx) {
    const Index oh = dy.height, ow = dy.width;
    FeatureMaps<S> dx{Mat<S>::Zero(dy.batch * in_ch, ctx.in_h * ctx.in_w),
                      dy.batch, in_ch, ctx.in_h, ctx.in_w};
    for (Index bi = 0; bi < dy.batch; ++bi) {
      const Mat<S>& col = ctx.cols[static_cast<std::size_t>(bi)];
      auto dy_b = dy.data.middleRows(bi * out_ch, out_ch);
      w.grad.noalias() += dy_b * col.transpose();
      b.grad.row(0) += dy_b.rowwise().sum().transpose();
      Mat<S> dcol = w.value.transpose() * dy_b;
      for (Index c = 0; c < in_ch; ++c)
        for (Index ki = 0; ki < kernel; ++ki)
          for (Index kj = 0; kj < kernel; ++kj) {
            Index row = (c * kernel + ki) * kernel + kj;
            for (Index oy = 0; oy < oh; ++oy) {
              Index iy = oy * stride + ki - pad;
              if (iy < 0 || iy >= ctx.in_h) continue;
              for (Index ox = 0; ox < ow; ++ox) {
                Index ix = ox * stride + kj - pad;
                if (ix < 0 || ix >= ctx.in_w) continue;
                dx.data(bi * in_ch + c, iy * ctx.in_w + ix) += dcol(row, oy * ow + ox);
              }
            }
          }
    }
    return dx;
  }

  void collect(ParamRefs<S>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

/// GroupNorm over channel groups of each sample; per-sample statistics keep
/// evaluation deterministic with no running state.
template <class S>
struct GroupNorm {
  Param<S> gamma, beta;  // [1 x C]
  Index channels = 0, groups = 1;
  S eps = static_cast<S>(1e-5);

  static Index pick_groups(Index c) {
    for (Index g = std::min<Index>(8, c); g >= 1; --g)
      if (c % g == 0) return g;
    return 1;
  }

  void init(const std::string& name, Index c) {
    channels = c;
    groups = pick_groups(c);
    gamma.name = name + ".gamma";
    gamma.init_zero(1, c);
    gamma.value.setOnes();
    gamma.decay = false;
    beta.name = name + ".beta";
    beta.init_zero(1, c);
    beta.decay = false;
  }

  struct Ctx {
    Mat<S> xhat;
    Mat<S> inv_std;  // [B x groups]
  };

  FeatureMaps<S> forward(const FeatureMaps<S>& x, Ctx& ctx) {
    check_arg(x.channels == channels, "groupnorm: channel mismatch");
    const Index cg = channels / groups, hw = x.hw();
    ctx.xhat.resize(x.data.rows(), x.data.cols());
    ctx.inv_std.resize(x.batch, groups);
    FeatureMaps<S> y = x;
    for (Index bi = 0; bi < x.batch; ++bi)
      for (Index g = 0; g < groups; ++g) {
        auto blk = x.data.middleRows(bi * channels + g * cg, cg);
        S mean = blk.mean();
        S var = (blk.array() - mean).square().mean();
        S inv = S(1) / std::sqrt(var + eps);
        ctx.inv_std(bi, g) = inv;
        auto xh = ctx.xhat.middleRows(bi * channels + g * cg, cg);
        xh = (blk.array() - mean) * inv;
        for (Index c = 0; c < cg; ++c)
          y.data.row(bi * channels + g * cg + c) =
              xh.row(c) * gamma.value(0, g * cg + c) +
              Mat<S>::Constant(1, hw, beta.value(0, g * cg + c));
      }
    return y;
  }

  FeatureMaps<S> backward(const FeatureMaps<S>& dy, const Ctx& ctx) {
    const Index cg = channels / groups, hw = dy.hw();
    const S m = static_cast<S>(cg * hw);
    FeatureMaps<S> dx = dy;
    for (Index bi = 0; bi < dy.batch; ++bi)
      for (Index g = 0; g < groups; ++g) {
        Mat<S> dxhat(cg, hw);
        for (Index c = 0; c < cg; ++c) {
          Index ch = g * cg + c;
          auto dy_row = dy.data.row(bi * channels + ch);
          auto xh_row = ctx.xhat.row(bi * channels + ch);
          dxhat.row(c) = dy_row * gamma.value(0, ch);
          gamma.grad(0, ch) += dy_row.dot(xh_row);
          beta.grad(0, ch) += dy_row.sum();
        }
        auto xh = ctx.xhat.middleRows(bi * channels + g * cg, cg);
        S sum_dxhat = dxhat.sum();
        S sum_dxhat_xhat = (dxhat.array() * xh.array()).sum();
        S inv = ctx.inv_std(bi, g);
        dx.data.middleRows(bi * channels + g * cg, cg) =
            (inv / m) *
            (m * dxhat.array() - sum_dxhat - xh.array() * sum_dxhat_xhat);
      }
    return dx;
  }

  void collect(ParamRefs<S>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
};

template <class S>
struct MaxPool2d {
  Index kernel = 3, stride = 2, pad = 1;

  Index out_size(Index in) const { return (in + 2 * pad - kernel) / stride + 1; }

  struct Ctx {
    Mat<Index> argmax;  // flat input index per output element
    Index in_h = 0, in_w = 0;
  };

  FeatureMaps<S> forward(const FeatureMaps<S>& x, Ctx& ctx) {
    const Index oh = out_size(x.height), ow = out_size(x.width);
    ctx.in_h = x.height;
    ctx.in_w = x.width;
    ctx.argmax.resize(x.data.rows(), oh * ow);
    FeatureMaps<S> y{Mat<S>(x.data.rows(), oh * ow), x.batch, x.channels, oh, ow};
    for (Index r = 0; r < x.data.rows(); ++r)
      for (Index oy = 0; oy < oh; ++oy)
        for (Index ox = 0; ox < ow; ++ox) {
          S best = std::numeric_limits<S>::lowest();
          Index best_idx = -1;
          for (Index ki = 0; ki < kernel; ++ki) {
            Index iy = oy * stride + ki - pad;
            if (iy < 0 || iy >= x.height) continue;
            for (Index kj = 0; kj < kernel; ++kj) {
              Index ix = ox * stride + kj - pad;
              if (ix < 0 || ix >= x.width) continue;
              S v = x.data(r, iy * x.width + ix);
              if (v > best) {
                best = v;
                best_idx = iy * x.width + ix;
              }
            }
          }
          y.data(r, oy * ow + ox) = best;
          ctx.argmax(r, oy * ow + ox) = best_idx;
        }
    return y;
  }

  FeatureMaps<S> backward(const FeatureMaps<S>& dy, const Ctx& ctx) {
    FeatureMaps<S> dx{Mat<S>::Zero(dy.data.rows(), ctx.in_h * ctx.in_w),
                      dy.batch, dy.channels, ctx.in_h, ctx.in_w};
    for (Index r = 0; r < dy.data.rows(); ++r)
      for (Index o = 0; o < dy.data.cols(); ++o)
        dx.data(r, ctx.argmax(r, o)) += dy.data(r, o);
    return dx;
  }
};

/// Residual block, basic (two 3x3) or bottleneck (1x1 -> 3x3 -> 1x1) form.
template <class S>
struct ResidualBlock {
  bool bottleneck = false;
  Conv2d<S> conv1, conv2, conv3, conv_skip;
  GroupNorm<S> gn1, gn2, gn3, gn_skip;
  bool has_skip_conv = false;

  void init(const std::string& name, Index cin, Index cout, Index mid,
            Index stride, bool use_bottleneck, Rng& rng) {
    bottleneck = use_bottleneck;
    if (bottleneck) {
      conv1.init(name + ".conv1", cin, mid, 1, 1, 0, rng);
      gn1.init(name + ".gn1", mid);
      conv2.init(name + ".conv2", mid, mid, 3, stride, 1, rng);
      gn2.init(name + ".gn2", mid);
      conv3.init(name + ".conv3", mid, cout, 1, 1, 0, rng);
      gn3.init(name + ".gn3", cout);
    } else {
      conv1.init(name + ".conv1", cin, cout, 3, stride, 1, rng);
      gn1.init(name + ".gn1", cout);
      conv2.init(name + ".conv2", cout, cout, 3, 1, 1, rng);
      gn2.init(name + ".gn2", cout);
    }
    has_skip_conv = (stride != 1 || cin != cout);
    if (has_skip_conv) {
      conv_skip.init(name + ".skip", cin, cout, 1, stride, 0, rng);
      gn_skip.init(name + ".gn_skip", cout);
    }
  }

  struct Ctx {
    typename Conv2d<S>::Ctx c1, c2, c3, cs;
    typename GroupNorm<S>::Ctx g1, g2, g3, gs;
    Mat<S> pre_relu1, pre_relu2, pre_out;  // masks for the ReLUs
  };

  FeatureMaps<S> forward(const FeatureMaps<S>& x, Ctx& ctx) {
    FeatureMaps<S> main = gn1.forward(conv1.forward(x, ctx.c1), ctx.g1);
    ctx.pre_relu1 = main.data;
    main.data = main.data.cwiseMax(S(0));
    main = gn2.forward(conv2.forward(main, ctx.c2), ctx.g2);
    if (bottleneck) {
      ctx.pre_relu2 = main.data;
      main.data = main.data.cwiseMax(S(0));
      main = gn3.forward(conv3.forward(main, ctx.c3), ctx.g3);
    }
    FeatureMaps<S> skip =
        has_skip_conv ? gn_skip.forward(conv_skip.forward(x, ctx.cs), ctx.gs) : x;
    main.data += skip.data;
    ctx.pre_out = main.data;
    main.data = main.data.cwiseMax(S(0));
    return main;
  }

  FeatureMaps<S> backward(const FeatureMaps<S>& dy, Ctx& ctx) {
    FeatureMaps<S> d = dy;
    d.data = (ctx.pre_out.array() > S(0)).template cast<S>() * dy.data.array();
    FeatureMaps<S> d_skip = d;

    FeatureMaps<S> d_main = d;
    if (bottleneck) {
      d_main = conv3.backward(gn3.backward(d_main, ctx.g3), ctx.c3);
      d_main.data =
          (ctx.pre_relu2.array() > S(0)).template cast<S>() * d_main.data.array();
    }
    d_main = conv2.backward(gn2.backward(d_main, ctx.g2), ctx.c2);
    d_main.data =
        (ctx.pre_relu1.array() > S(0)).template cast<S>() * d_main.data.array();
    FeatureMaps<S> dx = conv1.backward(gn1.backward(d_main, ctx.g1), ctx.c1);

    if (has_skip_conv) {
      FeatureMaps<S> ds = conv_skip.backward(gn_skip.backward(d_skip, ctx.gs), ctx.cs);
      dx.data += ds.data;
    } else {
      dx.data += d_skip.data;
    }
    return dx;
  }

  void collect(ParamRefs<S>& out) {
    conv1.collect(out);
    gn1.collect(out);
    conv2.collect(out);
    gn2.collect(out);
    if (bottleneck) {
      conv3.collect(out);
      gn3.collect(out);
    }
    if (has_skip_conv) {
      conv_skip.collect(out);
      gn_skip.collect(out);
    }
  }
};

struct ConvStageSpec {
  Index out_channels = 64;
  Index blocks = 1;
  Index stride = 2;
  Index mid_channels = 0;  // bottleneck only
};

struct ConvBackboneConfig {
  Index in_channels = 3;
  Index stem_channels = 16;
  Index stem_kernel = 3;
  Index stem_stride = 2;
  bool stem_maxpool = false;
  bool bottleneck = false;
  std::vector<ConvStageSpec> stages;
  Index output_dim() const { return stages.back().out_channels; }
};

/// Compact residual backbone, the shape used at desk scale (d = 128).
inline ConvBackboneConfig small_backbone_config(Index d = 128) {
  ConvBackboneConfig cfg;
  cfg.stem_channels = 16;
  cfg.stages = {{32, 1, 2, 0}, {64, 1, 2, 0}, {d, 1, 2, 0}};
  return cfg;
}

/// 50-layer bottleneck preset (d = 2048).
inline ConvBackboneConfig resnet50_backbone_config() {
  ConvBackboneConfig cfg;
  cfg.stem_channels = 64;
  cfg.stem_kernel = 7;
  cfg.stem_stride = 2;
  cfg.stem_maxpool = true;
  cfg.bottleneck = true;
  cfg.stages = {{256, 3, 1, 64},
                {512, 4, 2, 128},
                {1024, 6, 2, 256},
                {2048, 3, 2, 512}};
  return cfg;
}

/// Residual conv backbone with global average pooling: [B x 3 x H x W]
/// feature maps in, [B x d] embeddings out.
template <class S>
struct ConvBackbone {
  ConvBackboneConfig cfg;
  Conv2d<S> stem;
  GroupNorm<S> stem_gn;
  MaxPool2d<S> stem_pool;
  std::vector<ResidualBlock<S>> blocks_;

  void init(const std::string& name, const ConvBackboneConfig& config, Rng& rng) {
    cfg = config;
    stem.init(name + ".stem", cfg.in_channels, cfg.stem_channels, cfg.stem_kernel,
              cfg.stem_stride, cfg.stem_kernel / 2, rng);
    stem_gn.init(name + ".stem_gn", cfg.stem_channels);
    Index cin = cfg.stem_channels;
    Index bi = 0;
    for (const auto& st : cfg.stages)
      for (Index k = 0; k < st.blocks; ++k) {
        blocks_.emplace_back();
        blocks_.back().init(name + ".block" + std::to_string(bi++), cin,
                            st.out_channels, st.mid_channels,
                            k == 0 ? st.stride : 1, cfg.bottleneck, rng);
        cin = st.out_channels;
      }
  }

  struct Ctx {
    typename Conv2d<S>::Ctx stem;
    typename GroupNorm<S>::Ctx stem_gn;
    typename MaxPool2d<S>::Ctx pool;
    Mat<S> stem_pre_relu;
    std::vector<typename ResidualBlock<S>::Ctx> blocks;
    Index final_h = 0, final_w = 0, batch = 0;
  };

  /// Returns [B x d] pooled embeddings.
  Mat<S> forward(const FeatureMaps<S>& x, Ctx& ctx) {
    check_arg(x.channels == cfg.in_channels,
              "backbone: expected " + std::to_string(cfg.in_channels) +
                  " input channels, got " + std::to_string(x.channels));
    FeatureMaps<S> h = stem_gn.forward(stem.forward(x, ctx.stem), ctx.stem_gn);
    ctx.stem_pre_relu = h.data;
    h.data = h.data.cwiseMax(S(0));
    if (cfg.stem_maxpool) h = stem_pool.forward(h, ctx.pool);
    ctx.blocks.resize(blocks_.size());
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      h = blocks_[i].forward(h, ctx.blocks[i]);
    ctx.final_h = h.height;
    ctx.final_w = h.width;
    ctx.batch = h.batch;
    // global average pooling
    const Index d = cfg.output_dim();
    Mat<S> out(h.batch, d);
    for (Index b = 0; b < h.batch; ++b)
      out.row(b) = h.data.middleRows(b * d, d).rowwise().mean().transpose();
    return out;
  }

  /// dy: [B x d] -> gradient w.r.t. the input feature maps.
  FeatureMaps<S> backward(const Mat<S>& dy, Ctx& ctx) {
    const Index d = cfg.output_dim();
    const Index hw = ctx.final_h * ctx.final_w;
    FeatureMaps<S> dh{Mat<S>(ctx.batch * d, hw), ctx.batch, d, ctx.final_h,
                      ctx.final_w};
    const S inv = S(1) / static_cast<S>(hw);
    for (Index b = 0; b < ctx.batch; ++b)
      for (Index c = 0; c < d; ++c)
        dh.data.row(b * d + c).setConstant(dy(b, c) * inv);
    for (std::size_t i = blocks_.size(); i-- > 0;)
      dh = blocks_[i].backward(dh, ctx.blocks[i]);
    if (cfg.stem_maxpool) dh = stem_pool.backward(dh, ctx.pool);
    dh.data = (ctx.stem_pre_relu.array() > S(0)).template cast<S>() * dh.data.array();
    return stem.backward(stem_gn.backward(dh, ctx.stem_gn), ctx.stem);
  }

  void collect(ParamRefs<S>& out) {
    stem.collect(out);
    stem_gn.collect(out);
    for (auto& b : blocks_) b.collect(out);
  }
};

}  // namespace cardiomm
