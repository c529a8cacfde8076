#pragma once

#include <string>
#include <vector>

#include "cardiomm/cohort/types.hpp"
#include "cardiomm/core/common.hpp"
#include "cardiomm/core/error.hpp"
#include "cardiomm/core/rng.hpp"
#include "cardiomm/mae/patchify.hpp"
#include "cardiomm/nn/linear.hpp"
#include "cardiomm/nn/transformer.hpp"

namespace cardiomm {

struct MaeConfig {
  Index leads = 12;
  Index samples = 5000;
  PatchShape patch{1, 100};
  Index width = 384;
  Index depth = 3;
  Index heads = 6;
  double mlp_ratio = 4.0;
  Index dec_width = 192;
  Index dec_depth = 2;
  Index dec_heads = 6;
  double dec_mlp_ratio = 4.0;

  Index lead_blocks() const { return leads / patch.lead_span; }
  Index time_blocks() const { return samples / patch.time_span; }
  Index n_patches() const { return lead_blocks() * time_blocks(); }
  Index patch_dim() const { return patch.lead_span * patch.time_span; }
};

/// Masked-autoencoder transformer for multilead ECG. The encoder sees only
/// visible patches; the decoder fills masked slots with a learned token and
/// reconstructs every patch. Positional embeddings are fixed sinusoids
/// factored over (lead block, time block) and summed.
template <class S>
struct MaeModel {
  MaeConfig cfg;
  Linear<S> patch_embed;   // D -> width
  TransformerEncoder<S> encoder;
  Linear<S> enc_to_dec;    // width -> dec_width
  Param<S> mask_token;     // [1 x dec_width]
  TransformerEncoder<S> decoder;
  Linear<S> head;          // dec_width -> D
  Param<S> lead_mean, lead_std;  // [C x 1] buffers, train-split statistics
  Mat<S> enc_pos, dec_pos;       // [N x width], [N x dec_width], fixed

  void init(const MaeConfig& config, Rng& rng) {
    cfg = config;
    check_arg(cfg.samples % cfg.patch.time_span == 0 &&
                  cfg.leads % cfg.patch.lead_span == 0,
              "mae: signal shape must be divisible by the patch shape");
    check_arg(cfg.width % cfg.heads == 0 && cfg.dec_width % cfg.dec_heads == 0,
              "mae: heads must divide widths");
    patch_embed.init("mae.patch_embed", cfg.patch_dim(), cfg.width, rng);
    encoder.init("mae.encoder", cfg.depth, cfg.width, cfg.heads,
                 static_cast<Index>(cfg.mlp_ratio * cfg.width), rng);
    enc_to_dec.init("mae.enc_to_dec", cfg.width, cfg.dec_width, rng);
    mask_token.name = "mae.mask_token";
    mask_token.init_zero(1, cfg.dec_width);
    for (Index j = 0; j < cfg.dec_width; ++j)
      mask_token.value(0, j) = static_cast<S>(rng.normal(0.0, 0.02));
    mask_token.decay = false;
    decoder.init("mae.decoder", cfg.dec_depth, cfg.dec_width, cfg.dec_heads,
                 static_cast<Index>(cfg.dec_mlp_ratio * cfg.dec_width), rng);
    head.init("mae.head", cfg.dec_width, cfg.patch_dim(), rng);

    lead_mean.name = "mae.lead_mean";
    lead_mean.init_zero(cfg.leads, 1);
    lead_mean.trainable = false;
    lead_std.name = "mae.lead_std";
    lead_std.init_zero(cfg.leads, 1);
    lead_std.value.setOnes();
    lead_std.trainable = false;

    Mat<S> lead_tab = sinusoidal_table<S>(cfg.lead_blocks(), cfg.width);
    Mat<S> time_tab = sinusoidal_table<S>(cfg.time_blocks(), cfg.width);
    enc_pos.resize(cfg.n_patches(), cfg.width);
    for (Index lb = 0; lb < cfg.lead_blocks(); ++lb)
      for (Index tb = 0; tb < cfg.time_blocks(); ++tb)
        enc_pos.row(lb * cfg.time_blocks() + tb) =
            lead_tab.row(lb) + time_tab.row(tb);
    Mat<S> dlead = sinusoidal_table<S>(cfg.lead_blocks(), cfg.dec_width);
    Mat<S> dtime = sinusoidal_table<S>(cfg.time_blocks(), cfg.dec_width);
    dec_pos.resize(cfg.n_patches(), cfg.dec_width);
    for (Index lb = 0; lb < cfg.lead_blocks(); ++lb)
      for (Index tb = 0; tb < cfg.time_blocks(); ++tb)
        dec_pos.row(lb * cfg.time_blocks() + tb) =
            dlead.row(lb) + dtime.row(tb);
  }

  void set_normalization(const Vec<S>& mean, const Vec<S>& stddev) {
    check_arg(mean.size() == cfg.leads && stddev.size() == cfg.leads,
              "mae: normalization statistics must have one entry per lead");
    lead_mean.value = mean;
    lead_std.value = stddev;
  }

  Mat<S> normalize(const Mat<S>& signal) const {
    Mat<S> out = signal;
    for (Index l = 0; l < signal.rows(); ++l)
      out.row(l) = (signal.row(l).array() - lead_mean.value(l, 0)) /
                   (lead_std.value(l, 0) + S(1e-8));
    return out;
  }

  Mat<S> denormalize(const Mat<S>& signal) const {
    Mat<S> out = signal;
    for (Index l = 0; l < signal.rows(); ++l)
      out.row(l) = signal.row(l).array() * (lead_std.value(l, 0) + S(1e-8)) +
                   lead_mean.value(l, 0);
    return out;
  }

  void collect(ParamRefs<S>& out) {
    patch_embed.collect(out);
    encoder.collect(out);
    enc_to_dec.collect(out);
    out.push_back(&mask_token);
    decoder.collect(out);
    head.collect(out);
    out.push_back(&lead_mean);
    out.push_back(&lead_std);
  }

  /// Parameters of the encoder path only (what downstream stages reuse).
  void collect_encoder(ParamRefs<S>& out) {
    patch_embed.collect(out);
    encoder.collect(out);
    out.push_back(&lead_mean);
    out.push_back(&lead_std);
  }

  // ---- masked autoencoding path (training and reconstruction) ----

  struct ReconCtx {
    typename Linear<S>::Ctx embed, to_dec, head;
    typename TransformerEncoder<S>::Ctx enc, dec;
    std::vector<PatchMask> masks;  // one per sample, canonical (sorted) order
    Index batch = 0;
  };

  /// Batched masked forward over normalized patch matrices. `patches[i]` is
  /// the [N x D] grid of sample i; every mask must carry the same visible
  /// count. Returns the [B*N x D] reconstruction of all patches.
  Mat<S> reconstruct_patches(const std::vector<Mat<S>>& patches,
                             const std::vector<PatchMask>& masks,
                             ReconCtx& ctx) {
    const Index batch = static_cast<Index>(patches.size());
    check_arg(batch >= 1 && masks.size() == patches.size(),
              "mae: need one mask per sample");
    const Index n = cfg.n_patches(), d = cfg.patch_dim();
    const Index n_vis = static_cast<Index>(masks.front().visible.size());
    check_arg(n_vis >= 1, "mae: at least one visible patch required");
    ctx.batch = batch;
    ctx.masks = masks;

    Mat<S> vis(batch * n_vis, d);
    for (Index bi = 0; bi < batch; ++bi) {
      const auto& m = masks[static_cast<std::size_t>(bi)];
      check_arg(static_cast<Index>(m.visible.size()) == n_vis,
                "mae: all masks in a batch must have equal visible counts");
      check_arg(patches[static_cast<std::size_t>(bi)].rows() == n &&
                    patches[static_cast<std::size_t>(bi)].cols() == d,
                "mae: patch grid does not match the model configuration");
      for (Index v = 0; v < n_vis; ++v)
        vis.row(bi * n_vis + v) =
            patches[static_cast<std::size_t>(bi)].row(m.visible[static_cast<std::size_t>(v)]);
    }

    Mat<S> tok = patch_embed.forward(vis, ctx.embed);
    for (Index bi = 0; bi < batch; ++bi) {
      const auto& m = masks[static_cast<std::size_t>(bi)];
      for (Index v = 0; v < n_vis; ++v)
        tok.row(bi * n_vis + v) += enc_pos.row(m.visible[static_cast<std::size_t>(v)]);
    }
    Mat<S> enc_out = encoder.forward(tok, batch, n_vis, ctx.enc);
    Mat<S> proj = enc_to_dec.forward(enc_out, ctx.to_dec);

    Mat<S> dec_in(batch * n, cfg.dec_width);
    for (Index bi = 0; bi < batch; ++bi) {
      const auto& m = masks[static_cast<std::size_t>(bi)];
      for (Index p = 0; p < n; ++p)
        dec_in.row(bi * n + p) = mask_token.value.row(0) + dec_pos.row(p);
      for (Index v = 0; v < n_vis; ++v) {
        Index p = m.visible[static_cast<std::size_t>(v)];
        dec_in.row(bi * n + p) = proj.row(bi * n_vis + v) + dec_pos.row(p);
      }
    }
    Mat<S> dec_out = decoder.forward(dec_in, batch, n, ctx.dec);
    return head.forward(dec_out, ctx.head);
  }

  void reconstruct_backward(const Mat<S>& d_pred, ReconCtx& ctx) {
    const Index n = cfg.n_patches();
    const Index batch = ctx.batch;
    const Index n_vis = static_cast<Index>(ctx.masks.front().visible.size());
    Mat<S> d_dec_in = decoder.backward(head.backward(d_pred, ctx.head), ctx.dec);
    Mat<S> d_proj(batch * n_vis, cfg.dec_width);
    for (Index bi = 0; bi < batch; ++bi) {
      const auto& m = ctx.masks[static_cast<std::size_t>(bi)];
      for (Index v = 0; v < n_vis; ++v)
        d_proj.row(bi * n_vis + v) =
            d_dec_in.row(bi * n + m.visible[static_cast<std::size_t>(v)]);
      for (Index mk : m.masked)
        mask_token.grad.row(0) += d_dec_in.row(bi * n + mk);
    }
    Mat<S> d_enc_out = enc_to_dec.backward(d_proj, ctx.to_dec);
    Mat<S> d_tok = encoder.backward(d_enc_out, ctx.enc);
    patch_embed.backward(d_tok, ctx.embed);
  }

  // ---- full-sequence encoder path (alignment and fine-tuning) ----

  struct EncodeCtx {
    typename Linear<S>::Ctx embed;
    typename TransformerEncoder<S>::Ctx enc;
    Index batch = 0;
  };

  /// Encodes all N patches of each sample: [B*N x D] normalized patches in,
  /// [B*N x width] token embeddings out.
  Mat<S> encode_tokens(const Mat<S>& patches, Index batch, EncodeCtx& ctx) {
    const Index n = cfg.n_patches();
    check_arg(patches.rows() == batch * n && patches.cols() == cfg.patch_dim(),
              "mae encode: patch matrix does not match the model configuration");
    ctx.batch = batch;
    Mat<S> tok = patch_embed.forward(patches, ctx.embed);
    for (Index bi = 0; bi < batch; ++bi)
      tok.middleRows(bi * n, n) += enc_pos;
    return encoder.forward(tok, batch, n, ctx.enc);
  }

  void encode_tokens_backward(const Mat<S>& d_tokens, EncodeCtx& ctx) {
    patch_embed.backward(encoder.backward(d_tokens, ctx.enc), ctx.embed);
  }
};

/// Single-record reconstruction in signal units: normalizes, masks, encodes,
/// decodes and denormalizes back to a [C x T] signal. The mask is treated as
/// a set; its list order never affects the output.
template <class S>
Mat<S> mae_forward(MaeModel<S>& model, const EcgRecord& ecg,
                   const PatchMask& mask) {
  check_arg(ecg.samples.rows() == model.cfg.leads &&
                ecg.samples.cols() == model.cfg.samples,
            "mae_forward: record shape does not match the model");
  Mat<S> signal = ecg.samples.template cast<S>();
  auto grid = patchify(model.normalize(signal), model.cfg.patch);
  PatchMask canonical = mask;
  std::sort(canonical.visible.begin(), canonical.visible.end());
  std::sort(canonical.masked.begin(), canonical.masked.end());
  check_arg(static_cast<Index>(canonical.visible.size() + canonical.masked.size()) ==
                model.cfg.n_patches(),
            "mae_forward: mask does not cover the patch grid");
  typename MaeModel<S>::ReconCtx ctx;
  Mat<S> pred = model.reconstruct_patches({grid.patches}, {canonical}, ctx);
  Mat<S> recon_norm =
      unpatchify(pred, model.cfg.patch, model.cfg.leads, model.cfg.samples);
  return model.denormalize(recon_norm);
}

}  // namespace cardiomm
