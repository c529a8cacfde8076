#pragma once

#include <ostream>
#include <vector>

#include "cardiomm/align/clip_loss.hpp"
#include "cardiomm/align/fusion.hpp"
#include "cardiomm/augment/ecg_augment.hpp"
#include "cardiomm/augment/image_augment.hpp"
#include "cardiomm/augment/tabular_corrupt.hpp"
#include "cardiomm/engine/checkpoint.hpp"
#include "cardiomm/engine/optimizer.hpp"
#include "cardiomm/engine/schedule.hpp"
#include "cardiomm/engine/train_util.hpp"
#include "cardiomm/image_ssl/encoder.hpp"
#include "cardiomm/mae/model.hpp"

namespace cardiomm {

struct AlignTrainConfig {
  MaeConfig mae_model;
  ConvBackboneConfig image_backbone = small_backbone_config();
  Index tabular_features = 33;
  Index tabular_hidden = 384;
  Index signal_width = 384;  // pooled ECG embedding width (= encoder width)
  Index proj_hidden = 256;
  Index proj_out = 128;
  EcgAugmentConfig ecg_augment_cfg;
  ImageAugmentConfig image_augment_cfg;
  double corruption_rate = 0.3;
  int epochs = 200;
  int batch_size = 256;
  double base_lr = 1e-4;
  double min_lr = 0.0;
  double weight_decay = 1e-4;
  double warmup_frac = 0.1;
  double tau = 0.1;
  double lambda = 0.5;
  bool freeze_encoders = false;
  std::uint64_t seed = 0;
  std::string config_hash = "unhashed";
};

/// Stage-3 model: the fused ECG+tabular branch and the image branch, each
/// behind its own projection head into the shared 128-d space.
template <class S>
struct AlignModel {
  MaeModel<S> mae;          // encoder path only
  Mlp2<S> tab_encoder;      // F -> hidden -> 384
  ConvBackbone<S> image_backbone;
  Mlp2<S> g_s;              // 768 -> 256 -> 128
  Mlp2<S> g_i;              // d -> 256 -> 128
  L2Normalize<S> norm_s, norm_i;
  Index ecg_width = 384, tab_width = 384;

  void init(const AlignTrainConfig& cfg, Rng& rng) {
    mae.init(cfg.mae_model, rng);
    ecg_width = cfg.mae_model.width;
    tab_width = 384;
    tab_encoder.init("tab_encoder", cfg.tabular_features, cfg.tabular_hidden,
                     tab_width, rng);
    image_backbone.init("image_backbone", cfg.image_backbone, rng);
    g_s.init("g_s", ecg_width + tab_width, cfg.proj_hidden, cfg.proj_out, rng);
    g_i.init("g_i", cfg.image_backbone.output_dim(), cfg.proj_hidden,
             cfg.proj_out, rng);
  }

  struct SignalCtx {
    typename MaeModel<S>::EncodeCtx enc;
    typename Mlp2<S>::Ctx tab, proj;
    typename L2Normalize<S>::Ctx norm;
    Index batch = 0;
  };

  /// patches: [B*N x D] normalized ECG patches; tab: [B x F].
  Mat<S> forward_signal(const Mat<S>& patches, const Mat<S>& tab, Index batch,
                        SignalCtx& ctx) {
    ctx.batch = batch;
    Mat<S> tokens = mae.encode_tokens(patches, batch, ctx.enc);
    Mat<S> pooled = mean_pool_tokens(tokens, batch, mae.cfg.n_patches());
    Mat<S> tab_emb = tab_encoder.forward(tab, ctx.tab);
    Mat<S> fused = fuse_signal(pooled, tab_emb, ecg_width, tab_width);
    return norm_s.forward(g_s.forward(fused, ctx.proj), ctx.norm);
  }

  void backward_signal(const Mat<S>& d_z, SignalCtx& ctx) {
    Mat<S> d_fused = g_s.backward(norm_s.backward(d_z, ctx.norm), ctx.proj);
    Mat<S> d_pooled = d_fused.leftCols(ecg_width);
    Mat<S> d_tab = d_fused.rightCols(tab_width);
    tab_encoder.backward(d_tab, ctx.tab);
    Mat<S> d_tokens =
        mean_pool_tokens_backward(d_pooled, ctx.batch, mae.cfg.n_patches());
    mae.encode_tokens_backward(d_tokens, ctx.enc);
  }

  struct ImageCtx {
    typename ConvBackbone<S>::Ctx backbone;
    typename Mlp2<S>::Ctx proj;
    typename L2Normalize<S>::Ctx norm;
  };

  Mat<S> forward_image(const FeatureMaps<S>& maps, ImageCtx& ctx) {
    Mat<S> h = image_backbone.forward(maps, ctx.backbone);
    return norm_i.forward(g_i.forward(h, ctx.proj), ctx.norm);
  }

  void backward_image(const Mat<S>& d_z, ImageCtx& ctx) {
    Mat<S> dh = g_i.backward(norm_i.backward(d_z, ctx.norm), ctx.proj);
    image_backbone.backward(dh, ctx.backbone);
  }

  void collect_signal_branch(ParamRefs<S>& out) {
    mae.collect_encoder(out);
    tab_encoder.collect(out);
    g_s.collect(out);
  }

  void collect(ParamRefs<S>& out) {
    collect_signal_branch(out);
    image_backbone.collect(out);
    g_i.collect(out);
  }
};

/// One modality-aligned view of a dataset slice: filtered ECGs, raw phase
/// stacks, and encoded tabular rows in matching order.
struct AlignDataView {
  std::vector<const EcgRecord*> ecg;
  std::vector<const CmrPhaseStack*> cmr;
  MatF tabular;

  std::size_t size() const { return ecg.size(); }
};

struct AlignTrainResult {
  Checkpoint signal_branch;
  Checkpoint full;
  std::vector<double> step_total;
  std::vector<double> epoch_val_loss;
  double best_val_loss = 0.0;
};

/// Mean 1-based rank of the matched image for each signal anchor under the
/// similarity matrix; 1 is perfect retrieval, (B+1)/2 is chance.
template <class S>
double mean_true_rank(const Mat<S>& z_sig, const Mat<S>& z_img) {
  check_arg(z_sig.rows() == z_img.rows() && z_sig.rows() >= 2,
            "mean_true_rank: need aligned batches of >= 2 rows");
  Mat<S> sim = z_sig * z_img.transpose();
  double total = 0;
  for (Index k = 0; k < sim.rows(); ++k) {
    Index rank = 1;
    for (Index j = 0; j < sim.cols(); ++j)
      if (j != k && sim(k, j) > sim(k, k)) ++rank;
    total += static_cast<double>(rank);
  }
  return total / static_cast<double>(sim.rows());
}

namespace align_detail {

template <class S>
Mat<S> prepare_ecg_patches(const MaeModel<S>& mae,
                           const std::vector<const EcgRecord*>& records,
                           const std::vector<std::size_t>& ids,
                           const EcgAugmentConfig* aug, std::uint64_t seed,
                           std::uint64_t epoch) {
  const Index n = mae.cfg.n_patches(), d = mae.cfg.patch_dim();
  Mat<S> patches(static_cast<Index>(ids.size()) * n, d);
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const EcgRecord* rec = records[ids[k]];
    EcgRecord augmented;
    if (aug) {
      Rng rng(derive_seed(seed, {kStageAlign, 0xA1, epoch, ids[k]}));
      augmented = ecg_augment(*rec, *aug, rng);
      rec = &augmented;
    }
    Mat<S> norm = mae.normalize(rec->samples.template cast<S>());
    patches.middleRows(static_cast<Index>(k) * n, n) =
        patchify(norm, mae.cfg.patch).patches;
  }
  return patches;
}

template <class S>
FeatureMaps<S> prepare_images(const std::vector<const CmrPhaseStack*>& stacks,
                              const std::vector<std::size_t>& ids,
                              const ImageAugmentConfig* aug, std::uint64_t seed,
                              std::uint64_t epoch) {
  std::vector<CmrPhaseStack> views;
  std::vector<const CmrPhaseStack*> ptrs(ids.size());
  if (aug) {
    views.resize(ids.size());
    for (std::size_t k = 0; k < ids.size(); ++k) {
      Rng rng(derive_seed(seed, {kStageAlign, 0xA2, epoch, ids[k]}));
      views[k] = image_augment(*stacks[ids[k]], *aug, rng);
      ptrs[k] = &views[k];
    }
  } else {
    for (std::size_t k = 0; k < ids.size(); ++k) ptrs[k] = stacks[ids[k]];
  }
  return stacks_to_feature_maps<S>(ptrs);
}

inline MatF gather_rows(const MatF& m, const std::vector<std::size_t>& ids) {
  MatF out(static_cast<Index>(ids.size()), m.cols());
  for (std::size_t k = 0; k < ids.size(); ++k)
    out.row(static_cast<Index>(k)) = m.row(static_cast<Index>(ids[k]));
  return out;
}

}  // namespace align_detail

/// Stage 3: CLIP-style alignment of the fused ECG+tabular embedding with the
/// image embedding. Consumes the stage-1 and stage-2 checkpoints; emits the
/// signal branch (what downstream fine-tuning loads) and the full state.
inline AlignTrainResult train_multimodal(const AlignDataView& train,
                                         const AlignDataView& val,
                                         const Checkpoint& ecg_ckpt,
                                         const Checkpoint& img_ckpt,
                                         const AlignTrainConfig& cfg,
                                         std::ostream* log = nullptr,
                                         std::ostream* val_log = nullptr) {
  check_arg(train.size() >= 2, "train_multimodal: need at least 2 samples");
  check_arg(train.ecg.size() == train.cmr.size() &&
                static_cast<Index>(train.ecg.size()) == train.tabular.rows(),
            "train_multimodal: modality lists disagree in length");
  check_arg(cfg.batch_size >= 2, "train_multimodal: batch size must be >= 2");

  using S = float;
  Rng init_rng(derive_seed(cfg.seed, {kStageAlign, 0x11}));
  AlignModel<S> model;
  model.init(cfg, init_rng);

  {  // wire in the pretrained encoders
    ParamRefs<S> enc;
    model.mae.collect_encoder(enc);
    ecg_ckpt.apply(enc);
    ParamRefs<S> img;
    model.image_backbone.collect(img);
    img_ckpt.apply(img);
  }
  if (cfg.freeze_encoders) {
    ParamRefs<S> enc;
    model.mae.collect_encoder(enc);
    model.image_backbone.collect(enc);
    for (auto* p : enc) p->trainable = false;
  }

  ParamRefs<S> params;
  model.collect(params);
  AdamW<S> opt(params, {0.9, 0.999, 1e-8, cfg.weight_decay});

  EmpiricalPools pools = build_empirical_pools(train.tabular);

  const auto steps_per_epoch = static_cast<std::int64_t>(
      (train.size() + cfg.batch_size - 1) / static_cast<std::size_t>(cfg.batch_size));
  const std::int64_t total_steps = steps_per_epoch * cfg.epochs;
  ScheduleSpec sched{cfg.base_lr, cfg.min_lr,
                     std::min(static_cast<std::int64_t>(cfg.warmup_frac * total_steps),
                              total_steps - 1),
                     total_steps};

  if (log) *log << "step,lr,l_sig,l_img,total\n";
  if (val_log) *val_log << "epoch,val_loss\n";

  AlignTrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  std::int64_t step = 0;

  auto snapshot = [&](double metric, int epoch) {
    ParamRefs<S> sig;
    model.collect_signal_branch(sig);
    result.signal_branch =
        Checkpoint::from_params(sig, "signal_branch", "align", cfg.config_hash);
    result.signal_branch.best_metric = {{"val_loss", metric}, {"epoch", epoch}};
    ParamRefs<S> all;
    model.collect(all);
    result.full = Checkpoint::from_params(all, "align_full", "align", cfg.config_hash);
    result.full.best_metric = result.signal_branch.best_metric;
  };

  auto eval_val = [&]() {
    if (val.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    double total = 0;
    std::size_t count = 0;
    const auto vb = static_cast<std::size_t>(cfg.batch_size);
    typename AlignModel<S>::SignalCtx sctx;
    typename AlignModel<S>::ImageCtx ictx;
    for (std::size_t start = 0; start + 2 <= val.size(); start += vb) {
      std::size_t end = std::min(val.size(), start + vb);
      std::vector<std::size_t> ids(end - start);
      for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = start + i;
      Mat<S> patches = align_detail::prepare_ecg_patches<S>(
          model.mae, val.ecg, ids, nullptr, cfg.seed, kValTag);
      Mat<S> z_s = model.forward_signal(patches,
                                        align_detail::gather_rows(val.tabular, ids),
                                        static_cast<Index>(ids.size()), sctx);
      auto maps = align_detail::prepare_images<S>(val.cmr, ids, nullptr,
                                                  cfg.seed, kValTag);
      Mat<S> z_i = model.forward_image(maps, ictx);
      auto r = clip_loss<S>(z_s, z_i, static_cast<S>(cfg.tau),
                            static_cast<S>(cfg.lambda));
      total += static_cast<double>(r.total) * static_cast<double>(ids.size());
      count += ids.size();
    }
    return total / static_cast<double>(count);
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (auto batch :
         epoch_batches(train.size(), static_cast<std::size_t>(cfg.batch_size),
                       cfg.seed, kStageAlign, static_cast<std::uint64_t>(epoch))) {
      if (batch.size() < 2) continue;
      const auto b = static_cast<Index>(batch.size());
      Mat<S> patches = align_detail::prepare_ecg_patches<S>(
          model.mae, train.ecg, batch, &cfg.ecg_augment_cfg, cfg.seed,
          static_cast<std::uint64_t>(epoch));
      MatF tab = align_detail::gather_rows(train.tabular, batch);
      if (cfg.corruption_rate > 0) {
        Rng rng(derive_seed(cfg.seed, {kStageAlign, 0xC0,
                                       static_cast<std::uint64_t>(epoch),
                                       static_cast<std::uint64_t>(step)}));
        tab = tabular_corrupt(tab, cfg.corruption_rate, pools, rng);
      }
      auto maps = align_detail::prepare_images<S>(
          train.cmr, batch, &cfg.image_augment_cfg, cfg.seed,
          static_cast<std::uint64_t>(epoch));

      typename AlignModel<S>::SignalCtx sctx;
      typename AlignModel<S>::ImageCtx ictx;
      Mat<S> z_s = model.forward_signal(patches, tab, b, sctx);
      Mat<S> z_i = model.forward_image(maps, ictx);
      auto r = clip_loss_with_grad<S>(z_s, z_i, static_cast<S>(cfg.tau),
                                      static_cast<S>(cfg.lambda));
      opt.zero_grad();
      model.backward_signal(r.grad_sig, sctx);
      model.backward_image(r.grad_img, ictx);
      double lr = cosine_lr(step, sched);
      opt.step(lr);

      if (log)
        *log << step << ',' << log_num(lr) << ',' << log_num(r.l_sig) << ','
             << log_num(r.l_img) << ',' << log_num(r.total) << '\n';
      result.step_total.push_back(r.total);
      ++step;
    }

    double metric = eval_val();
    if (!std::isnan(metric)) {
      result.epoch_val_loss.push_back(metric);
      if (val_log) *val_log << epoch << ',' << log_num(metric) << '\n';
    } else {
      metric = result.step_total.empty() ? 0.0 : result.step_total.back();
    }
    if (metric < result.best_val_loss) {
      result.best_val_loss = metric;
      snapshot(metric, epoch);
    }
  }
  return result;
}

}  // namespace cardiomm
