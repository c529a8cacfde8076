#pragma once

#include <ostream>
#include <vector>

#include "cardiomm/augment/image_augment.hpp"
#include "cardiomm/cohort/types.hpp"
#include "cardiomm/engine/checkpoint.hpp"
#include "cardiomm/engine/optimizer.hpp"
#include "cardiomm/engine/schedule.hpp"
#include "cardiomm/engine/train_util.hpp"
#include "cardiomm/image_ssl/encoder.hpp"
#include "cardiomm/image_ssl/ntxent.hpp"
#include "cardiomm/nn/linear.hpp"

namespace cardiomm {

struct SimclrTrainConfig {
  ConvBackboneConfig backbone = small_backbone_config();
  Index head_hidden = 128;  // paper preset: 2048
  Index head_out = 128;     // paper preset: 2048
  ImageAugmentConfig augment;
  int epochs = 500;
  int batch_size = 512;
  double base_lr = 1e-4;
  double min_lr = 0.0;
  double weight_decay = 1e-4;
  int warmup_epochs = 10;  // absolute, not a fraction
  double tau = 0.1;
  std::uint64_t seed = 0;
  std::string config_hash = "unhashed";
};

/// Backbone plus the pretraining-only projection head. The head is stored in
/// checkpoints but flagged so downstream consumers drop it.
template <class S>
struct SimclrModel {
  ConvBackbone<S> backbone;
  Mlp2<S> head;

  void init(const SimclrTrainConfig& cfg, Rng& rng) {
    backbone.init("image_backbone", cfg.backbone, rng);
    head.init("simclr_head", cfg.backbone.output_dim(), cfg.head_hidden,
              cfg.head_out, rng);
  }
  void collect(ParamRefs<S>& out) {
    backbone.collect(out);
    head.collect(out);
  }
};

struct SimclrTrainResult {
  Checkpoint best;
  std::vector<double> step_loss;
  std::vector<double> epoch_train_loss;
  std::vector<double> epoch_val_loss;
  double best_val_loss = 0.0;
};

namespace simclr_detail {

/// Two augmented views per sample, laid out [view A of all; view B of all]
/// to match the nt_xent pairing convention.
template <class S>
FeatureMaps<S> make_views(const std::vector<const CmrPhaseStack*>& stacks,
                          const std::vector<std::size_t>& ids,
                          const ImageAugmentConfig& aug, std::uint64_t seed,
                          std::uint64_t stage, std::uint64_t epoch) {
  std::vector<CmrPhaseStack> views(2 * ids.size());
  for (std::size_t k = 0; k < ids.size(); ++k)
    for (std::uint64_t v = 0; v < 2; ++v) {
      Rng rng(derive_seed(seed, {stage, 0xA0 + v, epoch, ids[k]}));
      views[k + v * ids.size()] = image_augment(*stacks[ids[k]], aug, rng);
    }
  std::vector<const CmrPhaseStack*> ptrs(views.size());
  for (std::size_t i = 0; i < views.size(); ++i) ptrs[i] = &views[i];
  return stacks_to_feature_maps<S>(ptrs);
}

}  // namespace simclr_detail

/// Stage 2: contrastive pretraining of the image encoder. Two independent
/// augmented views per image per step, NT-Xent over the projections.
inline SimclrTrainResult train_simclr(
    const std::vector<const CmrPhaseStack*>& train,
    const std::vector<const CmrPhaseStack*>& val, const SimclrTrainConfig& cfg,
    std::ostream* log = nullptr, std::ostream* val_log = nullptr) {
  check_arg(!train.empty(), "train_simclr: empty dataset");
  check_arg(cfg.batch_size >= 2, "train_simclr: batch size must be >= 2 for negatives");
  check_arg(cfg.epochs >= 1, "train_simclr: epochs must be >= 1");

  using S = float;
  Rng init_rng(derive_seed(cfg.seed, {kStageImage, 0x11}));
  SimclrModel<S> model;
  model.init(cfg, init_rng);
  ParamRefs<S> params;
  model.collect(params);
  AdamW<S> opt(params, {0.9, 0.999, 1e-8, cfg.weight_decay});

  const auto steps_per_epoch = static_cast<std::int64_t>(
      (train.size() + cfg.batch_size - 1) / static_cast<std::size_t>(cfg.batch_size));
  const std::int64_t total_steps = cfg.epochs * steps_per_epoch;
  ScheduleSpec sched{cfg.base_lr, cfg.min_lr,
                     std::min(cfg.warmup_epochs * steps_per_epoch, total_steps - 1),
                     total_steps};

  if (log) *log << "step,lr,loss\n";
  if (val_log) *val_log << "epoch,val_loss\n";

  SimclrTrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  std::int64_t step = 0;

  auto eval_val = [&]() {
    if (val.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    double total = 0;
    std::size_t count = 0;
    const std::size_t vb = static_cast<std::size_t>(cfg.batch_size);
    typename ConvBackbone<S>::Ctx bctx;
    typename Mlp2<S>::Ctx hctx;
    for (std::size_t start = 0; start + 2 <= val.size(); start += vb) {
      std::size_t end = std::min(val.size(), start + vb);
      std::vector<std::size_t> ids(end - start);
      for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = start + i;
      auto maps = simclr_detail::make_views<S>(val, ids, cfg.augment, cfg.seed,
                                               kStageImage, kValTag);
      Mat<S> z = model.head.forward(model.backbone.forward(maps, bctx), hctx);
      total += static_cast<double>(nt_xent<S>(z, static_cast<S>(cfg.tau))) *
               static_cast<double>(ids.size());
      count += ids.size();
    }
    return total / static_cast<double>(count);
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0;
    std::int64_t epoch_steps = 0;
    for (auto batch :
         epoch_batches(train.size(), static_cast<std::size_t>(cfg.batch_size),
                       cfg.seed, kStageImage, static_cast<std::uint64_t>(epoch))) {
      if (batch.size() < 2) continue;  // a lone trailing sample has no negatives
      auto maps = simclr_detail::make_views<S>(
          train, batch, cfg.augment, cfg.seed, kStageImage,
          static_cast<std::uint64_t>(epoch));
      typename ConvBackbone<S>::Ctx bctx;
      typename Mlp2<S>::Ctx hctx;
      Mat<S> h = model.backbone.forward(maps, bctx);
      Mat<S> z = model.head.forward(h, hctx);
      auto res = nt_xent_with_grad<S>(z, static_cast<S>(cfg.tau));
      opt.zero_grad();
      Mat<S> dh = model.head.backward(res.grad, hctx);
      model.backbone.backward(dh, bctx);
      double lr = cosine_lr(step, sched);
      opt.step(lr);

      if (log) *log << step << ',' << log_num(lr) << ',' << log_num(res.loss) << '\n';
      result.step_loss.push_back(res.loss);
      epoch_loss += res.loss;
      ++epoch_steps;
      ++step;
    }
    result.epoch_train_loss.push_back(epoch_loss / static_cast<double>(epoch_steps));

    double metric = !val.empty() && val.size() >= 2 ? eval_val()
                                                    : result.epoch_train_loss.back();
    if (!val.empty() && val.size() >= 2) {
      result.epoch_val_loss.push_back(metric);
      if (val_log) *val_log << epoch << ',' << log_num(metric) << '\n';
    }
    if (metric < result.best_val_loss) {
      result.best_val_loss = metric;
      result.best = Checkpoint::from_params(params, "image_resnet",
                                            "pretrain-image", cfg.config_hash);
      result.best.best_metric = {{"val_loss", metric}, {"epoch", epoch}};
    }
  }
  return result;
}

}  // namespace cardiomm
