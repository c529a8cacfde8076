#pragma once

#include <iostream>
#include <ostream>
#include <vector>

#include "cardiomm/augment/ecg_augment.hpp"
#include "cardiomm/cohort/types.hpp"
#include "cardiomm/engine/checkpoint.hpp"
#include "cardiomm/engine/optimizer.hpp"
#include "cardiomm/engine/schedule.hpp"
#include "cardiomm/engine/train_util.hpp"
#include "cardiomm/mae/loss.hpp"
#include "cardiomm/mae/model.hpp"

namespace cardiomm {

struct MaeTrainConfig {
  MaeConfig model;
  EcgAugmentConfig augment;
  int epochs = 400;
  int batch_size = 128;
  double base_lr = 1e-5;
  double min_lr = 0.0;
  double weight_decay = 0.15;
  double warmup_frac = 0.1;
  double mask_ratio = 0.8;
  double lambda = 0.1;
  bool loss_on_all_patches = false;
  bool normalize_targets = false;  // per-patch standardization of targets
  std::int64_t max_steps = -1;     // stop early after this many steps (< 0: off)
  std::uint64_t seed = 0;
  std::string config_hash = "unhashed";
};

struct MaeTrainResult {
  Checkpoint best;
  std::vector<double> step_loss;
  std::vector<double> epoch_train_loss;
  std::vector<double> epoch_val_loss;  // empty when no validation set given
  double best_val_loss = 0.0;
};

/// Pooled per-lead mean/std over a set of records.
inline std::pair<VecF, VecF> ecg_lead_statistics(
    const std::vector<const EcgRecord*>& records) {
  check_arg(!records.empty(), "lead statistics: empty dataset");
  const Index leads = records.front()->samples.rows();
  VecD sum = VecD::Zero(leads), sq = VecD::Zero(leads);
  double count = 0;
  for (const auto* r : records) {
    check_arg(r->samples.rows() == leads, "lead statistics: lead count varies");
    sum += r->samples.rowwise().sum().cast<double>();
    sq += r->samples.cwiseProduct(r->samples).rowwise().sum().cast<double>();
    count += static_cast<double>(r->samples.cols());
  }
  VecF mean(leads), stddev(leads);
  for (Index l = 0; l < leads; ++l) {
    double mu = sum[l] / count;
    double var = std::max(0.0, sq[l] / count - mu * mu);
    mean[l] = static_cast<float>(mu);
    stddev[l] = static_cast<float>(std::sqrt(var));
  }
  return {mean, stddev};
}

namespace mae_detail {

/// Normalize, patchify and mask one record; `aug` may be null to skip
/// augmentation (validation path).
template <class S>
void prepare_sample(const MaeModel<S>& model, const EcgRecord& record,
                    const EcgAugmentConfig* aug, double mask_ratio,
                    Rng& aug_rng, Rng& mask_rng, Mat<S>* patches,
                    PatchMask* mask) {
  const EcgRecord* src = &record;
  EcgRecord augmented;
  if (aug) {
    augmented = ecg_augment(record, *aug, aug_rng);
    src = &augmented;
  }
  Mat<S> norm = model.normalize(src->samples.template cast<S>());
  *patches = patchify(norm, model.cfg.patch).patches;
  *mask = random_mask(model.cfg.n_patches(), mask_ratio, mask_rng);
}

template <class S>
void standardize_rows(Mat<S>& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    S mean = m.row(i).mean();
    S sd = std::sqrt((m.row(i).array() - mean).square().mean());
    m.row(i) = (m.row(i).array() - mean) / (sd + S(1e-8));
  }
}

/// Mean loss over a prepared batch; fills `d_pred` (scaled for the batch
/// mean) when non-null.
template <class S>
MaeLossResult<S> batch_loss(const Mat<S>& pred,
                            const std::vector<Mat<S>>& targets,
                            const std::vector<PatchMask>& masks,
                            const MaeTrainConfig& cfg, Mat<S>* d_pred) {
  const Index n = targets.front().rows();
  const auto b = static_cast<Index>(targets.size());
  std::vector<Index> all(static_cast<std::size_t>(n));
  for (Index p = 0; p < n; ++p) all[static_cast<std::size_t>(p)] = p;
  MaeLossResult<S> sum{0, 0, 0};
  if (d_pred) d_pred->setZero(pred.rows(), pred.cols());
  for (Index bi = 0; bi < b; ++bi) {
    Mat<S> target = targets[static_cast<std::size_t>(bi)];
    if (cfg.normalize_targets) standardize_rows(target);
    const auto& scored =
        cfg.loss_on_all_patches ? all : masks[static_cast<std::size_t>(bi)].masked;
    Mat<S> grad;
    auto r = mae_loss<S>(pred.middleRows(bi * n, n), target, scored,
                         static_cast<S>(cfg.lambda), d_pred ? &grad : nullptr);
    if (d_pred) d_pred->middleRows(bi * n, n) = grad / static_cast<S>(b);
    sum.total += r.total / static_cast<S>(b);
    sum.mse += r.mse / static_cast<S>(b);
    sum.ncc += r.ncc / static_cast<S>(b);
  }
  return sum;
}

}  // namespace mae_detail

/// Stage 1: masked-autoencoder pretraining of the ECG encoder. Returns the
/// checkpoint with the best validation loss (train loss when no validation
/// records are given).
inline MaeTrainResult train_mae(const std::vector<const EcgRecord*>& train,
                                const std::vector<const EcgRecord*>& val,
                                const MaeTrainConfig& cfg,
                                std::ostream* log = nullptr,
                                std::ostream* val_log = nullptr) {
  check_arg(!train.empty(), "train_mae: empty dataset");
  check_arg(cfg.epochs >= 1 && cfg.batch_size >= 1, "train_mae: bad epochs/batch");
  check_arg(cfg.mask_ratio > 0.0 && cfg.mask_ratio < 1.0,
            "train_mae: mask ratio must lie in (0,1)");

  using S = float;
  Rng init_rng(derive_seed(cfg.seed, {kStageMae, 0x11}));
  MaeModel<S> model;
  model.init(cfg.model, init_rng);
  auto [mean, stddev] = ecg_lead_statistics(train);
  model.set_normalization(mean, stddev);

  ParamRefs<S> params;
  model.collect(params);
  AdamW<S> opt(params, {0.9, 0.999, 1e-8, cfg.weight_decay});

  const auto steps_per_epoch = static_cast<std::int64_t>(
      (train.size() + cfg.batch_size - 1) / static_cast<std::size_t>(cfg.batch_size));
  std::int64_t total_steps = steps_per_epoch * cfg.epochs;
  if (cfg.max_steps > 0) total_steps = std::min(total_steps, cfg.max_steps);
  ScheduleSpec sched{cfg.base_lr, cfg.min_lr,
                     std::min(static_cast<std::int64_t>(cfg.warmup_frac * total_steps),
                              total_steps - 1),
                     total_steps};

  if (log) *log << "step,lr,loss,mse,ncc\n";
  if (val_log) *val_log << "epoch,val_loss\n";

  MaeTrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  std::int64_t step = 0;
  bool done = false;

  auto eval_val = [&]() {
    if (val.empty()) return std::numeric_limits<double>::quiet_NaN();
    double total = 0;
    typename MaeModel<S>::ReconCtx ctx;
    const std::size_t vb = 32;
    for (std::size_t start = 0; start < val.size(); start += vb) {
      std::size_t end = std::min(val.size(), start + vb);
      std::vector<Mat<S>> patches(end - start);
      std::vector<PatchMask> masks(end - start);
      for (std::size_t i = start; i < end; ++i) {
        Rng mask_rng(derive_seed(cfg.seed, {kStageMae, kValTag, i}));
        Rng unused(0);
        mae_detail::prepare_sample(model, *val[i], nullptr, cfg.mask_ratio,
                                   unused, mask_rng, &patches[i - start],
                                   &masks[i - start]);
      }
      Mat<S> pred = model.reconstruct_patches(patches, masks, ctx);
      auto r = mae_detail::batch_loss<S>(pred, patches, masks, cfg, nullptr);
      total += static_cast<double>(r.total) * static_cast<double>(end - start);
    }
    return total / static_cast<double>(val.size());
  };

  for (int epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
    double epoch_loss = 0;
    std::int64_t epoch_steps = 0;
    for (const auto& batch :
         epoch_batches(train.size(), static_cast<std::size_t>(cfg.batch_size),
                       cfg.seed, kStageMae, static_cast<std::uint64_t>(epoch))) {
      std::vector<Mat<S>> patches(batch.size());
      std::vector<PatchMask> masks(batch.size());
      for (std::size_t k = 0; k < batch.size(); ++k) {
        Rng aug_rng(derive_seed(cfg.seed, {kStageMae, 0xA0,
                                           static_cast<std::uint64_t>(epoch),
                                           batch[k]}));
        Rng mask_rng(derive_seed(cfg.seed, {kStageMae, 0xB0,
                                            static_cast<std::uint64_t>(epoch),
                                            batch[k]}));
        mae_detail::prepare_sample(model, *train[batch[k]], &cfg.augment,
                                   cfg.mask_ratio, aug_rng, mask_rng,
                                   &patches[k], &masks[k]);
      }
      typename MaeModel<S>::ReconCtx ctx;
      Mat<S> pred = model.reconstruct_patches(patches, masks, ctx);
      Mat<S> d_pred;
      auto r = mae_detail::batch_loss<S>(pred, patches, masks, cfg, &d_pred);
      opt.zero_grad();
      model.reconstruct_backward(d_pred, ctx);
      double lr = cosine_lr(step, sched);
      opt.step(lr);

      if (log)
        *log << step << ',' << log_num(lr) << ',' << log_num(r.total) << ','
             << log_num(r.mse) << ',' << log_num(1.0 - r.ncc) << '\n';
      result.step_loss.push_back(r.total);
      epoch_loss += r.total;
      ++epoch_steps;
      if (++step >= total_steps) {
        done = true;
        break;
      }
    }
    result.epoch_train_loss.push_back(epoch_loss / static_cast<double>(epoch_steps));

    double metric;
    if (!val.empty()) {
      metric = eval_val();
      result.epoch_val_loss.push_back(metric);
      if (val_log) *val_log << epoch << ',' << log_num(metric) << '\n';
    } else {
      metric = result.epoch_train_loss.back();
    }
    if (metric < result.best_val_loss) {
      result.best_val_loss = metric;
      result.best = Checkpoint::from_params(params, "mae_vit", "pretrain-ecg",
                                            cfg.config_hash);
      result.best.best_metric = {{"val_loss", metric}, {"epoch", epoch}};
    }
  }
  return result;
}

}  // namespace cardiomm
