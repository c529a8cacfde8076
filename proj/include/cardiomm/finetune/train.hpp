#pragma once

#include <cmath>
#include <ostream>
#include <vector>

#include "cardiomm/align/fusion.hpp"
#include "cardiomm/engine/checkpoint.hpp"
#include "cardiomm/engine/optimizer.hpp"
#include "cardiomm/engine/schedule.hpp"
#include "cardiomm/engine/train_util.hpp"
#include "cardiomm/finetune/cross_entropy.hpp"
#include "cardiomm/finetune/metrics.hpp"
#include "cardiomm/mae/model.hpp"
#include "cardiomm/nn/attention.hpp"

namespace cardiomm {

struct FinetuneTrainConfig {
  MaeConfig mae_model;
  Index tabular_features = 33;
  Index tabular_hidden = 384;
  Index pool_heads = 6;
  int epochs = 400;
  int batch_size = 64;
  double base_lr = 1e-5;
  double min_lr = 0.0;
  double weight_decay = 1e-4;
  double warmup_frac = 0.05;
  std::string task = kTaskMi;
  std::uint64_t seed = 0;
  std::string config_hash = "unhashed";
};

/// Stage-4 model: pretrained ECG + tabular encoders, attention pooling over
/// the ECG tokens in place of the mean pool, and a single affine head on the
/// fused embedding.
template <class S>
struct FinetuneModel {
  MaeModel<S> mae;       // encoder path only
  Mlp2<S> tab_encoder;   // F -> hidden -> 384
  AttentionPool<S> pool; // 384 -> 384
  Linear<S> classifier;  // 768 -> 2
  Index ecg_width = 384, tab_width = 384;

  void init(const FinetuneTrainConfig& cfg, Rng& rng) {
    mae.init(cfg.mae_model, rng);
    ecg_width = cfg.mae_model.width;
    tab_encoder.init("tab_encoder", cfg.tabular_features, cfg.tabular_hidden,
                     tab_width, rng);
    pool.init("attn_pool", ecg_width, cfg.pool_heads, rng);
    classifier.init("classifier", ecg_width + tab_width, 2, rng);
  }

  struct Ctx {
    typename MaeModel<S>::EncodeCtx enc;
    typename AttentionPool<S>::Ctx pool;
    typename Mlp2<S>::Ctx tab;
    typename Linear<S>::Ctx cls;
    Index batch = 0;
  };

  Mat<S> forward(const Mat<S>& patches, const Mat<S>& tab, Index batch, Ctx& ctx) {
    ctx.batch = batch;
    Mat<S> tokens = mae.encode_tokens(patches, batch, ctx.enc);
    Mat<S> pooled = pool.forward(tokens, batch, mae.cfg.n_patches(), ctx.pool);
    Mat<S> tab_emb = tab_encoder.forward(tab, ctx.tab);
    Mat<S> fused = fuse_signal(pooled, tab_emb, ecg_width, tab_width);
    return classifier.forward(fused, ctx.cls);
  }

  void backward(const Mat<S>& d_logits, Ctx& ctx) {
    Mat<S> d_fused = classifier.backward(d_logits, ctx.cls);
    Mat<S> d_pooled = d_fused.leftCols(ecg_width);
    Mat<S> d_tab = d_fused.rightCols(tab_width);
    tab_encoder.backward(d_tab, ctx.tab);
    Mat<S> d_tokens = pool.backward(d_pooled, ctx.pool);
    mae.encode_tokens_backward(d_tokens, ctx.enc);
  }

  void collect(ParamRefs<S>& out) {
    mae.collect_encoder(out);
    tab_encoder.collect(out);
    pool.collect(out);
    classifier.collect(out);
  }
};

/// Labeled samples for supervised stages: filtered ECGs, encoded tabular
/// rows and binary labels in matching order.
struct LabeledDataView {
  std::vector<const EcgRecord*> ecg;
  MatF tabular;
  std::vector<int> labels;

  std::size_t size() const { return ecg.size(); }
};

enum class FinetuneInit { scratch, from_mae, from_align };

struct FinetuneTrainResult {
  Checkpoint best;
  std::vector<double> step_loss;
  std::vector<double> epoch_val_bal_acc;
  std::vector<double> epoch_val_auc;
  double best_val_bal_acc = 0.0;
  double best_val_auc = 0.0;
};

namespace finetune_detail {

template <class S>
Mat<S> patches_for(const MaeModel<S>& mae,
                   const std::vector<const EcgRecord*>& records,
                   const std::vector<std::size_t>& ids) {
  const Index n = mae.cfg.n_patches(), d = mae.cfg.patch_dim();
  Mat<S> patches(static_cast<Index>(ids.size()) * n, d);
  for (std::size_t k = 0; k < ids.size(); ++k) {
    Mat<S> norm = mae.normalize(records[ids[k]]->samples.template cast<S>());
    patches.middleRows(static_cast<Index>(k) * n, n) =
        patchify(norm, mae.cfg.patch).patches;
  }
  return patches;
}

template <class S>
std::vector<double> positive_scores(FinetuneModel<S>& model,
                                    const LabeledDataView& data,
                                    std::size_t batch_size) {
  std::vector<double> scores;
  scores.reserve(data.size());
  typename FinetuneModel<S>::Ctx ctx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    std::size_t end = std::min(data.size(), start + batch_size);
    std::vector<std::size_t> ids(end - start);
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = start + i;
    Mat<S> patches = patches_for(model.mae, data.ecg, ids);
    MatF tab(static_cast<Index>(ids.size()), data.tabular.cols());
    for (std::size_t k = 0; k < ids.size(); ++k)
      tab.row(static_cast<Index>(k)) = data.tabular.row(static_cast<Index>(ids[k]));
    Mat<S> logits =
        model.forward(patches, tab, static_cast<Index>(ids.size()), ctx);
    for (Index i = 0; i < logits.rows(); ++i) {
      double m = std::max(logits(i, 0), logits(i, 1));
      double e0 = std::exp(logits(i, 0) - m), e1 = std::exp(logits(i, 1) - m);
      scores.push_back(e1 / (e0 + e1));
    }
  }
  return scores;
}

}  // namespace finetune_detail

/// Evaluates a fitted model on a labeled slice: scores are the softmax
/// positive-class probabilities, predictions threshold at 0.5.
template <class S>
MetricsReport evaluate_model(FinetuneModel<S>& model, const LabeledDataView& data,
                             const std::string& task, const std::string& split,
                             std::uint64_t seed, const std::string& checkpoint_id,
                             std::vector<double>* scores_out = nullptr) {
  check_arg(data.size() > 0, "evaluate: empty dataset");
  auto scores = finetune_detail::positive_scores(model, data, 64);
  std::vector<int> preds(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) preds[i] = scores[i] > 0.5 ? 1 : 0;
  MetricsReport report;
  report.auc = roc_auc(scores, data.labels);
  report.counts = confusion_counts(preds, data.labels);
  report.balanced_acc = balanced_accuracy_from_counts(report.counts);
  report.task = task;
  report.split = split;
  report.seed = seed;
  report.checkpoint_id = checkpoint_id;
  if (scores_out) *scores_out = std::move(scores);
  return report;
}

/// Stage 4: supervised fine-tuning on a balanced subset with cross-entropy.
/// Model selection is on validation balanced accuracy with AUC as the tie
/// break. The training set must hold exactly as many positives as negatives.
inline FinetuneTrainResult train_finetune(const LabeledDataView& train,
                                          const LabeledDataView& val,
                                          FinetuneInit init,
                                          const Checkpoint* upstream,
                                          const FinetuneTrainConfig& cfg,
                                          std::ostream* log = nullptr,
                                          std::ostream* val_log = nullptr) {
  check_arg(train.size() >= 2, "train_finetune: need at least 2 samples");
  check_arg(train.ecg.size() == train.labels.size() &&
                static_cast<Index>(train.ecg.size()) == train.tabular.rows(),
            "train_finetune: data lists disagree in length");
  std::size_t pos = 0;
  for (int y : train.labels) {
    check_arg(y == 0 || y == 1, "train_finetune: labels must be 0 or 1");
    pos += static_cast<std::size_t>(y);
  }
  check_arg(2 * pos == train.size(),
            "train_finetune: balanced subset required (got " +
                std::to_string(pos) + " positives in " +
                std::to_string(train.size()) + " samples)");
  check_arg((init == FinetuneInit::scratch) == (upstream == nullptr),
            "train_finetune: upstream checkpoint must match the init mode");

  using S = float;
  Rng init_rng(derive_seed(cfg.seed, {kStageFinetune, 0x11}));
  FinetuneModel<S> model;
  model.init(cfg, init_rng);

  if (init == FinetuneInit::from_align) {
    ParamRefs<S> refs;
    model.mae.collect_encoder(refs);
    model.tab_encoder.collect(refs);
    upstream->apply(refs);
  } else if (init == FinetuneInit::from_mae) {
    ParamRefs<S> refs;
    model.mae.collect_encoder(refs);
    upstream->apply(refs);
  }

  ParamRefs<S> params;
  model.collect(params);
  AdamW<S> opt(params, {0.9, 0.999, 1e-8, cfg.weight_decay});

  const auto steps_per_epoch = static_cast<std::int64_t>(
      (train.size() + cfg.batch_size - 1) / static_cast<std::size_t>(cfg.batch_size));
  const std::int64_t total_steps = steps_per_epoch * cfg.epochs;
  ScheduleSpec sched{cfg.base_lr, cfg.min_lr,
                     std::min(static_cast<std::int64_t>(cfg.warmup_frac * total_steps),
                              total_steps - 1),
                     total_steps};

  if (log) *log << "step,lr,loss\n";
  if (val_log) *val_log << "epoch,val_balanced_accuracy,val_auc\n";

  FinetuneTrainResult result;
  std::int64_t step = 0;
  bool have_best = false;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (auto batch :
         epoch_batches(train.size(), static_cast<std::size_t>(cfg.batch_size),
                       cfg.seed, kStageFinetune, static_cast<std::uint64_t>(epoch))) {
      Mat<S> patches = finetune_detail::patches_for(model.mae, train.ecg, batch);
      MatF tab(static_cast<Index>(batch.size()), train.tabular.cols());
      std::vector<int> labels(batch.size());
      for (std::size_t k = 0; k < batch.size(); ++k) {
        tab.row(static_cast<Index>(k)) =
            train.tabular.row(static_cast<Index>(batch[k]));
        labels[k] = train.labels[batch[k]];
      }
      typename FinetuneModel<S>::Ctx ctx;
      Mat<S> logits = model.forward(patches, tab, static_cast<Index>(batch.size()), ctx);
      S loss = cross_entropy(logits, labels);
      Mat<S> d_logits = cross_entropy_grad(logits, labels);
      opt.zero_grad();
      model.backward(d_logits, ctx);
      double lr = cosine_lr(step, sched);
      opt.step(lr);

      if (log) *log << step << ',' << log_num(lr) << ',' << log_num(loss) << '\n';
      result.step_loss.push_back(loss);
      ++step;
    }

    if (!val.size()) continue;
    auto scores = finetune_detail::positive_scores(model, val, 64);
    std::vector<int> preds(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
      preds[i] = scores[i] > 0.5 ? 1 : 0;
    double bal_acc = balanced_accuracy(preds, val.labels);
    double auc = roc_auc(scores, val.labels);
    result.epoch_val_bal_acc.push_back(bal_acc);
    result.epoch_val_auc.push_back(auc);
    if (val_log)
      *val_log << epoch << ',' << log_num(bal_acc) << ',' << log_num(auc) << '\n';

    if (!have_best || bal_acc > result.best_val_bal_acc ||
        (bal_acc == result.best_val_bal_acc && auc > result.best_val_auc)) {
      have_best = true;
      result.best_val_bal_acc = bal_acc;
      result.best_val_auc = auc;
      result.best = Checkpoint::from_params(params, "signal_classifier",
                                            "finetune", cfg.config_hash);
      result.best.best_metric = {{"val_balanced_accuracy", bal_acc},
                                 {"val_auc", auc},
                                 {"epoch", epoch}};
    }
  }
  if (!have_best)
    result.best = Checkpoint::from_params(params, "signal_classifier",
                                          "finetune", cfg.config_hash);
  return result;
}

}  // namespace cardiomm
