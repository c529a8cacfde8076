#pragma once

#include "cardiomm/core/common.hpp"
#include "cardiomm/core/error.hpp"
#include "cardiomm/nn/linear.hpp"
#include "cardiomm/preprocess/tabular.hpp"

namespace cardiomm {

/// Joint fusion by exact concatenation, ECG first. No mixing: the first
/// ecg_width columns are the ECG embedding, the rest the tabular one.
template <class S>
Mat<S> fuse_signal(const Mat<S>& ecg_emb, const Mat<S>& tab_emb,
                   Index ecg_width = 384, Index tab_width = 384) {
  check_arg(ecg_emb.cols() == ecg_width,
            "fuse_signal: ECG embedding width " + std::to_string(ecg_emb.cols()) +
                " != " + std::to_string(ecg_width));
  check_arg(tab_emb.cols() == tab_width,
            "fuse_signal: tabular embedding width " + std::to_string(tab_emb.cols()) +
                " != " + std::to_string(tab_width));
  check_arg(ecg_emb.rows() == tab_emb.rows(), "fuse_signal: batch sizes differ");
  Mat<S> fused(ecg_emb.rows(), ecg_width + tab_width);
  fused.leftCols(ecg_width) = ecg_emb;
  fused.rightCols(tab_width) = tab_emb;
  return fused;
}

/// Embeds one encoded tabular record with the F -> hidden -> out MLP.
template <class S>
Vec<S> tabular_encode(Mlp2<S>& encoder, const EncodedTabular& x) {
  check_arg(x.features.size() == encoder.l1.w.value.cols(),
            "tabular_encode: record has " + std::to_string(x.features.size()) +
                " features, encoder expects " +
                std::to_string(encoder.l1.w.value.cols()));
  typename Mlp2<S>::Ctx ctx;
  Mat<S> row = x.features.transpose().template cast<S>();
  return encoder.forward(row, ctx).row(0).transpose();
}

/// Mean pooling over per-sample token blocks: [B*N x W] -> [B x W].
template <class S>
Mat<S> mean_pool_tokens(const Mat<S>& tokens, Index batch, Index n_tokens) {
  check_arg(tokens.rows() == batch * n_tokens, "mean_pool: rows != batch * tokens");
  Mat<S> out(batch, tokens.cols());
  for (Index b = 0; b < batch; ++b)
    out.row(b) = tokens.middleRows(b * n_tokens, n_tokens).colwise().mean();
  return out;
}

template <class S>
Mat<S> mean_pool_tokens_backward(const Mat<S>& d_pooled, Index batch,
                                 Index n_tokens) {
  Mat<S> d_tokens(batch * n_tokens, d_pooled.cols());
  for (Index b = 0; b < batch; ++b)
    d_tokens.middleRows(b * n_tokens, n_tokens) =
        (d_pooled.row(b) / static_cast<S>(n_tokens)).replicate(n_tokens, 1);
  return d_tokens;
}

}  // namespace cardiomm
