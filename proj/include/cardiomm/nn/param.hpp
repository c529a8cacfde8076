#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cardiomm/core/common.hpp"

namespace cardiomm {

/// A named tensor with its gradient accumulator. `trainable == false` marks
/// buffers (e.g. normalization statistics) that are checkpointed but never
/// touched by the optimizer. `decay == false` opts a parameter out of weight
/// decay (biases, norm gains, learned tokens).
template <class S>
struct Param {
  std::string name;
  Mat<S> value;
  Mat<S> grad;
  bool trainable = true;
  bool decay = true;

  void init_zero(Index rows, Index cols) {
    value = Mat<S>::Zero(rows, cols);
    grad = Mat<S>::Zero(rows, cols);
  }
  void zero_grad() { grad.setZero(); }
};

template <class S>
using ParamRefs = std::vector<Param<S>*>;

template <class S>
inline void zero_grads(const ParamRefs<S>& params) {
  for (auto* p : params) p->zero_grad();
}

template <class S>
inline std::size_t param_count(const ParamRefs<S>& params) {
  std::size_t n = 0;
  for (auto* p : params) n += static_cast<std::size_t>(p->value.size());
  return n;
}

}  // namespace cardiomm
