#pragma once

#include <vector>

#include "cardiomm/cohort/types.hpp"
#include "cardiomm/core/common.hpp"
#include "cardiomm/core/error.hpp"
#include "cardiomm/nn/conv.hpp"

namespace cardiomm {

/// Maps the three cardiac phases onto the three input channels of the
/// residual backbone.
template <class S>
FeatureMaps<S> stacks_to_feature_maps(
    const std::vector<const CmrPhaseStack*>& stacks) {
  check_arg(!stacks.empty(), "image batch: empty");
  const Index h = stacks.front()->height, w = stacks.front()->width;
  FeatureMaps<S> maps;
  maps.batch = static_cast<Index>(stacks.size());
  maps.channels = 3;
  maps.height = h;
  maps.width = w;
  maps.data.resize(maps.batch * 3, h * w);
  for (Index b = 0; b < maps.batch; ++b) {
    const auto* s = stacks[static_cast<std::size_t>(b)];
    check_arg(s->phases.rows() == 3, "image batch: stacks must hold 3 phases");
    check_arg(s->height == h && s->width == w, "image batch: mixed image sizes");
    maps.data.middleRows(b * 3, 3) = s->phases.template cast<S>();
  }
  return maps;
}

/// Embeds one phase stack with the backbone (evaluation path).
template <class S>
Vec<S> image_encode(ConvBackbone<S>& backbone, const CmrPhaseStack& img) {
  validate(img);
  typename ConvBackbone<S>::Ctx ctx;
  Mat<S> out = backbone.forward(stacks_to_feature_maps<S>({&img}), ctx);
  return out.row(0).transpose();
}

}  // namespace cardiomm
