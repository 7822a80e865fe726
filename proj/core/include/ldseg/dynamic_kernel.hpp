// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "ldseg/autodiff.hpp"
#include "ldseg/nn.hpp"

namespace ldseg {

// Per-input segmentation head: a 1 x C x K x K convolution weight block.
struct DynamicKernel {
  ad::Var weights;
  int stage = 0;
  int spatial() const { return weights->value.dim(2); }
  int channels() const { return weights->value.dim(1); }
};

struct KernelGenerator {
  Conv2d proj;  // 1x1 convolution to the unified kernel dimension
  int kernel_size = 1;
  KernelGenerator() = default;
  KernelGenerator(ParamStore& store, const std::string& name, int in_channels, int out_channels,
                  int kernel_size, Rng& rng);
};

// The six linear maps of the gated update. Shared across decoder stages.
struct KernelUpdateParams {
  Linear phi1, phi2, phi3, phi4, phi5, phi6;
  KernelUpdateParams() = default;
  KernelUpdateParams(ParamStore& store, const std::string& name, int dim, Rng& rng);
  int dim() const { return phi1.in_features(); }
};

// Adaptive-average-pool the deepest encoder feature to KxK, then project to
// the kernel dimension with a 1x1 convolution. K larger than the spatial
// extent is permitted (bins overlap) but logged as a warning.
DynamicKernel generate_kernel(const ad::Var& e5, const KernelGenerator& gen);

// Prediction-weighted channel pooling: F_c = sum_hw sigmoid(P)(h,w) * D(c,h,w),
// returned as 1xC. With `upsample` the prediction is first nearest-upsampled
// by 2 to match the feature resolution (the cross-attention path uses the
// same-resolution variant). `normalize` divides by the total prediction mass.
ad::Var extract_lesion_feature(const ad::Var& d, const ad::Var& p_logits, bool upsample,
                               bool normalize = false);

// Gated blend of the previous kernel with the lesion descriptor:
//   G = phi3(F) . phi4(K),  GK = sigmoid(phi5(G)),  GF = sigmoid(phi6(G)),
//   K' = GF . phi1(F) + GK . phi2(K).
// Applied per spatial kernel position with F broadcast.
DynamicKernel update_kernel(const DynamicKernel& k_prev, const ad::Var& lesion,
                            const KernelUpdateParams& params, int stage);

// Convolves the unified decoder feature with the dynamic kernel, padding to
// preserve spatial size; 1xHxW logits.
ad::Var predict(const DynamicKernel& kernel, const ad::Var& d_unified);

}  // namespace ldseg
