// SPDX-License-Identifier: Apache-2.0
#include "ldseg/dynamic_kernel.hpp"

#include <iostream>

#include "ldseg/errors.hpp"

namespace ldseg {

// The lesion descriptor is an unnormalized sum over pixels, so its magnitude
// grows with feature resolution. The update transforms start damped so the
// initial kernels keep logits near zero; training scales them as needed.
namespace {
constexpr double kGeneratorGain = 0.2;
constexpr double kUpdateGain = 0.05;
}  // namespace

KernelGenerator::KernelGenerator(ParamStore& store, const std::string& name, int in_channels,
                                 int out_channels, int kernel_size_, Rng& rng)
    : proj(store, name + ".proj", in_channels, out_channels, 1, 1, 0, rng, kGeneratorGain),
      kernel_size(kernel_size_) {}

KernelUpdateParams::KernelUpdateParams(ParamStore& store, const std::string& name, int dim,
                                       Rng& rng)
    : phi1(store, name + ".phi1", dim, dim, rng, kUpdateGain),
      phi2(store, name + ".phi2", dim, dim, rng, kUpdateGain),
      phi3(store, name + ".phi3", dim, dim, rng, kUpdateGain),
      phi4(store, name + ".phi4", dim, dim, rng, kUpdateGain),
      phi5(store, name + ".phi5", dim, dim, rng, kUpdateGain),
      phi6(store, name + ".phi6", dim, dim, rng, kUpdateGain) {}

DynamicKernel generate_kernel(const ad::Var& e5, const KernelGenerator& gen) {
  const int h = e5->value.dim(1), w = e5->value.dim(2);
  const int k = gen.kernel_size;
  if (k > std::min(h, w)) {
    std::cerr << "[warn] kernel size " << k << " exceeds feature extent " << h << "x" << w
              << "; pooling bins will overlap\n";
  }
  auto pooled = ad::adaptive_avg_pool2d(e5, k, k);
  auto projected = gen.proj(pooled);  // C_out x K x K
  const int cout = projected->value.dim(0);
  return DynamicKernel{ad::reshape(projected, {1, cout, k, k}), 5};
}

ad::Var extract_lesion_feature(const ad::Var& d, const ad::Var& p_logits, bool upsample,
                               bool normalize) {
  if (d->value.ndim() != 3 || p_logits->value.ndim() != 3 || p_logits->value.dim(0) != 1) {
    throw ShapeError("extract_lesion_feature: expected CxHxW feature and 1xHxW prediction");
  }
  ad::Var p = upsample ? ad::upsample_nearest2x(p_logits) : p_logits;
  if (p->value.dim(1) != d->value.dim(1) || p->value.dim(2) != d->value.dim(2)) {
    throw ShapeError("extract_lesion_feature: prediction " + p->value.shape_str() +
                     " does not match feature " + d->value.shape_str());
  }
  const int c = d->value.dim(0);
  const int n = d->value.dim(1) * d->value.dim(2);
  auto prob = ad::sigmoid(p);
  auto weights = ad::reshape(prob, {n, 1});
  auto feat = ad::reshape(d, {c, n});
  auto f = ad::transpose(ad::matmul(feat, weights));  // 1 x C
  if (normalize) {
    auto mass = ad::reshape(ad::add_scalar(ad::sum_all(prob), 1e-8), {1, 1});
    f = ad::divide(f, ad::tile_cols(mass, c));
  }
  return f;
}

DynamicKernel update_kernel(const DynamicKernel& k_prev, const ad::Var& lesion,
                            const KernelUpdateParams& params, int stage) {
  const int c = k_prev.channels();
  const int k = k_prev.spatial();
  if (lesion->value.ndim() != 2 || lesion->value.dim(0) != 1 || lesion->value.dim(1) != c) {
    throw ShapeError("update_kernel: lesion descriptor " + lesion->value.shape_str() +
                     " does not match kernel channels " + std::to_string(c));
  }
  if (params.dim() != c) {
    throw ShapeError("update_kernel: transformation dim " + std::to_string(params.dim()) +
                     " does not match kernel channels " + std::to_string(c));
  }
  const int positions = k * k;

  // rows = kernel positions, cols = the C-dim feature space
  auto kp = ad::transpose(ad::reshape(k_prev.weights, {c, positions}));
  auto fb = ad::tile_rows(lesion, positions);

  auto gate_src = ad::mul(params.phi3(fb), params.phi4(kp));
  auto gate_k = ad::sigmoid(params.phi5(gate_src));
  auto gate_f = ad::sigmoid(params.phi6(gate_src));
  auto updated = ad::add(ad::mul(gate_f, params.phi1(fb)), ad::mul(gate_k, params.phi2(kp)));

  if (!updated->value.all_finite()) {
    throw NumericError("update_kernel: non-finite kernel at stage " + std::to_string(stage));
  }
  auto out = ad::reshape(ad::transpose(updated), {1, c, k, k});
  return DynamicKernel{out, stage};
}

ad::Var predict(const DynamicKernel& kernel, const ad::Var& d_unified) {
  if (d_unified->value.ndim() != 3) {
    throw ShapeError("predict: expected CxHxW feature, got " + d_unified->value.shape_str());
  }
  if (d_unified->value.dim(0) != kernel.channels()) {
    throw ShapeError("predict: feature channels " + std::to_string(d_unified->value.dim(0)) +
                     " do not match kernel channels " + std::to_string(kernel.channels()));
  }
  const int k = kernel.spatial();
  const int lo = (k - 1) / 2, hi = k / 2;
  return ad::conv2d(d_unified, kernel.weights, ad::Var{}, 1, lo, hi, lo, hi);
}

}  // namespace ldseg
