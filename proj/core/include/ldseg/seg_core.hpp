// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <map>
#include <optional>

#include "ldseg/attention.hpp"
#include "ldseg/autodiff.hpp"
#include "ldseg/config.hpp"
#include "ldseg/dynamic_kernel.hpp"
#include "ldseg/nn.hpp"

namespace ldseg {

enum class FeatureKind { encoder, decoder, unified };

// A CxHxW activation grid with stage metadata.
struct FeatureMap {
  ad::Var values;
  int stage = 0;
  FeatureKind kind = FeatureKind::encoder;

  int channels() const { return values->value.dim(0); }
  int height() const { return values->value.dim(1); }
  int width() const { return values->value.dim(2); }
};

// 1xHxW logits and their sigmoid probability view.
struct PredictionMap {
  ad::Var logits;
  int stage = 0;

  int height() const { return logits->value.dim(1); }
  int width() const { return logits->value.dim(2); }
  Tensor probabilities() const;
};

struct ForwardTrace {
  std::array<PredictionMap, 5> predictions;      // [i-1] holds P_i
  std::array<ad::Var, 5> kernels;                // [i-1] holds K_i; null without DK
  std::array<FeatureMap, 5> encoder_features;    // post-ESA where applied
  std::array<FeatureMap, 5> decoder_features;    // post-LCA where applied
  std::array<FeatureMap, 5> unified_features;

  const PredictionMap& final_prediction() const { return predictions[0]; }
};

// Five-stage encoder-decoder with dynamic segmentation head, pyramid-pooled
// self-attention on skip features and lesion-aware cross-attention on
// decoder features. All components are optional via the ablation switches.
class LdnetModel {
 public:
  explicit LdnetModel(const ModelConfig& cfg);

  // image: 3xHxW, values in [0,1], spatial size equal to config input_size.
  std::array<FeatureMap, 5> encode(const Tensor& image) const;
  FeatureMap unify(const FeatureMap& d) const;
  FeatureMap decode_stage(const FeatureMap& d_next, const FeatureMap& skip) const;
  ForwardTrace forward(const Tensor& image) const;

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const ModelConfig& config() const { return cfg_; }

 private:
  struct DoubleConv {
    Conv2d conv1, conv2;
    GroupNorm norm1, norm2;
    DoubleConv() = default;
    DoubleConv(ParamStore& store, const std::string& name, int in, int out, int second_stride,
               Rng& rng);
    ad::Var operator()(const ad::Var& x) const;
  };

  ModelConfig cfg_;
  ParamStore params_;
  std::array<DoubleConv, 5> encoder_;
  DoubleConv bridge_;
  std::array<DoubleConv, 4> decoder_;  // [i-1] produces D_i for i = 1..4
  std::array<Conv2d, 5> unify_;
  std::optional<KernelGenerator> dk_generator_;
  std::optional<KernelUpdateParams> dk_update_;
  std::optional<Conv2d> static_head_;
  std::map<int, EsaBlock> esa_;
  std::map<int, LcaBlock> lca_;
};

// Largest of {8,4,2,1} dividing the channel count.
int norm_groups(int channels);

}  // namespace ldseg
