// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "ldseg/autodiff.hpp"
#include "ldseg/nn.hpp"

namespace ldseg {

// Token count of the pyramid pooling: 1x1 + 3x3 + 5x5 bins.
constexpr int kPyramidTokens = 35;

// CxHxW -> 35xC token matrix. Row order: the 1x1 bin, then the 3x3 bins
// row-major, then the 5x5 bins row-major.
ad::Var pyramid_pool(const ad::Var& x);

struct AttentionProjections {
  Linear q, k, v, o;  // each C -> C
  AttentionProjections() = default;
  AttentionProjections(ParamStore& store, const std::string& name, int channels, Rng& rng);
};

// Two linear layers with expansion factor 4 and a rectifier between.
struct FeedForward {
  Linear fc1, fc2;
  FeedForward() = default;
  FeedForward(ParamStore& store, const std::string& name, int channels, Rng& rng);
  ad::Var operator()(const ad::Var& x) const;  // N x C -> N x C
};

// Shape of the per-head score matrix, for structural cost assertions.
struct MhaDebug {
  int score_rows = 0;
  int score_cols = 0;
};

// Q: NxC queries, K/V: SxC keys and values. Per-head projections, scaled
// dot-product softmax attention, concatenation, output projection.
ad::Var multi_head_attention(const ad::Var& q, const ad::Var& k, const ad::Var& v,
                             const AttentionProjections& proj, int heads,
                             MhaDebug* dbg = nullptr);

// Efficient self-attention block: queries are all pixels, keys/values are the
// 35 pyramid-pooled tokens. Residual around the attention and around the
// feed-forward.
class EsaBlock {
 public:
  EsaBlock(ParamStore& store, const std::string& name, int channels, int heads, Rng& rng);
  ad::Var operator()(const ad::Var& e, MhaDebug* dbg = nullptr) const;  // CxHxW -> CxHxW
  int channels() const { return channels_; }

 private:
  AttentionProjections proj_;
  FeedForward ff_;
  int channels_ = 0;
  int heads_ = 1;
};

// Lesion-aware cross-attention: a single lesion descriptor token serves as
// key and value. With one key, softmax normalization is degenerate (weight
// identically 1), so the default gate is a sigmoid of the scaled query-key
// similarity; the literal softmax mode is kept behind `softmax_mode`.
class LcaBlock {
 public:
  LcaBlock(ParamStore& store, const std::string& name, int channels, int heads, bool softmax_mode,
           Rng& rng);
  // d: CxHxW decoder feature, p_logits: 1xHxW prediction at the same resolution.
  ad::Var operator()(const ad::Var& d, const ad::Var& p_logits, bool lesion_norm = false) const;
  int channels() const { return channels_; }

 private:
  AttentionProjections proj_;
  FeedForward ff_;
  int channels_ = 0;
  int heads_ = 1;
  bool softmax_mode_ = false;
};

}  // namespace ldseg
