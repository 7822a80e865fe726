// SPDX-License-Identifier: Apache-2.0
#include "ldseg/attention.hpp"

#include <cmath>

#include "ldseg/dynamic_kernel.hpp"
#include "ldseg/errors.hpp"

namespace ldseg {

ad::Var pyramid_pool(const ad::Var& x) {
  if (x->value.ndim() != 3) {
    throw ShapeError("pyramid_pool: expected CxHxW, got " + x->value.shape_str());
  }
  const int c = x->value.dim(0);
  std::vector<ad::Var> levels;
  for (int bins : {1, 3, 5}) {
    auto pooled = ad::adaptive_avg_pool2d(x, bins, bins);
    levels.push_back(ad::transpose(ad::reshape(pooled, {c, bins * bins})));
  }
  return ad::concat0(levels);  // 35 x C
}

AttentionProjections::AttentionProjections(ParamStore& store, const std::string& name,
                                           int channels, Rng& rng)
    : q(store, name + ".q", channels, channels, rng),
      k(store, name + ".k", channels, channels, rng),
      v(store, name + ".v", channels, channels, rng),
      o(store, name + ".o", channels, channels, rng) {}

FeedForward::FeedForward(ParamStore& store, const std::string& name, int channels, Rng& rng)
    : fc1(store, name + ".fc1", channels, 4 * channels, rng),
      fc2(store, name + ".fc2", 4 * channels, channels, rng) {}

ad::Var FeedForward::operator()(const ad::Var& x) const { return fc2(ad::relu(fc1(x))); }

ad::Var multi_head_attention(const ad::Var& q, const ad::Var& k, const ad::Var& v,
                             const AttentionProjections& proj, int heads, MhaDebug* dbg) {
  if (q->value.ndim() != 2 || k->value.ndim() != 2 || v->value.ndim() != 2) {
    throw ShapeError("multi_head_attention: expected 2-D inputs");
  }
  const int c = q->value.dim(1);
  const int s = k->value.dim(0);
  if (k->value.dim(1) != c || v->value.dim(1) != c) {
    throw ShapeError("multi_head_attention: channel mismatch between Q/K/V");
  }
  if (v->value.dim(0) != s) {
    throw ShapeError("multi_head_attention: key/value token count mismatch");
  }
  if (c % heads != 0) {
    throw ConfigError("multi_head_attention: heads " + std::to_string(heads) +
                      " do not divide channels " + std::to_string(c));
  }
  const int dk = c / heads;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

  auto ql = proj.q(q);
  auto kl = proj.k(k);
  auto vl = proj.v(v);

  std::vector<ad::Var> head_outputs;
  head_outputs.reserve(heads);
  for (int j = 0; j < heads; ++j) {
    auto qj = ad::slice_cols(ql, j * dk, (j + 1) * dk);
    auto kj = ad::slice_cols(kl, j * dk, (j + 1) * dk);
    auto vj = ad::slice_cols(vl, j * dk, (j + 1) * dk);
    auto scores = ad::scale(ad::matmul(qj, ad::transpose(kj)), inv_sqrt_dk);
    if (!scores->value.all_finite()) {
      throw NumericError("multi_head_attention: non-finite attention logits");
    }
    if (dbg && j == 0) {
      dbg->score_rows = scores->value.dim(0);
      dbg->score_cols = scores->value.dim(1);
    }
    auto attn = ad::softmax_rows(scores);
    head_outputs.push_back(ad::matmul(attn, vj));
  }
  return proj.o(ad::concat_cols(head_outputs));
}

EsaBlock::EsaBlock(ParamStore& store, const std::string& name, int channels, int heads, Rng& rng)
    : proj_(store, name, channels, rng),
      ff_(store, name + ".ff", channels, rng),
      channels_(channels),
      heads_(heads) {
  if (channels % heads != 0) {
    throw ConfigError(name + ": heads " + std::to_string(heads) + " do not divide channels " +
                      std::to_string(channels));
  }
}

ad::Var EsaBlock::operator()(const ad::Var& e, MhaDebug* dbg) const {
  const int c = e->value.dim(0), h = e->value.dim(1), w = e->value.dim(2);
  if (c != channels_) {
    throw ShapeError("esa_block: expected " + std::to_string(channels_) + " channels, got " +
                     std::to_string(c));
  }
  const int n = h * w;
  auto queries = ad::transpose(ad::reshape(e, {c, n}));  // N x C, rows are pixels
  auto tokens = pyramid_pool(e);                         // 35 x C

  auto attended = multi_head_attention(queries, tokens, tokens, proj_, heads_, dbg);
  auto residual = ad::add(queries, attended);
  auto out = ad::add(residual, ff_(residual));
  return ad::reshape(ad::transpose(out), {c, h, w});
}

LcaBlock::LcaBlock(ParamStore& store, const std::string& name, int channels, int heads,
                   bool softmax_mode, Rng& rng)
    : proj_(store, name, channels, rng),
      ff_(store, name + ".ff", channels, rng),
      channels_(channels),
      heads_(heads),
      softmax_mode_(softmax_mode) {
  if (channels % heads != 0) {
    throw ConfigError(name + ": heads " + std::to_string(heads) + " do not divide channels " +
                      std::to_string(channels));
  }
}

ad::Var LcaBlock::operator()(const ad::Var& d, const ad::Var& p_logits, bool lesion_norm) const {
  const int c = d->value.dim(0), h = d->value.dim(1), w = d->value.dim(2);
  if (c != channels_) {
    throw ShapeError("lca_block: expected " + std::to_string(channels_) + " channels, got " +
                     std::to_string(c));
  }
  if (p_logits->value.dim(1) != h || p_logits->value.dim(2) != w) {
    throw ShapeError("lca_block: prediction " + p_logits->value.shape_str() +
                     " does not match feature " + d->value.shape_str());
  }
  const int n = h * w;
  const int dk = c / heads_;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

  auto token = extract_lesion_feature(d, p_logits, /*upsample=*/false, lesion_norm);  // 1 x C

  auto queries = ad::transpose(ad::reshape(d, {c, n}));  // N x C
  auto ql = proj_.q(queries);
  auto kl = proj_.k(token);
  auto vl = proj_.v(token);

  std::vector<ad::Var> head_outputs;
  head_outputs.reserve(heads_);
  for (int j = 0; j < heads_; ++j) {
    auto qj = ad::slice_cols(ql, j * dk, (j + 1) * dk);
    auto kj = ad::slice_cols(kl, j * dk, (j + 1) * dk);
    auto vj = ad::slice_cols(vl, j * dk, (j + 1) * dk);
    auto similarity = ad::scale(ad::matmul(qj, ad::transpose(kj)), inv_sqrt_dk);  // N x 1
    // Single key token: softmax collapses to 1, the sigmoid gate keeps the
    // enhancement proportional to the query-lesion similarity.
    auto gate = softmax_mode_ ? ad::softmax_rows(similarity) : ad::sigmoid(similarity);
    head_outputs.push_back(ad::matmul(gate, vj));  // (N x 1)(1 x dk)
  }
  auto attended = proj_.o(ad::concat_cols(head_outputs));
  auto residual = ad::add(queries, attended);
  auto out = ad::add(residual, ff_(residual));
  return ad::reshape(ad::transpose(out), {c, h, w});
}

}  // namespace ldseg
