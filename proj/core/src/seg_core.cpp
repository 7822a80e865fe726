// SPDX-License-Identifier: Apache-2.0
#include "ldseg/seg_core.hpp"

#include <cmath>

#include "ldseg/errors.hpp"

namespace ldseg {

namespace {
double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}
}  // namespace

int norm_groups(int channels) {
  for (int g : {8, 4, 2}) {
    if (channels % g == 0) return g;
  }
  return 1;
}

Tensor PredictionMap::probabilities() const {
  Tensor out = logits->value;
  for (double& v : out.vec()) v = stable_sigmoid(v);
  return out;
}

LdnetModel::DoubleConv::DoubleConv(ParamStore& store, const std::string& name, int in, int out,
                                   int second_stride, Rng& rng)
    : conv1(store, name + ".conv1", in, out, 3, 1, 1, rng),
      conv2(store, name + ".conv2", out, out, 3, second_stride, 1, rng),
      norm1(store, name + ".norm1", out, norm_groups(out)),
      norm2(store, name + ".norm2", out, norm_groups(out)) {}

ad::Var LdnetModel::DoubleConv::operator()(const ad::Var& x) const {
  auto y = ad::relu(norm1(conv1(x)));
  return ad::relu(norm2(conv2(y)));
}

LdnetModel::LdnetModel(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(Rng::mix(cfg_.seed, 0x1d5e6));

  const auto& ch = cfg_.encoder_channels;
  int in = 3;
  for (int i = 1; i <= 5; ++i) {
    encoder_[i - 1] = DoubleConv(params_, "enc" + std::to_string(i), in, ch[i - 1], 2, rng);
    in = ch[i - 1];
  }
  bridge_ = DoubleConv(params_, "bridge", ch[4], ch[4], 1, rng);
  for (int i = 4; i >= 1; --i) {
    const int from = (i == 4) ? ch[4] : ch[i];  // channels of D_{i+1}
    decoder_[i - 1] =
        DoubleConv(params_, "dec" + std::to_string(i), from + ch[i - 1], ch[i - 1], 1, rng);
  }
  // The lesion sum in the kernel-update path scales with pixel count, so the
  // unified features start small to keep its first-step gradients workable.
  constexpr double kUnifyGain = 0.05;
  for (int i = 5; i >= 1; --i) {
    unify_[i - 1] = Conv2d(params_, "uni" + std::to_string(i), ch[i - 1],
                           ModelConfig::kUnifiedChannels, 1, 1, 0, rng, kUnifyGain);
  }

  if (cfg_.use_dk) {
    dk_generator_.emplace(params_, "dk.gen", ch[4], ModelConfig::kUnifiedChannels,
                          cfg_.kernel_size, rng);
    dk_update_.emplace(params_, "dk", ModelConfig::kUnifiedChannels, rng);
  } else {
    static_head_.emplace(params_, "head", ModelConfig::kUnifiedChannels, 1, 1, 1, 0, rng);
  }
  if (cfg_.use_esa) {
    for (int s : cfg_.esa_stages) {
      esa_.emplace(s, EsaBlock(params_, "esa" + std::to_string(s), ch[s - 1], cfg_.heads, rng));
    }
  }
  if (cfg_.use_lca) {
    for (int s : cfg_.lca_stages) {
      lca_.emplace(s, LcaBlock(params_, "lca" + std::to_string(s), cfg_.decoder_channels(s),
                               cfg_.heads, cfg_.lca_softmax, rng));
    }
  }
}

std::array<FeatureMap, 5> LdnetModel::encode(const Tensor& image) const {
  if (image.ndim() != 3 || image.dim(0) != 3) {
    throw ShapeError("encode: expected 3xHxW image, got " + image.shape_str());
  }
  if (image.dim(1) != cfg_.input_h) {
    throw ConfigError("encode: image height " + std::to_string(image.dim(1)) +
                      " does not equal configured input height " + std::to_string(cfg_.input_h));
  }
  if (image.dim(2) != cfg_.input_w) {
    throw ConfigError("encode: image width " + std::to_string(image.dim(2)) +
                      " does not equal configured input width " + std::to_string(cfg_.input_w));
  }
  std::array<FeatureMap, 5> out;
  ad::Var x = ad::constant(image);
  for (int i = 1; i <= 5; ++i) {
    x = encoder_[i - 1](x);
    out[i - 1] = FeatureMap{x, i, FeatureKind::encoder};
  }
  return out;
}

FeatureMap LdnetModel::unify(const FeatureMap& d) const {
  if (d.kind != FeatureKind::decoder) {
    throw ShapeError("unify: expected a decoder feature map");
  }
  const int expected = cfg_.encoder_channels[d.stage - 1];
  if (d.channels() != expected) {
    throw ShapeError("unify: stage " + std::to_string(d.stage) + " expects " +
                     std::to_string(expected) + " channels, got " + std::to_string(d.channels()));
  }
  return FeatureMap{unify_[d.stage - 1](d.values), d.stage, FeatureKind::unified};
}

FeatureMap LdnetModel::decode_stage(const FeatureMap& d_next, const FeatureMap& skip) const {
  auto up = ad::upsample_nearest2x(d_next.values);
  if (up->value.dim(1) != skip.height() || up->value.dim(2) != skip.width()) {
    throw ShapeError("decode_stage: upsampled " + up->value.shape_str() +
                     " does not match skip " + skip.values->value.shape_str());
  }
  auto merged = ad::concat0({up, skip.values});
  return FeatureMap{decoder_[skip.stage - 1](merged), skip.stage, FeatureKind::decoder};
}

ForwardTrace LdnetModel::forward(const Tensor& image) const {
  ForwardTrace trace;
  auto enc = encode(image);
  if (cfg_.use_esa) {
    for (int s : cfg_.esa_stages) {
      enc[s - 1].values = esa_.at(s)(enc[s - 1].values);
    }
  }
  trace.encoder_features = enc;

  FeatureMap current;
  DynamicKernel kernel;
  for (int i = 5; i >= 1; --i) {
    FeatureMap d = (i == 5)
                       ? FeatureMap{bridge_(enc[4].values), 5, FeatureKind::decoder}
                       : decode_stage(current, enc[i - 1]);
    FeatureMap unified = unify(d);

    PredictionMap p;
    if (cfg_.use_dk) {
      if (i == 5) {
        kernel = generate_kernel(enc[4].values, *dk_generator_);
      } else {
        auto lesion = extract_lesion_feature(unified.values, trace.predictions[i].logits,
                                             /*upsample=*/true, cfg_.lesion_norm);
        kernel = update_kernel(kernel, lesion, *dk_update_, i);
      }
      p = PredictionMap{predict(kernel, unified.values), i};
      trace.kernels[i - 1] = kernel.weights;
    } else {
      p = PredictionMap{(*static_head_)(unified.values), i};
    }
    trace.predictions[i - 1] = p;

    if (cfg_.use_lca && cfg_.lca_stages.count(i)) {
      d.values = lca_.at(i)(d.values, p.logits, cfg_.lesion_norm);
    }
    trace.decoder_features[i - 1] = d;
    trace.unified_features[i - 1] = unified;
    current = d;
  }
  return trace;
}

}  // namespace ldseg
