// SPDX-License-Identifier: Apache-2.0
#include "ldseg/nn.hpp"

#include <cmath>

#include "ldseg/errors.hpp"

namespace ldseg {

ad::Var ParamStore::create(const std::string& name, std::vector<int> shape, double init_lo,
                           double init_hi, Rng& rng) {
  if (params_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  Tensor t(std::move(shape));
  for (double& v : t.vec()) v = rng.uniform(init_lo, init_hi);
  auto var = ad::leaf(std::move(t));
  params_[name] = var;
  return var;
}

ad::Var ParamStore::create_const(const std::string& name, std::vector<int> shape, double value) {
  if (params_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  auto var = ad::leaf(Tensor::full(std::move(shape), value));
  params_[name] = var;
  return var;
}

ad::Var ParamStore::create_fan_in(const std::string& name, std::vector<int> shape, int fan_in,
                                  Rng& rng, double gain) {
  const double bound = gain / std::sqrt(static_cast<double>(fan_in));
  return create(name, std::move(shape), -bound, bound, rng);
}

ad::Var ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [k, v] : params_) out.push_back(k);
  return out;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [k, v] : params_) n += v->value.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [k, v] : params_) v->zero_grad();
}

Linear::Linear(ParamStore& store, const std::string& name, int in, int out, Rng& rng,
               double gain) {
  w = store.create_fan_in(name + ".w", {in, out}, in, rng, gain);
  b = store.create_const(name + ".b", {1, out}, 0.0);
}

ad::Var Linear::operator()(const ad::Var& x) const {
  return ad::add(ad::matmul(x, w), ad::tile_rows(b, x->value.dim(0)));
}

Conv2d::Conv2d(ParamStore& store, const std::string& name, int in, int out, int k, int stride_,
               int pad_, Rng& rng, double gain)
    : stride(stride_), pad(pad_) {
  w = store.create_fan_in(name + ".w", {out, in, k, k}, in * k * k, rng, gain);
  b = store.create_const(name + ".b", {out}, 0.0);
}

ad::Var Conv2d::operator()(const ad::Var& x) const {
  return ad::conv2d(x, w, b, stride, pad);
}

GroupNorm::GroupNorm(ParamStore& store, const std::string& name, int channels, int groups_)
    : groups(groups_) {
  if (channels % groups != 0) {
    throw ConfigError("group norm: channels " + std::to_string(channels) +
                      " not divisible by groups " + std::to_string(groups));
  }
  gamma = store.create_const(name + ".gamma", {channels}, 1.0);
  beta = store.create_const(name + ".beta", {channels}, 0.0);
}

ad::Var GroupNorm::operator()(const ad::Var& x) const {
  const int c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  const int per_group = (c / groups) * h * w;

  auto xg = ad::reshape(x, {groups, per_group});
  auto mu = ad::rowwise_mean(xg);
  auto centered = ad::sub(xg, ad::tile_cols(mu, per_group));
  auto var = ad::rowwise_mean(ad::mul(centered, centered));
  auto inv = ad::elem_pow(ad::add_scalar(var, eps), -0.5);
  auto normed = ad::mul(centered, ad::tile_cols(inv, per_group));

  auto ym = ad::reshape(normed, {c, h * w});
  auto g = ad::tile_cols(ad::reshape(gamma, {c, 1}), h * w);
  auto bb = ad::tile_cols(ad::reshape(beta, {c, 1}), h * w);
  return ad::reshape(ad::add(ad::mul(ym, g), bb), {c, h, w});
}

}  // namespace ldseg
