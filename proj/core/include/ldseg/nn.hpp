// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "ldseg/autodiff.hpp"
#include "ldseg/rng.hpp"
#include "ldseg/tensor.hpp"

namespace ldseg {

// Named registry of trainable parameters. Ordered by name so optimizer
// sweeps, checkpoints and parameter counts are deterministic.
class ParamStore {
 public:
  ad::Var create(const std::string& name, std::vector<int> shape, double init_lo, double init_hi,
                 Rng& rng);
  ad::Var create_const(const std::string& name, std::vector<int> shape, double value);
  // Fan-in scaled uniform: U(-gain/sqrt(fan_in), +gain/sqrt(fan_in)).
  ad::Var create_fan_in(const std::string& name, std::vector<int> shape, int fan_in, Rng& rng,
                        double gain = 1.0);

  const std::map<std::string, ad::Var>& all() const { return params_; }
  ad::Var get(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) > 0; }
  std::vector<std::string> names() const;
  std::size_t parameter_count() const;
  void zero_grad();

 private:
  std::map<std::string, ad::Var> params_;
};

struct Linear {
  ad::Var w;  // in x out
  ad::Var b;  // 1 x out
  Linear() = default;
  Linear(ParamStore& store, const std::string& name, int in, int out, Rng& rng,
         double gain = 1.0);
  // x: N x in -> N x out
  ad::Var operator()(const ad::Var& x) const;
  int in_features() const { return w->value.dim(0); }
  int out_features() const { return w->value.dim(1); }
};

struct Conv2d {
  ad::Var w;  // out x in x k x k
  ad::Var b;  // out
  int stride = 1;
  int pad = 0;
  Conv2d() = default;
  Conv2d(ParamStore& store, const std::string& name, int in, int out, int k, int stride, int pad,
         Rng& rng, double gain = 1.0);
  ad::Var operator()(const ad::Var& x) const;
};

// Channel-group normalization without running statistics; deterministic and
// batch-independent, with per-channel affine.
struct GroupNorm {
  ad::Var gamma;  // C
  ad::Var beta;   // C
  int groups = 1;
  double eps = 1e-5;
  GroupNorm() = default;
  GroupNorm(ParamStore& store, const std::string& name, int channels, int groups);
  ad::Var operator()(const ad::Var& x) const;  // x: CxHxW
};

}  // namespace ldseg
