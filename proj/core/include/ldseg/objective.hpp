// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>

#include "ldseg/autodiff.hpp"
#include "ldseg/config.hpp"
#include "ldseg/nn.hpp"
#include "ldseg/seg_core.hpp"

namespace ldseg {

// Mean pixelwise binary cross entropy in the numerically stable logit form.
ad::Var bce_loss(const ad::Var& logits, const Tensor& gt);

// Soft Dice: 1 - (2*sum(p*y) + s) / (sum(p) + sum(y) + s) with p = sigmoid.
ad::Var dice_loss(const ad::Var& logits, const Tensor& gt, double smooth);

ad::Var stage_loss(const ad::Var& logits, const Tensor& gt, double smooth);

// Sum of bce+dice over the five predictions, each against the ground truth
// nearest-downsampled to that prediction's resolution. Equal stage weights.
ad::Var deep_supervision_loss(const ForwardTrace& trace, const Tensor& gt, double smooth);

// lr_init * (1 - epoch/nEpoch)^power; throws on epoch outside [0, nEpoch).
double poly_lr(int epoch, const TrainConfig& cfg);

// Classical momentum SGD with weight decay folded into the gradient:
//   g <- g + wd*theta;  v <- m*v + g;  theta <- theta - lr*v.
class SgdOptimizer {
 public:
  SgdOptimizer(double momentum, double weight_decay)
      : momentum_(momentum), weight_decay_(weight_decay) {}

  void step(ParamStore& params, double lr);

  std::map<std::string, Tensor>& velocity() { return velocity_; }
  const std::map<std::string, Tensor>& velocity() const { return velocity_; }

 private:
  double momentum_;
  double weight_decay_;
  std::map<std::string, Tensor> velocity_;
};

}  // namespace ldseg
