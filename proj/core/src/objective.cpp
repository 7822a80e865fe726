// SPDX-License-Identifier: Apache-2.0
#include "ldseg/objective.hpp"

#include <cmath>

#include "ldseg/data.hpp"
#include "ldseg/errors.hpp"

namespace ldseg {

ad::Var bce_loss(const ad::Var& logits, const Tensor& gt) {
  return ad::bce_with_logits_mean(logits, gt);
}

ad::Var dice_loss(const ad::Var& logits, const Tensor& gt, double smooth) {
  if (!logits->value.same_shape(gt)) {
    throw ShapeError("dice_loss: logits " + logits->value.shape_str() + " vs gt " +
                     gt.shape_str());
  }
  auto p = ad::sigmoid(logits);
  auto overlap = ad::sum_all(ad::mul(p, ad::constant(gt)));
  auto numer = ad::add_scalar(ad::scale(overlap, 2.0), smooth);
  auto denom = ad::add_scalar(ad::add_scalar(ad::sum_all(p), gt.sum()), smooth);
  auto ratio = ad::divide(numer, denom);
  return ad::add_scalar(ad::scale(ratio, -1.0), 1.0);
}

ad::Var stage_loss(const ad::Var& logits, const Tensor& gt, double smooth) {
  return ad::add(bce_loss(logits, gt), dice_loss(logits, gt, smooth));
}

ad::Var deep_supervision_loss(const ForwardTrace& trace, const Tensor& gt, double smooth) {
  ad::Var total;
  for (int i = 1; i <= 5; ++i) {
    const auto& p = trace.predictions[i - 1];
    Tensor gt_i = resize_nearest(gt, p.height(), p.width());
    auto term = stage_loss(p.logits, gt_i, smooth);
    total = total ? ad::add(total, term) : term;
  }
  return total;
}

double poly_lr(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch >= cfg.epochs) {
    throw std::domain_error("poly_lr: epoch " + std::to_string(epoch) + " outside [0, " +
                            std::to_string(cfg.epochs) + ")");
  }
  const double frac = 1.0 - static_cast<double>(epoch) / static_cast<double>(cfg.epochs);
  return cfg.lr_init * std::pow(frac, cfg.power);
}

void SgdOptimizer::step(ParamStore& params, double lr) {
  for (const auto& [name, var] : params.all()) {
    Tensor& theta = var->value;
    auto it = velocity_.find(name);
    if (it == velocity_.end()) {
      it = velocity_.emplace(name, Tensor::zeros(theta.shape())).first;
    }
    Tensor& v = it->second;
    if (!v.same_shape(theta)) {
      throw ShapeError("sgd: velocity shape " + v.shape_str() + " does not match parameter " +
                       name + " " + theta.shape_str());
    }
    const bool has_grad = !var->grad.empty();
    for (std::size_t i = 0; i < theta.numel(); ++i) {
      const double g = (has_grad ? var->grad[i] : 0.0) + weight_decay_ * theta[i];
      v[i] = momentum_ * v[i] + g;
      theta[i] -= lr * v[i];
    }
  }
}

}  // namespace ldseg
