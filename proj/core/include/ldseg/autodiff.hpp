// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "ldseg/tensor.hpp"

namespace ldseg::ad {

struct Node;
using Var = std::shared_ptr<Node>;

// One vertex of the dynamically-built computation graph. `backprop` reads
// this node's grad and accumulates into the parents' grads; it is only run
// for nodes on a path from the loss to a gradient-requiring leaf.
struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily on first accumulation
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void(const Node&)> backprop;

  Tensor& ensure_grad() {
    if (grad.empty()) grad = Tensor::zeros(value.shape());
    return grad;
  }
  void zero_grad() { grad = Tensor(); }
  const std::vector<int>& shape() const { return value.shape(); }
};

// Graph leaves.
Var constant(Tensor value);
Var leaf(Tensor value);  // requires_grad = true (trainable parameter)

// Accumulates `g` into `n`'s grad if n requires it.
void accumulate(const Var& n, const Tensor& g);

// Reverse-mode sweep from a scalar root.
void backward(const Var& root);

// --- elementwise / shape ---
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // hadamard, same shape
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var elem_pow(const Var& a, double p);  // requires a > 0 elementwise
Var divide(const Var& a, const Var& b);
Var reshape(const Var& a, std::vector<int> shape);

// --- linear algebra (2-D) ---
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var slice_cols(const Var& a, int c0, int c1);
Var concat_cols(const std::vector<Var>& parts);
// Concatenation along dim 0 for tensors of equal trailing dims.
Var concat0(const std::vector<Var>& parts);
Var tile_rows(const Var& row, int n);  // 1xM -> NxM
Var tile_cols(const Var& col, int m);  // Nx1 -> NxM
Var rowwise_sum(const Var& a);         // NxM -> Nx1
Var rowwise_mean(const Var& a);
Var sum_all(const Var& a);  // -> shape {1}
Var softmax_rows(const Var& a);

// --- spatial ops on CxHxW ---
Var conv2d(const Var& x, const Var& w, const Var& bias, int stride, int pad_top, int pad_bottom,
           int pad_left, int pad_right);
inline Var conv2d(const Var& x, const Var& w, const Var& bias, int stride, int pad) {
  return conv2d(x, w, bias, stride, pad, pad, pad, pad);
}
Var adaptive_avg_pool2d(const Var& x, int out_h, int out_w);
Var upsample_nearest2x(const Var& x);

// --- losses ---
// Mean over pixels of the numerically stable logit-form binary cross entropy.
Var bce_with_logits_mean(const Var& logits, const Tensor& target);

// Adaptive-pooling bin boundaries: bin r of R over extent n covers
// [floor(r*n/R), ceil((r+1)*n/R)).
inline int pool_bin_start(int r, int R, int n) {
  return static_cast<int>((static_cast<long long>(r) * n) / R);
}
inline int pool_bin_end(int r, int R, int n) {
  return static_cast<int>((static_cast<long long>(r + 1) * n + R - 1) / R);
}

}  // namespace ldseg::ad
