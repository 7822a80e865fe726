// SPDX-License-Identifier: Apache-2.0
#include "ldseg/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_set>
#include <utility>

namespace ldseg::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using CMatMap = Eigen::Map<const RowMat>;

MatMap as_mat(Tensor& t, int rows, int cols) { return MatMap(t.data(), rows, cols); }
CMatMap as_mat(const Tensor& t, int rows, int cols) { return CMatMap(t.data(), rows, cols); }

Var make_node(Tensor value, std::vector<Var> parents) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents) {
    if (p && p->requires_grad) {
      n->requires_grad = true;
      break;
    }
  }
  return n;
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a->value.same_shape(b->value)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a->value.shape_str() +
                                " vs " + b->value.shape_str());
  }
}

void require_2d(const Var& a, const char* op) {
  if (a->value.ndim() != 2) {
    throw std::invalid_argument(std::string(op) + ": expected 2-D tensor, got " +
                                a->value.shape_str());
  }
}

double stable_sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = false;
  return n;
}

Var leaf(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return n;
}

void accumulate(const Var& n, const Tensor& g) {
  if (!n || !n->requires_grad) return;
  Tensor& dst = n->ensure_grad();
  const double* src = g.data();
  double* d = dst.data();
  const std::size_t count = dst.numel();
  for (std::size_t i = 0; i < count; ++i) d[i] += src[i];
}

void backward(const Var& root) {
  if (root->value.numel() != 1) {
    throw std::invalid_argument("backward: root must be scalar, got " + root->value.shape_str());
  }
  if (!root->requires_grad) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& top = stack.back();
    Node* n = top.first;
    if (top.second < n->parents.size()) {
      Node* p = n->parents[top.second].get();
      ++top.second;
      if (p && p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  root->ensure_grad().fill(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop && !n->grad.empty()) n->backprop(*n);
  }
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a->value;
  const double* pb = b->value.data();
  double* po = out.data();
  for (std::size_t i = 0; i < out.numel(); ++i) po[i] += pb[i];
  Var n = make_node(std::move(out), {a, b});
  if (n->requires_grad) {
    n->backprop = [a, b](const Node& self) {
      accumulate(a, self.grad);
      accumulate(b, self.grad);
    };
  }
  return n;
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a->value;
  const double* pb = b->value.data();
  double* po = out.data();
  for (std::size_t i = 0; i < out.numel(); ++i) po[i] -= pb[i];
  Var n = make_node(std::move(out), {a, b});
  if (n->requires_grad) {
    n->backprop = [a, b](const Node& self) {
      accumulate(a, self.grad);
      if (b->requires_grad) {
        Tensor neg = self.grad;
        for (double& v : neg.vec()) v = -v;
        accumulate(b, neg);
      }
    };
  }
  return n;
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a->value;
  const double* pb = b->value.data();
  double* po = out.data();
  for (std::size_t i = 0; i < out.numel(); ++i) po[i] *= pb[i];
  Var n = make_node(std::move(out), {a, b});
  if (n->requires_grad) {
    n->backprop = [a, b](const Node& self) {
      if (a->requires_grad) {
        Tensor ga = self.grad;
        const double* pv = b->value.data();
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] *= pv[i];
        accumulate(a, ga);
      }
      if (b->requires_grad) {
        Tensor gb = self.grad;
        const double* pv = a->value.data();
        for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] *= pv[i];
        accumulate(b, gb);
      }
    };
  }
  return n;
}

Var scale(const Var& a, double s) {
  Tensor out = a->value;
  for (double& v : out.vec()) v *= s;
  Var n = make_node(std::move(out), {a});
  if (n->requires_grad) {
    n->backprop = [a, s](const Node& self) {
      Tensor g = self.grad;
      for (double& v : g.vec()) v *= s;
      accumulate(a, g);
    };
  }
  return n;
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a->value;
  for (double& v : out.vec()) v += s;
  Var n = make_node(std::move(out), {a});
  if (n->requires_grad) {
    n->backprop = [a](const Node& self) { accumulate(a, self.grad); };
  }
  return n;
}

Var relu(const Var& a) {
  Tensor out = a->value;
  for (double& v : out.vec()) v = v > 0.0 ? v : 0.0;
  Var n = make_node(std::move(out), {a});
  if (n->requires_grad) {
    n->backprop = [a](const Node& self) {
      Tensor g = self.grad;
      const double* pv = a->value.data();
      for (std::size_t i = 0; i < g.numel(); ++i) {
        if (pv[i] <= 0.0) g[i] = 0.0;
      }
      accumulate(a, g);
    };
  }
  return n;
}

Var sigmoid(const Var& a) {
  Tensor out = a->value;
  for (double& v : out.vec()) v = stable_sigmoid(v);
  Var n = make_node(std::move(out), {a});
  if (n->requires_grad) {
    n->backprop = [a](const Node& self) {
      Tensor g = self.grad;
      const double* py = self.value.data();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] *= py[i] * (1.0 - py[i]);
      accumulate(a, g);
    };
  }
  return n;
}

Var elem_pow(const Var& a, double p) {
  Tensor out = a->value;
  for (double& v : out.vec()) v = std::pow(v, p);
  Var n = make_node(std::move(out), {a});
  if (n->requires_grad) {
    n->backprop = [a, p](const Node& self) {
      Tensor g = self.grad;
      const double* pv = a->value.data();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] *= p * std::pow(pv[i], p - 1.0);
      accumulate(a, g);
    };
  }
  return n;
}

Var divide(const Var& a, const Var& b) {
  require_same_shape(a, b, "divide");
  Tensor out = a->value;
  const double* pb = b->value.data();
  double* po = out.data();
  for (std::size_t i = 0; i < out.numel(); ++i) po[i] /= pb[i];
  Var n = make_node(std::move(out), {a, b});
  if (n->requires_grad) {
    n->backprop = [a, b](const Node& self) {
      if (a->requires_grad) {
        Tensor ga = self.grad;
        const double* pv = b->value.data();
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] /= pv[i];
        accumulate(a, ga);
      }
      if (b->requires_grad) {
        Tensor gb = self.grad;
        const double* pa = a->value.data();
        const double* pv = b->value.data();
        for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] *= -pa[i] / (pv[i] * pv[i]);
        accumulate(b, gb);
      }
    };
  }
  return n;
}

Var reshape(const Var& a, std::vector<int> shape) {
  Tensor out = a->value.reshaped(std::move(shape));
  Var n = make_node(std::move(out), {a});
  if (n->requires_grad) {
    n->backprop = [a](const Node& self) {
      accumulate(a, self.grad.reshaped(a->value.shape()));
    };
  }
  return n;
}

Var matmul(const Var& a, const Var& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const int m = a->value.dim(0), k = a->value.dim(1);
  const int k2 = b->value.dim(0), nn = b->value.dim(1);
  if (k != k2) {
    throw std::invalid_argument("matmul: inner dims differ, " + a->value.shape_str() + " * " +
                                b->value.shape_str());
  }
  Tensor out({m, nn});
  as_mat(out, m, nn).noalias() = as_mat(a->value, m, k) * as_mat(b->value, k, nn);
  Var n = make_node(std::move(out), {a, b});
  if (n->requires_grad) {
    n->backprop = [a, b, m, k, nn](const Node& self) {
      CMatMap gy(self.grad.data(), m, nn);
      if (a->requires_grad) {
        Tensor& ga = a->ensure_grad();
        as_mat(ga, m, k).noalias() += gy * as_mat(b->value, k, nn).transpose();
      }
      if (b->requires_grad) {
        Tensor& gb = b->ensure_grad();
        as_mat(gb, k, nn).noalias() += as_mat(a->value, m, k).transpose() * gy;
      }
    };
  }
  return n;
}

Var transpose(const Var& a) {
  require_2d(a, "transpose");
  const int m = a->value.dim(0), nn = a->value.dim(1);
  Tensor out({nn, m});
  as_mat(out, nn, m) = as_mat(a->value, m, nn).transpose();
  Var n = make_node(std::move(out), {a});
  if (n->requires_grad) {
    n->backprop = [a, m, nn](const Node& self) {
      Tensor g({m, nn});
      as_mat(g, m, nn) = CMatMap(self.grad.data(), nn, m).transpose();
      accumulate(a, g);
    };
  }
  return n;
}

Var slice_cols(const Var& a, int c0, int c1) {
  require_2d(a, "slice_cols");
  const int m = a->value.dim(0), nn = a->value.dim(1);
  if (c0 < 0 || c1 > nn || c0 >= c1) {
    throw std::invalid_argument("slice_cols: bad range [" + std::to_string(c0) + ", " +
                                std::to_string(c1) + ") for " + a->value.shape_str());
  }
  const int w = c1 - c0;
  Tensor out({m, w});
  for (int i = 0; i < m; ++i) {
    std::memcpy(out.data() + static_cast<std::size_t>(i) * w,
                a->value.data() + static_cast<std::size_t>(i) * nn + c0,
                sizeof(double) * static_cast<std::size_t>(w));
  }
  Var n = make_node(std::move(out), {a});
  if (n->requires_grad) {
    n->backprop = [a, m, nn, c0, w](const Node& self) {
      Tensor& ga = a->ensure_grad();
      for (int i = 0; i < m; ++i) {
        const double* src = self.grad.data() + static_cast<std::size_t>(i) * w;
        double* dst = ga.data() + static_cast<std::size_t>(i) * nn + c0;
        for (int j = 0; j < w; ++j) dst[j] += src[j];
      }
    };
  }
  return n;
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty input");
  const int m = parts[0]->value.dim(0);
  int total = 0;
  for (const auto& p : parts) {
    require_2d(p, "concat_cols");
    if (p->value.dim(0) != m) {
      throw std::invalid_argument("concat_cols: row mismatch " + p->value.shape_str());
    }
    total += p->value.dim(1);
  }
  Tensor out({m, total});
  int off = 0;
  for (const auto& p : parts) {
    const int w = p->value.dim(1);
    for (int i = 0; i < m; ++i) {
      std::memcpy(out.data() + static_cast<std::size_t>(i) * total + off,
                  p->value.data() + static_cast<std::size_t>(i) * w,
                  sizeof(double) * static_cast<std::size_t>(w));
    }
    off += w;
  }
  Var n = make_node(std::move(out), parts);
  if (n->requires_grad) {
    n->backprop = [parts, m, total](const Node& self) {
      int off = 0;
      for (const auto& p : parts) {
        const int w = p->value.dim(1);
        if (p->requires_grad) {
          Tensor g({m, w});
          for (int i = 0; i < m; ++i) {
            std::memcpy(g.data() + static_cast<std::size_t>(i) * w,
                        self.grad.data() + static_cast<std::size_t>(i) * total + off,
                        sizeof(double) * static_cast<std::size_t>(w));
          }
          accumulate(p, g);
        }
        off += w;
      }
    };
  }
  return n;
}

Var concat0(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat0: empty input");
  const auto& first = parts[0]->value.shape();
  std::vector<int> trailing(first.begin() + 1, first.end());
  int total0 = 0;
  for (const auto& p : parts) {
    const auto& s = p->value.shape();
    if (s.size() != first.size() ||
        !std::equal(s.begin() + 1, s.end(), trailing.begin(), trailing.end())) {
      throw std::invalid_argument("concat0: trailing dims mismatch " + p->value.shape_str() +
                                  " vs " + Tensor::shape_str(first));
    }
    total0 += s[0];
  }
  std::vector<int> out_shape = {total0};
  out_shape.insert(out_shape.end(), trailing.begin(), trailing.end());
  Tensor out(out_shape);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::memcpy(out.data() + off, p->value.data(), sizeof(double) * p->value.numel());
    off += p->value.numel();
  }
  Var n = make_node(std::move(out), parts);
  if (n->requires_grad) {
    n->backprop = [parts](const Node& self) {
      std::size_t off = 0;
      for (const auto& p : parts) {
        if (p->requires_grad) {
          Tensor g(p->value.shape());
          std::memcpy(g.data(), self.grad.data() + off, sizeof(double) * g.numel());
          accumulate(p, g);
        }
        off += p->value.numel();
      }
    };
  }
  return n;
}

Var tile_rows(const Var& row, int n_rows) {
  require_2d(row, "tile_rows");
  if (row->value.dim(0) != 1) {
    throw std::invalid_argument("tile_rows: expected 1xM, got " + row->value.shape_str());
  }
  const int m = row->value.dim(1);
  Tensor out({n_rows, m});
  for (int i = 0; i < n_rows; ++i) {
    std::memcpy(out.data() + static_cast<std::size_t>(i) * m, row->value.data(),
                sizeof(double) * static_cast<std::size_t>(m));
  }
  Var n = make_node(std::move(out), {row});
  if (n->requires_grad) {
    n->backprop = [row, n_rows, m](const Node& self) {
      Tensor g({1, m});
      for (int i = 0; i < n_rows; ++i) {
        const double* src = self.grad.data() + static_cast<std::size_t>(i) * m;
        for (int j = 0; j < m; ++j) g[static_cast<std::size_t>(j)] += src[j];
      }
      accumulate(row, g);
    };
  }
  return n;
}

Var tile_cols(const Var& col, int n_cols) {
  require_2d(col, "tile_cols");
  if (col->value.dim(1) != 1) {
    throw std::invalid_argument("tile_cols: expected Nx1, got " + col->value.shape_str());
  }
  const int m = col->value.dim(0);
  Tensor out({m, n_cols});
  for (int i = 0; i < m; ++i) {
    double v = col->value[static_cast<std::size_t>(i)];
    double* dst = out.data() + static_cast<std::size_t>(i) * n_cols;
    for (int j = 0; j < n_cols; ++j) dst[j] = v;
  }
  Var n = make_node(std::move(out), {col});
  if (n->requires_grad) {
    n->backprop = [col, m, n_cols](const Node& self) {
      Tensor g({m, 1});
      for (int i = 0; i < m; ++i) {
        const double* src = self.grad.data() + static_cast<std::size_t>(i) * n_cols;
        double s = 0.0;
        for (int j = 0; j < n_cols; ++j) s += src[j];
        g[static_cast<std::size_t>(i)] = s;
      }
      accumulate(col, g);
    };
  }
  return n;
}

Var rowwise_sum(const Var& a) {
  require_2d(a, "rowwise_sum");
  const int m = a->value.dim(0), w = a->value.dim(1);
  Tensor out({m, 1});
  for (int i = 0; i < m; ++i) {
    const double* src = a->value.data() + static_cast<std::size_t>(i) * w;
    double s = 0.0;
    for (int j = 0; j < w; ++j) s += src[j];
    out[static_cast<std::size_t>(i)] = s;
  }
  Var n = make_node(std::move(out), {a});
  if (n->requires_grad) {
    n->backprop = [a, m, w](const Node& self) {
      Tensor g({m, w});
      for (int i = 0; i < m; ++i) {
        double v = self.grad[static_cast<std::size_t>(i)];
        double* dst = g.data() + static_cast<std::size_t>(i) * w;
        for (int j = 0; j < w; ++j) dst[j] = v;
      }
      accumulate(a, g);
    };
  }
  return n;
}

Var rowwise_mean(const Var& a) {
  require_2d(a, "rowwise_mean");
  return scale(rowwise_sum(a), 1.0 / a->value.dim(1));
}

Var sum_all(const Var& a) {
  Tensor out({1});
  out[0] = a->value.sum();
  Var n = make_node(std::move(out), {a});
  if (n->requires_grad) {
    n->backprop = [a](const Node& self) {
      Tensor g(a->value.shape());
      g.fill(self.grad[0]);
      accumulate(a, g);
    };
  }
  return n;
}

Var softmax_rows(const Var& a) {
  require_2d(a, "softmax_rows");
  const int m = a->value.dim(0), w = a->value.dim(1);
  Tensor out({m, w});
  for (int i = 0; i < m; ++i) {
    const double* src = a->value.data() + static_cast<std::size_t>(i) * w;
    double* dst = out.data() + static_cast<std::size_t>(i) * w;
    double mx = src[0];
    for (int j = 1; j < w; ++j) mx = std::max(mx, src[j]);
    if (!std::isfinite(mx)) {
      throw std::runtime_error("softmax_rows: non-finite logits in row " + std::to_string(i));
    }
    double denom = 0.0;
    for (int j = 0; j < w; ++j) {
      dst[j] = std::exp(src[j] - mx);
      denom += dst[j];
    }
    for (int j = 0; j < w; ++j) dst[j] /= denom;
  }
  Var n = make_node(std::move(out), {a});
  if (n->requires_grad) {
    n->backprop = [a, m, w](const Node& self) {
      Tensor g({m, w});
      for (int i = 0; i < m; ++i) {
        const double* y = self.value.data() + static_cast<std::size_t>(i) * w;
        const double* gy = self.grad.data() + static_cast<std::size_t>(i) * w;
        double dot = 0.0;
        for (int j = 0; j < w; ++j) dot += gy[j] * y[j];
        double* dst = g.data() + static_cast<std::size_t>(i) * w;
        for (int j = 0; j < w; ++j) dst[j] = (gy[j] - dot) * y[j];
      }
      accumulate(a, g);
    };
  }
  return n;
}

Var conv2d(const Var& x, const Var& w, const Var& bias, int stride, int pad_top, int pad_bottom,
           int pad_left, int pad_right) {
  if (x->value.ndim() != 3) {
    throw std::invalid_argument("conv2d: input must be CxHxW, got " + x->value.shape_str());
  }
  if (w->value.ndim() != 4) {
    throw std::invalid_argument("conv2d: weight must be OxIxKhxKw, got " + w->value.shape_str());
  }
  const int cin = x->value.dim(0), h = x->value.dim(1), ww = x->value.dim(2);
  const int cout = w->value.dim(0), wcin = w->value.dim(1), kh = w->value.dim(2),
            kw = w->value.dim(3);
  if (cin != wcin) {
    throw std::invalid_argument("conv2d: channel mismatch, input " + x->value.shape_str() +
                                " vs weight " + w->value.shape_str());
  }
  if (bias && bias->value.numel() != static_cast<std::size_t>(cout)) {
    throw std::invalid_argument("conv2d: bias size mismatch");
  }
  const int oh = (h + pad_top + pad_bottom - kh) / stride + 1;
  const int ow = (ww + pad_left + pad_right - kw) / stride + 1;
  if (h + pad_top + pad_bottom < kh || ww + pad_left + pad_right < kw) {
    throw std::invalid_argument("conv2d: kernel larger than padded input");
  }

  const int krows = cin * kh * kw;
  const int ocols = oh * ow;
  auto cols = std::make_shared<Tensor>(std::vector<int>{krows, ocols});
  {
    double* cd = cols->data();
    for (int ci = 0; ci < cin; ++ci) {
      for (int dr = 0; dr < kh; ++dr) {
        for (int dc = 0; dc < kw; ++dc) {
          const int row = (ci * kh + dr) * kw + dc;
          double* dst = cd + static_cast<std::size_t>(row) * ocols;
          for (int r = 0; r < oh; ++r) {
            const int ih = r * stride + dr - pad_top;
            for (int c = 0; c < ow; ++c) {
              const int iw = c * stride + dc - pad_left;
              dst[r * ow + c] = (ih >= 0 && ih < h && iw >= 0 && iw < ww)
                                    ? x->value.at(ci, ih, iw)
                                    : 0.0;
            }
          }
        }
      }
    }
  }

  Tensor out({cout, oh, ow});
  as_mat(out, cout, ocols).noalias() = as_mat(w->value, cout, krows) * as_mat(*cols, krows, ocols);
  if (bias) {
    for (int o = 0; o < cout; ++o) {
      double b = bias->value[static_cast<std::size_t>(o)];
      double* dst = out.data() + static_cast<std::size_t>(o) * ocols;
      for (int i = 0; i < ocols; ++i) dst[i] += b;
    }
  }

  std::vector<Var> parents = {x, w};
  if (bias) parents.push_back(bias);
  Var n = make_node(std::move(out), std::move(parents));
  if (n->requires_grad) {
    n->backprop = [x, w, bias, cols, stride, pad_top, pad_left, cin, h, ww, cout, kh, kw, oh,
                   ow](const Node& self) {
      const int krows = cin * kh * kw;
      const int ocols = oh * ow;
      CMatMap gy(self.grad.data(), cout, ocols);
      if (w->requires_grad) {
        Tensor& gw = w->ensure_grad();
        as_mat(gw, cout, krows).noalias() += gy * as_mat(*cols, krows, ocols).transpose();
      }
      if (bias && bias->requires_grad) {
        Tensor& gb = bias->ensure_grad();
        for (int o = 0; o < cout; ++o) {
          const double* src = self.grad.data() + static_cast<std::size_t>(o) * ocols;
          double s = 0.0;
          for (int i = 0; i < ocols; ++i) s += src[i];
          gb[static_cast<std::size_t>(o)] += s;
        }
      }
      if (x->requires_grad) {
        Tensor dcols({krows, ocols});
        as_mat(dcols, krows, ocols).noalias() =
            as_mat(w->value, cout, krows).transpose() * gy;
        Tensor& gx = x->ensure_grad();
        const double* cd = dcols.data();
        for (int ci = 0; ci < cin; ++ci) {
          for (int dr = 0; dr < kh; ++dr) {
            for (int dc = 0; dc < kw; ++dc) {
              const int row = (ci * kh + dr) * kw + dc;
              const double* src = cd + static_cast<std::size_t>(row) * ocols;
              for (int r = 0; r < oh; ++r) {
                const int ih = r * stride + dr - pad_top;
                if (ih < 0 || ih >= h) continue;
                for (int c = 0; c < ow; ++c) {
                  const int iw = c * stride + dc - pad_left;
                  if (iw < 0 || iw >= ww) continue;
                  gx.at(ci, ih, iw) += src[r * ow + c];
                }
              }
            }
          }
        }
      }
    };
  }
  return n;
}

Var adaptive_avg_pool2d(const Var& x, int out_h, int out_w) {
  if (x->value.ndim() != 3) {
    throw std::invalid_argument("adaptive_avg_pool2d: input must be CxHxW, got " +
                                x->value.shape_str());
  }
  const int c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  Tensor out({c, out_h, out_w});
  for (int ch = 0; ch < c; ++ch) {
    for (int r = 0; r < out_h; ++r) {
      const int r0 = pool_bin_start(r, out_h, h), r1 = pool_bin_end(r, out_h, h);
      for (int q = 0; q < out_w; ++q) {
        const int c0 = pool_bin_start(q, out_w, w), c1 = pool_bin_end(q, out_w, w);
        double s = 0.0;
        for (int i = r0; i < r1; ++i) {
          for (int j = c0; j < c1; ++j) s += x->value.at(ch, i, j);
        }
        out.at(ch, r, q) = s / ((r1 - r0) * (c1 - c0));
      }
    }
  }
  Var n = make_node(std::move(out), {x});
  if (n->requires_grad) {
    n->backprop = [x, out_h, out_w, c, h, w](const Node& self) {
      Tensor& gx = x->ensure_grad();
      for (int ch = 0; ch < c; ++ch) {
        for (int r = 0; r < out_h; ++r) {
          const int r0 = pool_bin_start(r, out_h, h), r1 = pool_bin_end(r, out_h, h);
          for (int q = 0; q < out_w; ++q) {
            const int c0 = pool_bin_start(q, out_w, w), c1 = pool_bin_end(q, out_w, w);
            const double g = self.grad.at(ch, r, q) / ((r1 - r0) * (c1 - c0));
            for (int i = r0; i < r1; ++i) {
              for (int j = c0; j < c1; ++j) gx.at(ch, i, j) += g;
            }
          }
        }
      }
    };
  }
  return n;
}

Var upsample_nearest2x(const Var& x) {
  if (x->value.ndim() != 3) {
    throw std::invalid_argument("upsample_nearest2x: input must be CxHxW, got " +
                                x->value.shape_str());
  }
  const int c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  Tensor out({c, 2 * h, 2 * w});
  for (int ch = 0; ch < c; ++ch) {
    for (int r = 0; r < h; ++r) {
      for (int q = 0; q < w; ++q) {
        const double v = x->value.at(ch, r, q);
        out.at(ch, 2 * r, 2 * q) = v;
        out.at(ch, 2 * r, 2 * q + 1) = v;
        out.at(ch, 2 * r + 1, 2 * q) = v;
        out.at(ch, 2 * r + 1, 2 * q + 1) = v;
      }
    }
  }
  Var n = make_node(std::move(out), {x});
  if (n->requires_grad) {
    n->backprop = [x, c, h, w](const Node& self) {
      Tensor g({c, h, w});
      for (int ch = 0; ch < c; ++ch) {
        for (int r = 0; r < h; ++r) {
          for (int q = 0; q < w; ++q) {
            g.at(ch, r, q) = self.grad.at(ch, 2 * r, 2 * q) + self.grad.at(ch, 2 * r, 2 * q + 1) +
                             self.grad.at(ch, 2 * r + 1, 2 * q) +
                             self.grad.at(ch, 2 * r + 1, 2 * q + 1);
          }
        }
      }
      accumulate(x, g);
    };
  }
  return n;
}

Var bce_with_logits_mean(const Var& logits, const Tensor& target) {
  if (!logits->value.same_shape(target)) {
    throw std::invalid_argument("bce: shape mismatch " + logits->value.shape_str() + " vs " +
                                target.shape_str());
  }
  const std::size_t count = target.numel();
  double total = 0.0;
  const double* z = logits->value.data();
  const double* y = target.data();
  for (std::size_t i = 0; i < count; ++i) {
    // max(z,0) - z*y + log(1 + exp(-|z|))
    total += std::max(z[i], 0.0) - z[i] * y[i] + std::log1p(std::exp(-std::abs(z[i])));
  }
  Tensor out({1});
  out[0] = total / static_cast<double>(count);
  Var n = make_node(std::move(out), {logits});
  if (n->requires_grad) {
    auto tgt = std::make_shared<Tensor>(target);
    n->backprop = [logits, tgt, count](const Node& self) {
      const double g = self.grad[0] / static_cast<double>(count);
      Tensor dz(logits->value.shape());
      const double* z = logits->value.data();
      const double* y = tgt->data();
      for (std::size_t i = 0; i < count; ++i) dz[i] = g * (stable_sigmoid(z[i]) - y[i]);
      accumulate(logits, dz);
    };
  }
  return n;
}

}  // namespace ldseg::ad
