// Copyright 2026 The evstock Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Small reverse-mode autodiff over 2-D double matrices. A graph is built
// eagerly by the op functions below and torn down when the last Var
// referencing it goes away.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "evstock/common.hpp"
#include "evstock/matrix.hpp"

namespace evstock::nn {

struct Node {
  Matrix value;
  Matrix grad;  // empty until something flows back
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node &)> backward;

  double scalar() const {
    if (value.rows != 1 || value.cols != 1) throw ShapeError("not a scalar: " + value.ShapeString());
    return value.data[0];
  }

  Matrix &GradRef() {
    if (grad.empty()) grad = Matrix(value.rows, value.cols);
    return grad;
  }
};

using Var = std::shared_ptr<Node>;

inline Var Constant(Matrix m) {
  if (!m.AllFinite()) throw NumericError("non-finite constant");
  auto n = std::make_shared<Node>();
  n->value = std::move(m);
  return n;
}

inline Var Leaf(Matrix m, bool requires_grad) {
  auto n = Constant(std::move(m));
  n->requires_grad = requires_grad;
  return n;
}

namespace internal {

inline Var MakeNode(Matrix value, std::vector<Var> parents, const char *op) {
  if (!value.AllFinite()) throw NumericError(std::string("non-finite value in ") + op);
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const auto &p : parents) n->requires_grad = n->requires_grad || p->requires_grad;
  if (n->requires_grad) n->parents = std::move(parents);
  return n;
}

inline void RequireShape(bool ok, const char *op, const Matrix &a, const Matrix &b) {
  if (!ok) {
    throw ShapeError(std::string(op) + ": " + a.ShapeString() + " vs " + b.ShapeString());
  }
}

// out += a * b (a: r x k, b: k x c)
inline void GemmAcc(const Matrix &a, const Matrix &b, Matrix &out) {
  for (int i = 0; i < a.rows; ++i) {
    double *o = out.row(i);
    const double *ar = a.row(i);
    for (int k = 0; k < a.cols; ++k) {
      const double av = ar[k];
      if (av == 0.0) continue;
      const double *br = b.row(k);
      for (int j = 0; j < b.cols; ++j) o[j] += av * br[j];
    }
  }
}

// out += a^T * b (a: k x r, b: k x c)
inline void GemmTnAcc(const Matrix &a, const Matrix &b, Matrix &out) {
  for (int k = 0; k < a.rows; ++k) {
    const double *ar = a.row(k);
    const double *br = b.row(k);
    for (int i = 0; i < a.cols; ++i) {
      const double av = ar[i];
      if (av == 0.0) continue;
      double *o = out.row(i);
      for (int j = 0; j < b.cols; ++j) o[j] += av * br[j];
    }
  }
}

// out += a * b^T (a: r x k, b: c x k)
inline void GemmNtAcc(const Matrix &a, const Matrix &b, Matrix &out) {
  for (int i = 0; i < a.rows; ++i) {
    const double *ar = a.row(i);
    double *o = out.row(i);
    for (int j = 0; j < b.rows; ++j) {
      const double *br = b.row(j);
      double s = 0;
      for (int k = 0; k < a.cols; ++k) s += ar[k] * br[k];
      o[j] += s;
    }
  }
}

}  // namespace internal

// Reverse sweep from a scalar (or any node, seeded with ones).
inline void Backward(const Var &root) {
  std::vector<Node *> order;
  std::unordered_set<Node *> seen;
  std::vector<std::pair<Node *, size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto &[n, i] = stack.back();
    if (i < n->parents.size()) {
      Node *p = n->parents[i++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  Matrix &seed = root->GradRef();
  for (double &g : seed.data) g += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node *n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

// ---- primitive ops ----

inline Var MatMul(const Var &a, const Var &b) {
  internal::RequireShape(a->value.cols == b->value.rows, "matmul", a->value, b->value);
  Matrix out(a->value.rows, b->value.cols);
  internal::GemmAcc(a->value, b->value, out);
  auto n = internal::MakeNode(std::move(out), {a, b}, "matmul");
  if (n->requires_grad) {
    n->backward = [](Node &self) {
      auto &a = *self.parents[0];
      auto &b = *self.parents[1];
      if (a.requires_grad) internal::GemmNtAcc(self.grad, b.value, a.GradRef());
      if (b.requires_grad) internal::GemmTnAcc(a.value, self.grad, b.GradRef());
    };
  }
  return n;
}

// a * b^T
inline Var MatMulT(const Var &a, const Var &b) {
  internal::RequireShape(a->value.cols == b->value.cols, "matmul_t", a->value, b->value);
  Matrix out(a->value.rows, b->value.rows);
  internal::GemmNtAcc(a->value, b->value, out);
  auto n = internal::MakeNode(std::move(out), {a, b}, "matmul_t");
  if (n->requires_grad) {
    n->backward = [](Node &self) {
      auto &a = *self.parents[0];
      auto &b = *self.parents[1];
      if (a.requires_grad) internal::GemmAcc(self.grad, b.value, a.GradRef());
      if (b.requires_grad) internal::GemmTnAcc(self.grad, a.value, b.GradRef());
    };
  }
  return n;
}

inline Var Transpose(const Var &a) {
  const Matrix &v = a->value;
  Matrix out(v.cols, v.rows);
  for (int r = 0; r < v.rows; ++r) {
    for (int c = 0; c < v.cols; ++c) out(c, r) = v(r, c);
  }
  auto n = internal::MakeNode(std::move(out), {a}, "transpose");
  if (n->requires_grad) {
    n->backward = [](Node &self) {
      Matrix &g = self.parents[0]->GradRef();
      for (int r = 0; r < g.rows; ++r) {
        for (int c = 0; c < g.cols; ++c) g(r, c) += self.grad(c, r);
      }
    };
  }
  return n;
}

// alpha * a + beta * b, same shapes.
inline Var Combine(const Var &a, const Var &b, double alpha, double beta, const char *op) {
  internal::RequireShape(a->value.SameShape(b->value), op, a->value, b->value);
  Matrix out(a->value.rows, a->value.cols);
  for (size_t i = 0; i < out.size(); ++i) {
    out.data[i] = alpha * a->value.data[i] + beta * b->value.data[i];
  }
  auto n = internal::MakeNode(std::move(out), {a, b}, op);
  if (n->requires_grad) {
    n->backward = [alpha, beta](Node &self) {
      for (int k = 0; k < 2; ++k) {
        auto &p = *self.parents[k];
        if (!p.requires_grad) continue;
        const double s = k == 0 ? alpha : beta;
        Matrix &g = p.GradRef();
        for (size_t i = 0; i < g.size(); ++i) g.data[i] += s * self.grad.data[i];
      }
    };
  }
  return n;
}

inline Var Add(const Var &a, const Var &b) { return Combine(a, b, 1.0, 1.0, "add"); }
inline Var Sub(const Var &a, const Var &b) { return Combine(a, b, 1.0, -1.0, "sub"); }

inline Var Mul(const Var &a, const Var &b) {
  internal::RequireShape(a->value.SameShape(b->value), "mul", a->value, b->value);
  Matrix out(a->value.rows, a->value.cols);
  for (size_t i = 0; i < out.size(); ++i) out.data[i] = a->value.data[i] * b->value.data[i];
  auto n = internal::MakeNode(std::move(out), {a, b}, "mul");
  if (n->requires_grad) {
    n->backward = [](Node &self) {
      auto &a = *self.parents[0];
      auto &b = *self.parents[1];
      if (a.requires_grad) {
        Matrix &g = a.GradRef();
        for (size_t i = 0; i < g.size(); ++i) g.data[i] += self.grad.data[i] * b.value.data[i];
      }
      if (b.requires_grad) {
        Matrix &g = b.GradRef();
        for (size_t i = 0; i < g.size(); ++i) g.data[i] += self.grad.data[i] * a.value.data[i];
      }
    };
  }
  return n;
}

// scale * a + shift
inline Var Affine(const Var &a, double scale, double shift) {
  Matrix out(a->value.rows, a->value.cols);
  for (size_t i = 0; i < out.size(); ++i) out.data[i] = scale * a->value.data[i] + shift;
  auto n = internal::MakeNode(std::move(out), {a}, "affine");
  if (n->requires_grad) {
    n->backward = [scale](Node &self) {
      Matrix &g = self.parents[0]->GradRef();
      for (size_t i = 0; i < g.size(); ++i) g.data[i] += scale * self.grad.data[i];
    };
  }
  return n;
}

inline Var Scale(const Var &a, double s) { return Affine(a, s, 0.0); }

// a (r x c) + bias (1 x c) broadcast over rows.
inline Var AddBias(const Var &a, const Var &bias) {
  internal::RequireShape(bias->value.rows == 1 && bias->value.cols == a->value.cols, "add_bias",
                         a->value, bias->value);
  Matrix out = a->value;
  for (int r = 0; r < out.rows; ++r) {
    for (int c = 0; c < out.cols; ++c) out(r, c) += bias->value.data[c];
  }
  auto n = internal::MakeNode(std::move(out), {a, bias}, "add_bias");
  if (n->requires_grad) {
    n->backward = [](Node &self) {
      auto &a = *self.parents[0];
      auto &b = *self.parents[1];
      if (a.requires_grad) {
        Matrix &g = a.GradRef();
        for (size_t i = 0; i < g.size(); ++i) g.data[i] += self.grad.data[i];
      }
      if (b.requires_grad) {
        Matrix &g = b.GradRef();
        for (int r = 0; r < self.grad.rows; ++r) {
          for (int c = 0; c < self.grad.cols; ++c) g.data[c] += self.grad(r, c);
        }
      }
    };
  }
  return n;
}

inline Var ConcatCols(const std::vector<Var> &parts) {
  if (parts.empty()) throw ShapeError("concat of nothing");
  const int rows = parts[0]->value.rows;
  int cols = 0;
  for (const auto &p : parts) {
    internal::RequireShape(p->value.rows == rows, "concat", parts[0]->value, p->value);
    cols += p->value.cols;
  }
  Matrix out(rows, cols);
  int off = 0;
  for (const auto &p : parts) {
    for (int r = 0; r < rows; ++r) {
      std::copy(p->value.row(r), p->value.row(r) + p->value.cols, out.row(r) + off);
    }
    off += p->value.cols;
  }
  auto n = internal::MakeNode(std::move(out), parts, "concat");
  if (n->requires_grad) {
    n->backward = [](Node &self) {
      int off = 0;
      for (auto &pp : self.parents) {
        auto &p = *pp;
        if (p.requires_grad) {
          Matrix &g = p.GradRef();
          for (int r = 0; r < g.rows; ++r) {
            const double *src = self.grad.row(r) + off;
            double *dst = g.row(r);
            for (int c = 0; c < g.cols; ++c) dst[c] += src[c];
          }
        }
        off += p.value.cols;
      }
    };
  }
  return n;
}

inline Var SoftmaxRows(const Var &a) {
  Matrix out(a->value.rows, a->value.cols);
  for (int r = 0; r < out.rows; ++r) {
    const double *x = a->value.row(r);
    double *y = out.row(r);
    const double mx = *std::max_element(x, x + out.cols);
    double s = 0;
    for (int c = 0; c < out.cols; ++c) s += (y[c] = std::exp(x[c] - mx));
    for (int c = 0; c < out.cols; ++c) y[c] /= s;
  }
  auto n = internal::MakeNode(std::move(out), {a}, "softmax");
  if (n->requires_grad) {
    n->backward = [](Node &self) {
      Matrix &g = self.parents[0]->GradRef();
      for (int r = 0; r < g.rows; ++r) {
        const double *y = self.value.row(r);
        const double *dy = self.grad.row(r);
        double dot = 0;
        for (int c = 0; c < g.cols; ++c) dot += y[c] * dy[c];
        double *dx = g.row(r);
        for (int c = 0; c < g.cols; ++c) dx[c] += y[c] * (dy[c] - dot);
      }
    };
  }
  return n;
}

namespace internal {

template <typename F, typename D>
Var Elementwise(const Var &a, F f, D dfdy, const char *op) {
  Matrix out(a->value.rows, a->value.cols);
  for (size_t i = 0; i < out.size(); ++i) out.data[i] = f(a->value.data[i]);
  auto n = MakeNode(std::move(out), {a}, op);
  if (n->requires_grad) {
    n->backward = [dfdy](Node &self) {
      auto &p = *self.parents[0];
      Matrix &g = p.GradRef();
      for (size_t i = 0; i < g.size(); ++i) {
        g.data[i] += self.grad.data[i] * dfdy(p.value.data[i], self.value.data[i]);
      }
    };
  }
  return n;
}

inline double SigmoidValue(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace internal

inline Var Sigmoid(const Var &a) {
  return internal::Elementwise(
      a, internal::SigmoidValue, [](double, double y) { return y * (1 - y); }, "sigmoid");
}

inline Var Tanh(const Var &a) {
  return internal::Elementwise(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1 - y * y; },
      "tanh");
}

inline Var Relu(const Var &a) {
  return internal::Elementwise(
      a, [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; }, "relu");
}

// 1 x c mean over rows.
inline Var MeanRows(const Var &a) {
  const int rows = a->value.rows;
  if (rows == 0) throw ShapeError("mean over zero rows");
  Matrix out(1, a->value.cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < out.cols; ++c) out.data[c] += a->value(r, c);
  }
  for (double &v : out.data) v /= rows;
  auto n = internal::MakeNode(std::move(out), {a}, "mean_rows");
  if (n->requires_grad) {
    n->backward = [rows](Node &self) {
      Matrix &g = self.parents[0]->GradRef();
      for (int r = 0; r < g.rows; ++r) {
        for (int c = 0; c < g.cols; ++c) g(r, c) += self.grad.data[c] / rows;
      }
    };
  }
  return n;
}

inline Var Sum(const Var &a) {
  Matrix out(1, 1);
  for (double v : a->value.data) out.data[0] += v;
  auto n = internal::MakeNode(std::move(out), {a}, "sum");
  if (n->requires_grad) {
    n->backward = [](Node &self) {
      Matrix &g = self.parents[0]->GradRef();
      for (double &v : g.data) v += self.grad.data[0];
    };
  }
  return n;
}

// Rows of `table` selected by `ids`.
inline Var Embedding(const Var &table, const std::vector<int> &ids) {
  const Matrix &t = table->value;
  Matrix out(static_cast<int>(ids.size()), t.cols);
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= t.rows) {
      throw ShapeError("embedding id " + std::to_string(ids[i]) + " outside table of " +
                       std::to_string(t.rows));
    }
    std::copy(t.row(ids[i]), t.row(ids[i]) + t.cols, out.row(static_cast<int>(i)));
  }
  auto n = internal::MakeNode(std::move(out), {table}, "embedding");
  if (n->requires_grad) {
    n->backward = [ids](Node &self) {
      Matrix &g = self.parents[0]->GradRef();
      for (size_t i = 0; i < ids.size(); ++i) {
        const double *src = self.grad.row(static_cast<int>(i));
        double *dst = g.row(ids[i]);
        for (int c = 0; c < g.cols; ++c) dst[c] += src[c];
      }
    };
  }
  return n;
}

// Inverted dropout; identity unless training with p > 0.
template <typename Engine>
Var Dropout(const Var &a, double p, bool train, Engine &rng) {
  if (!train || p <= 0.0) return a;
  if (p >= 1.0) throw Error("dropout probability must be < 1");
  Matrix mask(a->value.rows, a->value.cols);
  const double keep = 1.0 / (1.0 - p);
  for (double &m : mask.data) m = UnitUniform(rng) < p ? 0.0 : keep;
  return Mul(a, Constant(std::move(mask)));
}

// Sum over rows of -log softmax(logits)[target].
inline Var CrossEntropyLogits(const Var &logits, const std::vector<int> &targets) {
  const Matrix &x = logits->value;
  if (static_cast<int>(targets.size()) != x.rows) {
    throw ShapeError("cross entropy: " + std::to_string(targets.size()) + " targets for " +
                     x.ShapeString());
  }
  Matrix probs(x.rows, x.cols);
  Matrix out(1, 1);
  for (int r = 0; r < x.rows; ++r) {
    if (targets[r] < 0 || targets[r] >= x.cols) throw ShapeError("cross entropy target out of range");
    const double *xr = x.row(r);
    const double mx = *std::max_element(xr, xr + x.cols);
    double s = 0;
    for (int c = 0; c < x.cols; ++c) s += (probs(r, c) = std::exp(xr[c] - mx));
    for (int c = 0; c < x.cols; ++c) probs(r, c) /= s;
    out.data[0] += mx + std::log(s) - xr[targets[r]];
  }
  auto n = internal::MakeNode(std::move(out), {logits}, "cross_entropy");
  if (n->requires_grad) {
    n->backward = [probs = std::move(probs), targets](Node &self) {
      Matrix &g = self.parents[0]->GradRef();
      const double up = self.grad.data[0];
      for (int r = 0; r < g.rows; ++r) {
        for (int c = 0; c < g.cols; ++c) {
          g(r, c) += up * (probs(r, c) - (c == targets[r] ? 1.0 : 0.0));
        }
      }
    };
  }
  return n;
}

inline Var StopGradient(const Var &a) { return Constant(a->value); }

// ---- LSTM ----

struct LstmParams {
  Var wx;  // in x 4h, gate blocks i, f, g, o
  Var wh;  // h x 4h
  Var b;   // 1 x 4h
};

// One direction over the whole sequence, zero initial state. Row t of the
// output is the hidden state after reading position t (reading from the end
// when `reverse`).
inline Var LstmSequence(const Var &x, const LstmParams &p, bool reverse) {
  const int len = x->value.rows;
  const int in = x->value.cols;
  const int h = p.wh->value.rows;
  if (p.wx->value.rows != in || p.wx->value.cols != 4 * h || p.wh->value.cols != 4 * h ||
      p.b->value.rows != 1 || p.b->value.cols != 4 * h) {
    throw ShapeError("lstm: input " + x->value.ShapeString() + " vs wx " +
                     p.wx->value.ShapeString() + ", wh " + p.wh->value.ShapeString());
  }
  if (len == 0) throw ShapeError("lstm over empty sequence");
  // gates: activated i, f, g, o per step; cells: c_t per step
  auto gates = std::make_shared<Matrix>(len, 4 * h);
  auto cells = std::make_shared<Matrix>(len, h);
  Matrix out(len, h);
  std::vector<double> hprev(h, 0.0), cprev(h, 0.0), a(4 * h);
  for (int s = 0; s < len; ++s) {
    const int t = reverse ? len - 1 - s : s;
    std::copy(p.b->value.data.begin(), p.b->value.data.end(), a.begin());
    const double *xt = x->value.row(t);
    for (int k = 0; k < in; ++k) {
      const double xv = xt[k];
      if (xv == 0.0) continue;
      const double *w = p.wx->value.row(k);
      for (int j = 0; j < 4 * h; ++j) a[j] += xv * w[j];
    }
    for (int k = 0; k < h; ++k) {
      const double hv = hprev[k];
      if (hv == 0.0) continue;
      const double *w = p.wh->value.row(k);
      for (int j = 0; j < 4 * h; ++j) a[j] += hv * w[j];
    }
    double *gt = gates->row(t);
    double *ct = cells->row(t);
    double *ht = out.row(t);
    for (int j = 0; j < h; ++j) {
      const double ig = internal::SigmoidValue(a[j]);
      const double fg = internal::SigmoidValue(a[h + j]);
      const double gg = std::tanh(a[2 * h + j]);
      const double og = internal::SigmoidValue(a[3 * h + j]);
      gt[j] = ig;
      gt[h + j] = fg;
      gt[2 * h + j] = gg;
      gt[3 * h + j] = og;
      ct[j] = fg * cprev[j] + ig * gg;
      ht[j] = og * std::tanh(ct[j]);
    }
    std::copy(ct, ct + h, cprev.begin());
    std::copy(ht, ht + h, hprev.begin());
  }
  auto n = internal::MakeNode(std::move(out), {x, p.wx, p.wh, p.b}, "lstm");
  if (n->requires_grad) {
    n->backward = [gates, cells, reverse, len, in, h](Node &self) {
      auto &x = *self.parents[0];
      auto &wx = *self.parents[1];
      auto &wh = *self.parents[2];
      auto &b = *self.parents[3];
      std::vector<double> dh_next(h, 0.0), dc_next(h, 0.0), da(4 * h), dh(h);
      if (wh.requires_grad) wh.GradRef();  // a single step still gets a (zero) gradient
      for (int s = len - 1; s >= 0; --s) {
        const int t = reverse ? len - 1 - s : s;
        const int prev = reverse ? t + 1 : t - 1;
        const bool has_prev = s > 0;
        const double *gt = gates->row(t);
        const double *ct = cells->row(t);
        const double *dout = self.grad.row(t);
        for (int j = 0; j < h; ++j) {
          dh[j] = dout[j] + dh_next[j];
          const double ig = gt[j], fg = gt[h + j], gg = gt[2 * h + j], og = gt[3 * h + j];
          const double tc = std::tanh(ct[j]);
          const double dc = dh[j] * og * (1 - tc * tc) + dc_next[j];
          const double cp = has_prev ? cells->row(prev)[j] : 0.0;
          da[j] = dc * gg * ig * (1 - ig);
          da[h + j] = dc * cp * fg * (1 - fg);
          da[2 * h + j] = dc * ig * (1 - gg * gg);
          da[3 * h + j] = dh[j] * tc * og * (1 - og);
          dc_next[j] = dc * fg;
        }
        if (b.requires_grad) {
          Matrix &g = b.GradRef();
          for (int j = 0; j < 4 * h; ++j) g.data[j] += da[j];
        }
        if (wx.requires_grad) {
          Matrix &g = wx.GradRef();
          const double *xt = x.value.row(t);
          for (int k = 0; k < in; ++k) {
            const double xv = xt[k];
            if (xv == 0.0) continue;
            double *gr = g.row(k);
            for (int j = 0; j < 4 * h; ++j) gr[j] += xv * da[j];
          }
        }
        if (x.requires_grad) {
          double *gx = x.GradRef().row(t);
          for (int k = 0; k < in; ++k) {
            const double *w = wx.value.row(k);
            double s2 = 0;
            for (int j = 0; j < 4 * h; ++j) s2 += w[j] * da[j];
            gx[k] += s2;
          }
        }
        if (has_prev) {
          const double *hp = self.value.row(prev);
          if (wh.requires_grad) {
            Matrix &g = wh.GradRef();
            for (int k = 0; k < h; ++k) {
              double *gr = g.row(k);
              for (int j = 0; j < 4 * h; ++j) gr[j] += hp[k] * da[j];
            }
          }
          for (int k = 0; k < h; ++k) {
            const double *w = wh.value.row(k);
            double s2 = 0;
            for (int j = 0; j < 4 * h; ++j) s2 += w[j] * da[j];
            dh_next[k] = s2;
          }
        }
      }
    };
  }
  return n;
}

// ---- parameters ----

enum class Init { kGlorot, kZero };

// Named parameters kept in creation order.
class ParamStore {
 public:
  explicit ParamStore(uint64_t seed = 0) : seed_(seed), rng_(seed) {}

  uint64_t seed() const { return seed_; }

  Var Add(const std::string &name, int rows, int cols, Init init = Init::kGlorot) {
    if (index_.count(name)) throw Error("duplicate parameter " + name);
    Matrix m(rows, cols);
    if (init == Init::kGlorot) {
      const double a = std::sqrt(6.0 / (rows + cols));
      for (double &v : m.data) v = (2.0 * UnitUniform(rng_) - 1.0) * a;
    }
    auto v = Leaf(std::move(m), true);
    index_[name] = params_.size();
    params_.push_back({name, v});
    return v;
  }

  bool Has(const std::string &name) const { return index_.count(name) > 0; }

  const Var &Get(const std::string &name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("no parameter " + name);
    return params_[it->second].second;
  }

  const std::vector<std::pair<std::string, Var>> &entries() const { return params_; }
  size_t size() const { return params_.size(); }

  size_t Count() const {
    size_t n = 0;
    for (const auto &[name, v] : params_) n += v->value.size();
    return n;
  }

  // Frozen parameters get no gradient and are skipped by the optimizer.
  void SetTrainable(const std::string &prefix, bool trainable) {
    for (auto &[name, v] : params_) {
      if (name.rfind(prefix, 0) == 0) v->requires_grad = trainable;
    }
  }

  void ZeroGrad() {
    for (auto &[name, v] : params_) v->grad = Matrix();
  }

 private:
  uint64_t seed_;
  std::mt19937_64 rng_;
  std::vector<std::pair<std::string, Var>> params_;
  std::unordered_map<std::string, size_t> index_;
};

struct BiLstmParams {
  std::vector<std::array<LstmParams, 2>> layers;

  int hidden() const { return layers.front()[0].wh->value.rows; }
};

inline BiLstmParams AddBiLstm(ParamStore &store, const std::string &prefix, int input_dim,
                              int hidden, int layers) {
  if (layers < 1) throw Error("lstm layer count must be >= 1");
  BiLstmParams p;
  int in = input_dim;
  for (int l = 0; l < layers; ++l) {
    std::array<LstmParams, 2> dirs;
    for (int d = 0; d < 2; ++d) {
      const std::string base =
          prefix + ".l" + std::to_string(l) + (d == 0 ? ".fwd" : ".bwd");
      dirs[d].wx = store.Add(base + ".wx", in, 4 * hidden);
      dirs[d].wh = store.Add(base + ".wh", hidden, 4 * hidden);
      dirs[d].b = store.Add(base + ".b", 1, 4 * hidden, Init::kZero);
    }
    p.layers.push_back(dirs);
    in = 2 * hidden;
  }
  return p;
}

// Stacked bidirectional LSTM; dropout after each layer.
template <typename Engine>
Var BiLstm(const BiLstmParams &p, Var x, double dropout_p, bool train, Engine &rng) {
  for (const auto &dirs : p.layers) {
    x = ConcatCols({LstmSequence(x, dirs[0], false), LstmSequence(x, dirs[1], true)});
    x = Dropout(x, dropout_p, train, rng);
  }
  return x;
}

// ---- optimizer ----

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double decay = 0.0005;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  long step() const { return step_; }
  const AdamConfig &config() const { return cfg_; }

  // One update of every trainable parameter; clears gradients afterwards.
  // The learning rate decays as lr / (1 + decay * steps_taken_before).
  void Step(ParamStore &store) {
    for (const auto &[name, v] : store.entries()) {
      if (v->requires_grad && v->grad.empty()) throw Error("missing gradient for " + name);
    }
    const double lr = cfg_.lr / (1.0 + cfg_.decay * static_cast<double>(step_));
    ++step_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (const auto &[name, v] : store.entries()) {
      if (!v->requires_grad) continue;
      auto &[m, s] = moments_[name];
      if (m.empty()) {
        m = Matrix(v->value.rows, v->value.cols);
        s = Matrix(v->value.rows, v->value.cols);
      }
      for (size_t i = 0; i < v->value.size(); ++i) {
        const double g = v->grad.data[i];
        m.data[i] = cfg_.beta1 * m.data[i] + (1 - cfg_.beta1) * g;
        s.data[i] = cfg_.beta2 * s.data[i] + (1 - cfg_.beta2) * g * g;
        const double mh = m.data[i] / c1;
        const double sh = s.data[i] / c2;
        v->value.data[i] -= lr * mh / (std::sqrt(sh) + cfg_.eps);
      }
      if (!v->value.AllFinite()) throw NumericError("non-finite parameter " + name);
    }
    store.ZeroGrad();
  }

 private:
  AdamConfig cfg_;
  long step_ = 0;
  std::map<std::string, std::pair<Matrix, Matrix>> moments_;
};

// ---- gradient check ----

// Max over checked entries of |ad - fd| / max(|ad|, |fd|, floor), with fd the
// central difference. Above `max_entries` parameters a seeded random subset
// is checked. Central differences of a loss near 1 carry about 1e-11 of
// round-off at eps = 1e-5, so deep models want a floor well above that.
inline double GradCheck(const std::function<Var()> &loss, ParamStore &store, double eps = 1e-5,
                        size_t max_entries = 10000, uint64_t seed = 0, double floor = 1e-8) {
  store.ZeroGrad();
  Var l = loss();
  if (!std::isfinite(l->scalar())) throw NumericError("non-finite loss");
  Backward(l);
  l.reset();

  std::vector<std::pair<Var, size_t>> entries;
  for (const auto &[name, v] : store.entries()) {
    if (!v->requires_grad) continue;
    for (size_t i = 0; i < v->value.size(); ++i) entries.push_back({v, i});
  }
  if (entries.size() > max_entries) {
    std::mt19937_64 rng(seed);
    StableShuffle(entries, rng);
    entries.resize(max_entries);
  }
  std::vector<double> ad(entries.size());
  for (size_t k = 0; k < entries.size(); ++k) {
    const auto &[v, i] = entries[k];
    ad[k] = v->grad.empty() ? 0.0 : v->grad.data[i];
  }
  store.ZeroGrad();

  double worst = 0;
  for (size_t k = 0; k < entries.size(); ++k) {
    auto &[v, i] = entries[k];
    const double orig = v->value.data[i];
    v->value.data[i] = orig + eps;
    const double up = loss()->scalar();
    v->value.data[i] = orig - eps;
    const double down = loss()->scalar();
    v->value.data[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) throw NumericError("non-finite loss");
    const double fd = (up - down) / (2 * eps);
    const double err = std::abs(ad[k] - fd) / std::max({std::abs(ad[k]), std::abs(fd), floor});
    worst = std::max(worst, err);
  }
  return worst;
}

// ---- vocabulary ----

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocab() : words_{"<pad>", "<unk>"} { Reindex(); }

  // Most frequent lowercased words first (ties alphabetical), at most
  // `max_size` entries including PAD and UNK.
  static Vocab Build(const std::vector<std::vector<std::string>> &sentences, int max_size,
                     int min_count = 1) {
    std::map<std::string, int> counts;
    for (const auto &s : sentences) {
      for (const auto &w : s) ++counts[text::Lower(w)];
    }
    std::vector<std::pair<std::string, int>> sorted(counts.begin(), counts.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto &a, const auto &b) { return a.second > b.second; });
    Vocab v;
    for (const auto &[w, c] : sorted) {
      if (v.size() >= max_size) break;
      if (c < min_count) break;
      v.words_.push_back(w);
    }
    v.Reindex();
    return v;
  }

  static Vocab FromWords(std::vector<std::string> words) {
    if (words.size() < 2 || words[0] != "<pad>" || words[1] != "<unk>") {
      throw Error("vocabulary must start with <pad>, <unk>");
    }
    Vocab v;
    v.words_ = std::move(words);
    v.Reindex();
    return v;
  }

  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string> &words() const { return words_; }

  int Id(const std::string &word) const {
    auto it = index_.find(text::Lower(word));
    return it == index_.end() ? kUnk : it->second;
  }

  std::vector<int> Encode(const std::vector<std::string> &tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto &t : tokens) ids.push_back(Id(t));
    return ids;
  }

  friend bool operator==(const Vocab &a, const Vocab &b) { return a.words_ == b.words_; }

 private:
  void Reindex() {
    index_.clear();
    for (size_t i = 0; i < words_.size(); ++i) {
      if (!index_.emplace(words_[i], static_cast<int>(i)).second) {
        throw Error("duplicate vocabulary word " + words_[i]);
      }
    }
  }

  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

// Copies vectors from a "word v1 v2 ..." text file into the first columns of
// the matching table rows. Returns the number of rows filled.
inline int ImportWordVectors(std::istream &in, const Vocab &vocab, Matrix &table) {
  std::string line;
  int line_no = 0, filled = 0, dim = -1;
  while (std::getline(in, line)) {
    ++line_no;
    auto f = text::SplitWhitespace(line);
    if (f.empty()) continue;
    const int d = static_cast<int>(f.size()) - 1;
    if (dim < 0) {
      dim = d;
      if (dim < 1 || dim > table.cols) {
        throw ParseError("vector width " + std::to_string(dim) + " does not fit table width " +
                             std::to_string(table.cols),
                         line_no);
      }
    } else if (d != dim) {
      throw ParseError("inconsistent vector width", line_no);
    }
    const int id = vocab.Id(f[0]);
    if (id == Vocab::kUnk && text::Lower(f[0]) != "<unk>") continue;
    for (int k = 0; k < dim; ++k) table(id, k) = text::ParseDouble(f[k + 1], line_no);
    ++filled;
  }
  return filled;
}

}  // namespace evstock::nn
