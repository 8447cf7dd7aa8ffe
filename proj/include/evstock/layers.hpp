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

// Attention, fusion, gating and linear-chain CRF blocks built from nn ops.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "evstock/nn.hpp"

namespace evstock::layers {

using nn::Var;

struct Attended {
  Var out;      // N x d
  Var weights;  // N x N, rows sum to 1
};

// softmax_rows(H W H^T) H
inline Attended SelfAttention(const Var &h, const Var &w) {
  auto scores = nn::MatMulT(nn::MatMul(h, w), h);
  auto a = nn::SoftmaxRows(scores);
  return {nn::MatMul(a, h), a};
}

// tanh([S; E; S - E; S * E] Wf + bf), row-wise.
inline Var Fuse(const Var &s, const Var &e, const Var &wf, const Var &bf) {
  if (!s->value.SameShape(e->value)) {
    throw ShapeError("fuse: event embedding " + e->value.ShapeString() + " vs text " +
                     s->value.ShapeString());
  }
  auto x = nn::ConcatCols({s, e, nn::Sub(s, e), nn::Mul(s, e)});
  return nn::Tanh(nn::AddBias(nn::MatMul(x, wf), bf));
}

struct CoAttended {
  Var cx;     // L x d, text positions summarizing the stock steps
  Var cy;     // T x d, stock steps summarizing the text positions
  Var alpha;  // L x T, rows sum to 1
  Var beta;   // T x L, rows sum to 1 (columns of the L x T map)
};

// f(i, j) = relu(hx_i^T W sy_j); alpha normalizes over stock steps, beta over
// text positions.
inline CoAttended CoAttention(const Var &hx, const Var &sy, const Var &w) {
  if (hx->value.cols != sy->value.cols) {
    throw ShapeError("co-attention: " + hx->value.ShapeString() + " vs " + sy->value.ShapeString());
  }
  auto f = nn::Relu(nn::MatMulT(nn::MatMul(hx, w), sy));
  auto alpha = nn::SoftmaxRows(f);
  auto beta = nn::SoftmaxRows(nn::Transpose(f));
  return {nn::MatMul(alpha, sy), nn::MatMul(beta, hx), alpha, beta};
}

// g * C + (1 - g) * H with g = sigmoid([H; C] Wg + bg).
inline Var GatedSum(const Var &h, const Var &c, const Var &wg, const Var &bg) {
  if (!h->value.SameShape(c->value)) {
    throw ShapeError("gated sum: " + h->value.ShapeString() + " vs " + c->value.ShapeString());
  }
  auto g = nn::Sigmoid(nn::AddBias(nn::MatMul(nn::ConcatCols({h, c}), wg), bg));
  return nn::Add(h, nn::Mul(g, nn::Sub(c, h)));
}

// ---- linear-chain CRF ----

namespace internal {

inline double LogSumExp(const double *x, int n) {
  const double mx = *std::max_element(x, x + n);
  if (mx == -std::numeric_limits<double>::infinity()) return mx;
  double s = 0;
  for (int i = 0; i < n; ++i) s += std::exp(x[i] - mx);
  return mx + std::log(s);
}

inline void CheckCrfShapes(const Matrix &em, const Matrix &trans, const Matrix &start) {
  const int y = em.cols;
  if (em.rows < 1) throw ShapeError("crf over empty sequence");
  if (trans.rows != y || trans.cols != y || start.rows != 1 || start.cols != y) {
    throw ShapeError("crf: emissions " + em.ShapeString() + ", transitions " +
                     trans.ShapeString() + ", start " + start.ShapeString());
  }
}

// Forward log-scores: a(t, y) = log sum over prefixes ending in y at t.
inline Matrix ForwardScores(const Matrix &em, const Matrix &trans, const Matrix &start) {
  const int len = em.rows, ny = em.cols;
  Matrix a(len, ny);
  std::vector<double> buf(ny);
  for (int y = 0; y < ny; ++y) a(0, y) = start.data[y] + em(0, y);
  for (int t = 1; t < len; ++t) {
    for (int y = 0; y < ny; ++y) {
      for (int p = 0; p < ny; ++p) buf[p] = a(t - 1, p) + trans(p, y);
      a(t, y) = em(t, y) + LogSumExp(buf.data(), ny);
    }
  }
  return a;
}

inline Matrix BackwardScores(const Matrix &em, const Matrix &trans) {
  const int len = em.rows, ny = em.cols;
  Matrix b(len, ny);
  std::vector<double> buf(ny);
  for (int t = len - 2; t >= 0; --t) {
    for (int y = 0; y < ny; ++y) {
      for (int n = 0; n < ny; ++n) buf[n] = trans(y, n) + em(t + 1, n) + b(t + 1, n);
      b(t, y) = LogSumExp(buf.data(), ny);
    }
  }
  return b;
}

}  // namespace internal

inline double CrfLogPartition(const Matrix &em, const Matrix &trans, const Matrix &start) {
  internal::CheckCrfShapes(em, trans, start);
  auto a = internal::ForwardScores(em, trans, start);
  return internal::LogSumExp(a.row(em.rows - 1), em.cols);
}

inline double CrfPathScore(const Matrix &em, const Matrix &trans, const Matrix &start,
                           const std::vector<int> &path) {
  internal::CheckCrfShapes(em, trans, start);
  if (static_cast<int>(path.size()) != em.rows) throw ShapeError("crf path length mismatch");
  for (int y : path) {
    if (y < 0 || y >= em.cols) throw Error("crf label id " + std::to_string(y) + " out of range");
  }
  double s = start.data[path[0]] + em(0, path[0]);
  for (int t = 1; t < em.rows; ++t) s += trans(path[t - 1], path[t]) + em(t, path[t]);
  return s;
}

// log Z - score(gold) as a graph node with forward-backward gradients.
inline Var CrfNll(const Var &emissions, const std::vector<int> &gold, const Var &trans,
                  const Var &start) {
  const Matrix &em = emissions->value;
  const double score = CrfPathScore(em, trans->value, start->value, gold);
  auto fwd = std::make_shared<Matrix>(internal::ForwardScores(em, trans->value, start->value));
  const double log_z = internal::LogSumExp(fwd->row(em.rows - 1), em.cols);
  const double nll = log_z - score;
  if (nll < -1e-9) throw NumericError("negative crf loss");
  auto n = nn::internal::MakeNode(Matrix(1, 1, nll), {emissions, trans, start}, "crf");
  if (n->requires_grad) {
    n->backward = [fwd, log_z, gold](nn::Node &self) {
      auto &e = *self.parents[0];
      auto &tr = *self.parents[1];
      auto &st = *self.parents[2];
      const Matrix &em = e.value;
      const int len = em.rows, ny = em.cols;
      const double up = self.grad.data[0];
      const Matrix bwd = internal::BackwardScores(em, tr.value);
      const Matrix &a = *fwd;
      if (e.requires_grad || st.requires_grad) {
        for (int t = 0; t < len; ++t) {
          for (int y = 0; y < ny; ++y) {
            const double m = std::exp(a(t, y) + bwd(t, y) - log_z) - (gold[t] == y ? 1.0 : 0.0);
            if (e.requires_grad) e.GradRef()(t, y) += up * m;
            if (t == 0 && st.requires_grad) st.GradRef().data[y] += up * m;
          }
        }
      }
      if (tr.requires_grad) {
        Matrix &g = tr.GradRef();
        for (int t = 1; t < len; ++t) {
          for (int p = 0; p < ny; ++p) {
            for (int y = 0; y < ny; ++y) {
              g(p, y) +=
                  up * std::exp(a(t - 1, p) + tr.value(p, y) + em(t, y) + bwd(t, y) - log_z);
            }
          }
          g(gold[t - 1], gold[t]) -= up;
        }
      }
    };
  }
  return n;
}

// Highest-scoring path; ties go to the lower label id.
inline std::vector<int> CrfViterbi(const Matrix &em, const Matrix &trans, const Matrix &start) {
  internal::CheckCrfShapes(em, trans, start);
  const int len = em.rows, ny = em.cols;
  Matrix delta(len, ny);
  std::vector<std::vector<int>> back(len, std::vector<int>(ny, 0));
  for (int y = 0; y < ny; ++y) delta(0, y) = start.data[y] + em(0, y);
  for (int t = 1; t < len; ++t) {
    for (int y = 0; y < ny; ++y) {
      int best = 0;
      double best_s = delta(t - 1, 0) + trans(0, y);
      for (int p = 1; p < ny; ++p) {
        const double s = delta(t - 1, p) + trans(p, y);
        if (s > best_s) {
          best_s = s;
          best = p;
        }
      }
      delta(t, y) = best_s + em(t, y);
      back[t][y] = best;
    }
  }
  std::vector<int> path(len);
  int y = 0;
  for (int k = 1; k < ny; ++k) {
    if (delta(len - 1, k) > delta(len - 1, y)) y = k;
  }
  for (int t = len - 1; t >= 0; --t) {
    path[t] = y;
    y = back[t][y];
  }
  return path;
}

// Per-token argmax, lowest id on ties.
inline std::vector<int> ArgmaxRows(const Matrix &m) {
  std::vector<int> out(m.rows);
  for (int r = 0; r < m.rows; ++r) {
    const double *x = m.row(r);
    out[r] = static_cast<int>(std::max_element(x, x + m.cols) - x);
  }
  return out;
}

}  // namespace evstock::layers
