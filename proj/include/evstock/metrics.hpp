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

// Movement classification and role-labeling metrics.

#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "evstock/common.hpp"
#include "evstock/market.hpp"

namespace evstock {

// Matthews correlation; 0 when any marginal is empty.
inline double Mcc(double tp, double tn, double fp, double fn) {
  if (tp < 0 || tn < 0 || fp < 0 || fn < 0) throw Error("confusion counts must be >= 0");
  const double d1 = tp + fp, d2 = tp + fn, d3 = tn + fp, d4 = tn + fn;
  if (d1 == 0 || d2 == 0 || d3 == 0 || d4 == 0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(d1 * d2 * d3 * d4);
}

// Binary confusion counts with "up" (1) as the positive class.
struct Confusion {
  long tp = 0, tn = 0, fp = 0, fn = 0;

  void Add(int predicted, int gold) {
    if (predicted == 1) {
      (gold == 1 ? tp : fp) += 1;
    } else {
      (gold == 1 ? fn : tn) += 1;
    }
  }
  long n() const { return tp + tn + fp + fn; }
  double Accuracy() const {
    return n() == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(n());
  }
  double MccValue() const {
    return Mcc(static_cast<double>(tp), static_cast<double>(tn), static_cast<double>(fp),
               static_cast<double>(fn));
  }

  friend bool operator==(const Confusion &, const Confusion &) = default;
};

// Token-level micro-F1 over labels other than O (id 0).
struct TokenF1 {
  long tp = 0, fp = 0, fn = 0;

  void Add(const std::vector<int> &predicted, const std::vector<int> &gold) {
    if (predicted.size() != gold.size()) throw ShapeError("label sequences differ in length");
    for (size_t i = 0; i < gold.size(); ++i) {
      const int p = predicted[i], g = gold[i];
      if (p != 0 && p == g) {
        ++tp;
      } else {
        if (p != 0) ++fp;
        if (g != 0) ++fn;
      }
    }
  }
  // No predicted span token: precision is undefined and F1 is 0.
  double F1() const {
    if (tp + fp == 0) return 0.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  }
  double Precision() const {
    return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  double Recall() const {
    return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  }

  friend bool operator==(const TokenF1 &, const TokenF1 &) = default;
};

struct Metrics {
  Confusion overall;
  std::array<Confusion, 3> buckets;  // indexed by TimeBucket
  Confusion covered;
  Confusion uncovered;
  bool has_tagging = false;
  TokenF1 tagging;  // on covered samples
  double loss = 0;  // mean stock loss

  double accuracy() const { return overall.Accuracy(); }
  double mcc() const { return overall.MccValue(); }
  double micro_f1() const { return tagging.F1(); }
  const Confusion &bucket(TimeBucket b) const { return buckets[static_cast<size_t>(b)]; }

  friend bool operator==(const Metrics &, const Metrics &) = default;
};

}  // namespace evstock
