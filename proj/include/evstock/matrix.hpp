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

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "evstock/common.hpp"

namespace evstock {

// Dense row-major matrix of doubles.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {
    if (r < 0 || c < 0) throw ShapeError("negative matrix dimension");
  }

  static Matrix FromRows(const std::vector<std::vector<double>> &rows_in) {
    if (rows_in.empty()) return Matrix();
    Matrix m(static_cast<int>(rows_in.size()), static_cast<int>(rows_in[0].size()));
    for (int r = 0; r < m.rows; ++r) {
      if (static_cast<int>(rows_in[r].size()) != m.cols) throw ShapeError("ragged rows");
      for (int c = 0; c < m.cols; ++c) m(r, c) = rows_in[r][c];
    }
    return m;
  }

  size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  double &operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  double *row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  const double *row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }

  bool SameShape(const Matrix &o) const { return rows == o.rows && cols == o.cols; }
  bool AllFinite() const {
    for (double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
  std::string ShapeString() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
  }

  friend bool operator==(const Matrix &, const Matrix &) = default;
};

}  // namespace evstock
