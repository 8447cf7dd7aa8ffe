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

// Binary checkpoint layout, all integers little-endian:
//
//   magic    8 bytes  "EVSTCKPT"
//   version  u32      1
//   config   str      key=value lines
//   vocab    u32 n, n x str
//   alphabet u32 n, n x str
//   scaler   u32 n_stocks, n x (str stock, vec lo, vec hi), vec lo, vec hi (pooled)
//   tensors  u32 n, n x (str name, u32 rows, u32 cols, rows*cols x f64 row-major)
//
// str = u32 byte length + bytes; vec = u32 n + n x f64; f64 = IEEE-754
// binary64 bit pattern as u64.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "evstock/common.hpp"
#include "evstock/market.hpp"
#include "evstock/matrix.hpp"

namespace evstock {

inline constexpr char kCheckpointMagic[8] = {'E', 'V', 'S', 'T', 'C', 'K', 'P', 'T'};
inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string config;
  std::vector<std::string> vocab;
  std::vector<std::string> alphabet;
  StockScaler scaler;
  std::vector<std::pair<std::string, Matrix>> tensors;

  const Matrix *Find(const std::string &name) const {
    for (const auto &[n, m] : tensors) {
      if (n == name) return &m;
    }
    return nullptr;
  }

  friend bool operator==(const Checkpoint &, const Checkpoint &) = default;
};

namespace internal {

class BinWriter {
 public:
  explicit BinWriter(std::ostream &out) : out_(out) {}

  void U32(uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out_.write(reinterpret_cast<const char *>(b), 4);
  }
  void U64(uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out_.write(reinterpret_cast<const char *>(b), 8);
  }
  void F64(double v) { U64(std::bit_cast<uint64_t>(v)); }
  void Str(const std::string &s) {
    U32(static_cast<uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void Vec(const std::vector<double> &v) {
    U32(static_cast<uint32_t>(v.size()));
    for (double x : v) F64(x);
  }
  void Raw(const char *p, size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }

 private:
  std::ostream &out_;
};

class BinReader {
 public:
  explicit BinReader(std::istream &in) : in_(in) {}

  void Raw(char *p, size_t n) {
    in_.read(p, static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in_.gcount()) != n) throw ParseError("checkpoint truncated");
  }
  uint32_t U32() {
    unsigned char b[4];
    Raw(reinterpret_cast<char *>(b), 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
  }
  uint64_t U64() {
    unsigned char b[8];
    Raw(reinterpret_cast<char *>(b), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
  }
  double F64() { return std::bit_cast<double>(U64()); }
  // Guards against absurd lengths from a corrupt file.
  uint32_t Count(uint32_t limit = 1u << 28) {
    const uint32_t n = U32();
    if (n > limit) throw ParseError("checkpoint corrupt: count " + std::to_string(n));
    return n;
  }
  std::string Str() {
    std::string s(Count(), '\0');
    if (!s.empty()) Raw(s.data(), s.size());
    return s;
  }
  std::vector<double> Vec() {
    std::vector<double> v(Count());
    for (double &x : v) x = F64();
    return v;
  }

 private:
  std::istream &in_;
};

}  // namespace internal

inline void WriteCheckpoint(std::ostream &out, const Checkpoint &ck) {
  internal::BinWriter w(out);
  w.Raw(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.U32(kCheckpointVersion);
  w.Str(ck.config);
  w.U32(static_cast<uint32_t>(ck.vocab.size()));
  for (const auto &s : ck.vocab) w.Str(s);
  w.U32(static_cast<uint32_t>(ck.alphabet.size()));
  for (const auto &s : ck.alphabet) w.Str(s);
  w.U32(static_cast<uint32_t>(ck.scaler.per_stock.size()));
  for (const auto &[stock, sc] : ck.scaler.per_stock) {
    w.Str(stock);
    w.Vec(sc.lo);
    w.Vec(sc.hi);
  }
  w.Vec(ck.scaler.global.lo);
  w.Vec(ck.scaler.global.hi);
  w.U32(static_cast<uint32_t>(ck.tensors.size()));
  for (const auto &[name, m] : ck.tensors) {
    w.Str(name);
    w.U32(static_cast<uint32_t>(m.rows));
    w.U32(static_cast<uint32_t>(m.cols));
    for (double v : m.data) w.F64(v);
  }
  if (!out) throw Error("checkpoint write failed");
}

inline Checkpoint ReadCheckpoint(std::istream &in) {
  internal::BinReader r(in);
  char magic[sizeof(kCheckpointMagic)];
  r.Raw(magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) throw ParseError("not a checkpoint");
  const uint32_t version = r.U32();
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.config = r.Str();
  ck.vocab.resize(r.Count());
  for (auto &s : ck.vocab) s = r.Str();
  ck.alphabet.resize(r.Count());
  for (auto &s : ck.alphabet) s = r.Str();
  const uint32_t stocks = r.Count();
  for (uint32_t i = 0; i < stocks; ++i) {
    std::string stock = r.Str();
    MinMaxScaler sc;
    sc.lo = r.Vec();
    sc.hi = r.Vec();
    ck.scaler.per_stock.emplace(std::move(stock), std::move(sc));
  }
  ck.scaler.global.lo = r.Vec();
  ck.scaler.global.hi = r.Vec();
  ck.tensors.resize(r.Count());
  for (auto &[name, m] : ck.tensors) {
    name = r.Str();
    const uint32_t rows = r.Count(), cols = r.Count();
    if (static_cast<uint64_t>(rows) * cols > (1ull << 28)) throw ParseError("checkpoint corrupt: tensor size");
    m = Matrix(static_cast<int>(rows), static_cast<int>(cols));
    for (double &v : m.data) v = r.F64();
  }
  return ck;
}

inline void SaveCheckpoint(const std::string &path, const Checkpoint &ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  WriteCheckpoint(out, ck);
}

inline Checkpoint LoadCheckpoint(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  return ReadCheckpoint(in);
}

}  // namespace evstock
