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

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace evstock {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text. Carries the 1-based line number when known (0
// otherwise).
class ParseError : public Error {
 public:
  ParseError(const std::string &what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf in a computation, or a diverging loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Half-open token range [begin, end).
struct TokenSpan {
  int begin = 0;
  int end = 0;

  int size() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool contains(int i) const { return i >= begin && i < end; }
  bool overlaps(const TokenSpan &o) const {
    return begin < o.end && o.begin < end;
  }
  friend bool operator==(const TokenSpan &, const TokenSpan &) = default;
  friend auto operator<=>(const TokenSpan &, const TokenSpan &) = default;
};

// Calendar date plus minute-of-day.
struct Timestamp {
  std::chrono::sys_days date{};
  int minute = 0;

  friend bool operator==(const Timestamp &, const Timestamp &) = default;
  friend auto operator<=>(const Timestamp &, const Timestamp &) = default;
};

namespace text {

inline std::string_view Trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::string Lower(std::string_view s) {
  std::string out(s);
  for (char &c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Splits on a single delimiter, keeping empty fields.
inline std::vector<std::string> Split(std::string_view s, char delim) {
  std::vector<std::string> out;
  size_t start = 0;
  for (;;) {
    size_t pos = s.find(delim, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      return out;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

// Splits on runs of whitespace, dropping empty fields.
inline std::vector<std::string> SplitWhitespace(std::string_view s) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string Join(const std::vector<std::string> &parts,
                        std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

// Strict integer parse; throws ParseError on trailing garbage.
inline long long ParseInt(std::string_view s, int line = 0) {
  std::string str(Trim(s));
  if (str.empty()) throw ParseError("expected integer, got empty field", line);
  size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(str, &used);
  } catch (const std::exception &) {
    throw ParseError("expected integer, got '" + str + "'", line);
  }
  if (used != str.size()) {
    throw ParseError("expected integer, got '" + str + "'", line);
  }
  return v;
}

inline double ParseDouble(std::string_view s, int line = 0) {
  std::string str(Trim(s));
  if (str.empty()) throw ParseError("expected number, got empty field", line);
  size_t used = 0;
  double v = 0;
  try {
    v = std::stod(str, &used);
  } catch (const std::exception &) {
    throw ParseError("expected number, got '" + str + "'", line);
  }
  if (used != str.size()) {
    throw ParseError("expected number, got '" + str + "'", line);
  }
  return v;
}

// Shortest decimal form that round-trips a double.
inline std::string FormatDouble(double v) {
  char buf[64];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::stod(buf) == v) break;
  }
  return buf;
}

inline std::string FormatFixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace text

namespace timefmt {

// Parses "YYYY-MM-DD".
inline std::chrono::sys_days ParseDate(std::string_view s, int line = 0) {
  std::string str(text::Trim(s));
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  if (str.size() != 10 ||
      std::sscanf(str.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3) {
    throw ParseError("malformed date '" + str + "'", line);
  }
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                  std::chrono::day{d}};
  if (!ymd.ok()) throw ParseError("invalid date '" + str + "'", line);
  return std::chrono::sys_days{ymd};
}

// Parses "HH:MM" into minute-of-day.
inline int ParseClock(std::string_view s, int line = 0) {
  std::string str(text::Trim(s));
  int h = -1, m = -1;
  char tail = 0;
  if (str.size() != 5 || str[2] != ':' ||
      std::sscanf(str.c_str(), "%2d:%2d%c", &h, &m, &tail) != 2 || h < 0 ||
      h > 23 || m < 0 || m > 59) {
    throw ParseError("malformed time '" + str + "'", line);
  }
  return h * 60 + m;
}

// Parses "YYYY-MM-DD HH:MM".
inline Timestamp ParseTimestamp(std::string_view s, int line = 0) {
  std::string str(text::Trim(s));
  auto parts = text::SplitWhitespace(str);
  if (parts.size() != 2) throw ParseError("malformed timestamp '" + str + "'", line);
  return Timestamp{ParseDate(parts[0], line), ParseClock(parts[1], line)};
}

inline std::string FormatDate(std::chrono::sys_days d) {
  std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

inline std::string FormatClock(int minute) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02d:%02d", minute / 60, minute % 60);
  return buf;
}

inline std::string FormatTimestamp(const Timestamp &t) {
  return FormatDate(t.date) + " " + FormatClock(t.minute);
}

}  // namespace timefmt

// Uniform double in [0, 1) from a 64-bit engine, bit-stable across standard
// library implementations (std::uniform_real_distribution is not).
template <typename Engine>
inline double UnitUniform(Engine &eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) without modulo bias, bit-stable across platforms.
template <typename Engine>
inline uint64_t UniformIndex(Engine &eng, uint64_t n) {
  if (n <= 1) return 0;
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = eng();
  } while (x >= limit);
  return x % n;
}

// Fisher-Yates with UniformIndex; std::shuffle's output is
// implementation-defined.
template <typename T, typename Engine>
inline void StableShuffle(std::vector<T> &v, Engine &eng) {
  for (size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[UniformIndex(eng, i)]);
  }
}

}  // namespace evstock
