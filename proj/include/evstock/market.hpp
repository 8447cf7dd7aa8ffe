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

// Minute bars to scaled trade windows, trade calendar rules and
// sector-corrected movement labels.

#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "evstock/common.hpp"
#include "evstock/matrix.hpp"

namespace evstock {

struct MinuteBar {
  int minute = 0;
  double open = 0, close = 0, high = 0, low = 0;
  double volume = 0, value = 0, vwap = 0;

  friend bool operator==(const MinuteBar &, const MinuteBar &) = default;
};

struct IndexPoint {
  int minute = 0;
  double value = 0;

  friend bool operator==(const IndexPoint &, const IndexPoint &) = default;
};

using Day = std::chrono::sys_days;
// Bars of one stock keyed by day, each day ascending by minute.
using DayBars = std::map<Day, std::vector<MinuteBar>>;
using IndexDays = std::map<Day, std::vector<IndexPoint>>;
using BarBook = std::map<std::string, DayBars>;
using IndexBook = std::map<std::string, IndexDays>;

inline constexpr int kRawFeatures = 6;
inline constexpr int kMinuteFeatures = 12;
inline constexpr int kStepMinutes = 10;
inline constexpr int kStepWidth = kMinuteFeatures * kStepMinutes;

using MinuteFeatures = std::array<double, kMinuteFeatures>;

inline std::string CheckBar(const MinuteBar &b) {
  const double lo = std::min({b.open, b.close, b.vwap});
  const double hi = std::max({b.open, b.close, b.vwap});
  if (!(b.low <= lo && hi <= b.high)) return "bar prices outside [low, high]";
  if (b.volume < 0) return "negative volume";
  if (b.value < 0) return "negative value";
  return {};
}

// [open, close, high, low, volume, vwap] followed by their change rates
// against the previous minute. The first minute's rates are zero, as is any
// rate whose previous value is zero.
inline std::vector<MinuteFeatures> BuildMinuteFeatures(const std::vector<MinuteBar> &bars) {
  if (bars.empty()) throw Error("no bars to featurize");
  std::vector<MinuteFeatures> out;
  out.reserve(bars.size());
  for (size_t i = 0; i < bars.size(); ++i) {
    const auto &b = bars[i];
    MinuteFeatures f{};
    f[0] = b.open;
    f[1] = b.close;
    f[2] = b.high;
    f[3] = b.low;
    f[4] = b.volume;
    f[5] = b.vwap;
    if (i > 0) {
      const auto &p = out.back();
      for (int k = 0; k < kRawFeatures; ++k) {
        f[kRawFeatures + k] = p[k] == 0.0 ? 0.0 : (f[k] - p[k]) / p[k];
      }
    }
    out.push_back(f);
  }
  return out;
}

// Rows of ten consecutive minutes, flattened. The last partial row is padded
// with copies of the final minute.
inline Matrix WindowTradeData(const std::vector<MinuteFeatures> &features) {
  if (features.empty()) throw Error("no minute features to window");
  const int m = static_cast<int>(features.size());
  const int steps = (m + kStepMinutes - 1) / kStepMinutes;
  Matrix out(steps, kStepWidth);
  for (int t = 0; t < steps; ++t) {
    for (int k = 0; k < kStepMinutes; ++k) {
      const auto &f = features[std::min(m - 1, t * kStepMinutes + k)];
      std::copy(f.begin(), f.end(), out.row(t) + k * kMinuteFeatures);
    }
  }
  return out;
}

// Column-wise min/max over every observed row.
struct MinMaxScaler {
  std::vector<double> lo;
  std::vector<double> hi;

  bool fitted() const { return !lo.empty(); }

  void Observe(const Matrix &m) {
    if (m.rows == 0) return;
    if (!fitted()) {
      lo.assign(m.row(0), m.row(0) + m.cols);
      hi = lo;
    }
    if (static_cast<int>(lo.size()) != m.cols) {
      throw ShapeError("scaler width " + std::to_string(lo.size()) + " vs matrix " +
                       m.ShapeString());
    }
    for (int r = 0; r < m.rows; ++r) {
      for (int c = 0; c < m.cols; ++c) {
        lo[c] = std::min(lo[c], m(r, c));
        hi[c] = std::max(hi[c], m(r, c));
      }
    }
  }

  double ScaleValue(int col, double x) const {
    const double span = hi[col] - lo[col];
    if (span <= 0.0) return 0.5;
    return std::clamp((x - lo[col]) / span, 0.0, 1.0);
  }

  Matrix Apply(const Matrix &m) const {
    if (!fitted()) throw Error("scaler not fitted");
    if (static_cast<int>(lo.size()) != m.cols) {
      throw ShapeError("scaler width " + std::to_string(lo.size()) + " vs matrix " +
                       m.ShapeString());
    }
    Matrix out(m.rows, m.cols);
    for (int r = 0; r < m.rows; ++r) {
      for (int c = 0; c < m.cols; ++c) out(r, c) = ScaleValue(c, m(r, c));
    }
    return out;
  }

  friend bool operator==(const MinMaxScaler &, const MinMaxScaler &) = default;
};

// One scaler per stock plus a pooled one for stocks never seen in training.
struct StockScaler {
  std::map<std::string, MinMaxScaler> per_stock;
  MinMaxScaler global;

  // `windows[i]` belongs to `stocks[i]`; pass training windows only.
  static StockScaler Fit(const std::vector<std::string> &stocks,
                         const std::vector<const Matrix *> &windows) {
    if (stocks.size() != windows.size()) throw ShapeError("stock/window count mismatch");
    StockScaler s;
    for (size_t i = 0; i < stocks.size(); ++i) {
      s.per_stock[stocks[i]].Observe(*windows[i]);
      s.global.Observe(*windows[i]);
    }
    return s;
  }

  const MinMaxScaler &For(const std::string &stock) const {
    auto it = per_stock.find(stock);
    return it != per_stock.end() ? it->second : global;
  }

  Matrix Scale(const std::string &stock, const Matrix &m) const { return For(stock).Apply(m); }

  friend bool operator==(const StockScaler &, const StockScaler &) = default;
};

// Trade days plus the daily session [open, close) in minutes of day. News in
// [open + guard, close - guard] on a trade day counts as in-trade.
struct TradeCalendar {
  std::set<Day> days;
  int open = 9 * 60;
  int close = 15 * 60;
  int guard = 10;

  bool IsTradeDay(Day d) const { return days.count(d) > 0; }

  bool InTradeTime(const Timestamp &t) const {
    return IsTradeDay(t.date) && t.minute >= open + guard && t.minute <= close - guard;
  }

  std::optional<Day> PrevTradeDay(Day d) const {
    auto it = days.lower_bound(d);
    if (it == days.begin()) return std::nullopt;
    return *std::prev(it);
  }

  std::optional<Day> NextTradeDay(Day d) const {
    auto it = days.upper_bound(d);
    if (it == days.end()) return std::nullopt;
    return *it;
  }

  // Last completed session for out-of-trade news: the same day once it has
  // closed, otherwise the previous trade day.
  Day ReferenceDay(const Timestamp &t) const {
    if (IsTradeDay(t.date) && t.minute >= close) return t.date;
    auto prev = PrevTradeDay(t.date);
    if (!prev) throw Error("no trade day before " + timefmt::FormatTimestamp(t));
    return *prev;
  }

  friend bool operator==(const TradeCalendar &, const TradeCalendar &) = default;
};

enum class TimeBucket { kTradeTime, kOutOfTradeTime, kOutOfTradeDay };

inline constexpr std::array<TimeBucket, 3> kAllBuckets = {
    TimeBucket::kTradeTime, TimeBucket::kOutOfTradeTime, TimeBucket::kOutOfTradeDay};

inline const char *BucketName(TimeBucket b) {
  switch (b) {
    case TimeBucket::kTradeTime:
      return "trade_time";
    case TimeBucket::kOutOfTradeTime:
      return "out_of_trade_time";
    case TimeBucket::kOutOfTradeDay:
      return "out_of_trade_day";
  }
  return "?";
}

inline TimeBucket ClassifyTime(const Timestamp &t, const TradeCalendar &cal) {
  if (!cal.IsTradeDay(t.date)) return TimeBucket::kOutOfTradeDay;
  return cal.InTradeTime(t) ? TimeBucket::kTradeTime : TimeBucket::kOutOfTradeTime;
}

namespace internal {

// Session bars of `day` with minute in [cal.open, end), gaps filled with the
// last traded bar; minutes before the first trade are dropped.
inline std::vector<MinuteBar> FilledSession(const DayBars &bars, Day day, int end,
                                            const TradeCalendar &cal) {
  std::vector<MinuteBar> out;
  auto it = bars.find(day);
  if (it == bars.end()) return out;
  const auto &v = it->second;
  size_t k = 0;
  while (k < v.size() && v[k].minute < cal.open) ++k;
  const MinuteBar *last = nullptr;
  for (int m = cal.open; m < end; ++m) {
    if (k < v.size() && v[k].minute == m) {
      last = &v[k++];
      out.push_back(*last);
    } else if (last != nullptr) {
      MinuteBar fill = *last;
      fill.minute = m;
      out.push_back(fill);
    }
  }
  return out;
}

}  // namespace internal

// Bars the model may see for news at `t`. In-trade news gets the same day's
// session up to the minute before the news; anything else gets the full
// session of the reference day. In-trade news with no bars yet that day falls
// back to the previous session.
inline std::vector<MinuteBar> SelectTradeWindow(const Timestamp &t, const TradeCalendar &cal,
                                                const DayBars &bars) {
  Day day{};
  if (cal.InTradeTime(t)) {
    auto out = internal::FilledSession(bars, t.date, t.minute, cal);
    if (!out.empty()) return out;
    auto prev = cal.PrevTradeDay(t.date);
    if (!prev) throw Error("no trade day before " + timefmt::FormatTimestamp(t));
    day = *prev;
  } else {
    day = cal.ReferenceDay(t);
  }
  auto out = internal::FilledSession(bars, day, cal.close, cal);
  if (out.empty()) {
    throw Error("no bars on " + timefmt::FormatDate(day) + " for news at " +
                timefmt::FormatTimestamp(t));
  }
  return out;
}

namespace internal {

inline double OpenOf(const MinuteBar &b) { return b.open; }
inline double CloseOf(const MinuteBar &b) { return b.close; }
inline double OpenOf(const IndexPoint &p) { return p.value; }
inline double CloseOf(const IndexPoint &p) { return p.value; }

template <typename Point>
const std::vector<Point> &DayPoints(const std::map<Day, std::vector<Point>> &series, Day d,
                                    const char *what) {
  auto it = series.find(d);
  if (it == series.end() || it->second.empty()) {
    throw Error(std::string("no ") + what + " data on " + timefmt::FormatDate(d));
  }
  return it->second;
}

template <typename Point>
double SessionClose(const std::vector<Point> &v, const TradeCalendar &cal, Day d,
                    const char *what) {
  const Point *last = nullptr;
  for (const auto &p : v) {
    if (p.minute >= cal.open && p.minute < cal.close) last = &p;
  }
  if (last == nullptr) {
    throw Error(std::string("no ") + what + " close on " + timefmt::FormatDate(d));
  }
  return CloseOf(*last);
}

template <typename Point>
double SessionOpen(const std::vector<Point> &v, const TradeCalendar &cal, Day d,
                   const char *what) {
  for (const auto &p : v) {
    if (p.minute >= cal.open && p.minute < cal.close) return OpenOf(p);
  }
  throw Error(std::string("no ") + what + " open on " + timefmt::FormatDate(d));
}

inline double Ratio(double from, double to, const char *what) {
  if (from == 0.0) throw Error(std::string("zero ") + what + " price at return start");
  return (to - from) / from;
}

}  // namespace internal

// Start and end prices of the return that labels news at `t`.
// In-trade: price at the news minute (last close at or before it) to the
// day's close. Otherwise: the reference day's close to the next trade day's
// open.
template <typename Point>
std::pair<double, double> ReturnEndpoints(const std::map<Day, std::vector<Point>> &series,
                                          const Timestamp &t, const TradeCalendar &cal,
                                          const char *what) {
  if (cal.InTradeTime(t)) {
    const auto &v = internal::DayPoints(series, t.date, what);
    const Point *at = nullptr;
    for (const auto &p : v) {
      if (p.minute >= cal.open && p.minute <= t.minute) at = &p;
    }
    if (at == nullptr) {
      throw Error(std::string("no ") + what + " price at or before " +
                  timefmt::FormatTimestamp(t));
    }
    return {internal::CloseOf(*at), internal::SessionClose(v, cal, t.date, what)};
  }
  const Day ref = cal.ReferenceDay(t);
  const auto next = cal.NextTradeDay(ref);
  if (!next) throw Error("no trade day after " + timefmt::FormatDate(ref));
  const double last_close =
      internal::SessionClose(internal::DayPoints(series, ref, what), cal, ref, what);
  const double next_open =
      internal::SessionOpen(internal::DayPoints(series, *next, what), cal, *next, what);
  return {last_close, next_open};
}

struct Movement {
  int label = 0;
  double excess = 0;        // stock return minus sector return
  double stock_return = 0;
  double sector_return = 0;
};

// Up iff the stock beat its sector; a tie is down.
inline Movement MovementFromReturns(double stock_return, double sector_return) {
  Movement m;
  m.stock_return = stock_return;
  m.sector_return = sector_return;
  m.excess = stock_return - sector_return;
  m.label = m.excess > 0.0 ? 1 : 0;
  return m;
}

inline Movement MovementFromPrices(double stock_from, double stock_to, double sector_from,
                                   double sector_to) {
  return MovementFromReturns(internal::Ratio(stock_from, stock_to, "stock"),
                             internal::Ratio(sector_from, sector_to, "sector"));
}

inline Movement MovementLabel(const DayBars &stock, const IndexDays &sector, const Timestamp &t,
                              const TradeCalendar &cal) {
  auto [s0, s1] = ReturnEndpoints(stock, t, cal, "stock");
  auto [i0, i1] = ReturnEndpoints(sector, t, cal, "sector index");
  return MovementFromPrices(s0, s1, i0, i1);
}

// Everything needed to window and label news for any stock.
struct MarketData {
  BarBook bars;
  IndexBook index;
  std::map<std::string, std::string> sector;  // stock -> index id
  TradeCalendar calendar;

  const DayBars &BarsOf(const std::string &stock) const {
    auto it = bars.find(stock);
    if (it == bars.end()) throw Error("no bars for stock " + stock);
    return it->second;
  }

  const IndexDays &SectorOf(const std::string &stock) const {
    auto s = sector.find(stock);
    if (s == sector.end()) throw Error("no sector for stock " + stock);
    auto it = index.find(s->second);
    if (it == index.end()) throw Error("no index series " + s->second);
    return it->second;
  }

  Matrix RawWindow(const std::string &stock, const Timestamp &t) const {
    return WindowTradeData(BuildMinuteFeatures(SelectTradeWindow(t, calendar, BarsOf(stock))));
  }

  Movement Label(const std::string &stock, const Timestamp &t) const {
    return MovementLabel(BarsOf(stock), SectorOf(stock), t, calendar);
  }
};

// ---- file formats ----

inline constexpr const char *kBarHeader = "stock,date,minute,open,close,high,low,volume,value,vwap";
inline constexpr const char *kIndexHeader = "index_id,date,minute,value";
inline constexpr const char *kSectorHeader = "stock,index_id";

namespace internal {

// Minute as "HH:MM" or a plain minute-of-day integer.
inline int ParseMinuteField(const std::string &s, int line) {
  if (s.find(':') != std::string::npos) return timefmt::ParseClock(s, line);
  const long long v = text::ParseInt(s, line);
  if (v < 0 || v >= 24 * 60) throw ParseError("minute out of range '" + s + "'", line);
  return static_cast<int>(v);
}

// Reads header + rows; calls `row(fields, line)` for every non-empty line.
template <typename RowFn>
void ReadCsv(std::istream &in, const char *header, size_t width, RowFn row) {
  std::string line;
  int n = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::Trim(line).empty()) continue;
    if (!seen_header) {
      if (text::Trim(line) != header) {
        throw ParseError("expected header '" + std::string(header) + "'", n);
      }
      seen_header = true;
      continue;
    }
    auto f = text::Split(line, ',');
    if (f.size() != width) {
      throw ParseError("expected " + std::to_string(width) + " fields, got " +
                           std::to_string(f.size()),
                       n);
    }
    for (auto &x : f) x = std::string(text::Trim(x));
    row(f, n);
  }
  if (!seen_header) throw ParseError("missing header '" + std::string(header) + "'");
}

template <typename Point>
void InsertSorted(std::vector<Point> &v, const Point &p, int line) {
  auto it = std::lower_bound(v.begin(), v.end(), p.minute,
                             [](const Point &a, int m) { return a.minute < m; });
  if (it != v.end() && it->minute == p.minute) {
    throw ParseError("duplicate minute " + timefmt::FormatClock(p.minute), line);
  }
  v.insert(it, p);
}

}  // namespace internal

inline BarBook ReadBars(std::istream &in) {
  BarBook book;
  internal::ReadCsv(in, kBarHeader, 10, [&](const std::vector<std::string> &f, int n) {
    MinuteBar b;
    const Day day = timefmt::ParseDate(f[1], n);
    b.minute = internal::ParseMinuteField(f[2], n);
    b.open = text::ParseDouble(f[3], n);
    b.close = text::ParseDouble(f[4], n);
    b.high = text::ParseDouble(f[5], n);
    b.low = text::ParseDouble(f[6], n);
    b.volume = text::ParseDouble(f[7], n);
    b.value = text::ParseDouble(f[8], n);
    b.vwap = text::ParseDouble(f[9], n);
    if (auto err = CheckBar(b); !err.empty()) throw ParseError(err, n);
    internal::InsertSorted(book[f[0]][day], b, n);
  });
  return book;
}

inline void WriteBars(std::ostream &out, const BarBook &book) {
  out << kBarHeader << '\n';
  for (const auto &[stock, days] : book) {
    for (const auto &[day, bars] : days) {
      const std::string date = timefmt::FormatDate(day);
      for (const auto &b : bars) {
        out << stock << ',' << date << ',' << timefmt::FormatClock(b.minute) << ','
            << text::FormatDouble(b.open) << ',' << text::FormatDouble(b.close) << ','
            << text::FormatDouble(b.high) << ',' << text::FormatDouble(b.low) << ','
            << text::FormatDouble(b.volume) << ',' << text::FormatDouble(b.value) << ','
            << text::FormatDouble(b.vwap) << '\n';
      }
    }
  }
}

inline IndexBook ReadIndex(std::istream &in) {
  IndexBook book;
  internal::ReadCsv(in, kIndexHeader, 4, [&](const std::vector<std::string> &f, int n) {
    IndexPoint p;
    const Day day = timefmt::ParseDate(f[1], n);
    p.minute = internal::ParseMinuteField(f[2], n);
    p.value = text::ParseDouble(f[3], n);
    internal::InsertSorted(book[f[0]][day], p, n);
  });
  return book;
}

inline void WriteIndex(std::ostream &out, const IndexBook &book) {
  out << kIndexHeader << '\n';
  for (const auto &[id, days] : book) {
    for (const auto &[day, points] : days) {
      const std::string date = timefmt::FormatDate(day);
      for (const auto &p : points) {
        out << id << ',' << date << ',' << timefmt::FormatClock(p.minute) << ','
            << text::FormatDouble(p.value) << '\n';
      }
    }
  }
}

inline std::map<std::string, std::string> ReadSectorMap(std::istream &in) {
  std::map<std::string, std::string> m;
  internal::ReadCsv(in, kSectorHeader, 2, [&](const std::vector<std::string> &f, int n) {
    if (!m.emplace(f[0], f[1]).second) throw ParseError("duplicate stock " + f[0], n);
  });
  return m;
}

inline void WriteSectorMap(std::ostream &out, const std::map<std::string, std::string> &m) {
  out << kSectorHeader << '\n';
  for (const auto &[stock, id] : m) out << stock << ',' << id << '\n';
}

// One trade date per line; optional `session HH:MM HH:MM` and `guard N`
// lines; `#` comments.
inline TradeCalendar ReadCalendar(std::istream &in) {
  TradeCalendar cal;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto f = text::SplitWhitespace(line);
    if (f.empty()) continue;
    if (f[0] == "session") {
      if (f.size() != 3) throw ParseError("expected 'session HH:MM HH:MM'", n);
      cal.open = timefmt::ParseClock(f[1], n);
      cal.close = timefmt::ParseClock(f[2], n);
      if (cal.close <= cal.open) throw ParseError("session close must follow open", n);
    } else if (f[0] == "guard") {
      if (f.size() != 2) throw ParseError("expected 'guard N'", n);
      cal.guard = static_cast<int>(text::ParseInt(f[1], n));
      if (cal.guard < 0) throw ParseError("guard must be >= 0", n);
    } else {
      if (f.size() != 1) throw ParseError("expected one date per line", n);
      cal.days.insert(timefmt::ParseDate(f[0], n));
    }
  }
  if (2 * cal.guard > cal.close - cal.open) {
    throw ParseError("guard leaves no in-trade time");
  }
  return cal;
}

inline void WriteCalendar(std::ostream &out, const TradeCalendar &cal) {
  out << "session " << timefmt::FormatClock(cal.open) << ' ' << timefmt::FormatClock(cal.close)
      << '\n';
  out << "guard " << cal.guard << '\n';
  for (Day d : cal.days) out << timefmt::FormatDate(d) << '\n';
}

}  // namespace evstock
