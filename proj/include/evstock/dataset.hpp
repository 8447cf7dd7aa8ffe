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

// Dataset directories, featurized samples, temporal splits and model inputs.
//
// A dataset directory holds:
//   news.txt      annotated corpus
//   bars.csv      minute bars
//   index.csv     sector index points
//   sectors.csv   stock -> index id
//   calendar.txt  trade days and session
//   gold.tsv      generator ground truth (synthetic datasets only)

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "evstock/corpus.hpp"
#include "evstock/dictionary.hpp"
#include "evstock/extraction.hpp"
#include "evstock/market.hpp"
#include "evstock/models.hpp"
#include "evstock/synth.hpp"

namespace evstock {

namespace fs = std::filesystem;

inline constexpr const char *kNewsFile = "news.txt";
inline constexpr const char *kBarsFile = "bars.csv";
inline constexpr const char *kIndexFile = "index.csv";
inline constexpr const char *kSectorFile = "sectors.csv";
inline constexpr const char *kCalendarFile = "calendar.txt";
inline constexpr const char *kGoldFile = "gold.tsv";
inline constexpr const char *kGoldHeader =
    "doc_id\tcovered\ttype\tpolarity\tintended_label\tbucket\tlabels";

inline std::ifstream OpenIn(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open " + p.string());
  return in;
}

inline std::ofstream OpenOut(const fs::path &p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

inline EventDictionary LoadDictionaryFile(const fs::path &p) {
  auto in = OpenIn(p);
  return LoadDictionary(in);
}

inline std::vector<AnnotatedNews> LoadCorpusFile(const fs::path &p) {
  auto in = OpenIn(p);
  return ParseCorpus(in);
}

inline MarketData LoadMarket(const fs::path &dir) {
  MarketData m;
  {
    auto in = OpenIn(dir / kBarsFile);
    m.bars = ReadBars(in);
  }
  {
    auto in = OpenIn(dir / kIndexFile);
    m.index = ReadIndex(in);
  }
  {
    auto in = OpenIn(dir / kSectorFile);
    m.sector = ReadSectorMap(in);
  }
  {
    auto in = OpenIn(dir / kCalendarFile);
    m.calendar = ReadCalendar(in);
  }
  return m;
}

inline void WriteMarket(const fs::path &dir, const MarketData &m) {
  fs::create_directories(dir);
  {
    auto out = OpenOut(dir / kBarsFile);
    WriteBars(out, m.bars);
  }
  {
    auto out = OpenOut(dir / kIndexFile);
    WriteIndex(out, m.index);
  }
  {
    auto out = OpenOut(dir / kSectorFile);
    WriteSectorMap(out, m.sector);
  }
  {
    auto out = OpenOut(dir / kCalendarFile);
    WriteCalendar(out, m.calendar);
  }
}

struct GoldRecord {
  std::string doc_id;
  bool covered = false;
  std::string type_id;
  int polarity = 1;
  int intended_label = 1;
  TimeBucket bucket = TimeBucket::kTradeTime;
  std::vector<std::string> labels;

  friend bool operator==(const GoldRecord &, const GoldRecord &) = default;
};

inline GoldRecord ToGold(const PlantedSample &s, const LabelAlphabet &a) {
  return {s.news.doc_id, s.covered,          s.type_id, s.polarity, s.intended_label,
          s.bucket,      LabelNames(s.gold_labels, a)};
}

inline void WriteGold(std::ostream &out, const std::vector<GoldRecord> &gold) {
  out << kGoldHeader << '\n';
  for (const auto &g : gold) {
    out << g.doc_id << '\t' << (g.covered ? 1 : 0) << '\t' << (g.type_id.empty() ? "-" : g.type_id)
        << '\t' << g.polarity << '\t' << g.intended_label << '\t' << BucketName(g.bucket) << '\t'
        << text::Join(g.labels, " ") << '\n';
  }
}

inline TimeBucket ParseBucket(const std::string &s, int line = 0) {
  for (auto b : kAllBuckets) {
    if (s == BucketName(b)) return b;
  }
  throw ParseError("unknown time bucket '" + s + "'", line);
}

inline std::vector<GoldRecord> ReadGold(std::istream &in) {
  std::vector<GoldRecord> out;
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (no == 1) {
      if (line != kGoldHeader) throw ParseError("unexpected gold header", no);
      continue;
    }
    if (line.empty()) continue;
    auto f = text::Split(line, '\t');
    if (f.size() != 7) throw ParseError("gold row needs 7 fields", no);
    GoldRecord g;
    g.doc_id = f[0];
    g.covered = text::ParseInt(f[1], no) != 0;
    g.type_id = f[2] == "-" ? "" : f[2];
    g.polarity = static_cast<int>(text::ParseInt(f[3], no));
    g.intended_label = static_cast<int>(text::ParseInt(f[4], no));
    g.bucket = ParseBucket(f[5], no);
    g.labels = text::SplitWhitespace(f[6]);
    out.push_back(std::move(g));
  }
  return out;
}

inline void WriteDataset(const fs::path &dir, const SynthDataset &ds, const EventDictionary &d) {
  WriteMarket(dir, ds.market);
  {
    auto out = OpenOut(dir / kNewsFile);
    out << SerializeCorpus(ds.News());
  }
  std::vector<GoldRecord> gold;
  for (const auto &s : ds.samples) gold.push_back(ToGold(s, d.label_alphabet));
  auto out = OpenOut(dir / kGoldFile);
  WriteGold(out, gold);
}

// ---- featurized samples ----

struct Sample {
  std::string doc_id;
  std::string stock_id;
  Timestamp timestamp;
  TimeBucket bucket = TimeBucket::kTradeTime;
  std::vector<std::string> tokens;
  std::vector<int> fine_labels;  // extraction output: fine frame or S/P/O fallback
  std::vector<int> spo_labels;   // S/P/O labels for every sample
  bool covered = false;
  Matrix window;  // raw T x 120, unscaled
  Movement movement;

  int label() const { return movement.label; }
};

inline Sample Featurize(const AnnotatedNews &news, const EventDictionary &d,
                        const MarketData &market) {
  try {
    Sample s;
    s.doc_id = news.doc_id;
    s.stock_id = news.stock_id;
    s.timestamp = news.timestamp;
    s.bucket = ClassifyTime(news.timestamp, market.calendar);
    s.tokens = news.tokens;
    auto fine = Extract(news, d);
    s.fine_labels = std::move(fine.labels);
    s.covered = fine.covered;
    s.spo_labels = ExtractSpo(news, d).labels;
    s.window = market.RawWindow(news.stock_id, news.timestamp);
    s.movement = market.Label(news.stock_id, news.timestamp);
    return s;
  } catch (const Error &e) {
    throw Error("record " + news.doc_id + ": " + e.what());
  }
}

inline std::vector<Sample> FeaturizeAll(const std::vector<AnnotatedNews> &corpus,
                                        const EventDictionary &d, const MarketData &market) {
  std::vector<Sample> out;
  out.reserve(corpus.size());
  for (const auto &n : corpus) out.push_back(Featurize(n, d, market));
  return out;
}

// ---- temporal split ----

struct Splits {
  std::vector<Sample> train;
  std::vector<Sample> dev;
  std::vector<Sample> test;
};

inline bool EarlierSample(const Sample &a, const Sample &b) {
  return std::tie(a.timestamp, a.doc_id) < std::tie(b.timestamp, b.doc_id);
}

// Oldest samples train, the next dev_n validate, the newest test_n test.
inline Splits SplitTemporal(std::vector<Sample> samples, int dev_n, int test_n) {
  const int n = static_cast<int>(samples.size());
  if (dev_n < 0 || test_n < 0) throw ValidationError("split sizes must be non-negative");
  if (dev_n + test_n >= n) {
    throw ValidationError("split needs dev + test < n (dev " + std::to_string(dev_n) + ", test " +
                          std::to_string(test_n) + ", n " + std::to_string(n) + ")");
  }
  std::sort(samples.begin(), samples.end(), EarlierSample);
  Splits s;
  const int train_n = n - dev_n - test_n;
  auto b = std::make_move_iterator(samples.begin());
  s.train.assign(b, b + train_n);
  s.dev.assign(b + train_n, b + train_n + dev_n);
  s.test.assign(b + train_n + dev_n, std::make_move_iterator(samples.end()));
  return s;
}

// ---- model inputs ----

// An uncovered sample has no dictionary frame for the multi-task model to
// learn from, so its fine labels are left empty there.
inline ModelInput EncodeSample(const Sample &s, const nn::Vocab &vocab, const StockScaler &scaler,
                               ModelKind kind = ModelKind::kSspm) {
  ModelInput in;
  in.token_ids = vocab.Encode(s.tokens);
  if (kind == ModelKind::kSspm || s.covered) in.fine_labels = s.fine_labels;
  in.spo_labels = s.spo_labels;
  in.window = scaler.Scale(s.stock_id, s.window);
  return in;
}

// Vocabulary and window scaler, both fitted on training samples only.
struct Encoder {
  nn::Vocab vocab;
  StockScaler scaler;

  static Encoder Fit(const std::vector<Sample> &train, int max_vocab) {
    if (train.empty()) throw ValidationError("cannot fit on an empty training split");
    Encoder e;
    std::vector<std::vector<std::string>> sentences;
    std::vector<std::string> stocks;
    std::vector<const Matrix *> windows;
    for (const auto &s : train) {
      sentences.push_back(s.tokens);
      stocks.push_back(s.stock_id);
      windows.push_back(&s.window);
    }
    e.vocab = nn::Vocab::Build(sentences, max_vocab);
    e.scaler = StockScaler::Fit(stocks, windows);
    return e;
  }

  ModelInput Encode(const Sample &s, ModelKind kind = ModelKind::kSspm) const {
    return EncodeSample(s, vocab, scaler, kind);
  }
};

}  // namespace evstock
