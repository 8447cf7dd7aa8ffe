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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "evstock/checkpoint.hpp"
#include "evstock/dataset.hpp"
#include "evstock/metrics.hpp"
#include "evstock/report.hpp"
#include "evstock/training.hpp"

namespace evstock {
namespace {

const EventDictionary &Dict() {
  static const EventDictionary d = [] {
    std::ifstream in(std::string(EVSTOCK_DATA_DIR) + "/tfed_sample.dict");
    return LoadDictionary(in);
  }();
  return d;
}

SynthDataset MakeData(int n, uint64_t seed, double p_covered = 0.7) {
  SynthConfig cfg;
  cfg.n_samples = n;
  cfg.p_covered = p_covered;
  cfg.seed = seed;
  return SynthCorpus(cfg, Dict());
}

std::vector<Sample> MakeSamples(int n, uint64_t seed) {
  const auto ds = MakeData(n, seed);
  return FeaturizeAll(ds.News(), Dict(), ds.market);
}

ModelConfig Tiny(ModelKind kind) {
  ModelConfig c;
  c.kind = kind;
  c.hidden = 4;
  c.word_dim = 6;
  c.event_dim = 8;
  c.vocab_size = 400;
  return c;
}

// ---- metrics ----

// Textbook form with every factor under its own root.
double MccOracle(long tp, long tn, long fp, long fn) {
  const long double a = tp + fp, b = tp + fn, c = tn + fp, d = tn + fn;
  if (a == 0 || b == 0 || c == 0 || d == 0) return 0.0;
  const long double num = static_cast<long double>(tp) * tn - static_cast<long double>(fp) * fn;
  return static_cast<double>(num / (std::sqrt(a) * std::sqrt(b) * std::sqrt(c) * std::sqrt(d)));
}

TEST(MetricsTest, MccMatchesDirectFormula) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 1000; ++i) {
    long v[4];
    for (auto &x : v) x = static_cast<long>(UniformIndex(rng, i % 10 == 0 ? 3 : 5000));
    const double got = Mcc(v[0], v[1], v[2], v[3]);
    EXPECT_NEAR(got, MccOracle(v[0], v[1], v[2], v[3]), 1e-12) << v[0] << ' ' << v[1];
    EXPECT_GE(got, -1.0);
    EXPECT_LE(got, 1.0);
  }
}

TEST(MetricsTest, MccKnownValues) {
  EXPECT_NEAR(Mcc(3, 4, 1, 2), 10.0 / std::sqrt(600.0), 1e-15);
  EXPECT_DOUBLE_EQ(Mcc(5, 7, 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(Mcc(0, 0, 5, 7), -1.0);
  EXPECT_EQ(Mcc(6, 0, 4, 0), 0.0);  // all predicted up
  EXPECT_EQ(Mcc(0, 6, 0, 4), 0.0);  // all predicted down
  EXPECT_EQ(Mcc(0, 0, 0, 0), 0.0);
  EXPECT_THROW(Mcc(-1, 1, 1, 1), Error);
}

TEST(MetricsTest, ConfusionCounts) {
  Confusion c;
  const std::vector<std::pair<int, int>> pg = {{1, 1}, {1, 0}, {0, 0}, {0, 1}, {1, 1}};
  for (auto [p, g] : pg) c.Add(p, g);
  EXPECT_EQ(c.tp, 2);
  EXPECT_EQ(c.fp, 1);
  EXPECT_EQ(c.tn, 1);
  EXPECT_EQ(c.fn, 1);
  EXPECT_DOUBLE_EQ(c.Accuracy(), 0.6);
  EXPECT_EQ(Confusion{}.Accuracy(), 0.0);
}

TEST(MetricsTest, TokenF1) {
  TokenF1 same;
  same.Add({0, 1, 2, 0, 3}, {0, 1, 2, 0, 3});
  EXPECT_DOUBLE_EQ(same.F1(), 1.0);

  TokenF1 none;
  none.Add({0, 0, 0}, {1, 2, 0});
  EXPECT_EQ(none.F1(), 0.0);
  EXPECT_EQ(none.Precision(), 0.0);

  // 2 right, 1 wrong label, 1 spurious, 1 missed: tp 2, fp 2, fn 2.
  TokenF1 f;
  f.Add({1, 2, 3, 4, 0}, {1, 2, 4, 0, 5});
  EXPECT_EQ(f.tp, 2);
  EXPECT_EQ(f.fp, 2);
  EXPECT_EQ(f.fn, 2);
  EXPECT_DOUBLE_EQ(f.F1(), 0.5);
  EXPECT_THROW(f.Add({1}, {1, 2}), ShapeError);
}

// ---- splits ----

TEST(SplitTest, SizesOrderAndDisjointness) {
  const auto samples = MakeSamples(100, 3);
  const auto s = SplitTemporal(samples, 10, 10);
  EXPECT_EQ(s.train.size(), 80u);
  EXPECT_EQ(s.dev.size(), 10u);
  EXPECT_EQ(s.test.size(), 10u);
  auto max_time = [](const std::vector<Sample> &v) {
    return std::max_element(v.begin(), v.end(), EarlierSample)->timestamp;
  };
  auto min_time = [](const std::vector<Sample> &v) {
    return std::min_element(v.begin(), v.end(), EarlierSample)->timestamp;
  };
  EXPECT_LE(max_time(s.train), min_time(s.dev));
  EXPECT_LE(max_time(s.dev), min_time(s.test));
  std::set<std::string> ids;
  for (const auto *part : {&s.train, &s.dev, &s.test}) {
    for (const auto &x : *part) EXPECT_TRUE(ids.insert(x.doc_id).second) << x.doc_id;
  }
  EXPECT_EQ(ids.size(), 100u);
}

TEST(SplitTest, InsufficientSamples) {
  const auto samples = MakeSamples(20, 3);
  EXPECT_THROW(SplitTemporal(samples, 10, 10), ValidationError);
  EXPECT_THROW(SplitTemporal(samples, 15, 6), ValidationError);
  EXPECT_THROW(SplitTemporal(samples, -1, 2), ValidationError);
  EXPECT_NO_THROW(SplitTemporal(samples, 10, 9));
}

TEST(SplitTest, TiesBrokenByDocId) {
  auto samples = MakeSamples(30, 4);
  for (auto &s : samples) s.timestamp = samples.front().timestamp;
  std::mt19937_64 rng(5);
  auto shuffled = samples;
  StableShuffle(shuffled, rng);
  const auto a = SplitTemporal(samples, 5, 5), b = SplitTemporal(shuffled, 5, 5);
  std::vector<std::string> ids;
  for (const auto *part : {&b.train, &b.dev, &b.test}) {
    for (const auto &x : *part) ids.push_back(x.doc_id);
  }
  EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
  for (size_t i = 0; i < a.test.size(); ++i) EXPECT_EQ(a.test[i].doc_id, b.test[i].doc_id);
}

// ---- dataset files ----

TEST(DatasetTest, WriteReadRoundTrip) {
  const auto ds = MakeData(60, 6);
  const auto dir = std::filesystem::temp_directory_path() / "evstock_harness_rt";
  std::filesystem::remove_all(dir);
  WriteDataset(dir, ds, Dict());
  const auto market = LoadMarket(dir);
  std::ostringstream a, b;
  WriteBars(a, ds.market.bars);
  WriteBars(b, market.bars);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(SerializeCorpus(LoadCorpusFile(dir / kNewsFile)), SerializeCorpus(ds.News()));
  auto in = OpenIn(dir / kGoldFile);
  const auto gold = ReadGold(in);
  ASSERT_EQ(gold.size(), ds.samples.size());
  for (size_t i = 0; i < gold.size(); ++i) {
    EXPECT_EQ(gold[i], ToGold(ds.samples[i], Dict().label_alphabet));
  }
  // Featurizing the reloaded files gives the same labels and windows.
  const auto s1 = FeaturizeAll(ds.News(), Dict(), ds.market);
  const auto s2 = FeaturizeAll(LoadCorpusFile(dir / kNewsFile), Dict(), market);
  for (size_t i = 0; i < s1.size(); ++i) {
    EXPECT_EQ(s1[i].label(), s2[i].label());
    EXPECT_EQ(s1[i].window.data, s2[i].window.data);
  }
  std::filesystem::remove_all(dir);
}

TEST(DatasetTest, FeaturizeNamesFailingRecord) {
  auto ds = MakeData(10, 6);
  auto news = ds.News();
  news[3].stock_id = "NOPE";
  try {
    FeaturizeAll(news, Dict(), ds.market);
    FAIL() << "expected an error";
  } catch (const Error &e) {
    EXPECT_NE(std::string(e.what()).find(news[3].doc_id), std::string::npos) << e.what();
  }
}

// ---- training and evaluation ----

struct Trained {
  Splits splits;
  TrainResult result;
};

Trained TrainTiny(ModelKind kind, uint64_t seed, int epochs = 4, bool pipeline = false) {
  auto splits = SplitTemporal(MakeSamples(120, 12), 20, 20);
  auto cfg = Tiny(kind);
  cfg.seed = seed;
  TrainHyper h;
  h.epochs = epochs;
  h.batch = 16;
  h.seed = seed;
  h.pipeline = pipeline;
  auto r = Train(cfg, splits.train, splits.dev, Dict().label_alphabet, h);
  return Trained{std::move(splits), std::move(r)};
}

TEST(TrainTest, MemorizesTwoSamples) {
  const auto all = MakeSamples(40, 2);
  std::vector<Sample> two;
  for (int want : {0, 1}) {
    for (const auto &s : all) {
      if (s.label() == want) {
        two.push_back(s);
        break;
      }
    }
  }
  ASSERT_EQ(two.size(), 2u);
  auto cfg = Tiny(ModelKind::kSspm);
  cfg.dropout = 0.0;
  TrainHyper h;
  h.epochs = 60;
  h.batch = 2;
  h.lr = 0.01;
  const auto r = Train(cfg, two, {}, Dict().label_alphabet, h);
  EXPECT_EQ(r.history.back().train_acc, 1.0);
  EXPECT_EQ(Evaluate(r.model, two).metrics.accuracy(), 1.0);
}

TEST(TrainTest, SameSeedSameHistoryAndCheckpoint) {
  const auto a = TrainTiny(ModelKind::kMsspm, 7), b = TrainTiny(ModelKind::kMsspm, 7);
  EXPECT_EQ(a.result.history, b.result.history);
  std::ostringstream ca, cb;
  WriteCheckpoint(ca, a.result.model.ToCheckpoint());
  WriteCheckpoint(cb, b.result.model.ToCheckpoint());
  EXPECT_EQ(ca.str(), cb.str());
  const auto c = TrainTiny(ModelKind::kMsspm, 8);
  EXPECT_NE(a.result.history, c.result.history);
}

TEST(TrainTest, EvaluationIsSideEffectFree) {
  const auto t = TrainTiny(ModelKind::kMsspm, 3);
  const auto e1 = Evaluate(t.result.model, t.splits.test);
  const auto e2 = Evaluate(t.result.model, t.splits.test);
  EXPECT_EQ(e1.metrics, e2.metrics);
  ASSERT_EQ(e1.predictions.size(), e2.predictions.size());
  for (size_t i = 0; i < e1.predictions.size(); ++i) {
    EXPECT_EQ(e1.predictions[i].p_up, e2.predictions[i].p_up);
  }
  EXPECT_TRUE(e1.metrics.has_tagging);
  EXPECT_GE(e1.metrics.micro_f1(), 0.0);
  EXPECT_LE(e1.metrics.micro_f1(), 1.0);
}

TEST(TrainTest, BucketCountsPartitionTheSplit) {
  const auto t = TrainTiny(ModelKind::kSspm, 3, 1);
  const auto m = Evaluate(t.result.model, t.splits.test).metrics;
  long sum = 0;
  for (auto b : kAllBuckets) sum += m.bucket(b).n();
  EXPECT_EQ(sum, static_cast<long>(t.splits.test.size()));
  EXPECT_EQ(m.covered.n() + m.uncovered.n(), static_cast<long>(t.splits.test.size()));
}

TEST(TrainTest, EarlyStopFollowsPatienceRule) {
  for (uint64_t seed : {1, 2, 3}) {
    const auto splits = SplitTemporal(MakeSamples(120, 12), 20, 20);
    TrainHyper h;
    h.epochs = 25;
    h.batch = 16;
    h.patience = 2;
    h.seed = seed;
    h.lr = 0.02;
    auto r = Train(Tiny(ModelKind::kSspm), splits.train, splits.dev, Dict().label_alphabet, h);
    const auto &hist = r.history;
    // Recompute the best index and the stopping epoch from the recorded curve.
    int best = 0, since = 0, stop = -1;
    for (int i = 0; i < static_cast<int>(hist.size()); ++i) {
      const auto score = std::make_pair(hist[i].dev_acc, hist[i].dev_micro_f1);
      if (i == 0 || score > std::make_pair(hist[best].dev_acc, hist[best].dev_micro_f1)) {
        best = i;
        since = 0;
      } else if (++since >= h.patience) {
        stop = i;
        break;
      }
    }
    EXPECT_EQ(r.best_epoch, best) << seed;
    if (stop >= 0) {
      EXPECT_EQ(static_cast<int>(hist.size()), stop + 1) << seed;
    } else {
      EXPECT_EQ(static_cast<int>(hist.size()), h.epochs) << seed;
    }
    // The returned weights are the best epoch's.
    EXPECT_EQ(Evaluate(r.model, splits.dev).metrics.accuracy(), hist[best].dev_acc) << seed;
  }
}

TEST(TrainTest, PipelineRunsBothStagesAndFreezesExtractor) {
  const auto t = TrainTiny(ModelKind::kMsspm, 5, 3, true);
  const auto &h = t.result.history;
  ASSERT_FALSE(h.empty());
  EXPECT_EQ(h.front().stage, "extractor");
  EXPECT_EQ(h.back().stage, "predictor");
  EXPECT_EQ(h[t.result.best_epoch].stage, "predictor");
  EXPECT_EQ(t.result.model.model.config().lambda, Tiny(ModelKind::kMsspm).lambda);
  EXPECT_THROW(TrainTiny(ModelKind::kSspm, 5, 1, true), ValidationError);
}

TEST(TrainTest, CheckpointReloadPredictsIdentically) {
  const auto t = TrainTiny(ModelKind::kMsspm, 9, 2);
  std::stringstream buf;
  WriteCheckpoint(buf, t.result.model.ToCheckpoint());
  const auto back = TrainedModel::FromCheckpoint(ReadCheckpoint(buf));
  const auto a = Evaluate(t.result.model, t.splits.test), b = Evaluate(back, t.splits.test);
  EXPECT_EQ(a.metrics, b.metrics);
  for (size_t i = 0; i < a.predictions.size(); ++i) {
    EXPECT_EQ(a.predictions[i].p_up, b.predictions[i].p_up);
    EXPECT_EQ(a.predictions[i].tags, b.predictions[i].tags);
  }
}

TEST(TrainTest, EnsembleRoutesByCoverage) {
  const auto s = TrainTiny(ModelKind::kSspm, 4, 2), m = TrainTiny(ModelKind::kMsspm, 4, 2);
  const auto &test = s.splits.test;
  const auto ens = EvaluateEnsemble(s.result.model, m.result.model, test);
  const auto es = Evaluate(s.result.model, test), em = Evaluate(m.result.model, test);
  int covered = 0;
  for (size_t i = 0; i < test.size(); ++i) {
    const auto &want = test[i].covered ? es.predictions[i] : em.predictions[i];
    covered += test[i].covered ? 1 : 0;
    EXPECT_EQ(ens.predictions[i].p_up, want.p_up) << test[i].doc_id;
    EXPECT_EQ(ens.predictions[i].predicted, want.predicted);
  }
  EXPECT_GT(covered, 0);
  EXPECT_LT(covered, static_cast<int>(test.size()));
  EXPECT_EQ(ens.metrics.covered, es.metrics.covered);
  EXPECT_EQ(ens.metrics.uncovered, em.metrics.uncovered);
}

TEST(TrainTest, InvalidHyperRejected) {
  const auto samples = MakeSamples(30, 1);
  TrainHyper h;
  h.batch = 0;
  EXPECT_THROW(Train(Tiny(ModelKind::kSspm), samples, {}, Dict().label_alphabet, h),
               ValidationError);
  EXPECT_THROW(Train(Tiny(ModelKind::kSspm), {}, {}, Dict().label_alphabet, TrainHyper{}),
               ValidationError);
  const auto paper = TrainHyper::PaperScale();
  EXPECT_EQ(paper.batch, 128);
  EXPECT_EQ(paper.lr, 0.001);
  EXPECT_EQ(paper.lr_decay, 0.0005);
}

// ---- report ----

Metrics FakeMetrics(bool tagging) {
  Metrics m;
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    const int p = static_cast<int>(UniformIndex(rng, 2)), g = static_cast<int>(UniformIndex(rng, 2));
    const auto b = kAllBuckets[i % 3];
    m.overall.Add(p, g);
    m.buckets[static_cast<size_t>(b)].Add(p, g);
    (i % 4 == 0 ? m.uncovered : m.covered).Add(p, g);
  }
  m.has_tagging = tagging;
  if (tagging) m.tagging.Add({1, 2, 0, 3}, {1, 2, 3, 3});
  return m;
}

TEST(ReportTest, MetricsCsvRoundTripsAndIsStable) {
  auto rows = MetricsRows("sspm-fine", FakeMetrics(false));
  const auto more = MetricsRows("msspm-fine", FakeMetrics(true));
  rows.insert(rows.end(), more.begin(), more.end());
  std::ostringstream a, b;
  WriteMetricsCsv(a, rows);
  WriteMetricsCsv(b, rows);
  EXPECT_EQ(a.str(), b.str());
  std::istringstream in(a.str());
  EXPECT_EQ(ReadMetricsCsv(in), rows);
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), kMetricsHeader);
}

TEST(ReportTest, CoverageRowsForBothModels) {
  auto rows = MetricsRows("sspm-fine", FakeMetrics(false));
  const auto more = MetricsRows("msspm-fine", FakeMetrics(true));
  rows.insert(rows.end(), more.begin(), more.end());
  const auto ordered = OrderRows(rows);
  std::set<std::pair<std::string, std::string>> coverage;
  for (const auto &r : ordered) {
    if (r.section == "coverage") coverage.insert({r.model, r.group});
  }
  EXPECT_EQ(coverage.size(), 4u);
  EXPECT_EQ(ordered.front().section, "overall");
  EXPECT_EQ(ordered.back().section, "coverage");
  const auto text = RenderReport(rows, {}, ReportFormat::kText);
  EXPECT_NE(text.find("By dictionary coverage"), std::string::npos);
  EXPECT_NE(text.find("uncovered"), std::string::npos);
  EXPECT_NE(text.find("micro_f1%"), std::string::npos);
}

TEST(ReportTest, BucketSharesMatchComposition) {
  const auto ds = MakeData(300, 4);
  const auto samples = FeaturizeAll(ds.News(), Dict(), ds.market);
  Metrics m;
  for (const auto &s : samples) {
    m.overall.Add(1, s.label());
    m.buckets[static_cast<size_t>(s.bucket)].Add(1, s.label());
    (s.covered ? m.covered : m.uncovered).Add(1, s.label());
  }
  std::array<int, 3> planted{};
  for (const auto &s : ds.samples) ++planted[static_cast<size_t>(s.bucket)];
  for (const auto &r : MetricsRows("x", m)) {
    if (r.section != "bucket") continue;
    const auto b = ParseBucket(r.group);
    EXPECT_DOUBLE_EQ(r.share, planted[static_cast<size_t>(b)] / 300.0) << r.group;
  }
}

TEST(ReportTest, EmptySplitIsWellFormed) {
  const auto rows = MetricsRows("sspm-fine", Metrics{});
  ASSERT_EQ(rows.size(), 6u);
  for (const auto &r : rows) {
    EXPECT_EQ(r.n, 0);
    EXPECT_EQ(r.share, 0.0);
    EXPECT_EQ(r.accuracy, 0.0);
    EXPECT_EQ(r.mcc, 0.0);
  }
  const auto csv = RenderReport(rows, {}, ReportFormat::kCsv);
  std::istringstream in(csv);
  EXPECT_EQ(ReadMetricsCsv(in), rows);
  const auto none = RenderReport({}, {}, ReportFormat::kCsv);
  EXPECT_EQ(none, std::string(kMetricsHeader) + "\n");
  EXPECT_NE(RenderReport({}, {}, ReportFormat::kText).find("Overall"), std::string::npos);
}

TEST(ReportTest, HistoryCsvRoundTrips) {
  std::vector<EpochRecord> hist = {{"joint", 1, 0.7, 0.5, 0.69, 0.55, 0.1, 0.0},
                                   {"joint", 2, 0.1 + 0.2, 1.0 / 3, 0.5, 0.6, -0.2, 0.25}};
  std::ostringstream out;
  WriteHistoryCsv(out, "sspm-fine", hist);
  std::istringstream in(out.str());
  const auto back = ReadHistoryCsv(in);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].model, "sspm-fine");
  EXPECT_EQ(back[0].record, hist[0]);
  EXPECT_EQ(back[1].record, hist[1]);
  const auto text = RenderReport({}, back, ReportFormat::kText);
  EXPECT_NE(text.find("Training history"), std::string::npos);
}

TEST(ReportTest, BadInputsRejected) {
  EXPECT_THROW(MetricsRows("a,b", Metrics{}), ValidationError);
  std::istringstream bad_header("model,section\n");
  EXPECT_THROW(ReadMetricsCsv(bad_header), ParseError);
  std::istringstream bad_section(std::string(kMetricsHeader) + "\nm,nope,all,1,1,1,0,\n");
  EXPECT_THROW(ReadMetricsCsv(bad_section), ParseError);
  EXPECT_THROW(ParseReportFormat("xml"), ValidationError);
}

TEST(ReportTest, ModelLabels) {
  auto c = Tiny(ModelKind::kMsspm);
  EXPECT_EQ(ModelLabel(c), "msspm-fine");
  c.ablations = Ablations::Parse("crf_off,co_attn_off");
  EXPECT_EQ(ModelLabel(c), "msspm-fine+co_attn_off+crf_off");
}

}  // namespace
}  // namespace evstock
