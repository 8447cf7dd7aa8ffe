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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "evstock/checkpoint.hpp"
#include "evstock/dataset.hpp"
#include "evstock/layers.hpp"
#include "evstock/metrics.hpp"
#include "evstock/training.hpp"

namespace evstock {
namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

std::string Fixed(double v, int digits = 4) { return text::FormatFixed(v, digits); }

std::string Sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

const EventDictionary &Dict() {
  static const EventDictionary d =
      LoadDictionaryFile(std::string(EVSTOCK_DATA_DIR) + "/tfed_sample.dict");
  return d;
}

Matrix RandomMatrix(int r, int c, std::mt19937_64 &rng, double scale = 1.0) {
  Matrix m(r, c);
  for (double &v : m.data) v = (2 * UnitUniform(rng) - 1) * scale;
  return m;
}

// ---- 1. gradient fidelity ----

Outcome GradientFidelity() {
  const auto start = Clock::now();
  constexpr int kVocab = 20, kLabels = 7;
  // The strict floor of 1e-8 flags parameters whose true gradient is below
  // the ~1e-11 round-off of a central difference at eps 1e-5; 1e-6 keeps
  // those entries measured in absolute terms.
  double worst_strict = 0, worst = 0;
  int checks = 0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed * 101);
    for (auto kind : {ModelKind::kSspm, ModelKind::kMsspm}) {
      ModelConfig c;
      c.kind = kind;
      c.hidden = 4;
      c.event_dim = 8;
      c.word_dim = 5;
      c.dropout = 0.0;
      c.seed = seed;
      Model m(c, kVocab, kLabels);
      ModelInput in;
      const int len = 6, steps = 3;
      for (int i = 0; i < len; ++i) {
        in.token_ids.push_back(static_cast<int>(UniformIndex(rng, kVocab)));
        in.fine_labels.push_back(static_cast<int>(UniformIndex(rng, kLabels)));
        in.spo_labels.push_back(static_cast<int>(UniformIndex(rng, kLabels)));
      }
      in.window = Matrix(steps, kStepWidth);
      for (double &v : in.window.data) v = UnitUniform(rng);
      const int target = static_cast<int>(seed % 2);
      std::mt19937_64 unused(0);
      auto loss = [&] { return m.Forward(in, false, unused, target).loss; };
      worst_strict = std::max(worst_strict, nn::GradCheck(loss, m.store(), 1e-5, 10000, seed, 1e-8));
      worst = std::max(worst, nn::GradCheck(loss, m.store(), 1e-5, 10000, seed, 1e-6));
      ++checks;
    }
  }
  const double secs = Seconds(start);
  return {worst < 1e-4 && secs < 60,
          std::to_string(checks) + " full-model checks (sspm, msspm x 5 seeds): max rel err " +
              Sci(worst) + " with floor 1e-6 (" + Sci(worst_strict) + " with floor 1e-8), " +
              Fixed(secs, 1) + " s"};
}

// ---- 2. CRF oracle ----

Outcome CrfOracle() {
  std::mt19937_64 rng(2);
  double worst = 0;
  int viterbi_exact = 0;
  const int n = 100;
  for (int trial = 0; trial < n; ++trial) {
    const int len = 1 + static_cast<int>(UniformIndex(rng, 6));
    const int ny = 1 + static_cast<int>(UniformIndex(rng, 5));
    const Matrix em = RandomMatrix(len, ny, rng, 3), tr = RandomMatrix(ny, ny, rng, 2),
                 st = RandomMatrix(1, ny, rng);
    // Enumerate every label path with the score written out directly.
    std::vector<int> path(len, 0);
    std::vector<double> scores;
    double best = -INFINITY;
    for (;;) {
      double s = st(0, path[0]) + em(0, path[0]);
      for (int t = 1; t < len; ++t) s += tr(path[t - 1], path[t]) + em(t, path[t]);
      scores.push_back(s);
      best = std::max(best, s);
      int t = len - 1;
      while (t >= 0 && ++path[t] == ny) path[t--] = 0;
      if (t < 0) break;
    }
    double sum = 0;
    for (double s : scores) sum += std::exp(s - best);
    const double brute = best + std::log(sum);
    const double got = layers::CrfLogPartition(em, tr, st);
    worst = std::max(worst, std::abs(got - brute) / std::max(std::abs(brute), 1e-300));
    const auto vit = layers::CrfViterbi(em, tr, st);
    viterbi_exact += layers::CrfPathScore(em, tr, st, vit) == best ? 1 : 0;
  }
  return {worst < 1e-10 && viterbi_exact == n,
          "log-partition max rel err " + Sci(worst) + "; Viterbi score == enumerated max in " +
              std::to_string(viterbi_exact) + "/" + std::to_string(n)};
}

// ---- 3. attention normalization ----

Outcome AttentionNormalization() {
  std::mt19937_64 rng(3);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int l = 1 + static_cast<int>(UniformIndex(rng, 8));
    const int t = 1 + static_cast<int>(UniformIndex(rng, 4));
    const int d = 2 + static_cast<int>(UniformIndex(rng, 6));
    auto self = layers::SelfAttention(nn::Constant(RandomMatrix(l, d, rng, 2)),
                                      nn::Constant(RandomMatrix(d, d, rng, 2)));
    for (int i = 0; i < l; ++i) {
      double s = 0;
      for (int j = 0; j < l; ++j) s += self.weights->value(i, j);
      worst = std::max(worst, std::abs(s - 1));
    }
    auto co = layers::CoAttention(nn::Constant(RandomMatrix(l, d, rng, 2)),
                                  nn::Constant(RandomMatrix(t, d, rng, 2)),
                                  nn::Constant(RandomMatrix(d, d, rng, 2)));
    for (int i = 0; i < l; ++i) {
      double s = 0;
      for (int j = 0; j < t; ++j) s += co.alpha->value(i, j);
      worst = std::max(worst, std::abs(s - 1));
    }
    // beta is stored transposed: its rows are the columns of the L x T map.
    for (int j = 0; j < t; ++j) {
      double s = 0;
      for (int i = 0; i < l; ++i) s += co.beta->value(j, i);
      worst = std::max(worst, std::abs(s - 1));
    }
  }
  return {worst <= 1e-6, "100 instances, max |sum - 1| over self, alpha and beta: " + Sci(worst)};
}

// ---- 4. extraction golden suite ----

Outcome ExtractionGolden() {
  SynthConfig cfg;
  cfg.n_samples = 500;
  cfg.p_covered = 0.7;
  cfg.seed = 4;
  const auto ds = SynthCorpus(cfg, Dict());
  int frames = 0, bio = 0, planted = 0;
  for (const auto &s : ds.samples) {
    const auto r = ExtractDetailed(s.news, Dict());
    bio += r.labels.labels == s.gold_labels && r.labels.covered == s.covered ? 1 : 0;
    if (s.covered) {
      ++planted;
      frames += r.frame && r.frame->type_id == s.type_id ? 1 : 0;
    }
  }
  const double coverage = CoverageStats(ds.News(), Dict());
  return {bio == 500 && frames == planted && coverage == 0.7,
          "BIO exact " + std::to_string(bio) + "/500, frames " + std::to_string(frames) + "/" +
              std::to_string(planted) + ", coverage " + text::FormatDouble(coverage) +
              " (planted 0.7)"};
}

// ---- 5. hand-checked fixture ----

Outcome HandCheckedFixture() {
  const auto news = LoadCorpusFile(std::string(EVSTOCK_FIXTURE_DIR) + "/handchecked_news.txt");
  std::ifstream in(std::string(EVSTOCK_FIXTURE_DIR) + "/handchecked_expected.tsv");
  std::map<std::string, std::string> expected;
  std::string line;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    if (tab != std::string::npos) expected[line.substr(0, tab)] = line;
  }
  int match = 0;
  for (const auto &n : news) {
    const auto r = Extract(n, Dict());
    const std::string got = n.doc_id + '\t' + (r.covered ? "1" : "0") + '\t' +
                            text::Join(LabelNames(r.labels, Dict().label_alphabet), " ");
    match += expected.count(n.doc_id) && expected[n.doc_id] == got ? 1 : 0;
  }
  return {news.size() == 50 && match == 50,
          std::to_string(match) + "/" + std::to_string(news.size()) +
              " hand-checked records match their expected labels"};
}

// ---- shared synthetic data for the learning criteria ----

constexpr int kLearnN = 2000, kLearnDev = 200, kLearnTest = 600;

Splits LearnSplits(double p_signal, double p_distractor, uint64_t seed) {
  SynthConfig cfg;
  cfg.n_samples = kLearnN;
  cfg.p_signal = p_signal;
  cfg.p_distractor = p_distractor;
  cfg.seed = seed;
  const auto ds = SynthCorpus(cfg, Dict());
  return SplitTemporal(FeaturizeAll(ds.News(), Dict(), ds.market), kLearnDev, kLearnTest);
}

TrainResult Fit(const Splits &s, ModelKind kind, InputForm form, uint64_t seed,
                bool pipeline = false) {
  ModelConfig cfg;
  cfg.kind = kind;
  cfg.input_form = form;
  cfg.seed = seed;
  TrainHyper h;
  h.seed = seed;
  h.pipeline = pipeline;
  return Train(cfg, s.train, s.dev, Dict().label_alphabet, h);
}

// ---- 6. end-to-end learnability ----

Outcome Learnability() {
  const auto start = Clock::now();
  const auto signal = LearnSplits(1.0, 0.8, 1);
  const auto r = Fit(signal, ModelKind::kSspm, InputForm::kFine, 1);
  double best_train = 0;
  for (const auto &e : r.history) best_train = std::max(best_train, e.train_acc);
  const double secs = Seconds(start);
  const auto noise = LearnSplits(0.5, 0.8, 1);
  const auto rn = Fit(noise, ModelKind::kSspm, InputForm::kFine, 1);
  const double control = Evaluate(rn.model, noise.test).metrics.accuracy();
  return {best_train >= 0.97 && secs < 600 && control >= 0.45 && control <= 0.55,
          "signal: train acc " + Fixed(best_train) + " in " + std::to_string(r.history.size()) +
              " epochs, " + Fixed(secs, 1) + " s; no-signal test acc " + Fixed(control)};
}

// ---- 7. input-form ordering ----

Outcome InputFormOrdering() {
  int satisfied = 0;
  std::string detail;
  for (uint64_t seed : {11, 12, 13}) {
    const auto s = LearnSplits(1.0, 0.8, seed);
    auto acc = [&](InputForm f) {
      return Evaluate(Fit(s, ModelKind::kSspm, f, seed).model, s.test).metrics.accuracy();
    };
    const double fine = acc(InputForm::kFine), no_event = acc(InputForm::kNoEvent),
                 no_text = acc(InputForm::kNoText);
    const bool ok = fine - no_event >= 0.05 && no_text >= 0.45 && no_text <= 0.60;
    satisfied += ok ? 1 : 0;
    if (!detail.empty()) detail += "; ";
    detail += "seed " + std::to_string(seed) + ": fine " + Fixed(fine, 3) + ", no_event " +
              Fixed(no_event, 3) + ", no_text " + Fixed(no_text, 3) + (ok ? " ok" : " miss");
  }
  return {satisfied >= 2, std::to_string(satisfied) + "/3 seeds satisfy (" + detail + ")"};
}

// ---- 8. multi-task extractor ----

Outcome MultitaskExtractor() {
  const auto s = LearnSplits(1.0, 0.0, 21);
  auto f1 = [&](bool pipeline) {
    const auto r = Fit(s, ModelKind::kMsspm, InputForm::kFine, 21, pipeline);
    return Evaluate(r.model, s.test).metrics.micro_f1();
  };
  const double joint = f1(false), pipe = f1(true);
  return {joint >= 0.95 && joint >= pipe - 0.01,
          "covered test token micro-F1: multi-task " + Fixed(joint) + ", pipeline " + Fixed(pipe)};
}

// ---- 9. ensemble routing ----

Outcome EnsembleRouting() {
  SynthConfig cfg;
  cfg.n_samples = 400;
  cfg.p_covered = 0.5;
  cfg.seed = 9;
  const auto ds = SynthCorpus(cfg, Dict());
  const auto s = SplitTemporal(FeaturizeAll(ds.News(), Dict(), ds.market), 40, 160);
  ModelConfig sc, mc;
  mc.kind = ModelKind::kMsspm;
  TrainHyper h;
  h.epochs = 3;
  const auto sspm = Train(sc, s.train, s.dev, Dict().label_alphabet, h);
  const auto msspm = Train(mc, s.train, s.dev, Dict().label_alphabet, h);
  const auto ens = EvaluateEnsemble(sspm.model, msspm.model, s.test);
  const EnsembleRouter router(sspm.model, msspm.model);
  int equal = 0, covered = 0;
  std::mt19937_64 unused(0);
  for (size_t i = 0; i < s.test.size(); ++i) {
    const auto &x = s.test[i];
    const auto &want_model = x.covered ? sspm.model : msspm.model;
    const auto in = EncodeSample(x, want_model.vocab, want_model.scaler,
                                 want_model.model.config().kind);
    const auto want = want_model.model.Forward(in, false, unused).probs->value;
    const auto routed = router.Predict(x.covered, in, unused);
    equal += routed.data == want.data && ens.predictions[i].p_up == want.data[1] ? 1 : 0;
    covered += x.covered ? 1 : 0;
  }
  const int n = static_cast<int>(s.test.size());
  return {equal == n && covered > 0 && covered < n,
          std::to_string(equal) + "/" + std::to_string(n) + " bit-equal (" +
              std::to_string(covered) + " covered to sspm, " + std::to_string(n - covered) +
              " uncovered to msspm)"};
}

// ---- 10. MCC oracle ----

Outcome MccOracle() {
  std::mt19937_64 rng(10);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    double v[4];
    for (double &x : v) x = static_cast<double>(UniformIndex(rng, i % 5 == 0 ? 4 : 10000));
    const double tp = v[0], tn = v[1], fp = v[2], fn = v[3];
    const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    const double oracle = den == 0 ? 0.0 : (tp * tn - fp * fn) / std::sqrt(den);
    worst = std::max(worst, std::abs(Mcc(tp, tn, fp, fn) - oracle));
  }
  const bool degenerate = Mcc(40, 0, 60, 0) == 0.0 && Mcc(0, 40, 0, 60) == 0.0;
  return {worst <= 1e-12 && degenerate,
          "1000 matrices, max |diff| " + Sci(worst) +
              (degenerate ? "; all-one-class gives 0" : "; all-one-class NOT 0")};
}

// ---- 11. label correction ----

Outcome LabelCorrection() {
  std::mt19937_64 rng(11);
  TradeCalendar cal;
  const Day d0 = timefmt::ParseDate("2024-05-06"), d1 = timefmt::ParseDate("2024-05-07");
  cal.days = {d0, d1};
  int agree = 0;
  for (int i = 0; i < 1000; ++i) {
    const double s_from = 1 + 99 * UnitUniform(rng), s_to = 1 + 99 * UnitUniform(rng);
    double i_from = 1 + 99 * UnitUniform(rng), i_to = 1 + 99 * UnitUniform(rng);
    if (i % 10 == 0) {  // force an exact tie
      i_from = s_from * 2;
      i_to = s_to * 2;
    }
    // Close of day 0 to the open of day 1, through the full labelling path.
    DayBars stock;
    IndexDays index;
    stock[d0] = {MinuteBar{cal.open, 1, 1, 1, 1, 1, 1, 1},
                 MinuteBar{cal.close - 1, s_from, s_from, s_from, s_from, 1, s_from, s_from}};
    stock[d1] = {MinuteBar{cal.open, s_to, s_to, s_to, s_to, 1, s_to, s_to}};
    index[d0] = {{cal.open, 1}, {cal.close - 1, i_from}};
    index[d1] = {{cal.open, i_to}};
    const auto mv = MovementLabel(stock, index, {d0, cal.close + 30}, cal);
    const double r_cmp = (s_to - s_from) / s_from, r_sec = (i_to - i_from) / i_from;
    const double r_f = r_cmp - r_sec;
    const int want = r_f > 0 ? 1 : 0;
    const bool tie_ok = i % 10 != 0 || (r_f == 0 && mv.label == 0);
    agree += mv.excess == r_f && mv.label == want && tie_ok ? 1 : 0;
  }
  return {agree == 1000, std::to_string(agree) + "/1000 exact agreements (100 forced ties)"};
}

// ---- 12. determinism ----

Outcome Determinism() {
  SynthConfig cfg;
  cfg.n_samples = 300;
  cfg.seed = 12;
  const auto ds = SynthCorpus(cfg, Dict());
  const auto s = SplitTemporal(FeaturizeAll(ds.News(), Dict(), ds.market), 30, 30);
  auto run = [&](ModelKind kind) {
    ModelConfig c;
    c.kind = kind;
    c.seed = 5;
    TrainHyper h;
    h.epochs = 3;
    h.seed = 5;
    auto r = Train(c, s.train, s.dev, Dict().label_alphabet, h);
    std::ostringstream ck;
    WriteCheckpoint(ck, r.model.ToCheckpoint());
    return std::make_pair(r.history, ck.str());
  };
  int same = 0;
  for (auto kind : {ModelKind::kSspm, ModelKind::kMsspm}) {
    const auto a = run(kind), b = run(kind);
    same += a.first == b.first && a.second == b.second ? 1 : 0;
  }
  return {same == 2, std::to_string(same) +
                         "/2 models (sspm, msspm) with bit-identical history and checkpoint"};
}

struct Criterion {
  int id;
  const char *name;
  std::function<Outcome()> run;
};

int Main(int argc, char **argv) {
  const std::vector<Criterion> all = {
      {1, "gradient fidelity", GradientFidelity},
      {2, "CRF oracle equivalence", CrfOracle},
      {3, "attention normalization", AttentionNormalization},
      {4, "extraction golden suite", ExtractionGolden},
      {5, "hand-checked fixture corpus", HandCheckedFixture},
      {6, "end-to-end learnability", Learnability},
      {7, "input-form ordering", InputFormOrdering},
      {8, "multi-task extractor", MultitaskExtractor},
      {9, "ensemble routing", EnsembleRouting},
      {10, "MCC oracle", MccOracle},
      {11, "label correction", LabelCorrection},
      {12, "determinism", Determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto &c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception &e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << c.id << ". " << c.name << ": " << o.detail
              << " [" << Fixed(Seconds(start), 1) << " s]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}

}  // namespace
}  // namespace evstock

int main(int argc, char **argv) { return evstock::Main(argc, argv); }
