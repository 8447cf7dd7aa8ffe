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

// Mini-batch training with early stopping, evaluation and ensemble routing.

#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "evstock/dataset.hpp"
#include "evstock/metrics.hpp"
#include "evstock/models.hpp"

namespace evstock {

// Desk-scale defaults; PaperScale() gives the full-size schedule.
struct TrainHyper {
  int epochs = 30;
  int batch = 32;
  double lr = 0.005;
  double lr_decay = 0.0005;
  int patience = 5;
  uint64_t seed = 1;
  // Multi-task model only: fit the extractor alone first, then freeze it and
  // fit the rest on the movement loss.
  bool pipeline = false;

  static TrainHyper PaperScale() {
    TrainHyper h;
    h.epochs = 60;
    h.batch = 128;
    h.lr = 0.001;
    return h;
  }

  void Validate() const {
    if (epochs < 1) throw ValidationError("epochs must be >= 1");
    if (batch < 1) throw ValidationError("batch must be >= 1");
    if (!(lr > 0)) throw ValidationError("learning rate must be > 0");
    if (lr_decay < 0) throw ValidationError("learning-rate decay must be >= 0");
    if (patience < 1) throw ValidationError("patience must be >= 1");
  }
};

struct EpochRecord {
  std::string stage;  // "joint", "extractor" or "predictor"
  int epoch = 0;      // 1-based within the stage
  double train_loss = 0;
  double train_acc = 0;
  double dev_loss = 0;
  double dev_acc = 0;
  double dev_mcc = 0;
  double dev_micro_f1 = 0;

  friend bool operator==(const EpochRecord &, const EpochRecord &) = default;
};

struct Prediction {
  std::string doc_id;
  TimeBucket bucket = TimeBucket::kTradeTime;
  bool covered = false;
  int label = 0;
  int predicted = 0;
  double p_up = 0;
  std::vector<int> tags;  // multi-task model only
};

struct Evaluation {
  Metrics metrics;
  std::vector<Prediction> predictions;
};

namespace internal {

inline void Accumulate(Metrics &m, const Sample &s, const Prediction &p) {
  m.overall.Add(p.predicted, p.label);
  m.buckets[static_cast<size_t>(s.bucket)].Add(p.predicted, p.label);
  (s.covered ? m.covered : m.uncovered).Add(p.predicted, p.label);
}

// Tagging gold for the multi-task model: the extractor output it was taught.
inline const std::vector<int> &TagGold(const Sample &s, InputForm form) {
  return form == InputForm::kCoarse ? s.spo_labels : s.fine_labels;
}

}  // namespace internal

// Forward pass in inference mode; also returns the stock loss.
inline Prediction PredictSample(const TrainedModel &tm, const Sample &s, const ModelInput &in,
                                double *stock_loss = nullptr) {
  std::mt19937_64 unused(0);  // dropout is off outside training
  const auto out = tm.model.Forward(in, false, unused, s.label());
  Prediction p;
  p.doc_id = s.doc_id;
  p.bucket = s.bucket;
  p.covered = s.covered;
  p.label = s.label();
  p.predicted = out.Predicted();
  p.p_up = out.probs->value.data[1];
  p.tags = out.predicted_labels;
  if (stock_loss != nullptr) *stock_loss = out.stock_nll->value.data[0];
  return p;
}

inline Evaluation Evaluate(const TrainedModel &tm, const std::vector<Sample> &samples) {
  Evaluation ev;
  const auto &cfg = tm.model.config();
  const bool tagger = cfg.kind == ModelKind::kMsspm;
  ev.metrics.has_tagging = tagger;
  double loss = 0;
  for (const auto &s : samples) {
    double l = 0;
    auto p = PredictSample(tm, s, EncodeSample(s, tm.vocab, tm.scaler, cfg.kind), &l);
    loss += l;
    internal::Accumulate(ev.metrics, s, p);
    if (tagger && s.covered) ev.metrics.tagging.Add(p.tags, internal::TagGold(s, cfg.input_form));
    ev.predictions.push_back(std::move(p));
  }
  ev.metrics.loss = samples.empty() ? 0.0 : loss / static_cast<double>(samples.size());
  return ev;
}

// Covered samples go to `covered_model`, the rest to `uncovered_model`.
inline Evaluation EvaluateEnsemble(const TrainedModel &covered_model,
                                   const TrainedModel &uncovered_model,
                                   const std::vector<Sample> &samples) {
  const EnsembleRouter router(covered_model, uncovered_model);
  Evaluation ev;
  double loss = 0;
  for (const auto &s : samples) {
    const auto &tm = router.Route(s.covered);
    double l = 0;
    auto p = PredictSample(tm, s, EncodeSample(s, tm.vocab, tm.scaler, tm.model.config().kind), &l);
    loss += l;
    internal::Accumulate(ev.metrics, s, p);
    ev.predictions.push_back(std::move(p));
  }
  ev.metrics.loss = samples.empty() ? 0.0 : loss / static_cast<double>(samples.size());
  return ev;
}

struct TrainResult {
  TrainedModel model;
  std::vector<EpochRecord> history;
  int best_epoch = 0;  // index into history, 0-based
};

using EpochCallback = std::function<void(const EpochRecord &)>;

namespace internal {

// Parameters a batch never reached (frozen paths aside) get a zero gradient,
// e.g. the tagger when a batch has no covered sample.
inline void FillMissingGrads(nn::ParamStore &store) {
  for (const auto &[name, v] : store.entries()) {
    if (v->requires_grad && v->grad.empty()) v->GradRef();
  }
}

class Trainer {
 public:
  Trainer(TrainedModel &tm, const std::vector<Sample> &train, const std::vector<Sample> &dev,
          const TrainHyper &hyper, const EpochCallback &cb, std::vector<EpochRecord> &history)
      : tm_(tm), train_(train), dev_(dev), hyper_(hyper), cb_(cb), history_(history),
        shuffle_(hyper.seed), dropout_(hyper.seed ^ 0x9e3779b97f4a7c15ULL) {
    const auto kind = tm.model.config().kind;
    for (const auto &s : train) inputs_.push_back(EncodeSample(s, tm.vocab, tm.scaler, kind));
  }

  // Runs one stage; returns the history index of its best epoch. The best
  // weights are restored before returning.
  int Run(const std::string &stage, bool select_on_tagging) {
    nn::Adam adam({hyper_.lr, 0.9, 0.999, 1e-8, hyper_.lr_decay});
    auto &store = tm_.model.store();
    const int n = static_cast<int>(train_.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::pair<double, double> best{0.0, 0.0};
    int best_index = -1, since_best = 0;
    std::vector<std::pair<std::string, Matrix>> best_tensors;
    for (int epoch = 1; epoch <= hyper_.epochs; ++epoch) {
      StableShuffle(order, shuffle_);
      double loss_sum = 0;
      for (int start = 0; start < n; start += hyper_.batch) {
        const int end = std::min(n, start + hyper_.batch);
        const double scale = 1.0 / static_cast<double>(end - start);
        for (int k = start; k < end; ++k) {
          const int i = order[k];
          const auto out = tm_.model.Forward(inputs_[i], true, dropout_, train_[i].label());
          const double l = out.loss->value.data[0];
          if (!std::isfinite(l)) {
            throw NumericError("non-finite loss in " + stage + " epoch " + std::to_string(epoch) +
                               " at sample " + train_[i].doc_id +
                               "; try a lower learning rate");
          }
          loss_sum += l;
          nn::Backward(nn::Scale(out.loss, scale));
        }
        FillMissingGrads(store);
        adam.Step(store);
      }
      EpochRecord rec;
      rec.stage = stage;
      rec.epoch = epoch;
      rec.train_loss = n == 0 ? 0.0 : loss_sum / n;
      rec.train_acc = Evaluate(tm_, train_).metrics.accuracy();
      const auto dev = Evaluate(tm_, dev_).metrics;
      rec.dev_loss = dev.loss;
      rec.dev_acc = dev.accuracy();
      rec.dev_mcc = dev.mcc();
      rec.dev_micro_f1 = dev.has_tagging ? dev.micro_f1() : 0.0;
      history_.push_back(rec);
      if (cb_) cb_(rec);
      // Accuracy ties go to tagging F1; with no dev split the latest epoch
      // counts as best.
      std::pair<double, double> score{rec.dev_acc, rec.dev_micro_f1};
      if (select_on_tagging) score = {rec.dev_micro_f1, 0.0};
      if (dev_.empty()) score = {static_cast<double>(epoch), 0.0};
      if (best_index < 0 || score > best) {
        best = score;
        best_index = static_cast<int>(history_.size()) - 1;
        best_tensors = tm_.model.Tensors();
        since_best = 0;
      } else if (++since_best >= hyper_.patience) {
        break;
      }
    }
    tm_.model.LoadTensors(best_tensors);
    return best_index;
  }

 private:
  TrainedModel &tm_;
  const std::vector<Sample> &train_;
  const std::vector<Sample> &dev_;
  const TrainHyper &hyper_;
  const EpochCallback &cb_;
  std::vector<EpochRecord> &history_;
  std::mt19937_64 shuffle_;
  std::mt19937_64 dropout_;
  std::vector<ModelInput> inputs_;
};

}  // namespace internal

// Fits vocabulary and scaler on `train`, then trains with early stopping on
// dev accuracy (dev micro-F1 for the pipeline's extractor stage).
inline TrainResult Train(const ModelConfig &cfg, const std::vector<Sample> &train,
                         const std::vector<Sample> &dev, const LabelAlphabet &alphabet,
                         const TrainHyper &hyper, const EpochCallback &cb = {}) {
  cfg.Validate();
  hyper.Validate();
  if (hyper.pipeline && cfg.kind != ModelKind::kMsspm) {
    throw ValidationError("pipeline training applies to the multi-task model only");
  }
  auto enc = Encoder::Fit(train, cfg.vocab_size);
  Model model(cfg, enc.vocab.size(), alphabet.size());
  TrainResult r{TrainedModel{std::move(model), std::move(enc.vocab), std::move(enc.scaler),
                             alphabet.names()},
                {},
                0};
  internal::Trainer trainer(r.model, train, dev, hyper, cb, r.history);
  if (!hyper.pipeline) {
    r.best_epoch = trainer.Run("joint", false);
    return r;
  }
  auto &mcfg = r.model.model.mutable_config();
  auto &store = r.model.model.store();
  mcfg.lambda = 1.0;
  trainer.Run("extractor", true);
  for (const auto &p : Model::ExtractorPrefixes()) store.SetTrainable(p, false);
  mcfg.lambda = 0.0;
  r.best_epoch = trainer.Run("predictor", false);
  for (const auto &p : Model::ExtractorPrefixes()) store.SetTrainable(p, true);
  mcfg.lambda = cfg.lambda;
  return r;
}

}  // namespace evstock
