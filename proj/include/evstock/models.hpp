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

// The two movement predictors:
//
//   sspm    text + given role labels + trade window -> up/down
//   msspm   text + trade window -> predicted role labels -> up/down
//
// Both share one tail: fusion of text and event embeddings, co-attention
// with the stock path, gated sums, mean pooling and a two-way softmax.

#pragma once

#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "evstock/checkpoint.hpp"
#include "evstock/layers.hpp"
#include "evstock/market.hpp"
#include "evstock/nn.hpp"

namespace evstock {

enum class ModelKind { kSspm, kMsspm };
enum class InputForm { kNoText, kNoEvent, kCoarse, kFine };

inline const char *KindName(ModelKind k) { return k == ModelKind::kSspm ? "sspm" : "msspm"; }

inline ModelKind ParseKind(const std::string &s) {
  if (s == "sspm") return ModelKind::kSspm;
  if (s == "msspm") return ModelKind::kMsspm;
  throw ValidationError("unknown model '" + s + "' (expected sspm or msspm)");
}

inline const char *FormName(InputForm f) {
  switch (f) {
    case InputForm::kNoText:
      return "no_text";
    case InputForm::kNoEvent:
      return "no_event";
    case InputForm::kCoarse:
      return "coarse";
    case InputForm::kFine:
      return "fine";
  }
  return "?";
}

inline InputForm ParseForm(const std::string &s) {
  for (auto f : {InputForm::kNoText, InputForm::kNoEvent, InputForm::kCoarse, InputForm::kFine}) {
    if (s == FormName(f)) return f;
  }
  throw ValidationError("unknown input form '" + s + "'");
}

struct Ablations {
  bool fusion_off = false;
  bool self_attn_off = false;
  bool co_attn_off = false;
  bool gated_sum_off = false;
  bool crf_off = false;

  static Ablations Parse(const std::string &list) {
    Ablations a;
    for (const auto &raw : text::Split(list, ',')) {
      const std::string s(text::Trim(raw));
      if (s.empty()) continue;
      if (s == "fusion_off") {
        a.fusion_off = true;
      } else if (s == "self_attn_off") {
        a.self_attn_off = true;
      } else if (s == "co_attn_off") {
        a.co_attn_off = true;
      } else if (s == "gated_sum_off") {
        a.gated_sum_off = true;
      } else if (s == "crf_off") {
        a.crf_off = true;
      } else {
        throw ValidationError("unknown ablation '" + s + "'");
      }
    }
    return a;
  }

  std::string ToString() const {
    std::vector<std::string> on;
    if (fusion_off) on.push_back("fusion_off");
    if (self_attn_off) on.push_back("self_attn_off");
    if (co_attn_off) on.push_back("co_attn_off");
    if (gated_sum_off) on.push_back("gated_sum_off");
    if (crf_off) on.push_back("crf_off");
    return text::Join(on, ",");
  }

  friend bool operator==(const Ablations &, const Ablations &) = default;
};

struct ModelConfig {
  ModelKind kind = ModelKind::kSspm;
  InputForm input_form = InputForm::kFine;
  int hidden = 32;
  int word_dim = 64;
  int event_dim = 64;
  int lstm_layers = 1;
  double dropout = 0.2;
  Ablations ablations;
  double lambda = 0.43;
  uint64_t seed = 1;
  int vocab_size = 5000;
  bool teacher_forcing = false;

  static ModelConfig PaperScale() {
    ModelConfig c;
    c.hidden = 256;
    c.event_dim = 512;
    c.lstm_layers = 3;
    c.vocab_size = 50000;
    return c;
  }

  void Validate() const {
    if (hidden < 1) throw ValidationError("h must be >= 1");
    if (word_dim < 1) throw ValidationError("word_dim must be >= 1");
    if (event_dim != 2 * hidden) {
      throw ValidationError("event_dim must equal 2*h (" + std::to_string(2 * hidden) + ")");
    }
    if (lstm_layers < 1) throw ValidationError("lstm_layers must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout must be in [0, 1)");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("lambda must be in [0, 1]");
    if (vocab_size < 2) throw ValidationError("vocab_size must be >= 2");
    if (kind == ModelKind::kMsspm && input_form != InputForm::kFine &&
        input_form != InputForm::kCoarse) {
      throw ValidationError("msspm needs input form fine or coarse");
    }
  }

  std::string ToText() const {
    std::ostringstream o;
    o << "model=" << KindName(kind) << '\n'
      << "input_form=" << FormName(input_form) << '\n'
      << "h=" << hidden << '\n'
      << "word_dim=" << word_dim << '\n'
      << "event_dim=" << event_dim << '\n'
      << "lstm_layers=" << lstm_layers << '\n'
      << "dropout=" << text::FormatDouble(dropout) << '\n'
      << "ablate=" << ablations.ToString() << '\n'
      << "lambda=" << text::FormatDouble(lambda) << '\n'
      << "seed=" << seed << '\n'
      << "vocab_size=" << vocab_size << '\n'
      << "teacher_forcing=" << (teacher_forcing ? "true" : "false") << '\n';
    return o.str();
  }

  // key=value lines over the defaults; `#` comments.
  static ModelConfig FromText(const std::string &src) {
    ModelConfig c;
    std::istringstream in(src);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      ++n;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      if (text::Trim(line).empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError("expected key=value", n);
      const std::string key(text::Trim(std::string_view(line).substr(0, eq)));
      const std::string val(text::Trim(std::string_view(line).substr(eq + 1)));
      if (key == "model") {
        c.kind = ParseKind(val);
      } else if (key == "input_form") {
        c.input_form = ParseForm(val);
      } else if (key == "h") {
        c.hidden = static_cast<int>(text::ParseInt(val, n));
      } else if (key == "word_dim") {
        c.word_dim = static_cast<int>(text::ParseInt(val, n));
      } else if (key == "event_dim") {
        c.event_dim = static_cast<int>(text::ParseInt(val, n));
      } else if (key == "lstm_layers") {
        c.lstm_layers = static_cast<int>(text::ParseInt(val, n));
      } else if (key == "dropout") {
        c.dropout = text::ParseDouble(val, n);
      } else if (key == "ablate") {
        c.ablations = Ablations::Parse(val);
      } else if (key == "lambda") {
        c.lambda = text::ParseDouble(val, n);
      } else if (key == "seed") {
        c.seed = static_cast<uint64_t>(text::ParseInt(val, n));
      } else if (key == "vocab_size") {
        c.vocab_size = static_cast<int>(text::ParseInt(val, n));
      } else if (key == "teacher_forcing") {
        if (val != "true" && val != "false") throw ParseError("expected true or false", n);
        c.teacher_forcing = val == "true";
      } else {
        throw ParseError("unknown config key '" + key + "'", n);
      }
    }
    return c;
  }

  friend bool operator==(const ModelConfig &, const ModelConfig &) = default;
};

// One sample as the network sees it.
struct ModelInput {
  std::vector<int> token_ids;
  std::vector<int> fine_labels;  // dictionary extraction (fine frame or S/P/O fallback)
  std::vector<int> spo_labels;   // S/P/O labels only
  Matrix window;                 // scaled T x 120

  int length() const { return static_cast<int>(token_ids.size()); }
};

struct ModelOutput {
  nn::Var logits;                  // 1 x 2
  nn::Var probs;                   // 1 x 2
  nn::Var emissions;               // L x |Y|, msspm only
  std::vector<int> predicted_labels;  // msspm only
  nn::Var event_nll;               // msspm with gold labels
  nn::Var stock_nll;               // with a target
  nn::Var loss;                    // with a target
  // intermediates, for inspection
  nn::Var text_states;    // H_x, L x 2h
  nn::Var stock_states;   // S_y, T x 2h
  nn::Var text_context;   // C_x, L x 2h
  nn::Var pooled;         // 1 x 4h

  int Predicted() const { return probs->value.data[1] > probs->value.data[0] ? 1 : 0; }
};

class Model {
 public:
  Model(ModelConfig cfg, int vocab_size, int num_labels)
      : cfg_(std::move(cfg)), vocab_size_(vocab_size), num_labels_(num_labels), store_(cfg_.seed) {
    cfg_.Validate();
    if (num_labels < 1) throw ValidationError("label alphabet is empty");
    Build();
  }
  Model(const Model &) = delete;
  Model &operator=(const Model &) = delete;
  Model(Model &&) = default;
  Model &operator=(Model &&) = default;

  const ModelConfig &config() const { return cfg_; }
  // Input form and ablations may be switched after construction as long as
  // the needed parameters exist.
  ModelConfig &mutable_config() { return cfg_; }
  nn::ParamStore &store() { return store_; }
  const nn::ParamStore &store() const { return store_; }
  int vocab_size() const { return vocab_size_; }
  int num_labels() const { return num_labels_; }

  bool UsesText() const {
    return cfg_.kind == ModelKind::kMsspm || cfg_.input_form != InputForm::kNoText;
  }

  // Prefixes of the extractor parameters (text encoder + tagger + CRF).
  static std::vector<std::string> ExtractorPrefixes() {
    return {"text.", "tag.", "crf."};
  }

  template <typename Engine>
  ModelOutput Forward(const ModelInput &in, bool train, Engine &rng,
                      std::optional<int> target = std::nullopt) const {
    const int h2 = 2 * cfg_.hidden;
    const auto &ab = cfg_.ablations;
    ModelOutput out;

    nn::Var hx, sx;
    if (UsesText()) {
      if (in.length() < 1) throw ShapeError("empty token sequence");
      auto ex = nn::Dropout(nn::Embedding(P("text.embed"), in.token_ids), cfg_.dropout, train, rng);
      hx = nn::BiLstm(text_lstm_, ex, cfg_.dropout, train, rng);
      sx = ab.self_attn_off ? hx : layers::SelfAttention(hx, P("text.attn")).out;
    }

    const std::vector<int> *gold = nullptr;
    if (cfg_.input_form == InputForm::kFine) gold = &in.fine_labels;
    if (cfg_.input_form == InputForm::kCoarse) gold = &in.spo_labels;
    auto check_labels = [&](const std::vector<int> &labels) {
      if (static_cast<int>(labels.size()) != in.length()) {
        throw ShapeError("role labels: " + std::to_string(labels.size()) + " for " +
                         std::to_string(in.length()) + " tokens");
      }
    };

    nn::Var ee;
    if (cfg_.kind == ModelKind::kMsspm) {
      out.emissions = nn::AddBias(nn::MatMul(sx, P("tag.w")), P("tag.b"));
      out.predicted_labels =
          ab.crf_off ? layers::ArgmaxRows(out.emissions->value)
                     : layers::CrfViterbi(out.emissions->value, P("crf.trans")->value,
                                          P("crf.start")->value);
      const std::vector<int> *used = &out.predicted_labels;
      if (cfg_.teacher_forcing && train && gold != nullptr && !gold->empty()) {
        check_labels(*gold);
        used = gold;
      }
      ee = nn::Embedding(P("event.embed"), *used);
      if (gold != nullptr && !gold->empty()) {
        check_labels(*gold);
        out.event_nll = ab.crf_off
                            ? nn::CrossEntropyLogits(out.emissions, *gold)
                            : layers::CrfNll(out.emissions, *gold, P("crf.trans"), P("crf.start"));
      }
    } else if (cfg_.input_form == InputForm::kFine || cfg_.input_form == InputForm::kCoarse) {
      check_labels(*gold);
      ee = nn::Embedding(P("event.embed"), *gold);
    } else if (cfg_.input_form == InputForm::kNoEvent) {
      ee = nn::Constant(Matrix(in.length(), h2));
    }

    // stock path
    if (in.window.cols != kStepWidth || in.window.rows < 1) {
      throw ShapeError("trade window must be T x " + std::to_string(kStepWidth) + ", got " +
                       in.window.ShapeString());
    }
    auto hy = nn::BiLstm(stock_lstm_, nn::Constant(in.window), cfg_.dropout, train, rng);
    auto sy = ab.self_attn_off ? hy : layers::SelfAttention(hy, P("stock.attn")).out;

    nn::Var pooled;
    if (UsesText()) {
      auto hpx = ab.fusion_off ? nn::Add(sx, ee) : layers::Fuse(sx, ee, P("fuse.w"), P("fuse.b"));
      nn::Var cx = hpx, cy = sy;
      if (!ab.co_attn_off) {
        auto co = layers::CoAttention(hpx, sy, P("coattn.w"));
        cx = co.cx;
        cy = co.cy;
      }
      auto gx = ab.gated_sum_off ? cx : layers::GatedSum(hpx, cx, P("gate.x.w"), P("gate.x.b"));
      auto gy = ab.gated_sum_off ? cy : layers::GatedSum(sy, cy, P("gate.y.w"), P("gate.y.b"));
      pooled = nn::ConcatCols({nn::MeanRows(gx), nn::MeanRows(gy)});
      out.text_states = hx;
      out.text_context = cx;
    } else {
      pooled = nn::ConcatCols({nn::Constant(Matrix(1, h2)), nn::MeanRows(sy)});
    }
    out.stock_states = sy;
    out.pooled = pooled;
    out.logits = nn::AddBias(nn::MatMul(pooled, P("head.w")), P("head.b"));
    out.probs = nn::SoftmaxRows(out.logits);

    if (target) {
      if (*target != 0 && *target != 1) throw Error("movement label must be 0 or 1");
      out.stock_nll = nn::CrossEntropyLogits(out.logits, {*target});
      if (cfg_.kind == ModelKind::kMsspm && out.event_nll) {
        out.loss = MultitaskLoss(out.event_nll, out.stock_nll, cfg_.lambda, in.length());
      } else {
        out.loss = out.stock_nll;
      }
    }
    return out;
  }

  // lambda * event / L + (1 - lambda) * stock
  static nn::Var MultitaskLoss(const nn::Var &event_nll, const nn::Var &stock_nll, double lambda,
                               int length) {
    if (length < 1) throw Error("sequence length must be >= 1");
    return nn::Combine(event_nll, stock_nll, lambda / length, 1.0 - lambda, "multitask");
  }

  // Overwrites every parameter from `tensors`; all names and shapes must match.
  void LoadTensors(const std::vector<std::pair<std::string, Matrix>> &tensors) {
    std::map<std::string, const Matrix *> by_name;
    for (const auto &[n, m] : tensors) by_name[n] = &m;
    for (const auto &[name, v] : store_.entries()) {
      auto it = by_name.find(name);
      if (it == by_name.end()) throw Error("checkpoint lacks parameter " + name);
      if (!it->second->SameShape(v->value)) {
        throw ShapeError("parameter " + name + ": checkpoint " + it->second->ShapeString() +
                         " vs model " + v->value.ShapeString());
      }
      v->value = *it->second;
    }
    if (by_name.size() != store_.size()) throw Error("checkpoint has unexpected parameters");
  }

  std::vector<std::pair<std::string, Matrix>> Tensors() const {
    std::vector<std::pair<std::string, Matrix>> out;
    for (const auto &[name, v] : store_.entries()) out.push_back({name, v->value});
    return out;
  }

 private:
  const nn::Var &P(const std::string &name) const { return store_.Get(name); }

  void Build() {
    const int h = cfg_.hidden, h2 = 2 * h;
    const auto &ab = cfg_.ablations;
    if (UsesText()) {
      store_.Add("text.embed", vocab_size_, cfg_.word_dim);
      text_lstm_ = nn::AddBiLstm(store_, "text.lstm", cfg_.word_dim, h, cfg_.lstm_layers);
      if (!ab.self_attn_off) store_.Add("text.attn", h2, h2);
      if (cfg_.kind == ModelKind::kMsspm) {
        store_.Add("tag.w", h2, num_labels_);
        store_.Add("tag.b", 1, num_labels_, nn::Init::kZero);
        if (!ab.crf_off) {
          store_.Add("crf.trans", num_labels_, num_labels_);
          store_.Add("crf.start", 1, num_labels_, nn::Init::kZero);
        }
      }
      if (cfg_.kind == ModelKind::kMsspm || cfg_.input_form == InputForm::kFine ||
          cfg_.input_form == InputForm::kCoarse) {
        store_.Add("event.embed", num_labels_, cfg_.event_dim);
      }
      if (!ab.fusion_off) {
        store_.Add("fuse.w", 4 * h2, h2);
        store_.Add("fuse.b", 1, h2, nn::Init::kZero);
      }
      if (!ab.co_attn_off) store_.Add("coattn.w", h2, h2);
      if (!ab.gated_sum_off) {
        store_.Add("gate.x.w", 2 * h2, h2);
        store_.Add("gate.x.b", 1, h2, nn::Init::kZero);
        store_.Add("gate.y.w", 2 * h2, h2);
        store_.Add("gate.y.b", 1, h2, nn::Init::kZero);
      }
    }
    stock_lstm_ = nn::AddBiLstm(store_, "stock.lstm", kStepWidth, h, cfg_.lstm_layers);
    if (!ab.self_attn_off) store_.Add("stock.attn", h2, h2);
    store_.Add("head.w", 2 * h2, 2);
    store_.Add("head.b", 1, 2, nn::Init::kZero);
  }

  ModelConfig cfg_;
  int vocab_size_;
  int num_labels_;
  nn::ParamStore store_;
  nn::BiLstmParams text_lstm_;
  nn::BiLstmParams stock_lstm_;
};

// A trained model with everything needed to featurize new samples.
struct TrainedModel {
  Model model;
  nn::Vocab vocab;
  StockScaler scaler;
  std::vector<std::string> alphabet;

  Checkpoint ToCheckpoint() const {
    Checkpoint ck;
    ck.config = model.config().ToText();
    ck.vocab = vocab.words();
    ck.alphabet = alphabet;
    ck.scaler = scaler;
    ck.tensors = model.Tensors();
    return ck;
  }

  static TrainedModel FromCheckpoint(const Checkpoint &ck) {
    auto cfg = ModelConfig::FromText(ck.config);
    auto vocab = nn::Vocab::FromWords(ck.vocab);
    Model m(cfg, vocab.size(), static_cast<int>(ck.alphabet.size()));
    m.LoadTensors(ck.tensors);
    return TrainedModel{std::move(m), std::move(vocab), ck.scaler, ck.alphabet};
  }
};

// Covered news goes to the model trained on dictionary labels, the rest to
// the one that predicts its own.
class EnsembleRouter {
 public:
  EnsembleRouter(const TrainedModel &covered, const TrainedModel &uncovered)
      : covered_(covered), uncovered_(uncovered) {
    if (covered.alphabet != uncovered.alphabet) {
      throw ValidationError("label alphabets of the two checkpoints differ");
    }
  }

  const TrainedModel &Route(bool covered) const { return covered ? covered_ : uncovered_; }

  template <typename Engine>
  Matrix Predict(bool covered, const ModelInput &in, Engine &rng) const {
    return Route(covered).model.Forward(in, false, rng).probs->value;
  }

 private:
  const TrainedModel &covered_;
  const TrainedModel &uncovered_;
};

}  // namespace evstock
