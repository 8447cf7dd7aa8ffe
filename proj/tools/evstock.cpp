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

// Command-line front end. Exit codes: 0 success, 1 invalid input or failed
// validation, 2 runtime error.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "evstock/checkpoint.hpp"
#include "evstock/dataset.hpp"
#include "evstock/report.hpp"
#include "evstock/synth.hpp"
#include "evstock/training.hpp"

namespace evstock {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitRuntime = 2;

// Writes to the named file, or to stdout for "" and "-".
class Output {
 public:
  explicit Output(const std::string &path) {
    if (!path.empty() && path != "-") file_ = std::make_unique<std::ofstream>(OpenOut(path));
  }
  std::ostream &stream() { return file_ ? *file_ : std::cout; }
  bool is_stdout() const { return !file_; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

struct DataArgs {
  std::string dict;
  std::string data;
  int dev = -1;  // -1: a tenth of the samples
  int test = -1;
};

void AddDataArgs(CLI::App *cmd, DataArgs &a) {
  cmd->add_option("--dict", a.dict, "event dictionary file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--data", a.data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  cmd->add_option("--dev", a.dev, "dev split size (default n/10)");
  cmd->add_option("--test", a.test, "test split size (default n/10)");
}

struct LoadedData {
  EventDictionary dict;
  std::vector<Sample> samples;
};

LoadedData Load(const DataArgs &a) {
  LoadedData d{LoadDictionaryFile(a.dict), {}};
  const auto market = LoadMarket(a.data);
  d.samples = FeaturizeAll(LoadCorpusFile(fs::path(a.data) / kNewsFile), d.dict, market);
  return d;
}

Splits SplitOf(const DataArgs &a, std::vector<Sample> samples) {
  const int n = static_cast<int>(samples.size());
  return SplitTemporal(std::move(samples), a.dev >= 0 ? a.dev : n / 10,
                       a.test >= 0 ? a.test : n / 10);
}

const std::vector<Sample> &Pick(const Splits &s, const std::vector<Sample> &all,
                                const std::string &name) {
  if (name == "train") return s.train;
  if (name == "dev") return s.dev;
  if (name == "test") return s.test;
  return all;
}

// ---- subcommands ----

int ValidateDict(const std::string &path) {
  auto in = OpenIn(path);
  const auto d = ParseDictionary(in);
  const auto issues = ValidateDictionary(d);
  for (const auto &i : issues) std::cout << i.ToString() << '\n';
  if (!issues.empty()) {
    std::cout << issues.size() << " issue(s)\n";
    return kExitInvalid;
  }
  std::cout << "ok: " << d.types.size() << " event types, " << d.label_alphabet.size()
            << " labels\n";
  return kExitOk;
}

struct ExtractArgs {
  std::string dict, corpus, out;
  bool stats = false;
  bool coarse = false;
};

// One line per record: doc_id, covered flag, BIO label names. With --stats
// and no --out only the coverage fraction is printed.
int RunExtract(const ExtractArgs &a) {
  const auto d = LoadDictionaryFile(a.dict);
  const auto corpus = LoadCorpusFile(a.corpus);
  if (!a.stats || !a.out.empty()) {
    Output out(a.out);
    for (const auto &n : corpus) {
      const auto r = a.coarse ? ExtractSpo(n, d) : Extract(n, d);
      out.stream() << n.doc_id << '\t' << (r.covered ? 1 : 0) << '\t'
                   << text::Join(LabelNames(r.labels, d.label_alphabet), " ") << '\n';
    }
  }
  if (a.stats) {
    std::cout << "coverage\t" << text::FormatDouble(CoverageStats(corpus, d)) << '\n';
  }
  return kExitOk;
}

int RunFeaturize(const DataArgs &a, const std::string &out_path) {
  const auto d = Load(a);
  Output out(out_path);
  auto &o = out.stream();
  o << "doc_id\tstock_id\ttimestamp\tbucket\tcovered\tlabel\texcess\tsteps\ttokens\tfine_labels"
       "\tspo_labels\n";
  for (const auto &s : d.samples) {
    o << s.doc_id << '\t' << s.stock_id << '\t' << timefmt::FormatTimestamp(s.timestamp) << '\t'
      << BucketName(s.bucket) << '\t' << (s.covered ? 1 : 0) << '\t' << s.label() << '\t'
      << text::FormatDouble(s.movement.excess) << '\t' << s.window.rows << '\t'
      << text::Join(s.tokens, " ") << '\t'
      << text::Join(LabelNames(s.fine_labels, d.dict.label_alphabet), " ") << '\t'
      << text::Join(LabelNames(s.spo_labels, d.dict.label_alphabet), " ") << '\n';
  }
  return kExitOk;
}

int RunLabel(const std::string &data, const std::string &corpus_path, const std::string &out_path) {
  const auto market = LoadMarket(data);
  const auto corpus =
      LoadCorpusFile(corpus_path.empty() ? fs::path(data) / kNewsFile : fs::path(corpus_path));
  Output out(out_path);
  auto &o = out.stream();
  o << "doc_id,stock_id,timestamp,bucket,stock_return,sector_return,excess,label\n";
  for (const auto &n : corpus) {
    Movement m;
    try {
      m = market.Label(n.stock_id, n.timestamp);
    } catch (const Error &e) {
      throw Error("record " + n.doc_id + ": " + e.what());
    }
    o << n.doc_id << ',' << n.stock_id << ',' << timefmt::FormatTimestamp(n.timestamp) << ','
      << BucketName(ClassifyTime(n.timestamp, market.calendar)) << ','
      << text::FormatDouble(m.stock_return) << ',' << text::FormatDouble(m.sector_return) << ','
      << text::FormatDouble(m.excess) << ',' << m.label << '\n';
  }
  return kExitOk;
}

int RunSynth(const std::string &dict, const std::string &out_dir, const SynthConfig &cfg) {
  const auto d = LoadDictionaryFile(dict);
  const auto ds = SynthCorpus(cfg, d);
  WriteDataset(out_dir, ds, d);
  int covered = 0;
  for (const auto &s : ds.samples) covered += s.covered ? 1 : 0;
  std::cout << "wrote " << ds.samples.size() << " samples (" << covered << " covered) to "
            << out_dir << '\n';
  return kExitOk;
}

struct TrainArgs {
  DataArgs data;
  std::string out, history, name;
  std::string model = "sspm", form = "fine", ablate;
  double lambda = 0.43;
  uint64_t seed = 1;
  bool paper_scale = false, pipeline = false, teacher_forcing = false, quiet = false;
  int epochs = 0, batch = 0, patience = 0, hidden = 0, layers = 0;
  double lr = 0;
  CLI::Option *lambda_opt = nullptr;
};

int RunTrain(const TrainArgs &a) {
  auto cfg = a.paper_scale ? ModelConfig::PaperScale() : ModelConfig{};
  auto hyper = a.paper_scale ? TrainHyper::PaperScale() : TrainHyper{};
  cfg.kind = ParseKind(a.model);
  cfg.input_form = ParseForm(a.form);
  cfg.ablations = Ablations::Parse(a.ablate);
  if (a.lambda_opt->count() > 0) cfg.lambda = a.lambda;
  cfg.seed = a.seed;
  cfg.teacher_forcing = a.teacher_forcing;
  if (a.hidden > 0) {
    cfg.hidden = a.hidden;
    cfg.event_dim = 2 * a.hidden;
  }
  if (a.layers > 0) cfg.lstm_layers = a.layers;
  hyper.seed = a.seed;
  hyper.pipeline = a.pipeline;
  if (a.epochs > 0) hyper.epochs = a.epochs;
  if (a.batch > 0) hyper.batch = a.batch;
  if (a.patience > 0) hyper.patience = a.patience;
  if (a.lr > 0) hyper.lr = a.lr;
  cfg.Validate();
  hyper.Validate();

  auto d = Load(a.data);
  const auto splits = SplitOf(a.data, std::move(d.samples));
  const std::string name = a.name.empty() ? ModelLabel(cfg) : a.name;
  EpochCallback cb;
  if (!a.quiet) {
    cb = [](const EpochRecord &r) {
      std::cerr << r.stage << " epoch " << r.epoch << ": train_loss "
                << text::FormatFixed(r.train_loss, 4) << " train_acc "
                << text::FormatFixed(r.train_acc, 4) << " dev_acc " << text::FormatFixed(r.dev_acc, 4)
                << " dev_mcc " << text::FormatFixed(r.dev_mcc, 4) << " dev_f1 "
                << text::FormatFixed(r.dev_micro_f1, 4) << '\n';
    };
  }
  const auto r = Train(cfg, splits.train, splits.dev, d.dict.label_alphabet, hyper, cb);
  SaveCheckpoint(a.out, r.model.ToCheckpoint());
  if (!a.history.empty()) {
    Output out(a.history);
    WriteHistoryCsv(out.stream(), name, r.history);
  }
  const auto &best = r.history[r.best_epoch];
  std::cout << name << ": best " << best.stage << " epoch " << best.epoch << ", dev_acc "
            << text::FormatFixed(best.dev_acc, 4) << ", train " << splits.train.size() << ", dev "
            << splits.dev.size() << ", test " << splits.test.size() << '\n';
  return kExitOk;
}

struct EvalArgs {
  DataArgs data;
  std::string ckpt, covered_ckpt, uncovered_ckpt;
  std::string split = "test", metrics, predictions, name;
};

void WriteEvaluation(const EvalArgs &a, const std::string &name, const Evaluation &ev,
                     const std::vector<std::string> &alphabet) {
  const auto rows = MetricsRows(name, ev.metrics);
  if (!a.predictions.empty()) {
    Output out(a.predictions);
    WritePredictionsCsv(out.stream(), ev.predictions, alphabet);
  }
  Output out(a.metrics);
  if (out.is_stdout()) {
    std::cout << RenderReport(rows, {}, ReportFormat::kText);
  } else {
    WriteMetricsCsv(out.stream(), rows);
    std::cout << name << ": accuracy " << text::FormatFixed(ev.metrics.accuracy(), 4) << ", mcc "
              << text::FormatFixed(ev.metrics.mcc(), 4);
    if (ev.metrics.has_tagging) {
      std::cout << ", micro_f1 " << text::FormatFixed(ev.metrics.micro_f1(), 4);
    }
    std::cout << ", n " << ev.metrics.overall.n() << '\n';
  }
}

int RunEval(const EvalArgs &a) {
  const auto tm = TrainedModel::FromCheckpoint(LoadCheckpoint(a.ckpt));
  auto d = Load(a.data);
  if (tm.alphabet != d.dict.label_alphabet.names()) {
    throw ValidationError("checkpoint label alphabet does not match the dictionary");
  }
  const auto splits = SplitOf(a.data, d.samples);
  const auto ev = Evaluate(tm, Pick(splits, d.samples, a.split));
  WriteEvaluation(a, a.name.empty() ? ModelLabel(tm.model.config()) : a.name, ev, tm.alphabet);
  return kExitOk;
}

int RunEnsembleEval(const EvalArgs &a) {
  const auto cov = TrainedModel::FromCheckpoint(LoadCheckpoint(a.covered_ckpt));
  const auto unc = TrainedModel::FromCheckpoint(LoadCheckpoint(a.uncovered_ckpt));
  auto d = Load(a.data);
  if (cov.alphabet != d.dict.label_alphabet.names()) {
    throw ValidationError("checkpoint label alphabet does not match the dictionary");
  }
  const auto splits = SplitOf(a.data, d.samples);
  const auto ev = EvaluateEnsemble(cov, unc, Pick(splits, d.samples, a.split));
  WriteEvaluation(a, a.name.empty() ? "ensemble" : a.name, ev, cov.alphabet);
  return kExitOk;
}

int RunReport(const std::vector<std::string> &metrics, const std::vector<std::string> &history,
              const std::string &format, const std::string &out_path) {
  const auto fmt = ParseReportFormat(format);
  std::vector<MetricsRow> rows;
  for (const auto &p : metrics) {
    auto in = OpenIn(p);
    auto part = ReadMetricsCsv(in);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  std::vector<HistoryRow> hist;
  for (const auto &p : history) {
    auto in = OpenIn(p);
    auto part = ReadHistoryCsv(in);
    hist.insert(hist.end(), part.begin(), part.end());
  }
  Output out(out_path);
  out.stream() << RenderReport(rows, hist, fmt);
  return kExitOk;
}

int Main(int argc, char **argv) {
  CLI::App app{"Event-driven stock movement prediction toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "evstock 1.0.0");

  std::string dict_path;
  auto *vd = app.add_subcommand("validate-dict", "check an event dictionary");
  vd->add_option("dict", dict_path, "dictionary file")->required()->check(CLI::ExistingFile);

  ExtractArgs ex;
  auto *ext = app.add_subcommand("extract", "label role spans in an annotated corpus");
  ext->add_option("--dict", ex.dict, "event dictionary file")->required()->check(CLI::ExistingFile);
  ext->add_option("--corpus", ex.corpus, "annotated corpus")->required()->check(CLI::ExistingFile);
  ext->add_option("--out", ex.out, "output TSV (default stdout)");
  ext->add_flag("--stats", ex.stats, "print the covered fraction");
  ext->add_flag("--coarse", ex.coarse, "subject/predicate/object labels only");

  DataArgs feat;
  std::string feat_out;
  auto *fz = app.add_subcommand("featurize", "write per-sample features of a dataset");
  AddDataArgs(fz, feat);
  fz->add_option("--out", feat_out, "output TSV (default stdout)");

  std::string label_data, label_corpus, label_out;
  auto *lb = app.add_subcommand("label", "sector-corrected movement labels");
  lb->add_option("--data", label_data, "dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  lb->add_option("--corpus", label_corpus, "corpus (default <data>/news.txt)")
      ->check(CLI::ExistingFile);
  lb->add_option("--out", label_out, "output CSV (default stdout)");

  std::string syn_dict, syn_out;
  SynthConfig syn;
  auto *sy = app.add_subcommand("synth", "generate a synthetic dataset");
  sy->add_option("--dict", syn_dict, "event dictionary file")->required()->check(CLI::ExistingFile);
  sy->add_option("--out", syn_out, "output directory")->required();
  sy->add_option("--n", syn.n_samples, "number of samples");
  sy->add_option("--p-covered", syn.p_covered, "fraction of dictionary-covered news");
  sy->add_option("--p-signal", syn.p_signal, "probability the event polarity sets the label");
  sy->add_option("--p-distractor", syn.p_distractor, "probability of an opposite polarity word");
  sy->add_option("--stocks", syn.n_stocks, "number of stocks (0: automatic)");
  sy->add_option("--sectors", syn.n_sectors, "number of sector indices");
  sy->add_option("--seed", syn.seed, "random seed");

  TrainArgs tr;
  auto *trn = app.add_subcommand("train", "train a model and write a checkpoint");
  AddDataArgs(trn, tr.data);
  trn->add_option("--out", tr.out, "checkpoint path")->required();
  trn->add_option("--history", tr.history, "per-epoch history CSV");
  trn->add_option("--name", tr.name, "model name in outputs");
  trn->add_option("--model", tr.model, "sspm or msspm");
  trn->add_option("--input-form", tr.form, "no_text, no_event, coarse or fine");
  trn->add_option("--ablate", tr.ablate,
                  "comma list of fusion_off, self_attn_off, co_attn_off, gated_sum_off, crf_off");
  tr.lambda_opt = trn->add_option("--lambda", tr.lambda, "event loss weight (multi-task model)");
  trn->add_option("--seed", tr.seed, "random seed");
  trn->add_flag("--paper-scale", tr.paper_scale, "full-size model and schedule");
  trn->add_flag("--pipeline", tr.pipeline, "train the extractor first, then freeze it");
  trn->add_flag("--teacher-forcing", tr.teacher_forcing, "embed gold labels while training");
  trn->add_option("--epochs", tr.epochs, "maximum epochs");
  trn->add_option("--batch", tr.batch, "batch size");
  trn->add_option("--lr", tr.lr, "initial learning rate");
  trn->add_option("--patience", tr.patience, "early-stop patience in epochs");
  trn->add_option("--hidden", tr.hidden, "LSTM hidden size per direction");
  trn->add_option("--layers", tr.layers, "BiLSTM layers");
  trn->add_flag("--quiet", tr.quiet, "no per-epoch progress");

  EvalArgs ev;
  auto *evl = app.add_subcommand("eval", "evaluate a checkpoint");
  AddDataArgs(evl, ev.data);
  evl->add_option("--ckpt", ev.ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  evl->add_option("--split", ev.split, "train, dev, test or all")
      ->check(CLI::IsMember({"train", "dev", "test", "all"}));
  evl->add_option("--metrics", ev.metrics, "metrics CSV (default: text table on stdout)");
  evl->add_option("--predictions", ev.predictions, "per-sample predictions CSV");
  evl->add_option("--name", ev.name, "model name in outputs");

  EvalArgs en;
  auto *ens = app.add_subcommand("ensemble-eval", "route covered and uncovered news to two models");
  AddDataArgs(ens, en.data);
  ens->add_option("--covered", en.covered_ckpt, "checkpoint for covered news")
      ->required()
      ->check(CLI::ExistingFile);
  ens->add_option("--uncovered", en.uncovered_ckpt, "checkpoint for uncovered news")
      ->required()
      ->check(CLI::ExistingFile);
  ens->add_option("--split", en.split, "train, dev, test or all")
      ->check(CLI::IsMember({"train", "dev", "test", "all"}));
  ens->add_option("--metrics", en.metrics, "metrics CSV (default: text table on stdout)");
  ens->add_option("--predictions", en.predictions, "per-sample predictions CSV");
  ens->add_option("--name", en.name, "model name in outputs");

  std::vector<std::string> rep_metrics, rep_history;
  std::string rep_format = "text", rep_out;
  auto *rep = app.add_subcommand("report", "combine metrics and histories");
  rep->add_option("--metrics", rep_metrics, "metrics CSV (repeatable)")->check(CLI::ExistingFile);
  rep->add_option("--history", rep_history, "history CSV (repeatable)")->check(CLI::ExistingFile);
  rep->add_option("--format", rep_format, "text or csv");
  rep->add_option("--out", rep_out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e) == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*vd) return ValidateDict(dict_path);
    if (*ext) return RunExtract(ex);
    if (*fz) return RunFeaturize(feat, feat_out);
    if (*lb) return RunLabel(label_data, label_corpus, label_out);
    if (*sy) return RunSynth(syn_dict, syn_out, syn);
    if (*trn) return RunTrain(tr);
    if (*evl) return RunEval(ev);
    if (*ens) return RunEnsembleEval(en);
    if (*rep) return RunReport(rep_metrics, rep_history, rep_format, rep_out);
  } catch (const ValidationError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const ParseError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitInvalid;
}

}  // namespace
}  // namespace evstock

int main(int argc, char **argv) { return evstock::Main(argc, argv); }
