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

// CSV files for metrics, training history and predictions, and the combined
// text/CSV report. Numbers are written in shortest round-trip form, so equal
// inputs give byte-identical files.

#pragma once

#include <algorithm>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "evstock/metrics.hpp"
#include "evstock/training.hpp"

namespace evstock {

inline constexpr const char *kMetricsHeader = "model,section,group,n,share,accuracy,mcc,micro_f1";
inline constexpr const char *kHistoryHeader =
    "model,stage,epoch,train_loss,train_acc,dev_loss,dev_acc,dev_mcc,dev_micro_f1";
inline constexpr const char *kPredictionsHeader = "doc_id,bucket,covered,label,predicted,p_up,tags";

// Section order in every report.
inline constexpr std::array<const char *, 3> kSections = {"overall", "bucket", "coverage"};

struct MetricsRow {
  std::string model;
  std::string section;  // overall, bucket or coverage
  std::string group;    // all, a bucket name, covered or uncovered
  long n = 0;
  double share = 0;  // n over the split size; 0 for an empty split
  double accuracy = 0;
  double mcc = 0;
  std::optional<double> micro_f1;  // multi-task model, overall row only

  friend bool operator==(const MetricsRow &, const MetricsRow &) = default;
};

// Short display name for a configuration, e.g. "msspm-fine" or
// "sspm-fine+co_attn_off".
inline std::string ModelLabel(const ModelConfig &cfg) {
  std::string s = std::string(KindName(cfg.kind)) + "-" + FormName(cfg.input_form);
  const auto abl = cfg.ablations.ToString();
  if (!abl.empty()) {
    auto parts = text::Split(abl, ',');
    s += "+" + text::Join(parts, "+");
  }
  return s;
}

namespace internal {

inline void CheckCsvField(const std::string &s, const char *what) {
  if (s.find_first_of(",\"\r\n") != std::string::npos) {
    throw ValidationError(std::string(what) + " '" + s + "' may not contain commas, quotes or newlines");
  }
}

inline MetricsRow RowOf(const std::string &model, const char *section, const std::string &group,
                        const Confusion &c, long total) {
  MetricsRow r;
  r.model = model;
  r.section = section;
  r.group = group;
  r.n = c.n();
  r.share = total == 0 ? 0.0 : static_cast<double>(c.n()) / static_cast<double>(total);
  r.accuracy = c.Accuracy();
  r.mcc = c.MccValue();
  return r;
}

inline std::vector<std::string> CsvFields(const std::string &line, size_t expected,
                                          const char *what, int no) {
  auto f = text::Split(line, ',');
  if (f.size() != expected) {
    throw ParseError(std::string(what) + " row needs " + std::to_string(expected) + " fields", no);
  }
  return f;
}

// Lines of a CSV stream after checking its header; blank lines are skipped.
inline std::vector<std::pair<int, std::string>> CsvBody(std::istream &in, const char *header,
                                                        const char *what) {
  std::vector<std::pair<int, std::string>> rows;
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (no == 1) {
      if (line != header) throw ParseError(std::string("unexpected ") + what + " header", no);
      continue;
    }
    if (!line.empty()) rows.emplace_back(no, line);
  }
  if (no == 0) throw ParseError(std::string("empty ") + what + " file");
  return rows;
}

}  // namespace internal

inline std::vector<MetricsRow> MetricsRows(const std::string &model, const Metrics &m) {
  internal::CheckCsvField(model, "model name");
  const long total = m.overall.n();
  std::vector<MetricsRow> rows;
  rows.push_back(internal::RowOf(model, "overall", "all", m.overall, total));
  if (m.has_tagging) rows.back().micro_f1 = m.micro_f1();
  for (auto b : kAllBuckets) {
    rows.push_back(internal::RowOf(model, "bucket", BucketName(b), m.bucket(b), total));
  }
  rows.push_back(internal::RowOf(model, "coverage", "covered", m.covered, total));
  rows.push_back(internal::RowOf(model, "coverage", "uncovered", m.uncovered, total));
  return rows;
}

inline void WriteMetricsCsv(std::ostream &out, const std::vector<MetricsRow> &rows) {
  out << kMetricsHeader << '\n';
  for (const auto &r : rows) {
    internal::CheckCsvField(r.model, "model name");
    out << r.model << ',' << r.section << ',' << r.group << ',' << r.n << ','
        << text::FormatDouble(r.share) << ',' << text::FormatDouble(r.accuracy) << ','
        << text::FormatDouble(r.mcc) << ',' << (r.micro_f1 ? text::FormatDouble(*r.micro_f1) : "")
        << '\n';
  }
}

inline std::vector<MetricsRow> ReadMetricsCsv(std::istream &in) {
  std::vector<MetricsRow> rows;
  for (const auto &[no, line] : internal::CsvBody(in, kMetricsHeader, "metrics")) {
    const auto f = internal::CsvFields(line, 8, "metrics", no);
    MetricsRow r;
    r.model = f[0];
    r.section = f[1];
    r.group = f[2];
    if (std::find_if(kSections.begin(), kSections.end(),
                     [&](const char *s) { return r.section == s; }) == kSections.end()) {
      throw ParseError("unknown section '" + r.section + "'", no);
    }
    r.n = static_cast<long>(text::ParseInt(f[3], no));
    r.share = text::ParseDouble(f[4], no);
    r.accuracy = text::ParseDouble(f[5], no);
    r.mcc = text::ParseDouble(f[6], no);
    if (!f[7].empty()) r.micro_f1 = text::ParseDouble(f[7], no);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline void WriteHistoryCsv(std::ostream &out, const std::string &model,
                            const std::vector<EpochRecord> &history) {
  internal::CheckCsvField(model, "model name");
  out << kHistoryHeader << '\n';
  for (const auto &h : history) {
    out << model << ',' << h.stage << ',' << h.epoch << ',' << text::FormatDouble(h.train_loss)
        << ',' << text::FormatDouble(h.train_acc) << ',' << text::FormatDouble(h.dev_loss) << ','
        << text::FormatDouble(h.dev_acc) << ',' << text::FormatDouble(h.dev_mcc) << ','
        << text::FormatDouble(h.dev_micro_f1) << '\n';
  }
}

struct HistoryRow {
  std::string model;
  EpochRecord record;
};

inline std::vector<HistoryRow> ReadHistoryCsv(std::istream &in) {
  std::vector<HistoryRow> rows;
  for (const auto &[no, line] : internal::CsvBody(in, kHistoryHeader, "history")) {
    const auto f = internal::CsvFields(line, 9, "history", no);
    HistoryRow r;
    r.model = f[0];
    r.record.stage = f[1];
    r.record.epoch = static_cast<int>(text::ParseInt(f[2], no));
    r.record.train_loss = text::ParseDouble(f[3], no);
    r.record.train_acc = text::ParseDouble(f[4], no);
    r.record.dev_loss = text::ParseDouble(f[5], no);
    r.record.dev_acc = text::ParseDouble(f[6], no);
    r.record.dev_mcc = text::ParseDouble(f[7], no);
    r.record.dev_micro_f1 = text::ParseDouble(f[8], no);
    rows.push_back(std::move(r));
  }
  return rows;
}

// Tags are label names joined by spaces; empty for the single-task model.
inline void WritePredictionsCsv(std::ostream &out, const std::vector<Prediction> &preds,
                                const std::vector<std::string> &alphabet) {
  out << kPredictionsHeader << '\n';
  for (const auto &p : preds) {
    internal::CheckCsvField(p.doc_id, "doc id");
    std::vector<std::string> tags;
    for (int t : p.tags) {
      if (t < 0 || t >= static_cast<int>(alphabet.size())) throw Error("tag id out of range");
      tags.push_back(alphabet[t]);
    }
    out << p.doc_id << ',' << BucketName(p.bucket) << ',' << (p.covered ? 1 : 0) << ','
        << p.label << ',' << p.predicted << ',' << text::FormatDouble(p.p_up) << ','
        << text::Join(tags, " ") << '\n';
  }
}

enum class ReportFormat { kText, kCsv };

inline ReportFormat ParseReportFormat(const std::string &s) {
  if (s == "text") return ReportFormat::kText;
  if (s == "csv") return ReportFormat::kCsv;
  throw ValidationError("unknown report format '" + s + "' (expected text or csv)");
}

// Rows in section order, models in first-seen order within each section.
inline std::vector<MetricsRow> OrderRows(const std::vector<MetricsRow> &rows) {
  std::vector<MetricsRow> out;
  for (const char *section : kSections) {
    for (const auto &r : rows) {
      if (r.section == section) out.push_back(r);
    }
  }
  return out;
}

namespace internal {

inline std::string Percent(double v) { return text::FormatFixed(100.0 * v, 1); }

inline void TextTable(std::ostream &out, const std::vector<std::string> &head,
                      const std::vector<std::vector<std::string>> &body) {
  std::vector<size_t> width(head.size());
  for (size_t c = 0; c < head.size(); ++c) width[c] = head[c].size();
  for (const auto &row : body) {
    for (size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  auto line = [&](const std::vector<std::string> &cells) {
    for (size_t c = 0; c < cells.size(); ++c) {
      if (c > 0) out << "  ";
      out << std::left << std::setw(static_cast<int>(width[c])) << cells[c];
    }
    out << '\n';
  };
  line(head);
  std::vector<std::string> rule;
  for (auto w : width) rule.emplace_back(w, '-');
  line(rule);
  for (const auto &row : body) line(row);
}

}  // namespace internal

// Overall, per-bucket and covered/uncovered tables for every model, plus the
// dev curve of every history. The CSV form carries the metrics table only.
inline std::string RenderReport(const std::vector<MetricsRow> &metrics,
                                const std::vector<HistoryRow> &history, ReportFormat format) {
  const auto rows = OrderRows(metrics);
  std::ostringstream out;
  if (format == ReportFormat::kCsv) {
    WriteMetricsCsv(out, rows);
    return out.str();
  }
  const std::array<const char *, 3> titles = {"Overall", "By news time", "By dictionary coverage"};
  for (size_t s = 0; s < kSections.size(); ++s) {
    std::vector<std::vector<std::string>> body;
    bool any_f1 = false;
    for (const auto &r : rows) any_f1 = any_f1 || (r.section == kSections[s] && r.micro_f1);
    for (const auto &r : rows) {
      if (r.section != kSections[s]) continue;
      std::vector<std::string> cells = {r.model,
                                        r.group,
                                        std::to_string(r.n),
                                        internal::Percent(r.share),
                                        internal::Percent(r.accuracy),
                                        text::FormatFixed(r.mcc, 4)};
      if (any_f1) cells.push_back(r.micro_f1 ? internal::Percent(*r.micro_f1) : "-");
      body.push_back(std::move(cells));
    }
    std::vector<std::string> head = {"model", "group", "n", "share%", "acc%", "mcc"};
    if (any_f1) head.emplace_back("micro_f1%");
    if (s > 0) out << '\n';
    out << titles[s] << '\n';
    internal::TextTable(out, head, body);
  }
  if (!history.empty()) {
    std::vector<std::vector<std::string>> body;
    for (const auto &h : history) {
      const auto &e = h.record;
      body.push_back({h.model, e.stage, std::to_string(e.epoch), text::FormatFixed(e.train_loss, 4),
                      internal::Percent(e.train_acc), text::FormatFixed(e.dev_loss, 4),
                      internal::Percent(e.dev_acc), text::FormatFixed(e.dev_mcc, 4),
                      internal::Percent(e.dev_micro_f1)});
    }
    out << "\nTraining history\n";
    internal::TextTable(out,
                        {"model", "stage", "epoch", "train_loss", "train_acc%", "dev_loss",
                         "dev_acc%", "dev_mcc", "dev_f1%"},
                        body);
  }
  return out.str();
}

}  // namespace evstock
