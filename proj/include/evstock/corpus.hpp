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

// Pre-annotated news headlines and the same-day merge.
//
// Record format, one block per headline, blocks separated by blank lines.
// Each line is a key, a tab, then tab-separated values:
//
//   id      <doc id>
//   stock   <stock id>
//   time    YYYY-MM-DD HH:MM
//   tokens  tok1  tok2 ...
//   pos     TAG1  TAG2 ...
//   dep     head:label ...      (0-based head index, -1 for the root)

#pragma once

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "evstock/common.hpp"

namespace evstock {

struct AnnotatedNews {
  std::string doc_id;
  std::string stock_id;
  Timestamp timestamp;
  std::vector<std::string> tokens;
  std::vector<std::string> pos;
  std::vector<int> dep_head;
  std::vector<std::string> dep_label;

  int size() const { return static_cast<int>(tokens.size()); }

  int Root() const {
    for (int i = 0; i < size(); ++i) {
      if (dep_head[i] == -1) return i;
    }
    return -1;
  }

  // Children of every token, each list in ascending token order.
  std::vector<std::vector<int>> Children() const {
    std::vector<std::vector<int>> ch(tokens.size());
    for (int i = 0; i < size(); ++i) {
      if (dep_head[i] >= 0) ch[dep_head[i]].push_back(i);
    }
    return ch;
  }

  // Number of arcs between token i and the root.
  int Depth(int i) const {
    int d = 0;
    while (dep_head[i] >= 0) {
      i = dep_head[i];
      ++d;
    }
    return d;
  }

  // Membership mask of the dependency subtree rooted at `head`.
  std::vector<bool> SubtreeMask(int head) const {
    std::vector<bool> in(tokens.size(), false);
    for (int i = 0; i < size(); ++i) {
      for (int j = i; j >= 0; j = dep_head[j]) {
        if (j == head) {
          in[i] = true;
          break;
        }
      }
    }
    return in;
  }

  friend bool operator==(const AnnotatedNews &, const AnnotatedNews &) = default;
};

// Throws ValidationError unless the per-token lists agree in length and the
// head links form a single tree.
inline void ValidateNews(const AnnotatedNews &n) {
  const size_t len = n.tokens.size();
  const std::string who = "record '" + n.doc_id + "': ";
  if (len == 0) throw ValidationError(who + "no tokens");
  if (n.pos.size() != len || n.dep_head.size() != len || n.dep_label.size() != len) {
    throw ValidationError(who + "length mismatch among tokens/pos/dep (" +
                          std::to_string(len) + "/" + std::to_string(n.pos.size()) +
                          "/" + std::to_string(n.dep_head.size()) + ")");
  }
  int roots = 0;
  for (size_t i = 0; i < len; ++i) {
    const int h = n.dep_head[i];
    if (h == -1) {
      ++roots;
    } else if (h < 0 || h >= static_cast<int>(len)) {
      throw ValidationError(who + "head index " + std::to_string(h) + " out of range");
    } else if (h == static_cast<int>(i)) {
      throw ValidationError(who + "cycle: token " + std::to_string(i) + " heads itself");
    }
  }
  if (roots == 0) throw ValidationError(who + "missing root");
  if (roots > 1) throw ValidationError(who + "more than one root");
  for (size_t i = 0; i < len; ++i) {
    int j = static_cast<int>(i);
    for (size_t steps = 0; j != -1; ++steps) {
      if (steps > len) {
        throw ValidationError(who + "cycle through token " + std::to_string(i));
      }
      j = n.dep_head[j];
    }
  }
}

namespace internal {

inline void ParseDepField(const std::string &field, AnnotatedNews &n, int line) {
  auto colon = field.find(':');
  if (colon == std::string::npos || colon + 1 >= field.size()) {
    throw ParseError("dep entry '" + field + "' must be head:label", line);
  }
  n.dep_head.push_back(static_cast<int>(text::ParseInt(field.substr(0, colon), line)));
  n.dep_label.push_back(field.substr(colon + 1));
}

inline AnnotatedNews FinishRecord(std::map<std::string, std::vector<std::string>> &fields,
                                  int start_line) {
  for (const char *k : {"id", "stock", "time", "tokens", "pos", "dep"}) {
    if (!fields.count(k)) throw ParseError(std::string("record missing '") + k + "' line", start_line);
  }
  AnnotatedNews n;
  auto single = [&](const char *k) {
    const auto &v = fields[k];
    if (v.size() != 1 || v[0].empty()) {
      throw ParseError(std::string("'") + k + "' takes exactly one value", start_line);
    }
    return v[0];
  };
  n.doc_id = single("id");
  n.stock_id = single("stock");
  n.timestamp = timefmt::ParseTimestamp(single("time"), start_line);
  n.tokens = fields["tokens"];
  n.pos = fields["pos"];
  for (const auto &f : fields["dep"]) ParseDepField(f, n, start_line);
  try {
    ValidateNews(n);
  } catch (const ValidationError &e) {
    throw ParseError(e.what(), start_line);
  }
  return n;
}

}  // namespace internal

// Reads every record, in input order. Throws ParseError (with the record's
// first line) on malformed or invalid records.
inline std::vector<AnnotatedNews> ParseCorpus(std::istream &in) {
  std::vector<AnnotatedNews> out;
  std::map<std::string, std::vector<std::string>> fields;
  std::string raw;
  int line = 0, start = 0;
  auto flush = [&]() {
    if (!fields.empty()) out.push_back(internal::FinishRecord(fields, start));
    fields.clear();
  };
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (text::Trim(raw).empty()) {
      flush();
      continue;
    }
    if (fields.empty()) start = line;
    auto parts = text::Split(raw, '\t');
    const std::string key = parts[0];
    static const char *kKeys[] = {"id", "stock", "time", "tokens", "pos", "dep"};
    if (std::find_if(std::begin(kKeys), std::end(kKeys),
                     [&](const char *k) { return key == k; }) == std::end(kKeys)) {
      throw ParseError("unknown record key '" + key + "'", line);
    }
    if (fields.count(key)) throw ParseError("duplicate key '" + key + "'", line);
    fields[key].assign(parts.begin() + 1, parts.end());
  }
  flush();
  return out;
}

inline std::vector<AnnotatedNews> ParseCorpusString(const std::string &s) {
  std::istringstream in(s);
  return ParseCorpus(in);
}

inline void WriteRecord(std::ostream &out, const AnnotatedNews &n) {
  out << "id\t" << n.doc_id << "\n";
  out << "stock\t" << n.stock_id << "\n";
  out << "time\t" << timefmt::FormatTimestamp(n.timestamp) << "\n";
  out << "tokens";
  for (const auto &t : n.tokens) out << '\t' << t;
  out << "\npos";
  for (const auto &p : n.pos) out << '\t' << p;
  out << "\ndep";
  for (int i = 0; i < n.size(); ++i) out << '\t' << n.dep_head[i] << ':' << n.dep_label[i];
  out << "\n";
}

inline std::string SerializeCorpus(const std::vector<AnnotatedNews> &records) {
  std::ostringstream out;
  for (size_t i = 0; i < records.size(); ++i) {
    if (i > 0) out << "\n";
    WriteRecord(out, records[i]);
  }
  return out.str();
}

inline constexpr const char *kMergeRelation = "parataxis";

// Concatenates records that share (stock_id, date). Fragments are ordered by
// timestamp (stable); later fragments' heads shift by the preceding length and
// their roots attach to the first fragment's root with a parataxis arc. The
// merged record keeps the earliest timestamp and joins doc ids with '+'.
// Output groups appear in order of their first input record.
inline std::vector<AnnotatedNews> MergeSameDayNews(const std::vector<AnnotatedNews> &records) {
  std::map<std::pair<std::string, std::chrono::sys_days>, size_t> group_of;
  std::vector<std::vector<const AnnotatedNews *>> groups;
  for (const auto &r : records) {
    auto key = std::make_pair(r.stock_id, r.timestamp.date);
    auto [it, fresh] = group_of.emplace(key, groups.size());
    if (fresh) groups.emplace_back();
    groups[it->second].push_back(&r);
  }
  std::vector<AnnotatedNews> out;
  out.reserve(groups.size());
  for (auto &g : groups) {
    if (g.size() == 1) {
      out.push_back(*g.front());
      continue;
    }
    std::stable_sort(g.begin(), g.end(), [](auto *a, auto *b) {
      return a->timestamp < b->timestamp;
    });
    AnnotatedNews m;
    m.stock_id = g.front()->stock_id;
    m.timestamp = g.front()->timestamp;
    std::vector<std::string> ids;
    int root = -1;
    for (const auto *r : g) {
      const int offset = m.size();
      ids.push_back(r->doc_id);
      for (int i = 0; i < r->size(); ++i) {
        m.tokens.push_back(r->tokens[i]);
        m.pos.push_back(r->pos[i]);
        if (r->dep_head[i] >= 0) {
          m.dep_head.push_back(r->dep_head[i] + offset);
          m.dep_label.push_back(r->dep_label[i]);
        } else if (root < 0) {
          root = offset + i;
          m.dep_head.push_back(-1);
          m.dep_label.push_back(r->dep_label[i]);
        } else {
          m.dep_head.push_back(root);
          m.dep_label.push_back(kMergeRelation);
        }
      }
    }
    m.doc_id = text::Join(ids, "+");
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace evstock
