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

// Dictionary-driven event extraction over annotated headlines:
//
//   FilterCandidates  trigger phrase lookup
//   LocateRoles       dependency path + POS checks for each role
//   ToBio             frame -> per-token BIO labels
//   ExtractSpo        subject/predicate/object fallback
//   Extract           the whole pipeline with fallback

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "evstock/common.hpp"
#include "evstock/corpus.hpp"
#include "evstock/dictionary.hpp"

namespace evstock {

struct Candidate {
  std::string type_id;
  TokenSpan trigger_span;
  std::vector<int> trigger_tokens;  // the anchors only, for gapped triggers

  friend bool operator==(const Candidate &, const Candidate &) = default;
};

struct EventFrame {
  std::string type_id;
  TokenSpan trigger_span;
  std::vector<int> trigger_tokens;
  std::map<std::string, TokenSpan> role_fills;

  friend bool operator==(const EventFrame &, const EventFrame &) = default;
};

struct RoleLabelSequence {
  std::vector<int> labels;
  bool covered = false;

  int size() const { return static_cast<int>(labels.size()); }
  friend bool operator==(const RoleLabelSequence &, const RoleLabelSequence &) = default;
};

// I-x only after B-x or I-x, every id inside the alphabet.
inline bool IsValidBio(const std::vector<int> &labels, int alphabet_size) {
  int prev = 0;
  for (int id : labels) {
    if (id < 0 || id >= alphabet_size) return false;
    if (LabelAlphabet::IsInside(id) && prev != id && prev != LabelAlphabet::BeginOf(id)) {
      return false;
    }
    prev = id;
  }
  return true;
}

inline std::vector<std::string> LabelNames(const std::vector<int> &labels,
                                           const LabelAlphabet &alphabet) {
  std::vector<std::string> out;
  out.reserve(labels.size());
  for (int id : labels) out.push_back(alphabet.name(id));
  return out;
}

// One entry per trigger occurrence per matching type, ordered by token
// position, then type_id. Matching is case-insensitive.
inline std::vector<Candidate> FilterCandidates(const AnnotatedNews &news,
                                               const EventDictionary &d) {
  std::vector<std::string> lower;
  lower.reserve(news.tokens.size());
  for (const auto &t : news.tokens) lower.push_back(text::Lower(t));
  const int len = news.size();

  std::vector<Candidate> out;
  for (const auto &type : d.types) {
    for (const auto &tr : type.triggers) {
      const int n = static_cast<int>(tr.tokens.size());
      for (int p = 0; p < len; ++p) {
        if (lower[p] != tr.tokens[0]) continue;
        Candidate c{type.type_id, {}, {}};
        if (tr.gapped) {
          const int last = std::min(len - 1, p + 1 + kMaxTriggerGap);
          int q = p + 1;
          while (q <= last && lower[q] != tr.tokens[1]) ++q;
          if (q > last) continue;
          c.trigger_span = {p, q + 1};
          c.trigger_tokens = {p, q};
        } else {
          if (p + n > len) continue;
          bool ok = true;
          for (int k = 1; k < n && ok; ++k) ok = lower[p + k] == tr.tokens[k];
          if (!ok) continue;
          c.trigger_span = {p, p + n};
          for (int k = 0; k < n; ++k) c.trigger_tokens.push_back(p + k);
        }
        out.push_back(std::move(c));
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const Candidate &a, const Candidate &b) {
    return std::tie(a.trigger_span.begin, a.type_id, a.trigger_span.end) <
           std::tie(b.trigger_span.begin, b.type_id, b.trigger_span.end);
  });
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace internal {

// The trigger token closest to the root; leftmost on ties.
inline int TriggerHead(const AnnotatedNews &news, const std::vector<int> &trigger) {
  int best = trigger.front();
  int best_depth = news.Depth(best);
  for (int t : trigger) {
    const int depth = news.Depth(t);
    if (depth < best_depth) {
      best = t;
      best_depth = depth;
    }
  }
  return best;
}

// Tokens reachable from `start` by following `steps`, ascending.
inline std::vector<int> FollowPath(const AnnotatedNews &news,
                                   const std::vector<std::vector<int>> &children,
                                   const EventDictionary &d, int start,
                                   const std::vector<PathStep> &steps) {
  std::vector<int> frontier{start};
  for (const auto &step : steps) {
    std::vector<int> next;
    for (int n : frontier) {
      if (step.direction == StepDirection::kUp) {
        if (news.dep_head[n] >= 0 && d.StepMatches(step, news.dep_label[n])) {
          next.push_back(news.dep_head[n]);
        }
      } else {
        for (int c : children[n]) {
          if (d.StepMatches(step, news.dep_label[c])) next.push_back(c);
        }
      }
    }
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());
    frontier = std::move(next);
    if (frontier.empty()) break;
  }
  return frontier;
}

// Maximal run of consecutive tokens around `head` that lie in head's subtree
// and outside `blocked`, trimmed to at most `cap` tokens. The trimmed window
// keeps as many tokens left of the head as it can.
inline TokenSpan SubtreeRun(const AnnotatedNews &news, int head,
                            const std::vector<bool> &blocked, int cap) {
  auto in = news.SubtreeMask(head);
  int lo = head, hi = head;
  while (lo - 1 >= 0 && in[lo - 1] && !blocked[lo - 1]) --lo;
  while (hi + 1 < news.size() && in[hi + 1] && !blocked[hi + 1]) ++hi;
  if (cap > 0) {
    const int begin = std::max(lo, head - (cap - 1));
    const int end = std::min(hi, begin + cap - 1);
    return {begin, end + 1};
  }
  return {lo, hi + 1};
}

}  // namespace internal

// Locates the roles of one candidate. A frame comes back only when every
// necessary role's path reaches a head token whose POS is allowed. The head
// is the lowest-index token reached (trigger tokens excluded). A role whose
// span would overlap an earlier role (declaration order) is dropped.
inline std::optional<EventFrame> LocateRoles(const AnnotatedNews &news,
                                             const Candidate &cand,
                                             const EventDictionary &d) {
  const EventTypeSpec *type = d.FindType(cand.type_id);
  if (type == nullptr || cand.trigger_tokens.empty()) return std::nullopt;
  const auto children = news.Children();
  std::vector<bool> is_trigger(news.tokens.size(), false);
  for (int t : cand.trigger_tokens) is_trigger[t] = true;
  const int trigger_head = internal::TriggerHead(news, cand.trigger_tokens);

  EventFrame frame{cand.type_id, cand.trigger_span, cand.trigger_tokens, {}};
  for (const auto &role : type->roles) {
    auto reached = internal::FollowPath(news, children, d, trigger_head, role.pattern.steps);
    auto it = std::find_if(reached.begin(), reached.end(),
                           [&](int i) { return !is_trigger[i]; });
    if (it == reached.end()) continue;
    const int head = *it;
    if (!role.pos_allowed.count(news.pos[head])) continue;
    TokenSpan span = internal::SubtreeRun(news, head, is_trigger, role.pattern.max_subtree_span);
    bool clash = false;
    for (const auto &[_, other] : frame.role_fills) clash = clash || span.overlaps(other);
    if (clash) continue;
    frame.role_fills.emplace(role.name, span);
  }
  for (const auto &role : type->roles) {
    if (role.necessary && !frame.role_fills.count(role.name)) return std::nullopt;
  }
  return frame;
}

// B-type.role on the first token of each role span, I- on the rest, O
// elsewhere.
inline RoleLabelSequence ToBio(const EventFrame &frame, int length, const EventDictionary &d) {
  if (frame.role_fills.empty()) throw Error("frame for " + frame.type_id + " has no roles");
  RoleLabelSequence seq{std::vector<int>(static_cast<size_t>(length), 0), true};
  std::vector<bool> used(static_cast<size_t>(length), false);
  for (const auto &[role, span] : frame.role_fills) {
    if (span.begin < 0 || span.end > length || span.empty()) {
      throw Error("role " + role + " span out of bounds");
    }
    const int b = d.label_alphabet.Begin(frame.type_id, role);
    const int i = d.label_alphabet.Inside(frame.type_id, role);
    for (int t = span.begin; t < span.end; ++t) {
      if (used[t]) throw Error("role " + role + " overlaps another role");
      used[t] = true;
      seq.labels[t] = t == span.begin ? b : i;
    }
  }
  return seq;
}

// Predicate = the root token; subject/object = the subtree run of the root's
// first child carrying a subject/object relation.
inline RoleLabelSequence ExtractSpo(const AnnotatedNews &news, const EventDictionary &d) {
  const auto &alpha = d.label_alphabet;
  RoleLabelSequence seq{std::vector<int>(news.tokens.size(), 0), false};
  const int root = news.Root();
  if (root < 0) return seq;
  seq.labels[root] = alpha.BeginSpo("PRED");
  const std::vector<bool> none(news.tokens.size(), false);
  const auto children = news.Children();
  auto mark = [&](const std::vector<std::string> &rels, const char *part) {
    for (int c : children[root]) {
      if (std::find(rels.begin(), rels.end(), news.dep_label[c]) == rels.end()) continue;
      TokenSpan span = internal::SubtreeRun(news, c, none, 0);
      for (int t = span.begin; t < span.end; ++t) {
        seq.labels[t] = t == span.begin ? alpha.BeginSpo(part) : alpha.InsideSpo(part);
      }
      return;
    }
  };
  mark(d.spo_subject, "SUBJ");
  mark(d.spo_object, "OBJ");
  return seq;
}

struct ExtractionResult {
  RoleLabelSequence labels;
  std::optional<EventFrame> frame;  // the selected frame when covered
  std::vector<EventFrame> discarded;  // other frames that also matched
};

// Most roles filled, then earliest trigger, then type_id.
inline bool PreferFrame(const EventFrame &a, const EventFrame &b) {
  const auto na = a.role_fills.size(), nb = b.role_fills.size();
  if (na != nb) return na > nb;
  if (a.trigger_span.begin != b.trigger_span.begin) {
    return a.trigger_span.begin < b.trigger_span.begin;
  }
  if (a.type_id != b.type_id) return a.type_id < b.type_id;
  return a.trigger_span.end < b.trigger_span.end;
}

inline ExtractionResult ExtractDetailed(const AnnotatedNews &news, const EventDictionary &d) {
  ExtractionResult result;
  std::vector<EventFrame> frames;
  for (const auto &cand : FilterCandidates(news, d)) {
    if (auto f = LocateRoles(news, cand, d)) frames.push_back(std::move(*f));
  }
  if (frames.empty()) {
    result.labels = ExtractSpo(news, d);
    return result;
  }
  std::stable_sort(frames.begin(), frames.end(), PreferFrame);
  result.labels = ToBio(frames.front(), news.size(), d);
  result.frame = std::move(frames.front());
  result.discarded.assign(std::make_move_iterator(frames.begin() + 1),
                          std::make_move_iterator(frames.end()));
  return result;
}

inline RoleLabelSequence Extract(const AnnotatedNews &news, const EventDictionary &d) {
  return ExtractDetailed(news, d).labels;
}

// Fraction of records with a fine-grained frame; 0 for an empty corpus.
inline double CoverageStats(const std::vector<AnnotatedNews> &corpus, const EventDictionary &d) {
  if (corpus.empty()) return 0.0;
  size_t covered = 0;
  for (const auto &n : corpus) covered += Extract(n, d).covered ? 1 : 0;
  return static_cast<double>(covered) / static_cast<double>(corpus.size());
}

}  // namespace evstock
