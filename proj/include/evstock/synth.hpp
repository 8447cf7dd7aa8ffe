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

// Synthetic news + market generator with a known answer for every sample.
//
// Covered sentences are dependency trees grown from one event type's role
// paths, so the dictionary extractor has exactly one frame to find. Each
// sample carries a polarity word inside a role span; distractor polarity
// words of the opposite sign sit next to, but outside, a span. Bars follow random walks, pinned by a
// Brownian bridge so the sector-corrected return over the label interval
// has the sign the sample calls for.

#pragma once

#include <algorithm>
#include <array>
#include <iterator>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "evstock/corpus.hpp"
#include "evstock/dictionary.hpp"
#include "evstock/extraction.hpp"
#include "evstock/market.hpp"

namespace evstock {

struct SynthConfig {
  int n_samples = 1000;
  double p_covered = 0.7;
  double p_signal = 1.0;   // chance the excess-return sign follows polarity
  int n_stocks = 0;        // 0 picks max(4, n / 50)
  int n_sectors = 3;
  // Chance of one opposite-polarity word next to a span but outside it.
  double p_distractor = 0.8;
  int polarity_words = 5;  // per direction
  double minute_vol = 0.001;
  double gap_vol = 0.003;
  double index_vol = 0.0008;
  double min_excess = 0.005;
  std::array<double, 3> bucket_mix{0.44, 0.24, 0.32};  // trade, out-of-trade time, out-of-trade day
  std::string start_date = "2024-01-01";
  int session_open = 9 * 60;
  int session_close = 9 * 60 + 30;
  int guard = 5;
  uint64_t seed = 1;

  void Validate() const {
    if (n_samples < 1) throw ValidationError("n_samples must be >= 1");
    if (!(p_covered >= 0 && p_covered <= 1)) throw ValidationError("p_covered must be in [0, 1]");
    if (!(p_signal >= 0 && p_signal <= 1)) throw ValidationError("p_signal must be in [0, 1]");
    if (n_stocks < 0 || n_sectors < 1) throw ValidationError("bad stock or sector count");
    if (!(p_distractor >= 0 && p_distractor <= 1)) {
      throw ValidationError("p_distractor must be in [0, 1]");
    }
    if (polarity_words < 1 || polarity_words > 8) throw ValidationError("polarity_words must be in [1, 8]");
    double sum = 0;
    for (double p : bucket_mix) {
      if (p < 0) throw ValidationError("bucket mix must be non-negative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("bucket mix must sum to 1");
    if (session_close - session_open < 2 * guard + kStepMinutes) {
      throw ValidationError("session too short for the guard");
    }
    if (min_excess <= 0) throw ValidationError("min_excess must be > 0");
  }

  int Stocks() const { return n_stocks > 0 ? n_stocks : std::max(4, n_samples / 50); }
};

struct PlantedSample {
  AnnotatedNews news;
  bool covered = false;
  std::string type_id;           // empty when uncovered
  std::vector<int> gold_labels;  // fine frame when covered, S/P/O otherwise
  int polarity = 1;              // +1 or -1
  int polarity_token = -1;
  int intended_label = 1;        // sign the bars were pinned to
  TimeBucket bucket = TimeBucket::kTradeTime;
};

struct SynthDataset {
  std::vector<PlantedSample> samples;
  MarketData market;

  std::vector<AnnotatedNews> News() const {
    std::vector<AnnotatedNews> out;
    out.reserve(samples.size());
    for (const auto &s : samples) out.push_back(s.news);
    return out;
  }
};

// Box-Muller over UnitUniform; std::normal_distribution is not portable.
template <typename Engine>
double StandardNormal(Engine &eng) {
  const double u1 = 1.0 - UnitUniform(eng);  // (0, 1]
  const double u2 = UnitUniform(eng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace internal {

inline double Round4(double x) { return std::round(x * 1e4) / 1e4; }

// Fixed head-relative word order per relation, so spans are recoverable from
// the token sequence alone.
inline bool AttachesLeft(const std::string &rel) {
  static const std::set<std::string> kLeft = {
      "nsubj", "nsubj:pass", "csubj", "nmod:poss", "compound", "amod", "nummod",
      "det",   "advmod",     "aux",   "obl:npmod", "case"};
  return kLeft.count(rel) > 0;
}

// Role-head words by part of speech; each role name gets its own share, so
// the filler of a role tells which role it is. Anything that could start or
// complete a trigger is removed when the factory is created.
inline const std::map<std::string, std::vector<std::string>> &HeadLexicon() {
  static const std::map<std::string, std::vector<std::string>> kWords = {
      {"NNP", {"Acme",    "Borealis", "Cobalt",  "Dynamo",   "Everest", "Fjord",   "Granite",
               "Helix",   "Ionic",    "Juniper", "Kestrel",  "Lumen",   "Meridian", "Nimbus",
               "Orion",   "Pinnacle", "Quasar",  "Radiant",  "Sierra",  "Titan",   "Umbra",
               "Vertex",  "Willow",   "Zephyr",  "Aurora",   "Basalt",  "Cascade", "Delta",
               "Ember",   "Falcon",   "Glacier", "Harbor",   "Indigo",  "Jasper",  "Keystone",
               "Lagoon",  "Monarch",  "Nova",    "Onyx",     "Polaris", "Quartz",  "Redwood",
               "Summit",  "Tundra",   "Unity",   "Vanguard", "Wren",    "Yukon"}},
      {"NN", {"revenue",  "outlook",  "margin",   "capacity", "plan",      "contract", "platform",
              "segment",  "budget",   "forecast", "network",  "portfolio", "quarter",  "unit",
              "program",  "facility", "license",  "venture",  "stake",     "equity",   "debt",
              "loan",     "bond",     "fund",     "chip",     "engine",    "vehicle",  "battery",
              "drug",     "device",   "software", "service",  "factory",   "pipeline", "tender",
              "merger",   "payout",   "coupon",   "yield",    "premium",   "ceiling",  "estimate",
              "guidance", "backlog",  "inventory", "headcount", "chairman", "director", "officer",
              "auditor",  "month",    "week"}},
      {"NNS", {"sales",  "costs",   "volumes",  "assets",    "securities", "notes",  "loans",
               "units",  "plants",  "licenses", "chips",     "engines",    "vehicles", "batteries",
               "drugs",  "devices", "services", "factories", "tenders",    "payouts", "coupons",
               "yields", "premiums", "estimates", "bonuses", "wages",      "rents",   "fees"}},
      {"CD", {"2",  "3",  "5",  "7",  "8",   "10",  "12",  "15",   "20",   "25",   "30",   "40",
              "50", "60", "75", "90", "100", "120", "150", "200", "2024", "2025", "2026", "2027"}},
      {"JJ", {"extra", "ordinary", "preferred", "common", "double", "triple", "fractional",
              "partial", "full", "reverse", "initial", "secondary"}},
      {"VB", {"raise", "cut", "lift", "trim", "hold", "boost", "lower", "upgrade"}},
      {"VBD", {"raised", "lowered", "lifted", "trimmed", "boosted", "upgraded", "downgraded",
               "reiterated"}},
      {"VBZ", {"raises", "cuts", "lifts", "trims", "holds", "boosts", "lowers", "upgrades"}},
  };
  return kWords;
}

// Words for everything that is not a role head: path nodes and the parts of
// uncovered sentences.
inline const std::map<std::string, std::vector<std::string>> &ContextLexicon() {
  static const std::map<std::string, std::vector<std::string>> kWords = {
      {"NNP", {"Atlas", "Beacon", "Crest", "Drake", "Echo",  "Forge", "Grove",  "Haven",
               "Iris",  "Jade",   "Kite",  "Lotus", "Maple", "Noble", "Oak",    "Pike",
               "Quill", "Ridge",  "Slate", "Thorne", "Urban", "Vale", "Wolfe",  "Xenon"}},
      {"NN", {"report", "statement", "filing", "memo", "briefing", "review", "survey", "notice",
              "release", "schedule", "roadmap", "agenda"}},
      {"NNS", {"figures", "details", "terms", "plans", "metrics", "ratios", "accounts",
               "filings"}},
      {"VBD", {"reported", "confirmed", "filed", "noted", "flagged", "outlined", "disclosed",
               "unveiled", "posted", "issued"}},
      {"DT", {"the", "a"}},
  };
  return kWords;
}

inline const std::vector<std::string> &ModifierLexicon() {
  static const std::vector<std::string> kWords = {"annual",    "regional", "global", "domestic",
                                                  "quarterly", "overseas", "core",   "key",
                                                  "major",     "minor"};
  return kWords;
}

inline const std::array<std::vector<std::string>, 2> &PolarityLexicon() {
  static const std::array<std::vector<std::string>, 2> kWords = {
      std::vector<std::string>{"weak", "dismal", "gloomy", "sluggish", "poor", "bleak", "grim",
                               "soft"},
      std::vector<std::string>{"strong", "robust", "upbeat", "stellar", "booming", "bright",
                               "solid", "brisk"}};
  return kWords;
}

struct GenNode {
  std::string word;
  std::string pos;
  std::string rel;
  int parent = -1;
  std::vector<int> left;   // dependents before the node, outermost first
  std::vector<int> right;  // dependents after the node, innermost first
  int role = -1;           // index into the type's roles when a role head
  bool trigger = false;
  int mods = 0;            // modifier leaves directly left of a role head
};

struct Sentence {
  std::vector<GenNode> nodes;

  int Add(GenNode n) {
    nodes.push_back(std::move(n));
    return static_cast<int>(nodes.size()) - 1;
  }
  void Attach(int child, int parent, const std::string &rel, bool left) {
    nodes[child].parent = parent;
    nodes[child].rel = rel;
    if (left) {
      nodes[parent].left.push_back(child);
    } else {
      nodes[parent].right.push_back(child);
    }
  }
  int Root() const {
    for (size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].parent < 0) return static_cast<int>(i);
    }
    return -1;
  }
  // In-order projective layout; returns node -> token position.
  std::vector<int> Layout(std::vector<int> &order) const {
    order.clear();
    std::vector<int> pos(nodes.size(), -1);
    auto emit = [&](auto &&self, int n) -> void {
      for (int c : nodes[n].left) self(self, c);
      pos[n] = static_cast<int>(order.size());
      order.push_back(n);
      for (int c : nodes[n].right) self(self, c);
    };
    emit(emit, Root());
    return pos;
  }
};

}  // namespace internal

// Builds covered and uncovered sentences for one dictionary.
class SentenceFactory {
 public:
  struct Usable {
    int type = 0;
    std::vector<int> triggers;  // contiguous phrases safe to plant
  };

  explicit SentenceFactory(const EventDictionary &d, int polarity_words = 5) : d_(d) {
    std::set<std::string> trigger_words, first_words;
    for (const auto &t : d.types) {
      for (const auto &tr : t.triggers) {
        for (const auto &w : tr.tokens) trigger_words.insert(w);
        first_words.insert(tr.tokens.front());
      }
    }
    auto keep = [&](const std::string &w) { return !trigger_words.count(text::Lower(w)); };
    for (const auto &[pos, words] : internal::ContextLexicon()) {
      std::copy_if(words.begin(), words.end(), std::back_inserter(context_[pos]), keep);
    }
    std::copy_if(internal::ModifierLexicon().begin(), internal::ModifierLexicon().end(),
                 std::back_inserter(modifiers_), keep);
    // Head words of each part of speech are dealt round-robin to the role
    // names that accept it.
    for (const auto &[pos, words] : internal::HeadLexicon()) {
      std::set<std::string> names;
      for (const auto &t : d.types) {
        for (const auto &r : t.roles) {
          if (r.pos_allowed.count(pos)) names.insert(r.name);
        }
      }
      std::vector<std::string> kept;
      std::copy_if(words.begin(), words.end(), std::back_inserter(kept), keep);
      const std::vector<std::string> order(names.begin(), names.end());
      for (size_t k = 0; k < kept.size() && !order.empty(); ++k) {
        role_words_[{order[k % order.size()], pos}].push_back(kept[k]);
      }
      heads_[pos] = std::move(kept);
    }
    if (modifiers_.empty()) throw ValidationError("dictionary triggers cover every modifier word");
    for (int s = 0; s < 2; ++s) {
      for (const auto &w : internal::PolarityLexicon()[s]) {
        if (static_cast<int>(polarity_[s].size()) < polarity_words && !trigger_words.count(w)) {
          polarity_[s].push_back(w);
        }
      }
      if (polarity_[s].empty()) throw ValidationError("dictionary triggers cover every polarity word");
    }
    filler_ = PickFiller();
    for (int ti = 0; ti < static_cast<int>(d.types.size()); ++ti) {
      Usable u{ti, {}};
      const auto &type = d.types[ti];
      for (int k = 0; k < static_cast<int>(type.triggers.size()); ++k) {
        if (SafeTrigger(ti, k, first_words)) u.triggers.push_back(k);
      }
      if (u.triggers.empty()) continue;
      std::mt19937_64 probe(ti);
      if (!Plan(type, u.triggers.front(), NecessaryOnly(type), probe)) continue;
      usable_.push_back(std::move(u));
    }
    if (usable_.empty()) throw ValidationError("dictionary has no event type the generator can use");
  }

  const std::vector<Usable> &usable() const { return usable_; }
  const std::string &filler_relation() const { return filler_; }
  const std::array<std::vector<std::string>, 2> &polarity_words() const { return polarity_; }

  template <typename Engine>
  PlantedSample Covered(int polarity, bool distractor, Engine &rng) const {
    const auto &u = usable_[UniformIndex(rng, usable_.size())];
    const auto &type = d_.types[u.type];
    const int trig = u.triggers[UniformIndex(rng, u.triggers.size())];
    std::optional<internal::Sentence> s;
    for (int attempt = 0; attempt < 30 && !s; ++attempt) {
      std::vector<bool> planted = NecessaryOnly(type);
      for (size_t r = 0; r < type.roles.size(); ++r) {
        if (!type.roles[r].necessary && UnitUniform(rng) < 0.5) planted[r] = true;
      }
      s = Plan(type, trig, planted, rng);
    }
    if (!s) s = Plan(type, trig, NecessaryOnly(type), rng);
    if (!s) throw Error("cannot plant event type " + type.type_id);
    auto &sent = *s;

    // Polarity word inside one role span, other heads get optional modifiers.
    std::vector<int> hosts;
    for (int i = 0; i < static_cast<int>(sent.nodes.size()); ++i) {
      const auto &n = sent.nodes[i];
      if (n.role >= 0 && n.left.empty() && n.right.empty() &&
          type.roles[n.role].pattern.max_subtree_span >= 2) {
        hosts.push_back(i);
      }
    }
    if (hosts.empty()) throw Error("event type " + type.type_id + " has no span for polarity");
    const int host = hosts[UniformIndex(rng, hosts.size())];
    int polarity_node = -1;
    for (int h : hosts) {
      const int cap = type.roles[sent.nodes[h].role].pattern.max_subtree_span;
      int mods = static_cast<int>(UniformIndex(rng, static_cast<uint64_t>(cap)));
      if (h == host) mods = std::max(mods, 1);
      const int pol_slot = h == host ? static_cast<int>(UniformIndex(rng, mods)) : -1;
      for (int m = 0; m < mods; ++m) {
        int c;
        if (m == pol_slot) {
          c = sent.Add({Polar(polarity, rng), "JJ"});
          polarity_node = c;
        } else {
          c = sent.Add({Modifier(rng), "JJ"});
        }
        sent.Attach(c, h, filler_, true);
        ++sent.nodes[h].mods;
      }
    }
    std::vector<int> spans;
    for (int i = 0; i < static_cast<int>(sent.nodes.size()); ++i) {
      if (sent.nodes[i].role >= 0) spans.push_back(i);
    }
    if (distractor) AddDistractor(sent, -polarity, spans, rng);

    PlantedSample out;
    out.covered = true;
    out.type_id = type.type_id;
    out.polarity = polarity;
    std::vector<int> order;
    const auto pos = Finish(sent, out.news, order);
    out.polarity_token = pos[polarity_node];
    out.gold_labels.assign(order.size(), 0);
    for (const auto &n : sent.nodes) {
      if (n.role < 0) continue;
      const auto &role = type.roles[n.role];
      const int head = pos[&n - sent.nodes.data()];
      const int begin = head - n.mods;
      out.gold_labels[begin] = d_.label_alphabet.Begin(type.type_id, role.name);
      for (int t = begin + 1; t <= head; ++t) {
        out.gold_labels[t] = d_.label_alphabet.Inside(type.type_id, role.name);
      }
    }
    return out;
  }

  // Subject-verb-object sentence with no trigger word; gold is its S/P/O.
  template <typename Engine>
  PlantedSample Uncovered(int polarity, bool distractor, Engine &rng) const {
    internal::Sentence s;
    const int verb = s.Add({Word("VBD", rng), "VBD"});
    const int subj = s.Add({Word("NNP", rng), "NNP"});
    s.Attach(subj, verb, d_.spo_subject.front(), true);
    const bool plural = UnitUniform(rng) < 0.5;
    const int obj = s.Add({Word(plural ? "NNS" : "NN", rng), plural ? "NNS" : "NN"});
    s.Attach(obj, verb, d_.spo_object.front(), false);
    const bool in_subject = UnitUniform(rng) < 0.5;
    const int host = in_subject ? subj : obj;
    if (!in_subject && UnitUniform(rng) < 0.5) {
      const int det = s.Add({Word("DT", rng), "DT"});
      s.Attach(det, obj, filler_, true);
      ++s.nodes[obj].mods;
    }
    const int mods = 1 + static_cast<int>(UniformIndex(rng, 2));
    const int pol_slot = static_cast<int>(UniformIndex(rng, mods));
    int polarity_node = -1;
    for (int m = 0; m < mods; ++m) {
      int c;
      if (m == pol_slot) {
        c = s.Add({Polar(polarity, rng), "JJ"});
        polarity_node = c;
      } else {
        c = s.Add({Modifier(rng), "JJ"});
      }
      s.Attach(c, host, filler_, true);
      ++s.nodes[host].mods;
    }
    if (distractor) AddDistractor(s, -polarity, {subj, obj}, rng);

    PlantedSample out;
    out.covered = false;
    out.polarity = polarity;
    std::vector<int> order;
    const auto pos = Finish(s, out.news, order);
    out.polarity_token = pos[polarity_node];
    const auto &a = d_.label_alphabet;
    out.gold_labels.assign(order.size(), 0);
    out.gold_labels[pos[verb]] = a.BeginSpo("PRED");
    auto mark = [&](int node, const char *part) {
      const int head = pos[node];
      const int begin = head - s.nodes[node].mods;
      out.gold_labels[begin] = a.BeginSpo(part);
      for (int t = begin + 1; t <= head; ++t) out.gold_labels[t] = a.InsideSpo(part);
    };
    mark(subj, "SUBJ");
    mark(obj, "OBJ");
    return out;
  }

 private:
  static std::vector<bool> NecessaryOnly(const EventTypeSpec &t) {
    std::vector<bool> v(t.roles.size());
    for (size_t r = 0; r < t.roles.size(); ++r) v[r] = t.roles[r].necessary;
    return v;
  }

  // A relation no role step and no S/P/O rule can match.
  std::string PickFiller() const {
    for (const char *rel : {"dep", "discourse", "list", "vocative", "orphan", "goeswith"}) {
      bool clash = std::find(d_.spo_subject.begin(), d_.spo_subject.end(), rel) !=
                       d_.spo_subject.end() ||
                   std::find(d_.spo_object.begin(), d_.spo_object.end(), rel) != d_.spo_object.end();
      for (const auto &t : d_.types) {
        for (const auto &r : t.roles) {
          for (const auto &s : r.pattern.steps) clash = clash || d_.StepMatches(s, rel);
        }
      }
      if (!clash) return rel;
    }
    throw ValidationError("no free dependency relation for filler words");
  }

  // Contiguous trigger whose words cannot start another type's trigger.
  bool SafeTrigger(int ti, int k, const std::set<std::string> &first_words) const {
    const auto &tr = d_.types[ti].triggers[k];
    if (tr.gapped) return false;
    for (size_t j = 0; j < d_.types.size(); ++j) {
      if (static_cast<int>(j) == ti) continue;
      for (const auto &other : d_.types[j].triggers) {
        for (const auto &w : tr.tokens) {
          if (w == other.tokens.front()) return false;
        }
      }
    }
    for (size_t p = 1; p < tr.tokens.size(); ++p) {
      if (first_words.count(tr.tokens[p])) return false;
    }
    return true;
  }

  template <typename Engine>
  static const std::string &Pick(const std::vector<std::string> &words, Engine &rng) {
    return words[UniformIndex(rng, words.size())];
  }

  template <typename Engine>
  std::string Word(const std::string &pos, Engine &rng) const {
    auto it = context_.find(pos);
    if (it == context_.end() || it->second.empty()) it = context_.find("NN");
    return Pick(it->second, rng);
  }

  template <typename Engine>
  std::string Modifier(Engine &rng) const {
    return Pick(modifiers_, rng);
  }

  // A head word reserved for `role`; POS values outside the head lexicon fall
  // back to context words.
  template <typename Engine>
  std::string RoleWord(const std::string &role, const std::string &pos, Engine &rng) const {
    auto it = role_words_.find({role, pos});
    if (it != role_words_.end() && !it->second.empty()) return Pick(it->second, rng);
    auto all = heads_.find(pos);
    if (all != heads_.end() && !all->second.empty()) return Pick(all->second, rng);
    return Word(pos, rng);
  }

  template <typename Engine>
  std::string Polar(int polarity, Engine &rng) const {
    const auto &w = polarity_[polarity > 0 ? 1 : 0];
    return w[UniformIndex(rng, w.size())];
  }

  // Grows the tree for `planted` roles from the trigger head. Fails when two
  // roles would share a head, a step would be ambiguous, a capped span would
  // swallow other path tokens, or an unplanted role would find a head.
  template <typename Engine>
  std::optional<internal::Sentence> Plan(const EventTypeSpec &type, int trig,
                                         const std::vector<bool> &planted, Engine &rng) const {
    internal::Sentence s;
    const auto &phrase = type.triggers[trig].tokens;
    const int head = s.Add({phrase.back(), "NN"});
    s.nodes[head].trigger = true;
    auto matching_kids = [&](int n, const PathStep &step) {
      std::vector<int> out;
      for (int c : s.nodes[n].left) {
        if (d_.StepMatches(step, s.nodes[c].rel)) out.push_back(c);
      }
      for (int c : s.nodes[n].right) {
        if (d_.StepMatches(step, s.nodes[c].rel)) out.push_back(c);
      }
      return out;
    };
    for (size_t r = 0; r < type.roles.size(); ++r) {
      if (!planted[r]) continue;
      const auto &role = type.roles[r];
      int cur = head;
      for (const auto &step : role.pattern.steps) {
        if (step.relation == "*") return std::nullopt;
        const std::string rel = d_.Resolve(step.relation)->front();
        if (step.direction == StepDirection::kUp) {
          if (s.nodes[cur].parent < 0) {
            const int p = s.Add({"", "VBD"});
            s.Attach(cur, p, rel, internal::AttachesLeft(rel));
            cur = p;
          } else if (d_.StepMatches(step, s.nodes[cur].rel)) {
            cur = s.nodes[cur].parent;
          } else {
            return std::nullopt;
          }
        } else {
          auto kids = matching_kids(cur, step);
          if (kids.size() > 1) return std::nullopt;
          if (kids.empty()) {
            const int c = s.Add({"", "NN"});
            s.Attach(c, cur, rel, internal::AttachesLeft(rel));
            cur = c;
          } else {
            cur = kids.front();
          }
        }
      }
      if (cur == head || s.nodes[cur].trigger || s.nodes[cur].role >= 0) return std::nullopt;
      s.nodes[cur].role = static_cast<int>(r);
    }
    // Every planted path must reach exactly its own head; unplanted ones none.
    for (size_t r = 0; r < type.roles.size(); ++r) {
      std::vector<int> frontier{head};
      for (const auto &step : type.roles[r].pattern.steps) {
        std::vector<int> next;
        for (int n : frontier) {
          if (step.direction == StepDirection::kUp) {
            if (s.nodes[n].parent >= 0 && d_.StepMatches(step, s.nodes[n].rel)) {
              next.push_back(s.nodes[n].parent);
            }
          } else {
            for (int c : matching_kids(n, step)) next.push_back(c);
          }
        }
        std::sort(next.begin(), next.end());
        next.erase(std::unique(next.begin(), next.end()), next.end());
        if (planted[r] && next.size() != 1) return std::nullopt;
        frontier = std::move(next);
      }
      if (planted[r]) {
        if (s.nodes[frontier.front()].role != static_cast<int>(r)) return std::nullopt;
      } else if (!frontier.empty()) {
        return std::nullopt;
      }
    }
    // Role heads with dependents of their own only work with single-token spans.
    for (auto &n : s.nodes) {
      if (n.role < 0) continue;
      const bool has_kids = !n.left.empty() || !n.right.empty() || n.trigger;
      if (has_kids && type.roles[n.role].pattern.max_subtree_span != 1) return std::nullopt;
    }
    // Words and tags.
    for (auto &n : s.nodes) {
      if (n.trigger) continue;
      if (n.role >= 0) {
        const auto &role = type.roles[n.role];
        auto it = role.pos_allowed.begin();
        std::advance(it, static_cast<long>(UniformIndex(rng, role.pos_allowed.size())));
        n.pos = *it;
        n.word = RoleWord(role.name, n.pos, rng);
      } else {
        n.word = Word(n.pos, rng);
      }
    }
    // Remaining trigger words sit directly left of the head, in order.
    for (size_t k = 0; k + 1 < phrase.size(); ++k) {
      const int c = s.Add({phrase[k], "NN"});
      s.nodes[c].trigger = true;
      s.Attach(c, head, filler_, true);
    }
    return s;
  }

  // A polarity adjective placed directly before a span but attached to the
  // span head's parent: the extractor leaves it out, while the token sequence
  // alone cannot tell it from a modifier.
  template <typename Engine>
  void AddDistractor(internal::Sentence &s, int polarity, const std::vector<int> &spans,
                     Engine &rng) const {
    std::vector<int> hosts;
    for (int h : spans) {
      if (s.nodes[h].parent >= 0) hosts.push_back(h);
    }
    if (hosts.empty()) return;
    const int h = hosts[UniformIndex(rng, hosts.size())];
    const int p = s.nodes[h].parent;
    const int adj = s.Add({Polar(polarity, rng), "JJ"});
    s.nodes[adj].parent = p;
    s.nodes[adj].rel = filler_;
    for (auto *side : {&s.nodes[p].left, &s.nodes[p].right}) {
      auto it = std::find(side->begin(), side->end(), h);
      if (it != side->end()) {
        side->insert(it, adj);
        break;
      }
    }
  }

  std::vector<int> Finish(const internal::Sentence &s, AnnotatedNews &news,
                          std::vector<int> &order) const {
    auto pos = s.Layout(order);
    for (int n : order) {
      const auto &g = s.nodes[n];
      news.tokens.push_back(g.word);
      news.pos.push_back(g.pos);
      news.dep_head.push_back(g.parent < 0 ? -1 : pos[g.parent]);
      news.dep_label.push_back(g.parent < 0 ? "root" : g.rel);
    }
    return pos;
  }

  const EventDictionary &d_;
  std::map<std::string, std::vector<std::string>> context_;
  std::map<std::string, std::vector<std::string>> heads_;
  std::map<std::pair<std::string, std::string>, std::vector<std::string>> role_words_;
  std::vector<std::string> modifiers_;
  std::array<std::vector<std::string>, 2> polarity_;
  std::string filler_;
  std::vector<Usable> usable_;
};

namespace internal {

// Per-stock price path over session minutes of consecutive trade days.
class PricePath {
 public:
  PricePath(double start, double minute_vol, double gap_vol)
      : price_(start), minute_vol_(minute_vol), gap_vol_(gap_vol) {}

  double price() const { return price_; }
  double Set(double p) { return price_ = p; }

  template <typename Engine>
  double Gap(Engine &rng) {
    price_ = Round4(price_ * std::exp(gap_vol_ * StandardNormal(rng)));
    return price_;
  }

  template <typename Engine>
  double Step(Engine &rng) {
    price_ = Round4(price_ * std::exp(minute_vol_ * StandardNormal(rng)));
    return price_;
  }

  // Brownian bridge in log price that lands exactly on `target` after
  // `steps` moves.
  template <typename Engine>
  double BridgeStep(double target, int steps_left, Engine &rng) {
    if (steps_left <= 1) {
      price_ = target;
      return price_;
    }
    const double x = std::log(price_), xt = std::log(target);
    const double r = static_cast<double>(steps_left);
    const double sd = minute_vol_ * std::sqrt((r - 1.0) / r);
    price_ = Round4(std::exp(x + (xt - x) / r + sd * StandardNormal(rng)));
    return price_;
  }

 private:
  double price_;
  double minute_vol_;
  double gap_vol_;
};

template <typename Engine>
MinuteBar MakeBar(int minute, double open, double close, Engine &rng) {
  MinuteBar b;
  b.minute = minute;
  b.open = open;
  b.close = close;
  b.high = Round4(std::max(open, close) * (1.0 + 0.0005 * UnitUniform(rng)));
  b.low = Round4(std::min(open, close) * (1.0 - 0.0005 * UnitUniform(rng)));
  b.high = std::max(b.high, std::max(open, close));
  b.low = std::min(b.low, std::min(open, close));
  b.vwap = std::clamp(Round4((b.open + b.close + b.high + b.low) / 4.0), b.low, b.high);
  b.volume = static_cast<double>(100 + UniformIndex(rng, 4900));
  b.value = std::round(b.volume * b.vwap * 100.0) / 100.0;
  return b;
}

}  // namespace internal

// Generates news, bars, index series and gold annotations. Sample i lives on
// stock i mod S in the i / S-th pair of trade days (d0, d1); the calendar
// alternates trade and non-trade days so every pair has a day off between.
inline SynthDataset SynthCorpus(const SynthConfig &cfg, const EventDictionary &d) {
  cfg.Validate();
  SentenceFactory factory(d, cfg.polarity_words);
  std::mt19937_64 rng(cfg.seed);
  const int n = cfg.n_samples;
  const int stocks = cfg.Stocks();
  const int pairs = (n + stocks - 1) / stocks;

  SynthDataset ds;
  auto &cal = ds.market.calendar;
  cal.open = cfg.session_open;
  cal.close = cfg.session_close;
  cal.guard = cfg.guard;
  const Day start = timefmt::ParseDate(cfg.start_date);
  std::vector<Day> trade_days;
  for (int k = 0; k < 2 * pairs; ++k) trade_days.push_back(start + std::chrono::days(2 * k));
  cal.days.insert(trade_days.begin(), trade_days.end());

  // Which samples are covered and which bucket each falls in.
  const int n_covered = static_cast<int>(std::floor(cfg.p_covered * n + 0.5));
  std::vector<char> covered(n, 0);
  std::fill(covered.begin(), covered.begin() + n_covered, 1);
  StableShuffle(covered, rng);
  const int n_trade = static_cast<int>(std::floor(cfg.bucket_mix[0] * n + 0.5));
  const int n_time = std::min(n - n_trade, static_cast<int>(std::floor(cfg.bucket_mix[1] * n + 0.5)));
  std::vector<TimeBucket> buckets(n, TimeBucket::kOutOfTradeDay);
  std::fill(buckets.begin(), buckets.begin() + n_trade, TimeBucket::kTradeTime);
  std::fill(buckets.begin() + n_trade, buckets.begin() + n_trade + n_time,
            TimeBucket::kOutOfTradeTime);
  StableShuffle(buckets, rng);

  // Sector index series.
  for (int s = 0; s < cfg.n_sectors; ++s) {
    const std::string id = "IDX" + std::to_string(s);
    auto &days = ds.market.index[id];
    double v = 1000.0 * (1.0 + 0.1 * s);
    for (Day day : trade_days) {
      auto &pts = days[day];
      for (int m = cal.open; m < cal.close; ++m) {
        v = internal::Round4(v * std::exp(cfg.index_vol * StandardNormal(rng)));
        pts.push_back({m, v});
      }
    }
  }
  std::vector<std::string> stock_ids;
  const int width = static_cast<int>(std::to_string(stocks - 1).size());
  for (int s = 0; s < stocks; ++s) {
    std::string num = std::to_string(s);
    stock_ids.push_back("S" + std::string(static_cast<size_t>(width) - num.size(), '0') + num);
    ds.market.sector[stock_ids.back()] = "IDX" + std::to_string(s % cfg.n_sectors);
  }

  // Text and timestamps.
  const int id_width = static_cast<int>(std::to_string(n).size());
  ds.samples.reserve(n);
  for (int i = 0; i < n; ++i) {
    const int polarity = UnitUniform(rng) < 0.5 ? 1 : -1;
    const bool distractor = UnitUniform(rng) < cfg.p_distractor;
    PlantedSample ps = covered[i] ? factory.Covered(polarity, distractor, rng)
                                  : factory.Uncovered(polarity, distractor, rng);
    const std::string num = std::to_string(i + 1);
    ps.news.doc_id = "n" + std::string(static_cast<size_t>(id_width) - num.size(), '0') + num;
    ps.news.stock_id = stock_ids[i % stocks];
    ps.bucket = buckets[i];
    const int pair = i / stocks;
    const Day d0 = trade_days[2 * pair], d1 = trade_days[2 * pair + 1];
    Timestamp ts;
    switch (ps.bucket) {
      case TimeBucket::kTradeTime:
        ts = {d1, cal.open + cal.guard +
                      static_cast<int>(UniformIndex(rng, cal.close - 2 * cal.guard - cal.open + 1))};
        break;
      case TimeBucket::kOutOfTradeTime:
        if (UnitUniform(rng) < 0.5) {
          ts = {d0, cal.close + static_cast<int>(UniformIndex(rng, 24 * 60 - cal.close))};
        } else {
          ts = {d1, static_cast<int>(UniformIndex(rng, cal.open))};
        }
        break;
      case TimeBucket::kOutOfTradeDay:
        ts = {d0 + std::chrono::days(1), static_cast<int>(UniformIndex(rng, 24 * 60))};
        break;
    }
    ps.news.timestamp = ts;
    const bool follow = UnitUniform(rng) < cfg.p_signal;
    ps.intended_label = (follow ? ps.polarity : -ps.polarity) > 0 ? 1 : 0;
    ds.samples.push_back(std::move(ps));
  }

  // Bars, one stock at a time, pair by pair.
  for (int s = 0; s < stocks; ++s) {
    const auto &index = ds.market.index.at(ds.market.sector.at(stock_ids[s]));
    auto &book = ds.market.bars[stock_ids[s]];
    internal::PricePath path(50.0 + 10.0 * s, cfg.minute_vol, cfg.gap_vol);
    for (int pair = 0; pair < pairs; ++pair) {
      const int i = pair * stocks + s;
      const PlantedSample *ps = i < n ? &ds.samples[i] : nullptr;
      double target_ratio = 0;
      if (ps != nullptr) {
        auto [i0, i1] = ReturnEndpoints(index, ps->news.timestamp, cal, "sector index");
        const double sector = (i1 - i0) / i0;
        const double excess = cfg.min_excess + std::abs(0.01 * StandardNormal(rng));
        target_ratio = 1.0 + sector + (ps->intended_label == 1 ? excess : -excess);
      }
      const bool in_trade = ps != nullptr && ps->bucket == TimeBucket::kTradeTime;
      for (int k = 0; k < 2; ++k) {
        const Day day = trade_days[2 * pair + k];
        auto &bars = book[day];
        double open;
        if (k == 1 && ps != nullptr && !in_trade) {
          open = path.Set(internal::Round4(path.price() * target_ratio));  // pinned overnight move
        } else {
          open = path.Gap(rng);
        }
        double prev = open;
        double anchor = 0;
        for (int m = cal.open; m < cal.close; ++m) {
          double close;
          if (k == 1 && in_trade && m > ps->news.timestamp.minute) {
            const double target = internal::Round4(anchor * target_ratio);
            close = path.BridgeStep(target, cal.close - m, rng);
          } else {
            close = path.Step(rng);
          }
          if (k == 1 && in_trade && m == ps->news.timestamp.minute) anchor = close;
          bars.push_back(internal::MakeBar(m, prev, close, rng));
          prev = close;
        }
      }
    }
  }
  return ds;
}

}  // namespace evstock
