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

// Finance event dictionary: event types with trigger phrases and typed roles.
// Each role carries the POS tags its head token may take and a dependency
// path that leads from the trigger head to the role head.
//
// Text format (one directive per line, '#' starts a comment):
//
//   relation <label>                       extra dependency label
//   alias <name> = <rel>|<rel>...          named set of labels
//   spo subject <rel> <rel>...             S/P/O fallback label sets
//   spo object <rel> <rel>...
//   event <type_id> category <cat>
//   trigger <tok> [<tok> ...]              1-4 tokens; "a ... b" = gapped
//   role <name> necessary|optional pos {T1,T2} path up:rel,down:rel span <n>
//
// Labels in a path may be a dependency label, an alias, or '*'.

#pragma once

#include <algorithm>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "evstock/common.hpp"

namespace evstock {

// Maximum number of tokens between the two anchors of a gapped trigger.
inline constexpr int kMaxTriggerGap = 5;
inline constexpr int kMaxTriggerTokens = 4;

enum class StepDirection { kUp, kDown };

struct PathStep {
  StepDirection direction = StepDirection::kDown;
  std::string relation;  // label, alias, or "*"

  friend bool operator==(const PathStep &, const PathStep &) = default;
};

struct RolePattern {
  std::vector<PathStep> steps;
  int max_subtree_span = 1;

  friend bool operator==(const RolePattern &, const RolePattern &) = default;
};

struct EventRoleSpec {
  std::string name;
  bool necessary = false;
  std::set<std::string> pos_allowed;
  RolePattern pattern;

  friend bool operator==(const EventRoleSpec &, const EventRoleSpec &) = default;
};

// Either a contiguous phrase, or two anchors with up to kMaxTriggerGap tokens
// between them.
struct TriggerPhrase {
  std::vector<std::string> tokens;
  bool gapped = false;

  friend bool operator==(const TriggerPhrase &, const TriggerPhrase &) = default;
};

struct EventTypeSpec {
  std::string type_id;
  std::string category;
  std::vector<TriggerPhrase> triggers;
  std::vector<EventRoleSpec> roles;

  const EventRoleSpec *FindRole(std::string_view name) const {
    for (const auto &r : roles) {
      if (r.name == name) return &r;
    }
    return nullptr;
  }
  int NecessaryCount() const {
    return static_cast<int>(std::count_if(
        roles.begin(), roles.end(), [](const auto &r) { return r.necessary; }));
  }

  friend bool operator==(const EventTypeSpec &, const EventTypeSpec &) = default;
};

// Fixed ordered BIO label set. Index 0 is "O"; then B/I pairs for every
// (type, role) sorted by type_id and role name; then the six S/P/O labels.
class LabelAlphabet {
 public:
  static constexpr const char *kOutside = "O";

  LabelAlphabet() : names_{kOutside} { Index(); }

  static LabelAlphabet Build(const std::vector<EventTypeSpec> &types) {
    LabelAlphabet a;
    a.names_.assign(1, kOutside);
    std::vector<const EventTypeSpec *> sorted;
    for (const auto &t : types) sorted.push_back(&t);
    std::sort(sorted.begin(), sorted.end(),
              [](auto *x, auto *y) { return x->type_id < y->type_id; });
    for (const auto *t : sorted) {
      std::vector<std::string> roles;
      for (const auto &r : t->roles) roles.push_back(r.name);
      std::sort(roles.begin(), roles.end());
      for (const auto &r : roles) {
        a.names_.push_back("B-" + t->type_id + "." + r);
        a.names_.push_back("I-" + t->type_id + "." + r);
      }
    }
    for (const char *s : {"SUBJ", "PRED", "OBJ"}) {
      a.names_.push_back(std::string("B-") + s);
      a.names_.push_back(std::string("I-") + s);
    }
    a.Index();
    return a;
  }

  int size() const { return static_cast<int>(names_.size()); }
  const std::string &name(int id) const { return names_.at(static_cast<size_t>(id)); }
  const std::vector<std::string> &names() const { return names_; }

  std::optional<int> Find(std::string_view label) const {
    auto it = ids_.find(std::string(label));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }
  int Id(std::string_view label) const {
    auto id = Find(label);
    if (!id) throw Error("unknown label '" + std::string(label) + "'");
    return *id;
  }

  int Begin(std::string_view type_id, std::string_view role) const {
    return Id("B-" + std::string(type_id) + "." + std::string(role));
  }
  int Inside(std::string_view type_id, std::string_view role) const {
    return Id("I-" + std::string(type_id) + "." + std::string(role));
  }
  int BeginSpo(std::string_view part) const { return Id("B-" + std::string(part)); }
  int InsideSpo(std::string_view part) const { return Id("I-" + std::string(part)); }

  // B and I ids of the same span kind are adjacent, B first.
  static bool IsBegin(int id) { return id > 0 && id % 2 == 1; }
  static bool IsInside(int id) { return id > 0 && id % 2 == 0; }
  static int BeginOf(int inside_id) { return inside_id - 1; }

  // Ids of the S/P/O labels; these make up the coarse label set.
  std::vector<int> SpoIds() const {
    std::vector<int> out;
    for (int i = size() - 6; i < size(); ++i) out.push_back(i);
    return out;
  }

  friend bool operator==(const LabelAlphabet &a, const LabelAlphabet &b) {
    return a.names_ == b.names_;
  }

 private:
  void Index() {
    ids_.clear();
    for (size_t i = 0; i < names_.size(); ++i) ids_[names_[i]] = static_cast<int>(i);
  }

  std::vector<std::string> names_;
  std::unordered_map<std::string, int> ids_;
};

// Universal Dependencies labels accepted in paths without a declaration.
inline const std::set<std::string> &StandardRelations() {
  static const std::set<std::string> kRelations = {
      "acl",       "acl:relcl",  "advcl",     "advmod",     "amod",
      "appos",     "aux",        "aux:pass",  "case",       "cc",
      "ccomp",     "clf",        "compound",  "compound:prt", "conj",
      "cop",       "csubj",      "csubj:pass", "dep",       "det",
      "discourse", "dislocated", "dobj",      "expl",       "fixed",
      "flat",      "goeswith",   "iobj",      "list",       "mark",
      "nmod",      "nmod:poss",  "nmod:tmod", "nsubj",      "nsubj:pass",
      "nummod",    "obj",        "obl",       "obl:npmod",  "obl:tmod",
      "orphan",    "parataxis",  "punct",     "reparandum", "root",
      "vocative",  "xcomp"};
  return kRelations;
}

struct EventDictionary {
  std::vector<EventTypeSpec> types;
  std::map<std::string, std::vector<std::string>> aliases;
  std::set<std::string> extra_relations;
  std::vector<std::string> spo_subject{"nsubj", "nsubj:pass", "csubj"};
  std::vector<std::string> spo_object{"obj", "dobj", "iobj", "ccomp"};
  LabelAlphabet label_alphabet;

  const EventTypeSpec *FindType(std::string_view type_id) const {
    for (const auto &t : types) {
      if (t.type_id == type_id) return &t;
    }
    return nullptr;
  }

  bool IsKnownRelation(const std::string &rel) const {
    return StandardRelations().count(rel) > 0 || extra_relations.count(rel) > 0;
  }

  // Expands an alias to its labels; a plain label maps to itself. Returns
  // nullopt for names that are neither.
  std::optional<std::vector<std::string>> Resolve(const std::string &rel) const {
    if (rel == "*") return std::vector<std::string>{"*"};
    auto it = aliases.find(rel);
    if (it != aliases.end()) return it->second;
    if (IsKnownRelation(rel)) return std::vector<std::string>{rel};
    return std::nullopt;
  }

  bool StepMatches(const PathStep &step, const std::string &label) const {
    if (step.relation == "*") return true;
    auto it = aliases.find(step.relation);
    if (it != aliases.end()) {
      return std::find(it->second.begin(), it->second.end(), label) !=
             it->second.end();
    }
    return step.relation == label;
  }

  void RebuildAlphabet() { label_alphabet = LabelAlphabet::Build(types); }

  friend bool operator==(const EventDictionary &a, const EventDictionary &b) {
    return a.types == b.types && a.aliases == b.aliases &&
           a.extra_relations == b.extra_relations &&
           a.spo_subject == b.spo_subject && a.spo_object == b.spo_object &&
           a.label_alphabet == b.label_alphabet;
  }
};

struct ValidationIssue {
  std::string type_id;  // empty for dictionary-level findings
  std::string role;
  std::string message;

  std::string ToString() const {
    std::string where = type_id.empty() ? "dictionary" : "event " + type_id;
    if (!role.empty()) where += " role " + role;
    return where + ": " + message;
  }
};

// Checks every dictionary invariant. Never throws, never mutates.
inline std::vector<ValidationIssue> ValidateDictionary(const EventDictionary &d) {
  std::vector<ValidationIssue> issues;
  auto add = [&](std::string t, std::string r, std::string m) {
    issues.push_back({std::move(t), std::move(r), std::move(m)});
  };
  if (d.types.empty()) add("", "", "no event types");
  std::set<std::string> seen_types;
  for (const auto &t : d.types) {
    if (t.type_id.empty()) add("", "", "empty type id");
    if (!seen_types.insert(t.type_id).second) add(t.type_id, "", "duplicate type id");
    if (t.category.empty()) add(t.type_id, "", "empty category");
    if (t.triggers.empty()) add(t.type_id, "", "no trigger");
    for (const auto &tr : t.triggers) {
      const int n = static_cast<int>(tr.tokens.size());
      if (n < 1 || n > kMaxTriggerTokens) {
        add(t.type_id, "", "trigger must have 1-" +
                               std::to_string(kMaxTriggerTokens) + " tokens");
      }
      if (tr.gapped && n != 2) add(t.type_id, "", "gapped trigger needs exactly two anchors");
      for (const auto &tok : tr.tokens) {
        if (tok.empty() || tok != text::Lower(tok)) {
          add(t.type_id, "", "trigger token '" + tok + "' not lowercase");
        }
      }
    }
    if (t.roles.empty()) add(t.type_id, "", "no roles");
    if (t.NecessaryCount() == 0) add(t.type_id, "", "no necessary role");
    std::set<std::string> seen_roles;
    for (const auto &r : t.roles) {
      if (r.name.empty()) add(t.type_id, "", "empty role name");
      if (!seen_roles.insert(r.name).second) add(t.type_id, r.name, "duplicate role name");
      if (r.pos_allowed.empty()) add(t.type_id, r.name, "role POS set empty");
      if (r.pattern.steps.empty()) add(t.type_id, r.name, "role path empty");
      if (r.pattern.max_subtree_span < 1) add(t.type_id, r.name, "span cap must be >= 1");
      for (const auto &s : r.pattern.steps) {
        if (!d.Resolve(s.relation)) {
          add(t.type_id, r.name, "unknown relation '" + s.relation + "'");
        }
      }
    }
  }
  for (const auto &[name, labels] : d.aliases) {
    for (const auto &l : labels) {
      if (!d.IsKnownRelation(l)) add("", "", "alias " + name + " uses unknown relation '" + l + "'");
    }
  }
  if (d.label_alphabet != LabelAlphabet::Build(d.types)) {
    add("", "", "label alphabet out of date");
  }
  return issues;
}

namespace internal {

inline PathStep ParseStep(const std::string &s, int line) {
  auto colon = s.find(':');
  if (colon == std::string::npos || colon + 1 >= s.size()) {
    throw ParseError("path step '" + s + "' must be <up|down>:<relation>", line);
  }
  std::string dir = s.substr(0, colon);
  PathStep step;
  if (dir == "up") {
    step.direction = StepDirection::kUp;
  } else if (dir == "down") {
    step.direction = StepDirection::kDown;
  } else {
    throw ParseError("path direction '" + dir + "' must be up or down", line);
  }
  step.relation = s.substr(colon + 1);
  return step;
}

// role <name> necessary|optional pos {A,B} path d:r[,d:r] span <n>
inline EventRoleSpec ParseRole(const std::vector<std::string> &f, int line) {
  if (f.size() != 9 || f[3] != "pos" || f[5] != "path" || f[7] != "span") {
    throw ParseError(
        "role line must read: role <name> necessary|optional pos {TAGS} "
        "path <dir:rel>[,...] span <n>",
        line);
  }
  EventRoleSpec r;
  r.name = f[1];
  if (f[2] == "necessary") {
    r.necessary = true;
  } else if (f[2] != "optional") {
    throw ParseError("role flag must be necessary or optional, got '" + f[2] + "'", line);
  }
  const std::string &pos = f[4];
  if (pos.size() < 2 || pos.front() != '{' || pos.back() != '}') {
    throw ParseError("pos set must be written {TAG,TAG}", line);
  }
  for (auto &tag : text::Split(pos.substr(1, pos.size() - 2), ',')) {
    if (!tag.empty()) r.pos_allowed.insert(tag);
  }
  for (auto &s : text::Split(f[6], ',')) r.pattern.steps.push_back(ParseStep(s, line));
  r.pattern.max_subtree_span = static_cast<int>(text::ParseInt(f[8], line));
  return r;
}

}  // namespace internal

// Parses the text format, reporting syntax errors, duplicate type ids and
// unknown relation names. Invariant checks are left to ValidateDictionary.
inline EventDictionary ParseDictionary(std::istream &in) {
  EventDictionary d;
  std::set<std::string> ids;
  std::vector<std::pair<int, std::string>> used_relations;  // (line, name)
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    auto hash = raw.find('#');
    if (hash != std::string::npos) raw.resize(hash);
    auto f = text::SplitWhitespace(raw);
    if (f.empty()) continue;
    const std::string &kw = f[0];
    if (kw == "event") {
      if (f.size() != 4 || f[2] != "category") {
        throw ParseError("event line must read: event <type_id> category <cat>", line);
      }
      if (!ids.insert(f[1]).second) throw ParseError("duplicate type_id '" + f[1] + "'", line);
      d.types.push_back(EventTypeSpec{f[1], f[3], {}, {}});
    } else if (kw == "trigger") {
      if (d.types.empty()) throw ParseError("trigger before any event", line);
      if (f.size() < 2) throw ParseError("empty trigger", line);
      TriggerPhrase tr;
      for (size_t i = 1; i < f.size(); ++i) {
        if (f[i] == "...") {
          tr.gapped = true;
        } else {
          tr.tokens.push_back(text::Lower(f[i]));
        }
      }
      if (tr.gapped && (f.size() != 4 || f[2] != "...")) {
        throw ParseError("gapped trigger must read: trigger <tok> ... <tok>", line);
      }
      d.types.back().triggers.push_back(std::move(tr));
    } else if (kw == "role") {
      if (d.types.empty()) throw ParseError("role before any event", line);
      auto role = internal::ParseRole(f, line);
      for (const auto &s : role.pattern.steps) used_relations.emplace_back(line, s.relation);
      d.types.back().roles.push_back(std::move(role));
    } else if (kw == "relation") {
      if (f.size() != 2) throw ParseError("relation line must read: relation <label>", line);
      d.extra_relations.insert(f[1]);
    } else if (kw == "alias") {
      // alias <name> = a|b   or   alias <name> a|b
      std::string body;
      if (f.size() == 4 && f[2] == "=") {
        body = f[3];
      } else if (f.size() == 3) {
        body = f[2];
      } else {
        throw ParseError("alias line must read: alias <name> = <rel>|<rel>", line);
      }
      std::vector<std::string> labels;
      for (auto &l : text::Split(body, '|')) {
        if (l.empty()) throw ParseError("empty relation in alias", line);
        labels.push_back(l);
      }
      d.aliases[f[1]] = std::move(labels);
    } else if (kw == "spo") {
      if (f.size() < 3 || (f[1] != "subject" && f[1] != "object")) {
        throw ParseError("spo line must read: spo subject|object <rel>...", line);
      }
      std::vector<std::string> labels(f.begin() + 2, f.end());
      if (f[1] == "subject") {
        d.spo_subject = labels;
      } else {
        d.spo_object = labels;
      }
      for (const auto &l : labels) used_relations.emplace_back(line, l);
    } else {
      throw ParseError("unknown directive '" + kw + "'", line);
    }
  }
  if (d.types.empty()) throw ParseError("no event definitions", line > 0 ? line : 1);
  for (const auto &[l, rel] : used_relations) {
    if (!d.Resolve(rel)) throw ParseError("unknown relation or alias '" + rel + "'", l);
  }
  for (const auto &[name, labels] : d.aliases) {
    for (const auto &l : labels) {
      if (!d.IsKnownRelation(l)) {
        throw ParseError("alias '" + name + "' uses unknown relation '" + l + "'");
      }
    }
  }
  d.RebuildAlphabet();
  return d;
}

// Parses and requires every invariant to hold.
inline EventDictionary LoadDictionary(std::istream &in) {
  EventDictionary d = ParseDictionary(in);
  auto issues = ValidateDictionary(d);
  if (!issues.empty()) throw ValidationError(issues.front().ToString());
  return d;
}

inline EventDictionary LoadDictionaryString(const std::string &s) {
  std::istringstream in(s);
  return LoadDictionary(in);
}

// Canonical text form; LoadDictionary(SerializeDictionary(d)) == d.
inline std::string SerializeDictionary(const EventDictionary &d) {
  std::ostringstream out;
  for (const auto &r : d.extra_relations) out << "relation " << r << "\n";
  for (const auto &[name, labels] : d.aliases) {
    out << "alias " << name << " = " << text::Join(labels, "|") << "\n";
  }
  out << "spo subject " << text::Join(d.spo_subject, " ") << "\n";
  out << "spo object " << text::Join(d.spo_object, " ") << "\n";
  for (const auto &t : d.types) {
    out << "\nevent " << t.type_id << " category " << t.category << "\n";
    for (const auto &tr : t.triggers) {
      out << "trigger " << (tr.gapped ? tr.tokens.at(0) + " ... " + tr.tokens.at(1)
                                      : text::Join(tr.tokens, " "))
          << "\n";
    }
    for (const auto &r : t.roles) {
      std::vector<std::string> pos(r.pos_allowed.begin(), r.pos_allowed.end());
      std::vector<std::string> steps;
      for (const auto &s : r.pattern.steps) {
        steps.push_back(std::string(s.direction == StepDirection::kUp ? "up:" : "down:") +
                        s.relation);
      }
      out << "role " << r.name << " " << (r.necessary ? "necessary" : "optional")
          << " pos {" << text::Join(pos, ",") << "} path " << text::Join(steps, ",")
          << " span " << r.pattern.max_subtree_span << "\n";
    }
  }
  return out.str();
}

}  // namespace evstock
