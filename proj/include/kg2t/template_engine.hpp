#pragma once

// Template-based generation: clusters of subject-verb-object trees whose
// subject and object nodes are slot templates and whose middle node is a
// verb lemma inflected for tense and voice.
//
// Library DSL, one statement per line, '#' comments:
//   CLUSTER <id> SLOTS <prop>[?|*](, <prop>[?|*])*
//   TREE TENSE=<past|present> VOICE=<active|passive> SUBJ="..." VERB="<lemma>" OBJ="..."
// '?' marks an optional slot, '*' a list slot (required, any number of values).

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "kg2t/common.hpp"
#include "kg2t/inflection.hpp"
#include "kg2t/kg_model.hpp"
#include "kg2t/placeholder.hpp"
#include "kg2t/trace.hpp"

namespace kg2t {

struct SvoTree {
  std::string subject_template;
  std::string verb_lemma;
  std::string object_template;
  Tense tense = Tense::Past;
  Voice voice = Voice::Active;

  bool operator==(const SvoTree&) const = default;
};

enum class SlotKind { Required, Optional, List };

struct SlotSpec {
  std::string property;
  SlotKind kind = SlotKind::Required;

  bool required() const { return kind != SlotKind::Optional; }
};

struct TemplateCluster {
  std::string id;
  std::vector<SlotSpec> slot_signature;
  std::vector<SvoTree> trees;

  bool has_slot(std::string_view p) const {
    return std::any_of(slot_signature.begin(), slot_signature.end(),
                       [&](const SlotSpec& s) { return s.property == p; });
  }
};

struct TemplateLibrary {
  std::vector<TemplateCluster> clusters;
};

struct TemplateOptions {
  // Collapse repeated values inside [prop:*] lists. Off: lists are realized
  // exactly as stored, duplicates included.
  bool dedupe_list_values = false;
  const Lexicon* lexicon = nullptr;
};

// ---------------------------------------------------------------- parsing

namespace detail {

inline std::vector<TemplatePart> checked_template(const std::string& tpl, std::size_t line,
                                                  const TemplateCluster& cluster) {
  auto parsed = tokenize_template(tpl);
  if (auto err = std::get_if<PlaceholderSyntaxError>(&parsed))
    throw DslSyntaxError(err->message + " in \"" + tpl + "\"", line);
  auto parts = std::get<std::vector<TemplatePart>>(std::move(parsed));
  for (const auto& p : placeholders_of(parts))
    if (p.property != kNameProperty && !cluster.has_slot(p.property))
      throw UnknownPlaceholderProperty("line " + std::to_string(line) + ": property '" +
                                       p.property + "' is not in the SLOTS of cluster '" +
                                       cluster.id + "'");
  return parts;
}

// KEY=value pairs; values are bare words or double-quoted with \" and \\ escapes.
inline std::map<std::string, std::string> parse_tree_fields(std::string_view s, std::size_t line) {
  std::map<std::string, std::string> out;
  std::size_t i = 0;
  while (true) {
    while (i < s.size() && text::is_space(s[i])) ++i;
    if (i >= s.size()) break;
    auto eq = s.find('=', i);
    if (eq == std::string_view::npos) throw DslSyntaxError("expected KEY=value", line);
    std::string key(s.substr(i, eq - i));
    if (key.empty() || key.find(' ') != std::string::npos)
      throw DslSyntaxError("bad field name '" + key + "'", line);
    i = eq + 1;
    std::string value;
    if (i < s.size() && s[i] == '"') {
      ++i;
      bool closed = false;
      while (i < s.size()) {
        char c = s[i++];
        if (c == '\\' && i < s.size()) {
          value += s[i++];
        } else if (c == '"') {
          closed = true;
          break;
        } else {
          value += c;
        }
      }
      if (!closed) throw DslSyntaxError("unterminated quoted value for " + key, line);
    } else {
      while (i < s.size() && !text::is_space(s[i])) value += s[i++];
    }
    if (!out.emplace(key, value).second) throw DslSyntaxError("duplicate field " + key, line);
  }
  return out;
}

}  // namespace detail

inline TemplateLibrary parse_template_library(std::string_view source) {
  TemplateLibrary lib;
  std::set<std::string> ids;
  std::size_t cluster_line = 0;
  auto close_cluster = [&] {
    if (!lib.clusters.empty() && lib.clusters.back().trees.empty())
      throw DslSyntaxError("cluster '" + lib.clusters.back().id + "' has no TREE lines",
                           cluster_line);
  };

  std::size_t lineno = 0;
  for (const auto& raw : text::split(source, "\n")) {
    ++lineno;
    auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto sp = line.find(' ');
    auto keyword = line.substr(0, sp);
    auto rest = sp == std::string_view::npos ? std::string_view{} : text::trim(line.substr(sp));

    if (keyword == "CLUSTER") {
      close_cluster();
      auto id_end = rest.find(' ');
      TemplateCluster c;
      c.id = std::string(rest.substr(0, id_end));
      if (c.id.empty()) throw DslSyntaxError("CLUSTER needs an id", lineno);
      if (!ids.insert(c.id).second) throw DslSyntaxError("duplicate cluster id " + c.id, lineno);
      auto after = id_end == std::string_view::npos ? std::string_view{}
                                                    : text::trim(rest.substr(id_end));
      if (after.substr(0, 5) != "SLOTS" || (after.size() > 5 && after[5] != ' '))
        throw DslSyntaxError("expected SLOTS after cluster id", lineno);
      auto slots = text::trim(after.substr(5));
      if (slots.empty()) throw DslSyntaxError("SLOTS list is empty", lineno);
      for (const auto& item : text::split(slots, ",")) {
        auto name = std::string(text::trim(item));
        SlotSpec spec;
        if (!name.empty() && (name.back() == '?' || name.back() == '*')) {
          spec.kind = name.back() == '?' ? SlotKind::Optional : SlotKind::List;
          name.pop_back();
          name = std::string(text::trim(name));
        }
        if (name.empty()) throw DslSyntaxError("empty slot name", lineno);
        if (name.find_first_of("[]") != std::string::npos)
          throw DslSyntaxError("slot name may not contain brackets", lineno);
        spec.property = std::move(name);
        c.slot_signature.push_back(std::move(spec));
      }
      cluster_line = lineno;
      lib.clusters.push_back(std::move(c));
    } else if (keyword == "TREE") {
      if (lib.clusters.empty()) throw DslSyntaxError("TREE before any CLUSTER", lineno);
      auto& cluster = lib.clusters.back();
      auto fields = detail::parse_tree_fields(rest, lineno);
      for (const auto& [k, v] : fields)
        if (k != "TENSE" && k != "VOICE" && k != "SUBJ" && k != "VERB" && k != "OBJ")
          throw DslSyntaxError("unknown field " + k, lineno);
      SvoTree t;
      if (!fields.count("TENSE")) throw DslSyntaxError("TREE needs TENSE", lineno);
      if (fields["TENSE"] == "past")
        t.tense = Tense::Past;
      else if (fields["TENSE"] == "present")
        t.tense = Tense::Present;
      else
        throw DslSyntaxError("TENSE must be past or present", lineno);
      auto voice = fields.count("VOICE") ? fields["VOICE"] : "active";
      if (voice == "active")
        t.voice = Voice::Active;
      else if (voice == "passive")
        t.voice = Voice::Passive;
      else
        throw DslSyntaxError("VOICE must be active or passive", lineno);
      if (!fields.count("VERB") || fields["VERB"].empty())
        throw DslSyntaxError("TREE needs VERB", lineno);
      t.verb_lemma = fields["VERB"];
      if (!std::all_of(t.verb_lemma.begin(), t.verb_lemma.end(),
                       [](char c) { return (c >= 'a' && c <= 'z') || c == '-'; }))
        throw DslSyntaxError("VERB must be a single lower-case lemma", lineno);
      if (!fields.count("SUBJ")) throw DslSyntaxError("TREE needs SUBJ", lineno);
      t.subject_template = fields["SUBJ"];
      t.object_template = fields.count("OBJ") ? fields["OBJ"] : "";
      detail::checked_template(t.subject_template, lineno, cluster);
      detail::checked_template(t.object_template, lineno, cluster);
      cluster.trees.push_back(std::move(t));
    } else {
      throw DslSyntaxError("unknown statement '" + std::string(keyword) + "'", lineno);
    }
  }
  close_cluster();
  return lib;
}

// -------------------------------------------------------------- clustering

// Term-frequency vector over lower-cased words, with placeholders kept whole
// and their value index dropped ("[place of birth:0]" -> "[place of birth]").
using TermVector = std::map<std::string, double>;

inline TermVector text_term_vector(std::string_view delexicalized) {
  TermVector v;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) v[text::to_lower(word)] += 1.0;
    word.clear();
  };
  for (std::size_t i = 0; i < delexicalized.size(); ++i) {
    char c = delexicalized[i];
    if (c == '[') {
      auto close = delexicalized.find(']', i);
      if (close != std::string_view::npos) {
        flush();
        auto p = parse_placeholder_body(delexicalized.substr(i + 1, close - i - 1));
        v[p ? "[" + p->property + "]" : std::string(delexicalized.substr(i, close - i + 1))] += 1.0;
        i = close;
        continue;
      }
    }
    if (text::is_word_byte(static_cast<unsigned char>(c)))
      word += c;
    else
      flush();
  }
  flush();
  return v;
}

inline double cosine_similarity(const TermVector& a, const TermVector& b) {
  double dot = 0, na = 0, nb = 0;
  for (const auto& [k, x] : a) {
    na += x * x;
    if (auto it = b.find(k); it != b.end()) dot += x * it->second;
  }
  for (const auto& [k, y] : b) nb += y * y;
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Slot-type tokens of the record plus the tokens of its delexicalized text.
inline TermVector pair_term_vector(const EntityRecord& r, std::string_view reference) {
  auto v = text_term_vector(delexicalize(reference, r).template_text);
  for (const auto& p : r.properties) v["<" + p.name + ">"] += 1.0;
  return v;
}

// Greedy single pass: each pair joins the first group whose centroid is at
// least `threshold`-similar, otherwise opens a new group.
inline std::vector<std::vector<std::size_t>> cluster_training_pairs(
    const std::vector<std::pair<EntityRecord, std::string>>& pairs, double threshold) {
  std::vector<std::vector<std::size_t>> groups;
  std::vector<TermVector> centroids;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto v = pair_term_vector(pairs[i].first, pairs[i].second);
    std::size_t g = 0;
    for (; g < groups.size(); ++g)
      if (cosine_similarity(centroids[g], v) >= threshold) break;
    if (g == groups.size()) {
      groups.emplace_back();
      centroids.emplace_back();
    }
    groups[g].push_back(i);
    for (const auto& [k, x] : v) centroids[g][k] += x;
  }
  return groups;
}

// ----------------------------------------------------------------- selection

inline double coverage_score(const TemplateCluster& c, const EntityRecord& r) {
  double covered = 0, missing = 0;
  for (const auto& s : c.slot_signature) {
    if (r.has(s.property))
      covered += 1;
    else if (s.required())
      missing += 1;
  }
  return covered - 0.5 * missing;
}

inline bool covers_required(const TemplateCluster& c, const EntityRecord& r) {
  return std::all_of(c.slot_signature.begin(), c.slot_signature.end(),
                     [&](const SlotSpec& s) { return !s.required() || r.has(s.property); });
}

// Highest coverage score among clusters whose required slots the record
// has; ties go to the earlier cluster.
inline const TemplateCluster& select_cluster(const EntityRecord& r, const TemplateLibrary& lib) {
  const TemplateCluster* best = nullptr;
  double best_score = 0;
  for (const auto& c : lib.clusters) {
    if (!covers_required(c, r)) continue;
    double s = coverage_score(c, r);
    if (!best || s > best_score) {
      best = &c;
      best_score = s;
    }
  }
  if (!best) throw NoCoverage("no template cluster covers '" + r.name_id + "'");
  return *best;
}

// ------------------------------------------------------------------ planning

inline std::string pronoun_for(const EntityRecord& r) {
  if (auto g = r.find("sex or gender")) {
    if (text::iequals(g->front(), "male")) return "He";
    if (text::iequals(g->front(), "female")) return "She";
  }
  return "They";
}

inline bool placeholder_fillable(const Placeholder& p, const EntityRecord& r) {
  if (p.property == kNameProperty) return true;
  auto values = r.find(p.property);
  if (!values) return false;
  return p.all_values ? !values->empty() : p.index < values->size();
}

inline bool tree_fillable(const SvoTree& t, const EntityRecord& r) {
  for (const auto* tpl : {&t.subject_template, &t.object_template}) {
    auto parts = tokenize_template(*tpl);
    if (std::holds_alternative<PlaceholderSyntaxError>(parts)) return false;
    for (const auto& p : placeholders_of(std::get<std::vector<TemplatePart>>(parts)))
      if (!placeholder_fillable(p, r)) return false;
  }
  return true;
}

inline bool mentions_name(const std::string& tpl) {
  return tpl.find("[" + std::string(kNameProperty) + "]") != std::string::npos;
}

// Keeps fillable trees in cluster order. The first kept tree introduces the
// entity by name; every later tree refers to it by pronoun.
inline std::vector<SvoTree> plan_trees(const TemplateCluster& cluster, const EntityRecord& r) {
  std::vector<SvoTree> plan;
  for (const auto& t : cluster.trees)
    if (tree_fillable(t, r)) plan.push_back(t);
  if (plan.empty()) throw EmptyPlan("no tree of cluster '" + cluster.id + "' is fillable");
  if (!mentions_name(plan.front().subject_template))
    plan.front().subject_template = "[" + std::string(kNameProperty) + "]";
  auto pronoun = pronoun_for(r);
  for (std::size_t i = 1; i < plan.size(); ++i) plan[i].subject_template = pronoun;
  return plan;
}

// --------------------------------------------------------------- realization

namespace detail {

inline std::string join_list(const std::vector<std::string>& items,
                             std::vector<std::size_t>* offsets) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += (i + 1 == items.size()) ? " and " : ", ";
    if (offsets) offsets->push_back(out.size());
    out += items[i];
  }
  return out;
}

// Fills one node template, appending realized slots with offsets relative to
// `base`.
inline std::string fill_node(const std::string& tpl, const EntityRecord& r,
                             const TemplateOptions& opt, std::size_t base,
                             std::vector<RealizedSlot>& realized) {
  auto parsed = tokenize_template(tpl);
  if (auto err = std::get_if<PlaceholderSyntaxError>(&parsed))
    throw UnfilledPlaceholder(err->message);
  std::string out;
  for (const auto& part : std::get<std::vector<TemplatePart>>(parsed)) {
    if (auto lit = std::get_if<std::string>(&part)) {
      out += *lit;
      continue;
    }
    const auto& p = std::get<Placeholder>(part);
    if (!placeholder_fillable(p, r))
      throw UnfilledPlaceholder("cannot fill " + p.str() + " for '" + r.name_id + "'");
    if (p.property == kNameProperty) {
      realized.push_back({{std::string(kNameProperty), 0, r.name_id}, base + out.size(),
                          r.name_id.size()});
      out += r.name_id;
      continue;
    }
    const auto& values = *r.find(p.property);
    if (!p.all_values) {
      realized.push_back({{p.property, p.index, values[p.index]}, base + out.size(),
                          values[p.index].size()});
      out += values[p.index];
      continue;
    }
    // List expansion; with deduplication a repeated value shares the span of
    // its first appearance.
    std::vector<std::string> items;
    std::vector<std::size_t> item_of(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      auto seen = std::find(items.begin(), items.end(), values[i]);
      if (opt.dedupe_list_values && seen != items.end()) {
        item_of[i] = std::size_t(seen - items.begin());
      } else {
        item_of[i] = items.size();
        items.push_back(values[i]);
      }
    }
    std::vector<std::size_t> offsets;
    auto joined = join_list(items, &offsets);
    for (std::size_t i = 0; i < values.size(); ++i)
      realized.push_back({{p.property, i, values[i]},
                          base + out.size() + offsets[item_of[i]],
                          values[i].size()});
    out += joined;
  }
  return out;
}

inline std::string realize_tree_traced(const SvoTree& t, const EntityRecord& r,
                                       const TemplateOptions& opt, std::size_t base,
                                       std::vector<RealizedSlot>& realized) {
  const Lexicon& lex = opt.lexicon ? *opt.lexicon : Lexicon::default_lexicon();
  std::string sentence;
  auto append_node = [&](const std::string& tpl) {
    // Node text is trimmed; offsets are shifted by the trimmed prefix.
    std::vector<RealizedSlot> local;
    auto filled = fill_node(tpl, r, opt, 0, local);
    auto trimmed = text::trim(filled);
    if (trimmed.empty()) return;
    std::size_t lead = std::size_t(trimmed.data() - filled.data());
    if (!sentence.empty()) sentence += ' ';
    std::size_t at = base + sentence.size();
    for (auto& slot : local) {
      slot.offset = slot.offset - lead + at;
      realized.push_back(std::move(slot));
    }
    sentence += trimmed;
  };
  append_node(t.subject_template);
  if (!sentence.empty()) sentence += ' ';
  sentence += inflect_verb(t.verb_lemma, t.tense, t.voice, lex);
  append_node(t.object_template);
  if (sentence.back() != '.') sentence += '.';
  return sentence;
}

}  // namespace detail

inline std::string realize_tree(const SvoTree& t, const EntityRecord& r,
                                const TemplateOptions& opt = {}) {
  std::vector<RealizedSlot> unused;
  return detail::realize_tree_traced(t, r, opt, 0, unused);
}

inline GeneratedText generate_template_text(const EntityRecord& r, const TemplateLibrary& lib,
                                            const TemplateOptions& opt = {}) {
  const auto& cluster = select_cluster(r, lib);
  GeneratedText out;
  out.trace.source = TextSource::TT;
  for (const auto& tree : plan_trees(cluster, r)) {
    if (!out.text.empty()) out.text += ' ';
    out.text += detail::realize_tree_traced(tree, r, opt, out.text.size(), out.trace.realized);
  }
  return out;
}

}  // namespace kg2t
