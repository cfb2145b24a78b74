#pragma once

// Data-driven generation: a Markov-chain sentence planner over slot-type
// tokens, a count-based transducer from slot-type sequences to delexicalised
// templates, lexicalisation and surface clean-up.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "kg2t/common.hpp"
#include "kg2t/kg_model.hpp"
#include "kg2t/placeholder.hpp"
#include "kg2t/trace.hpp"

namespace kg2t {

inline constexpr std::string_view kStartToken = "<s>";
inline constexpr std::string_view kEndToken = "<end>";
inline constexpr std::string_view kUnknownToken = "<unk>";

using TokenSeq = std::vector<std::string>;

inline const std::set<std::string>& default_meta_slots() {
  static const std::set<std::string> meta = {"instance of", "sex or gender"};
  return meta;
}

// ------------------------------------------------------------------- planner

struct Transition {
  std::string token;
  double probability;
};

class MarkovPlanner {
 public:
  MarkovPlanner() = default;
  explicit MarkovPlanner(std::size_t order) : order_(order) {}

  std::size_t order() const { return order_; }

  void add_count(const TokenSeq& state, const std::string& next, std::uint64_t n = 1) {
    counts_[state][next] += n;
  }

  // Outgoing distribution of a state, most probable first, ties by token.
  std::vector<Transition> transitions(const TokenSeq& state) const {
    std::vector<Transition> out;
    auto it = counts_.find(state);
    if (it == counts_.end()) return out;
    std::uint64_t total = 0;
    for (const auto& [tok, n] : it->second) total += n;
    for (const auto& [tok, n] : it->second) out.push_back({tok, double(n) / double(total)});
    std::stable_sort(out.begin(), out.end(), [](const Transition& a, const Transition& b) {
      return a.probability > b.probability;
    });
    return out;
  }

  double probability(const TokenSeq& state, const std::string& next) const {
    for (const auto& t : transitions(state))
      if (t.token == next) return t.probability;
    return 0.0;
  }

  TokenSeq start_state() const { return TokenSeq(order_, std::string(kStartToken)); }

  static TokenSeq advance(TokenSeq state, const std::string& token) {
    if (state.empty()) return state;
    state.erase(state.begin());
    state.push_back(token);
    return state;
  }

  const std::map<TokenSeq, std::map<std::string, std::uint64_t>>& counts() const {
    return counts_;
  }

 private:
  std::size_t order_ = 2;
  std::map<TokenSeq, std::map<std::string, std::uint64_t>> counts_;
};

// Maximum-likelihood n-gram transitions; each sequence starts from a state
// of n start tokens.
inline MarkovPlanner train_planner(const std::vector<TokenSeq>& sequences, std::size_t n) {
  if (n < 1) throw Error("BadOrder", "planner order must be at least 1");
  if (sequences.empty()) throw EmptyInput("no training sequences");
  MarkovPlanner p(n);
  for (const auto& seq : sequences) {
    auto state = p.start_state();
    for (const auto& tok : seq) {
      p.add_count(state, tok);
      state = MarkovPlanner::advance(std::move(state), tok);
    }
  }
  return p;
}

struct SentencePlan {
  std::vector<TokenSeq> groups;
};

// Slot-type tokens a record offers: its name plus each non-meta property.
inline TokenSeq placeable_tokens(const EntityRecord& r, const std::set<std::string>& ignore) {
  TokenSeq out{std::string(kNameProperty)};
  for (const auto& p : r.properties)
    if (!ignore.count(p.name)) out.push_back(p.name);
  return out;
}

// Greedy walk: from the current state take the most probable transition to a
// still-unplaced token or, when the open group is non-empty, to the end token
// (which closes it). Ties resolve to the lexicographically smaller token.
// When no transition is admissible the remaining tokens form one last group
// in record order.
inline SentencePlan plan_sentences(const MarkovPlanner& p, const EntityRecord& r,
                                   const std::set<std::string>& ignore = default_meta_slots()) {
  auto tokens = placeable_tokens(r, ignore);
  std::set<std::string> unplaced(tokens.begin(), tokens.end());
  SentencePlan plan;
  TokenSeq group;
  auto state = p.start_state();
  const std::string end(kEndToken);
  while (!unplaced.empty()) {
    const Transition* choice = nullptr;
    auto options = p.transitions(state);
    for (const auto& t : options) {
      bool admissible = unplaced.count(t.token) || (t.token == end && !group.empty());
      if (!admissible) continue;
      if (!choice || t.probability > choice->probability ||
          (t.probability == choice->probability && t.token < choice->token))
        choice = &t;
    }
    if (!choice) break;
    if (choice->token == end) {
      plan.groups.push_back(std::move(group));
      group.clear();
    } else {
      group.push_back(choice->token);
      unplaced.erase(choice->token);
    }
    state = MarkovPlanner::advance(std::move(state), choice->token);
  }
  if (!group.empty()) plan.groups.push_back(std::move(group));
  TokenSeq rest;
  for (const auto& t : tokens)
    if (unplaced.count(t)) rest.push_back(t);
  if (!rest.empty()) plan.groups.push_back(std::move(rest));
  return plan;
}

// ---------------------------------------------------------------- transducer

// Slot-type sequence of a template: placeholder properties in order, with
// consecutive repeats merged ("[team:0] and [team:1]" -> team).
inline TokenSeq template_key(std::string_view tpl) {
  TokenSeq key;
  auto parsed = tokenize_template(tpl);
  if (std::holds_alternative<PlaceholderSyntaxError>(parsed)) return key;
  for (const auto& p : placeholders_of(std::get<std::vector<TemplatePart>>(parsed)))
    if (key.empty() || key.back() != p.property) key.push_back(p.property);
  return key;
}

class SlotTransducer {
 public:
  void add(const TokenSeq& key, const std::string& tpl, std::uint64_t n = 1) {
    if (key.empty())
      fillers_[tpl] += n;
    else
      table_[key][tpl] += n;
  }

  bool contains(const TokenSeq& key) const { return table_.count(key) > 0; }

  // Highest-count template for an exact key; ties by template text.
  std::optional<std::string> best(const TokenSeq& key) const {
    auto it = table_.find(key);
    if (it == table_.end()) return std::nullopt;
    const std::string* win = nullptr;
    std::uint64_t win_n = 0;
    for (const auto& [tpl, n] : it->second)
      if (!win || n > win_n) {  // map order makes the first of equal counts the smallest
        win = &tpl;
        win_n = n;
      }
    return *win;
  }

  // Single-type clause: the learned unigram template if any, else a bare
  // "<type> <values>" clause.
  std::string fallback(const std::string& type) const {
    if (auto t = best({type})) return *t;
    if (type == kNameProperty) return "[" + type + "]";
    return type + " [" + type + ":*]";
  }

  const std::map<TokenSeq, std::map<std::string, std::uint64_t>>& table() const { return table_; }
  const std::map<std::string, std::uint64_t>& fillers() const { return fillers_; }

 private:
  std::map<TokenSeq, std::map<std::string, std::uint64_t>> table_;
  std::map<std::string, std::uint64_t> fillers_;
};

using ReferencePair = std::pair<EntityRecord, std::string>;

// Delexicalised sentences of a reference text, split at ". " with the final
// period dropped.
inline std::vector<std::string> delexicalized_sentences(const EntityRecord& r,
                                                        std::string_view reference) {
  auto delex = delexicalize(text::trim(reference), r).template_text;
  std::vector<std::string> out;
  for (auto& s : text::split(delex, ". ")) {
    auto t = std::string(text::trim(s));
    if (!t.empty() && t.back() == '.') t.pop_back();
    t = text::normalize_space(t);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

inline SlotTransducer train_transducer(const std::vector<ReferencePair>& pairs) {
  if (pairs.empty()) throw EmptyInput("no training pairs");
  SlotTransducer t;
  for (const auto& [record, reference] : pairs)
    for (const auto& s : delexicalized_sentences(record, reference)) t.add(template_key(s), s);
  return t;
}

// Planner training sequences: per text, each sentence's slot types followed by
// the end token. Sentences without slots contribute nothing.
inline std::vector<TokenSeq> planner_sequences(const std::vector<ReferencePair>& pairs) {
  std::vector<TokenSeq> out;
  for (const auto& [record, reference] : pairs) {
    TokenSeq seq;
    for (const auto& s : delexicalized_sentences(record, reference)) {
      auto key = template_key(s);
      if (key.empty()) continue;
      seq.insert(seq.end(), key.begin(), key.end());
      seq.emplace_back(kEndToken);
    }
    if (!seq.empty()) out.push_back(std::move(seq));
  }
  return out;
}

// Exact key, else the longest prefix with an entry followed by single-type
// fallback clauses for the remaining types. Clauses are joined as sentences.
inline std::string transduce(const SlotTransducer& t, const TokenSeq& group) {
  if (auto exact = t.best(group)) return *exact;
  std::vector<std::string> pieces;
  std::size_t covered = 0;
  for (std::size_t k = group.size(); k-- > 1;) {
    TokenSeq prefix(group.begin(), group.begin() + std::ptrdiff_t(k));
    if (auto hit = t.best(prefix)) {
      pieces.push_back(*hit);
      covered = k;
      break;
    }
  }
  for (std::size_t i = covered; i < group.size(); ++i) pieces.push_back(t.fallback(group[i]));
  return text::join(pieces, ". ");
}

// --------------------------------------------------------------- postprocess

// Output of postprocess together with where each input byte ended up:
// position[i] is the output index of the first kept byte at or after input i.
struct MappedText {
  std::string text;
  std::vector<std::size_t> position;  // size input+1
};

inline MappedText postprocess_mapped(std::string_view input) {
  // Work on (byte, original index) pairs; every step either drops or rewrites
  // bytes in place, which keeps the index map monotone.
  std::vector<std::pair<char, std::size_t>> cur;
  cur.reserve(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) cur.emplace_back(input[i], i);

  auto as_string = [&] {
    std::string s;
    s.reserve(cur.size());
    for (const auto& c : cur) s += c.first;
    return s;
  };

  static const std::string_view special[] = {"<unk>", "</s>", "<s>", "<end>"};
  for (bool changed = true; changed;) {
    changed = false;
    auto s = as_string();
    std::vector<bool> drop(s.size(), false);
    for (auto tok : special)
      for (auto pos = s.find(tok); pos != std::string::npos; pos = s.find(tok, pos + 1))
        for (std::size_t k = pos; k < pos + tok.size(); ++k) drop[k] = changed = true;
    if (!changed) break;
    std::vector<std::pair<char, std::size_t>> next;
    for (std::size_t k = 0; k < cur.size(); ++k)
      if (!drop[k]) next.push_back(cur[k]);
    cur.swap(next);
  }

  {
    std::vector<std::pair<char, std::size_t>> next;
    for (auto c : cur) {
      if (text::is_space(c.first)) {
        if (!next.empty() && next.back().first == ' ') continue;
        c.first = ' ';
      }
      next.push_back(c);
    }
    cur.swap(next);
  }
  {
    std::vector<std::pair<char, std::size_t>> next;
    for (std::size_t k = 0; k < cur.size(); ++k) {
      if (cur[k].first == ' ') {
        bool before_punct = k + 1 < cur.size() &&
                            (cur[k + 1].first == ')' || cur[k + 1].first == '.' ||
                             cur[k + 1].first == ',');
        bool after_paren = !next.empty() && next.back().first == '(';
        bool at_edge = next.empty() || k + 1 == cur.size();
        if (before_punct || after_paren || at_edge) continue;
      }
      next.push_back(cur[k]);
    }
    cur.swap(next);
  }
  for (auto& c : cur) {
    auto u = static_cast<unsigned char>(c.first);
    if (u >= 0x80) break;  // non-ASCII letter: nothing to upper-case
    if ((c.first >= 'a' && c.first <= 'z') || (c.first >= 'A' && c.first <= 'Z')) {
      c.first = text::ascii_upper(c.first);
      break;
    }
  }

  MappedText out;
  out.text = as_string();
  out.position.assign(input.size() + 1, cur.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i <= input.size(); ++i) {
    while (k < cur.size() && cur[k].second < i) ++k;
    out.position[i] = k;
  }
  return out;
}

// Upper-cases the first letter, tightens spacing around parentheses and
// punctuation, and strips the decoder's special tokens.
inline std::string postprocess(std::string_view text) { return postprocess_mapped(text).text; }

// ----------------------------------------------------------------- generation

struct DataDrivenOptions {
  std::set<std::string> ignore = default_meta_slots();
  std::vector<std::string> vocabulary = default_property_vocabulary();
};

inline GeneratedText generate_datadriven_text(const MarkovPlanner& planner,
                                              const SlotTransducer& transducer,
                                              const EntityRecord& r,
                                              const DataDrivenOptions& opt = {}) {
  GeneratedText out;
  out.trace.source = TextSource::TML;

  std::vector<std::string> vocabulary = opt.vocabulary;
  for (const auto& p : r.properties) vocabulary.push_back(p.name);
  for (const auto& [key, tpls] : transducer.table())
    vocabulary.insert(vocabulary.end(), key.begin(), key.end());

  for (const auto& group : plan_sentences(planner, r, opt.ignore).groups) {
    for (const auto& sentence_tpl : text::split(transduce(transducer, group), ". ")) {
      auto parsed = tokenize_template(sentence_tpl);
      if (std::holds_alternative<PlaceholderSyntaxError>(parsed)) continue;
      std::string raw;
      std::vector<RealizedSlot> slots;
      bool fillable = true;
      for (const auto& part : std::get<std::vector<TemplatePart>>(parsed)) {
        if (auto lit = std::get_if<std::string>(&part)) {
          raw += *lit;
          continue;
        }
        const auto& p = std::get<Placeholder>(part);
        if (p.property == kNameProperty) {
          slots.push_back({{p.property, 0, r.name_id}, raw.size(), r.name_id.size()});
          raw += r.name_id;
          continue;
        }
        auto values = r.find(p.property);
        if (!values || (!p.all_values && p.index >= values->size())) {
          fillable = false;
          break;
        }
        if (!p.all_values) {
          slots.push_back({{p.property, p.index, (*values)[p.index]}, raw.size(),
                           (*values)[p.index].size()});
          raw += (*values)[p.index];
          continue;
        }
        for (std::size_t i = 0; i < values->size(); ++i) {
          if (i) raw += (i + 1 == values->size()) ? " and " : ", ";
          slots.push_back({{p.property, i, (*values)[i]}, raw.size(), (*values)[i].size()});
          raw += (*values)[i];
        }
      }
      if (!fillable) continue;  // an unfilled placeholder never reaches the output
      raw += " .";
      auto mapped = postprocess_mapped(raw);
      if (mapped.text.empty() || mapped.text == ".") continue;

      std::size_t base = out.text.empty() ? 0 : out.text.size() + 1;
      std::vector<RealizedSlot> placed;
      for (auto& s : slots) {
        auto b = mapped.position[s.offset], e = mapped.position[s.offset + s.length];
        if (e > b) placed.push_back({std::move(s.occurrence), b, e - b});
      }
      auto literals = find_content_candidates(
          mapped.text, covered_mask(mapped.text.size(), placed), vocabulary,
          kReasonTemplateLiteral);
      if (!out.text.empty()) out.text += ' ';
      out.text += mapped.text;
      for (auto& s : placed) {
        s.offset += base;
        out.trace.realized.push_back(std::move(s));
      }
      for (auto& h : literals) {
        h.offset += base;
        out.trace.hallucinated_spans.push_back(std::move(h));
      }
    }
  }
  return out;
}

// ------------------------------------------------------------- model storage

// Model directory layout:
//   planner.tsv     "#order<TAB>n" then count<TAB>next<TAB>state_1..state_n
//   transducer.tsv  count<TAB>template<TAB>type_1..type_k (k = 0: slot-free filler)
inline void save_model(const std::filesystem::path& dir, const MarkovPlanner& planner,
                       const SlotTransducer& transducer) {
  std::filesystem::create_directories(dir);
  std::ofstream p(dir / "planner.tsv");
  p << "#order\t" << planner.order() << '\n';
  for (const auto& [state, nexts] : planner.counts())
    for (const auto& [tok, n] : nexts) {
      p << n << '\t' << tok;
      for (const auto& s : state) p << '\t' << s;
      p << '\n';
    }
  std::ofstream t(dir / "transducer.tsv");
  for (const auto& [key, tpls] : transducer.table())
    for (const auto& [tpl, n] : tpls) {
      t << n << '\t' << tpl;
      for (const auto& k : key) t << '\t' << k;
      t << '\n';
    }
  for (const auto& [tpl, n] : transducer.fillers()) t << n << '\t' << tpl << '\n';
  if (!p || !t) throw Error("IoError", "cannot write model to " + dir.string());
}

struct Model {
  MarkovPlanner planner;
  SlotTransducer transducer;
};

inline Model load_model(const std::filesystem::path& dir) {
  auto count_of = [&](const std::string& s, const std::string& file, std::size_t line) {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }))
      throw Error("MalformedModel", file + ":" + std::to_string(line) + ": bad count '" + s + "'");
    return std::stoull(s);
  };
  std::ifstream p(dir / "planner.tsv");
  std::ifstream t(dir / "transducer.tsv");
  if (!p || !t) throw Error("IoError", "missing model files in " + dir.string());
  std::string line;
  if (!std::getline(p, line) || line.rfind("#order\t", 0) != 0)
    throw Error("MalformedModel", "planner.tsv lacks the #order header");
  Model m{MarkovPlanner(std::stoul(line.substr(7))), {}};
  for (std::size_t ln = 2; std::getline(p, line); ++ln) {
    if (line.empty()) continue;
    auto cols = text::split(line, "\t");
    if (cols.size() != 2 + m.planner.order())
      throw Error("MalformedModel", "planner.tsv:" + std::to_string(ln) + ": wrong column count");
    TokenSeq state(cols.begin() + 2, cols.end());
    m.planner.add_count(state, cols[1], count_of(cols[0], "planner.tsv", ln));
  }
  for (std::size_t ln = 1; std::getline(t, line); ++ln) {
    if (line.empty()) continue;
    auto cols = text::split(line, "\t");
    if (cols.size() < 2)
      throw Error("MalformedModel", "transducer.tsv:" + std::to_string(ln) + ": too few columns");
    TokenSeq key(cols.begin() + 2, cols.end());
    m.transducer.add(key, cols[1], count_of(cols[0], "transducer.tsv", ln));
  }
  return m;
}

}  // namespace kg2t
