#pragma once

// Grammar matches from a LanguageTool-compatible HTTP checker, their mapping
// onto nine error categories, and before/after-review tallies.

#include <httplib.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "kg2t/common.hpp"
#include "kg2t/csv.hpp"
#include "kg2t/kg_model.hpp"

namespace kg2t {

struct GrammarMatch {
  std::string text_id;
  std::size_t offset = 0;
  std::size_t length = 0;
  std::string rule_id;
  std::string message;
  std::optional<std::string> suggested;
};

enum class GrammarErrorCategory {
  PropOrthography,
  Denonym,
  UnnecessarySpace,
  WrongSlotValue,
  Agreement,
  Typo,
  URLInfo,
  Repetition,
  MissingWordAfter,
};

inline constexpr std::array<GrammarErrorCategory, 9> kAllGrammarCategories = {
    GrammarErrorCategory::PropOrthography, GrammarErrorCategory::Denonym,
    GrammarErrorCategory::UnnecessarySpace, GrammarErrorCategory::WrongSlotValue,
    GrammarErrorCategory::Agreement,       GrammarErrorCategory::Typo,
    GrammarErrorCategory::URLInfo,         GrammarErrorCategory::Repetition,
    GrammarErrorCategory::MissingWordAfter};

inline std::string_view to_string(GrammarErrorCategory c) {
  switch (c) {
    case GrammarErrorCategory::PropOrthography: return "PropOrthography";
    case GrammarErrorCategory::Denonym: return "Denonym";
    case GrammarErrorCategory::UnnecessarySpace: return "UnnecessarySpace";
    case GrammarErrorCategory::WrongSlotValue: return "WrongSlotValue";
    case GrammarErrorCategory::Agreement: return "Agreement";
    case GrammarErrorCategory::Typo: return "Typo";
    case GrammarErrorCategory::URLInfo: return "URLInfo";
    case GrammarErrorCategory::Repetition: return "Repetition";
    case GrammarErrorCategory::MissingWordAfter: return "MissingWordAfter";
  }
  return "?";
}

inline std::optional<GrammarErrorCategory> parse_grammar_category(std::string_view s) {
  for (auto c : kAllGrammarCategories)
    if (to_string(c) == s) return c;
  return std::nullopt;
}

struct VerifiedError {
  GrammarMatch match;
  GrammarErrorCategory category = GrammarErrorCategory::Typo;
  bool verified = false;
  TextSource source = TextSource::TH;
};

// Source encoded as the text id prefix (TT7, TML7, TH7).
inline std::optional<TextSource> source_from_text_id(std::string_view id) {
  if (id.rfind("TML", 0) == 0) return TextSource::TML;
  if (id.rfind("TT", 0) == 0) return TextSource::TT;
  if (id.rfind("TH", 0) == 0) return TextSource::TH;
  return std::nullopt;
}

// ------------------------------------------------------------------- client

struct Endpoint {
  std::string scheme_host_port;  // "http://host:port"
  std::string path;              // "/v2/check"
};

inline Endpoint parse_endpoint(std::string_view url) {
  auto scheme = url.find("://");
  if (scheme == std::string_view::npos || url.substr(0, scheme) != "http")
    throw ServiceUnavailable("unsupported endpoint '" + std::string(url) + "' (need http://)");
  auto slash = url.find('/', scheme + 3);
  Endpoint e;
  e.scheme_host_port = std::string(url.substr(0, slash));
  e.path = slash == std::string_view::npos ? "/v2/check" : std::string(url.substr(slash));
  return e;
}

// Parses a checker response body: {"matches":[{offset,length,rule:{id},message,replacements}]}.
inline std::vector<GrammarMatch> parse_check_response(std::string_view body, std::string_view text,
                                                      const std::string& text_id = {}) {
  std::vector<GrammarMatch> out;
  try {
    auto j = nlohmann::json::parse(body);
    if (!j.is_object() || !j.contains("matches") || !j["matches"].is_array())
      throw MalformedResponse("response has no matches array");
    for (const auto& m : j["matches"]) {
      GrammarMatch g;
      g.text_id = text_id;
      g.offset = m.at("offset").get<std::size_t>();
      g.length = m.at("length").get<std::size_t>();
      g.rule_id = m.at("rule").at("id").get<std::string>();
      g.message = m.value("message", "");
      if (m.contains("replacements") && m["replacements"].is_array() &&
          !m["replacements"].empty())
        g.suggested = m["replacements"][0].at("value").get<std::string>();
      if (g.offset + g.length > text.size())
        throw MalformedResponse("match span " + std::to_string(g.offset) + "+" +
                                std::to_string(g.length) + " exceeds the text");
      out.push_back(std::move(g));
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedResponse(e.what());
  }
  return out;
}

inline std::vector<GrammarMatch> check_text(const std::string& text, const std::string& endpoint,
                                            const std::string& text_id = {},
                                            std::chrono::seconds timeout = std::chrono::seconds(30)) {
  if (text.empty()) return {};
  auto ep = parse_endpoint(endpoint);
  httplib::Client cli(ep.scheme_host_port);
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  httplib::Params form{{"text", text}, {"language", "en-US"}};
  auto res = cli.Post(ep.path, form);
  if (!res)
    throw ServiceUnavailable("cannot reach " + endpoint + " (" + httplib::to_string(res.error()) +
                             "); retry once the checker is running");
  if (res->status >= 500 || res->status == 429)
    throw ServiceUnavailable("checker answered HTTP " + std::to_string(res->status) +
                             "; retry later");
  if (res->status != 200)
    throw MalformedResponse("checker answered HTTP " + std::to_string(res->status));
  return parse_check_response(res->body, text, text_id);
}

// Checks many texts with at most `max_in_flight` concurrent requests. Any
// failure aborts the whole batch.
inline std::vector<std::vector<GrammarMatch>> check_texts(
    const std::vector<std::pair<std::string, std::string>>& id_and_text,
    const std::string& endpoint, std::size_t max_in_flight = 4) {
  std::vector<std::vector<GrammarMatch>> out(id_and_text.size());
  std::vector<std::exception_ptr> errors(id_and_text.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < id_and_text.size();) {
      try {
        out[i] = check_text(id_and_text[i].second, endpoint, id_and_text[i].first);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t k = 0; k < std::max<std::size_t>(1, std::min(max_in_flight, id_and_text.size()));
       ++k)
    pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// ----------------------------------------------------------- classification

// One step of the classification cascade. Every condition that is set must
// hold; regexes are ECMAScript, case-insensitive, searched (not anchored).
//   rule_id / message   checker rule id and message
//   match               the flagged text
//   sentence            the sentence containing the match
//   after               the text following the match
//   adjacent_repeat     the sentence repeats a 1-4 word phrase back to back
//   case_only_fix       the suggestion differs from the match only in case
struct ClassificationRule {
  GrammarErrorCategory category;
  std::optional<std::string> rule_id, message, match, sentence, after;
  bool adjacent_repeat = false;
  bool case_only_fix = false;
};

inline constexpr std::string_view kDefaultClassificationRules = R"([
  {"category": "URLInfo", "sentence": "\\bfile\\s*:|\\.(jpe?g|png|gif|svg|tiff?)\\b|https?://|www\\."},
  {"category": "WrongSlotValue", "rule_id": "WRONG_SLOT_VALUE"},
  {"category": "WrongSlotValue", "sentence": "\\(\\s*n(e|é)e\\s"},
  {"category": "Repetition", "rule_id": "REPEAT|DUPLICATION"},
  {"category": "Repetition", "message": "repeated a (word|phrase)|repetition|twice"},
  {"category": "Repetition", "adjacent_repeat": true},
  {"category": "Denonym", "rule_id": "A_VS_AN", "after": "^\\s+([A-Z][\\w.]*\\s+)*[A-Z][\\w.]*\\s+[a-z]"},
  {"category": "Agreement", "rule_id": "A_VS_AN|AGREEMENT"},
  {"category": "Agreement", "message": "\\barticle\\b"},
  {"category": "UnnecessarySpace", "rule_id": "WHITESPACE|SPACE"},
  {"category": "UnnecessarySpace", "message": "\\bspaces?\\b|whitespace"},
  {"category": "MissingWordAfter", "rule_id": "MISSING"},
  {"category": "MissingWordAfter", "message": "missing|omitted|incomplete"},
  {"category": "PropOrthography", "rule_id": "UPPERCASE|CASING|PROPER_NOUN"},
  {"category": "PropOrthography", "rule_id": "MORFOLOGIK|SPELL", "case_only_fix": true},
  {"category": "Typo", "rule_id": "MORFOLOGIK|SPELL|TYPO"}
])";

inline std::vector<ClassificationRule> parse_classification_rules(std::string_view json_text) {
  std::vector<ClassificationRule> rules;
  try {
    auto j = nlohmann::json::parse(json_text);
    for (const auto& r : j) {
      auto cat = parse_grammar_category(r.at("category").get<std::string>());
      if (!cat) throw Error("BadRules", "unknown category " + r.at("category").dump());
      ClassificationRule rule{*cat, {}, {}, {}, {}, {}, false, false};
      auto opt = [&](const char* key, std::optional<std::string>& field) {
        if (r.contains(key)) {
          field = r[key].get<std::string>();
          std::regex probe(*field, std::regex::ECMAScript | std::regex::icase);  // validate
        }
      };
      opt("rule_id", rule.rule_id);
      opt("message", rule.message);
      opt("match", rule.match);
      opt("sentence", rule.sentence);
      opt("after", rule.after);
      rule.adjacent_repeat = r.value("adjacent_repeat", false);
      rule.case_only_fix = r.value("case_only_fix", false);
      rules.push_back(std::move(rule));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("BadRules", e.what());
  } catch (const std::regex_error& e) {
    throw Error("BadRules", std::string("bad regex: ") + e.what());
  }
  return rules;
}

inline const std::vector<ClassificationRule>& default_classification_rules() {
  static const auto rules = parse_classification_rules(kDefaultClassificationRules);
  return rules;
}

namespace detail {

inline bool search(const std::optional<std::string>& pattern, const std::string& subject,
                   bool case_insensitive = true) {
  if (!pattern) return true;
  auto flags = std::regex::ECMAScript;
  if (case_insensitive) flags |= std::regex::icase;
  return std::regex_search(subject, std::regex(*pattern, flags));
}

inline std::string sentence_around(std::string_view text, std::size_t offset, std::size_t length) {
  offset = std::min(offset, text.size());
  auto start = text.rfind(". ", offset == 0 ? 0 : offset - 1);
  start = (start == std::string_view::npos || start >= offset) ? 0 : start + 2;
  auto end = text.find(". ", offset + length);
  end = end == std::string_view::npos ? text.size() : end + 1;
  return std::string(text.substr(start, end - start));
}

inline bool has_adjacent_repeat(const std::string& s) {
  std::vector<std::string> words;
  std::string w;
  for (char c : s) {
    if (text::is_word_byte(static_cast<unsigned char>(c)) || c == '\'') {
      w += text::ascii_lower(c);
    } else if (!w.empty()) {
      words.push_back(std::move(w));
      w.clear();
    }
  }
  if (!w.empty()) words.push_back(std::move(w));
  for (std::size_t len = 1; len <= 4; ++len)
    for (std::size_t i = 0; i + 2 * len <= words.size(); ++i)
      if (std::equal(words.begin() + std::ptrdiff_t(i), words.begin() + std::ptrdiff_t(i + len),
                     words.begin() + std::ptrdiff_t(i + len)))
        return true;
  return false;
}

}  // namespace detail

struct Classification {
  GrammarErrorCategory category;
  bool classified;  // false: no rule fired, defaulted to Typo
};

inline Classification classify_match(const GrammarMatch& m, std::string_view context,
                                     const std::vector<ClassificationRule>& rules =
                                         default_classification_rules()) {
  auto off = std::min(m.offset, context.size());
  auto len = std::min(m.length, context.size() - off);
  const std::string flagged(context.substr(off, len));
  const std::string sentence = detail::sentence_around(context, off, len);
  const std::string after(context.substr(off + len));
  for (const auto& r : rules) {
    if (!detail::search(r.rule_id, m.rule_id) || !detail::search(r.message, m.message) ||
        !detail::search(r.match, flagged) || !detail::search(r.sentence, sentence) ||
        !detail::search(r.after, after, false))
      continue;
    if (r.adjacent_repeat && !detail::has_adjacent_repeat(sentence)) continue;
    if (r.case_only_fix &&
        !(m.suggested && *m.suggested != flagged && text::iequals(*m.suggested, flagged)))
      continue;
    return {r.category, true};
  }
  return {GrammarErrorCategory::Typo, false};
}

// ------------------------------------------------------------------ tallies

struct CategoryTally {
  std::size_t before = 0;
  std::size_t after = 0;
};

using GrammarTally = std::map<TextSource, std::map<GrammarErrorCategory, CategoryTally>>;

// Every source and category appears, zero rows included.
inline GrammarTally tally_errors(const std::vector<VerifiedError>& errors) {
  GrammarTally t;
  for (auto s : kAllSources)
    for (auto c : kAllGrammarCategories) t[s][c] = {};
  for (const auto& e : errors) {
    auto& cell = t[e.source][e.category];
    ++cell.before;
    if (e.verified) ++cell.after;
  }
  return t;
}

// ---------------------------------------------------------- review CSV

inline const std::vector<std::string>& verification_columns() {
  static const std::vector<std::string> cols = {"text_id",  "offset",   "length",
                                                "rule_id",  "category", "verified"};
  return cols;
}

inline void write_verification_csv(std::ostream& os, const std::vector<VerifiedError>& errors) {
  csv::write_row(os, verification_columns());
  for (const auto& e : errors)
    csv::write_row(os, {e.match.text_id, std::to_string(e.match.offset),
                        std::to_string(e.match.length), e.match.rule_id,
                        std::string(to_string(e.category)), e.verified ? "true" : "false"});
}

inline bool parse_bool_field(const std::string& s) {
  auto v = text::to_lower(text::trim(s));
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no" || v.empty()) return false;
  throw MalformedCsv("not a boolean: '" + s + "'");
}

// Sources come from `source_of` when given, else from the text id prefix.
inline std::vector<VerifiedError> read_verification_csv(
    std::istream& is, const std::map<std::string, TextSource>& source_of = {}) {
  csv::Table t(csv::read(is), verification_columns());
  std::vector<VerifiedError> out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    VerifiedError e;
    e.match.text_id = t.at(i, "text_id");
    try {
      e.match.offset = std::stoul(t.at(i, "offset"));
      e.match.length = std::stoul(t.at(i, "length"));
    } catch (const std::exception&) {
      throw MalformedCsv("verification row " + std::to_string(i + 2) + ": bad span");
    }
    e.match.rule_id = t.at(i, "rule_id");
    auto cat = parse_grammar_category(t.at(i, "category"));
    if (!cat) throw MalformedCsv("verification row " + std::to_string(i + 2) + ": bad category");
    e.category = *cat;
    e.verified = parse_bool_field(t.at(i, "verified"));
    if (auto it = source_of.find(e.match.text_id); it != source_of.end())
      e.source = it->second;
    else if (auto s = source_from_text_id(e.match.text_id))
      e.source = *s;
    else
      throw MalformedCsv("cannot tell the source of text '" + e.match.text_id + "'");
    out.push_back(std::move(e));
  }
  return out;
}

// Candidates for review: classified matches default to verified, the rest
// to unverified.
inline std::vector<VerifiedError> review_candidates(const std::vector<GrammarMatch>& matches,
                                                    std::string_view text, TextSource source,
                                                    const std::vector<ClassificationRule>& rules =
                                                        default_classification_rules()) {
  std::vector<VerifiedError> out;
  for (const auto& m : matches) {
    auto c = classify_match(m, text, rules);
    out.push_back({m, c.category, c.classified, source});
  }
  return out;
}

}  // namespace kg2t
