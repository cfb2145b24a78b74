#pragma once

// What a text realizes from its record, and what it says that the record
// does not support.

#include <algorithm>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "kg2t/common.hpp"
#include "kg2t/kg_model.hpp"

namespace kg2t {

struct RealizedSlot {
  SlotOccurrence occurrence;
  std::size_t offset = 0;
  std::size_t length = 0;
};

// Reason tags carried by hallucinated spans.
inline constexpr std::string_view kReasonSlotTypeLeak = "slot-type-leak";
inline constexpr std::string_view kReasonUngrounded = "ungrounded-entity";
inline constexpr std::string_view kReasonTemplateLiteral = "template-literal";
inline constexpr std::string_view kReasonAnnotated = "annotated";

struct HallucinatedSpan {
  std::size_t offset = 0;
  std::size_t length = 0;
  std::string reason;
  // Detector output starts unconfirmed; annotated spans are confirmed.
  bool confirmed = false;
};

struct RealizationTrace {
  TextSource source = TextSource::TH;
  std::vector<RealizedSlot> realized;
  std::vector<HallucinatedSpan> hallucinated_spans;
};

struct GeneratedText {
  std::string text;
  RealizationTrace trace;
};

// Multi-word property names that read as leaked slot types when they show up
// verbatim in prose. Single-word names ("sport", "child") are ordinary words
// and are not scanned for.
inline const std::vector<std::string>& default_property_vocabulary() {
  static const std::vector<std::string> vocab = {
      "award received",
      "cause of death",
      "country for sport",
      "country of citizenship",
      "date of birth",
      "date of death",
      "educated at",
      "family name",
      "given name",
      "instance of",
      "languages spoken, written or signed",
      "manner of death",
      "member of political party",
      "member of sports team",
      "military branch",
      "military rank",
      "native language",
      "noble title",
      "number of children",
      "participant in",
      "place of birth",
      "place of burial",
      "place of death",
      "position held",
      "position played on team / speciality",
      "record label",
      "religion or worldview",
      "sex or gender",
      "work location",
  };
  return vocab;
}

namespace detail {

inline bool is_exempt_word(std::string_view w, bool sentence_initial) {
  static const std::set<std::string, std::less<>> pronouns = {
      "He", "She", "They", "His", "Her", "Their", "Him", "Them", "It", "Its", "I"};
  static const std::set<std::string, std::less<>> function_words = {
      "A",     "After", "Also",  "An",     "And",   "As",     "At",      "Before", "Born",
      "But",   "By",    "During", "For",   "From",  "However", "In",     "Of",     "On",
      "Since", "That",  "The",   "There",  "These", "This",   "Those",   "Until",  "When",
      "While", "With",  "Although"};
  if (pronouns.count(w)) return true;
  return sentence_initial && function_words.count(w);
}

inline bool is_sentence_start(std::string_view text, std::size_t pos) {
  std::size_t i = pos;
  while (i > 0 && text::is_space(text[i - 1])) --i;
  return i == 0 || text[i - 1] == '.' || text[i - 1] == '!' || text[i - 1] == '?';
}

}  // namespace detail

// Flags content that no slot value accounts for: verbatim property names
// (one-word names only when they label a slot value), and runs of capitalised or numeric words (named entities, dates,
// scores). `covered[i]` marks bytes already accounted for. Spans come back in
// surface order, unconfirmed.
inline std::vector<HallucinatedSpan> find_content_candidates(
    std::string_view text, std::vector<bool> covered,
    const std::vector<std::string>& vocabulary, std::string_view entity_reason = kReasonUngrounded) {
  covered.resize(text.size(), false);
  std::vector<HallucinatedSpan> out;
  const auto* u = reinterpret_cast<const unsigned char*>(text.data());

  auto free_range = [&](std::size_t pos, std::size_t len) {
    return std::none_of(covered.begin() + std::ptrdiff_t(pos),
                        covered.begin() + std::ptrdiff_t(pos + len), [](bool b) { return b; });
  };

  std::vector<std::string> leaks(vocabulary.begin(), vocabulary.end());
  std::sort(leaks.begin(), leaks.end(),
            [](const auto& a, const auto& b) { return a.size() > b.size(); });
  std::string lower = text::to_lower(text);
  for (const auto& name : leaks) {
    auto needle = text::to_lower(name);
    for (auto pos = lower.find(needle); pos != std::string::npos; pos = lower.find(needle, pos + 1)) {
      bool left = pos == 0 || !text::is_word_byte(u[pos - 1]);
      bool right = pos + needle.size() == text.size() || !text::is_word_byte(u[pos + needle.size()]);
      if (!left || !right || !free_range(pos, needle.size())) continue;
      // A one-word name ("sport") is ordinary English unless it labels a
      // slot value directly, as in "Sport Badminton".
      bool single = needle.find_first_of(" /") == std::string::npos;
      std::size_t after = pos + needle.size() + 1;
      if (single && !(after < text.size() && text[after - 1] == ' ' && covered[after])) continue;
      out.push_back({pos, needle.size(), std::string(kReasonSlotTypeLeak), false});
      std::fill(covered.begin() + std::ptrdiff_t(pos),
                covered.begin() + std::ptrdiff_t(pos + needle.size()), true);
    }
  }

  // Word tokens: runs of word bytes, keeping inner '.' and '\'' ("F.C.", "O'Neil").
  struct Word {
    std::size_t begin, end;
    bool flagged;
  };
  std::vector<Word> words;
  for (std::size_t i = 0; i < text.size();) {
    if (!text::is_word_byte(u[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() &&
           (text::is_word_byte(u[j]) ||
            ((text[j] == '.' || text[j] == '\'') && j + 1 < text.size() &&
             text::is_word_byte(u[j + 1]))))
      ++j;
    std::string_view w = text.substr(i, j - i);
    char c = w.front();
    bool capital = (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
    bool flagged = capital && free_range(i, j - i) &&
                   !detail::is_exempt_word(w, detail::is_sentence_start(text, i));
    words.push_back({i, j, flagged});
    i = j;
  }
  for (std::size_t k = 0; k < words.size();) {
    if (!words[k].flagged) {
      ++k;
      continue;
    }
    std::size_t begin = words[k].begin, end = words[k].end;
    std::size_t m = k + 1;
    while (m < words.size() && words[m].flagged) {
      auto gap = text.substr(end, words[m].begin - end);
      bool joinable = std::all_of(gap.begin(), gap.end(),
                                  [](char g) { return g == ' ' || g == '-'; });
      if (!joinable) break;
      end = words[m].end;
      ++m;
    }
    out.push_back({begin, end - begin, std::string(entity_reason), false});
    k = m;
  }
  std::sort(out.begin(), out.end(),
            [](const HallucinatedSpan& a, const HallucinatedSpan& b) { return a.offset < b.offset; });
  return out;
}

inline std::vector<bool> covered_mask(std::size_t size, const std::vector<RealizedSlot>& realized) {
  std::vector<bool> covered(size, false);
  for (const auto& r : realized)
    for (std::size_t i = r.offset; i < r.offset + r.length && i < size; ++i) covered[i] = true;
  return covered;
}

inline Json trace_to_json(const RealizationTrace& t) {
  Json realized = Json::array();
  for (const auto& r : t.realized)
    realized.push_back({{"property", r.occurrence.property},
                        {"index", r.occurrence.index},
                        {"value", r.occurrence.value},
                        {"offset", r.offset},
                        {"length", r.length}});
  Json spans = Json::array();
  for (const auto& h : t.hallucinated_spans)
    spans.push_back({{"offset", h.offset},
                     {"length", h.length},
                     {"reason", h.reason},
                     {"confirmed", h.confirmed}});
  return {{"source", std::string(to_string(t.source))},
          {"realized", std::move(realized)},
          {"hallucinated", std::move(spans)}};
}

inline RealizationTrace trace_from_json(const Json& j) {
  RealizationTrace t;
  try {
    auto src = parse_source(j.at("source").get<std::string>());
    if (!src) throw Error("MalformedTrace", "unknown source");
    t.source = *src;
    for (const auto& r : j.at("realized"))
      t.realized.push_back({{r.at("property").get<std::string>(), r.at("index").get<std::size_t>(),
                             r.at("value").get<std::string>()},
                            r.at("offset").get<std::size_t>(),
                            r.at("length").get<std::size_t>()});
    for (const auto& h : j.at("hallucinated"))
      t.hallucinated_spans.push_back({h.at("offset").get<std::size_t>(),
                                      h.at("length").get<std::size_t>(),
                                      h.at("reason").get<std::string>(),
                                      h.value("confirmed", false)});
  } catch (const Json::exception& e) {
    throw Error("MalformedTrace", e.what());
  }
  return t;
}

}  // namespace kg2t
