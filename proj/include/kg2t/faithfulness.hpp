#pragma once

// Dropped, hallucinated and repeated slots per text, and the four-way
// slot-error category.

#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "kg2t/common.hpp"
#include "kg2t/csv.hpp"
#include "kg2t/kg_model.hpp"
#include "kg2t/trace.hpp"

namespace kg2t {

enum class SlotErrorCategory {
  NoHallNoDrop = 1,  // category 1
  HallDrop = 2,      // category 2
  NoHallDrop = 3,    // category 3
  HallNoDrop = 4,    // category 4
};

inline int category_number(SlotErrorCategory c) { return static_cast<int>(c); }

inline std::string_view to_string(SlotErrorCategory c) {
  switch (c) {
    case SlotErrorCategory::NoHallNoDrop: return "Cat1";
    case SlotErrorCategory::HallDrop: return "Cat2";
    case SlotErrorCategory::NoHallDrop: return "Cat3";
    case SlotErrorCategory::HallNoDrop: return "Cat4";
  }
  return "?";
}

inline std::optional<SlotErrorCategory> parse_category(std::string_view s) {
  if (s == "1" || s == "Cat1") return SlotErrorCategory::NoHallNoDrop;
  if (s == "2" || s == "Cat2") return SlotErrorCategory::HallDrop;
  if (s == "3" || s == "Cat3") return SlotErrorCategory::NoHallDrop;
  if (s == "4" || s == "Cat4") return SlotErrorCategory::HallNoDrop;
  return std::nullopt;
}

struct SlotErrorReport {
  std::size_t dropped = 0;
  std::size_t hallucinated = 0;
  std::size_t repeated = 0;
  SlotErrorCategory category = SlotErrorCategory::NoHallNoDrop;
};

inline SlotErrorCategory categorize_slot_errors(const SlotErrorReport& r) {
  bool hall = r.hallucinated > 0, drop = r.dropped > 0;
  if (hall) return drop ? SlotErrorCategory::HallDrop : SlotErrorCategory::HallNoDrop;
  return drop ? SlotErrorCategory::NoHallDrop : SlotErrorCategory::NoHallNoDrop;
}

inline const std::set<std::string>& default_ignore_list() {
  static const std::set<std::string> ignore = {"instance of", "sex or gender"};
  return ignore;
}

// With an internal trace (our generators), keeps only realized entries whose
// span lies inside the text and reads the recorded value; hallucination spans
// outside the text are dropped. Without one, rebuilds the trace from exact
// value matches and marks unexplained entity-like content as unconfirmed
// hallucination candidates.
inline RealizationTrace trace_realization(
    const EntityRecord& r, std::string_view text, const std::optional<RealizationTrace>& internal,
    TextSource source = TextSource::TH,
    const std::vector<std::string>& vocabulary = default_property_vocabulary()) {
  if (internal) {
    RealizationTrace t;
    t.source = internal->source;
    for (const auto& s : internal->realized) {
      if (s.offset + s.length > text.size()) continue;
      if (text.substr(s.offset, s.length) != s.occurrence.value &&
          !text::iequals(text.substr(s.offset, s.length), s.occurrence.value))
        continue;
      t.realized.push_back(s);
    }
    for (const auto& h : internal->hallucinated_spans)
      if (h.offset + h.length <= text.size()) t.hallucinated_spans.push_back(h);
    return t;
  }
  RealizationTrace t;
  t.source = source;
  for (auto& m : match_slot_values(text, r))
    t.realized.push_back({std::move(m.occurrence), m.offset, m.length});
  std::vector<std::string> vocab = vocabulary;
  for (const auto& p : r.properties) vocab.push_back(p.name);
  t.hallucinated_spans =
      find_content_candidates(text, covered_mask(text.size(), t.realized), vocab);
  return t;
}

// Replaces detector candidates with the annotator's hallucinated phrases
// (each located at its first unclaimed occurrence; confirmed).
inline RealizationTrace apply_hallucination_annotation(RealizationTrace t, std::string_view text,
                                                       const std::vector<std::string>& phrases) {
  t.hallucinated_spans.clear();
  std::vector<bool> claimed(text.size(), false);
  for (const auto& phrase : phrases) {
    if (phrase.empty()) continue;
    std::size_t pos = text.find(phrase);
    while (pos != std::string_view::npos && claimed[pos]) pos = text.find(phrase, pos + 1);
    if (pos == std::string_view::npos)
      throw Error("BadAnnotation", "annotated phrase '" + phrase + "' not found in text");
    for (std::size_t i = pos; i < pos + phrase.size(); ++i) claimed[i] = true;
    t.hallucinated_spans.push_back({pos, phrase.size(), std::string(kReasonAnnotated), true});
  }
  return t;
}

struct CountOptions {
  std::set<std::string> ignore = default_ignore_list();
  // Count only hallucination spans confirmed by review.
  bool confirmed_only = false;
};

// dropped = countable occurrences (record slots minus ignored properties)
// not realized; repeated = realizations of a countable occurrence beyond its
// first; hallucinated = hallucination spans.
inline SlotErrorReport count_slot_errors(const RealizationTrace& trace, const EntityRecord& r,
                                         const CountOptions& opt = {}) {
  std::set<std::pair<std::string, std::size_t>> countable;
  for (const auto& o : slot_occurrences(r))
    if (!opt.ignore.count(o.property)) countable.insert({o.property, o.index});
  std::map<std::pair<std::string, std::size_t>, std::size_t> seen;
  for (const auto& s : trace.realized) {
    std::pair<std::string, std::size_t> key{s.occurrence.property, s.occurrence.index};
    if (countable.count(key)) ++seen[key];
  }
  SlotErrorReport rep;
  rep.dropped = countable.size() - seen.size();
  for (const auto& [key, n] : seen) rep.repeated += n - 1;
  for (const auto& h : trace.hallucinated_spans)
    if (!opt.confirmed_only || h.confirmed) ++rep.hallucinated;
  rep.category = categorize_slot_errors(rep);
  return rep;
}

struct FaithfulnessRow {
  std::string text_id;
  TextSource source = TextSource::TH;
  SlotErrorReport report;
};

inline const std::vector<std::string>& faithfulness_columns() {
  static const std::vector<std::string> cols = {"text_id",      "source",   "dropped",
                                                "hallucinated", "repeated", "category"};
  return cols;
}

inline void write_faithfulness_csv(std::ostream& os, const std::vector<FaithfulnessRow>& rows) {
  csv::write_row(os, faithfulness_columns());
  for (const auto& r : rows)
    csv::write_row(os, {r.text_id, std::string(to_string(r.source)),
                        std::to_string(r.report.dropped), std::to_string(r.report.hallucinated),
                        std::to_string(r.report.repeated),
                        std::to_string(category_number(r.report.category))});
}

inline std::vector<FaithfulnessRow> read_faithfulness_csv(std::istream& is) {
  csv::Table t(csv::read(is), faithfulness_columns());
  std::vector<FaithfulnessRow> out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    FaithfulnessRow row;
    row.text_id = t.at(i, "text_id");
    auto src = parse_source(t.at(i, "source"));
    auto cat = parse_category(t.at(i, "category"));
    if (!src || !cat) throw MalformedCsv("faithfulness row " + std::to_string(i + 2));
    row.source = *src;
    try {
      row.report.dropped = std::stoul(t.at(i, "dropped"));
      row.report.hallucinated = std::stoul(t.at(i, "hallucinated"));
      row.report.repeated = std::stoul(t.at(i, "repeated"));
    } catch (const std::exception&) {
      throw MalformedCsv("faithfulness row " + std::to_string(i + 2) + ": bad count");
    }
    row.report.category = *cat;
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace kg2t
