#pragma once

// Generated or authored texts, one JSON object per line:
//   {"text_id","source","name_id","text", "trace"?, "annotation"?}
// `annotation` lists hallucinated phrases confirmed by a human reviewer.

#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "kg2t/faithfulness.hpp"
#include "kg2t/kg_model.hpp"
#include "kg2t/trace.hpp"

namespace kg2t {

struct GenEntry {
  std::string text_id;
  TextSource source = TextSource::TH;
  std::string name_id;
  std::string text;
  std::optional<RealizationTrace> trace;
  std::optional<std::vector<std::string>> annotation;
};

inline Json gen_entry_to_json(const GenEntry& e) {
  Json j = {{"text_id", e.text_id},
            {"source", std::string(to_string(e.source))},
            {"name_id", e.name_id},
            {"text", e.text}};
  if (e.trace) j["trace"] = trace_to_json(*e.trace);
  if (e.annotation) j["annotation"] = *e.annotation;
  return j;
}

inline std::vector<GenEntry> read_gen_entries(std::istream& in) {
  std::vector<GenEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    auto where = "line " + std::to_string(lineno);
    try {
      auto j = Json::parse(line);
      GenEntry e;
      e.text_id = j.at("text_id").get<std::string>();
      auto src = parse_source(j.at("source").get<std::string>());
      if (!src) throw Error("MalformedGenFile", where + ": unknown source");
      e.source = *src;
      e.name_id = j.at("name_id").get<std::string>();
      e.text = j.at("text").get<std::string>();
      if (j.contains("trace")) e.trace = trace_from_json(j["trace"]);
      if (j.contains("annotation")) e.annotation = j["annotation"].get<std::vector<std::string>>();
      out.push_back(std::move(e));
    } catch (const Json::exception& ex) {
      throw Error("MalformedGenFile", where + ": " + ex.what());
    }
  }
  return out;
}

inline std::vector<GenEntry> read_gen_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("IoError", "cannot open " + p.string());
  return read_gen_entries(in);
}

inline void write_gen_entries(std::ostream& os, const std::vector<GenEntry>& es) {
  for (const auto& e : es) os << gen_entry_to_json(e).dump() << '\n';
}

// Annotated entries count only the reviewer's phrases; other entries use the
// internal trace when present, else text-only reconstruction.
inline std::vector<FaithfulnessRow> score_faithfulness(const std::vector<GenEntry>& entries,
                                                       const std::vector<EntityRecord>& records,
                                                       const CountOptions& opt = {}) {
  std::map<std::string, const EntityRecord*> by_name;
  for (const auto& r : records) by_name[r.name_id] = &r;
  std::vector<FaithfulnessRow> rows;
  for (const auto& e : entries) {
    auto it = by_name.find(e.name_id);
    if (it == by_name.end())
      throw JoinMismatch("text " + e.text_id + " refers to unknown record " + e.name_id);
    auto t = trace_realization(*it->second, e.text, e.trace, e.source);
    t.source = e.source;
    if (e.annotation) t = apply_hallucination_annotation(std::move(t), e.text, *e.annotation);
    rows.push_back({e.text_id, e.source, count_slot_errors(t, *it->second, opt)});
  }
  return rows;
}

}  // namespace kg2t
