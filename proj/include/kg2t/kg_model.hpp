#pragma once

// Person records in the line-oriented knowledge-base format:
//   {"Name_ID": "...", "<property>": [{"mainsnak": "<value>"}, ...], ...}

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <json.hpp>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kg2t/common.hpp"
#include "kg2t/placeholder.hpp"

namespace kg2t {

using Json = nlohmann::ordered_json;

struct Property {
  std::string name;
  std::vector<std::string> values;

  bool operator==(const Property&) const = default;
};

struct EntityRecord {
  std::string name_id;
  std::vector<Property> properties;  // input order

  bool operator==(const EntityRecord&) const = default;

  const std::vector<std::string>* find(std::string_view property) const {
    for (const auto& p : properties)
      if (p.name == property) return &p.values;
    return nullptr;
  }
  bool has(std::string_view property) const { return find(property) != nullptr; }
};

struct SlotOccurrence {
  std::string property;
  std::size_t index = 0;
  std::string value;

  bool operator==(const SlotOccurrence&) const = default;
  auto key() const { return std::pair<const std::string&, std::size_t>(property, index); }
};

struct DatasetSplit {
  std::vector<EntityRecord> train, validation, test;
  std::uint64_t seed = 0;
};

namespace detail {

// Byte offset of `"key"` inside the raw line, used to locate structural
// errors that the JSON parser itself does not report.
inline std::size_t key_offset(std::string_view line, const std::string& key) {
  auto quoted = nlohmann::json(key).dump();
  auto pos = line.find(quoted);
  return pos == std::string_view::npos ? 0 : pos;
}

}  // namespace detail

inline EntityRecord record_from_json(const Json& obj, std::string_view raw) {
  if (!obj.is_object()) throw MalformedRecord("record is not a JSON object", 0);
  EntityRecord r;
  auto name = obj.find(std::string(kNameProperty));
  if (name == obj.end()) throw MalformedRecord("missing Name_ID", 0);
  if (!name->is_string() || name->get_ref<const std::string&>().empty())
    throw MalformedRecord("Name_ID must be a non-empty string",
                          detail::key_offset(raw, std::string(kNameProperty)));
  r.name_id = name->get<std::string>();
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (it.key() == kNameProperty) continue;
    auto where = detail::key_offset(raw, it.key());
    if (!it->is_array()) throw MalformedRecord("property '" + it.key() + "' is not an array", where);
    if (it->empty()) throw MalformedRecord("property '" + it.key() + "' has no values", where);
    Property p{it.key(), {}};
    for (const auto& entry : *it) {
      if (!entry.is_object())
        throw MalformedRecord("value of '" + it.key() + "' is not an object", where);
      auto snak = entry.find("mainsnak");
      if (snak == entry.end() || !snak->is_string())
        throw MalformedRecord("value of '" + it.key() + "' lacks a string mainsnak", where);
      p.values.push_back(snak->get<std::string>());
    }
    r.properties.push_back(std::move(p));
  }
  return r;
}

inline EntityRecord parse_record(std::string_view line) {
  Json obj;
  try {
    obj = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw MalformedRecord(e.what(), e.byte > 0 ? e.byte - 1 : 0);
  }
  return record_from_json(obj, line);
}

inline Json record_to_json(const EntityRecord& r) {
  Json obj = Json::object();
  obj[std::string(kNameProperty)] = r.name_id;
  for (const auto& p : r.properties) {
    Json arr = Json::array();
    for (const auto& v : p.values) arr.push_back(Json{{"mainsnak", v}});
    obj[p.name] = std::move(arr);
  }
  return obj;
}

inline std::string serialize_record(const EntityRecord& r) { return record_to_json(r).dump(); }

inline std::vector<EntityRecord> read_records(std::istream& is) {
  std::vector<EntityRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(parse_record(line));
    } catch (const MalformedRecord& e) {
      throw MalformedRecord("line " + std::to_string(lineno) + ": " + e.what(), e.byte_offset());
    }
  }
  return out;
}

inline std::vector<EntityRecord> read_records_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("IoError", "cannot open " + path);
  return read_records(in);
}

inline void write_records(std::ostream& os, const std::vector<EntityRecord>& records) {
  for (const auto& r : records) os << serialize_record(r) << '\n';
}

// Training pairs, one JSON object per line: {"record": {...}, "reference": "..."}.
inline std::vector<std::pair<EntityRecord, std::string>> read_reference_pairs(std::istream& is) {
  std::vector<std::pair<EntityRecord, std::string>> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(is, line); ++lineno) {
    if (text::trim(line).empty()) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    Json obj;
    try {
      obj = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw MalformedRecord(where + e.what(), e.byte > 0 ? e.byte - 1 : 0);
    }
    if (!obj.is_object() || !obj.contains("record") || !obj.contains("reference") ||
        !obj["reference"].is_string())
      throw MalformedRecord(where + "expected {\"record\": {...}, \"reference\": \"...\"}", 0);
    try {
      out.emplace_back(record_from_json(obj["record"], obj["record"].dump()),
                       obj["reference"].get<std::string>());
    } catch (const MalformedRecord& e) {
      throw MalformedRecord(where + e.what(), e.byte_offset());
    }
  }
  return out;
}

inline std::vector<std::pair<EntityRecord, std::string>> read_reference_pairs_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("IoError", "cannot open " + path);
  return read_reference_pairs(in);
}

inline std::array<unsigned, 3> parse_ratios(std::string_view s) {
  auto parts = text::split(s, ",");
  if (parts.size() != 3) throw BadRatios("expected three comma-separated percentages");
  std::array<unsigned, 3> out{};
  for (std::size_t i = 0; i < 3; ++i) {
    auto t = text::trim(parts[i]);
    if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; }))
      throw BadRatios("'" + parts[i] + "' is not a percentage");
    out[i] = unsigned(std::stoul(std::string(t)));
  }
  return out;
}

// Sizes for a partition of n items by integer percentages, largest-remainder
// rounding; remainder ties go to the earlier part.
inline std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<unsigned, 3>& ratios) {
  std::array<std::size_t, 3> sizes{};
  std::array<std::size_t, 3> rem{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    sizes[i] = n * ratios[i] / 100;
    rem[i] = n * ratios[i] % 100;
    assigned += sizes[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % 3]];
  return sizes;
}

// Canonical order (by name_id), seeded shuffle, contiguous cut. Sorting first
// makes membership independent of input order.
inline DatasetSplit split_dataset(std::vector<EntityRecord> records,
                                  const std::array<unsigned, 3>& ratios, std::uint64_t seed) {
  if (ratios[0] + ratios[1] + ratios[2] != 100) throw BadRatios("ratios must sum to 100");
  if (records.empty()) throw EmptyInput("no records to split");
  std::sort(records.begin(), records.end(),
            [](const EntityRecord& a, const EntityRecord& b) { return a.name_id < b.name_id; });
  for (std::size_t i = 1; i < records.size(); ++i)
    if (records[i].name_id == records[i - 1].name_id)
      throw DuplicateNameId("name_id '" + records[i].name_id + "' appears twice");
  SeededRng rng(seed);
  rng.shuffle(records);
  auto sizes = split_sizes(records.size(), ratios);
  DatasetSplit out;
  out.seed = seed;
  auto it = std::make_move_iterator(records.begin());
  out.train.assign(it, it + std::ptrdiff_t(sizes[0]));
  it += std::ptrdiff_t(sizes[0]);
  out.validation.assign(it, it + std::ptrdiff_t(sizes[1]));
  it += std::ptrdiff_t(sizes[1]);
  out.test.assign(it, std::make_move_iterator(records.end()));
  return out;
}

inline std::vector<SlotOccurrence> slot_occurrences(const EntityRecord& r) {
  std::vector<SlotOccurrence> out;
  for (const auto& p : r.properties)
    for (std::size_t i = 0; i < p.values.size(); ++i) out.push_back({p.name, i, p.values[i]});
  return out;
}

// An exact, word-bounded occurrence of a record value in a text.
struct SlotMatch {
  SlotOccurrence occurrence;
  std::size_t offset = 0;
  std::size_t length = 0;
};

// Finds maximal non-overlapping occurrences of the record's values (and its
// name, as property Name_ID) in `text`. Longer values claim text first. When
// several occurrences share one value string, the k-th surface match goes to
// the k-th of them and any surplus matches to the last, so a repeated value
// reads as repetition of one slot. Result is in surface order.
inline std::vector<SlotMatch> match_slot_values(std::string_view text, const EntityRecord& r,
                                                bool include_name = true) {
  std::vector<SlotOccurrence> cands;
  if (include_name) cands.push_back({std::string(kNameProperty), 0, r.name_id});
  for (auto& o : slot_occurrences(r)) cands.push_back(std::move(o));

  // Group identical values; groups keep record order.
  std::vector<std::pair<std::string, std::vector<SlotOccurrence>>> groups;
  for (auto& c : cands) {
    if (c.value.empty()) continue;
    auto g = std::find_if(groups.begin(), groups.end(),
                          [&](const auto& p) { return p.first == c.value; });
    if (g == groups.end()) {
      std::string key = c.value;
      groups.emplace_back(std::move(key), std::vector<SlotOccurrence>{std::move(c)});
    } else
      g->second.push_back(std::move(c));
  }
  std::stable_sort(groups.begin(), groups.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });

  std::vector<bool> claimed(text.size(), false);
  std::vector<SlotMatch> out;
  auto boundary_ok = [&](std::size_t pos, std::size_t len) {
    const auto* u = reinterpret_cast<const unsigned char*>(text.data());
    bool left = pos == 0 || !text::is_word_byte(u[pos - 1]) ||
                !text::is_word_byte(u[pos]);
    bool right = pos + len == text.size() || !text::is_word_byte(u[pos + len]) ||
                 !text::is_word_byte(u[pos + len - 1]);
    return left && right;
  };
  for (const auto& [value, members] : groups) {
    std::size_t k = 0;
    for (std::size_t pos = text.find(value); pos != std::string_view::npos;
         pos = text.find(value, pos + 1)) {
      if (!boundary_ok(pos, value.size())) continue;
      if (std::any_of(claimed.begin() + std::ptrdiff_t(pos),
                      claimed.begin() + std::ptrdiff_t(pos + value.size()),
                      [](bool b) { return b; }))
        continue;
      std::fill(claimed.begin() + std::ptrdiff_t(pos),
                claimed.begin() + std::ptrdiff_t(pos + value.size()), true);
      out.push_back({members[std::min(k, members.size() - 1)], pos, value.size()});
      ++k;
      pos += value.size() - 1;
    }
  }
  std::sort(out.begin(), out.end(),
            [](const SlotMatch& a, const SlotMatch& b) { return a.offset < b.offset; });
  return out;
}

struct Delexicalized {
  std::string template_text;
  std::vector<SlotOccurrence> occurrences;  // surface order
};

// Replaces record values in `text` with [property:index] placeholders (the
// name with [Name_ID]).
inline Delexicalized delexicalize(std::string_view text, const EntityRecord& r) {
  Delexicalized out;
  std::size_t cursor = 0;
  for (auto& m : match_slot_values(text, r)) {
    out.template_text.append(text.substr(cursor, m.offset - cursor));
    Placeholder p{m.occurrence.property, false, m.occurrence.index};
    out.template_text += p.str();
    cursor = m.offset + m.length;
    out.occurrences.push_back(std::move(m.occurrence));
  }
  out.template_text.append(text.substr(cursor));
  return out;
}

}  // namespace kg2t
