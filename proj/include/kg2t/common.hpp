#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "kg2t/error.hpp"

namespace kg2t {

// Who produced a text: template system, data-driven system, or a human.
enum class TextSource { TT, TML, TH };

inline constexpr std::array<TextSource, 3> kAllSources = {TextSource::TT, TextSource::TML,
                                                          TextSource::TH};

inline std::string_view to_string(TextSource s) {
  switch (s) {
    case TextSource::TT: return "TT";
    case TextSource::TML: return "TML";
    case TextSource::TH: return "TH";
  }
  return "?";
}

inline std::optional<TextSource> parse_source(std::string_view s) {
  if (s == "TT") return TextSource::TT;
  if (s == "TML") return TextSource::TML;
  if (s == "TH") return TextSource::TH;
  return std::nullopt;
}

// Five-point rating scale. The enumerator values are the numeric scores.
enum class LikertLabel : int { VeryBad = 1, Bad = 2, Neutral = 3, Good = 4, VeryGood = 5 };

inline constexpr std::array<LikertLabel, 5> kAllLabels = {
    LikertLabel::VeryBad, LikertLabel::Bad, LikertLabel::Neutral, LikertLabel::Good,
    LikertLabel::VeryGood};

inline std::string_view to_string(LikertLabel l) {
  switch (l) {
    case LikertLabel::VeryBad: return "very bad";
    case LikertLabel::Bad: return "bad";
    case LikertLabel::Neutral: return "neutral";
    case LikertLabel::Good: return "good";
    case LikertLabel::VeryGood: return "very good";
  }
  return "?";
}

inline std::optional<LikertLabel> parse_label(std::string_view s) {
  for (auto l : kAllLabels)
    if (to_string(l) == s) return l;
  return std::nullopt;
}

inline int to_numeric(LikertLabel l) { return static_cast<int>(l); }

enum class Squashed { Negative, Neutral, Positive };

inline Squashed squash(LikertLabel l) {
  if (l == LikertLabel::Good || l == LikertLabel::VeryGood) return Squashed::Positive;
  if (l == LikertLabel::Neutral) return Squashed::Neutral;
  return Squashed::Negative;
}

inline std::string_view to_string(Squashed s) {
  switch (s) {
    case Squashed::Negative: return "negative";
    case Squashed::Neutral: return "neutral";
    case Squashed::Positive: return "positive";
  }
  return "?";
}

namespace text {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split(std::string_view s, std::string_view sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      return out;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + sep.size();
  }
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// Collapse whitespace runs to one space and trim.
inline std::string normalize_space(std::string_view s) {
  std::string out;
  bool pending = false;
  for (char c : s) {
    if (is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out += ' ';
    pending = false;
    out += c;
  }
  return out;
}

// Word characters for boundary checks. Bytes >= 0x80 belong to multi-byte
// UTF-8 sequences and count as letters.
inline bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         c >= 0x80;
}

inline char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? char(c - 'A' + 'a') : c; }
inline char ascii_upper(char c) { return (c >= 'a' && c <= 'z') ? char(c - 'a' + 'A') : c; }

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = ascii_lower(c);
  return out;
}

inline bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (ascii_lower(a[i]) != ascii_lower(b[i])) return false;
  return true;
}

}  // namespace text

// Seeded, platform-independent randomness. std::shuffle and the standard
// distributions are implementation-defined, so splits and packages built
// with them would differ between standard libraries.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace kg2t
