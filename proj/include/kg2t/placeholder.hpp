#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace kg2t {

inline constexpr std::string_view kNameProperty = "Name_ID";

// A slot reference inside a template: [prop], [prop:i] or [prop:*].
// [prop] is shorthand for [prop:0].
struct Placeholder {
  std::string property;
  bool all_values = false;
  std::size_t index = 0;

  bool operator==(const Placeholder&) const = default;

  std::string str() const {
    if (property == kNameProperty) return "[" + property + "]";
    return "[" + property + ":" + (all_values ? std::string("*") : std::to_string(index)) +
           "]";
  }
};

// A template is literal text interleaved with placeholders.
using TemplatePart = std::variant<std::string, Placeholder>;

struct PlaceholderSyntaxError {
  std::size_t offset;
  std::string message;
};

inline std::optional<Placeholder> parse_placeholder_body(std::string_view body) {
  if (body.empty()) return std::nullopt;
  Placeholder p;
  auto colon = body.rfind(':');
  if (colon == std::string_view::npos) {
    p.property = std::string(body);
    return p;
  }
  auto suffix = body.substr(colon + 1);
  p.property = std::string(body.substr(0, colon));
  if (p.property.empty()) return std::nullopt;
  if (suffix == "*") {
    p.all_values = true;
    return p;
  }
  if (suffix.empty()) return std::nullopt;
  std::size_t idx = 0;
  for (char c : suffix) {
    if (c < '0' || c > '9') return std::nullopt;
    idx = idx * 10 + std::size_t(c - '0');
  }
  p.index = idx;
  return p;
}

// Splits a template into parts. Returns the first syntax problem instead of
// throwing so callers can attach their own location information.
inline std::variant<std::vector<TemplatePart>, PlaceholderSyntaxError> tokenize_template(
    std::string_view tpl) {
  std::vector<TemplatePart> parts;
  std::string literal;
  for (std::size_t i = 0; i < tpl.size(); ++i) {
    char c = tpl[i];
    if (c == ']') return PlaceholderSyntaxError{i, "unmatched ']'"};
    if (c != '[') {
      literal += c;
      continue;
    }
    auto close = tpl.find_first_of("[]", i + 1);
    if (close == std::string_view::npos || tpl[close] != ']')
      return PlaceholderSyntaxError{i, "unterminated placeholder"};
    auto p = parse_placeholder_body(tpl.substr(i + 1, close - i - 1));
    if (!p)
      return PlaceholderSyntaxError{
          i, "bad placeholder '" + std::string(tpl.substr(i, close - i + 1)) + "'"};
    if (!literal.empty()) parts.emplace_back(std::move(literal));
    literal.clear();
    parts.emplace_back(std::move(*p));
    i = close;
  }
  if (!literal.empty()) parts.emplace_back(std::move(literal));
  return parts;
}

inline std::vector<Placeholder> placeholders_of(const std::vector<TemplatePart>& parts) {
  std::vector<Placeholder> out;
  for (const auto& part : parts)
    if (auto p = std::get_if<Placeholder>(&part)) out.push_back(*p);
  return out;
}

}  // namespace kg2t
