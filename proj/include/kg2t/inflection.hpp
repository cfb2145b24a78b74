#pragma once

// Finite third-person-singular verb groups for the template realiser.

#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include "kg2t/common.hpp"

namespace kg2t {

enum class Tense { Past, Present };
enum class Voice { Active, Passive };

// lemma <TAB> past <TAB> past participle [<TAB> 3sg present]
// A line holding only a lemma marks it irregular with no known forms.
inline constexpr std::string_view kDefaultIrregularVerbs = R"(be	was	been	is
have	had	had	has
do	did	done	does
go	went	gone	goes
bear	bore	born
become	became	become
begin	began	begun
break	broke	broken
bring	brought	brought
build	built	built
buy	bought	bought
choose	chose	chosen
come	came	come
draw	drew	drawn
drive	drove	driven
fall	fell	fallen
fight	fought	fought
find	found	found
fly	flew	flown
get	got	got
give	gave	given
grow	grew	grown
hold	held	held
keep	kept	kept
know	knew	known
lead	led	led
leave	left	left
lose	lost	lost
make	made	made
meet	met	met
pay	paid	paid
ride	rode	ridden
run	ran	run
say	said	said
see	saw	seen
sell	sold	sold
send	sent	sent
sing	sang	sung
speak	spoke	spoken
spend	spent	spent
stand	stood	stood
take	took	taken
teach	taught	taught
tell	told	told
think	thought	thought
win	won	won
write	wrote	written
)";

struct VerbForms {
  std::string past;
  std::string participle;
  std::string present;  // empty: regular -s rule
};

class Lexicon {
 public:
  static Lexicon parse(std::istream& is) {
    Lexicon lex;
    std::string line;
    while (std::getline(is, line)) {
      auto t = text::trim(line);
      if (t.empty() || t.front() == '#') continue;
      auto cols = text::split(t, "\t");
      auto lemma = std::string(text::trim(cols[0]));
      lex.irregular_.insert(lemma);
      if (cols.size() >= 3)
        lex.forms_[lemma] = {std::string(text::trim(cols[1])), std::string(text::trim(cols[2])),
                             cols.size() >= 4 ? std::string(text::trim(cols[3])) : std::string()};
    }
    return lex;
  }

  static const Lexicon& default_lexicon() {
    static const Lexicon lex = [] {
      std::istringstream is{std::string(kDefaultIrregularVerbs)};
      return parse(is);
    }();
    return lex;
  }

  bool is_irregular(const std::string& lemma) const { return irregular_.count(lemma) > 0; }
  const VerbForms* forms(const std::string& lemma) const {
    auto it = forms_.find(lemma);
    return it == forms_.end() ? nullptr : &it->second;
  }
  std::size_t size() const { return forms_.size(); }

 private:
  std::set<std::string> irregular_;
  std::map<std::string, VerbForms> forms_;
};

namespace detail {

inline bool is_vowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

inline std::string regular_past(const std::string& lemma) {
  if (lemma.empty()) return lemma;
  if (lemma.back() == 'e') return lemma + "d";
  if (lemma.size() >= 2 && lemma.back() == 'y' && !is_vowel(lemma[lemma.size() - 2]))
    return lemma.substr(0, lemma.size() - 1) + "ied";
  return lemma + "ed";
}

inline std::string regular_present(const std::string& lemma) {
  auto ends = [&](std::string_view s) {
    return lemma.size() >= s.size() && lemma.compare(lemma.size() - s.size(), s.size(), s) == 0;
  };
  if (ends("s") || ends("x") || ends("z") || ends("ch") || ends("sh")) return lemma + "es";
  if (lemma.size() >= 2 && lemma.back() == 'y' && !is_vowel(lemma[lemma.size() - 2]))
    return lemma.substr(0, lemma.size() - 1) + "ies";
  return lemma + "s";
}

}  // namespace detail

inline std::string inflect_verb(const std::string& lemma, Tense tense, Voice voice,
                                const Lexicon& lex = Lexicon::default_lexicon()) {
  const VerbForms* f = lex.forms(lemma);
  if (!f && lex.is_irregular(lemma))
    throw UnknownIrregular("no lexicon entry for irregular verb '" + lemma + "'");
  if (voice == Voice::Passive) {
    std::string participle = f ? f->participle : detail::regular_past(lemma);
    return (tense == Tense::Past ? "was " : "is ") + participle;
  }
  if (tense == Tense::Past) return f ? f->past : detail::regular_past(lemma);
  return (f && !f->present.empty()) ? f->present : detail::regular_present(lemma);
}

}  // namespace kg2t
