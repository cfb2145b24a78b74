#pragma once

// Rating data: CSV I/O, rater filtering, summaries, winner counts,
// significance tests and the error/rating association tables.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kg2t/common.hpp"
#include "kg2t/csv.hpp"
#include "kg2t/faithfulness.hpp"
#include "kg2t/grammar_eval.hpp"
#include "kg2t/stats.hpp"

namespace kg2t {

struct Judgement {
  std::string rater_id;
  std::string text_id;
  TextSource source = TextSource::TH;
  LikertLabel quality = LikertLabel::Neutral;
  LikertLabel naturalness = LikertLabel::Neutral;
  bool is_attention_check = false;
  std::size_t sequence_index = 0;
};

enum class Metric { Quality, Naturalness };
inline constexpr std::array<Metric, 2> kAllMetrics = {Metric::Quality, Metric::Naturalness};

inline std::string_view to_string(Metric m) {
  return m == Metric::Quality ? "quality" : "naturalness";
}

inline LikertLabel label_of(const Judgement& j, Metric m) {
  return m == Metric::Quality ? j.quality : j.naturalness;
}

// ---------------------------------------------------------------------- CSV

inline const std::vector<std::string>& judgement_columns() {
  static const std::vector<std::string> cols = {
      "rater_id",          "text_id",           "source",        "quality_label",
      "naturalness_label", "is_attention_check", "sequence_index"};
  return cols;
}

inline void write_judgements_csv(std::ostream& os, const std::vector<Judgement>& js) {
  csv::write_row(os, judgement_columns());
  for (const auto& j : js)
    csv::write_row(os, {j.rater_id, j.text_id, std::string(to_string(j.source)),
                        std::string(to_string(j.quality)), std::string(to_string(j.naturalness)),
                        j.is_attention_check ? "true" : "false",
                        std::to_string(j.sequence_index)});
}

inline std::vector<Judgement> read_judgements_csv(std::istream& is) {
  csv::Table t(csv::read(is), judgement_columns());
  std::vector<Judgement> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const std::string where = "judgement row " + std::to_string(i + 2);
    Judgement j;
    j.rater_id = t.at(i, "rater_id");
    j.text_id = t.at(i, "text_id");
    auto src = parse_source(t.at(i, "source"));
    auto q = parse_label(t.at(i, "quality_label"));
    auto n = parse_label(t.at(i, "naturalness_label"));
    if (!src) throw MalformedCsv(where + ": unknown source '" + t.at(i, "source") + "'");
    if (!q || !n) throw MalformedCsv(where + ": unknown Likert label");
    j.source = *src;
    j.quality = *q;
    j.naturalness = *n;
    j.is_attention_check = parse_bool_field(t.at(i, "is_attention_check"));
    try {
      j.sequence_index = std::stoul(t.at(i, "sequence_index"));
    } catch (const std::exception&) {
      throw MalformedCsv(where + ": bad sequence_index");
    }
    if (!seen.insert({j.rater_id, j.text_id}).second)
      throw MalformedCsv(where + ": rater '" + j.rater_id + "' rated '" + j.text_id + "' twice");
    out.push_back(std::move(j));
  }
  return out;
}

// ---------------------------------------------------------------- filtering

struct AttentionExpectation {
  LikertLabel quality;
  LikertLabel naturalness;
};
using AttentionKey = std::map<std::string, AttentionExpectation>;

// Columns: text_id, quality, naturalness (label names).
inline AttentionKey read_attention_key(std::istream& is) {
  csv::Table t(csv::read(is), {"text_id", "quality", "naturalness"});
  AttentionKey key;
  for (std::size_t i = 0; i < t.size(); ++i) {
    auto q = parse_label(t.at(i, "quality"));
    auto n = parse_label(t.at(i, "naturalness"));
    if (!q || !n) throw MalformedCsv("attention key row " + std::to_string(i + 2));
    key[t.at(i, "text_id")] = {*q, *n};
  }
  return key;
}

struct FilterOptions {
  bool exclude_constant = true;
  std::size_t constant_after = 10;
};

struct ExcludedRater {
  std::string rater_id;
  std::string reason;
};

struct FilterResult {
  std::vector<Judgement> kept;  // attention-check items removed
  std::vector<ExcludedRater> excluded;
  std::vector<std::string> constant_flagged;
  std::size_t raters_total = 0;
  std::size_t raters_passing = 0;  // passed the attention check
};

// A rater is kept only if they answered at least one attention check and
// every one matched its key. Raters whose quality and naturalness never
// change after the first `constant_after` judgements are flagged and, unless
// disabled, excluded as well.
inline FilterResult filter_raters(const std::vector<Judgement>& judgements,
                                  const AttentionKey& key, const FilterOptions& opt = {}) {
  std::map<std::string, std::vector<const Judgement*>> by_rater;
  for (const auto& j : judgements) by_rater[j.rater_id].push_back(&j);

  FilterResult res;
  res.raters_total = by_rater.size();
  std::set<std::string> keep;
  for (auto& [rater, js] : by_rater) {
    std::sort(js.begin(), js.end(), [](const Judgement* a, const Judgement* b) {
      return a->sequence_index < b->sequence_index;
    });
    std::size_t checks = 0;
    std::optional<std::string> failure;
    for (const auto* j : js) {
      if (!j->is_attention_check) continue;
      ++checks;
      auto it = key.find(j->text_id);
      if (it == key.end())
        throw Error("MissingAttentionKey", "no expected answer for check '" + j->text_id + "'");
      if (j->quality != it->second.quality || j->naturalness != it->second.naturalness)
        failure = "failed attention check " + j->text_id;
    }
    if (!checks) failure = "answered no attention check";
    if (failure) {
      res.excluded.push_back({rater, *failure});
      continue;
    }
    ++res.raters_passing;

    std::vector<const Judgement*> rated;
    for (const auto* j : js)
      if (!j->is_attention_check) rated.push_back(j);
    if (rated.size() > opt.constant_after) {
      const auto* ref = rated[opt.constant_after];
      bool constant = std::all_of(rated.begin() + std::ptrdiff_t(opt.constant_after), rated.end(),
                                  [&](const Judgement* j) {
                                    return j->quality == ref->quality &&
                                           j->naturalness == ref->naturalness;
                                  });
      if (constant) {
        res.constant_flagged.push_back(rater);
        if (opt.exclude_constant) {
          res.excluded.push_back(
              {rater, "constant ratings after judgement " + std::to_string(opt.constant_after)});
          continue;
        }
      }
    }
    keep.insert(rater);
  }
  for (const auto& j : judgements)
    if (!j.is_attention_check && keep.count(j.rater_id)) res.kept.push_back(j);
  return res;
}

// ---------------------------------------------------------------- summaries

struct MetricSummary {
  double average = 0;
  std::array<double, 5> percent{};  // very bad .. very good, one decimal
};

struct SourceSummary {
  std::size_t ratings = 0;
  MetricSummary quality, naturalness;
  const MetricSummary& of(Metric m) const { return m == Metric::Quality ? quality : naturalness; }
};

inline double round_to(double v, int decimals) {
  double f = std::pow(10.0, decimals);
  return std::round(v * f) / f;
}

inline std::map<TextSource, SourceSummary> aggregate_summary(const std::vector<Judgement>& js) {
  std::map<TextSource, std::array<std::array<std::size_t, 5>, 2>> counts;
  for (const auto& j : js) {
    if (j.is_attention_check) continue;
    auto& c = counts[j.source];
    ++c[0][std::size_t(to_numeric(j.quality) - 1)];
    ++c[1][std::size_t(to_numeric(j.naturalness) - 1)];
  }
  if (counts.empty()) throw EmptyInput("no judgements to summarise");
  std::map<TextSource, SourceSummary> out;
  for (const auto& [src, c] : counts) {
    SourceSummary s;
    for (std::size_t k = 0; k < 5; ++k) s.ratings += c[0][k];
    for (int m = 0; m < 2; ++m) {
      MetricSummary& ms = m == 0 ? s.quality : s.naturalness;
      double sum = 0;
      for (std::size_t k = 0; k < 5; ++k) {
        sum += double(k + 1) * double(c[m][k]);
        ms.percent[k] = round_to(100.0 * double(c[m][k]) / double(s.ratings), 1);
      }
      ms.average = sum / double(s.ratings);
    }
    out[src] = s;
  }
  return out;
}

// Snippet shared by the three versions of a text: the text id without its
// source prefix (TT7, TML7 and TH7 all belong to snippet 7).
inline std::string snippet_of(std::string_view text_id, TextSource source) {
  auto prefix = to_string(source);
  if (text_id.rfind(prefix, 0) == 0 && text_id.size() > prefix.size()) {
    auto rest = text_id.substr(prefix.size());
    if (rest.front() == '-' || rest.front() == '_') rest.remove_prefix(1);
    return std::string(rest);
  }
  return std::string(text_id);
}

struct TextStats {
  std::string text_id;
  TextSource source = TextSource::TH;
  std::string snippet;
  std::size_t ratings = 0;
  std::array<double, 2> mean{};            // by Metric
  std::array<std::size_t, 2> negative{};   // bad or very bad
  std::array<std::size_t, 2> neutral{};
  std::array<std::size_t, 2> positive{};   // good or very good
};

inline std::size_t metric_index(Metric m) { return m == Metric::Quality ? 0 : 1; }

inline std::map<std::string, TextStats> text_statistics(const std::vector<Judgement>& js) {
  std::map<std::string, TextStats> out;
  std::map<std::string, std::array<double, 2>> sums;
  for (const auto& j : js) {
    if (j.is_attention_check) continue;
    auto [it, fresh] = out.try_emplace(j.text_id);
    auto& t = it->second;
    if (fresh) {
      t.text_id = j.text_id;
      t.source = j.source;
      t.snippet = snippet_of(j.text_id, j.source);
    } else if (t.source != j.source) {
      throw MalformedCsv("text '" + j.text_id + "' appears with two sources");
    }
    ++t.ratings;
    for (auto m : kAllMetrics) {
      auto l = label_of(j, m);
      auto k = metric_index(m);
      sums[j.text_id][k] += to_numeric(l);
      switch (squash(l)) {
        case Squashed::Negative: ++t.negative[k]; break;
        case Squashed::Neutral: ++t.neutral[k]; break;
        case Squashed::Positive: ++t.positive[k]; break;
      }
    }
  }
  for (auto& [id, t] : out)
    for (std::size_t k = 0; k < 2; ++k) t.mean[k] = sums[id][k] / double(t.ratings);
  return out;
}

struct WinnerReport {
  std::map<TextSource, std::size_t> wins;
  std::size_t snippets = 0;  // snippets with at least two sources
};

// Per snippet, every source whose text average is maximal (within 1e-9)
// scores a point.
inline WinnerReport count_winners(const std::map<std::string, TextStats>& texts, Metric m) {
  std::map<std::string, std::vector<const TextStats*>> by_snippet;
  for (const auto& [id, t] : texts) by_snippet[t.snippet].push_back(&t);
  WinnerReport rep;
  for (auto s : kAllSources) rep.wins[s] = 0;
  const auto k = metric_index(m);
  for (const auto& [snippet, ts] : by_snippet) {
    std::set<TextSource> sources;
    for (const auto* t : ts) sources.insert(t->source);
    if (sources.size() < 2) continue;
    ++rep.snippets;
    double best = -1;
    for (const auto* t : ts) best = std::max(best, t->mean[k]);
    std::set<TextSource> winners;
    for (const auto* t : ts)
      if (std::fabs(t->mean[k] - best) <= 1e-9) winners.insert(t->source);
    for (auto s : winners) ++rep.wins[s];
  }
  return rep;
}

// Texts per source with at least `threshold` bad or very-bad ratings.
inline std::map<TextSource, std::size_t> flag_negative_texts(
    const std::map<std::string, TextStats>& texts, std::size_t threshold, Metric m) {
  if (threshold < 1) throw Error("BadArgument", "threshold must be at least 1");
  std::map<TextSource, std::size_t> out;
  for (auto s : kAllSources) out[s] = 0;
  for (const auto& [id, t] : texts)
    if (t.negative[metric_index(m)] >= threshold) ++out[t.source];
  return out;
}

inline std::map<TextSource, std::size_t> flag_negative_texts(const std::vector<Judgement>& js,
                                                             std::size_t threshold, Metric m) {
  return flag_negative_texts(text_statistics(js), threshold, m);
}

// Quality/naturalness correlation over individual judgements of one source.
inline double quality_naturalness_correlation(const std::vector<Judgement>& js, TextSource s) {
  std::vector<double> q, n;
  for (const auto& j : js)
    if (!j.is_attention_check && j.source == s) {
      q.push_back(to_numeric(j.quality));
      n.push_back(to_numeric(j.naturalness));
    }
  return stats::pearson(q, n);
}

struct PairedSamples {
  std::vector<std::string> snippets;
  std::vector<double> x, y;
};

// Text averages of two sources over the snippets where both were rated.
inline PairedSamples paired_text_means(const std::map<std::string, TextStats>& texts,
                                       TextSource a, TextSource b, Metric m) {
  std::map<std::string, std::array<std::optional<double>, 2>> by_snippet;
  for (const auto& [id, t] : texts) {
    if (t.source == a) by_snippet[t.snippet][0] = t.mean[metric_index(m)];
    if (t.source == b) by_snippet[t.snippet][1] = t.mean[metric_index(m)];
  }
  PairedSamples p;
  for (const auto& [snippet, v] : by_snippet)
    if (v[0] && v[1]) {
      p.snippets.push_back(snippet);
      p.x.push_back(*v[0]);
      p.y.push_back(*v[1]);
    }
  return p;
}

// -------------------------------------------------------------- association

enum class GoodRule { SquashedMajority, MeanThreshold };

// Good/bad verdict for a text, nullopt when it counts as neither. Majority:
// the strictly most frequent squashed class (neutral or a tie gives
// nullopt). Mean: average of at least 3.5 is good, anything else bad.
inline std::optional<bool> is_good(const TextStats& t, Metric m, GoodRule rule) {
  auto k = metric_index(m);
  if (rule == GoodRule::MeanThreshold) return t.mean[k] >= 3.5;
  auto pos = t.positive[k], neu = t.neutral[k], neg = t.negative[k];
  if (pos > neu && pos > neg) return true;
  if (neg > neu && neg > pos) return false;
  return std::nullopt;
}

struct AssociationTable {
  std::string name;  // "slot-category", "grammar-has-error", "grammar-category"
  TextSource source = TextSource::TH;
  Metric metric = Metric::Quality;
  stats::ContingencyTable table;     // columns: good, bad
  std::vector<std::size_t> row_texts;  // texts per row before the good/bad split
};

namespace detail {

inline AssociationTable make_association(std::string name, TextSource src, Metric m,
                                         const std::vector<std::string>& labels,
                                         const std::vector<std::vector<const TextStats*>>& rows,
                                         GoodRule rule) {
  AssociationTable a;
  a.name = std::move(name);
  a.source = src;
  a.metric = m;
  a.table.col_labels = {"good", "bad"};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<std::uint64_t> cells(2, 0);
    for (const auto* t : rows[i])
      if (auto g = is_good(*t, m, rule)) ++cells[*g ? 0 : 1];
    a.table.row_labels.push_back(labels[i]);
    a.table.counts.push_back(cells);
    a.row_texts.push_back(rows[i].size());
  }
  return a;
}

}  // namespace detail

// Slot-category tables for every source with faithfulness rows (populated
// categories only), and grammar tables for every source: verified errors
// present or not, and per category. A text with errors of several categories
// lands in each of their rows.
inline std::vector<AssociationTable> association_tables(
    const std::map<std::string, TextStats>& texts, const std::vector<FaithfulnessRow>& faith,
    const std::vector<VerifiedError>& grammar, GoodRule rule = GoodRule::SquashedMajority) {
  std::vector<std::string> missing;
  for (const auto& f : faith)
    if (!texts.count(f.text_id)) missing.push_back(f.text_id);
  for (const auto& g : grammar)
    if (!texts.count(g.match.text_id)) missing.push_back(g.match.text_id);
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 5; ++i)
      list += (i ? ", " : "") + missing[i];
    throw JoinMismatch(std::to_string(missing.size()) + " text id(s) have no judgements: " +
                       list + (missing.size() > 5 ? ", ..." : ""));
  }

  std::vector<AssociationTable> out;
  for (auto src : kAllSources) {
    std::map<SlotErrorCategory, std::vector<const TextStats*>> by_cat;
    for (const auto& f : faith)
      if (f.source == src) by_cat[f.report.category].push_back(&texts.at(f.text_id));
    if (by_cat.empty()) continue;
    std::vector<std::string> labels;
    std::vector<std::vector<const TextStats*>> rows;
    for (auto& [cat, ts] : by_cat) {
      labels.emplace_back(to_string(cat));
      rows.push_back(ts);
    }
    for (auto m : kAllMetrics)
      out.push_back(detail::make_association("slot-category", src, m, labels, rows, rule));
  }

  std::map<std::string, std::set<GrammarErrorCategory>> verified;
  for (const auto& g : grammar)
    if (g.verified) verified[g.match.text_id].insert(g.category);
  for (auto src : kAllSources) {
    std::vector<const TextStats*> with, without;
    std::map<GrammarErrorCategory, std::vector<const TextStats*>> by_cat;
    for (const auto& [id, t] : texts) {
      if (t.source != src) continue;
      auto it = verified.find(id);
      if (it == verified.end()) {
        without.push_back(&t);
        continue;
      }
      with.push_back(&t);
      for (auto c : it->second) by_cat[c].push_back(&t);
    }
    if (with.empty() && without.empty()) continue;
    for (auto m : kAllMetrics)
      out.push_back(detail::make_association("grammar-has-error", src, m,
                                             {"with errors", "without errors"}, {with, without},
                                             rule));
    if (by_cat.empty()) continue;
    std::vector<std::string> labels;
    std::vector<std::vector<const TextStats*>> rows;
    for (auto& [cat, ts] : by_cat) {
      labels.emplace_back(to_string(cat));
      rows.push_back(ts);
    }
    for (auto m : kAllMetrics)
      out.push_back(detail::make_association("grammar-category", src, m, labels, rows, rule));
  }
  return out;
}

// ------------------------------------------------------------------- report

struct AnalysisOptions {
  FilterOptions filter;
  GoodRule good_rule = GoodRule::SquashedMajority;
  std::size_t negative_threshold = 2;
  std::size_t min_judgements = 3;
};

inline nlohmann::ordered_json test_json(const stats::TestResult& r) {
  nlohmann::ordered_json j;
  j["statistic"] = r.statistic;
  j["p_value"] = r.p_value;
  if (r.df) j["df"] = r.df;
  j["detail"] = r.detail;
  return j;
}

namespace detail {

template <class F>
nlohmann::ordered_json guarded(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    return {{"error", e.kind()}, {"message", e.what()}};
  }
}

inline nlohmann::ordered_json per_source(const std::map<TextSource, std::size_t>& m) {
  nlohmann::ordered_json j;
  for (auto s : kAllSources) j[std::string(to_string(s))] = m.count(s) ? m.at(s) : 0;
  return j;
}

}  // namespace detail

// Full analysis as JSON. Judgements are the raw log (attention checks
// included); rater filtering happens here.
inline nlohmann::ordered_json analyze(const std::vector<Judgement>& raw, const AttentionKey& key,
                                      const std::vector<FaithfulnessRow>& faith = {},
                                      const std::vector<VerifiedError>& grammar = {},
                                      const AnalysisOptions& opt = {}) {
  using nlohmann::ordered_json;
  auto filtered = filter_raters(raw, key, opt.filter);
  const auto& js = filtered.kept;
  ordered_json rep;

  auto& raters = rep["raters"];
  raters["total"] = filtered.raters_total;
  raters["passed_attention_check"] = filtered.raters_passing;
  raters["retained"] = filtered.raters_passing -
                       (opt.filter.exclude_constant ? filtered.constant_flagged.size() : 0);
  raters["constant_flagged"] = filtered.constant_flagged;
  raters["excluded"] = ordered_json::array();
  for (const auto& e : filtered.excluded)
    raters["excluded"].push_back({{"rater_id", e.rater_id}, {"reason", e.reason}});

  auto summary = aggregate_summary(js);
  for (const auto& [src, s] : summary) {
    auto& o = rep["summary"][std::string(to_string(src))];
    o["ratings"] = s.ratings;
    for (auto m : kAllMetrics) {
      auto& mo = o[std::string(to_string(m))];
      mo["average"] = s.of(m).average;
      for (std::size_t k = 0; k < 5; ++k)
        mo["percent"][std::string(to_string(kAllLabels[k]))] = s.of(m).percent[k];
    }
  }

  auto texts = text_statistics(js);
  std::map<TextSource, std::size_t> text_counts;
  ordered_json below = ordered_json::array();
  for (const auto& [id, t] : texts) {
    ++text_counts[t.source];
    if (t.ratings < opt.min_judgements) below.push_back({{"text_id", id}, {"ratings", t.ratings}});
  }
  rep["texts"] = detail::per_source(text_counts);
  rep["texts_below_minimum"] = {{"minimum", opt.min_judgements}, {"texts", below}};

  for (auto m : kAllMetrics) {
    auto w = count_winners(texts, m);
    rep["winners"][std::string(to_string(m))] = detail::per_source(w.wins);
    rep["winners"]["snippets_compared"] = w.snippets;
  }
  rep["negative_texts"]["threshold"] = opt.negative_threshold;
  for (auto m : kAllMetrics)
    rep["negative_texts"][std::string(to_string(m))] =
        detail::per_source(flag_negative_texts(texts, opt.negative_threshold, m));

  for (const auto& [src, s] : summary)
    rep["correlations"][std::string(to_string(src))] = detail::guarded(
        [&, src = src] { return ordered_json(quality_naturalness_correlation(js, src)); });

  rep["paired_t_tests"] = ordered_json::array();
  const std::pair<TextSource, TextSource> pairs[] = {{TextSource::TT, TextSource::TML},
                                                     {TextSource::TT, TextSource::TH},
                                                     {TextSource::TML, TextSource::TH}};
  for (auto [a, b] : pairs)
    for (auto m : kAllMetrics) {
      auto p = paired_text_means(texts, a, b, m);
      ordered_json t;
      t["pair"] = std::string(to_string(a)) + "-" + std::string(to_string(b));
      t["metric"] = to_string(m);
      t["snippets"] = p.snippets.size();
      t["result"] = detail::guarded([&] { return test_json(stats::paired_t_test(p.x, p.y)); });
      rep["paired_t_tests"].push_back(t);
    }

  for (const auto& [src, s] : summary)
    for (auto m : kAllMetrics) {
      std::vector<double> v;
      for (const auto& j : js)
        if (j.source == src) v.push_back(to_numeric(label_of(j, m)));
      rep["shapiro_wilk"][std::string(to_string(src))][std::string(to_string(m))] =
          detail::guarded([&] { return test_json(stats::shapiro_wilk(v)); });
    }

  rep["association"] = ordered_json::array();
  rep["association_rule"] =
      opt.good_rule == GoodRule::SquashedMajority ? "squashed-majority" : "mean>=3.5";
  for (const auto& a : association_tables(texts, faith, grammar, opt.good_rule)) {
    ordered_json t;
    t["table"] = a.name;
    t["source"] = to_string(a.source);
    t["metric"] = to_string(a.metric);
    t["rows"] = a.table.row_labels;
    t["columns"] = a.table.col_labels;
    t["counts"] = a.table.counts;
    t["row_texts"] = a.row_texts;
    t["fisher"] = detail::guarded([&] { return test_json(stats::fisher_exact(a.table)); });
    rep["association"].push_back(t);
  }

  if (!grammar.empty()) {
    for (const auto& [src, cats] : tally_errors(grammar))
      for (const auto& [cat, c] : cats)
        rep["grammar_tally"][std::string(to_string(src))][std::string(to_string(cat))] = {
            {"before", c.before}, {"after", c.after}};
  }

  rep["notes"] = {
      "Likert labels are converted to 1..5 for averages, correlations and t-tests; treat "
      "those numeric results with caution.",
      "Correlations are Pearson over individual judgements; t-tests pair text averages by "
      "snippet."};
  return rep;
}

}  // namespace kg2t
