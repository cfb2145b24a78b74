#pragma once

// Rating packages, rater sessions with per-text caps, an append-only
// judgement log, and the HTTP front of the survey.

#include <httplib.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "kg2t/common.hpp"
#include "kg2t/judgements.hpp"

namespace kg2t {

struct SurveyItem {
  std::string text_id;
  std::string display_text;
  TextSource source = TextSource::TH;
  bool is_attention_check = false;
  std::optional<AttentionExpectation> expected;  // present iff is_attention_check
};

struct TextPackage {
  std::string id;
  std::vector<SurveyItem> items;
};

struct LabeledText {
  std::string text_id;
  TextSource source = TextSource::TH;
  std::string text;
};

inline std::string attention_check_wording(const AttentionExpectation& e) {
  return "Please select '" + std::string(to_string(e.quality)) + "' for Quality and '" +
         std::string(to_string(e.naturalness)) + "' for Naturalness.";
}

// Deals texts into packages of the given sizes. Texts are shuffled within
// each source and then interleaved TT, TML, TH, so every package mixes
// sources. Each package gets one attention check at a seeded position with
// seeded expected labels. Check items are recorded under source TH.
inline std::vector<TextPackage> build_packages(const std::vector<LabeledText>& texts,
                                               const std::vector<std::size_t>& sizes,
                                               std::uint64_t seed) {
  std::size_t total = 0;
  for (auto s : sizes) total += s;
  if (total != texts.size() || sizes.empty())
    throw SizeMismatch("package sizes sum to " + std::to_string(total) + " but there are " +
                       std::to_string(texts.size()) + " texts");
  std::set<std::string> ids;
  for (const auto& t : texts)
    if (!ids.insert(t.text_id).second) throw SizeMismatch("duplicate text id " + t.text_id);

  SeededRng rng(seed);
  std::map<TextSource, std::vector<const LabeledText*>> by_source;
  for (const auto& t : texts) by_source[t.source].push_back(&t);
  for (auto& [s, v] : by_source) rng.shuffle(v);
  std::vector<const LabeledText*> dealt;
  for (std::size_t i = 0; dealt.size() < texts.size(); ++i)
    for (auto s : kAllSources)
      if (i < by_source[s].size()) dealt.push_back(by_source[s][i]);

  std::vector<TextPackage> out;
  std::size_t next = 0;
  for (std::size_t p = 0; p < sizes.size(); ++p) {
    TextPackage pkg;
    pkg.id = "P" + std::to_string(p + 1);
    for (std::size_t k = 0; k < sizes[p]; ++k, ++next)
      pkg.items.push_back({dealt[next]->text_id, dealt[next]->text, dealt[next]->source, false, {}});
    AttentionExpectation e{kAllLabels[rng.below(5)], kAllLabels[rng.below(5)]};
    SurveyItem check{"CHECK-" + pkg.id, attention_check_wording(e), TextSource::TH, true, e};
    auto pos = rng.below(pkg.items.size() + 1);
    pkg.items.insert(pkg.items.begin() + std::ptrdiff_t(pos), std::move(check));
    out.push_back(std::move(pkg));
  }
  return out;
}

// ------------------------------------------------------------- package file

inline nlohmann::ordered_json packages_to_json(const std::vector<TextPackage>& pkgs) {
  nlohmann::ordered_json j;
  j["packages"] = nlohmann::ordered_json::array();
  for (const auto& p : pkgs) {
    nlohmann::ordered_json pj;
    pj["id"] = p.id;
    pj["items"] = nlohmann::ordered_json::array();
    for (const auto& it : p.items) {
      nlohmann::ordered_json ij;
      ij["text_id"] = it.text_id;
      ij["display_text"] = it.display_text;
      ij["source"] = to_string(it.source);
      ij["is_attention_check"] = it.is_attention_check;
      if (it.expected)
        ij["expected"] = {{"quality", to_string(it.expected->quality)},
                          {"naturalness", to_string(it.expected->naturalness)}};
      pj["items"].push_back(ij);
    }
    j["packages"].push_back(pj);
  }
  return j;
}

inline std::vector<TextPackage> packages_from_json(const nlohmann::json& j) {
  std::vector<TextPackage> out;
  std::set<std::string> ids;
  try {
    for (const auto& pj : j.at("packages")) {
      TextPackage p;
      p.id = pj.at("id").get<std::string>();
      std::size_t checks = 0;
      for (const auto& ij : pj.at("items")) {
        SurveyItem it;
        it.text_id = ij.at("text_id").get<std::string>();
        it.display_text = ij.at("display_text").get<std::string>();
        auto src = parse_source(ij.at("source").get<std::string>());
        if (!src) throw Error("BadPackages", "unknown source in item " + it.text_id);
        it.source = *src;
        it.is_attention_check = ij.value("is_attention_check", false);
        if (ij.contains("expected")) {
          auto q = parse_label(ij["expected"].at("quality").get<std::string>());
          auto n = parse_label(ij["expected"].at("naturalness").get<std::string>());
          if (!q || !n) throw Error("BadPackages", "bad expected labels in " + it.text_id);
          it.expected = AttentionExpectation{*q, *n};
        }
        if (it.is_attention_check != it.expected.has_value())
          throw Error("BadPackages", "item " + it.text_id +
                                         ": expected labels must be present iff it is a check");
        if (!ids.insert(it.text_id).second)
          throw Error("BadPackages", "text " + it.text_id + " appears twice");
        checks += it.is_attention_check;
        p.items.push_back(std::move(it));
      }
      if (checks != 1)
        throw Error("BadPackages", "package " + p.id + " must hold exactly one attention check");
      out.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("BadPackages", e.what());
  }
  if (out.empty()) throw Error("BadPackages", "no packages");
  return out;
}

inline std::vector<TextPackage> read_packages_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("IoError", "cannot open " + p.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("BadPackages", e.what());
  }
  return packages_from_json(j);
}

// Expected answers of every check item, for the analyzer.
inline AttentionKey attention_key_of(const std::vector<TextPackage>& pkgs) {
  AttentionKey key;
  for (const auto& p : pkgs)
    for (const auto& it : p.items)
      if (it.expected) key[it.text_id] = *it.expected;
  return key;
}

// ------------------------------------------------------------------ service

struct SurveyOptions {
  std::size_t cap = 20;  // judgements per text; attention checks are exempt
  std::optional<std::filesystem::path> store;  // append-only JSONL log
};

struct NextItem {
  bool done = false;
  std::string text_id;
  std::string text;
  std::size_t position = 0;  // 1-based index within this session
  std::size_t total = 0;     // package size
};

struct Acknowledgement {
  std::string text_id;
  std::size_t sequence_index = 0;
};

class SurveyService {
 public:
  explicit SurveyService(std::vector<TextPackage> packages, SurveyOptions opt = {})
      : packages_(std::move(packages)), opt_(std::move(opt)) {
    for (std::size_t p = 0; p < packages_.size(); ++p)
      for (std::size_t i = 0; i < packages_[p].items.size(); ++i) {
        const auto& it = packages_[p].items[i];
        item_at_[it.text_id] = {p, i};
        committed_[it.text_id] = 0;
      }
    if (opt_.store) {
      replay(*opt_.store);
      log_.open(*opt_.store, std::ios::app);
      if (!log_) throw Error("IoError", "cannot open store " + opt_.store->string());
    }
  }

  // One session per rater: re-opening returns the existing session.
  std::string open_session(const std::string& rater_id) {
    if (text::trim(rater_id).empty()) throw Error("BadRequest", "rater_id must not be empty");
    std::unique_lock lock(mutex_);
    if (auto it = session_of_rater_.find(rater_id); it != session_of_rater_.end())
      return it->second;
    std::string id = fresh_session_id();
    const auto& pkg = packages_[assigned_ % packages_.size()];
    ++assigned_;
    append({{"type", "session"}, {"session_id", id}, {"rater_id", rater_id},
            {"package_id", pkg.id}});
    add_session(id, rater_id, pkg.id);
    return id;
  }

  NextItem next_item(const std::string& session_id) {
    std::unique_lock lock(mutex_);
    auto& s = session(session_id);
    const auto& pkg = packages_[s.package];
    NextItem out;
    out.total = pkg.items.size();
    auto serve = [&](std::size_t i) {
      const auto& it = pkg.items[i];
      if (s.outstanding != it.text_id) {
        s.outstanding = it.text_id;
        ++reserved_[it.text_id];
      }
      out.text_id = it.text_id;
      out.text = it.display_text;
      out.position = s.handled.size() + 1;
      return out;
    };
    if (s.outstanding) return serve(item_at_.at(*s.outstanding).second);

    std::optional<std::size_t> check, best;
    for (std::size_t i = 0; i < pkg.items.size(); ++i) {
      const auto& it = pkg.items[i];
      if (s.handled.count(it.text_id)) continue;
      if (it.is_attention_check) {
        check = i;
        continue;
      }
      if (committed_.at(it.text_id) >= opt_.cap) continue;
      if (!best || priority(it.text_id) < priority(pkg.items[*best].text_id)) best = i;
    }
    // The check keeps its package position within the rater's sequence.
    if (check && (!best || s.handled.size() >= *check)) return serve(*check);
    if (best) return serve(*best);
    s.completed = true;
    out.done = true;
    return out;
  }

  Acknowledgement submit_rating(const std::string& session_id, const std::string& text_id,
                                LikertLabel quality, LikertLabel naturalness) {
    std::unique_lock lock(mutex_);
    auto& s = session(session_id);
    if (s.rated.count(text_id))
      throw DuplicateRating("rater '" + s.rater_id + "' already rated '" + text_id + "'");
    if (s.outstanding != text_id)
      throw NotServed("'" + text_id + "' is not the item currently served to this session");
    const auto& item = packages_[s.package].items[item_at_.at(text_id).second];
    release(s);
    if (!item.is_attention_check && committed_.at(text_id) >= opt_.cap) {
      s.handled.insert(text_id);
      throw CapExceeded("'" + text_id + "' already has " + std::to_string(opt_.cap) +
                        " judgements");
    }
    Judgement j{s.rater_id, text_id, item.source, quality, naturalness, item.is_attention_check,
                s.rated.size() + 1};
    nlohmann::json rec = {{"type", "judgement"},
                          {"session_id", session_id},
                          {"rater_id", j.rater_id},
                          {"text_id", j.text_id},
                          {"quality", to_string(quality)},
                          {"naturalness", to_string(naturalness)},
                          {"sequence_index", j.sequence_index}};
    if (item.expected)
      rec["check_passed"] =
          item.expected->quality == quality && item.expected->naturalness == naturalness;
    append(rec);
    commit(s, j, rec.value("check_passed", true));
    return {text_id, j.sequence_index};
  }

  std::map<std::string, std::size_t> progress() const {
    std::shared_lock lock(mutex_);
    std::map<std::string, std::size_t> out;
    for (const auto& [id, n] : committed_)
      if (!is_check(id)) out[id] = n;
    return out;
  }

  std::vector<Judgement> judgements() const {
    std::shared_lock lock(mutex_);
    return log_entries_;
  }

  void export_csv(std::ostream& os) const { write_judgements_csv(os, judgements()); }

  // Pass/fail of a rater's attention check, if answered. Operator-only.
  std::optional<bool> check_outcome(const std::string& rater_id) const {
    std::shared_lock lock(mutex_);
    auto it = session_of_rater_.find(rater_id);
    if (it == session_of_rater_.end()) return std::nullopt;
    return sessions_.at(it->second).check_passed;
  }

  std::size_t cap() const { return opt_.cap; }
  const std::vector<TextPackage>& packages() const { return packages_; }

 private:
  struct Session {
    std::string rater_id;
    std::size_t package = 0;
    std::set<std::string> rated;
    std::set<std::string> handled;  // rated or skipped after hitting the cap
    std::optional<std::string> outstanding;
    std::optional<bool> check_passed;
    bool completed = false;
  };

  Session& session(const std::string& id) {
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw UnknownSession("no session '" + id + "'");
    return it->second;
  }

  bool is_check(const std::string& text_id) const {
    auto [p, i] = item_at_.at(text_id);
    return packages_[p].items[i].is_attention_check;
  }

  std::size_t priority(const std::string& text_id) const {
    auto r = reserved_.find(text_id);
    return committed_.at(text_id) + (r == reserved_.end() ? 0 : r->second);
  }

  void release(Session& s) {
    if (!s.outstanding) return;
    if (auto it = reserved_.find(*s.outstanding); it != reserved_.end() && it->second > 0)
      --it->second;
    s.outstanding.reset();
  }

  void add_session(const std::string& id, const std::string& rater, const std::string& pkg_id) {
    auto p = std::find_if(packages_.begin(), packages_.end(),
                          [&](const TextPackage& x) { return x.id == pkg_id; });
    if (p == packages_.end()) throw Error("BadStore", "store names unknown package " + pkg_id);
    Session s;
    s.rater_id = rater;
    s.package = std::size_t(p - packages_.begin());
    sessions_[id] = std::move(s);
    session_of_rater_[rater] = id;
  }

  void commit(Session& s, const Judgement& j, bool check_passed) {
    s.rated.insert(j.text_id);
    s.handled.insert(j.text_id);
    if (j.is_attention_check) s.check_passed = check_passed;
    ++committed_.at(j.text_id);
    log_entries_.push_back(j);
  }

  void append(const nlohmann::json& rec) {
    if (!log_.is_open()) return;
    log_ << rec.dump() << '\n';
    log_.flush();
    if (!log_) throw Error("IoError", "failed to append to the judgement store");
  }

  std::string fresh_session_id() {
    static constexpr char hex[] = "0123456789abcdef";
    for (;;) {
      std::string id;
      for (int i = 0; i < 16; ++i) id += hex[rng_() % 16];
      if (!sessions_.count(id)) return id;
    }
  }

  // Rebuilds sessions and judgements from the log. A torn final line (crash
  // mid-write) is ignored; any other bad line is an error.
  void replay(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) return;
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);)
      if (!text::trim(line).empty()) lines.push_back(line);
    for (std::size_t n = 0; n < lines.size(); ++n) {
      nlohmann::json rec;
      try {
        rec = nlohmann::json::parse(lines[n]);
      } catch (const nlohmann::json::exception&) {
        if (n + 1 == lines.size()) break;
        throw Error("BadStore", "store line " + std::to_string(n + 1) + " is not JSON");
      }
      try {
        auto type = rec.at("type").get<std::string>();
        if (type == "session") {
          add_session(rec.at("session_id"), rec.at("rater_id"), rec.at("package_id"));
          ++assigned_;
        } else if (type == "judgement") {
          auto& s = session(rec.at("session_id").get<std::string>());
          auto text_id = rec.at("text_id").get<std::string>();
          auto at = item_at_.find(text_id);
          auto q = parse_label(rec.at("quality").get<std::string>());
          auto nat = parse_label(rec.at("naturalness").get<std::string>());
          if (at == item_at_.end() || !q || !nat || s.rated.count(text_id))
            throw Error("BadStore", "store line " + std::to_string(n + 1) + " is inconsistent");
          const auto& item = packages_[at->second.first].items[at->second.second];
          Judgement j{s.rater_id, text_id, item.source, *q, *nat, item.is_attention_check,
                      rec.at("sequence_index").get<std::size_t>()};
          commit(s, j, rec.value("check_passed", true));
        }
      } catch (const nlohmann::json::exception& e) {
        throw Error("BadStore", "store line " + std::to_string(n + 1) + ": " + e.what());
      }
    }
  }

  std::vector<TextPackage> packages_;
  SurveyOptions opt_;
  std::map<std::string, std::pair<std::size_t, std::size_t>> item_at_;
  std::map<std::string, std::size_t> committed_;
  std::map<std::string, std::size_t> reserved_;
  std::map<std::string, Session> sessions_;
  std::map<std::string, std::string> session_of_rater_;
  std::vector<Judgement> log_entries_;
  std::size_t assigned_ = 0;
  std::ofstream log_;
  std::mt19937_64 rng_{std::random_device{}()};
  mutable std::shared_mutex mutex_;
};

// --------------------------------------------------------------------- HTTP

namespace detail {

inline void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, const Error& e) {
  int status = 400;
  std::string kind = e.kind();
  if (kind == "UnknownSession") status = 404;
  else if (kind == "DuplicateRating" || kind == "CapExceeded") status = 409;
  else if (kind == "IoError") status = 500;
  send_json(res, status, {{"error", kind}, {"message", e.what()}});
}

template <class F>
void guarded_handler(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    send_error(res, e);
  } catch (const nlohmann::json::exception& e) {
    send_json(res, 400, {{"error", "BadRequest"}, {"message", e.what()}});
  }
}

}  // namespace detail

// Routes:
//   POST /session {rater_id}                          -> {session_id}
//   GET  /session/{id}/next                           -> {done, item?, position, total}
//   POST /session/{id}/rating {text_id, quality, naturalness}
//   GET  /admin/progress                              -> per-text counts
//   GET  /admin/export                                -> judgement CSV
// Rater-facing payloads carry only text_id and text.
inline void install_survey_routes(httplib::Server& srv, SurveyService& svc) {
  using detail::guarded_handler;
  using detail::send_json;
  srv.Post("/session", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded_handler(res, [&] {
      auto body = nlohmann::json::parse(req.body);
      auto id = svc.open_session(body.at("rater_id").get<std::string>());
      send_json(res, 200, {{"session_id", id}});
    });
  });
  srv.Get(R"(/session/([^/]+)/next)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded_handler(res, [&] {
      auto n = svc.next_item(req.matches[1]);
      if (n.done) return send_json(res, 200, {{"done", true}});
      send_json(res, 200,
                {{"done", false},
                 {"item", {{"text_id", n.text_id}, {"text", n.text}}},
                 {"position", n.position},
                 {"total", n.total}});
    });
  });
  srv.Post(R"(/session/([^/]+)/rating)",
           [&svc](const httplib::Request& req, httplib::Response& res) {
             guarded_handler(res, [&] {
               auto body = nlohmann::json::parse(req.body);
               auto q = parse_label(body.at("quality").get<std::string>());
               auto n = parse_label(body.at("naturalness").get<std::string>());
               if (!q || !n) throw Error("BadRequest", "labels must be 'very bad' .. 'very good'");
               auto ack =
                   svc.submit_rating(req.matches[1], body.at("text_id").get<std::string>(), *q, *n);
               send_json(res, 200,
                         {{"status", "ok"},
                          {"text_id", ack.text_id},
                          {"sequence_index", ack.sequence_index}});
             });
           });
  srv.Get("/admin/progress", [&svc](const httplib::Request&, httplib::Response& res) {
    auto p = svc.progress();
    std::size_t below = 0, at_cap = 0, total = 0;
    for (const auto& [id, c] : p) {
      below += c < 3;
      at_cap += c >= svc.cap();
      total += c;
    }
    send_json(res, 200,
              {{"texts", p},
               {"judgements", total},
               {"below_minimum", below},
               {"at_cap", at_cap},
               {"cap", svc.cap()}});
  });
  srv.Get("/admin/export", [&svc](const httplib::Request&, httplib::Response& res) {
    std::ostringstream os;
    svc.export_csv(os);
    res.set_content(os.str(), "text/csv");
  });
}

}  // namespace kg2t
