// kg2t: command-line front end for the generation and evaluation pipeline.
//
// Exit status: 0 on success, 1 when the library reports an error, and CLI11's
// own codes for usage errors.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "kg2t/faithfulness.hpp"
#include "kg2t/gen_file.hpp"
#include "kg2t/grammar_eval.hpp"
#include "kg2t/grammar_mock.hpp"
#include "kg2t/judgements.hpp"
#include "kg2t/markov_engine.hpp"
#include "kg2t/survey.hpp"
#include "kg2t/template_engine.hpp"

namespace fs = std::filesystem;
using namespace kg2t;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("IoError", "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("IoError", "cannot open " + path);
  return in;
}

// Writes to `path`, or to stdout when it is empty or "-".
template <class F>
void with_output(const std::string& path, F&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    return;
  }
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw Error("IoError", "cannot write " + path);
  write(out);
  if (!out) throw Error("IoError", "write failed for " + path);
}

std::set<std::string> parse_list(const std::string& s) {
  std::set<std::string> out;
  if (text::trim(s).empty()) return out;
  for (const auto& p : text::split(s, ",")) out.insert(std::string(text::trim(p)));
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& p : text::split(s, ",")) {
    auto t = std::string(text::trim(p));
    if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; }))
      throw SizeMismatch("'" + t + "' is not a package size");
    out.push_back(std::stoul(t));
  }
  return out;
}

volatile std::sig_atomic_t g_stop = 0;

// ------------------------------------------------------------------ commands

struct SplitArgs {
  std::string input, ratios = "60,30,10", out_dir;
  std::uint64_t seed = 0;
};

void run_split(const SplitArgs& a) {
  auto split = split_dataset(read_records_file(a.input), parse_ratios(a.ratios), a.seed);
  fs::create_directories(a.out_dir);
  for (auto [name, part] : {std::pair{"train", &split.train}, {"validation", &split.validation},
                            {"test", &split.test}}) {
    with_output((fs::path(a.out_dir) / (std::string(name) + ".jsonl")).string(),
                [&](std::ostream& os) { write_records(os, *part); });
    std::cout << name << '\t' << part->size() << '\n';
  }
}

struct TrainArgs {
  std::string train, out;
  std::size_t order = 2;
};

void run_train(const TrainArgs& a) {
  auto pairs = read_reference_pairs_file(a.train);
  if (pairs.empty()) throw EmptyInput("no training pairs in " + a.train);
  auto planner = train_planner(planner_sequences(pairs), a.order);
  auto transducer = train_transducer(pairs);
  save_model(a.out, planner, transducer);
  std::cout << "trained on " << pairs.size() << " pairs, order " << a.order << " -> " << a.out << '\n';
}

struct GenerateArgs {
  std::string engine = "template", templates, model, input, out, lexicon, id_prefix;
  bool dedupe = false;
};

void run_generate(const GenerateArgs& a) {
  auto records = read_records_file(a.input);
  const bool markov = a.engine == "markov";
  const auto source = markov ? TextSource::TML : TextSource::TT;
  const std::string prefix = a.id_prefix.empty() ? std::string(to_string(source)) : a.id_prefix;

  std::optional<TemplateLibrary> lib;
  std::optional<Model> model;
  std::optional<Lexicon> lex;
  TemplateOptions topt;
  if (markov) {
    if (a.model.empty()) throw Error("BadArgument", "--engine markov needs --model");
    model = load_model(a.model);
  } else {
    if (a.templates.empty()) throw Error("BadArgument", "--engine template needs --templates");
    lib = parse_template_library(slurp(a.templates));
    topt.dedupe_list_values = a.dedupe;
    if (!a.lexicon.empty()) {
      auto in = open_in(a.lexicon);
      lex = Lexicon::parse(in);
      topt.lexicon = &*lex;
    }
  }

  std::vector<GenEntry> entries;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    GeneratedText g;
    try {
      g = markov ? generate_datadriven_text(model->planner, model->transducer, r)
                 : generate_template_text(r, *lib, topt);
    } catch (const Error& e) {
      throw Error(e.kind(), "record " + std::to_string(i + 1) + " (" + r.name_id + "): " + e.what());
    }
    entries.push_back({prefix + std::to_string(i + 1), source, r.name_id, std::move(g.text),
                       std::move(g.trace), std::nullopt});
  }
  with_output(a.out, [&](std::ostream& os) { write_gen_entries(os, entries); });
}

struct FaithArgs {
  std::string gen, kb, out;
  std::optional<std::string> ignore;
  bool confirmed_only = false;
};

void run_faithfulness(const FaithArgs& a) {
  CountOptions opt;
  if (a.ignore) opt.ignore = parse_list(*a.ignore);
  opt.confirmed_only = a.confirmed_only;
  auto rows = score_faithfulness(read_gen_file(a.gen), read_records_file(a.kb), opt);
  with_output(a.out, [&](std::ostream& os) { write_faithfulness_csv(os, rows); });
  if (a.out.empty() || a.out == "-") return;
  std::map<SlotErrorCategory, std::size_t> tally;
  for (const auto& r : rows) ++tally[r.report.category];
  for (const auto& [c, n] : tally) std::cout << to_string(c) << '\t' << n << '\n';
}

struct GrammarArgs {
  std::string gen, endpoint = "http://localhost:8081/v2/check", rules, out;
  std::size_t in_flight = 4;
};

void run_grammar(const GrammarArgs& a) {
  auto entries = read_gen_file(a.gen);
  auto rules = a.rules.empty() ? default_classification_rules()
                               : parse_classification_rules(slurp(a.rules));
  std::vector<std::pair<std::string, std::string>> batch;
  for (const auto& e : entries) batch.push_back({e.text_id, e.text});
  auto matches = check_texts(batch, a.endpoint, a.in_flight);
  std::vector<VerifiedError> all;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto v = review_candidates(matches[i], entries[i].text, entries[i].source, rules);
    all.insert(all.end(), v.begin(), v.end());
  }
  with_output(a.out, [&](std::ostream& os) { write_verification_csv(os, all); });
  if (a.out.empty() || a.out == "-") return;
  std::size_t verified = 0;
  for (const auto& e : all) verified += e.verified;
  std::cout << all.size() << " candidates, " << verified << " verified by default\n";
}

struct AnalyzeArgs {
  std::string judgements, faith, grammar, checks, packages, report, good_rule = "majority";
  std::size_t negative_threshold = 2;
  bool keep_constant = false;
};

void run_analyze(const AnalyzeArgs& a) {
  auto jin = open_in(a.judgements);
  auto js = read_judgements_csv(jin);

  AttentionKey key;
  if (!a.checks.empty()) {
    auto in = open_in(a.checks);
    key = read_attention_key(in);
  }
  if (!a.packages.empty())
    for (auto& [id, e] : attention_key_of(read_packages_file(a.packages))) key[id] = e;
  if (key.empty()) throw Error("BadArgument", "analyze needs --checks or --packages");

  std::vector<FaithfulnessRow> faith;
  if (!a.faith.empty()) {
    auto in = open_in(a.faith);
    faith = read_faithfulness_csv(in);
  }
  std::vector<VerifiedError> grammar;
  if (!a.grammar.empty()) {
    std::map<std::string, TextSource> sources;
    for (const auto& j : js) sources.emplace(j.text_id, j.source);
    auto in = open_in(a.grammar);
    grammar = read_verification_csv(in, sources);
  }

  AnalysisOptions opt;
  opt.negative_threshold = a.negative_threshold;
  opt.filter.exclude_constant = !a.keep_constant;
  opt.good_rule = a.good_rule == "mean" ? GoodRule::MeanThreshold : GoodRule::SquashedMajority;
  auto rep = analyze(js, key, faith, grammar, opt);
  with_output(a.report, [&](std::ostream& os) { os << rep.dump(2) << '\n'; });
}

struct PackageArgs {
  std::vector<std::string> gen;
  std::string sizes, out, key_out;
  std::uint64_t seed = 0;
};

void run_package(const PackageArgs& a) {
  std::vector<LabeledText> texts;
  for (const auto& path : a.gen)
    for (auto& e : read_gen_file(path)) texts.push_back({e.text_id, e.source, std::move(e.text)});
  auto pkgs = build_packages(texts, parse_sizes(a.sizes), a.seed);
  with_output(a.out, [&](std::ostream& os) { os << packages_to_json(pkgs).dump(2) << '\n'; });
  if (!a.key_out.empty())
    with_output(a.key_out, [&](std::ostream& os) {
      os << "text_id,quality,naturalness\n";
      for (const auto& [id, e] : attention_key_of(pkgs))
        os << id << ',' << to_string(e.quality) << ',' << to_string(e.naturalness) << '\n';
    });
}

struct ServeArgs {
  std::string packages, store, host = "0.0.0.0";
  int port = 8080;
  std::size_t cap = 20;
};

void run_serve(const ServeArgs& a) {
  SurveyOptions opt;
  opt.cap = a.cap;
  if (!a.store.empty()) opt.store = a.store;
  SurveyService svc(read_packages_file(a.packages), opt);
  httplib::Server srv;
  install_survey_routes(srv, svc);
  int port = a.port == 0 ? srv.bind_to_any_port(a.host) : (srv.bind_to_port(a.host, a.port) ? a.port : -1);
  if (port < 0) throw Error("IoError", "cannot bind " + a.host + ":" + std::to_string(a.port));
  std::cout << "listening on " << a.host << ':' << port << std::endl;
  std::thread watcher([&srv] {
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    srv.stop();
  });
  srv.listen_after_bind();
  g_stop = 1;
  watcher.join();
}

struct MockArgs {
  std::string recordings, host = "127.0.0.1";
  int port = 8081;
};

void run_mock(const MockArgs& a) {
  MockChecker mock(read_recordings(a.recordings));
  int port = mock.start(a.host, a.port);
  std::cout << "mock checker on http://" << a.host << ':' << port << "/v2/check" << std::endl;
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  mock.stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-graph-to-text generation and evaluation workbench"};
  app.require_subcommand(1);
  std::function<void()> action;

  SplitArgs split;
  auto* s = app.add_subcommand("split", "Seeded train/validation/test split of a record file");
  s->add_option("--input", split.input, "Records, one JSON object per line")->required();
  s->add_option("--ratios", split.ratios, "Integer percentages summing to 100")->capture_default_str();
  s->add_option("--seed", split.seed)->capture_default_str();
  s->add_option("--out-dir", split.out_dir)->required();
  s->callback([&] { action = [&] { run_split(split); }; });

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train the data-driven planner and transducer");
  t->add_option("--train", train.train, "Records with reference texts")->required();
  t->add_option("--order", train.order, "Planner order")->capture_default_str()->check(CLI::Range(1, 6));
  t->add_option("--out", train.out, "Model directory")->required();
  t->callback([&] { action = [&] { run_train(train); }; });

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Generate one text per record");
  g->add_option("--engine", gen.engine)->check(CLI::IsMember({"template", "markov"}))->capture_default_str();
  g->add_option("--templates", gen.templates, "Template library (template engine)");
  g->add_option("--model", gen.model, "Model directory (markov engine)");
  g->add_option("--lexicon", gen.lexicon, "Irregular verb table replacing the built-in one");
  g->add_flag("--dedupe-lists", gen.dedupe, "Collapse repeated values in list placeholders");
  g->add_option("--id-prefix", gen.id_prefix, "Text id prefix (default: TT or TML)");
  g->add_option("--input", gen.input, "Records")->required();
  g->add_option("--out", gen.out, "Generation file (JSONL); stdout when omitted");
  g->callback([&] { action = [&] { run_generate(gen); }; });

  FaithArgs faith;
  auto* f = app.add_subcommand("faithfulness", "Count dropped, hallucinated and repeated slots");
  f->add_option("--gen", faith.gen, "Generation file")->required();
  f->add_option("--kb", faith.kb, "Records the texts were generated from")->required();
  f->add_option("--ignore", faith.ignore, "Comma-separated properties excluded from counting");
  f->add_flag("--confirmed-only", faith.confirmed_only, "Count only reviewed hallucinations");
  f->add_option("--out", faith.out, "CSV; stdout when omitted");
  f->callback([&] { action = [&] { run_faithfulness(faith); }; });

  GrammarArgs gram;
  auto* gr = app.add_subcommand("grammar", "Check texts against a LanguageTool-compatible endpoint");
  gr->add_option("--gen", gram.gen, "Generation file")->required();
  gr->add_option("--endpoint", gram.endpoint)->capture_default_str();
  gr->add_option("--rules", gram.rules, "Classification rules (JSON) replacing the defaults");
  gr->add_option("--in-flight", gram.in_flight, "Concurrent requests")->capture_default_str();
  gr->add_option("--out", gram.out, "Verification CSV; stdout when omitted");
  gr->callback([&] { action = [&] { run_grammar(gram); }; });

  AnalyzeArgs an;
  auto* a = app.add_subcommand("analyze", "Filter raters and compute the summary statistics");
  a->add_option("--judgements", an.judgements, "Judgement CSV")->required();
  a->add_option("--faith", an.faith, "Faithfulness CSV");
  a->add_option("--grammar", an.grammar, "Verification CSV");
  a->add_option("--checks", an.checks, "Attention key CSV (text_id, quality, naturalness)");
  a->add_option("--packages", an.packages, "Packages file to take the attention key from");
  a->add_option("--good-rule", an.good_rule, "Per-text good/bad verdict")
      ->check(CLI::IsMember({"majority", "mean"}))
      ->capture_default_str();
  a->add_option("--negative-threshold", an.negative_threshold)->capture_default_str();
  a->add_flag("--keep-constant", an.keep_constant, "Flag constant raters without excluding them");
  a->add_option("--report", an.report, "JSON report; stdout when omitted");
  a->callback([&] { action = [&] { run_analyze(an); }; });

  PackageArgs pkg;
  auto* p = app.add_subcommand("package", "Deal generated texts into survey packages");
  p->add_option("--gen", pkg.gen, "Generation files")->required()->expected(1, -1);
  p->add_option("--sizes", pkg.sizes, "Comma-separated package sizes")->required();
  p->add_option("--seed", pkg.seed)->capture_default_str();
  p->add_option("--out", pkg.out, "Packages JSON; stdout when omitted");
  p->add_option("--key-out", pkg.key_out, "Also write the attention key CSV");
  p->callback([&] { action = [&] { run_package(pkg); }; });

  ServeArgs serve;
  auto* sv = app.add_subcommand("serve", "Run the survey HTTP service");
  sv->add_option("--packages", serve.packages)->required();
  sv->add_option("--port", serve.port, "0 picks a free port")->capture_default_str();
  sv->add_option("--host", serve.host)->capture_default_str();
  sv->add_option("--store", serve.store, "Append-only judgement log, replayed on start");
  sv->add_option("--cap", serve.cap, "Judgements per text")->capture_default_str();
  sv->callback([&] { action = [&] { run_serve(serve); }; });

  MockArgs mock;
  auto* m = app.add_subcommand("mock-checker", "Serve recorded grammar checker responses");
  m->add_option("--recordings", mock.recordings, "JSON object mapping text to response")->required();
  m->add_option("--port", mock.port, "0 picks a free port")->capture_default_str();
  m->add_option("--host", mock.host)->capture_default_str();
  m->callback([&] { action = [&] { run_mock(mock); }; });

  CLI11_PARSE(app, argc, argv);

  std::signal(SIGINT, [](int) { g_stop = 1; });
  std::signal(SIGTERM, [](int) { g_stop = 1; });
  try {
    action();
  } catch (const Error& e) {
    std::cerr << "kg2t: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "kg2t: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
