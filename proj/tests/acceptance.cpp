// Acceptance run: one PASS/FAIL line per criterion. Criterion 10 needs the
// public case-law corpus (CASEHOLD_FULL_CORPUS=<jsonl>) and never fails the run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "casehold/builder.hpp"
#include "casehold/corpus.hpp"
#include "casehold/metrics.hpp"
#include "casehold/pretrain.hpp"
#include "casehold/segment.hpp"
#include "casehold/tfidf.hpp"
#include "fixtures.hpp"
#include "pipeline.hpp"

#ifdef CASEHOLD_HAVE_BOOST
#include <boost/math/distributions/students_t.hpp>
#endif

using namespace casehold;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  std::vector<std::string> failures;
  std::string detail;

  void expect(bool ok, const std::string& what) {
    if (!ok && failures.size() < 10) failures.push_back(what);
  }
  bool passed() const { return failures.empty(); }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << std::fixed << v;
  return s.str();
}

const std::vector<CaseDecision>& fixture_decisions() {
  static const auto d = load_corpus(fixtures::data_dir() / "corpus_200.jsonl");
  return d;
}

Outcome extraction() {
  Outcome o;
  const auto truth = fixtures::corpus_truth();
  auto t0 = std::chrono::steady_clock::now();
  const auto& decisions = load_corpus(fixtures::data_dir() / "corpus_200.jsonl");
  CitationParser parser;
  std::size_t exact = 0, expected = 0, found = 0;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    auto cands = extract_holding_candidates(decisions[i], parser.find_citations(decisions[i].body_text));
    const auto& want = truth["decisions"][i]["holdings"];
    expected += want.size();
    found += cands.size();
    for (const auto& h : want)
      for (const auto& c : cands)
        if (c.citation_start == h["citation_start"].get<std::size_t>() &&
            c.citation_end == h["citation_end"].get<std::size_t>() &&
            c.parenthetical_start == h["parenthetical_start"].get<std::size_t>() &&
            c.parenthetical_end == h["parenthetical_end"].get<std::size_t>() &&
            c.holding_text == h["holding_text"].get<std::string>())
          ++exact;
  }
  double secs = seconds_since(t0);
  o.expect(expected == 120, "fixture annotates " + std::to_string(expected) + " holdings");
  o.expect(exact == expected && found == expected, "exact " + std::to_string(exact) + ", found " + std::to_string(found));
  o.expect(secs < 10.0, "runtime " + fmt(secs, 2) + " s");
  o.detail = std::to_string(exact) + "/" + std::to_string(expected) + " exact, " + fmt(secs, 3) + " s";
  return o;
}

Outcome segmentation() {
  Outcome o;
  CitationParser parser;
  std::size_t patterns = 0, straddles = 0, short_kept = 0, short_seen = 0;
  for (const auto& rec : fixtures::citation_records()) {
    std::string text = rec["text"];
    auto cites = parser.find_citations(text);
    patterns += rec["citations"].size();
    o.expect(cites.size() == rec["citations"].size(), "citation count in: " + text.substr(0, 60));
    auto spans = segment_sentences(text, cites);
    for (const auto& c : cites)
      for (const auto& s : spans) {
        bool disjoint = c.end <= s.start || c.start >= s.end;
        bool inside = c.start >= s.start && c.end <= s.end;
        if (!disjoint && !inside) ++straddles;
      }
    std::vector<std::string> got;
    for (const auto& s : spans) got.push_back(text.substr(s.start, s.end - s.start));
    o.expect(got == rec["sentences"].get<std::vector<std::string>>(), "sentences of: " + text.substr(0, 60));
    auto kept = sentences_for_text(text, parser);
    o.expect(kept == rec["kept_sentences"].get<std::vector<std::string>>(), "kept sentences of: " + text.substr(0, 60));
    for (const auto& s : spans) short_seen += s.word_count < 3;
    for (const auto& s : kept) short_kept += count_words(s) < 3;
  }
  o.expect(patterns >= 100, "only " + std::to_string(patterns) + " citation patterns");
  o.expect(straddles == 0, std::to_string(straddles) + " straddling citations");
  o.expect(short_seen > 0, "fixture has no short sentences");
  o.expect(short_kept == 0, std::to_string(short_kept) + " short sentences kept");
  o.detail = std::to_string(patterns) + " citations, " + std::to_string(straddles) + " straddle, " +
             std::to_string(short_seen) + " short sentences all removed";
  return o;
}

Outcome dataset_validity() {
  Outcome o;
  CitationParser parser;
  BuilderConfig cfg;
  const auto& decisions = fixture_decisions();
  auto build = build_dataset(decisions, parser, cfg, 2);
  const auto truth = fixtures::corpus_truth();

  std::vector<std::pair<std::string, std::string>> pool;
  std::map<std::string, std::string> text_of;
  std::map<std::string, std::unordered_set<std::string>> own;
  for (const auto& d : truth["decisions"])
    for (const auto& h : d["holdings"]) {
      std::string text = h["holding_text"];
      auto id = holding_pool_id(text);
      if (text_of.emplace(id, text).second) pool.emplace_back(id, text);
      own[d["id"]].insert(id);
    }
  std::sort(pool.begin(), pool.end());
  o.expect(pool.size() <= 200, "pool larger than 200");
  fixtures::DenseTfidf dense(pool);

  std::size_t invalid = 0, mismatched = 0, over = 0;
  for (const auto& ex : build.examples) {
    if (validate_example(ex, 5, &build.index, 0.75)) ++invalid;
    auto q = holding_pool_id(ex.correct());
    auto want = dense.top_k(q, 4, 0.75, own[ex.decision_id]);
    if (ex.distractor_ids != want) ++mismatched;
    for (const auto& id : ex.distractor_ids)
      if (!(dense.cosine(dense.row_of(q), dense.row_of(id)) < 0.75)) ++over;
  }
  o.expect(build.examples.size() >= 100, "only " + std::to_string(build.examples.size()) + " examples");
  o.expect(invalid == 0, std::to_string(invalid) + " invalid examples");
  o.expect(mismatched == 0, std::to_string(mismatched) + " distractor sets differ from the oracle");
  o.expect(over == 0, std::to_string(over) + " distractors at or above 0.75");
  o.detail = std::to_string(build.examples.size()) + " examples valid, pool " + std::to_string(pool.size()) +
             ", oracle mismatches " + std::to_string(mismatched);
  return o;
}

Outcome tfidf_numerics() {
  Outcome o;
  static const std::vector<std::string> words = {"holding", "that", "the", "statute", "bars", "recovery", "of",
                                                 "damages", "landlord", "tenant", "lease", "breach", "notice",
                                                 "Court", "insurer", "duty", "defend", "claim", "café", "2001",
                                                 "U.S.C.", "waiver", "estoppel", "trustee's", "non-compete"};
  Rng rng(4242);
  std::vector<TfidfDocument> docs;
  std::vector<std::pair<std::string, std::string>> pairs;
  for (int i = 0; i < 50; ++i) {
    std::string text;
    for (std::size_t w = 0, n = 3 + rng.below(20); w < n; ++w) {
      auto a = rng.below(words.size()), b = rng.below(words.size());
      text += words[std::min(a, b)] + " ";
    }
    docs.push_back({"doc" + std::to_string(100 + i), text});
    pairs.emplace_back(docs.back().id, text);
  }
  auto index = TfidfIndex::build(docs);
  fixtures::DenseTfidf dense(pairs);
  double worst = 0.0;
  for (std::size_t a = 0; a < docs.size(); ++a)
    for (std::size_t b = 0; b < docs.size(); ++b)
      worst = std::max(worst, std::fabs(cosine(index.vector(index.row_of(docs[a].id)), index.vector(index.row_of(docs[b].id))) -
                                        dense.cosine(a, b)));
  o.expect(worst < 1e-9, "max deviation " + std::to_string(worst));
  std::ostringstream d;
  d << "2500 pairs, max |diff| " << worst;
  o.detail = d.str();
  return o;
}

Outcome metrics() {
  Outcome o;
  // 8 tp, 2 fp, 4 fn, 6 tn.
  std::vector<int> pred, gold;
  for (int i = 0; i < 20; ++i) {
    pred.push_back(i < 10 ? 1 : 0);
    gold.push_back(i < 8 || (i >= 10 && i < 14) ? 1 : 0);
  }
  double f1 = binary_f1(pred, gold);
  o.expect(std::fabs(f1 - 8.0 / 11.0) < 1e-12, "binary F1 " + std::to_string(f1));
  std::vector<int> g3{0, 0, 1, 1, 2, 2}, p3{0, 1, 1, 1, 2, 0};
  double m = macro_f1(p3, g3, 3);
  o.expect(std::fabs(m - 59.0 / 90.0) < 1e-12, "macro F1 " + std::to_string(m));

  std::vector<double> a{2, 4, 6, 8, 10}, b{1, 2, 3, 4, 5};
  auto t = paired_t_test(a, b);
  o.expect(std::fabs(t.t - 4.2426) < 1e-4, "t " + std::to_string(t.t));
  o.expect(t.df == 4, "df " + std::to_string(t.df));
  o.expect(std::fabs(t.p - 0.0132) < 1e-3, "p " + std::to_string(t.p));
#ifdef CASEHOLD_HAVE_BOOST
  boost::math::students_t dist(4);
  double ref = 2.0 * boost::math::cdf(boost::math::complement(dist, t.t));
  o.expect(std::fabs(t.p - ref) < 1e-9, "p differs from reference " + std::to_string(ref));
#endif

  std::vector<double> s{0.6, 0.7, 0.8};
  auto r = aggregate_folds(s);
  o.expect(std::fabs(r.half_width - 1.96 * 0.1 / std::sqrt(3.0)) < 1e-12, "half width " + std::to_string(r.half_width));
  o.detail = "F1 " + fmt(f1, 6) + ", macro " + fmt(m, 6) + ", t " + fmt(t.t) + " df " + std::to_string(t.df) +
             " p " + fmt(t.p) + ", " + r.format();
  return o;
}

Outcome ds_score() {
  Outcome o;
  LossTable g{{"a", 1.0}, {"b", 0.25}, {"c", 2.0}, {"d", 0.7}};
  LossTable d{{"a", 0.5}, {"b", 0.75}, {"c", 1.0}, {"d", 0.7}};
  auto same = ds_scores(g, g);
  o.expect(same.mean == 0.0, "identical files give mean " + std::to_string(same.mean));
  auto sign = ds_scores(LossTable{{"x", 1.0}}, LossTable{{"x", 0.5}});
  o.expect(sign.mean == 0.5, "sign check gives " + std::to_string(sign.mean));
  auto fwd = ds_scores(g, d), rev = ds_scores(d, g);
  bool anti = fwd.mean == -rev.mean && fwd.records.size() == rev.records.size();
  for (std::size_t i = 0; anti && i < fwd.records.size(); ++i) anti = fwd.records[i].ds == -rev.records[i].ds;
  o.expect(anti, "antisymmetry");
  o.detail = "identical 0, sign +" + fmt(sign.mean, 1) + ", antisymmetric";
  return o;
}

Outcome masking() {
  Outcome o;
  CitationParser parser;
  std::vector<std::vector<std::string>> docs;
  for (const auto& d : fixture_decisions()) docs.push_back(sentences_for_text(d.body_text, parser));
  auto vocab = Vocabulary::from_tokens(fixtures::test_vocab_tokens(docs));
  PretrainConfig cfg;
  cfg.seed = 7;
  std::vector<MaskedInstance> instances;
  for (cfg.dupe_factor = 1; instances.size() < 10000; ++cfg.dupe_factor)
    instances = create_pretraining_instances(docs, vocab, cfg, 2);

  std::size_t masked = 0, candidates = 0, violations = 0, not_next = 0, long_len = 0;
  for (const auto& inst : instances) {
    auto orig = inst.token_ids;
    for (std::size_t k = 0; k < inst.masked_positions.size(); ++k) orig[inst.masked_positions[k]] = inst.masked_labels[k];
    std::set<std::uint32_t> mset(inst.masked_positions.begin(), inst.masked_positions.end());
    for (const auto& g : whole_word_groups(vocab, orig)) {
      candidates += g.size();
      std::size_t hit = 0;
      for (auto p : g) hit += mset.contains(p);
      if (hit != 0 && hit != g.size()) ++violations;
    }
    masked += inst.masked_positions.size();
    not_next += inst.nsp == NspLabel::not_next;
    long_len += inst.max_len == 512;
  }
  double n = static_cast<double>(instances.size());
  double frac = static_cast<double>(masked) / static_cast<double>(candidates);
  double nsp = static_cast<double>(not_next) / n, lf = static_cast<double>(long_len) / n;
  o.expect(instances.size() >= 10000, "only " + std::to_string(instances.size()) + " instances");
  o.expect(frac >= 0.14 && frac <= 0.16, "masked fraction " + fmt(frac));
  o.expect(violations == 0, std::to_string(violations) + " partially masked words");
  o.expect(std::fabs(nsp - 0.5) <= 0.02, "not_next share " + fmt(nsp));
  o.expect(std::fabs(lf - 0.10) <= 0.01, "512 share " + fmt(lf));
  o.detail = std::to_string(instances.size()) + " instances, masked " + fmt(frac) + ", whole-word 100%, not_next " +
             fmt(nsp) + ", 128/512 " + fmt(1 - lf, 3) + "/" + fmt(lf, 3);
  return o;
}

// Two full CLI runs over the large synthetic corpus; criterion 9 inspects run A.
struct FullRuns {
  fs::path root = fixtures::process_scratch("acceptance_runs");
  fs::path a = root / "run_a", b = root / "run_b";
  std::optional<fixtures::CliRun> failure;

  FullRuns() {
    fixtures::PipelineConfig cfg;
    cfg.corpus = fixtures::big_corpus_path();
    cfg.common = {"--holdout-ratio", "0.5"};
    cfg.out = a;
    auto vocab = root / "vocab.txt";
    auto ingest = fixtures::run_cli({"ingest", "--out", a.string(), "--corpus", cfg.corpus.string(), "--holdout-ratio", "0.5"});
    auto segment = fixtures::run_cli({"segment", "--out", a.string(), "--corpus", cfg.corpus.string(), "--holdout-ratio", "0.5"});
    if (ingest.code != 0 || segment.code != 0) {
      failure = ingest.code != 0 ? ingest : segment;
      return;
    }
    fixtures::write_vocab_for(a, vocab);
    if ((failure = fixtures::run_pipeline(cfg, vocab))) return;
    cfg.out = b;
    cfg.workers = 2;
    failure = fixtures::run_pipeline(cfg, vocab);
  }
};

const FullRuns& full_runs() {
  static FullRuns runs;
  return runs;
}

Outcome determinism() {
  Outcome o;
  const auto& runs = full_runs();
  if (runs.failure) {
    o.expect(false, "pipeline failed: " + runs.failure->err.substr(0, 200));
    return o;
  }
  auto diff = fixtures::tree_differences(runs.a, runs.b);
  for (const auto& d : diff) o.expect(false, "differs: " + d);
  std::size_t files = 0;
  for (const char* stage : {"build", "variants", "pretrain-prep"}) {
    auto n = fixtures::tree_digest(runs.a / stage).size();
    o.expect(n > 0, std::string("no outputs for ") + stage);
    files += n;
  }
  o.expect(fs::exists(runs.a / "pretrain-prep" / "instances.tsv"), "no instances");
  o.detail = std::to_string(fixtures::tree_digest(runs.a).size()) + " files byte-identical across runs (" +
             std::to_string(files) + " dataset/fold/split/variant/instance files)";
  return o;
}

Outcome variant_grids() {
  Outcome o;
  const auto& runs = full_runs();
  if (runs.failure) {
    o.expect(false, "pipeline failed");
    return o;
  }
  const std::vector<std::string> sizes{"1", "10", "100", "500", "1000", "5000", "10000", "full"};
  const std::vector<std::string> words{"5", "10", "20", "40", "60", "80", "100", "full"};
  for (const auto& p : fixtures::variant_grid_problems(runs.a, sizes, words, {0, 1, 2})) o.expect(false, p);
  auto split = parse_split(read_file(runs.a / "build" / "split_seed0.tsv"));
  o.expect(split.train.size() >= 10000, "train side " + std::to_string(split.train.size()));
  o.detail = "8 train sizes x 3 seeds, 8 prompt lengths; train side " + std::to_string(split.train.size()) +
             ", test sets identical";
  return o;
}

// Returns false when the corpus is absent; deviations are reported only.
bool full_scale(std::string& detail) {
  const char* path = std::getenv("CASEHOLD_FULL_CORPUS");
  if (!path || !*path) {
    detail = "set CASEHOLD_FULL_CORPUS=<case-law jsonl> to run";
    return false;
  }
  auto out = fixtures::process_scratch("acceptance_full") / "out";
  for (const char* stage : {"ingest", "build"}) {
    auto r = fixtures::run_cli({stage, "--out", out.string(), "--corpus", path, "--workers",
                                std::to_string(workers_from_env(1))});
    if (r.code != 0) {
      detail = std::string(stage) + " failed: " + r.err.substr(0, 200);
      return true;
    }
  }
  auto m = nlohmann::json::parse(read_file(out / "build.manifest.json"))["counts"];
  double examples = m["examples"].get<double>(), words = m["mean_prompt_words"].get<double>();
  bool count_ok = std::fabs(examples / 53137.0 - 1.0) <= 0.20;
  bool words_ok = std::fabs(words / 136.0 - 1.0) <= 0.15;
  detail = std::to_string(static_cast<long>(examples)) + " examples (" + (count_ok ? "within" : "outside") +
           " 53,137 +/-20%), mean prompt " + fmt(words, 1) + " words (" + (words_ok ? "within" : "outside") +
           " 136 +/-15%)";
  return true;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const std::vector<Criterion> criteria{
      {1, "fixture extraction", extraction},   {2, "segmentation", segmentation},
      {3, "dataset validity", dataset_validity}, {4, "tfidf numerics", tfidf_numerics},
      {5, "metrics", metrics},                 {6, "ds score", ds_score},
      {7, "masking statistics", masking},      {8, "determinism", determinism},
      {9, "variant grids", variant_grids},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.expect(false, std::string("exception: ") + e.what());
    }
    std::cout << (o.passed() ? "PASS" : "FAIL") << "  criterion " << c.id << " (" << c.name << "): ";
    if (o.passed()) {
      std::cout << o.detail << '\n';
    } else {
      ++failed;
      for (std::size_t i = 0; i < o.failures.size(); ++i) std::cout << (i ? "; " : "") << o.failures[i];
      std::cout << '\n';
    }
    std::cout.flush();
  }
  std::string detail;
  bool ran = false;
  try {
    ran = full_scale(detail);
  } catch (const std::exception& e) {
    ran = true;
    detail = std::string("error: ") + e.what();
  }
  std::cout << (ran ? "REPORT" : "SKIP") << "  criterion 10 (full-scale check, conditional): " << detail << '\n';
  std::cout << (failed == 0 ? "all hard criteria passed" : std::to_string(failed) + " criteria failed") << '\n';
  return failed == 0 ? 0 : 1;
}
