// Command-line driver for the corpus pipeline. Each subcommand is one stage
// writing under --out and recording <stage>.manifest.json; a stage whose
// config and input hashes match its manifest (and whose outputs are intact)
// is skipped.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "casehold/builder.hpp"
#include "casehold/citation.hpp"
#include "casehold/corpus.hpp"
#include "casehold/csv.hpp"
#include "casehold/metrics.hpp"
#include "casehold/pretrain.hpp"
#include "casehold/util.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace casehold;

namespace {

constexpr std::string_view kToolVersion = "casehold 1";

struct Options {
  fs::path out = "casehold_out";
  std::size_t workers = 0;
  bool force = false;

  // ingest
  fs::path corpus;
  std::string cutoff;
  double holdout_ratio = 0.10;
  std::uint64_t holdout_seed = 0;
  double max_malformed = 0.01;

  // parser
  fs::path reporters, signals, abbreviations;
  bool judge_guard = false;
  std::size_t min_words = 3;

  // build
  std::size_t pre_window = 1000;
  std::size_t post_window = 60;
  std::size_t k_distractors = 4;
  double upper_threshold = 0.75;
  std::uint64_t build_seed = 0;
  std::size_t folds = 10;
  std::uint64_t fold_seed = 0;
  std::string split_seeds = "0,1,2";
  double test_ratio = 0.20;

  // variants
  std::string train_sizes = "1,10,100,500,1000,5000,10000,full";
  std::string prompt_words = "5,10,20,40,60,80,100,full";
  std::uint64_t variant_seed = 0;

  // pretrain-prep
  std::size_t vocab_sample = 0;
  std::uint64_t vocab_sample_seed = 0;
  fs::path vocab;
  std::string vocab_format = "wordpiece";
  std::size_t vocab_size = 0;
  double mask_rate = 0.15;
  double long_fraction = 0.10;
  std::size_t dupe_factor = 1;
  std::uint64_t pretrain_seed = 0;
  std::string instance_format = "tsv";
  bool cased = false;

  // eval / report
  std::string metric;
  fs::path dataset, labels, predictions, predictions_b, scores_a, scores_b, losses_general, losses_domain, results;
  int n_classes = 5;
  std::string model_a = "A", model_b = "B";
};

// ---------------------------------------------------------------------------
// Logging and errors

void log_event(std::string_view stage, std::string_view event, json fields = json::object()) {
  fields["stage"] = stage;
  fields["event"] = event;
  std::cerr << fields.dump() << '\n';
}

// ---------------------------------------------------------------------------
// Stage manifests

class Stage {
 public:
  Stage(std::string name, const Options& opt, json config) : name_(std::move(name)), opt_(opt) {
    config_ = std::move(config);
    config_["tool"] = kToolVersion;
  }

  /// Inputs take part in the config hash by content.
  void input(const std::string& role, const fs::path& path) {
    if (!fs::exists(path)) throw ConfigError(name_ + ": input '" + role + "' not found: " + path.string());
    inputs_[role] = to_hex16(fnv1a64_file(path));
  }

  fs::path dir() const { return opt_.out / name_; }
  fs::path manifest_path() const { return opt_.out / (name_ + ".manifest.json"); }

  std::string hash() const {
    json h{{"config", config_}, {"inputs", inputs_}};
    return to_hex16(fnv1a64(h.dump()));
  }

  bool up_to_date() const {
    if (opt_.force || !fs::exists(manifest_path())) return false;
    json m;
    try {
      m = json::parse(read_file(manifest_path()));
    } catch (const std::exception&) {
      return false;
    }
    if (m.value("config_hash", "") != hash()) return false;
    for (const auto& [rel, digest] : m.at("outputs").items()) {
      fs::path p = opt_.out / rel;
      if (!fs::exists(p) || to_hex16(fnv1a64_file(p)) != digest.get<std::string>()) return false;
    }
    return true;
  }

  void output(const fs::path& path) { outputs_.push_back(path); }

  void finish(json counts) {
    json outs = json::object();
    std::sort(outputs_.begin(), outputs_.end());
    for (const auto& p : outputs_) outs[fs::relative(p, opt_.out).generic_string()] = to_hex16(fnv1a64_file(p));
    json m{{"stage", name_},
           {"config", config_},
           {"config_hash", hash()},
           {"inputs", inputs_},
           {"outputs", outs},
           {"counts", counts}};
    write_file_atomic(manifest_path(), m.dump(2) + "\n");
    log_event(name_, "done", counts);
  }

 private:
  std::string name_;
  const Options& opt_;
  json config_;
  std::map<std::string, std::string> inputs_;
  std::vector<fs::path> outputs_;
};

// Streamed outputs are staged in CASEHOLD_TMPDIR when set, then moved.
class StagedFile {
 public:
  explicit StagedFile(fs::path target) : target_(std::move(target)) {
    fs::create_directories(target_.parent_path());
    const char* tmpdir = std::getenv("CASEHOLD_TMPDIR");
    fs::path base = tmpdir && *tmpdir ? fs::path(tmpdir) : target_.parent_path();
    fs::create_directories(base);
    tmp_ = base / (target_.filename().string() + ".partial");
    stream_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!stream_) throw InputError("cannot write " + tmp_.string());
  }

  std::ofstream& stream() { return stream_; }

  void commit() {
    stream_.close();
    if (!stream_) throw InputError("write failed: " + tmp_.string());
    std::error_code ec;
    fs::rename(tmp_, target_, ec);
    if (ec) {
      fs::copy_file(tmp_, target_, fs::copy_options::overwrite_existing);
      fs::remove(tmp_);
    }
  }

 private:
  fs::path target_;
  fs::path tmp_;
  std::ofstream stream_;
};

// ---------------------------------------------------------------------------
// Shared helpers

std::size_t workers(const Options& opt) { return opt.workers > 0 ? opt.workers : workers_from_env(1); }

IngestOptions ingest_options(const Options& opt) {
  IngestOptions io;
  if (!opt.cutoff.empty()) {
    try {
      io.cutoff = Date::parse(opt.cutoff);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("bad --cutoff: ") + e.what());
    }
  }
  if (!(opt.max_malformed >= 0.0 && opt.max_malformed <= 1.0))
    throw ConfigError("--max-malformed must be in [0, 1]");
  io.max_malformed_fraction = opt.max_malformed;
  return io;
}

json ingest_config(const Options& opt) {
  return {{"cutoff", opt.cutoff}, {"max_malformed", opt.max_malformed}};
}

json parser_config(const Options& opt) {
  return {{"judge_guard", opt.judge_guard}, {"min_words", opt.min_words}};
}

void parser_inputs(Stage& stage, const Options& opt) {
  if (!opt.reporters.empty()) stage.input("reporters", opt.reporters);
  if (!opt.signals.empty()) stage.input("signals", opt.signals);
  if (!opt.abbreviations.empty()) stage.input("abbreviations", opt.abbreviations);
}

CitationParser make_parser(const Options& opt) {
  ParserOptions po;
  po.judge_name_guard = opt.judge_guard;
  return CitationParser(opt.reporters.empty() ? ReporterLexicon::builtin() : ReporterLexicon::load(opt.reporters),
                        opt.signals.empty() ? SignalLexicon::builtin() : SignalLexicon::load(opt.signals),
                        opt.abbreviations.empty() ? AbbreviationLexicon::builtin()
                                                  : AbbreviationLexicon::load(opt.abbreviations),
                        po);
}

void require_corpus(const Options& opt) {
  if (opt.corpus.empty()) throw ConfigError("--corpus is required");
  if (!fs::exists(opt.corpus)) throw ConfigError("corpus not found: " + opt.corpus.string());
}

fs::path partition_path(const Options& opt) { return opt.out / "ingest" / "partition.txt"; }

CorpusPartition load_partition(const Options& opt) {
  auto path = partition_path(opt);
  if (!fs::exists(path)) throw ConfigError("no partition at " + path.string() + "; run ingest first");
  return parse_partition(read_file(path));
}

/// Decisions of the corpus whose ids satisfy `keep`, in file order.
template <typename Keep>
std::vector<CaseDecision> read_decisions(const Options& opt, Keep keep) {
  CorpusReader reader(opt.corpus, ingest_options(opt));
  std::vector<CaseDecision> out;
  while (auto d = reader.next())
    if (keep(d->decision_id)) out.push_back(std::move(*d));
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (auto item : split(text, ',')) {
    auto v = parse_int(item);
    if (v < 0) throw ConfigError("seeds must be non-negative");
    seeds.push_back(static_cast<std::uint64_t>(v));
  }
  return seeds;
}

void write_output(Stage& stage, const fs::path& path, std::string_view contents) {
  write_file_atomic(path, contents);
  stage.output(path);
}

// ---------------------------------------------------------------------------
// Stages

void run_ingest(const Options& opt) {
  require_corpus(opt);
  if (!(opt.holdout_ratio > 0.0 && opt.holdout_ratio < 1.0)) throw ConfigError("--holdout-ratio must be in (0, 1)");
  auto io = ingest_options(opt);
  json config = ingest_config(opt);
  config["holdout_ratio"] = opt.holdout_ratio;
  config["holdout_seed"] = opt.holdout_seed;
  Stage stage("ingest", opt, config);
  stage.input("corpus", opt.corpus);
  if (stage.up_to_date()) {
    log_event("ingest", "up_to_date");
    std::cout << "ingest: up to date\n";
    return;
  }

  CorpusReader reader(opt.corpus, io);
  CorpusStats stats;
  std::vector<std::string> ids;
  while (auto d = reader.next()) {
    stats.add(*d);
    ids.push_back(d->decision_id);
  }
  if (ids.size() < 2) throw InputError("corpus has fewer than 2 usable decisions");
  auto partition = holdout_split(ids, opt.holdout_ratio, opt.holdout_seed);

  json stats_json{{"decisions", stats.decision_count},
                  {"total_bytes", stats.total_bytes},
                  {"per_court", stats.per_court},
                  {"records_read", reader.records_read()},
                  {"malformed", reader.malformed()},
                  {"skipped_by_date", reader.skipped_by_date()},
                  {"pretrain", partition.pretrain_ids.size()},
                  {"holdout", partition.holdout_ids.size()}};
  std::string diagnostics;
  for (const auto& d : reader.diagnostics())
    diagnostics += json{{"line", d.line}, {"byte_offset", d.byte_offset}, {"message", d.message}}.dump() + "\n";

  write_output(stage, stage.dir() / "partition.txt", format_partition(partition));
  write_output(stage, stage.dir() / "stats.json", stats_json.dump(2) + "\n");
  write_output(stage, stage.dir() / "diagnostics.jsonl", diagnostics);
  stage.finish({{"decisions", stats.decision_count},
                {"malformed", reader.malformed()},
                {"skipped_by_date", reader.skipped_by_date()},
                {"pretrain", partition.pretrain_ids.size()},
                {"holdout", partition.holdout_ids.size()}});
}

void run_segment(const Options& opt) {
  require_corpus(opt);
  json config = ingest_config(opt);
  config["parser"] = parser_config(opt);
  Stage stage("segment", opt, config);
  stage.input("corpus", opt.corpus);
  stage.input("partition", partition_path(opt));
  parser_inputs(stage, opt);
  if (stage.up_to_date()) {
    log_event("segment", "up_to_date");
    std::cout << "segment: up to date\n";
    return;
  }
  auto partition = load_partition(opt);
  auto parser = make_parser(opt);

  fs::path target = stage.dir() / "sentences.txt";
  StagedFile file(target);
  CorpusReader reader(opt.corpus, ingest_options(opt));
  SentenceCorpusCounts total;
  std::vector<CaseDecision> batch;
  auto flush = [&] {
    auto c = emit_sentence_corpus(batch, partition, parser, file.stream(), opt.min_words, workers(opt));
    total.documents += c.documents;
    total.sentences += c.sentences;
    total.ignored += c.ignored;
    batch.clear();
  };
  while (auto d = reader.next()) {
    batch.push_back(std::move(*d));
    if (batch.size() == 512) flush();
  }
  flush();
  file.commit();
  stage.output(target);
  stage.finish({{"documents", total.documents}, {"sentences", total.sentences}, {"holdout_ignored", total.ignored}});
}

void run_extract(const Options& opt) {
  require_corpus(opt);
  json config = ingest_config(opt);
  config["parser"] = parser_config(opt);
  Stage stage("extract", opt, config);
  stage.input("corpus", opt.corpus);
  stage.input("partition", partition_path(opt));
  parser_inputs(stage, opt);
  if (stage.up_to_date()) {
    log_event("extract", "up_to_date");
    std::cout << "extract: up to date\n";
    return;
  }
  auto partition = load_partition(opt);
  auto parser = make_parser(opt);
  auto holdout = read_decisions(opt, [&](const std::string& id) { return partition.is_holdout(id); });

  std::vector<std::vector<HoldingCandidate>> per_decision(holdout.size());
  parallel_for(holdout.size(), workers(opt), [&](std::size_t i) {
    auto cites = parser.find_citations(holdout[i].body_text);
    per_decision[i] = extract_holding_candidates(holdout[i], cites);
  });
  std::string out = csv::format_row({"decision_id", "citation_start", "citation_end", "parenthetical_start",
                                     "parenthetical_end", "volume", "reporter", "first_page", "court", "year",
                                     "signal", "holding_text"});
  std::size_t n = 0;
  for (const auto& cands : per_decision) {
    for (const auto& c : cands) {
      const auto& s = c.citation;
      out += csv::format_row({c.decision_id, std::to_string(c.citation_start), std::to_string(c.citation_end),
                              std::to_string(c.parenthetical_start), std::to_string(c.parenthetical_end),
                              s.volume ? std::to_string(*s.volume) : "", s.reporter, std::to_string(s.first_page),
                              s.court.value_or(""), s.year ? std::to_string(*s.year) : "",
                              std::string(to_string(s.signal)), c.holding_text});
      ++n;
    }
  }
  write_output(stage, stage.dir() / "candidates.csv", out);
  stage.finish({{"holdout_decisions", holdout.size()}, {"candidates", n}});
}

BuilderConfig builder_config(const Options& opt) {
  BuilderConfig bc;
  bc.pre_window = opt.pre_window;
  bc.post_window = opt.post_window;
  bc.k_distractors = opt.k_distractors;
  bc.upper_threshold = opt.upper_threshold;
  bc.seed = opt.build_seed;
  bc.validate();
  return bc;
}

std::string split_file_name(std::uint64_t seed) { return "split_seed" + std::to_string(seed) + ".tsv"; }

void run_build(const Options& opt) {
  require_corpus(opt);
  auto bc = builder_config(opt);
  auto seeds = parse_seed_list(opt.split_seeds);
  if (opt.folds < 2) throw ConfigError("--folds must be at least 2");
  json config = ingest_config(opt);
  config["parser"] = parser_config(opt);
  config["builder"] = bc.to_json();
  config["folds"] = {{"k", opt.folds}, {"seed", opt.fold_seed}};
  config["splits"] = {{"seeds", seeds}, {"test_ratio", opt.test_ratio}};
  Stage stage("build", opt, config);
  stage.input("corpus", opt.corpus);
  stage.input("partition", partition_path(opt));
  parser_inputs(stage, opt);
  if (stage.up_to_date()) {
    log_event("build", "up_to_date");
    std::cout << "build: up to date\n";
    return;
  }
  auto partition = load_partition(opt);
  auto parser = make_parser(opt);
  auto holdout = read_decisions(opt, [&](const std::string& id) { return partition.is_holdout(id); });
  auto result = build_dataset(holdout, parser, bc, workers(opt));

  std::vector<std::string> ids;
  for (const auto& ex : result.examples) ids.push_back(ex.example_id);
  auto folds = make_cv_folds(ids, opt.folds, opt.fold_seed);
  auto splits = make_splits(ids, seeds, opt.test_ratio);

  for (const auto& s : result.skips)
    log_event("build", "skip", {{"decision_id", s.decision_id}, {"citation_start", s.citation_start}, {"reason", s.reason}});

  write_output(stage, stage.dir() / "dataset.csv", format_dataset(result.examples));
  write_output(stage, stage.dir() / "dataset_manifest.json", result.manifest(bc).dump(2) + "\n");
  write_output(stage, stage.dir() / "holding_index.tfidf", result.index.serialize());
  write_output(stage, stage.dir() / "folds.tsv", format_folds(folds));
  for (const auto& s : splits) write_output(stage, stage.dir() / split_file_name(s.seed), format_split(s));
  auto m = result.manifest(bc);
  stage.finish({{"examples", result.examples.size()},
                {"candidates", result.candidates},
                {"skipped", result.skips.size()},
                {"skips_by_reason", m["skips_by_reason"]},
                {"mean_prompt_words", m["mean_prompt_words"]}});
}

void run_variants(const Options& opt) {
  VariantConfig vc;
  vc.train_sizes = parse_grid(opt.train_sizes);
  vc.prompt_words = parse_grid(opt.prompt_words);
  vc.validate();
  auto seeds = parse_seed_list(opt.split_seeds);
  json config{{"train_sizes", opt.train_sizes}, {"prompt_words", opt.prompt_words},
              {"variant_seed", opt.variant_seed}, {"split_seeds", seeds}};
  Stage stage("variants", opt, config);
  fs::path build_dir = opt.out / "build";
  stage.input("dataset", build_dir / "dataset.csv");
  for (auto seed : seeds) stage.input("split_" + std::to_string(seed), build_dir / split_file_name(seed));

  std::vector<SplitAssignment> splits;
  for (auto seed : seeds) splits.push_back(parse_split(read_file(build_dir / split_file_name(seed))));
  for (const auto& s : splits)
    for (const auto& n : vc.train_sizes)
      if (n && *n > s.train.size())
        throw ConfigError("train size " + std::to_string(*n) + " exceeds the " + std::to_string(s.train.size()) +
                          "-example train side of split seed " + std::to_string(s.seed));
  if (stage.up_to_date()) {
    log_event("variants", "up_to_date");
    std::cout << "variants: up to date\n";
    return;
  }

  auto examples = parse_dataset(read_file(build_dir / "dataset.csv"));
  std::size_t split_files = 0;
  for (const auto& n : vc.train_sizes) {
    for (const auto& s : splits) {
      auto sub = subsample_train(s, n, opt.variant_seed ^ mix64(s.seed));
      write_output(stage, stage.dir() / "train_volume" / ("size_" + grid_label(n)) / split_file_name(s.seed),
                   format_split(sub));
      ++split_files;
    }
  }
  for (const auto& x : vc.prompt_words) {
    auto variant = truncate_prompts(examples, x);
    write_output(stage, stage.dir() / "prompt_words" / ("x_" + grid_label(x) + ".csv"), format_dataset(variant));
  }
  stage.finish({{"train_volume_sizes", vc.train_sizes.size()},
                {"train_volume_split_files", split_files},
                {"prompt_datasets", vc.prompt_words.size()}});
}

void run_pretrain_prep(const Options& opt) {
  if (opt.vocab_sample == 0 && opt.vocab.empty())
    throw ConfigError("pretrain-prep needs --vocab-sample and/or --vocab");
  if (opt.vocab_format != "wordpiece" && opt.vocab_format != "sentencepiece")
    throw ConfigError("--vocab-format must be wordpiece or sentencepiece");
  if (opt.instance_format != "tsv" && opt.instance_format != "binary")
    throw ConfigError("--instance-format must be tsv or binary");
  PretrainConfig pc;
  pc.mask_rate = opt.mask_rate;
  pc.long_fraction = opt.long_fraction;
  pc.dupe_factor = opt.dupe_factor;
  pc.seed = opt.pretrain_seed;
  pc.lowercase = !opt.cased;
  pc.validate();

  json config{{"vocab_sample", opt.vocab_sample},   {"vocab_sample_seed", opt.vocab_sample_seed},
              {"vocab_format", opt.vocab_format},   {"vocab_size", opt.vocab_size},
              {"mask_rate", pc.mask_rate},          {"long_fraction", pc.long_fraction},
              {"dupe_factor", pc.dupe_factor},      {"seed", pc.seed},
              {"lowercase", pc.lowercase},          {"instance_format", opt.instance_format}};
  Stage stage("pretrain-prep", opt, config);
  fs::path sentences = opt.out / "segment" / "sentences.txt";
  stage.input("sentences", sentences);
  if (!opt.vocab.empty()) stage.input("vocab", opt.vocab);
  if (stage.up_to_date()) {
    log_event("pretrain-prep", "up_to_date");
    std::cout << "pretrain-prep: up to date\n";
    return;
  }

  json counts = json::object();
  if (opt.vocab_sample > 0) {
    fs::path target = stage.dir() / "vocab_sample.txt";
    StagedFile file(target);
    counts["vocab_sample"] = sample_vocab_sentences(sentences, opt.vocab_sample, opt.vocab_sample_seed, file.stream());
    file.commit();
    stage.output(target);
  }
  if (!opt.vocab.empty()) {
    std::optional<std::size_t> expected;
    if (opt.vocab_size > 0) expected = opt.vocab_size;
    auto vocab = opt.vocab_format == "wordpiece" ? Vocabulary::load(opt.vocab, expected)
                                                 : Vocabulary::from_sentencepiece(read_file(opt.vocab), expected);
    write_output(stage, stage.dir() / "vocab.txt", vocab.serialize());
    auto docs = parse_sentence_corpus(read_file(sentences));
    auto instances = create_pretraining_instances(docs, vocab, pc, workers(opt));
    if (opt.instance_format == "tsv") {
      write_output(stage, stage.dir() / "instances.tsv", format_instances_tsv(instances));
    } else {
      write_output(stage, stage.dir() / "instances.bin", format_instances_binary(instances));
    }
    std::size_t long_count = 0, not_next = 0;
    for (const auto& inst : instances) {
      long_count += inst.max_len == pc.long_max_len;
      not_next += inst.nsp == NspLabel::not_next;
    }
    counts["instances"] = instances.size();
    counts["long_instances"] = long_count;
    counts["not_next"] = not_next;
  }
  stage.finish(counts);
}

// Gold labels keyed by example id, from --labels (example_id,label) or --dataset.
std::pair<std::vector<std::string>, std::vector<int>> gold_labels(const Options& opt) {
  std::vector<std::string> ids;
  std::vector<int> labels;
  if (!opt.labels.empty()) {
    for (auto& [id, label] : parse_predictions(read_file(opt.labels))) {
      ids.push_back(id);
      labels.push_back(label);
    }
  } else {
    fs::path path = opt.dataset.empty() ? opt.out / "build" / "dataset.csv" : opt.dataset;
    for (auto& ex : parse_dataset(read_file(path))) {
      ids.push_back(ex.example_id);
      labels.push_back(ex.label);
    }
  }
  return {ids, labels};
}

std::vector<double> read_scores(const fs::path& path) {
  auto table = csv::read_table(read_file(path));
  auto col = table.column("score");
  std::vector<double> out;
  for (const auto& row : table.rows) out.push_back(parse_double(row[col]));
  return out;
}

json report_json(const MetricReport& r) {
  return {{"scores", r.scores}, {"mean", r.mean}, {"half_width", r.half_width}, {"formatted", r.format()}};
}

void run_eval(const Options& opt) {
  static const std::map<std::string, std::vector<std::string>> kInputs{
      {"f1", {"predictions"}},
      {"macro-f1", {"predictions"}},
      {"aggregate", {"scores-a"}},
      {"ttest", {"scores-a", "scores-b"}},
      {"ds", {"losses-general", "losses-domain"}},
      {"rank-weighted-f1", {"predictions", "losses-general", "losses-domain"}},
      {"breakdown", {"predictions", "predictions-b"}},
  };
  auto it = kInputs.find(opt.metric);
  if (it == kInputs.end()) throw ConfigError("unknown --metric '" + opt.metric + "'");
  const std::map<std::string, fs::path> paths{{"predictions", opt.predictions},
                                              {"predictions-b", opt.predictions_b},
                                              {"scores-a", opt.scores_a},
                                              {"scores-b", opt.scores_b},
                                              {"losses-general", opt.losses_general},
                                              {"losses-domain", opt.losses_domain}};
  json config{{"metric", opt.metric}, {"n_classes", opt.n_classes}, {"model_a", opt.model_a}, {"model_b", opt.model_b}};
  Stage stage("eval-" + opt.metric, opt, config);
  for (const auto& role : it->second) {
    if (paths.at(role).empty()) throw ConfigError("--metric " + opt.metric + " needs --" + role);
    stage.input(role, paths.at(role));
  }
  bool needs_gold = it->second.front().starts_with("predictions");
  if (needs_gold) {
    if (!opt.labels.empty()) {
      stage.input("labels", opt.labels);
    } else {
      stage.input("dataset", opt.dataset.empty() ? opt.out / "build" / "dataset.csv" : opt.dataset);
    }
    if (opt.metric == "rank-weighted-f1" && !opt.predictions_b.empty()) stage.input("predictions-b", opt.predictions_b);
  }
  if (stage.up_to_date()) {
    log_event(stage.dir().filename().string(), "up_to_date");
    std::cout << "eval " << opt.metric << ": up to date\n";
    return;
  }

  const int n_classes = opt.metric == "f1" ? 2 : opt.n_classes;
  json result{{"metric", opt.metric}};
  fs::path out_file = stage.dir() / "result.json";
  std::vector<std::string> ids;
  std::vector<int> gold;
  if (needs_gold) std::tie(ids, gold) = gold_labels(opt);
  auto preds = [&](const fs::path& p) {
    try {
      return align_predictions(ids, parse_predictions(read_file(p)), n_classes);
    } catch (const std::invalid_argument& e) {
      throw InputError(e.what());
    }
  };

  if (opt.metric == "f1") {
    result["f1"] = binary_f1(preds(opt.predictions), gold);
  } else if (opt.metric == "macro-f1") {
    result["macro_f1"] = macro_f1(preds(opt.predictions), gold, n_classes);
  } else if (opt.metric == "aggregate") {
    result["report"] = report_json(aggregate_folds(read_scores(opt.scores_a)));
  } else if (opt.metric == "ttest") {
    auto a = read_scores(opt.scores_a);
    auto b = read_scores(opt.scores_b);
    auto t = paired_t_test(a, b);
    result["t"] = std::isinf(t.t) ? json(t.t > 0 ? "inf" : "-inf") : json(t.t);
    result["df"] = t.df;
    result["p"] = t.p;
    result["degenerate"] = t.degenerate;
    result["significant_0.05"] = t.significant(0.05);
    result["significant_0.001"] = t.significant(0.001);
  } else if (opt.metric == "ds" || opt.metric == "rank-weighted-f1") {
    DsResult ds;
    try {
      ds = ds_scores(parse_losses(read_file(opt.losses_general)), parse_losses(read_file(opt.losses_domain)));
    } catch (const std::invalid_argument& e) {
      throw InputError(e.what());
    }
    if (opt.metric == "ds") {
      write_output(stage, stage.dir() / "ds.csv", format_ds(ds));
      result["mean_ds"] = ds.mean;
      result["examples"] = ds.records.size();
    } else {
      std::unordered_map<std::string, double> by_id;
      for (const auto& r : ds.records) by_id.emplace(r.example_id, r.ds);
      std::vector<std::string> model_names{opt.model_a};
      std::vector<std::vector<int>> model_preds{preds(opt.predictions)};
      if (!opt.predictions_b.empty()) {
        model_names.push_back(opt.model_b);
        model_preds.push_back(preds(opt.predictions_b));
      }
      DomainMatchRow unweighted{"Unweighted", {}}, weighted{"Weighted", {}};
      for (const auto& p : model_preds) {
        unweighted.per_model.push_back(macro_f1(p, gold, n_classes));
        try {
          weighted.per_model.push_back(rank_weighted_f1(ids, p, gold, by_id, n_classes));
        } catch (const std::invalid_argument& e) {
          throw InputError(e.what());
        }
      }
      result["models"] = model_names;
      result["unweighted"] = unweighted.per_model;
      result["weighted"] = weighted.per_model;
      if (model_names.size() == 2) {
        std::vector<DomainMatchRow> rows{unweighted, weighted};
        write_output(stage, stage.dir() / "domain_match.txt", format_domain_match_table(model_names, rows));
      }
    }
  } else if (opt.metric == "breakdown") {
    auto b = error_breakdown(preds(opt.predictions), preds(opt.predictions_b), gold);
    auto names = ErrorBreakdown::labels(opt.model_a, opt.model_b);
    result["quadrants"] = json::array({{{"label", names[0]}, {"percent", b.both_correct}},
                                       {{"label", names[1]}, {"percent", b.only_a}},
                                       {{"label", names[2]}, {"percent", b.only_b}},
                                       {{"label", names[3]}, {"percent", b.neither}}});
    result["n"] = b.n;
  }
  write_output(stage, out_file, result.dump(2) + "\n");
  std::cout << result.dump(2) << '\n';
  stage.finish({{"metric", opt.metric}});
}

void run_report(const Options& opt) {
  if (opt.results.empty()) throw ConfigError("report needs --results (columns variant, model, fold, score)");
  Stage stage("report", opt, json::object());
  stage.input("results", opt.results);
  if (stage.up_to_date()) {
    log_event("report", "up_to_date");
    std::cout << "report: up to date\n";
    return;
  }
  auto table = csv::read_table(read_file(opt.results));
  auto vcol = table.column("variant");
  auto mcol = table.column("model");
  auto fcol = table.column("fold");
  auto scol = table.column("score");
  // model -> variant -> fold -> score, variants in first-seen order
  std::vector<std::string> variant_order;
  std::map<std::string, std::map<std::string, std::map<long long, double>>> scores;
  for (const auto& row : table.rows) {
    if (std::find(variant_order.begin(), variant_order.end(), row[vcol]) == variant_order.end())
      variant_order.push_back(row[vcol]);
    auto fold = parse_int(row[fcol]);
    if (!scores[row[mcol]][row[vcol]].emplace(fold, parse_double(row[scol])).second)
      throw InputError("repeated (variant, model, fold) row for " + row[vcol] + "/" + row[mcol]);
  }
  VariantResults results;
  for (const auto& [model, by_variant] : scores) {
    for (const auto& v : variant_order) {
      auto it = by_variant.find(v);
      if (it == by_variant.end()) continue;
      std::vector<double> s;
      for (const auto& [fold, score] : it->second) s.push_back(score);
      try {
        results[model].emplace_back(v, aggregate_folds(s));
      } catch (const std::invalid_argument& e) {
        throw InputError(std::string(e.what()) + " (variant " + v + ", model " + model + ")");
      }
    }
  }
  std::string plot;
  try {
    plot = emit_plot_data(results);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  write_output(stage, stage.dir() / "plot_data.csv", plot);
  stage.finish({{"models", results.size()}, {"variants", variant_order.size()}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CaseHOLD corpus toolkit: ingest, segment, extract, build, variants, pretrain-prep, eval, report"};
  app.set_config("--config", "", "Key-value config file; command-line flags take precedence");
  app.require_subcommand(1);
  app.fallthrough();
  Options opt;

  app.add_option("--out", opt.out, "Output directory")->capture_default_str();
  app.add_option("--workers", opt.workers, "Worker threads (default: CASEHOLD_WORKERS or 1)");
  app.add_flag("--force", opt.force, "Rerun even when the stage manifest is current");

  app.add_option("--corpus", opt.corpus, "JSONL corpus of decisions");
  app.add_option("--cutoff", opt.cutoff, "Keep decisions dated on or after YYYY[-MM[-DD]]");
  app.add_option("--holdout-ratio", opt.holdout_ratio, "Share of decisions held out from pretraining")->capture_default_str();
  app.add_option("--holdout-seed", opt.holdout_seed, "Seed of the holdout partition")->capture_default_str();
  app.add_option("--max-malformed", opt.max_malformed, "Abort when malformed records exceed this share")->capture_default_str();

  app.add_option("--reporters", opt.reporters, "Reporter lexicon file (one abbreviation per line)");
  app.add_option("--signals", opt.signals, "Signal lexicon file (phrase<TAB>kind)");
  app.add_option("--abbreviations", opt.abbreviations, "Abbreviation lexicon file");
  app.add_flag("--judge-guard", opt.judge_guard, "Treat '<Name>, J.' parentheticals as non-holdings");
  app.add_option("--min-words", opt.min_words, "Drop sentences with fewer words")->capture_default_str();

  app.add_option("--pre-window", opt.pre_window, "Prompt characters before the citation")->capture_default_str();
  app.add_option("--post-window", opt.post_window, "Prompt characters after the citation")->capture_default_str();
  app.add_option("--k-distractors", opt.k_distractors, "Incorrect options per example")->capture_default_str();
  app.add_option("--upper-threshold", opt.upper_threshold, "Distractor cosine ceiling (exclusive)")->capture_default_str();
  app.add_option("--build-seed", opt.build_seed, "Seed of the option shuffle")->capture_default_str();
  app.add_option("--folds", opt.folds, "Cross-validation folds")->capture_default_str();
  app.add_option("--fold-seed", opt.fold_seed, "Seed of the fold assignment")->capture_default_str();
  app.add_option("--split-seeds", opt.split_seeds, "Comma-separated train/test split seeds")->capture_default_str();
  app.add_option("--test-ratio", opt.test_ratio, "Test share of each split")->capture_default_str();

  app.add_option("--train-sizes", opt.train_sizes, "Train-volume grid (integers or 'full')")->capture_default_str();
  app.add_option("--prompt-words", opt.prompt_words, "Prompt-length grid (integers or 'full')")->capture_default_str();
  app.add_option("--variant-seed", opt.variant_seed, "Seed of train subsampling")->capture_default_str();

  app.add_option("--vocab-sample", opt.vocab_sample, "Sentences to sample for vocabulary training (0: skip)")->capture_default_str();
  app.add_option("--vocab-sample-seed", opt.vocab_sample_seed, "Seed of the vocabulary sample")->capture_default_str();
  app.add_option("--vocab", opt.vocab, "Vocabulary file; enables instance generation");
  app.add_option("--vocab-format", opt.vocab_format, "wordpiece or sentencepiece")->capture_default_str();
  app.add_option("--vocab-size", opt.vocab_size, "Expected vocabulary size, e.g. 32000 (0: unchecked)")->capture_default_str();
  app.add_option("--mask-rate", opt.mask_rate, "Share of non-special tokens masked")->capture_default_str();
  app.add_option("--long-fraction", opt.long_fraction, "Share of instances built to length 512")->capture_default_str();
  app.add_option("--dupe-factor", opt.dupe_factor, "Passes over the sentence corpus")->capture_default_str();
  app.add_option("--pretrain-seed", opt.pretrain_seed, "Seed of instance generation")->capture_default_str();
  app.add_option("--instance-format", opt.instance_format, "tsv or binary")->capture_default_str();
  app.add_flag("--cased", opt.cased, "Do not lowercase before WordPiece");

  app.add_option("--metric", opt.metric, "f1, macro-f1, aggregate, ttest, ds, rank-weighted-f1, breakdown");
  app.add_option("--dataset", opt.dataset, "Dataset CSV with gold labels (default: <out>/build/dataset.csv)");
  app.add_option("--labels", opt.labels, "Gold labels CSV (example_id,label) instead of a dataset");
  app.add_option("--predictions", opt.predictions, "Predictions CSV (example_id,label)");
  app.add_option("--predictions-b", opt.predictions_b, "Second model's predictions CSV");
  app.add_option("--scores-a", opt.scores_a, "Per-fold scores CSV (column score)");
  app.add_option("--scores-b", opt.scores_b, "Second model's per-fold scores CSV");
  app.add_option("--losses-general", opt.losses_general, "Per-example losses of the general model (example_id,loss)");
  app.add_option("--losses-domain", opt.losses_domain, "Per-example losses of the domain model (example_id,loss)");
  app.add_option("--n-classes", opt.n_classes, "Classes for macro F1")->capture_default_str();
  app.add_option("--model-a", opt.model_a, "Name of the first model")->capture_default_str();
  app.add_option("--model-b", opt.model_b, "Name of the second model")->capture_default_str();
  app.add_option("--results", opt.results, "Fold results CSV (variant,model,fold,score) for report");

  const std::vector<std::pair<std::string, std::string>> subcommands{
      {"ingest", "Validate the corpus, write stats and the holdout partition"},
      {"segment", "Write the sentence corpus of the pretrain partition"},
      {"extract", "List holding-parenthetical candidates of the holdout partition"},
      {"build", "Build the multiple-choice dataset, folds and splits"},
      {"variants", "Write train-volume splits and truncated-prompt datasets"},
      {"pretrain-prep", "Sample vocabulary sentences and create masked LM instances"},
      {"eval", "Score prediction, fold-score or loss files"},
      {"report", "Aggregate fold results into plot data"}};
  for (const auto& [name, help] : subcommands) app.add_subcommand(name, help);

  std::string stage_name = "cli";
  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      throw ConfigError(e.what());
    }
    const std::map<std::string, void (*)(const Options&)> handlers{
        {"ingest", run_ingest},   {"segment", run_segment},   {"extract", run_extract},
        {"build", run_build},     {"variants", run_variants}, {"pretrain-prep", run_pretrain_prep},
        {"eval", run_eval},       {"report", run_report}};
    stage_name = app.get_subcommands().front()->get_name();
    handlers.at(stage_name)(opt);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << json{{"error", {{"stage", stage_name}, {"kind", "validation"}, {"message", e.what()}}}}.dump() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"stage", stage_name}, {"kind", "runtime"}, {"message", e.what()}}}}.dump() << '\n';
    return 2;
  }
}
