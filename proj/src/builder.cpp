#include "casehold/builder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "casehold/csv.hpp"
#include "casehold/util.hpp"

namespace casehold {

namespace {

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos; pos = text.find(needle, pos + 1))
    ++n;
  return n;
}

std::vector<std::string_view> whitespace_words(std::string_view text) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  auto space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  while (i < text.size()) {
    while (i < text.size() && space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !space(text[j])) ++j;
    if (j > i) words.push_back(text.substr(i, j - i));
    i = j;
  }
  return words;
}

struct DecisionWork {
  std::vector<HoldingCandidate> candidates;
  std::vector<std::string> prompts;
  std::vector<SkipRecord> skips;
};

}  // namespace

void BuilderConfig::validate() const {
  if (pre_window == 0) throw ConfigError("pre_window must be positive");
  if (!(upper_threshold > 0.0 && upper_threshold <= 1.0))
    throw ConfigError("upper_threshold must be in (0, 1]");
  if (k_distractors == 0) throw ConfigError("k_distractors must be positive");
}

nlohmann::json BuilderConfig::to_json() const {
  return {{"pre_window", pre_window},
          {"post_window", post_window},
          {"k_distractors", k_distractors},
          {"upper_threshold", upper_threshold},
          {"seed", seed}};
}

std::string make_example_id(std::string_view decision_id, std::size_t citation_start) {
  std::string key(decision_id);
  key.push_back('\x1f');
  key += std::to_string(citation_start);
  return to_hex16(fnv1a64(key));
}

std::string holding_pool_id(std::string_view holding_text) {
  return "h" + to_hex16(fnv1a64(holding_text));
}

std::vector<HoldingCandidate> extract_holding_candidates(const CaseDecision& decision,
                                                         std::span<const CitationSpan> citations) {
  std::vector<HoldingCandidate> out;
  for (const auto& c : citations) {
    if (c.parenthetical_kind != ParentheticalKind::holding || !c.parenthetical_text) continue;
    HoldingCandidate h;
    h.decision_id = decision.decision_id;
    h.citation = c;
    h.holding_text = *c.parenthetical_text;
    h.citation_start = c.start;
    h.citation_end = c.end;
    h.parenthetical_start = c.parenthetical_start;
    h.parenthetical_end = c.parenthetical_end;
    out.push_back(std::move(h));
  }
  return out;
}

std::string build_prompt(std::string_view text, const HoldingCandidate& c,
                         const BuilderConfig& config) {
  const std::size_t cs = std::min(c.citation_start, text.size());
  std::size_t pre = cs > config.pre_window ? cs - config.pre_window : 0;
  if (pre > 0 && text[pre - 1] != ' ') {
    auto sp = text.find(' ', pre);
    pre = (sp != std::string_view::npos && sp < cs) ? sp + 1 : cs;
  }
  while (pre < cs && text[pre] == ' ') ++pre;

  std::string prompt(text.substr(pre, c.parenthetical_start - pre));
  prompt += kHoldingToken;
  prompt += text.substr(c.parenthetical_end, c.citation_end - c.parenthetical_end);

  std::size_t post = std::min(text.size(), c.citation_end + config.post_window);
  if (post < text.size() && text[post] != ' ') {
    auto sp = text.rfind(' ', post);
    post = (sp != std::string_view::npos && sp >= c.citation_end) ? sp : c.citation_end;
  }
  auto tail = text.substr(c.citation_end, post - c.citation_end);
  while (!tail.empty() && tail.back() == ' ') tail.remove_suffix(1);
  prompt += tail;
  return prompt;
}

HoldingExample assemble_example(const HoldingCandidate& candidate, std::string citing_prompt,
                                const TfidfIndex& index,
                                const std::unordered_map<std::string, std::string>& pool_texts,
                                const std::unordered_set<std::string>& exclude_pool_ids,
                                const BuilderConfig& config) {
  HoldingExample ex;
  ex.example_id = make_example_id(candidate.decision_id, candidate.citation_start);
  ex.citing_prompt = std::move(citing_prompt);
  ex.decision_id = candidate.decision_id;
  ex.citation_start = candidate.citation_start;
  ex.parenthetical_start = candidate.parenthetical_start;
  ex.parenthetical_end = candidate.parenthetical_end;

  ex.distractor_ids = index.top_k_below_threshold(holding_pool_id(candidate.holding_text),
                                                  config.k_distractors, config.upper_threshold,
                                                  exclude_pool_ids);
  std::vector<std::string> items{candidate.holding_text};
  for (const auto& id : ex.distractor_ids) items.push_back(pool_texts.at(id));

  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = derive_rng(config.seed, ex.example_id);
  rng.shuffle(order);
  ex.options.reserve(items.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    if (order[pos] == 0) ex.label = static_cast<int>(pos);
    ex.options.push_back(items[order[pos]]);
  }
  return ex;
}

std::optional<std::string> validate_example(const HoldingExample& ex, std::size_t n_options,
                                            const TfidfIndex* index, double upper) {
  if (ex.options.size() != n_options)
    return "expected " + std::to_string(n_options) + " options, found " + std::to_string(ex.options.size());
  if (ex.label < 0 || static_cast<std::size_t>(ex.label) >= n_options) return "label out of range";
  if (count_occurrences(ex.citing_prompt, kHoldingToken) != 1) return "prompt must contain exactly one <HOLDING>";
  for (std::size_t i = 0; i < ex.options.size(); ++i)
    for (std::size_t j = i + 1; j < ex.options.size(); ++j)
      if (ex.options[i] == ex.options[j]) return "options " + std::to_string(i) + " and " + std::to_string(j) + " are identical";
  if (index) {
    const auto& correct = index->vector(index->row_of(holding_pool_id(ex.correct())));
    for (std::size_t i = 0; i < ex.options.size(); ++i) {
      if (static_cast<int>(i) == ex.label) continue;
      double sim = cosine(correct, index->vector(index->row_of(holding_pool_id(ex.options[i]))));
      if (!(sim < upper)) return "option " + std::to_string(i) + " similarity " + format_double(sim) + " not below threshold";
    }
  }
  return std::nullopt;
}

nlohmann::json DatasetBuild::manifest(const BuilderConfig& config) const {
  std::map<std::string, std::size_t> by_reason;
  nlohmann::json skip_log = nlohmann::json::array();
  for (const auto& s : skips) {
    ++by_reason[s.reason.substr(0, s.reason.find(':'))];
    skip_log.push_back({{"decision_id", s.decision_id}, {"citation_start", s.citation_start}, {"reason", s.reason}});
  }
  double words = 0;
  for (const auto& ex : examples) words += static_cast<double>(count_words(ex.citing_prompt));
  nlohmann::json m;
  m["config"] = config.to_json();
  m["counts"] = {{"decisions", decisions},
                 {"candidates", candidates},
                 {"pool", pool_size},
                 {"examples", examples.size()},
                 {"skipped", skips.size()}};
  m["skips_by_reason"] = by_reason;
  m["skip_log"] = skip_log;
  m["mean_prompt_words"] = examples.empty() ? 0.0 : words / static_cast<double>(examples.size());
  return m;
}

DatasetBuild build_dataset(std::span<const CaseDecision> holdout, const CitationParser& parser,
                           const BuilderConfig& config, std::size_t workers) {
  config.validate();
  if (holdout.empty()) throw ConfigError("build_dataset: holdout set is empty");

  // Per-decision candidate extraction and prompt building.
  std::vector<DecisionWork> work(holdout.size());
  parallel_for(holdout.size(), workers, [&](std::size_t i) {
    const auto& d = holdout[i];
    auto cites = parser.find_citations(d.body_text);
    auto& w = work[i];
    for (auto& c : extract_holding_candidates(d, cites)) {
      auto prompt = build_prompt(d.body_text, c, config);
      if (count_occurrences(prompt, kHoldingToken) != 1) {
        w.skips.push_back({d.decision_id, c.citation_start, "prompt_token: context already contains <HOLDING>"});
        continue;
      }
      w.candidates.push_back(std::move(c));
      w.prompts.push_back(std::move(prompt));
    }
  });

  DatasetBuild result;
  result.decisions = holdout.size();

  // Pool of distinct holding statements over every candidate.
  std::vector<TfidfDocument> pool;
  for (const auto& w : work) {
    for (const auto& c : w.candidates) {
      ++result.candidates;
      auto id = holding_pool_id(c.holding_text);
      auto [it, inserted] = result.pool_texts.emplace(id, c.holding_text);
      if (inserted) {
        pool.push_back({id, c.holding_text});
      } else if (it->second != c.holding_text) {
        throw std::runtime_error("holding pool id collision: " + id);
      }
    }
  }
  std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  result.pool_size = pool.size();
  result.index = TfidfIndex::build(pool);

  // Deduplicate on (prompt, correct holding); first occurrence in corpus order wins.
  struct Job {
    std::size_t decision;
    std::size_t candidate;
  };
  std::vector<Job> jobs;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < work.size(); ++i) {
    for (auto& s : work[i].skips) result.skips.push_back(std::move(s));
    for (std::size_t j = 0; j < work[i].candidates.size(); ++j) {
      const auto& c = work[i].candidates[j];
      std::string key = work[i].prompts[j];
      key.push_back('\0');
      key += c.holding_text;
      if (!seen.insert(std::move(key)).second) {
        result.skips.push_back({c.decision_id, c.citation_start, "duplicate: identical prompt and holding"});
        continue;
      }
      jobs.push_back({i, j});
    }
  }

  std::vector<std::unordered_set<std::string>> exclusions(work.size());
  for (std::size_t i = 0; i < work.size(); ++i)
    for (const auto& c : work[i].candidates) exclusions[i].insert(holding_pool_id(c.holding_text));

  std::vector<std::optional<HoldingExample>> assembled(jobs.size());
  std::vector<std::optional<SkipRecord>> failures(jobs.size());
  parallel_for(jobs.size(), workers, [&](std::size_t n) {
    const auto& job = jobs[n];
    const auto& c = work[job.decision].candidates[job.candidate];
    try {
      assembled[n] = assemble_example(c, work[job.decision].prompts[job.candidate], result.index,
                                      result.pool_texts, exclusions[job.decision], config);
    } catch (const InsufficientPool& e) {
      failures[n] = SkipRecord{c.decision_id, c.citation_start, std::string("insufficient_pool: ") + e.what()};
    }
  });
  for (std::size_t n = 0; n < jobs.size(); ++n) {
    if (assembled[n]) result.examples.push_back(std::move(*assembled[n]));
    if (failures[n]) result.skips.push_back(std::move(*failures[n]));
  }

  std::sort(result.examples.begin(), result.examples.end(),
            [](const auto& a, const auto& b) { return a.example_id < b.example_id; });
  auto dup = std::adjacent_find(result.examples.begin(), result.examples.end(),
                                [](const auto& a, const auto& b) { return a.example_id == b.example_id; });
  if (dup != result.examples.end()) throw std::runtime_error("example id collision: " + dup->example_id);
  return result;
}

std::string format_dataset(std::span<const HoldingExample> examples) {
  std::size_t n_options = examples.empty() ? 5 : examples.front().options.size();
  std::vector<std::string> header{"example_id", "citing_prompt"};
  for (std::size_t i = 0; i < n_options; ++i) header.push_back("holding_" + std::to_string(i));
  header.push_back("label");
  std::string out = csv::format_row(header);
  for (const auto& ex : examples) {
    if (ex.options.size() != n_options) throw std::invalid_argument("ragged option counts");
    std::vector<std::string> row{ex.example_id, ex.citing_prompt};
    row.insert(row.end(), ex.options.begin(), ex.options.end());
    row.push_back(std::to_string(ex.label));
    out += csv::format_row(row);
  }
  return out;
}

std::vector<HoldingExample> parse_dataset(std::string_view text) {
  auto table = csv::read_table(text);
  std::size_t id_col = table.column("example_id");
  std::size_t prompt_col = table.column("citing_prompt");
  std::size_t label_col = table.column("label");
  std::vector<std::size_t> option_cols;
  for (std::size_t i = 0; table.has_column("holding_" + std::to_string(i)); ++i)
    option_cols.push_back(table.column("holding_" + std::to_string(i)));
  if (option_cols.empty()) throw InputError("dataset has no holding_ columns");

  std::vector<HoldingExample> out;
  out.reserve(table.rows.size());
  for (auto& row : table.rows) {
    HoldingExample ex;
    ex.example_id = row[id_col];
    ex.citing_prompt = row[prompt_col];
    for (auto col : option_cols) ex.options.push_back(row[col]);
    ex.label = static_cast<int>(parse_int(row[label_col]));
    if (ex.label < 0 || static_cast<std::size_t>(ex.label) >= ex.options.size())
      throw InputError("label out of range for example " + ex.example_id);
    out.push_back(std::move(ex));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> FoldAssignment::fold_sizes() const {
  std::vector<std::size_t> sizes(k, 0);
  for (const auto& [id, fold] : folds) ++sizes.at(fold);
  return sizes;
}

FoldAssignment make_cv_folds(std::vector<std::string> ids, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("k must be at least 2");
  if (k > ids.size()) throw ConfigError("k exceeds dataset size");
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw ConfigError("duplicate example ids");
  Rng rng(seed);
  rng.shuffle(ids);
  FoldAssignment f;
  f.k = k;
  f.seed = seed;
  f.folds.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) f.folds.emplace_back(std::move(ids[i]), i % k);
  std::sort(f.folds.begin(), f.folds.end());
  return f;
}

std::vector<SplitAssignment> make_splits(std::vector<std::string> ids,
                                         std::span<const std::uint64_t> seeds, double test_ratio) {
  if (!(test_ratio > 0.0 && test_ratio < 1.0)) throw ConfigError("test ratio must be in (0, 1)");
  std::vector<std::uint64_t> sorted_seeds(seeds.begin(), seeds.end());
  std::sort(sorted_seeds.begin(), sorted_seeds.end());
  if (std::adjacent_find(sorted_seeds.begin(), sorted_seeds.end()) != sorted_seeds.end())
    throw ConfigError("split seeds must be distinct");
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw ConfigError("duplicate example ids");

  auto n_test = static_cast<std::size_t>(std::llround(test_ratio * static_cast<double>(ids.size())));
  std::vector<SplitAssignment> out;
  for (auto seed : seeds) {
    auto shuffled = ids;
    Rng rng(seed);
    rng.shuffle(shuffled);
    SplitAssignment s;
    s.seed = seed;
    s.test.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_test));
    s.train.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_test), shuffled.end());
    std::sort(s.test.begin(), s.test.end());
    std::sort(s.train.begin(), s.train.end());
    out.push_back(std::move(s));
  }
  return out;
}

std::string format_folds(const FoldAssignment& f) {
  std::string out = "# casehold-folds v1 k=" + std::to_string(f.k) + " seed=" + std::to_string(f.seed) + "\n";
  for (const auto& [id, fold] : f.folds) out += id + "\t" + std::to_string(fold) + "\n";
  return out;
}

FoldAssignment parse_folds(std::string_view text) {
  auto lines = split(text, '\n');
  if (lines.empty() || !lines[0].starts_with("# casehold-folds v1")) throw InputError("not a folds file");
  FoldAssignment f;
  for (auto field : split(lines[0], ' ')) {
    if (field.starts_with("k=")) f.k = static_cast<std::size_t>(parse_int(field.substr(2)));
    if (field.starts_with("seed=")) f.seed = static_cast<std::uint64_t>(parse_int(field.substr(5)));
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto parts = split(lines[i], '\t');
    if (parts.size() != 2) throw InputError("bad folds line " + std::to_string(i + 1));
    auto fold = static_cast<std::size_t>(parse_int(parts[1]));
    if (fold >= f.k) throw InputError("fold index out of range on line " + std::to_string(i + 1));
    f.folds.emplace_back(std::string(parts[0]), fold);
  }
  return f;
}

std::string format_split(const SplitAssignment& s) {
  std::vector<std::pair<std::string_view, bool>> rows;
  for (const auto& id : s.train) rows.emplace_back(id, false);
  for (const auto& id : s.test) rows.emplace_back(id, true);
  std::sort(rows.begin(), rows.end());
  std::string out = "# casehold-split v1 seed=" + std::to_string(s.seed) +
                    " train=" + std::to_string(s.train.size()) + " test=" + std::to_string(s.test.size()) + "\n";
  for (const auto& [id, is_test] : rows) {
    out += id;
    out += is_test ? "\ttest\n" : "\ttrain\n";
  }
  return out;
}

SplitAssignment parse_split(std::string_view text) {
  auto lines = split(text, '\n');
  if (lines.empty() || !lines[0].starts_with("# casehold-split v1")) throw InputError("not a split file");
  SplitAssignment s;
  for (auto field : split(lines[0], ' '))
    if (field.starts_with("seed=")) s.seed = static_cast<std::uint64_t>(parse_int(field.substr(5)));
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto parts = split(lines[i], '\t');
    if (parts.size() != 2) throw InputError("bad split line " + std::to_string(i + 1));
    if (parts[1] == "train") {
      s.train.emplace_back(parts[0]);
    } else if (parts[1] == "test") {
      s.test.emplace_back(parts[0]);
    } else {
      throw InputError("bad split side on line " + std::to_string(i + 1));
    }
  }
  return s;
}

std::string grid_label(const GridValue& v) { return v ? std::to_string(*v) : "full"; }

GridValue parse_grid_value(std::string_view text) {
  text = trim(text);
  if (text == "full") return std::nullopt;
  long long v = 0;
  try {
    v = parse_int(text);
  } catch (const std::exception&) {
    v = 0;
  }
  if (v <= 0) throw ConfigError("grid value '" + std::string(text) + "' must be a positive integer or 'full'");
  return static_cast<std::size_t>(v);
}

std::vector<GridValue> parse_grid(std::string_view comma_separated) {
  std::vector<GridValue> out;
  for (auto item : split(comma_separated, ',')) out.push_back(parse_grid_value(item));
  return out;
}

void VariantConfig::validate() const {
  for (const auto& v : train_sizes)
    if (v && *v == 0) throw ConfigError("train sizes must be positive");
  for (const auto& v : prompt_words)
    if (v && *v == 0) throw ConfigError("prompt word counts must be positive");
}

std::string truncate_prompt(std::string_view prompt, std::size_t x) {
  if (x == 0) throw ConfigError("x must be at least 1");
  auto words = whitespace_words(prompt);
  if (words.size() <= x) return std::string(prompt);
  std::string out;
  for (std::size_t i = 0; i < x; ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  if (out.find(kHoldingToken) == std::string::npos) {
    out.push_back(' ');
    out += kHoldingToken;
  }
  return out;
}

std::vector<HoldingExample> truncate_prompts(std::span<const HoldingExample> examples, GridValue x) {
  std::vector<HoldingExample> out(examples.begin(), examples.end());
  if (!x) return out;
  for (auto& ex : out) ex.citing_prompt = truncate_prompt(ex.citing_prompt, *x);
  return out;
}

SplitAssignment subsample_train(const SplitAssignment& split, GridValue n, std::uint64_t seed) {
  if (!n) return split;
  if (*n == 0) throw ConfigError("train size must be positive");
  if (*n > split.train.size())
    throw ConfigError("train size " + std::to_string(*n) + " exceeds train set of " +
                      std::to_string(split.train.size()));
  auto perm = split.train;
  std::sort(perm.begin(), perm.end());
  Rng rng(seed);
  rng.shuffle(perm);
  SplitAssignment out;
  out.seed = split.seed;
  out.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(*n));
  std::sort(out.train.begin(), out.train.end());
  out.test = split.test;
  return out;
}

}  // namespace casehold
