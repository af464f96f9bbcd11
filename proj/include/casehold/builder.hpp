#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "casehold/citation.hpp"
#include "casehold/corpus.hpp"
#include "casehold/tfidf.hpp"
#include "json.hpp"

namespace casehold {

inline constexpr std::string_view kHoldingToken = "<HOLDING>";

struct BuilderConfig {
  /// Characters of context before the citation start.
  std::size_t pre_window = 1000;
  /// Characters of context after the citation end.
  std::size_t post_window = 60;
  std::size_t k_distractors = 4;
  double upper_threshold = 0.75;
  std::uint64_t seed = 0;

  /// Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
};

struct HoldingCandidate {
  std::string decision_id;
  CitationSpan citation;
  std::string holding_text;
  std::size_t citation_start = 0;
  std::size_t citation_end = 0;
  std::size_t parenthetical_start = 0;  // first byte inside '('
  std::size_t parenthetical_end = 0;    // index of ')'
};

struct HoldingExample {
  std::string example_id;
  std::string citing_prompt;
  std::vector<std::string> options;
  int label = 0;
  // provenance
  std::string decision_id;
  std::size_t citation_start = 0;
  std::size_t parenthetical_start = 0;
  std::size_t parenthetical_end = 0;
  std::vector<std::string> distractor_ids;

  const std::string& correct() const { return options.at(static_cast<std::size_t>(label)); }
};

/// Stable id from (decision_id, citation_start).
std::string make_example_id(std::string_view decision_id, std::size_t citation_start);
/// Pool id of a holding statement; identical texts share an id.
std::string holding_pool_id(std::string_view holding_text);

/// One candidate per citation whose parenthetical is a holding.
std::vector<HoldingCandidate> extract_holding_candidates(const CaseDecision& decision,
                                                         std::span<const CitationSpan> citations);

/// Context before the citation (start snapped forward to a word boundary),
/// the citation with its holding parenthetical content replaced by
/// "<HOLDING>", then context after it (end snapped back to a word boundary).
std::string build_prompt(std::string_view decision_text, const HoldingCandidate& candidate,
                         const BuilderConfig& config);

/// Picks distractors with the TF-IDF index and shuffles the options with a
/// generator derived from (config.seed, example id). Throws InsufficientPool.
HoldingExample assemble_example(const HoldingCandidate& candidate, std::string citing_prompt,
                                const TfidfIndex& index,
                                const std::unordered_map<std::string, std::string>& pool_texts,
                                const std::unordered_set<std::string>& exclude_pool_ids,
                                const BuilderConfig& config);

/// Empty when valid; otherwise a description of the first violated invariant.
/// With an index, distractor similarity to the correct option is checked too.
std::optional<std::string> validate_example(const HoldingExample& example,
                                            std::size_t n_options = 5,
                                            const TfidfIndex* index = nullptr,
                                            double upper = 0.75);

struct SkipRecord {
  std::string decision_id;
  std::size_t citation_start = 0;
  std::string reason;
};

struct DatasetBuild {
  std::vector<HoldingExample> examples;  // sorted by example_id
  std::vector<SkipRecord> skips;
  std::size_t decisions = 0;
  std::size_t candidates = 0;
  std::size_t pool_size = 0;
  TfidfIndex index;
  std::unordered_map<std::string, std::string> pool_texts;  // pool id -> holding text

  nlohmann::json manifest(const BuilderConfig& config) const;
};

/// Builds the dataset from holdout decisions only. Throws ConfigError when
/// `holdout` is empty.
DatasetBuild build_dataset(std::span<const CaseDecision> holdout, const CitationParser& parser,
                           const BuilderConfig& config, std::size_t workers = 1);

std::string format_dataset(std::span<const HoldingExample> examples);
std::vector<HoldingExample> parse_dataset(std::string_view text);

// ---------------------------------------------------------------------------
// Folds, splits and task variants

struct FoldAssignment {
  std::size_t k = 10;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::size_t>> folds;  // sorted by id

  std::vector<std::size_t> fold_sizes() const;
};

/// Seeded shuffle of the sorted ids, then round-robin. Throws ConfigError if
/// k < 2 or k exceeds the number of ids.
FoldAssignment make_cv_folds(std::vector<std::string> ids, std::size_t k, std::uint64_t seed);

struct SplitAssignment {
  std::uint64_t seed = 0;
  std::vector<std::string> train;  // sorted
  std::vector<std::string> test;   // sorted
};

/// One train/test split per seed with |test| = round(test_ratio * N).
std::vector<SplitAssignment> make_splits(std::vector<std::string> ids,
                                         std::span<const std::uint64_t> seeds,
                                         double test_ratio = 0.20);

std::string format_folds(const FoldAssignment& folds);
FoldAssignment parse_folds(std::string_view text);
std::string format_split(const SplitAssignment& split);
SplitAssignment parse_split(std::string_view text);

/// "full" is represented as nullopt.
using GridValue = std::optional<std::size_t>;
std::string grid_label(const GridValue& v);
GridValue parse_grid_value(std::string_view text);
std::vector<GridValue> parse_grid(std::string_view comma_separated);

struct VariantConfig {
  std::vector<GridValue> train_sizes{1, 10, 100, 500, 1000, 5000, 10000, std::nullopt};
  std::vector<GridValue> prompt_words{5, 10, 20, 40, 60, 80, 100, std::nullopt};

  void validate() const;
};

/// First x whitespace-delimited words of a prompt; "<HOLDING>" is appended if
/// it was cut off. Prompts of at most x words are returned unchanged.
std::string truncate_prompt(std::string_view prompt, std::size_t x);
std::vector<HoldingExample> truncate_prompts(std::span<const HoldingExample> examples, GridValue x);

/// Seeded subsample of the train side; the test side is copied unchanged.
/// Samples for the same seed are nested (prefixes of one permutation).
SplitAssignment subsample_train(const SplitAssignment& split, GridValue n, std::uint64_t seed);

}  // namespace casehold
