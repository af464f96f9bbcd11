#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "casehold/citation.hpp"
#include "casehold/corpus.hpp"

namespace casehold {

// ---------------------------------------------------------------------------
// Sentence corpus

/// One decision's sentences, one per line, followed by a blank line. Nothing is
/// written for a decision without any sentence of at least `min_words` words.
/// Returns the number of sentences written.
std::size_t write_sentence_document(std::ostream& out, std::span<const std::string> sentences);

/// Writes the sentence corpus for the decisions in `decisions` whose id is in
/// the pretrain side of `partition`; other decisions are ignored.
struct SentenceCorpusCounts {
  std::size_t documents = 0;
  std::size_t sentences = 0;
  std::size_t ignored = 0;  // decisions not in the pretrain partition
};
SentenceCorpusCounts emit_sentence_corpus(std::span<const CaseDecision> decisions,
                                          const CorpusPartition& partition,
                                          const CitationParser& parser, std::ostream& out,
                                          std::size_t min_words = 3, std::size_t workers = 1);

/// Documents of a sentence corpus: blank lines separate documents.
std::vector<std::vector<std::string>> parse_sentence_corpus(std::string_view text);

/// Indices (ascending) of a seeded uniform sample of `target` out of `n`
/// without replacement (sequential selection). Throws ConfigError if target > n.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t target, std::uint64_t seed);

/// Copies a seeded sample of `target` sentences from the corpus file to `out`,
/// preserving order. Two passes; memory does not depend on corpus size.
std::size_t sample_vocab_sentences(const std::filesystem::path& corpus, std::size_t target,
                                   std::uint64_t seed, std::ostream& out);

// ---------------------------------------------------------------------------
// Vocabulary and WordPiece

inline constexpr std::string_view kPad = "[PAD]";
inline constexpr std::string_view kUnk = "[UNK]";
inline constexpr std::string_view kCls = "[CLS]";
inline constexpr std::string_view kSep = "[SEP]";
inline constexpr std::string_view kMask = "[MASK]";

inline constexpr std::size_t kLegalVocabSize = 32000;
inline constexpr std::size_t kGeneralVocabSize = 30522;

class Vocabulary {
 public:
  /// Throws InputError on duplicate tokens, missing special tokens, or a size
  /// different from `expected_size`.
  static Vocabulary from_tokens(std::vector<std::string> tokens,
                                std::optional<std::size_t> expected_size = std::nullopt);
  /// One token per line; the line number is the id.
  static Vocabulary parse(std::string_view text, std::optional<std::size_t> expected_size = std::nullopt);
  static Vocabulary load(const std::filesystem::path& path,
                         std::optional<std::size_t> expected_size = std::nullopt);
  /// SentencePiece-style vocabulary ("piece<TAB>score" lines, word-initial
  /// pieces marked with U+2581). Word-initial pieces lose the marker, other
  /// pieces gain "##", <pad>/<unk>/<s>/</s>/<mask> map to the special tokens.
  /// Pieces that become empty or duplicate are dropped.
  static Vocabulary from_sentencepiece(std::string_view text,
                                       std::optional<std::size_t> expected_size = std::nullopt);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(std::uint32_t id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::optional<std::uint32_t> find(std::string_view token) const;
  bool is_special(std::uint32_t id) const;
  bool is_continuation(std::uint32_t id) const;

  std::uint32_t pad_id() const { return pad_; }
  std::uint32_t unk_id() const { return unk_; }
  std::uint32_t cls_id() const { return cls_; }
  std::uint32_t sep_id() const { return sep_; }
  std::uint32_t mask_id() const { return mask_; }

  std::string serialize() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::uint32_t pad_ = 0, unk_ = 0, cls_ = 0, sep_ = 0, mask_ = 0;
};

/// Whitespace split, then ASCII punctuation split into single-character words.
/// ASCII letters are lowercased when `lowercase` is set.
std::vector<std::string> basic_tokenize(std::string_view text, bool lowercase = true);

/// Greedy longest-match-first pieces of one word; [UNK] if any position has no
/// matching piece or the word exceeds `max_word_bytes`.
std::vector<std::uint32_t> wordpiece_word(const Vocabulary& vocab, std::string_view word,
                                          std::size_t max_word_bytes = 100);

std::vector<std::uint32_t> wordpiece_tokenize(const Vocabulary& vocab, std::string_view text,
                                              bool lowercase = true);
/// Token strings rather than ids.
std::vector<std::string> wordpiece_pieces(const Vocabulary& vocab, std::string_view text,
                                          bool lowercase = true);

// ---------------------------------------------------------------------------
// Masked LM / next sentence instances

enum class NspLabel : std::uint8_t { is_next = 0, not_next = 1 };

struct MaskedInstance {
  std::vector<std::uint32_t> token_ids;
  std::vector<std::uint8_t> segment_ids;
  std::vector<std::uint32_t> masked_positions;  // strictly increasing
  std::vector<std::uint32_t> masked_labels;     // original ids at those positions
  NspLabel nsp = NspLabel::is_next;
  std::uint32_t max_len = 128;

  bool operator==(const MaskedInstance&) const = default;
};

struct PretrainConfig {
  double mask_rate = 0.15;
  double mask_token_prob = 0.8;    // replaced by [MASK]
  double random_token_prob = 0.1;  // replaced by a random non-special token
  std::uint32_t short_max_len = 128;
  std::uint32_t long_max_len = 512;
  double long_fraction = 0.10;
  double random_next_prob = 0.5;
  std::size_t dupe_factor = 1;  // passes over the corpus, each with fresh randomness
  bool lowercase = true;
  std::uint64_t seed = 0;

  /// Throws ConfigError.
  void validate() const;
};

/// Position groups of whole words: a "##" token joins the group of the token
/// before it; special tokens belong to no group.
std::vector<std::vector<std::uint32_t>> whole_word_groups(const Vocabulary& vocab,
                                                          std::span<const std::uint32_t> ids);

/// Instances for every document of a sentence corpus. Deterministic in
/// (documents, vocab, config) regardless of `workers`.
std::vector<MaskedInstance> create_pretraining_instances(
    const std::vector<std::vector<std::string>>& documents, const Vocabulary& vocab,
    const PretrainConfig& config, std::size_t workers = 1);

/// Tab-separated text: header, then one instance per line with
/// space-separated integer lists; nsp is 0 (is_next) or 1 (not_next).
std::string format_instances_tsv(std::span<const MaskedInstance> instances);
std::vector<MaskedInstance> parse_instances_tsv(std::string_view text);

/// Little-endian records after an 8-byte magic; see README for the layout.
std::string format_instances_binary(std::span<const MaskedInstance> instances);
std::vector<MaskedInstance> parse_instances_binary(std::string_view bytes);

}  // namespace casehold
