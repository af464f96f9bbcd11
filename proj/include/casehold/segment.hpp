#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "casehold/citation.hpp"

namespace casehold {

struct SentenceSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t word_count = 0;

  bool operator==(const SentenceSpan&) const = default;
};

/// Splits text at terminal punctuation (. ! ?) followed by whitespace and a
/// non-lowercase character, or by end of text. No boundary is placed inside a
/// citation span or after a known abbreviation. Spans are trimmed of
/// surrounding whitespace.
std::vector<SentenceSpan> segment_sentences(std::string_view text,
                                            std::span<const CitationSpan> citations,
                                            const AbbreviationLexicon& abbreviations);

std::vector<SentenceSpan> segment_sentences(std::string_view text,
                                            std::span<const CitationSpan> citations);

std::vector<SentenceSpan> filter_short_sentences(std::span<const SentenceSpan> spans,
                                                 std::size_t min_words = 3);

/// find_citations + segment_sentences + filter_short_sentences.
std::vector<std::string> sentences_for_text(std::string_view text, const CitationParser& parser,
                                            std::size_t min_words = 3);

}  // namespace casehold
