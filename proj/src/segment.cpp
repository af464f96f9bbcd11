#include "casehold/segment.hpp"

#include <algorithm>
#include <iterator>

#include "casehold/util.hpp"

namespace casehold {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }

// Closing characters that may follow terminal punctuation: quotes, brackets
// and the UTF-8 right quotation marks.
std::size_t skip_closers(std::string_view text, std::size_t pos) {
  while (pos < text.size()) {
    char c = text[pos];
    if (c == '"' || c == '\'' || c == ')' || c == ']') {
      ++pos;
    } else if (text.substr(pos).starts_with("\xE2\x80\x9D") ||
               text.substr(pos).starts_with("\xE2\x80\x99")) {
      pos += 3;
    } else {
      break;
    }
  }
  return pos;
}

}  // namespace

std::vector<SentenceSpan> segment_sentences(std::string_view text,
                                            std::span<const CitationSpan> citations,
                                            const AbbreviationLexicon& abbreviations) {
  std::vector<SentenceSpan> out;
  std::size_t cite = 0;  // first citation whose end is beyond the current position
  std::size_t start = 0;
  while (start < text.size() && is_space(text[start])) ++start;

  auto emit = [&](std::size_t s, std::size_t e) {
    while (e > s && is_space(text[e - 1])) --e;
    if (e > s) out.push_back({s, e, count_words(text.substr(s, e - s))});
  };

  for (std::size_t i = start; i < text.size(); ++i) {
    char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t end = skip_closers(text, i + 1);
    if (end < text.size() && !is_space(text[end])) continue;

    std::size_t next = end;
    while (next < text.size() && is_space(text[next])) ++next;
    if (next < text.size() && is_lower(text[next])) continue;

    while (cite < citations.size() && citations[cite].end <= end) ++cite;
    // Any citation with start < end < citation.end would straddle the boundary.
    bool inside = false;
    for (std::size_t k = cite; k < citations.size() && citations[k].start < end; ++k)
      if (citations[k].start < end && end < citations[k].end) inside = true;
    if (inside) continue;

    if (c == '.') {
      std::size_t tok = i;
      while (tok > start && !is_space(text[tok - 1])) --tok;
      if (abbreviations.is_abbreviation(text.substr(tok, i + 1 - tok))) continue;
    }

    emit(start, end);
    start = next;
    i = next == 0 ? 0 : next - 1;
  }
  if (start < text.size()) emit(start, text.size());
  return out;
}

std::vector<SentenceSpan> segment_sentences(std::string_view text,
                                            std::span<const CitationSpan> citations) {
  static const AbbreviationLexicon kAbbreviations = AbbreviationLexicon::builtin();
  return segment_sentences(text, citations, kAbbreviations);
}

std::vector<SentenceSpan> filter_short_sentences(std::span<const SentenceSpan> spans,
                                                 std::size_t min_words) {
  std::vector<SentenceSpan> out;
  std::copy_if(spans.begin(), spans.end(), std::back_inserter(out),
               [&](const SentenceSpan& s) { return s.word_count >= min_words; });
  return out;
}

std::vector<std::string> sentences_for_text(std::string_view text, const CitationParser& parser,
                                            std::size_t min_words) {
  auto cites = parser.find_citations(text);
  auto spans = filter_short_sentences(segment_sentences(text, cites, parser.abbreviations()), min_words);
  std::vector<std::string> out;
  out.reserve(spans.size());
  for (const auto& s : spans) out.emplace_back(text.substr(s.start, s.end - s.start));
  return out;
}

}  // namespace casehold
