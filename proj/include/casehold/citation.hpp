#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace casehold {

enum class Signal { none, see, see_eg, but_see, cf, accord, see_also, eg, other };
enum class ParentheticalKind { none, holding, other };

std::string_view to_string(Signal s);
std::string_view to_string(ParentheticalKind k);
Signal signal_from_string(std::string_view s);

/// A volume-reporter-page citation. Offsets are byte offsets into the text the
/// parser was run on. When a case name precedes the cite, `start` is the first
/// byte of the case name; otherwise it is the first byte of the volume.
struct CitationSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t volume_start = 0;
  std::optional<int> volume;
  std::string reporter;
  int first_page = 0;
  std::vector<int> pin_pages;
  std::optional<std::string> court;
  std::optional<int> year;
  Signal signal = Signal::none;
  std::optional<std::string> parenthetical_text;
  ParentheticalKind parenthetical_kind = ParentheticalKind::none;
  /// Content bounds of the explanatory parenthetical, parentheses excluded.
  /// Meaningful only when parenthetical_text is set.
  std::size_t parenthetical_start = 0;
  std::size_t parenthetical_end = 0;
};

/// Reporter abbreviations as written ("F. Supp. 2d"). Matching tolerates a
/// missing or extra single space after a period, so "F. Supp.2d" matches.
class ReporterLexicon {
 public:
  static ReporterLexicon builtin();
  /// One reporter per line; blank lines and lines starting with '#' ignored.
  static ReporterLexicon parse(std::string_view text);
  static ReporterLexicon load(const std::filesystem::path& path);

  explicit ReporterLexicon(std::vector<std::string> entries);

  /// Length in bytes of the longest reporter matched at text[pos], or 0.
  std::size_t match(std::string_view text, std::size_t pos) const;

  const std::vector<std::string>& entries() const { return entries_; }

 private:
  std::vector<std::string> entries_;
};

/// Closed set of introductory signals, matched case-insensitively.
class SignalLexicon {
 public:
  static SignalLexicon builtin();
  /// Lines of "<phrase>\t<kind>", kind one of see, see_eg, but_see, cf, accord,
  /// see_also, eg, other.
  static SignalLexicon parse(std::string_view text);
  static SignalLexicon load(const std::filesystem::path& path);

  explicit SignalLexicon(std::vector<std::pair<std::string, Signal>> phrases);

  const std::vector<std::pair<std::string, Signal>>& phrases() const { return phrases_; }
  /// True if the token (leading '(' and trailing ',' stripped) begins some phrase.
  bool is_leading_word(std::string_view token) const;

 private:
  std::vector<std::pair<std::string, Signal>> phrases_;  // longest first
  std::unordered_set<std::string> leading_words_;
};

/// Abbreviations whose trailing period never ends a sentence. Dotted
/// initialisms ("U.S.", "N.D.N.Y.") and single capital initials ("J.") are
/// recognized without being listed.
class AbbreviationLexicon {
 public:
  static AbbreviationLexicon builtin();
  static AbbreviationLexicon parse(std::string_view text);
  static AbbreviationLexicon load(const std::filesystem::path& path);

  explicit AbbreviationLexicon(std::vector<std::string> entries);

  /// `token` is a whitespace-delimited word ending in '.', possibly with
  /// leading punctuation such as '(' or a quote.
  bool is_abbreviation(std::string_view token) const;

 private:
  std::unordered_set<std::string> entries_;
};

struct ParserOptions {
  /// Classify "<Name>, J." parentheticals as other even if they begin with "Holding".
  bool judge_name_guard = false;
  /// Max characters between the end of a signal phrase and the case name.
  std::size_t signal_window = 12;
  /// How far back from the volume a case name may begin.
  std::size_t case_name_window = 250;
  std::size_t max_parenthetical_length = 5000;
};

/// True for text of the form "<Name>, J." or "<Name>, C.J." (judge attributions).
bool looks_like_judge_attribution(std::string_view parenthetical_text);

/// holding iff the first word token, lowercased, is "holding". With the judge
/// guard enabled, judge attributions are classified other.
ParentheticalKind classify_parenthetical(std::string_view parenthetical_text,
                                         bool judge_name_guard = false);

class CitationParser {
 public:
  CitationParser();
  CitationParser(ReporterLexicon reporters, SignalLexicon signals,
                 AbbreviationLexicon abbreviations, ParserOptions options = {});

  /// Non-overlapping spans sorted by start. Citations nested inside another
  /// citation's parenthetical are covered by the outer span and not reported.
  std::vector<CitationSpan> find_citations(std::string_view text) const;

  const ParserOptions& options() const { return options_; }
  const AbbreviationLexicon& abbreviations() const { return abbreviations_; }

 private:
  std::size_t find_case_name_start(std::string_view text, std::size_t lo,
                                   std::size_t volume_start) const;
  Signal detect_signal(std::string_view text, std::size_t lo, std::size_t start) const;

  ReporterLexicon reporters_;
  SignalLexicon signals_;
  AbbreviationLexicon abbreviations_;
  ParserOptions options_;
};

}  // namespace casehold
