#include "casehold/citation.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "casehold/util.hpp"

namespace casehold {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_alpha(char c) { return is_upper(c) || is_lower(c); }
bool is_alnum(char c) { return is_alpha(c) || is_digit(c); }

std::vector<std::string> lexicon_lines(std::string_view text) {
  std::vector<std::string> out;
  for (auto line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    out.emplace_back(t);
  }
  return out;
}

constexpr std::array kBuiltinReporters = {
    // federal
    "U.S.", "S. Ct.", "L. Ed.", "L. Ed. 2d", "F.", "F.2d", "F.3d", "F.4th", "F. Supp.",
    "F. Supp. 2d", "F. Supp. 3d", "F. App'x", "Fed. Appx.", "F.R.D.", "B.R.", "Fed. Cl.",
    "Cl. Ct.", "Ct. Cl.", "T.C.", "M.J.", "Vet. App.", "U.S.P.Q.2d",
    // regional
    "A.", "A.2d", "A.3d", "N.E.", "N.E.2d", "N.E.3d", "N.W.", "N.W.2d", "P.", "P.2d", "P.3d",
    "S.E.", "S.E.2d", "S.W.", "S.W.2d", "S.W.3d", "So.", "So. 2d", "So. 3d",
    // state
    "Cal. Rptr.", "Cal. Rptr. 2d", "Cal. Rptr. 3d", "Cal.", "Cal. 2d", "Cal. 3d", "Cal. 4th",
    "Cal. App.", "Cal. App. 2d", "Cal. App. 3d", "Cal. App. 4th", "N.Y.", "N.Y.2d", "N.Y.3d",
    "N.Y.S.", "N.Y.S.2d", "N.Y.S.3d", "A.D.", "A.D.2d", "A.D.3d", "Misc.", "Misc. 2d",
    "Misc. 3d", "Ill.", "Ill. 2d", "Ill. App.", "Ill. App. 2d", "Ill. App. 3d", "Ill. Dec.",
    "Mass.", "Mass. App. Ct.", "Pa.", "Pa. Super.", "Pa. Commw.", "Mich.", "Mich. App.",
    "Wis. 2d", "Wash. 2d", "Wash. App.", "N.J.", "N.J. Super.", "Ohio St. 3d", "Ohio App. 3d",
    "Tex.", "Fla.", "Ga.", "Ga. App.", "Conn.", "Conn. App.", "Md.", "Md. App.", "Va.",
    "Minn.", "Mo.", "Iowa", "Kan.", "Neb.", "Or.", "Or. App.", "Ariz.", "Colo.", "N.C.",
    "N.C. App.", "S.C.", "Wn.2d", "Wn. App.",
};

// Longest first so "see, e.g.," wins over "see" and "e.g.,".
const std::vector<std::pair<std::string, Signal>>& builtin_signals() {
  static const std::vector<std::pair<std::string, Signal>> kSignals = {
      {"see, e.g.,", Signal::see_eg},   {"see e.g.,", Signal::see_eg},
      {"see, e.g.", Signal::see_eg},    {"but see, e.g.,", Signal::but_see},
      {"but see", Signal::but_see},     {"see also, e.g.,", Signal::see_also},
      {"see also", Signal::see_also},   {"see generally", Signal::other},
      {"but cf.", Signal::other},       {"cf., e.g.,", Signal::cf},
      {"cf.", Signal::cf},              {"compare", Signal::other},
      {"contra", Signal::other},        {"accord", Signal::accord},
      {"e.g.,", Signal::eg},            {"e.g.", Signal::eg},
      {"see", Signal::see},
  };
  return kSignals;
}

constexpr std::array kBuiltinAbbreviations = {
    "v.",     "vs.",    "Inc.",    "Co.",    "Corp.",  "Ltd.",   "Cir.",    "Supp.",  "App.",
    "Ct.",    "Dist.",  "Civ.",    "Crim.",  "Proc.",  "Stat.",  "Ann.",    "Rev.",   "Mr.",
    "Mrs.",   "Ms.",    "Dr.",     "Jr.",    "Sr.",    "St.",    "No.",     "Nos.",   "Fed.",
    "Reg.",   "Gen.",   "Dep't.",  "Ass'n.", "Int'l.", "Grp.",   "Bros.",   "Ry.",    "Mfg.",
    "Jan.",   "Feb.",   "Mar.",    "Apr.",   "Jun.",   "Jul.",   "Aug.",    "Sep.",   "Sept.",
    "Oct.",   "Nov.",   "Dec.",    "al.",    "Mem.",   "Defs.",  "Pls.",    "Def.",   "Pl.",
    "Op.",    "Br.",    "Tr.",     "Rptr.",  "Ed.",    "Cal.",   "Md.",     "Pa.",    "Ill.",
    "Mich.",  "Mass.",  "Wash.",   "Fla.",   "Tex.",   "Ga.",    "Ariz.",   "Colo.",  "Conn.",
    "Del.",   "Ind.",   "Kan.",    "Ky.",    "La.",    "Minn.",  "Miss.",   "Mo.",    "Mont.",
    "Neb.",   "Nev.",   "Okla.",   "Tenn.",  "Vt.",    "Va.",    "Wis.",    "Wyo.",   "So.",
    "Misc.",  "Sup.",   "Super.",  "Bankr.", "Mun.",   "Cty.",   "Twp.",    "Gov't.", "Comm'n.",
    "Nat'l.", "Hosp.",  "Univ.",   "Auth.",  "Sch.",   "Educ.",  "Ins.",    "Mut.",   "Sec.",
    "Exch.",  "Dept.",  "Ctr.",    "Sys.",   "Servs.", "Indus.", "Bd.",     "Comm.",  "Cnty.",
    "Mgmt.",  "Assocs.", "Agric.", "Transp.", "Elec.", "Fin.",   "Pharm.",  "Tech.",  "Commw.",
    "Commc'ns.", "Entm't.", "Prods.", "Ent.", "Envtl.", "Pub.",  "Admin.",  "Cas.",   "Sav.",
    "Tel.",   "Tp.",    "Par.",    "Hous.",  "Am.",    "Cmty.",  "Prof.",   "Cf.",    "cf.",
    "ch.",    "cl.",    "art.",    "pt.",    "para.",  "n.",     "nn.",     "pp.",    "p.",
    "Ex.",    "Doc.",   "Rec.",    "Hr'g.",  "Mot.",   "Ord.",   "Resp.",   "Opp'n.", "Ch.",
    "Fig.",   "Vol.",   "Mt.",     "Ave.",   "Blvd.",  "Rd.",    "Ft.",     "Hon.",   "Rep.",
    "Sen.",   "Gov.",   "Pres.",   "Capt.",  "Sgt.",   "Lt.",    "Col.",    "Gen.",   "Adm.",
    "Maj.",   "Cpl.",   "Pvt.",    "Det.",   "Off.",   "Insp.",  "Supt.",   "Atty.",  "Esq.",
    "Ph.D.",  "approx.", "viz.",   "etc.",   "Id.",    "id.",    "Ibid.",   "ibid.",
};

std::string squeeze_token_core(std::string_view token) {
  while (!token.empty() && (token.front() == '(' || token.front() == '"' || token.front() == '['))
    token.remove_prefix(1);
  while (!token.empty() && token.back() == ',') token.remove_suffix(1);
  return std::string(token);
}

bool is_initialism(std::string_view core) {
  // ([A-Za-z]\.){2,} or a single capital initial.
  if (core.size() == 2 && is_upper(core[0]) && core[1] == '.') return true;
  if (core.size() < 4 || core.size() % 2 != 0) return false;
  for (std::size_t i = 0; i < core.size(); i += 2)
    if (!is_alpha(core[i]) || core[i + 1] != '.') return false;
  return true;
}

const std::unordered_set<std::string>& connector_words() {
  static const std::unordered_set<std::string> kWords = {
      "of", "the", "and", "for", "in", "on", "at", "de", "del", "la", "le", "ex", "rel.",
      "v.", "v", "vs.", "et", "al.", "to", "by", "&", "re", "parte", "d/b/a", "a/k/a", "von", "van",
      "du", "des", "da", "di", "y", "an", "a", "upon", "with", "from"};
  return kWords;
}

struct Parenthetical {
  std::size_t open = 0;   // index of '('
  std::size_t close = 0;  // index of ')'
};

std::optional<Parenthetical> balanced_parenthetical(std::string_view text, std::size_t open,
                                                    std::size_t max_len) {
  if (open >= text.size() || text[open] != '(') return std::nullopt;
  int depth = 0;
  std::size_t limit = std::min(text.size(), open + max_len);
  for (std::size_t i = open; i < limit; ++i) {
    if (text[i] == '(') {
      ++depth;
    } else if (text[i] == ')') {
      if (--depth == 0) return Parenthetical{open, i};
    }
  }
  return std::nullopt;
}

std::size_t skip_spaces(std::string_view text, std::size_t pos) {
  while (pos < text.size() && text[pos] == ' ') ++pos;
  return pos;
}

std::size_t digit_run_end(std::string_view text, std::size_t pos) {
  while (pos < text.size() && is_digit(text[pos])) ++pos;
  return pos;
}

struct CourtYear {
  std::optional<std::string> court;
  int year = 0;
};

std::optional<CourtYear> parse_court_year(std::string_view content) {
  content = trim(content);
  if (content.size() < 4) return std::nullopt;
  auto year_text = content.substr(content.size() - 4);
  if (!std::all_of(year_text.begin(), year_text.end(), is_digit)) return std::nullopt;
  if (content.size() > 4) {
    char before = content[content.size() - 5];
    if (is_alnum(before) && !is_upper(before) && before != '.') return std::nullopt;
    if (is_digit(before)) return std::nullopt;
  }
  int year = static_cast<int>(parse_int(year_text));
  if (year < 1600 || year > 2099) return std::nullopt;
  auto court = trim(content.substr(0, content.size() - 4));
  while (!court.empty() && court.back() == ',') court = trim(court.substr(0, court.size() - 1));
  if (court.find_first_of("()") != std::string_view::npos) return std::nullopt;
  if (!court.empty() && (is_lower(court.front()) || count_words(court) > 8)) return std::nullopt;
  CourtYear cy;
  cy.year = year;
  if (!court.empty()) cy.court = std::string(court);
  return cy;
}

}  // namespace

std::string_view to_string(Signal s) {
  switch (s) {
    case Signal::none: return "none";
    case Signal::see: return "see";
    case Signal::see_eg: return "see_eg";
    case Signal::but_see: return "but_see";
    case Signal::cf: return "cf";
    case Signal::accord: return "accord";
    case Signal::see_also: return "see_also";
    case Signal::eg: return "eg";
    case Signal::other: return "other";
  }
  return "none";
}

std::string_view to_string(ParentheticalKind k) {
  switch (k) {
    case ParentheticalKind::none: return "none";
    case ParentheticalKind::holding: return "holding";
    case ParentheticalKind::other: return "other";
  }
  return "none";
}

Signal signal_from_string(std::string_view s) {
  for (Signal v : {Signal::none, Signal::see, Signal::see_eg, Signal::but_see, Signal::cf,
                   Signal::accord, Signal::see_also, Signal::eg, Signal::other})
    if (to_string(v) == s) return v;
  throw InputError("unknown signal kind '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Lexicons

ReporterLexicon::ReporterLexicon(std::vector<std::string> entries) : entries_(std::move(entries)) {
  std::erase_if(entries_, [](const std::string& e) { return trim(e).empty(); });
  if (entries_.empty()) throw ConfigError("reporter lexicon is empty");
}

ReporterLexicon ReporterLexicon::builtin() {
  return ReporterLexicon(std::vector<std::string>(kBuiltinReporters.begin(), kBuiltinReporters.end()));
}

ReporterLexicon ReporterLexicon::parse(std::string_view text) {
  return ReporterLexicon(lexicon_lines(text));
}

ReporterLexicon ReporterLexicon::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

std::size_t ReporterLexicon::match(std::string_view text, std::size_t pos) const {
  std::size_t best = 0;
  for (const auto& entry : entries_) {
    std::size_t t = pos;
    bool ok = true;
    for (std::size_t e = 0; e < entry.size() && ok; ++e) {
      char c = entry[e];
      if (c == ' ') {
        if (t < text.size() && text[t] == ' ') ++t;
        continue;
      }
      if (e > 0 && entry[e - 1] == '.' && t + 1 < text.size() && text[t] == ' ' && text[t + 1] == c)
        ++t;
      if (t < text.size() && text[t] == c) {
        ++t;
      } else {
        ok = false;
      }
    }
    // A reporter is always followed by " <page>".
    if (ok && t + 1 < text.size() && text[t] == ' ' && is_digit(text[t + 1]) && t - pos > best)
      best = t - pos;
  }
  return best;
}

SignalLexicon::SignalLexicon(std::vector<std::pair<std::string, Signal>> phrases)
    : phrases_(std::move(phrases)) {
  for (auto& [phrase, kind] : phrases_) phrase = to_lower_ascii(trim(phrase));
  std::stable_sort(phrases_.begin(), phrases_.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
  for (const auto& [phrase, kind] : phrases_) {
    auto first = phrase.substr(0, phrase.find(' '));
    leading_words_.insert(squeeze_token_core(first));
  }
}

SignalLexicon SignalLexicon::builtin() { return SignalLexicon(builtin_signals()); }

SignalLexicon SignalLexicon::parse(std::string_view text) {
  std::vector<std::pair<std::string, Signal>> phrases;
  for (const auto& line : lexicon_lines(text)) {
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw InputError("signal lexicon line lacks a tab: " + line);
    phrases.emplace_back(line.substr(0, tab), signal_from_string(trim(std::string_view(line).substr(tab + 1))));
  }
  return SignalLexicon(std::move(phrases));
}

SignalLexicon SignalLexicon::load(const std::filesystem::path& path) { return parse(read_file(path)); }

bool SignalLexicon::is_leading_word(std::string_view token) const {
  return leading_words_.contains(to_lower_ascii(squeeze_token_core(token)));
}

AbbreviationLexicon::AbbreviationLexicon(std::vector<std::string> entries)
    : entries_(entries.begin(), entries.end()) {}

AbbreviationLexicon AbbreviationLexicon::builtin() {
  return AbbreviationLexicon(
      std::vector<std::string>(kBuiltinAbbreviations.begin(), kBuiltinAbbreviations.end()));
}

AbbreviationLexicon AbbreviationLexicon::parse(std::string_view text) {
  return AbbreviationLexicon(lexicon_lines(text));
}

AbbreviationLexicon AbbreviationLexicon::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

bool AbbreviationLexicon::is_abbreviation(std::string_view token) const {
  auto core = squeeze_token_core(token);
  if (core.empty() || core.back() != '.') return false;
  return entries_.contains(core) || is_initialism(core);
}

// ---------------------------------------------------------------------------
// Parentheticals

bool looks_like_judge_attribution(std::string_view text) {
  text = trim(text);
  std::size_t i = 0;
  if (i >= text.size() || !is_upper(text[i])) return false;
  while (i < text.size() && (is_alpha(text[i]) || text[i] == '\'' || text[i] == '-')) ++i;
  if (i < 2 || i >= text.size() || text[i] != ',') return false;
  auto rest = trim(text.substr(i + 1));
  return rest.starts_with("J.") || rest.starts_with("C.J.") || rest.starts_with("C. J.") ||
         rest.starts_with("JJ.");
}

ParentheticalKind classify_parenthetical(std::string_view text, bool judge_name_guard) {
  std::size_t i = 0;
  while (i < text.size() && !is_alnum(text[i])) ++i;
  std::size_t j = i;
  while (j < text.size() && is_alpha(text[j])) ++j;
  if (to_lower_ascii(text.substr(i, j - i)) != "holding") return ParentheticalKind::other;
  if (judge_name_guard && looks_like_judge_attribution(text)) return ParentheticalKind::other;
  return ParentheticalKind::holding;
}

// ---------------------------------------------------------------------------
// Parser

CitationParser::CitationParser()
    : CitationParser(ReporterLexicon::builtin(), SignalLexicon::builtin(),
                     AbbreviationLexicon::builtin()) {}

CitationParser::CitationParser(ReporterLexicon reporters, SignalLexicon signals,
                               AbbreviationLexicon abbreviations, ParserOptions options)
    : reporters_(std::move(reporters)),
      signals_(std::move(signals)),
      abbreviations_(std::move(abbreviations)),
      options_(options) {}

std::size_t CitationParser::find_case_name_start(std::string_view text, std::size_t lo,
                                                 std::size_t volume_start) const {
  std::size_t p = volume_start;
  while (p > lo && text[p - 1] == ' ') --p;
  if (p == lo || text[p - 1] != ',') return volume_start;
  std::size_t cursor = p - 1;

  const auto& connectors = connector_words();
  std::size_t name_start = std::string_view::npos;
  bool saw_marker = false;
  bool right_is_capitalized = false;
  std::string right_lower;
  for (int tokens = 0; tokens < 40; ++tokens) {
    while (cursor > lo && text[cursor - 1] == ' ') --cursor;
    if (cursor == lo) break;
    std::size_t begin = cursor;
    while (begin > lo && text[begin - 1] != ' ') --begin;
    auto token = text.substr(begin, cursor - begin);
    auto core = squeeze_token_core(token);
    if (core.empty()) break;
    char last = token.back();
    if (last == ';' || last == ':') break;
    if (signals_.is_leading_word(token)) break;
    // A period that is not an abbreviation ends the previous sentence.
    if (core.back() == '.' && core != "v." && !abbreviations_.is_abbreviation(core) &&
        right_is_capitalized)
      break;

    std::string lower = to_lower_ascii(core);
    bool capitalized = false;
    std::size_t k = 0;
    while (k < core.size() && (core[k] == '(' || core[k] == '"' || core[k] == '\'')) ++k;
    if (k < core.size() && (is_upper(core[k]) || is_digit(core[k]))) capitalized = true;

    if ((lower == "in" && right_lower == "re") || (lower == "ex" && right_lower == "parte")) {
      saw_marker = true;
      if (capitalized) name_start = begin;
    } else if (connectors.contains(lower) || connectors.contains(core)) {
      if (lower == "v." || lower == "v" || lower == "vs." || lower == "re" || lower == "parte" ||
          lower == "rel.")
        saw_marker = true;
    } else if (capitalized || core == "&") {
      if (lower == "matter") saw_marker = true;
      name_start = begin;
      while (name_start < cursor && (text[name_start] == '"' || text[name_start] == '['))
        ++name_start;
    } else {
      break;
    }
    right_is_capitalized = capitalized;
    right_lower = std::move(lower);
    cursor = begin;
  }
  if (!saw_marker || name_start == std::string_view::npos) return volume_start;
  // An unmatched '(' inside the candidate name means we walked out of an
  // enclosing parenthetical.
  int depth = 0;
  for (std::size_t i = name_start; i < volume_start; ++i) {
    if (text[i] == '(') ++depth;
    if (text[i] == ')') --depth;
    if (depth < 0) return volume_start;
  }
  if (depth != 0) return volume_start;
  return name_start;
}

Signal CitationParser::detect_signal(std::string_view text, std::size_t lo,
                                     std::size_t start) const {
  Signal best = Signal::none;
  std::size_t best_gap = std::string_view::npos;
  std::size_t best_len = 0;
  for (std::size_t gap = 0; gap <= options_.signal_window && gap <= start - lo; ++gap) {
    std::size_t e = start - gap;
    if (gap > 0 && is_alnum(text[e])) break;  // only punctuation/space may separate
    for (const auto& [phrase, kind] : signals_.phrases()) {
      if (phrase.size() > e - lo) continue;
      std::size_t b = e - phrase.size();
      if (b > 0 && is_alnum(text[b - 1])) continue;
      if (to_lower_ascii(text.substr(b, phrase.size())) != phrase) continue;
      if (gap < best_gap || (gap == best_gap && phrase.size() > best_len)) {
        best = kind;
        best_gap = gap;
        best_len = phrase.size();
      }
    }
    if (best_gap != std::string_view::npos) break;
  }
  return best;
}

std::vector<CitationSpan> CitationParser::find_citations(std::string_view text) const {
  std::vector<CitationSpan> out;
  std::size_t prev_end = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_digit(text[i]) || (i > 0 && (is_alnum(text[i - 1]) || text[i - 1] == '.'))) {
      ++i;
      continue;
    }
    std::size_t vol_end = digit_run_end(text, i);
    if (vol_end - i > 4 || vol_end >= text.size() || text[vol_end] != ' ') {
      i = vol_end;
      continue;
    }
    std::size_t reporter_pos = vol_end + 1;
    std::size_t reporter_len = reporters_.match(text, reporter_pos);
    if (reporter_len == 0) {
      i = vol_end;
      continue;
    }
    std::size_t page_pos = reporter_pos + reporter_len + 1;
    std::size_t page_end = digit_run_end(text, page_pos);
    if (page_end - page_pos > 6 || (page_end < text.size() && is_alpha(text[page_end]))) {
      i = vol_end;
      continue;
    }

    CitationSpan span;
    span.volume_start = i;
    span.volume = static_cast<int>(parse_int(text.substr(i, vol_end - i)));
    span.reporter = std::string(text.substr(reporter_pos, reporter_len));
    span.first_page = static_cast<int>(parse_int(text.substr(page_pos, page_end - page_pos)));

    std::size_t cur = page_end;
    // Pin cites: ", 38" or ", 38-39". A parallel cite (", 93 S. Ct. 705")
    // extends the span; its pins are not recorded.
    bool in_parallel = false;
    while (cur + 2 < text.size() && text[cur] == ',' && text[cur + 1] == ' ' &&
           is_digit(text[cur + 2])) {
      std::size_t pin_end = digit_run_end(text, cur + 2);
      if (pin_end < text.size() && text[pin_end] == ' ' && pin_end - (cur + 2) <= 4) {
        if (std::size_t rlen = reporters_.match(text, pin_end + 1); rlen > 0) {
          std::size_t ppos = pin_end + 1 + rlen + 1;
          std::size_t pend = digit_run_end(text, ppos);
          if (pend == ppos || pend - ppos > 6 || (pend < text.size() && is_alpha(text[pend]))) break;
          cur = pend;
          in_parallel = true;
          continue;
        }
      }
      std::size_t after = pin_end;
      if (after + 1 < text.size() && (text[after] == '-') && is_digit(text[after + 1])) {
        after = digit_run_end(text, after + 1);
      } else if (text.substr(after).starts_with("\xE2\x80\x93") && after + 3 < text.size() &&
                 is_digit(text[after + 3])) {
        after = digit_run_end(text, after + 3);
      }
      if (after < text.size() && is_alpha(text[after])) break;
      if (!in_parallel)
        span.pin_pages.push_back(static_cast<int>(parse_int(text.substr(cur + 2, pin_end - cur - 2))));
      cur = after;
    }

    std::size_t end = cur;
    std::size_t q = skip_spaces(text, cur);
    if (auto paren = balanced_parenthetical(text, q, options_.max_parenthetical_length)) {
      if (auto cy = parse_court_year(text.substr(paren->open + 1, paren->close - paren->open - 1))) {
        span.court = cy->court;
        span.year = cy->year;
        end = paren->close + 1;
        q = skip_spaces(text, end);
      }
    }
    // Trailing explanatory parentheticals; a holding parenthetical wins over others.
    std::optional<Parenthetical> chosen;
    ParentheticalKind chosen_kind = ParentheticalKind::none;
    while (auto paren = balanced_parenthetical(text, q, options_.max_parenthetical_length)) {
      auto content = text.substr(paren->open + 1, paren->close - paren->open - 1);
      auto kind = classify_parenthetical(content, options_.judge_name_guard);
      if (!chosen || (chosen_kind != ParentheticalKind::holding && kind == ParentheticalKind::holding)) {
        chosen = paren;
        chosen_kind = kind;
      }
      end = paren->close + 1;
      q = skip_spaces(text, end);
    }
    if (chosen) {
      span.parenthetical_start = chosen->open + 1;
      span.parenthetical_end = chosen->close;
      span.parenthetical_text =
          std::string(text.substr(span.parenthetical_start, span.parenthetical_end - span.parenthetical_start));
      span.parenthetical_kind = chosen_kind;
    }

    std::size_t lo = std::max(prev_end, i > options_.case_name_window ? i - options_.case_name_window : 0);
    span.start = find_case_name_start(text, lo, i);
    span.end = end;
    std::size_t signal_lo = std::max(prev_end, span.start > 40 ? span.start - 40 : 0);
    span.signal = detect_signal(text, signal_lo, span.start);

    prev_end = end;
    i = end;
    out.push_back(std::move(span));
  }
  return out;
}

}  // namespace casehold
