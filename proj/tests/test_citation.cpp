#include <string>
#include <vector>

#include "casehold/builder.hpp"
#include "casehold/citation.hpp"
#include "casehold/segment.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace casehold;

namespace {

const char* kCommScope =
    "As explained above, however, Plaintiffs have adequately alleged that Defendants' "
    "unauthorized use caused consumer harm. See, e.g., CommScope, Inc. of N.C. v. CommScope "
    "(U.S.A) Int'l Grp. Co., 809 F. Supp.2d 33, 38 (N.D.N.Y 2011) (holding that plaintiff "
    "stated a 349 claim where plaintiff alleged facts plausibly suggesting that defendant "
    "intentionally registered its corporate name to be confusingly similar to plaintiffs "
    "CommScope trademark); New York City Triathlon, LLC v. NYC Triathlon";

std::string slice(const std::string& text, std::size_t b, std::size_t e) { return text.substr(b, e - b); }

}  // namespace

TEST_SUITE("citation") {

TEST_CASE("table 1 citing text parses to one holding citation") {
  std::string text = kCommScope;
  CitationParser parser;
  auto cites = parser.find_citations(text);
  REQUIRE(cites.size() == 1);
  const auto& c = cites[0];
  CHECK(slice(text, c.start, c.volume_start) == "CommScope, Inc. of N.C. v. CommScope (U.S.A) Int'l Grp. Co., ");
  CHECK(c.volume == 809);
  CHECK(c.reporter == "F. Supp.2d");
  CHECK(c.first_page == 33);
  CHECK(c.pin_pages == std::vector<int>{38});
  CHECK(c.court == "N.D.N.Y");
  CHECK(c.year == 2011);
  CHECK(c.signal == Signal::see_eg);
  CHECK(c.parenthetical_kind == ParentheticalKind::holding);
  CHECK(c.parenthetical_text->starts_with("holding that plaintiff stated a 349 claim"));
  CHECK(text[c.end - 1] == ')');
  CHECK(text[c.end] == ';');
}

TEST_CASE("table 1 prompt masks the holding and keeps the continuation") {
  CaseDecision d;
  d.decision_id = "delmonico";
  d.body_text = kCommScope;
  CitationParser parser;
  auto cites = parser.find_citations(d.body_text);
  auto cands = extract_holding_candidates(d, cites);
  REQUIRE(cands.size() == 1);
  BuilderConfig cfg;
  cfg.post_window = 60;
  auto prompt = build_prompt(d.body_text, cands[0], cfg);
  CHECK(prompt.ends_with("(N.D.N.Y 2011) (<HOLDING>); New York City Triathlon, LLC v. NYC Triathlon"));
  CHECK(prompt.starts_with("As explained above"));
  CHECK(prompt.find("holding that") == std::string::npos);
}

TEST_CASE("parenthetical classification") {
  CHECK(classify_parenthetical("holding that x") == ParentheticalKind::holding);
  CHECK(classify_parenthetical("Holding that x") == ParentheticalKind::holding);
  CHECK(classify_parenthetical("\"holding\" that x") == ParentheticalKind::holding);
  CHECK(classify_parenthetical("explaining and holding that x") == ParentheticalKind::other);
  CHECK(classify_parenthetical("holdings of the court") == ParentheticalKind::other);
  CHECK(classify_parenthetical("per curiam") == ParentheticalKind::other);
  CHECK(classify_parenthetical("Holding, J.") == ParentheticalKind::holding);
  CHECK(classify_parenthetical("Holding, J.", true) == ParentheticalKind::other);
  CHECK(classify_parenthetical("holding, J., dissenting", true) == ParentheticalKind::holding);
}

TEST_CASE("nested holding parentheticals are not separate citations") {
  std::string text =
      "See Abbott v. Baxter, 12 F.3d 45, 47 (2d Cir. 1999) (quoting Oakes v. Upton, 3 F.2d 4 "
      "(5th Cir. 1950) (holding that the lease survives)). We agree with that reasoning here.";
  CitationParser parser;
  auto cites = parser.find_citations(text);
  REQUIRE(cites.size() == 1);
  CHECK(cites[0].parenthetical_kind == ParentheticalKind::other);
  CHECK(cites[0].parenthetical_text->starts_with("quoting Oakes"));
}

TEST_CASE("holding parenthetical wins over an earlier other parenthetical") {
  std::string text = "Oakes v. Upton, 3 F.2d 4 (5th Cir. 1950) (en banc) (holding that it survives).";
  auto cites = CitationParser().find_citations(text);
  REQUIRE(cites.size() == 1);
  CHECK(cites[0].parenthetical_kind == ParentheticalKind::holding);
  CHECK(*cites[0].parenthetical_text == "holding that it survives");
  CHECK(cites[0].end == text.size() - 1);
}

TEST_CASE("parallel cites extend one span") {
  std::string text = "Roe v. Wade, 410 U.S. 113, 93 S. Ct. 705 (1973) (holding that x applies).";
  auto cites = CitationParser().find_citations(text);
  REQUIRE(cites.size() == 1);
  CHECK(cites[0].reporter == "U.S.");
  CHECK(cites[0].pin_pages.empty());
  CHECK(cites[0].year == 1973);
  CHECK(!cites[0].court.has_value());
  CHECK(cites[0].parenthetical_kind == ParentheticalKind::holding);
}

TEST_CASE("custom lexicons replace the builtins") {
  auto reporters = ReporterLexicon::parse("# test\nWidget Rep.\n");
  auto signals = SignalLexicon::parse("consider\tother\n");
  auto abbrevs = AbbreviationLexicon::parse("Wdg.\n");
  CitationParser parser(reporters, signals, abbrevs);
  std::string text = "Consider Acme v. Wdg. Co, 5 Widget Rep. 10 (1900). Also 5 F.3d 10 (1990).";
  auto cites = parser.find_citations(text);
  REQUIRE(cites.size() == 1);
  CHECK(cites[0].reporter == "Widget Rep.");
  CHECK(cites[0].signal == Signal::other);
  CHECK(slice(text, cites[0].start, cites[0].volume_start) == "Acme v. Wdg. Co, ");
  CHECK_THROWS_AS(SignalLexicon::parse("see\tnot_a_kind\n"), InputError);
  CHECK_THROWS_AS(ReporterLexicon::parse("# nothing\n"), ConfigError);
}

TEST_CASE("every fixture citation parses with exact fields") {
  CitationParser parser;
  auto records = fixtures::citation_records();
  REQUIRE(records.size() >= 100);
  std::size_t total = 0;
  for (const auto& rec : records) {
    std::string text = rec["text"];
    auto cites = parser.find_citations(text);
    const auto& want = rec["citations"];
    INFO(text);
    REQUIRE(cites.size() == want.size());
    for (std::size_t k = 0; k < cites.size(); ++k, ++total) {
      const auto& c = cites[k];
      const auto& w = want[k];
      CHECK(c.start == w["start"].get<std::size_t>());
      CHECK(c.end == w["end"].get<std::size_t>());
      CHECK(c.volume == w["volume"].get<int>());
      CHECK(c.reporter == w["reporter"].get<std::string>());
      CHECK(c.first_page == w["first_page"].get<int>());
      CHECK(c.pin_pages == w["pin_pages"].get<std::vector<int>>());
      if (w["court"].is_null()) {
        CHECK(!c.court.has_value());
      } else {
        CHECK(c.court == w["court"].get<std::string>());
      }
      CHECK(c.year == w["year"].get<int>());
      CHECK(to_string(c.signal) == w["signal"].get<std::string>());
      CHECK(to_string(c.parenthetical_kind) == w["parenthetical_kind"].get<std::string>());
      if (w["parenthetical_text"].is_null()) {
        CHECK(!c.parenthetical_text.has_value());
      } else {
        CHECK(c.parenthetical_text == w["parenthetical_text"].get<std::string>());
        CHECK(c.parenthetical_start == w["parenthetical_start"].get<std::size_t>());
        CHECK(c.parenthetical_end == w["parenthetical_end"].get<std::size_t>());
      }
    }
  }
  CHECK(total >= 100);
}

TEST_CASE("no citation straddles a sentence boundary in the fixture") {
  CitationParser parser;
  for (const auto& rec : fixtures::citation_records()) {
    std::string text = rec["text"];
    auto cites = parser.find_citations(text);
    auto spans = segment_sentences(text, cites);
    for (const auto& c : cites)
      for (const auto& s : spans) {
        bool disjoint = c.end <= s.start || c.start >= s.end;
        bool inside = c.start >= s.start && c.end <= s.end;
        CHECK((disjoint || inside));
      }
    std::vector<std::string> got;
    for (const auto& s : spans) got.push_back(slice(text, s.start, s.end));
    CHECK(got == rec["sentences"].get<std::vector<std::string>>());
    CHECK(sentences_for_text(text, parser) == rec["kept_sentences"].get<std::vector<std::string>>());
  }
}

TEST_CASE("short sentences are removed") {
  std::string text = "We affirm. The trial court erred in its ruling. So ordered. Reversed.";
  auto spans = segment_sentences(text, {});
  REQUIRE(spans.size() == 4);
  auto kept = filter_short_sentences(spans, 3);
  REQUIRE(kept.size() == 1);
  CHECK(slice(text, kept[0].start, kept[0].end) == "The trial court erred in its ruling.");
  for (const auto& s : kept) CHECK(s.word_count >= 3);
}

TEST_CASE("abbreviations and initialisms do not end sentences") {
  std::string text = "Mr. Smith sued the U.S. Government on Jan. 5. Dr. Jones testified. Id. at 4.";
  auto spans = segment_sentences(text, {});
  REQUIRE(spans.size() == 3);
  CHECK(slice(text, spans[0].start, spans[0].end) == "Mr. Smith sued the U.S. Government on Jan. 5.");
}

}  // TEST_SUITE
