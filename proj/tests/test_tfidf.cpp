#include <cmath>
#include <string>
#include <unordered_set>
#include <vector>

#include "casehold/tfidf.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace casehold;

namespace {

const std::vector<std::string> kWords = {
    "holding", "that", "the", "statute", "bars", "recovery", "of", "damages", "a", "landlord",
    "tenant", "lease", "breach", "notice", "Court", "APPEAL", "insurer", "duty", "defend", "claim",
    "café", "naïve", "2001", "42", "U.S.C.", "§1983", "non-compete", "trustee's", "waiver", "estoppel"};

std::vector<TfidfDocument> random_docs(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TfidfDocument> docs;
  for (std::size_t i = 0; i < n; ++i) {
    std::string text;
    std::size_t len = 3 + rng.below(25);
    for (std::size_t w = 0; w < len; ++w) {
      // Skewed draw so some words are common and some rare.
      auto a = rng.below(kWords.size()), b = rng.below(kWords.size());
      text += kWords[std::min(a, b)] + (rng.bernoulli(0.1) ? ", " : " ");
    }
    docs.push_back({"doc" + std::to_string(1000 + i), text});
  }
  return docs;
}

fixtures::DenseTfidf dense_of(const std::vector<TfidfDocument>& docs) {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& d : docs) pairs.emplace_back(d.id, d.text);
  return fixtures::DenseTfidf(pairs);
}

}  // namespace

TEST_SUITE("tfidf") {

TEST_CASE("tokenizer") {
  CHECK(tfidf_tokenize("The Court's HOLDING, 42 U.S.C. café") ==
        std::vector<std::string>{"the", "court", "s", "holding", "42", "u", "s", "c", "café"});
  CHECK(tfidf_tokenize(" ,. ").empty());
}

TEST_CASE("hand computed idf and weights") {
  // N = 2, df(a) = 2, df(b) = 1.
  std::vector<TfidfDocument> docs{{"x", "a a b"}, {"y", "a"}};
  auto index = TfidfIndex::build(docs);
  REQUIRE(index.terms() == std::vector<std::string>{"a", "b"});
  double idf_a = std::log(3.0 / 3.0) + 1.0, idf_b = std::log(3.0 / 2.0) + 1.0;
  CHECK(index.idf()[0] == doctest::Approx(idf_a).epsilon(1e-15));
  CHECK(index.idf()[1] == doctest::Approx(idf_b).epsilon(1e-15));
  double wa = 2 * idf_a, wb = idf_b, norm = std::sqrt(wa * wa + wb * wb);
  const auto& row = index.vector(index.row_of("x"));
  REQUIRE(row.entries.size() == 2);
  CHECK(row.entries[0].weight == doctest::Approx(wa / norm).epsilon(1e-15));
  CHECK(row.entries[1].weight == doctest::Approx(wb / norm).epsilon(1e-15));
  CHECK(cosine(index.vector(0), index.vector(1)) == doctest::Approx(wa / norm).epsilon(1e-15));
}

TEST_CASE("pairwise cosines match the dense oracle on 50 documents") {
  auto docs = random_docs(50, 11);
  auto index = TfidfIndex::build(docs);
  auto dense = dense_of(docs);
  REQUIRE(index.terms() == dense.vocab);
  double worst = 0.0;
  for (std::size_t a = 0; a < docs.size(); ++a)
    for (std::size_t b = 0; b < docs.size(); ++b) {
      double got = cosine(index.vector(index.row_of(docs[a].id)), index.vector(index.row_of(docs[b].id)));
      worst = std::max(worst, std::abs(got - dense.cosine(a, b)));
    }
  CHECK(worst < 1e-9);
}

TEST_CASE("vectors are unit length and sorted") {
  auto index = TfidfIndex::build(random_docs(30, 5));
  for (std::size_t r = 0; r < index.size(); ++r) {
    const auto& v = index.vector(r);
    CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 1; i < v.entries.size(); ++i) CHECK(v.entries[i - 1].index < v.entries[i].index);
  }
}

TEST_CASE("top-k below threshold equals brute force") {
  auto docs = random_docs(120, 23);
  auto index = TfidfIndex::build(docs);
  auto dense = dense_of(docs);
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const auto& query = docs[rng.below(docs.size())].id;
    double upper = 0.3 + 0.7 * rng.uniform01();
    std::size_t k = 1 + rng.below(6);
    std::unordered_set<std::string> exclude;
    for (int e = 0; e < 5; ++e) exclude.insert(docs[rng.below(docs.size())].id);
    auto want = dense.top_k(query, k, upper, exclude);
    if (want.size() < k) {
      CHECK_THROWS_AS(index.top_k_below_threshold(query, k, upper, exclude), InsufficientPool);
      continue;
    }
    auto got = index.top_k_below_threshold(query, k, upper, exclude);
    CHECK(got == want);
    auto ranked = index.ranked_below_threshold(query, k, upper, exclude);
    for (const auto& [id, c] : ranked) {
      CHECK(c < upper);
      CHECK(c == doctest::Approx(dense.cosine(dense.row_of(query), dense.row_of(id))).epsilon(1e-9));
    }
  }
}

TEST_CASE("ties break by ascending id and zero-overlap documents fill in") {
  std::vector<TfidfDocument> docs{{"q", "alpha beta"}, {"d3", "alpha gamma"}, {"d1", "alpha gamma"},
                                  {"d2", "zeta"}, {"d0", "eta"}};
  auto index = TfidfIndex::build(docs);
  auto got = index.top_k_below_threshold("q", 4, 0.75, {});
  CHECK(got == std::vector<std::string>{"d1", "d3", "d0", "d2"});
  CHECK_THROWS_AS(index.top_k_below_threshold("q", 5, 0.75, {}), InsufficientPool);
  try {
    index.top_k_below_threshold("q", 4, 0.75, {"d0"});
    FAIL("expected InsufficientPool");
  } catch (const InsufficientPool& e) {
    CHECK(e.eligible() == 3);
    CHECK(e.requested() == 4);
  }
}

TEST_CASE("empty documents and duplicate ids") {
  std::vector<TfidfDocument> docs{{"a", "word"}, {"b", " -- "}};
  auto index = TfidfIndex::build(docs);
  CHECK(index.empty_docs() == std::vector<std::string>{"b"});
  CHECK(index.vector(index.row_of("b")).empty());
  std::vector<TfidfDocument> dup{{"a", "x"}, {"a", "y"}};
  CHECK_THROWS_AS(TfidfIndex::build(dup), std::invalid_argument);
  CHECK_THROWS_AS(index.row_of("zzz"), std::out_of_range);
}

TEST_CASE("serialization round trips exactly") {
  auto index = TfidfIndex::build(random_docs(40, 8));
  auto text = index.serialize();
  auto back = TfidfIndex::deserialize(text);
  CHECK(back.serialize() == text);
  CHECK(back.doc_ids() == index.doc_ids());
  for (std::size_t r = 0; r < index.size(); ++r) CHECK(back.vector(r) == index.vector(r));
  CHECK(back.top_k_below_threshold(index.doc_ids()[0], 3, 0.75, {}) ==
        index.top_k_below_threshold(index.doc_ids()[0], 3, 0.75, {}));
  CHECK_THROWS(TfidfIndex::deserialize("garbage"));
}

TEST_CASE("vectorize uses the fitted vocabulary") {
  auto docs = random_docs(20, 3);
  auto index = TfidfIndex::build(docs);
  CHECK(index.vectorize(docs[4].text) == index.vector(index.row_of(docs[4].id)));
  CHECK(index.vectorize("unseenword").empty());
}

}  // TEST_SUITE
