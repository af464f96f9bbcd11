#pragma once

// Shared fixture loaders and brute-force oracles for the test binaries.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "casehold/util.hpp"
#include "json.hpp"

namespace fixtures {

inline std::filesystem::path data_dir() { return CASEHOLD_TEST_DATA; }

inline nlohmann::json corpus_truth() {
  return nlohmann::json::parse(casehold::read_file(data_dir() / "corpus_200_truth.json"));
}

inline std::vector<nlohmann::json> citation_records() {
  std::vector<nlohmann::json> out;
  const std::string text = casehold::read_file(data_dir() / "citations.jsonl");
  for (auto line : casehold::split(text, '\n'))
    if (!casehold::trim(line).empty()) out.push_back(nlohmann::json::parse(line));
  return out;
}

/// Fresh scratch directory under the build tree's temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("casehold_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Test vocabulary over a sentence corpus: special tokens, words seen at least
/// `min_count` times, a few suffix pieces, and every byte seen as a
/// word-initial and a continuation piece so nothing maps to [UNK].
inline std::vector<std::string> test_vocab_tokens(const std::vector<std::vector<std::string>>& docs,
                                                  std::size_t min_count = 5) {
  std::map<std::string, std::size_t> counts;
  std::set<std::string> chars;
  for (const auto& doc : docs)
    for (const auto& sentence : doc) {
      std::string word;
      auto flush = [&] {
        if (!word.empty()) ++counts[word];
        word.clear();
      };
      for (char c : sentence) {
        unsigned char u = static_cast<unsigned char>(c);
        if (c == ' ') {
          flush();
        } else if (u < 0x80 && std::ispunct(u)) {
          flush();
          ++counts[std::string(1, c)];
        } else {
          word.push_back(static_cast<char>(std::tolower(u)));
        }
        if (u < 0x80 && c != ' ') chars.insert(std::string(1, static_cast<char>(std::tolower(u))));
      }
      flush();
    }
  std::vector<std::string> tokens{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
  std::set<std::string> have(tokens.begin(), tokens.end());
  auto add = [&](const std::string& t) {
    if (have.insert(t).second) tokens.push_back(t);
  };
  for (const auto& [w, n] : counts)
    if (n >= min_count) add(w);
  for (const char* suffix : {"##s", "##ing", "##ed", "##ly", "##tion", "##er", "##ment"}) add(suffix);
  for (const auto& c : chars) {
    add(c);
    add("##" + c);
  }
  return tokens;
}

// ---------------------------------------------------------------------------
// Dense TF-IDF oracle: every document is a full-length vector over the sorted
// vocabulary, cosines are plain dot products of normalized dense rows.

inline std::vector<std::string> oracle_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    bool word = std::isalnum(c) || c >= 0x80;
    if (word) {
      cur.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

struct DenseTfidf {
  std::vector<std::string> ids;
  std::vector<std::string> vocab;
  std::vector<std::vector<double>> rows;

  explicit DenseTfidf(const std::vector<std::pair<std::string, std::string>>& docs) {
    std::set<std::string> terms;
    std::vector<std::vector<std::string>> toks;
    for (const auto& [id, text] : docs) {
      ids.push_back(id);
      toks.push_back(oracle_tokens(text));
      terms.insert(toks.back().begin(), toks.back().end());
    }
    vocab.assign(terms.begin(), terms.end());
    const double n = static_cast<double>(docs.size());
    std::vector<double> df(vocab.size(), 0.0);
    std::vector<std::vector<double>> tf(docs.size(), std::vector<double>(vocab.size(), 0.0));
    for (std::size_t d = 0; d < toks.size(); ++d) {
      for (const auto& t : toks[d]) {
        auto j = std::lower_bound(vocab.begin(), vocab.end(), t) - vocab.begin();
        tf[d][j] += 1.0;
      }
      for (std::size_t j = 0; j < vocab.size(); ++j)
        if (tf[d][j] > 0) df[j] += 1.0;
    }
    for (auto& row : tf) {
      double norm = 0.0;
      for (std::size_t j = 0; j < vocab.size(); ++j) {
        row[j] *= std::log((1.0 + n) / (1.0 + df[j])) + 1.0;
        norm += row[j] * row[j];
      }
      norm = std::sqrt(norm);
      if (norm > 0)
        for (auto& x : row) x /= norm;
      rows.push_back(std::move(row));
    }
  }

  double cosine(std::size_t a, std::size_t b) const {
    double s = 0.0;
    for (std::size_t j = 0; j < vocab.size(); ++j) s += rows[a][j] * rows[b][j];
    return std::clamp(s, 0.0, 1.0);
  }

  std::size_t row_of(const std::string& id) const {
    return static_cast<std::size_t>(std::find(ids.begin(), ids.end(), id) - ids.begin());
  }

  /// Brute force: score every other document, filter, full sort.
  std::vector<std::string> top_k(const std::string& query, std::size_t k, double upper,
                                 const std::unordered_set<std::string>& exclude) const {
    std::size_t q = row_of(query);
    std::vector<std::pair<double, std::string>> scored;
    for (std::size_t r = 0; r < ids.size(); ++r) {
      if (r == q || exclude.contains(ids[r])) continue;
      double c = cosine(q, r);
      if (c < upper) scored.emplace_back(c, ids[r]);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
      if (x.first != y.first) return x.first > y.first;
      return x.second < y.second;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < k && i < scored.size(); ++i) out.push_back(scored[i].second);
    return out;
  }
};

}  // namespace fixtures
