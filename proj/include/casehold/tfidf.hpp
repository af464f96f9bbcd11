#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace casehold {

/// Lowercased maximal runs of ASCII letters/digits. Bytes >= 0x80 count as
/// letters so UTF-8 words stay whole.
std::vector<std::string> tfidf_tokenize(std::string_view text);

struct SparseEntry {
  std::uint32_t index = 0;
  double weight = 0.0;

  bool operator==(const SparseEntry&) const = default;
};

/// (index, weight) pairs with strictly increasing indices.
struct SparseVector {
  std::vector<SparseEntry> entries;

  bool empty() const { return entries.empty(); }
  double norm() const;
  bool operator==(const SparseVector&) const = default;
};

/// Cosine similarity, clamped to [0, 1]; 0 if either vector is zero.
double cosine(const SparseVector& u, const SparseVector& v);

class InsufficientPool : public std::runtime_error {
 public:
  InsufficientPool(std::size_t eligible, std::size_t requested);
  std::size_t eligible() const { return eligible_; }
  std::size_t requested() const { return requested_; }

 private:
  std::size_t eligible_;
  std::size_t requested_;
};

struct TfidfDocument {
  std::string id;
  std::string text;
};

/// Immutable TF-IDF model over a document pool. tf is the raw count,
/// idf = ln((1 + N) / (1 + df)) + 1, rows are L2-normalized. Vocabulary columns
/// are assigned in lexicographic term order.
class TfidfIndex {
 public:
  /// Throws std::invalid_argument on duplicate document ids.
  static TfidfIndex build(std::span<const TfidfDocument> docs);

  SparseVector vectorize(std::string_view text) const;

  std::size_t size() const { return doc_ids_.size(); }
  std::size_t vocabulary_size() const { return terms_.size(); }
  const std::vector<std::string>& doc_ids() const { return doc_ids_; }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<double>& idf() const { return idf_; }
  const SparseVector& vector(std::size_t row) const { return rows_[row]; }
  /// Row of a document id; throws std::out_of_range if absent.
  std::size_t row_of(std::string_view doc_id) const;
  /// Ids whose text had no tokens; their rows are zero vectors.
  const std::vector<std::string>& empty_docs() const { return empty_docs_; }

  /// The k documents with the highest cosine to `query_id` among those with
  /// cosine strictly below `upper`, excluding `query_id` and `exclude`.
  /// Ordered by descending cosine, ties by ascending id. Throws
  /// InsufficientPool when fewer than k documents are eligible.
  std::vector<std::string> top_k_below_threshold(std::string_view query_id, std::size_t k,
                                                 double upper,
                                                 const std::unordered_set<std::string>& exclude) const;

  /// Same ranking, returning (id, cosine) pairs.
  std::vector<std::pair<std::string, double>> ranked_below_threshold(
      std::string_view query_id, std::size_t k, double upper,
      const std::unordered_set<std::string>& exclude) const;

  /// Versioned text format: header, vocabulary with idf, sparse rows.
  std::string serialize() const;
  static TfidfIndex deserialize(std::string_view text);

 private:
  void build_postings();

  std::vector<std::string> terms_;
  std::unordered_map<std::string, std::uint32_t> term_index_;
  std::vector<double> idf_;
  std::vector<std::string> doc_ids_;
  std::unordered_map<std::string, std::size_t> row_index_;
  std::vector<SparseVector> rows_;
  std::vector<std::string> empty_docs_;
  // term -> (row, weight), rows ascending
  std::vector<std::vector<std::pair<std::uint32_t, double>>> postings_;
};

}  // namespace casehold
