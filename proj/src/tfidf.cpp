#include "casehold/tfidf.hpp"

#include <algorithm>
#include <functional>
#include <cmath>
#include <map>

#include "casehold/util.hpp"

namespace casehold {

namespace {

bool is_token_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

constexpr double kRescoreMargin = 1e-9;

}  // namespace

std::vector<std::string> tfidf_tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !is_token_byte(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && is_token_byte(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) tokens.push_back(to_lower_ascii(text.substr(i, j - i)));
    i = j;
  }
  return tokens;
}

double SparseVector::norm() const {
  double sum = 0.0;
  for (const auto& e : entries) sum += e.weight * e.weight;
  return std::sqrt(sum);
}

double cosine(const SparseVector& u, const SparseVector& v) {
  if (u.empty() || v.empty()) return 0.0;
  double dot = 0.0;
  auto a = u.entries.begin();
  auto b = v.entries.begin();
  while (a != u.entries.end() && b != v.entries.end()) {
    if (a->index < b->index) {
      ++a;
    } else if (b->index < a->index) {
      ++b;
    } else {
      dot += a->weight * b->weight;
      ++a;
      ++b;
    }
  }
  double denom = u.norm() * v.norm();
  if (denom == 0.0) return 0.0;
  return std::clamp(dot / denom, 0.0, 1.0);
}

InsufficientPool::InsufficientPool(std::size_t eligible, std::size_t requested)
    : std::runtime_error("insufficient pool: " + std::to_string(eligible) + " eligible, " +
                         std::to_string(requested) + " requested"),
      eligible_(eligible),
      requested_(requested) {}

TfidfIndex TfidfIndex::build(std::span<const TfidfDocument> docs) {
  TfidfIndex index;
  std::vector<std::vector<std::string>> tokenized;
  tokenized.reserve(docs.size());
  std::map<std::string, std::size_t> df;
  for (std::size_t r = 0; r < docs.size(); ++r) {
    const auto& doc = docs[r];
    if (doc.id.find_first_of("\t\r\n") != std::string::npos)
      throw std::invalid_argument("document id contains a tab or newline");
    if (!index.row_index_.emplace(doc.id, r).second)
      throw std::invalid_argument("duplicate document id '" + doc.id + "'");
    index.doc_ids_.push_back(doc.id);
    tokenized.push_back(tfidf_tokenize(doc.text));
    std::vector<std::string> unique = tokenized.back();
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    for (auto& t : unique) ++df[t];
  }

  const double n = static_cast<double>(docs.size());
  index.terms_.reserve(df.size());
  index.idf_.reserve(df.size());
  for (const auto& [term, count] : df) {
    index.term_index_.emplace(term, static_cast<std::uint32_t>(index.terms_.size()));
    index.terms_.push_back(term);
    index.idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }

  index.rows_.reserve(docs.size());
  for (std::size_t r = 0; r < docs.size(); ++r) {
    index.rows_.push_back(index.vectorize(docs[r].text));
    if (index.rows_.back().empty()) index.empty_docs_.push_back(docs[r].id);
  }
  index.build_postings();
  return index;
}

void TfidfIndex::build_postings() {
  postings_.assign(terms_.size(), {});
  for (std::size_t r = 0; r < rows_.size(); ++r)
    for (const auto& e : rows_[r].entries)
      postings_[e.index].emplace_back(static_cast<std::uint32_t>(r), e.weight);
}

SparseVector TfidfIndex::vectorize(std::string_view text) const {
  std::map<std::uint32_t, std::size_t> counts;
  for (const auto& token : tfidf_tokenize(text)) {
    auto it = term_index_.find(token);
    if (it != term_index_.end()) ++counts[it->second];
  }
  SparseVector v;
  v.entries.reserve(counts.size());
  for (const auto& [idx, count] : counts)
    v.entries.push_back({idx, static_cast<double>(count) * idf_[idx]});
  double norm = v.norm();
  if (norm > 0.0)
    for (auto& e : v.entries) e.weight /= norm;
  return v;
}

std::size_t TfidfIndex::row_of(std::string_view doc_id) const {
  auto it = row_index_.find(std::string(doc_id));
  if (it == row_index_.end()) throw std::out_of_range("unknown document id '" + std::string(doc_id) + "'");
  return it->second;
}

std::vector<std::pair<std::string, double>> TfidfIndex::ranked_below_threshold(
    std::string_view query_id, std::size_t k, double upper,
    const std::unordered_set<std::string>& exclude) const {
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  const std::size_t q = row_of(query_id);
  const SparseVector& query = rows_[q];

  auto skipped = [&](std::size_t r) { return r == q || exclude.contains(doc_ids_[r]); };

  // Accumulate approximate dot products over shared terms.
  std::vector<double> approx(rows_.size(), 0.0);
  std::vector<char> touched(rows_.size(), 0);
  std::vector<std::uint32_t> candidates;
  for (const auto& e : query.entries) {
    for (const auto& [r, w] : postings_[e.index]) {
      if (!touched[r]) {
        touched[r] = 1;
        if (!skipped(r)) candidates.push_back(r);
      }
      approx[r] += e.weight * w;
    }
  }
  auto by_approx = [&](std::uint32_t a, std::uint32_t b) {
    if (approx[a] != approx[b]) return approx[a] > approx[b];
    return a < b;
  };
  // Only the head is ordered up front; the tail is sorted if the scan gets there.
  std::size_t head = std::min(candidates.size(), std::max<std::size_t>(64, 8 * k));
  std::partial_sort(candidates.begin(), candidates.begin() + head, candidates.end(), by_approx);

  // Exact rescoring in approximate order; stop once no remaining candidate
  // can reach the current k-th best.
  std::vector<std::pair<std::string, double>> eligible;
  std::vector<double> best;  // min-heap of the top-k exact scores
  auto heap_cmp = std::greater<double>();
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (c == head) std::sort(candidates.begin() + head, candidates.end(), by_approx);
    std::uint32_t r = candidates[c];
    if (best.size() == k && approx[r] < best.front() - kRescoreMargin) break;
    double exact = cosine(query, rows_[r]);
    if (!(exact < upper)) continue;
    eligible.emplace_back(doc_ids_[r], exact);
    best.push_back(exact);
    std::push_heap(best.begin(), best.end(), heap_cmp);
    if (best.size() > k) {
      std::pop_heap(best.begin(), best.end(), heap_cmp);
      best.pop_back();
    }
  }

  // Documents sharing no term with the query score 0.
  if (eligible.size() < k && upper > 0.0) {
    std::vector<std::string> zeros;
    for (std::size_t r = 0; r < rows_.size(); ++r)
      if (!touched[r] && !skipped(r)) zeros.push_back(doc_ids_[r]);
    std::sort(zeros.begin(), zeros.end());
    for (auto& id : zeros) eligible.emplace_back(std::move(id), 0.0);
  }

  if (eligible.size() < k) throw InsufficientPool(eligible.size(), k);
  std::sort(eligible.begin(), eligible.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  eligible.resize(k);
  return eligible;
}

std::vector<std::string> TfidfIndex::top_k_below_threshold(
    std::string_view query_id, std::size_t k, double upper,
    const std::unordered_set<std::string>& exclude) const {
  std::vector<std::string> out;
  for (auto& [id, score] : ranked_below_threshold(query_id, k, upper, exclude))
    out.push_back(std::move(id));
  return out;
}

std::string TfidfIndex::serialize() const {
  std::string out = "casehold-tfidf v1\n";
  out += "docs " + std::to_string(doc_ids_.size()) + " terms " + std::to_string(terms_.size()) + "\n";
  for (std::size_t t = 0; t < terms_.size(); ++t)
    out += terms_[t] + "\t" + format_double(idf_[t]) + "\n";
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    out += doc_ids_[r];
    out += '\t';
    bool first = true;
    for (const auto& e : rows_[r].entries) {
      if (!first) out += ' ';
      first = false;
      out += std::to_string(e.index) + ":" + format_double(e.weight);
    }
    out += '\n';
  }
  return out;
}

TfidfIndex TfidfIndex::deserialize(std::string_view text) {
  auto lines = split(text, '\n');
  if (lines.size() < 2 || lines[0] != "casehold-tfidf v1")
    throw InputError("not a casehold-tfidf v1 index");
  auto header = split(lines[1], ' ');
  if (header.size() != 4 || header[0] != "docs" || header[2] != "terms")
    throw InputError("bad tfidf header");
  auto n_docs = static_cast<std::size_t>(parse_int(header[1]));
  auto n_terms = static_cast<std::size_t>(parse_int(header[3]));
  if (lines.size() < 2 + n_terms + n_docs) throw InputError("truncated tfidf index");

  TfidfIndex index;
  for (std::size_t t = 0; t < n_terms; ++t) {
    auto fields = split(lines[2 + t], '\t');
    if (fields.size() != 2) throw InputError("bad vocabulary line " + std::to_string(3 + t));
    index.term_index_.emplace(std::string(fields[0]), static_cast<std::uint32_t>(t));
    index.terms_.emplace_back(fields[0]);
    index.idf_.push_back(parse_double(fields[1]));
  }
  for (std::size_t r = 0; r < n_docs; ++r) {
    auto line = lines[2 + n_terms + r];
    auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw InputError("bad row line " + std::to_string(3 + n_terms + r));
    std::string id(line.substr(0, tab));
    if (!index.row_index_.emplace(id, r).second) throw InputError("duplicate id in index: " + id);
    index.doc_ids_.push_back(id);
    SparseVector v;
    auto body = line.substr(tab + 1);
    if (!body.empty()) {
      for (auto item : split(body, ' ')) {
        auto colon = item.find(':');
        if (colon == std::string_view::npos) throw InputError("bad sparse entry '" + std::string(item) + "'");
        auto idx = static_cast<std::uint32_t>(parse_int(item.substr(0, colon)));
        if (idx >= n_terms || (!v.entries.empty() && idx <= v.entries.back().index))
          throw InputError("sparse indices out of range or not increasing");
        v.entries.push_back({idx, parse_double(item.substr(colon + 1))});
      }
    }
    if (v.empty()) index.empty_docs_.push_back(id);
    index.rows_.push_back(std::move(v));
  }
  index.build_postings();
  return index;
}

}  // namespace casehold
