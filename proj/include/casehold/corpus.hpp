#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "casehold/util.hpp"

namespace casehold {

struct Date {
  int year = 0;
  int month = 1;
  int day = 1;

  /// Accepts YYYY-MM-DD, YYYY-MM or YYYY (missing parts default to 1).
  static Date parse(std::string_view text);
  std::string to_string() const;

  auto operator<=>(const Date&) const = default;
};

/// Whitespace-collapsed text plus, for every byte of it, the index of the byte
/// it came from in the raw input.
struct NormalizedText {
  std::string text;
  std::vector<std::uint32_t> offset_map;
};

/// Collapses whitespace runs to a single space and trims both ends.
NormalizedText normalize_whitespace(std::string_view raw);

struct CaseDecision {
  std::string decision_id;
  std::string court;
  Date decision_date;
  std::optional<std::string> jurisdiction;
  std::string body_text;
  /// body_text byte -> raw casebody byte.
  std::vector<std::uint32_t> offset_map;
  /// Byte offset of the record's first byte in the source file.
  std::uint64_t source_offset = 0;
  std::size_t line_number = 0;
};

struct IngestOptions {
  std::optional<Date> cutoff;
  /// Abort once malformed records exceed this share of records read.
  double max_malformed_fraction = 0.01;
  /// The early-abort check only starts after this many records.
  std::size_t early_abort_after = 10000;
};

struct IngestDiagnostic {
  std::size_t line = 0;
  std::uint64_t byte_offset = 0;
  std::string message;
};

class IngestError : public InputError {
 public:
  using InputError::InputError;
};

/// Single-pass reader over a line-delimited decision file. Each line is one
/// JSON object with fields id, court, decision_date, casebody and optionally
/// jurisdiction. Holds one line in memory at a time plus the seen-id set.
class CorpusReader {
 public:
  CorpusReader(const std::filesystem::path& path, IngestOptions options = {});

  /// Next accepted decision in file order, or nullopt at end of input.
  /// Throws IngestError when the malformed-record cap is exceeded.
  std::optional<CaseDecision> next();

  const std::vector<IngestDiagnostic>& diagnostics() const { return diagnostics_; }
  std::size_t records_read() const { return records_read_; }
  std::size_t malformed() const { return malformed_; }
  std::size_t skipped_by_date() const { return skipped_by_date_; }

 private:
  void check_malformed_cap(bool at_end) const;

  std::ifstream in_;
  IngestOptions options_;
  std::uint64_t offset_ = 0;
  std::size_t line_ = 0;
  std::size_t records_read_ = 0;
  std::size_t malformed_ = 0;
  std::size_t skipped_by_date_ = 0;
  bool finished_ = false;
  std::unordered_set<std::string> seen_ids_;
  std::vector<IngestDiagnostic> diagnostics_;
};

/// Parses one record. Throws InputError describing the first problem found.
CaseDecision parse_decision_record(std::string_view line);

/// Reads the whole file. Convenience for fixtures and small corpora.
std::vector<CaseDecision> load_corpus(const std::filesystem::path& path,
                                      IngestOptions options = {});

struct CorpusStats {
  std::size_t decision_count = 0;
  std::uint64_t total_bytes = 0;
  std::map<std::string, std::size_t> per_court;

  void add(const CaseDecision& d);
};

template <typename Range>
CorpusStats corpus_stats(const Range& decisions) {
  CorpusStats stats;
  for (const auto& d : decisions) stats.add(d);
  return stats;
}

struct CorpusPartition {
  std::vector<std::string> pretrain_ids;  // sorted
  std::vector<std::string> holdout_ids;   // sorted
  double ratio = 0.10;
  std::uint64_t seed = 0;

  bool is_holdout(std::string_view id) const;
  bool is_pretrain(std::string_view id) const;
};

/// Seeded uniform sample without replacement of round(ratio * n) ids. The input
/// order does not matter: ids are sorted before the shuffle.
CorpusPartition holdout_split(std::vector<std::string> ids, double ratio, std::uint64_t seed);

std::string format_partition(const CorpusPartition& partition);
CorpusPartition parse_partition(std::string_view text);

}  // namespace casehold
