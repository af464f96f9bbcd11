#include "casehold/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace casehold {

namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

int parse_date_part(std::string_view s, std::string_view whole) {
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); }))
    throw InputError("bad date '" + std::string(whole) + "'");
  return static_cast<int>(parse_int(s));
}

std::string string_or_name(const nlohmann::json& v, const char* field) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_object() && v.contains("name") && v["name"].is_string())
    return v["name"].get<std::string>();
  throw InputError(std::string("field '") + field + "' has unsupported type");
}

}  // namespace

Date Date::parse(std::string_view text) {
  auto parts = split(trim(text), '-');
  if (parts.empty() || parts.size() > 3) throw InputError("bad date '" + std::string(text) + "'");
  Date d;
  d.year = parse_date_part(parts[0], text);
  if (parts.size() > 1) d.month = parse_date_part(parts[1], text);
  if (parts.size() > 2) d.day = parse_date_part(parts[2], text);
  if (parts[0].size() != 4 || d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31)
    throw InputError("bad date '" + std::string(text) + "'");
  return d;
}

std::string Date::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
  return buf;
}

NormalizedText normalize_whitespace(std::string_view raw) {
  NormalizedText out;
  out.text.reserve(raw.size());
  out.offset_map.reserve(raw.size());
  bool pending_space = false;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto c = static_cast<unsigned char>(raw[i]);
    if (is_space(c)) {
      if (!out.text.empty() && !pending_space) {
        pending_space = true;
        out.text.push_back(' ');
        out.offset_map.push_back(static_cast<std::uint32_t>(i));
      }
      continue;
    }
    pending_space = false;
    out.text.push_back(raw[i]);
    out.offset_map.push_back(static_cast<std::uint32_t>(i));
  }
  if (!out.text.empty() && out.text.back() == ' ') {
    out.text.pop_back();
    out.offset_map.pop_back();
  }
  return out;
}

CaseDecision parse_decision_record(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InputError("record is not an object");
  for (const char* field : {"id", "court", "decision_date", "casebody"})
    if (!j.contains(field) || j[field].is_null())
      throw InputError(std::string("missing field '") + field + "'");

  CaseDecision d;
  d.decision_id = string_or_name(j["id"], "id");
  if (d.decision_id.empty()) throw InputError("empty id");
  if (d.decision_id.find_first_of(" \t\r\n") != std::string::npos)
    throw InputError("id contains whitespace");
  d.court = string_or_name(j["court"], "court");
  if (!j["decision_date"].is_string()) throw InputError("decision_date is not a string");
  d.decision_date = Date::parse(j["decision_date"].get<std::string>());
  if (j.contains("jurisdiction") && !j["jurisdiction"].is_null())
    d.jurisdiction = string_or_name(j["jurisdiction"], "jurisdiction");

  const auto& body = j["casebody"];
  std::string raw;
  if (body.is_string()) {
    raw = body.get<std::string>();
  } else if (body.is_object() && body.contains("text") && body["text"].is_string()) {
    raw = body["text"].get<std::string>();
  } else {
    throw InputError("casebody must be a string or an object with 'text'");
  }
  auto norm = normalize_whitespace(raw);
  if (norm.text.empty()) throw InputError("empty casebody");
  d.body_text = std::move(norm.text);
  d.offset_map = std::move(norm.offset_map);
  return d;
}

CorpusReader::CorpusReader(const std::filesystem::path& path, IngestOptions options)
    : in_(path, std::ios::binary), options_(options) {
  if (!in_) throw IngestError("cannot open corpus " + path.string());
  if (!(options_.max_malformed_fraction >= 0.0 && options_.max_malformed_fraction <= 1.0))
    throw ConfigError("max_malformed_fraction must be in [0, 1]");
}

void CorpusReader::check_malformed_cap(bool at_end) const {
  if (!at_end && records_read_ < options_.early_abort_after) return;
  double allowed = options_.max_malformed_fraction * static_cast<double>(records_read_);
  if (static_cast<double>(malformed_) > allowed) {
    std::ostringstream msg;
    msg << "malformed records " << malformed_ << " of " << records_read_
        << " exceed cap of " << options_.max_malformed_fraction * 100 << "%";
    if (!diagnostics_.empty())
      msg << "; first at line " << diagnostics_.front().line << ": " << diagnostics_.front().message;
    throw IngestError(msg.str());
  }
}

std::optional<CaseDecision> CorpusReader::next() {
  if (finished_) return std::nullopt;
  std::string line;
  while (std::getline(in_, line)) {
    std::uint64_t start = offset_;
    offset_ += line.size() + (in_.eof() ? 0 : 1);
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    ++records_read_;
    try {
      CaseDecision d = parse_decision_record(line);
      if (!seen_ids_.insert(d.decision_id).second)
        throw InputError("duplicate id '" + d.decision_id + "'");
      if (options_.cutoff && d.decision_date < *options_.cutoff) {
        ++skipped_by_date_;
        continue;
      }
      d.source_offset = start;
      d.line_number = line_;
      check_malformed_cap(false);
      return d;
    } catch (const InputError& e) {
      ++malformed_;
      diagnostics_.push_back({line_, start, e.what()});
      check_malformed_cap(false);
    }
  }
  finished_ = true;
  check_malformed_cap(true);
  return std::nullopt;
}

std::vector<CaseDecision> load_corpus(const std::filesystem::path& path, IngestOptions options) {
  CorpusReader reader(path, options);
  std::vector<CaseDecision> out;
  while (auto d = reader.next()) out.push_back(std::move(*d));
  return out;
}

void CorpusStats::add(const CaseDecision& d) {
  ++decision_count;
  total_bytes += d.body_text.size();
  ++per_court[d.court];
}

bool CorpusPartition::is_holdout(std::string_view id) const {
  return std::binary_search(holdout_ids.begin(), holdout_ids.end(), id);
}

bool CorpusPartition::is_pretrain(std::string_view id) const {
  return std::binary_search(pretrain_ids.begin(), pretrain_ids.end(), id);
}

CorpusPartition holdout_split(std::vector<std::string> ids, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("holdout ratio must be in (0, 1)");
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw ConfigError("holdout_split: ids are not distinct");

  auto n_holdout = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(ids.size())));
  Rng rng(seed);
  rng.shuffle(ids);

  CorpusPartition p;
  p.ratio = ratio;
  p.seed = seed;
  p.holdout_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_holdout));
  p.pretrain_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_holdout), ids.end());
  std::sort(p.holdout_ids.begin(), p.holdout_ids.end());
  std::sort(p.pretrain_ids.begin(), p.pretrain_ids.end());
  return p;
}

std::string format_partition(const CorpusPartition& p) {
  std::string out = "# casehold-partition v1 ratio=" + format_double(p.ratio) +
                    " seed=" + std::to_string(p.seed) +
                    " total=" + std::to_string(p.pretrain_ids.size() + p.holdout_ids.size()) +
                    " pretrain=" + std::to_string(p.pretrain_ids.size()) +
                    " holdout=" + std::to_string(p.holdout_ids.size()) + "\n";
  out += "[pretrain]\n";
  for (const auto& id : p.pretrain_ids) out += id + "\n";
  out += "[holdout]\n";
  for (const auto& id : p.holdout_ids) out += id + "\n";
  return out;
}

CorpusPartition parse_partition(std::string_view text) {
  auto lines = split(text, '\n');
  if (lines.empty() || !lines[0].starts_with("# casehold-partition v1"))
    throw InputError("not a partition manifest");
  CorpusPartition p;
  for (auto field : split(lines[0], ' ')) {
    if (field.starts_with("ratio=")) p.ratio = parse_double(field.substr(6));
    if (field.starts_with("seed=")) p.seed = static_cast<std::uint64_t>(parse_int(field.substr(5)));
  }
  std::vector<std::string>* target = nullptr;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto line = lines[i];
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line == "[pretrain]") {
      target = &p.pretrain_ids;
    } else if (line == "[holdout]") {
      target = &p.holdout_ids;
    } else {
      if (!target) throw InputError("partition manifest: id before section header");
      target->emplace_back(line);
    }
  }
  if (!std::is_sorted(p.pretrain_ids.begin(), p.pretrain_ids.end()) ||
      !std::is_sorted(p.holdout_ids.begin(), p.holdout_ids.end()))
    throw InputError("partition manifest: id lists must be sorted");
  return p;
}

}  // namespace casehold
