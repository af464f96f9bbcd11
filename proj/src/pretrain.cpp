#include "casehold/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>

#include "casehold/segment.hpp"
#include "casehold/util.hpp"

namespace casehold {

namespace {

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_ascii_punct(char c) {
  auto u = static_cast<unsigned char>(c);
  return (u >= 33 && u <= 47) || (u >= 58 && u <= 64) || (u >= 91 && u <= 96) || (u >= 123 && u <= 126);
}

bool is_utf8_continuation(char c) { return (static_cast<unsigned char>(c) & 0xC0) == 0x80; }

}  // namespace

// ---------------------------------------------------------------------------

std::size_t write_sentence_document(std::ostream& out, std::span<const std::string> sentences) {
  if (sentences.empty()) return 0;
  for (const auto& s : sentences) out << s << '\n';
  out << '\n';
  return sentences.size();
}

SentenceCorpusCounts emit_sentence_corpus(std::span<const CaseDecision> decisions,
                                          const CorpusPartition& partition,
                                          const CitationParser& parser, std::ostream& out,
                                          std::size_t min_words, std::size_t workers) {
  std::vector<std::vector<std::string>> sentences(decisions.size());
  std::vector<char> keep(decisions.size(), 0);
  parallel_for(decisions.size(), workers, [&](std::size_t i) {
    if (!partition.is_pretrain(decisions[i].decision_id)) return;
    keep[i] = 1;
    sentences[i] = sentences_for_text(decisions[i].body_text, parser, min_words);
  });
  SentenceCorpusCounts counts;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    if (!keep[i]) {
      ++counts.ignored;
      continue;
    }
    auto n = write_sentence_document(out, sentences[i]);
    if (n > 0) ++counts.documents;
    counts.sentences += n;
  }
  return counts;
}

std::vector<std::vector<std::string>> parse_sentence_corpus(std::string_view text) {
  std::vector<std::vector<std::string>> docs;
  std::vector<std::string> current;
  for (auto line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) {
      if (!current.empty()) docs.push_back(std::move(current));
      current.clear();
    } else {
      current.emplace_back(line);
    }
  }
  if (!current.empty()) docs.push_back(std::move(current));
  return docs;
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t target, std::uint64_t seed) {
  if (target > n)
    throw ConfigError("sample target " + std::to_string(target) + " exceeds corpus of " +
                      std::to_string(n) + " sentences");
  std::vector<std::size_t> out;
  out.reserve(target);
  Rng rng(seed);
  std::size_t needed = target;
  for (std::size_t t = 0; t < n && needed > 0; ++t) {
    if (rng.below(n - t) < needed) {
      out.push_back(t);
      --needed;
    }
  }
  return out;
}

std::size_t sample_vocab_sentences(const std::filesystem::path& corpus, std::size_t target,
                                   std::uint64_t seed, std::ostream& out) {
  auto is_sentence = [](const std::string& line) { return !trim(line).empty(); };
  std::size_t n = 0;
  {
    std::ifstream in(corpus, std::ios::binary);
    if (!in) throw InputError("cannot open sentence corpus " + corpus.string());
    for (std::string line; std::getline(in, line);)
      if (is_sentence(line)) ++n;
  }
  auto picks = sample_indices(n, target, seed);
  std::ifstream in(corpus, std::ios::binary);
  std::size_t index = 0;
  auto next = picks.begin();
  for (std::string line; next != picks.end() && std::getline(in, line);) {
    if (!is_sentence(line)) continue;
    if (index++ == *next) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      out << line << '\n';
      ++next;
    }
  }
  return picks.size();
}

// ---------------------------------------------------------------------------

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens,
                                   std::optional<std::size_t> expected_size) {
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (v.tokens_[i].empty()) throw InputError("empty vocabulary token at id " + std::to_string(i));
    if (!v.ids_.emplace(v.tokens_[i], static_cast<std::uint32_t>(i)).second)
      throw InputError("duplicate vocabulary token '" + v.tokens_[i] + "'");
  }
  auto need = [&](std::string_view t) {
    auto id = v.find(t);
    if (!id) throw InputError("vocabulary lacks special token " + std::string(t));
    return *id;
  };
  v.pad_ = need(kPad);
  v.unk_ = need(kUnk);
  v.cls_ = need(kCls);
  v.sep_ = need(kSep);
  v.mask_ = need(kMask);
  if (expected_size && v.size() != *expected_size)
    throw InputError("vocabulary has " + std::to_string(v.size()) + " tokens, expected " +
                     std::to_string(*expected_size));
  return v;
}

Vocabulary Vocabulary::parse(std::string_view text, std::optional<std::size_t> expected_size) {
  std::vector<std::string> tokens;
  auto lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  for (auto line : lines) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    tokens.emplace_back(line);
  }
  return from_tokens(std::move(tokens), expected_size);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path, std::optional<std::size_t> expected_size) {
  return parse(read_file(path), expected_size);
}

Vocabulary Vocabulary::from_sentencepiece(std::string_view text, std::optional<std::size_t> expected_size) {
  static constexpr std::string_view kMarker = "\xE2\x96\x81";
  static const std::unordered_map<std::string_view, std::string_view> kSpecials{
      {"<pad>", kPad}, {"<unk>", kUnk}, {"<s>", kCls}, {"</s>", kSep}, {"<mask>", kMask},
      {"[PAD]", kPad}, {"[UNK]", kUnk}, {"[CLS]", kCls}, {"[SEP]", kSep}, {"[MASK]", kMask}};
  std::vector<std::string> tokens;
  std::unordered_map<std::string, bool> seen;
  for (auto line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto piece = line.substr(0, line.find('\t'));
    if (piece.empty()) continue;
    std::string token;
    if (auto it = kSpecials.find(piece); it != kSpecials.end()) {
      token = it->second;
    } else if (piece.starts_with(kMarker)) {
      token = piece.substr(kMarker.size());
    } else {
      token = "##" + std::string(piece);
    }
    if (token.empty() || seen.contains(token)) continue;
    seen.emplace(token, true);
    tokens.push_back(std::move(token));
  }
  return from_tokens(std::move(tokens), expected_size);
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

bool Vocabulary::is_special(std::uint32_t id) const {
  return id == pad_ || id == unk_ || id == cls_ || id == sep_ || id == mask_;
}

bool Vocabulary::is_continuation(std::uint32_t id) const {
  const auto& t = tokens_.at(id);
  return t.size() > 2 && t[0] == '#' && t[1] == '#';
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (const auto& t : tokens_) {
    out += t;
    out += '\n';
  }
  return out;
}

std::vector<std::string> basic_tokenize(std::string_view text, bool lowercase) {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (char c : text) {
    if (is_ws(c)) {
      flush();
    } else if (is_ascii_punct(c)) {
      flush();
      words.emplace_back(1, c);
    } else {
      current.push_back(lowercase && c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
    }
  }
  flush();
  return words;
}

std::vector<std::uint32_t> wordpiece_word(const Vocabulary& vocab, std::string_view word,
                                          std::size_t max_word_bytes) {
  if (word.size() > max_word_bytes) return {vocab.unk_id()};
  std::vector<std::uint32_t> pieces;
  std::size_t start = 0;
  std::string candidate;
  while (start < word.size()) {
    std::optional<std::uint32_t> match;
    std::size_t end = word.size();
    for (; end > start; --end) {
      if (end < word.size() && is_utf8_continuation(word[end])) continue;
      candidate = start > 0 ? "##" : "";
      candidate += word.substr(start, end - start);
      match = vocab.find(candidate);
      if (match) break;
    }
    if (!match) return {vocab.unk_id()};
    pieces.push_back(*match);
    start = end;
  }
  return pieces;
}

std::vector<std::uint32_t> wordpiece_tokenize(const Vocabulary& vocab, std::string_view text, bool lowercase) {
  std::vector<std::uint32_t> ids;
  for (const auto& word : basic_tokenize(text, lowercase)) {
    auto pieces = wordpiece_word(vocab, word);
    ids.insert(ids.end(), pieces.begin(), pieces.end());
  }
  return ids;
}

std::vector<std::string> wordpiece_pieces(const Vocabulary& vocab, std::string_view text, bool lowercase) {
  std::vector<std::string> out;
  for (auto id : wordpiece_tokenize(vocab, text, lowercase)) out.push_back(vocab.token(id));
  return out;
}

// ---------------------------------------------------------------------------

void PretrainConfig::validate() const {
  if (!(mask_rate > 0.0 && mask_rate < 1.0)) throw ConfigError("mask_rate must be in (0, 1)");
  if (mask_token_prob < 0.0 || random_token_prob < 0.0 || mask_token_prob + random_token_prob > 1.0)
    throw ConfigError("mask replacement probabilities must be non-negative and sum to at most 1");
  if (short_max_len < 8 || long_max_len < short_max_len)
    throw ConfigError("need 8 <= short_max_len <= long_max_len");
  if (!(long_fraction >= 0.0 && long_fraction <= 1.0)) throw ConfigError("long_fraction must be in [0, 1]");
  if (!(random_next_prob >= 0.0 && random_next_prob <= 1.0))
    throw ConfigError("random_next_prob must be in [0, 1]");
  if (dupe_factor == 0) throw ConfigError("dupe_factor must be positive");
}

std::vector<std::vector<std::uint32_t>> whole_word_groups(const Vocabulary& vocab,
                                                          std::span<const std::uint32_t> ids) {
  std::vector<std::vector<std::uint32_t>> groups;
  bool open = false;
  for (std::uint32_t i = 0; i < ids.size(); ++i) {
    if (vocab.is_special(ids[i])) {
      open = false;
      continue;
    }
    if (open && vocab.is_continuation(ids[i])) {
      groups.back().push_back(i);
    } else {
      groups.push_back({i});
      open = true;
    }
  }
  return groups;
}

namespace {

using Segment = std::vector<std::uint32_t>;  // one tokenized sentence

void truncate_pair(Segment& a, Segment& b, std::size_t max_tokens) {
  while (a.size() + b.size() > max_tokens) {
    // Longer side loses its last token; A goes first on ties.
    Segment& longer = b.size() > a.size() ? b : a;
    longer.pop_back();
  }
}

void apply_masking(MaskedInstance& inst, const Vocabulary& vocab, const PretrainConfig& config,
                   const std::vector<std::uint32_t>& random_pool, Rng& rng) {
  auto groups = whole_word_groups(vocab, inst.token_ids);
  std::size_t candidates = 0;
  for (const auto& g : groups) candidates += g.size();
  if (candidates == 0) return;
  auto target = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(candidates) * config.mask_rate)));
  rng.shuffle(groups);
  std::vector<std::uint32_t> chosen;
  for (const auto& g : groups) {
    if (chosen.size() >= target) break;
    if (chosen.size() + g.size() > target) continue;
    chosen.insert(chosen.end(), g.begin(), g.end());
  }
  std::sort(chosen.begin(), chosen.end());
  for (auto pos : chosen) {
    inst.masked_positions.push_back(pos);
    inst.masked_labels.push_back(inst.token_ids[pos]);
    double r = rng.uniform01();
    if (r < config.mask_token_prob) {
      inst.token_ids[pos] = vocab.mask_id();
    } else if (r < config.mask_token_prob + config.random_token_prob && !random_pool.empty()) {
      inst.token_ids[pos] = random_pool[rng.below(random_pool.size())];
    }
  }
}

struct DocumentInstancesInput {
  const std::vector<std::vector<Segment>>* docs;
  const Vocabulary* vocab;
  const PretrainConfig* config;
  const std::vector<std::uint32_t>* random_pool;
};

std::vector<MaskedInstance> instances_for_document(const DocumentInstancesInput& in, std::size_t doc_index,
                                                   std::size_t round) {
  const auto& docs = *in.docs;
  const auto& config = *in.config;
  const auto& vocab = *in.vocab;
  const auto& doc = docs[doc_index];
  Rng rng = derive_rng(config.seed, "instances:" + std::to_string(round) + ":" + std::to_string(doc_index));
  std::vector<MaskedInstance> out;

  auto pick_max_len = [&] { return rng.bernoulli(config.long_fraction) ? config.long_max_len : config.short_max_len; };

  std::uint32_t max_len = pick_max_len();
  std::vector<const Segment*> chunk;
  std::size_t chunk_tokens = 0;
  std::size_t i = 0;
  while (i < doc.size()) {
    chunk.push_back(&doc[i]);
    chunk_tokens += doc[i].size();
    const std::size_t max_tokens = max_len - 3;
    if (i + 1 == doc.size() || chunk_tokens >= max_tokens) {
      if (chunk_tokens > 0) {
        bool want_random = rng.bernoulli(config.random_next_prob);
        // A true next segment needs a second sentence: use the chunk's
        // remainder, borrow the document's next sentence, or at the end of
        // the document pair the last sentence with the one before it.
        if (!want_random && chunk.size() == 1) {
          if (i + 1 < doc.size()) {
            ++i;
            chunk.push_back(&doc[i]);
            chunk_tokens += doc[i].size();
          } else if (i > 0) {
            chunk.insert(chunk.begin(), &doc[i - 1]);
            chunk_tokens += doc[i - 1].size();
          }
        }
        bool random_next = want_random || chunk.size() == 1;
        if (random_next && docs.size() < 2) random_next = false;

        std::size_t a_end = chunk.size() > 1 ? 1 + rng.below(chunk.size() - 1) : 1;
        Segment a, b;
        for (std::size_t j = 0; j < a_end; ++j) a.insert(a.end(), chunk[j]->begin(), chunk[j]->end());

        if (random_next) {
          std::size_t target_b = max_tokens > a.size() ? max_tokens - a.size() : 1;
          std::size_t other = rng.below(docs.size() - 1);
          if (other >= doc_index) ++other;
          const auto& rdoc = docs[other];
          for (std::size_t j = rng.below(rdoc.size()); j < rdoc.size() && b.size() < target_b; ++j)
            b.insert(b.end(), rdoc[j].begin(), rdoc[j].end());
          // Sentences of the chunk not used for A go back for the next instance.
          i -= chunk.size() - a_end;
        } else {
          for (std::size_t j = a_end; j < chunk.size(); ++j) b.insert(b.end(), chunk[j]->begin(), chunk[j]->end());
        }

        if (!a.empty() && !b.empty()) {
          truncate_pair(a, b, max_tokens);
          MaskedInstance inst;
          inst.max_len = max_len;
          inst.nsp = random_next ? NspLabel::not_next : NspLabel::is_next;
          inst.token_ids.reserve(a.size() + b.size() + 3);
          inst.token_ids.push_back(vocab.cls_id());
          inst.token_ids.insert(inst.token_ids.end(), a.begin(), a.end());
          inst.token_ids.push_back(vocab.sep_id());
          inst.segment_ids.assign(inst.token_ids.size(), 0);
          inst.token_ids.insert(inst.token_ids.end(), b.begin(), b.end());
          inst.token_ids.push_back(vocab.sep_id());
          inst.segment_ids.resize(inst.token_ids.size(), 1);
          apply_masking(inst, vocab, config, *in.random_pool, rng);
          out.push_back(std::move(inst));
        }
      }
      chunk.clear();
      chunk_tokens = 0;
      max_len = pick_max_len();
    }
    ++i;
  }
  return out;
}

}  // namespace

std::vector<MaskedInstance> create_pretraining_instances(
    const std::vector<std::vector<std::string>>& documents, const Vocabulary& vocab,
    const PretrainConfig& config, std::size_t workers) {
  config.validate();
  // Tokenize once; empty sentences and empty documents are dropped.
  std::vector<std::vector<Segment>> tokenized(documents.size());
  parallel_for(documents.size(), workers, [&](std::size_t d) {
    for (const auto& s : documents[d]) {
      auto ids = wordpiece_tokenize(vocab, s, config.lowercase);
      if (!ids.empty()) tokenized[d].push_back(std::move(ids));
    }
  });
  std::erase_if(tokenized, [](const auto& d) { return d.empty(); });

  std::vector<std::uint32_t> random_pool;
  for (std::uint32_t id = 0; id < vocab.size(); ++id)
    if (!vocab.is_special(id)) random_pool.push_back(id);

  DocumentInstancesInput input{&tokenized, &vocab, &config, &random_pool};
  std::vector<MaskedInstance> out;
  for (std::size_t round = 0; round < config.dupe_factor; ++round) {
    std::vector<std::vector<MaskedInstance>> per_doc(tokenized.size());
    parallel_for(tokenized.size(), workers,
                 [&](std::size_t d) { per_doc[d] = instances_for_document(input, d, round); });
    for (auto& v : per_doc)
      for (auto& inst : v) out.push_back(std::move(inst));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
std::string join_ints(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(static_cast<unsigned long long>(values[i]));
  }
  return out;
}

template <typename T>
std::vector<T> parse_ints(std::string_view text) {
  std::vector<T> out;
  if (text.empty()) return out;
  for (auto item : split(text, ' ')) {
    auto v = parse_int(item);
    if (v < 0) throw InputError("negative value in instance file");
    out.push_back(static_cast<T>(v));
  }
  return out;
}

void check_instance(const MaskedInstance& inst) {
  if (inst.token_ids.size() != inst.segment_ids.size() || inst.masked_positions.size() != inst.masked_labels.size() ||
      inst.token_ids.size() > inst.max_len)
    throw InputError("inconsistent instance record");
  for (std::size_t i = 0; i < inst.masked_positions.size(); ++i)
    if (inst.masked_positions[i] >= inst.token_ids.size() ||
        (i > 0 && inst.masked_positions[i] <= inst.masked_positions[i - 1]))
      throw InputError("masked positions out of range or not increasing");
}

constexpr std::string_view kTsvHeader = "token_ids\tsegment_ids\tmasked_positions\tmasked_labels\tnsp\tmax_len";
constexpr std::string_view kBinaryMagic{"CHMLM01\0", 8};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t& pos) {
  if (pos + 4 > bytes.size()) throw InputError("truncated instance record");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

}  // namespace

std::string format_instances_tsv(std::span<const MaskedInstance> instances) {
  std::string out(kTsvHeader);
  out += '\n';
  for (const auto& inst : instances) {
    out += join_ints(inst.token_ids) + '\t' + join_ints(inst.segment_ids) + '\t' +
           join_ints(inst.masked_positions) + '\t' + join_ints(inst.masked_labels) + '\t' +
           std::to_string(static_cast<int>(inst.nsp)) + '\t' + std::to_string(inst.max_len) + '\n';
  }
  return out;
}

std::vector<MaskedInstance> parse_instances_tsv(std::string_view text) {
  auto lines = split(text, '\n');
  if (lines.empty() || lines[0] != kTsvHeader) throw InputError("not an instance TSV file");
  std::vector<MaskedInstance> out;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    if (lines[n].empty()) continue;
    auto f = split(lines[n], '\t');
    if (f.size() != 6) throw InputError("bad instance line " + std::to_string(n + 1));
    MaskedInstance inst;
    inst.token_ids = parse_ints<std::uint32_t>(f[0]);
    inst.segment_ids = parse_ints<std::uint8_t>(f[1]);
    inst.masked_positions = parse_ints<std::uint32_t>(f[2]);
    inst.masked_labels = parse_ints<std::uint32_t>(f[3]);
    auto nsp = parse_int(f[4]);
    if (nsp != 0 && nsp != 1) throw InputError("bad nsp label on line " + std::to_string(n + 1));
    inst.nsp = static_cast<NspLabel>(nsp);
    inst.max_len = static_cast<std::uint32_t>(parse_int(f[5]));
    check_instance(inst);
    out.push_back(std::move(inst));
  }
  return out;
}

std::string format_instances_binary(std::span<const MaskedInstance> instances) {
  std::string out(kBinaryMagic);
  put_u32(out, static_cast<std::uint32_t>(instances.size()));
  for (const auto& inst : instances) {
    put_u32(out, inst.max_len);
    out.push_back(static_cast<char>(inst.nsp));
    put_u32(out, static_cast<std::uint32_t>(inst.token_ids.size()));
    for (auto id : inst.token_ids) put_u32(out, id);
    for (auto s : inst.segment_ids) out.push_back(static_cast<char>(s));
    put_u32(out, static_cast<std::uint32_t>(inst.masked_positions.size()));
    for (auto p : inst.masked_positions) put_u32(out, p);
    for (auto l : inst.masked_labels) put_u32(out, l);
  }
  return out;
}

std::vector<MaskedInstance> parse_instances_binary(std::string_view bytes) {
  if (!bytes.starts_with(kBinaryMagic)) throw InputError("not a binary instance file");
  std::size_t pos = kBinaryMagic.size();
  auto count = get_u32(bytes, pos);
  std::vector<MaskedInstance> out;
  out.reserve(count);
  for (std::uint32_t n = 0; n < count; ++n) {
    MaskedInstance inst;
    inst.max_len = get_u32(bytes, pos);
    if (pos >= bytes.size()) throw InputError("truncated instance record");
    auto nsp = static_cast<unsigned char>(bytes[pos++]);
    if (nsp > 1) throw InputError("bad nsp label in binary record");
    inst.nsp = static_cast<NspLabel>(nsp);
    auto len = get_u32(bytes, pos);
    for (std::uint32_t i = 0; i < len; ++i) inst.token_ids.push_back(get_u32(bytes, pos));
    if (pos + len > bytes.size()) throw InputError("truncated instance record");
    for (std::uint32_t i = 0; i < len; ++i) inst.segment_ids.push_back(static_cast<std::uint8_t>(bytes[pos++]));
    auto masked = get_u32(bytes, pos);
    for (std::uint32_t i = 0; i < masked; ++i) inst.masked_positions.push_back(get_u32(bytes, pos));
    for (std::uint32_t i = 0; i < masked; ++i) inst.masked_labels.push_back(get_u32(bytes, pos));
    check_instance(inst);
    out.push_back(std::move(inst));
  }
  if (pos != bytes.size()) throw InputError("trailing bytes after instance records");
  return out;
}

}  // namespace casehold
