#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace casehold {

/// Raised for invalid user-supplied configuration (bad ratio, k too large, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an input file cannot be read or does not conform to its format.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// FNV-1a, 64 bit. Stable across platforms; used for ids, per-item seeds and
/// config hashes.
std::uint64_t fnv1a64(std::string_view data,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

std::uint64_t fnv1a64_file(const std::filesystem::path& path);

std::string to_hex16(std::uint64_t value);

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Seeded generator whose output sequence is fixed by the standard (mt19937_64)
/// and whose derived draws do not go through implementation-defined
/// distributions, so outputs are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01();

  bool bernoulli(double p) { return uniform01() < p; }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Derive an independent stream for one item from a run seed and an item key.
inline Rng derive_rng(std::uint64_t seed, std::string_view key) {
  return Rng(mix64(seed ^ fnv1a64(key)));
}

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

std::string_view trim(std::string_view text);
std::vector<std::string_view> split(std::string_view text, char sep);
std::string to_lower_ascii(std::string_view text);
bool iequals_ascii(std::string_view a, std::string_view b);

/// Number of whitespace-delimited words.
std::size_t count_words(std::string_view text);

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and rename so readers never see partial files.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Runs fn(i) for i in [0, n) across at most `workers` threads. Results must be
/// written to per-index slots by the caller for deterministic output.
void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& fn);

/// Worker count from CASEHOLD_WORKERS, falling back to `fallback`.
std::size_t workers_from_env(std::size_t fallback = 1);

}  // namespace casehold
