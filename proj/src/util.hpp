#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace ilr {

// --- hashing / seed derivation ------------------------------------------

std::uint64_t fnv1a64(std::string_view data,
                      std::uint64_t seed = 0xcbf29ce484222325ull);

// Order-sensitive combiner (splitmix64 finalizer); used to derive
// per-split / per-sample RNG seeds from a root seed.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t mix_seed(std::uint64_t a, std::string_view b);

std::string hex64(std::uint64_t v);
std::uint64_t parse_hex64(std::string_view s);  // parse error on bad input

// --- strings -------------------------------------------------------------

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
// Collapses every run of whitespace to a single space (and trims the ends).
std::string collapse_whitespace(std::string_view s);
void replace_all(std::string& s, std::string_view from, std::string_view to);
std::string format_double(double v);  // shortest round-trip decimal form

// --- urls ----------------------------------------------------------------

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // "" when absent, otherwise "/..." without a trailing /
};

// Splits scheme://authority[/path]; a missing scheme is a config error.
SplitUrl split_url(const std::string& url);

// --- files ---------------------------------------------------------------

std::string read_text_file(const std::string& path);
// Writes to a sibling temp file, then renames over the target so partially
// written outputs are never observable.
void write_text_file_atomic(const std::string& path, std::string_view content);

// Parses one JSON value per non-empty line; malformed lines raise a parse
// error naming `path` and the 1-based line number.
std::vector<nlohmann::json> read_json_lines(const std::string& path);

// --- concurrency ---------------------------------------------------------

class Semaphore {
 public:
  explicit Semaphore(std::size_t count) : count_(count) {}
  void acquire();
  void release();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t count_;
};

// Runs fn(i) for every i in [0, count) on at most `bound` worker threads.
// Results must be written to index-addressed slots by the caller; the first
// exception (by lowest index) is rethrown after all workers finish, so the
// outcome is independent of thread scheduling.
void parallel_for(std::size_t count, std::size_t bound,
                  const std::function<void(std::size_t)>& fn);

}  // namespace ilr
