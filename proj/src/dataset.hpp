#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ilr {

struct QuestionRecord {
  std::string id;
  std::string text;
  std::string gold_answer;
  std::optional<double> difficulty;  // in (0, 1] when present
};

struct DatasetSplit {
  std::vector<QuestionRecord> train;
  std::vector<QuestionRecord> validation;
  std::uint64_t seed = 0;
};

// JSONL, one {"id", "question", "answer", "difficulty"?} object per line.
// Records come back in file order; duplicate ids and out-of-range difficulty
// are rejected. Unknown extra keys are ignored so third-party benchmark files
// load as-is.
std::vector<QuestionRecord> load_dataset(const std::string& path);

// Atomic write (temp + rename) of the same schema.
void save_dataset(const std::vector<QuestionRecord>& records,
                  const std::string& path);

// Seeded uniform draw of k validation records without replacement. Both sides
// keep the input's relative order.
DatasetSplit split_validation(const std::vector<QuestionRecord>& records,
                              std::size_t k, std::uint64_t seed);

// Seeded shuffle followed by consecutive slicing into batches of batch_size,
// last batch ragged. A ragged tail of exactly one record is merged into the
// previous batch: a singleton cannot be ranked against anything.
std::vector<std::vector<QuestionRecord>> partition_batches(
    const std::vector<QuestionRecord>& records, std::size_t batch_size,
    std::uint64_t seed);

}  // namespace ilr
