#include "dataset.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "errors.hpp"
#include "json.hpp"
#include "rng.hpp"
#include "util.hpp"

namespace ilr {

using nlohmann::ordered_json;

std::vector<QuestionRecord> load_dataset(const std::string& path) {
  auto lines = read_json_lines(path);
  std::vector<QuestionRecord> records;
  records.reserve(lines.size());
  std::set<std::string> seen;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& j = lines[i];
    const std::string where = path + ":" + std::to_string(i + 1);
    if (!j.is_object()) raise(ErrorCode::parse, where + ": expected an object");
    for (const char* key : {"id", "question", "answer"}) {
      if (!j.contains(key) || !j.at(key).is_string()) {
        raise(ErrorCode::parse,
              where + ": missing or non-string field \"" + key + "\"");
      }
    }
    QuestionRecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.text = j.at("question").get<std::string>();
    rec.gold_answer = j.at("answer").get<std::string>();
    if (rec.id.empty()) raise(ErrorCode::parse, where + ": empty id");
    if (j.contains("difficulty") && !j.at("difficulty").is_null()) {
      if (!j.at("difficulty").is_number()) {
        raise(ErrorCode::parse, where + ": non-numeric difficulty");
      }
      double d = j.at("difficulty").get<double>();
      if (!(d > 0.0 && d <= 1.0)) {
        raise(ErrorCode::parse,
              where + ": difficulty must lie in (0, 1], got " + format_double(d));
      }
      rec.difficulty = d;
    }
    if (!seen.insert(rec.id).second) {
      raise(ErrorCode::parse, where + ": duplicate id \"" + rec.id + "\"");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void save_dataset(const std::vector<QuestionRecord>& records,
                  const std::string& path) {
  std::ostringstream out;
  for (const auto& rec : records) {
    ordered_json j;
    j["id"] = rec.id;
    j["question"] = rec.text;
    j["answer"] = rec.gold_answer;
    if (rec.difficulty) j["difficulty"] = *rec.difficulty;
    out << j.dump() << '\n';
  }
  write_text_file_atomic(path, out.str());
}

DatasetSplit split_validation(const std::vector<QuestionRecord>& records,
                              std::size_t k, std::uint64_t seed) {
  if (k > records.size()) {
    raise(ErrorCode::invalid_argument,
          "split_validation: k=" + std::to_string(k) + " exceeds dataset size " +
              std::to_string(records.size()));
  }
  const std::size_t n = records.size();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  // Partial Fisher-Yates: the first k entries are a uniform k-subset.
  Rng rng(mix_seed(seed, 0x76616c73ull /* "vals" */));
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.next_below(n - i));
    std::swap(idx[i], idx[j]);
  }
  std::vector<bool> in_validation(n, false);
  for (std::size_t i = 0; i < k; ++i) in_validation[idx[i]] = true;
  DatasetSplit split;
  split.seed = seed;
  split.validation.reserve(k);
  split.train.reserve(n - k);
  for (std::size_t i = 0; i < n; ++i) {
    (in_validation[i] ? split.validation : split.train).push_back(records[i]);
  }
  return split;
}

std::vector<std::vector<QuestionRecord>> partition_batches(
    const std::vector<QuestionRecord>& records, std::size_t batch_size,
    std::uint64_t seed) {
  if (batch_size < 2) {
    raise(ErrorCode::invalid_argument,
          "partition_batches: batch_size must be >= 2 (a singleton batch "
          "cannot be ranked)");
  }
  if (records.size() == 1) {
    raise(ErrorCode::invalid_argument,
          "partition_batches: cannot batch a single record for ranking");
  }
  std::vector<QuestionRecord> shuffled = records;
  Rng rng(mix_seed(seed, 0x62617463ull /* "batc" */));
  rng.shuffle(shuffled);
  std::vector<std::vector<QuestionRecord>> batches;
  for (std::size_t i = 0; i < shuffled.size(); i += batch_size) {
    std::size_t end = std::min(i + batch_size, shuffled.size());
    batches.emplace_back(shuffled.begin() + static_cast<std::ptrdiff_t>(i),
                         shuffled.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (batches.size() >= 2 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(std::move(batches.back().front()));
    batches.pop_back();
  }
  return batches;
}

}  // namespace ilr
