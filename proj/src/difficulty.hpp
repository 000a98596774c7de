#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "agents.hpp"
#include "dataset.hpp"
#include "prompts.hpp"

namespace ilr {

// One parsed ranking position: question `question_id` was placed at
// `rank` (1 = easiest) in a batch of batch_len by `model_id`.
struct RankObservation {
  std::string question_id;
  std::string model_id;
  int split_index = 0;  // 1-based
  int variant_id = 0;   // 1..3
  int rank = 0;         // 1..batch_len
  int batch_len = 0;
};

struct DifficultyEstimate {
  std::string question_id;
  std::map<std::string, double> per_model_scores;
  double d_q = 0.0;
  std::size_t observation_count = 0;
};

enum class RankParseFailure {
  none,
  no_pattern,       // no "Ranking: [Q..]" pattern anywhere
  duplicate_index,  // same question listed twice
  out_of_range,     // index outside [1, batch_len]
  wrong_count,      // arity mismatch
};

const char* rank_parse_failure_name(RankParseFailure failure) noexcept;

struct ParsedRanking {
  std::vector<int> indices;  // easiest first, 1-based question indices
  RankParseFailure failure = RankParseFailure::none;
  bool ok() const { return failure == RankParseFailure::none; }
};

// Variant body (1..3) with the questions labeled Q1..Qn in batch order,
// followed by the shared format instruction.
std::string build_ranking_prompt(const std::vector<QuestionRecord>& batch,
                                 int variant_id, const PromptLibrary& prompts);

// Extracts the last well-formed "Ranking: [Q i1, ..., Q in]" occurrence
// (case- and whitespace-tolerant) and validates it as a permutation of
// 1..batch_len. Parse failure is ordinary retry control flow, hence a result
// rather than an exception.
ParsedRanking parse_ranking(const std::string& response, int batch_len);

// Question index (1-based) -> rank position / batch_len.
std::map<int, double> normalize_ranks(const std::vector<int>& perm,
                                      int batch_len);

// Per model: pooled mean of normalized scores across splits and variants;
// d_q: mean over models. A (question, model) pair with zero observations is a
// coverage error listing every missing pair.
std::map<std::string, DifficultyEstimate> aggregate_difficulty(
    const std::vector<RankObservation>& observations,
    const std::vector<std::string>& models);

std::uint64_t split_seed(std::uint64_t root_seed, int split_index);

struct DroppedQuery {
  int split_index = 0;
  int variant_id = 0;
  std::size_t batch_index = 0;
  std::string model_id;
  std::string reason;
};

struct DifficultyOptions {
  int splits = 10;
  std::size_t batch_size = 10;
  std::vector<int> variants = {1, 2, 3};
  int retry_limit = 3;  // parse retries after the first attempt
  std::uint64_t seed = 0;
  std::size_t parallelism = 4;
  SamplingParams sampling;
};

struct DifficultyRun {
  std::map<std::string, DifficultyEstimate> estimates;
  std::vector<RankObservation> observations;
  std::vector<DroppedQuery> dropped;
};

// The full self-ranking pass: for each split seed, prompt variant, and agent,
// partition + prompt + parse (with retries) + normalize, then aggregate.
// Failed queries are dropped and logged, never imputed.
DifficultyRun estimate_difficulty(const std::vector<QuestionRecord>& dataset,
                                  const std::vector<AgentHandle>& agents,
                                  const DifficultyOptions& options,
                                  const PromptLibrary& prompts);

// Audit sidecar JSONL: {"qid", "model", "split", "variant", "rank",
// "batch_len"}.
void write_observations(const std::vector<RankObservation>& observations,
                        const std::string& path);
std::vector<RankObservation> read_observations(const std::string& path);

}  // namespace ilr
