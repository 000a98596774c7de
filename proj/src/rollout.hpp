#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "agents.hpp"
#include "calibration.hpp"
#include "checker.hpp"
#include "dataset.hpp"
#include "interaction.hpp"
#include "irt.hpp"
#include "prompts.hpp"

namespace ilr {

// Scores a selected answer 1.0 / 0.0 against gold.
struct OracleReward {
  AnswerChecker checker;  // empty -> the default boxed-answer checker
};

// POST {"items": [{"prompt", "response"}, ...]} -> {"scores": [...]}.
struct HttpReward {
  std::string endpoint;  // full URL
  int timeout_ms = 30000;
  RetryPolicy retry;
};

using RewardProvider = std::variant<OracleReward, HttpReward>;

struct ScoreItem {
  std::string prompt;
  std::string response;
  std::string gold;  // oracle only; never sent over http
};

std::vector<double> score_rewards(const std::vector<ScoreItem>& items,
                                  const RewardProvider& provider);

struct TrainingRecord {
  std::string agent_id;
  std::string question_id;
  int sample_index = 0;
  InteractionMode mode = InteractionMode::competition;
  std::vector<ChatMessage> prompt;  // full fusion-stage request context
  std::string response;             // the selected answer text
  double reward_raw = 0.0;
  double reward_cal = 0.0;
  double advantage = 0.0;
  SelectionReason reason = SelectionReason::took_updated;
};

struct ModeSourceConfig {
  ModeSource source = ModeSource::irt;
  double p = 0.5;  // cooperation ratio, used when source = ratio
};

struct RolloutConfig {
  int n = 8;  // samples per question
  double temperature = 0.5;
  int max_tokens = 2048;
  ModeSourceConfig mode;
  std::size_t parallelism = 4;
  std::uint64_t seed = 0;
  int n_min = 1;  // questions with fewer surviving samples are excluded
};

struct DroppedSample {
  std::string question_id;
  int sample_index = 0;
  std::string reason;
};

struct DroppedQuestion {
  std::string question_id;
  std::string reason;
};

struct RolloutResult {
  std::vector<TrainingRecord> records;  // question-major, agent, then k
  std::vector<ModeDecision> decisions;  // dataset order
  std::vector<DroppedSample> dropped_samples;
  std::vector<DroppedQuestion> dropped_questions;
};

// Per question: decide mode, run n independent Idea3 cycles, select each
// agent's training answer by label, score everything, calibrate across
// agents, attach advantages. A failed cycle drops that sample for ALL agents
// so reward groups stay aligned; questions falling under n_min surviving
// samples (or failing scoring) are excluded entirely.
RolloutResult run_rollout(const std::vector<QuestionRecord>& dataset,
                          const std::vector<AgentHandle>& agents,
                          const std::vector<AbilityProfile>& profiles,
                          const RolloutConfig& config,
                          const RewardProvider& provider,
                          const PromptLibrary& prompts);

struct ExportManifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::size_t n_questions = 0;  // questions that produced records
  std::size_t n_records = 0;
  std::size_t dropped_samples = 0;
  std::vector<std::string> dropped_questions;
};

// Records as JSONL with stable field order, written atomically.
// {"agent", "qid", "k", "mode", "prompt", "response", "reward_raw",
//  "reward_cal", "advantage", "reason"} per line.
void write_training_records(const std::vector<TrainingRecord>& records,
                            const std::string& path);

// write_training_records plus uniqueness validation and a sidecar manifest at
// <path>.manifest.json.
void export_training_records(const std::vector<TrainingRecord>& records,
                             const ExportManifest& manifest,
                             const std::string& path);

std::vector<TrainingRecord> read_training_records(const std::string& path);

// Offline replay: regroups raw rewards per (question, agent), reruns the
// calibration + advantage pipeline, and returns records with the derived
// fields rewritten. Misaligned groups are a schema error.
std::vector<TrainingRecord> recalibrate_records(
    std::vector<TrainingRecord> records);

}  // namespace ilr
