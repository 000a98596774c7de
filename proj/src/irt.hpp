#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agents.hpp"
#include "checker.hpp"
#include "dataset.hpp"
#include "interaction.hpp"
#include "prompts.hpp"

namespace ilr {

// 1 / (1 + e^(−1.7·(gamma − d))): the chance an agent of ability gamma solves
// a question of difficulty d.
double solve_probability(double gamma, double d);

struct AbilityProfile {
  std::string agent_id;
  double gamma = 0.0;  // validation accuracy, in [0, 1]
  std::string measured_on;
  std::size_t sample_count = 0;
};

enum class ModeSource { irt, ratio };

const char* mode_source_name(ModeSource source) noexcept;

struct ModeDecision {
  std::string question_id;
  std::optional<double> p_q;              // set for irt-sourced decisions
  std::map<std::string, double> per_agent_p;  // idem
  InteractionMode mode = InteractionMode::competition;
  ModeSource source = ModeSource::irt;
};

struct AbilityOptions {
  SamplingParams sampling;  // evaluation decoding: temperature 0
  std::size_t parallelism = 4;
  std::string dataset_name = "validation";
};

// gamma = fraction of validation questions answered correctly under
// single-agent inference.
AbilityProfile estimate_ability(const AgentHandle& agent,
                                const std::vector<QuestionRecord>& validation,
                                const AnswerChecker& checker,
                                const PromptLibrary& prompts,
                                const AbilityOptions& options);

// Mean solve probability across profiles; below 0.5 the group cooperates,
// at or above it competes.
ModeDecision select_mode(const std::vector<AbilityProfile>& profiles,
                         const std::string& question_id, double d_q);

// Difficulty-ranked override: the hardest ⌈p·N⌉ questions cooperate, the rest
// compete. Ties in difficulty break by question id ascending.
std::map<std::string, ModeDecision> select_modes_by_ratio(
    const std::map<std::string, double>& difficulties, double p);

// JSONL: {"qid", "p_q", "mode", "source"}; p_q is null for ratio decisions.
void write_mode_decisions(const std::vector<ModeDecision>& decisions,
                          const std::string& path);

// JSONL: {"agent", "gamma", "measured_on", "sample_count"}.
void write_profiles(const std::vector<AbilityProfile>& profiles,
                    const std::string& path);
std::vector<AbilityProfile> read_profiles(const std::string& path);

}  // namespace ilr
