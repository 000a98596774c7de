#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "agents.hpp"
#include "irt.hpp"
#include "json.hpp"
#include "rollout.hpp"

namespace ilr {

// One entry of the config's "agents" list; exactly the fields for its backend.
struct AgentConfig {
  std::string id;
  AgentBackendKind backend = AgentBackendKind::synthetic;
  // scripted
  std::string replay_path;
  // synthetic
  double gamma = 0.5;
  std::uint64_t seed = 0;
  std::string answer_template;
  // http
  std::string base_url;
  std::string model_name;
  std::string api_key_env;
  int timeout_ms = 30000;
  int max_attempts = 3;
  int backoff_ms = 500;
  int max_in_flight = 4;
};

struct DifficultyConfigSection {
  std::size_t batch_size = 10;
  int splits = 10;
  std::vector<int> variants = {1, 2, 3};
  std::uint64_t seed = 0;
  int retry_limit = 3;
  std::size_t parallelism = 4;
};

struct AbilityConfigSection {
  std::string validation_path;
  std::size_t parallelism = 4;
};

struct ModeConfigSection {
  ModeSource source = ModeSource::irt;
  double p = 0.5;
};

struct RolloutConfigSection {
  int n = 8;
  double temperature = 0.5;
  int max_tokens = 2048;
  std::size_t parallelism = 4;
  std::uint64_t seed = 0;
  int n_min = 1;
};

enum class RewardKind { oracle, http };

struct RewardConfigSection {
  RewardKind kind = RewardKind::oracle;
  std::string endpoint;
  int timeout_ms = 30000;
  int max_attempts = 3;
  int backoff_ms = 500;
};

struct EvalConfigSection {
  double temperature = 0.0;
  int max_tokens = 2048;
  int aime_max_tokens = 8192;
  std::size_t parallelism = 4;
};

struct RunConfig {
  std::vector<AgentConfig> agents;
  DifficultyConfigSection difficulty;
  AbilityConfigSection ability;
  ModeConfigSection mode;
  RolloutConfigSection rollout;
  RewardConfigSection reward;
  EvalConfigSection eval;
  std::string prompts_dir;  // empty -> built-in default resolution
};

// Strict parse: unknown keys anywhere are config errors, as are
// out-of-domain values. Missing sections fall back to defaults; "agents" is
// required only by commands that talk to agents, so an empty list parses.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

nlohmann::ordered_json serialize_run_config(const RunConfig& config);

// Hash of the key-sorted serialized form; recorded in export manifests.
std::string config_hash(const RunConfig& config);

// Instantiates agent handles (loading scripted replay tables from disk and
// checking http env vars). Duplicate ids are config errors.
std::vector<AgentHandle> build_agents(const RunConfig& config);

RewardProvider build_reward_provider(const RunConfig& config);

RolloutConfig build_rollout_config(const RunConfig& config);

}  // namespace ilr
