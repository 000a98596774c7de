#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "util.hpp"

namespace ilr {

enum class Role { system, user, assistant };

const char* role_name(Role role) noexcept;
Role parse_role(const std::string& name);  // invalid_argument on bad name

struct ChatMessage {
  Role role = Role::user;
  std::string content;
};

struct SamplingParams {
  double temperature = 0.0;
  int max_tokens = 2048;
  std::optional<std::uint64_t> seed;
};

// Per-call context the deterministic backends need: which question is being
// worked on (gold + difficulty drive the synthetic agent) and a sample index
// that distinguishes repeated draws of the same prompt. A ranking batch length
// switches the synthetic agent into permutation-emitting mode.
struct CompletionContext {
  std::string question_id;
  std::string gold_answer;
  std::optional<double> difficulty;
  int sample_index = 0;
  std::optional<int> ranking_batch_len;
};

struct RetryPolicy {
  int max_attempts = 3;
  int backoff_base_ms = 500;  // exponential, full jitter; 0 disables sleeping
};

enum class AgentBackendKind { scripted, synthetic, http };

const char* agent_backend_name(AgentBackendKind kind) noexcept;
AgentBackendKind parse_agent_backend(const std::string& name);

struct ScriptedConfig {
  // (prompt key, sample index) -> response. A miss is a replay-gap error,
  // never a silent fallback.
  std::map<std::pair<std::uint64_t, int>, std::string> responses;
};

struct SyntheticConfig {
  double gamma = 0.5;  // >= 1 means "always correct"
  std::uint64_t seed = 0;
  // Must contain <<answer>>; the boxed answer equals gold with probability
  // solve_probability(gamma, difficulty) under a seeded draw.
  std::string answer_template;  // empty -> built-in default
};

struct HttpConfig {
  std::string base_url;  // scheme://host[:port][/path-prefix]
  std::string model_name;
  std::string api_key_env;  // name of the env var holding the bearer token
  int timeout_ms = 30000;
  RetryPolicy retry;
  int max_in_flight = 4;
};

using CompletionTap = std::function<void(
    const std::string& agent_id, const std::vector<ChatMessage>& messages,
    const std::string& response)>;

// Immutable once constructed; safe to share across threads.
struct AgentHandle {
  std::string id;
  std::variant<ScriptedConfig, SyntheticConfig, HttpConfig> backend;
  // Test/audit hook: observes every successful completion. Must be
  // thread-safe if the caller runs concurrently.
  std::shared_ptr<const CompletionTap> tap;
  // Per-agent in-flight cap for the http backend.
  std::shared_ptr<Semaphore> http_gate;
};

AgentHandle make_scripted_agent(std::string id, ScriptedConfig config);
AgentHandle make_synthetic_agent(std::string id, SyntheticConfig config);
AgentHandle make_http_agent(std::string id, HttpConfig config);

bool is_scripted(const AgentHandle& agent);
bool is_synthetic(const AgentHandle& agent);
bool is_http(const AgentHandle& agent);

// Stable 64-bit key of a message list; the scripted replay table and its
// authoring helpers both use this.
std::uint64_t prompt_key(const std::vector<ChatMessage>& messages);

std::string complete(const AgentHandle& agent,
                     const std::vector<ChatMessage>& messages,
                     const SamplingParams& params,
                     const CompletionContext& ctx = {});

// Scripted replay tables are persisted as JSONL:
//   {"key": "<16 hex digits>", "index": int, "text": str}
ScriptedConfig load_replay_table(const std::string& path);
void save_replay_table(const ScriptedConfig& config, const std::string& path);

}  // namespace ilr
