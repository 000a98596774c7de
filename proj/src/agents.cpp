#include "agents.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <random>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "errors.hpp"
#include "irt.hpp"
#include "json.hpp"
#include "rng.hpp"

namespace ilr {

const char* role_name(Role role) noexcept {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "unknown";
}

Role parse_role(const std::string& name) {
  if (name == "system") return Role::system;
  if (name == "user") return Role::user;
  if (name == "assistant") return Role::assistant;
  raise(ErrorCode::invalid_argument, "unknown chat role: '" + name + "'");
}

const char* agent_backend_name(AgentBackendKind kind) noexcept {
  switch (kind) {
    case AgentBackendKind::scripted: return "scripted";
    case AgentBackendKind::synthetic: return "synthetic";
    case AgentBackendKind::http: return "http";
  }
  return "unknown";
}

AgentBackendKind parse_agent_backend(const std::string& name) {
  if (name == "scripted") return AgentBackendKind::scripted;
  if (name == "synthetic") return AgentBackendKind::synthetic;
  if (name == "http") return AgentBackendKind::http;
  raise(ErrorCode::config, "unknown agent backend: '" + name + "'");
}

AgentHandle make_scripted_agent(std::string id, ScriptedConfig config) {
  AgentHandle a;
  a.id = std::move(id);
  a.backend = std::move(config);
  return a;
}

AgentHandle make_synthetic_agent(std::string id, SyntheticConfig config) {
  AgentHandle a;
  a.id = std::move(id);
  a.backend = std::move(config);
  return a;
}

AgentHandle make_http_agent(std::string id, HttpConfig config) {
  AgentHandle a;
  a.id = std::move(id);
  std::size_t cap = config.max_in_flight > 0
                        ? static_cast<std::size_t>(config.max_in_flight)
                        : 1;
  a.backend = std::move(config);
  a.http_gate = std::make_shared<Semaphore>(cap);
  return a;
}

bool is_scripted(const AgentHandle& a) {
  return std::holds_alternative<ScriptedConfig>(a.backend);
}
bool is_synthetic(const AgentHandle& a) {
  return std::holds_alternative<SyntheticConfig>(a.backend);
}
bool is_http(const AgentHandle& a) {
  return std::holds_alternative<HttpConfig>(a.backend);
}

std::uint64_t prompt_key(const std::vector<ChatMessage>& messages) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& m : messages) {
    h = fnv1a64(role_name(m.role), h);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(m.content, h);
    h = fnv1a64("\x1e", h);
  }
  return h;
}

static void check_messages(const std::vector<ChatMessage>& messages) {
  if (messages.empty()) {
    raise(ErrorCode::invalid_argument, "complete: empty message list");
  }
  if (messages.back().role != Role::user) {
    raise(ErrorCode::invalid_argument, "complete: last turn must be user");
  }
  for (const auto& m : messages) {
    if (m.role != Role::system && m.content.empty()) {
      raise(ErrorCode::invalid_argument,
            "complete: empty content in a " + std::string(role_name(m.role)) +
                " turn");
    }
  }
}

// --- scripted ------------------------------------------------------------

static std::string complete_scripted(const AgentHandle& agent,
                                     const ScriptedConfig& cfg,
                                     const std::vector<ChatMessage>& messages,
                                     const CompletionContext& ctx) {
  const std::uint64_t key = prompt_key(messages);
  auto it = cfg.responses.find({key, ctx.sample_index});
  if (it == cfg.responses.end()) {
    raise(ErrorCode::replay_gap,
          "scripted agent '" + agent.id + "': no replay entry for key " +
              hex64(key) + " sample " + std::to_string(ctx.sample_index));
  }
  return it->second;
}

// --- synthetic -----------------------------------------------------------

static const char* kDefaultAnswerTemplate =
    "Working through the problem one step at a time and combining the "
    "intermediate results gives a single value. The final answer is "
    "boxed{<<answer>>}.";

// gold+1 for numeric golds, otherwise a fixed sentinel, so the correctness
// checker sees both hit and miss cases.
static std::string wrong_answer(const std::string& gold) {
  const std::string g = trim(gold);
  long long iv = 0;
  auto ir = std::from_chars(g.data(), g.data() + g.size(), iv);
  if (ir.ec == std::errc() && ir.ptr == g.data() + g.size()) {
    return std::to_string(iv + 1);
  }
  double dv = 0.0;
  auto dr = std::from_chars(g.data(), g.data() + g.size(), dv);
  if (dr.ec == std::errc() && dr.ptr == g.data() + g.size()) {
    return format_double(dv + 1.0);
  }
  return "no-answer";
}

static std::string complete_synthetic(const AgentHandle& agent,
                                      const SyntheticConfig& cfg,
                                      const std::vector<ChatMessage>& messages,
                                      const SamplingParams& params,
                                      const CompletionContext& ctx) {
  std::uint64_t seed = mix_seed(cfg.seed, params.seed.value_or(0));
  seed = mix_seed(seed, prompt_key(messages));
  seed = mix_seed(seed, static_cast<std::uint64_t>(ctx.sample_index));
  seed = mix_seed(seed, ctx.question_id);
  Rng rng(seed);

  if (ctx.ranking_batch_len) {
    const int n = *ctx.ranking_batch_len;
    if (n < 2) {
      raise(ErrorCode::invalid_argument,
            "synthetic agent '" + agent.id + "': ranking batch length must "
            "be >= 2");
    }
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i + 1;
    rng.shuffle(order);
    std::ostringstream out;
    out << "Comparing the questions by how much work each one needs.\n"
        << "Ranking: [";
    for (int i = 0; i < n; ++i) {
      if (i) out << ", ";
      out << 'Q' << order[static_cast<std::size_t>(i)];
    }
    out << ']';
    return out.str();
  }

  if (!ctx.difficulty) {
    raise(ErrorCode::invalid_argument,
          "synthetic agent '" + agent.id +
              "': completion context lacks a difficulty value");
  }
  if (ctx.gold_answer.empty()) {
    raise(ErrorCode::invalid_argument,
          "synthetic agent '" + agent.id +
              "': completion context lacks the gold answer");
  }
  bool correct = true;
  if (cfg.gamma < 1.0) {
    const double p = solve_probability(cfg.gamma, *ctx.difficulty);
    correct = rng.next_unit() < p;
  }
  const std::string answer =
      correct ? trim(ctx.gold_answer) : wrong_answer(ctx.gold_answer);
  std::string text =
      cfg.answer_template.empty() ? kDefaultAnswerTemplate : cfg.answer_template;
  replace_all(text, "<<answer>>", answer);
  return text;
}

// --- http ----------------------------------------------------------------

static void backoff_sleep(int base_ms, int attempt) {
  if (base_ms <= 0) return;
  thread_local std::mt19937_64 jitter(
      std::random_device{}() ^
      static_cast<std::uint64_t>(
          std::hash<std::thread::id>{}(std::this_thread::get_id())));
  const double u =
      static_cast<double>(jitter() >> 11) * 0x1.0p-53;  // [0, 1)
  const double cap =
      static_cast<double>(base_ms) * static_cast<double>(1u << std::min(attempt, 16));
  std::this_thread::sleep_for(
      std::chrono::milliseconds(static_cast<long>(u * cap)));
}

static std::string complete_http(const AgentHandle& agent,
                                 const HttpConfig& cfg,
                                 const std::vector<ChatMessage>& messages,
                                 const SamplingParams& params) {
  SplitUrl url = split_url(cfg.base_url);

  nlohmann::json body;
  body["model"] = cfg.model_name;
  body["messages"] = nlohmann::json::array();
  for (const auto& m : messages) {
    body["messages"].push_back(
        {{"role", role_name(m.role)}, {"content", m.content}});
  }
  body["temperature"] = params.temperature;
  body["max_tokens"] = params.max_tokens;
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (!cfg.api_key_env.empty()) {
    const char* key = std::getenv(cfg.api_key_env.c_str());
    if (!key || !*key) {
      raise(ErrorCode::config,
            "http agent '" + agent.id + "': environment variable " +
                cfg.api_key_env + " is not set");
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  httplib::Client client(url.origin);
  client.set_connection_timeout(cfg.timeout_ms / 1000,
                                (cfg.timeout_ms % 1000) * 1000);
  client.set_read_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);
  client.set_write_timeout(cfg.timeout_ms / 1000,
                           (cfg.timeout_ms % 1000) * 1000);
  const std::string path = url.path + "/chat/completions";

  const int attempts = std::max(cfg.retry.max_attempts, 1);
  std::string last_failure = "no attempt made";
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) backoff_sleep(cfg.retry.backoff_base_ms, attempt - 1);
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_failure = "connection error: " + httplib::to_string(res.error());
      continue;  // transport-level failures (incl. timeouts) are retryable
    }
    const int status = res->status;
    if (status >= 200 && status < 300) {
      nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
      if (reply.is_discarded() || !reply.contains("choices") ||
          !reply["choices"].is_array() || reply["choices"].empty() ||
          !reply["choices"][0].contains("message") ||
          !reply["choices"][0]["message"].contains("content") ||
          !reply["choices"][0]["message"]["content"].is_string()) {
        raise(ErrorCode::parse,
              "http agent '" + agent.id +
                  "': malformed chat-completions response body");
      }
      return reply["choices"][0]["message"]["content"].get<std::string>();
    }
    if (status == 429 || status >= 500) {
      last_failure = "status " + std::to_string(status);
      continue;
    }
    raise(ErrorCode::transport,
          "http agent '" + agent.id + "': POST " + path +
              " failed with status " + std::to_string(status) +
              " (not retryable)");
  }
  raise(ErrorCode::transport,
        "http agent '" + agent.id + "': POST " + path + " failed after " +
            std::to_string(attempts) + " attempts; last failure: " +
            last_failure);
}

std::string complete(const AgentHandle& agent,
                     const std::vector<ChatMessage>& messages,
                     const SamplingParams& params,
                     const CompletionContext& ctx) {
  check_messages(messages);
  if (params.max_tokens <= 0) {
    raise(ErrorCode::invalid_argument, "complete: max_tokens must be > 0");
  }
  std::string response;
  if (const auto* scripted = std::get_if<ScriptedConfig>(&agent.backend)) {
    response = complete_scripted(agent, *scripted, messages, ctx);
  } else if (const auto* synthetic =
                 std::get_if<SyntheticConfig>(&agent.backend)) {
    response = complete_synthetic(agent, *synthetic, messages, params, ctx);
  } else {
    const auto& http = std::get<HttpConfig>(agent.backend);
    if (agent.http_gate) agent.http_gate->acquire();
    try {
      response = complete_http(agent, http, messages, params);
    } catch (...) {
      if (agent.http_gate) agent.http_gate->release();
      throw;
    }
    if (agent.http_gate) agent.http_gate->release();
  }
  if (agent.tap && *agent.tap) (*agent.tap)(agent.id, messages, response);
  return response;
}

ScriptedConfig load_replay_table(const std::string& path) {
  ScriptedConfig cfg;
  auto lines = read_json_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& j = lines[i];
    const std::string where = path + ":" + std::to_string(i + 1);
    if (!j.is_object() || !j.contains("key") || !j["key"].is_string() ||
        !j.contains("index") || !j["index"].is_number_integer() ||
        !j.contains("text") || !j["text"].is_string()) {
      raise(ErrorCode::parse,
            where + ": replay entries need string \"key\", integer \"index\", "
                    "string \"text\"");
    }
    const std::uint64_t key = parse_hex64(j["key"].get<std::string>());
    const int index = j["index"].get<int>();
    auto inserted =
        cfg.responses.insert({{key, index}, j["text"].get<std::string>()});
    if (!inserted.second) {
      raise(ErrorCode::parse, where + ": duplicate replay entry");
    }
  }
  return cfg;
}

void save_replay_table(const ScriptedConfig& config, const std::string& path) {
  std::ostringstream out;
  for (const auto& [key, text] : config.responses) {
    nlohmann::ordered_json j;
    j["key"] = hex64(key.first);
    j["index"] = key.second;
    j["text"] = text;
    out << j.dump() << '\n';
  }
  write_text_file_atomic(path, out.str());
}

}  // namespace ilr
