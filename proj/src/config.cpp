#include "config.hpp"

#include <cstdlib>
#include <set>

#include "errors.hpp"
#include "eval.hpp"
#include "util.hpp"

namespace ilr {

using nlohmann::json;
using nlohmann::ordered_json;

static void reject_unknown_keys(const json& obj, const std::string& where,
                                const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key)) {
      raise(ErrorCode::config, where + ": unknown key \"" + key + "\"");
    }
  }
}

static double get_number(const json& obj, const std::string& where,
                         const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number()) {
    raise(ErrorCode::config, where + ": \"" + key + "\" must be a number");
  }
  return obj.at(key).get<double>();
}

static std::int64_t get_integer(const json& obj, const std::string& where,
                                const char* key, std::int64_t fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number_integer()) {
    raise(ErrorCode::config, where + ": \"" + key + "\" must be an integer");
  }
  return obj.at(key).get<std::int64_t>();
}

static std::string get_string(const json& obj, const std::string& where,
                              const char* key, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_string()) {
    raise(ErrorCode::config, where + ": \"" + key + "\" must be a string");
  }
  return obj.at(key).get<std::string>();
}

static std::int64_t require_positive(std::int64_t v, const std::string& where,
                                     const char* key) {
  if (v <= 0) {
    raise(ErrorCode::config,
          where + ": \"" + key + "\" must be > 0, got " + std::to_string(v));
  }
  return v;
}

static AgentConfig parse_agent(const json& j, std::size_t index) {
  const std::string where = "config agents[" + std::to_string(index) + "]";
  if (!j.is_object()) raise(ErrorCode::config, where + ": expected an object");
  const std::string id = get_string(j, where, "id", "");
  if (id.empty()) raise(ErrorCode::config, where + ": missing \"id\"");
  const std::string backend = get_string(j, where, "backend", "");
  if (backend.empty()) raise(ErrorCode::config, where + ": missing \"backend\"");

  AgentConfig cfg;
  cfg.id = id;
  cfg.backend = parse_agent_backend(backend);
  switch (cfg.backend) {
    case AgentBackendKind::scripted: {
      reject_unknown_keys(j, where, {"id", "backend", "replay_path"});
      cfg.replay_path = get_string(j, where, "replay_path", "");
      if (cfg.replay_path.empty()) {
        raise(ErrorCode::config, where + ": scripted backend needs "
                                         "\"replay_path\"");
      }
      break;
    }
    case AgentBackendKind::synthetic: {
      reject_unknown_keys(j, where,
                          {"id", "backend", "gamma", "seed", "answer_template"});
      if (!j.contains("gamma")) {
        raise(ErrorCode::config, where + ": synthetic backend needs \"gamma\"");
      }
      cfg.gamma = get_number(j, where, "gamma", 0.0);
      if (!(cfg.gamma >= 0.0 && cfg.gamma <= 1.0)) {
        raise(ErrorCode::config, where + ": \"gamma\" must lie in [0, 1]");
      }
      cfg.seed = static_cast<std::uint64_t>(get_integer(j, where, "seed", 0));
      cfg.answer_template = get_string(j, where, "answer_template", "");
      if (!cfg.answer_template.empty() &&
          cfg.answer_template.find("<<answer>>") == std::string::npos) {
        raise(ErrorCode::config,
              where + ": \"answer_template\" must contain <<answer>>");
      }
      break;
    }
    case AgentBackendKind::http: {
      reject_unknown_keys(j, where,
                          {"id", "backend", "base_url", "model", "api_key_env",
                           "timeout_ms", "max_attempts", "backoff_ms",
                           "max_in_flight"});
      cfg.base_url = get_string(j, where, "base_url", "");
      cfg.model_name = get_string(j, where, "model", "");
      if (cfg.base_url.empty() || cfg.model_name.empty()) {
        raise(ErrorCode::config,
              where + ": http backend needs \"base_url\" and \"model\"");
      }
      split_url(cfg.base_url);  // validates the scheme/host shape
      cfg.api_key_env = get_string(j, where, "api_key_env", "");
      cfg.timeout_ms = static_cast<int>(require_positive(
          get_integer(j, where, "timeout_ms", 30000), where, "timeout_ms"));
      cfg.max_attempts = static_cast<int>(require_positive(
          get_integer(j, where, "max_attempts", 3), where, "max_attempts"));
      cfg.backoff_ms =
          static_cast<int>(get_integer(j, where, "backoff_ms", 500));
      if (cfg.backoff_ms < 0) {
        raise(ErrorCode::config, where + ": \"backoff_ms\" must be >= 0");
      }
      cfg.max_in_flight = static_cast<int>(require_positive(
          get_integer(j, where, "max_in_flight", 4), where, "max_in_flight"));
      break;
    }
  }
  return cfg;
}

RunConfig parse_run_config(const std::string& json_text) {
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded()) {
    raise(ErrorCode::config, "config is not valid JSON");
  }
  if (!j.is_object()) {
    raise(ErrorCode::config, "config root must be a JSON object");
  }
  reject_unknown_keys(j, "config",
                      {"agents", "difficulty", "ability", "mode", "rollout",
                       "reward", "eval", "prompts_dir"});
  RunConfig cfg;

  if (j.contains("agents")) {
    if (!j["agents"].is_array()) {
      raise(ErrorCode::config, "config: \"agents\" must be an array");
    }
    std::set<std::string> ids;
    for (std::size_t i = 0; i < j["agents"].size(); ++i) {
      AgentConfig agent = parse_agent(j["agents"][i], i);
      if (!ids.insert(agent.id).second) {
        raise(ErrorCode::config,
              "config: duplicate agent id \"" + agent.id + "\"");
      }
      cfg.agents.push_back(std::move(agent));
    }
  }

  if (j.contains("difficulty")) {
    const auto& d = j["difficulty"];
    const std::string where = "config difficulty";
    if (!d.is_object()) raise(ErrorCode::config, where + ": expected an object");
    reject_unknown_keys(d, where,
                        {"batch_size", "splits", "variants", "seed",
                         "retry_limit", "parallelism"});
    cfg.difficulty.batch_size = static_cast<std::size_t>(require_positive(
        get_integer(d, where, "batch_size", 10), where, "batch_size"));
    if (cfg.difficulty.batch_size < 2) {
      raise(ErrorCode::config, where + ": \"batch_size\" must be >= 2");
    }
    cfg.difficulty.splits = static_cast<int>(require_positive(
        get_integer(d, where, "splits", 10), where, "splits"));
    if (d.contains("variants")) {
      if (!d["variants"].is_array() || d["variants"].empty()) {
        raise(ErrorCode::config,
              where + ": \"variants\" must be a non-empty array");
      }
      cfg.difficulty.variants.clear();
      for (const auto& v : d["variants"]) {
        if (!v.is_number_integer()) {
          raise(ErrorCode::config, where + ": variant ids must be integers");
        }
        const int id = v.get<int>();
        if (id < 1 || id > 3) {
          raise(ErrorCode::config,
                where + ": variant ids must be 1..3, got " + std::to_string(id));
        }
        cfg.difficulty.variants.push_back(id);
      }
    }
    cfg.difficulty.seed =
        static_cast<std::uint64_t>(get_integer(d, where, "seed", 0));
    cfg.difficulty.retry_limit =
        static_cast<int>(get_integer(d, where, "retry_limit", 3));
    if (cfg.difficulty.retry_limit < 0) {
      raise(ErrorCode::config, where + ": \"retry_limit\" must be >= 0");
    }
    cfg.difficulty.parallelism = static_cast<std::size_t>(require_positive(
        get_integer(d, where, "parallelism", 4), where, "parallelism"));
  }

  if (j.contains("ability")) {
    const auto& a = j["ability"];
    const std::string where = "config ability";
    if (!a.is_object()) raise(ErrorCode::config, where + ": expected an object");
    reject_unknown_keys(a, where, {"validation_path", "parallelism"});
    cfg.ability.validation_path = get_string(a, where, "validation_path", "");
    cfg.ability.parallelism = static_cast<std::size_t>(require_positive(
        get_integer(a, where, "parallelism", 4), where, "parallelism"));
  }

  if (j.contains("mode")) {
    const auto& msec = j["mode"];
    const std::string where = "config mode";
    if (!msec.is_object()) raise(ErrorCode::config, where + ": expected an object");
    reject_unknown_keys(msec, where, {"source", "p"});
    const std::string source = get_string(msec, where, "source", "irt");
    if (source == "irt") {
      cfg.mode.source = ModeSource::irt;
    } else if (source == "ratio") {
      cfg.mode.source = ModeSource::ratio;
    } else {
      raise(ErrorCode::config,
            where + ": \"source\" must be \"irt\" or \"ratio\"");
    }
    cfg.mode.p = get_number(msec, where, "p", 0.5);
    if (!(cfg.mode.p >= 0.0 && cfg.mode.p <= 1.0)) {
      raise(ErrorCode::config, where + ": \"p\" must lie in [0, 1]");
    }
  }

  if (j.contains("rollout")) {
    const auto& r = j["rollout"];
    const std::string where = "config rollout";
    if (!r.is_object()) raise(ErrorCode::config, where + ": expected an object");
    reject_unknown_keys(
        r, where, {"n", "temperature", "max_tokens", "parallelism", "seed",
                   "n_min"});
    cfg.rollout.n = static_cast<int>(
        require_positive(get_integer(r, where, "n", 8), where, "n"));
    cfg.rollout.temperature = get_number(r, where, "temperature", 0.5);
    if (cfg.rollout.temperature < 0.0) {
      raise(ErrorCode::config, where + ": \"temperature\" must be >= 0");
    }
    cfg.rollout.max_tokens = static_cast<int>(require_positive(
        get_integer(r, where, "max_tokens", 2048), where, "max_tokens"));
    cfg.rollout.parallelism = static_cast<std::size_t>(require_positive(
        get_integer(r, where, "parallelism", 4), where, "parallelism"));
    cfg.rollout.seed =
        static_cast<std::uint64_t>(get_integer(r, where, "seed", 0));
    cfg.rollout.n_min = static_cast<int>(
        require_positive(get_integer(r, where, "n_min", 1), where, "n_min"));
    if (cfg.rollout.n_min > cfg.rollout.n) {
      raise(ErrorCode::config, where + ": \"n_min\" must be <= \"n\"");
    }
  }

  if (j.contains("reward")) {
    const auto& r = j["reward"];
    const std::string where = "config reward";
    if (!r.is_object()) raise(ErrorCode::config, where + ": expected an object");
    reject_unknown_keys(
        r, where, {"kind", "endpoint", "timeout_ms", "max_attempts",
                   "backoff_ms"});
    const std::string kind = get_string(r, where, "kind", "oracle");
    if (kind == "oracle") {
      cfg.reward.kind = RewardKind::oracle;
    } else if (kind == "http") {
      cfg.reward.kind = RewardKind::http;
    } else {
      raise(ErrorCode::config,
            where + ": \"kind\" must be \"oracle\" or \"http\"");
    }
    cfg.reward.endpoint = get_string(r, where, "endpoint", "");
    if (cfg.reward.kind == RewardKind::http) {
      if (cfg.reward.endpoint.empty()) {
        raise(ErrorCode::config, where + ": http reward needs \"endpoint\"");
      }
      split_url(cfg.reward.endpoint);
    }
    cfg.reward.timeout_ms = static_cast<int>(require_positive(
        get_integer(r, where, "timeout_ms", 30000), where, "timeout_ms"));
    cfg.reward.max_attempts = static_cast<int>(require_positive(
        get_integer(r, where, "max_attempts", 3), where, "max_attempts"));
    cfg.reward.backoff_ms =
        static_cast<int>(get_integer(r, where, "backoff_ms", 500));
    if (cfg.reward.backoff_ms < 0) {
      raise(ErrorCode::config, where + ": \"backoff_ms\" must be >= 0");
    }
  }

  if (j.contains("eval")) {
    const auto& e = j["eval"];
    const std::string where = "config eval";
    if (!e.is_object()) raise(ErrorCode::config, where + ": expected an object");
    reject_unknown_keys(
        e, where, {"temperature", "max_tokens", "aime_max_tokens",
                   "parallelism"});
    cfg.eval.temperature = get_number(e, where, "temperature", 0.0);
    if (cfg.eval.temperature < 0.0) {
      raise(ErrorCode::config, where + ": \"temperature\" must be >= 0");
    }
    cfg.eval.max_tokens = static_cast<int>(require_positive(
        get_integer(e, where, "max_tokens", 2048), where, "max_tokens"));
    cfg.eval.aime_max_tokens = static_cast<int>(require_positive(
        get_integer(e, where, "aime_max_tokens", 8192), where,
        "aime_max_tokens"));
    cfg.eval.parallelism = static_cast<std::size_t>(require_positive(
        get_integer(e, where, "parallelism", 4), where, "parallelism"));
  }

  cfg.prompts_dir = get_string(j, "config", "prompts_dir", "");
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(read_text_file(path));
}

ordered_json serialize_run_config(const RunConfig& config) {
  ordered_json j;
  j["agents"] = ordered_json::array();
  for (const auto& a : config.agents) {
    ordered_json ja;
    ja["id"] = a.id;
    ja["backend"] = agent_backend_name(a.backend);
    switch (a.backend) {
      case AgentBackendKind::scripted:
        ja["replay_path"] = a.replay_path;
        break;
      case AgentBackendKind::synthetic:
        ja["gamma"] = a.gamma;
        ja["seed"] = a.seed;
        if (!a.answer_template.empty()) ja["answer_template"] = a.answer_template;
        break;
      case AgentBackendKind::http:
        ja["base_url"] = a.base_url;
        ja["model"] = a.model_name;
        if (!a.api_key_env.empty()) ja["api_key_env"] = a.api_key_env;
        ja["timeout_ms"] = a.timeout_ms;
        ja["max_attempts"] = a.max_attempts;
        ja["backoff_ms"] = a.backoff_ms;
        ja["max_in_flight"] = a.max_in_flight;
        break;
    }
    j["agents"].push_back(std::move(ja));
  }
  j["difficulty"] = {{"batch_size", config.difficulty.batch_size},
                     {"splits", config.difficulty.splits},
                     {"variants", config.difficulty.variants},
                     {"seed", config.difficulty.seed},
                     {"retry_limit", config.difficulty.retry_limit},
                     {"parallelism", config.difficulty.parallelism}};
  j["ability"] = {{"validation_path", config.ability.validation_path},
                  {"parallelism", config.ability.parallelism}};
  j["mode"] = {{"source", mode_source_name(config.mode.source)},
               {"p", config.mode.p}};
  j["rollout"] = {{"n", config.rollout.n},
                  {"temperature", config.rollout.temperature},
                  {"max_tokens", config.rollout.max_tokens},
                  {"parallelism", config.rollout.parallelism},
                  {"seed", config.rollout.seed},
                  {"n_min", config.rollout.n_min}};
  j["reward"] = {
      {"kind", config.reward.kind == RewardKind::oracle ? "oracle" : "http"},
      {"endpoint", config.reward.endpoint},
      {"timeout_ms", config.reward.timeout_ms},
      {"max_attempts", config.reward.max_attempts},
      {"backoff_ms", config.reward.backoff_ms}};
  j["eval"] = {{"temperature", config.eval.temperature},
               {"max_tokens", config.eval.max_tokens},
               {"aime_max_tokens", config.eval.aime_max_tokens},
               {"parallelism", config.eval.parallelism}};
  if (!config.prompts_dir.empty()) j["prompts_dir"] = config.prompts_dir;
  return j;
}

std::string config_hash(const RunConfig& config) {
  // Plain json sorts keys, giving a canonical byte stream.
  const json canonical = json(serialize_run_config(config));
  return hex64(fnv1a64(canonical.dump()));
}

std::vector<AgentHandle> build_agents(const RunConfig& config) {
  if (config.agents.empty()) {
    raise(ErrorCode::config, "config: \"agents\" list is empty");
  }
  std::vector<AgentHandle> handles;
  handles.reserve(config.agents.size());
  for (const auto& a : config.agents) {
    switch (a.backend) {
      case AgentBackendKind::scripted:
        handles.push_back(
            make_scripted_agent(a.id, load_replay_table(a.replay_path)));
        break;
      case AgentBackendKind::synthetic: {
        SyntheticConfig sc;
        sc.gamma = a.gamma;
        sc.seed = a.seed;
        sc.answer_template = a.answer_template;
        handles.push_back(make_synthetic_agent(a.id, sc));
        break;
      }
      case AgentBackendKind::http: {
        if (!a.api_key_env.empty()) {
          const char* key = std::getenv(a.api_key_env.c_str());
          if (!key || !*key) {
            raise(ErrorCode::config,
                  "config agents: environment variable " + a.api_key_env +
                      " (agent \"" + a.id + "\") is not set");
          }
        }
        HttpConfig hc;
        hc.base_url = a.base_url;
        hc.model_name = a.model_name;
        hc.api_key_env = a.api_key_env;
        hc.timeout_ms = a.timeout_ms;
        hc.retry.max_attempts = a.max_attempts;
        hc.retry.backoff_base_ms = a.backoff_ms;
        hc.max_in_flight = a.max_in_flight;
        handles.push_back(make_http_agent(a.id, hc));
        break;
      }
    }
  }
  return handles;
}

RewardProvider build_reward_provider(const RunConfig& config) {
  if (config.reward.kind == RewardKind::oracle) {
    return OracleReward{};
  }
  HttpReward hr;
  hr.endpoint = config.reward.endpoint;
  hr.timeout_ms = config.reward.timeout_ms;
  hr.retry.max_attempts = config.reward.max_attempts;
  hr.retry.backoff_base_ms = config.reward.backoff_ms;
  return hr;
}

RolloutConfig build_rollout_config(const RunConfig& config) {
  RolloutConfig rc;
  rc.n = config.rollout.n;
  rc.temperature = config.rollout.temperature;
  rc.max_tokens = config.rollout.max_tokens;
  rc.mode.source = config.mode.source;
  rc.mode.p = config.mode.p;
  rc.parallelism = config.rollout.parallelism;
  rc.seed = config.rollout.seed;
  rc.n_min = config.rollout.n_min;
  return rc;
}

}  // namespace ilr
