#include "rollout.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "errors.hpp"
#include "eval.hpp"
#include "json.hpp"
#include "util.hpp"

namespace ilr {

static std::vector<double> score_via_http(const std::vector<ScoreItem>& items,
                                          const HttpReward& cfg) {
  SplitUrl url = split_url(cfg.endpoint);
  nlohmann::json body;
  body["items"] = nlohmann::json::array();
  for (const auto& item : items) {
    body["items"].push_back(
        {{"prompt", item.prompt}, {"response", item.response}});
  }
  const std::string payload = body.dump();

  httplib::Client client(url.origin);
  client.set_connection_timeout(cfg.timeout_ms / 1000,
                                (cfg.timeout_ms % 1000) * 1000);
  client.set_read_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);
  client.set_write_timeout(cfg.timeout_ms / 1000,
                           (cfg.timeout_ms % 1000) * 1000);
  const std::string path = url.path.empty() ? "/" : url.path;

  const int attempts = std::max(cfg.retry.max_attempts, 1);
  std::string last_failure = "no attempt made";
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0 && cfg.retry.backoff_base_ms > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(
          cfg.retry.backoff_base_ms * (1 << std::min(attempt - 1, 16))));
    }
    auto res = client.Post(path, payload, "application/json");
    if (!res) {
      last_failure = "connection error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 200 && res->status < 300) {
      nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
      if (reply.is_discarded() || !reply.contains("scores") ||
          !reply["scores"].is_array()) {
        raise(ErrorCode::parse,
              "reward endpoint returned a malformed body (expected "
              "{\"scores\": [...]})");
      }
      if (reply["scores"].size() != items.size()) {
        raise(ErrorCode::schema,
              "reward endpoint returned " +
                  std::to_string(reply["scores"].size()) + " scores for " +
                  std::to_string(items.size()) + " items");
      }
      std::vector<double> scores;
      scores.reserve(items.size());
      for (const auto& s : reply["scores"]) {
        if (!s.is_number()) {
          raise(ErrorCode::parse, "reward endpoint returned a non-numeric score");
        }
        scores.push_back(s.get<double>());
      }
      return scores;
    }
    if (res->status == 429 || res->status >= 500) {
      last_failure = "status " + std::to_string(res->status);
      continue;
    }
    raise(ErrorCode::transport,
          "reward endpoint POST " + cfg.endpoint + " failed with status " +
              std::to_string(res->status) + " (not retryable)");
  }
  raise(ErrorCode::transport,
        "reward endpoint POST " + cfg.endpoint + " failed after " +
            std::to_string(attempts) + " attempts; last failure: " +
            last_failure);
}

std::vector<double> score_rewards(const std::vector<ScoreItem>& items,
                                  const RewardProvider& provider) {
  if (items.empty()) return {};
  if (const auto* oracle = std::get_if<OracleReward>(&provider)) {
    AnswerChecker checker = oracle->checker ? oracle->checker : default_checker();
    std::vector<double> scores;
    scores.reserve(items.size());
    for (const auto& item : items) {
      scores.push_back(checker(item.response, item.gold) ? 1.0 : 0.0);
    }
    return scores;
  }
  return score_via_http(items, std::get<HttpReward>(provider));
}

RolloutResult run_rollout(const std::vector<QuestionRecord>& dataset,
                          const std::vector<AgentHandle>& agents,
                          const std::vector<AbilityProfile>& profiles,
                          const RolloutConfig& config,
                          const RewardProvider& provider,
                          const PromptLibrary& prompts) {
  if (agents.size() < 2) {
    raise(ErrorCode::invalid_argument,
          "run_rollout: need at least two agents, got " +
              std::to_string(agents.size()));
  }
  if (dataset.empty()) {
    raise(ErrorCode::invalid_argument, "run_rollout: empty dataset");
  }
  if (config.n < 1) {
    raise(ErrorCode::invalid_argument, "run_rollout: n must be >= 1");
  }
  if (config.n_min < 1 || config.n_min > config.n) {
    raise(ErrorCode::invalid_argument,
          "run_rollout: n_min must lie in [1, n]");
  }
  for (const auto& q : dataset) {
    if (!q.difficulty) {
      raise(ErrorCode::invalid_argument,
            "run_rollout: question '" + q.id +
                "' lacks a difficulty annotation; run the difficulty pass "
                "first");
    }
  }

  // Mode decisions up front, in dataset order.
  std::vector<ModeDecision> decisions(dataset.size());
  if (config.mode.source == ModeSource::irt) {
    if (profiles.empty()) {
      raise(ErrorCode::invalid_argument,
            "run_rollout: irt mode source needs ability profiles");
    }
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      decisions[i] = select_mode(profiles, dataset[i].id, *dataset[i].difficulty);
    }
  } else {
    std::map<std::string, double> difficulties;
    for (const auto& q : dataset) difficulties[q.id] = *q.difficulty;
    auto by_qid = select_modes_by_ratio(difficulties, config.mode.p);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      decisions[i] = by_qid.at(dataset[i].id);
    }
  }

  const std::size_t m = agents.size();
  SamplingParams params;
  params.temperature = config.temperature;
  params.max_tokens = config.max_tokens;
  params.seed = config.seed;
  const AnswerChecker selection_checker = default_checker();

  struct QuestionResult {
    std::vector<TrainingRecord> records;
    std::vector<DroppedSample> dropped_samples;
    std::vector<DroppedQuestion> dropped_questions;
  };
  std::vector<QuestionResult> results(dataset.size());

  parallel_for(dataset.size(), config.parallelism, [&](std::size_t qi) {
    const QuestionRecord& q = dataset[qi];
    QuestionResult& out = results[qi];
    const InteractionMode mode = decisions[qi].mode;

    std::vector<Idea3Transcript> transcripts;
    std::vector<int> surviving;
    for (int k = 0; k < config.n; ++k) {
      try {
        transcripts.push_back(
            run_idea3(agents, q, mode, params, prompts, /*base_sample_index=*/k));
        surviving.push_back(k);
      } catch (const Error& e) {
        out.dropped_samples.push_back({q.id, k, e.what()});
      }
    }
    if (static_cast<int>(surviving.size()) < config.n_min) {
      out.dropped_samples.clear();  // subsumed by the question-level drop
      out.dropped_questions.push_back(
          {q.id, "only " + std::to_string(surviving.size()) + " of " +
                     std::to_string(config.n) +
                     " samples survived (n_min=" +
                     std::to_string(config.n_min) + ")"});
      return;
    }

    // Label-based selection per agent per surviving sample.
    for (std::size_t t = 0; t < transcripts.size(); ++t) {
      for (std::size_t a = 0; a < m; ++a) {
        AgentTrace& trace = transcripts[t].agents[a];
        auto [selected, reason] = select_training_answer(
            trace.sharing.text, trace.fusion.text, q.gold_answer,
            selection_checker);
        trace.selected_answer = selected;
        trace.selection_reason = reason;
      }
    }

    // Score everything in one pass: agent-major, then sample order.
    std::vector<ScoreItem> items;
    items.reserve(m * transcripts.size());
    for (std::size_t a = 0; a < m; ++a) {
      for (const auto& transcript : transcripts) {
        items.push_back(
            {q.text, transcript.agents[a].selected_answer, q.gold_answer});
      }
    }
    std::vector<double> scores;
    try {
      scores = score_rewards(items, provider);
    } catch (const Error& e) {
      out.dropped_questions.push_back(
          {q.id, std::string("reward scoring failed: ") + e.what()});
      return;
    }

    std::vector<RewardGroup> groups;
    groups.reserve(m);
    for (std::size_t a = 0; a < m; ++a) {
      std::vector<double> rewards(
          scores.begin() + static_cast<std::ptrdiff_t>(a * transcripts.size()),
          scores.begin() +
              static_cast<std::ptrdiff_t>((a + 1) * transcripts.size()));
      groups.push_back(make_reward_group(agents[a].id, q.id, std::move(rewards)));
    }
    const auto calibrated = calibrate_groups(groups);

    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t t = 0; t < transcripts.size(); ++t) {
        const AgentTrace& trace = transcripts[t].agents[a];
        TrainingRecord rec;
        rec.agent_id = agents[a].id;
        rec.question_id = q.id;
        rec.sample_index = surviving[t];
        rec.mode = mode;
        rec.prompt = trace.fusion.messages;
        rec.response = trace.selected_answer;
        rec.reward_raw = groups[a].rewards[t];
        rec.reward_cal = calibrated[a].calibrated[t];
        rec.advantage = calibrated[a].advantages[t];
        rec.reason = *trace.selection_reason;
        out.records.push_back(std::move(rec));
      }
    }
  });

  RolloutResult result;
  result.decisions = std::move(decisions);
  for (auto& qr : results) {
    result.records.insert(result.records.end(),
                          std::make_move_iterator(qr.records.begin()),
                          std::make_move_iterator(qr.records.end()));
    result.dropped_samples.insert(
        result.dropped_samples.end(),
        std::make_move_iterator(qr.dropped_samples.begin()),
        std::make_move_iterator(qr.dropped_samples.end()));
    result.dropped_questions.insert(
        result.dropped_questions.end(),
        std::make_move_iterator(qr.dropped_questions.begin()),
        std::make_move_iterator(qr.dropped_questions.end()));
  }
  return result;
}

static nlohmann::ordered_json record_to_json(const TrainingRecord& rec) {
  nlohmann::ordered_json j;
  j["agent"] = rec.agent_id;
  j["qid"] = rec.question_id;
  j["k"] = rec.sample_index;
  j["mode"] = interaction_mode_name(rec.mode);
  j["prompt"] = nlohmann::ordered_json::array();
  for (const auto& msg : rec.prompt) {
    j["prompt"].push_back(
        {{"role", role_name(msg.role)}, {"content", msg.content}});
  }
  j["response"] = rec.response;
  j["reward_raw"] = rec.reward_raw;
  j["reward_cal"] = rec.reward_cal;
  j["advantage"] = rec.advantage;
  j["reason"] = selection_reason_name(rec.reason);
  return j;
}

void write_training_records(const std::vector<TrainingRecord>& records,
                            const std::string& path) {
  std::ostringstream out;
  for (const auto& rec : records) out << record_to_json(rec).dump() << '\n';
  write_text_file_atomic(path, out.str());
}

void export_training_records(const std::vector<TrainingRecord>& records,
                             const ExportManifest& manifest,
                             const std::string& path) {
  std::set<std::tuple<std::string, std::string, int>> keys;
  for (const auto& rec : records) {
    if (!keys.insert({rec.agent_id, rec.question_id, rec.sample_index}).second) {
      raise(ErrorCode::invalid_argument,
            "export_training_records: duplicate (agent, question, sample) = (" +
                rec.agent_id + ", " + rec.question_id + ", " +
                std::to_string(rec.sample_index) + ")");
    }
  }
  write_training_records(records, path);

  nlohmann::ordered_json mj;
  mj["config_hash"] = manifest.config_hash;
  mj["seed"] = manifest.seed;
  mj["n_questions"] = manifest.n_questions;
  mj["n_records"] = manifest.n_records;
  mj["dropped"] = {{"samples", manifest.dropped_samples},
                   {"questions", manifest.dropped_questions}};
  write_text_file_atomic(path + ".manifest.json", mj.dump(2) + "\n");
}

std::vector<TrainingRecord> read_training_records(const std::string& path) {
  auto lines = read_json_lines(path);
  std::vector<TrainingRecord> records;
  records.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& j = lines[i];
    const std::string where = path + ":" + std::to_string(i + 1);
    if (!j.is_object() || !j.contains("agent") || !j["agent"].is_string() ||
        !j.contains("qid") || !j["qid"].is_string() || !j.contains("k") ||
        !j["k"].is_number_integer() || !j.contains("mode") ||
        !j["mode"].is_string() || !j.contains("prompt") ||
        !j["prompt"].is_array() || !j.contains("response") ||
        !j["response"].is_string() || !j.contains("reward_raw") ||
        !j["reward_raw"].is_number() || !j.contains("reward_cal") ||
        !j["reward_cal"].is_number() || !j.contains("advantage") ||
        !j["advantage"].is_number() || !j.contains("reason") ||
        !j["reason"].is_string()) {
      raise(ErrorCode::schema, where + ": malformed training record");
    }
    TrainingRecord rec;
    rec.agent_id = j["agent"].get<std::string>();
    rec.question_id = j["qid"].get<std::string>();
    rec.sample_index = j["k"].get<int>();
    rec.mode = parse_interaction_mode(j["mode"].get<std::string>());
    for (const auto& msg : j["prompt"]) {
      if (!msg.is_object() || !msg.contains("role") || !msg["role"].is_string() ||
          !msg.contains("content") || !msg["content"].is_string()) {
        raise(ErrorCode::schema, where + ": malformed prompt message");
      }
      rec.prompt.push_back({parse_role(msg["role"].get<std::string>()),
                            msg["content"].get<std::string>()});
    }
    rec.response = j["response"].get<std::string>();
    rec.reward_raw = j["reward_raw"].get<double>();
    rec.reward_cal = j["reward_cal"].get<double>();
    rec.advantage = j["advantage"].get<double>();
    rec.reason = parse_selection_reason(j["reason"].get<std::string>());
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<TrainingRecord> recalibrate_records(
    std::vector<TrainingRecord> records) {
  if (records.empty()) {
    raise(ErrorCode::schema, "recalibrate: no training records in input");
  }
  // qid -> agent -> [(record index, k)]; encounter order per agent.
  std::map<std::string, std::map<std::string, std::vector<std::size_t>>> index;
  for (std::size_t i = 0; i < records.size(); ++i) {
    index[records[i].question_id][records[i].agent_id].push_back(i);
  }
  for (auto& [qid, agents] : index) {
    if (agents.size() < 2) {
      raise(ErrorCode::schema,
            "recalibrate: question '" + qid + "' has records for only " +
                std::to_string(agents.size()) + " agent(s); need >= 2");
    }
    // Sort each agent's records by k; all agents must share the same k set.
    std::vector<int> reference_ks;
    for (auto& [agent, indices] : agents) {
      std::sort(indices.begin(), indices.end(), [&](std::size_t a, std::size_t b) {
        return records[a].sample_index < records[b].sample_index;
      });
      std::vector<int> ks;
      ks.reserve(indices.size());
      for (std::size_t i : indices) ks.push_back(records[i].sample_index);
      for (std::size_t i = 1; i < ks.size(); ++i) {
        if (ks[i] == ks[i - 1]) {
          raise(ErrorCode::schema,
                "recalibrate: duplicate sample index " + std::to_string(ks[i]) +
                    " for (" + agent + ", " + qid + ")");
        }
      }
      if (reference_ks.empty()) {
        reference_ks = ks;
      } else if (ks != reference_ks) {
        raise(ErrorCode::schema,
              "recalibrate: sample indices for question '" + qid +
                  "' are not aligned across agents");
      }
    }
    std::vector<RewardGroup> groups;
    groups.reserve(agents.size());
    for (const auto& [agent, indices] : agents) {
      std::vector<double> rewards;
      rewards.reserve(indices.size());
      for (std::size_t i : indices) rewards.push_back(records[i].reward_raw);
      groups.push_back(make_reward_group(agent, qid, std::move(rewards)));
    }
    const auto calibrated = calibrate_groups(groups);
    std::size_t gi = 0;
    for (const auto& [agent, indices] : agents) {
      for (std::size_t t = 0; t < indices.size(); ++t) {
        records[indices[t]].reward_cal = calibrated[gi].calibrated[t];
        records[indices[t]].advantage = calibrated[gi].advantages[t];
      }
      ++gi;
    }
  }
  return records;
}

}  // namespace ilr
