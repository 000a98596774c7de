#include "difficulty.hpp"

#include <algorithm>
#include <regex>
#include <set>
#include <sstream>

#include "errors.hpp"
#include "json.hpp"
#include "util.hpp"

namespace ilr {

const char* rank_parse_failure_name(RankParseFailure failure) noexcept {
  switch (failure) {
    case RankParseFailure::none: return "none";
    case RankParseFailure::no_pattern: return "no_pattern";
    case RankParseFailure::duplicate_index: return "duplicate_index";
    case RankParseFailure::out_of_range: return "out_of_range";
    case RankParseFailure::wrong_count: return "wrong_count";
  }
  return "unknown";
}

std::string build_ranking_prompt(const std::vector<QuestionRecord>& batch,
                                 int variant_id, const PromptLibrary& prompts) {
  if (batch.size() < 2) {
    raise(ErrorCode::invalid_argument,
          "build_ranking_prompt: need at least two questions, got " +
              std::to_string(batch.size()));
  }
  const char* tmpl_name = nullptr;
  switch (variant_id) {
    case 1: tmpl_name = prompt_names::ranking_1; break;
    case 2: tmpl_name = prompt_names::ranking_2; break;
    case 3: tmpl_name = prompt_names::ranking_3; break;
    default:
      raise(ErrorCode::invalid_argument,
            "build_ranking_prompt: variant must be 1, 2, or 3, got " +
                std::to_string(variant_id));
  }
  std::ostringstream questions;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (i) questions << '\n';
    questions << 'Q' << (i + 1) << ": " << batch[i].text;
  }
  std::map<std::string, std::string> slots{{"questions", questions.str()}};
  if (variant_id == 3) {
    slots["last_question_label"] = "Q" + std::to_string(batch.size());
  }
  return render(prompts.get(tmpl_name), slots) + "\n\n" +
         render(prompts.get(prompt_names::ranking_format), {});
}

ParsedRanking parse_ranking(const std::string& response, int batch_len) {
  if (batch_len < 2) {
    raise(ErrorCode::invalid_argument,
          "parse_ranking: batch_len must be >= 2");
  }
  static const std::regex pattern(
      R"(ranking\s*:\s*\[\s*q\s*\d+\s*(?:,\s*q\s*\d+\s*)*\])",
      std::regex::icase);
  auto begin = std::sregex_iterator(response.begin(), response.end(), pattern);
  auto end = std::sregex_iterator();
  ParsedRanking result;
  if (begin == end) {
    result.failure = RankParseFailure::no_pattern;
    return result;
  }
  std::smatch last;
  for (auto it = begin; it != end; ++it) last = *it;  // last occurrence wins

  const std::string matched = last.str();
  static const std::regex number(R"([0-9]+)");
  std::vector<int> indices;
  for (auto it = std::sregex_iterator(matched.begin(), matched.end(), number);
       it != std::sregex_iterator(); ++it) {
    indices.push_back(std::stoi(it->str()));
  }
  for (int idx : indices) {
    if (idx < 1 || idx > batch_len) {
      result.failure = RankParseFailure::out_of_range;
      return result;
    }
  }
  std::set<int> seen(indices.begin(), indices.end());
  if (seen.size() != indices.size()) {
    result.failure = RankParseFailure::duplicate_index;
    return result;
  }
  if (indices.size() != static_cast<std::size_t>(batch_len)) {
    result.failure = RankParseFailure::wrong_count;
    return result;
  }
  result.indices = std::move(indices);
  return result;
}

std::map<int, double> normalize_ranks(const std::vector<int>& perm,
                                      int batch_len) {
  if (perm.size() != static_cast<std::size_t>(batch_len)) {
    raise(ErrorCode::invalid_argument,
          "normalize_ranks: permutation length mismatch");
  }
  std::set<int> seen;
  for (int idx : perm) {
    if (idx < 1 || idx > batch_len || !seen.insert(idx).second) {
      raise(ErrorCode::invalid_argument,
            "normalize_ranks: input is not a permutation of 1.." +
                std::to_string(batch_len));
    }
  }
  std::map<int, double> scores;
  for (std::size_t pos = 0; pos < perm.size(); ++pos) {
    scores[perm[pos]] = static_cast<double>(pos + 1) /
                        static_cast<double>(batch_len);
  }
  return scores;
}

std::map<std::string, DifficultyEstimate> aggregate_difficulty(
    const std::vector<RankObservation>& observations,
    const std::vector<std::string>& models) {
  if (models.empty()) {
    raise(ErrorCode::invalid_argument, "aggregate_difficulty: no models");
  }
  // question -> model -> (sum of normalized scores, count)
  std::map<std::string, std::map<std::string, std::pair<double, std::size_t>>>
      sums;
  std::map<std::string, std::size_t> totals;
  for (const auto& obs : observations) {
    if (obs.rank < 1 || obs.rank > obs.batch_len) {
      raise(ErrorCode::invalid_argument,
            "aggregate_difficulty: rank " + std::to_string(obs.rank) +
                " outside batch of " + std::to_string(obs.batch_len));
    }
    const double score = static_cast<double>(obs.rank) /
                         static_cast<double>(obs.batch_len);
    auto& cell = sums[obs.question_id][obs.model_id];
    cell.first += score;
    cell.second += 1;
    totals[obs.question_id] += 1;
  }
  std::vector<std::string> missing;
  for (const auto& [qid, per_model] : sums) {
    for (const auto& model : models) {
      auto it = per_model.find(model);
      if (it == per_model.end() || it->second.second == 0) {
        missing.push_back("(" + qid + ", " + model + ")");
      }
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size(); ++i) {
      if (i) list += ", ";
      list += missing[i];
    }
    raise(ErrorCode::coverage,
          "no ranking observations for " + std::to_string(missing.size()) +
              " (question, model) pairs: " + list);
  }
  std::map<std::string, DifficultyEstimate> out;
  for (const auto& [qid, per_model] : sums) {
    DifficultyEstimate est;
    est.question_id = qid;
    double model_sum = 0.0;
    for (const auto& model : models) {
      const auto& cell = per_model.at(model);
      const double mean = cell.first / static_cast<double>(cell.second);
      est.per_model_scores[model] = mean;
      model_sum += mean;
    }
    est.d_q = model_sum / static_cast<double>(models.size());
    est.observation_count = totals.at(qid);
    out[qid] = std::move(est);
  }
  return out;
}

std::uint64_t split_seed(std::uint64_t root_seed, int split_index) {
  return mix_seed(mix_seed(root_seed, "difficulty-split"),
                  static_cast<std::uint64_t>(split_index));
}

DifficultyRun estimate_difficulty(const std::vector<QuestionRecord>& dataset,
                                  const std::vector<AgentHandle>& agents,
                                  const DifficultyOptions& options,
                                  const PromptLibrary& prompts) {
  if (dataset.empty()) {
    raise(ErrorCode::invalid_argument, "estimate_difficulty: empty dataset");
  }
  if (agents.empty()) {
    raise(ErrorCode::invalid_argument, "estimate_difficulty: no agents");
  }
  if (options.splits < 1) {
    raise(ErrorCode::invalid_argument,
          "estimate_difficulty: splits must be >= 1");
  }
  if (options.variants.empty()) {
    raise(ErrorCode::invalid_argument,
          "estimate_difficulty: no prompt variants selected");
  }
  for (int v : options.variants) {
    if (v < 1 || v > 3) {
      raise(ErrorCode::invalid_argument,
            "estimate_difficulty: variant ids must be 1..3, got " +
                std::to_string(v));
    }
  }

  struct Task {
    int split_index;
    int variant_id;
    std::size_t batch_index;
    std::size_t agent_index;
    const std::vector<QuestionRecord>* batch;
  };

  // One partition per split, shared by all variants and agents.
  std::vector<std::vector<std::vector<QuestionRecord>>> partitions;
  partitions.reserve(static_cast<std::size_t>(options.splits));
  for (int j = 1; j <= options.splits; ++j) {
    partitions.push_back(partition_batches(dataset, options.batch_size,
                                           split_seed(options.seed, j)));
  }

  std::vector<Task> tasks;
  for (int j = 1; j <= options.splits; ++j) {
    const auto& batches = partitions[static_cast<std::size_t>(j - 1)];
    for (int v : options.variants) {
      for (std::size_t b = 0; b < batches.size(); ++b) {
        for (std::size_t a = 0; a < agents.size(); ++a) {
          tasks.push_back({j, v, b, a, &batches[b]});
        }
      }
    }
  }

  struct TaskResult {
    std::vector<RankObservation> observations;
    std::vector<DroppedQuery> dropped;
  };
  std::vector<TaskResult> results(tasks.size());

  parallel_for(tasks.size(), options.parallelism, [&](std::size_t t) {
    const Task& task = tasks[t];
    const auto& batch = *task.batch;
    const AgentHandle& agent = agents[task.agent_index];
    const std::string prompt =
        build_ranking_prompt(batch, task.variant_id, prompts);
    const std::vector<ChatMessage> messages{{Role::user, prompt}};

    CompletionContext ctx;
    ctx.ranking_batch_len = static_cast<int>(batch.size());

    ParsedRanking parsed;
    bool succeeded = false;
    std::string failure_reason;
    const int attempts = 1 + std::max(options.retry_limit, 0);
    for (int attempt = 0; attempt < attempts; ++attempt) {
      ctx.sample_index = attempt;
      std::string response;
      try {
        response = complete(agent, messages, options.sampling, ctx);
      } catch (const Error& e) {
        // Transport-class failures are already retried inside the agent;
        // here they just drop the query.
        failure_reason = std::string(error_code_name(e.code())) + ": " +
                         e.what();
        break;
      }
      parsed = parse_ranking(response, static_cast<int>(batch.size()));
      if (parsed.ok()) {
        succeeded = true;
        break;
      }
      failure_reason = std::string("unparseable ranking (") +
                       rank_parse_failure_name(parsed.failure) + ") after " +
                       std::to_string(attempt + 1) + " attempt(s)";
    }

    if (!succeeded) {
      results[t].dropped.push_back({task.split_index, task.variant_id,
                                    task.batch_index, agent.id,
                                    failure_reason});
      return;
    }
    // Observations store raw (rank, batch_len); aggregation applies the
    // rank/batch_len normalization.
    for (std::size_t pos = 0; pos < parsed.indices.size(); ++pos) {
      RankObservation obs;
      obs.question_id =
          batch[static_cast<std::size_t>(parsed.indices[pos] - 1)].id;
      obs.model_id = agent.id;
      obs.split_index = task.split_index;
      obs.variant_id = task.variant_id;
      obs.rank = static_cast<int>(pos + 1);
      obs.batch_len = static_cast<int>(batch.size());
      results[t].observations.push_back(std::move(obs));
    }
  });

  DifficultyRun run;
  for (auto& result : results) {
    run.observations.insert(run.observations.end(),
                            std::make_move_iterator(result.observations.begin()),
                            std::make_move_iterator(result.observations.end()));
    run.dropped.insert(run.dropped.end(),
                       std::make_move_iterator(result.dropped.begin()),
                       std::make_move_iterator(result.dropped.end()));
  }
  std::vector<std::string> models;
  models.reserve(agents.size());
  for (const auto& agent : agents) models.push_back(agent.id);
  run.estimates = aggregate_difficulty(run.observations, models);
  if (run.estimates.size() != dataset.size()) {
    // Every question appears in every split's partition, so a shortfall here
    // means some question never survived parsing for any agent.
    std::string list;
    for (const auto& q : dataset) {
      if (!run.estimates.count(q.id)) {
        if (!list.empty()) list += ", ";
        list += q.id;
      }
    }
    raise(ErrorCode::coverage,
          "questions with no surviving ranking observations: " + list);
  }
  return run;
}

void write_observations(const std::vector<RankObservation>& observations,
                        const std::string& path) {
  std::ostringstream out;
  for (const auto& obs : observations) {
    nlohmann::ordered_json j;
    j["qid"] = obs.question_id;
    j["model"] = obs.model_id;
    j["split"] = obs.split_index;
    j["variant"] = obs.variant_id;
    j["rank"] = obs.rank;
    j["batch_len"] = obs.batch_len;
    out << j.dump() << '\n';
  }
  write_text_file_atomic(path, out.str());
}

std::vector<RankObservation> read_observations(const std::string& path) {
  auto lines = read_json_lines(path);
  std::vector<RankObservation> out;
  out.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& j = lines[i];
    const std::string where = path + ":" + std::to_string(i + 1);
    if (!j.is_object() || !j.contains("qid") || !j["qid"].is_string() ||
        !j.contains("model") || !j["model"].is_string() ||
        !j.contains("split") || !j["split"].is_number_integer() ||
        !j.contains("variant") || !j["variant"].is_number_integer() ||
        !j.contains("rank") || !j["rank"].is_number_integer() ||
        !j.contains("batch_len") || !j["batch_len"].is_number_integer()) {
      raise(ErrorCode::parse, where + ": malformed ranking observation");
    }
    RankObservation obs;
    obs.question_id = j["qid"].get<std::string>();
    obs.model_id = j["model"].get<std::string>();
    obs.split_index = j["split"].get<int>();
    obs.variant_id = j["variant"].get<int>();
    obs.rank = j["rank"].get<int>();
    obs.batch_len = j["batch_len"].get<int>();
    out.push_back(std::move(obs));
  }
  return out;
}

}  // namespace ilr
