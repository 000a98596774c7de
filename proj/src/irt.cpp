#include "irt.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#include "errors.hpp"
#include "json.hpp"
#include "util.hpp"

namespace ilr {

double solve_probability(double gamma, double d) {
  return 1.0 / (1.0 + std::exp(-1.7 * (gamma - d)));
}

const char* mode_source_name(ModeSource source) noexcept {
  return source == ModeSource::irt ? "irt" : "ratio";
}

AbilityProfile estimate_ability(const AgentHandle& agent,
                                const std::vector<QuestionRecord>& validation,
                                const AnswerChecker& checker,
                                const PromptLibrary& prompts,
                                const AbilityOptions& options) {
  if (validation.empty()) {
    raise(ErrorCode::invalid_argument,
          "estimate_ability: empty validation set");
  }
  std::atomic<std::size_t> correct{0};
  parallel_for(validation.size(), options.parallelism, [&](std::size_t i) {
    const QuestionRecord& q = validation[i];
    CompletionContext ctx;
    ctx.question_id = q.id;
    ctx.gold_answer = q.gold_answer;
    ctx.difficulty = q.difficulty;
    ctx.sample_index = 0;
    const std::string response =
        complete(agent, sharing_messages(q, prompts), options.sampling, ctx);
    if (checker(response, q.gold_answer)) correct.fetch_add(1);
  });
  AbilityProfile profile;
  profile.agent_id = agent.id;
  profile.gamma = static_cast<double>(correct.load()) /
                  static_cast<double>(validation.size());
  profile.measured_on = options.dataset_name;
  profile.sample_count = validation.size();
  return profile;
}

ModeDecision select_mode(const std::vector<AbilityProfile>& profiles,
                         const std::string& question_id, double d_q) {
  if (profiles.empty()) {
    raise(ErrorCode::invalid_argument, "select_mode: no ability profiles");
  }
  if (!(d_q > 0.0 && d_q <= 1.0)) {
    raise(ErrorCode::invalid_argument,
          "select_mode: difficulty must lie in (0, 1], got " +
              format_double(d_q) + " (question '" + question_id + "')");
  }
  ModeDecision decision;
  decision.question_id = question_id;
  decision.source = ModeSource::irt;
  double sum = 0.0;
  for (const auto& profile : profiles) {
    const double p = solve_probability(profile.gamma, d_q);
    decision.per_agent_p[profile.agent_id] = p;
    sum += p;
  }
  decision.p_q = sum / static_cast<double>(profiles.size());
  // Exactly 0.5 counts as "solvable enough": compete.
  decision.mode = *decision.p_q < 0.5 ? InteractionMode::cooperation
                                      : InteractionMode::competition;
  return decision;
}

std::map<std::string, ModeDecision> select_modes_by_ratio(
    const std::map<std::string, double>& difficulties, double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    raise(ErrorCode::invalid_argument,
          "select_modes_by_ratio: p must lie in [0, 1], got " +
              format_double(p));
  }
  std::vector<std::pair<std::string, double>> order(difficulties.begin(),
                                                    difficulties.end());
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;  // hardest first
    return a.first < b.first;
  });
  const double raw = p * static_cast<double>(order.size());
  // Snap near-integer products before the ceiling so 0.1 * 10 is 1, not 2.
  double snapped = std::round(raw);
  if (std::fabs(raw - snapped) > 1e-9) snapped = std::ceil(raw);
  const std::size_t n_coop = static_cast<std::size_t>(snapped);

  std::map<std::string, ModeDecision> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    ModeDecision d;
    d.question_id = order[i].first;
    d.source = ModeSource::ratio;
    d.mode = i < n_coop ? InteractionMode::cooperation
                        : InteractionMode::competition;
    out[d.question_id] = std::move(d);
  }
  return out;
}

void write_mode_decisions(const std::vector<ModeDecision>& decisions,
                          const std::string& path) {
  std::ostringstream out;
  for (const auto& d : decisions) {
    nlohmann::ordered_json j;
    j["qid"] = d.question_id;
    if (d.p_q) {
      j["p_q"] = *d.p_q;
    } else {
      j["p_q"] = nullptr;
    }
    j["mode"] = interaction_mode_name(d.mode);
    j["source"] = mode_source_name(d.source);
    out << j.dump() << '\n';
  }
  write_text_file_atomic(path, out.str());
}

void write_profiles(const std::vector<AbilityProfile>& profiles,
                    const std::string& path) {
  std::ostringstream out;
  for (const auto& p : profiles) {
    nlohmann::ordered_json j;
    j["agent"] = p.agent_id;
    j["gamma"] = p.gamma;
    j["measured_on"] = p.measured_on;
    j["sample_count"] = p.sample_count;
    out << j.dump() << '\n';
  }
  write_text_file_atomic(path, out.str());
}

std::vector<AbilityProfile> read_profiles(const std::string& path) {
  auto lines = read_json_lines(path);
  std::vector<AbilityProfile> profiles;
  profiles.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& j = lines[i];
    const std::string where = path + ":" + std::to_string(i + 1);
    if (!j.is_object() || !j.contains("agent") || !j["agent"].is_string() ||
        !j.contains("gamma") || !j["gamma"].is_number()) {
      raise(ErrorCode::parse,
            where + ": profile entries need string \"agent\" and numeric "
                    "\"gamma\"");
    }
    AbilityProfile p;
    p.agent_id = j["agent"].get<std::string>();
    p.gamma = j["gamma"].get<double>();
    if (!(p.gamma >= 0.0 && p.gamma <= 1.0)) {
      raise(ErrorCode::parse, where + ": gamma must lie in [0, 1]");
    }
    if (j.contains("measured_on") && j["measured_on"].is_string()) {
      p.measured_on = j["measured_on"].get<std::string>();
    }
    if (j.contains("sample_count") && j["sample_count"].is_number_unsigned()) {
      p.sample_count = j["sample_count"].get<std::size_t>();
    }
    profiles.push_back(std::move(p));
  }
  return profiles;
}

}  // namespace ilr
