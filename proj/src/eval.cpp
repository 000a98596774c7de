#include "eval.hpp"

#include <sstream>

#include "errors.hpp"
#include "interaction.hpp"
#include "json.hpp"
#include "util.hpp"

namespace ilr {

std::optional<std::string> extract_boxed(const std::string& text) {
  std::optional<std::string> found;
  std::size_t pos = 0;
  const std::string marker = "boxed{";
  while ((pos = text.find(marker, pos)) != std::string::npos) {
    std::size_t i = pos + marker.size();
    int depth = 1;
    std::string content;
    for (; i < text.size(); ++i) {
      const char c = text[i];
      if (c == '{') {
        ++depth;
      } else if (c == '}') {
        --depth;
        if (depth == 0) break;
      }
      content.push_back(c);
    }
    if (depth == 0) {
      found = content;  // last balanced occurrence wins
      pos = i + 1;
    } else {
      break;  // unbalanced tail; nothing further can close
    }
  }
  return found;
}

std::string canonical_answer(const std::string& answer) {
  std::string s = trim(answer);
  while (s.size() >= 2 && s.front() == '$' && s.back() == '$') {
    s = trim(s.substr(1, s.size() - 2));
  }
  replace_all(s, "\\left", "");
  replace_all(s, "\\right", "");
  replace_all(s, "\\dfrac", "\\frac");
  return collapse_whitespace(s);
}

bool check_correct(const std::optional<std::string>& predicted,
                   const std::string& gold) {
  if (gold.empty()) {
    raise(ErrorCode::invalid_argument, "check_correct: empty gold answer");
  }
  if (!predicted) return false;
  return canonical_answer(*predicted) == canonical_answer(gold);
}

AnswerChecker default_checker() {
  return [](const std::string& response, const std::string& gold) {
    return check_correct(extract_boxed(response), gold);
  };
}

const char* eval_paradigm_name(EvalParadigm paradigm) noexcept {
  switch (paradigm) {
    case EvalParadigm::single: return "single";
    case EvalParadigm::debate: return "debate";
    case EvalParadigm::idea3_summarize: return "idea3_summarize";
  }
  return "unknown";
}

EvalParadigm parse_eval_paradigm(const std::string& name) {
  if (name == "single") return EvalParadigm::single;
  if (name == "debate") return EvalParadigm::debate;
  if (name == "idea3_summarize") return EvalParadigm::idea3_summarize;
  raise(ErrorCode::invalid_argument,
        "unknown evaluation paradigm: '" + name + "' (expected single, "
        "debate, or idea3_summarize)");
}

EvalReport evaluate(const std::vector<AgentHandle>& agents,
                    const std::vector<QuestionRecord>& benchmark,
                    const std::string& benchmark_name, EvalParadigm paradigm,
                    const PromptLibrary& prompts, const EvalOptions& options) {
  if (agents.empty()) {
    raise(ErrorCode::invalid_argument, "evaluate: no agents");
  }
  if (benchmark.empty()) {
    raise(ErrorCode::invalid_argument, "evaluate: empty benchmark");
  }
  if (paradigm != EvalParadigm::single && agents.size() < 2) {
    raise(ErrorCode::invalid_argument,
          "evaluate: multi-agent paradigms need at least two agents");
  }
  if (paradigm == EvalParadigm::idea3_summarize) {
    if (options.profiles.empty()) {
      raise(ErrorCode::invalid_argument,
            "evaluate: idea3_summarize needs ability profiles for mode "
            "selection");
    }
    for (const auto& q : benchmark) {
      if (!q.difficulty) {
        raise(ErrorCode::invalid_argument,
              "evaluate: idea3_summarize needs difficulty annotations; "
              "question '" + q.id + "' has none");
      }
    }
  }

  const std::size_t m = agents.size();
  // One slot per (question, agent), filled by the per-question worker.
  std::vector<EvalOutcome> outcomes(benchmark.size() * m);

  parallel_for(benchmark.size(), options.parallelism, [&](std::size_t qi) {
    const QuestionRecord& q = benchmark[qi];
    EvalOutcome* slots = &outcomes[qi * m];
    for (std::size_t a = 0; a < m; ++a) {
      slots[a].question_id = q.id;
      slots[a].agent_id = agents[a].id;
    }
    try {
      std::vector<std::string> finals(m);
      if (paradigm == EvalParadigm::single) {
        for (std::size_t a = 0; a < m; ++a) {
          CompletionContext ctx;
          ctx.question_id = q.id;
          ctx.gold_answer = q.gold_answer;
          ctx.difficulty = q.difficulty;
          finals[a] = complete(agents[a], sharing_messages(q, prompts),
                               options.sampling, ctx);
        }
      } else if (paradigm == EvalParadigm::debate) {
        auto by_agent = run_debate(agents, q, options.sampling, prompts);
        for (std::size_t a = 0; a < m; ++a) finals[a] = by_agent.at(agents[a].id);
      } else {
        const ModeDecision decision =
            select_mode(options.profiles, q.id, *q.difficulty);
        Idea3Transcript transcript =
            run_idea3(agents, q, decision.mode, options.sampling, prompts);
        for (std::size_t a = 0; a < m; ++a) {
          CompletionContext ctx;
          ctx.question_id = q.id;
          ctx.gold_answer = q.gold_answer;
          ctx.difficulty = q.difficulty;
          finals[a] = summarize_inference(
              agents[a], q, transcript.agents[a].sharing.text,
              transcript.agents[a].fusion.text, options.sampling, prompts, ctx);
        }
      }
      for (std::size_t a = 0; a < m; ++a) {
        auto boxed = extract_boxed(finals[a]);
        slots[a].predicted = boxed.value_or("");
        slots[a].correct = check_correct(boxed, q.gold_answer);
      }
    } catch (const Error&) {
      // Failed questions count as incorrect for every agent and are flagged.
      for (std::size_t a = 0; a < m; ++a) {
        slots[a].predicted.clear();
        slots[a].correct = false;
        slots[a].failed = true;
      }
    }
  });

  EvalReport report;
  report.benchmark = benchmark_name;
  report.paradigm = paradigm;
  report.outcomes = std::move(outcomes);
  for (std::size_t a = 0; a < m; ++a) {
    std::size_t correct = 0;
    for (std::size_t qi = 0; qi < benchmark.size(); ++qi) {
      if (report.outcomes[qi * m + a].correct) ++correct;
    }
    report.per_agent_accuracy.emplace_back(
        agents[a].id,
        static_cast<double>(correct) / static_cast<double>(benchmark.size()));
  }
  return report;
}

void write_eval_report(const EvalReport& report, const std::string& path) {
  nlohmann::ordered_json j;
  j["benchmark"] = report.benchmark;
  j["paradigm"] = eval_paradigm_name(report.paradigm);
  j["per_agent"] = nlohmann::ordered_json::object();
  for (const auto& [agent, acc] : report.per_agent_accuracy) {
    j["per_agent"][agent] = acc;
  }
  j["outcomes"] = nlohmann::ordered_json::array();
  for (const auto& o : report.outcomes) {
    nlohmann::ordered_json jo;
    jo["qid"] = o.question_id;
    jo["agent"] = o.agent_id;
    jo["pred"] = o.predicted;
    jo["correct"] = o.correct;
    if (o.failed) jo["failed"] = true;
    j["outcomes"].push_back(std::move(jo));
  }
  write_text_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace ilr
