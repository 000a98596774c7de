#pragma once

#include <optional>
#include <string>
#include <vector>

#include "agents.hpp"
#include "checker.hpp"
#include "dataset.hpp"
#include "irt.hpp"
#include "prompts.hpp"

namespace ilr {

// Content of the LAST boxed{...} in the text, scanned with balanced braces so
// nested answers like \frac{48}{35} survive. Absence is a value, not an error.
std::optional<std::string> extract_boxed(const std::string& text);

// String-level canonicalization (trim, outer $ stripping, \left/\right
// removal, \dfrac -> \frac, whitespace collapse) followed by exact equality.
bool check_correct(const std::optional<std::string>& predicted,
                   const std::string& gold);

std::string canonical_answer(const std::string& answer);

// extract_boxed + check_correct packaged behind the pluggable boundary.
AnswerChecker default_checker();

enum class EvalParadigm { single, debate, idea3_summarize };

const char* eval_paradigm_name(EvalParadigm paradigm) noexcept;
EvalParadigm parse_eval_paradigm(const std::string& name);

struct EvalOutcome {
  std::string question_id;
  std::string agent_id;
  std::string predicted;  // extracted boxed answer, "" when absent or failed
  bool correct = false;
  bool failed = false;  // the completion itself errored
};

struct EvalReport {
  std::string benchmark;
  EvalParadigm paradigm = EvalParadigm::single;
  std::vector<std::pair<std::string, double>> per_agent_accuracy;  // agent order
  std::vector<EvalOutcome> outcomes;  // question-major, then agent order
};

struct EvalOptions {
  SamplingParams sampling;  // evaluation decoding: temperature 0
  std::size_t parallelism = 4;
  // Required for idea3_summarize (mode selection); ignored otherwise.
  std::vector<AbilityProfile> profiles;
};

// single: one sharing-prompt completion per (agent, question).
// debate: two-round debate, final answers judged.
// idea3_summarize: IRT-mode Idea3 then each agent summarizes its own
// initial + updated answers; no gold labels are used to pick answers.
// A failed question flags every outcome it covers and counts as incorrect.
EvalReport evaluate(const std::vector<AgentHandle>& agents,
                    const std::vector<QuestionRecord>& benchmark,
                    const std::string& benchmark_name, EvalParadigm paradigm,
                    const PromptLibrary& prompts, const EvalOptions& options);

// {"benchmark", "paradigm", "per_agent": {...}, "outcomes": [...]}.
void write_eval_report(const EvalReport& report, const std::string& path);

}  // namespace ilr
