#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "agents.hpp"
#include "checker.hpp"
#include "dataset.hpp"
#include "errors.hpp"
#include "prompts.hpp"

namespace ilr {

enum class InteractionMode { cooperation, competition };

const char* interaction_mode_name(InteractionMode mode) noexcept;
InteractionMode parse_interaction_mode(const std::string& name);

enum class Stage { sharing, analysis, fusion };

const char* stage_name(Stage stage) noexcept;

enum class SelectionReason { kept_initial, took_updated };

const char* selection_reason_name(SelectionReason reason) noexcept;
SelectionReason parse_selection_reason(const std::string& name);

// Raised when an agent fails mid-protocol, tagged with who and where.
class StageError : public Error {
 public:
  StageError(std::string agent_id, Stage stage, const Error& cause)
      : Error(ErrorCode::protocol,
              "agent '" + agent_id + "' failed in " + stage_name(stage) +
                  ": " + cause.what()),
        agent_id_(std::move(agent_id)),
        stage_(stage),
        cause_code_(cause.code()) {}

  const std::string& agent_id() const noexcept { return agent_id_; }
  Stage stage() const noexcept { return stage_; }
  ErrorCode cause_code() const noexcept { return cause_code_; }

 private:
  std::string agent_id_;
  Stage stage_;
  ErrorCode cause_code_;
};

struct StageOutput {
  std::string text;                   // the agent's completion
  std::vector<ChatMessage> messages;  // the request context it answered
  std::uint64_t seq = 0;              // global completion order
};

struct AgentTrace {
  std::string agent_id;
  StageOutput sharing;   // initial answer
  StageOutput analysis;
  StageOutput fusion;    // updated answer
  std::string selected_answer;  // training-time selection; empty until chosen
  std::optional<SelectionReason> selection_reason;
};

struct Idea3Transcript {
  std::string question_id;
  InteractionMode mode;
  std::vector<AgentTrace> agents;        // input agent order
  std::vector<std::uint64_t> stage_seq;  // agent-major per stage, stage-ordered
};

// Single-turn prompt of the question with the boxed-answer instruction.
std::vector<ChatMessage> sharing_messages(const QuestionRecord& question,
                                          const PromptLibrary& prompts);

std::string idea_sharing(const AgentHandle& agent,
                         const QuestionRecord& question,
                         const SamplingParams& params,
                         const PromptLibrary& prompts,
                         const CompletionContext& ctx);

// One peer: raw text. Several peers: concatenated under [agent-id] headers in
// agent-id order.
std::string format_peer_block(
    const std::vector<std::pair<std::string, std::string>>& peers);

std::string idea_analysis(
    const AgentHandle& agent,
    const std::vector<std::pair<std::string, std::string>>& peer_answers,
    InteractionMode mode, const SamplingParams& params,
    const PromptLibrary& prompts, const CompletionContext& ctx);

// conversation_so_far must already hold the agent's Sharing and Analysis
// exchanges ([user, assistant, user, assistant]); anything less is a
// protocol-order error.
std::string idea_fusion(const AgentHandle& agent,
                        const QuestionRecord& question,
                        const std::vector<ChatMessage>& conversation_so_far,
                        const SamplingParams& params,
                        const PromptLibrary& prompts,
                        const CompletionContext& ctx);

// Keep the initial answer only when it is correct and the update broke it;
// otherwise take the update.
std::pair<std::string, SelectionReason> select_training_answer(
    const std::string& initial, const std::string& updated,
    const std::string& gold, const AnswerChecker& checker);

// Full Sharing -> Analysis -> Fusion cycle with stage barriers. Any agent
// failure aborts the question with a StageError; no partial transcripts.
// base_sample_index distinguishes repeated rollouts of the same question.
Idea3Transcript run_idea3(const std::vector<AgentHandle>& agents,
                          const QuestionRecord& question, InteractionMode mode,
                          const SamplingParams& params,
                          const PromptLibrary& prompts,
                          int base_sample_index = 0);

// Two-round debate: independent answers, then one revision round where each
// agent sees its peers' first-round answers.
std::map<std::string, std::string> run_debate(
    const std::vector<AgentHandle>& agents, const QuestionRecord& question,
    const SamplingParams& params, const PromptLibrary& prompts,
    int base_sample_index = 0);

// Inference-time synthesis of an agent's own initial + updated answers.
std::string summarize_inference(const AgentHandle& agent,
                                const QuestionRecord& question,
                                const std::string& initial,
                                const std::string& updated,
                                const SamplingParams& params,
                                const PromptLibrary& prompts,
                                const CompletionContext& ctx);

// Transcript JSONL: {"qid", "mode", "agents": [...], "stage_seq": [...]}.
void write_transcripts(const std::vector<Idea3Transcript>& transcripts,
                       const std::string& path);

}  // namespace ilr
