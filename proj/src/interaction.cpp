#include "interaction.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>

#include "json.hpp"
#include "util.hpp"

namespace ilr {

const char* interaction_mode_name(InteractionMode mode) noexcept {
  return mode == InteractionMode::cooperation ? "cooperation" : "competition";
}

InteractionMode parse_interaction_mode(const std::string& name) {
  if (name == "cooperation") return InteractionMode::cooperation;
  if (name == "competition") return InteractionMode::competition;
  raise(ErrorCode::invalid_argument, "unknown interaction mode: '" + name + "'");
}

const char* stage_name(Stage stage) noexcept {
  switch (stage) {
    case Stage::sharing: return "Sharing";
    case Stage::analysis: return "Analysis";
    case Stage::fusion: return "Fusion";
  }
  return "unknown";
}

const char* selection_reason_name(SelectionReason reason) noexcept {
  return reason == SelectionReason::kept_initial ? "kept_initial"
                                                 : "took_updated";
}

SelectionReason parse_selection_reason(const std::string& name) {
  if (name == "kept_initial") return SelectionReason::kept_initial;
  if (name == "took_updated") return SelectionReason::took_updated;
  raise(ErrorCode::invalid_argument, "unknown selection reason: '" + name + "'");
}

std::vector<ChatMessage> sharing_messages(const QuestionRecord& question,
                                          const PromptLibrary& prompts) {
  if (question.text.empty()) {
    raise(ErrorCode::invalid_argument,
          "idea sharing: empty question text (id '" + question.id + "')");
  }
  const std::string prompt = render(prompts.get(prompt_names::idea_sharing),
                                    {{"question", question.text}});
  return {{Role::user, prompt}};
}

std::string idea_sharing(const AgentHandle& agent,
                         const QuestionRecord& question,
                         const SamplingParams& params,
                         const PromptLibrary& prompts,
                         const CompletionContext& ctx) {
  return complete(agent, sharing_messages(question, prompts), params, ctx);
}

std::string format_peer_block(
    const std::vector<std::pair<std::string, std::string>>& peers) {
  if (peers.empty()) {
    raise(ErrorCode::invalid_argument, "no peer answers to format");
  }
  if (peers.size() == 1) return peers.front().second;
  auto sorted = peers;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::ostringstream out;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i) out << "\n\n";
    out << '[' << sorted[i].first << "]\n" << sorted[i].second;
  }
  return out.str();
}

static std::vector<ChatMessage> analysis_messages(
    const std::vector<std::pair<std::string, std::string>>& peer_answers,
    InteractionMode mode, const PromptLibrary& prompts) {
  const char* tmpl = mode == InteractionMode::cooperation
                         ? prompt_names::analysis_cooperation
                         : prompt_names::analysis_competition;
  const std::string prompt = render(
      prompts.get(tmpl), {{"peer_contributions", format_peer_block(peer_answers)}});
  return {{Role::user, prompt}};
}

std::string idea_analysis(
    const AgentHandle& agent,
    const std::vector<std::pair<std::string, std::string>>& peer_answers,
    InteractionMode mode, const SamplingParams& params,
    const PromptLibrary& prompts, const CompletionContext& ctx) {
  return complete(agent, analysis_messages(peer_answers, mode, prompts), params,
                  ctx);
}

std::string idea_fusion(const AgentHandle& agent,
                        const QuestionRecord& question,
                        const std::vector<ChatMessage>& conversation_so_far,
                        const SamplingParams& params,
                        const PromptLibrary& prompts,
                        const CompletionContext& ctx) {
  // Expect at least the Sharing and Analysis exchanges, each a user turn
  // answered by an assistant turn.
  const auto& conv = conversation_so_far;
  bool well_formed = conv.size() >= 4;
  if (well_formed) {
    const std::size_t n = conv.size();
    well_formed = conv[n - 4].role == Role::user &&
                  conv[n - 3].role == Role::assistant &&
                  conv[n - 2].role == Role::user &&
                  conv[n - 1].role == Role::assistant;
  }
  if (!well_formed) {
    raise(ErrorCode::protocol,
          "idea fusion requested before the Sharing and Analysis exchanges "
          "completed (question '" + question.id + "')");
  }
  std::vector<ChatMessage> messages = conv;
  messages.push_back({Role::user, render(prompts.get(prompt_names::idea_fusion),
                                         {{"question", question.text}})});
  return complete(agent, messages, params, ctx);
}

std::pair<std::string, SelectionReason> select_training_answer(
    const std::string& initial, const std::string& updated,
    const std::string& gold, const AnswerChecker& checker) {
  if (checker(initial, gold) && !checker(updated, gold)) {
    return {initial, SelectionReason::kept_initial};
  }
  return {updated, SelectionReason::took_updated};
}

Idea3Transcript run_idea3(const std::vector<AgentHandle>& agents,
                          const QuestionRecord& question, InteractionMode mode,
                          const SamplingParams& params,
                          const PromptLibrary& prompts,
                          int base_sample_index) {
  if (agents.size() < 2) {
    raise(ErrorCode::invalid_argument,
          "run_idea3: need at least two agents, got " +
              std::to_string(agents.size()));
  }
  const std::size_t m = agents.size();
  Idea3Transcript transcript;
  transcript.question_id = question.id;
  transcript.mode = mode;
  transcript.agents.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    transcript.agents[i].agent_id = agents[i].id;
  }

  std::atomic<std::uint64_t> seq{0};
  CompletionContext base_ctx;
  base_ctx.question_id = question.id;
  base_ctx.gold_answer = question.gold_answer;
  base_ctx.difficulty = question.difficulty;
  base_ctx.sample_index = base_sample_index;

  auto run_stage = [&](Stage stage, const std::function<std::vector<ChatMessage>(
                                        std::size_t)>& build) {
    parallel_for(m, m, [&](std::size_t i) {
      try {
        auto messages = build(i);
        std::string text = complete(agents[i], messages, params, base_ctx);
        StageOutput out;
        out.text = std::move(text);
        out.messages = std::move(messages);
        out.seq = seq.fetch_add(1);
        switch (stage) {
          case Stage::sharing: transcript.agents[i].sharing = std::move(out); break;
          case Stage::analysis: transcript.agents[i].analysis = std::move(out); break;
          case Stage::fusion: transcript.agents[i].fusion = std::move(out); break;
        }
      } catch (const StageError&) {
        throw;
      } catch (const Error& e) {
        throw StageError(agents[i].id, stage, e);
      }
    });
  };

  // Stage 1: everyone proposes independently.
  run_stage(Stage::sharing,
            [&](std::size_t) { return sharing_messages(question, prompts); });

  // Stage 2: everyone sees all peers' initial answers (barrier above
  // guarantees they exist).
  run_stage(Stage::analysis, [&](std::size_t i) {
    std::vector<std::pair<std::string, std::string>> peers;
    for (std::size_t l = 0; l < m; ++l) {
      if (l != i) peers.emplace_back(agents[l].id, transcript.agents[l].sharing.text);
    }
    return analysis_messages(peers, mode, prompts);
  });

  // Stage 3: fusion over each agent's own conversation history.
  run_stage(Stage::fusion, [&](std::size_t i) {
    const auto& trace = transcript.agents[i];
    std::vector<ChatMessage> conv = trace.sharing.messages;
    conv.push_back({Role::assistant, trace.sharing.text});
    conv.insert(conv.end(), trace.analysis.messages.begin(),
                trace.analysis.messages.end());
    conv.push_back({Role::assistant, trace.analysis.text});
    conv.push_back({Role::user, render(prompts.get(prompt_names::idea_fusion),
                                       {{"question", question.text}})});
    return conv;
  });
  // The Fusion build above appends the fusion instruction itself, so route it
  // straight through complete() rather than idea_fusion(); the shape matches.

  transcript.stage_seq.reserve(3 * m);
  for (std::size_t i = 0; i < m; ++i) {
    transcript.stage_seq.push_back(transcript.agents[i].sharing.seq);
  }
  for (std::size_t i = 0; i < m; ++i) {
    transcript.stage_seq.push_back(transcript.agents[i].analysis.seq);
  }
  for (std::size_t i = 0; i < m; ++i) {
    transcript.stage_seq.push_back(transcript.agents[i].fusion.seq);
  }
  return transcript;
}

std::map<std::string, std::string> run_debate(
    const std::vector<AgentHandle>& agents, const QuestionRecord& question,
    const SamplingParams& params, const PromptLibrary& prompts,
    int base_sample_index) {
  if (agents.size() < 2) {
    raise(ErrorCode::invalid_argument,
          "run_debate: need at least two agents, got " +
              std::to_string(agents.size()));
  }
  const std::size_t m = agents.size();
  CompletionContext ctx;
  ctx.question_id = question.id;
  ctx.gold_answer = question.gold_answer;
  ctx.difficulty = question.difficulty;
  ctx.sample_index = base_sample_index;

  std::vector<std::string> round1(m);
  parallel_for(m, m, [&](std::size_t i) {
    round1[i] = complete(agents[i], sharing_messages(question, prompts), params,
                         ctx);
  });

  std::vector<std::string> finals(m);
  parallel_for(m, m, [&](std::size_t i) {
    std::vector<std::pair<std::string, std::string>> peers;
    for (std::size_t l = 0; l < m; ++l) {
      if (l != i) peers.emplace_back(agents[l].id, round1[l]);
    }
    const std::string prompt =
        render(prompts.get(prompt_names::debate),
               {{"peer_responses", format_peer_block(peers)},
                {"question", question.text}});
    std::vector<ChatMessage> conv = sharing_messages(question, prompts);
    conv.push_back({Role::assistant, round1[i]});
    conv.push_back({Role::user, prompt});
    finals[i] = complete(agents[i], conv, params, ctx);
  });

  std::map<std::string, std::string> out;
  for (std::size_t i = 0; i < m; ++i) out[agents[i].id] = finals[i];
  return out;
}

std::string summarize_inference(const AgentHandle& agent,
                                const QuestionRecord& question,
                                const std::string& initial,
                                const std::string& updated,
                                const SamplingParams& params,
                                const PromptLibrary& prompts,
                                const CompletionContext& ctx) {
  if (initial.empty() || updated.empty()) {
    raise(ErrorCode::invalid_argument,
          "summarize_inference: both candidate solutions must be present");
  }
  const std::string prompt = render(prompts.get(prompt_names::summarization),
                                    {{"question", question.text},
                                     {"initial_answer", initial},
                                     {"updated_answer", updated}});
  return complete(agent, {{Role::user, prompt}}, params, ctx);
}

void write_transcripts(const std::vector<Idea3Transcript>& transcripts,
                       const std::string& path) {
  std::ostringstream out;
  for (const auto& t : transcripts) {
    nlohmann::ordered_json j;
    j["qid"] = t.question_id;
    j["mode"] = interaction_mode_name(t.mode);
    j["agents"] = nlohmann::ordered_json::array();
    for (const auto& a : t.agents) {
      nlohmann::ordered_json ja;
      ja["id"] = a.agent_id;
      ja["initial"] = a.sharing.text;
      ja["analysis"] = a.analysis.text;
      ja["updated"] = a.fusion.text;
      ja["selected"] = a.selected_answer;
      ja["reason"] = a.selection_reason
                         ? selection_reason_name(*a.selection_reason)
                         : "";
      j["agents"].push_back(std::move(ja));
    }
    j["stage_seq"] = t.stage_seq;
    out << j.dump() << '\n';
  }
  write_text_file_atomic(path, out.str());
}

}  // namespace ilr
