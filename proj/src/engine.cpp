#include "engine.hpp"

#include <filesystem>
#include <set>
#include <sstream>

#include "dataset.hpp"
#include "difficulty.hpp"
#include "errors.hpp"
#include "eval.hpp"
#include "irt.hpp"
#include "rollout.hpp"
#include "util.hpp"

namespace ilr {
namespace {

std::string file_stem(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

bool stem_mentions_aime(const std::string& path) {
  return to_lower(file_stem(path)).find("aime") != std::string::npos;
}

}  // namespace

Engine::Engine(const std::string& config_json)
    : config_(parse_run_config(config_json)),
      prompts_(config_.prompts_dir.empty()
                   ? PromptLibrary::load_default()
                   : PromptLibrary::load(config_.prompts_dir)),
      agents_(build_agents(config_)) {}

CommandOutcome Engine::rank_difficulty(const std::string& dataset_in,
                                       const std::string& dataset_out,
                                       const std::string& observations_out) {
  std::vector<QuestionRecord> dataset = load_dataset(dataset_in);

  DifficultyOptions options;
  options.splits = config_.difficulty.splits;
  options.batch_size = config_.difficulty.batch_size;
  options.variants = config_.difficulty.variants;
  options.retry_limit = config_.difficulty.retry_limit;
  options.seed = config_.difficulty.seed;
  options.parallelism = config_.difficulty.parallelism;
  // Ranking is a readout, not sampling: greedy decoding.
  options.sampling.temperature = 0.0;
  options.sampling.max_tokens = config_.eval.max_tokens;

  DifficultyRun run;
  try {
    run = estimate_difficulty(dataset, agents_, options, prompts_);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::coverage) {
      // Partial coverage: report the gaps and write nothing, so a downstream
      // consumer can never pick up a half-annotated dataset.
      CommandOutcome out;
      out.partial = true;
      out.report = std::string(e.what()) + "\nno output files written";
      return out;
    }
    throw;
  }

  std::vector<QuestionRecord> annotated = dataset;
  for (QuestionRecord& record : annotated) {
    record.difficulty = run.estimates.at(record.id).d_q;
  }
  save_dataset(annotated, dataset_out);
  const std::string obs_path = observations_out.empty()
                                   ? dataset_out + ".observations.jsonl"
                                   : observations_out;
  write_observations(run.observations, obs_path);

  std::ostringstream report;
  report << "ranked " << annotated.size() << " questions from "
         << run.observations.size() << " observations";
  if (!run.dropped.empty()) {
    report << " (" << run.dropped.size()
           << " ranking queries dropped, coverage still complete)";
  }
  report << "\n  dataset: " << dataset_out << "\n  observations: " << obs_path;
  return CommandOutcome{false, report.str()};
}

CommandOutcome Engine::estimate_ability(const std::string& validation_in,
                                        const std::string& profiles_out) {
  const std::string path =
      validation_in.empty() ? config_.ability.validation_path : validation_in;
  if (path.empty()) {
    raise(ErrorCode::config,
          "no validation dataset given and ability.validation_path is unset");
  }
  std::vector<QuestionRecord> validation = load_dataset(path);
  if (validation.empty()) {
    raise(ErrorCode::invalid_argument,
          "validation dataset is empty: " + path);
  }

  AbilityOptions options;
  options.sampling.temperature = config_.eval.temperature;
  options.sampling.max_tokens = config_.eval.max_tokens;
  options.parallelism = config_.ability.parallelism;
  options.dataset_name = file_stem(path);

  const AnswerChecker checker = default_checker();
  std::vector<AbilityProfile> profiles;
  profiles.reserve(agents_.size());
  for (const AgentHandle& agent : agents_) {
    profiles.push_back(
        ilr::estimate_ability(agent, validation, checker, prompts_, options));
  }
  write_profiles(profiles, profiles_out);

  std::ostringstream report;
  report << "measured " << profiles.size() << " agents on " << validation.size()
         << " validation questions\n  profiles: " << profiles_out;
  for (const AbilityProfile& profile : profiles) {
    report << "\n  " << profile.agent_id << ": " << format_double(profile.gamma);
  }
  return CommandOutcome{false, report.str()};
}

CommandOutcome Engine::rollout(const std::string& dataset_in,
                               const std::string& profiles_in,
                               const std::string& records_out,
                               const std::string& decisions_out) {
  std::vector<QuestionRecord> dataset = load_dataset(dataset_in);
  std::vector<AbilityProfile> profiles;
  if (!profiles_in.empty()) {
    profiles = read_profiles(profiles_in);
  }

  RolloutConfig rollout_config = build_rollout_config(config_);
  RewardProvider provider = build_reward_provider(config_);
  RolloutResult result = run_rollout(dataset, agents_, profiles, rollout_config,
                                     provider, prompts_);

  ExportManifest manifest;
  manifest.config_hash = config_hash(config_);
  manifest.seed = rollout_config.seed;
  std::set<std::string> exported_questions;
  for (const TrainingRecord& record : result.records) {
    exported_questions.insert(record.question_id);
  }
  manifest.n_questions = exported_questions.size();
  manifest.n_records = result.records.size();
  manifest.dropped_samples = result.dropped_samples.size();
  for (const DroppedQuestion& dropped : result.dropped_questions) {
    manifest.dropped_questions.push_back(dropped.question_id);
  }

  export_training_records(result.records, manifest, records_out);
  const std::string decisions_path = decisions_out.empty()
                                         ? records_out + ".decisions.jsonl"
                                         : decisions_out;
  write_mode_decisions(result.decisions, decisions_path);

  const bool partial =
      !result.dropped_samples.empty() || !result.dropped_questions.empty();
  std::ostringstream report;
  report << "exported " << manifest.n_records << " records over "
         << manifest.n_questions << " questions";
  if (partial) {
    report << " (dropped " << manifest.dropped_samples << " samples, "
           << manifest.dropped_questions.size() << " whole questions)";
    for (const DroppedSample& dropped : result.dropped_samples) {
      report << "\n  dropped sample " << dropped.question_id << "/k="
             << dropped.sample_index << ": " << dropped.reason;
    }
    for (const DroppedQuestion& dropped : result.dropped_questions) {
      report << "\n  dropped question " << dropped.question_id << ": "
             << dropped.reason;
    }
  }
  report << "\n  records: " << records_out
         << "\n  manifest: " << records_out << ".manifest.json"
         << "\n  decisions: " << decisions_path;
  return CommandOutcome{partial, report.str()};
}

CommandOutcome Engine::evaluate(const std::string& benchmark_in,
                                const std::string& paradigm,
                                const std::string& profiles_in,
                                const std::string& report_out) {
  std::vector<QuestionRecord> benchmark = load_dataset(benchmark_in);
  if (benchmark.empty()) {
    raise(ErrorCode::invalid_argument,
          "benchmark dataset is empty: " + benchmark_in);
  }
  const EvalParadigm parsed_paradigm = parse_eval_paradigm(paradigm);

  EvalOptions options;
  options.sampling.temperature = config_.eval.temperature;
  options.sampling.max_tokens = stem_mentions_aime(benchmark_in)
                                    ? config_.eval.aime_max_tokens
                                    : config_.eval.max_tokens;
  options.parallelism = config_.eval.parallelism;
  if (parsed_paradigm == EvalParadigm::idea3_summarize) {
    if (profiles_in.empty()) {
      raise(ErrorCode::config,
            "the idea3_summarize paradigm needs ability profiles "
            "(pass --profiles)");
    }
    options.profiles = read_profiles(profiles_in);
  }

  EvalReport report = ilr::evaluate(agents_, benchmark, file_stem(benchmark_in),
                                    parsed_paradigm, prompts_, options);
  write_eval_report(report, report_out);

  bool partial = false;
  std::size_t failed = 0;
  for (const EvalOutcome& outcome : report.outcomes) {
    if (outcome.failed) {
      partial = true;
      ++failed;
    }
  }

  std::ostringstream summary;
  summary << "evaluated " << benchmark.size() << " questions under "
          << eval_paradigm_name(parsed_paradigm);
  if (partial) {
    summary << " (" << failed << " outcomes failed, counted incorrect)";
  }
  for (const auto& [agent_id, accuracy] : report.per_agent_accuracy) {
    summary << "\n  " << agent_id << ": " << format_double(accuracy);
  }
  summary << "\n  report: " << report_out;
  return CommandOutcome{partial, summary.str()};
}

CommandOutcome calibrate_file(const std::string& records_in,
                              const std::string& records_out) {
  std::vector<TrainingRecord> records = read_training_records(records_in);
  if (records.empty()) {
    raise(ErrorCode::invalid_argument,
          "no training records in " + records_in);
  }
  std::vector<TrainingRecord> recalibrated =
      recalibrate_records(std::move(records));
  write_training_records(recalibrated, records_out);

  std::ostringstream report;
  report << "recalibrated " << recalibrated.size() << " records\n  records: "
         << records_out;
  return CommandOutcome{false, report.str()};
}

}  // namespace ilr
