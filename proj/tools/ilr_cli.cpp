// Command-line driver for the multi-agent learning pipeline. A thin layer:
// flag handling and config overrides live here, everything else is behind the
// shared-library API.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "ilr.h"
#include "json.hpp"

namespace {

struct GlobalFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t parallelism = 0;
  bool parallelism_set = false;
  bool verbose = false;
};

// Reads the config file and layers the --seed / --parallelism overrides onto
// the JSON document before the engine parses it (flags win over file values).
std::string effective_config(const GlobalFlags& flags) {
  std::ifstream in(flags.config_path);
  if (!in) {
    throw std::runtime_error("cannot open config file: " + flags.config_path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();

  nlohmann::ordered_json doc =
      nlohmann::ordered_json::parse(buffer.str());  // throws on malformed JSON
  if (!doc.is_object()) {
    throw std::runtime_error("config root must be a JSON object");
  }
  if (flags.seed_set) {
    doc["difficulty"]["seed"] = flags.seed;
    doc["rollout"]["seed"] = flags.seed;
  }
  if (flags.parallelism_set) {
    doc["difficulty"]["parallelism"] = flags.parallelism;
    doc["ability"]["parallelism"] = flags.parallelism;
    doc["rollout"]["parallelism"] = flags.parallelism;
    doc["eval"]["parallelism"] = flags.parallelism;
  }
  return doc.dump();
}

class EngineGuard {
 public:
  explicit EngineGuard(ilr_engine* engine) : engine_(engine) {}
  ~EngineGuard() { ilr_engine_destroy(engine_); }
  EngineGuard(const EngineGuard&) = delete;
  EngineGuard& operator=(const EngineGuard&) = delete;

 private:
  ilr_engine* engine_;
};

const char* opt(const std::string& value) {
  return value.empty() ? nullptr : value.c_str();
}

// status -> process exit code: 0 ok, 2 partial-with-report, 1 anything else.
int finish(ilr_status status, bool verbose) {
  const char* message = ilr_last_message();
  if (verbose) {
    std::cerr << "status: " << ilr_status_name(status) << "\n";
  }
  switch (status) {
    case ILR_OK:
      if (*message) std::cout << message << "\n";
      return 0;
    case ILR_PARTIAL:
      if (*message) std::cout << message << "\n";
      std::cerr << "warning: partial results\n";
      return 2;
    default:
      std::cerr << "error (" << ilr_status_name(status) << "): " << message
                << "\n";
      return 1;
  }
}

int with_engine(const GlobalFlags& flags,
                const std::function<ilr_status(ilr_engine*)>& command) {
  if (flags.config_path.empty()) {
    std::cerr << "error (config): this command needs --config\n";
    return 1;
  }
  std::string config_json;
  try {
    config_json = effective_config(flags);
  } catch (const std::exception& e) {
    std::cerr << "error (config): " << e.what() << "\n";
    return 1;
  }
  if (flags.verbose) {
    std::cerr << "config: " << flags.config_path;
    if (flags.seed_set) std::cerr << " (seed override " << flags.seed << ")";
    if (flags.parallelism_set) {
      std::cerr << " (parallelism override " << flags.parallelism << ")";
    }
    std::cerr << "\n";
  }
  ilr_engine* engine = nullptr;
  ilr_status status = ilr_engine_create(config_json.c_str(), &engine);
  if (status != ILR_OK) {
    return finish(status, flags.verbose);
  }
  EngineGuard guard(engine);
  return finish(command(engine), flags.verbose);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Multi-agent learning pipeline: difficulty self-ranking, ability-driven "
      "cooperation/competition, calibrated reward export, evaluation."};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags flags;
  app.add_option("--config", flags.config_path,
                 "JSON run-config file (needed by every command except "
                 "calibrate)");
  auto* seed_opt =
      app.add_option("--seed", flags.seed,
                     "Override difficulty.seed and rollout.seed");
  auto* par_opt = app.add_option(
      "--parallelism", flags.parallelism,
      "Override every per-section parallelism bound (must be >= 1)");
  app.add_flag("--verbose", flags.verbose, "Chatty progress on stderr");

  // rank-difficulty
  std::string rd_in, rd_out, rd_obs;
  CLI::App* rank = app.add_subcommand(
      "rank-difficulty",
      "Annotate a question file with self-ranked difficulty scores");
  rank->add_option("dataset_in", rd_in, "Question JSONL to rank")->required();
  rank->add_option("dataset_out", rd_out, "Annotated JSONL to write")
      ->required();
  rank->add_option("--observations", rd_obs,
                   "Observation sidecar path (default: "
                   "<dataset_out>.observations.jsonl)");

  // estimate-ability
  std::string ea_out, ea_validation;
  CLI::App* ability = app.add_subcommand(
      "estimate-ability",
      "Measure each agent's validation accuracy and write ability profiles");
  ability->add_option("profiles_out", ea_out, "Profile JSONL to write")
      ->required();
  ability->add_option("--validation", ea_validation,
                      "Validation question JSONL (default: the config's "
                      "ability.validation_path)");

  // rollout
  std::string ro_in, ro_out, ro_profiles, ro_decisions;
  CLI::App* rollout = app.add_subcommand(
      "rollout",
      "Sample interactions, calibrate rewards, and export training records");
  rollout->add_option("dataset_in", ro_in, "Difficulty-annotated question JSONL")
      ->required();
  rollout->add_option("records_out", ro_out, "Training-record JSONL to write")
      ->required();
  rollout->add_option("--profiles", ro_profiles,
                      "Ability profiles JSONL (required unless mode.source is "
                      "\"ratio\")");
  rollout->add_option("--decisions", ro_decisions,
                      "Mode-decision sidecar path (default: "
                      "<records_out>.decisions.jsonl)");

  // calibrate
  std::string ca_in, ca_out;
  CLI::App* calibrate = app.add_subcommand(
      "calibrate",
      "Replay reward calibration over an exported record file (no config "
      "needed)");
  calibrate->add_option("records_in", ca_in, "Training-record JSONL to read")
      ->required();
  calibrate->add_option("records_out", ca_out, "Recalibrated JSONL to write")
      ->required();

  // evaluate
  std::string ev_in, ev_out, ev_paradigm, ev_profiles;
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "Score agents on a benchmark and write an accuracy report");
  evaluate->add_option("benchmark_in", ev_in, "Benchmark question JSONL")
      ->required();
  evaluate->add_option("report_out", ev_out, "Report JSON to write")
      ->required();
  evaluate
      ->add_option("--paradigm", ev_paradigm,
                   "single | debate | idea3_summarize")
      ->required();
  evaluate->add_option("--profiles", ev_profiles,
                       "Ability profiles JSONL (needed by idea3_summarize)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;  // usage errors are exit 1 regardless of CLI11's own codes
  }

  flags.seed_set = seed_opt->count() > 0;
  flags.parallelism_set = par_opt->count() > 0;
  if (flags.parallelism_set && flags.parallelism == 0) {
    std::cerr << "error (config): --parallelism must be >= 1\n";
    return 1;
  }

  if (rank->parsed()) {
    return with_engine(flags, [&](ilr_engine* engine) {
      return ilr_rank_difficulty(engine, rd_in.c_str(), rd_out.c_str(),
                                 opt(rd_obs));
    });
  }
  if (ability->parsed()) {
    return with_engine(flags, [&](ilr_engine* engine) {
      return ilr_estimate_ability(engine, opt(ea_validation), ea_out.c_str());
    });
  }
  if (rollout->parsed()) {
    return with_engine(flags, [&](ilr_engine* engine) {
      return ilr_rollout(engine, ro_in.c_str(), opt(ro_profiles),
                         ro_out.c_str(), opt(ro_decisions));
    });
  }
  if (calibrate->parsed()) {
    return finish(ilr_calibrate_file(ca_in.c_str(), ca_out.c_str()),
                  flags.verbose);
  }
  if (evaluate->parsed()) {
    return with_engine(flags, [&](ilr_engine* engine) {
      return ilr_evaluate(engine, ev_in.c_str(), ev_paradigm.c_str(),
                          opt(ev_profiles), ev_out.c_str());
    });
  }
  std::cerr << "error: no command\n";
  return 1;
}
