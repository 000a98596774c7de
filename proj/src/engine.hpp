#pragma once

#include <string>
#include <vector>

#include "agents.hpp"
#include "config.hpp"
#include "prompts.hpp"

namespace ilr {

// Result of a pipeline command that ran to completion. Hard failures are
// exceptions; `partial` marks degraded-but-usable runs (dropped queries or
// samples, flagged evaluation failures) that callers surface as a distinct
// exit status.
struct CommandOutcome {
  bool partial = false;
  std::string report;
};

// Owns a parsed config, the prompt library, and instantiated agents; each
// method is one pipeline command over file paths.
class Engine {
 public:
  explicit Engine(const std::string& config_json);

  const RunConfig& config() const { return config_; }
  const std::vector<AgentHandle>& agents() const { return agents_; }
  const PromptLibrary& prompts() const { return prompts_; }

  // Self-ranking difficulty pass. Writes the annotated dataset and an
  // observation sidecar (default: <dataset_out>.observations.jsonl).
  // A coverage gap yields a partial outcome with the gap report and no
  // output files.
  CommandOutcome rank_difficulty(const std::string& dataset_in,
                                 const std::string& dataset_out,
                                 const std::string& observations_out = "");

  // Measures validation accuracy per agent and writes ability profiles.
  CommandOutcome estimate_ability(const std::string& validation_in,
                                  const std::string& profiles_out);

  // Full sampling + calibration + export. decisions_out defaults to
  // <records_out>.decisions.jsonl; the manifest lands at
  // <records_out>.manifest.json.
  CommandOutcome rollout(const std::string& dataset_in,
                         const std::string& profiles_in,
                         const std::string& records_out,
                         const std::string& decisions_out = "");

  // Accuracy evaluation; paradigm is "single", "debate", or
  // "idea3_summarize" (the latter needs profiles_in).
  CommandOutcome evaluate(const std::string& benchmark_in,
                          const std::string& paradigm,
                          const std::string& profiles_in,
                          const std::string& report_out);

 private:
  RunConfig config_;
  PromptLibrary prompts_;
  std::vector<AgentHandle> agents_;
};

// Offline recalibration replay over an export; no config needed.
CommandOutcome calibrate_file(const std::string& records_in,
                              const std::string& records_out);

}  // namespace ilr
