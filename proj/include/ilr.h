#pragma once

#include <stddef.h>

#if defined(_WIN32)
#if defined(ILR_BUILD_SHARED)
#define ILR_API __declspec(dllexport)
#else
#define ILR_API __declspec(dllimport)
#endif
#else
#define ILR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every call reports through a status code; the detail text (a human-readable
 * report on success/partial, the error message otherwise) is retrieved with
 * ilr_last_message(). ILR_PARTIAL means the command ran and wrote what it
 * could but the result is degraded (coverage gaps, dropped samples, failed
 * evaluations); everything >= ILR_ERR_INVALID_ARGUMENT is a hard failure. */
typedef enum ilr_status {
  ILR_OK = 0,
  ILR_PARTIAL = 1,
  ILR_ERR_INVALID_ARGUMENT = 2,
  ILR_ERR_CONFIG = 3,
  ILR_ERR_PARSE = 4,
  ILR_ERR_IO = 5,
  ILR_ERR_COVERAGE = 6,
  ILR_ERR_PROTOCOL = 7,
  ILR_ERR_REPLAY_GAP = 8,
  ILR_ERR_TRANSPORT = 9,
  ILR_ERR_SCHEMA = 10,
  ILR_ERR_INTERNAL = 11
} ilr_status;

/* Opaque pipeline engine: a parsed config, its prompt library, and the
 * instantiated agent backends. Engines are immutable after creation and safe
 * to use from several threads (the commands parallelize internally). */
typedef struct ilr_engine ilr_engine;

ILR_API const char* ilr_version(void);

/* Stable identifier for a status ("ok", "partial", "config", ...). */
ILR_API const char* ilr_status_name(ilr_status status);

/* Message from the most recent library call on the calling thread. Never
 * NULL; valid until that thread's next call into the library. */
ILR_API const char* ilr_last_message(void);

/* Builds an engine from a JSON config document (resp. a config file path).
 * On success *out owns the engine; free it with ilr_engine_destroy. */
ILR_API ilr_status ilr_engine_create(const char* config_json,
                                     ilr_engine** out);
ILR_API ilr_status ilr_engine_create_from_file(const char* config_path,
                                               ilr_engine** out);
ILR_API void ilr_engine_destroy(ilr_engine* engine);

/* Self-ranked difficulty annotation: reads a question file, writes the
 * annotated copy plus an observation sidecar (NULL observations_out ->
 * "<dataset_out>.observations.jsonl"). Returns ILR_PARTIAL and writes
 * nothing when ranking coverage is incomplete. */
ILR_API ilr_status ilr_rank_difficulty(ilr_engine* engine,
                                       const char* dataset_in,
                                       const char* dataset_out,
                                       const char* observations_out);

/* Measures each agent's validation accuracy and writes ability profiles.
 * NULL validation_in falls back to the config's ability.validation_path. */
ILR_API ilr_status ilr_estimate_ability(ilr_engine* engine,
                                        const char* validation_in,
                                        const char* profiles_out);

/* Full sampling + calibration + export. profiles_in may be NULL when the
 * config selects modes by difficulty ratio; NULL decisions_out ->
 * "<records_out>.decisions.jsonl". The manifest lands at
 * "<records_out>.manifest.json". Dropped samples/questions -> ILR_PARTIAL. */
ILR_API ilr_status ilr_rollout(ilr_engine* engine, const char* dataset_in,
                               const char* profiles_in,
                               const char* records_out,
                               const char* decisions_out);

/* Accuracy evaluation; paradigm is "single", "debate", or "idea3_summarize"
 * (the latter requires profiles_in). Failed questions are flagged in the
 * report and yield ILR_PARTIAL. */
ILR_API ilr_status ilr_evaluate(ilr_engine* engine, const char* benchmark_in,
                                const char* paradigm,
                                const char* profiles_in,
                                const char* report_out);

/* Offline replay: regroups an export's raw rewards and rewrites the
 * calibrated rewards and advantages. Needs no engine or config. */
ILR_API ilr_status ilr_calibrate_file(const char* records_in,
                                      const char* records_out);

/* ---- pure math kernels (stateless, thread-safe) ---- */

/* Probability that an agent of the given ability solves a question of the
 * given difficulty: 1 / (1 + exp(-1.7 * (ability - difficulty))). */
ILR_API double ilr_solve_probability(double ability, double difficulty);

/* Perception-calibrated reward for one sampled response. The peer arrays
 * hold, per peer agent, the max/min/avg of that agent's reward group for the
 * same question; the total agent count is peer_count + 1. */
ILR_API ilr_status ilr_calibrate_reward(double reward, const double* peer_max,
                                        const double* peer_min,
                                        const double* peer_avg,
                                        size_t peer_count, double* out);

/* Group-relative advantages: (r - mean) / population std, all zeros for a
 * (near-)constant group. out must hold count doubles. */
ILR_API ilr_status ilr_grpo_advantages(const double* rewards, size_t count,
                                       double* out);

#ifdef __cplusplus
}
#endif
