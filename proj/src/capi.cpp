#include "ilr.h"

#include <exception>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "calibration.hpp"
#include "engine.hpp"
#include "errors.hpp"
#include "irt.hpp"
#include "util.hpp"

struct ilr_engine {
  ilr::Engine impl;
};

namespace {

thread_local std::string t_last_message;

ilr_status status_for(ilr::ErrorCode code) {
  switch (code) {
    case ilr::ErrorCode::invalid_argument:
      return ILR_ERR_INVALID_ARGUMENT;
    case ilr::ErrorCode::config:
      return ILR_ERR_CONFIG;
    case ilr::ErrorCode::parse:
      return ILR_ERR_PARSE;
    case ilr::ErrorCode::io:
      return ILR_ERR_IO;
    case ilr::ErrorCode::coverage:
      return ILR_ERR_COVERAGE;
    case ilr::ErrorCode::protocol:
      return ILR_ERR_PROTOCOL;
    case ilr::ErrorCode::replay_gap:
      return ILR_ERR_REPLAY_GAP;
    case ilr::ErrorCode::transport:
      return ILR_ERR_TRANSPORT;
    case ilr::ErrorCode::schema:
      return ILR_ERR_SCHEMA;
    case ilr::ErrorCode::internal:
      return ILR_ERR_INTERNAL;
  }
  return ILR_ERR_INTERNAL;
}

// Runs fn, routing exceptions into status codes + the thread-local message.
template <typename Fn>
ilr_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ilr::Error& e) {
    t_last_message = e.what();
    return status_for(e.code());
  } catch (const std::exception& e) {
    t_last_message = e.what();
    return ILR_ERR_INTERNAL;
  } catch (...) {
    t_last_message = "unrecognized exception";
    return ILR_ERR_INTERNAL;
  }
}

ilr_status null_argument(const char* what) {
  t_last_message = std::string(what) + " must not be NULL";
  return ILR_ERR_INVALID_ARGUMENT;
}

ilr_status outcome_status(const ilr::CommandOutcome& outcome) {
  t_last_message = outcome.report;
  return outcome.partial ? ILR_PARTIAL : ILR_OK;
}

std::string or_empty(const char* value) { return value ? value : ""; }

}  // namespace

extern "C" {

const char* ilr_version(void) { return "0.1.0"; }

const char* ilr_status_name(ilr_status status) {
  switch (status) {
    case ILR_OK:
      return "ok";
    case ILR_PARTIAL:
      return "partial";
    case ILR_ERR_INVALID_ARGUMENT:
      return "invalid_argument";
    case ILR_ERR_CONFIG:
      return "config";
    case ILR_ERR_PARSE:
      return "parse";
    case ILR_ERR_IO:
      return "io";
    case ILR_ERR_COVERAGE:
      return "coverage";
    case ILR_ERR_PROTOCOL:
      return "protocol";
    case ILR_ERR_REPLAY_GAP:
      return "replay_gap";
    case ILR_ERR_TRANSPORT:
      return "transport";
    case ILR_ERR_SCHEMA:
      return "schema";
    case ILR_ERR_INTERNAL:
      return "internal";
  }
  return "unknown";
}

const char* ilr_last_message(void) { return t_last_message.c_str(); }

ilr_status ilr_engine_create(const char* config_json, ilr_engine** out) {
  if (config_json == nullptr) return null_argument("config_json");
  if (out == nullptr) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    ilr::Engine impl(config_json);
    *out = new ilr_engine{std::move(impl)};
    t_last_message.clear();
    return ILR_OK;
  });
}

ilr_status ilr_engine_create_from_file(const char* config_path,
                                       ilr_engine** out) {
  if (config_path == nullptr) return null_argument("config_path");
  if (out == nullptr) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    ilr::Engine impl(ilr::read_text_file(config_path));
    *out = new ilr_engine{std::move(impl)};
    t_last_message.clear();
    return ILR_OK;
  });
}

void ilr_engine_destroy(ilr_engine* engine) { delete engine; }

ilr_status ilr_rank_difficulty(ilr_engine* engine, const char* dataset_in,
                               const char* dataset_out,
                               const char* observations_out) {
  if (engine == nullptr) return null_argument("engine");
  if (dataset_in == nullptr) return null_argument("dataset_in");
  if (dataset_out == nullptr) return null_argument("dataset_out");
  return guarded([&] {
    return outcome_status(engine->impl.rank_difficulty(
        dataset_in, dataset_out, or_empty(observations_out)));
  });
}

ilr_status ilr_estimate_ability(ilr_engine* engine, const char* validation_in,
                                const char* profiles_out) {
  if (engine == nullptr) return null_argument("engine");
  if (profiles_out == nullptr) return null_argument("profiles_out");
  return guarded([&] {
    return outcome_status(
        engine->impl.estimate_ability(or_empty(validation_in), profiles_out));
  });
}

ilr_status ilr_rollout(ilr_engine* engine, const char* dataset_in,
                       const char* profiles_in, const char* records_out,
                       const char* decisions_out) {
  if (engine == nullptr) return null_argument("engine");
  if (dataset_in == nullptr) return null_argument("dataset_in");
  if (records_out == nullptr) return null_argument("records_out");
  return guarded([&] {
    return outcome_status(engine->impl.rollout(dataset_in,
                                               or_empty(profiles_in),
                                               records_out,
                                               or_empty(decisions_out)));
  });
}

ilr_status ilr_evaluate(ilr_engine* engine, const char* benchmark_in,
                        const char* paradigm, const char* profiles_in,
                        const char* report_out) {
  if (engine == nullptr) return null_argument("engine");
  if (benchmark_in == nullptr) return null_argument("benchmark_in");
  if (paradigm == nullptr) return null_argument("paradigm");
  if (report_out == nullptr) return null_argument("report_out");
  return guarded([&] {
    return outcome_status(engine->impl.evaluate(
        benchmark_in, paradigm, or_empty(profiles_in), report_out));
  });
}

ilr_status ilr_calibrate_file(const char* records_in, const char* records_out) {
  if (records_in == nullptr) return null_argument("records_in");
  if (records_out == nullptr) return null_argument("records_out");
  return guarded([&] {
    return outcome_status(ilr::calibrate_file(records_in, records_out));
  });
}

double ilr_solve_probability(double ability, double difficulty) {
  return ilr::solve_probability(ability, difficulty);
}

ilr_status ilr_calibrate_reward(double reward, const double* peer_max,
                                const double* peer_min, const double* peer_avg,
                                size_t peer_count, double* out) {
  if (peer_max == nullptr) return null_argument("peer_max");
  if (peer_min == nullptr) return null_argument("peer_min");
  if (peer_avg == nullptr) return null_argument("peer_avg");
  if (out == nullptr) return null_argument("out");
  if (peer_count == 0) {
    t_last_message = "peer_count must be at least 1";
    return ILR_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] {
    std::vector<ilr::GroupStats> peers(peer_count);
    for (size_t i = 0; i < peer_count; ++i) {
      peers[i].r_max = peer_max[i];
      peers[i].r_min = peer_min[i];
      peers[i].r_avg = peer_avg[i];
    }
    *out = ilr::calibrate(reward, peers, peer_count + 1);
    t_last_message.clear();
    return ILR_OK;
  });
}

ilr_status ilr_grpo_advantages(const double* rewards, size_t count,
                               double* out) {
  if (rewards == nullptr) return null_argument("rewards");
  if (out == nullptr) return null_argument("out");
  if (count == 0) {
    t_last_message = "count must be at least 1";
    return ILR_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] {
    std::vector<double> advantages =
        ilr::grpo_advantages(std::vector<double>(rewards, rewards + count));
    for (size_t i = 0; i < count; ++i) out[i] = advantages[i];
    t_last_message.clear();
    return ILR_OK;
  });
}

}  // extern "C"
