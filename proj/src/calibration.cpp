#include "calibration.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace ilr {

GroupStats group_stats(const std::vector<double>& rewards) {
  if (rewards.empty()) {
    raise(ErrorCode::invalid_argument, "group_stats: empty reward list");
  }
  GroupStats s;
  s.r_max = rewards.front();
  s.r_min = rewards.front();
  double sum = 0.0;
  for (double r : rewards) {
    if (!std::isfinite(r)) {
      raise(ErrorCode::invalid_argument, "group_stats: non-finite reward");
    }
    s.r_max = std::max(s.r_max, r);
    s.r_min = std::min(s.r_min, r);
    sum += r;
  }
  s.r_avg = sum / static_cast<double>(rewards.size());
  return s;
}

RewardGroup make_reward_group(const std::string& agent_id,
                              const std::string& question_id,
                              std::vector<double> rewards) {
  RewardGroup g;
  g.agent_id = agent_id;
  g.question_id = question_id;
  g.stats = group_stats(rewards);
  g.rewards = std::move(rewards);
  return g;
}

double calibrate(double r, const std::vector<GroupStats>& peer_stats,
                 std::size_t m) {
  if (m < 2) {
    raise(ErrorCode::invalid_argument, "calibrate: need at least two agents");
  }
  if (peer_stats.size() != m - 1) {
    raise(ErrorCode::invalid_argument,
          "calibrate: expected " + std::to_string(m - 1) + " peer stats, got " +
              std::to_string(peer_stats.size()));
  }
  if (!std::isfinite(r)) {
    raise(ErrorCode::invalid_argument, "calibrate: non-finite reward");
  }
  const double bound = 1.0 / static_cast<double>(m - 1);
  double out = r;
  for (const auto& peer : peer_stats) {
    const double range = peer.r_max - peer.r_min;
    if (range == 0.0) continue;  // constant peer group carries no signal
    const double term = (r - peer.r_avg) / range;
    out += std::clamp(term, -bound, bound);
  }
  return out;
}

std::vector<CalibratedGroup> calibrate_groups(
    const std::vector<RewardGroup>& groups) {
  if (groups.size() < 2) {
    raise(ErrorCode::invalid_argument,
          "calibrate_groups: need at least two agents' groups");
  }
  const std::string& qid = groups.front().question_id;
  for (const auto& g : groups) {
    if (g.question_id != qid) {
      raise(ErrorCode::invalid_argument,
            "calibrate_groups: mixed question ids '" + qid + "' and '" +
                g.question_id + "'");
    }
    if (g.rewards.empty()) {
      raise(ErrorCode::invalid_argument,
            "calibrate_groups: empty reward group for agent " + g.agent_id);
    }
  }
  const std::size_t m = groups.size();
  std::vector<CalibratedGroup> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<GroupStats> peers;
    peers.reserve(m - 1);
    for (std::size_t l = 0; l < m; ++l) {
      if (l != i) peers.push_back(groups[l].stats);
    }
    CalibratedGroup cg;
    cg.agent_id = groups[i].agent_id;
    cg.question_id = groups[i].question_id;
    cg.calibrated.reserve(groups[i].rewards.size());
    for (double r : groups[i].rewards) {
      cg.calibrated.push_back(calibrate(r, peers, m));
    }
    cg.advantages = grpo_advantages(cg.calibrated);
    out.push_back(std::move(cg));
  }
  return out;
}

std::vector<double> grpo_advantages(const std::vector<double>& calibrated) {
  GroupStats s = group_stats(calibrated);  // reuses the finiteness guard
  const std::size_t n = calibrated.size();
  double var = 0.0;
  for (double v : calibrated) {
    const double d = v - s.r_avg;
    var += d * d;
  }
  var /= static_cast<double>(n);
  const double std_dev = std::sqrt(var);
  std::vector<double> out(n, 0.0);
  if (std_dev <= 1e-12) return out;
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = (calibrated[k] - s.r_avg) / std_dev;
  }
  return out;
}

}  // namespace ilr
