#pragma once

#include <string>
#include <vector>

namespace ilr {

struct GroupStats {
  double r_max = 0.0;
  double r_min = 0.0;
  double r_avg = 0.0;
};

// One agent's sampled-response rewards for one question.
struct RewardGroup {
  std::string agent_id;
  std::string question_id;
  std::vector<double> rewards;
  GroupStats stats;  // always equals group_stats(rewards)
};

struct CalibratedGroup {
  std::string agent_id;
  std::string question_id;
  std::vector<double> calibrated;
  std::vector<double> advantages;
};

// Exact max / min / arithmetic mean. Empty or non-finite input is an error.
GroupStats group_stats(const std::vector<double>& rewards);

RewardGroup make_reward_group(const std::string& agent_id,
                              const std::string& question_id,
                              std::vector<double> rewards);

// Perception-calibrated reward: r plus, per peer group, the reward's offset
// from that peer's average scaled by the peer's range and clipped to
// ±1/(m−1). A zero peer range contributes 0. m is the total agent count;
// peer_stats must have m−1 entries.
double calibrate(double r, const std::vector<GroupStats>& peer_stats,
                 std::size_t m);

// Calibrates every sample of every group against the other groups' stats,
// then attaches group-relative advantages.
std::vector<CalibratedGroup> calibrate_groups(
    const std::vector<RewardGroup>& groups);

// (x − mean) / population std; an (effectively) zero-spread group gets all
// zeros rather than a hidden epsilon.
std::vector<double> grpo_advantages(const std::vector<double>& calibrated);

}  // namespace ilr
