#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "calibration.hpp"
#include "errors.hpp"
#include "rng.hpp"

using namespace ilr;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::internal;
}

// Independent re-statement of the calibration formula, written directly from
// the definition, used as a brute-force oracle against the library.
double eq5_oracle(double r, const std::vector<GroupStats>& peers,
                  std::size_t m) {
  const double bound = 1.0 / static_cast<double>(m - 1);
  double out = r;
  for (const auto& p : peers) {
    if (p.r_max == p.r_min) continue;
    double term = (r - p.r_avg) / (p.r_max - p.r_min);
    if (term > bound) term = bound;
    if (term < -bound) term = -bound;
    out += term;
  }
  return out;
}

GroupStats stats(double mx, double mn, double avg) {
  GroupStats s;
  s.r_max = mx;
  s.r_min = mn;
  s.r_avg = avg;
  return s;
}

}  // namespace

TEST_CASE("group_stats computes exact summaries") {
  GroupStats s = group_stats({0.2, 0.8, 0.5});
  CHECK(s.r_max == 0.8);
  CHECK(s.r_min == 0.2);
  CHECK(s.r_avg == 0.5);

  GroupStats single = group_stats({0.4});
  CHECK(single.r_max == 0.4);
  CHECK(single.r_min == 0.4);
  CHECK(single.r_avg == 0.4);
}

TEST_CASE("group_stats rejects empty and non-finite input") {
  CHECK(code_of([] { group_stats({}); }) == ErrorCode::invalid_argument);
  CHECK(code_of([] { group_stats({std::nan(""), 0.1}); }) ==
        ErrorCode::invalid_argument);
  CHECK(code_of([] { group_stats({1.0, INFINITY}); }) ==
        ErrorCode::invalid_argument);
}

TEST_CASE("calibrate reproduces the hand-evaluated examples") {
  // m=2: 0.8 + clip(0.3, -1, 1)
  CHECK(calibrate(0.8, {stats(1.0, 0.0, 0.5)}, 2) == 1.1);
  // m=2: the raw peer term 0.9/0.2 = 4.5 clips to the bound 1.
  CHECK(calibrate(1.0, {stats(0.2, 0.0, 0.1)}, 2) == 2.0);
  // m=3: bound 1/2; second peer term clips at -0.5.
  CHECK(calibrate(0.6, {stats(0.9, 0.1, 0.5), stats(1.0, 0.6, 0.8)}, 3) ==
        0.22499999999999998);
}

TEST_CASE("a zero-range peer group contributes nothing") {
  CHECK(calibrate(0.7, {stats(0.5, 0.5, 0.5)}, 2) == 0.7);
  CHECK(calibrate(0.7, {stats(0.5, 0.5, 0.5), stats(1.0, 0.0, 0.5)}, 3) ==
        calibrate(0.7, {stats(9.0, 9.0, 9.0), stats(1.0, 0.0, 0.5)}, 3));
}

TEST_CASE("calibrate validates its arguments") {
  CHECK(code_of([] { calibrate(0.5, {}, 2); }) == ErrorCode::invalid_argument);
  CHECK(code_of([] { calibrate(0.5, {stats(1, 0, 0.5)}, 1); }) ==
        ErrorCode::invalid_argument);
  CHECK(code_of([] {
          calibrate(std::nan(""), {stats(1, 0, 0.5)}, 2);
        }) == ErrorCode::invalid_argument);
}

TEST_CASE("calibration shift is bounded by 1 over random instances") {
  Rng rng(2024);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t m = 2 + rng.next_below(4);  // 2..5 agents
    std::vector<GroupStats> peers;
    for (std::size_t i = 0; i + 1 < m; ++i) {
      double a = rng.next_unit() * 4 - 2;
      double b = rng.next_unit() * 4 - 2;
      if (a < b) std::swap(a, b);
      peers.push_back(stats(a, b, b + (a - b) * rng.next_unit()));
    }
    const double r = rng.next_unit() * 4 - 2;
    const double out = calibrate(r, peers, m);
    CHECK(std::fabs(out - r) <= 1.0 + 1e-12);
  }
}

TEST_CASE("calibrate is monotone in the reward") {
  Rng rng(77);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<GroupStats> peers;
    const std::size_t m = 2 + rng.next_below(3);
    for (std::size_t i = 0; i + 1 < m; ++i) {
      double a = rng.next_unit();
      double b = rng.next_unit();
      if (a < b) std::swap(a, b);
      peers.push_back(stats(a, b, (a + b) / 2));
    }
    double r1 = rng.next_unit() * 2 - 1;
    double r2 = rng.next_unit() * 2 - 1;
    if (r1 > r2) std::swap(r1, r2);
    CHECK(calibrate(r1, peers, m) <= calibrate(r2, peers, m) + 1e-12);
  }
}

TEST_CASE("unclipped peer terms are antisymmetric around the peer average") {
  const auto peer = stats(2.0, -2.0, 0.0);  // symmetric range, avg 0
  const double up = calibrate(0.3, {peer}, 2) - 0.3;
  const double down = calibrate(-0.3, {peer}, 2) - (-0.3);
  CHECK(up == -down);
}

TEST_CASE("calibrate_groups composes per-agent calibration") {
  SUBCASE("identical constant groups pass rewards through") {
    auto a = make_reward_group("a", "q", {0.5, 0.5});
    auto b = make_reward_group("b", "q", {0.5, 0.5});
    auto out = calibrate_groups({a, b});
    REQUIRE(out.size() == 2);
    CHECK(out[0].calibrated == std::vector<double>{0.5, 0.5});
    CHECK(out[1].calibrated == std::vector<double>{0.5, 0.5});
    CHECK(out[0].advantages == std::vector<double>{0.0, 0.0});
  }
  SUBCASE("singleton group against a spread peer") {
    auto a = make_reward_group("a", "q", {0.8});
    auto b = make_reward_group("b", "q", {0.0, 0.5, 1.0});
    auto out = calibrate_groups({a, b});
    CHECK(out[0].calibrated == std::vector<double>{1.1});
    // A's group is constant, so B's rewards pass through unchanged.
    CHECK(out[1].calibrated == std::vector<double>{0.0, 0.5, 1.0});
  }
  SUBCASE("swapping agent order swaps outputs") {
    auto a = make_reward_group("a", "q", {0.1, 0.9});
    auto b = make_reward_group("b", "q", {0.4, 0.6});
    auto fwd = calibrate_groups({a, b});
    auto rev = calibrate_groups({b, a});
    CHECK(fwd[0].calibrated == rev[1].calibrated);
    CHECK(fwd[1].calibrated == rev[0].calibrated);
  }
  SUBCASE("mixed question ids are rejected") {
    auto a = make_reward_group("a", "q1", {0.1});
    auto b = make_reward_group("b", "q2", {0.2});
    CHECK(code_of([&] { calibrate_groups({a, b}); }) ==
          ErrorCode::invalid_argument);
  }
  SUBCASE("fewer than two groups is rejected") {
    auto a = make_reward_group("a", "q", {0.1});
    CHECK(code_of([&] { calibrate_groups({a}); }) ==
          ErrorCode::invalid_argument);
  }
}

TEST_CASE("calibrate_groups matches the brute-force formula oracle") {
  Rng rng(9001);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = 2 + rng.next_below(3);  // 2..4 agents
    const std::size_t n = 1 + rng.next_below(4);  // 1..4 samples
    std::vector<RewardGroup> groups;
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<double> rewards;
      for (std::size_t k = 0; k < n; ++k) {
        rewards.push_back(rng.next_unit() * 2 - 0.5);
      }
      groups.push_back(
          make_reward_group("agent" + std::to_string(i), "q", rewards));
    }
    auto out = calibrate_groups(groups);
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<GroupStats> peers;
      for (std::size_t l = 0; l < m; ++l) {
        if (l != i) peers.push_back(groups[l].stats);
      }
      for (std::size_t k = 0; k < n; ++k) {
        const double expected = eq5_oracle(groups[i].rewards[k], peers, m);
        CHECK(std::fabs(out[i].calibrated[k] - expected) <= 1e-12);
      }
    }
  }
}

TEST_CASE("grpo_advantages uses the population standard deviation") {
  auto adv = grpo_advantages({2.0, 1.0, 0.0});
  REQUIRE(adv.size() == 3);
  CHECK(adv[0] == 1.224744871391589);
  CHECK(adv[1] == 0.0);
  CHECK(adv[2] == -1.224744871391589);
}

TEST_CASE("degenerate groups get all-zero advantages") {
  CHECK(grpo_advantages({0.5, 0.5}) == std::vector<double>{0.0, 0.0});
  CHECK(grpo_advantages({1.0}) == std::vector<double>{0.0});
  // Spread below the tolerance collapses to zero too.
  CHECK(grpo_advantages({1.0, 1.0 + 1e-13}) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("advantages are standardized and rank-preserving") {
  Rng rng(5150);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.next_below(7);
    std::vector<double> vals;
    for (std::size_t i = 0; i < n; ++i) vals.push_back(rng.next_unit() * 3);
    auto adv = grpo_advantages(vals);
    double mean = 0.0;
    for (double a : adv) mean += a;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    var /= static_cast<double>(n);
    const bool degenerate =
        std::all_of(adv.begin(), adv.end(), [](double a) { return a == 0.0; });
    if (!degenerate) {
      CHECK(std::fabs(mean) < 1e-9);
      CHECK(std::fabs(std::sqrt(var) - 1.0) < 1e-9);
      const auto argmax_vals = static_cast<std::size_t>(std::distance(
          vals.begin(), std::max_element(vals.begin(), vals.end())));
      const auto argmax_adv = static_cast<std::size_t>(std::distance(
          adv.begin(), std::max_element(adv.begin(), adv.end())));
      CHECK(argmax_vals == argmax_adv);
    }
  }
}
