#include "doctest.h"

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "agents.hpp"
#include "errors.hpp"
#include "eval.hpp"
#include "interaction.hpp"
#include "irt.hpp"
#include "prompts.hpp"
#include "util.hpp"

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

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& stem) {
    path = (std::filesystem::temp_directory_path() /
            (stem + "." + std::to_string(::getpid()) + ".jsonl"))
               .string();
  }
  ~TempFile() { std::remove(path.c_str()); }
};

PromptLibrary library() { return PromptLibrary::load(ILR_PROMPTS_SOURCE_DIR); }

std::vector<AbilityProfile> pair_profiles(double g1, double g2) {
  AbilityProfile a, b;
  a.agent_id = "alpha";
  a.gamma = g1;
  b.agent_id = "beta";
  b.gamma = g2;
  return {a, b};
}

}  // namespace

TEST_CASE("solve_probability matches hand-computed logistic values") {
  // 1 / (1 + e^(-1.7 * (gamma - d))), frozen at full double precision.
  CHECK(solve_probability(0.59, 0.9) == 0.37121686178310914);
  CHECK(solve_probability(0.75, 0.9) == 0.4365932137378064);
  CHECK(solve_probability(0.5, 0.5) == 0.5);
  // Monotonic in ability, antitonic in difficulty.
  CHECK(solve_probability(0.9, 0.5) > solve_probability(0.3, 0.5));
  CHECK(solve_probability(0.5, 0.9) < solve_probability(0.5, 0.2));
}

TEST_CASE("select_mode averages per-agent solve probabilities") {
  auto profiles = pair_profiles(0.59, 0.75);

  SUBCASE("hard question -> cooperation") {
    ModeDecision d = select_mode(profiles, "q1", 0.9);
    REQUIRE(d.p_q.has_value());
    CHECK(*d.p_q == 0.40390503776045777);
    CHECK(d.mode == InteractionMode::cooperation);
    CHECK(d.source == ModeSource::irt);
    CHECK(d.per_agent_p.at("alpha") == 0.37121686178310914);
    CHECK(d.per_agent_p.at("beta") == 0.4365932137378064);
  }
  SUBCASE("easy question -> competition") {
    ModeDecision d = select_mode(profiles, "q2", 0.3);
    CHECK(*d.p_q == 0.65162560139344494);
    CHECK(d.mode == InteractionMode::competition);
  }
  SUBCASE("exact 0.5 boundary -> competition") {
    // For gammas (0.59, 0.75) and d = 0.67 the two logistic values sum to
    // exactly 1.0 in doubles, so the mean is exactly the boundary.
    ModeDecision d = select_mode(profiles, "q3", 0.67);
    CHECK(*d.p_q == 0.5);
    CHECK(d.mode == InteractionMode::competition);
  }
}

TEST_CASE("select_mode validates its inputs") {
  auto profiles = pair_profiles(0.5, 0.6);
  CHECK(code_of([&] { select_mode(profiles, "q", 0.0); }) ==
        ErrorCode::invalid_argument);
  CHECK(code_of([&] { select_mode(profiles, "q", 1.2); }) ==
        ErrorCode::invalid_argument);
  CHECK(code_of([&] { select_mode({}, "q", 0.5); }) ==
        ErrorCode::invalid_argument);
  CHECK(select_mode(profiles, "q", 1.0).mode == InteractionMode::cooperation);
}

TEST_CASE("ratio source cooperates the hardest ceil(p*N) questions") {
  std::map<std::string, double> difficulties = {
      {"a", 0.9}, {"b", 0.9}, {"c", 0.5}, {"d", 0.3}};

  SUBCASE("ties in difficulty break by question id ascending") {
    auto modes = select_modes_by_ratio(difficulties, 0.25);  // ceil(1.0) = 1
    CHECK(modes.at("a").mode == InteractionMode::cooperation);
    CHECK(modes.at("b").mode == InteractionMode::competition);
    CHECK(modes.at("c").mode == InteractionMode::competition);
    CHECK(modes.at("d").mode == InteractionMode::competition);
    CHECK(!modes.at("a").p_q.has_value());
    CHECK(modes.at("a").source == ModeSource::ratio);
  }
  SUBCASE("p = 1 -> everything cooperates; p = 0 -> nothing does") {
    auto all = select_modes_by_ratio(difficulties, 1.0);
    auto none = select_modes_by_ratio(difficulties, 0.0);
    for (const auto& [qid, d] : all) {
      (void)qid;
      CHECK(d.mode == InteractionMode::cooperation);
    }
    for (const auto& [qid, d] : none) {
      (void)qid;
      CHECK(d.mode == InteractionMode::competition);
    }
  }
  SUBCASE("fractional products round up") {
    // 0.1 * 3 = 0.30000000000000004 -> 1 cooperative question.
    std::map<std::string, double> three = {{"a", 0.8}, {"b", 0.5}, {"c", 0.2}};
    auto modes = select_modes_by_ratio(three, 0.1);
    int coop = 0;
    for (const auto& [qid, d] : modes) {
      (void)qid;
      coop += d.mode == InteractionMode::cooperation ? 1 : 0;
    }
    CHECK(coop == 1);
    CHECK(modes.at("a").mode == InteractionMode::cooperation);
  }
  SUBCASE("near-integer float noise does not inflate the count") {
    // 0.2 * 5 lands a hair above 1.0 in doubles; a bare ceil would take 2.
    std::map<std::string, double> five = {
        {"a", 0.9}, {"b", 0.7}, {"c", 0.5}, {"d", 0.3}, {"e", 0.1}};
    auto modes = select_modes_by_ratio(five, 0.2);
    int coop = 0;
    for (const auto& [qid, d] : modes) {
      (void)qid;
      coop += d.mode == InteractionMode::cooperation ? 1 : 0;
    }
    CHECK(coop == 1);
  }
  SUBCASE("p outside [0, 1] is rejected") {
    CHECK(code_of([&] { select_modes_by_ratio(difficulties, -0.1); }) ==
          ErrorCode::invalid_argument);
    CHECK(code_of([&] { select_modes_by_ratio(difficulties, 1.1); }) ==
          ErrorCode::invalid_argument);
  }
}

TEST_CASE("estimate_ability measures validation accuracy") {
  PromptLibrary prompts = library();
  std::vector<QuestionRecord> validation;
  for (int i = 1; i <= 4; ++i) {
    QuestionRecord q;
    q.id = "v" + std::to_string(i);
    q.text = "What is " + std::to_string(i) + " + 1?";
    q.gold_answer = std::to_string(i + 1);
    q.difficulty = 0.5;
    validation.push_back(q);
  }
  AbilityOptions options;
  options.parallelism = 2;
  options.dataset_name = "toy_validation";

  SUBCASE("a perfect synthetic agent scores 1.0") {
    SyntheticConfig cfg;
    cfg.gamma = 1.0;
    cfg.seed = 3;
    AgentHandle agent = make_synthetic_agent("perfect", cfg);
    AbilityProfile p =
        estimate_ability(agent, validation, default_checker(), prompts, options);
    CHECK(p.gamma == 1.0);
    CHECK(p.agent_id == "perfect");
    CHECK(p.measured_on == "toy_validation");
    CHECK(p.sample_count == 4);
  }
  SUBCASE("a scripted agent scores exactly its correct fraction") {
    ScriptedConfig cfg;
    for (std::size_t i = 0; i < validation.size(); ++i) {
      const auto key = prompt_key(sharing_messages(validation[i], prompts));
      // Three right answers, one wrong.
      const std::string answer =
          i == 0 ? "boxed{999}" : "boxed{" + validation[i].gold_answer + "}";
      cfg.responses[{key, 0}] = "I worked it out. " + answer;
    }
    AgentHandle agent = make_scripted_agent("scripted", cfg);
    AbilityProfile p =
        estimate_ability(agent, validation, default_checker(), prompts, options);
    CHECK(p.gamma == 0.75);
  }
  SUBCASE("empty validation set is rejected") {
    SyntheticConfig cfg;
    AgentHandle agent = make_synthetic_agent("a", cfg);
    CHECK(code_of([&] {
            estimate_ability(agent, {}, default_checker(), prompts, options);
          }) == ErrorCode::invalid_argument);
  }
}

TEST_CASE("profiles survive a write/read round trip") {
  TempFile f("profiles_rt");
  auto profiles = pair_profiles(0.59, 0.75);
  profiles[0].measured_on = "validation";
  profiles[0].sample_count = 40;
  profiles[1].measured_on = "validation";
  profiles[1].sample_count = 40;
  write_profiles(profiles, f.path);
  auto loaded = read_profiles(f.path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].agent_id == "alpha");
  CHECK(loaded[0].gamma == 0.59);
  CHECK(loaded[0].measured_on == "validation");
  CHECK(loaded[0].sample_count == 40);
  CHECK(loaded[1].agent_id == "beta");
  CHECK(loaded[1].gamma == 0.75);
}

TEST_CASE("read_profiles validates the schema") {
  TempFile f("profiles_bad");
  {
    std::string text = "{\"agent\":\"a\",\"gamma\":1.5}\n";
    write_text_file_atomic(f.path, text);
  }
  CHECK(code_of([&] { read_profiles(f.path); }) == ErrorCode::parse);
  write_text_file_atomic(f.path, "{\"gamma\":0.5}\n");
  CHECK(code_of([&] { read_profiles(f.path); }) == ErrorCode::parse);
}

TEST_CASE("mode decisions serialize with null p_q for ratio source") {
  TempFile f("decisions");
  ModeDecision irt_d;
  irt_d.question_id = "q1";
  irt_d.p_q = 0.25;
  irt_d.mode = InteractionMode::cooperation;
  irt_d.source = ModeSource::irt;
  ModeDecision ratio_d;
  ratio_d.question_id = "q2";
  ratio_d.mode = InteractionMode::competition;
  ratio_d.source = ModeSource::ratio;
  write_mode_decisions({irt_d, ratio_d}, f.path);
  const std::string text = read_text_file(f.path);
  CHECK(text ==
        "{\"qid\":\"q1\",\"p_q\":0.25,\"mode\":\"cooperation\","
        "\"source\":\"irt\"}\n"
        "{\"qid\":\"q2\",\"p_q\":null,\"mode\":\"competition\","
        "\"source\":\"ratio\"}\n");
}
