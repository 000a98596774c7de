#include "doctest.h"

#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "agents.hpp"
#include "errors.hpp"
#include "interaction.hpp"
#include "prompts.hpp"
#include "rollout.hpp"
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

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  FAIL("expected an Error");
  return "";
}

const PromptLibrary& library() {
  static PromptLibrary lib = PromptLibrary::load(ILR_PROMPTS_SOURCE_DIR);
  return lib;
}

QuestionRecord question(const std::string& id, const std::string& text,
                        const std::string& gold, double difficulty) {
  QuestionRecord q;
  q.id = id;
  q.text = text;
  q.gold_answer = gold;
  q.difficulty = difficulty;
  return q;
}

std::vector<AgentHandle> perfect_pair() {
  SyntheticConfig cfg;
  cfg.gamma = 1.0;
  cfg.seed = 1;
  SyntheticConfig cfg2 = cfg;
  cfg2.seed = 2;
  return {make_synthetic_agent("a", cfg), make_synthetic_agent("b", cfg2)};
}

RolloutConfig small_rollout(int n) {
  RolloutConfig config;
  config.n = n;
  config.n_min = 1;
  config.parallelism = 1;
  config.seed = 99;
  config.mode.source = ModeSource::ratio;
  config.mode.p = 1.0;  // everything cooperates; no profiles needed
  return config;
}

std::string tmp_path(const std::string& tag) {
  return (std::filesystem::temp_directory_path() /
          (tag + "." + std::to_string(::getpid()) + ".jsonl"))
      .string();
}

struct RewardServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  explicit RewardServer(httplib::Server::Handler handler) {
    server.Post("/score", std::move(handler));
    port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~RewardServer() {
    server.stop();
    thread.join();
  }
  std::string endpoint() const {
    return "http://127.0.0.1:" + std::to_string(port) + "/score";
  }
};

HttpReward fast_reward(const std::string& endpoint) {
  HttpReward cfg;
  cfg.endpoint = endpoint;
  cfg.retry.max_attempts = 3;
  cfg.retry.backoff_base_ms = 0;
  cfg.timeout_ms = 5000;
  return cfg;
}

}  // namespace

TEST_CASE("oracle rewards judge the boxed answer against gold") {
  const std::vector<ScoreItem> items{
      {"prompt 1", "I find boxed{4}.", "4"},
      {"prompt 2", "I find boxed{5}.", "4"},
      {"prompt 3", "no box at all", "4"},
  };
  const auto scores = score_rewards(items, OracleReward{});
  CHECK(scores == std::vector<double>{1.0, 0.0, 0.0});

  // A custom checker replaces the boxed-answer logic wholesale.
  OracleReward contrarian;
  contrarian.checker = [](const std::string& response, const std::string&) {
    return response.find("5") != std::string::npos;
  };
  CHECK(score_rewards(items, contrarian) ==
        std::vector<double>{0.0, 1.0, 0.0});

  CHECK(score_rewards({}, OracleReward{}).empty());
}

TEST_CASE("http rewards post prompt and response but never gold") {
  nlohmann::json captured;
  std::mutex mu;
  RewardServer server([&](const httplib::Request& req, httplib::Response& res) {
    {
      std::lock_guard<std::mutex> lock(mu);
      captured = nlohmann::json::parse(req.body);
    }
    res.set_content("{\"scores\": [0.25, 1.0]}", "application/json");
  });
  const std::vector<ScoreItem> items{{"p1", "r1", "secret-gold"},
                                     {"p2", "r2", "secret-gold"}};
  const auto scores =
      score_rewards(items, fast_reward(server.endpoint()));
  CHECK(scores == std::vector<double>{0.25, 1.0});

  std::lock_guard<std::mutex> lock(mu);
  REQUIRE(captured["items"].size() == 2);
  CHECK(captured["items"][0]["prompt"] == "p1");
  CHECK(captured["items"][0]["response"] == "r1");
  CHECK(captured["items"][0].size() == 2);  // no gold field
  CHECK(captured.dump().find("secret-gold") == std::string::npos);
}

TEST_CASE("http reward transport failures retry, then surface") {
  std::atomic<int> calls{0};
  RewardServer flaky([&](const httplib::Request&, httplib::Response& res) {
    if (calls.fetch_add(1) == 0) {
      res.status = 500;
    } else {
      res.set_content("{\"scores\": [1.0]}", "application/json");
    }
  });
  const std::vector<ScoreItem> items{{"p", "r", "g"}};
  CHECK(score_rewards(items, fast_reward(flaky.endpoint())) ==
        std::vector<double>{1.0});
  CHECK(calls.load() == 2);

  std::atomic<int> always_down_calls{0};
  RewardServer down([&](const httplib::Request&, httplib::Response& res) {
    always_down_calls.fetch_add(1);
    res.status = 503;
  });
  const std::string msg = message_of(
      [&] { score_rewards(items, fast_reward(down.endpoint())); });
  CHECK(msg.find("after 3 attempts") != std::string::npos);
  CHECK(always_down_calls.load() == 3);

  std::atomic<int> not_found_calls{0};
  RewardServer lost([&](const httplib::Request&, httplib::Response& res) {
    not_found_calls.fetch_add(1);
    res.status = 404;
  });
  const std::string msg404 = message_of(
      [&] { score_rewards(items, fast_reward(lost.endpoint())); });
  CHECK(msg404.find("not retryable") != std::string::npos);
  CHECK(not_found_calls.load() == 1);
}

TEST_CASE("http reward replies are validated strictly") {
  const std::vector<ScoreItem> items{{"p1", "r1", "g"}, {"p2", "r2", "g"}};

  RewardServer missing([](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"grades\": [1, 0]}", "application/json");
  });
  CHECK(code_of([&] {
          score_rewards(items, fast_reward(missing.endpoint()));
        }) == ErrorCode::parse);

  RewardServer short_reply([](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"scores\": [1.0]}", "application/json");
  });
  const std::string msg = message_of(
      [&] { score_rewards(items, fast_reward(short_reply.endpoint())); });
  CHECK(code_of([&] {
          score_rewards(items, fast_reward(short_reply.endpoint()));
        }) == ErrorCode::schema);
  CHECK(msg.find("1 scores for 2 items") != std::string::npos);

  RewardServer stringy([](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"scores\": [\"good\", \"bad\"]}", "application/json");
  });
  CHECK(code_of([&] {
          score_rewards(items, fast_reward(stringy.endpoint()));
        }) == ErrorCode::parse);
}

TEST_CASE("run_rollout emits n records per agent per question") {
  const std::vector<QuestionRecord> dataset{
      question("q1", "What is 2 + 2?", "4", 0.4),
      question("q2", "What is 5 + 5?", "10", 0.8)};
  const auto agents = perfect_pair();
  const RolloutConfig config = small_rollout(2);

  const RolloutResult result =
      run_rollout(dataset, agents, {}, config, OracleReward{}, library());
  CHECK(result.dropped_samples.empty());
  CHECK(result.dropped_questions.empty());
  REQUIRE(result.records.size() == 2 * 2 * 2);

  // Question-major, then agent order, then sample index.
  const auto& r = result.records;
  CHECK(r[0].question_id == "q1");
  CHECK(r[0].agent_id == "a");
  CHECK(r[0].sample_index == 0);
  CHECK(r[1].agent_id == "a");
  CHECK(r[1].sample_index == 1);
  CHECK(r[2].agent_id == "b");
  CHECK(r[4].question_id == "q2");

  // Everyone is right: rewards 1.0, calibration is the identity, advantages
  // vanish, and the update is always taken.
  for (const auto& rec : r) {
    CHECK(rec.reward_raw == 1.0);
    CHECK(rec.reward_cal == 1.0);
    CHECK(rec.advantage == 0.0);
    CHECK(rec.reason == SelectionReason::took_updated);
    CHECK(rec.mode == InteractionMode::cooperation);
    REQUIRE(rec.prompt.size() == 5);  // the full fusion-stage conversation
    CHECK(rec.prompt[0].role == Role::user);
    CHECK(rec.prompt[4].role == Role::user);
    CHECK(rec.response.find("boxed{") != std::string::npos);
  }

  // Decisions follow dataset order; the ratio source records no probability.
  REQUIRE(result.decisions.size() == 2);
  CHECK(result.decisions[0].question_id == "q1");
  CHECK(result.decisions[1].question_id == "q2");
  CHECK(result.decisions[0].source == ModeSource::ratio);
  CHECK_FALSE(result.decisions[0].p_q.has_value());
}

TEST_CASE("irt-sourced decisions carry the group solve probability") {
  const std::vector<QuestionRecord> dataset{
      question("hard", "A hard one.", "1", 0.9),
      question("easy", "An easy one.", "2", 0.3)};
  const auto agents = perfect_pair();
  const std::vector<AbilityProfile> profiles{{"a", 0.59, "val", 4},
                                             {"b", 0.75, "val", 4}};
  RolloutConfig config = small_rollout(1);
  config.mode.source = ModeSource::irt;

  const RolloutResult result =
      run_rollout(dataset, agents, profiles, config, OracleReward{}, library());
  REQUIRE(result.decisions.size() == 2);
  const auto& hard = result.decisions[0];
  CHECK(hard.question_id == "hard");
  CHECK(hard.mode == InteractionMode::cooperation);
  CHECK(hard.p_q.value() == 0.40390503776045777);
  CHECK(hard.per_agent_p.at("a") == 0.37121686178310914);
  CHECK(hard.per_agent_p.at("b") == 0.4365932137378064);
  const auto& easy = result.decisions[1];
  CHECK(easy.mode == InteractionMode::competition);
  CHECK(easy.p_q.value() == 0.65162560139344494);

  // Records inherit their question's decided mode.
  for (const auto& rec : result.records) {
    CHECK(rec.mode == (rec.question_id == "hard"
                           ? InteractionMode::cooperation
                           : InteractionMode::competition));
  }

  config.mode.source = ModeSource::irt;
  CHECK(code_of([&] {
          run_rollout(dataset, agents, {}, config, OracleReward{}, library());
        }) == ErrorCode::invalid_argument);
}

namespace {

// Scripts one agent's full cooperative protocol for sample k against a known
// peer initial answer.
AgentHandle scripted_cycle_agent(const std::string& id,
                                 const QuestionRecord& q, int sample,
                                 const std::string& own_initial,
                                 const std::string& peer_id,
                                 const std::string& peer_initial,
                                 const std::string& own_analysis,
                                 const std::string& own_updated) {
  const auto sharing = sharing_messages(q, library());
  const std::vector<ChatMessage> analysis{
      {Role::user,
       render(library().get(prompt_names::analysis_cooperation),
              {{"peer_contributions",
                format_peer_block({{peer_id, peer_initial}})}})}};
  std::vector<ChatMessage> fusion = sharing;
  fusion.push_back({Role::assistant, own_initial});
  fusion.push_back(analysis[0]);
  fusion.push_back({Role::assistant, own_analysis});
  fusion.push_back({Role::user, render(library().get(prompt_names::idea_fusion),
                                       {{"question", q.text}})});
  ScriptedConfig cfg;
  cfg.responses[{prompt_key(sharing), sample}] = own_initial;
  cfg.responses[{prompt_key(analysis), sample}] = own_analysis;
  cfg.responses[{prompt_key(fusion), sample}] = own_updated;
  return make_scripted_agent(id, cfg);
}

// What a gamma >= 1 synthetic agent says for this gold answer.
std::string synthetic_gold_text(const std::string& gold) {
  return "Working through the problem one step at a time and combining the "
         "intermediate results gives a single value. The final answer is "
         "boxed{" +
         gold + "}.";
}

}  // namespace

TEST_CASE("a failed cycle drops that sample for every agent") {
  const QuestionRecord q = question("q1", "What is 2 + 2?", "4", 0.5);
  SyntheticConfig perfect;
  perfect.gamma = 1.0;
  // Agent b is scripted for sample 0 only; sample 1 fails in Sharing.
  const std::vector<AgentHandle> agents{
      make_synthetic_agent("a", perfect),
      scripted_cycle_agent("b", q, 0, "I think boxed{9}.", "a",
                           synthetic_gold_text("4"), "Reconsidering.",
                           "Now I agree: boxed{4}.")};
  const RolloutConfig config = small_rollout(2);

  const RolloutResult result =
      run_rollout({q}, agents, {}, config, OracleReward{}, library());
  REQUIRE(result.dropped_samples.size() == 1);
  CHECK(result.dropped_samples[0].question_id == "q1");
  CHECK(result.dropped_samples[0].sample_index == 1);
  CHECK(result.dropped_samples[0].reason.find("agent 'b' failed in Sharing") !=
        std::string::npos);
  CHECK(result.dropped_questions.empty());

  // Only sample 0 survives, for both agents, keeping groups aligned.
  REQUIRE(result.records.size() == 2);
  CHECK(result.records[0].agent_id == "a");
  CHECK(result.records[0].sample_index == 0);
  CHECK(result.records[1].agent_id == "b");
  CHECK(result.records[1].sample_index == 0);
  // b's initial was wrong and the update fixed it: the update is taken.
  CHECK(result.records[1].response == "Now I agree: boxed{4}.");
  CHECK(result.records[1].reason == SelectionReason::took_updated);
  CHECK(result.records[1].reward_raw == 1.0);
}

TEST_CASE("questions under the survival floor are excluded entirely") {
  const QuestionRecord q = question("q1", "What is 2 + 2?", "4", 0.5);
  SyntheticConfig perfect;
  perfect.gamma = 1.0;
  const std::vector<AgentHandle> agents{
      make_synthetic_agent("a", perfect),
      scripted_cycle_agent("b", q, 0, "I think boxed{9}.", "a",
                           synthetic_gold_text("4"), "Reconsidering.",
                           "Now I agree: boxed{4}.")};
  RolloutConfig config = small_rollout(2);
  config.n_min = 2;

  const RolloutResult result =
      run_rollout({q}, agents, {}, config, OracleReward{}, library());
  CHECK(result.records.empty());
  CHECK(result.dropped_samples.empty());  // subsumed by the question drop
  REQUIRE(result.dropped_questions.size() == 1);
  CHECK(result.dropped_questions[0].question_id == "q1");
  CHECK(result.dropped_questions[0].reason ==
        "only 1 of 2 samples survived (n_min=2)");
}

TEST_CASE("a failing reward endpoint drops the question, not the run") {
  RewardServer broken([](const httplib::Request&, httplib::Response& res) {
    res.status = 404;
  });
  const std::vector<QuestionRecord> dataset{
      question("q1", "What is 2 + 2?", "4", 0.5)};
  const RolloutResult result =
      run_rollout(dataset, perfect_pair(), {}, small_rollout(1),
                  fast_reward(broken.endpoint()), library());
  CHECK(result.records.empty());
  REQUIRE(result.dropped_questions.size() == 1);
  CHECK(result.dropped_questions[0].reason.find("reward scoring failed") !=
        std::string::npos);
}

TEST_CASE("run_rollout validates its inputs") {
  const std::vector<QuestionRecord> dataset{
      question("q1", "What is 2 + 2?", "4", 0.5)};
  const auto agents = perfect_pair();
  const RolloutConfig config = small_rollout(2);
  SyntheticConfig cfg;

  CHECK(code_of([&] {
          run_rollout(dataset, {make_synthetic_agent("a", cfg)}, {}, config,
                      OracleReward{}, library());
        }) == ErrorCode::invalid_argument);
  CHECK(code_of([&] {
          run_rollout({}, agents, {}, config, OracleReward{}, library());
        }) == ErrorCode::invalid_argument);
  RolloutConfig bad = config;
  bad.n = 0;
  CHECK(code_of([&] {
          run_rollout(dataset, agents, {}, bad, OracleReward{}, library());
        }) == ErrorCode::invalid_argument);
  bad = config;
  bad.n_min = 3;  // > n
  CHECK(code_of([&] {
          run_rollout(dataset, agents, {}, bad, OracleReward{}, library());
        }) == ErrorCode::invalid_argument);
  QuestionRecord bare = dataset[0];
  bare.difficulty.reset();
  CHECK(code_of([&] {
          run_rollout({bare}, agents, {}, config, OracleReward{}, library());
        }) == ErrorCode::invalid_argument);
}

TEST_CASE("training records survive write, read, and recalibration") {
  const std::vector<QuestionRecord> dataset{
      question("q1", "What is 2 + 2?", "4", 0.5),
      question("q2", "What is 3 + 3?", "6", 0.7)};
  SyntheticConfig mid_a;
  mid_a.gamma = 0.5;
  mid_a.seed = 11;
  SyntheticConfig mid_b;
  mid_b.gamma = 0.7;
  mid_b.seed = 12;
  const std::vector<AgentHandle> agents{make_synthetic_agent("a", mid_a),
                                        make_synthetic_agent("b", mid_b)};
  const RolloutConfig config = small_rollout(4);
  const RolloutResult result =
      run_rollout(dataset, agents, {}, config, OracleReward{}, library());
  REQUIRE(result.records.size() == 16);

  const std::string path = tmp_path("records");
  write_training_records(result.records, path);
  const auto loaded = read_training_records(path);
  REQUIRE(loaded.size() == result.records.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].agent_id == result.records[i].agent_id);
    CHECK(loaded[i].question_id == result.records[i].question_id);
    CHECK(loaded[i].sample_index == result.records[i].sample_index);
    CHECK(loaded[i].mode == result.records[i].mode);
    CHECK(loaded[i].prompt.size() == result.records[i].prompt.size());
    CHECK(loaded[i].response == result.records[i].response);
    CHECK(loaded[i].reward_raw == result.records[i].reward_raw);
    CHECK(loaded[i].reward_cal == result.records[i].reward_cal);
    CHECK(loaded[i].advantage == result.records[i].advantage);
    CHECK(loaded[i].reason == result.records[i].reason);
  }

  // Replaying calibration over the file reproduces the derived fields
  // bit for bit, and the rewritten file is byte-identical.
  const auto replayed = recalibrate_records(loaded);
  const std::string replay_path = tmp_path("records_replayed");
  write_training_records(replayed, replay_path);
  CHECK(read_text_file(replay_path) == read_text_file(path));
  std::remove(path.c_str());
  std::remove(replay_path.c_str());
}

TEST_CASE("training record serialization is byte-stable") {
  TrainingRecord rec;
  rec.agent_id = "a";
  rec.question_id = "q1";
  rec.sample_index = 0;
  rec.mode = InteractionMode::cooperation;
  rec.prompt = {{Role::user, "p"}};
  rec.response = "r";
  rec.reward_raw = 1.0;
  rec.reward_cal = 1.5;
  rec.advantage = 0.0;
  rec.reason = SelectionReason::took_updated;

  const std::string path = tmp_path("one_record");
  write_training_records({rec}, path);
  CHECK(read_text_file(path) ==
        "{\"agent\":\"a\",\"qid\":\"q1\",\"k\":0,\"mode\":\"cooperation\","
        "\"prompt\":[{\"role\":\"user\",\"content\":\"p\"}],"
        "\"response\":\"r\",\"reward_raw\":1.0,\"reward_cal\":1.5,"
        "\"advantage\":0.0,\"reason\":\"took_updated\"}\n");
  std::remove(path.c_str());
}

TEST_CASE("read_training_records rejects malformed lines with context") {
  const std::string path = tmp_path("bad_records");
  write_text_file_atomic(path, "{\"agent\":\"a\",\"qid\":\"q1\"}\n");
  const std::string msg = message_of([&] { read_training_records(path); });
  CHECK(code_of([&] { read_training_records(path); }) == ErrorCode::schema);
  CHECK(msg.find(":1") != std::string::npos);

  write_text_file_atomic(
      path,
      "{\"agent\":\"a\",\"qid\":\"q1\",\"k\":0,\"mode\":\"cooperation\","
      "\"prompt\":[{\"role\":\"user\"}],\"response\":\"r\","
      "\"reward_raw\":1.0,\"reward_cal\":1.0,\"advantage\":0.0,"
      "\"reason\":\"took_updated\"}\n");
  CHECK(code_of([&] { read_training_records(path); }) == ErrorCode::schema);
  std::remove(path.c_str());
}

TEST_CASE("export enforces unique record keys and writes the manifest") {
  TrainingRecord rec;
  rec.agent_id = "a";
  rec.question_id = "q1";
  rec.sample_index = 0;
  rec.prompt = {{Role::user, "p"}};
  rec.response = "r";

  ExportManifest manifest;
  manifest.config_hash = "abc";
  manifest.seed = 9;
  manifest.n_questions = 1;
  manifest.n_records = 2;
  manifest.dropped_samples = 1;
  manifest.dropped_questions = {"q9"};

  const std::string path = tmp_path("export");
  TrainingRecord other = rec;
  other.sample_index = 1;
  export_training_records({rec, other}, manifest, path);
  CHECK(read_text_file(path + ".manifest.json") == R"({
  "config_hash": "abc",
  "seed": 9,
  "n_questions": 1,
  "n_records": 2,
  "dropped": {
    "samples": 1,
    "questions": [
      "q9"
    ]
  }
}
)");

  const std::string msg = message_of(
      [&] { export_training_records({rec, rec}, manifest, path); });
  CHECK(msg.find("(a, q1, 0)") != std::string::npos);
  std::remove(path.c_str());
  std::remove((path + ".manifest.json").c_str());
}

TEST_CASE("recalibration rejects structurally broken record sets") {
  CHECK(code_of([] { recalibrate_records({}); }) == ErrorCode::schema);

  auto rec = [](const std::string& agent, const std::string& qid, int k) {
    TrainingRecord r;
    r.agent_id = agent;
    r.question_id = qid;
    r.sample_index = k;
    r.reward_raw = 1.0;
    return r;
  };

  // Single-agent question.
  const std::string solo_msg = message_of(
      [&] { recalibrate_records({rec("a", "q1", 0), rec("a", "q1", 1)}); });
  CHECK(solo_msg.find("only 1 agent(s)") != std::string::npos);

  // Duplicate sample index within one agent's group.
  CHECK(message_of([&] {
          recalibrate_records({rec("a", "q1", 0), rec("a", "q1", 0),
                               rec("b", "q1", 0), rec("b", "q1", 1)});
        }).find("duplicate sample index") != std::string::npos);

  // Sample indices not aligned across agents.
  CHECK(message_of([&] {
          recalibrate_records({rec("a", "q1", 0), rec("a", "q1", 1),
                               rec("b", "q1", 0), rec("b", "q1", 2)});
        }).find("not aligned") != std::string::npos);
}
