#include <catch2/catch.hpp>

#include "ltc/patterns.hpp"

using namespace ltc;

namespace {

struct Fixture {
  Vocabulary vocab = make_env_vocab();
  PolicyConfig pcfg;
  Fixture() {
    pcfg.vocab_size = static_cast<uint32_t>(vocab.size());
    pcfg.embed_dim = 16;
    pcfg.hidden_dim = 24;
    pcfg.num_layers = 2;
    pcfg.context_len = 256;
    pcfg.seed = 5;
  }
};

AgentHandle gibberish_agent(std::string label = "student") {
  AgentHandle h;
  h.label = std::move(label);
  h.produce = [](const Session&, const std::string&, TokenId, const Problem*) {
    return std::string("mug mug mug");
  };
  return h;
}

}  // namespace

TEST_CASE_METHOD(Fixture, "monologue with a scripted expert succeeds") {
  PatternConfig cfg;
  auto env = make_env(EnvKind::GridHouse, 11, {});
  const auto expert = make_expert_agent(*env);
  const Session s = run_monologue(expert, *env, cfg, vocab);

  CHECK(s.terminal_reward() == 1);
  CHECK(s.messages().front().source == Source::System);

  SECTION("think, act, response triples with correct sources") {
    for (const auto& m : s.messages())
      CHECK(m.source != Source::Teacher);
    REQUIRE(s.size() >= 4);
    CHECK(s.messages()[1].text.rfind("think:", 0) == 0);
    CHECK(s.messages()[1].source == Source::Agent);
    CHECK(s.messages()[2].text.rfind("act:", 0) == 0);
    CHECK(s.messages()[2].source == Source::Agent);
    CHECK(s.messages()[3].source == Source::System);
  }
  SECTION("nonzero rewards only on system messages") {
    for (const auto& m : s.messages())
      if (m.reward != 0) CHECK(m.source == Source::System);
  }
}

TEST_CASE_METHOD(Fixture, "monologue fails after the step budget") {
  PatternConfig cfg;
  cfg.max_steps = 4;
  auto env = make_env(EnvKind::GridHouse, 3, {});
  const Session s = run_monologue(gibberish_agent(), *env, cfg, vocab);
  CHECK(s.terminal_reward() == -1);
  // the final system response carries the failure
  CHECK(s.messages().back().source == Source::System);
  CHECK(s.messages().back().reward == -1);
  CHECK(s.size() <= 3 * cfg.max_steps + 1);
}

TEST_CASE_METHOD(Fixture, "monologue with an untrained policy stays within bounds") {
  PatternConfig cfg;
  const Policy policy(pcfg);
  for (uint64_t seed = 0; seed < 10; ++seed) {
    auto env = make_env(EnvKind::GridHouse, seed, {});
    const auto agent = make_policy_agent(policy, vocab, cfg, 1.0, seed);
    const Session s = run_monologue(agent, *env, cfg, vocab);
    CHECK(s.size() <= 3 * cfg.max_steps + 1);
    CHECK(s.terminal_reward() == -1);  // an untrained net cannot solve the task
    CHECK(encode_session(s, vocab).size() <= cfg.max_context);
  }
}

TEST_CASE_METHOD(Fixture, "pattern preconditions") {
  PatternConfig cfg;
  auto env = make_env(EnvKind::GridHouse, 1, {});
  env->step("look");
  CHECK_THROWS_AS(run_monologue(gibberish_agent(), *env, cfg, vocab), Error);

  auto env2 = make_env(EnvKind::GridHouse, 1, {});
  CHECK_THROWS_AS(
      run_dialogue(gibberish_agent("same"), gibberish_agent("same"), *env2, cfg, vocab), Error);

  PatternConfig bad;
  bad.max_gen = 0;
  auto env3 = make_env(EnvKind::GridHouse, 1, {});
  CHECK_THROWS_AS(run_monologue(gibberish_agent(), *env3, bad, vocab), Error);
}

TEST_CASE_METHOD(Fixture, "dialogue shape") {
  PatternConfig cfg;
  auto env = make_env(EnvKind::KBHop, 21, {});
  const auto teacher = make_expert_agent(*env, "teacher");
  const auto student = make_expert_agent(*env, "student");
  const Session s = run_dialogue(student, teacher, *env, cfg, vocab);

  CHECK(s.terminal_reward() == 1);
  SECTION("thoughts carry the teacher mask, actions the agent mask") {
    bool saw_teacher = false, saw_agent = false, saw_system = false;
    for (const auto& m : s.messages()) {
      if (m.text.rfind("think:", 0) == 0) {
        CHECK(m.source == Source::Teacher);
        saw_teacher = true;
      }
      if (m.text.rfind("act:", 0) == 0) {
        CHECK(m.source == Source::Agent);
        saw_agent = true;
      }
      if (m.source == Source::System) saw_system = true;
    }
    CHECK(saw_teacher);
    CHECK(saw_agent);
    CHECK(saw_system);
  }
  SECTION("oracle pair solves a 2-hop question within 4 steps") {
    // task + at most 4 think/act/response triples
    CHECK(s.size() <= 1 + 3 * 4);
  }
  SECTION("rewards only on system messages") {
    for (const auto& m : s.messages())
      if (m.reward != 0) CHECK(m.source == Source::System);
  }
}

TEST_CASE_METHOD(Fixture, "analogue shape and rewards") {
  PatternConfig cfg;
  const Problem problem = make_problem(17);
  const TeacherOracle teacher{99};

  SECTION("expert student earns +1 on every graded message") {
    const Session s = run_analogue(make_expert_solver(), teacher, problem, cfg, vocab);
    REQUIRE(s.size() == 1 + 3 * cfg.max_rounds);
    CHECK(s.messages()[0].source == Source::System);
    // round structure: student answer, teacher correction, analogous qa
    for (size_t r = 0; r < cfg.max_rounds; ++r) {
      const auto& ans = s.messages()[1 + 3 * r];
      const auto& fix = s.messages()[2 + 3 * r];
      const auto& qa = s.messages()[3 + 3 * r];
      CHECK(ans.source == Source::Agent);
      CHECK(ans.reward == 1);
      CHECK(ans.text.rfind("think:", 0) == 0);
      CHECK(fix.source == Source::Teacher);
      CHECK(fix.reward == 1);
      CHECK(qa.source == Source::Agent);
      CHECK(qa.reward == 1);
      CHECK(qa.text.rfind("what is", 0) == 0);
      CHECK(qa.text.find("think:") != std::string::npos);
    }
    // no environment here, so no nonzero system rewards at all
    for (const auto& m : s.messages())
      if (m.source == Source::System) CHECK(m.reward == 0);
  }

  SECTION("wrong answers earn -1 but the teacher is always right") {
    const Session s = run_analogue(gibberish_agent(), teacher, problem, cfg, vocab);
    for (size_t r = 0; r < cfg.max_rounds; ++r) {
      CHECK(s.messages()[1 + 3 * r].reward == -1);
      CHECK(s.messages()[2 + 3 * r].reward == 1);   // assume the teacher is correct
      CHECK(s.messages()[3 + 3 * r].reward == -1);
    }
    CHECK(s.terminal_reward() == -1);
  }

  SECTION("analogous questions stay in the template family") {
    const Session s = run_analogue(make_expert_solver(), teacher, problem, cfg, vocab);
    const Problem q1 = teacher.analogue(problem, 0);
    CHECK(s.messages()[3].text.find(q1.question) == 0);
    CHECK(q1.template_id == problem.template_id);
  }
}

TEST_CASE_METHOD(Fixture, "session token streams fit the context budget") {
  PatternConfig cfg;
  cfg.max_context = 96;  // tight budget forces the overflow path
  const Policy policy(pcfg);
  for (uint64_t seed = 0; seed < 8; ++seed) {
    auto env = make_env(EnvKind::GridHouse, seed, {});
    const auto agent = make_policy_agent(policy, vocab, cfg, 1.0, seed);
    const Session s = run_monologue(agent, *env, cfg, vocab);
    CHECK(encode_session(s, vocab).size() <= cfg.max_context);
    CHECK(s.terminal_reward() == -1);
  }
  for (uint64_t seed = 0; seed < 8; ++seed) {
    const auto student = make_policy_agent(policy, vocab, cfg, 1.0, seed);
    const Session s = run_analogue(student, TeacherOracle{3}, make_problem(seed), cfg, vocab);
    CHECK(encode_session(s, vocab).size() <= cfg.max_context);
  }
}
