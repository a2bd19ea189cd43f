#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ltc/buffer.hpp"
#include "ltc/envs.hpp"
#include "ltc/policy.hpp"
#include "ltc/vocab.hpp"

namespace ltc {

// A callable that produces one message body given the session so far, an
// optional prompt prefix (text the message must start from), the role tag the
// reply is prompted with, and the active problem for analogue sessions.
struct AgentHandle {
  std::string label;
  std::function<std::string(const Session&, const std::string& prefix_text, TokenId role_tag,
                            const Problem* problem)>
      produce;
};

struct PatternConfig {
  size_t max_steps = 20;     // monologue / dialogue step budget
  size_t max_rounds = 2;     // analogue rounds
  size_t max_gen = 32;       // generated tokens per agent call
  size_t max_context = 256;  // token budget of a sealed session

  void validate() const {
    if (max_steps == 0 || max_rounds == 0 || max_gen == 0 || max_context == 0)
      throw Error(ErrorCode::invalid_argument, "pattern config: all fields must be positive");
  }
};

// <bos> then every message's tokens followed by <eos>; the exact layout seal()
// produces, so generation prompts match training streams.
inline std::vector<TokenId> encode_session(const Session& s, const Vocabulary& v) {
  std::vector<TokenId> toks{Vocabulary::kBos};
  for (const auto& m : s.messages()) {
    const auto ids = v.encode(m.text);
    toks.insert(toks.end(), ids.begin(), ids.end());
    toks.push_back(Vocabulary::kEos);
  }
  return toks;
}

// Student backed by the policy: prompt is the session stream plus an optional
// encoded prefix and the role tag; generation stops at <eos>.
inline AgentHandle make_policy_agent(const Policy& policy, const Vocabulary& vocab,
                                     const PatternConfig& cfg, double temperature,
                                     uint64_t base_seed, std::string label = "student") {
  auto counter = std::make_shared<uint64_t>(0);
  AgentHandle h;
  h.label = std::move(label);
  h.produce = [&policy, &vocab, max_gen = cfg.max_gen, temperature, base_seed, counter](
                  const Session& s, const std::string& prefix_text, TokenId role_tag,
                  const Problem*) {
    auto toks = encode_session(s, vocab);
    if (!prefix_text.empty()) {
      const auto extra = vocab.encode(prefix_text);
      toks.insert(toks.end(), extra.begin(), extra.end());
    }
    toks.push_back(role_tag);
    const auto res = policy.generate(toks, {Vocabulary::kEos}, max_gen,
                                     mix_seed(base_seed, (*counter)++), temperature);
    return vocab.decode(res.tokens);
  };
  return h;
}

// Scripted stand-in for a strong agent: answers with the environment's expert
// plan, or the canonical solution when an analogue problem is given.
inline AgentHandle make_expert_agent(const Env& env, std::string label = "expert") {
  AgentHandle h;
  h.label = std::move(label);
  h.produce = [&env](const Session&, const std::string&, TokenId, const Problem* problem) {
    if (problem) return canonical_solution(*problem);
    return env.expert_action();
  };
  return h;
}

// Expert for analogue sessions without an environment.
inline AgentHandle make_expert_solver(std::string label = "expert") {
  AgentHandle h;
  h.label = std::move(label);
  h.produce = [](const Session&, const std::string&, TokenId, const Problem* problem) {
    if (!problem)
      throw Error(ErrorCode::invalid_argument, "expert solver called without a problem");
    return canonical_solution(*problem);
  };
  return h;
}

namespace detail {

constexpr size_t kTailReserve = 6;  // room for a terminal failure message

inline std::string with_tag(const std::string& tag, const std::string& body) {
  return body.empty() ? tag : tag + " " + body;
}

inline size_t session_tokens(const Session& s, const Vocabulary& v) {
  return encode_session(s, v).size();
}

// true when a generation of up to max_gen tokens (plus prefix, tag and eos)
// still fits the context with the tail reserve
inline bool room_for_call(const Session& s, const Vocabulary& v, const PatternConfig& cfg,
                          size_t prefix_tokens, size_t obs_reserve) {
  const size_t need = session_tokens(s, v) + prefix_tokens + 1 + cfg.max_gen + 1 + obs_reserve +
                      kTailReserve;
  return need <= cfg.max_context;
}

// appends the environment response, degrading to a terminal failure when the
// observation itself would overflow the context
inline bool append_response(Session& s, const Vocabulary& v, const PatternConfig& cfg,
                            const std::string& obs, int reward) {
  const size_t need = session_tokens(s, v) + v.encode(obs).size() + 1 + kTailReserve;
  if (need > cfg.max_context) {
    s.append("task failed .", Source::System, -1);
    return false;
  }
  s.append(obs, Source::System, reward);
  return true;
}

}  // namespace detail

// Single-agent self-talk: think and act messages from one agent, environment
// responses carry the rewards. Ends on the first nonzero reward; if the step
// budget runs out, the final response carries -1.
inline Session run_monologue(const AgentHandle& agent, Env& env, const PatternConfig& cfg,
                             const Vocabulary& vocab) {
  cfg.validate();
  if (env.steps_taken() != 0 || env.done())
    throw Error(ErrorCode::invalid_argument, "run_monologue: environment must be freshly reset");
  // worst observed response: a kbhop search over a busy subject
  constexpr size_t kObsReserve = 48;
  Session s = Session::start(env.task_text());
  for (size_t step = 0; step < cfg.max_steps; ++step) {
    if (!detail::room_for_call(s, vocab, cfg, 0, 0)) break;
    const std::string thought = agent.produce(s, "", Vocabulary::kThink, nullptr);
    s.append(detail::with_tag("think:", thought), Source::Agent, 0);

    if (!detail::room_for_call(s, vocab, cfg, 0, kObsReserve)) break;
    const std::string action = agent.produce(s, "", Vocabulary::kAct, nullptr);
    s.append(detail::with_tag("act:", action), Source::Agent, 0);

    StepResult r = env.step(action);
    const bool last_step = step + 1 == cfg.max_steps;
    const int reward = (r.reward == 0 && last_step) ? -1 : r.reward;
    if (!detail::append_response(s, vocab, cfg, r.observation, reward)) return s;
    if (reward != 0) return s;
  }
  if (s.terminal_reward() == 0) s.append("task failed .", Source::System, -1);
  return s;
}

// Teacher thinks, student acts, the environment responds.
inline Session run_dialogue(const AgentHandle& student, const AgentHandle& teacher, Env& env,
                            const PatternConfig& cfg, const Vocabulary& vocab) {
  cfg.validate();
  if (student.label == teacher.label)
    throw Error(ErrorCode::invalid_argument, "run_dialogue: student and teacher must be distinct");
  if (env.steps_taken() != 0 || env.done())
    throw Error(ErrorCode::invalid_argument, "run_dialogue: environment must be freshly reset");
  constexpr size_t kObsReserve = 48;
  Session s = Session::start(env.task_text());
  for (size_t step = 0; step < cfg.max_steps; ++step) {
    if (!detail::room_for_call(s, vocab, cfg, 0, 0)) break;
    const std::string thought = teacher.produce(s, "", Vocabulary::kThink, nullptr);
    s.append(detail::with_tag("think:", thought), Source::Teacher, 0);

    if (!detail::room_for_call(s, vocab, cfg, 0, kObsReserve)) break;
    const std::string action = student.produce(s, "", Vocabulary::kAct, nullptr);
    s.append(detail::with_tag("act:", action), Source::Agent, 0);

    StepResult r = env.step(action);
    const bool last_step = step + 1 == cfg.max_steps;
    const int reward = (r.reward == 0 && last_step) ? -1 : r.reward;
    if (!detail::append_response(s, vocab, cfg, r.observation, reward)) return s;
    if (reward != 0) return s;
  }
  if (s.terminal_reward() == 0) s.append("task failed .", Source::System, -1);
  return s;
}

// Grades analogue answers and generates follow-up problems deterministically.
struct TeacherOracle {
  uint64_t seed = 0;

  std::pair<int, std::string> check(const Problem& p, const std::string& answer_text) const {
    return teacher_check(p, answer_text);
  }
  Problem analogue(const Problem& p, uint64_t round) const {
    return teacher_analogue(p, mix_seed(seed, round));
  }
};

// Teacher-student rounds: the student answers, the teacher grades and gives
// the corrected solution (always rewarded +1), then poses an analogous
// problem the student answers inline. No environment is involved; rewards sit
// on agent and teacher messages.
inline Session run_analogue(const AgentHandle& student, const TeacherOracle& teacher,
                            const Problem& problem, const PatternConfig& cfg,
                            const Vocabulary& vocab) {
  cfg.validate();
  Session s = Session::start(problem.question);
  Problem current = problem;
  for (size_t round = 0; round < cfg.max_rounds; ++round) {
    if (!detail::room_for_call(s, vocab, cfg, 0, 0)) break;
    const std::string answer = student.produce(s, "", Vocabulary::kThink, &current);
    const auto [reward, corrected] = teacher.check(current, answer);
    s.append(detail::with_tag("think:", answer), Source::Agent, reward);

    const size_t corrected_tokens = vocab.encode(corrected).size();
    if (detail::session_tokens(s, vocab) + corrected_tokens + 1 + detail::kTailReserve >
        cfg.max_context)
      break;
    s.append(corrected, Source::Teacher, 1);

    const Problem next = teacher.analogue(current, round);
    const size_t question_tokens = vocab.encode(next.question).size();
    if (!detail::room_for_call(s, vocab, cfg, question_tokens, 0)) break;
    const std::string answer2 = student.produce(s, next.question, Vocabulary::kThink, &next);
    const auto [reward2, corrected2] = teacher.check(next, answer2);
    (void)corrected2;
    s.append(next.question + " " + detail::with_tag("think:", answer2), Source::Agent, reward2);
    current = next;
  }
  return s;
}

}  // namespace ltc
