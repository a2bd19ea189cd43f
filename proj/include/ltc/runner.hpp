#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ltc/buffer.hpp"
#include "ltc/envs.hpp"
#include "ltc/patterns.hpp"
#include "ltc/policy.hpp"
#include "ltc/trainer.hpp"
#include "ltc/vocab.hpp"

namespace ltc {

enum class PatternKind { Monologue, Dialogue, Analogue };

inline const char* pattern_kind_name(PatternKind k) {
  switch (k) {
    case PatternKind::Monologue: return "monologue";
    case PatternKind::Dialogue: return "dialogue";
    case PatternKind::Analogue: return "analogue";
  }
  return "?";
}

inline PatternKind parse_pattern_kind(const std::string& s) {
  if (s == "monologue") return PatternKind::Monologue;
  if (s == "dialogue") return PatternKind::Dialogue;
  if (s == "analogue") return PatternKind::Analogue;
  throw Error(ErrorCode::invalid_argument, "unknown pattern kind: '" + s + "'");
}

inline PatternKind default_pattern_for(EnvKind k) {
  switch (k) {
    case EnvKind::GridHouse: return PatternKind::Monologue;
    case EnvKind::KBHop: return PatternKind::Dialogue;
    case EnvKind::ArithGen: return PatternKind::Analogue;
  }
  return PatternKind::Monologue;
}

inline size_t default_n_gen_for(EnvKind k) {
  return k == EnvKind::GridHouse ? 64 : 128;
}

struct RunConfig {
  EnvKind env = EnvKind::GridHouse;
  PatternKind pattern = PatternKind::Monologue;
  EnvParams env_params;
  size_t n_gen = 0;  // 0 resolves to the per-environment default
  size_t n_train = 256;
  size_t max_iterations = 30;
  size_t workers = 1;
  size_t eval_episodes = 100;
  uint64_t run_seed = 0;
  size_t n_expert = 256;
  size_t warmup_epoch_cap = 25;
  double warmup_target = 0.3;
  double warmup_lr = 1e-3;   // cloning runs hotter than the PPO phase
  size_t warmup_batch = 0;   // 0: use the training batch size
  size_t replay_window = 2;
  std::string out_dir;  // empty disables persistence
  bool dump_buffers = false;
  bool verbose = false;

  size_t resolved_n_gen() const { return n_gen == 0 ? default_n_gen_for(env) : n_gen; }

  void validate() const {
    if (workers == 0) throw Error(ErrorCode::invalid_argument, "run config: workers must be >= 1");
    if (resolved_n_gen() < workers)
      throw Error(ErrorCode::invalid_argument, "run config: n_gen must be >= worker count");
  }
};

struct LtcConfig {
  RunConfig run;
  TrainConfig train;
  PolicyConfig policy;  // vocab_size filled from the environment vocabulary
  PatternConfig pattern;
};

// The effective policy configuration of a run: the vocabulary size comes from
// the environment grammar and the run seed folds into the weight-init seed so
// --seed changes the whole run.
inline PolicyConfig resolved_policy_config(const LtcConfig& cfg, const Vocabulary& vocab) {
  PolicyConfig pc = cfg.policy;
  pc.vocab_size = static_cast<uint32_t>(vocab.size());
  pc.seed = mix_seed(pc.seed, cfg.run.run_seed, 0x5EEDull);
  return pc;
}

// Ready-to-run defaults per environment. Numerical reasoning gets a longer
// cloning phase and a wider value/MLP width; the other two run the stock
// model. Generation sizes follow the per-environment defaults.
inline LtcConfig default_config_for(EnvKind env) {
  LtcConfig cfg;
  cfg.run.env = env;
  cfg.run.pattern = default_pattern_for(env);
  // cloning is pushed well past the minimum gate: the reinforcement phase
  // starts from a competent agent and lifts it further, the same shape as
  // warm-starting from a strong instruction-tuned baseline
  cfg.run.warmup_target = 0.65;
  // mean-centered advantages: with sparse rewards a failure-heavy batch
  // otherwise suppresses every action it contains and the policy dissolves
  cfg.train.normalize_advantages = true;
  if (env == EnvKind::ArithGen) {
    cfg.run.n_expert = 512;
    cfg.run.warmup_epoch_cap = 120;
    cfg.run.warmup_batch = 16;
    cfg.run.warmup_lr = 3e-3;
    cfg.run.warmup_target = 0.45;
    cfg.policy.hidden_dim = 256;
  }
  return cfg;
}

struct IterationMetrics {
  int64_t iteration = 0;  // 0 is the warmup row
  double success = 0.0;
  double mean_episode_tokens = 0.0;
  double loss_lm = 0.0;
  double loss_policy = 0.0;
  double loss_value = 0.0;
  double loss_entropy = 0.0;
  size_t buffers_generated = 0;
  double wall_seconds = 0.0;
};

inline nlohmann::json metrics_to_json(const IterationMetrics& m) {
  return nlohmann::json{{"iteration", m.iteration},
                        {"success", m.success},
                        {"mean_episode_tokens", m.mean_episode_tokens},
                        {"loss_lm", m.loss_lm},
                        {"loss_policy", m.loss_policy},
                        {"loss_value", m.loss_value},
                        {"loss_entropy", m.loss_entropy},
                        {"buffers", m.buffers_generated},
                        {"wall_seconds", m.wall_seconds}};
}

inline IterationMetrics metrics_from_json(const nlohmann::json& j) {
  IterationMetrics m;
  m.iteration = j.at("iteration").get<int64_t>();
  m.success = j.at("success").get<double>();
  m.mean_episode_tokens = j.at("mean_episode_tokens").get<double>();
  m.loss_lm = j.at("loss_lm").get<double>();
  m.loss_policy = j.at("loss_policy").get<double>();
  m.loss_value = j.at("loss_value").get<double>();
  m.loss_entropy = j.at("loss_entropy").get<double>();
  m.buffers_generated = j.at("buffers").get<size_t>();
  m.wall_seconds = j.at("wall_seconds").get<double>();
  return m;
}

namespace detail_runner {

// seed tags keep the exploration, evaluation and warmup seed streams disjoint
constexpr uint64_t kExploreTag = 0xE84104EDull;
constexpr uint64_t kEvalTag = 0xE7A1ull;
constexpr uint64_t kWarmupTag = 0x3A9Dull;
constexpr uint64_t kSampleTag = 0x5A3917ull;
constexpr uint64_t kFewShotTag = 0xF377ull;

inline void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_error, "cannot open for write: " + tmp);
    out << content;
    if (!out) throw Error(ErrorCode::io_error, "write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail_runner

// Runs one episode of the configured pattern with the given student and seals
// it against the sealing policy (the same snapshot that generated it).
inline TrajectoryBuffer run_episode(const Policy& policy, const Vocabulary& vocab,
                                    const LtcConfig& cfg, uint64_t episode_seed,
                                    double temperature, bool expert_student) {
  const uint64_t env_seed = mix_seed(episode_seed, 1);
  const uint64_t gen_seed = mix_seed(episode_seed, 2);
  const uint64_t teacher_seed = mix_seed(episode_seed, 3);

  if (cfg.run.pattern == PatternKind::Analogue) {
    const Problem problem = make_problem(env_seed);
    const AgentHandle student =
        expert_student ? make_expert_solver()
                       : make_policy_agent(policy, vocab, cfg.pattern, temperature, gen_seed);
    const TeacherOracle teacher{teacher_seed};
    Session session = run_analogue(student, teacher, problem, cfg.pattern, vocab);
    return seal(session, vocab, policy);
  }
  auto env = make_env(cfg.run.env, env_seed, cfg.run.env_params);
  const AgentHandle student =
      expert_student ? make_expert_agent(*env)
                     : make_policy_agent(policy, vocab, cfg.pattern, temperature, gen_seed);
  Session session =
      cfg.run.pattern == PatternKind::Monologue
          ? run_monologue(student, *env, cfg.pattern, vocab)
          : run_dialogue(student, make_expert_agent(*env, "teacher"), *env, cfg.pattern, vocab);
  return seal(session, vocab, policy);
}

// Greedy evaluation over fresh seeds disjoint from the exploration stream.
// Monologue-style self-talk for step environments (the student plays every
// role); single-shot exact-match answering for analogue tasks. Never touches
// the replay store.
inline double evaluate_policy(const Policy& policy, const Vocabulary& vocab, const LtcConfig& cfg,
                              size_t episodes, uint64_t seed_salt = 0) {
  if (episodes == 0) return 0.0;
  size_t successes = 0;
  for (size_t e = 0; e < episodes; ++e) {
    const uint64_t seed =
        mix_seed(cfg.run.run_seed, detail_runner::kEvalTag, seed_salt, static_cast<uint64_t>(e));
    const uint64_t env_seed = mix_seed(seed, 1);
    const uint64_t gen_seed = mix_seed(seed, 2);
    const AgentHandle agent = make_policy_agent(policy, vocab, cfg.pattern, 0.0, gen_seed);
    if (cfg.run.env == EnvKind::ArithGen) {
      const Problem problem = make_problem(env_seed);
      Session s = Session::start(problem.question);
      const std::string body = agent.produce(s, "", Vocabulary::kThink, &problem);
      const auto parsed = parse_answer(body);
      if (parsed && *parsed == problem.answer) ++successes;
    } else {
      auto env = make_env(cfg.run.env, env_seed, cfg.run.env_params);
      const Session s = run_monologue(agent, *env, cfg.pattern, vocab);
      if (s.terminal_reward() == 1) ++successes;
    }
  }
  return static_cast<double>(successes) / static_cast<double>(episodes);
}

// ------------------------------------------------------------------- explore

struct ExploreResult {
  std::vector<TrajectoryBuffer> buffers;       // merged, worker id then local order
  std::vector<uint64_t> worker_digests;        // post-broadcast replay view digests
  std::vector<size_t> per_worker_counts;
};

using EpisodeRunner = std::function<TrajectoryBuffer(uint64_t seed, size_t worker, size_t index)>;

// W workers draw fresh seeds and run episodes until the global completed
// count reaches n_gen; every in-flight episode still completes, so the total
// lands in [n_gen, n_gen + W - 1]. Workers that throw lose all their buffers
// and the survivors make up the difference. After the join barrier the
// coordinator merges deterministically (worker id, then local index) and
// every worker receives the same merged view.
inline ExploreResult explore_phase(const Policy& policy_snapshot, const Vocabulary& vocab,
                                   const LtcConfig& cfg, int64_t iteration,
                                   const EpisodeRunner& runner_override = nullptr) {
  cfg.run.validate();
  const size_t n_gen = cfg.run.resolved_n_gen();
  const size_t W = cfg.run.workers;

  EpisodeRunner runner = runner_override;
  if (!runner) {
    runner = [&](uint64_t seed, size_t, size_t) {
      return run_episode(policy_snapshot, vocab, cfg, seed, 1.0, false);
    };
  }

  std::vector<std::vector<TrajectoryBuffer>> locals(W);
  std::atomic<size_t> completed{0};

  auto work = [&](size_t w) {
    auto& local = locals[w];
    size_t e = 0;
    try {
      while (completed.load(std::memory_order_acquire) < n_gen) {
        const uint64_t seed = mix_seed(cfg.run.run_seed, detail_runner::kExploreTag,
                                       mix_seed(static_cast<uint64_t>(iteration), w), e);
        local.push_back(runner(seed, w, e));
        ++e;
        completed.fetch_add(1, std::memory_order_release);
      }
    } catch (...) {
      // a failed worker forfeits everything it produced; the others keep
      // drawing episodes until the quota is met again
      completed.fetch_sub(local.size(), std::memory_order_release);
      local.clear();
    }
  };

  if (W == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(W);
    for (size_t w = 0; w < W; ++w) threads.emplace_back(work, w);
    for (auto& t : threads) t.join();  // the barrier
  }

  ExploreResult res;
  for (size_t w = 0; w < W; ++w) {
    res.per_worker_counts.push_back(locals[w].size());
    for (auto& b : locals[w]) res.buffers.push_back(std::move(b));
  }
  if (res.buffers.size() < n_gen)
    throw Error(ErrorCode::invalid_argument,
                "explore: only " + std::to_string(res.buffers.size()) + " of " +
                    std::to_string(n_gen) + " episodes completed (all workers failed?)");

  // broadcast: every worker's view is the merged list
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& b : res.buffers) {
    const auto bytes = serialize(b);
    h = fnv1a(bytes.data(), bytes.size(), h);
  }
  res.worker_digests.assign(W, h);
  return res;
}

// -------------------------------------------------------------------- warmup

// one LM-only pass over the batch in minibatches
inline std::vector<LossReport> train_epoch_single_pass(
    Policy& policy, const std::vector<const TrajectoryBuffer*>& batch, const TrainConfig& cfg) {
  std::vector<LossReport> reports;
  for (size_t start = 0; start < batch.size(); start += cfg.batch_size) {
    const size_t stop = std::min(batch.size(), start + cfg.batch_size);
    std::vector<const TrajectoryBuffer*> mb(batch.begin() + static_cast<std::ptrdiff_t>(start),
                                            batch.begin() + static_cast<std::ptrdiff_t>(stop));
    reports.push_back(train_minibatch(policy, mb, cfg, /*lm_only=*/true));
  }
  return reports;
}

struct WarmupReport {
  size_t expert_episodes = 0;
  std::vector<double> epoch_lm_loss;   // mean LM loss per behavior-cloning epoch
  std::vector<double> epoch_success;   // greedy eval success after each epoch
  double final_success = 0.0;
  bool reached_target = false;
};

// Behavior cloning: expert episodes under the configured pattern, keep the
// positive ones (the expert never fails), and train on the LM loss alone
// until greedy evaluation clears the target or the epoch cap runs out.
// Falling short of the target is reported, not fatal.
inline WarmupReport warmup_bc(Policy& policy, const Vocabulary& vocab, const LtcConfig& cfg,
                              std::vector<TrajectoryBuffer>* keep_buffers = nullptr) {
  WarmupReport rep;
  if (cfg.run.n_expert == 0) return rep;

  std::vector<TrajectoryBuffer> buffers;
  for (size_t e = 0; e < cfg.run.n_expert; ++e) {
    const uint64_t seed = mix_seed(cfg.run.run_seed, detail_runner::kWarmupTag, e);
    auto b = run_episode(policy, vocab, cfg, seed, 0.0, true);
    if (b.terminal_reward() == 1) buffers.push_back(std::move(b));
  }
  rep.expert_episodes = buffers.size();
  if (buffers.empty()) return rep;

  TrainConfig warm_cfg = cfg.train;
  if (cfg.run.warmup_batch > 0) warm_cfg.batch_size = cfg.run.warmup_batch;
  constexpr double kLrFloor = 1e-4;
  for (size_t epoch = 0; epoch < cfg.run.warmup_epoch_cap; ++epoch) {
    // cosine decay over the epoch cap; a flat rate orbits the fact tables the
    // cloning phase has to pin down
    const double t = static_cast<double>(epoch) / static_cast<double>(cfg.run.warmup_epoch_cap);
    warm_cfg.lr = kLrFloor + (cfg.run.warmup_lr - kLrFloor) * 0.5 *
                                 (1.0 + std::cos(3.14159265358979323846 * t));
    std::vector<const TrajectoryBuffer*> order;
    order.reserve(buffers.size());
    for (const auto& b : buffers) order.push_back(&b);
    Rng rng(mix_seed(cfg.run.run_seed, detail_runner::kWarmupTag, 0xE60C4ull, epoch));
    rng.shuffle(order);

    const auto reports = train_epoch_single_pass(policy, order, warm_cfg);
    double lm = 0.0;
    for (const auto& r : reports) lm += r.lm;
    rep.epoch_lm_loss.push_back(lm / static_cast<double>(reports.size()));

    const double success = evaluate_policy(policy, vocab, cfg, cfg.run.eval_episodes);
    rep.epoch_success.push_back(success);
    rep.final_success = success;
    if (cfg.run.verbose)
      std::fprintf(stderr, "[warmup] epoch %zu lm %.4f eval %.3f\n", epoch,
                   rep.epoch_lm_loss.back(), success);
    if (success >= cfg.run.warmup_target) {
      rep.reached_target = true;
      break;
    }
  }
  if (!rep.reached_target && cfg.run.verbose)
    std::fprintf(stderr, "[warmup] epoch cap reached below target %.2f\n", cfg.run.warmup_target);
  if (keep_buffers) *keep_buffers = std::move(buffers);
  return rep;
}

// --------------------------------------------------------------------- train

// Samples from the recency window and runs one PPO epoch set. The replay
// store is read-only here.
inline std::vector<LossReport> train_phase(Policy& policy, const ReplayStore& replay,
                                           const LtcConfig& cfg, int64_t iteration) {
  const auto sample = replay.sample(
      cfg.run.n_train,
      mix_seed(cfg.run.run_seed, detail_runner::kSampleTag, static_cast<uint64_t>(iteration)));
  return train_epoch(policy, sample, cfg.train);
}

// ------------------------------------------------------------------ full loop

// Warmup followed by explore / replay-insert / train / evaluate iterations.
// Metrics row 0 is the warmup; checkpoints and the metrics stream are written
// atomically per iteration when an output directory is configured.
inline std::vector<IterationMetrics> run_ltc(const LtcConfig& cfg_in,
                                             WarmupReport* warmup_out = nullptr) {
  LtcConfig cfg = cfg_in;
  cfg.run.validate();
  cfg.train.validate();
  cfg.pattern.validate();

  const Vocabulary vocab = make_env_vocab();
  cfg.policy = resolved_policy_config(cfg, vocab);
  cfg.pattern.max_context = cfg.policy.context_len;
  Policy policy(cfg.policy);

  const bool persist = !cfg.run.out_dir.empty();
  namespace fs = std::filesystem;
  if (persist) {
    fs::create_directories(cfg.run.out_dir);
    vocab.save(cfg.run.out_dir + "/vocab.txt");
  }

  std::vector<IterationMetrics> metrics;
  auto persist_state = [&](int64_t iter) {
    if (!persist) return;
    std::string lines;
    for (const auto& m : metrics) lines += metrics_to_json(m).dump() + "\n";
    detail_runner::atomic_write(cfg.run.out_dir + "/metrics.jsonl", lines);
    const auto ckpt_bytes = policy.save_bytes();
    detail_runner::atomic_write(cfg.run.out_dir + "/ckpt-" + std::to_string(iter),
                                std::string(ckpt_bytes.begin(), ckpt_bytes.end()));
  };

  using Clock = std::chrono::steady_clock;
  auto t0 = Clock::now();
  const WarmupReport warm = warmup_bc(policy, vocab, cfg);
  if (warmup_out) *warmup_out = warm;
  {
    IterationMetrics m;
    m.iteration = 0;
    m.success = warm.final_success;
    m.loss_lm = warm.epoch_lm_loss.empty() ? 0.0 : warm.epoch_lm_loss.back();
    m.buffers_generated = warm.expert_episodes;
    m.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    metrics.push_back(m);
  }
  persist_state(0);

  ReplayStore replay(cfg.run.replay_window);
  for (size_t iter = 1; iter <= cfg.run.max_iterations; ++iter) {
    t0 = Clock::now();
    const Policy snapshot = policy;  // frozen copy shared by the workers
    auto explored = explore_phase(snapshot, vocab, cfg, static_cast<int64_t>(iter));

    double tokens = 0.0;
    for (const auto& b : explored.buffers) tokens += static_cast<double>(b.size());
    const size_t generated = explored.buffers.size();
    if (persist && cfg.run.dump_buffers) {
      const std::string dir = cfg.run.out_dir + "/buffers/" + std::to_string(iter);
      fs::create_directories(dir);
      for (size_t i = 0; i < explored.buffers.size(); ++i)
        save_buffer(explored.buffers[i], dir + "/b" + std::to_string(i) + ".ltcb");
    }
    replay.insert(static_cast<int64_t>(iter), std::move(explored.buffers));

    const auto reports = train_phase(policy, replay, cfg, static_cast<int64_t>(iter));
    IterationMetrics m;
    m.iteration = static_cast<int64_t>(iter);
    for (const auto& r : reports) {
      m.loss_lm += r.lm;
      m.loss_policy += r.policy;
      m.loss_value += r.value;
      m.loss_entropy += r.entropy;
    }
    if (!reports.empty()) {
      const double nr = static_cast<double>(reports.size());
      m.loss_lm /= nr;
      m.loss_policy /= nr;
      m.loss_value /= nr;
      m.loss_entropy /= nr;
    }
    m.success = evaluate_policy(policy, vocab, cfg, cfg.run.eval_episodes);
    m.mean_episode_tokens = tokens / static_cast<double>(generated);
    m.buffers_generated = generated;
    m.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    metrics.push_back(m);
    persist_state(static_cast<int64_t>(iter));
    if (cfg.run.verbose)
      std::fprintf(stderr,
                   "[iter %zu] eval %.3f lm %.4f policy %+.4f value %.4f entropy %+.5f "
                   "buffers %zu (%.1fs)\n",
                   iter, m.success, m.loss_lm, m.loss_policy, m.loss_value, m.loss_entropy,
                   generated, m.wall_seconds);
  }
  return metrics;
}

// ------------------------------------------------------ prompt-token report

// Average prompt size in tokens over seeded episodes: the tokens the policy
// sees before its first generation. Zero-shot prompts hold only the task
// description; few-shot prompts prepend k expert transcripts (fixed across
// episodes, the usual in-context-learning shape).
inline int64_t report_prompt_tokens(EnvKind kind, size_t few_shot_k, size_t episodes,
                                    uint64_t seed, const Vocabulary& vocab,
                                    const PatternConfig& pattern_cfg, const EnvParams& params = {}) {
  if (episodes == 0) throw Error(ErrorCode::invalid_argument, "prompt report: zero episodes");
  PatternConfig pcfg = pattern_cfg;
  pcfg.max_context = 1u << 20;  // transcripts may exceed one context window

  size_t shot_tokens = 0;
  for (size_t j = 0; j < few_shot_k; ++j) {
    const uint64_t tseed = mix_seed(seed, detail_runner::kFewShotTag, j);
    if (kind == EnvKind::ArithGen) {
      const Problem p = make_problem(tseed);
      const AgentHandle expert = make_expert_solver();
      const TeacherOracle teacher{mix_seed(tseed, 3)};
      Session s = run_analogue(expert, teacher, p, pcfg, vocab);
      shot_tokens += encode_session(s, vocab).size() - 1;  // drop the shared <bos>
    } else {
      auto env = make_env(kind, tseed, params);
      const AgentHandle expert = make_expert_agent(*env);
      Session s = run_monologue(expert, *env, pcfg, vocab);
      shot_tokens += encode_session(s, vocab).size() - 1;
    }
  }

  uint64_t total = 0;
  for (size_t e = 0; e < episodes; ++e) {
    const uint64_t eseed = mix_seed(seed, 0x909Dull, e);
    std::string task;
    if (kind == EnvKind::ArithGen) {
      task = make_problem(eseed).question;
    } else {
      task = make_env(kind, eseed, params)->task_text();
    }
    // <bos> + transcripts + task + <eos> + role tag
    total += 1 + shot_tokens + vocab.encode(task).size() + 1 + 1;
  }
  return static_cast<int64_t>(
      std::llround(static_cast<double>(total) / static_cast<double>(episodes)));
}

}  // namespace ltc
