#pragma once

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "ltc/config.hpp"
#include "ltc/runner.hpp"

namespace ltc {

namespace detail_cli {

struct CommonFlags {
  std::string config_path;
  std::string env, pattern;
  int64_t seed = -1;
  int64_t iterations = -1;
  int64_t workers = -1;
  std::string out_dir;
  bool quiet = false;
};

inline void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "configuration file (key = value with sections)");
  cmd->add_option("--env", f.env, "environment: gridhouse | kbhop | arithgen");
  cmd->add_option("--pattern", f.pattern, "pattern: monologue | dialogue | analogue");
  cmd->add_option("--seed", f.seed, "run seed");
  cmd->add_option("--iterations", f.iterations, "iteration count");
  cmd->add_option("--workers", f.workers, "exploration worker count");
  cmd->add_option("--out", f.out_dir, "output directory");
  cmd->add_flag("--quiet", f.quiet, "suppress progress lines");
}

inline LtcConfig build_config(const CommonFlags& f) {
  LtcConfig cfg;
  if (!f.config_path.empty()) {
    cfg = load_config(f.config_path);
    if (!f.env.empty()) {
      cfg.run.env = parse_env_kind(f.env);
      if (f.pattern.empty()) cfg.run.pattern = default_pattern_for(cfg.run.env);
    }
  } else if (!f.env.empty()) {
    // no file: start from the per-environment defaults
    cfg = default_config_for(parse_env_kind(f.env));
  }
  if (!f.pattern.empty()) cfg.run.pattern = parse_pattern_kind(f.pattern);
  if (f.seed >= 0) cfg.run.run_seed = static_cast<uint64_t>(f.seed);
  if (f.iterations >= 0) cfg.run.max_iterations = static_cast<size_t>(f.iterations);
  if (f.workers >= 0) cfg.run.workers = static_cast<size_t>(f.workers);
  if (!f.out_dir.empty()) cfg.run.out_dir = f.out_dir;
  cfg.run.verbose = !f.quiet;
  // the output directory can also come from the environment
  if (cfg.run.out_dir.empty()) {
    if (const char* d = std::getenv("LTC_OUT_DIR")) cfg.run.out_dir = d;
  }
  return cfg;
}

inline Policy load_checkpoint(const std::string& path) {
  if (path.empty()) throw Error(ErrorCode::usage, "missing --ckpt");
  return Policy::load(path);
}

}  // namespace detail_cli

// Entry point used by the binary and by tests. Exit codes: 0 success,
// 1 usage error, 2 runtime error.
inline int dispatch(const std::vector<std::string>& args) {
  using detail_cli::CommonFlags;
  CLI::App app{"ltc: communication-driven agent training at desk scale"};
  app.require_subcommand(1);

  // run ----------------------------------------------------------------
  CommonFlags run_f;
  auto* cmd_run = app.add_subcommand("run", "full training loop: warmup, explore, train, eval");
  detail_cli::add_common(cmd_run, run_f);

  // warmup -------------------------------------------------------------
  CommonFlags warm_f;
  auto* cmd_warm = app.add_subcommand("warmup", "behavior-cloning warmup only, saves ckpt-0");
  detail_cli::add_common(cmd_warm, warm_f);

  // explore ------------------------------------------------------------
  CommonFlags exp_f;
  std::string exp_ckpt;
  int64_t exp_iter = 1;
  auto* cmd_explore = app.add_subcommand("explore", "one exploration phase, dump buffers");
  detail_cli::add_common(cmd_explore, exp_f);
  cmd_explore->add_option("--ckpt", exp_ckpt, "policy checkpoint")->required();
  cmd_explore->add_option("--iter", exp_iter, "iteration index for the seed schedule");

  // train --------------------------------------------------------------
  CommonFlags train_f;
  std::string train_ckpt, train_buffers, train_out_ckpt;
  auto* cmd_train = app.add_subcommand("train", "one training phase from dumped buffers");
  detail_cli::add_common(cmd_train, train_f);
  cmd_train->add_option("--ckpt", train_ckpt, "policy checkpoint")->required();
  cmd_train->add_option("--buffers", train_buffers, "directory of .ltcb files")->required();
  cmd_train->add_option("--out-ckpt", train_out_ckpt, "path for the updated checkpoint");

  // eval ---------------------------------------------------------------
  CommonFlags eval_f;
  std::string eval_ckpt;
  int64_t eval_episodes = 100;
  auto* cmd_eval = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
  detail_cli::add_common(cmd_eval, eval_f);
  cmd_eval->add_option("--ckpt", eval_ckpt, "policy checkpoint")->required();
  cmd_eval->add_option("--episodes", eval_episodes, "evaluation episodes");

  // inspect ------------------------------------------------------------
  std::string inspect_file, inspect_vocab;
  auto* cmd_inspect = app.add_subcommand("inspect", "render a buffer file as aligned columns");
  cmd_inspect->add_option("file", inspect_file, "buffer (.ltcb) file")->required();
  cmd_inspect->add_option("--vocab", inspect_vocab, "vocabulary file (default: built-in grammar)");

  // baseline -----------------------------------------------------------
  CommonFlags base_f;
  std::string base_mode = "random";
  int64_t base_episodes = 200;
  int64_t base_transcripts = 0;
  auto* cmd_base = app.add_subcommand("baseline", "random/expert success-rate measurement");
  detail_cli::add_common(cmd_base, base_f);
  cmd_base->add_option("--mode", base_mode, "random | expert");
  cmd_base->add_option("--episodes", base_episodes, "episodes to measure");
  cmd_base->add_option("--show-transcripts", base_transcripts, "print this many expert sessions");

  // tokens -------------------------------------------------------------
  CommonFlags tok_f;
  int64_t tok_shots = 2;
  int64_t tok_episodes = 100;
  auto* cmd_tok = app.add_subcommand("tokens", "average prompt tokens, zero-shot vs few-shot");
  detail_cli::add_common(cmd_tok, tok_f);
  cmd_tok->add_option("--shots", tok_shots, "few-shot transcript count");
  cmd_tok->add_option("--episodes", tok_episodes, "episodes to average over");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    if (cmd_run->parsed()) {
      LtcConfig cfg = detail_cli::build_config(run_f);
      const auto metrics = run_ltc(cfg);
      std::printf("final success %.3f after %zu iterations\n", metrics.back().success,
                  metrics.size() - 1);
      return 0;
    }

    if (cmd_warm->parsed()) {
      LtcConfig cfg = detail_cli::build_config(warm_f);
      const Vocabulary vocab = make_env_vocab();
      cfg.policy = resolved_policy_config(cfg, vocab);
      cfg.pattern.max_context = cfg.policy.context_len;
      Policy policy(cfg.policy);
      const auto rep = warmup_bc(policy, vocab, cfg);
      if (!cfg.run.out_dir.empty()) {
        std::filesystem::create_directories(cfg.run.out_dir);
        vocab.save(cfg.run.out_dir + "/vocab.txt");
        policy.save(cfg.run.out_dir + "/ckpt-0");
      }
      std::printf("warmup: %zu expert episodes, %zu epochs, eval success %.3f\n",
                  rep.expert_episodes, rep.epoch_lm_loss.size(), rep.final_success);
      return 0;
    }

    if (cmd_explore->parsed()) {
      LtcConfig cfg = detail_cli::build_config(exp_f);
      const Vocabulary vocab = make_env_vocab();
      Policy policy = detail_cli::load_checkpoint(exp_ckpt);
      cfg.policy = policy.config();
      cfg.pattern.max_context = cfg.policy.context_len;
      const auto res = explore_phase(policy, vocab, cfg, exp_iter);
      if (cfg.run.out_dir.empty())
        throw Error(ErrorCode::usage, "explore: --out directory is required");
      const std::string dir =
          cfg.run.out_dir + "/buffers/" + std::to_string(exp_iter);
      std::filesystem::create_directories(dir);
      for (size_t i = 0; i < res.buffers.size(); ++i)
        save_buffer(res.buffers[i], dir + "/b" + std::to_string(i) + ".ltcb");
      std::printf("explored %zu buffers into %s\n", res.buffers.size(), dir.c_str());
      return 0;
    }

    if (cmd_train->parsed()) {
      LtcConfig cfg = detail_cli::build_config(train_f);
      Policy policy = detail_cli::load_checkpoint(train_ckpt);
      cfg.policy = policy.config();
      std::vector<std::string> files;
      for (const auto& e : std::filesystem::directory_iterator(train_buffers))
        if (e.path().extension() == ".ltcb") files.push_back(e.path().string());
      std::sort(files.begin(), files.end());
      if (files.empty())
        throw Error(ErrorCode::usage, "train: no .ltcb files in " + train_buffers);
      std::vector<TrajectoryBuffer> buffers;
      for (const auto& f : files) buffers.push_back(load_buffer(f));
      ReplayStore replay(cfg.run.replay_window);
      replay.insert(1, std::move(buffers));
      const auto reports = train_phase(policy, replay, cfg, 1);
      double lm = 0, pol = 0, val = 0, ent = 0;
      for (const auto& r : reports) lm += r.lm, pol += r.policy, val += r.value, ent += r.entropy;
      const double n = static_cast<double>(reports.size());
      std::printf("trained on %zu buffers: lm %.4f policy %+.4f value %.4f entropy %+.5f\n",
                  files.size(), lm / n, pol / n, val / n, ent / n);
      const std::string out = train_out_ckpt.empty() ? train_ckpt + ".new" : train_out_ckpt;
      policy.save(out);
      std::printf("checkpoint written to %s\n", out.c_str());
      return 0;
    }

    if (cmd_eval->parsed()) {
      LtcConfig cfg = detail_cli::build_config(eval_f);
      const Vocabulary vocab = make_env_vocab();
      Policy policy = detail_cli::load_checkpoint(eval_ckpt);
      cfg.policy = policy.config();
      cfg.pattern.max_context = cfg.policy.context_len;
      const double rate =
          evaluate_policy(policy, vocab, cfg, static_cast<size_t>(eval_episodes));
      std::printf("success_rate %.4f over %lld episodes\n", rate,
                  static_cast<long long>(eval_episodes));
      return 0;
    }

    if (cmd_inspect->parsed()) {
      const TrajectoryBuffer b = load_buffer(inspect_file);
      Vocabulary vocab = inspect_vocab.empty() ? make_env_vocab() : Vocabulary::load(inspect_vocab);
      std::cout << render_buffer(b, &vocab);
      return 0;
    }

    if (cmd_base->parsed()) {
      LtcConfig cfg = detail_cli::build_config(base_f);
      const Vocabulary vocab = make_env_vocab();
      cfg.policy = resolved_policy_config(cfg, vocab);
      cfg.pattern.max_context = cfg.policy.context_len;
      if (base_transcripts > 0) {
        for (int64_t i = 0; i < base_transcripts; ++i) {
          Policy policy(cfg.policy);
          const uint64_t seed = mix_seed(cfg.run.run_seed, 0x7EA, static_cast<uint64_t>(i));
          auto env = make_env(cfg.run.env, seed, cfg.run.env_params);
          const AgentHandle expert = make_expert_agent(*env);
          const Session s = run_monologue(expert, *env, cfg.pattern, vocab);
          std::printf("--- transcript %lld ---\n", static_cast<long long>(i));
          for (const auto& m : s.messages())
            std::printf("[%s%+d] %s\n", source_name(m.source), m.reward, m.text.c_str());
        }
        return 0;
      }
      size_t successes = 0;
      if (base_mode == "expert") {
        Policy policy(cfg.policy);
        for (int64_t e = 0; e < base_episodes; ++e) {
          const uint64_t seed = mix_seed(cfg.run.run_seed, 0xBA5E, static_cast<uint64_t>(e));
          const auto b = run_episode(policy, vocab, cfg, seed, 0.0, true);
          if (b.terminal_reward() == 1) ++successes;
        }
      } else if (base_mode == "random") {
        Policy policy(cfg.policy);
        const double rate =
            evaluate_policy(policy, vocab, cfg, static_cast<size_t>(base_episodes));
        successes = static_cast<size_t>(std::llround(rate * static_cast<double>(base_episodes)));
      } else {
        throw Error(ErrorCode::usage, "baseline: mode must be random or expert");
      }
      std::printf("%s baseline success_rate %.4f over %lld episodes\n", base_mode.c_str(),
                  static_cast<double>(successes) / static_cast<double>(base_episodes),
                  static_cast<long long>(base_episodes));
      return 0;
    }

    if (cmd_tok->parsed()) {
      LtcConfig cfg = detail_cli::build_config(tok_f);
      const Vocabulary vocab = make_env_vocab();
      const auto zero = report_prompt_tokens(cfg.run.env, 0, static_cast<size_t>(tok_episodes),
                                             cfg.run.run_seed, vocab, cfg.pattern,
                                             cfg.run.env_params);
      const auto few = report_prompt_tokens(cfg.run.env, static_cast<size_t>(tok_shots),
                                            static_cast<size_t>(tok_episodes), cfg.run.run_seed,
                                            vocab, cfg.pattern, cfg.run.env_params);
      std::printf("%s zero_shot %lld few_shot_%lld %lld ratio %.3f\n",
                  env_kind_name(cfg.run.env), static_cast<long long>(zero),
                  static_cast<long long>(tok_shots), static_cast<long long>(few),
                  static_cast<double>(zero) / static_cast<double>(few));
      return 0;
    }

    throw Error(ErrorCode::usage, "no subcommand given");
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::usage ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace ltc
