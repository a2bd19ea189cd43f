#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "ltc/runner.hpp"

namespace ltc {

// Flat key = value configuration with [sections]; every key has a default and
// unknown keys are rejected. save/load round-trips exactly.
namespace detail_config {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw Error(ErrorCode::invalid_argument, "config: bad number for " + key + ": '" + v + "'");
  }
}

inline uint64_t parse_uint(const std::string& key, const std::string& v) {
  uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw Error(ErrorCode::invalid_argument, "config: bad integer for " + key + ": '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error(ErrorCode::invalid_argument, "config: bad boolean for " + key + ": '" + v + "'");
}

}  // namespace detail_config

inline std::string save_config_text(const LtcConfig& c) {
  using detail_config::fmt_double;
  std::ostringstream o;
  o << "[run]\n";
  o << "env = " << env_kind_name(c.run.env) << "\n";
  o << "pattern = " << pattern_kind_name(c.run.pattern) << "\n";
  o << "seed = " << c.run.run_seed << "\n";
  o << "n_gen = " << c.run.n_gen << "\n";
  o << "n_train = " << c.run.n_train << "\n";
  o << "iterations = " << c.run.max_iterations << "\n";
  o << "workers = " << c.run.workers << "\n";
  o << "eval_episodes = " << c.run.eval_episodes << "\n";
  o << "n_expert = " << c.run.n_expert << "\n";
  o << "warmup_epochs = " << c.run.warmup_epoch_cap << "\n";
  o << "warmup_target = " << fmt_double(c.run.warmup_target) << "\n";
  o << "warmup_lr = " << fmt_double(c.run.warmup_lr) << "\n";
  o << "warmup_batch = " << c.run.warmup_batch << "\n";
  o << "replay_window = " << c.run.replay_window << "\n";
  o << "out_dir = " << c.run.out_dir << "\n";
  o << "dump_buffers = " << (c.run.dump_buffers ? "true" : "false") << "\n";
  o << "verbose = " << (c.run.verbose ? "true" : "false") << "\n";
  o << "\n[env]\n";
  o << "max_steps = " << c.run.env_params.max_steps << "\n";
  o << "kb_size = " << c.run.env_params.kb_size << "\n";
  o << "pick2 = " << (c.run.env_params.gridhouse_pick2 ? "true" : "false") << "\n";
  o << "\n[policy]\n";
  o << "embed_dim = " << c.policy.embed_dim << "\n";
  o << "hidden_dim = " << c.policy.hidden_dim << "\n";
  o << "num_layers = " << c.policy.num_layers << "\n";
  o << "context_len = " << c.policy.context_len << "\n";
  o << "\n[pattern]\n";
  o << "max_steps = " << c.pattern.max_steps << "\n";
  o << "max_rounds = " << c.pattern.max_rounds << "\n";
  o << "max_gen = " << c.pattern.max_gen << "\n";
  o << "\n[train]\n";
  o << "beta = " << fmt_double(c.train.beta) << "\n";
  o << "lambda = " << fmt_double(c.train.lambda) << "\n";
  o << "clip = " << fmt_double(c.train.clip) << "\n";
  o << "gamma = " << fmt_double(c.train.gamma) << "\n";
  o << "gae_lambda = " << fmt_double(c.train.gae_lambda) << "\n";
  o << "entropy_coef = " << fmt_double(c.train.entropy_coef) << "\n";
  o << "lr = " << fmt_double(c.train.lr) << "\n";
  o << "batch_size = " << c.train.batch_size << "\n";
  o << "ppo_epochs = " << c.train.ppo_epochs << "\n";
  o << "weight_decay = " << fmt_double(c.train.weight_decay) << "\n";
  o << "lm_include_system = " << (c.train.lm_include_system ? "true" : "false") << "\n";
  o << "normalize_advantages = " << (c.train.normalize_advantages ? "true" : "false") << "\n";
  return o.str();
}

inline void apply_config_key(LtcConfig& c, const std::string& section, const std::string& key,
                             const std::string& value) {
  using namespace detail_config;
  const std::string full = section + "." + key;
  if (section == "run") {
    if (key == "env") { c.run.env = parse_env_kind(value); return; }
    if (key == "pattern") { c.run.pattern = parse_pattern_kind(value); return; }
    if (key == "seed") { c.run.run_seed = parse_uint(full, value); return; }
    if (key == "n_gen") { c.run.n_gen = parse_uint(full, value); return; }
    if (key == "n_train") { c.run.n_train = parse_uint(full, value); return; }
    if (key == "iterations") { c.run.max_iterations = parse_uint(full, value); return; }
    if (key == "workers") { c.run.workers = parse_uint(full, value); return; }
    if (key == "eval_episodes") { c.run.eval_episodes = parse_uint(full, value); return; }
    if (key == "n_expert") { c.run.n_expert = parse_uint(full, value); return; }
    if (key == "warmup_epochs") { c.run.warmup_epoch_cap = parse_uint(full, value); return; }
    if (key == "warmup_target") { c.run.warmup_target = parse_double(full, value); return; }
    if (key == "warmup_lr") { c.run.warmup_lr = parse_double(full, value); return; }
    if (key == "warmup_batch") { c.run.warmup_batch = parse_uint(full, value); return; }
    if (key == "replay_window") { c.run.replay_window = parse_uint(full, value); return; }
    if (key == "out_dir") { c.run.out_dir = value; return; }
    if (key == "dump_buffers") { c.run.dump_buffers = parse_bool(full, value); return; }
    if (key == "verbose") { c.run.verbose = parse_bool(full, value); return; }
  } else if (section == "env") {
    if (key == "max_steps") { c.run.env_params.max_steps = parse_uint(full, value); return; }
    if (key == "kb_size") { c.run.env_params.kb_size = parse_uint(full, value); return; }
    if (key == "pick2") { c.run.env_params.gridhouse_pick2 = parse_bool(full, value); return; }
  } else if (section == "policy") {
    if (key == "embed_dim") { c.policy.embed_dim = static_cast<uint32_t>(parse_uint(full, value)); return; }
    if (key == "hidden_dim") { c.policy.hidden_dim = static_cast<uint32_t>(parse_uint(full, value)); return; }
    if (key == "num_layers") { c.policy.num_layers = static_cast<uint32_t>(parse_uint(full, value)); return; }
    if (key == "context_len") { c.policy.context_len = static_cast<uint32_t>(parse_uint(full, value)); return; }
  } else if (section == "pattern") {
    if (key == "max_steps") { c.pattern.max_steps = parse_uint(full, value); return; }
    if (key == "max_rounds") { c.pattern.max_rounds = parse_uint(full, value); return; }
    if (key == "max_gen") { c.pattern.max_gen = parse_uint(full, value); return; }
  } else if (section == "train") {
    if (key == "beta") { c.train.beta = parse_double(full, value); return; }
    if (key == "lambda") { c.train.lambda = parse_double(full, value); return; }
    if (key == "clip") { c.train.clip = parse_double(full, value); return; }
    if (key == "gamma") { c.train.gamma = parse_double(full, value); return; }
    if (key == "gae_lambda") { c.train.gae_lambda = parse_double(full, value); return; }
    if (key == "entropy_coef") { c.train.entropy_coef = parse_double(full, value); return; }
    if (key == "lr") { c.train.lr = parse_double(full, value); return; }
    if (key == "batch_size") { c.train.batch_size = parse_uint(full, value); return; }
    if (key == "ppo_epochs") { c.train.ppo_epochs = parse_uint(full, value); return; }
    if (key == "weight_decay") { c.train.weight_decay = parse_double(full, value); return; }
    if (key == "lm_include_system") { c.train.lm_include_system = parse_bool(full, value); return; }
    if (key == "normalize_advantages") { c.train.normalize_advantages = parse_bool(full, value); return; }
  }
  throw Error(ErrorCode::invalid_argument, "config: unknown key '" + full + "'");
}

inline LtcConfig load_config_text(const std::string& text) {
  LtcConfig c;
  std::istringstream in(text);
  std::string line, section;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail_config::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = detail_config::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::invalid_argument,
                  "config: expected key = value at line " + std::to_string(lineno));
    const std::string key = detail_config::trim(line.substr(0, eq));
    const std::string value = detail_config::trim(line.substr(eq + 1));
    if (section.empty())
      throw Error(ErrorCode::invalid_argument,
                  "config: key '" + key + "' outside any section at line " + std::to_string(lineno));
    apply_config_key(c, section, key, value);
  }
  return c;
}

inline void save_config(const LtcConfig& c, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot open for write: " + path);
  out << save_config_text(c);
}

inline LtcConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_config_text(ss.str());
}

}  // namespace ltc
