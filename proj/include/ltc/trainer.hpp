#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ltc/buffer.hpp"
#include "ltc/policy.hpp"

namespace ltc {

struct TrainConfig {
  double beta = 1.0;          // weight of the reinforcement terms
  double lambda = 0.5;        // value loss weight inside the beta group
  double clip = 0.2;          // surrogate ratio clip
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double entropy_coef = 0.01;  // fixed by contract
  double lr = 2e-4;
  size_t batch_size = 32;
  size_t ppo_epochs = 2;
  double weight_decay = 0.0;
  bool lm_include_system = false;  // also apply the LM loss to system tokens
  bool normalize_advantages = false;

  void validate() const {
    if (!(clip > 0.0 && clip < 1.0))
      throw Error(ErrorCode::invalid_argument, "train config: clip must be in (0,1)");
    if (!(gamma > 0.0 && gamma <= 1.0) || !(gae_lambda > 0.0 && gae_lambda <= 1.0))
      throw Error(ErrorCode::invalid_argument,
                  "train config: gamma and gae_lambda must be in (0,1]");
    if (entropy_coef != 0.01)
      throw Error(ErrorCode::invalid_argument, "train config: entropy_coef is fixed at 0.01");
    if (batch_size == 0 || ppo_epochs == 0)
      throw Error(ErrorCode::invalid_argument, "train config: batch_size and ppo_epochs positive");
    if (!(lr > 0.0)) throw Error(ErrorCode::invalid_argument, "train config: lr must be positive");
  }
};

// Advantages and return targets, defined at the agent-token positions only.
struct AdvantageSet {
  std::vector<size_t> positions;  // buffer positions with mask == 1, ascending
  std::vector<double> advantage;
  std::vector<double> ret;
};

// Token-level GAE over agent positions. A reward at position x is credited to
// the agent step whose interval (p_j, p_{j+1}] contains x (the last interval
// runs to the end of the buffer); rewards before the first agent token are
// never credited. State values are the sealed buffer's stored values at the
// agent positions; the bootstrap value after the last step is 0.
inline AdvantageSet compute_gae(const TrajectoryBuffer& b, const TrainConfig& cfg) {
  AdvantageSet out;
  const size_t n = b.size();
  for (size_t i = 0; i < n; ++i)
    if (b.masks[i] == static_cast<uint8_t>(Source::Agent)) out.positions.push_back(i);
  const size_t k = out.positions.size();
  if (k == 0)
    throw Error(ErrorCode::invalid_argument, "compute_gae: buffer has no agent tokens");

  std::vector<double> step_reward(k, 0.0);
  for (size_t j = 0; j < k; ++j) {
    const size_t lo = out.positions[j];
    const size_t hi = (j + 1 < k) ? out.positions[j + 1] : n - 1;
    for (size_t x = lo + 1; x <= hi; ++x) step_reward[j] += b.rewards[x];
  }

  out.advantage.assign(k, 0.0);
  out.ret.assign(k, 0.0);
  double next_adv = 0.0;
  for (size_t j = k; j-- > 0;) {
    const double v = b.values[out.positions[j]];
    const double v_next = (j + 1 < k) ? b.values[out.positions[j + 1]] : 0.0;
    const double delta = step_reward[j] + cfg.gamma * v_next - v;
    next_adv = delta + cfg.gamma * cfg.gae_lambda * next_adv;
    out.advantage[j] = next_adv;
    out.ret[j] = next_adv + v;
    if (!std::isfinite(out.advantage[j]))
      throw Error(ErrorCode::non_finite, "compute_gae: non-finite advantage");
  }
  return out;
}

// Unreduced per-position loss terms for one buffer, in ascending position
// order. Each list carries only the positions its mask admits; the batch
// losses are plain means over these terms.
struct PositionTerm {
  size_t pos;
  double term;
};

struct BufferTerms {
  std::vector<PositionTerm> lm;       // -log p(token); masks {1,2} (+0 when configured)
  std::vector<PositionTerm> policy;   // negated clipped surrogate; masks {1,2}
  std::vector<PositionTerm> value;    // squared value error; mask 1
  std::vector<PositionTerm> entropy;  // entropy_coef * sum p log p; mask 1
  bool positive = false;              // terminal reward is +1 (the LM filter)
};

struct LossReport {
  double lm = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double total = 0.0;
};

namespace detail_trainer {

struct Scales {
  // multipliers applied to d(term)/d(output) when accumulating gradients;
  // zero disables a component entirely
  double lm = 0.0, policy = 0.0, value = 0.0, entropy = 0.0;
};

// Computes per-position terms from a forward cache; optionally accumulates
// gradients w.r.t. logits and values using the given scales. One routine so
// reported losses, the public loss functions, and training agree exactly.
// Fixed surrogate advantage for teacher tokens: the sign of the teacher
// message's own reward when it has one (an analogue correction is rewarded +1
// by construction), otherwise the buffer's terminal reward sign (a dialogue
// hint is judged by the episode outcome). Crediting every teacher token with
// the terminal sign alone unlearns correct corrections en masse whenever
// failures dominate a batch, which collapses analogue training.
inline std::vector<double> teacher_advantages(const TrajectoryBuffer& b) {
  const size_t n = b.size();
  const double terminal = static_cast<double>(b.terminal_reward());
  std::vector<double> out(n, 0.0);
  size_t i = 0;
  while (i < n) {
    if (b.masks[i] != static_cast<uint8_t>(Source::Teacher)) {
      ++i;
      continue;
    }
    size_t end = i;  // maximal run of teacher tokens = one message span
    while (end + 1 < n && b.masks[end + 1] == static_cast<uint8_t>(Source::Teacher)) ++end;
    const double own = static_cast<double>(b.rewards[end]);
    const double a = own != 0.0 ? own : terminal;
    for (size_t j = i; j <= end; ++j) out[j] = a;
    i = end + 1;
  }
  return out;
}

inline BufferTerms buffer_terms_impl(const TrajectoryBuffer& b, const TrainConfig& cfg,
                                     const Policy::Cache& cache, const AdvantageSet* adv,
                                     const Scales* scales, MatrixXd* dlogits, VectorXd* dvalues) {
  BufferTerms out;
  out.positive = b.terminal_reward() == 1;
  const size_t n = b.size();
  const std::vector<double> teacher_adv = adv ? teacher_advantages(b) : std::vector<double>();

  // advantage / return lookup by position
  std::vector<size_t> adv_index(n, SIZE_MAX);
  if (adv)
    for (size_t j = 0; j < adv->positions.size(); ++j) adv_index[adv->positions[j]] = j;

  VectorXd logp, prob;
  for (size_t i = 1; i < n; ++i) {
    const uint8_t m = b.masks[i];
    const bool want_lm =
        out.positive && (m == 1 || m == 2 || (cfg.lm_include_system && m == 0));
    const bool want_policy = adv && (m == 1 || m == 2);
    const bool want_value = adv && (m == 1);
    if (!want_lm && !want_policy && !want_value) continue;

    const Eigen::Index row = static_cast<Eigen::Index>(i) - 1;
    const TokenId tok = b.tokens[i];
    Policy::log_softmax(cache.logits.col(row), logp);
    prob = logp.array().exp();

    if (want_lm) {
      out.lm.push_back({i, -logp(tok)});
      if (scales && scales->lm != 0.0) {
        dlogits->col(row) += scales->lm * prob;
        (*dlogits)(tok, row) -= scales->lm;
      }
    }

    if (want_policy) {
      const double a = (m == 1) ? adv->advantage[adv_index[i]] : teacher_adv[i];
      const double ratio = std::exp(logp(tok) - b.logprobs[i]);
      const double unclipped = ratio * a;
      const double clipped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * a;
      out.policy.push_back({i, -std::min(unclipped, clipped)});
      if (scales && scales->policy != 0.0 && unclipped <= clipped) {
        // active unclipped branch: d(-ratio*a)/d logp(tok) = -ratio*a;
        // in the clipped region the derivative is identically zero
        const double g = scales->policy * (-unclipped);
        (*dlogits)(tok, row) += g;
        dlogits->col(row) -= g * prob;
      }
    }

    if (want_value) {
      // entropy of the distribution this token was drawn from
      double s = 0.0;
      for (Eigen::Index j = 0; j < logp.size(); ++j)
        if (prob(j) > 0.0) s += prob(j) * logp(j);
      out.entropy.push_back({i, cfg.entropy_coef * s});
      if (scales && scales->entropy != 0.0) {
        const double c = scales->entropy * cfg.entropy_coef;
        for (Eigen::Index j = 0; j < logp.size(); ++j)
          if (prob(j) > 0.0) (*dlogits)(j, row) += c * prob(j) * (logp(j) - s);
      }

      const double v_new = cache.val(row);
      const double target = adv->ret[adv_index[i]];
      const double diff = v_new - target;
      out.value.push_back({i, diff * diff});
      if (scales && scales->value != 0.0) (*dvalues)(row) += scales->value * 2.0 * diff;
    }
  }
  return out;
}

}  // namespace detail_trainer

inline BufferTerms buffer_terms(const Policy& policy, const TrajectoryBuffer& b,
                                const TrainConfig& cfg) {
  const auto cache = policy.train_forward(b.tokens);
  const auto adv = compute_gae(b, cfg);
  return detail_trainer::buffer_terms_impl(b, cfg, cache, &adv, nullptr, nullptr, nullptr);
}

// Mean next-token cross entropy over agent and teacher tokens of buffers with
// terminal reward +1; zero when no buffer qualifies.
inline double loss_lm(const Policy& policy, const std::vector<const TrajectoryBuffer*>& batch,
                      const TrainConfig& cfg) {
  double sum = 0.0;
  size_t count = 0;
  for (const auto* b : batch) {
    if (b->terminal_reward() != 1) continue;
    const auto terms = buffer_terms(policy, *b, cfg);
    for (const auto& t : terms.lm) sum += t.term;
    count += terms.lm.size();
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

// Negated clipped-surrogate mean over agent and teacher tokens. Teacher tokens
// use the buffer's terminal reward sign as a fixed advantage.
inline double loss_policy(const Policy& policy, const std::vector<const TrajectoryBuffer*>& batch,
                          const TrainConfig& cfg) {
  double sum = 0.0;
  size_t count = 0;
  for (const auto* b : batch) {
    const auto terms = buffer_terms(policy, *b, cfg);
    for (const auto& t : terms.policy) sum += t.term;
    count += terms.policy.size();
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

// Mean squared error between the current value head and the GAE return
// targets, agent tokens only.
inline double loss_value(const Policy& policy, const std::vector<const TrajectoryBuffer*>& batch,
                         const TrainConfig& cfg) {
  double sum = 0.0;
  size_t count = 0;
  for (const auto* b : batch) {
    const auto terms = buffer_terms(policy, *b, cfg);
    for (const auto& t : terms.value) sum += t.term;
    count += terms.value.size();
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

// Mean of entropy_coef * sum_a p log p over agent tokens; negative while the
// policy is stochastic, so minimizing raises entropy.
inline double loss_entropy(const Policy& policy, const std::vector<const TrajectoryBuffer*>& batch,
                           const TrainConfig& cfg) {
  double sum = 0.0;
  size_t count = 0;
  for (const auto* b : batch) {
    const auto terms = buffer_terms(policy, *b, cfg);
    for (const auto& t : terms.entropy) sum += t.term;
    count += terms.entropy.size();
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

inline double compose_total(const LossReport& r, const TrainConfig& cfg) {
  return r.lm + cfg.beta * (r.policy + cfg.lambda * r.value + r.entropy);
}

// Losses and the gradient of L_total over a minibatch, without touching the
// policy parameters. This is exactly what a training step applies; it is also
// the object the gradient acceptance checks probe. With lm_only the
// reinforcement terms are skipped entirely and report exactly zero.
inline LossReport compute_batch_gradient(const Policy& policy,
                                         const std::vector<const TrajectoryBuffer*>& batch,
                                         const TrainConfig& cfg, VectorXd& grads,
                                         bool lm_only = false) {
  if (batch.empty()) throw Error(ErrorCode::empty_input, "train: empty minibatch");
  cfg.validate();

  // candidate counts depend only on masks, so the mean scales are known
  // before any forward pass
  size_t n_lm = 0, n_pol = 0, n_val = 0;
  for (const auto* b : batch) {
    const bool positive = b->terminal_reward() == 1;
    for (size_t i = 1; i < b->size(); ++i) {
      const uint8_t m = b->masks[i];
      if (positive && (m == 1 || m == 2 || (cfg.lm_include_system && m == 0))) ++n_lm;
      if (m == 1 || m == 2) ++n_pol;
      if (m == 1) ++n_val;
    }
  }

  std::vector<AdvantageSet> advs(batch.size());
  if (!lm_only) {
    for (size_t bi = 0; bi < batch.size(); ++bi) advs[bi] = compute_gae(*batch[bi], cfg);
    if (cfg.normalize_advantages) {
      double mean = 0.0, count = 0.0;
      for (const auto& a : advs)
        for (double v : a.advantage) mean += v, count += 1.0;
      if (count > 1.0) {
        mean /= count;
        double var = 0.0;
        for (const auto& a : advs)
          for (double v : a.advantage) var += (v - mean) * (v - mean);
        const double std = std::sqrt(var / count) + 1e-8;
        for (auto& a : advs)
          for (double& v : a.advantage) v = (v - mean) / std;
      }
    }
  }

  detail_trainer::Scales scales;
  scales.lm = n_lm > 0 ? 1.0 / static_cast<double>(n_lm) : 0.0;
  if (!lm_only) {
    scales.policy = n_pol > 0 ? cfg.beta / static_cast<double>(n_pol) : 0.0;
    scales.entropy = n_val > 0 ? cfg.beta / static_cast<double>(n_val) : 0.0;
    scales.value = n_val > 0 ? cfg.beta * cfg.lambda / static_cast<double>(n_val) : 0.0;
  }

  grads = VectorXd::Zero(policy.param_count());
  double sum_lm = 0.0, sum_pol = 0.0, sum_val = 0.0, sum_ent = 0.0;
  for (size_t bi = 0; bi < batch.size(); ++bi) {
    const auto& b = *batch[bi];
    const auto cache = policy.train_forward(b.tokens);
    MatrixXd dlogits = MatrixXd::Zero(cache.logits.rows(), cache.logits.cols());
    VectorXd dvalues = VectorXd::Zero(cache.val.size());
    const auto terms = detail_trainer::buffer_terms_impl(
        b, cfg, cache, lm_only ? nullptr : &advs[bi], &scales, &dlogits, &dvalues);
    for (const auto& t : terms.lm) sum_lm += t.term;
    for (const auto& t : terms.policy) sum_pol += t.term;
    for (const auto& t : terms.value) sum_val += t.term;
    for (const auto& t : terms.entropy) sum_ent += t.term;
    policy.backward(cache, dlogits, dvalues, grads);
  }

  LossReport rep;
  rep.lm = n_lm > 0 ? sum_lm / static_cast<double>(n_lm) : 0.0;
  rep.policy = n_pol > 0 ? sum_pol / static_cast<double>(n_pol) : 0.0;
  rep.value = n_val > 0 ? sum_val / static_cast<double>(n_val) : 0.0;
  rep.entropy = n_val > 0 ? sum_ent / static_cast<double>(n_val) : 0.0;
  rep.total = compose_total(rep, cfg);
  if (!std::isfinite(rep.lm)) throw Error(ErrorCode::non_finite, "lm loss is non-finite");
  if (!std::isfinite(rep.policy)) throw Error(ErrorCode::non_finite, "policy loss is non-finite");
  if (!std::isfinite(rep.value)) throw Error(ErrorCode::non_finite, "value loss is non-finite");
  if (!std::isfinite(rep.entropy))
    throw Error(ErrorCode::non_finite, "entropy loss is non-finite");
  return rep;
}

// One gradient step over a minibatch.
inline LossReport train_minibatch(Policy& policy, const std::vector<const TrajectoryBuffer*>& batch,
                                  const TrainConfig& cfg, bool lm_only = false) {
  VectorXd grads;
  const LossReport rep = compute_batch_gradient(policy, batch, cfg, grads, lm_only);
  policy.optimizer().weight_decay = cfg.weight_decay;
  policy.optimize_step(grads, cfg.lr);
  return rep;
}

// ppo_epochs passes over the batch in fixed minibatch partitions of
// batch_size; returns one report per optimizer update.
inline std::vector<LossReport> train_epoch(Policy& policy,
                                           const std::vector<const TrajectoryBuffer*>& batch,
                                           const TrainConfig& cfg, bool lm_only = false) {
  if (batch.empty()) throw Error(ErrorCode::empty_input, "train_epoch: empty batch");
  std::vector<LossReport> reports;
  for (size_t pass = 0; pass < cfg.ppo_epochs; ++pass) {
    for (size_t start = 0; start < batch.size(); start += cfg.batch_size) {
      const size_t stop = std::min(batch.size(), start + cfg.batch_size);
      std::vector<const TrajectoryBuffer*> mb(batch.begin() + static_cast<std::ptrdiff_t>(start),
                                              batch.begin() + static_cast<std::ptrdiff_t>(stop));
      reports.push_back(train_minibatch(policy, mb, cfg, lm_only));
    }
  }
  return reports;
}

}  // namespace ltc
