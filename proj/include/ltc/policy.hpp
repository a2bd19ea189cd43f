#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ltc/common.hpp"
#include "ltc/vocab.hpp"

namespace ltc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct PolicyConfig {
  uint32_t vocab_size = 0;
  uint32_t embed_dim = 64;
  uint32_t hidden_dim = 128;
  uint32_t num_layers = 2;
  uint32_t context_len = 256;
  uint64_t seed = 0;

  bool operator==(const PolicyConfig&) const = default;
};

// Per-position results of running the model over a realized token sequence.
// Entry t describes the prediction made at position t:
//   logprob[t] = log p(tokens[t+1] | tokens[0..t])   (0 at the last position)
//   value[t]   = tanh value-head output after consuming tokens[0..t]
//   entropy[t] = entropy of the predictive distribution at position t
struct EvalResult {
  VectorXd logprob;
  VectorXd value;
  VectorXd entropy;
};

struct GenerateResult {
  std::vector<TokenId> tokens;
  std::vector<double> logprobs;  // log-probabilities at temperature 1
};

// Decoupled-weight-decay adaptive-moment optimizer.
class AdamW {
 public:
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;

  void step(VectorXd& params, const VectorXd& grads, double lr) {
    if (m_.size() != params.size()) {
      m_ = VectorXd::Zero(params.size());
      v_ = VectorXd::Zero(params.size());
      t_ = 0;
    }
    if (grads.size() != params.size())
      throw Error(ErrorCode::length_mismatch, "optimizer: gradient size mismatch");
    ++t_;
    m_ = beta1 * m_ + (1.0 - beta1) * grads;
    v_ = beta2 * v_ + (1.0 - beta2) * grads.cwiseProduct(grads);
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    const VectorXd m_hat = m_ / bc1;
    const VectorXd v_hat = v_ / bc2;
    params -= lr * (m_hat.array() / (v_hat.array().sqrt() + eps) + weight_decay * params.array())
                       .matrix();
  }

  int64_t steps_taken() const { return t_; }

 private:
  VectorXd m_, v_;
  int64_t t_ = 0;
};

namespace detail {
constexpr double kRmsEps = 1e-5;
constexpr double kInitStd = 0.08;
}  // namespace detail

// Autoregressive token policy: learned token + position embeddings, num_layers
// pre-norm blocks of single-head causal self-attention and a relu MLP, a final
// rmsnorm feeding the LM head, and a tanh value head reading the hidden state
// that enters the last block (the output of the second-to-last block).
//
// All math is in 64-bit reals. Parameters live in one flat vector split into
// named blocks; gradients use the same layout.
class Policy {
 public:
  explicit Policy(const PolicyConfig& cfg) : cfg_(cfg) {
    if (cfg.vocab_size == 0 || cfg.embed_dim == 0 || cfg.hidden_dim == 0 || cfg.num_layers == 0)
      throw Error(ErrorCode::invalid_argument, "policy config: all dimensions must be positive");
    if (cfg.context_len < 8)
      throw Error(ErrorCode::invalid_argument, "policy config: context_len must be at least 8");
    build_blocks();
    init_params();
  }

  const PolicyConfig& config() const { return cfg_; }
  Eigen::Index param_count() const { return params_.size(); }
  uint64_t version() const { return version_; }
  const VectorXd& raw_params() const { return params_; }
  VectorXd& raw_params_mut() { return params_; }  // used by finite-difference tests

  struct Block {
    std::string name;
    Eigen::Index offset, rows, cols;
    Eigen::Index size() const { return rows * cols; }
  };
  const std::vector<Block>& blocks() const { return blocks_; }

  // ---------------------------------------------------------------- forward

  // Full forward pass. Returns (logits [len x vocab], values [len]).
  std::pair<MatrixXd, VectorXd> forward(const std::vector<TokenId>& tokens) const {
    Cache c;
    run_forward(tokens, c);
    return {c.logits.transpose(), c.val};
  }

  EvalResult evaluate(const std::vector<TokenId>& tokens) const {
    if (tokens.size() < 2)
      throw Error(ErrorCode::invalid_argument, "evaluate: need at least 2 tokens");
    Cache c;
    run_forward(tokens, c);
    const Eigen::Index T = static_cast<Eigen::Index>(tokens.size());
    EvalResult r;
    r.logprob = VectorXd::Zero(T);
    r.value = c.val;
    r.entropy = VectorXd::Zero(T);
    for (Eigen::Index t = 0; t < T; ++t) {
      VectorXd logp;
      log_softmax(c.logits.col(t), logp);
      if (t + 1 < T) r.logprob(t) = logp(tokens[static_cast<size_t>(t) + 1]);
      r.entropy(t) = entropy_from_logp(logp);
    }
    return r;
  }

  // Samples until a stop id (not returned), max_new tokens, or the context
  // boundary. Returned logprobs are those of the temperature-1 distribution,
  // matching evaluate() on the realized sequence.
  GenerateResult generate(const std::vector<TokenId>& prefix, const std::set<TokenId>& stop_ids,
                          size_t max_new, uint64_t rng_seed, double temperature) const {
    if (stop_ids.empty() && max_new == 0)
      throw Error(ErrorCode::invalid_argument, "generate: no stop ids and max_new is zero");
    if (prefix.empty())
      throw Error(ErrorCode::empty_input, "generate: empty prefix");
    if (prefix.size() >= cfg_.context_len)
      throw Error(ErrorCode::context_overflow, "generate: prefix fills the context");

    GenState st(*this);
    VectorXd logits(cfg_.vocab_size);
    for (size_t i = 0; i < prefix.size(); ++i) {
      check_token(prefix[i]);
      st.push(prefix[i], logits, i + 1 == prefix.size());
    }

    Rng rng(rng_seed);
    GenerateResult out;
    while (out.tokens.size() < max_new && st.len < cfg_.context_len) {
      VectorXd logp;
      log_softmax(logits, logp);
      const TokenId next = sample_token(logits, temperature, rng);
      if (stop_ids.count(next)) break;
      out.tokens.push_back(next);
      out.logprobs.push_back(logp(next));
      if (out.tokens.size() == max_new || st.len == cfg_.context_len) break;
      st.push(next, logits, true);
    }
    return out;
  }

  // ---------------------------------------------------------------- training

  // Forward pass that keeps every activation needed by backward().
  // logits are stored vocab x len (one column per position).
  struct Cache {
    std::vector<TokenId> tokens;
    struct Layer {
      MatrixXd xin, a, q, k, v, p, z, xmid, b, hpre;
    };
    std::vector<Layer> layers;
    MatrixXd xout;    // residual stream after the last block
    MatrixXd pen;     // hidden state read by the value head
    MatrixXd fin;     // final rmsnorm output
    MatrixXd logits;  // vocab x len
    VectorXd zv;      // pre-tanh value head outputs
    VectorXd val;
  };

  Cache train_forward(const std::vector<TokenId>& tokens) const {
    Cache c;
    run_forward(tokens, c);
    return c;
  }

  // Accumulates d(loss)/d(params) into grad_out given output-side gradients.
  // dlogits is vocab x len, dvalues has one entry per position.
  void backward(const Cache& c, const MatrixXd& dlogits, const VectorXd& dvalues,
                VectorXd& grad_out) const {
    const Eigen::Index T = static_cast<Eigen::Index>(c.tokens.size());
    const Eigen::Index C = cfg_.embed_dim;
    const double scale = 1.0 / std::sqrt(static_cast<double>(C));
    if (grad_out.size() != params_.size()) {
      grad_out = VectorXd::Zero(params_.size());
    }

    // value head
    VectorXd dzv = dvalues.array() * (1.0 - c.val.array().square());
    view(grad_out, value_w_).noalias() += c.pen * dzv;
    view_vec(grad_out, value_b_)(0) += dzv.sum();
    MatrixXd dpen = cview(params_, value_w_) * dzv.transpose();  // C x T

    // LM head
    view(grad_out, lm_head_).noalias() += dlogits * c.fin.transpose();
    MatrixXd dfin = cview(params_, lm_head_).transpose() * dlogits;  // C x T

    // final norm
    MatrixXd dx = MatrixXd::Zero(C, T);
    rmsnorm_backward(c.xout, cview_vec(params_, final_gain_), dfin, dx,
                     view_vec(grad_out, final_gain_));

    for (int l = static_cast<int>(cfg_.num_layers) - 1; l >= 0; --l) {
      const auto& lc = c.layers[static_cast<size_t>(l)];
      const auto& lb = layer_blocks_[static_cast<size_t>(l)];

      // mlp: xout = xmid + fc2 * relu(fc1 * b + b1) + b2
      MatrixXd dm = dx;  // gradient of the mlp branch output
      MatrixXd hh = lc.hpre.cwiseMax(0.0);
      view(grad_out, lb.fc2).noalias() += dm * hh.transpose();
      view_vec(grad_out, lb.fc2_b) += dm.rowwise().sum();
      MatrixXd dhh = cview(params_, lb.fc2).transpose() * dm;
      MatrixXd dhpre = (lc.hpre.array() > 0.0).select(dhh, 0.0);
      view(grad_out, lb.fc1).noalias() += dhpre * lc.b.transpose();
      view_vec(grad_out, lb.fc1_b) += dhpre.rowwise().sum();
      MatrixXd db = cview(params_, lb.fc1).transpose() * dhpre;
      rmsnorm_backward(lc.xmid, cview_vec(params_, lb.mlp_gain), db, dx,
                       view_vec(grad_out, lb.mlp_gain));

      // attention: xmid = xin + wo * z
      MatrixXd dox = dx;  // gradient at the attention branch output
      view(grad_out, lb.wo).noalias() += dox * lc.z.transpose();
      MatrixXd dz = cview(params_, lb.wo).transpose() * dox;
      MatrixXd dv = dz * lc.p;              // C x T
      MatrixXd dp = dz.transpose() * lc.v;  // T x T (row t over key s)
      MatrixXd ds = MatrixXd::Zero(T, T);
      for (Eigen::Index t = 0; t < T; ++t) {
        double dot = 0.0;
        for (Eigen::Index s = 0; s <= t; ++s) dot += lc.p(t, s) * dp(t, s);
        for (Eigen::Index s = 0; s <= t; ++s) ds(t, s) = lc.p(t, s) * (dp(t, s) - dot);
      }
      MatrixXd dq = scale * (lc.k * ds.transpose());
      MatrixXd dk = scale * (lc.q * ds);
      view(grad_out, lb.wq).noalias() += dq * lc.a.transpose();
      view(grad_out, lb.wk).noalias() += dk * lc.a.transpose();
      view(grad_out, lb.wv).noalias() += dv * lc.a.transpose();
      MatrixXd da = cview(params_, lb.wq).transpose() * dq;
      da.noalias() += cview(params_, lb.wk).transpose() * dk;
      da.noalias() += cview(params_, lb.wv).transpose() * dv;
      rmsnorm_backward(lc.xin, cview_vec(params_, lb.attn_gain), da, dx,
                       view_vec(grad_out, lb.attn_gain));

      // dx now holds the gradient at this block's input; the value head taps
      // the stream entering the last block.
      if (cfg_.num_layers > 1 && static_cast<uint32_t>(l) + 1 == cfg_.num_layers) dx += dpen;
    }

    if (cfg_.num_layers == 1) dx += dpen;  // value head reads the embeddings

    // embeddings
    auto dtok = view(grad_out, tok_emb_);
    auto dpos = view(grad_out, pos_emb_);
    for (Eigen::Index t = 0; t < T; ++t) {
      dtok.col(c.tokens[static_cast<size_t>(t)]) += dx.col(t);
      dpos.col(t) += dx.col(t);
    }
  }

  // One AdamW update. Rejects non-finite gradients, naming the branch block.
  void optimize_step(const VectorXd& grads, double lr) {
    if (grads.size() != params_.size())
      throw Error(ErrorCode::length_mismatch, "optimize_step: gradient size mismatch");
    for (const auto& b : blocks_) {
      if (!grads.segment(b.offset, b.size()).allFinite())
        throw Error(ErrorCode::non_finite, "non-finite gradient in parameter block '" + b.name + "'");
    }
    opt_.step(params_, grads, lr);
    ++version_;
  }

  AdamW& optimizer() { return opt_; }

  // ---------------------------------------------------------------- checkpoint

  static constexpr uint32_t kCheckpointVersion = 1;

  std::vector<uint8_t> save_bytes() const {
    ByteWriter w;
    w.raw("LTCP", 4);
    w.u32(kCheckpointVersion);
    w.u32(cfg_.vocab_size);
    w.u32(cfg_.embed_dim);
    w.u32(cfg_.hidden_dim);
    w.u32(cfg_.num_layers);
    w.u32(cfg_.context_len);
    w.u64(cfg_.seed);
    w.u64(version_);
    w.u64(static_cast<uint64_t>(params_.size()));
    for (Eigen::Index i = 0; i < params_.size(); ++i) w.f64(params_(i));
    return w.take();
  }

  static Policy load_bytes(const std::vector<uint8_t>& bytes) {
    ByteReader r(bytes);
    char magic[4];
    for (auto& c : magic) c = static_cast<char>(r.u8());
    if (std::string(magic, 4) != "LTCP")
      throw Error(ErrorCode::bad_magic, "not a checkpoint file");
    if (r.u32() != kCheckpointVersion)
      throw Error(ErrorCode::bad_version, "unsupported checkpoint version");
    PolicyConfig cfg;
    cfg.vocab_size = r.u32();
    cfg.embed_dim = r.u32();
    cfg.hidden_dim = r.u32();
    cfg.num_layers = r.u32();
    cfg.context_len = r.u32();
    cfg.seed = r.u64();
    Policy p(cfg);
    p.version_ = r.u64();
    const uint64_t n = r.u64();
    if (n != static_cast<uint64_t>(p.params_.size()))
      throw Error(ErrorCode::length_mismatch, "checkpoint parameter count mismatch");
    for (Eigen::Index i = 0; i < p.params_.size(); ++i) p.params_(i) = r.f64();
    if (!r.done()) throw Error(ErrorCode::trailing_bytes, "trailing bytes in checkpoint");
    return p;
  }

  void save(const std::string& path) const {
    const auto bytes = save_bytes();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_error, "cannot open for write: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::io_error, "write failed: " + path);
  }

  static Policy load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_error, "cannot open: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    return load_bytes(bytes);
  }

  bool params_equal(const Policy& other) const {
    return cfg_ == other.cfg_ && params_.size() == other.params_.size() &&
           params_ == other.params_;
  }

  // stable log softmax / softmax helpers shared with the trainer
  static void log_softmax(const Eigen::Ref<const VectorXd>& logits, VectorXd& out) {
    const double mx = logits.maxCoeff();
    out = logits.array() - mx;
    const double lse = std::log(out.array().exp().sum());
    out.array() -= lse;
  }

  static double entropy_from_logp(const VectorXd& logp) {
    double h = 0.0;
    for (Eigen::Index i = 0; i < logp.size(); ++i) {
      const double p = std::exp(logp(i));
      if (p > 0.0) h -= p * logp(i);
    }
    return h < 0.0 ? 0.0 : h;
  }

 private:
  struct LayerBlocks {
    size_t attn_gain, wq, wk, wv, wo, mlp_gain, fc1, fc1_b, fc2, fc2_b;
  };

  void build_blocks() {
    const Eigen::Index C = cfg_.embed_dim, H = cfg_.hidden_dim, V = cfg_.vocab_size,
                       Tm = cfg_.context_len;
    tok_emb_ = add_block("tok_emb", C, V);
    pos_emb_ = add_block("pos_emb", C, Tm);
    for (uint32_t l = 0; l < cfg_.num_layers; ++l) {
      const std::string pre = "layer" + std::to_string(l) + ".";
      LayerBlocks lb;
      lb.attn_gain = add_block(pre + "attn_gain", C, 1);
      lb.wq = add_block(pre + "wq", C, C);
      lb.wk = add_block(pre + "wk", C, C);
      lb.wv = add_block(pre + "wv", C, C);
      lb.wo = add_block(pre + "wo", C, C);
      lb.mlp_gain = add_block(pre + "mlp_gain", C, 1);
      lb.fc1 = add_block(pre + "fc1", H, C);
      lb.fc1_b = add_block(pre + "fc1_b", H, 1);
      lb.fc2 = add_block(pre + "fc2", C, H);
      lb.fc2_b = add_block(pre + "fc2_b", C, 1);
      layer_blocks_.push_back(lb);
    }
    final_gain_ = add_block("final_gain", C, 1);
    lm_head_ = add_block("lm_head", V, C);
    value_w_ = add_block("value_w", C, 1);
    value_b_ = add_block("value_b", 1, 1);
    params_ = VectorXd::Zero(total_size_);
  }

  size_t add_block(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    blocks_.push_back({name, total_size_, rows, cols});
    total_size_ += rows * cols;
    return blocks_.size() - 1;
  }

  // Seeded init: gains 1, biases 0, weights N(0, 0.08^2); the value head
  // weight uses N(0, (0.08/sqrt(embed_dim))^2) so initial values sit near 0.
  void init_params() {
    Rng rng(cfg_.seed);
    for (size_t i = 0; i < blocks_.size(); ++i) {
      const auto& b = blocks_[i];
      auto seg = params_.segment(b.offset, b.size());
      const bool gain = b.name.find("gain") != std::string::npos;
      const bool bias = b.name.ends_with("_b") || b.name == "value_b";
      if (gain) {
        seg.setOnes();
      } else if (bias) {
        seg.setZero();
      } else {
        double std = detail::kInitStd;
        if (b.name == "value_w") std /= std::sqrt(static_cast<double>(cfg_.embed_dim));
        for (Eigen::Index j = 0; j < seg.size(); ++j) seg(j) = std * rng.next_gaussian();
      }
    }
  }

  Eigen::Map<MatrixXd> view(VectorXd& flat, size_t block) const {
    const auto& b = blocks_[block];
    return {flat.data() + b.offset, b.rows, b.cols};
  }
  Eigen::Map<const MatrixXd> cview(const VectorXd& flat, size_t block) const {
    const auto& b = blocks_[block];
    return {flat.data() + b.offset, b.rows, b.cols};
  }
  Eigen::Map<VectorXd> view_vec(VectorXd& flat, size_t block) const {
    const auto& b = blocks_[block];
    return {flat.data() + b.offset, b.size()};
  }
  Eigen::Map<const VectorXd> cview_vec(const VectorXd& flat, size_t block) const {
    const auto& b = blocks_[block];
    return {flat.data() + b.offset, b.size()};
  }

  void check_token(TokenId id) const {
    if (id >= cfg_.vocab_size)
      throw Error(ErrorCode::id_out_of_range, "token id " + std::to_string(id) + " out of range");
  }

  static void rmsnorm_cols(const MatrixXd& x, const Eigen::Ref<const VectorXd>& gain,
                           MatrixXd& out) {
    out.resize(x.rows(), x.cols());
    for (Eigen::Index t = 0; t < x.cols(); ++t) {
      const double ms = x.col(t).squaredNorm() / static_cast<double>(x.rows());
      const double r = std::sqrt(ms + detail::kRmsEps);
      out.col(t) = gain.cwiseProduct(x.col(t)) / r;
    }
  }

  static void rmsnorm_backward(const MatrixXd& x, const Eigen::Ref<const VectorXd>& gain,
                               const MatrixXd& dy, MatrixXd& dx_accum,
                               Eigen::Map<VectorXd> dgain) {
    const double C = static_cast<double>(x.rows());
    for (Eigen::Index t = 0; t < x.cols(); ++t) {
      const double ms = x.col(t).squaredNorm() / C;
      const double r = std::sqrt(ms + detail::kRmsEps);
      const VectorXd xhat = x.col(t) / r;
      const VectorXd u = gain.cwiseProduct(dy.col(t));
      dgain += dy.col(t).cwiseProduct(xhat);
      dx_accum.col(t) += u / r - xhat * (u.dot(xhat) / (C * r));
    }
  }

  // Shared forward pass. Fills the cache completely; evaluate/forward use the
  // same path so every consumer sees identical numerics.
  void run_forward(const std::vector<TokenId>& tokens, Cache& c) const {
    const Eigen::Index T = static_cast<Eigen::Index>(tokens.size());
    if (T == 0) throw Error(ErrorCode::empty_input, "forward: empty token sequence");
    if (T > static_cast<Eigen::Index>(cfg_.context_len))
      throw Error(ErrorCode::context_overflow, "forward: sequence exceeds context length");
    for (TokenId id : tokens) check_token(id);
    const Eigen::Index C = cfg_.embed_dim;
    const double scale = 1.0 / std::sqrt(static_cast<double>(C));

    c.tokens = tokens;
    c.layers.resize(cfg_.num_layers);
    MatrixXd x(C, T);
    const auto tok = cview(params_, tok_emb_);
    const auto pos = cview(params_, pos_emb_);
    for (Eigen::Index t = 0; t < T; ++t)
      x.col(t) = tok.col(tokens[static_cast<size_t>(t)]) + pos.col(t);

    if (cfg_.num_layers == 1) c.pen = x;
    for (uint32_t l = 0; l < cfg_.num_layers; ++l) {
      auto& lc = c.layers[l];
      const auto& lb = layer_blocks_[l];
      lc.xin = x;
      rmsnorm_cols(lc.xin, cview_vec(params_, lb.attn_gain), lc.a);
      lc.q.noalias() = cview(params_, lb.wq) * lc.a;
      lc.k.noalias() = cview(params_, lb.wk) * lc.a;
      lc.v.noalias() = cview(params_, lb.wv) * lc.a;
      lc.p = MatrixXd::Zero(T, T);
      for (Eigen::Index t = 0; t < T; ++t) {
        Eigen::VectorXd scores = (lc.k.leftCols(t + 1).transpose() * lc.q.col(t)) * scale;
        const double mx = scores.maxCoeff();
        scores = (scores.array() - mx).exp();
        lc.p.row(t).head(t + 1) = scores.transpose() / scores.sum();
      }
      lc.z.noalias() = lc.v * lc.p.transpose();
      lc.xmid = lc.xin;
      lc.xmid.noalias() += cview(params_, lb.wo) * lc.z;
      rmsnorm_cols(lc.xmid, cview_vec(params_, lb.mlp_gain), lc.b);
      lc.hpre.noalias() = cview(params_, lb.fc1) * lc.b;
      lc.hpre.colwise() += cview_vec(params_, lb.fc1_b);
      MatrixXd hh = lc.hpre.cwiseMax(0.0);
      x = lc.xmid;
      x.noalias() += cview(params_, lb.fc2) * hh;
      x.colwise() += cview_vec(params_, lb.fc2_b);
      if (cfg_.num_layers > 1 && l + 2 == cfg_.num_layers) c.pen = x;
    }
    c.xout = x;
    rmsnorm_cols(c.xout, cview_vec(params_, final_gain_), c.fin);
    c.logits.noalias() = cview(params_, lm_head_) * c.fin;
    c.zv = (cview(params_, value_w_).transpose() * c.pen).transpose();
    c.zv.array() += params_(blocks_[value_b_].offset);
    c.val = c.zv.array().tanh();
    clamp_open_interval(c.val);
  }

  // tanh can round to exactly +/-1 for extreme inputs; keep the open interval.
  static void clamp_open_interval(VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (v(i) >= 1.0) v(i) = std::nextafter(1.0, 0.0);
      if (v(i) <= -1.0) v(i) = std::nextafter(-1.0, 0.0);
    }
  }

  TokenId sample_token(const VectorXd& logits, double temperature, Rng& rng) const {
    if (temperature < 1e-12) {
      Eigen::Index best = 0;
      logits.maxCoeff(&best);
      return static_cast<TokenId>(best);
    }
    VectorXd logp;
    log_softmax(logits / temperature, logp);
    const double u = rng.next_double();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < logp.size(); ++i) {
      acc += std::exp(logp(i));
      if (u < acc) return static_cast<TokenId>(i);
    }
    return static_cast<TokenId>(logp.size() - 1);  // guard against rounding
  }

  // Incremental decoding state with per-layer KV caches.
  struct GenState {
    const Policy& p;
    std::vector<MatrixXd> kcache, vcache;
    size_t len = 0;

    explicit GenState(const Policy& pol) : p(pol) {
      kcache.assign(pol.cfg_.num_layers, MatrixXd(pol.cfg_.embed_dim, pol.cfg_.context_len));
      vcache.assign(pol.cfg_.num_layers, MatrixXd(pol.cfg_.embed_dim, pol.cfg_.context_len));
    }

    // Appends one token; fills logits for the new position when wanted.
    void push(TokenId tok, VectorXd& logits, bool want_logits) {
      const Eigen::Index C = p.cfg_.embed_dim;
      const double scale = 1.0 / std::sqrt(static_cast<double>(C));
      const Eigen::Index t = static_cast<Eigen::Index>(len);
      VectorXd x = p.cview(p.params_, p.tok_emb_).col(tok) + p.cview(p.params_, p.pos_emb_).col(t);
      for (uint32_t l = 0; l < p.cfg_.num_layers; ++l) {
        const auto& lb = p.layer_blocks_[l];
        VectorXd a = rms_vec(x, p.cview_vec(p.params_, lb.attn_gain));
        VectorXd q = p.cview(p.params_, lb.wq) * a;
        kcache[l].col(t) = p.cview(p.params_, lb.wk) * a;
        vcache[l].col(t) = p.cview(p.params_, lb.wv) * a;
        VectorXd scores = (kcache[l].leftCols(t + 1).transpose() * q) * scale;
        const double mx = scores.maxCoeff();
        scores = (scores.array() - mx).exp();
        const VectorXd w = scores / scores.sum();
        VectorXd z = vcache[l].leftCols(t + 1) * w;
        x.noalias() += p.cview(p.params_, lb.wo) * z;
        VectorXd b = rms_vec(x, p.cview_vec(p.params_, lb.mlp_gain));
        VectorXd h = (p.cview(p.params_, lb.fc1) * b + p.cview_vec(p.params_, lb.fc1_b)).cwiseMax(0.0);
        x.noalias() += p.cview(p.params_, lb.fc2) * h + p.cview_vec(p.params_, lb.fc2_b);
      }
      ++len;
      if (want_logits) {
        VectorXd f = rms_vec(x, p.cview_vec(p.params_, p.final_gain_));
        logits.noalias() = p.cview(p.params_, p.lm_head_) * f;
      }
    }

    static VectorXd rms_vec(const VectorXd& x, const Eigen::Ref<const VectorXd>& gain) {
      const double ms = x.squaredNorm() / static_cast<double>(x.size());
      const double r = std::sqrt(ms + detail::kRmsEps);
      return gain.cwiseProduct(x) / r;
    }
  };

  PolicyConfig cfg_;
  std::vector<Block> blocks_;
  std::vector<LayerBlocks> layer_blocks_;
  size_t tok_emb_ = 0, pos_emb_ = 0, final_gain_ = 0, lm_head_ = 0, value_w_ = 0, value_b_ = 0;
  Eigen::Index total_size_ = 0;
  VectorXd params_;
  uint64_t version_ = 0;
  AdamW opt_;
};

}  // namespace ltc
