#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "ltc/common.hpp"
#include "ltc/policy.hpp"
#include "ltc/vocab.hpp"

namespace ltc {

// Source labels, one per message and later one per token.
// Numeric values are part of the file format and must not change.
enum class Source : uint8_t { System = 0, Agent = 1, Teacher = 2 };

inline const char* source_name(Source s) {
  switch (s) {
    case Source::System: return "system";
    case Source::Agent: return "agent";
    case Source::Teacher: return "teacher";
  }
  return "?";
}

struct Message {
  std::string text;
  Source source;
  int reward;  // in {-1, 0, +1}
};

// Ordered transcript of one episode: text messages with source labels and
// sparse rewards. The first message is always the task description.
class Session {
 public:
  static Session start(const std::string& task_text) {
    if (task_text.empty())
      throw Error(ErrorCode::empty_input, "new session: task text is empty");
    Session s;
    s.messages_.push_back({task_text, Source::System, 0});
    return s;
  }

  void append(const std::string& text, Source source, int reward) {
    if (sealed_) throw Error(ErrorCode::session_sealed, "append: session is sealed");
    if (reward < -1 || reward > 1)
      throw Error(ErrorCode::invalid_reward, "append: reward must be -1, 0 or +1");
    messages_.push_back({text, source, reward});
  }

  const std::vector<Message>& messages() const { return messages_; }
  size_t size() const { return messages_.size(); }
  bool sealed() const { return sealed_; }
  void mark_sealed() { sealed_ = true; }

  // last nonzero per-message reward, or 0 if none
  int terminal_reward() const {
    for (auto it = messages_.rbegin(); it != messages_.rend(); ++it)
      if (it->reward != 0) return it->reward;
    return 0;
  }

 private:
  std::vector<Message> messages_;
  bool sealed_ = false;
};

// Five aligned per-token sequences. Sealed buffers are immutable by
// convention: nothing in the library mutates one after creation.
struct TrajectoryBuffer {
  std::vector<TokenId> tokens;
  std::vector<uint8_t> masks;    // Source values
  std::vector<double> values;    // strictly inside (-1, 1)
  std::vector<double> logprobs;  // <= 0
  std::vector<int8_t> rewards;   // sparse, in {-1, 0, +1}

  size_t size() const { return tokens.size(); }

  bool operator==(const TrajectoryBuffer&) const = default;

  int terminal_reward() const {
    for (auto it = rewards.rbegin(); it != rewards.rend(); ++it)
      if (*it != 0) return *it;
    return 0;
  }

  void validate() const {
    const size_t n = tokens.size();
    if (n == 0) throw Error(ErrorCode::zero_length, "buffer: zero length");
    if (masks.size() != n || values.size() != n || logprobs.size() != n || rewards.size() != n)
      throw Error(ErrorCode::length_mismatch, "buffer: the five sequences differ in length");
    for (size_t i = 0; i < n; ++i) {
      if (masks[i] > 2)
        throw Error(ErrorCode::invalid_mask,
                    "buffer: mask " + std::to_string(masks[i]) + " at position " + std::to_string(i));
      if (rewards[i] < -1 || rewards[i] > 1)
        throw Error(ErrorCode::invalid_reward, "buffer: reward out of range at position " +
                                                   std::to_string(i));
      if (!(values[i] > -1.0 && values[i] < 1.0) || !std::isfinite(values[i]))
        throw Error(ErrorCode::invalid_value,
                    "buffer: value outside (-1,1) at position " + std::to_string(i));
      if (!(logprobs[i] <= 0.0) || !std::isfinite(logprobs[i]))
        throw Error(ErrorCode::invalid_logprob,
                    "buffer: positive or non-finite logprob at position " + std::to_string(i));
    }
  }
};

// Token layout of a sealed session:
//   <bos> | msg1 tokens, <eos> | msg2 tokens, <eos> | ...
// Every token inherits its message's source; a message's reward lands on its
// final token (the <eos>). Log-probs and values for every position come from
// one evaluation of the given policy over the full sequence, so the ratio
// denominator is well defined for teacher tokens too. Position 0 (<bos>) gets
// logprob 0 and value 0 by convention.
inline TrajectoryBuffer seal(Session& session, const Vocabulary& vocab, const Policy& policy) {
  if (session.size() < 2)
    throw Error(ErrorCode::invalid_argument, "seal: session needs at least 2 messages");

  TrajectoryBuffer b;
  b.tokens.push_back(Vocabulary::kBos);
  b.masks.push_back(static_cast<uint8_t>(Source::System));
  b.rewards.push_back(0);
  for (const auto& m : session.messages()) {
    const auto ids = vocab.encode(m.text);
    if (ids.empty())
      throw Error(ErrorCode::zero_length, "seal: message encodes to zero tokens: '" + m.text + "'");
    for (TokenId id : ids) {
      b.tokens.push_back(id);
      b.masks.push_back(static_cast<uint8_t>(m.source));
      b.rewards.push_back(0);
    }
    b.tokens.push_back(Vocabulary::kEos);
    b.masks.push_back(static_cast<uint8_t>(m.source));
    b.rewards.push_back(static_cast<int8_t>(m.reward));
  }

  const auto ev = policy.evaluate(b.tokens);
  const size_t n = b.tokens.size();
  b.values.assign(n, 0.0);
  b.logprobs.assign(n, 0.0);
  for (size_t i = 1; i < n; ++i) {
    b.logprobs[i] = ev.logprob(static_cast<Eigen::Index>(i - 1));
    b.values[i] = ev.value(static_cast<Eigen::Index>(i - 1));
  }
  session.mark_sealed();
  b.validate();
  return b;
}

// ------------------------------------------------------------- serialization
//
// "LTCB" | u32 version | u64 n | n*u32 tokens | n*u8 masks | n*f64 values |
// n*f64 logprobs | n*i8 rewards

constexpr uint32_t kBufferFormatVersion = 1;

inline std::vector<uint8_t> serialize(const TrajectoryBuffer& b) {
  b.validate();
  ByteWriter w;
  w.raw("LTCB", 4);
  w.u32(kBufferFormatVersion);
  w.u64(b.size());
  for (auto t : b.tokens) w.u32(t);
  for (auto m : b.masks) w.u8(m);
  for (auto v : b.values) w.f64(v);
  for (auto l : b.logprobs) w.f64(l);
  for (auto r : b.rewards) w.i8(r);
  return w.take();
}

inline TrajectoryBuffer deserialize(const std::vector<uint8_t>& bytes) {
  ByteReader r(bytes);
  char magic[4];
  for (auto& c : magic) c = static_cast<char>(r.u8());
  if (std::string(magic, 4) != "LTCB")
    throw Error(ErrorCode::bad_magic, "not a trajectory buffer");
  if (r.u32() != kBufferFormatVersion)
    throw Error(ErrorCode::bad_version, "unsupported buffer format version");
  const uint64_t n = r.u64();
  if (n == 0) throw Error(ErrorCode::zero_length, "buffer file: zero length");
  // 22 bytes per position; division avoids overflow on corrupt lengths
  if (n > r.remaining() / 22) throw Error(ErrorCode::truncated, "buffer file: truncated");
  TrajectoryBuffer b;
  b.tokens.resize(n);
  b.masks.resize(n);
  b.values.resize(n);
  b.logprobs.resize(n);
  b.rewards.resize(n);
  for (auto& t : b.tokens) t = r.u32();
  for (auto& m : b.masks) m = r.u8();
  for (auto& v : b.values) v = r.f64();
  for (auto& l : b.logprobs) l = r.f64();
  for (auto& rw : b.rewards) rw = r.i8();
  if (!r.done()) throw Error(ErrorCode::trailing_bytes, "buffer file: trailing bytes");
  b.validate();
  return b;
}

inline void save_buffer(const TrajectoryBuffer& b, const std::string& path) {
  const auto bytes = serialize(b);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot open for write: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::io_error, "write failed: " + path);
}

inline TrajectoryBuffer load_buffer(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

inline uint64_t buffer_digest(const TrajectoryBuffer& b) {
  const auto bytes = serialize(b);
  return fnv1a(bytes.data(), bytes.size());
}

// token | word | mask | value | logprob | reward, one row per position
inline std::string render_buffer(const TrajectoryBuffer& b, const Vocabulary* vocab) {
  std::ostringstream out;
  out << std::setw(5) << "pos" << ' ' << std::setw(6) << "token" << ' ' << std::setw(12) << "word"
      << ' ' << std::setw(7) << "mask" << ' ' << std::setw(10) << "value" << ' ' << std::setw(10)
      << "logprob" << ' ' << std::setw(6) << "reward" << '\n';
  for (size_t i = 0; i < b.size(); ++i) {
    std::string word = "?";
    if (vocab && b.tokens[i] < vocab->size()) word = vocab->word_of(b.tokens[i]);
    out << std::setw(5) << i << ' ' << std::setw(6) << b.tokens[i] << ' ' << std::setw(12) << word
        << ' ' << std::setw(7) << source_name(static_cast<Source>(b.masks[i])) << ' '
        << std::setw(10) << std::fixed << std::setprecision(4) << b.values[i] << ' '
        << std::setw(10) << b.logprobs[i] << ' ' << std::setw(6)
        << static_cast<int>(b.rewards[i]) << '\n';
  }
  return out.str();
}

// ------------------------------------------------------------- replay store

// Iteration-indexed store of sealed buffers. Sampling draws uniformly without
// replacement from the most recent `recency_window` iterations.
class ReplayStore {
 public:
  explicit ReplayStore(size_t recency_window = 2) : window_(recency_window) {
    if (window_ == 0)
      throw Error(ErrorCode::invalid_argument, "replay store: window must be positive");
  }

  void insert(int64_t iteration, std::vector<TrajectoryBuffer> buffers) {
    if (!iterations_.empty() && iteration <= iterations_.back().first)
      throw Error(ErrorCode::non_monotone_iteration,
                  "replay insert: iteration " + std::to_string(iteration) +
                      " not greater than last stored " +
                      std::to_string(iterations_.back().first));
    total_ += buffers.size();
    iterations_.emplace_back(iteration, std::move(buffers));
  }

  size_t total_count() const { return total_; }
  size_t iteration_count() const { return iterations_.size(); }
  size_t recency_window() const { return window_; }

  size_t window_count() const {
    size_t n = 0;
    const size_t first = iterations_.size() > window_ ? iterations_.size() - window_ : 0;
    for (size_t g = first; g < iterations_.size(); ++g) n += iterations_[g].second.size();
    return n;
  }

  std::vector<const TrajectoryBuffer*> sample(size_t n, uint64_t rng_seed) const {
    if (iterations_.empty())
      throw Error(ErrorCode::empty_store, "replay sample: store is empty");
    std::vector<const TrajectoryBuffer*> window;
    const size_t first = iterations_.size() > window_ ? iterations_.size() - window_ : 0;
    for (size_t g = first; g < iterations_.size(); ++g)
      for (const auto& b : iterations_[g].second) window.push_back(&b);
    Rng rng(rng_seed);
    rng.shuffle(window);
    if (window.size() > n) window.resize(n);
    return window;
  }

  const std::vector<std::pair<int64_t, std::vector<TrajectoryBuffer>>>& iterations() const {
    return iterations_;
  }

  uint64_t digest() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& [iter, bufs] : iterations_) {
      const auto it64 = static_cast<uint64_t>(iter);
      h = fnv1a(reinterpret_cast<const uint8_t*>(&it64), 8, h);
      for (const auto& b : bufs) {
        const auto bytes = serialize(b);
        h = fnv1a(bytes.data(), bytes.size(), h);
      }
    }
    return h;
  }

 private:
  std::vector<std::pair<int64_t, std::vector<TrajectoryBuffer>>> iterations_;
  size_t window_ = 2;
  size_t total_ = 0;
};

}  // namespace ltc
