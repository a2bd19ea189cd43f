#pragma once

#include <array>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ltc/common.hpp"
#include "ltc/vocab.hpp"

namespace ltc {

enum class EnvKind { GridHouse, KBHop, ArithGen };

inline const char* env_kind_name(EnvKind k) {
  switch (k) {
    case EnvKind::GridHouse: return "gridhouse";
    case EnvKind::KBHop: return "kbhop";
    case EnvKind::ArithGen: return "arithgen";
  }
  return "?";
}

inline EnvKind parse_env_kind(const std::string& s) {
  if (s == "gridhouse") return EnvKind::GridHouse;
  if (s == "kbhop") return EnvKind::KBHop;
  if (s == "arithgen") return EnvKind::ArithGen;
  throw Error(ErrorCode::invalid_argument, "unknown environment kind: '" + s + "'");
}

struct EnvParams {
  size_t max_steps = 20;
  size_t kb_size = 12;          // KBHop fact count
  bool gridhouse_pick2 = false; // two-object hard mode

  bool operator==(const EnvParams&) const = default;
};

struct StepResult {
  std::string observation;
  int reward;  // in {-1, 0, +1}
  bool done;
};

// ------------------------------------------------------------------ problems

// An arithmetic question with a known integer answer. Operands are drawn from
// 1..20; templates are fixed expression shapes with 2-4 operations, and
// division templates always divide evenly.
struct Problem {
  std::string question;
  int64_t answer = 0;
  int template_id = 0;
  std::vector<int64_t> operands;
};

constexpr int kNumArithTemplates = 6;

// Template shapes, 2-4 operations each. Operand constraints keep every
// intermediate non-negative, division exact, and the worked solution within
// one generation budget (32 tokens).
inline int64_t eval_arith_template(int template_id, const std::vector<int64_t>& ops) {
  switch (template_id) {
    case 0: return ops[0] + ops[1] - ops[2];
    case 1: return ops[0] * ops[1] + ops[2];
    case 2: return (ops[0] + ops[1]) * ops[2];
    case 3: return ops[0] + ops[1] - ops[2] + ops[3] - ops[4];
    case 4: return (ops[0] + ops[1]) * (ops[2] - ops[3]);
    case 5: return (ops[0] * ops[1] + ops[2]) / ops[3];
  }
  throw Error(ErrorCode::invalid_argument, "unknown arithmetic template");
}

namespace detail {

inline std::string num(int64_t v) { return std::to_string(v); }

inline std::vector<int64_t> draw_arith_operands(int template_id, Rng& rng) {
  // additive slots span 1..20; multiplicative slots stay mostly single-digit
  // so the product table a small model must internalize remains compact
  auto add_op = [&] { return static_cast<int64_t>(rng.next_below(20)) + 1; };
  auto small_op = [&] { return static_cast<int64_t>(rng.next_below(9)) + 1; };
  auto mul_op = [&] {
    if (rng.next_below(4) < 3) return small_op();
    return static_cast<int64_t>(rng.next_below(11)) + 10;
  };
  for (;;) {
    std::vector<int64_t> ops;
    switch (template_id) {
      case 0:
        ops = {add_op(), add_op(), add_op()};
        if (ops[0] + ops[1] >= ops[2]) return ops;
        break;
      case 1:
        return {mul_op(), mul_op(), add_op()};
      case 2:
        return {add_op(), add_op(), mul_op()};
      case 3: {
        // running value stays a single digit at every step
        ops = {small_op(), small_op(), small_op(), small_op(), small_op()};
        const int64_t s1 = ops[0] + ops[1];
        const int64_t s2 = s1 - ops[2];
        const int64_t s3 = s2 + ops[3];
        if (s1 <= 9 && s2 >= 0 && s3 <= 9 && s3 - ops[4] >= 0) return ops;
        break;
      }
      case 4:
        ops = {add_op(), add_op(), add_op(), add_op()};
        if (ops[2] > ops[3]) return ops;
        break;
      case 5: {
        const int64_t a = small_op(), b = small_op();
        const int64_t s1 = a * b;
        const int64_t c = 1 + static_cast<int64_t>(rng.next_below(
                                  static_cast<uint64_t>(std::min<int64_t>(20, 99 - s1))));
        const int64_t s2 = s1 + c;
        std::vector<int64_t> divisors;
        for (int64_t d = 2; d <= 9; ++d)
          if (s2 % d == 0) divisors.push_back(d);
        if (!divisors.empty()) return {a, b, c, divisors[rng.next_below(divisors.size())]};
        break;
      }
      default:
        throw Error(ErrorCode::invalid_argument, "unknown arithmetic template");
    }
  }
}

inline bool valid_arith_operands(int template_id, const std::vector<int64_t>& ops) {
  auto in = [](int64_t v, int64_t lo, int64_t hi) { return v >= lo && v <= hi; };
  switch (template_id) {
    case 0:
      return ops.size() == 3 && in(ops[0], 1, 20) && in(ops[1], 1, 20) && in(ops[2], 1, 20) &&
             ops[0] + ops[1] >= ops[2];
    case 1:
    case 2:
      return ops.size() == 3 && in(ops[0], 1, 20) && in(ops[1], 1, 20) && in(ops[2], 1, 20);
    case 3: {
      if (ops.size() != 5) return false;
      for (int64_t v : ops)
        if (!in(v, 1, 9)) return false;
      const int64_t s1 = ops[0] + ops[1];
      const int64_t s2 = s1 - ops[2];
      const int64_t s3 = s2 + ops[3];
      return s1 <= 9 && s2 >= 0 && s3 <= 9 && s3 - ops[4] >= 0;
    }
    case 4:
      return ops.size() == 4 && in(ops[0], 1, 20) && in(ops[1], 1, 20) && in(ops[2], 1, 20) &&
             in(ops[3], 1, 20) && ops[2] > ops[3];
    case 5: {
      if (ops.size() != 4) return false;
      if (!in(ops[0], 1, 9) || !in(ops[1], 1, 9) || !in(ops[2], 1, 20) || !in(ops[3], 2, 9))
        return false;
      const int64_t s2 = ops[0] * ops[1] + ops[2];
      return s2 <= 99 && s2 % ops[3] == 0;
    }
  }
  return false;
}

inline std::string arith_question(int template_id, const std::vector<int64_t>& o) {
  switch (template_id) {
    case 0: return "what is " + num(o[0]) + " + " + num(o[1]) + " - " + num(o[2]) + " ?";
    case 1: return "what is " + num(o[0]) + " * " + num(o[1]) + " + " + num(o[2]) + " ?";
    case 2: return "what is ( " + num(o[0]) + " + " + num(o[1]) + " ) * " + num(o[2]) + " ?";
    case 3:
      return "what is " + num(o[0]) + " + " + num(o[1]) + " - " + num(o[2]) + " + " + num(o[3]) +
             " - " + num(o[4]) + " ?";
    case 4:
      return "what is ( " + num(o[0]) + " + " + num(o[1]) + " ) * ( " + num(o[2]) + " - " +
             num(o[3]) + " ) ?";
    case 5:
      return "what is ( " + num(o[0]) + " * " + num(o[1]) + " + " + num(o[2]) + " ) / " +
             num(o[3]) + " ?";
  }
  throw Error(ErrorCode::invalid_argument, "unknown arithmetic template");
}

}  // namespace detail

inline Problem make_problem(uint64_t seed) {
  Rng rng(mix_seed(seed, 0xA717u));
  Problem p;
  p.template_id = static_cast<int>(rng.next_below(kNumArithTemplates));
  p.operands = detail::draw_arith_operands(p.template_id, rng);
  p.answer = eval_arith_template(p.template_id, p.operands);
  p.question = detail::arith_question(p.template_id, p.operands);
  return p;
}

// Step-by-step rendering of the oracle computation, ending in "answer: <n>".
inline std::string canonical_solution(const Problem& p) {
  using detail::num;
  const auto& o = p.operands;
  std::string s;
  switch (p.template_id) {
    case 0: {
      const int64_t s1 = o[0] + o[1];
      s = num(o[0]) + " + " + num(o[1]) + " = " + num(s1) + " . " + num(s1) + " - " + num(o[2]) +
          " = " + num(p.answer) + " .";
      break;
    }
    case 1: {
      const int64_t s1 = o[0] * o[1];
      s = num(o[0]) + " * " + num(o[1]) + " = " + num(s1) + " . " + num(s1) + " + " + num(o[2]) +
          " = " + num(p.answer) + " .";
      break;
    }
    case 2: {
      const int64_t s1 = o[0] + o[1];
      s = num(o[0]) + " + " + num(o[1]) + " = " + num(s1) + " . " + num(s1) + " * " + num(o[2]) +
          " = " + num(p.answer) + " .";
      break;
    }
    case 3: {
      const int64_t s1 = o[0] + o[1], s2 = s1 - o[2], s3 = s2 + o[3];
      s = num(o[0]) + " + " + num(o[1]) + " = " + num(s1) + " . " + num(s1) + " - " + num(o[2]) +
          " = " + num(s2) + " . " + num(s2) + " + " + num(o[3]) + " = " + num(s3) + " . " +
          num(s3) + " - " + num(o[4]) + " = " + num(p.answer) + " .";
      break;
    }
    case 4: {
      const int64_t s1 = o[0] + o[1], s2 = o[2] - o[3];
      s = num(o[0]) + " + " + num(o[1]) + " = " + num(s1) + " . " + num(o[2]) + " - " + num(o[3]) +
          " = " + num(s2) + " . " + num(s1) + " * " + num(s2) + " = " + num(p.answer) + " .";
      break;
    }
    case 5: {
      const int64_t s1 = o[0] * o[1], s2 = s1 + o[2];
      s = num(o[0]) + " * " + num(o[1]) + " = " + num(s1) + " . " + num(s1) + " + " + num(o[2]) +
          " = " + num(s2) + " . " + num(s2) + " / " + num(o[3]) + " = " + num(p.answer) + " .";
      break;
    }
    default:
      throw Error(ErrorCode::invalid_argument, "unknown arithmetic template");
  }
  return s + " answer: " + num(p.answer);
}

// Finds the last "answer: <number>" in a whitespace-tokenized text.
inline std::optional<int64_t> parse_answer(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> words;
  std::string w;
  while (in >> w) words.push_back(w);
  for (size_t i = words.size(); i-- > 0;) {
    if (words[i] == "answer:" && i + 1 < words.size() && Vocabulary::is_digit_word(words[i + 1])) {
      try {
        return std::stoll(words[i + 1]);
      } catch (const std::exception&) {
        return std::nullopt;
      }
    }
  }
  return std::nullopt;
}

// Grades an answer text against the oracle; the corrected text always carries
// the full step-by-step rendering and the oracle answer.
inline std::pair<int, std::string> teacher_check(const Problem& p, const std::string& answer_text) {
  const auto parsed = parse_answer(answer_text);
  const bool correct = parsed.has_value() && *parsed == p.answer;
  const std::string corrected = (correct ? "yes . " : "no . ") + canonical_solution(p);
  return {correct ? 1 : -1, corrected};
}

// Same template, operands resampled until at least one differs. Operands move
// by small steps from the original, so a session repeatedly exercises nearby
// facts rather than jumping across the whole operand space.
inline Problem teacher_analogue(const Problem& p, uint64_t rng_seed) {
  Rng rng(mix_seed(rng_seed, 0xA1060ull));
  Problem q;
  q.template_id = p.template_id;
  for (int attempt = 0; attempt < 64; ++attempt) {
    std::vector<int64_t> ops = p.operands;
    for (auto& v : ops) {
      const int64_t delta = static_cast<int64_t>(rng.next_below(7)) - 3;  // -3..3
      v = std::max<int64_t>(1, v + delta);
    }
    if (q.template_id == 5) {
      // refit the divisor to the perturbed dividend
      const int64_t s2 = ops[0] * ops[1] + ops[2];
      std::vector<int64_t> divisors;
      for (int64_t d = 2; d <= 9; ++d)
        if (s2 > 0 && s2 % d == 0) divisors.push_back(d);
      if (divisors.empty()) continue;
      ops[3] = divisors[rng.next_below(divisors.size())];
    }
    if (ops == p.operands || !detail::valid_arith_operands(q.template_id, ops)) continue;
    q.operands = std::move(ops);
    q.answer = eval_arith_template(q.template_id, q.operands);
    q.question = detail::arith_question(q.template_id, q.operands);
    return q;
  }
  // perturbation failed to land on a valid neighbor; fall back to a fresh draw
  for (;;) {
    q.operands = detail::draw_arith_operands(q.template_id, rng);
    if (q.operands == p.operands) continue;
    q.answer = eval_arith_template(q.template_id, q.operands);
    q.question = detail::arith_question(q.template_id, q.operands);
    return q;
  }
}

// --------------------------------------------------------------- environment

class Env {
 public:
  virtual ~Env() = default;
  virtual EnvKind kind() const = 0;
  virtual const std::string& task_text() const = 0;
  virtual StepResult step(const std::string& action_text) = 0;
  // next action on a shortest successful plan from the current state
  virtual std::string expert_action() const = 0;
  bool done() const { return done_; }
  size_t steps_taken() const { return steps_; }

 protected:
  // budget accounting shared by all kinds; returns a result when the episode
  // must end before the action is processed
  std::optional<StepResult> begin_step(size_t max_steps) {
    if (done_) throw Error(ErrorCode::invalid_argument, "step: episode already finished");
    ++steps_;
    if (steps_ > max_steps) {
      done_ = true;
      return StepResult{"task failed .", -1, true};
    }
    return std::nullopt;
  }

  static std::vector<std::string> split_words(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
  }

  size_t steps_ = 0;
  bool done_ = false;
};

// ------------------------------------------------------------------ gridhouse

// Four fixed container locations; drawer and box start closed. The task is to
// carry an object (two in pick2 mode) to a target location.
class GridHouseEnv : public Env {
 public:
  static constexpr std::array<const char*, 4> kLocations = {"table", "drawer", "shelf", "box"};
  static constexpr std::array<const char*, 8> kObjectPool = {"mug", "apple", "book", "key",
                                                             "pen", "sock", "coin", "cup"};

  GridHouseEnv(uint64_t seed, const EnvParams& params) : params_(params) {
    Rng rng(mix_seed(seed, 0x6711d));
    open_ = {true, false, true, false};
    const size_t n_obj = 3 + rng.next_below(3);
    std::vector<size_t> pool_idx(kObjectPool.size());
    for (size_t i = 0; i < pool_idx.size(); ++i) pool_idx[i] = i;
    rng.shuffle(pool_idx);
    for (size_t i = 0; i < n_obj; ++i) {
      objects_.push_back(kObjectPool[pool_idx[i]]);
      obj_loc_.push_back(static_cast<int>(rng.next_below(4)));
    }
    agent_loc_ = static_cast<int>(rng.next_below(4));

    const size_t n_task = params_.gridhouse_pick2 ? 2 : 1;
    std::vector<size_t> obj_order(objects_.size());
    for (size_t i = 0; i < obj_order.size(); ++i) obj_order[i] = i;
    rng.shuffle(obj_order);
    for (size_t i = 0; i < n_task; ++i) task_objs_.push_back(obj_order[i]);
    // a destination none of the task objects already occupies
    for (;;) {
      task_dst_ = static_cast<int>(rng.next_below(4));
      bool clash = false;
      for (size_t oi : task_objs_)
        if (obj_loc_[oi] == task_dst_) clash = true;
      if (!clash) break;
    }

    std::string task = "task put " + objects_[task_objs_[0]];
    if (task_objs_.size() == 2) task += " and " + objects_[task_objs_[1]];
    task += " in " + std::string(kLocations[task_dst_]) + " . you are at " +
            kLocations[agent_loc_] + " . locations";
    for (const auto* l : kLocations) task += " " + std::string(l);
    task += " .";
    // task objects are announced so the solution is decidable from text alone
    for (size_t oi : task_objs_)
      task += " " + objects_[oi] + " is at " +
              kLocations[static_cast<size_t>(obj_loc_[oi])] + " .";
    task_text_ = task;
  }

  EnvKind kind() const override { return EnvKind::GridHouse; }
  const std::string& task_text() const override { return task_text_; }

  StepResult step(const std::string& action_text) override {
    if (auto early = begin_step(params_.max_steps)) return *early;
    const auto words = split_words(action_text);
    if (words.size() == 3 && words[0] == "go" && words[1] == "to") {
      const int loc = loc_index(words[2]);
      if (loc >= 0) {
        agent_loc_ = loc;
        return {describe(agent_loc_), 0, false};
      }
    } else if (words.size() == 2 && words[0] == "open") {
      const int loc = loc_index(words[1]);
      if (loc == agent_loc_ && !open_[static_cast<size_t>(loc)]) {
        open_[static_cast<size_t>(loc)] = true;
        return {std::string(kLocations[static_cast<size_t>(loc)]) + " is open . " + contents(loc),
                0, false};
      }
    } else if (words.size() == 2 && words[0] == "take") {
      const int oi = obj_index(words[1]);
      if (oi >= 0 && obj_loc_[static_cast<size_t>(oi)] == agent_loc_ &&
          open_[static_cast<size_t>(agent_loc_)] && held_index() < 0) {
        obj_loc_[static_cast<size_t>(oi)] = -1;
        return {"you take " + objects_[static_cast<size_t>(oi)] + " .", 0, false};
      }
    } else if (words.size() == 4 && words[0] == "put" && words[2] == "in") {
      const int oi = obj_index(words[1]);
      const int loc = loc_index(words[3]);
      if (oi >= 0 && loc == agent_loc_ && obj_loc_[static_cast<size_t>(oi)] == -1 &&
          open_[static_cast<size_t>(loc)]) {
        obj_loc_[static_cast<size_t>(oi)] = loc;
        if (task_complete()) {
          done_ = true;
          return {"task done .", 1, true};
        }
        return {"you put " + objects_[static_cast<size_t>(oi)] + " in " + kLocations[static_cast<size_t>(loc)] + " .",
                0, false};
      }
    } else if (words.size() == 1 && words[0] == "look") {
      return {describe(agent_loc_), 0, false};
    }
    return {"nothing happens .", 0, false};
  }

  std::string expert_action() const override {
    for (size_t oi : task_objs_) {
      if (obj_loc_[oi] == task_dst_) continue;  // already delivered
      if (obj_loc_[oi] >= 0) {
        const int loc = obj_loc_[oi];
        if (agent_loc_ != loc) return "go to " + std::string(kLocations[static_cast<size_t>(loc)]);
        if (!open_[static_cast<size_t>(loc)]) return "open " + std::string(kLocations[static_cast<size_t>(loc)]);
        return "take " + objects_[oi];
      }
      // held: bring it to the destination
      if (agent_loc_ != task_dst_) return "go to " + std::string(kLocations[static_cast<size_t>(task_dst_)]);
      if (!open_[static_cast<size_t>(task_dst_)]) return "open " + std::string(kLocations[static_cast<size_t>(task_dst_)]);
      return "put " + objects_[oi] + " in " + kLocations[static_cast<size_t>(task_dst_)];
    }
    return "look";  // unreachable while the task is unfinished
  }

 private:
  int loc_index(const std::string& w) const {
    for (size_t i = 0; i < kLocations.size(); ++i)
      if (w == kLocations[i]) return static_cast<int>(i);
    return -1;
  }
  int obj_index(const std::string& w) const {
    for (size_t i = 0; i < objects_.size(); ++i)
      if (w == objects_[i]) return static_cast<int>(i);
    return -1;
  }
  int held_index() const {
    for (size_t i = 0; i < objects_.size(); ++i)
      if (obj_loc_[i] == -1) return static_cast<int>(i);
    return -1;
  }
  bool task_complete() const {
    for (size_t oi : task_objs_)
      if (obj_loc_[oi] != task_dst_) return false;
    return true;
  }
  std::string contents(int loc) const {
    std::string objs;
    for (size_t i = 0; i < objects_.size(); ++i)
      if (obj_loc_[i] == loc) objs += (objs.empty() ? "" : " ") + objects_[i];
    return objs.empty() ? "you see nothing ." : "you see " + objs + " .";
  }
  std::string describe(int loc) const {
    std::string s = "you are at " + std::string(kLocations[static_cast<size_t>(loc)]) + " . ";
    if (!open_[static_cast<size_t>(loc)]) return s + "it is closed .";
    return s + contents(loc);
  }

  EnvParams params_;
  std::array<bool, 4> open_{};
  std::vector<std::string> objects_;
  std::vector<int> obj_loc_;  // -1 = in hand
  int agent_loc_ = 0;
  std::vector<size_t> task_objs_;
  int task_dst_ = 0;
  std::string task_text_;
};

// --------------------------------------------------------------------- kbhop

// A small store of subject-relation-object facts with a planted two-hop chain
// and the question "what is <rel2> of <rel1> of <entity> ?". Relations are
// functional per subject, so the answer is unique.
class KBHopEnv : public Env {
 public:
  static constexpr std::array<const char*, 16> kEntities = {
      "anna", "bob", "carl", "dana", "emma", "fred", "gina", "hugo",
      "iris", "jack", "kate", "liam", "mona", "nora", "otto", "pete"};
  static constexpr std::array<const char*, 6> kRelations = {"father", "mother", "friend",
                                                            "boss",   "teacher", "neighbor"};

  struct Fact {
    std::string subj, rel, obj;
  };

  KBHopEnv(uint64_t seed, const EnvParams& params) : params_(params) {
    if (params_.kb_size < 2)
      throw Error(ErrorCode::invalid_argument, "kbhop: kb_size must be at least 2");
    Rng rng(mix_seed(seed, 0x50b));
    std::vector<size_t> ents(kEntities.size());
    for (size_t i = 0; i < ents.size(); ++i) ents[i] = i;
    rng.shuffle(ents);
    entity_ = kEntities[ents[0]];
    mid_ = kEntities[ents[1]];
    answer_ = kEntities[ents[2]];
    rel1_ = kRelations[rng.next_below(kRelations.size())];
    rel2_ = kRelations[rng.next_below(kRelations.size())];
    facts_.push_back({entity_, rel1_, mid_});
    facts_.push_back({mid_, rel2_, answer_});
    std::set<std::pair<std::string, std::string>> keys = {{entity_, rel1_}, {mid_, rel2_}};
    while (facts_.size() < params_.kb_size) {
      const std::string subj = kEntities[rng.next_below(kEntities.size())];
      const std::string rel = kRelations[rng.next_below(kRelations.size())];
      if (!keys.insert({subj, rel}).second) continue;
      const std::string obj = kEntities[rng.next_below(kEntities.size())];
      facts_.push_back({subj, rel, obj});
    }
    task_text_ = "what is " + rel2_ + " of " + rel1_ + " of " + entity_ + " ?";
  }

  EnvKind kind() const override { return EnvKind::KBHop; }
  const std::string& task_text() const override { return task_text_; }
  const std::vector<Fact>& facts() const { return facts_; }
  const std::string& oracle_answer() const { return answer_; }

  StepResult step(const std::string& action_text) override {
    if (auto early = begin_step(params_.max_steps)) return *early;
    const auto words = strip_brackets(split_words(action_text));
    if (words.size() == 2 && words[0] == "search") {
      searched_.insert(words[1]);
      std::string out;
      for (const auto& f : facts_)
        if (f.subj == words[1]) out += (out.empty() ? "" : " ") + f.rel + " of " + f.subj + " is " + f.obj + " .";
      return {out.empty() ? "no facts found ." : out, 0, false};
    }
    if (words.size() == 2 && words[0] == "finish") {
      if (words[1] == answer_) {
        done_ = true;
        return {"task done .", 1, true};
      }
      return {"that is wrong .", 0, false};
    }
    return {"nothing happens .", 0, false};
  }

  std::string expert_action() const override {
    if (!searched_.count(entity_)) return "search [ " + entity_ + " ]";
    if (!searched_.count(mid_)) return "search [ " + mid_ + " ]";
    return "finish [ " + answer_ + " ]";
  }

 private:
  static std::vector<std::string> strip_brackets(std::vector<std::string> words) {
    std::vector<std::string> out;
    for (auto& w : words)
      if (w != "[" && w != "]") out.push_back(std::move(w));
    return out;
  }

  EnvParams params_;
  std::vector<Fact> facts_;
  std::string entity_, mid_, answer_, rel1_, rel2_;
  std::set<std::string> searched_;
  std::string task_text_;
};

// ------------------------------------------------------------------- arithgen

// Wraps a Problem in the step interface: an action containing "answer: <n>"
// is graded against the oracle.
class ArithGenEnv : public Env {
 public:
  ArithGenEnv(uint64_t seed, const EnvParams& params)
      : params_(params), problem_(make_problem(seed)) {}

  EnvKind kind() const override { return EnvKind::ArithGen; }
  const std::string& task_text() const override { return problem_.question; }
  const Problem& problem() const { return problem_; }

  StepResult step(const std::string& action_text) override {
    if (auto early = begin_step(params_.max_steps)) return *early;
    const auto parsed = parse_answer(action_text);
    if (!parsed) return {"nothing happens .", 0, false};
    if (*parsed == problem_.answer) {
      done_ = true;
      return {"task done .", 1, true};
    }
    return {"that is wrong .", 0, false};
  }

  std::string expert_action() const override { return canonical_solution(problem_); }

 private:
  EnvParams params_;
  Problem problem_;
};

inline std::unique_ptr<Env> make_env(EnvKind kind, uint64_t seed, const EnvParams& params = {}) {
  switch (kind) {
    case EnvKind::GridHouse: return std::make_unique<GridHouseEnv>(seed, params);
    case EnvKind::KBHop: return std::make_unique<KBHopEnv>(seed, params);
    case EnvKind::ArithGen: return std::make_unique<ArithGenEnv>(seed, params);
  }
  throw Error(ErrorCode::invalid_argument, "unknown environment kind");
}

// Every word any environment can emit or accept; the shared vocabulary is
// built from this list at startup.
inline std::vector<std::string> env_grammar_words() {
  std::vector<std::string> words = {
      // shared phrasing
      "task", "you", "are", "at", "it", "is", "the", "see", "nothing", "happens", "done",
      "failed", "locations", "no", "yes", "that", "wrong", "what", "of", "?", ".",
      // gridhouse
      "put", "in", "go", "to", "open", "take", "look", "closed", "and",
      // kbhop
      "search", "finish", "[", "]", "facts", "found",
      // arithmetic
      "+", "-", "*", "/", "(", ")", "=", "answer:",
  };
  for (const auto* w : GridHouseEnv::kLocations) words.emplace_back(w);
  for (const auto* w : GridHouseEnv::kObjectPool) words.emplace_back(w);
  for (const auto* w : KBHopEnv::kEntities) words.emplace_back(w);
  for (const auto* w : KBHopEnv::kRelations) words.emplace_back(w);
  return words;
}

inline Vocabulary make_env_vocab() { return build_vocab(env_grammar_words()); }

}  // namespace ltc
