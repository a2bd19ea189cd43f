#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ltc/common.hpp"

namespace ltc {

using TokenId = uint32_t;

// Closed word-level vocabulary shared by the environments and the policy.
//
// Id layout (fixed):
//   0 <pad>   1 <bos>   2 <eos>   3 think:   4 act:   5..14 digits 0-9
//   15.. grammar words in the order given to build_vocab.
//
// Numbers are encoded digit by digit; decode re-joins adjacent digit tokens
// without spaces so "take 12 apples" survives a round trip.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kThink = 3;
  static constexpr TokenId kAct = 4;
  static constexpr TokenId kDigit0 = 5;  // ids 5..14 are "0".."9"
  static constexpr size_t kNumSpecials = 15;
  static constexpr size_t kMaxSize = 512;

  size_t size() const { return words_.size(); }

  bool contains(const std::string& word) const { return id_of_.count(word) > 0; }

  TokenId id_of(const std::string& word) const {
    auto it = id_of_.find(word);
    if (it == id_of_.end())
      throw Error(ErrorCode::out_of_vocabulary, "word not in vocabulary: '" + word + "'");
    return it->second;
  }

  const std::string& word_of(TokenId id) const {
    if (id >= words_.size())
      throw Error(ErrorCode::id_out_of_range,
                  "token id " + std::to_string(id) + " out of range (vocab size " +
                      std::to_string(words_.size()) + ")");
    return words_[id];
  }

  static bool is_digit_word(const std::string& w) {
    if (w.empty()) return false;
    return std::all_of(w.begin(), w.end(), [](unsigned char c) { return std::isdigit(c); });
  }

  bool is_digit_token(TokenId id) const { return id >= kDigit0 && id < kDigit0 + 10; }

  std::vector<TokenId> encode(const std::string& text) const {
    std::vector<TokenId> ids;
    std::istringstream in(text);
    std::string word;
    while (in >> word) {
      lower(word);
      auto it = id_of_.find(word);
      if (it != id_of_.end()) {
        ids.push_back(it->second);
      } else if (is_digit_word(word)) {
        for (char c : word) ids.push_back(kDigit0 + static_cast<TokenId>(c - '0'));
      } else {
        throw Error(ErrorCode::out_of_vocabulary, "cannot encode word: '" + word + "'");
      }
    }
    return ids;
  }

  std::string decode(const std::vector<TokenId>& ids) const {
    std::string out;
    bool prev_digit = false;
    for (size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] >= words_.size())
        throw Error(ErrorCode::id_out_of_range,
                    "token id " + std::to_string(ids[i]) + " out of range at offset " +
                        std::to_string(i));
      const bool digit = is_digit_token(ids[i]);
      if (!out.empty() && !(digit && prev_digit)) out += ' ';
      out += words_[ids[i]];
      prev_digit = digit;
    }
    return out;
  }

  // Whitespace-normalized, lowercased form with adjacent digit words merged;
  // the canonical representative of an encodable string.
  std::string normalize(const std::string& text) const {
    std::istringstream in(text);
    std::string word, out;
    bool prev_digit = false;
    while (in >> word) {
      lower(word);
      const bool digit = is_digit_word(word);
      if (!out.empty() && !(digit && prev_digit)) out += ' ';
      out += word;
      prev_digit = digit;
    }
    return out;
  }

  // one word per line, line number = id
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_error, "cannot open for write: " + path);
    for (const auto& w : words_) out << w << '\n';
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io_error, "cannot open: " + path);
    Vocabulary v;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      v.push_word(line);
    }
    if (v.size() < kNumSpecials)
      throw Error(ErrorCode::truncated, "vocabulary file missing special tokens: " + path);
    return v;
  }

  friend Vocabulary build_vocab(const std::vector<std::string>& grammar_words);

 private:
  static void lower(std::string& w) {
    for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }

  void push_word(const std::string& w) {
    if (id_of_.count(w))
      throw Error(ErrorCode::duplicate_word, "duplicate word: '" + w + "'");
    if (words_.size() >= kMaxSize)
      throw Error(ErrorCode::invalid_argument, "vocabulary exceeds maximum size");
    id_of_[w] = static_cast<TokenId>(words_.size());
    words_.push_back(w);
  }

  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> id_of_;
};

inline Vocabulary build_vocab(const std::vector<std::string>& grammar_words) {
  if (grammar_words.empty())
    throw Error(ErrorCode::empty_input, "build_vocab: grammar word list is empty");
  Vocabulary v;
  v.push_word("<pad>");
  v.push_word("<bos>");
  v.push_word("<eos>");
  v.push_word("think:");
  v.push_word("act:");
  for (int d = 0; d < 10; ++d) v.push_word(std::string(1, static_cast<char>('0' + d)));
  for (std::string w : grammar_words) {
    Vocabulary::lower(w);
    if (w.empty())
      throw Error(ErrorCode::empty_input, "build_vocab: empty grammar word");
    v.push_word(w);  // rejects duplicates after lowercasing, including specials
  }
  return v;
}

}  // namespace ltc
