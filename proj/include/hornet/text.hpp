#pragma once

#include "hornet/autodiff.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hornet {

// Lowercases, splits on whitespace and strips leading/trailing punctuation
// from each piece. Pieces that end up empty are dropped.
std::vector<std::string> tokenize(std::string_view caption);

struct TokenSequence {
  std::vector<std::size_t> ids;
};

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  Vocabulary();
  // Rebuild from a stored id->token list (index 0 and 1 must be PAD/UNK).
  static Vocabulary from_tokens(std::vector<std::string> id_to_token);

  std::size_t size() const { return id_to_token_.size(); }
  std::size_t id(const std::string& token) const;
  const std::string& token(std::size_t id) const { return id_to_token_.at(id); }
  bool contains(const std::string& token) const { return token_to_id_.count(token) > 0; }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  TokenSequence encode(std::string_view caption) const;
  std::string decode(const TokenSequence& seq) const;

 private:
  void add(std::string token);

  std::unordered_map<std::string, std::size_t> token_to_id_;
  std::vector<std::string> id_to_token_;
};

// Tokens with count >= min_freq get ids in descending frequency order,
// ties broken lexicographically.
Vocabulary build_vocab(const std::vector<std::string>& corpus, std::size_t min_freq = 1);

// e_t = row d_t of the embedding matrix.
std::vector<ad::Tensor> embed(const TokenSequence& seq, const ad::Tensor& embedding);

}  // namespace hornet
