#include "hornet/text.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <stdexcept>

namespace hornet {

std::vector<std::string> tokenize(std::string_view caption) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < caption.size()) {
    while (i < caption.size() && std::isspace(static_cast<unsigned char>(caption[i]))) ++i;
    std::size_t j = i;
    while (j < caption.size() && !std::isspace(static_cast<unsigned char>(caption[j]))) ++j;
    std::size_t b = i, e = j;
    while (b < e && std::ispunct(static_cast<unsigned char>(caption[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(caption[e - 1]))) --e;
    if (b < e) {
      std::string tok(caption.substr(b, e - b));
      for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      out.push_back(std::move(tok));
    }
    i = j;
  }
  return out;
}

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<unk>");
}

void Vocabulary::add(std::string token) {
  token_to_id_.emplace(token, id_to_token_.size());
  id_to_token_.push_back(std::move(token));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> id_to_token) {
  if (id_to_token.size() < 2) throw std::invalid_argument("vocabulary: missing PAD/UNK entries");
  Vocabulary v;
  for (std::size_t i = 2; i < id_to_token.size(); ++i) {
    if (v.contains(id_to_token[i]))
      throw std::invalid_argument("vocabulary: duplicate token '" + id_to_token[i] + "'");
    v.add(std::move(id_to_token[i]));
  }
  return v;
}

std::size_t Vocabulary::id(const std::string& token) const {
  const auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

TokenSequence Vocabulary::encode(std::string_view caption) const {
  TokenSequence seq;
  for (const auto& tok : tokenize(caption)) seq.ids.push_back(id(tok));
  if (seq.ids.empty()) seq.ids.push_back(kUnk);
  return seq;
}

std::string Vocabulary::decode(const TokenSequence& seq) const {
  std::string out;
  for (std::size_t id : seq.ids) {
    if (!out.empty()) out += ' ';
    out += token(id);
  }
  return out;
}

Vocabulary build_vocab(const std::vector<std::string>& corpus, std::size_t min_freq) {
  if (corpus.empty()) throw std::invalid_argument("build_vocab: empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& caption : corpus)
    for (auto& tok : tokenize(caption)) ++counts[tok];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // counts is already lexicographic, so a stable sort keeps ties in order.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens{"<pad>", "<unk>"};
  for (auto& [tok, n] : ranked)
    if (n >= min_freq && tok != "<pad>" && tok != "<unk>") tokens.push_back(tok);
  return Vocabulary::from_tokens(std::move(tokens));
}

std::vector<ad::Tensor> embed(const TokenSequence& seq, const ad::Tensor& embedding) {
  std::vector<ad::Tensor> out;
  out.reserve(seq.ids.size());
  for (std::size_t id : seq.ids) out.push_back(ad::row(embedding, id));
  return out;
}

}  // namespace hornet
