#include "hornet/autodiff.hpp"
#include "hornet/rng.hpp"
#include "hornet/text.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace hornet;

TEST_CASE("tokenize lowercases, splits on whitespace and strips punctuation") {
  CHECK(tokenize("A red  shirt.") == std::vector<std::string>{"a", "red", "shirt"});
  CHECK(tokenize("  ").empty());
  CHECK(tokenize("(Blue), jeans!") == std::vector<std::string>{"blue", "jeans"});
}

TEST_CASE("build_vocab on two captions") {
  const auto v = build_vocab({"a red shirt", "a blue shirt"});
  CHECK(v.size() == 6);  // pad, unk, a, shirt, blue, red
  CHECK(v.token(Vocabulary::kPad) == "<pad>");
  CHECK(v.token(Vocabulary::kUnk) == "<unk>");
  // Frequency first, then lexicographic.
  CHECK(v.id("a") == 2);
  CHECK(v.id("shirt") == 3);
  CHECK(v.id("blue") == 4);
  CHECK(v.id("red") == 5);
}

TEST_CASE("encode maps unseen tokens to UNK and empty captions to a single UNK") {
  const auto v = build_vocab({"red shirt"});
  const auto seq = v.encode("A red shirt.");
  CHECK(seq.ids == std::vector<std::size_t>{Vocabulary::kUnk, v.id("red"), v.id("shirt")});
  CHECK(v.encode("").ids == std::vector<std::size_t>{Vocabulary::kUnk});
  CHECK(v.encode("...").ids == std::vector<std::size_t>{Vocabulary::kUnk});
}

TEST_CASE("min_freq drops rare tokens") {
  const auto v = build_vocab({"red shirt", "red hat"}, 2);
  CHECK(v.contains("red"));
  CHECK_FALSE(v.contains("shirt"));
  CHECK(v.size() == 3);
}

TEST_CASE("empty corpus is rejected") { CHECK_THROWS(build_vocab({})); }

TEST_CASE("property: vocabulary construction is deterministic and ids are contiguous") {
  Rng rng(4);
  std::vector<std::string> corpus;
  for (int i = 0; i < 50; ++i) {
    std::string c;
    for (int t = 0; t < 6; ++t) c += "w" + std::to_string(rng.below(20)) + " ";
    corpus.push_back(c);
  }
  const auto a = build_vocab(corpus), b = build_vocab(corpus);
  CHECK(a.tokens() == b.tokens());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.id(a.token(i)) == i);
}

TEST_CASE("property: encode is idempotent through decode for in-vocabulary captions") {
  Rng rng(8);
  const auto v = build_vocab({"alpha beta gamma delta epsilon zeta"});
  for (int trial = 0; trial < 100; ++trial) {
    std::string caption;
    const std::size_t n = 1 + rng.below(10);
    for (std::size_t t = 0; t < n; ++t) caption += v.token(2 + rng.below(6)) + " ";
    const auto once = v.encode(caption);
    CHECK(v.encode(v.decode(once)).ids == once.ids);
  }
}

TEST_CASE("embed with an identity table returns one-hot rows") {
  std::vector<double> eye(9, 0.0);
  for (int i = 0; i < 3; ++i) eye[i * 4] = 1.0;
  const auto W = ad::Tensor::constant({3, 3}, eye);
  const auto rows = embed(TokenSequence{{2, 0, 1}}, W);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0][2] == 1.0);
  CHECK(rows[1][0] == 1.0);
  CHECK(rows[2][1] == 1.0);
}

TEST_CASE("repeated tokens give identical vectors") {
  Rng rng(1);
  std::vector<double> w(12);
  for (double& x : w) x = rng.uniform(-1, 1);
  const auto W = ad::Tensor::parameter({4, 3}, w);
  const auto rows = embed(TokenSequence{{3, 3}}, W);
  for (std::size_t k = 0; k < 3; ++k) CHECK(rows[0][k] == rows[1][k]);
  CHECK_THROWS_AS(embed(TokenSequence{{4}}, W), std::out_of_range);
}

TEST_CASE("embedding gradient is nonzero exactly on the used rows") {
  Rng rng(2);
  std::vector<double> w(5 * 3);
  for (double& x : w) x = rng.uniform(-1, 1);
  auto W = ad::Tensor::parameter({5, 3}, w);
  const TokenSequence seq{{1, 3, 3}};
  auto loss = [&] {
    const auto rows = embed(seq, W);
    return ad::sum(ad::add_n(std::span<const ad::Tensor>(rows)));
  };
  ad::backward(loss());
  const auto numeric = oracle::numeric_gradient([&] { return loss().item(); }, W.mutable_data(), 1e-5);
  CHECK(oracle::max_rel_err(W.grad(), numeric) < 1e-6);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t k = 0; k < 3; ++k) {
      const double expected = r == 1 ? 1.0 : r == 3 ? 2.0 : 0.0;
      CHECK(W.grad()[r * 3 + k] == expected);
    }
}
