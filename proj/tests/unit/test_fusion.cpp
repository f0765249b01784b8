#include "hornet/fusion.hpp"
#include "hornet/rng.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace hornet;
using hornet::ad::Tensor;

namespace {

Tensor random_tensor(ad::Shape shape, Rng& rng, bool grad = true, double scale = 1.0) {
  std::vector<double> v(ad::shape_size(shape));
  for (double& x : v) x = scale * rng.uniform(-1.0, 1.0);
  return grad ? Tensor::parameter(std::move(shape), v) : Tensor::constant(std::move(shape), v);
}

double check_gradients(const std::function<Tensor()>& loss, std::vector<ad::NamedTensor> params) {
  for (auto& nt : params) nt.tensor.zero_grad();
  ad::backward(loss());
  double worst = 0.0;
  for (auto& nt : params) {
    std::vector<double> analytic(nt.tensor.grad().begin(), nt.tensor.grad().end());
    const auto numeric =
        oracle::numeric_gradient([&] { return loss().item(); }, nt.tensor.mutable_data(), 1e-6);
    worst = std::max(worst, oracle::max_rel_err(analytic, numeric));
  }
  return worst;
}

}  // namespace

TEST_CASE("fused dimension at the reference sizes is 2304") {
  Rng rng(1);
  const auto p = FusionParams::init(512, 256, 2048, 10, rng);
  const Tensor f = fuse(Tensor::zeros({512}), Tensor::zeros({2048}), p);
  CHECK(f.shape() == ad::Shape{2304});
  CHECK(p.fused_dim(2048) == 2304);
}

TEST_CASE("fuse with a zero projection keeps only the bias on the language half") {
  Rng rng(2);
  auto p = FusionParams::init(4, 3, 5, 2, rng);
  for (double& w : p.w_fc.mutable_data()) w = 0.0;
  const Tensor F = random_tensor({5}, rng, false);
  const Tensor f = fuse(random_tensor({4}, rng, false), F, p);
  for (std::size_t i = 0; i < 3; ++i) CHECK(f[i] == p.b_fc[i]);
  for (std::size_t i = 0; i < 5; ++i) CHECK(f[3 + i] == F[i]);
}

TEST_CASE("property: fuse preserves the visual component verbatim") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = FusionParams::init(3, 2, 4, 2, rng);
    const Tensor F = random_tensor({4}, rng, false, 10.0);
    const Tensor f = fuse(random_tensor({3}, rng, false), F, p);
    for (std::size_t i = 0; i < 4; ++i) CHECK(f[2 + i] == F[i]);
  }
}

TEST_CASE("fuse gradient matches finite differences") {
  Rng rng(4);
  const auto p = FusionParams::init(3, 2, 4, 2, rng);
  const Tensor h = random_tensor({3}, rng), F = random_tensor({4}, rng, false);
  const Tensor w = random_tensor({6}, rng, false);
  auto loss = [&] { return ad::sum(ad::hadamard(fuse(h, F, p), w)); };
  auto params = p.named();
  params.push_back({"h", h});
  CHECK(check_gradients(loss, params) < 1e-6);
}

TEST_CASE("fuse rejects a wrong visual dimension") {
  Rng rng(5);
  const auto p = FusionParams::init(3, 2, 4, 2, rng);
  CHECK_THROWS_AS(fuse(Tensor::zeros({3}), Tensor::zeros({5}), p), ad::ShapeError);
}

TEST_CASE("id_loss with uniform logits over K=4 is ln 4") {
  const Tensor theta = Tensor::zeros({4, 3});
  CHECK(id_loss(Tensor::vector({1.0, 2.0, 3.0}), 2, theta).item() ==
        doctest::Approx(std::log(4.0)).epsilon(1e-15));
}

TEST_CASE("id_loss with a margin of 20 is essentially zero") {
  // theta picks out the single coordinate; logits (20, 0, 0).
  const Tensor theta = Tensor::constant({3, 1}, {1.0, 0.0, 0.0});
  const double l = id_loss(Tensor::vector({20.0}), 0, theta).item();
  CHECK(l >= 0.0);
  CHECK(l < 1e-8);
}

TEST_CASE("id_loss K=2 logits (1,0), label 0 is ln(1+e^-1)") {
  const Tensor theta = Tensor::constant({2, 1}, {1.0, 0.0});
  const double l = id_loss(Tensor::vector({1.0}), 0, theta).item();
  CHECK(l == doctest::Approx(0.313262).epsilon(1e-6));
  CHECK(l == doctest::Approx(std::log1p(std::exp(-1.0))).epsilon(1e-15));
  CHECK_THROWS_AS(id_loss(Tensor::vector({1.0}), 2, theta), std::out_of_range);
}

TEST_CASE("id_loss gradient matches finite differences") {
  Rng rng(6);
  const Tensor theta = random_tensor({5, 4}, rng), f = random_tensor({4}, rng);
  auto loss = [&] { return id_loss(f, 3, theta); };
  CHECK(check_gradients(loss, {{"theta", theta}, {"f", f}}) < 1e-6);
}

TEST_CASE("triplet loss examples") {
  const Tensor a = Tensor::vector({0.0, 1.0}), p = Tensor::vector({1.0, 1.0});
  CHECK(triplet_loss(a, p, p, 0.3).item() == doctest::Approx(0.3).epsilon(1e-15));
  // 1-D: a=0, p=0.1, n=2 -> 0.01 - 4 + 0.3 < 0.
  CHECK(triplet_loss(Tensor::vector({0.0}), Tensor::vector({0.1}), Tensor::vector({2.0}), 0.3)
            .item() == 0.0);
  CHECK_THROWS(triplet_loss(a, p, p, -0.1));
}

TEST_CASE("satisfied triplet margin gives zero loss and zero gradient") {
  Tensor a = Tensor::vector({0.0, 0.0}, true), p = Tensor::vector({0.1, 0.0}, true),
         n = Tensor::vector({3.0, 0.0}, true);
  ad::backward(triplet_loss(a, p, n, 0.3));
  for (const auto& t : {a, p, n})
    for (double g : t.grad()) CHECK(g == 0.0);
}

TEST_CASE("triplet gradient matches finite differences away from the hinge") {
  Rng rng(7);
  const Tensor a = random_tensor({3}, rng), p = random_tensor({3}, rng), n = random_tensor({3}, rng);
  auto loss = [&] { return triplet_loss(a, p, n, 5.0); };
  REQUIRE(loss().item() > 0.0);
  CHECK(check_gradients(loss, {{"a", a}, {"p", p}, {"n", n}}) < 1e-6);
}

TEST_CASE("total loss on identical embeddings with a uniform classifier is ln K + alpha") {
  const Tensor theta = Tensor::zeros({4, 3});
  std::vector<Tensor> emb(4, Tensor::vector({0.5, -0.2, 1.0}));
  const std::vector<std::size_t> labels{0, 0, 1, 1};
  const auto terms = total_loss(emb, labels, theta, LossOptions{});
  CHECK(terms.total.item() == doctest::Approx(std::log(4.0) + 0.3).epsilon(1e-14));
  CHECK(terms.id == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  CHECK(terms.triplet == doctest::Approx(0.3).epsilon(1e-14));
}

TEST_CASE("disabling the triplet term reduces total loss to the id loss") {
  Rng rng(8);
  const Tensor theta = random_tensor({2, 3}, rng);
  std::vector<Tensor> emb;
  for (int i = 0; i < 4; ++i) emb.push_back(random_tensor({3}, rng));
  const std::vector<std::size_t> labels{0, 0, 1, 1};
  LossOptions off;
  off.use_triplet = false;
  const auto terms = total_loss(emb, labels, theta, off);
  double mean = 0.0;
  for (int i = 0; i < 4; ++i) mean += id_loss(emb[i], labels[i], theta).item() / 4.0;
  CHECK(terms.total.item() == doctest::Approx(mean).epsilon(1e-15));
  CHECK(terms.triplet == 0.0);
}

TEST_CASE("total loss gradient on a 2-identity, 2-sample batch") {
  Rng rng(9);
  for (bool normalize : {false, true}) {
    const Tensor theta = random_tensor({2, 3}, rng);
    std::vector<Tensor> emb;
    for (int i = 0; i < 4; ++i) emb.push_back(random_tensor({3}, rng));
    const std::vector<std::size_t> labels{0, 0, 1, 1};
    LossOptions opts;
    opts.alpha = 2.0;  // keep every triplet active
    opts.normalize_triplet = normalize;
    auto loss = [&] { return total_loss(emb, labels, theta, opts).total; };
    std::vector<ad::NamedTensor> params{{"theta", theta}};
    for (int i = 0; i < 4; ++i) params.push_back({"f" + std::to_string(i), emb[i]});
    CHECK(check_gradients(loss, params) < 1e-5);
  }
}

TEST_CASE("batch-hard mining picks the farthest positive and the nearest negative") {
  std::vector<Tensor> emb{Tensor::vector({0.0}), Tensor::vector({1.0}), Tensor::vector({3.0}),
                          Tensor::vector({1.5}), Tensor::vector({10.0})};
  const std::vector<std::size_t> labels{0, 0, 0, 1, 1};
  const auto mined = mine_batch_hard(emb, labels);
  CHECK(mined[0].positive == 2);
  CHECK(mined[0].negative == 3);
  CHECK(mined[4].positive == 3);
  CHECK(mined[4].negative == 2);
  const std::vector<std::size_t> lonely{0, 0, 0, 1, 2};
  CHECK_THROWS(mine_batch_hard(emb, lonely));
}

TEST_CASE("property: id loss and triplet loss are nonnegative") {
  Rng rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor theta = random_tensor({3, 4}, rng, false, 5.0);
    const Tensor f = random_tensor({4}, rng, false, 5.0);
    CHECK(id_loss(f, rng.below(3), theta).item() >= 0.0);
    const Tensor a = random_tensor({2}, rng, false), p = random_tensor({2}, rng, false),
                 n = random_tensor({2}, rng, false);
    CHECK(triplet_loss(a, p, n, 0.3).item() >= 0.0);
  }
}

TEST_CASE("property: total loss decreases monotonically over 20 steps on a separable batch") {
  Rng rng(11);
  const Tensor theta = random_tensor({2, 2}, rng, true, 0.1);
  std::vector<Tensor> emb{Tensor::vector({1.0, 0.1}, true), Tensor::vector({0.9, -0.1}, true),
                          Tensor::vector({-1.0, 0.2}, true), Tensor::vector({-1.1, 0.0}, true)};
  const std::vector<std::size_t> labels{0, 0, 1, 1};
  LossOptions opts;
  opts.alpha = 3.0;
  std::vector<Tensor> params = emb;
  params.push_back(theta);
  double previous = std::numeric_limits<double>::infinity();
  for (int step = 0; step < 20; ++step) {
    for (auto& t : params) t.zero_grad();
    const auto terms = total_loss(emb, labels, theta, opts);
    CHECK(terms.total.item() < previous);
    previous = terms.total.item();
    ad::backward(terms.total);
    for (auto& t : params)
      for (std::size_t i = 0; i < t.size(); ++i) t.mutable_data()[i] -= 0.02 * t.grad()[i];
  }
}
