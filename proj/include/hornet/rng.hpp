#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace hornet {

// mt19937_64 with distributions written out by hand so that draws are
// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on the open interval (0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  double gumbel();
  bool bernoulli(double p) { return uniform() < p; }
  // Successes before the first failure, success probability p; capped.
  std::size_t geometric_count(double p, std::size_t cap);

  // Derives an independent stream; the parent advances by one draw.
  Rng split() { return Rng(next_u64() ^ 0x9e3779b97f4a7c15ULL); }

  std::string state() const;
  void restore(const std::string& state);

  friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hornet
