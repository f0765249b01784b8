#pragma once

// Reference implementations used only by the tests. Each one is written
// against plain doubles / Eigen so that it shares no code path with the
// library routine it checks.

#include "hornet/encoder.hpp"
#include "hornet/retrieval.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace oracle {

// Central-difference gradient of f with respect to every entry of x. f reads
// x through whatever captured it, so the entries are perturbed in place.
inline std::vector<double> numeric_gradient(const std::function<double()>& f, std::span<double> x,
                                            double eps) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + eps;
    const double up = f();
    x[i] = saved - eps;
    const double down = f();
    x[i] = saved;
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

inline double rel_err(double a, double b, double floor = 1e-3) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double max_rel_err(std::span<const double> a, std::span<const double> b,
                          double floor = 1e-3) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, rel_err(a[i], b[i], floor));
  return worst;
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Plain two-layer LSTM on copied Eigen weights.
struct EigenLstm {
  Eigen::MatrixXd wi, wf, wo, wc, ui, uf, uo, uc;
  Eigen::VectorXd bi, bf, bo, bc;
  bool sigmoid_candidate = false;

  static Eigen::MatrixXd mat(const hornet::ad::Tensor& t) {
    Eigen::MatrixXd m(t.shape()[0], t.shape()[1]);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = t[r * m.cols() + c];
    return m;
  }
  static Eigen::VectorXd vec(const hornet::ad::Tensor& t) {
    Eigen::VectorXd v(t.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = t[i];
    return v;
  }

  explicit EigenLstm(const hornet::LstmParams& p, bool sigmoid_g = false)
      : wi(mat(p.w_xi)), wf(mat(p.w_xf)), wo(mat(p.w_xo)), wc(mat(p.w_xc)),
        ui(mat(p.u_hi)), uf(mat(p.u_hf)), uo(mat(p.u_ho)), uc(mat(p.u_hc)),
        bi(vec(p.b_i)), bf(vec(p.b_f)), bo(vec(p.b_o)), bc(vec(p.b_c)),
        sigmoid_candidate(sigmoid_g) {}

  void step(const Eigen::VectorXd& x, Eigen::VectorXd& h, Eigen::VectorXd& c) const {
    auto sig = [](Eigen::VectorXd v) { return v.unaryExpr([](double z) { return logistic(z); }).eval(); };
    const Eigen::VectorXd i = sig(wi * x + ui * h + bi);
    const Eigen::VectorXd f = sig(wf * x + uf * h + bf);
    const Eigen::VectorXd o = sig(wo * x + uo * h + bo);
    const Eigen::VectorXd pre = wc * x + uc * h + bc;
    const Eigen::VectorXd g = sigmoid_candidate ? sig(pre) : pre.array().tanh().matrix().eval();
    c = (f.array() * c.array() + i.array() * g.array()).matrix();
    h = (o.array() * c.array().tanh()).matrix();
  }
};

inline Eigen::VectorXd stacked_lstm(const std::vector<Eigen::VectorXd>& xs,
                                    const hornet::EncoderParams& params) {
  const bool sig = params.candidate == hornet::CandidateActivation::sigmoid;
  const EigenLstm lower(params.lower, sig), upper(params.upper, sig);
  const Eigen::Index h = lower.bi.size();
  Eigen::VectorXd h1 = Eigen::VectorXd::Zero(h), c1 = h1, h2 = Eigen::VectorXd::Zero(upper.bi.size()),
                  c2 = h2;
  for (const auto& x : xs) {
    lower.step(x, h1, c1);
    upper.step(h1, h2, c2);
  }
  return h2;
}

// Exhaustive retrieval metrics: every valid gallery entry is placed by
// counting how many entries beat it, which gives the rank without sorting.
struct BruteMetrics {
  std::vector<double> cmc;  // cmc[k-1]
  double map = 0.0;
  std::size_t valid = 0, excluded = 0;
};

inline BruteMetrics brute_force_metrics(const Eigen::MatrixXd& d,
                                        const std::vector<std::size_t>& qid,
                                        const std::vector<std::size_t>& qcam,
                                        const std::vector<std::size_t>& gid,
                                        const std::vector<std::size_t>& gcam) {
  const std::size_t Q = d.rows(), G = d.cols();
  BruteMetrics out;
  out.cmc.assign(G, 0.0);
  for (std::size_t q = 0; q < Q; ++q) {
    auto valid = [&](std::size_t g) { return !(gid[g] == qid[q] && gcam[g] == qcam[q]); };
    auto beats = [&](std::size_t a, std::size_t b) {  // a ranked before b
      return d(q, a) < d(q, b) || (d(q, a) == d(q, b) && a < b);
    };
    std::vector<std::size_t> positive_ranks;
    for (std::size_t g = 0; g < G; ++g) {
      if (!valid(g) || gid[g] != qid[q]) continue;
      std::size_t rank = 1;
      for (std::size_t o = 0; o < G; ++o)
        if (o != g && valid(o) && beats(o, g)) ++rank;
      positive_ranks.push_back(rank);
    }
    if (positive_ranks.empty()) {
      ++out.excluded;
      continue;
    }
    ++out.valid;
    std::sort(positive_ranks.begin(), positive_ranks.end());
    for (std::size_t k = positive_ranks.front(); k <= G; ++k) out.cmc[k - 1] += 1.0;
    double ap = 0.0;
    for (std::size_t j = 0; j < positive_ranks.size(); ++j)
      ap += static_cast<double>(j + 1) / static_cast<double>(positive_ranks[j]);
    out.map += ap / static_cast<double>(positive_ranks.size());
  }
  if (out.valid > 0) {
    for (double& c : out.cmc) c /= static_cast<double>(out.valid);
    out.map /= static_cast<double>(out.valid);
  }
  return out;
}

}  // namespace oracle
