#include <cmath>
#include <random>

#include "corrprobit/error.hpp"
#include "corrprobit/estimator3.hpp"
#include "corrprobit/normal.hpp"
#include "corrprobit/sampling.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace corrprobit;

namespace {

double max_abs(const Eigen::MatrixXd& a) { return a.cwiseAbs().maxCoeff(); }

// Whitened quantities computed straight from (mu, sigma) on positions of a 3-item model.
struct Whitened {
  std::array<double, 3> alpha;
  double beta_ab_bc, beta_ab_ac;
};

Whitened whiten(const ProbitModel& m) {
  Whitened w;
  Eigen::Vector3d c[3];
  for (int d = 0; d < 3; ++d) {
    c[d] = difference_vector(d);
    w.alpha[d] = c[d].dot(m.mu) / std::sqrt(c[d].dot(m.sigma * c[d]));
  }
  auto inner = [&](int p, int q) {
    return c[p].dot(m.sigma * c[q]) / std::sqrt(c[p].dot(m.sigma * c[p]) * c[q].dot(m.sigma * c[q]));
  };
  w.beta_ab_bc = inner(0, 1);
  w.beta_ab_ac = inner(0, 2);
  return w;
}

ProbitModel random_three(std::mt19937_64& rng, double gamma_floor) {
  while (true) {
    ProbitModel m = testsupport::random_model(3, rng, 0.8);
    if (observability(m) >= gamma_floor) return m;
  }
}

}  // namespace

TEST_CASE("counting rankings") {
  std::vector<Ranking> all;
  for (const auto& o : kOrderings) all.push_back({{4 + o[0], 4 + o[1], 4 + o[2]}});
  const auto c = counts_from_rankings(all);
  CHECK(c.triple == Triple{4, 5, 6});
  for (auto k : c.counts) CHECK(k == 1);
  CHECK(c.total() == 6);
  CHECK_THROWS_AS(counts_from_rankings({}), Error);
  CHECK_THROWS_AS(counts_from_rankings({{{1, 2, 3}}, {{1, 2, 4}}}), Error);
}

TEST_CASE("halfspace and cone frequencies") {
  TripleFrequencies uniform;
  uniform.freq.fill(1.0 / 6.0);
  uniform.total = 600;
  for (int d = 0; d < 3; ++d) CHECK(halfspace_frequency(uniform, 1, d) == doctest::Approx(0.5));
  CHECK(cone_frequency(uniform, 1, kDiffAB, 1, kDiffBC) == doctest::Approx(1.0 / 6.0));
  CHECK(cone_frequency(uniform, 1, kDiffAB, 1, kDiffAC) == doctest::Approx(1.0 / 3.0));

  TripleFrequencies point;
  point.freq = {1, 0, 0, 0, 0, 0};
  CHECK(halfspace_frequency(point, 1, kDiffAB) == 1.0);

  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> u(0, 1000);
  for (int rep = 0; rep < 100; ++rep) {
    TripleCounts tc;
    for (auto& c : tc.counts) c = u(rng) + 1;
    const auto f = TripleFrequencies::from_counts(tc);
    for (int d = 0; d < 3; ++d)
      CHECK(std::fabs(halfspace_frequency(f, 1, d) + halfspace_frequency(f, -1, d) - 1.0) < 1e-15);
    double s = 0.0;
    for (int a : {1, -1})
      for (int b : {1, -1}) s += cone_frequency(f, a, kDiffBC, b, kDiffAC);
    CHECK(std::fabs(s - 1.0) < 1e-15);
  }
}

TEST_CASE("alpha estimates") {
  TripleFrequencies f;
  f.freq.fill(1.0 / 6.0);
  f.total = 1000;
  for (double a : estimate_alphas(f).alpha) CHECK(std::fabs(a) < 1e-15);

  // Put Phi(1) of the mass ahead of b for positions (a, b).
  const double p = normal_cdf(1.0);
  f.freq = {p / 3, p / 3, (1 - p) / 3, (1 - p) / 3, p / 3, (1 - p) / 3};
  CHECK(std::fabs(estimate_alphas(f).alpha[kDiffAB] - 1.0) < 1e-9);

  f.freq = {1, 0, 0, 0, 0, 0};
  const auto clamped = estimate_alphas(f);
  CHECK(clamped.clamped[0]);
  CHECK(std::fabs(clamped.alpha[0]) <= std::sqrt(2.0 * std::log(1.0 / clamped.floor)));

  std::mt19937_64 rng(14);
  for (int rep = 0; rep < 10; ++rep) {
    const auto m = testsupport::random_model(3, rng, 1.0);
    const auto est = estimate_alphas(TripleFrequencies::from_distribution(triple_rank_probabilities(m, 0, 1, 2)));
    const auto w = whiten(m);
    for (int d = 0; d < 3; ++d) CHECK(std::fabs(est.alpha[d] - w.alpha[d]) < 1e-6);
  }
}

TEST_CASE("angle search on zero-mean cones") {
  auto freqs_for = [](double inner) {
    const double same = 0.5 - std::acos(inner) / (2.0 * kPi);
    return std::array<double, 4>{same, 0.5 - same, 0.5 - same, same};
  };
  const auto orth = estimate_angle(0, 0, freqs_for(0.0), 1e-6);
  CHECK(std::fabs(orth.beta) < 1e-7);
  const auto obtuse = estimate_angle(0, 0, freqs_for(-0.5), 1e-6);
  CHECK(std::fabs(obtuse.beta + 0.5) < 1e-7);
  CHECK_THROWS_AS(estimate_angle(0, 0, {0.9, 0.9, 0.9, 0.9}, 1e-3), Error);
  CHECK_THROWS_AS(estimate_angle(0.1, 0.5, freqs_for(0.0), 1e-3), Error);
}

TEST_CASE("single sign-pair probability increases with the angle") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int rep = 0; rep < 20; ++rep) {
    double d1 = u(rng), d2 = u(rng);
    if (d2 > d1) std::swap(d1, d2);
    std::vector<double> g(100);
    for (int k = 0; k < 100; ++k) g[k] = angle_model_probability(d1, d2, 0.05 + (kPi - 0.1) * k / 99.0, 3);
    // Strict where the increments are resolvable in double precision; never decreasing anywhere.
    for (int k = 1; k < 100; ++k) {
      CHECK(g[k] >= g[k - 1] - 1e-13);
      if (g[k - 1] > 1e-9 && g[k] < g.back() - 1e-9) CHECK(g[k] > g[k - 1]);
    }
    CHECK(g.back() > g.front());
  }
}

TEST_CASE("angle search recovers whitened inner products from exact cones") {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 10; ++rep) {
    const auto m = random_three(rng, 0.01);
    const auto f = TripleFrequencies::from_distribution(triple_rank_probabilities(m, 0, 1, 2));
    const auto w = whiten(m);
    const int sp = w.alpha[0] >= 0 ? 1 : -1, sq = w.alpha[1] >= 0 ? 1 : -1;
    int dp = kDiffAB, dq = kDiffBC, s1 = sp, s2 = sq;
    double d1 = sp * w.alpha[0], d2 = sq * w.alpha[1];
    if (d2 > d1) {
      std::swap(d1, d2);
      std::swap(dp, dq);
      std::swap(s1, s2);
    }
    std::array<double, 4> freqs;
    for (int k = 0; k < 4; ++k) freqs[k] = cone_frequency(f, k < 2 ? s1 : -s1, dp, k % 2 == 0 ? s2 : -s2, dq);
    const auto a = estimate_angle(d1, d2, freqs, 1e-6);
    CHECK(std::fabs(sp * sq * a.beta - w.beta_ab_bc) < 1e-5);
  }
}

TEST_CASE("reconstruction of the exchangeable triple") {
  const auto est = reconstruct_three({0, 0, 0}, -0.5, 0.5);
  CHECK(est.scale_s == doctest::Approx(1.0));
  CHECK(est.scale_t == doctest::Approx(1.0));
  CHECK(est.case_tag == BasisCase::AbBc);
  const ProbitModel m = estimate_as_model(est);
  CHECK(max_abs(m.sigma - testsupport::exchangeable_model(3).sigma) < 1e-12);
  CHECK(max_abs(m.mu) < 1e-12);
  for (double p : triple_rank_probabilities(m, 0, 1, 2).probs) CHECK(std::fabs(p - 1.0 / 6.0) < 1e-10);
  CHECK(est.trace >= 0.5);
  CHECK_THROWS_AS(reconstruct_three({0, 0, 0}, 0.3, 0.3), Error);
  CHECK_THROWS_AS(reconstruct_three({0, 0, 0}, 0.5, -0.5), Error);
}

TEST_CASE("exact whitened inputs reconstruct 50 random triples") {
  std::mt19937_64 rng(41);
  int both_cases[2] = {0, 0};
  for (int rep = 0; rep < 50; ++rep) {
    const auto m = testsupport::random_model(3, rng, 1.0);
    const auto w = whiten(m);
    const auto est = reconstruct_three(w.alpha, w.beta_ab_bc, w.beta_ab_ac);
    ++both_cases[est.case_tag == BasisCase::AbBc ? 0 : 1];
    const ProbitModel back = estimate_as_model(est);
    CHECK(max_abs(back.sigma - m.sigma) < 1e-9);
    CHECK(max_abs(back.mu - m.mu) < 1e-9);
    CHECK(est.trace >= 0.5);
    CHECK(max_abs(est.sigma_hat * Eigen::Vector3d::Ones()) < 1e-12);
  }
  CHECK(both_cases[0] > 0);
  CHECK(both_cases[1] > 0);
}

TEST_CASE("reconstruction is stable under small input perturbations") {
  std::mt19937_64 rng(43);
  for (int rep = 0; rep < 10; ++rep) {
    const auto m = random_three(rng, 0.05);
    const auto w = whiten(m);
    const ProbitModel base = estimate_as_model(reconstruct_three(w.alpha, w.beta_ab_bc, w.beta_ab_ac));
    for (int k = 0; k < 5; ++k) {
      std::array<double, 3> a = w.alpha;
      double b1 = w.beta_ab_bc, b2 = w.beta_ab_ac;
      if (k < 3) a[k] += 1e-3;
      if (k == 3) b1 += 1e-3;
      if (k == 4) b2 += 1e-3;
      const ProbitModel p = estimate_as_model(reconstruct_three(a, b1, b2));
      CHECK(max_abs(p.sigma - base.sigma) < 1.0);
      CHECK(max_abs(p.mu - base.mu) < 1.0);
    }
  }
}

TEST_CASE("full pipeline recovers triples from exact probabilities") {
  std::mt19937_64 rng(47);
  for (int rep = 0; rep < 15; ++rep) {
    const auto m = random_three(rng, 0.01);
    const auto res = estimate_triple(TripleFrequencies::from_distribution(triple_rank_probabilities(m, 0, 1, 2)));
    const ProbitModel back = estimate_as_model(res.estimate);
    CHECK(max_abs(back.sigma - m.sigma) < 1e-4);
    CHECK(max_abs(back.mu - m.mu) < 1e-4);
    CHECK(res.estimate.trace >= 0.5);
    for (double b : res.estimate.betas) CHECK(std::fabs(b) < 1.0);
  }
}

TEST_CASE("relabelling the triple permutes the estimate") {
  std::mt19937_64 rng(53);
  const auto m = random_three(rng, 0.02);
  const std::vector<int> perm = {2, 0, 1};
  const ProbitModel relabelled = restrict_items(m, perm);
  const auto a = estimate_as_model(
      estimate_triple(TripleFrequencies::from_distribution(triple_rank_probabilities(m, 0, 1, 2))).estimate);
  const auto b = estimate_as_model(
      estimate_triple(TripleFrequencies::from_distribution(triple_rank_probabilities(relabelled, 0, 1, 2))).estimate);
  for (int x = 0; x < 3; ++x) {
    CHECK(std::fabs(b.mu(x) - a.mu(perm[x])) < 1e-6);
    for (int y = 0; y < 3; ++y) CHECK(std::fabs(b.sigma(x, y) - a.sigma(perm[x], perm[y])) < 1e-6);
  }
}

TEST_CASE("scale-equivalent models give bit-identical estimates") {
  std::mt19937_64 rng(59);
  const auto m = random_three(rng, 0.02);
  ProbitModel scaled = m;
  scaled.mu *= 2.0;
  scaled.sigma *= 4.0;
  const auto ca = sample_triple_counts(m, {0, 1, 2}, 20000, 7);
  const auto cb = sample_triple_counts(scaled, {0, 1, 2}, 20000, 7);
  CHECK(ca == cb);
  const auto ea = estimate_triple(TripleCounts{{0, 1, 2}, ca}).estimate;
  const auto eb = estimate_triple(TripleCounts{{0, 1, 2}, cb}).estimate;
  CHECK((ea.sigma_hat.array() == eb.sigma_hat.array()).all());
  CHECK((ea.mu_hat.array() == eb.mu_hat.array()).all());
}

TEST_CASE("sampled exchangeable triple is estimated closely") {
  const auto model = testsupport::exchangeable_model(3);
  const TripleCounts counts{{0, 1, 2}, sample_triple_counts(model, {0, 1, 2}, 1000000, 61)};
  const auto res = estimate_triple(counts);
  const ProbitModel back = estimate_as_model(res.estimate);
  CHECK(max_abs(back.sigma - model.sigma) < 0.03);
  CHECK(max_abs(back.mu) < 0.03);
  CHECK(res.observability.gamma_hat <= 1.0 / 6.0);
  CHECK(res.estimate.sigma_hat.trace() >= 0.5);
  CHECK_THROWS_AS(estimate_triple(TripleCounts{{0, 1, 2}, {1, 1, 1, 1, 1, 1}}), Error);
}

TEST_CASE("sampled random triple is estimated at the expected rate") {
  std::mt19937_64 rng(67);
  const auto model = random_three(rng, 0.05);
  const TripleCounts counts{{0, 1, 2}, sample_triple_counts(model, {0, 1, 2}, 1000000, 71)};
  const ProbitModel back = estimate_as_model(estimate_triple(counts).estimate);
  CHECK(max_abs(back.sigma - model.sigma) < 0.05);
  CHECK(max_abs(back.mu - model.mu) < 0.05);
}
