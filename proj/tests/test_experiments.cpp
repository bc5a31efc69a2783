#include <cmath>
#include <random>

#include "corrprobit/aggregator.hpp"
#include "corrprobit/error.hpp"
#include "corrprobit/experiments.hpp"
#include "corrprobit/witness.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace corrprobit;

namespace {

double linf(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("regimes are normalized and idempotent") {
  for (auto mk : {MeanKind::Zero, MeanKind::Random})
    for (auto ck : {CovKind::Identity, CovKind::RandomDiagonal, CovKind::Bin, CovKind::RandomFull}) {
      SyntheticRegime r;
      r.mu_kind = mk;
      r.sigma_kind = ck;
      r.n = 6;
      r.seed = 3;
      const ProbitModel m = generate_regime(r);
      CHECK(is_normalized(m, 1e-9));
      const ProbitModel again = normalize(m).model;
      CHECK(linf(again.sigma, m.sigma) < 1e-12);
      CHECK(linf(again.mu, m.mu) < 1e-12);
      if (mk == MeanKind::Zero) CHECK(m.mu.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("zero-identity regime is exchangeable") {
  SyntheticRegime r;
  r.n = 8;
  const ProbitModel m = generate_regime(r);
  CHECK(linf(m.sigma, testsupport::exchangeable_model(8).sigma) < 1e-12);
}

TEST_CASE("zero-bin regime has two anticorrelated blocks and usable observability") {
  SyntheticRegime r;
  r.sigma_kind = CovKind::Bin;
  r.n = 8;
  const ProbitModel m = generate_regime(r);
  CHECK(m.sigma(0, 1) > 0.5);
  CHECK(m.sigma(0, 7) < -0.5);
  CHECK(observability(m) >= 0.01);
}

TEST_CASE("unsatisfiable observability floor") {
  SyntheticRegime r;
  r.gamma_floor = 0.5;
  r.max_attempts = 2;
  try {
    generate_regime(r);
    FAIL("expected RegimeUnsatisfiable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RegimeUnsatisfiable);
  }
  CHECK(parse_cov_kind("bin") == CovKind::Bin);
  CHECK(parse_mean_kind("r") == MeanKind::Random);
  CHECK_THROWS_AS(parse_cov_kind("nope"), Error);
}

TEST_CASE("logit fits match Bradley-Terry closed forms") {
  std::vector<Ranking> rows{{{0, 1}}, {{1, 0}}};
  const LogitFit fit = fit_logit(2, rows, {3.0, 1.0});
  CHECK(fit.utilities(0) - fit.utilities(1) == doctest::Approx(std::log(3.0)).epsilon(1e-9));
  CHECK(std::fabs(fit.utilities.sum()) < 1e-12);
  CHECK(!fit.regularized);

  std::vector<Ranking> uniform;
  for (const auto& o : kOrderings) uniform.push_back({{o[0], o[1], o[2]}});
  const LogitFit flat = fit_logit(3, uniform);
  CHECK(flat.utilities.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("logit probabilities are shift invariant and context free") {
  Eigen::VectorXd u(4);
  u << 0.3, -1.2, 0.8, 0.1;
  const Eigen::VectorXd shifted = u.array() + 5.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j) CHECK(logit_pair_probability(u, i, j) == doctest::Approx(logit_pair_probability(shifted, i, j)));
  CHECK(logit_welfare(shifted, {0, 2}) - logit_welfare(u, {0, 2}) == doctest::Approx(5.0));
  CHECK(logit_welfare(u, {2}) == doctest::Approx(0.8));
}

TEST_CASE("disconnected logit data is regularized") {
  std::vector<Ranking> rows{{{0, 1}}, {{2, 3}}};
  const LogitFit fit = fit_logit(4, rows);
  CHECK(fit.regularized);
  CHECK(fit.utilities.allFinite());
  CHECK_THROWS_AS(fit_logit(3, {{{0, 0}}}), Error);
  CHECK_THROWS_AS(fit_logit(3, {}), Error);
}

TEST_CASE("pairwise likelihood cannot separate an equal-means family") {
  std::mt19937_64 rng(4);
  ProbitModel base = testsupport::random_model(5, rng);
  base.mu.setZero();
  base.normalized = false;
  base = normalize(base).model;
  const PairwiseData data = sample_pairwise_data(base, 20000, 9);
  const EquivalenceFamily fam = pairwise_equivalent_family(base);
  const double ref = pairwise_nll(base, data);
  for (const auto& m : fam.members) CHECK(std::fabs(pairwise_nll(m, data) - ref) < 1e-6);
}

TEST_CASE("pairwise data splits the budget evenly") {
  const ProbitModel m = testsupport::exchangeable_model(4);
  const PairwiseData d = sample_pairwise_data(m, 601, 1);
  CHECK(d.pairs.size() == 6);
  CHECK(d.total() == 601);
  const auto t = sample_triple_data(m, 10, 1);
  CHECK(t.size() == 4);
  std::uint64_t s = 0;
  for (const auto& c : t) s += c.total();
  CHECK(s == 10);
}

TEST_CASE("triple MLE recovers an exchangeable model and agrees with the moment estimator") {
  const ProbitModel truth = testsupport::exchangeable_model(4);
  const auto data = sample_triple_data(truth, 100000, 5);
  const MleFit fit = fit_probit_triple_mle(4, data);
  CHECK(is_normalized(fit.model, 1e-9));
  CHECK(linf(fit.model.sigma, truth.sigma) <= 0.1);
  CHECK(linf(fit.model.mu, truth.mu) <= 0.1);
  CHECK(fit.nll <= triple_nll(truth, data) + 1e-6);

  std::vector<TripleFrequencies> freqs;
  for (const auto& c : data) freqs.push_back(TripleFrequencies::from_counts(c));
  const GlobalEstimate moment = estimate_from_frequencies(4, freqs);
  CHECK(linf(fit.model.sigma, moment.model.sigma) <= 0.1);
  CHECK(linf(fit.model.mu, moment.model.mu) <= 0.1);
}

TEST_CASE("triple MLE recovers a correlated model and is deterministic") {
  std::mt19937_64 rng(6);
  ProbitModel truth;
  do truth = testsupport::random_model(4, rng, 0.6);
  while (observability(truth) < 0.02);
  const auto data = sample_triple_data(truth, 100000, 8);
  MleOptions opt;
  opt.steps = 3000;
  const MleFit a = fit_probit_triple_mle(4, data, opt);
  const MleFit b = fit_probit_triple_mle(4, data, opt);
  CHECK(a.model.sigma == b.model.sigma);
  CHECK(linf(a.model.sigma, truth.sigma) <= 0.15);
  CHECK(linf(a.model.mu, truth.mu) <= 0.15);
}

TEST_CASE("pairwise MLE fits pairwise probabilities") {
  std::mt19937_64 rng(10);
  const ProbitModel truth = testsupport::random_model(4, rng);
  const PairwiseData data = sample_pairwise_data(truth, 200000, 2);
  MleOptions opt;
  opt.steps = 3000;
  const MleFit fit = fit_probit_pairwise_mle(data, opt);
  CHECK(is_normalized(fit.model, 1e-9));
  for (const auto& p : data.pairs) {
    const double emp = static_cast<double>(p.wins_i) / (p.wins_i + p.wins_j);
    CHECK(std::fabs(pairwise_probability(fit.model, p.i, p.j) - emp) < 0.02);
  }
  CHECK(fit.nll <= pairwise_nll(truth, data) + 1e-4);
}

TEST_CASE("accuracy on an exchangeable model is a coin flip for every method") {
  const ProbitModel truth = testsupport::exchangeable_model(6);
  Eigen::VectorXd u(6);
  u << 0.2, -0.1, 0.0, 0.3, -0.4, 0.0;
  const std::vector<Method> methods{Method::probit("oracle", truth), Method::logit("logit", u)};
  AccuracyTask task;
  task.trials = 2000;
  task.bootstrap = 50;
  const auto reports = run_accuracy(truth, methods, task, 12);
  REQUIRE(reports.size() == 2);
  for (const auto& r : reports) {
    CHECK(std::fabs(r.mean - 0.5) < 4 * 0.5 / std::sqrt(2000.0));
    CHECK(r.q25 <= r.q50);
    CHECK(r.q50 <= r.q75);
  }
}

TEST_CASE("oracle dominates logit on the zero-bin regime") {
  SyntheticRegime r;
  r.sigma_kind = CovKind::Bin;
  const ProbitModel truth = generate_regime(r);
  const std::vector<Method> methods{Method::probit("oracle", truth), Method::logit("logit", Eigen::VectorXd::Zero(8))};
  AccuracyTask task;
  task.trials = 1000;
  task.bootstrap = 20;
  const auto reports = run_accuracy(truth, methods, task, 2);
  CHECK(reports[0].mean > 0.7);
  CHECK(reports[0].mean >= reports[1].mean - 2 * reports[1].std_error);
  // Zero utilities tie on every pair.
  CHECK(reports[1].mean == doctest::Approx(0.5));
}

TEST_CASE("accuracy task validation") {
  const ProbitModel small = testsupport::exchangeable_model(5);
  CHECK_THROWS_AS(run_accuracy(small, {Method::probit("o", small)}, {}, 1), Error);
}

TEST_CASE("welfare menus") {
  const ProbitModel m = anticorrelated_welfare_model();
  const std::vector<Method> methods{Method::probit("probit", m), Method::logit("top_means", m.mu)};
  const auto reports = run_welfare(m, methods, {1, 2, 3}, 200000, 4);
  REQUIRE(reports.size() == 6);
  CHECK(reports[0].menu == std::vector<int>{0});
  CHECK(reports[1].menu == std::vector<int>{0, 2});
  CHECK(reports[4].menu == std::vector<int>{0, 1});
  CHECK(reports[1].true_value > reports[4].true_value);
  for (int s = 0; s + 1 < 3; ++s) CHECK(reports[s + 1].true_value >= reports[s].true_value - 1e-12);
  for (const auto& r : reports) {
    std::uint64_t total = 0;
    for (auto c : r.best_rank_histogram) total += c;
    CHECK(total == 200000);
  }
}
