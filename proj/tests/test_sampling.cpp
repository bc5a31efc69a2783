#include <cmath>
#include <map>
#include <random>

#include "corrprobit/error.hpp"
#include "corrprobit/sampling.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace corrprobit;

namespace {

ProbitModel block_model() {
  // Items 0-2 and 3-5 form two blocks; across-block utilities are anticorrelated.
  Eigen::MatrixXd s(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) s(i, j) = (i == j) ? 1.0 : ((i < 3) == (j < 3) ? 0.6 : -0.6);
  Eigen::VectorXd mu(6);
  mu << 0.3, 0.1, -0.2, 0.2, 0.0, -0.4;
  return normalize(make_model(mu, s + 0.05 * Eigen::MatrixXd::Identity(6, 6))).model;
}

}  // namespace

TEST_CASE("dominant means fix the ranking") {
  Eigen::VectorXd mu(3);
  mu << 0, 1, 2;
  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(3, 3) - Eigen::MatrixXd::Constant(3, 3, 1.0 / 3);
  const ProbitModel model = normalize(make_model(mu, 1e-8 * m)).model;
  const auto rankings = sample_rankings(model, std::vector<std::vector<int>>(10000, {0, 1, 2}), 1);
  int hits = 0;
  for (const auto& r : rankings) hits += (r.order == std::vector<int>{2, 1, 0});
  CHECK(hits >= 9990);
}

TEST_CASE("exchangeable triple orderings are uniform and sampling is deterministic") {
  const auto model = testsupport::exchangeable_model(4);
  const auto counts = sample_triple_counts(model, {0, 1, 3}, 600000, 17);
  for (auto c : counts) CHECK(std::fabs(static_cast<double>(c) - 1e5) < 4.0 * std::sqrt(6e5 * (1.0 / 6) * (5.0 / 6)));
  CHECK(sample_triple_counts(model, {0, 1, 3}, 1000, 5) == sample_triple_counts(model, {0, 1, 3}, 1000, 5));
  const std::vector<std::vector<int>> subsets = {{0, 1}, {1, 2, 3}, {3, 0, 2}};
  const auto a = sample_rankings(model, subsets, 99);
  const auto b = sample_rankings(model, subsets, 99);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].order == b[k].order);
  CHECK_THROWS_AS(sample_rankings(model, {{1}}, 1), Error);
}

TEST_CASE("sampled frequencies pass a chi-square test against integration") {
  std::mt19937_64 rng(31);
  const auto model = testsupport::random_model(5, rng, 1.0);
  const Triple t{1, 3, 4};
  const auto counts = sample_triple_counts(model, t, 1000000, 2024);
  const auto dist = triple_rank_probabilities(model, t[0], t[1], t[2]);
  double chi2 = 0.0;
  for (int o = 0; o < 6; ++o) {
    const double expected = 1e6 * dist.probs[o];
    chi2 += std::pow(static_cast<double>(counts[o]) - expected, 2) / expected;
  }
  CHECK(chi2 < 20.515);  // 5 degrees of freedom, 1e-3 level
}

TEST_CASE("ranking of a subset follows utilities with index tie-breaking") {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(8);
  u(4) = 1.0;
  u(2) = 2.0;
  u(7) = 1.0;
  u(0) = 5.0;
  CHECK(rank_by_utility({4, 2, 7}, u).order == std::vector<int>{2, 4, 7});
  CHECK(rank_by_utility({7, 0, 3}, u).order == std::vector<int>{0, 7, 3});
  CHECK(rank_by_utility({3, 7}, u).order == std::vector<int>{7, 3});
}

TEST_CASE("conditional probability without context is the pairwise probability") {
  const auto model = block_model();
  const auto est = conditional_pair_probability(model, {}, 0, 4, {.max_proposals = 400000}, 3);
  const double p = pairwise_probability(model, 0, 4);
  CHECK(est.accepted == 400000);
  CHECK(std::fabs(est.probability - p) < 4.0 * testsupport::binomial_sigma(p, 4e5));
}

TEST_CASE("exchangeable conditional probability is one half") {
  const auto model = testsupport::exchangeable_model(6);
  const auto est = conditional_pair_probability(model, {{5, 0, 3, 1}}, 2, 4,
                                                {.max_proposals = 2000000, .target_accepted = 20000}, 8);
  CHECK(est.accepted == 20000);
  CHECK(std::fabs(est.probability - 0.5) < 4.0 * testsupport::binomial_sigma(0.5, 20000));
}

TEST_CASE("block-consistent context moves the prediction toward the dense oracle") {
  const auto model = block_model();
  const Ranking context{{0, 3, 1, 5}};
  // Dense oracle: plain draws from an LDLT factor, keeping those matching the context.
  const Eigen::MatrixXd f = testsupport::ldlt_factor(model.sigma);
  std::mt19937_64 rng(101);
  std::normal_distribution<double> z;
  double acc = 0, fav = 0;
  Eigen::VectorXd e(6);
  for (int d = 0; d < 3000000; ++d) {
    for (int k = 0; k < 6; ++k) e(k) = z(rng);
    const Eigen::VectorXd x = model.mu + f * e;
    if (x(0) >= x(3) && x(3) >= x(1) && x(1) >= x(5)) {
      acc += 1;
      fav += x(2) > x(4);
    }
  }
  const double oracle = fav / acc;
  const double prior = pairwise_probability(model, 2, 4);
  const auto est = conditional_pair_probability(model, context, 2, 4, {.max_proposals = 3000000}, 55);
  CHECK(std::fabs(est.probability - oracle) < 4.0 * std::sqrt(2.0) * testsupport::binomial_sigma(oracle, acc));
  CHECK((est.probability - prior) * (oracle - prior) > 0.0);
  CHECK_THROWS_AS(conditional_pair_probability(model, context, 0, 2, {.max_proposals = 10}, 1), Error);
}

TEST_CASE("welfare: singletons pick the largest mean") {
  std::mt19937_64 rng(12);
  const auto model = testsupport::random_model(5, rng, 1.0);
  WelfareQuery q{.menu_size = 1, .candidate_items = {0, 1, 2, 3, 4}, .mc_samples = 200000};
  const auto res = expected_max_welfare(model, q, 4);
  Eigen::Index arg;
  model.mu.maxCoeff(&arg);
  CHECK(res.best.menu == std::vector<int>{static_cast<int>(arg)});
  CHECK(res.table.size() == 5);
  for (const auto& row : res.table) CHECK(std::fabs(row.value - model.mu(row.menu[0])) < 5.0 * row.std_error);
}

TEST_CASE("welfare: diverse pair beats a perfectly correlated pair") {
  // Items 0 and 1 move together; item 2 moves against them; item 3 is a low filler.
  Eigen::MatrixXd s(4, 4);
  s << 1.0, 1.0, -1.0, 0.0, 1.0, 1.0, -1.0, 0.0, -1.0, -1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.2;
  Eigen::VectorXd mu(4);
  mu << 0.5, 0.5, 0.5, -1.5;
  const ProbitModel model = normalize(make_model(mu, s + 0.01 * Eigen::MatrixXd::Identity(4, 4))).model;
  WelfareQuery q{.menu_size = 2, .candidate_items = {0, 1, 2, 3}, .mc_samples = 1000000};
  const auto res = expected_max_welfare(model, q, 9);
  CHECK((res.best.menu == std::vector<int>{0, 2} || res.best.menu == std::vector<int>{1, 2}));
  CHECK(res.gap_to_runner_up >= 0.0);
  // A superset never loses value.
  WelfareQuery q3{.menu_size = 3, .candidate_items = {0, 1, 2, 3}, .mc_samples = 200000};
  const auto res3 = expected_max_welfare(model, q3, 9);
  CHECK(res3.best.value >= res.best.value - 3.0 * res.best.std_error);
  CHECK_THROWS_AS(expected_max_welfare(model, {.menu_size = 5, .candidate_items = {0, 1}}, 1), Error);
}
