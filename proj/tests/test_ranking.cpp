#include <cmath>
#include <random>

#include "corrprobit/error.hpp"
#include "corrprobit/ranking.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace corrprobit;

TEST_CASE("ordering codes") {
  CHECK(ordering_code(0) == "abc");
  CHECK(ordering_from_code("cba") == 5);
  CHECK(ordering_from_code("abd") == -1);
  CHECK(ordering_index(1, 2, 0) == 3);
  CHECK(position_rank(4, 0) == 1);
}

TEST_CASE("zero-mean cone closed form") {
  CHECK(cone_probability_zero_mean({1, 0}, {0, 1}) == doctest::Approx(0.25));
  const Eigen::Vector2d u2(-0.5, std::sqrt(3.0) / 2.0);
  CHECK(cone_probability_zero_mean({1, 0}, u2) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  CHECK_THROWS_AS(cone_probability_zero_mean({1, 0}, {1, 0}), Error);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
  for (int rep = 0; rep < 50; ++rep) {
    const double a = angle(rng), b = angle(rng);
    const Eigen::Vector2d u1(std::cos(a), std::sin(a)), v(std::cos(b), std::sin(b));
    if (std::fabs(u1.dot(v)) > 0.999) continue;
    const double closed = cone_probability_zero_mean(u1, v);
    CHECK(std::fabs(gaussian_cone_mass({0, 0}, u1, v) - closed) < 1e-8);
    CHECK(std::fabs(testsupport::bivariate_orthant(0, 0, 1, 1, u1.dot(v)) - closed) < 1e-8);
  }
}

TEST_CASE("cone mass with a mean matches the Cartesian oracle") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Vector2d mean(2.0 * z(rng), 2.0 * z(rng));
    const double a = angle(rng), b = angle(rng);
    const Eigen::Vector2d n1(std::cos(a), std::sin(a)), n2(std::cos(b), std::sin(b));
    if (std::fabs(n1.dot(n2)) > 0.99) continue;
    const double oracle = testsupport::bivariate_orthant(n1.dot(mean), n2.dot(mean), 1, 1, n1.dot(n2));
    CHECK(std::fabs(gaussian_cone_mass(mean, n1, n2) - oracle) < 1e-9);
    CHECK(std::fabs(gaussian_cone_mass(mean, n1, n2, {.grid_resolution = 12}) - oracle) < 1e-6);
  }
  // A far-away mean concentrates all mass in the containing quadrant.
  CHECK(gaussian_cone_mass({30, 30}, {1, 0}, {0, 1}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(gaussian_cone_mass({-30, 30}, {1, 0}, {0, 1}) < 1e-12);
}

TEST_CASE("exchangeable model has uniform orderings") {
  const auto m = testsupport::exchangeable_model(5);
  const auto d = triple_rank_probabilities(m, 0, 2, 4);
  for (double p : d.probs) CHECK(std::fabs(p - 1.0 / 6.0) < 1e-10);
}

TEST_CASE("triple probabilities agree with the independent ordering oracle") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 40; ++rep) {
    const int n = 3 + rep % 4;
    const auto m = testsupport::random_model(n, rng, rep % 2 ? 1.5 : 0.0);
    const auto d = triple_rank_probabilities(m, 0, 1, n - 1);
    double sum = 0.0;
    for (int o = 0; o < 6; ++o) {
      const auto& ord = kOrderings[o];
      const int items[3] = {0, 1, n - 1};
      const double oracle = testsupport::ordering_probability_oracle(m, items[ord[0]], items[ord[1]], items[ord[2]]);
      CHECK(std::fabs(d.probs[o] - oracle) < 1e-9);
      sum += d.probs[o];
    }
    CHECK(std::fabs(sum - 1.0) < 1e-10);
  }
}

TEST_CASE("zero-mean slices sum to closed-form cones") {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    const auto m = testsupport::random_model(4, rng, 0.0);
    const auto d = triple_rank_probabilities(m, 1, 2, 3);
    // Item 1 on top: whiten the two difference directions directly.
    Eigen::VectorXd c1 = Eigen::VectorXd::Zero(4), c2 = Eigen::VectorXd::Zero(4);
    c1(1) = 1;
    c1(2) = -1;
    c2(1) = 1;
    c2(3) = -1;
    const double cosang = c1.dot(m.sigma * c2) / std::sqrt(c1.dot(m.sigma * c1) * c2.dot(m.sigma * c2));
    const double top = 0.5 - std::acos(cosang) / (2.0 * kPi);
    CHECK(std::fabs(d.probs[0] + d.probs[1] - top) < 1e-9);
    CHECK(std::fabs(top_choice_probability(m, 1, 2, 3) - top) < 1e-9);
  }
}

TEST_CASE("rank identity: P{i>=j>=k} = P{j>=k} - P{j top}") {
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 30; ++rep) {
    const auto m = testsupport::random_model(5, rng, 1.0);
    const int i = rep % 5, j = (rep + 2) % 5, k = (rep + 4) % 5;
    const auto d = triple_rank_probabilities(m, i, j, k);
    const double lhs = d.probs[0];
    const double rhs = pairwise_probability(m, j, k) - top_choice_probability(m, j, i, k);
    CHECK(std::fabs(lhs - rhs) < 1e-9);
  }
}

TEST_CASE("integration matches Monte Carlo") {
  std::mt19937_64 rng(77);
  const auto m = testsupport::random_model(4, rng, 1.0);
  const auto d = triple_rank_probabilities(m, 0, 1, 3);
  const double draws = 2e6;
  const auto f = testsupport::mc_triple_frequencies(m, 0, 1, 3, static_cast<std::uint64_t>(draws), 123);
  for (int o = 0; o < 6; ++o) CHECK(std::fabs(f[o] - d.probs[o]) < 4.0 * testsupport::binomial_sigma(d.probs[o], draws));
}

TEST_CASE("observability of the exchangeable model") {
  CHECK(observability(testsupport::exchangeable_model(4)) == doctest::Approx(1.0 / 6.0).epsilon(1e-9));
}
