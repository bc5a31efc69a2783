#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

#include "corrprobit/model.hpp"
#include "corrprobit/ranking.hpp"

namespace corrprobit {

using Rng = std::mt19937_64;

// Independent stream seed derived from a base seed and a stream index (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Draws from N(mu, sigma) through an eigen-square-root factor.
class GaussianSampler {
 public:
  GaussianSampler(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma);
  void draw(Rng& rng, Eigen::VectorXd& out);
  int dim() const { return static_cast<int>(mu_.size()); }

 private:
  Eigen::VectorXd mu_;
  Eigen::MatrixXd factor_;
  Eigen::VectorXd z_;
  std::normal_distribution<double> normal_;
};

// Items sorted by descending utility; exact ties go to the lower item index first.
Ranking rank_by_utility(const std::vector<int>& items, const Eigen::VectorXd& utilities);

std::vector<Ranking> sample_rankings(const ProbitModel& model, const std::vector<std::vector<int>>& subsets,
                                     std::uint64_t seed);

// Ordering counts for `draws` independent draws on one triple.
std::array<std::uint64_t, 6> sample_triple_counts(const ProbitModel& model, const Triple& triple, std::uint64_t draws,
                                                  std::uint64_t seed);

struct RejectionBudget {
  std::uint64_t max_proposals = 10'000'000;
  std::uint64_t target_accepted = 0;  // 0: spend all proposals
};

struct ConditionalEstimate {
  double probability = 0.0;
  std::uint64_t accepted = 0;
  std::uint64_t proposals = 0;
  std::uint64_t favourable = 0;
};

// P{X_i > X_j | context ordering holds} by rejection sampling.
ConditionalEstimate conditional_pair_probability(const ProbitModel& model, const Ranking& context, int i, int j,
                                                 const RejectionBudget& budget, std::uint64_t seed);

struct WelfareQuery {
  int menu_size = 1;
  std::vector<int> candidate_items;
  std::uint64_t mc_samples = 100'000;
  std::uint64_t enumeration_cap = 200'000;
};

struct MenuValue {
  std::vector<int> menu;
  double value = 0.0;
  double std_error = 0.0;
};

struct WelfareResult {
  MenuValue best;
  std::vector<MenuValue> table;  // lexicographic menu order
  // Paired standard error of (best - runner-up) on the shared draws; 0 if only one menu.
  double gap_to_runner_up = 0.0;
  double gap_std_error = 0.0;
};

// Monte-Carlo E[max_{i in menu} X_i] for every menu of the requested size, on shared draws.
WelfareResult expected_max_welfare(const ProbitModel& model, const WelfareQuery& query, std::uint64_t seed);

}  // namespace corrprobit
