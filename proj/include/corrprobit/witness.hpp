#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "corrprobit/model.hpp"
#include "corrprobit/ranking.hpp"

namespace corrprobit {

enum class FamilyCase { EqualMeans = 1, ZeroMean = 2, DistinctMeans = 3 };

struct FamilyOptions {
  int count = 5;
  double nu = 0.25;           // starting perturbation, halved until valid
  double min_nu = 1e-10;
  double pairwise_tol = 1e-9;
  double mean_tie_tol = 1e-12;  // relative to the largest |mu|
  std::uint64_t seed = 0;       // direction of the mean perturbation in the distinct-means case
};

// Models with identical pairwise comparison probabilities.
struct EquivalenceFamily {
  ProbitModel base;
  std::vector<ProbitModel> members;  // normalized
  FamilyCase case_tag = FamilyCase::EqualMeans;
  double perturbation_scale = 0.0;
  std::pair<int, int> case_items{-1, -1};  // (i, j) in case 1, (i, -1) in case 2
  std::vector<double> sigma_gaps;          // ||member.sigma - base.sigma||_inf
  double max_pairwise_deviation = 0.0;
};

// Case detection on the pinned form: tied means, a mean equal to item 0's, or all distinct.
FamilyCase detect_family_case(const ProbitModel& diffform, double tie_tol, std::pair<int, int>* items = nullptr);

EquivalenceFamily pairwise_equivalent_family(const ProbitModel& base, const FamilyOptions& options = {});

// Discrete KL over the six orderings; 0 log 0 = 0.
double kl_choice_triple(const ProbitModel& p, const ProbitModel& q, const Triple& triple,
                        const ProbabilityOptions& options = {});

double total_variation_triple(const ProbitModel& p, const ProbitModel& q, const Triple& triple,
                              const ProbabilityOptions& options = {});

struct TripleSeparation {
  Triple triple{};
  double total_variation = 0.0;
};
// Largest six-outcome total variation over all triples.
TripleSeparation max_triple_separation(const ProbitModel& p, const ProbitModel& q,
                                       const ProbabilityOptions& options = {});

struct LowerBoundPair {
  int n = 0;
  double epsilon = 0.0;
  int i_star = 0, j_star = 1;
  Eigen::MatrixXd sigma1, sigma2;
  std::map<Triple, double> kl_per_triple;
  double linf_gap = 0.0;

  ProbitModel model1() const;
  ProbitModel model2() const;
};

// Zero-mean pair differing only through the (i_star, j_star) correlation; epsilon in (0, 1/16].
LowerBoundPair lowerbound_pair(int n, double epsilon, int i_star = 0, int j_star = 1,
                               const ProbabilityOptions& options = {});

}  // namespace corrprobit
