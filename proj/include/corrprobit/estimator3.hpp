#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include "corrprobit/ranking.hpp"

namespace corrprobit {

struct TripleCounts {
  Triple triple{};
  std::array<std::uint64_t, 6> counts{};

  std::uint64_t total() const;
};

// Ordering frequencies plus the number of observations behind them (infinite for exact probabilities).
struct TripleFrequencies {
  Triple triple{};
  std::array<double, 6> freq{};
  double total = std::numeric_limits<double>::infinity();

  static TripleFrequencies from_counts(const TripleCounts& counts);
  static TripleFrequencies from_distribution(const RankDistribution3& dist);
};

TripleCounts counts_from_rankings(const std::vector<Ranking>& rankings);

// Difference directions over triple positions: 0 -> e_a - e_b, 1 -> e_b - e_c, 2 -> e_a - e_c.
inline constexpr int kDiffAB = 0;
inline constexpr int kDiffBC = 1;
inline constexpr int kDiffAC = 2;
Eigen::Vector3d difference_vector(int d);

// True when `sign * <c_d, X> >= 0` holds under the ordering.
bool ordering_satisfies(int ordering, int sign, int d);

double halfspace_frequency(const TripleFrequencies& f, int sign, int d);
double cone_frequency(const TripleFrequencies& f, int sign1, int d1, int sign2, int d2);

struct AlphaEstimate {
  std::array<double, 3> alpha{};
  std::array<bool, 3> clamped{};
  double floor = 0.0;
};

AlphaEstimate estimate_alphas(const TripleFrequencies& f);

struct AngleSearchOptions {
  int grid_points = 256;
  double theta_min = 1e-3;
  double theta_tol = 1e-8;
  ProbabilityOptions probability{.grid_resolution = 0, .quadrature = {.abs_tol = 1e-11, .max_segments = 400}};
};

struct AngleEstimate {
  double beta = 0.0;    // estimated <v1, v2>
  double theta = 0.0;
  double residual = 0.0;
};

// Sign-pair index: 0 (+v1,+v2), 1 (+v1,-v2), 2 (-v1,+v2), 3 (-v1,-v2).
double angle_model_probability(double d1, double d2, double theta, int sign_pair,
                               const ProbabilityOptions& options = {});

// Requires d1 >= d2 >= 0. Throws NoFeasibleAngle if the best residual exceeds residual_cap.
AngleEstimate estimate_angle(double d1, double d2, const std::array<double, 4>& cone_freqs, double residual_cap,
                             const AngleSearchOptions& options = {});

double residual_cap_for(double total);

enum class BasisCase { AbBc, AbAc };

struct ThreeItemEstimate {
  Triple triple{};
  Eigen::Vector3d mu_hat = Eigen::Vector3d::Zero();
  Eigen::Matrix3d sigma_hat = Eigen::Matrix3d::Zero();
  std::array<double, 3> alphas{};
  std::array<double, 3> betas{};  // (ab,bc), (ab,ac), (bc,ac)
  BasisCase case_tag = BasisCase::AbBc;
  double scale_s = 0.0;  // |Sigma^{1/2} c_bc| relative to |Sigma^{1/2} c_ab|
  double scale_t = 0.0;  // |Sigma^{1/2} c_ac| relative to |Sigma^{1/2} c_ab|
  double trace = 0.0;
  std::array<double, 2> angle_residuals{};
  std::array<bool, 3> alpha_clamped{};
  bool beta_clamped = false;
  double total = 0.0;
};

inline constexpr double kAngleFloor = 1e-6;

ThreeItemEstimate reconstruct_three(const std::array<double, 3>& alphas, double beta_ab_bc, double beta_ab_ac);

struct ObservabilityReport {
  double gamma_hat = 0.0;
  bool below_warning = false;
};

struct EstimatorOptions {
  double min_samples = 100;
  double gamma_floor_warn = 1e-3;
  AngleSearchOptions angle{};
};

struct TripleEstimateResult {
  ThreeItemEstimate estimate;
  ObservabilityReport observability;
};

TripleEstimateResult estimate_triple(const TripleFrequencies& f, const EstimatorOptions& options = {});
TripleEstimateResult estimate_triple(const TripleCounts& counts, const EstimatorOptions& options = {});

// The estimate as a model over the triple's positions, normalized to trace 3.
ProbitModel estimate_as_model(const ThreeItemEstimate& estimate);

}  // namespace corrprobit
