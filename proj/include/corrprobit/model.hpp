#pragma once

#include <Eigen/Dense>
#include <vector>

namespace corrprobit {

inline constexpr double kRankTol = 1e-8;
inline constexpr double kSymmetryTol = 1e-12;
inline constexpr double kNormalizationTol = 1e-9;

// Gaussian utilities X ~ N(mu, sigma) over n items.
struct ProbitModel {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  bool normalized = false;

  int n() const { return static_cast<int>(mu.size()); }
};

// Checks shapes, finiteness and symmetry; throws AsymmetricInput / InvalidArgument.
ProbitModel make_model(Eigen::VectorXd mu, Eigen::MatrixXd sigma);

struct NormalizeReport {
  double scale = 1.0;         // t: sigma is divided by t, mu by sqrt(t)
  double mean_shift = 0.0;    // common shift removed from mu
  double min_nonzero_eigenvalue = 0.0;
};

struct NormalizeResult {
  ProbitModel model;
  NormalizeReport report;
};

// Projects onto the sum-zero hyperplane and rescales to trace n; choice law is unchanged.
NormalizeResult normalize(const ProbitModel& model);

// Throws NormalizationViolated unless mean sums to zero, rows sum to zero, trace is n (all within tol)
// and the covariance is PSD with rank n-1.
void check_normalized(const ProbitModel& model, double tol = 1e-6);
bool is_normalized(const ProbitModel& model, double tol = kNormalizationTol);

// Alternative normalization pinning item 0: mu_0 = 0, sigma row/col 0 zero, trace n-1.
ProbitModel to_diffform(const ProbitModel& model);
ProbitModel from_diffform(const ProbitModel& model);
void check_diffform(const ProbitModel& model, double tol = 1e-6);

double difference_variance(const ProbitModel& model, int i, int j);
// P{X_i > X_j}.
double pairwise_probability(const ProbitModel& model, int i, int j);

// Model restricted to the listed items (not renormalized).
ProbitModel restrict_items(const ProbitModel& model, const std::vector<int>& items);

// Symmetric eigen-square-root F with F F^T = sigma; small negative eigenvalues are clipped.
Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& sigma);

}  // namespace corrprobit
