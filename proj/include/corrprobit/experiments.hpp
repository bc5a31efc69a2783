#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "corrprobit/estimator3.hpp"
#include "corrprobit/model.hpp"
#include "corrprobit/ranking.hpp"
#include "corrprobit/sampling.hpp"

namespace corrprobit {

enum class MeanKind { Zero, Random };
enum class CovKind { Identity, RandomDiagonal, Bin, RandomFull };

struct SyntheticRegime {
  MeanKind mu_kind = MeanKind::Zero;
  CovKind sigma_kind = CovKind::Identity;
  int n = 8;
  std::uint64_t seed = 0;
  double gamma_floor = -1.0;  // negative: 1e-3 for zero means, merely positive for random means
  int max_attempts = 20;
  double bin_floor = 0.05;  // smallest hyperplane eigenvalue kept after clipping the block pattern
};

// Short labels "0"/"r" and "I"/"rI"/"bin"/"r".
std::string mean_kind_label(MeanKind kind);
std::string cov_kind_label(CovKind kind);
std::string regime_label(const SyntheticRegime& regime);
MeanKind parse_mean_kind(const std::string& label);
CovKind parse_cov_kind(const std::string& label);

ProbitModel generate_regime(const SyntheticRegime& regime);

// Training data.
struct PairTally {
  int i = 0, j = 1;
  std::uint64_t wins_i = 0, wins_j = 0;
};
struct PairwiseData {
  int n = 0;
  std::vector<PairTally> pairs;
  std::uint64_t total() const;
};

// Splits `total` observations as evenly as possible over all pairs / all triples.
PairwiseData sample_pairwise_data(const ProbitModel& model, std::uint64_t total, std::uint64_t seed);
std::vector<TripleCounts> sample_triple_data(const ProbitModel& model, std::uint64_t total, std::uint64_t seed);

struct MleOptions {
  int steps = 9000;
  double learning_rate = 0.02;  // cosine-decayed to zero
  double beta1 = 0.9;
  double beta2 = 0.999;
  double fd_step = 1e-5;
  std::size_t grid_resolution = 10;  // Gauss-Legendre order per piece for the likelihood
  std::optional<ProbitModel> init;   // exchangeable when absent
};

struct MleFit {
  ProbitModel model;  // normalized
  double nll = 0.0;   // mean negative log-likelihood per observation
  int steps = 0;
};

double pairwise_nll(const ProbitModel& model, const PairwiseData& data);
double triple_nll(const ProbitModel& model, const std::vector<TripleCounts>& data,
                  const ProbabilityOptions& options = {});

MleFit fit_probit_pairwise_mle(const PairwiseData& data, const MleOptions& options = {});
MleFit fit_probit_triple_mle(int n, const std::vector<TripleCounts>& data, const MleOptions& options = {});

struct LogitOptions {
  int max_iterations = 100;
  double tolerance = 1e-10;
  double ridge = 1e-2;  // applied only when the comparison graph is disconnected
};

struct LogitFit {
  Eigen::VectorXd utilities;  // centered
  bool regularized = false;
  double nll = 0.0;
  int iterations = 0;
};

// Plackett-Luce maximum likelihood; rankings are best-first, weights default to 1.
LogitFit fit_logit(int n, const std::vector<Ranking>& rankings, const std::vector<double>& weights = {},
                   const LogitOptions& options = {});

struct WeightedRankings {
  std::vector<Ranking> rankings;
  std::vector<double> weights;
};
WeightedRankings rankings_from_triple_counts(const std::vector<TripleCounts>& data);
WeightedRankings rankings_from_pairwise(const PairwiseData& data);

double logit_pair_probability(const Eigen::VectorXd& utilities, int i, int j);
// Expected max of Gumbel-perturbed utilities up to the Euler constant: log-sum-exp over the menu.
double logit_welfare(const Eigen::VectorXd& utilities, const std::vector<int>& menu);

struct Method {
  std::string name;
  bool is_logit = false;
  ProbitModel model;
  Eigen::VectorXd utilities;

  static Method probit(std::string name, ProbitModel model);
  static Method logit(std::string name, Eigen::VectorXd utilities);
};

struct AccuracyTask {
  int trials = 10000;
  int context_size = 4;
  int bootstrap = 200;
  RejectionBudget budget{10'000'000, 200};
};

struct ExperimentReport {
  std::string method;
  std::string regime;
  double q25 = 0.0, q50 = 0.0, q75 = 0.0;  // bootstrap accuracy quartiles
  double mean = 0.0;
  double std_error = 0.0;
  int trials = 0;
  int fallbacks = 0;  // predictions without an accepted conditional draw
  double runtime_seconds = 0.0;
  std::vector<std::pair<double, double>> error_curve;
  std::map<std::string, std::string> config;
};

// Per trial: six distinct items, four revealed as context, predict the remaining pair.
std::vector<ExperimentReport> run_accuracy(const ProbitModel& truth, const std::vector<Method>& methods,
                                           const AccuracyTask& task, std::uint64_t seed);

struct SyntheticConfig {
  std::uint64_t training_comparisons = 100'000;
  AccuracyTask task{};
  MleOptions mle{};
  bool include_moment_estimator = true;
  std::uint64_t seed = 0;
};

struct SyntheticResult {
  SyntheticRegime regime;
  ProbitModel truth;
  std::vector<Method> methods;
  std::vector<std::string> skipped;  // methods whose fit failed, with reason
  std::vector<ExperimentReport> reports;
};

// Generates the regime, fits every method on fresh training data, and scores them.
SyntheticResult run_synthetic(const SyntheticRegime& regime, const SyntheticConfig& config);

struct WelfareMenuReport {
  std::string method;
  int size = 0;
  std::vector<int> menu;
  double true_value = 0.0;  // E max over the menu under the true model
  double true_std_error = 0.0;
  std::vector<std::uint64_t> best_rank_histogram;  // [r]: draws where the menu's best item has overall rank r
};

std::vector<WelfareMenuReport> run_welfare(const ProbitModel& truth, const std::vector<Method>& methods,
                                           const std::vector<int>& sizes, std::uint64_t mc_samples,
                                           std::uint64_t seed);

// Four items: two strongly correlated favourites and an anticorrelated third.
ProbitModel anticorrelated_welfare_model();

}  // namespace corrprobit
