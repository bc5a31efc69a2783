#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "corrprobit/estimator3.hpp"
#include "corrprobit/model.hpp"
#include "corrprobit/sampling.hpp"

namespace corrprobit {

struct PairEdge {
  int from = 0;  // pair indices
  int to = 0;
  Triple triple{};  // sorted items
};

// Graph whose vertices are unordered item pairs; an edge joins two pairs sharing an item.
struct ItemPairGraph {
  int n = 0;
  std::vector<std::pair<int, int>> pairs;  // i < j, lexicographic
  std::vector<PairEdge> edges;

  int pair_index(int i, int j) const;
};

ItemPairGraph build_subgraph(int n);
// Every shared-item pair combination inside each listed triple becomes an edge.
ItemPairGraph graph_from_triples(int n, const std::vector<Triple>& triples);

// Largest BFS distance between vertices; -1 when disconnected.
int graph_diameter(const ItemPairGraph& graph);

std::vector<Triple> select_triples(const ItemPairGraph& graph);

struct ProjectedTriple {
  Eigen::Vector3d mu;
  Eigen::Matrix3d sigma;
};

ProjectedTriple restrict_project(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma, const Triple& triple);

enum class SigmaSolver { PathPropagation, Bisection };

struct SigmaAggregate {
  Eigen::MatrixXd sigma_bar;
  double t_star = 0.0;
  bool psd_repaired = false;
  double min_eigenvalue_before_repair = 0.0;
};

// Estimates must carry sorted triples covering a connected pair graph.
SigmaAggregate aggregate_sigma(int n, const std::vector<ThreeItemEstimate>& estimates,
                               SigmaSolver solver = SigmaSolver::PathPropagation);

// Largest relative violation of the per-edge ratio constraints by sigma.
double ratio_constraint_violation(const Eigen::MatrixXd& sigma, const std::vector<ThreeItemEstimate>& estimates);

struct MuAggregate {
  Eigen::VectorXd mu_bar;
  double objective = 0.0;  // max over triples of |s mu_hat - projected mu_bar|_inf
  std::map<Triple, double> scales;
};

MuAggregate aggregate_mu(int n, const std::vector<ThreeItemEstimate>& estimates, const Eigen::MatrixXd& sigma_bar);

// Answers best-of-three queries.
class TripleSource {
 public:
  virtual ~TripleSource() = default;
  virtual TripleFrequencies query(const Triple& triple, std::uint64_t budget) = 0;
};

class ModelSampleSource : public TripleSource {
 public:
  ModelSampleSource(ProbitModel model, std::uint64_t seed);
  TripleFrequencies query(const Triple& triple, std::uint64_t budget) override;

 private:
  ProbitModel model_;
  std::uint64_t seed_;
  std::uint64_t calls_ = 0;
};

// Integration-exact ordering probabilities; the budget is ignored.
class ExactSource : public TripleSource {
 public:
  explicit ExactSource(ProbitModel model, ProbabilityOptions options = {});
  TripleFrequencies query(const Triple& triple, std::uint64_t budget) override;

 private:
  ProbitModel model_;
  ProbabilityOptions options_;
};

struct AggregatorOptions {
  EstimatorOptions estimator{};
  SigmaSolver solver = SigmaSolver::PathPropagation;
};

struct TripleDiagnostics {
  Triple triple{};
  double samples = 0.0;
  double gamma_hat = 0.0;
  std::array<double, 2> angle_residuals{};
  bool alpha_clamped = false;
  bool retried = false;
  BasisCase case_tag = BasisCase::AbBc;
};

struct GlobalEstimate {
  ProbitModel model;  // mu_bar, sigma_bar
  double t_star = 0.0;
  double mu_objective = 0.0;
  std::map<Triple, double> per_triple_scales;
  std::vector<TripleDiagnostics> triples;
  bool psd_repaired = false;
  double min_eigenvalue_before_repair = 0.0;
  double total_samples = 0.0;
  int retries = 0;
};

// Aggregates already-estimated triples.
GlobalEstimate aggregate_estimates(int n, const std::vector<ThreeItemEstimate>& estimates,
                                   SigmaSolver solver = SigmaSolver::PathPropagation);

// Estimates every listed triple from fixed frequencies, then aggregates.
GlobalEstimate estimate_from_frequencies(int n, const std::vector<TripleFrequencies>& data,
                                         const AggregatorOptions& options = {});

// Queries the subgraph's triples with `budget` observations each; failed triples are retried once at 2x.
GlobalEstimate estimate_model(TripleSource& source, int n, std::uint64_t budget, const AggregatorOptions& options = {});

}  // namespace corrprobit
