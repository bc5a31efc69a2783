#include "corrprobit/aggregator.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "corrprobit/error.hpp"

namespace corrprobit {
namespace {

double weight_of(const ThreeItemEstimate& e) { return std::isfinite(e.total) && e.total > 0 ? e.total : 1.0; }

int position_in(const Triple& t, int item) {
  for (int p = 0; p < 3; ++p)
    if (t[p] == item) return p;
  return -1;
}

// c^T sigma_hat c for the difference of two items of the triple.
double pair_form(const ThreeItemEstimate& e, int item_a, int item_b) {
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  c(position_in(e.triple, item_a)) = 1.0;
  c(position_in(e.triple, item_b)) = -1.0;
  return c.dot(e.sigma_hat * c);
}

struct TriplePairs {
  std::array<int, 3> pair{};        // graph pair indices
  std::array<double, 3> log_form{};  // log c^T sigma_hat c
};

std::vector<TriplePairs> collect_pairs(const ItemPairGraph& g, const std::vector<ThreeItemEstimate>& estimates) {
  std::vector<TriplePairs> out;
  out.reserve(estimates.size());
  for (const auto& e : estimates) {
    TriplePairs tp;
    const Triple& t = e.triple;
    const int combos[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    for (int k = 0; k < 3; ++k) {
      const int a = t[combos[k][0]], b = t[combos[k][1]];
      const double form = pair_form(e, a, b);
      if (!(form > 0.0) || !std::isfinite(form))
        fail(ErrorCode::NonPositiveRatio, "triple estimate has a non-positive difference variance");
      tp.pair[k] = g.pair_index(std::min(a, b), std::max(a, b));
      tp.log_form[k] = std::log(form);
    }
    out.push_back(tp);
  }
  return out;
}

// Weighted least squares in log space: log d_p = lambda_T + log form_T(p), with log d_0 = 0.
Eigen::VectorXd propagate_pair_forms(const ItemPairGraph& g, const std::vector<ThreeItemEstimate>& estimates,
                                     const std::vector<TriplePairs>& tp) {
  const int pcount = static_cast<int>(g.pairs.size());
  const int tcount = static_cast<int>(tp.size());
  const int unknowns = (pcount - 1) + tcount;
  std::vector<Eigen::Triplet<double>> entries;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(unknowns);
  std::vector<bool> covered(pcount, false);
  for (int t = 0; t < tcount; ++t) {
    const double w = weight_of(estimates[t]);
    const int lam = (pcount - 1) + t;
    for (int k = 0; k < 3; ++k) {
      const int p = tp[t].pair[k];
      covered[p] = true;
      const double l = tp[t].log_form[k];
      // Residual x_p - lambda_t - l.
      if (p > 0) {
        entries.emplace_back(p - 1, p - 1, w);
        entries.emplace_back(p - 1, lam, -w);
        entries.emplace_back(lam, p - 1, -w);
        rhs(p - 1) += w * l;
      }
      entries.emplace_back(lam, lam, w);
      rhs(lam) -= w * l;
    }
  }
  for (int p = 0; p < pcount; ++p)
    if (!covered[p]) fail(ErrorCode::DisconnectedGraph, "some item pair is not covered by any triple");
  Eigen::SparseMatrix<double> normal(unknowns, unknowns);
  normal.setFromTriplets(entries.begin(), entries.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(normal);
  if (solver.info() != Eigen::Success) fail(ErrorCode::DisconnectedGraph, "pair graph is not connected");
  const Eigen::VectorXd z = solver.solve(rhs);
  if (solver.info() != Eigen::Success || !z.allFinite() || (solver.vectorD().array() <= 1e-12).any())
    fail(ErrorCode::DisconnectedGraph, "pair graph is not connected");
  Eigen::VectorXd logd(pcount);
  logd(0) = 0.0;
  logd.tail(pcount - 1) = z.head(pcount - 1);
  return logd;
}

bool difference_constraints_feasible(int vertices, const std::vector<std::array<double, 3>>& constraints,
                                     Eigen::VectorXd* potential) {
  // Each constraint {u, v, w}: y_u - y_v <= w.
  Eigen::VectorXd dist = Eigen::VectorXd::Zero(vertices);
  for (int iter = 0; iter <= vertices; ++iter) {
    bool changed = false;
    for (const auto& c : constraints) {
      const int u = static_cast<int>(c[0]), v = static_cast<int>(c[1]);
      if (dist(v) + c[2] < dist(u) - 1e-15) {
        dist(u) = dist(v) + c[2];
        changed = true;
      }
    }
    if (!changed) {
      if (potential) *potential = dist;
      return true;
    }
  }
  return false;
}

Eigen::VectorXd bisect_pair_forms(const ItemPairGraph& g, const std::vector<TriplePairs>& tp) {
  const int pcount = static_cast<int>(g.pairs.size());
  auto build = [&](double t) {
    std::vector<std::array<double, 3>> cons;
    const int combos[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    for (const auto& x : tp) {
      for (const auto& cb : combos) {
        const int p1 = x.pair[cb[0]], p2 = x.pair[cb[1]];
        const double log_ratio = x.log_form[cb[0]] - x.log_form[cb[1]];
        cons.push_back({static_cast<double>(p1), static_cast<double>(p2), log_ratio + std::log1p(t)});
        if (t < 1.0) cons.push_back({static_cast<double>(p2), static_cast<double>(p1), -(log_ratio + std::log1p(-t))});
      }
    }
    return cons;
  };
  Eigen::VectorXd y;
  if (!difference_constraints_feasible(pcount, build(1.0), &y))
    fail(ErrorCode::InfeasibleAtCap, "ratio program infeasible at t = 1");
  double lo = 0.0, hi = 1.0;
  if (difference_constraints_feasible(pcount, build(0.0), &y)) return y;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (difference_constraints_feasible(pcount, build(mid), nullptr))
      hi = mid;
    else
      lo = mid;
  }
  difference_constraints_feasible(pcount, build(hi), &y);
  return y;
}

Eigen::MatrixXd sigma_from_pair_forms(int n, const ItemPairGraph& g, const Eigen::VectorXd& logd) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  const double shift = logd.maxCoeff();
  for (std::size_t p = 0; p < g.pairs.size(); ++p) {
    const auto [i, j] = g.pairs[p];
    d(i, j) = d(j, i) = std::exp(logd(static_cast<Eigen::Index>(p)) - shift);
  }
  // Sum of d over ordered pairs is 2 n Tr(sigma).
  const double trace = d.sum() / (2.0 * n);
  d *= n / trace;
  Eigen::VectorXd diag(n);
  for (int i = 0; i < n; ++i) diag(i) = (d.row(i).sum() - n) / n;
  Eigen::MatrixXd s(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s(i, j) = i == j ? diag(i) : 0.5 * (diag(i) + diag(j) - d(i, j));
  return s;
}

}  // namespace

int ItemPairGraph::pair_index(int i, int j) const {
  if (i > j) std::swap(i, j);
  if (i == j || i < 0 || j >= n) fail(ErrorCode::InvalidArgument, "invalid item pair");
  return i * (2 * n - i - 1) / 2 + (j - i - 1);
}

namespace {

ItemPairGraph empty_graph(int n) {
  if (n < 3) fail(ErrorCode::InvalidArgument, "pair graph needs at least three items");
  ItemPairGraph g;
  g.n = n;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) g.pairs.emplace_back(i, j);
  return g;
}

Triple sorted_triple(int a, int b, int c) {
  Triple t{a, b, c};
  std::sort(t.begin(), t.end());
  return t;
}

}  // namespace

ItemPairGraph build_subgraph(int n) {
  ItemPairGraph g = empty_graph(n);
  for (int i = 0; i < n; ++i) {
    std::vector<int> others;
    for (int j = 0; j < n; ++j)
      if (j != i) others.push_back(j);
    const int m = static_cast<int>(others.size());
    // Complete binary tree in heap order over the other items.
    for (int parent = 0; parent < m; ++parent) {
      for (int child : {2 * parent + 1, 2 * parent + 2}) {
        if (child >= m) continue;
        const int a = others[parent], b = others[child];
        g.edges.push_back({g.pair_index(i, a), g.pair_index(i, b), sorted_triple(i, a, b)});
      }
    }
  }
  return g;
}

ItemPairGraph graph_from_triples(int n, const std::vector<Triple>& triples) {
  ItemPairGraph g = empty_graph(n);
  std::set<Triple> seen;
  for (const Triple& raw : triples) {
    const Triple t = sorted_triple(raw[0], raw[1], raw[2]);
    if (t[0] == t[1] || t[1] == t[2] || t[0] < 0 || t[2] >= n)
      fail(ErrorCode::InvalidArgument, "invalid triple for the pair graph");
    if (!seen.insert(t).second) continue;
    const int ab = g.pair_index(t[0], t[1]), ac = g.pair_index(t[0], t[2]), bc = g.pair_index(t[1], t[2]);
    g.edges.push_back({ab, ac, t});
    g.edges.push_back({ab, bc, t});
    g.edges.push_back({ac, bc, t});
  }
  return g;
}

int graph_diameter(const ItemPairGraph& graph) {
  const int v = static_cast<int>(graph.pairs.size());
  std::vector<std::vector<int>> adj(v);
  for (const auto& e : graph.edges) {
    adj[e.from].push_back(e.to);
    adj[e.to].push_back(e.from);
  }
  for (auto& a : adj) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }
  int diameter = 0;
  std::vector<std::uint64_t> reached(v), next(v);
  // Bit-parallel BFS from 64 sources at a time.
  for (int base = 0; base < v; base += 64) {
    const int width = std::min(64, v - base);
    const std::uint64_t full = width == 64 ? ~0ULL : ((1ULL << width) - 1);
    std::fill(reached.begin(), reached.end(), 0ULL);
    for (int s = 0; s < width; ++s) reached[base + s] |= 1ULL << s;
    int level = 0;
    while (true) {
      bool changed = false;
      for (int x = 0; x < v; ++x) {
        std::uint64_t acc = reached[x];
        for (int y : adj[x]) acc |= reached[y];
        next[x] = acc;
        changed |= acc != reached[x];
      }
      if (!changed) break;
      reached.swap(next);
      ++level;
    }
    for (int x = 0; x < v; ++x)
      if (reached[x] != full) return -1;
    diameter = std::max(diameter, level);
  }
  return diameter;
}

std::vector<Triple> select_triples(const ItemPairGraph& graph) {
  std::set<Triple> uniq;
  for (const auto& e : graph.edges) uniq.insert(e.triple);
  return {uniq.begin(), uniq.end()};
}

ProjectedTriple restrict_project(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma, const Triple& t) {
  const Eigen::Matrix3d m = Eigen::Matrix3d::Identity() - Eigen::Matrix3d::Constant(1.0 / 3.0);
  Eigen::Vector3d sub_mu;
  Eigen::Matrix3d sub_sigma;
  for (int a = 0; a < 3; ++a) {
    sub_mu(a) = mu(t[a]);
    for (int b = 0; b < 3; ++b) sub_sigma(a, b) = sigma(t[a], t[b]);
  }
  ProjectedTriple out;
  out.mu = m * sub_mu;
  out.sigma = m * sub_sigma * m;
  return out;
}

SigmaAggregate aggregate_sigma(int n, const std::vector<ThreeItemEstimate>& estimates, SigmaSolver solver) {
  std::vector<Triple> triples;
  for (const auto& e : estimates) triples.push_back(e.triple);
  const ItemPairGraph g = graph_from_triples(n, triples);
  const auto tp = collect_pairs(g, estimates);
  const Eigen::VectorXd logd =
      solver == SigmaSolver::PathPropagation ? propagate_pair_forms(g, estimates, tp) : bisect_pair_forms(g, tp);

  SigmaAggregate out;
  Eigen::MatrixXd s = sigma_from_pair_forms(n, g, logd);
  s = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
  Eigen::VectorXd ev = eig.eigenvalues();
  // The all-ones direction is an exact null vector; judge PSD on the remaining spectrum.
  out.min_eigenvalue_before_repair = ev(1);
  if (ev(1) < 0.0 || ev(0) < -1e-9 * n) {
    out.psd_repaired = true;
    ev = ev.cwiseMax(0.0);
    s = eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
    const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
    s = m * s * m;
    s = 0.5 * (s + s.transpose());
    s *= n / s.trace();
  }
  out.sigma_bar = s;
  out.t_star = ratio_constraint_violation(s, estimates);
  return out;
}

double ratio_constraint_violation(const Eigen::MatrixXd& sigma, const std::vector<ThreeItemEstimate>& estimates) {
  double worst = 0.0;
  auto form = [&](int a, int b) { return sigma(a, a) + sigma(b, b) - 2.0 * sigma(a, b); };
  for (const auto& e : estimates) {
    const Triple& t = e.triple;
    const int combos[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    double bar[3], hat[3];
    for (int k = 0; k < 3; ++k) {
      bar[k] = form(t[combos[k][0]], t[combos[k][1]]);
      hat[k] = pair_form(e, t[combos[k][0]], t[combos[k][1]]);
    }
    for (int p = 0; p < 3; ++p)
      for (int q = p + 1; q < 3; ++q) worst = std::max(worst, std::fabs((bar[p] / bar[q]) / (hat[p] / hat[q]) - 1.0));
  }
  return worst;
}

MuAggregate aggregate_mu(int n, const std::vector<ThreeItemEstimate>& estimates, const Eigen::MatrixXd& sigma_bar) {
  MuAggregate out;
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  std::vector<double> scale(estimates.size());
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    const auto& e = estimates[k];
    const ProjectedTriple proj = restrict_project(Eigen::VectorXd::Zero(n), sigma_bar, e.triple);
    const double s = std::sqrt(proj.sigma.trace() / e.sigma_hat.trace());
    scale[k] = s;
    out.scales[e.triple] = s;
    const double w = weight_of(e);
    for (int p = 0; p < 3; ++p)
      for (int q = p + 1; q < 3; ++q) {
        const int a = e.triple[p], b = e.triple[q];
        const double diff = s * (e.mu_hat(p) - e.mu_hat(q));
        // Least squares on mu_a - mu_b = diff.
        lap(a, a) += w;
        lap(b, b) += w;
        lap(a, b) -= w;
        lap(b, a) -= w;
        rhs(a) += w * diff;
        rhs(b) -= w * diff;
      }
  }
  const Eigen::MatrixXd anchored = lap + Eigen::MatrixXd::Constant(n, n, lap.diagonal().mean() / n);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(anchored);
  out.mu_bar = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success || !out.mu_bar.allFinite())
    fail(ErrorCode::DisconnectedGraph, "item difference graph is not connected");
  out.mu_bar.array() -= out.mu_bar.mean();
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    const auto& e = estimates[k];
    const ProjectedTriple proj = restrict_project(out.mu_bar, sigma_bar, e.triple);
    out.objective = std::max(out.objective, (scale[k] * e.mu_hat - proj.mu).cwiseAbs().maxCoeff());
  }
  return out;
}

ModelSampleSource::ModelSampleSource(ProbitModel model, std::uint64_t seed) : model_(std::move(model)), seed_(seed) {}

TripleFrequencies ModelSampleSource::query(const Triple& triple, std::uint64_t budget) {
  TripleCounts c;
  c.triple = triple;
  c.counts = sample_triple_counts(model_, triple, budget, derive_seed(seed_, calls_++));
  return TripleFrequencies::from_counts(c);
}

ExactSource::ExactSource(ProbitModel model, ProbabilityOptions options)
    : model_(std::move(model)), options_(options) {}

TripleFrequencies ExactSource::query(const Triple& triple, std::uint64_t) {
  return TripleFrequencies::from_distribution(
      triple_rank_probabilities(model_, triple[0], triple[1], triple[2], options_));
}

namespace {

TripleDiagnostics diagnostics_for(const TripleEstimateResult& r, bool retried) {
  TripleDiagnostics d;
  d.triple = r.estimate.triple;
  d.samples = r.estimate.total;
  d.gamma_hat = r.observability.gamma_hat;
  d.angle_residuals = r.estimate.angle_residuals;
  d.alpha_clamped = r.estimate.alpha_clamped[0] || r.estimate.alpha_clamped[1] || r.estimate.alpha_clamped[2];
  d.retried = retried;
  d.case_tag = r.estimate.case_tag;
  return d;
}

}  // namespace

GlobalEstimate aggregate_estimates(int n, const std::vector<ThreeItemEstimate>& input, SigmaSolver solver) {
  std::vector<ThreeItemEstimate> estimates = input;
  std::sort(estimates.begin(), estimates.end(),
            [](const ThreeItemEstimate& a, const ThreeItemEstimate& b) { return a.triple < b.triple; });
  GlobalEstimate out;
  const SigmaAggregate sig = aggregate_sigma(n, estimates, solver);
  const MuAggregate mu = aggregate_mu(n, estimates, sig.sigma_bar);
  out.model.mu = mu.mu_bar;
  out.model.sigma = sig.sigma_bar;
  out.model.normalized = true;
  out.t_star = sig.t_star;
  out.mu_objective = mu.objective;
  out.per_triple_scales = mu.scales;
  out.psd_repaired = sig.psd_repaired;
  out.min_eigenvalue_before_repair = sig.min_eigenvalue_before_repair;
  for (const auto& e : estimates)
    if (std::isfinite(e.total)) out.total_samples += e.total;
  return out;
}

GlobalEstimate estimate_from_frequencies(int n, const std::vector<TripleFrequencies>& data,
                                         const AggregatorOptions& options) {
  std::vector<ThreeItemEstimate> estimates;
  std::vector<TripleDiagnostics> diags;
  for (const auto& f : data) {
    const auto r = estimate_triple(f, options.estimator);
    estimates.push_back(r.estimate);
    diags.push_back(diagnostics_for(r, false));
  }
  GlobalEstimate out = aggregate_estimates(n, estimates, options.solver);
  out.triples = std::move(diags);
  return out;
}

GlobalEstimate estimate_model(TripleSource& source, int n, std::uint64_t budget, const AggregatorOptions& options) {
  if (budget == 0) fail(ErrorCode::InvalidArgument, "per-triple budget must be positive");
  const auto triples = select_triples(build_subgraph(n));
  std::vector<ThreeItemEstimate> estimates;
  std::vector<TripleDiagnostics> diags;
  double spent = 0.0;
  int retries = 0;
  for (const Triple& t : triples) {
    TripleFrequencies f = source.query(t, budget);
    if (std::isfinite(f.total)) spent += f.total;
    TripleEstimateResult r;
    bool retried = false;
    try {
      r = estimate_triple(f, options.estimator);
    } catch (const Error&) {
      ++retries;
      retried = true;
      f = source.query(t, 2 * budget);
      if (std::isfinite(f.total)) spent += f.total;
      r = estimate_triple(f, options.estimator);
    }
    estimates.push_back(r.estimate);
    diags.push_back(diagnostics_for(r, retried));
  }
  GlobalEstimate out = aggregate_estimates(n, estimates, options.solver);
  out.triples = std::move(diags);
  out.total_samples = spent;
  out.retries = retries;
  return out;
}

}  // namespace corrprobit
