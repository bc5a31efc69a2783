#include "corrprobit/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "corrprobit/aggregator.hpp"
#include "corrprobit/error.hpp"
#include "corrprobit/normal.hpp"

namespace corrprobit {
namespace {

// Orthonormal basis of the sum-zero hyperplane (columns).
Eigen::MatrixXd helmert_basis(int n) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n - 1);
  for (int k = 1; k < n; ++k) {
    const double norm = std::sqrt(static_cast<double>(k) * (k + 1));
    for (int i = 0; i < k; ++i) h(i, k - 1) = 1.0 / norm;
    h(k, k - 1) = -static_cast<double>(k) / norm;
  }
  return h;
}

ProbitModel hyperplane_model(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma) {
  ProbitModel raw = make_model(mu, sigma);
  return normalize(raw).model;
}

double safe_log(double p) { return std::log(std::max(p, 1e-300)); }

std::vector<Triple> all_triples(int n) {
  std::vector<Triple> out;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = j + 1; k < n; ++k) out.push_back({i, j, k});
  return out;
}

// Parameters: mu = H a, sigma = H (L L^T + floor * tr(L L^T) / (n-1) I) H^T with L lower triangular.
constexpr double kEigenFloor = 1e-3;
struct FactorParams {
  Eigen::VectorXd a;
  Eigen::MatrixXd l;
};

ProbitModel params_to_model(const Eigen::MatrixXd& h, const FactorParams& p) {
  ProbitModel m;
  m.mu = h * p.a;
  const int k = static_cast<int>(p.l.rows());
  const Eigen::MatrixXd inner =
      p.l * p.l.transpose() + (kEigenFloor * p.l.squaredNorm() / k) * Eigen::MatrixXd::Identity(k, k);
  m.sigma = h * inner * h.transpose();
  m.sigma = 0.5 * (m.sigma + m.sigma.transpose());
  m.normalized = true;
  return m;
}

void rescale_to_trace(FactorParams& p, int n) {
  const double c = (1.0 + kEigenFloor) * p.l.squaredNorm() / n;
  if (!(c > 0.0) || !std::isfinite(c)) fail(ErrorCode::NonFiniteLikelihood, "factor collapsed during fitting");
  p.l /= std::sqrt(c);
  p.a /= std::sqrt(c);
}

FactorParams initial_params(const Eigen::MatrixXd& h, int n, const std::optional<ProbitModel>& init) {
  FactorParams p;
  if (!init) {
    p.a = Eigen::VectorXd::Zero(n - 1);
    p.l = std::sqrt(static_cast<double>(n) / (n - 1)) * Eigen::MatrixXd::Identity(n - 1, n - 1);
    return p;
  }
  if (init->n() != n) fail(ErrorCode::InvalidArgument, "initial model has the wrong size");
  const ProbitModel m = normalize(*init).model;
  p.a = h.transpose() * m.mu;
  Eigen::MatrixXd inner = h.transpose() * m.sigma * h;
  inner = 0.5 * (inner + inner.transpose());
  inner += 1e-9 * Eigen::MatrixXd::Identity(n - 1, n - 1);
  Eigen::LLT<Eigen::MatrixXd> llt(inner);
  if (llt.info() != Eigen::Success) fail(ErrorCode::NotPositiveSemidefinite, "initial covariance is not PSD");
  p.l = llt.matrixL();
  return p;
}

// Objective returns the loss and fills gradients w.r.t. mu (n) and sigma (n x n, symmetric convention).
using Objective = double (*)(const void*, const ProbitModel&, Eigen::VectorXd&, Eigen::MatrixXd&);

MleFit run_adam(int n, const void* ctx, Objective objective, const MleOptions& options) {
  if (options.steps < 0) fail(ErrorCode::InvalidArgument, "negative step count");
  const Eigen::MatrixXd h = helmert_basis(n);
  FactorParams p = initial_params(h, n, options.init);
  rescale_to_trace(p, n);
  const int na = n - 1;
  const int nl = (n - 1) * n / 2;
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(na + nl), m2 = Eigen::VectorXd::Zero(na + nl);
  Eigen::VectorXd g_mu(n);
  Eigen::MatrixXd g_sigma(n, n);
  for (int step = 0; step < options.steps; ++step) {
    const ProbitModel m = params_to_model(h, p);
    const double loss = objective(ctx, m, g_mu, g_sigma);
    if (!std::isfinite(loss)) fail(ErrorCode::NonFiniteLikelihood, "likelihood is not finite");
    const Eigen::VectorXd ga = h.transpose() * g_mu;
    const Eigen::MatrixXd g_inner = h.transpose() * g_sigma * h;
    const Eigen::MatrixXd gl = 2.0 * g_inner * p.l + (2.0 * kEigenFloor * g_inner.trace() / (n - 1)) * p.l;
    Eigen::VectorXd g(na + nl);
    g.head(na) = ga;
    int idx = na;
    for (int r = 0; r < n - 1; ++r)
      for (int c = 0; c <= r; ++c) g(idx++) = gl(r, c);
    if (!g.allFinite()) fail(ErrorCode::NonFiniteLikelihood, "likelihood gradient is not finite");
    m1 = options.beta1 * m1 + (1.0 - options.beta1) * g;
    m2 = options.beta2 * m2 + (1.0 - options.beta2) * g.cwiseProduct(g);
    const double t = step + 1.0;
    const double lr = options.learning_rate * 0.5 * (1.0 + std::cos(kPi * step / options.steps));
    const double c1 = 1.0 - std::pow(options.beta1, t), c2 = 1.0 - std::pow(options.beta2, t);
    const Eigen::VectorXd update =
        lr * (m1 / c1).cwiseQuotient(((m2 / c2).cwiseSqrt().array() + 1e-8).matrix());
    p.a -= update.head(na);
    idx = na;
    for (int r = 0; r < n - 1; ++r)
      for (int c = 0; c <= r; ++c) p.l(r, c) -= update(idx++);
    rescale_to_trace(p, n);
  }
  MleFit fit;
  fit.model = params_to_model(h, p);
  fit.model = normalize(fit.model).model;
  Eigen::VectorXd gm(n);
  Eigen::MatrixXd gs(n, n);
  fit.nll = objective(ctx, fit.model, gm, gs);
  fit.steps = options.steps;
  return fit;
}

struct PairContext {
  const PairwiseData* data;
  double h;
};

double pair_term(double d, double v, double wi, double wj) {
  if (!(v > 0.0)) fail(ErrorCode::NonFiniteLikelihood, "non-positive difference variance");
  const double z = d / std::sqrt(v);
  return -(wi * safe_log(normal_cdf(z)) + wj * safe_log(normal_cdf(-z)));
}

double pairwise_objective(const void* raw, const ProbitModel& m, Eigen::VectorXd& g_mu, Eigen::MatrixXd& g_sigma) {
  const auto& ctx = *static_cast<const PairContext*>(raw);
  const double total = static_cast<double>(ctx.data->total());
  g_mu.setZero(m.n());
  g_sigma.setZero(m.n(), m.n());
  double loss = 0.0;
  const double h = ctx.h;
  for (const auto& t : ctx.data->pairs) {
    const double wi = t.wins_i / total, wj = t.wins_j / total;
    if (wi + wj == 0.0) continue;
    const double d = m.mu(t.i) - m.mu(t.j);
    const double v = m.sigma(t.i, t.i) + m.sigma(t.j, t.j) - 2.0 * m.sigma(t.i, t.j);
    loss += pair_term(d, v, wi, wj);
    const double gd = (pair_term(d + h, v, wi, wj) - pair_term(d - h, v, wi, wj)) / (2 * h);
    const double gv = (pair_term(d, v + h, wi, wj) - pair_term(d, v - h, wi, wj)) / (2 * h);
    g_mu(t.i) += gd;
    g_mu(t.j) -= gd;
    g_sigma(t.i, t.i) += gv;
    g_sigma(t.j, t.j) += gv;
    g_sigma(t.i, t.j) -= gv;
    g_sigma(t.j, t.i) -= gv;
  }
  return loss;
}

struct TripleContext {
  const std::vector<TripleCounts>* data;
  double total;
  ProbabilityOptions prob;
  double h;
};

double plane_term(const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov, const std::array<double, 6>& w,
                  const ProbabilityOptions& opt) {
  const auto probs = plane_rank_probabilities(mean, cov, opt);
  double out = 0.0;
  for (int o = 0; o < 6; ++o)
    if (w[o] > 0.0) out -= w[o] * safe_log(probs[o]);
  return out;
}

double triple_objective(const void* raw, const ProbitModel& m, Eigen::VectorXd& g_mu, Eigen::MatrixXd& g_sigma) {
  const auto& ctx = *static_cast<const TripleContext*>(raw);
  const auto& p = triangle_projection();
  g_mu.setZero(m.n());
  g_sigma.setZero(m.n(), m.n());
  double loss = 0.0;
  const double h = ctx.h;
  for (const auto& c : *ctx.data) {
    std::array<double, 6> w{};
    double sum = 0.0;
    for (int o = 0; o < 6; ++o) sum += (w[o] = c.counts[o] / ctx.total);
    if (sum == 0.0) continue;
    const Triple& t = c.triple;
    Eigen::Vector3d m3;
    Eigen::Matrix3d s3;
    for (int a = 0; a < 3; ++a) {
      m3(a) = m.mu(t[a]);
      for (int b = 0; b < 3; ++b) s3(a, b) = m.sigma(t[a], t[b]);
    }
    const Eigen::Vector2d mean = p * m3;
    const Eigen::Matrix2d cov = p * s3 * p.transpose();
    loss += plane_term(mean, cov, w, ctx.prob);
    Eigen::Vector2d gm;
    for (int a = 0; a < 2; ++a) {
      Eigen::Vector2d up = mean, dn = mean;
      up(a) += h;
      dn(a) -= h;
      gm(a) = (plane_term(up, cov, w, ctx.prob) - plane_term(dn, cov, w, ctx.prob)) / (2 * h);
    }
    Eigen::Matrix2d gs;
    for (int a = 0; a < 2; ++a) {
      Eigen::Matrix2d up = cov, dn = cov;
      up(a, a) += h;
      dn(a, a) -= h;
      gs(a, a) = (plane_term(mean, up, w, ctx.prob) - plane_term(mean, dn, w, ctx.prob)) / (2 * h);
    }
    {
      Eigen::Matrix2d up = cov, dn = cov;
      up(0, 1) += h;
      up(1, 0) += h;
      dn(0, 1) -= h;
      dn(1, 0) -= h;
      gs(0, 1) = gs(1, 0) = 0.5 * (plane_term(mean, up, w, ctx.prob) - plane_term(mean, dn, w, ctx.prob)) / (2 * h);
    }
    const Eigen::Vector3d g3 = p.transpose() * gm;
    const Eigen::Matrix3d gs3 = p.transpose() * gs * p;
    for (int a = 0; a < 3; ++a) {
      g_mu(t[a]) += g3(a);
      for (int b = 0; b < 3; ++b) g_sigma(t[a], t[b]) += gs3(a, b);
    }
  }
  return loss;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * (sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - lo) * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::string mean_kind_label(MeanKind kind) { return kind == MeanKind::Zero ? "0" : "r"; }

std::string cov_kind_label(CovKind kind) {
  switch (kind) {
    case CovKind::Identity: return "I";
    case CovKind::RandomDiagonal: return "rI";
    case CovKind::Bin: return "bin";
    case CovKind::RandomFull: return "r";
  }
  return "?";
}

std::string regime_label(const SyntheticRegime& r) { return mean_kind_label(r.mu_kind) + "/" + cov_kind_label(r.sigma_kind); }

MeanKind parse_mean_kind(const std::string& label) {
  if (label == "0" || label == "zero") return MeanKind::Zero;
  if (label == "r" || label == "random") return MeanKind::Random;
  fail(ErrorCode::InvalidArgument, "unknown mean kind '" + label + "'");
}

CovKind parse_cov_kind(const std::string& label) {
  if (label == "I" || label == "identity") return CovKind::Identity;
  if (label == "rI" || label == "random_diagonal") return CovKind::RandomDiagonal;
  if (label == "bin") return CovKind::Bin;
  if (label == "r" || label == "random_full") return CovKind::RandomFull;
  fail(ErrorCode::InvalidArgument, "unknown covariance kind '" + label + "'");
}

ProbitModel generate_regime(const SyntheticRegime& regime) {
  const int n = regime.n;
  if (n < 3) fail(ErrorCode::InvalidArgument, "regimes need at least three items");
  for (int attempt = 0; attempt < regime.max_attempts; ++attempt) {
    Rng rng(derive_seed(regime.seed, static_cast<std::uint64_t>(attempt)));
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> unif(0.25, 1.75);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(n);
    if (regime.mu_kind == MeanKind::Random)
      for (int i = 0; i < n; ++i) mu(i) = gauss(rng);
    Eigen::MatrixXd sigma;
    switch (regime.sigma_kind) {
      case CovKind::Identity: sigma = Eigen::MatrixXd::Identity(n, n); break;
      case CovKind::RandomDiagonal: {
        sigma = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i) sigma(i, i) = unif(rng);
        break;
      }
      case CovKind::Bin: {
        Eigen::VectorXd sign(n);
        for (int i = 0; i < n; ++i) sign(i) = i < (n + 1) / 2 ? 1.0 : -1.0;
        const Eigen::MatrixXd pattern = sign * sign.transpose();
        const Eigen::MatrixXd h = helmert_basis(n);
        Eigen::MatrixXd inner = h.transpose() * pattern * h;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (inner + inner.transpose()));
        const Eigen::VectorXd ev = eig.eigenvalues().cwiseMax(regime.bin_floor);
        sigma = h * eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose() * h.transpose();
        break;
      }
      case CovKind::RandomFull: {
        Eigen::MatrixXd w(n, n);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) w(i, j) = gauss(rng);
        sigma = w * w.transpose() / n;
        break;
      }
    }
    sigma = 0.5 * (sigma + sigma.transpose());
    ProbitModel m;
    try {
      m = hyperplane_model(mu, sigma);
    } catch (const Error&) {
      continue;
    }
    const double floor = regime.gamma_floor >= 0.0 ? regime.gamma_floor
                         : regime.mu_kind == MeanKind::Zero ? 1e-3
                                                            : 1e-300;
    if (observability(m) >= floor) return m;
  }
  fail(ErrorCode::RegimeUnsatisfiable, "no model met the observability floor for regime " + regime_label(regime));
}

std::uint64_t PairwiseData::total() const {
  std::uint64_t s = 0;
  for (const auto& p : pairs) s += p.wins_i + p.wins_j;
  return s;
}

PairwiseData sample_pairwise_data(const ProbitModel& model, std::uint64_t total, std::uint64_t seed) {
  check_normalized(model);
  const int n = model.n();
  PairwiseData out;
  out.n = n;
  const std::uint64_t pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  std::uint64_t index = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j, ++index) {
      const std::uint64_t draws = total / pairs + (index < total % pairs ? 1 : 0);
      Rng rng(derive_seed(seed, index));
      std::binomial_distribution<std::uint64_t> binom(draws, pairwise_probability(model, i, j));
      const std::uint64_t wins = binom(rng);
      out.pairs.push_back({i, j, wins, draws - wins});
    }
  return out;
}

std::vector<TripleCounts> sample_triple_data(const ProbitModel& model, std::uint64_t total, std::uint64_t seed) {
  const auto triples = all_triples(model.n());
  std::vector<TripleCounts> out;
  for (std::size_t k = 0; k < triples.size(); ++k) {
    const std::uint64_t draws = total / triples.size() + (k < total % triples.size() ? 1 : 0);
    TripleCounts c;
    c.triple = triples[k];
    if (draws > 0) c.counts = sample_triple_counts(model, triples[k], draws, derive_seed(seed, k));
    out.push_back(c);
  }
  return out;
}

double pairwise_nll(const ProbitModel& model, const PairwiseData& data) {
  PairContext ctx{&data, 1e-5};
  Eigen::VectorXd gm;
  Eigen::MatrixXd gs;
  return pairwise_objective(&ctx, model, gm, gs);
}

double triple_nll(const ProbitModel& model, const std::vector<TripleCounts>& data, const ProbabilityOptions& options) {
  double total = 0.0;
  for (const auto& c : data) total += static_cast<double>(c.total());
  if (total == 0.0) fail(ErrorCode::InvalidArgument, "no triple observations");
  double loss = 0.0;
  for (const auto& c : data) {
    if (c.total() == 0) continue;
    const auto d = triple_rank_probabilities(model, c.triple[0], c.triple[1], c.triple[2], options);
    for (int o = 0; o < 6; ++o)
      if (c.counts[o] > 0) loss -= c.counts[o] / total * safe_log(d.probs[o]);
  }
  return loss;
}

MleFit fit_probit_pairwise_mle(const PairwiseData& data, const MleOptions& options) {
  if (data.total() == 0 || data.n < 2) fail(ErrorCode::InvalidArgument, "no pairwise observations");
  PairContext ctx{&data, options.fd_step};
  return run_adam(data.n, &ctx, pairwise_objective, options);
}

MleFit fit_probit_triple_mle(int n, const std::vector<TripleCounts>& data, const MleOptions& options) {
  double total = 0.0;
  for (const auto& c : data) {
    total += static_cast<double>(c.total());
    for (int item : c.triple)
      if (item < 0 || item >= n) fail(ErrorCode::InvalidArgument, "triple item out of range");
  }
  if (total == 0.0 || n < 3) fail(ErrorCode::InvalidArgument, "no triple observations");
  TripleContext ctx{&data, total, {}, options.fd_step};
  ctx.prob.grid_resolution = options.grid_resolution;
  return run_adam(n, &ctx, triple_objective, options);
}

LogitFit fit_logit(int n, const std::vector<Ranking>& rankings, const std::vector<double>& weights,
                   const LogitOptions& options) {
  if (rankings.empty()) fail(ErrorCode::InvalidArgument, "no rankings to fit");
  if (!weights.empty() && weights.size() != rankings.size())
    fail(ErrorCode::InvalidArgument, "weights and rankings differ in length");
  // Union-find over co-ranked items decides whether a ridge is needed.
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  double total_weight = 0.0;
  for (std::size_t r = 0; r < rankings.size(); ++r) {
    const auto& order = rankings[r].order;
    if (order.size() < 2) fail(ErrorCode::InvalidArgument, "rankings need at least two items");
    std::vector<int> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      fail(ErrorCode::DuplicateItemsInRow, "ranking repeats an item");
    for (int item : order)
      if (item < 0 || item >= n) fail(ErrorCode::InvalidArgument, "ranking item out of range");
    for (std::size_t k = 1; k < order.size(); ++k) parent[find(order[k])] = find(order[0]);
    total_weight += weights.empty() ? 1.0 : weights[r];
  }
  int components = 0;
  for (int i = 0; i < n; ++i) components += find(i) == i;

  LogitFit fit;
  fit.regularized = components > 1;
  const double ridge = fit.regularized ? options.ridge : 0.0;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  auto evaluate = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad, Eigen::MatrixXd* hess) {
    double nll = 0.5 * ridge * x.squaredNorm();
    if (grad) *grad = ridge * x;
    if (hess) *hess = ridge * Eigen::MatrixXd::Identity(n, n);
    for (std::size_t r = 0; r < rankings.size(); ++r) {
      const double w = (weights.empty() ? 1.0 : weights[r]) / total_weight;
      const auto& order = rankings[r].order;
      for (std::size_t s = 0; s + 1 < order.size(); ++s) {
        double mx = -INFINITY;
        for (std::size_t t = s; t < order.size(); ++t) mx = std::max(mx, x(order[t]));
        double z = 0.0;
        for (std::size_t t = s; t < order.size(); ++t) z += std::exp(x(order[t]) - mx);
        nll -= w * (x(order[s]) - mx - std::log(z));
        if (!grad) continue;
        (*grad)(order[s]) -= w;
        for (std::size_t t = s; t < order.size(); ++t) {
          const double pt = std::exp(x(order[t]) - mx) / z;
          (*grad)(order[t]) += w * pt;
          if (!hess) continue;
          (*hess)(order[t], order[t]) += w * pt;
          for (std::size_t q = s; q < order.size(); ++q) {
            const double pq = std::exp(x(order[q]) - mx) / z;
            (*hess)(order[t], order[q]) -= w * pt * pq;
          }
        }
      }
    }
    return nll;
  };
  const Eigen::MatrixXd centre = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
  Eigen::VectorXd g;
  Eigen::MatrixXd hmat;
  double current = evaluate(u, &g, &hmat);
  for (int it = 0; it < options.max_iterations; ++it) {
    fit.iterations = it + 1;
    // The all-ones direction is flat without a ridge; pin it with a rank-one term.
    const Eigen::MatrixXd system = hmat + Eigen::MatrixXd::Constant(n, n, 1.0 / n);
    Eigen::VectorXd step = -system.ldlt().solve(g);
    step = centre * step;
    double scale = 1.0;
    double next = evaluate(u + step, nullptr, nullptr);
    while (next > current + 1e-4 * scale * g.dot(step) && scale > 1e-10) {
      scale *= 0.5;
      next = evaluate(u + scale * step, nullptr, nullptr);
    }
    u += scale * step;
    const double gain = current - next;
    current = evaluate(u, &g, &hmat);
    if ((centre * g).cwiseAbs().maxCoeff() < options.tolerance || gain < options.tolerance * 1e-3) break;
  }
  fit.utilities = u.array() - u.mean();
  fit.nll = current;
  return fit;
}

WeightedRankings rankings_from_triple_counts(const std::vector<TripleCounts>& data) {
  WeightedRankings out;
  for (const auto& c : data)
    for (int o = 0; o < 6; ++o) {
      if (c.counts[o] == 0) continue;
      const auto& ord = kOrderings[o];
      out.rankings.push_back({{c.triple[ord[0]], c.triple[ord[1]], c.triple[ord[2]]}});
      out.weights.push_back(static_cast<double>(c.counts[o]));
    }
  return out;
}

WeightedRankings rankings_from_pairwise(const PairwiseData& data) {
  WeightedRankings out;
  for (const auto& p : data.pairs) {
    if (p.wins_i) {
      out.rankings.push_back({{p.i, p.j}});
      out.weights.push_back(static_cast<double>(p.wins_i));
    }
    if (p.wins_j) {
      out.rankings.push_back({{p.j, p.i}});
      out.weights.push_back(static_cast<double>(p.wins_j));
    }
  }
  return out;
}

double logit_pair_probability(const Eigen::VectorXd& u, int i, int j) { return 1.0 / (1.0 + std::exp(u(j) - u(i))); }

double logit_welfare(const Eigen::VectorXd& u, const std::vector<int>& menu) {
  if (menu.empty()) fail(ErrorCode::EmptySubset, "empty menu");
  double mx = -INFINITY;
  for (int i : menu) mx = std::max(mx, u(i));
  double z = 0.0;
  for (int i : menu) z += std::exp(u(i) - mx);
  return mx + std::log(z);
}

Method Method::probit(std::string name, ProbitModel model) {
  Method m;
  m.name = std::move(name);
  m.model = std::move(model);
  return m;
}

Method Method::logit(std::string name, Eigen::VectorXd utilities) {
  Method m;
  m.name = std::move(name);
  m.is_logit = true;
  m.utilities = std::move(utilities);
  return m;
}

std::vector<ExperimentReport> run_accuracy(const ProbitModel& truth, const std::vector<Method>& methods,
                                           const AccuracyTask& task, std::uint64_t seed) {
  const int n = truth.n();
  const int subset = task.context_size + 2;
  if (n < subset) fail(ErrorCode::InvalidArgument, "model has too few items for the accuracy task");
  if (task.trials <= 0 || task.context_size < 1) fail(ErrorCode::InvalidArgument, "invalid accuracy task");
  for (const auto& m : methods)
    if ((m.is_logit ? m.utilities.size() : m.model.n()) != n)
      fail(ErrorCode::InvalidArgument, "method '" + m.name + "' has the wrong item count");

  const std::size_t k = methods.size();
  std::vector<std::vector<double>> scores(k, std::vector<double>(task.trials));
  std::vector<int> fallbacks(k, 0);
  std::vector<double> seconds(k, 0.0);
  GaussianSampler sampler(truth.mu, truth.sigma);
  std::vector<int> items(n);
  Eigen::VectorXd x(n);
  for (int t = 0; t < task.trials; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    std::iota(items.begin(), items.end(), 0);
    for (int s = 0; s < subset; ++s) {
      std::uniform_int_distribution<int> pick(s, n - 1);
      std::swap(items[s], items[pick(rng)]);
    }
    sampler.draw(rng, x);
    const std::vector<int> context_items(items.begin(), items.begin() + task.context_size);
    const Ranking context = rank_by_utility(context_items, x);
    const int i = items[task.context_size], j = items[task.context_size + 1];
    const bool i_wins = x(i) > x(j);
    for (std::size_t m = 0; m < k; ++m) {
      const auto start = std::chrono::steady_clock::now();
      double p;
      if (methods[m].is_logit) {
        p = logit_pair_probability(methods[m].utilities, i, j);
      } else {
        try {
          p = conditional_pair_probability(methods[m].model, context, i, j, task.budget,
                                           derive_seed(derive_seed(seed, t), 1000 + m))
                  .probability;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::NoAcceptedSamples) throw;
          ++fallbacks[m];
          p = pairwise_probability(methods[m].model, i, j);
        }
      }
      scores[m][t] = p > 0.5 ? (i_wins ? 1.0 : 0.0) : p < 0.5 ? (i_wins ? 0.0 : 1.0) : 0.5;
      seconds[m] += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  }

  std::vector<ExperimentReport> out;
  for (std::size_t m = 0; m < k; ++m) {
    ExperimentReport r;
    r.method = methods[m].name;
    r.trials = task.trials;
    r.fallbacks = fallbacks[m];
    r.runtime_seconds = seconds[m];
    const auto& s = scores[m];
    r.mean = std::accumulate(s.begin(), s.end(), 0.0) / s.size();
    double var = 0.0;
    for (double v : s) var += (v - r.mean) * (v - r.mean);
    r.std_error = std::sqrt(var / std::max<std::size_t>(1, s.size() - 1) / s.size());
    Rng boot(derive_seed(seed, 0xb007 + m));
    std::uniform_int_distribution<int> pick(0, task.trials - 1);
    std::vector<double> means;
    for (int b = 0; b < task.bootstrap; ++b) {
      double acc = 0.0;
      for (int q = 0; q < task.trials; ++q) acc += s[pick(boot)];
      means.push_back(acc / task.trials);
    }
    if (means.empty()) means.push_back(r.mean);
    std::sort(means.begin(), means.end());
    r.q25 = quantile_sorted(means, 0.25);
    r.q50 = quantile_sorted(means, 0.50);
    r.q75 = quantile_sorted(means, 0.75);
    r.config["trials"] = std::to_string(task.trials);
    r.config["context_size"] = std::to_string(task.context_size);
    r.config["bootstrap"] = std::to_string(task.bootstrap);
    r.config["target_accepted"] = std::to_string(task.budget.target_accepted);
    r.config["max_proposals"] = std::to_string(task.budget.max_proposals);
    out.push_back(std::move(r));
  }
  return out;
}

SyntheticResult run_synthetic(const SyntheticRegime& regime, const SyntheticConfig& config) {
  SyntheticResult res;
  res.regime = regime;
  res.truth = generate_regime(regime);
  const int n = regime.n;
  const auto pair_data = sample_pairwise_data(res.truth, config.training_comparisons, derive_seed(config.seed, 1));
  const auto triple_data = sample_triple_data(res.truth, config.training_comparisons, derive_seed(config.seed, 2));

  res.methods.push_back(Method::probit("oracle", res.truth));
  res.methods.push_back(Method::probit("probit_best_of_three", fit_probit_triple_mle(n, triple_data, config.mle).model));
  if (config.include_moment_estimator) {
    try {
      std::vector<TripleFrequencies> freqs;
      for (const auto& c : triple_data) freqs.push_back(TripleFrequencies::from_counts(c));
      res.methods.push_back(Method::probit("probit_best_of_three_moment", estimate_from_frequencies(n, freqs).model));
    } catch (const Error& e) {
      res.skipped.push_back(std::string("probit_best_of_three_moment: ") + e.what());
    }
  }
  res.methods.push_back(Method::probit("probit_pairwise", fit_probit_pairwise_mle(pair_data, config.mle).model));
  const auto ranked = rankings_from_triple_counts(triple_data);
  res.methods.push_back(Method::logit("logit", fit_logit(n, ranked.rankings, ranked.weights).utilities));

  res.reports = run_accuracy(res.truth, res.methods, config.task, derive_seed(config.seed, 3));
  for (auto& r : res.reports) {
    r.regime = regime_label(regime);
    r.config["n"] = std::to_string(n);
    r.config["training_comparisons"] = std::to_string(config.training_comparisons);
    r.config["mle_steps"] = std::to_string(config.mle.steps);
    r.config["seed"] = std::to_string(config.seed);
  }
  return res;
}

std::vector<WelfareMenuReport> run_welfare(const ProbitModel& truth, const std::vector<Method>& methods,
                                           const std::vector<int>& sizes, std::uint64_t mc_samples,
                                           std::uint64_t seed) {
  const int n = truth.n();
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  std::vector<WelfareMenuReport> out;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    const Method& method = methods[m];
    for (int size : sizes) {
      if (size < 1 || size > n) fail(ErrorCode::InvalidArgument, "menu size out of range");
      WelfareMenuReport r;
      r.method = method.name;
      r.size = size;
      if (method.is_logit) {
        std::vector<int> order = all;
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return method.utilities(a) > method.utilities(b); });
        r.menu.assign(order.begin(), order.begin() + size);
        std::sort(r.menu.begin(), r.menu.end());
      } else {
        WelfareQuery q;
        q.menu_size = size;
        q.candidate_items = all;
        q.mc_samples = mc_samples;
        r.menu = expected_max_welfare(method.model, q, derive_seed(seed, 17 * m + size)).best.menu;
      }
      WelfareQuery eval;
      eval.menu_size = size;
      eval.candidate_items = r.menu;
      eval.mc_samples = mc_samples;
      const WelfareResult truth_value = expected_max_welfare(truth, eval, derive_seed(seed, 0x7e11));
      r.true_value = truth_value.best.value;
      r.true_std_error = truth_value.best.std_error;

      r.best_rank_histogram.assign(n, 0);
      GaussianSampler sampler(truth.mu, truth.sigma);
      Rng rng(derive_seed(seed, 0x4157));
      Eigen::VectorXd x(n);
      for (std::uint64_t d = 0; d < mc_samples; ++d) {
        sampler.draw(rng, x);
        const Ranking full = rank_by_utility(all, x);
        for (int pos = 0; pos < n; ++pos)
          if (std::binary_search(r.menu.begin(), r.menu.end(), full.order[pos])) {
            ++r.best_rank_histogram[pos];
            break;
          }
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

ProbitModel anticorrelated_welfare_model() {
  Eigen::Vector4d mu(1.0, 0.95, 0.7, 0.0);
  Eigen::Matrix4d corr;
  corr << 1.0, 0.95, -0.8, 0.0,
          0.95, 1.0, -0.8, 0.0,
          -0.8, -0.8, 1.0, 0.0,
          0.0, 0.0, 0.0, 1.0;
  return hyperplane_model(mu, corr);
}

}  // namespace corrprobit
