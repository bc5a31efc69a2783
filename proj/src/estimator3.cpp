#include "corrprobit/estimator3.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "corrprobit/error.hpp"
#include "corrprobit/normal.hpp"

namespace corrprobit {
namespace {

constexpr int kDiffPositions[3][2] = {{0, 1}, {1, 2}, {0, 2}};

double objective(double d1, double d2, double theta, const std::array<double, 4>& freqs,
                 const ProbabilityOptions& options) {
  double worst = 0.0;
  for (int k = 0; k < 4; ++k)
    worst = std::max(worst, std::fabs(angle_model_probability(d1, d2, theta, k, options) - freqs[k]));
  return worst;
}

}  // namespace

std::uint64_t TripleCounts::total() const {
  std::uint64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

TripleFrequencies TripleFrequencies::from_counts(const TripleCounts& counts) {
  const std::uint64_t total = counts.total();
  if (total == 0) fail(ErrorCode::InsufficientSamples, "triple has no observations");
  TripleFrequencies f;
  f.triple = counts.triple;
  f.total = static_cast<double>(total);
  for (int o = 0; o < 6; ++o) f.freq[o] = static_cast<double>(counts.counts[o]) / f.total;
  return f;
}

TripleFrequencies TripleFrequencies::from_distribution(const RankDistribution3& dist) {
  TripleFrequencies f;
  f.triple = dist.triple;
  double sum = 0.0;
  for (double p : dist.probs) sum += p;
  for (int o = 0; o < 6; ++o) f.freq[o] = dist.probs[o] / sum;
  return f;
}

TripleCounts counts_from_rankings(const std::vector<Ranking>& rankings) {
  if (rankings.empty()) fail(ErrorCode::InvalidArgument, "no rankings to count");
  TripleCounts out;
  const auto& first = rankings.front().order;
  if (first.size() != 3) fail(ErrorCode::MixedTriples, "rankings must order exactly three items");
  out.triple = {first[0], first[1], first[2]};
  std::sort(out.triple.begin(), out.triple.end());
  for (const auto& r : rankings) {
    if (r.order.size() != 3) fail(ErrorCode::MixedTriples, "rankings must order exactly three items");
    int pos[3];
    for (int k = 0; k < 3; ++k) {
      const auto it = std::find(out.triple.begin(), out.triple.end(), r.order[k]);
      if (it == out.triple.end()) fail(ErrorCode::MixedTriples, "rankings cover different triples");
      pos[k] = static_cast<int>(it - out.triple.begin());
    }
    if (pos[0] == pos[1] || pos[1] == pos[2] || pos[0] == pos[2])
      fail(ErrorCode::MixedTriples, "ranking repeats an item");
    ++out.counts[ordering_index(pos[0], pos[1], pos[2])];
  }
  return out;
}

Eigen::Vector3d difference_vector(int d) {
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  c(kDiffPositions[d][0]) = 1.0;
  c(kDiffPositions[d][1]) = -1.0;
  return c;
}

bool ordering_satisfies(int ordering, int sign, int d) {
  const bool ahead = position_rank(ordering, kDiffPositions[d][0]) < position_rank(ordering, kDiffPositions[d][1]);
  return sign > 0 ? ahead : !ahead;
}

double halfspace_frequency(const TripleFrequencies& f, int sign, int d) {
  double s = 0.0;
  for (int o = 0; o < 6; ++o)
    if (ordering_satisfies(o, sign, d)) s += f.freq[o];
  return s;
}

double cone_frequency(const TripleFrequencies& f, int sign1, int d1, int sign2, int d2) {
  if (d1 == d2) fail(ErrorCode::InvalidArgument, "cone needs two distinct difference directions");
  double s = 0.0;
  for (int o = 0; o < 6; ++o)
    if (ordering_satisfies(o, sign1, d1) && ordering_satisfies(o, sign2, d2)) s += f.freq[o];
  return s;
}

AlphaEstimate estimate_alphas(const TripleFrequencies& f) {
  AlphaEstimate a;
  a.floor = std::isfinite(f.total) ? 0.5 / f.total : 1e-300;
  for (int d = 0; d < 3; ++d) {
    const double raw = halfspace_frequency(f, +1, d);
    const double clamped = std::clamp(raw, a.floor, 1.0 - a.floor);
    a.clamped[d] = clamped != raw;
    a.alpha[d] = normal_quantile(clamped);
  }
  return a;
}

double angle_model_probability(double d1, double d2, double theta, int sign_pair, const ProbabilityOptions& options) {
  const double s = std::sin(theta), c = std::cos(theta);
  const Eigen::Vector2d mean((d1 * c + d2) / s, d1);
  const double sign1 = sign_pair < 2 ? 1.0 : -1.0;
  const double sign2 = sign_pair % 2 == 0 ? 1.0 : -1.0;
  return gaussian_cone_mass(mean, Eigen::Vector2d(0.0, sign1), Eigen::Vector2d(sign2 * s, -sign2 * c), options);
}

double residual_cap_for(double total) {
  if (!std::isfinite(total)) return 1e-6;
  return 10.0 * std::sqrt(std::log(6.0 * total) / total);
}

AngleEstimate estimate_angle(double d1, double d2, const std::array<double, 4>& cone_freqs, double residual_cap,
                             const AngleSearchOptions& options) {
  if (!(d2 >= 0.0 && d1 >= d2)) fail(ErrorCode::InvalidArgument, "angle search needs d1 >= d2 >= 0");
  const int g = std::max(options.grid_points, 3);
  const double lo_dom = options.theta_min, hi_dom = kPi - options.theta_min;
  const auto& popt = options.probability;

  int best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<double> grid(g);
  for (int k = 0; k < g; ++k) {
    grid[k] = lo_dom + (hi_dom - lo_dom) * k / (g - 1);
    const double v = objective(d1, d2, grid[k], cone_freqs, popt);
    if (v < best_val) {
      best_val = v;
      best = k;
    }
  }
  double a = grid[std::max(best - 1, 0)], b = grid[std::min(best + 1, g - 1)];
  const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
  double f1 = objective(d1, d2, x1, cone_freqs, popt), f2 = objective(d1, d2, x2, cone_freqs, popt);
  while (b - a > options.theta_tol) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = objective(d1, d2, x1, cone_freqs, popt);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = objective(d1, d2, x2, cone_freqs, popt);
    }
  }
  AngleEstimate out;
  out.theta = 0.5 * (a + b);
  out.residual = objective(d1, d2, out.theta, cone_freqs, popt);
  if (best_val < out.residual) {
    out.theta = grid[best];
    out.residual = best_val;
  }
  out.beta = -std::cos(out.theta);
  if (out.residual > residual_cap) {
    std::ostringstream msg;
    msg << "angle residual " << out.residual << " exceeds cap " << residual_cap;
    fail(ErrorCode::NoFeasibleAngle, msg.str());
  }
  return out;
}

ThreeItemEstimate reconstruct_three(const std::array<double, 3>& alphas, double beta_ab_bc, double beta_ab_ac) {
  ThreeItemEstimate est;
  const double cap = 1.0 - kAngleFloor;
  const double b12 = std::clamp(beta_ab_bc, -cap, cap);
  const double b13 = std::clamp(beta_ab_ac, -cap, cap);
  est.beta_clamped = b12 != beta_ab_bc || b13 != beta_ab_ac;
  const double r12 = std::sqrt(1.0 - b12 * b12), r13 = std::sqrt(1.0 - b13 * b13);

  // t * c~_ac - s * c~_bc = c~_ab = (1, 0).
  const double det = b13 * r12 - b12 * r13;
  if (std::fabs(det) < 1e-12) fail(ErrorCode::SingularSystem, "difference directions are collinear");
  const double t = r12 / det, s = r13 / det;
  if (!(t > 0.0) || !(s > 0.0)) fail(ErrorCode::NegativeScale, "reconstructed scales are not positive");

  const bool use_bc = s >= t;
  const int second = use_bc ? kDiffBC : kDiffAC;
  const double beta = use_bc ? b12 : b13, root = use_bc ? r12 : r13, scale = use_bc ? s : t;
  Eigen::Matrix<double, 2, 3> c;
  c.row(0) = difference_vector(kDiffAB).transpose();
  c.row(1) = difference_vector(second).transpose();
  Eigen::Matrix2d b;
  b << 1.0, beta, 0.0, root;
  const Eigen::Matrix2d a = b * Eigen::Vector2d(1.0, scale).asDiagonal() * (c * c.transpose()).inverse();
  const Eigen::Matrix<double, 2, 3> half = a * c;
  const Eigen::Vector2d q(alphas[0], alphas[second]);
  const Eigen::Vector2d whitened_mean = b.transpose().inverse() * q;

  est.sigma_hat = half.transpose() * half;
  est.sigma_hat = 0.5 * (est.sigma_hat + est.sigma_hat.transpose());
  est.mu_hat = half.transpose() * whitened_mean;
  est.alphas = alphas;
  est.case_tag = use_bc ? BasisCase::AbBc : BasisCase::AbAc;
  est.scale_s = s;
  est.scale_t = t;
  est.trace = est.sigma_hat.trace();
  const Eigen::Vector3d cb = difference_vector(kDiffBC), cc = difference_vector(kDiffAC);
  est.betas = {b12, b13,
               cb.dot(est.sigma_hat * cc) / std::sqrt(cb.dot(est.sigma_hat * cb) * cc.dot(est.sigma_hat * cc))};
  return est;
}

TripleEstimateResult estimate_triple(const TripleFrequencies& f, const EstimatorOptions& options) {
  if (std::isfinite(f.total) && f.total < options.min_samples)
    fail(ErrorCode::InsufficientSamples, "triple has fewer observations than the minimum");
  TripleEstimateResult out;
  out.observability.gamma_hat = *std::min_element(f.freq.begin(), f.freq.end());
  out.observability.below_warning = out.observability.gamma_hat < options.gamma_floor_warn;

  const AlphaEstimate alphas = estimate_alphas(f);
  const double cap = residual_cap_for(f.total);
  double betas[2];
  double residuals[2];
  const int partners[2] = {kDiffBC, kDiffAC};
  for (int k = 0; k < 2; ++k) {
    int dp = kDiffAB, dq = partners[k];
    int sp = alphas.alpha[dp] >= 0.0 ? 1 : -1;
    int sq = alphas.alpha[dq] >= 0.0 ? 1 : -1;
    const int orig_sign = sp * sq;
    double d1 = sp * alphas.alpha[dp], d2 = sq * alphas.alpha[dq];
    if (d2 > d1) {
      std::swap(dp, dq);
      std::swap(sp, sq);
      std::swap(d1, d2);
    }
    std::array<double, 4> freqs;
    for (int pair = 0; pair < 4; ++pair) {
      const int s1 = pair < 2 ? sp : -sp;
      const int s2 = pair % 2 == 0 ? sq : -sq;
      freqs[pair] = cone_frequency(f, s1, dp, s2, dq);
    }
    const AngleEstimate angle = estimate_angle(d1, d2, freqs, cap, options.angle);
    betas[k] = orig_sign * angle.beta;
    residuals[k] = angle.residual;
  }
  out.estimate = reconstruct_three(alphas.alpha, betas[0], betas[1]);
  out.estimate.triple = f.triple;
  out.estimate.angle_residuals = {residuals[0], residuals[1]};
  out.estimate.alpha_clamped = alphas.clamped;
  out.estimate.total = f.total;
  return out;
}

TripleEstimateResult estimate_triple(const TripleCounts& counts, const EstimatorOptions& options) {
  return estimate_triple(TripleFrequencies::from_counts(counts), options);
}

ProbitModel estimate_as_model(const ThreeItemEstimate& estimate) {
  return normalize(make_model(estimate.mu_hat, estimate.sigma_hat)).model;
}

}  // namespace corrprobit
