#include "corrprobit/ranking.hpp"

#include <algorithm>
#include <cmath>

#include "corrprobit/error.hpp"
#include "corrprobit/normal.hpp"

namespace corrprobit {
namespace {

constexpr std::array<std::string_view, 6> kCodes = {"abc", "acb", "bac", "bca", "cab", "cba"};

// phi(z) + z Phi(z), the radial integral kernel.
double radial_kernel(double z) {
  const double v = normal_pdf(z) + z * normal_cdf(z);
  return v > 0.0 ? v : 0.0;
}

struct Whitened {
  Eigen::Vector2d mean;
  Eigen::Matrix2d factor_t;  // L^T, maps plane normals to whitened normals
};

Whitened whiten_plane(const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov) {
  const Eigen::Matrix2d s2 = 0.5 * (cov + cov.transpose());
  Eigen::LLT<Eigen::Matrix2d> llt(s2);
  const double scale = std::max(s2.trace(), 1e-300);
  if (llt.info() != Eigen::Success || s2.determinant() <= kRankTol * kRankTol * scale * scale)
    fail(ErrorCode::DegenerateCovariance, "projected triple covariance is singular");
  Eigen::Matrix2d l = llt.matrixL();
  Whitened w;
  w.mean = l.triangularView<Eigen::Lower>().solve(mean);
  w.factor_t = l.transpose();
  return w;
}

Whitened whiten_triple(const ProbitModel& model, int i, int j, int k) {
  const int n = model.n();
  if (i == j || j == k || i == k || std::min({i, j, k}) < 0 || std::max({i, j, k}) >= n)
    fail(ErrorCode::InvalidArgument, "triple items must be distinct and in range");
  const auto& p = triangle_projection();
  Eigen::Vector3d m(model.mu(i), model.mu(j), model.mu(k));
  const int idx[3] = {i, j, k};
  Eigen::Matrix3d s;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) s(a, b) = model.sigma(idx[a], idx[b]);
  return whiten_plane(p * m, p * s * p.transpose());
}

std::array<double, 6> whitened_rank_probabilities(const Whitened& w, const ProbabilityOptions& options) {
  const auto& p = triangle_projection();
  const Eigen::Matrix3d id = Eigen::Matrix3d::Identity();
  std::array<double, 6> probs{};
  for (int o = 0; o < 6; ++o) {
    const auto& ord = kOrderings[o];
    const Eigen::Vector2d w1 = w.factor_t * (p * (id.col(ord[0]) - id.col(ord[1])));
    const Eigen::Vector2d w2 = w.factor_t * (p * (id.col(ord[1]) - id.col(ord[2])));
    probs[o] = gaussian_cone_mass(w.mean, w1, w2, options);
  }
  return probs;
}

}  // namespace

std::string_view ordering_code(int ordering) {
  if (ordering < 0 || ordering >= 6) fail(ErrorCode::InvalidArgument, "ordering index out of range");
  return kCodes[ordering];
}

int ordering_from_code(std::string_view code) {
  for (int o = 0; o < 6; ++o)
    if (kCodes[o] == code) return o;
  return -1;
}

int ordering_index(int first, int second, int third) {
  for (int o = 0; o < 6; ++o)
    if (kOrderings[o][0] == first && kOrderings[o][1] == second && kOrderings[o][2] == third) return o;
  fail(ErrorCode::InvalidArgument, "positions do not form an ordering");
}

int position_rank(int ordering, int position) {
  for (int r = 0; r < 3; ++r)
    if (kOrderings[ordering][r] == position) return r;
  fail(ErrorCode::InvalidArgument, "position out of range");
}

const Eigen::Matrix<double, 2, 3>& triangle_projection() {
  static const Eigen::Matrix<double, 2, 3> p = [] {
    Eigen::Matrix<double, 2, 3> m;
    const double a = 1.0 / std::sqrt(6.0), b = 1.0 / std::sqrt(2.0);
    m << a, a, -2.0 * a, b, -b, 0.0;
    return m;
  }();
  return p;
}

double gaussian_cone_mass(const Eigen::Vector2d& mean, const Eigen::Vector2d& n1, const Eigen::Vector2d& n2,
                          const ProbabilityOptions& options) {
  const double psi1 = std::atan2(n1.y(), n1.x());
  const double delta = std::remainder(std::atan2(n2.y(), n2.x()) - psi1, 2.0 * kPi);
  const double psi2 = psi1 + delta;
  if (std::fabs(delta) >= kPi - 1e-14) return 0.0;
  double lo, hi;
  if (delta >= 0.0) {
    lo = psi2 - 0.5 * kPi;
    hi = psi1 + 0.5 * kPi;
  } else {
    lo = psi1 - 0.5 * kPi;
    hi = psi2 + 0.5 * kPi;
  }
  if (!(hi > lo)) return 0.0;

  const double mx = mean.x(), my = mean.y();
  auto integrand = [mx, my](double phi) {
    const double c = std::cos(phi), s = std::sin(phi);
    const double along = c * mx + s * my;
    const double across = -s * mx + c * my;
    return normal_pdf(across) * radial_kernel(along);
  };

  std::vector<double> cuts{lo, hi};
  const double norm = mean.norm();
  if (norm > 0.0) {
    const double dir = std::atan2(my, mx);
    const double shifted = lo + std::fmod(std::fmod(dir - lo, 2.0 * kPi) + 2.0 * kPi, 2.0 * kPi);
    if (shifted > lo && shifted < hi) cuts.push_back(shifted);
  }
  const int pieces = std::max(1, static_cast<int>(std::ceil((hi - lo) / (kPi / 6.0))));
  for (int p = 1; p < pieces; ++p) cuts.push_back(lo + (hi - lo) * p / pieces);
  std::sort(cuts.begin(), cuts.end());

  if (options.grid_resolution > 0) {
    const auto& rule = gauss_legendre(options.grid_resolution);
    double total = 0.0;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double half = 0.5 * (cuts[c + 1] - cuts[c]);
      const double mid = 0.5 * (cuts[c + 1] + cuts[c]);
      double part = 0.0;
      for (std::size_t q = 0; q < rule.nodes.size(); ++q) part += rule.weights[q] * integrand(mid + half * rule.nodes[q]);
      total += part * half;
    }
    return total;
  }
  const QuadratureResult r = integrate_adaptive(integrand, cuts, options.quadrature);
  if (!r.converged) fail(ErrorCode::IntegrationFailure, "cone integration did not reach tolerance");
  return r.value;
}

double cone_probability_zero_mean(const Eigen::Vector2d& u1, const Eigen::Vector2d& u2) {
  if (std::fabs(u1.norm() - 1.0) > 1e-9 || std::fabs(u2.norm() - 1.0) > 1e-9)
    fail(ErrorCode::InvalidArgument, "cone directions must be unit vectors");
  const double dot = u1.dot(u2);
  if (std::fabs(dot) >= 1.0 - 1e-9) fail(ErrorCode::ParallelVectors, "cone directions are parallel");
  return 0.5 - std::acos(dot) / (2.0 * kPi);
}

RankDistribution3 triple_rank_probabilities(const ProbitModel& model, int i, int j, int k,
                                            const ProbabilityOptions& options) {
  RankDistribution3 out;
  out.triple = {i, j, k};
  out.probs = whitened_rank_probabilities(whiten_triple(model, i, j, k), options);
  return out;
}

std::array<double, 6> plane_rank_probabilities(const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov,
                                               const ProbabilityOptions& options) {
  return whitened_rank_probabilities(whiten_plane(mean, cov), options);
}

double top_choice_probability(const ProbitModel& model, int winner, int other1, int other2,
                              const ProbabilityOptions& options) {
  const Whitened w = whiten_triple(model, winner, other1, other2);
  const auto& p = triangle_projection();
  const Eigen::Matrix3d id = Eigen::Matrix3d::Identity();
  const Eigen::Vector2d w1 = w.factor_t * (p * (id.col(0) - id.col(1)));
  const Eigen::Vector2d w2 = w.factor_t * (p * (id.col(0) - id.col(2)));
  return gaussian_cone_mass(w.mean, w1, w2, options);
}

double observability(const ProbitModel& model, const ProbabilityOptions& options) {
  const int n = model.n();
  double gamma = 1.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = j + 1; k < n; ++k) {
        const auto d = triple_rank_probabilities(model, i, j, k, options);
        gamma = std::min(gamma, *std::min_element(d.probs.begin(), d.probs.end()));
      }
  return gamma;
}

}  // namespace corrprobit
