#include "corrprobit/witness.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "corrprobit/error.hpp"
#include "corrprobit/sampling.hpp"

namespace corrprobit {
namespace {

bool lower_block_positive_definite(const Eigen::MatrixXd& s) {
  const int m = static_cast<int>(s.rows()) - 1;
  const Eigen::MatrixXd block = s.bottomRightCorner(m, m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(block, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(0) > kRankTol * (1.0 + block.trace());
}

ProbitModel pinned(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma) {
  ProbitModel m;
  m.mu = mu;
  m.sigma = 0.5 * (sigma + sigma.transpose());
  m.normalized = false;
  return m;
}

// Returns false when the perturbed model is invalid at this scale.
using Builder = bool (*)(const ProbitModel&, std::pair<int, int>, double, const Eigen::VectorXd&, ProbitModel*);

bool build_equal_means(const ProbitModel& d, std::pair<int, int> items, double delta, const Eigen::VectorXd&,
                       ProbitModel* out) {
  Eigen::MatrixXd s = d.sigma;
  s(items.first, items.second) += delta;
  s(items.second, items.first) += delta;
  if (!lower_block_positive_definite(s)) return false;
  *out = pinned(d.mu, s);
  return true;
}

bool build_zero_mean(const ProbitModel& d, std::pair<int, int> items, double nu, const Eigen::VectorXd&,
                     ProbitModel* out) {
  const int n = d.n();
  const int i = items.first;
  Eigen::MatrixXd s = d.sigma;
  s(i, i) += nu;
  // Keeps every difference variance involving i unchanged except against item 0.
  for (int l = 1; l < n; ++l) {
    if (l == i) continue;
    s(i, l) += 0.5 * nu;
    s(l, i) += 0.5 * nu;
  }
  if (!lower_block_positive_definite(s)) return false;
  const double t = (n - 1 + nu) / (n - 1);
  *out = pinned(d.mu / std::sqrt(t), s / t);
  return true;
}

bool build_distinct_means(const ProbitModel& d, std::pair<int, int>, double nu, const Eigen::VectorXd& direction,
                          ProbitModel* out) {
  const int n = d.n();
  const int last = n - 1;
  Eigen::VectorXd mu = d.mu + nu * direction;
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
  double partial = 0.0;
  for (int i = 1; i < last; ++i) {
    const double ratio = mu(i) / d.mu(i);
    if (!(ratio > 0.0)) return false;
    s(i, i) = ratio * ratio * d.sigma(i, i);
    partial += s(i, i);
  }
  s(last, last) = (n - 1) - partial;
  if (!(s(last, last) > 0.0)) return false;
  mu(last) = std::sqrt(s(last, last) / d.sigma(last, last)) * d.mu(last);
  for (int i = 1; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double stretch = (mu(i) - mu(j)) / (d.mu(i) - d.mu(j));
      if (!(stretch > 0.0)) return false;
      const double var = d.sigma(i, i) + d.sigma(j, j) - 2.0 * d.sigma(i, j);
      s(i, j) = s(j, i) = 0.5 * (s(i, i) + s(j, j) - var * stretch * stretch);
    }
  if (!lower_block_positive_definite(s)) return false;
  *out = pinned(mu, s);
  return true;
}

Eigen::VectorXd interior_direction(int n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x7769746e));
  std::normal_distribution<double> gauss;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  while (u.norm() < 1e-6) {
    for (int i = 1; i < n - 1; ++i) u(i) = gauss(rng);
  }
  return u / u.norm();
}

double max_pairwise_gap(const ProbitModel& a, const ProbitModel& b) {
  double worst = 0.0;
  for (int i = 0; i < a.n(); ++i)
    for (int j = i + 1; j < a.n(); ++j)
      worst = std::max(worst, std::fabs(pairwise_probability(a, i, j) - pairwise_probability(b, i, j)));
  return worst;
}

}  // namespace

FamilyCase detect_family_case(const ProbitModel& d, double tie_tol, std::pair<int, int>* items) {
  const int n = d.n();
  const double tol = tie_tol * (1.0 + d.mu.cwiseAbs().maxCoeff());
  for (int i = 1; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::fabs(d.mu(i) - d.mu(j)) <= tol) {
        if (items) *items = {i, j};
        return FamilyCase::EqualMeans;
      }
  for (int i = 1; i < n; ++i)
    if (std::fabs(d.mu(i)) <= tol) {
      if (items) *items = {i, -1};
      return FamilyCase::ZeroMean;
    }
  if (items) *items = {-1, -1};
  return FamilyCase::DistinctMeans;
}

EquivalenceFamily pairwise_equivalent_family(const ProbitModel& base, const FamilyOptions& options) {
  if (base.n() < 3) fail(ErrorCode::InvalidArgument, "families need at least three items");
  if (options.count < 1) fail(ErrorCode::InvalidArgument, "family size must be positive");
  if (!(options.nu > 0.0)) fail(ErrorCode::InvalidArgument, "perturbation scale must be positive");
  check_normalized(base);
  const ProbitModel d = to_diffform(base);

  EquivalenceFamily fam;
  fam.base = base;
  fam.case_tag = detect_family_case(d, options.mean_tie_tol, &fam.case_items);
  Builder build = fam.case_tag == FamilyCase::EqualMeans ? build_equal_means
                  : fam.case_tag == FamilyCase::ZeroMean ? build_zero_mean
                                                         : build_distinct_means;
  const Eigen::VectorXd direction = interior_direction(base.n(), options.seed);

  for (double nu = options.nu; nu >= options.min_nu; nu *= 0.5) {
    std::vector<ProbitModel> members;
    std::vector<double> gaps;
    double deviation = 0.0;
    bool ok = true;
    for (int m = 1; m <= options.count && ok; ++m) {
      const double scale = nu * (0.5 + 0.5 * m / options.count);
      ProbitModel pinned_member;
      if (!build(d, fam.case_items, scale, direction, &pinned_member)) {
        ok = false;
        break;
      }
      ProbitModel member;
      try {
        member = from_diffform(pinned_member);
        check_normalized(member);
      } catch (const Error&) {
        ok = false;
        break;
      }
      const double dev = max_pairwise_gap(base, member);
      if (dev > options.pairwise_tol) {
        ok = false;
        break;
      }
      deviation = std::max(deviation, dev);
      gaps.push_back((member.sigma - base.sigma).cwiseAbs().maxCoeff());
      members.push_back(std::move(member));
    }
    if (!ok) continue;
    fam.members = std::move(members);
    fam.sigma_gaps = std::move(gaps);
    fam.max_pairwise_deviation = deviation;
    fam.perturbation_scale = nu;
    return fam;
  }
  fail(ErrorCode::ShrinkFailed, "no valid perturbation scale above the floor");
}

double kl_choice_triple(const ProbitModel& p, const ProbitModel& q, const Triple& t, const ProbabilityOptions& options) {
  const auto a = triple_rank_probabilities(p, t[0], t[1], t[2], options).probs;
  const auto b = triple_rank_probabilities(q, t[0], t[1], t[2], options).probs;
  double kl = 0.0;
  for (int o = 0; o < 6; ++o) {
    if (a[o] <= 0.0) continue;
    if (b[o] <= 0.0) fail(ErrorCode::SupportMismatch, "second model assigns zero mass to an observed ordering");
    kl += a[o] * std::log(a[o] / b[o]);
  }
  return std::max(kl, 0.0);
}

double total_variation_triple(const ProbitModel& p, const ProbitModel& q, const Triple& t,
                              const ProbabilityOptions& options) {
  const auto a = triple_rank_probabilities(p, t[0], t[1], t[2], options).probs;
  const auto b = triple_rank_probabilities(q, t[0], t[1], t[2], options).probs;
  double tv = 0.0;
  for (int o = 0; o < 6; ++o) tv += std::fabs(a[o] - b[o]);
  return 0.5 * tv;
}

TripleSeparation max_triple_separation(const ProbitModel& p, const ProbitModel& q, const ProbabilityOptions& options) {
  TripleSeparation best;
  const int n = p.n();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = j + 1; k < n; ++k) {
        const double tv = total_variation_triple(p, q, {i, j, k}, options);
        if (tv > best.total_variation) best = {{i, j, k}, tv};
      }
  return best;
}

ProbitModel LowerBoundPair::model1() const {
  ProbitModel m;
  m.mu = Eigen::VectorXd::Zero(n);
  m.sigma = sigma1;
  m.normalized = true;
  return m;
}

ProbitModel LowerBoundPair::model2() const {
  ProbitModel m;
  m.mu = Eigen::VectorXd::Zero(n);
  m.sigma = sigma2;
  m.normalized = true;
  return m;
}

LowerBoundPair lowerbound_pair(int n, double epsilon, int i_star, int j_star, const ProbabilityOptions& options) {
  if (n < 3) fail(ErrorCode::InvalidArgument, "lower-bound pair needs at least three items");
  if (!(epsilon > 0.0 && epsilon <= 1.0 / 16.0)) fail(ErrorCode::EpsilonOutOfRange, "epsilon must lie in (0, 1/16]");
  if (i_star == j_star || i_star < 0 || j_star < 0 || i_star >= n || j_star >= n)
    fail(ErrorCode::InvalidArgument, "distinct in-range items required");
  LowerBoundPair out;
  out.n = n;
  out.epsilon = epsilon;
  out.i_star = i_star;
  out.j_star = j_star;
  const Eigen::MatrixXd centre = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
  out.sigma1 = (static_cast<double>(n) / (n - 1)) * centre;
  Eigen::MatrixXd bump = Eigen::MatrixXd::Identity(n, n);
  bump(i_star, j_star) += epsilon;
  bump(j_star, i_star) += epsilon;
  out.sigma2 = (n / ((n - 1) - 2.0 * epsilon / n)) * (centre * bump * centre);
  out.sigma2 = 0.5 * (out.sigma2 + out.sigma2.transpose());
  out.linf_gap = (out.sigma1 - out.sigma2).cwiseAbs().maxCoeff();
  const ProbitModel m1 = out.model1(), m2 = out.model2();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = j + 1; k < n; ++k) out.kl_per_triple[{i, j, k}] = kl_choice_triple(m1, m2, {i, j, k}, options);
  return out;
}

}  // namespace corrprobit
