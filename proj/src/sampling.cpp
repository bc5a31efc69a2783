#include "corrprobit/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "corrprobit/error.hpp"

namespace corrprobit {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

GaussianSampler::GaussianSampler(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma)
    : mu_(mu), factor_(covariance_factor(sigma)), z_(mu.size()) {}

void GaussianSampler::draw(Rng& rng, Eigen::VectorXd& out) {
  for (Eigen::Index i = 0; i < z_.size(); ++i) z_(i) = normal_(rng);
  out.noalias() = factor_ * z_;
  out += mu_;
}

namespace {

// Lower-triangular L with L L^T = sigma for PSD input; dependent coordinates get zero pivots.
Eigen::MatrixXd semidefinite_cholesky(const Eigen::MatrixXd& sigma) {
  const int n = static_cast<int>(sigma.rows());
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  const double tol = 1e-12 * std::max(sigma.trace(), 1e-300);
  for (int j = 0; j < n; ++j) {
    const double d = sigma(j, j) - l.row(j).head(j).squaredNorm();
    if (d <= tol) continue;
    l(j, j) = std::sqrt(d);
    for (int r = j + 1; r < n; ++r) l(r, j) = (sigma(r, j) - l.row(r).head(j).dot(l.row(j).head(j))) / l(j, j);
  }
  return l;
}

}  // namespace

Ranking rank_by_utility(const std::vector<int>& items, const Eigen::VectorXd& utilities) {
  Ranking r;
  r.order = items;
  std::vector<int> pos(items.size());
  std::iota(pos.begin(), pos.end(), 0);
  std::sort(pos.begin(), pos.end(), [&](int a, int b) {
    if (utilities(items[a]) != utilities(items[b])) return utilities(items[a]) > utilities(items[b]);
    return items[a] < items[b];
  });
  for (std::size_t k = 0; k < pos.size(); ++k) r.order[k] = items[pos[k]];
  return r;
}

std::vector<Ranking> sample_rankings(const ProbitModel& model, const std::vector<std::vector<int>>& subsets,
                                     std::uint64_t seed) {
  check_normalized(model);
  for (const auto& s : subsets) {
    if (s.size() < 2) fail(ErrorCode::EmptySubset, "ranking subsets need at least two items");
    for (int item : s)
      if (item < 0 || item >= model.n()) fail(ErrorCode::InvalidArgument, "subset item out of range");
  }
  GaussianSampler sampler(model.mu, model.sigma);
  Rng rng(seed);
  Eigen::VectorXd x(model.n());
  std::vector<Ranking> out;
  out.reserve(subsets.size());
  for (const auto& s : subsets) {
    sampler.draw(rng, x);
    out.push_back(rank_by_utility(s, x));
  }
  return out;
}

std::array<std::uint64_t, 6> sample_triple_counts(const ProbitModel& model, const Triple& triple, std::uint64_t draws,
                                                  std::uint64_t seed) {
  const ProbitModel sub = restrict_items(model, {triple[0], triple[1], triple[2]});
  GaussianSampler sampler(sub.mu, sub.sigma);
  Rng rng(seed);
  Eigen::VectorXd x(3);
  std::array<std::uint64_t, 6> counts{};
  for (std::uint64_t d = 0; d < draws; ++d) {
    sampler.draw(rng, x);
    // Ties resolve toward the earlier triple position.
    const bool ab = x(0) >= x(1), bc = x(1) >= x(2), ac = x(0) >= x(2);
    int o;
    if (ab) {
      o = bc ? 0 : (ac ? 1 : 4);
    } else {
      o = ac ? 2 : (bc ? 3 : 5);
    }
    ++counts[o];
  }
  return counts;
}

ConditionalEstimate conditional_pair_probability(const ProbitModel& model, const Ranking& context, int i, int j,
                                                 const RejectionBudget& budget, std::uint64_t seed) {
  const int n = model.n();
  if (i == j || i < 0 || j < 0 || i >= n || j >= n) fail(ErrorCode::InvalidArgument, "invalid target pair");
  if (budget.max_proposals < 1) fail(ErrorCode::InvalidArgument, "rejection budget must be positive");
  for (int c : context.order) {
    if (c == i || c == j) fail(ErrorCode::InvalidArgument, "target items overlap the context");
    if (c < 0 || c >= n) fail(ErrorCode::InvalidArgument, "context item out of range");
  }
  std::vector<int> items = context.order;
  items.push_back(i);
  items.push_back(j);
  const ProbitModel sub = restrict_items(model, items);
  const Eigen::MatrixXd factor = semidefinite_cholesky(sub.sigma);
  Rng rng(seed);
  std::normal_distribution<double> normal;
  const int m = static_cast<int>(context.order.size());
  const int dim = sub.n();
  // Packed lower triangle, row by row.
  std::vector<double> tri;
  tri.reserve(dim * (dim + 1) / 2);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c <= r; ++c) tri.push_back(factor(r, c));
  std::vector<double> z(dim), x(dim);
  ConditionalEstimate est;
  // Coordinates are drawn in context order so a violated comparison rejects early.
  while (est.proposals < budget.max_proposals) {
    ++est.proposals;
    bool ok = true;
    const double* row = tri.data();
    for (int c = 0; c < dim && ok; ++c) {
      z[c] = normal(rng);
      double v = sub.mu(c);
      for (int k = 0; k <= c; ++k) v += row[k] * z[k];
      row += c + 1;
      x[c] = v;
      if (c >= 1 && c < m) ok = x[c - 1] >= v;
    }
    if (!ok) continue;
    ++est.accepted;
    if (x[m] > x[m + 1]) ++est.favourable;
    if (budget.target_accepted > 0 && est.accepted >= budget.target_accepted) break;
  }
  if (est.accepted == 0) fail(ErrorCode::NoAcceptedSamples, "no draw matched the context ordering");
  est.probability = static_cast<double>(est.favourable) / static_cast<double>(est.accepted);
  return est;
}

namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int a = 1; a <= k; ++a) r = r * (n - k + a) / a;
  return r;
}

}  // namespace

WelfareResult expected_max_welfare(const ProbitModel& model, const WelfareQuery& query, std::uint64_t seed) {
  std::vector<int> cand = query.candidate_items;
  std::sort(cand.begin(), cand.end());
  if (std::adjacent_find(cand.begin(), cand.end()) != cand.end())
    fail(ErrorCode::InvalidArgument, "duplicate candidate items");
  const int c = static_cast<int>(cand.size());
  if (query.menu_size < 1 || query.menu_size > c) fail(ErrorCode::InvalidArgument, "menu size must be in [1, |candidates|]");
  if (query.mc_samples < 2) fail(ErrorCode::InvalidArgument, "welfare needs at least two draws");
  for (int item : cand)
    if (item < 0 || item >= model.n()) fail(ErrorCode::InvalidArgument, "candidate item out of range");
  if (binomial(c, query.menu_size) > static_cast<double>(query.enumeration_cap))
    fail(ErrorCode::EnumerationTooLarge, "too many menus to enumerate");

  std::vector<std::vector<int>> menus;
  std::vector<int> pick(query.menu_size);
  std::iota(pick.begin(), pick.end(), 0);
  while (true) {
    std::vector<int> menu(query.menu_size);
    for (int a = 0; a < query.menu_size; ++a) menu[a] = cand[pick[a]];
    menus.push_back(std::move(menu));
    int a = query.menu_size - 1;
    while (a >= 0 && pick[a] == c - query.menu_size + a) --a;
    if (a < 0) break;
    ++pick[a];
    for (int b = a + 1; b < query.menu_size; ++b) pick[b] = pick[b - 1] + 1;
  }

  const std::size_t m = menus.size();
  std::vector<double> sum(m, 0.0), sumsq(m, 0.0);
  GaussianSampler sampler(model.mu, model.sigma);
  Rng rng(seed);
  Eigen::VectorXd x(model.n());
  std::vector<double> values(m);
  for (std::uint64_t d = 0; d < query.mc_samples; ++d) {
    sampler.draw(rng, x);
    for (std::size_t k = 0; k < m; ++k) {
      double best = -std::numeric_limits<double>::infinity();
      for (int item : menus[k]) best = std::max(best, x(item));
      sum[k] += best;
      sumsq[k] += best * best;
    }
  }
  const double draws = static_cast<double>(query.mc_samples);
  WelfareResult result;
  result.table.resize(m);
  std::size_t best_idx = 0, runner = m;
  for (std::size_t k = 0; k < m; ++k) {
    const double mean = sum[k] / draws;
    const double var = std::max(0.0, (sumsq[k] / draws - mean * mean) * draws / (draws - 1.0));
    result.table[k] = {menus[k], mean, std::sqrt(var / draws)};
    if (mean > result.table[best_idx].value) best_idx = k;
  }
  for (std::size_t k = 0; k < m; ++k)
    if (k != best_idx && (runner == m || result.table[k].value > result.table[runner].value)) runner = k;
  result.best = result.table[best_idx];
  if (runner < m) {
    // Replay the same stream for a paired difference.
    Rng replay(seed);
    GaussianSampler again(model.mu, model.sigma);
    double s = 0.0, s2 = 0.0;
    for (std::uint64_t d = 0; d < query.mc_samples; ++d) {
      again.draw(replay, x);
      double a = -std::numeric_limits<double>::infinity(), b = a;
      for (int item : menus[best_idx]) a = std::max(a, x(item));
      for (int item : menus[runner]) b = std::max(b, x(item));
      s += a - b;
      s2 += (a - b) * (a - b);
    }
    const double mean = s / draws;
    result.gap_to_runner_up = mean;
    result.gap_std_error = std::sqrt(std::max(0.0, (s2 / draws - mean * mean) / (draws - 1.0)));
  }
  return result;
}

}  // namespace corrprobit
