#include "corrprobit/model.hpp"

#include <cmath>
#include <sstream>

#include "corrprobit/error.hpp"
#include "corrprobit/normal.hpp"

namespace corrprobit {
namespace {

Eigen::MatrixXd centering(int n) {
  return Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
}

Eigen::MatrixXd pin_first(int n) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  m.col(0).array() -= 1.0;
  return m;
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) { return 0.5 * (a + a.transpose()); }

}  // namespace

ProbitModel make_model(Eigen::VectorXd mu, Eigen::MatrixXd sigma) {
  const auto n = mu.size();
  if (n < 2) fail(ErrorCode::InvalidArgument, "model needs at least 2 items");
  if (sigma.rows() != n || sigma.cols() != n) fail(ErrorCode::InvalidArgument, "sigma shape does not match mu");
  if (!mu.allFinite() || !sigma.allFinite()) fail(ErrorCode::InvalidArgument, "non-finite model entries");
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  const double asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol * scale) {
    std::ostringstream msg;
    msg << "sigma asymmetry " << asym << " exceeds tolerance";
    fail(ErrorCode::AsymmetricInput, msg.str());
  }
  ProbitModel m;
  m.mu = std::move(mu);
  m.sigma = symmetrize(sigma);
  return m;
}

NormalizeResult normalize(const ProbitModel& input) {
  const ProbitModel model = make_model(input.mu, input.sigma);
  const int n = model.n();
  const Eigen::MatrixXd m = centering(n);
  Eigen::MatrixXd projected = symmetrize(m * model.sigma * m);
  const double trace = projected.trace();
  if (!(trace > kRankTol)) fail(ErrorCode::DegenerateCovariance, "projected covariance has no trace");
  const double t = trace / n;

  NormalizeResult out;
  out.report.scale = t;
  out.report.mean_shift = model.mu.mean();
  out.model.mu = m * model.mu / std::sqrt(t);
  out.model.sigma = projected / t;
  // Remove round-off drift so the hyperplane constraints hold tightly.
  out.model.mu.array() -= out.model.mu.mean();
  out.model.sigma = symmetrize(m * out.model.sigma * m);
  out.model.sigma *= n / out.model.sigma.trace();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out.model.sigma, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  if (ev(0) < -1e-9 * n) fail(ErrorCode::NotPositiveSemidefinite, "covariance has a negative eigenvalue");
  if (ev(1) <= kRankTol * n) fail(ErrorCode::DegenerateCovariance, "projected covariance rank below n-1");
  out.report.min_nonzero_eigenvalue = ev(1);
  out.model.normalized = true;
  return out;
}

void check_normalized(const ProbitModel& model, double tol) {
  const int n = model.n();
  std::ostringstream msg;
  if (std::fabs(model.mu.sum()) > tol) msg << "mean does not sum to zero; ";
  if ((model.sigma * Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff() > tol) msg << "sigma rows do not sum to zero; ";
  if (std::fabs(model.sigma.trace() - n) > tol) msg << "trace differs from n; ";
  if ((model.sigma - model.sigma.transpose()).cwiseAbs().maxCoeff() > tol) msg << "sigma asymmetric; ";
  if (msg.str().empty()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetrize(model.sigma), Eigen::EigenvaluesOnly);
    if (eig.eigenvalues()(0) < -tol) msg << "sigma not PSD; ";
    if (eig.eigenvalues()(1) <= kRankTol * n) msg << "sigma rank below n-1; ";
  }
  if (!msg.str().empty()) fail(ErrorCode::NormalizationViolated, msg.str());
}

bool is_normalized(const ProbitModel& model, double tol) {
  try {
    check_normalized(model, tol);
    return true;
  } catch (const Error&) {
    return false;
  }
}

ProbitModel to_diffform(const ProbitModel& model) {
  check_normalized(model);
  const int n = model.n();
  const Eigen::MatrixXd mv = pin_first(n);
  Eigen::MatrixXd s = symmetrize(mv * model.sigma * mv.transpose());
  const double t = s.trace() / (n - 1);
  ProbitModel out;
  out.mu = mv * model.mu / std::sqrt(t);
  out.sigma = s / t;
  out.mu(0) = 0.0;
  out.sigma.row(0).setZero();
  out.sigma.col(0).setZero();
  out.normalized = false;
  return out;
}

void check_diffform(const ProbitModel& model, double tol) {
  const int n = model.n();
  std::ostringstream msg;
  if (std::fabs(model.mu(0)) > tol) msg << "first mean not zero; ";
  if (model.sigma.row(0).cwiseAbs().maxCoeff() > tol || model.sigma.col(0).cwiseAbs().maxCoeff() > tol)
    msg << "first row/column of sigma not zero; ";
  if (std::fabs(model.sigma.trace() - (n - 1)) > tol) msg << "trace differs from n-1; ";
  if ((model.sigma - model.sigma.transpose()).cwiseAbs().maxCoeff() > tol) msg << "sigma asymmetric; ";
  if (msg.str().empty()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
        symmetrize(model.sigma.bottomRightCorner(n - 1, n - 1)), Eigen::EigenvaluesOnly);
    if (eig.eigenvalues()(0) <= kRankTol * n) msg << "sigma rank below n-1; ";
  }
  if (!msg.str().empty()) fail(ErrorCode::NormalizationViolated, msg.str());
}

ProbitModel from_diffform(const ProbitModel& model) {
  check_diffform(model);
  const int n = model.n();
  const Eigen::MatrixXd mu_proj = centering(n);
  Eigen::MatrixXd s = symmetrize(mu_proj * model.sigma * mu_proj);
  const double t = s.trace() / n;
  ProbitModel out;
  out.mu = mu_proj * model.mu / std::sqrt(t);
  out.sigma = s / t;
  out.mu.array() -= out.mu.mean();
  out.normalized = true;
  return out;
}

double difference_variance(const ProbitModel& model, int i, int j) {
  return model.sigma(i, i) + model.sigma(j, j) - 2.0 * model.sigma(i, j);
}

double pairwise_probability(const ProbitModel& model, int i, int j) {
  const int n = model.n();
  if (i == j || i < 0 || j < 0 || i >= n || j >= n) fail(ErrorCode::InvalidArgument, "invalid item pair");
  const double var = difference_variance(model, i, j);
  const double scale = std::max(model.sigma.trace(), 1e-300);
  if (!(var > kRankTol * scale)) fail(ErrorCode::ZeroVariancePair, "difference variance is zero");
  return normal_cdf((model.mu(i) - model.mu(j)) / std::sqrt(var));
}

ProbitModel restrict_items(const ProbitModel& model, const std::vector<int>& items) {
  const int k = static_cast<int>(items.size());
  ProbitModel out;
  out.mu.resize(k);
  out.sigma.resize(k, k);
  for (int a = 0; a < k; ++a) {
    out.mu(a) = model.mu(items[a]);
    for (int b = 0; b < k; ++b) out.sigma(a, b) = model.sigma(items[a], items[b]);
  }
  return out;
}

Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& sigma) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetrize(sigma));
  if (eig.info() != Eigen::Success) fail(ErrorCode::NotPositiveSemidefinite, "eigendecomposition failed");
  Eigen::VectorXd ev = eig.eigenvalues();
  const double trace = std::max(std::fabs(sigma.trace()), 1e-300);
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -1e-9 * trace) fail(ErrorCode::NotPositiveSemidefinite, "covariance has a negative eigenvalue");
    ev(i) = std::sqrt(std::max(ev(i), 0.0));
  }
  return eig.eigenvectors() * ev.asDiagonal();
}

}  // namespace corrprobit
