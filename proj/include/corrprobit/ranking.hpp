#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "corrprobit/model.hpp"
#include "corrprobit/quadrature.hpp"

namespace corrprobit {

using Triple = std::array<int, 3>;

// Best-first list of distinct items.
struct Ranking {
  std::vector<int> order;
};

// The six orderings of positions (a, b, c) of a triple, best first, in lexicographic order.
inline constexpr std::array<std::array<int, 3>, 6> kOrderings = {{
    {0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};

std::string_view ordering_code(int ordering);            // "abc", "acb", ...
int ordering_from_code(std::string_view code);            // -1 if invalid
int ordering_index(int first, int second, int third);     // positions -> ordering id
// Position rank of `position` (0 = best) within the ordering.
int position_rank(int ordering, int position);

struct RankDistribution3 {
  Triple triple{};
  std::array<double, 6> probs{};
};

struct ProbabilityOptions {
  // 0 selects adaptive Gauss-Kronrod; otherwise a fixed Gauss-Legendre rule of this order per piece.
  std::size_t grid_resolution = 0;
  QuadratureOptions quadrature{};
};

// P_{N(mean, I_2)}{<Y, n1> >= 0, <Y, n2> >= 0} by polar integration with the radial part in closed form.
double gaussian_cone_mass(const Eigen::Vector2d& mean, const Eigen::Vector2d& n1, const Eigen::Vector2d& n2,
                          const ProbabilityOptions& options = {});

// Zero-mean standard Gaussian mass of {<Y,u1> >= 0, <Y,u2> >= 0}.
double cone_probability_zero_mean(const Eigen::Vector2d& u1, const Eigen::Vector2d& u2);

// Orthonormal projection onto the plane orthogonal to 1 in R^3.
const Eigen::Matrix<double, 2, 3>& triangle_projection();

RankDistribution3 triple_rank_probabilities(const ProbitModel& model, int i, int j, int k,
                                            const ProbabilityOptions& options = {});

// Ordering probabilities from the projected plane law N(mean, cov), coordinates given by triangle_projection().
std::array<double, 6> plane_rank_probabilities(const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov,
                                               const ProbabilityOptions& options = {});

// P{X_winner >= X_o for both others}, integrated in the projected plane.
double top_choice_probability(const ProbitModel& model, int winner, int other1, int other2,
                              const ProbabilityOptions& options = {});

// Minimum ordering probability over all triples of the model.
double observability(const ProbitModel& model, const ProbabilityOptions& options = {});

}  // namespace corrprobit
