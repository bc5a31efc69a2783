#pragma once

namespace corrprobit {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

double normal_pdf(double x);
double normal_cdf(double x);
// Inverse of normal_cdf on (0, 1); returns -inf / +inf at 0 / 1.
double normal_quantile(double p);

}  // namespace corrprobit
