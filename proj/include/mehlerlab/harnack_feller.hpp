#pragma once

#include <map>
#include <string>

#include "mehlerlab/evolution_measures.hpp"
#include "mehlerlab/mehler_kernel.hpp"

namespace mehlerlab {

/// Gamma_{t,s} = R_{t,s}^{-1/2} U(t,s) with the convention |Gamma x| = +inf
/// off the range of R_{t,s}^{1/2}.
class GammaOperator {
 public:
  GammaOperator(const Mat& cov, const Mat& u, double tau_range = 1e-6);

  /// |Gamma v|, or +inf when U v falls outside the range at tau_range.
  double apply_norm(const Vec& v) const;
  bool in_range(const Vec& v) const;
  /// Operator norm |Gamma|; +inf when some direction leaves the range.
  double op_norm() const;
  /// Singular values of R_{t,s}^{1/2} backing the range test.
  const Vec& svals() const { return sqrt_cov_.singular_values(); }
  const Mat& u() const { return u_; }

 private:
  PsdSqrt sqrt_cov_;
  Mat u_;
  double tau_range_;
};

GammaOperator make_gamma(const MehlerSystem& sys, double s, double t, double tau_range = 1e-6);
double gamma_apply(const MehlerSystem& sys, double s, double t, const Vec& v);

enum class Verdict { Pass, Indeterminate, Fail, Vacuous };
std::string verdict_name(Verdict v);

/// Outcome of a statistical inequality check: lhs <= rhs tested with a
/// combined 3-sigma slack; margin = rhs - lhs.
struct CheckReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double lhs_sigma = 0.0;
  double rhs_sigma = 0.0;
  Verdict verdict = Verdict::Pass;

  double margin() const { return rhs - lhs; }
  double combined_sigma() const {
    return std::sqrt(lhs_sigma * lhs_sigma + rhs_sigma * rhs_sigma);
  }
};

Verdict three_valued_verdict(double lhs, double rhs, double sigma);

/// Named bounded test function.
struct BoundedFn {
  std::string name;
  std::function<double(const Vec&)> eval;
};

/// Catalog: one, indicator, tanh, tanh_shift, cosine_shift, linear_clipped.
BoundedFn make_test_function(const std::string& name, const Vec& direction, double offset = 0.0);
/// Piecewise-linear function of the projection onto `direction`.
BoundedFn make_tabulated_function(const std::vector<std::pair<double, double>>& knots,
                                  const Vec& direction);

/// (p_{s,t} f(x))^alpha vs exp(alpha |Gamma(x-y)|^2 / (2(alpha-1))) p f^alpha(y).
/// In log mode: p log f(x) vs log p f(y) + |Gamma|^2 |x-y|^2 / 2 (needs f >= 1).
CheckReport harnack_check(const MehlerSystem& sys, double s, double t, const BoundedFn& f,
                          double alpha, const Vec& x, const Vec& y, std::int64_t n,
                          std::uint64_t seed, bool log_mode = false);

/// |p f(x) - p f(y)|^2 vs (e^{|Gamma(x-y)|^2} - 1) min variance.
CheckReport strong_feller_bound(const MehlerSystem& sys, double s, double t, const BoundedFn& f,
                                const Vec& x, const Vec& y, std::int64_t n, std::uint64_t seed);

/// Nested Monte Carlo estimate of the hyperboundedness constant
/// C_{s,t}(alpha, eps) over the evolution measure at s.
McEstimate hyperbound_constant(const MehlerSystem& sys, double s, double t,
                               const std::map<double, IdTriplet>& nus, double alpha, double eps,
                               std::int64_t n, std::uint64_t seed);

}  // namespace mehlerlab
