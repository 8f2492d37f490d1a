#pragma once

#include <map>

#include "mehlerlab/mehler_kernel.hpp"

namespace mehlerlab {

/// User-asserted exponential bound |U(t,s)| <= M exp(-omega (t-s)).
struct StabilityHint {
  double M = 1.0;
  double omega = 1.0;
};

/// Limit law nu_t with the truncation horizon used to reach it and the
/// residual tail estimate on the trace and jump functionals.
struct LimitTriplet {
  IdTriplet nu;
  double horizon;
  double tail_bound;
};

/// nu_t = D[a_{t,-inf}, R_{t,-inf}, m_{t,-inf}] by backward horizon
/// extension with a geometric tail bound derived from the hint.
LimitTriplet limit_triplet(const MehlerSystem& sys, double t, const StabilityHint& hint,
                           double tol);

/// max over xis of |psi^mu_{t,s} + psi^{nu_s}(U(t,s)^T .) - psi^{nu_t}|.
double invariance_defect(const MehlerSystem& sys, const std::map<double, IdTriplet>& nus, double s,
                         double t, const std::vector<Vec>& xis);

/// nu'_t = nu_t convolved with the point mass at U(t, anchor) c.
std::map<double, IdTriplet> shifted_system(const MehlerSystem& sys,
                                           const std::map<double, IdTriplet>& nus, const Vec& c,
                                           double anchor);

/// Limit law at t0 for a T-periodic system, with the periodicity and
/// geometric-contraction assertions of the uniqueness argument.
IdTriplet periodic_fixed_point(const MehlerSystem& sys, const StabilityHint& hint, double T,
                               double t0, double tol);

}  // namespace mehlerlab
