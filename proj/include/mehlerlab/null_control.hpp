#pragma once

#include <memory>
#include <vector>

#include "mehlerlab/evolution_family.hpp"
#include "mehlerlab/psd.hpp"

namespace mehlerlab {

/// Certificate for steering x to 0 over [s,t]: Gramian, range verdict,
/// minimal energy, and (when synthesized) the tabulated control.
struct ControlCertificate {
  Mat gramian;
  bool in_range = false;
  double min_energy = kInf;
  std::vector<std::pair<double, Vec>> control;  // (r_k, u(r_k)) on the node grid
  double energy = 0.0;
  double transfer_residual = 0.0;
};

/// Strictly positive weight profile used for control synthesis.
struct WeightFn {
  std::string name;
  std::function<double(double)> eval;
};

WeightFn make_weight(const std::string& name, double beta = 0.0);
WeightFn make_tabulated_weight(const std::vector<std::pair<double, double>>& knots);

/// Non-autonomous linear control system dz = A(t) z dt + C(t) u dt.
class ControlSystem {
 public:
  ControlSystem(std::shared_ptr<const Propagator> prop, std::function<Mat(double)> c_family);

  int dim() const { return prop_->dim(); }
  const Propagator& prop() const { return *prop_; }
  Mat c_at(double r) const;

  /// Pi_{t,s} by composite-midpoint quadrature; symmetric PSD.
  Mat gramian(double s, double t) const;

  /// |Pi_{t,s}^{-1/2} U(t,s) x|^2, or +inf when U(t,s)x leaves the range.
  double min_energy(double s, double t, const Vec& x) const;

  /// Explicit control u(r) = -xi_r / int(xi) C(r)^{-1} U(r,s) x with
  /// transfer and energy-bound verification.
  ControlCertificate synthesize_control(double s, double t, const Vec& x,
                                        const WeightFn& weight) const;

  /// Least-norm discretized oracle for the minimal energy.
  double brute_force_min_energy(double s, double t, const Vec& x, int nodes) const;

  /// Null controllability at (s,t): all basis vectors transferable.
  bool null_controllable(double s, double t) const;

  static constexpr double kTauRange = 1e-6;
  static constexpr double kTauSvd = 1e-10;

 private:
  std::shared_ptr<const Propagator> prop_;
  std::function<Mat(double)> c_family_;
};

}  // namespace mehlerlab
