#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "mehlerlab/evolution_family.hpp"
#include "mehlerlab/harnack_feller.hpp"
#include "mehlerlab/mc.hpp"
#include "mehlerlab/psd.hpp"

namespace mehlerlab {

/// Drift nonlinearity F(t,x) taking values in the range of R^{1/2}.
struct DriftFn {
  std::string name;
  std::function<Vec(double, const Vec&)> eval;
};

/// Catalog: zero, constant (R^{1/2} c), tanh / clipped_linear / linear
/// (R^{1/2} applied to scale * g(x) componentwise).
DriftFn make_drift(const std::string& name, const Mat& sqrt_r, const Vec& c, double scale);

/// One simulated reference path with the driving white increments and the
/// accumulated Girsanov log-weight.
struct WeightedPath {
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<Vec> noise_increments;  // dW_k ~ N(0, dt I)
  double log_weight = 0.0;
};

struct SemigroupEstimate {
  McEstimate estimate;
  double effective_sample_size = 0.0;
};

struct MomentReport {
  double p = 0.0, delta = 0.0;
  McEstimate moment_p, moment_minus_delta;
  double bound_p = 0.0, bound_minus_delta = 0.0;
  double bound_p_sigma = 0.0, bound_minus_delta_sigma = 0.0;
  double admissible_horizon = 0.0;
  Verdict verdict = Verdict::Pass;
};

/// Semilinear equation dX = A(t)X dt + F(t,X) dt + R^{1/2} dW evaluated
/// through Girsanov reweighting of the linear Gaussian reference process.
class SemilinearSystem {
 public:
  SemilinearSystem(std::shared_ptr<const Propagator> prop, Mat R, DriftFn F, double k1, double k2);

  int dim() const { return prop_->dim(); }
  const Propagator& prop() const { return *prop_; }
  const Mat& diffusion() const { return r_; }
  const PsdSqrt& diffusion_sqrt() const { return sqrt_r_; }
  double k1() const { return k1_; }
  double k2() const { return k2_; }
  const DriftFn& drift() const { return f_; }

  /// Exact-in-law Gaussian recursion for the reference process, recording
  /// the driving increments for the weight integral.
  WeightedPath simulate_reference(double s, double t, const Vec& x, int steps, Rng& rng) const;

  /// M = exp(sum <psi_k, dW_k> - 1/2 sum |psi_k|^2 dt), psi = R^{-1/2} F.
  double girsanov_weight(const WeightedPath& path) const;

  /// Weighted Monte Carlo mean of M f(X(t)) over n reference paths.
  SemigroupEstimate semigroup_apply(double s, double t, const std::function<double(const Vec&)>& f,
                                    const Vec& x, std::int64_t n, int steps,
                                    std::uint64_t seed) const;

  /// E[M^p] and E[M^{-delta}] against their exponential-moment bounds.
  MomentReport weight_moment_check(double s, double t, const Vec& x, double p, double delta,
                                   std::int64_t n, int steps, std::uint64_t seed) const;

  /// (P^F f(x))^alpha vs N * P^F f^alpha(y) with the assembled constant N.
  CheckReport harnack_semilinear_check(double s, double t, const BoundedFn& f, double alpha,
                                       double p, double q, const Vec& x, const Vec& y,
                                       std::int64_t n, int steps, std::uint64_t seed) const;

  /// Trace of the unit-interval Gramian from s (the Fernique scale).
  double fernique_lambda(double s) const;
  /// Largest admissible t - s for the exponential-moment constant at kappa.
  double admissible_horizon(double s, double kappa) const;
  /// Quadrature of k1 + 2 k2 |U(r,s)x|^2 over [s,t].
  double growth_integral(double s, double t, const Vec& x) const;

  struct StepPlan {
    double dt = 0.0;
    std::vector<double> times;       // r_0 = s .. r_K = t
    std::vector<Mat> u_step;         // U(r_{k+1}, r_k)
    std::vector<Mat> gramian_sqrt;   // sqrt of the per-step Gramian
  };
  std::shared_ptr<const StepPlan> plan(double s, double t, int steps) const;

 private:
  Vec psi(double r, const Vec& state) const;
  void simulate_with_plan(const StepPlan& plan, const Vec& x, Rng& rng, WeightedPath& out) const;

  std::shared_ptr<const Propagator> prop_;
  Mat r_;
  PsdSqrt sqrt_r_;
  DriftFn f_;
  double k1_, k2_;
  mutable std::map<std::tuple<std::int64_t, std::int64_t, int>, std::shared_ptr<const StepPlan>>
      plans_;
  mutable std::mutex plan_mutex_;
};

}  // namespace mehlerlab
