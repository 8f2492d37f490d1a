#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>

#include "mehlerlab/types.hpp"

namespace mehlerlab {

struct FamilyTags {
  bool constant = false;
  bool commuting = false;
  std::optional<double> period;
};

/// Time-dependent generator t -> A(t), d x d.
class OperatorFamily {
 public:
  OperatorFamily(int dim, std::function<Mat(double)> generator, FamilyTags tags = {});

  int dim() const { return dim_; }
  const FamilyTags& tags() const { return tags_; }

  /// Evaluates A(t); validates shape and finiteness.
  Mat at(double t) const;

 private:
  int dim_;
  std::function<Mat(double)> generator_;
  FamilyTags tags_;
};

/// Two-parameter propagator U(t,s) for dU/dt = A(t)U, U(s,s) = I.
///
/// All public times must lie on the half-step grid (integer multiples of
/// base_step/2). U(t,s) is the ordered product of cached one-step
/// transition matrices, each obtained from a classical fourth-order
/// Runge-Kutta step, so the cocycle identity U(t,r)U(r,s) = U(t,s) holds to
/// floating-point roundoff for any aligned split.
class Propagator {
 public:
  Propagator(OperatorFamily family, double base_step, double tol_cocycle = 1e-8);

  int dim() const { return family_.dim(); }
  double base_step() const { return base_step_; }
  double half_step_size() const { return half_step_; }
  double tol_cocycle() const { return tol_cocycle_; }
  const OperatorFamily& family() const { return family_; }

  Mat propagate(double s, double t) const;
  Vec adjoint_apply(double s, double t, const Vec& xi) const;
  double cocycle_defect(double s, double r, double t) const;

  /// Precomputes all step matrices covering [t_min, t_max] and freezes the
  /// cache; afterwards the object is immutable and shareable across threads.
  void warm_up(double t_min, double t_max);
  bool frozen() const { return frozen_; }

  /// Index of a time on the half-step grid; throws if misaligned.
  std::int64_t half_index(double t) const;
  /// Index on the full base-step grid; throws if misaligned.
  std::int64_t grid_index(double t) const;
  double time_at_half(std::int64_t k) const { return static_cast<double>(k) * half_step_; }

  /// Transition matrix over [k*h/2, (k+1)*h/2].
  const Mat& step(std::int64_t k) const;

 private:
  Mat rk4_step(double t0) const;

  OperatorFamily family_;
  double base_step_;
  double half_step_;
  double tol_cocycle_;
  bool frozen_ = false;
  mutable std::map<std::int64_t, Mat> steps_;
};

/// Midpoint quadrature of sum_k h * U(t, r_k) W(r_k) U(t, r_k)^T over the
/// base cells of [s,t]; shared by the kernel covariance, the controllability
/// Gramian and the per-step Gramians of the path sampler.
Mat quad_uwu(const Propagator& prop, const std::function<Mat(double)>& weight, double s, double t);

/// Walks the midpoint nodes of [s,t] from the top cell down, passing
/// (r_mid, U(t, r_mid)) to the callback; returns U(t,s).
Mat walk_nodes_backward(const Propagator& prop, double s, double t,
                        const std::function<void(double, const Mat&)>& fn);

/// Walks the midpoint nodes of [s,t] from the bottom cell up, passing
/// (r_mid, U(r_mid, s)) to the callback; returns U(t,s).
Mat walk_nodes_forward(const Propagator& prop, double s, double t,
                       const std::function<void(double, const Mat&)>& fn);

}  // namespace mehlerlab
