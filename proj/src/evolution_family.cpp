#include "mehlerlab/evolution_family.hpp"

#include <cmath>

namespace mehlerlab {

OperatorFamily::OperatorFamily(int dim, std::function<Mat(double)> generator, FamilyTags tags)
    : dim_(dim), generator_(std::move(generator)), tags_(tags) {
  if (dim_ < 1) throw DomainError("OperatorFamily: dimension must be positive");
  if (!generator_) throw DomainError("OperatorFamily: missing generator");
  // spot-check the declared structure hints
  const Mat a0 = at(0.0);
  if (tags_.constant) {
    for (double t : {0.37, 1.23, -2.11}) {
      if ((at(t) - a0).cwiseAbs().maxCoeff() > 0.0)
        throw ConfigError("OperatorFamily: constant tag violated");
    }
  }
  if (tags_.period) {
    const double T = *tags_.period;
    if (!(T > 0.0)) throw ConfigError("OperatorFamily: period must be positive");
    for (double t : {0.0, 0.25 * T, 0.5 * T}) {
      if ((at(t + T) - at(t)).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + a0.cwiseAbs().maxCoeff()))
        throw ConfigError("OperatorFamily: periodic tag violated");
    }
  }
}

Mat OperatorFamily::at(double t) const {
  Mat a = generator_(t);
  if (a.rows() != dim_ || a.cols() != dim_)
    throw ConfigError("OperatorFamily: generator returned wrong shape");
  if (!is_finite(a)) throw NumericalError("OperatorFamily: generator returned non-finite matrix");
  return a;
}

Propagator::Propagator(OperatorFamily family, double base_step, double tol_cocycle)
    : family_(std::move(family)),
      base_step_(base_step),
      half_step_(0.5 * base_step),
      tol_cocycle_(tol_cocycle) {
  if (!(base_step_ > 0.0)) throw DomainError("Propagator: base_step must be positive");
}

std::int64_t Propagator::half_index(double t) const {
  const double q = t / half_step_;
  const std::int64_t k = std::llround(q);
  if (std::abs(static_cast<double>(k) * half_step_ - t) > 1e-9 * std::max(1.0, std::abs(t)))
    throw DomainError("Propagator: time not aligned to the step grid");
  return k;
}

std::int64_t Propagator::grid_index(double t) const {
  const std::int64_t k = half_index(t);
  if (k % 2 != 0) throw DomainError("Propagator: time not aligned to base_step");
  return k / 2;
}

Mat Propagator::rk4_step(double t0) const {
  const double h = half_step_;
  const int d = dim();
  const Mat I = Mat::Identity(d, d);
  const Mat a1 = family_.at(t0);
  const Mat a2 = family_.at(t0 + 0.5 * h);
  const Mat a3 = family_.at(t0 + h);
  const Mat k1 = a1;
  const Mat k2 = a2 * (I + 0.5 * h * k1);
  const Mat k3 = a2 * (I + 0.5 * h * k2);
  const Mat k4 = a3 * (I + h * k3);
  Mat u = I + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!is_finite(u)) throw NumericalError("Propagator: numerical blowup during integration");
  return u;
}

const Mat& Propagator::step(std::int64_t k) const {
  auto it = steps_.find(k);
  if (it != steps_.end()) return it->second;
  if (frozen_)
    throw NumericalError("Propagator: step cache miss after warm-up (concurrent mode)");
  it = steps_.emplace(k, rk4_step(time_at_half(k))).first;
  return it->second;
}

Mat Propagator::propagate(double s, double t) const {
  if (t < s) throw DomainError("Propagator: requires t >= s");
  const std::int64_t i0 = half_index(s);
  const std::int64_t i1 = half_index(t);
  Mat u = Mat::Identity(dim(), dim());
  for (std::int64_t k = i0; k < i1; ++k) u = step(k) * u;
  if (!is_finite(u)) throw NumericalError("Propagator: numerical blowup during integration");
  return u;
}

Vec Propagator::adjoint_apply(double s, double t, const Vec& xi) const {
  if (xi.size() != dim()) throw DomainError("Propagator: adjoint vector has wrong dimension");
  return propagate(s, t).transpose() * xi;
}

double Propagator::cocycle_defect(double s, double r, double t) const {
  if (!(s <= r && r <= t)) throw DomainError("Propagator: requires s <= r <= t");
  const Mat u_ts = propagate(s, t);
  const Mat u_rs = propagate(s, r);
  const Mat u_tr = propagate(r, t);
  return (u_tr * u_rs - u_ts).norm();
}

void Propagator::warm_up(double t_min, double t_max) {
  if (frozen_) return;
  const std::int64_t i0 = half_index(t_min);
  const std::int64_t i1 = half_index(t_max);
  for (std::int64_t k = i0; k < i1; ++k) step(k);
  frozen_ = true;
}

Mat quad_uwu(const Propagator& prop, const std::function<Mat(double)>& weight, double s, double t) {
  const int d = prop.dim();
  Mat acc = Mat::Zero(d, d);
  walk_nodes_backward(prop, s, t, [&](double r, const Mat& u) {
    acc.noalias() += prop.base_step() * (u * weight(r) * u.transpose());
  });
  return 0.5 * (acc + acc.transpose());
}

Mat walk_nodes_backward(const Propagator& prop, double s, double t,
                        const std::function<void(double, const Mat&)>& fn) {
  if (t < s) throw DomainError("walk_nodes_backward: requires t >= s");
  const std::int64_t c0 = prop.grid_index(s);
  const std::int64_t c1 = prop.grid_index(t);
  const int d = prop.dim();
  Mat w = Mat::Identity(d, d);  // U(t, node_{k+1})
  for (std::int64_t k = c1 - 1; k >= c0; --k) {
    const Mat u_mid = w * prop.step(2 * k + 1);  // U(t, mid_k)
    fn(prop.time_at_half(2 * k + 1), u_mid);
    w = u_mid * prop.step(2 * k);  // U(t, node_k)
  }
  return w;
}

Mat walk_nodes_forward(const Propagator& prop, double s, double t,
                       const std::function<void(double, const Mat&)>& fn) {
  if (t < s) throw DomainError("walk_nodes_forward: requires t >= s");
  const std::int64_t c0 = prop.grid_index(s);
  const std::int64_t c1 = prop.grid_index(t);
  const int d = prop.dim();
  Mat v = Mat::Identity(d, d);  // U(node_k, s)
  for (std::int64_t k = c0; k < c1; ++k) {
    const Mat u_mid = prop.step(2 * k) * v;  // U(mid_k, s)
    fn(prop.time_at_half(2 * k + 1), u_mid);
    v = prop.step(2 * k + 1) * u_mid;  // U(node_{k+1}, s)
  }
  return v;
}

}  // namespace mehlerlab
