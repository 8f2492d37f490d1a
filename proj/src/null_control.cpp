#include "mehlerlab/null_control.hpp"

#include <cmath>

#include <Eigen/SVD>

namespace mehlerlab {

WeightFn make_weight(const std::string& name, double beta) {
  if (name == "constant") return {name, [](double) { return 1.0; }};
  if (name == "exponential") return {name, [beta](double r) { return std::exp(beta * r); }};
  throw ConfigError("unknown weight function: " + name);
}

WeightFn make_tabulated_weight(const std::vector<std::pair<double, double>>& knots) {
  if (knots.size() < 2) throw ConfigError("tabulated weight needs at least two knots");
  for (const auto& [r, v] : knots)
    if (!(v > 0.0)) throw ConfigError("tabulated weight must be strictly positive");
  auto table = knots;
  return {"tabulated", [table](double r) {
            if (r <= table.front().first) return table.front().second;
            if (r >= table.back().first) return table.back().second;
            std::size_t hi = 1;
            while (table[hi].first < r) ++hi;
            const auto& [r0, v0] = table[hi - 1];
            const auto& [r1, v1] = table[hi];
            return v0 + (v1 - v0) * (r - r0) / (r1 - r0);
          }};
}

ControlSystem::ControlSystem(std::shared_ptr<const Propagator> prop,
                             std::function<Mat(double)> c_family)
    : prop_(std::move(prop)), c_family_(std::move(c_family)) {
  if (!prop_) throw DomainError("ControlSystem: missing propagator");
  if (!c_family_) throw DomainError("ControlSystem: missing control map");
  (void)c_at(0.0);
}

Mat ControlSystem::c_at(double r) const {
  Mat c = c_family_(r);
  if (c.rows() != dim() || c.cols() != dim())
    throw ConfigError("ControlSystem: control matrix has wrong shape");
  if (!is_finite(c)) throw NumericalError("ControlSystem: non-finite control matrix");
  return c;
}

Mat ControlSystem::gramian(double s, double t) const {
  if (!(t > s)) throw DomainError("gramian: requires t > s");
  return quad_uwu(*prop_, [this](double r) {
    const Mat c = c_at(r);
    return Mat(c * c.transpose());
  }, s, t);
}

double ControlSystem::min_energy(double s, double t, const Vec& x) const {
  if (x.size() != dim()) throw DomainError("min_energy: state dimension mismatch");
  const PsdSqrt pi(gramian(s, t));
  const Vec target = prop_->propagate(s, t) * x;
  const auto sol = pi.solve_sqrt(target, kTauSvd);
  if (sol.residual > kTauRange * target.norm()) return kInf;
  return sol.w.squaredNorm();
}

ControlCertificate ControlSystem::synthesize_control(double s, double t, const Vec& x,
                                                     const WeightFn& weight) const {
  if (!(t > s)) throw DomainError("synthesize_control: requires t > s");
  if (x.size() != dim()) throw DomainError("synthesize_control: state dimension mismatch");
  const double h = prop_->base_step();

  // forward pass: tabulate xi_k, C_k^{-1} U(r_k, s) x at the midpoint nodes
  struct Node {
    double r;
    double xi;
    Vec cinv_ux;
  };
  std::vector<Node> nodes;
  walk_nodes_forward(*prop_, s, t, [&](double r, const Mat& u_rs) {
    const double xi = weight.eval(r);
    if (!(xi > 0.0) || !std::isfinite(xi))
      throw DomainError("synthesize_control: weight must be strictly positive");
    const Mat c = c_at(r);
    Eigen::FullPivLU<Mat> lu(c);
    if (!lu.isInvertible())
      throw DomainError("synthesize_control: singular control matrix at r=" + std::to_string(r));
    nodes.push_back({r, xi, lu.solve(u_rs * x)});
  });

  double xi_integral = 0.0;
  for (const auto& node : nodes) xi_integral += h * node.xi;

  ControlCertificate cert;
  cert.gramian = gramian(s, t);
  cert.min_energy = min_energy(s, t, x);
  cert.in_range = std::isfinite(cert.min_energy);

  double energy = 0.0;
  double bound_numerator = 0.0;
  cert.control.reserve(nodes.size());
  for (const auto& node : nodes) {
    const Vec u_ctrl = -(node.xi / xi_integral) * node.cinv_ux;
    energy += h * u_ctrl.squaredNorm();
    bound_numerator += h * node.xi * node.xi * node.cinv_ux.squaredNorm();
    cert.control.emplace_back(node.r, u_ctrl);
  }
  cert.energy = energy;

  // transfer check: U(t,s)x + sum_k h U(t,r_k) C(r_k) u(r_k) = 0
  Vec transfer = Vec::Zero(dim());
  std::size_t idx = nodes.size();
  const Mat u_ts = walk_nodes_backward(*prop_, s, t, [&](double, const Mat& u_tr) {
    --idx;
    transfer.noalias() += h * (u_tr * (c_at(nodes[idx].r) * cert.control[idx].second));
  });
  transfer += u_ts * x;
  cert.transfer_residual = transfer.norm();
  const double tol_transfer = 1e-6 * (1.0 + x.norm());
  if (cert.transfer_residual > tol_transfer)
    throw NumericalError("synthesize_control: transfer residual " +
                         std::to_string(cert.transfer_residual) + " above tolerance");

  const double bound = bound_numerator / (xi_integral * xi_integral);
  if (energy > bound * (1.0 + 1e-3) + 1e-12)
    throw NumericalError("synthesize_control: energy exceeds the weighted bound");
  if (cert.in_range && energy < cert.min_energy - 1e-9 * (1.0 + cert.min_energy))
    throw NumericalError("synthesize_control: energy below the minimal energy");
  return cert;
}

double ControlSystem::brute_force_min_energy(double s, double t, const Vec& x, int nodes) const {
  if (!(t > s)) throw DomainError("brute_force_min_energy: requires t > s");
  if (nodes < 1) throw DomainError("brute_force_min_energy: need at least one node");
  const std::int64_t cells = prop_->grid_index(t) - prop_->grid_index(s);
  if (cells % nodes != 0)
    throw DomainError("brute_force_min_energy: nodes must divide the cell count of [s,t]");
  const std::int64_t group = cells / nodes;
  const double w = static_cast<double>(group) * prop_->base_step();
  const int d = dim();

  // stack sqrt(w) U(t, r_k) C(r_k) into L so that the least-norm solution of
  // L v = -U(t,s)x carries energy |v|^2 = sum_k w |u_k|^2
  Mat l(d, nodes * d);
  const double sqrt_w = std::sqrt(w);
  for (int k = 0; k < nodes; ++k) {
    const double r = s + (static_cast<double>(k) + 0.5) * w;
    const Mat u_tr = prop_->propagate(r, t);
    l.middleCols(k * d, d) = sqrt_w * (u_tr * c_at(r));
  }
  const Vec target = -(prop_->propagate(s, t) * x);

  Eigen::BDCSVD<Mat> svd(l, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(kTauSvd);
  const Vec v = svd.solve(target);
  const double residual = (l * v - target).norm();
  if (residual > kTauRange * target.norm() + 1e-14) return kInf;
  return v.squaredNorm();
}

bool ControlSystem::null_controllable(double s, double t) const {
  for (int i = 0; i < dim(); ++i) {
    Vec e = Vec::Zero(dim());
    e(i) = 1.0;
    if (!std::isfinite(min_energy(s, t, e))) return false;
  }
  return true;
}

}  // namespace mehlerlab
