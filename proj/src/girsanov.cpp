#include "mehlerlab/girsanov.hpp"

#include <cmath>

namespace mehlerlab {

DriftFn make_drift(const std::string& name, const Mat& sqrt_r, const Vec& c, double scale) {
  const Mat s = sqrt_r;
  if (name == "zero") {
    const int d = static_cast<int>(s.rows());
    return {name, [d](double, const Vec&) { return Vec(Vec::Zero(d)); }};
  }
  if (name == "constant") {
    const Vec v = s * c;
    return {name, [v](double, const Vec&) { return v; }};
  }
  if (name == "tanh")
    return {name, [s, scale](double, const Vec& x) {
              return Vec(s * (scale * x.array().tanh()).matrix());
            }};
  if (name == "clipped_linear")
    return {name, [s, scale](double, const Vec& x) {
              return Vec(s * (scale * x.array().min(1.0).max(-1.0)).matrix());
            }};
  if (name == "linear")
    return {name, [s, scale](double, const Vec& x) { return Vec(s * (scale * x)); }};
  throw ConfigError("unknown drift function: " + name);
}

SemilinearSystem::SemilinearSystem(std::shared_ptr<const Propagator> prop, Mat R, DriftFn F,
                                   double k1, double k2)
    : prop_(std::move(prop)), r_(std::move(R)), sqrt_r_(r_), f_(std::move(F)), k1_(k1), k2_(k2) {
  if (!prop_) throw DomainError("SemilinearSystem: missing propagator");
  if (r_.rows() != prop_->dim()) throw ConfigError("SemilinearSystem: diffusion shape mismatch");
  if (k1_ < 0.0 || k2_ < 0.0) throw ConfigError("SemilinearSystem: growth constants must be >= 0");
  if (!f_.eval) throw ConfigError("SemilinearSystem: missing drift");
  // range and growth spot-checks at probe points
  const int d = dim();
  Rng probe_rng(0x5eedf00dULL);
  for (int i = 0; i < 8; ++i) {
    const Vec x = probe_rng.normal_vec(d) * (i % 2 == 0 ? 1.0 : 3.0);
    const double t = 0.25 * i;
    const Vec fv = f_.eval(t, x);
    const auto sol = sqrt_r_.solve_sqrt(fv);
    if (sol.residual > 1e-8 * std::max(1.0, fv.norm()))
      throw ConfigError("SemilinearSystem: drift leaves the range of R^{1/2}");
    if (sol.w.squaredNorm() > k1_ + k2_ * x.squaredNorm() + 1e-9)
      throw ConfigError("SemilinearSystem: growth bound violated at a probe point");
  }
}

Vec SemilinearSystem::psi(double r, const Vec& state) const {
  const Vec fv = f_.eval(r, state);
  const auto sol = sqrt_r_.solve_sqrt(fv);
  if (sol.residual > 1e-8 * std::max(1.0, fv.norm()))
    throw ConfigError("SemilinearSystem: drift leaves the range of R^{1/2}");
  return sol.w;
}

std::shared_ptr<const SemilinearSystem::StepPlan> SemilinearSystem::plan(double s, double t,
                                                                         int steps) const {
  if (steps < 1) throw DomainError("SemilinearSystem: need steps >= 1");
  if (!(t > s)) throw DomainError("SemilinearSystem: requires t > s");
  const std::int64_t i0 = prop_->grid_index(s);
  const std::int64_t i1 = prop_->grid_index(t);
  if ((i1 - i0) % steps != 0)
    throw DomainError("SemilinearSystem: steps must divide the cell count of [s,t]");
  {
    std::lock_guard<std::mutex> guard(plan_mutex_);
    auto it = plans_.find({i0, i1, steps});
    if (it != plans_.end()) return it->second;
  }

  auto plan = std::make_shared<StepPlan>();
  const std::int64_t group = (i1 - i0) / steps;
  plan->dt = static_cast<double>(group) * prop_->base_step();
  plan->times.resize(steps + 1);
  plan->u_step.reserve(steps);
  plan->gramian_sqrt.reserve(steps);
  const Mat r_const = r_;
  for (int k = 0; k <= steps; ++k)
    plan->times[k] = prop_->time_at_half(2 * (i0 + k * group));
  for (int k = 0; k < steps; ++k) {
    const double a = plan->times[k];
    const double b = plan->times[k + 1];
    plan->u_step.push_back(prop_->propagate(a, b));
    const Mat g = quad_uwu(*prop_, [&r_const](double) { return r_const; }, a, b);
    plan->gramian_sqrt.push_back(PsdSqrt(g).sqrt());
  }

  std::lock_guard<std::mutex> guard(plan_mutex_);
  auto [it, inserted] = plans_.emplace(std::make_tuple(i0, i1, steps), plan);
  return it->second;
}

void SemilinearSystem::simulate_with_plan(const StepPlan& plan, const Vec& x, Rng& rng,
                                          WeightedPath& out) const {
  const int steps = static_cast<int>(plan.u_step.size());
  const double dt = plan.dt;
  const double sqrt_dt = std::sqrt(dt);
  out.times = plan.times;
  out.states.resize(steps + 1);
  out.noise_increments.resize(steps);
  out.states[0] = x;
  out.log_weight = 0.0;
  for (int k = 0; k < steps; ++k) {
    const Vec psi_k = psi(plan.times[k], out.states[k]);
    const Vec dw = sqrt_dt * rng.normal_vec(dim());
    out.noise_increments[k] = dw;
    out.log_weight += psi_k.dot(dw) - 0.5 * psi_k.squaredNorm() * dt;
    // colored step noise synthesized from the white increment
    out.states[k + 1] = plan.u_step[k] * out.states[k] + plan.gramian_sqrt[k] * (dw / sqrt_dt);
    if (!is_finite(out.states[k + 1]))
      throw NumericalError("simulate_reference: numerical blowup");
  }
}

WeightedPath SemilinearSystem::simulate_reference(double s, double t, const Vec& x, int steps,
                                                  Rng& rng) const {
  if (x.size() != dim()) throw DomainError("simulate_reference: state dimension mismatch");
  auto pl = plan(s, t, steps);
  WeightedPath path;
  simulate_with_plan(*pl, x, rng, path);
  return path;
}

double SemilinearSystem::girsanov_weight(const WeightedPath& path) const {
  if (path.states.size() != path.times.size() ||
      path.noise_increments.size() + 1 != path.times.size())
    throw DomainError("girsanov_weight: malformed path");
  double log_m = 0.0;
  for (std::size_t k = 0; k + 1 < path.times.size(); ++k) {
    const double dt = path.times[k + 1] - path.times[k];
    const Vec psi_k = psi(path.times[k], path.states[k]);
    log_m += psi_k.dot(path.noise_increments[k]) - 0.5 * psi_k.squaredNorm() * dt;
  }
  return std::exp(log_m);
}

SemigroupEstimate SemilinearSystem::semigroup_apply(double s, double t,
                                                    const std::function<double(const Vec&)>& f,
                                                    const Vec& x, std::int64_t n, int steps,
                                                    std::uint64_t seed) const {
  if (n < 2) throw DomainError("semigroup_apply: need n >= 2");
  auto pl = plan(s, t, steps);
  auto stats = mc_chunked<WeightedStats>(
      n, seed, [&](std::int64_t count, Rng& rng, WeightedStats& acc) {
        WeightedPath path;
        for (std::int64_t i = 0; i < count; ++i) {
          simulate_with_plan(*pl, x, rng, path);
          const double w = std::exp(path.log_weight);
          const double v = f(path.states.back());
          if (!std::isfinite(v) || !std::isfinite(w))
            throw NumericalError("semigroup_apply: non-finite weight or value");
          acc.add(w, v);
        }
      });
  return {stats.estimate(), stats.effective_sample_size()};
}

double SemilinearSystem::fernique_lambda(double s) const {
  const Mat r_const = r_;
  return quad_uwu(*prop_, [&r_const](double) { return r_const; }, s, s + 1.0).trace();
}

double SemilinearSystem::admissible_horizon(double s, double kappa) const {
  if (kappa <= 0.0) return kInf;
  const double lambda = fernique_lambda(s);
  if (lambda <= 0.0) return kInf;
  return std::min(1.0, 1.0 / (4.0 * lambda * kappa));
}

double SemilinearSystem::growth_integral(double s, double t, const Vec& x) const {
  double acc = 0.0;
  const double h = prop_->base_step();
  walk_nodes_forward(*prop_, s, t, [&](double, const Mat& u_rs) {
    acc += h * (k1_ + 2.0 * k2_ * (u_rs * x).squaredNorm());
  });
  return acc;
}

MomentReport SemilinearSystem::weight_moment_check(double s, double t, const Vec& x, double p,
                                                   double delta, std::int64_t n, int steps,
                                                   std::uint64_t seed) const {
  if (!(p > 1.0)) throw DomainError("weight_moment_check: p must exceed 1");
  if (!(delta > 0.0)) throw DomainError("weight_moment_check: delta must be positive");
  const double kappa_p = 2.0 * p * (2.0 * p + 1.0) * k2_;
  const double kappa_d = 2.0 * delta * (2.0 * delta + 1.0) * k2_;
  const double window = admissible_horizon(s, std::max(kappa_p, kappa_d));
  if (t - s > window + 1e-12)
    throw DomainError("weight_moment_check: horizon " + std::to_string(t - s) +
                      " outside the admissible window [0, " + std::to_string(window) + "]");

  auto pl = plan(s, t, steps);
  const double dt = pl->dt;

  struct Acc {
    RunningStats mp, md, cp, cd;
    void merge(const Acc& o) {
      mp.merge(o.mp);
      md.merge(o.md);
      cp.merge(o.cp);
      cd.merge(o.cd);
    }
  };
  const Vec origin = Vec::Zero(dim());
  auto acc = mc_chunked<Acc>(n, seed, [&](std::int64_t count, Rng& rng, Acc& a) {
    WeightedPath path;
    for (std::int64_t i = 0; i < count; ++i) {
      simulate_with_plan(*pl, x, rng, path);
      a.mp.add(std::exp(p * path.log_weight));
      a.md.add(std::exp(-delta * path.log_weight));
      // independent stochastic-convolution paths for the moment constants
      simulate_with_plan(*pl, origin, rng, path);
      double wu_int = 0.0;
      for (std::size_t k = 0; k + 1 < path.states.size(); ++k)
        wu_int += path.states[k].squaredNorm() * dt;
      a.cp.add(std::exp(kappa_p * wu_int));
      a.cd.add(std::exp(kappa_d * wu_int));
    }
  });

  const double growth = growth_integral(s, t, x);
  MomentReport rep;
  rep.p = p;
  rep.delta = delta;
  rep.admissible_horizon = window;
  rep.moment_p = acc.mp.estimate();
  rep.moment_minus_delta = acc.md.estimate();
  const double cp = acc.cp.mean();
  const double cd = acc.cd.mean();
  const double exp_p = std::exp(0.5 * p * (2.0 * p - 1.0) * growth);
  const double exp_d = std::exp(0.5 * delta * (2.0 * delta + 1.0) * growth);
  rep.bound_p = std::sqrt(cp) * exp_p;
  rep.bound_minus_delta = std::sqrt(cd) * exp_d;
  rep.bound_p_sigma = cp > 0.0 ? 0.5 / std::sqrt(cp) * acc.cp.std_error() * exp_p : 0.0;
  rep.bound_minus_delta_sigma = cd > 0.0 ? 0.5 / std::sqrt(cd) * acc.cd.std_error() * exp_d : 0.0;

  const Verdict vp = three_valued_verdict(
      rep.moment_p.mean, rep.bound_p,
      std::sqrt(std::pow(rep.moment_p.std_error(), 2) + rep.bound_p_sigma * rep.bound_p_sigma));
  const Verdict vd = three_valued_verdict(
      rep.moment_minus_delta.mean, rep.bound_minus_delta,
      std::sqrt(std::pow(rep.moment_minus_delta.std_error(), 2) +
                rep.bound_minus_delta_sigma * rep.bound_minus_delta_sigma));
  rep.verdict = vp == Verdict::Fail || vd == Verdict::Fail ? Verdict::Fail
                : vp == Verdict::Indeterminate || vd == Verdict::Indeterminate
                    ? Verdict::Indeterminate
                    : Verdict::Pass;
  return rep;
}

CheckReport SemilinearSystem::harnack_semilinear_check(double s, double t, const BoundedFn& f,
                                                       double alpha, double p, double q,
                                                       const Vec& x, const Vec& y, std::int64_t n,
                                                       int steps, std::uint64_t seed) const {
  if (!(p > 1.0) || !(q > 1.0)) throw DomainError("harnack_semilinear_check: need p, q > 1");
  if (!(alpha / (p * q) > 1.0))
    throw DomainError("harnack_semilinear_check: requires alpha/(pq) > 1");
  const double p_conj = p / (p - 1.0);
  const double q_inv = 1.0 / (q - 1.0);
  const double kappa_1 = 2.0 * p_conj * (2.0 * p_conj + 1.0) * k2_;
  const double kappa_2 = 2.0 * q_inv * (2.0 * q_inv + 1.0) * k2_;
  const double window = admissible_horizon(s, std::max(kappa_1, kappa_2));
  if (t - s > window + 1e-12)
    throw DomainError("harnack_semilinear_check: horizon outside the admissible window [0, " +
                      std::to_string(window) + "]");

  auto pl = plan(s, t, steps);
  const double dt = pl->dt;

  struct Acc {
    WeightedStats fx, fy;
    RunningStats c1, c2;
    bool negative = false;
    void merge(const Acc& o) {
      fx.merge(o.fx);
      fy.merge(o.fy);
      c1.merge(o.c1);
      c2.merge(o.c2);
      negative = negative || o.negative;
    }
  };
  const Vec origin = Vec::Zero(dim());
  auto acc = mc_chunked<Acc>(n, seed, [&](std::int64_t count, Rng& rng, Acc& a) {
    WeightedPath path;
    for (std::int64_t i = 0; i < count; ++i) {
      simulate_with_plan(*pl, x, rng, path);
      const double vx = f.eval(path.states.back());
      if (vx < 0.0) {
        a.negative = true;
        return;
      }
      a.fx.add(std::exp(path.log_weight), vx);
      simulate_with_plan(*pl, y, rng, path);
      const double vy = f.eval(path.states.back());
      if (vy < 0.0) {
        a.negative = true;
        return;
      }
      a.fy.add(std::exp(path.log_weight), std::pow(vy, alpha));
      if (k2_ > 0.0) {
        simulate_with_plan(*pl, origin, rng, path);
        double wu_int = 0.0;
        for (std::size_t k = 0; k + 1 < path.states.size(); ++k)
          wu_int += path.states[k].squaredNorm() * dt;
        a.c1.add(std::exp(kappa_1 * wu_int));
        a.c2.add(std::exp(kappa_2 * wu_int));
      }
    }
  });
  if (acc.negative) throw DomainError("harnack_semilinear_check: f must be nonnegative");

  // Gamma^F = R^{-1/2} U(t,s)
  const Vec diff = prop_->propagate(s, t) * (x - y);
  const auto sol = sqrt_r_.solve_sqrt(diff);
  const double gamma_f =
      sol.residual > 1e-6 * diff.norm() ? kInf : sol.w.norm();

  const double c1 = k2_ > 0.0 ? acc.c1.mean() : 1.0;
  const double c2 = k2_ > 0.0 ? acc.c2.mean() : 1.0;
  const double c1_se = k2_ > 0.0 ? acc.c1.std_error() : 0.0;
  const double c2_se = k2_ > 0.0 ? acc.c2.std_error() : 0.0;
  const double e1 = alpha * p / (2.0 * (p - 1.0));
  const double e2 = alpha * q / (2.0 * (q - 1.0));

  double growth_xy = 0.0;
  {
    const double h = prop_->base_step();
    walk_nodes_forward(*prop_, s, t, [&](double, const Mat& u_rs) {
      growth_xy +=
          h * (k1_ + k2_ * ((u_rs * x).squaredNorm() + (u_rs * y).squaredNorm()));
    });
  }
  const double bracket = (p + 1.0) / (p - 1.0) + (q + 1.0) / (q * (q - 1.0));

  CheckReport rep;
  rep.name = "harnack_semilinear";
  const double mx = acc.fx.estimate().mean;
  rep.lhs = std::pow(std::max(mx, 0.0), alpha);
  rep.lhs_sigma =
      mx > 0.0 ? alpha * std::pow(mx, alpha - 1.0) * acc.fx.estimate().std_error() : 0.0;
  if (std::isinf(gamma_f)) {
    rep.rhs = kInf;
    rep.rhs_sigma = 0.0;
  } else {
    const double big_n = std::pow(c1, e1) * std::pow(c2, e2) *
                         std::exp(alpha * q * gamma_f * gamma_f / (2.0 * (alpha - q)) +
                                  alpha * bracket * growth_xy);
    rep.rhs = big_n * acc.fy.estimate().mean;
    // first-order error propagation through the constant and the mean
    const double rel =
        std::sqrt(std::pow(e1 * c1_se / std::max(c1, 1e-300), 2) +
                  std::pow(e2 * c2_se / std::max(c2, 1e-300), 2));
    rep.rhs_sigma = std::sqrt(std::pow(big_n * acc.fy.estimate().std_error(), 2) +
                              std::pow(rep.rhs * rel, 2));
  }
  rep.verdict = three_valued_verdict(rep.lhs, rep.rhs, rep.combined_sigma());
  return rep;
}

}  // namespace mehlerlab
