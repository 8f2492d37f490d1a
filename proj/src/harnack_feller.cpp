#include "mehlerlab/harnack_feller.hpp"

#include <algorithm>
#include <cmath>

namespace mehlerlab {

GammaOperator::GammaOperator(const Mat& cov, const Mat& u, double tau_range)
    : sqrt_cov_(cov), u_(u), tau_range_(tau_range) {
  if (u_.rows() != cov.rows() || u_.cols() != cov.cols())
    throw DomainError("GammaOperator: shape mismatch");
}

double GammaOperator::apply_norm(const Vec& v) const {
  const Vec target = u_ * v;
  const auto sol = sqrt_cov_.solve_sqrt(target);
  if (sol.residual > tau_range_ * target.norm()) return kInf;
  return sol.w.norm();
}

bool GammaOperator::in_range(const Vec& v) const { return std::isfinite(apply_norm(v)); }

double GammaOperator::op_norm() const {
  // finite iff every direction stays in range; then the norm is the largest
  // singular value of R^{-1/2} U restricted to the retained subspace
  const int d = static_cast<int>(u_.rows());
  for (int i = 0; i < d; ++i) {
    Vec e = Vec::Zero(d);
    e(i) = 1.0;
    if (!in_range(e)) return kInf;
  }
  const Mat gamma = sqrt_cov_.pinv_sqrt_times(u_);
  Eigen::JacobiSVD<Mat> svd(gamma);
  return svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
}

GammaOperator make_gamma(const MehlerSystem& sys, double s, double t, double tau_range) {
  const IdTriplet mu = sys.build_triplet(s, t);
  return GammaOperator(mu.covariance(), sys.prop().propagate(s, t), tau_range);
}

double gamma_apply(const MehlerSystem& sys, double s, double t, const Vec& v) {
  return make_gamma(sys, s, t).apply_norm(v);
}

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "PASS";
    case Verdict::Indeterminate: return "INDETERMINATE";
    case Verdict::Fail: return "FAIL";
    case Verdict::Vacuous: return "VACUOUS";
  }
  return "UNKNOWN";
}

Verdict three_valued_verdict(double lhs, double rhs, double sigma) {
  if (std::isinf(rhs)) return Verdict::Vacuous;
  if (lhs <= rhs) return Verdict::Pass;
  if (lhs - rhs <= 3.0 * sigma) return Verdict::Indeterminate;
  return Verdict::Fail;
}

BoundedFn make_test_function(const std::string& name, const Vec& direction, double offset) {
  const Vec c = direction;
  if (name == "one") return {name, [](const Vec&) { return 1.0; }};
  if (name == "indicator")
    return {name, [c, offset](const Vec& y) { return c.dot(y) >= offset ? 1.0 : 0.0; }};
  if (name == "tanh") return {name, [c, offset](const Vec& y) { return std::tanh(c.dot(y) - offset); }};
  if (name == "tanh_shift")
    return {name, [c, offset](const Vec& y) { return 1.0 + std::tanh(c.dot(y) - offset); }};
  if (name == "cosine_shift")
    return {name, [c, offset](const Vec& y) { return 1.0 + std::cos(c.dot(y) - offset); }};
  if (name == "cos") return {name, [c, offset](const Vec& y) { return std::cos(c.dot(y) - offset); }};
  if (name == "linear_clipped")
    return {name, [c, offset](const Vec& y) { return std::clamp(c.dot(y) - offset, 0.0, 1.0); }};
  throw ConfigError("unknown test function: " + name);
}

BoundedFn make_tabulated_function(const std::vector<std::pair<double, double>>& knots,
                                  const Vec& direction) {
  if (knots.size() < 2) throw ConfigError("tabulated function needs at least two knots");
  for (std::size_t i = 1; i < knots.size(); ++i)
    if (!(knots[i].first > knots[i - 1].first))
      throw ConfigError("tabulated function knots must be strictly increasing");
  const Vec c = direction;
  auto table = knots;
  return {"tabulated", [c, table](const Vec& y) {
            const double u = c.dot(y);
            if (u <= table.front().first) return table.front().second;
            if (u >= table.back().first) return table.back().second;
            std::size_t hi = 1;
            while (table[hi].first < u) ++hi;
            const auto& [u0, v0] = table[hi - 1];
            const auto& [u1, v1] = table[hi];
            return v0 + (v1 - v0) * (u - u0) / (u1 - u0);
          }};
}

CheckReport harnack_check(const MehlerSystem& sys, double s, double t, const BoundedFn& f,
                          double alpha, const Vec& x, const Vec& y, std::int64_t n,
                          std::uint64_t seed, bool log_mode) {
  if (!(alpha > 1.0)) throw DomainError("harnack_check: alpha must exceed 1");
  if (n < 2) throw DomainError("harnack_check: need n >= 2");
  const GammaOperator gamma = make_gamma(sys, s, t);
  const IdTriplet mu = sys.build_triplet(s, t);
  const Mat u = sys.prop().propagate(s, t);
  const Vec shift_x = u * x;
  const Vec shift_y = u * y;

  // common random numbers: each draw feeds both sides
  struct Acc {
    RunningStats fx, gy;
    bool negative = false;
    void merge(const Acc& o) {
      fx.merge(o.fx);
      gy.merge(o.gy);
      negative = negative || o.negative;
    }
  };
  const bool lm = log_mode;
  auto acc = mc_chunked<Acc>(n, seed, [&](std::int64_t count, Rng& rng, Acc& a) {
    for (std::int64_t i = 0; i < count; ++i) {
      const Vec noise = mu.sample_one(rng);
      const double vx = f.eval(shift_x + noise);
      const double vy = f.eval(shift_y + noise);
      if (lm) {
        if (vx < 1.0 || vy < 1.0) {
          a.negative = true;
          return;
        }
        a.fx.add(std::log(vx));
        a.gy.add(vy);
      } else {
        if (vx < 0.0 || vy < 0.0) {
          a.negative = true;
          return;
        }
        a.fx.add(vx);
        a.gy.add(std::pow(vy, alpha));
      }
    }
  });
  if (acc.negative)
    throw DomainError(lm ? "harnack_check: log mode requires f >= 1"
                         : "harnack_check: f must be nonnegative");

  CheckReport rep;
  if (lm) {
    rep.name = "log_harnack";
    const double gnorm = gamma.op_norm();
    rep.lhs = acc.fx.mean();
    rep.lhs_sigma = acc.fx.std_error();
    const double mean_y = acc.gy.mean();
    if (std::isinf(gnorm) || mean_y <= 0.0) {
      rep.rhs = kInf;
      rep.rhs_sigma = 0.0;
    } else {
      rep.rhs = std::log(mean_y) + 0.5 * gnorm * gnorm * (x - y).squaredNorm();
      rep.rhs_sigma = acc.gy.std_error() / mean_y;
    }
  } else {
    rep.name = "harnack";
    const double g = gamma.apply_norm(x - y);
    const double mx = acc.fx.mean();
    rep.lhs = std::pow(mx, alpha);
    rep.lhs_sigma = mx > 0.0 ? alpha * std::pow(mx, alpha - 1.0) * acc.fx.std_error() : 0.0;
    if (std::isinf(g)) {
      rep.rhs = kInf;
      rep.rhs_sigma = 0.0;
    } else {
      const double factor = std::exp(alpha * g * g / (2.0 * (alpha - 1.0)));
      rep.rhs = factor * acc.gy.mean();
      rep.rhs_sigma = factor * acc.gy.std_error();
    }
  }
  rep.verdict = three_valued_verdict(rep.lhs, rep.rhs, rep.combined_sigma());
  return rep;
}

CheckReport strong_feller_bound(const MehlerSystem& sys, double s, double t, const BoundedFn& f,
                                const Vec& x, const Vec& y, std::int64_t n, std::uint64_t seed) {
  if (n < 2) throw DomainError("strong_feller_bound: need n >= 2");
  const GammaOperator gamma = make_gamma(sys, s, t);
  const IdTriplet mu = sys.build_triplet(s, t);
  const Mat u = sys.prop().propagate(s, t);
  const Vec shift_x = u * x;
  const Vec shift_y = u * y;

  struct Moments {
    std::int64_t n = 0;
    double s1 = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0;
    void add(double v) {
      ++n;
      const double v2 = v * v;
      s1 += v;
      s2 += v2;
      s3 += v2 * v;
      s4 += v2 * v2;
    }
    void merge(const Moments& o) {
      n += o.n;
      s1 += o.s1;
      s2 += o.s2;
      s3 += o.s3;
      s4 += o.s4;
    }
    double mean() const { return s1 / static_cast<double>(n); }
    double variance() const {
      const double m = mean();
      const double v = s2 / static_cast<double>(n) - m * m;
      return v > 0.0 ? v : 0.0;
    }
    double mean_se() const { return std::sqrt(variance() / static_cast<double>(n)); }
    // standard error of the plug-in variance via the central fourth moment
    double variance_se() const {
      const double m = mean();
      const double mu2 = variance();
      const double mu4 = s4 / n - 4.0 * m * s3 / n + 6.0 * m * m * s2 / n - 3.0 * m * m * m * m;
      const double var_of_var = (mu4 - mu2 * mu2) / static_cast<double>(n);
      return var_of_var > 0.0 ? std::sqrt(var_of_var) : 0.0;
    }
  };
  struct Acc {
    Moments mx, my;
    void merge(const Acc& o) {
      mx.merge(o.mx);
      my.merge(o.my);
    }
  };
  auto acc = mc_chunked<Acc>(n, seed, [&](std::int64_t count, Rng& rng, Acc& a) {
    for (std::int64_t i = 0; i < count; ++i) {
      const Vec noise = mu.sample_one(rng);
      a.mx.add(f.eval(shift_x + noise));
      a.my.add(f.eval(shift_y + noise));
    }
  });

  CheckReport rep;
  rep.name = "feller_bound";
  const double diff = acc.mx.mean() - acc.my.mean();
  rep.lhs = diff * diff;
  rep.lhs_sigma = 2.0 * std::abs(diff) *
                  std::sqrt(acc.mx.mean_se() * acc.mx.mean_se() + acc.my.mean_se() * acc.my.mean_se());
  const double g = gamma.apply_norm(x - y);
  if (std::isinf(g)) {
    rep.rhs = kInf;
    rep.rhs_sigma = 0.0;
  } else {
    const bool use_x = acc.mx.variance() <= acc.my.variance();
    const Moments& side = use_x ? acc.mx : acc.my;
    const double factor = std::expm1(g * g);
    rep.rhs = factor * side.variance();
    rep.rhs_sigma = factor * side.variance_se();
  }
  rep.verdict = three_valued_verdict(rep.lhs, rep.rhs, rep.combined_sigma());
  return rep;
}

McEstimate hyperbound_constant(const MehlerSystem& sys, double s, double t,
                               const std::map<double, IdTriplet>& nus, double alpha, double eps,
                               std::int64_t n, std::uint64_t seed) {
  if (!(alpha > 1.0)) throw DomainError("hyperbound_constant: alpha must exceed 1");
  if (!(eps > 0.0)) throw DomainError("hyperbound_constant: eps must be positive");
  const auto it = nus.find(s);
  if (it == nus.end()) throw DomainError("hyperbound_constant: no measure at s");
  const IdTriplet& nu_s = it->second;
  const GammaOperator gamma = make_gamma(sys, s, t);
  const double kappa = alpha / (2.0 * (alpha - 1.0));

  const std::int64_t n_inner = std::max<std::int64_t>(2, std::llround(std::sqrt(double(n))));
  const std::int64_t n_outer = std::max<std::int64_t>(2, n / n_inner);

  Rng outer_rng(split_seed(seed, 0));
  Rng inner_rng(split_seed(seed, 1));
  RunningStats stats;
  bool infinite = false;
  for (std::int64_t i = 0; i < n_outer; ++i) {
    const Vec x = nu_s.sample_one(outer_rng);
    double inner = 0.0;
    for (std::int64_t j = 0; j < n_inner; ++j) {
      const Vec y = nu_s.sample_one(inner_rng);
      const double g = gamma.apply_norm(x - y);
      if (std::isfinite(g)) inner += std::exp(-kappa * g * g);
    }
    inner /= static_cast<double>(n_inner);
    if (inner <= 0.0) {
      infinite = true;
      break;
    }
    stats.add(std::pow(inner, -(1.0 + eps)));
  }
  if (infinite) return {n_outer * n_inner, kInf, kInf};
  auto est = stats.estimate();
  est.n = n_outer * n_inner;
  return est;
}

}  // namespace mehlerlab
