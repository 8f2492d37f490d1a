#include "mehlerlab/mehler_kernel.hpp"

#include <atomic>
#include <cmath>

namespace mehlerlab {

NoiseRate::NoiseRate(int dim, std::function<Vec(double)> a_rate, std::function<Mat(double)> r_rate,
                     std::function<LevyMeasure(double)> m_rate, NoiseTags tags)
    : dim_(dim),
      a_rate_(std::move(a_rate)),
      r_rate_(std::move(r_rate)),
      m_rate_(std::move(m_rate)),
      tags_(tags) {
  if (dim_ < 1) throw DomainError("NoiseRate: dimension must be positive");
  if (!a_rate_ || !r_rate_ || !m_rate_) throw DomainError("NoiseRate: missing component");
  // PSD spot-check; per-call validation only checks shape and finiteness.
  for (double t : {0.0, 0.31}) {
    PsdSqrt check(r_at(t));
    (void)check;
    (void)a_at(t);
    (void)m_at(t);
  }
  if (tags_.period) {
    const double T = *tags_.period;
    if (!(T > 0.0)) throw ConfigError("NoiseRate: period must be positive");
    for (double t : {0.0, 0.25 * T}) {
      if ((a_at(t + T) - a_at(t)).norm() > 1e-12 ||
          (r_at(t + T) - r_at(t)).cwiseAbs().maxCoeff() > 1e-12)
        throw ConfigError("NoiseRate: periodic tag violated");
      const auto m0 = m_at(t).atoms();
      const auto m1 = m_at(t + T).atoms();
      if (m0.size() != m1.size()) throw ConfigError("NoiseRate: periodic tag violated (atoms)");
      for (std::size_t i = 0; i < m0.size(); ++i)
        if ((m0[i].x - m1[i].x).norm() > 1e-12 || std::abs(m0[i].w - m1[i].w) > 1e-12)
          throw ConfigError("NoiseRate: periodic tag violated (atoms)");
    }
  }
}

Vec NoiseRate::a_at(double r) const {
  Vec a = a_rate_(r);
  if (a.size() != dim_) throw ConfigError("NoiseRate: drift rate has wrong dimension");
  if (!is_finite(a)) throw NumericalError("NoiseRate: non-finite drift rate");
  return a;
}

Mat NoiseRate::r_at(double r) const {
  Mat m = r_rate_(r);
  if (m.rows() != dim_ || m.cols() != dim_)
    throw ConfigError("NoiseRate: covariance rate has wrong shape");
  if (!is_finite(m)) throw NumericalError("NoiseRate: non-finite covariance rate");
  return m;
}

LevyMeasure NoiseRate::m_at(double r) const {
  LevyMeasure m = m_rate_(r);
  for (const auto& atom : m.atoms())
    if (atom.x.size() != dim_) throw ConfigError("NoiseRate: atom has wrong dimension");
  return m;
}

MehlerSystem::MehlerSystem(std::shared_ptr<const Propagator> prop, NoiseRate noise,
                           std::size_t atom_cap)
    : prop_(std::move(prop)), noise_(std::move(noise)), atom_cap_(atom_cap) {
  if (!prop_) throw DomainError("MehlerSystem: missing propagator");
  if (prop_->dim() != noise_.dim()) throw ConfigError("MehlerSystem: dimension mismatch");
}

IdTriplet MehlerSystem::build_triplet(double s, double t) const {
  if (t < s) throw DomainError("build_triplet: requires t >= s");
  const int d = dim();
  const double h = quad_step();
  Vec a = Vec::Zero(d);
  Mat big_r = Mat::Zero(d, d);
  std::vector<LevyAtom> atoms;

  walk_nodes_backward(*prop_, s, t, [&](double r, const Mat& u) {
    big_r.noalias() += h * (u * noise_.r_at(r) * u.transpose());
    a.noalias() += h * (u * noise_.a_at(r));
    const LevyMeasure rate_measure = noise_.m_at(r);
    for (const auto& atom : rate_measure.atoms()) {
      const Vec y = u * atom.x;
      if (y.norm() == 0.0) continue;
      a += h * atom.w * (1.0 / (1.0 + y.squaredNorm()) - 1.0 / (1.0 + atom.x.squaredNorm())) * y;
      if (atoms.size() >= atom_cap_)
        throw ConfigError("build_triplet: jump-atom budget exceeded; raise atom cap");
      atoms.push_back({y, h * atom.w});
    }
  });

  return IdTriplet(std::move(a), 0.5 * (big_r + big_r.transpose()), LevyMeasure(std::move(atoms)));
}

double MehlerSystem::flow_defect(double s, double r, double t, const std::vector<Vec>& xis) const {
  if (!(s <= r && r <= t)) throw DomainError("flow_defect: requires s <= r <= t");
  const IdTriplet mu_ts = build_triplet(s, t);
  const IdTriplet mu_tr = build_triplet(r, t);
  const IdTriplet mu_rs = build_triplet(s, r);
  const Mat u_tr_T = prop_->propagate(r, t).transpose();
  double worst = 0.0;
  for (const auto& xi : xis) {
    const Cplx lhs = mu_ts.char_exponent(xi);
    const Cplx rhs = mu_tr.char_exponent(xi) + mu_rs.char_exponent(u_tr_T * xi);
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

McEstimate MehlerSystem::mehler_apply(double s, double t,
                                      const std::function<double(const Vec&)>& f, const Vec& x,
                                      std::int64_t n, std::uint64_t seed) const {
  if (n < 2) throw DomainError("mehler_apply: need n >= 2");
  if (x.size() != dim()) throw DomainError("mehler_apply: state dimension mismatch");
  const IdTriplet mu = build_triplet(s, t);
  const Vec shift = prop_->propagate(s, t) * x;
  std::atomic<bool> bad{false};
  auto stats = mc_chunked<RunningStats>(
      n, seed, [&](std::int64_t count, Rng& rng, RunningStats& acc) {
        for (std::int64_t i = 0; i < count; ++i) {
          const double v = f(shift + mu.sample_one(rng));
          if (!std::isfinite(v)) {
            bad.store(true);
            return;
          }
          acc.add(v);
        }
      });
  if (bad.load()) throw NumericalError("mehler_apply: non-finite function value");
  return stats.estimate();
}

std::pair<IdTriplet, IdTriplet> MehlerSystem::gauss_jump_split(double s, double t) const {
  const IdTriplet mu = build_triplet(s, t);
  IdTriplet gauss(Vec::Zero(dim()), mu.covariance(), LevyMeasure());
  IdTriplet jump(mu.drift(), Mat::Zero(dim(), dim()), mu.levy());
  return {std::move(gauss), std::move(jump)};
}

Cplx MehlerSystem::rate_recovery(double t, const Vec& xi, double dh) const {
  if (!(dh > 0.0)) throw DomainError("rate_recovery: dh must be positive");
  const IdTriplet mu = build_triplet(t - dh, t);
  return mu.char_exponent(xi) / dh;
}

}  // namespace mehlerlab
