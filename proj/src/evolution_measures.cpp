#include "mehlerlab/evolution_measures.hpp"

#include <cmath>
#include <cstdio>

namespace mehlerlab {

namespace {

struct HorizonState {
  Vec a;
  Mat big_r;
  std::vector<LevyAtom> atoms;
  Mat u_accum;  // U(t, s_current)
  double sup_tr = 0.0;
  double sup_jump2 = 0.0;
  double sup_drift = 0.0;
};

}  // namespace

LimitTriplet limit_triplet(const MehlerSystem& sys, double t, const StabilityHint& hint,
                           double tol) {
  if (!(tol > 0.0)) throw DomainError("limit_triplet: tol must be positive");
  if (!(hint.M > 0.0) || !(hint.omega > 0.0))
    throw DomainError("limit_triplet: hint constants must be positive");

  const int d = sys.dim();
  const auto& prop = sys.prop();
  const double h = sys.quad_step();

  // Tails are controlled to tol/8 each so that the evolution-system defect
  // at probe frequencies |xi| <= 4 stays below 10*tol.
  const double target = tol / 8.0;
  const double m2 = hint.M * hint.M;
  const double two_omega = 2.0 * hint.omega;

  HorizonState st;
  st.a = Vec::Zero(d);
  st.big_r = Mat::Zero(d, d);
  st.u_accum = Mat::Identity(d, d);

  const std::int64_t cells_per_block = std::max<std::int64_t>(1, std::llround(1.0 / h));
  const double block = static_cast<double>(cells_per_block) * h;

  double s = t;
  double tail_r = kInf, tail_j = kInf, tail_a = kInf;
  const double horizon_cap = 64.0 / hint.omega + 8.0;
  bool hint_warned = false;

  while (true) {
    const double s_next = s - block;
    // extend the accumulation over [s_next, s); U(t, r) = U(t,s) U(s, r)
    const Mat u_ts = st.u_accum;
    double prev_tr = st.big_r.trace();
    const Mat u_block = walk_nodes_backward(prop, s_next, s, [&](double r, const Mat& u_sr) {
      const Mat u = u_ts * u_sr;
      const Mat r_rate = sys.noise().r_at(r);
      const Vec a_rate = sys.noise().a_at(r);
      st.sup_tr = std::max(st.sup_tr, r_rate.trace());
      double jump2 = 0.0, jump1 = 0.0;
      st.big_r.noalias() += h * (u * r_rate * u.transpose());
      st.a.noalias() += h * (u * a_rate);
      const LevyMeasure rate_measure = sys.noise().m_at(r);
      for (const auto& atom : rate_measure.atoms()) {
        jump2 += atom.w * atom.x.squaredNorm();
        jump1 += atom.w * atom.x.norm();
        const Vec y = u * atom.x;
        if (y.norm() == 0.0) continue;
        st.a += h * atom.w * (1.0 / (1.0 + y.squaredNorm()) - 1.0 / (1.0 + atom.x.squaredNorm())) * y;
        st.atoms.push_back({y, h * atom.w});
      }
      st.sup_jump2 = std::max(st.sup_jump2, jump2);
      st.sup_drift = std::max(st.sup_drift, a_rate.norm() + jump1);
    });
    st.u_accum = u_ts * u_block;
    s = s_next;

    if (st.big_r.trace() < prev_tr - 1e-12 * std::max(1.0, prev_tr))
      throw NumericalError("limit_triplet: covariance trace decreased");

    const double horizon = t - s;
    // the hint is user-asserted; a violated bound is only worth a warning
    if (!hint_warned) {
      const double u_norm = Eigen::JacobiSVD<Mat>(st.u_accum).singularValues()(0);
      const double bound = hint.M * std::exp(-hint.omega * horizon);
      if (u_norm > bound * 1.01) {
        std::fprintf(stderr,
                     "warning: |U(t,s)| = %g exceeds the stability hint M e^{-omega (t-s)} = %g "
                     "at horizon %g\n",
                     u_norm, bound, horizon);
        hint_warned = true;
      }
    }
    tail_r = m2 * st.sup_tr * std::exp(-two_omega * horizon) / two_omega;
    tail_j = m2 * st.sup_jump2 * std::exp(-two_omega * horizon) / two_omega;
    tail_a = hint.M * st.sup_drift * std::exp(-hint.omega * horizon) / hint.omega;

    // divergence guard against a wrong stability hint
    const double tr_cap = 10.0 * (m2 * st.sup_tr / two_omega + st.sup_tr * block);
    if (st.sup_tr > 0.0 && st.big_r.trace() > tr_cap)
      throw StabilityError("limit_triplet: covariance accumulation exceeds hint-implied bound");
    double jump_acc = 0.0;
    for (const auto& atom : st.atoms) jump_acc += atom.w * std::min(1.0, atom.x.squaredNorm());
    const double jump_cap = 10.0 * (m2 * st.sup_jump2 / two_omega + st.sup_jump2 * block);
    if (st.sup_jump2 > 0.0 && jump_acc > jump_cap)
      throw StabilityError("limit_triplet: jump accumulation exceeds hint-implied bound");
    const double drift_cap =
        10.0 * (hint.M * st.sup_drift / hint.omega + st.sup_drift * block + 1.0);
    if (st.sup_drift > 0.0 && st.a.norm() > drift_cap)
      throw StabilityError("limit_triplet: drift accumulation exceeds hint-implied bound");

    if (tail_r <= target && tail_j <= target && tail_a <= target) break;
    if (horizon > horizon_cap)
      throw StabilityError("limit_triplet: horizon cap reached before tails met the tolerance");
  }

  IdTriplet nu(st.a, 0.5 * (st.big_r + st.big_r.transpose()), LevyMeasure(std::move(st.atoms)));
  return {std::move(nu), t - s, tail_r + tail_j};
}

double invariance_defect(const MehlerSystem& sys, const std::map<double, IdTriplet>& nus, double s,
                         double t, const std::vector<Vec>& xis) {
  const auto it_s = nus.find(s);
  const auto it_t = nus.find(t);
  if (it_s == nus.end() || it_t == nus.end())
    throw DomainError("invariance_defect: missing entries in the measure system");
  const IdTriplet mu = sys.build_triplet(s, t);
  const Mat u_T = sys.prop().propagate(s, t).transpose();
  double worst = 0.0;
  for (const auto& xi : xis) {
    const Cplx lhs = mu.char_exponent(xi) + it_s->second.char_exponent(u_T * xi);
    const Cplx rhs = it_t->second.char_exponent(xi);
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

std::map<double, IdTriplet> shifted_system(const MehlerSystem& sys,
                                           const std::map<double, IdTriplet>& nus, const Vec& c,
                                           double anchor) {
  std::map<double, IdTriplet> out;
  for (const auto& [time, nu] : nus) {
    if (time < anchor)
      throw DomainError("shifted_system: system contains times before the anchor");
    const Vec shift = sys.prop().propagate(anchor, time) * c;
    out.emplace(time, convolve(nu, IdTriplet::point_mass(shift)));
  }
  return out;
}

IdTriplet periodic_fixed_point(const MehlerSystem& sys, const StabilityHint& hint, double T,
                               double t0, double tol) {
  if (!(T > 0.0)) throw DomainError("periodic_fixed_point: period must be positive");
  if (!sys.prop().family().tags().period || !sys.noise().tags().period)
    throw DomainError("periodic_fixed_point: system not tagged periodic");

  const LimitTriplet nu0 = limit_triplet(sys, t0, hint, tol);
  const LimitTriplet nu1 = limit_triplet(sys, t0 + T, hint, tol);
  const auto xis = probe_frequencies(sys.dim());
  const double dist = exponent_distance(nu0.nu, nu1.nu, xis);
  if (dist > 10.0 * tol)
    throw NumericalError("periodic_fixed_point: periodicity assertion failed, exponent distance " +
                         std::to_string(dist));

  // geometric contraction of U(t0 + kT, t0) on a probe vector
  Vec x = Vec::Ones(sys.dim());
  x /= x.norm();
  for (int k = 1; k <= 3; ++k) {
    const double len = (sys.prop().propagate(t0, t0 + k * T) * x).norm();
    const double bound = hint.M * std::exp(-hint.omega * k * T);
    if (len > bound * 1.0001)
      throw NumericalError("periodic_fixed_point: contraction assertion failed at k=" +
                           std::to_string(k));
  }
  return nu0.nu;
}

}  // namespace mehlerlab
