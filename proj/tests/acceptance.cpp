// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria run on the deterministic scenario corpus from
// test_support.hpp at base_step 1/256.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "mehlerlab/suite.hpp"
#include "test_support.hpp"

using namespace mehlerlab;
using namespace mltest;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Criterion {
  std::string name;
  std::function<Outcome()> run;
};

double rel(double defect, double scale) { return defect / (1.0 + scale); }

std::vector<double> probe_times(const Scenario& sc) {
  std::vector<double> times;
  const double h = sc.base_step();
  for (int i = 0; i <= 4; ++i) {
    const double raw = sc.window_s() + (sc.window_t() - sc.window_s()) * i / 4.0;
    times.push_back(std::round(raw / h) * h);
  }
  return times;
}

Outcome flow_identity() {
  double worst = 0.0;
  std::string worst_at;
  int idx = 0;
  for (const auto& j : flow_corpus()) {
    const Scenario sc = Scenario::from_json(j);
    auto prop = sc.make_propagator();
    const MehlerSystem sys = sc.make_mehler_system(prop);
    const auto xis = probe_frequencies(sc.dim());
    const auto times = probe_times(sc);
    for (std::size_t a = 0; a < times.size(); ++a)
      for (std::size_t b = a; b < times.size(); ++b)
        for (std::size_t c = b; c < times.size(); ++c) {
          const double defect = sys.flow_defect(times[a], times[b], times[c], xis);
          const IdTriplet mu = sys.build_triplet(times[a], times[c]);
          double psi_max = 0.0;
          for (const auto& xi : xis)
            psi_max = std::max(psi_max, std::abs(mu.char_exponent(xi)));
          const double r = rel(defect, psi_max);
          if (r > worst) {
            worst = r;
            worst_at = "scenario " + std::to_string(idx);
          }
        }
    ++idx;
  }
  Outcome out;
  out.pass = worst <= 1e-8;
  std::ostringstream ss;
  ss << idx << " scenarios, worst relative defect " << worst << " (" << worst_at << ")";
  out.detail = ss.str();
  return out;
}

Outcome triplet_identities() {
  double worst_r = 0.0, worst_a = 0.0;
  for (const auto& j : flow_corpus()) {
    const Scenario sc = Scenario::from_json(j);
    auto prop = sc.make_propagator();
    const MehlerSystem sys = sc.make_mehler_system(prop);
    const auto times = probe_times(sc);
    const double s = times.front(), r = times[2], t = times.back();
    const IdTriplet mu_ts = sys.build_triplet(s, t);
    const IdTriplet mu_tr = sys.build_triplet(r, t);
    const IdTriplet mu_rs = sys.build_triplet(s, r);
    const Mat u = prop->propagate(r, t);

    const Mat r_rhs = mu_tr.covariance() + u * mu_rs.covariance() * u.transpose();
    worst_r = std::max(worst_r, (mu_ts.covariance() - r_rhs).norm() /
                                    (1.0 + mu_ts.covariance().norm()));

    Vec a_rhs = mu_tr.drift() + u * mu_rs.drift();
    for (const auto& atom : mu_rs.levy().atoms()) {
      const Vec y = u * atom.x;
      if (y.norm() == 0.0) continue;
      a_rhs += atom.w * (1.0 / (1.0 + y.squaredNorm()) - 1.0 / (1.0 + atom.x.squaredNorm())) * y;
    }
    worst_a = std::max(worst_a, (mu_ts.drift() - a_rhs).norm() / (1.0 + mu_ts.drift().norm()));
  }
  Outcome out;
  out.pass = worst_r <= 1e-8 && worst_a <= 1e-8;
  std::ostringstream ss;
  ss << "R defect " << worst_r << ", a defect " << worst_a;
  out.detail = ss.str();
  return out;
}

Outcome scalar_closed_forms() {
  const double r10 = (1.0 - std::exp(-2.0)) / 2.0;
  const MehlerSystem sys = scalar_gauss_system();
  std::ostringstream ss;
  bool pass = true;

  const double r_built = sys.build_triplet(0.0, 1.0).covariance()(0, 0);
  pass &= std::abs(r_built - r10) <= 1e-3 * r10;

  const auto lim = limit_triplet(sys, 0.0, StabilityHint{1.0, 1.0}, 1e-4);
  pass &= std::abs(lim.nu.covariance()(0, 0) - 0.5) <= 1e-3 * 0.5;

  ControlSystem csys(sys.prop_ptr(), [](double) { return Mat::Identity(1, 1); });
  const double me = csys.min_energy(0.0, 1.0, Vec::Ones(1));
  const double me_expected = std::exp(-2.0) / r10;
  pass &= std::abs(me - me_expected) <= 1e-3 * me_expected;

  const double g = gamma_apply(sys, 0.0, 1.0, Vec::Ones(1));
  const double g_expected = std::exp(-1.0) / std::sqrt(r10);
  pass &= std::abs(g - g_expected) <= 1e-3 * g_expected;

  ss << "R_{1,0}=" << r_built << " (vs " << r10 << "), R_inf=" << lim.nu.covariance()(0, 0)
     << ", E_min=" << me << " (vs " << me_expected << "), |Gamma|=" << g << " (vs " << g_expected
     << ")";
  return {pass, ss.str()};
}

Outcome min_energy_oracle() {
  double worst_gap = 0.0;
  int count = 0;
  bool pass = true;
  for (const auto& j : control_corpus()) {
    const Scenario sc = Scenario::from_json(j);
    auto prop = sc.make_propagator();
    const ControlSystem csys = sc.make_control_system(prop);
    Vec x = Vec::Ones(sc.dim());
    x /= x.norm();
    const double me = csys.min_energy(0.0, 1.0, x);
    const double oracle = csys.brute_force_min_energy(0.0, 1.0, x, 256);
    if (!std::isfinite(me) || !std::isfinite(oracle)) {
      pass = false;
      continue;
    }
    const double gap = std::abs(me - oracle) / (1.0 + me);
    worst_gap = std::max(worst_gap, gap);
    pass &= gap <= 1e-3;
    ++count;
  }
  // uncontrollable scenarios must be infinite on both routes
  const Scenario deg = Scenario::from_json(uncontrollable_scenario());
  const ControlSystem dsys = deg.make_control_system();
  Vec bad(2);
  bad << 0.0, 1.0;
  const bool both_inf = std::isinf(dsys.min_energy(0.0, 1.0, bad)) &&
                        std::isinf(dsys.brute_force_min_energy(0.0, 1.0, bad, 256));
  pass &= both_inf;

  std::ostringstream ss;
  ss << count << " controllable scenarios, worst relative gap " << worst_gap
     << (both_inf ? "; uncontrollable -> inf on both routes" : "; INF CHECK FAILED");
  return {pass, ss.str()};
}

Outcome evolution_invariance() {
  const double tol = 1e-6;
  double worst = 0.0;
  bool pass = true;
  int used = 0;
  const auto corpus = flow_corpus();
  for (std::size_t i = 0; i < corpus.size() && used < 10; ++i) {
    const Scenario sc = Scenario::from_json(corpus[i]);
    auto prop = sc.make_propagator();
    const MehlerSystem sys = sc.make_mehler_system(prop);
    const auto xis = probe_frequencies(sc.dim());
    std::map<double, IdTriplet> nus;
    nus.emplace(0.0, limit_triplet(sys, 0.0, sc.hint(), tol).nu);
    nus.emplace(1.0, limit_triplet(sys, 1.0, sc.hint(), tol).nu);
    const double defect = invariance_defect(sys, nus, 0.0, 1.0, xis);
    worst = std::max(worst, defect);
    pass &= defect <= 10.0 * tol;
    ++used;
  }

  // negative control: covariance 1.0 instead of 1/2 at t
  const MehlerSystem sys = scalar_gauss_system();
  std::map<double, IdTriplet> nus;
  nus.emplace(0.0, limit_triplet(sys, 0.0, StabilityHint{1.0, 1.0}, tol).nu);
  nus.emplace(1.0, IdTriplet(Vec::Zero(1), Mat::Constant(1, 1, 1.0), LevyMeasure()));
  const double neg = invariance_defect(sys, nus, 0.0, 1.0, probe_frequencies(1));
  pass &= neg >= 0.1;

  std::ostringstream ss;
  ss << used << " stable scenarios, worst defect " << worst << " (budget " << 10.0 * tol
     << "); negative control defect " << neg;
  return {pass, ss.str()};
}

Outcome periodic_fixed_points() {
  const double tol = 1e-6;
  bool pass = true;
  double worst = 0.0;
  int used = 0;
  for (const auto& j : flow_corpus()) {
    if (used >= 3) break;
    const Scenario sc = Scenario::from_json(j);
    if (!sc.tags().period) continue;
    const double T = *sc.tags().period;
    auto prop = sc.make_propagator();
    const MehlerSystem sys = sc.make_mehler_system(prop);
    try {
      const IdTriplet nu0 = periodic_fixed_point(sys, sc.hint(), T, 0.0, tol);
      const IdTriplet nu1 = limit_triplet(sys, T, sc.hint(), tol).nu;
      const double dist = exponent_distance(nu0, nu1, probe_frequencies(sc.dim()));
      worst = std::max(worst, dist);
      pass &= dist <= 10.0 * tol;
    } catch (const std::exception& e) {
      pass = false;
    }
    ++used;
  }
  std::ostringstream ss;
  ss << used << " periodic scenarios, worst exponent distance " << worst;
  return {pass, ss.str()};
}

Outcome harnack_sweep() {
  const std::int64_t n = 100000;
  int fails = 0, indeterminate = 0, total = 0;
  const auto corpus = flow_corpus();
  const int systems = std::min<int>(20, static_cast<int>(corpus.size()));
  for (int i = 0; i < systems; ++i) {
    const Scenario sc = Scenario::from_json(corpus[i]);
    auto prop = sc.make_propagator();
    const MehlerSystem sys = sc.make_mehler_system(prop);
    const int d = sc.dim();
    Vec dir = Vec::Ones(d);
    dir /= dir.norm();
    const Vec zero = Vec::Zero(d);
    const std::uint64_t base_seed = split_seed(0xACCE97, i);

    auto tally = [&](const CheckReport& rep) {
      ++total;
      if (rep.verdict == Verdict::Fail) ++fails;
      if (rep.verdict == Verdict::Indeterminate) ++indeterminate;
    };

    tally(harnack_check(sys, 0.0, 1.0, make_test_function("tanh_shift", dir), 2.0, dir, zero, n,
                        split_seed(base_seed, 1)));
    tally(harnack_check(sys, 0.0, 1.0, make_test_function("indicator", dir), 4.0, dir, zero, n,
                        split_seed(base_seed, 2)));
    tally(harnack_check(sys, 0.0, 1.0, make_test_function("cosine_shift", dir), 1.5,
                        Vec(0.5 * dir), zero, n, split_seed(base_seed, 3)));
    const BoundedFn base_f = make_test_function("tanh_shift", dir);
    const BoundedFn f_log{"tanh_shift+1",
                          [base_f](const Vec& v) { return 1.0 + base_f.eval(v); }};
    tally(harnack_check(sys, 0.0, 1.0, f_log, 2.0, dir, zero, n, split_seed(base_seed, 4), true));
    tally(strong_feller_bound(sys, 0.0, 1.0, make_test_function("tanh", dir), dir, zero, n,
                              split_seed(base_seed, 5)));
  }
  std::ostringstream ss;
  ss << total << " checks: " << fails << " FAIL, " << indeterminate << " INDETERMINATE";
  return {fails == 0 && indeterminate * 10 <= total, ss.str()};
}

Outcome girsanov_suite() {
  bool pass = true;
  std::ostringstream ss;
  const std::int64_t n = 100000;
  const auto corpus = semilinear_corpus();

  // martingale normalization on all five scenarios
  double worst_dev = 0.0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Scenario sc = Scenario::from_json(corpus[i]);
    auto prop = sc.make_propagator();
    const SemilinearSystem ssys = sc.make_semilinear_system(prop);
    const double s = sc.window_s(), t = sc.window_t();
    const std::int64_t cells = prop->grid_index(t) - prop->grid_index(s);
    const int steps = static_cast<int>(std::min<std::int64_t>(64, cells));
    Vec x = Vec::Ones(sc.dim());
    const auto est = ssys.semigroup_apply(s, t, [](const Vec&) { return 1.0; }, x, n, steps,
                                          split_seed(0x6175, i));
    const double dev = std::abs(est.estimate.mean - 1.0) / est.estimate.std_error();
    worst_dev = std::max(worst_dev, dev);
    pass &= dev <= 5.0;
  }
  ss << "E[M]=1 worst |dev| " << worst_dev << " SE";

  // Euler-Maruyama oracle on the three oracle drifts
  int overlaps = 0;
  for (int i = 0; i < 3; ++i) {
    const Scenario sc = Scenario::from_json(corpus[i]);
    auto prop = sc.make_propagator();
    const SemilinearSystem ssys = sc.make_semilinear_system(prop);
    auto f = [](const Vec& y) { return std::cos(y.sum()); };
    const auto via = ssys.semigroup_apply(0.0, 1.0, f, Vec::Ones(sc.dim()), n, 256,
                                          split_seed(0xE301, i));
    const auto oracle = euler_maruyama_oracle(
        OperatorFamily(sc.dim(),
                       make_matrix_family(sc.raw().at("generator"), sc.dim(), "generator")),
        ssys.diffusion_sqrt().sqrt(), ssys.drift(), f, 0.0, 1.0, Vec::Ones(sc.dim()), n, 1024,
        split_seed(0xE302, i));
    const bool overlap = std::abs(via.estimate.mean - oracle.mean) <=
                         via.estimate.half_width + oracle.half_width;
    if (overlap) ++overlaps;
    pass &= overlap;
  }
  ss << "; oracle overlaps " << overlaps << "/3";

  // moment bounds on every scenario within its admissible window
  int moment_pass = 0, moment_total = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Scenario sc = Scenario::from_json(corpus[i]);
    auto prop = sc.make_propagator();
    const SemilinearSystem ssys = sc.make_semilinear_system(prop);
    const double s = sc.window_s(), t = sc.window_t();
    const std::int64_t cells = prop->grid_index(t) - prop->grid_index(s);
    const int steps = static_cast<int>(std::min<std::int64_t>(64, cells));
    ++moment_total;
    const auto rep = ssys.weight_moment_check(s, t, Vec::Ones(sc.dim()), 2.0, 1.0, n, steps,
                                              split_seed(0x3035, i));
    if (rep.verdict == Verdict::Pass) ++moment_pass;
  }
  pass &= moment_pass == moment_total;
  ss << "; moment bounds " << moment_pass << "/" << moment_total;

  // semilinear Harnack on the k2 = 0 scenarios
  int harnack_pass = 0, harnack_total = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const Scenario sc = Scenario::from_json(corpus[i]);
    auto prop = sc.make_propagator();
    const SemilinearSystem ssys = sc.make_semilinear_system(prop);
    Vec dir = Vec::Ones(sc.dim());
    dir /= dir.norm();
    const BoundedFn f = make_test_function("tanh_shift", dir);
    ++harnack_total;
    const auto rep = ssys.harnack_semilinear_check(0.0, 1.0, f, 4.0, 1.42, 1.42, dir,
                                                   Vec::Zero(sc.dim()), n, 64,
                                                   split_seed(0x44, i));
    if (rep.verdict == Verdict::Pass || rep.verdict == Verdict::Vacuous) ++harnack_pass;
  }
  pass &= harnack_pass == harnack_total;
  ss << "; harnack " << harnack_pass << "/" << harnack_total;
  return {pass, ss.str()};
}

Outcome sampler_fidelity() {
  const std::int64_t n = 100000;
  const double budget = 4.0 / std::sqrt(static_cast<double>(n));
  double worst = 0.0;
  int idx = 0;
  bool pass = true;
  for (const auto& j : flow_corpus()) {
    const Scenario sc = Scenario::from_json(j);
    auto prop = sc.make_propagator();
    const MehlerSystem sys = sc.make_mehler_system(prop);
    const IdTriplet mu = sys.build_triplet(0.0, 1.0);
    const auto xis = probe_frequencies(sc.dim());
    std::vector<Cplx> acc(xis.size(), Cplx(0, 0));
    Rng rng(split_seed(0xECF, idx));
    for (std::int64_t i = 0; i < n; ++i) {
      const Vec draw = mu.sample_one(rng);
      for (std::size_t k = 0; k < xis.size(); ++k)
        acc[k] += std::exp(Cplx(0.0, xis[k].dot(draw)));
    }
    for (std::size_t k = 0; k < xis.size(); ++k) {
      const double dev = std::abs(acc[k] / double(n) - std::exp(-mu.char_exponent(xis[k])));
      worst = std::max(worst, dev);
      pass &= dev <= budget;
    }
    ++idx;
  }
  std::ostringstream ss;
  ss << idx << " corpus triplets, worst ECF deviation " << worst << " (budget " << budget << ")";
  return {pass, ss.str()};
}

Outcome determinism() {
  auto j = flow_corpus()[2];  // scalar mixed
  j["control"] = {{"C", {{"kind", "constant"}, {"matrix", {{1.0}}}}}};
  j["semilinear"] = {{"R", {{1.0}}},
                     {"drift", {{"kind", "tanh"}, {"scale", -0.5}}},
                     {"k1", 0.25},
                     {"k2", 0.0}};
  const Scenario sc = Scenario::from_json(j);
  auto render = [&]() {
    const Report rep = run_suite(sc, "all", 12345, 4000);
    std::ostringstream json_out, csv_out;
    write_report_json(rep, json_out);
    write_report_csv(rep, csv_out);
    return json_out.str() + csv_out.str();
  };
  const std::string a = render();
  const std::string b = render();
  std::ostringstream ss;
  ss << "two runs, " << a.size() << " bytes each, " << (a == b ? "identical" : "DIFFER");
  return {a == b, ss.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<Criterion, double>> criteria = {
      {{"flow identity on the corpus (rel defect <= 1e-8)", flow_identity}, 60.0},
      {{"triplet additivity identities (rel defect <= 1e-8)", triplet_identities}, 60.0},
      {{"scalar closed forms within 1e-3", scalar_closed_forms}, 60.0},
      {{"minimal-energy oracle agreement (256 nodes)", min_energy_oracle}, 30.0},
      {{"evolution-measure invariance (tol 1e-6)", evolution_invariance}, 120.0},
      {{"periodic fixed points", periodic_fixed_points}, 120.0},
      {{"harnack sweep 20 systems x 5 configs at n=1e5", harnack_sweep}, 300.0},
      {{"girsanov normalization, oracle, moments, harnack", girsanov_suite}, 300.0},
      {{"sampler fidelity (ECF within 4/sqrt(n))", sampler_fidelity}, 120.0},
      {{"byte-identical reports under a fixed seed", determinism}, 120.0},
  };

  int failures = 0;
  int number = 1;
  for (const auto& [criterion, budget] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criterion.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = secs <= budget;
    const bool ok = out.pass && in_budget;
    if (!ok) ++failures;
    std::printf("[%s] %2d. %s: %s (%.1f s%s)\n", ok ? "PASS" : "FAIL", number, criterion.name.c_str(),
                out.detail.c_str(), secs, in_budget ? "" : ", OVER BUDGET");
    std::fflush(stdout);
    ++number;
  }
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all %zu criteria passed\n", criteria.size());
  return 0;
}
