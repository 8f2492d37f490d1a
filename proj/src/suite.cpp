#include "mehlerlab/suite.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "mehlerlab/evolution_measures.hpp"
#include "mehlerlab/harnack_feller.hpp"

namespace mehlerlab {

namespace {

std::uint64_t check_seed(std::uint64_t master, const std::string& check) {
  return split_seed(master, fnv1a64(check));
}

CheckRecord pass_fail(const std::string& check, double s, double t, const std::string& param,
                      double value, double threshold) {
  CheckRecord rec{check, s, t, param, value, 0.0, threshold,
                  value <= threshold ? "PASS" : "FAIL"};
  return rec;
}

CheckRecord from_check_report(const CheckReport& rep, double s, double t,
                              const std::string& param) {
  const double sigma = rep.combined_sigma();
  return {rep.name,          s, t, param, rep.margin(), rep.margin() - 3.0 * sigma,
          rep.margin() + 3.0 * sigma, verdict_name(rep.verdict)};
}

Vec unit_dir(int dim) {
  Vec v = Vec::Ones(dim);
  return v / v.norm();
}

void run_flow_suite(const Scenario& sc, std::uint64_t seed, std::int64_t n,
                    std::vector<CheckRecord>& out) {
  auto prop = sc.make_propagator();
  const MehlerSystem sys = sc.make_mehler_system(prop);
  const double s0 = sc.window_s();
  const double t0 = sc.window_t();
  const double h = sc.base_step();
  // coarse split points of the window snapped to the grid
  std::vector<double> times;
  for (int i = 0; i <= 4; ++i) {
    const double raw = s0 + (t0 - s0) * i / 4.0;
    times.push_back(std::round(raw / h) * h);
  }
  const auto xis = probe_frequencies(sc.dim());

  double worst_flow = 0.0, worst_scale = 1.0;
  for (std::size_t a = 0; a < times.size(); ++a)
    for (std::size_t b = a; b < times.size(); ++b)
      for (std::size_t c = b; c < times.size(); ++c) {
        const double defect = sys.flow_defect(times[a], times[b], times[c], xis);
        const IdTriplet mu = sys.build_triplet(times[a], times[c]);
        double psi_max = 0.0;
        for (const auto& xi : xis) psi_max = std::max(psi_max, std::abs(mu.char_exponent(xi)));
        if (defect / (1.0 + psi_max) > worst_flow / worst_scale) {
          worst_flow = defect;
          worst_scale = 1.0 + psi_max;
        }
      }
  out.push_back(pass_fail("flow_defect", s0, t0, "rel", worst_flow / worst_scale, 1e-8));

  // triplet additivity at the middle split
  const double mid = times[2];
  const IdTriplet mu_ts = sys.build_triplet(s0, t0);
  const IdTriplet mu_tr = sys.build_triplet(mid, t0);
  const IdTriplet mu_rs = sys.build_triplet(s0, mid);
  const Mat u = prop->propagate(mid, t0);
  const Mat r_rhs = mu_tr.covariance() + u * mu_rs.covariance() * u.transpose();
  const double r_defect = (mu_ts.covariance() - r_rhs).norm() /
                          (1.0 + mu_ts.covariance().norm());
  out.push_back(pass_fail("r_additivity", s0, t0, "rel", r_defect, 1e-8));

  Vec a_rhs = mu_tr.drift() + u * mu_rs.drift();
  for (const auto& atom : mu_rs.levy().atoms()) {
    const Vec y = u * atom.x;
    if (y.norm() == 0.0) continue;
    a_rhs += atom.w * (1.0 / (1.0 + y.squaredNorm()) - 1.0 / (1.0 + atom.x.squaredNorm())) * y;
  }
  const double a_defect = (mu_ts.drift() - a_rhs).norm() / (1.0 + mu_ts.drift().norm());
  out.push_back(pass_fail("a_additivity", s0, t0, "rel", a_defect, 1e-8));

  const double cocycle = prop->cocycle_defect(s0, mid, t0) /
                         (1.0 + prop->propagate(s0, t0).norm());
  out.push_back(pass_fail("cocycle_defect", s0, t0, "rel", cocycle, 1e-8));

  // empirical characteristic function of the sampler against exp(-psi)
  Rng rng(check_seed(seed, "sampler_ecf"));
  std::vector<Cplx> acc(xis.size(), Cplx(0.0, 0.0));
  for (std::int64_t i = 0; i < n; ++i) {
    const Vec draw = mu_ts.sample_one(rng);
    for (std::size_t k = 0; k < xis.size(); ++k)
      acc[k] += std::exp(Cplx(0.0, xis[k].dot(draw)));
  }
  double worst_ecf = 0.0;
  for (std::size_t k = 0; k < xis.size(); ++k) {
    const Cplx emp = acc[k] / static_cast<double>(n);
    worst_ecf = std::max(worst_ecf, std::abs(emp - std::exp(-mu_ts.char_exponent(xis[k]))));
  }
  out.push_back(pass_fail("sampler_ecf", s0, t0, "n=" + std::to_string(n), worst_ecf,
                          4.0 / std::sqrt(static_cast<double>(n))));
}

void run_evolution_suite(const Scenario& sc, std::uint64_t seed, double tol,
                         std::vector<CheckRecord>& out) {
  (void)seed;
  auto prop = sc.make_propagator();
  const MehlerSystem sys = sc.make_mehler_system(prop);
  const double s0 = sc.window_s();
  const double t0 = sc.window_t();
  const auto xis = probe_frequencies(sc.dim());

  const LimitTriplet lim_s = limit_triplet(sys, s0, sc.hint(), tol);
  const LimitTriplet lim_t = limit_triplet(sys, t0, sc.hint(), tol);
  out.push_back(pass_fail("ev_tail_bound", s0, t0, "horizon=" + format_double(lim_t.horizon),
                          lim_t.tail_bound, tol));

  std::map<double, IdTriplet> nus;
  nus.emplace(s0, lim_s.nu);
  nus.emplace(t0, lim_t.nu);
  const double defect = invariance_defect(sys, nus, s0, t0, xis);
  out.push_back(pass_fail("ev_invariance", s0, t0, "tol=" + format_double(tol), defect,
                          10.0 * tol));

  const Vec c = unit_dir(sc.dim());
  const auto shifted = shifted_system(sys, nus, c, s0);
  const double shifted_defect = invariance_defect(sys, shifted, s0, t0, xis);
  out.push_back(pass_fail("ev_shifted_closure", s0, t0, "c=diag", shifted_defect,
                          defect + 1e-10));

  if (sc.tags().period) {
    const double T = *sc.tags().period;
    try {
      const IdTriplet nu_fixed = periodic_fixed_point(sys, sc.hint(), T, s0, tol);
      const LimitTriplet lim_shift = limit_triplet(sys, s0 + T, sc.hint(), tol);
      const double dist = exponent_distance(nu_fixed, lim_shift.nu, xis);
      out.push_back(pass_fail("ev_periodic", s0, s0 + T, "T=" + format_double(T), dist,
                              10.0 * tol));
    } catch (const NumericalError&) {
      out.push_back({"ev_periodic", s0, s0 + *sc.tags().period, "T", kInf, 0.0, 10.0 * tol,
                     "FAIL"});
    }
  }
}

void run_harnack_suite(const Scenario& sc, std::uint64_t seed, std::int64_t n,
                       std::vector<CheckRecord>& out) {
  auto prop = sc.make_propagator();
  const MehlerSystem sys = sc.make_mehler_system(prop);
  const double s0 = sc.window_s();
  const double t0 = sc.window_t();
  const int d = sc.dim();
  const Vec dir = unit_dir(d);
  Vec x = dir, y = Vec::Zero(d);

  const double g = gamma_apply(sys, s0, t0, x - y);
  out.push_back({"gamma_norm", s0, t0, "|x-y|=1", g, g, g, "INFO"});

  const BoundedFn f_tanh_shift = make_test_function("tanh_shift", dir);
  const BoundedFn f_indicator = make_test_function("indicator", dir);
  const BoundedFn f_tanh = make_test_function("tanh", dir);

  auto h1 = harnack_check(sys, s0, t0, f_tanh_shift, 2.0, x, y, n, check_seed(seed, "harnack_a2"));
  out.push_back(from_check_report(h1, s0, t0, "alpha=2,f=tanh_shift"));
  auto h2 = harnack_check(sys, s0, t0, f_indicator, 4.0, x, y, n, check_seed(seed, "harnack_a4"));
  out.push_back(from_check_report(h2, s0, t0, "alpha=4,f=indicator"));

  BoundedFn f_log{"tanh_shift+1", [&f_tanh_shift](const Vec& v) {
                    return 1.0 + f_tanh_shift.eval(v);
                  }};
  auto h3 = harnack_check(sys, s0, t0, f_log, 2.0, x, y, n, check_seed(seed, "log_harnack"), true);
  out.push_back(from_check_report(h3, s0, t0, "f=tanh_shift+1"));

  auto fb = strong_feller_bound(sys, s0, t0, f_tanh, x, y, n, check_seed(seed, "feller"));
  out.push_back(from_check_report(fb, s0, t0, "f=tanh"));
}

void run_control_suite(const Scenario& sc, std::uint64_t seed, std::vector<CheckRecord>& out) {
  (void)seed;
  if (!sc.has_control()) {
    out.push_back({"control_cert", sc.window_s(), sc.window_t(), "", 0, 0, 0, "SKIP"});
    return;
  }
  auto prop = sc.make_propagator();
  const ControlSystem csys = sc.make_control_system(prop);
  const double s0 = sc.window_s();
  const double t0 = sc.window_t();
  const Vec x = unit_dir(sc.dim());

  const double me = csys.min_energy(s0, t0, x);
  const bool in_range = std::isfinite(me);
  out.push_back({"control_cert", s0, t0, std::string("in_range=") + (in_range ? "1" : "0"), me,
                 me, me, "PASS"});

  const std::int64_t cells = prop->grid_index(t0) - prop->grid_index(s0);
  int nodes = 256;
  while (nodes > 1 && cells % nodes != 0) nodes /= 2;
  const double oracle = csys.brute_force_min_energy(s0, t0, x, nodes);
  double gap;
  if (std::isinf(me) && std::isinf(oracle)) {
    gap = 0.0;
  } else if (std::isinf(me) != std::isinf(oracle)) {
    gap = kInf;
  } else {
    gap = std::abs(me - oracle);
  }
  out.push_back(pass_fail("control_oracle", s0, t0, "nodes=" + std::to_string(nodes), gap,
                          1e-3 * (1.0 + (std::isfinite(me) ? me : 0.0))));

  try {
    const auto cert = csys.synthesize_control(s0, t0, x, make_weight("constant"));
    const double excess = cert.energy - (std::isfinite(me) ? me : 0.0);
    out.push_back(pass_fail("control_synthesis", s0, t0, "weight=constant",
                            std::max(-excess, cert.transfer_residual), 1e-6 * (1.0 + x.norm())));
  } catch (const NumericalError&) {
    out.push_back({"control_synthesis", s0, t0, "weight=constant", kInf, 0, 0, "FAIL"});
  } catch (const DomainError&) {
    out.push_back({"control_synthesis", s0, t0, "singular C", 0, 0, 0, "SKIP"});
  }
}

void run_semilinear_suite(const Scenario& sc, std::uint64_t seed, std::int64_t n,
                          std::vector<CheckRecord>& out) {
  if (!sc.has_semilinear()) {
    out.push_back({"girsanov_mean", sc.window_s(), sc.window_t(), "", 0, 0, 0, "SKIP"});
    return;
  }
  auto prop = sc.make_propagator();
  const SemilinearSystem ssys = sc.make_semilinear_system(prop);
  const double s0 = sc.window_s();
  const double t0 = sc.window_t();
  const std::int64_t cells = prop->grid_index(t0) - prop->grid_index(s0);
  int steps = 64;
  while (steps > 1 && cells % steps != 0) steps /= 2;
  const Vec x = unit_dir(sc.dim());

  // martingale normalization E[M] = 1
  auto one = [](const Vec&) { return 1.0; };
  const auto est = ssys.semigroup_apply(s0, t0, one, x, n, steps, check_seed(seed, "girsanov_mean"));
  const double se = est.estimate.std_error();
  CheckRecord mean_rec{"girsanov_mean",
                       s0,
                       t0,
                       "steps=" + std::to_string(steps),
                       est.estimate.mean,
                       est.estimate.mean - 5.0 * se,
                       est.estimate.mean + 5.0 * se,
                       std::abs(est.estimate.mean - 1.0) <= 5.0 * se ? "PASS" : "FAIL"};
  out.push_back(mean_rec);

  try {
    const auto mom = ssys.weight_moment_check(s0, t0, x, 2.0, 1.0, n, steps,
                                              check_seed(seed, "weight_moments"));
    out.push_back({"weight_moments", s0, t0, "p=2,delta=1", mom.moment_p.mean,
                   mom.moment_p.mean - mom.moment_p.half_width,
                   mom.bound_p, verdict_name(mom.verdict)});
  } catch (const DomainError&) {
    out.push_back({"weight_moments", s0, t0, "window", 0, 0, 0, "SKIP"});
  }

  try {
    const BoundedFn f = make_test_function("tanh_shift", unit_dir(sc.dim()));
    const auto rep = ssys.harnack_semilinear_check(s0, t0, f, 4.0, 1.4, 1.4, x, Vec::Zero(sc.dim()),
                                                   n, steps, check_seed(seed, "harnack_semilinear"));
    out.push_back(from_check_report(rep, s0, t0, "alpha=4,p=q=1.4"));
  } catch (const DomainError&) {
    out.push_back({"harnack_semilinear", s0, t0, "window", 0, 0, 0, "SKIP"});
  }
}

}  // namespace

bool Report::has_fail() const {
  for (const auto& rec : records)
    if (rec.verdict == "FAIL") return true;
  return false;
}

Report run_suite(const Scenario& scenario, const std::string& suite, std::uint64_t seed,
                 std::int64_t n, double tol) {
  Report report;
  report.command = "suite " + suite;
  report.scenario_hash = scenario.hash();
  report.seed = seed;

  auto section = [&](const std::string& name, const std::function<void()>& body) {
    try {
      body();
    } catch (const ConfigError& e) {
      throw ConfigError("suite section '" + name + "': " + e.what());
    } catch (const std::exception& e) {
      throw NumericalError("suite section '" + name + "': " + e.what());
    }
  };

  const bool all = suite == "all";
  if (suite == "flow" || all)
    section("flow", [&] { run_flow_suite(scenario, seed, n, report.records); });
  else if (suite == "evolution")
    section("evolution", [&] { run_evolution_suite(scenario, seed, tol, report.records); });
  else if (suite == "harnack")
    section("harnack", [&] { run_harnack_suite(scenario, seed, n, report.records); });
  else if (suite == "control")
    section("control", [&] { run_control_suite(scenario, seed, report.records); });
  else if (suite == "semilinear")
    section("semilinear", [&] { run_semilinear_suite(scenario, seed, n, report.records); });
  else if (!all)
    throw ConfigError("unknown suite: " + suite);
  if (all) {
    section("evolution", [&] { run_evolution_suite(scenario, seed, tol, report.records); });
    section("harnack", [&] { run_harnack_suite(scenario, seed, n, report.records); });
    section("control", [&] { run_control_suite(scenario, seed, report.records); });
    section("semilinear", [&] { run_semilinear_suite(scenario, seed, n, report.records); });
  }
  return report;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

void write_report_json(const Report& report, std::ostream& out) {
  nlohmann::ordered_json j;
  j["command"] = report.command;
  j["scenario_hash"] = report.scenario_hash;
  j["seed"] = report.seed;
  auto checks = nlohmann::ordered_json::array();
  for (const auto& rec : report.records) {
    nlohmann::ordered_json r;
    r["check"] = rec.check;
    r["s"] = format_double(rec.s);
    r["t"] = format_double(rec.t);
    r["param"] = rec.param;
    r["value"] = format_double(rec.value);
    r["ci_low"] = format_double(rec.ci_low);
    r["ci_high"] = format_double(rec.ci_high);
    r["verdict"] = rec.verdict;
    checks.push_back(r);
  }
  j["checks"] = checks;
  out << j.dump(2) << "\n";
}

void write_report_csv(const Report& report, std::ostream& out) {
  out << "check,s,t,param,value,ci_low,ci_high,verdict\n";
  for (const auto& rec : report.records) {
    out << rec.check << ',' << format_double(rec.s) << ',' << format_double(rec.t) << ','
        << '"' << rec.param << '"' << ',' << format_double(rec.value) << ','
        << format_double(rec.ci_low) << ',' << format_double(rec.ci_high) << ',' << rec.verdict
        << "\n";
  }
}

int report_exit_code(const Report& report) { return report.has_fail() ? 2 : 0; }

}  // namespace mehlerlab
