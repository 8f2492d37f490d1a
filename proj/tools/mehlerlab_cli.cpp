#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mehlerlab/evolution_measures.hpp"
#include "mehlerlab/harnack_feller.hpp"
#include "mehlerlab/suite.hpp"

namespace {

using namespace mehlerlab;

Vec parse_vec(const std::string& csv, int dim) {
  std::vector<double> vals;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) vals.push_back(std::stod(item));
  if (static_cast<int>(vals.size()) != dim)
    throw ConfigError("vector '" + csv + "' does not match scenario dimension " +
                      std::to_string(dim));
  return Eigen::Map<const Vec>(vals.data(), dim);
}

void emit(const nlohmann::ordered_json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream out(out_path);
    if (!out) throw ConfigError("cannot write " + out_path);
    out << j.dump(2) << "\n";
  }
}

nlohmann::ordered_json check_report_json(const CheckReport& rep) {
  nlohmann::ordered_json j;
  j["check"] = rep.name;
  j["lhs"] = format_double(rep.lhs);
  j["rhs"] = format_double(rep.rhs);
  j["lhs_sigma"] = format_double(rep.lhs_sigma);
  j["rhs_sigma"] = format_double(rep.rhs_sigma);
  j["margin"] = format_double(rep.margin());
  j["verdict"] = verdict_name(rep.verdict);
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mehlerlab: finite-dimensional laboratory for non-autonomous "
               "Ornstein-Uhlenbeck semigroups"};
  app.require_subcommand(1);

  std::string scenario_path, out_path, f_name = "tanh_shift", weight_name = "constant";
  std::string format = "json", suite_name = "all", x_csv = "1", y_csv = "0";
  double s = 0.0, t = 1.0, tol = 1e-6, alpha = 2.0, p = 2.0, q = 1.4, delta = 1.0;
  double beta = 0.0, f_offset = 0.0;
  std::int64_t n = 100000;
  int steps = 64, nodes = 256;
  std::uint64_t seed = 1;
  bool log_mode = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", scenario_path, "scenario JSON file")->required();
    cmd->add_option("--seed", seed, "master seed");
    cmd->add_option("--out", out_path, "output file (default stdout)");
  };

  auto* kernel = app.add_subcommand("kernel", "kernel-measure operations");
  kernel->require_subcommand(1);
  auto* kernel_build = kernel->add_subcommand("build", "build the triplet of mu_{t,s}");
  add_common(kernel_build);
  kernel_build->add_option("--s", s, "start time")->required();
  kernel_build->add_option("--t", t, "end time")->required();

  auto* ev = app.add_subcommand("evolution-measure", "limit evolution system of measures");
  add_common(ev);
  ev->add_option("--t", t, "anchor time");
  ev->add_option("--tol", tol, "tail tolerance");
  auto* ev_check = ev->add_subcommand("check", "invariance defect table (CSV)");
  ev_check->fallthrough();
  ev_check->add_option("--s", s, "start time");

  auto* harnack = app.add_subcommand("harnack", "dimension-free Harnack verdict");
  add_common(harnack);
  harnack->add_option("--s", s);
  harnack->add_option("--t", t);
  harnack->add_option("--alpha", alpha);
  harnack->add_option("--x", x_csv, "comma-separated state x");
  harnack->add_option("--y", y_csv, "comma-separated state y");
  harnack->add_option("--f", f_name, "test function name");
  harnack->add_option("--f-offset", f_offset, "test function offset");
  harnack->add_option("--n", n, "sample count");
  harnack->add_flag("--log-mode", log_mode, "check the log-Harnack variant");

  auto* feller = app.add_subcommand("feller-bound", "strong-Feller variance estimate");
  add_common(feller);
  feller->add_option("--s", s);
  feller->add_option("--t", t);
  feller->add_option("--x", x_csv);
  feller->add_option("--y", y_csv);
  feller->add_option("--f", f_name);
  feller->add_option("--f-offset", f_offset);
  feller->add_option("--n", n);

  auto* control = app.add_subcommand("control", "null-controllability certificate");
  add_common(control);
  control->add_option("--s", s);
  control->add_option("--t", t);
  control->add_option("--x", x_csv);
  control->add_option("--weight", weight_name, "synthesis weight (constant|exponential)");
  control->add_option("--beta", beta, "exponential weight rate");
  auto* control_oracle = control->add_subcommand("oracle", "brute-force minimal energy");
  control_oracle->fallthrough();
  control_oracle->add_option("--nodes", nodes, "discretization nodes");

  auto* semi = app.add_subcommand("semilinear", "Girsanov-weighted semigroup");
  semi->require_subcommand(1);
  auto* semi_apply = semi->add_subcommand("apply", "weighted Monte Carlo of P^F f(x)");
  auto* semi_moments = semi->add_subcommand("moments", "weight moment bounds");
  auto* semi_harnack = semi->add_subcommand("harnack", "semilinear Harnack verdict");
  for (auto* cmd : {semi_apply, semi_moments, semi_harnack}) {
    add_common(cmd);
    cmd->add_option("--s", s);
    cmd->add_option("--t", t);
    cmd->add_option("--x", x_csv);
    cmd->add_option("--n", n);
    cmd->add_option("--steps", steps);
  }
  semi_apply->add_option("--f", f_name);
  semi_apply->add_option("--f-offset", f_offset);
  semi_moments->add_option("--p", p);
  semi_moments->add_option("--delta", delta);
  semi_harnack->add_option("--f", f_name);
  semi_harnack->add_option("--alpha", alpha);
  semi_harnack->add_option("--p", p);
  semi_harnack->add_option("--q", q);
  semi_harnack->add_option("--y", y_csv);

  auto* suite_cmd = app.add_subcommand("suite", "run a named check suite");
  add_common(suite_cmd);
  suite_cmd->add_option("--name", suite_name,
                        "flow|harnack|evolution|control|semilinear|all");
  suite_cmd->add_option("--n", n, "per-check sample count");
  suite_cmd->add_option("--tol", tol, "evolution-measure tolerance");
  suite_cmd->add_option("--format", format, "json|csv");

  CLI11_PARSE(app, argc, argv);

  const auto started = std::chrono::steady_clock::now();
  try {
    const Scenario sc = Scenario::from_file(scenario_path);
    const int d = sc.dim();

    if (kernel_build->parsed()) {
      const MehlerSystem sys = sc.make_mehler_system();
      nlohmann::ordered_json j;
      j["command"] = "kernel build";
      j["scenario_hash"] = sc.hash();
      j["s"] = s;
      j["t"] = t;
      nlohmann::json trip;
      to_json(trip, sys.build_triplet(s, t));
      j["triplet"] = trip;
      emit(j, out_path);
    } else if (ev->parsed() && ev_check->parsed()) {
      const MehlerSystem sys = sc.make_mehler_system();
      const LimitTriplet lim_s = limit_triplet(sys, s, sc.hint(), tol);
      const LimitTriplet lim_t = limit_triplet(sys, t, sc.hint(), tol);
      std::map<double, IdTriplet> nus;
      nus.emplace(s, lim_s.nu);
      nus.emplace(t, lim_t.nu);
      std::ostringstream csv;
      csv << "s,t,xi,defect\n";
      for (const auto& xi : probe_frequencies(d)) {
        const double defect = invariance_defect(sys, nus, s, t, {xi});
        csv << format_double(s) << ',' << format_double(t) << ',' << format_double(xi.norm())
            << ',' << format_double(defect) << "\n";
      }
      if (out_path.empty()) {
        std::cout << csv.str();
      } else {
        std::ofstream out(out_path);
        out << csv.str();
      }
    } else if (ev->parsed()) {
      const MehlerSystem sys = sc.make_mehler_system();
      const LimitTriplet lim = limit_triplet(sys, t, sc.hint(), tol);
      nlohmann::ordered_json j;
      j["command"] = "evolution-measure";
      j["scenario_hash"] = sc.hash();
      j["t"] = t;
      j["tol"] = tol;
      nlohmann::json trip;
      to_json(trip, lim.nu);
      j["nu"] = trip;
      j["horizon"] = lim.horizon;
      j["tail_bound"] = format_double(lim.tail_bound);
      emit(j, out_path);
    } else if (harnack->parsed()) {
      const MehlerSystem sys = sc.make_mehler_system();
      BoundedFn f = make_test_function(f_name, Vec::Ones(d) / std::sqrt(double(d)), f_offset);
      if (log_mode) {
        auto base = f.eval;
        f = {f.name + "+1", [base](const Vec& v) { return 1.0 + base(v); }};
      }
      const auto rep = harnack_check(sys, s, t, f, alpha, parse_vec(x_csv, d), parse_vec(y_csv, d),
                                     n, seed, log_mode);
      auto j = check_report_json(rep);
      j["scenario_hash"] = sc.hash();
      j["alpha"] = alpha;
      j["f"] = f.name;
      emit(j, out_path);
    } else if (feller->parsed()) {
      const MehlerSystem sys = sc.make_mehler_system();
      const BoundedFn f = make_test_function(f_name, Vec::Ones(d) / std::sqrt(double(d)), f_offset);
      const auto rep =
          strong_feller_bound(sys, s, t, f, parse_vec(x_csv, d), parse_vec(y_csv, d), n, seed);
      auto j = check_report_json(rep);
      j["scenario_hash"] = sc.hash();
      j["f"] = f.name;
      emit(j, out_path);
    } else if (control->parsed() && control_oracle->parsed()) {
      const ControlSystem csys = sc.make_control_system();
      const Vec x = parse_vec(x_csv, d);
      const double me = csys.min_energy(s, t, x);
      const double oracle = csys.brute_force_min_energy(s, t, x, nodes);
      const double gap = (std::isinf(me) && std::isinf(oracle)) ? 0.0 : std::abs(me - oracle);
      std::ostringstream csv;
      csv << "min_energy,oracle,gap\n"
          << format_double(me) << ',' << format_double(oracle) << ',' << format_double(gap)
          << "\n";
      if (out_path.empty()) {
        std::cout << csv.str();
      } else {
        std::ofstream out(out_path);
        out << csv.str();
      }
    } else if (control->parsed()) {
      const ControlSystem csys = sc.make_control_system();
      const Vec x = parse_vec(x_csv, d);
      nlohmann::ordered_json j;
      j["command"] = "control";
      j["scenario_hash"] = sc.hash();
      const double me = csys.min_energy(s, t, x);
      j["in_range"] = std::isfinite(me);
      j["min_energy"] = format_double(me);
      try {
        const auto cert = csys.synthesize_control(s, t, x, make_weight(weight_name, beta));
        j["energy"] = format_double(cert.energy);
        j["transfer_residual"] = format_double(cert.transfer_residual);
        auto ctrl = nlohmann::ordered_json::array();
        for (const auto& [r, u] : cert.control) {
          nlohmann::ordered_json row;
          row["r"] = r;
          row["u"] = std::vector<double>(u.data(), u.data() + u.size());
          ctrl.push_back(row);
        }
        j["control"] = ctrl;
      } catch (const NumericalError& e) {
        j["synthesis_error"] = e.what();
      }
      emit(j, out_path);
    } else if (semi_apply->parsed()) {
      const SemilinearSystem ssys = sc.make_semilinear_system();
      const BoundedFn f = make_test_function(f_name, Vec::Ones(d) / std::sqrt(double(d)), f_offset);
      const auto est = ssys.semigroup_apply(s, t, f.eval, parse_vec(x_csv, d), n, steps, seed);
      nlohmann::ordered_json j;
      j["command"] = "semilinear apply";
      j["scenario_hash"] = sc.hash();
      j["f"] = f.name;
      j["mean"] = format_double(est.estimate.mean);
      j["half_width"] = format_double(est.estimate.half_width);
      j["n"] = est.estimate.n;
      j["ess"] = format_double(est.effective_sample_size);
      emit(j, out_path);
    } else if (semi_moments->parsed()) {
      const SemilinearSystem ssys = sc.make_semilinear_system();
      const auto rep =
          ssys.weight_moment_check(s, t, parse_vec(x_csv, d), p, delta, n, steps, seed);
      nlohmann::ordered_json j;
      j["command"] = "semilinear moments";
      j["scenario_hash"] = sc.hash();
      j["p"] = p;
      j["delta"] = delta;
      j["moment_p"] = format_double(rep.moment_p.mean);
      j["bound_p"] = format_double(rep.bound_p);
      j["moment_minus_delta"] = format_double(rep.moment_minus_delta.mean);
      j["bound_minus_delta"] = format_double(rep.bound_minus_delta);
      j["admissible_horizon"] = format_double(rep.admissible_horizon);
      j["verdict"] = verdict_name(rep.verdict);
      emit(j, out_path);
    } else if (semi_harnack->parsed()) {
      const SemilinearSystem ssys = sc.make_semilinear_system();
      const BoundedFn f = make_test_function(f_name, Vec::Ones(d) / std::sqrt(double(d)), f_offset);
      const auto rep = ssys.harnack_semilinear_check(s, t, f, alpha, p, q, parse_vec(x_csv, d),
                                                     parse_vec(y_csv, d), n, steps, seed);
      auto j = check_report_json(rep);
      j["scenario_hash"] = sc.hash();
      emit(j, out_path);
    } else if (suite_cmd->parsed()) {
      const Report report = run_suite(sc, suite_name, seed, n, tol);
      if (!out_path.empty()) {
        std::filesystem::create_directories(out_path);
        std::ofstream js(out_path + "/report.json");
        write_report_json(report, js);
        std::ofstream cs(out_path + "/checks.csv");
        write_report_csv(report, cs);
      } else if (format == "csv") {
        write_report_csv(report, std::cout);
      } else {
        write_report_json(report, std::cout);
      }
      const auto elapsed = std::chrono::duration<double>(
          std::chrono::steady_clock::now() - started).count();
      std::cerr << "suite " << suite_name << " finished in " << elapsed << " s\n";
      return report_exit_code(report);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
