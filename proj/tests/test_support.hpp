#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include <nlohmann/json.hpp>

#include "mehlerlab/evolution_measures.hpp"
#include "mehlerlab/girsanov.hpp"
#include "mehlerlab/mehler_kernel.hpp"
#include "mehlerlab/null_control.hpp"
#include "mehlerlab/scenario.hpp"

namespace mltest {

using namespace mehlerlab;

inline std::shared_ptr<Propagator> make_prop(int dim, std::function<Mat(double)> gen,
                                             double h = 1.0 / 256.0, FamilyTags tags = {}) {
  return std::make_shared<Propagator>(OperatorFamily(dim, std::move(gen), tags), h);
}

inline std::shared_ptr<Propagator> scalar_prop(double a = -1.0, double h = 1.0 / 256.0) {
  FamilyTags tags;
  tags.constant = true;
  tags.commuting = true;
  return make_prop(1, [a](double) { return Mat::Constant(1, 1, a); }, h, tags);
}

inline NoiseRate scalar_noise(double r_rate, double a_rate = 0.0,
                              std::vector<LevyAtom> atoms = {}) {
  LevyMeasure m(std::move(atoms));
  return NoiseRate(
      1, [a_rate](double) { return Vec::Constant(1, a_rate); },
      [r_rate](double) { return Mat::Constant(1, 1, r_rate); }, [m](double) { return m; });
}

inline LevyAtom atom1(double x, double w) { return {Vec::Constant(1, x), w}; }

/// A = -1, R_r = 1: the workhorse scalar Gaussian system.
inline MehlerSystem scalar_gauss_system(double h = 1.0 / 256.0) {
  return MehlerSystem(scalar_prop(-1.0, h), scalar_noise(1.0));
}

inline MehlerSystem scalar_jump_system(double h = 1.0 / 256.0) {
  return MehlerSystem(scalar_prop(-1.0, h), scalar_noise(0.0, 0.0, {atom1(1.0, 0.5)}));
}

inline MehlerSystem scalar_mixed_system(double h = 1.0 / 256.0) {
  return MehlerSystem(scalar_prop(-1.0, h), scalar_noise(1.0, 0.0, {atom1(1.0, 0.5)}));
}

/// Composite Simpson rule; n must be even.
template <class F>
double simpson(F f, double a, double b, int n = 512) {
  const double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

/// Scenario corpus used by the suite-level and acceptance tests: stable
/// systems mixing Gaussian, jump and mixed noise with constant and periodic
/// generators in dimensions 1 to 3.
inline std::vector<nlohmann::json> flow_corpus() {
  using nlohmann::json;
  std::vector<json> out;

  auto base = [](int dim) {
    json j;
    j["dim"] = dim;
    j["base_step"] = 1.0 / 256.0;
    j["hint"] = {{"M", 1.0}, {"omega", 0.5}};
    j["window"] = {{"s", 0.0}, {"t", 1.0}};
    return j;
  };

  // scalar family: constant A = -a0, optional jumps
  for (double a0 : {1.0, 1.5}) {
    for (int noise_kind = 0; noise_kind < 3; ++noise_kind) {
      json j = base(1);
      j["generator"] = {{"kind", "constant"}, {"matrix", {{-a0}}}};
      j["tags"] = {{"constant", true}, {"commuting", true}};
      json n;
      n["a_rate"] = {{"kind", "constant"}, {"vector", {0.0}}};
      n["R_rate"] = {{"kind", "constant"},
                {"matrix", {{noise_kind == 1 ? 0.0 : 1.0}}}};
      if (noise_kind >= 1)
        n["atoms"] = {{"kind", "constant"},
                      {"atoms", {{{"x", {1.0}}, {"w", 0.5}}, {{"x", {-0.5}}, {"w", 0.25}}}}};
      j["noise"] = n;
      out.push_back(j);
    }
  }

  // scalar periodic generator, all three noise kinds
  for (int noise_kind = 0; noise_kind < 3; ++noise_kind) {
    json j = base(1);
    j["generator"] = {{"kind", "diag_sinusoid"},
                      {"offset", {-1.5}},
                      {"amplitude", {-1.0}},
                      {"period", 1.0}};
    j["tags"] = {{"periodic", 1.0}, {"commuting", true}};
    json n;
    n["a_rate"] = {{"kind", "constant"}, {"vector", {0.1}}};
    n["R_rate"] = {{"kind", "constant"}, {"matrix", {{noise_kind == 1 ? 0.0 : 0.8}}}};
    if (noise_kind >= 1)
      n["atoms"] = {{"kind", "constant"}, {"atoms", {{{"x", {0.7}}, {"w", 0.4}}}}};
    j["noise"] = n;
    out.push_back(j);
  }

  // scalar periodic noise scale over a constant generator
  {
    json j = base(1);
    j["generator"] = {{"kind", "constant"}, {"matrix", {{-1.0}}}};
    j["tags"] = {{"periodic", 1.0}};
    json n;
    n["a_rate"] = {{"kind", "sinusoid"}, {"base", {0.0}}, {"amplitude", {0.2}}, {"period", 1.0}};
    n["R_rate"] = {{"kind", "scaled_sinusoid"},
              {"matrix", {{1.0}}},
              {"offset", 1.0},
              {"amplitude", 0.5},
              {"period", 1.0}};
    n["atoms"] = {{"kind", "scaled_sinusoid"},
                  {"atoms", {{{"x", {1.0}}, {"w", 0.3}}}},
                  {"offset", 1.0},
                  {"amplitude", 0.25},
                  {"period", 1.0}};
    j["noise"] = n;
    out.push_back(j);
  }

  // d=2 diagonal constant
  for (int noise_kind = 0; noise_kind < 3; ++noise_kind) {
    json j = base(2);
    j["generator"] = {{"kind", "constant"}, {"matrix", {{-1.0, 0.0}, {0.0, -2.0}}}};
    j["tags"] = {{"constant", true}};
    json n;
    n["a_rate"] = {{"kind", "constant"}, {"vector", {0.0, 0.1}}};
    n["R_rate"] = {{"kind", "constant"},
              {"matrix",
               noise_kind == 1 ? json({{0.0, 0.0}, {0.0, 0.0}}) : json({{1.0, 0.2}, {0.2, 0.5}})}};
    if (noise_kind >= 1)
      n["atoms"] = {{"kind", "constant"},
                    {"atoms", {{{"x", {1.0, 0.0}}, {"w", 0.3}}, {{"x", {0.0, -1.0}}, {"w", 0.2}}}}};
    j["noise"] = n;
    out.push_back(j);
  }

  // d=2 rotation plus damping (non-normal), Gaussian and mixed
  for (int noise_kind = 0; noise_kind < 2; ++noise_kind) {
    json j = base(2);
    j["generator"] = {{"kind", "constant"}, {"matrix", {{-1.0, 1.0}, {-1.0, -1.0}}}};
    json n;
    n["a_rate"] = {{"kind", "constant"}, {"vector", {0.0, 0.0}}};
    n["R_rate"] = {{"kind", "constant"}, {"matrix", {{0.5, 0.0}, {0.0, 0.5}}}};
    if (noise_kind == 1)
      n["atoms"] = {{"kind", "constant"}, {"atoms", {{{"x", {0.5, 0.5}}, {"w", 0.4}}}}};
    j["noise"] = n;
    out.push_back(j);
  }

  // d=2 periodic non-commuting two-term generator
  for (int noise_kind = 0; noise_kind < 2; ++noise_kind) {
    json j = base(2);
    j["generator"] = {{"kind", "two_term_sinusoid"},
                      {"m0", {{-1.5, 0.3}, {0.0, -1.2}}},
                      {"m1", {{0.0, -0.4}, {0.4, 0.0}}},
                      {"period", 1.0}};
    j["tags"] = {{"periodic", 1.0}};
    json n;
    n["a_rate"] = {{"kind", "constant"}, {"vector", {0.1, 0.0}}};
    n["R_rate"] = {{"kind", "constant"}, {"matrix", {{1.0, 0.0}, {0.0, 0.25}}}};
    if (noise_kind == 1)
      n["atoms"] = {{"kind", "constant"}, {"atoms", {{{"x", {-0.8, 0.2}}, {"w", 0.5}}}}};
    j["noise"] = n;
    out.push_back(j);
  }

  // d=2 degenerate Gaussian direction
  {
    json j = base(2);
    j["generator"] = {{"kind", "constant"}, {"matrix", {{-1.0, 0.0}, {0.0, -1.0}}}};
    json n;
    n["a_rate"] = {{"kind", "constant"}, {"vector", {0.0, 0.0}}};
    n["R_rate"] = {{"kind", "constant"}, {"matrix", {{1.0, 0.0}, {0.0, 0.0}}}};
    j["noise"] = n;
    out.push_back(j);
  }

  // d=3 constant with mixed noise, two damping levels
  for (double a0 : {1.0, 2.0}) {
    json j = base(3);
    j["generator"] = {{"kind", "constant"},
                      {"matrix", {{-a0, 0.2, 0.0}, {0.0, -1.5, 0.1}, {0.0, 0.0, -1.0}}}};
    json n;
    n["a_rate"] = {{"kind", "constant"}, {"vector", {0.0, 0.0, 0.05}}};
    n["R_rate"] = {{"kind", "constant"},
              {"matrix", {{1.0, 0.1, 0.0}, {0.1, 0.5, 0.0}, {0.0, 0.0, 0.25}}}};
    n["atoms"] = {{"kind", "constant"}, {"atoms", {{{"x", {1.0, 0.0, 0.5}}, {"w", 0.3}}}}};
    j["noise"] = n;
    out.push_back(j);
  }

  // d=3 periodic diagonal
  {
    json j = base(3);
    j["generator"] = {{"kind", "diag_sinusoid"},
                      {"offset", {-1.0, -1.5, -2.0}},
                      {"amplitude", {0.0, -0.5, 0.5}},
                      {"period", 1.0}};
    j["tags"] = {{"periodic", 1.0}, {"commuting", true}};
    json n;
    n["a_rate"] = {{"kind", "constant"}, {"vector", {0.0, 0.0, 0.0}}};
    n["R_rate"] = {{"kind", "constant"},
              {"matrix", {{0.5, 0.0, 0.0}, {0.0, 0.5, 0.0}, {0.0, 0.0, 0.5}}}};
    j["noise"] = n;
    out.push_back(j);
  }

  return out;
}

/// Ten controllable control scenarios plus builders for uncontrollable ones.
inline std::vector<nlohmann::json> control_corpus() {
  using nlohmann::json;
  std::vector<json> out;
  auto base = [](int dim) {
    json j;
    j["dim"] = dim;
    j["base_step"] = 1.0 / 256.0;
    j["window"] = {{"s", 0.0}, {"t", 1.0}};
    j["noise"] = {{"a_rate", {{"kind", "constant"}, {"vector", std::vector<double>(dim, 0.0)}}},
                  {"R_rate", {{"kind", "constant"},
                         {"matrix", dim == 1 ? json({{1.0}})
                                  : dim == 2 ? json({{1.0, 0.0}, {0.0, 1.0}})
                                             : json({{1.0, 0.0, 0.0},
                                                     {0.0, 1.0, 0.0},
                                                     {0.0, 0.0, 1.0}})}}}};
    return j;
  };

  for (double a0 : {0.5, 1.0, 2.0}) {
    json j = base(1);
    j["generator"] = {{"kind", "constant"}, {"matrix", {{-a0}}}};
    j["control"] = {{"C", {{"kind", "constant"}, {"matrix", {{1.0}}}}}};
    out.push_back(j);
  }
  {
    json j = base(1);
    j["generator"] = {{"kind", "diag_sinusoid"},
                      {"offset", {-1.5}},
                      {"amplitude", {-1.0}},
                      {"period", 1.0}};
    j["control"] = {{"C", {{"kind", "constant"}, {"matrix", {{0.7}}}}}};
    out.push_back(j);
  }
  for (double c2 : {0.5, 1.0}) {
    json j = base(2);
    j["generator"] = {{"kind", "constant"}, {"matrix", {{-1.0, 0.5}, {0.0, -2.0}}}};
    j["control"] = {{"C", {{"kind", "constant"}, {"matrix", {{1.0, 0.0}, {0.0, c2}}}}}};
    out.push_back(j);
  }
  {
    // single-channel but controllable through the coupling
    json j = base(2);
    j["generator"] = {{"kind", "constant"}, {"matrix", {{0.0, 1.0}, {-1.0, -0.5}}}};
    j["control"] = {{"C", {{"kind", "constant"}, {"matrix", {{0.0, 0.0}, {0.0, 1.0}}}}}};
    out.push_back(j);
  }
  {
    json j = base(2);
    j["generator"] = {{"kind", "two_term_sinusoid"},
                      {"m0", {{-1.0, 0.2}, {0.0, -1.5}}},
                      {"m1", {{0.0, -0.3}, {0.3, 0.0}}},
                      {"period", 1.0}};
    j["control"] = {{"C", {{"kind", "constant"}, {"matrix", {{1.0, 0.1}, {0.0, 1.0}}}}}};
    out.push_back(j);
  }
  for (double a0 : {1.0, 1.5}) {
    json j = base(3);
    j["generator"] = {{"kind", "constant"},
                      {"matrix", {{-a0, 0.0, 0.1}, {0.0, -1.0, 0.0}, {0.0, 0.0, -2.0}}}};
    j["control"] = {{"C", {{"kind", "constant"},
                           {"matrix", {{1.0, 0.0, 0.0}, {0.0, 0.8, 0.0}, {0.0, 0.0, 1.2}}}}}};
    out.push_back(j);
  }
  return out;
}

inline nlohmann::json uncontrollable_scenario() {
  nlohmann::json j;
  j["dim"] = 2;
  j["base_step"] = 1.0 / 256.0;
  j["generator"] = {{"kind", "constant"}, {"matrix", {{-1.0, 0.0}, {0.0, -2.0}}}};
  j["noise"] = {{"a_rate", {{"kind", "constant"}, {"vector", {0.0, 0.0}}}},
                {"R_rate", {{"kind", "constant"}, {"matrix", {{1.0, 0.0}, {0.0, 1.0}}}}}};
  j["control"] = {{"C", {{"kind", "constant"}, {"matrix", {{1.0, 0.0}, {0.0, 0.0}}}}}};
  j["window"] = {{"s", 0.0}, {"t", 1.0}};
  return j;
}

/// Five semilinear scenarios; the first three carry the oracle drifts.
inline std::vector<nlohmann::json> semilinear_corpus() {
  using nlohmann::json;
  std::vector<json> out;
  auto base = [](int dim) {
    json j;
    j["dim"] = dim;
    j["base_step"] = 1.0 / 256.0;
    j["generator"] = {{"kind", "constant"},
                      {"matrix", dim == 1 ? json({{-1.0}})
                                          : json({{-1.0, 0.2}, {0.0, -1.5}})}};
    j["noise"] = {{"a_rate", {{"kind", "constant"}, {"vector", std::vector<double>(dim, 0.0)}}},
                  {"R_rate", {{"kind", "constant"},
                         {"matrix", dim == 1 ? json({{1.0}}) : json({{1.0, 0.0}, {0.0, 0.5}})}}}};
    j["window"] = {{"s", 0.0}, {"t", 1.0}};
    return j;
  };
  {
    json j = base(1);
    j["semilinear"] = {{"R", {{1.0}}},
                       {"drift", {{"kind", "tanh"}, {"scale", -0.5}}},
                       {"k1", 0.25},
                       {"k2", 0.0}};
    out.push_back(j);
  }
  {
    json j = base(1);
    j["semilinear"] = {{"R", {{1.0}}},
                       {"drift", {{"kind", "constant"}, {"c", {0.4}}}},
                       {"k1", 0.16},
                       {"k2", 0.0}};
    out.push_back(j);
  }
  {
    json j = base(1);
    j["semilinear"] = {{"R", {{1.0}}},
                       {"drift", {{"kind", "clipped_linear"}, {"scale", 0.5}}},
                       {"k1", 0.25},
                       {"k2", 0.0}};
    out.push_back(j);
  }
  {
    json j = base(2);
    j["semilinear"] = {{"R", {{1.0, 0.0}, {0.0, 0.5}}},
                       {"drift", {{"kind", "tanh"}, {"scale", 0.3}}},
                       {"k1", 0.18},
                       {"k2", 0.0}};
    out.push_back(j);
  }
  {
    json j = base(1);
    j["window"] = {{"s", 0.0}, {"t", 0.25}};
    j["semilinear"] = {{"R", {{1.0}}},
                       {"drift", {{"kind", "linear"}, {"scale", 0.3}}},
                       {"k1", 0.0},
                       {"k2", 0.09}};
    out.push_back(j);
  }
  return out;
}

/// Euler-Maruyama simulation of the semilinear equation itself; the
/// independent oracle for the Girsanov route. Uses its own discretization
/// and only the scenario's raw coefficient functions.
inline McEstimate euler_maruyama_oracle(const OperatorFamily& family, const Mat& sqrt_r,
                                        const DriftFn& drift,
                                        const std::function<double(const Vec&)>& f, double s,
                                        double t, const Vec& x, std::int64_t n, int steps,
                                        std::uint64_t seed) {
  const double dt = (t - s) / steps;
  const double sqrt_dt = std::sqrt(dt);
  const int d = static_cast<int>(x.size());
  RunningStats stats;
  Rng rng(seed);
  for (std::int64_t i = 0; i < n; ++i) {
    Vec state = x;
    double r = s;
    for (int k = 0; k < steps; ++k) {
      const Vec incr = family.at(r) * state + drift.eval(r, state);
      state += dt * incr + sqrt_dt * (sqrt_r * rng.normal_vec(d));
      r += dt;
    }
    stats.add(f(state));
  }
  return stats.estimate();
}

}  // namespace mltest
