#include "mehlerlab/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace mehlerlab {

namespace {

Vec parse_vector(const nlohmann::json& j, int dim, const std::string& field) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim)
    throw ConfigError(field + ": expected an array of length " + std::to_string(dim));
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v(i) = j.at(i).get<double>();
  if (!is_finite(v)) throw ConfigError(field + ": non-finite entries");
  return v;
}

Mat parse_matrix(const nlohmann::json& j, int dim, const std::string& field) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim)
    throw ConfigError(field + ": expected a " + std::to_string(dim) + "x" + std::to_string(dim) +
                      " row-major matrix");
  Mat m(dim, dim);
  for (int i = 0; i < dim; ++i) {
    const auto& row = j.at(i);
    if (!row.is_array() || static_cast<int>(row.size()) != dim)
      throw ConfigError(field + ": row " + std::to_string(i) + " has wrong length");
    for (int k = 0; k < dim; ++k) m(i, k) = row.at(k).get<double>();
  }
  if (!is_finite(m)) throw ConfigError(field + ": non-finite entries");
  return m;
}

std::vector<LevyAtom> parse_atoms(const nlohmann::json& j, int dim, const std::string& field) {
  std::vector<LevyAtom> atoms;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& a = j.at(i);
    atoms.push_back({parse_vector(a.at("x"), dim, field + ".x"), a.at("w").get<double>()});
    if (!(atoms.back().w > 0.0)) throw ConfigError(field + ": weights must be positive");
  }
  return atoms;
}

double require_period(const nlohmann::json& spec, const std::string& field) {
  const double T = spec.at("period").get<double>();
  if (!(T > 0.0)) throw ConfigError(field + ".period: must be positive");
  return T;
}

}  // namespace

std::function<Mat(double)> make_matrix_family(const nlohmann::json& spec, int dim,
                                              const std::string& field) {
  const std::string kind = spec.at("kind").get<std::string>();
  if (kind == "constant") {
    const Mat m = parse_matrix(spec.at("matrix"), dim, field + ".matrix");
    return [m](double) { return m; };
  }
  if (kind == "diag_sinusoid") {
    const Vec offset = parse_vector(spec.at("offset"), dim, field + ".offset");
    const Vec amp = parse_vector(spec.at("amplitude"), dim, field + ".amplitude");
    const double T = require_period(spec, field);
    return [offset, amp, T](double t) {
      return Mat((offset + std::sin(2.0 * M_PI * t / T) * amp).asDiagonal());
    };
  }
  if (kind == "two_term_sinusoid") {
    const Mat m0 = parse_matrix(spec.at("m0"), dim, field + ".m0");
    const Mat m1 = parse_matrix(spec.at("m1"), dim, field + ".m1");
    const double T = require_period(spec, field);
    return [m0, m1, T](double t) { return Mat(m0 + std::sin(2.0 * M_PI * t / T) * m1); };
  }
  throw ConfigError(field + ".kind: unknown matrix family '" + kind + "'");
}

namespace {

std::function<Vec(double)> make_vector_family(const nlohmann::json& spec, int dim,
                                              const std::string& field) {
  const std::string kind = spec.at("kind").get<std::string>();
  if (kind == "constant") {
    const Vec v = parse_vector(spec.at("vector"), dim, field + ".vector");
    return [v](double) { return v; };
  }
  if (kind == "sinusoid") {
    const Vec base = parse_vector(spec.at("base"), dim, field + ".base");
    const Vec amp = parse_vector(spec.at("amplitude"), dim, field + ".amplitude");
    const double T = require_period(spec, field);
    return [base, amp, T](double t) { return Vec(base + std::sin(2.0 * M_PI * t / T) * amp); };
  }
  throw ConfigError(field + ".kind: unknown vector family '" + kind + "'");
}

std::function<Mat(double)> make_psd_family(const nlohmann::json& spec, int dim,
                                           const std::string& field) {
  const std::string kind = spec.at("kind").get<std::string>();
  if (kind == "constant") {
    const Mat m = parse_matrix(spec.at("matrix"), dim, field + ".matrix");
    try {
      PsdSqrt check(m);
    } catch (const DomainError&) {
      throw ConfigError(field + ".matrix: not symmetric positive semidefinite");
    }
    return [m](double) { return m; };
  }
  if (kind == "scaled_sinusoid") {
    const Mat m = parse_matrix(spec.at("matrix"), dim, field + ".matrix");
    const double offset = spec.at("offset").get<double>();
    const double amp = spec.at("amplitude").get<double>();
    const double T = require_period(spec, field);
    if (!(offset - std::abs(amp) >= 0.0))
      throw ConfigError(field + ": offset must dominate |amplitude| to keep the scale nonnegative");
    try {
      PsdSqrt check(m);
    } catch (const DomainError&) {
      throw ConfigError(field + ".matrix: not symmetric positive semidefinite");
    }
    return [m, offset, amp, T](double t) {
      return Mat((offset + amp * std::sin(2.0 * M_PI * t / T)) * m);
    };
  }
  throw ConfigError(field + ".kind: unknown covariance family '" + kind + "'");
}

std::function<LevyMeasure(double)> make_levy_family(const nlohmann::json& spec, int dim,
                                                    const std::string& field) {
  const std::string kind = spec.at("kind").get<std::string>();
  if (kind == "constant") {
    const LevyMeasure m(parse_atoms(spec.at("atoms"), dim, field + ".atoms"));
    return [m](double) { return m; };
  }
  if (kind == "scaled_sinusoid") {
    const auto atoms = parse_atoms(spec.at("atoms"), dim, field + ".atoms");
    const double offset = spec.at("offset").get<double>();
    const double amp = spec.at("amplitude").get<double>();
    const double T = require_period(spec, field);
    if (!(offset - std::abs(amp) > 0.0))
      throw ConfigError(field + ": offset must exceed |amplitude| to keep weights positive");
    return [atoms, offset, amp, T](double t) {
      const double scale = offset + amp * std::sin(2.0 * M_PI * t / T);
      std::vector<LevyAtom> scaled = atoms;
      for (auto& a : scaled) a.w *= scale;
      return LevyMeasure(std::move(scaled));
    };
  }
  throw ConfigError(field + ".kind: unknown jump family '" + kind + "'");
}

}  // namespace

Scenario Scenario::from_json(const nlohmann::json& j) {
  Scenario sc;
  sc.raw_ = j;
  if (!j.contains("dim")) throw ConfigError("dim: missing");
  sc.dim_ = j.at("dim").get<int>();
  if (sc.dim_ < 1) throw ConfigError("dim: must be a positive integer");
  sc.base_step_ = j.value("base_step", 1.0 / 256.0);
  if (!(sc.base_step_ > 0.0)) throw ConfigError("base_step: must be positive");

  if (j.contains("tags")) {
    const auto& tags = j.at("tags");
    sc.tags_.constant = tags.value("constant", false);
    sc.tags_.commuting = tags.value("commuting", false);
    if (tags.contains("periodic")) sc.tags_.period = tags.at("periodic").get<double>();
  }
  if (j.contains("hint")) {
    sc.hint_.M = j.at("hint").value("M", 1.0);
    sc.hint_.omega = j.at("hint").value("omega", 1.0);
    if (!(sc.hint_.M > 0.0) || !(sc.hint_.omega > 0.0))
      throw ConfigError("hint: M and omega must be positive");
  }
  if (j.contains("window")) {
    sc.window_s_ = j.at("window").value("s", 0.0);
    sc.window_t_ = j.at("window").value("t", 1.0);
    if (!(sc.window_t_ > sc.window_s_)) throw ConfigError("window: requires t > s");
  }

  if (!j.contains("generator")) throw ConfigError("generator: missing");
  sc.generator_spec_ = j.at("generator");
  if (!j.contains("noise")) throw ConfigError("noise: missing");
  sc.noise_spec_ = j.at("noise");
  if (j.contains("control")) sc.control_spec_ = j.at("control");
  if (j.contains("semilinear")) sc.semilinear_spec_ = j.at("semilinear");

  // construct everything once so that configuration errors surface at load
  auto prop = sc.make_propagator();
  sc.make_mehler_system(prop);
  if (sc.has_control()) sc.make_control_system(prop);
  if (sc.has_semilinear()) sc.make_semilinear_system(prop);
  return sc;
}

Scenario Scenario::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("scenario parse error in " + path + ": " + e.what());
  }
  try {
    return from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("scenario schema error in " + path + ": " + e.what());
  }
}

std::string Scenario::hash() const {
  const std::string dump = raw_.dump();
  const std::uint64_t h = fnv1a64(dump);
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

std::shared_ptr<const Propagator> Scenario::make_propagator() const {
  auto family = make_matrix_family(generator_spec_, dim_, "generator");
  try {
    return std::make_shared<Propagator>(OperatorFamily(dim_, family, tags_), base_step_);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("generator: ") + e.what());
  }
}

MehlerSystem Scenario::make_mehler_system(std::shared_ptr<const Propagator> prop) const {
  if (!prop) prop = make_propagator();
  const auto& n = noise_spec_;
  if (!n.contains("a_rate") || !n.contains("R_rate"))
    throw ConfigError("noise: requires 'a_rate' and 'R_rate' components");
  auto a_fam = make_vector_family(n.at("a_rate"), dim_, "noise.a_rate");
  auto r_fam = make_psd_family(n.at("R_rate"), dim_, "noise.R_rate");
  std::function<LevyMeasure(double)> m_fam;
  if (n.contains("atoms")) {
    m_fam = make_levy_family(n.at("atoms"), dim_, "noise.atoms");
  } else {
    m_fam = [](double) { return LevyMeasure(); };
  }
  NoiseTags ntags;
  ntags.constant = tags_.constant;
  ntags.period = tags_.period;
  try {
    return MehlerSystem(prop, NoiseRate(dim_, a_fam, r_fam, m_fam, ntags));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("noise: ") + e.what());
  }
}

ControlSystem Scenario::make_control_system(std::shared_ptr<const Propagator> prop) const {
  if (!control_spec_) throw ConfigError("control: section missing");
  if (!prop) prop = make_propagator();
  auto c_fam = make_matrix_family(control_spec_->at("C"), dim_, "control.C");
  return ControlSystem(prop, c_fam);
}

SemilinearSystem Scenario::make_semilinear_system(std::shared_ptr<const Propagator> prop) const {
  if (!semilinear_spec_) throw ConfigError("semilinear: section missing");
  if (!prop) prop = make_propagator();
  const auto& spec = *semilinear_spec_;
  const Mat r = parse_matrix(spec.at("R"), dim_, "semilinear.R");
  std::unique_ptr<PsdSqrt> sqrt_r;
  try {
    sqrt_r = std::make_unique<PsdSqrt>(r);
  } catch (const DomainError&) {
    throw ConfigError("semilinear.R: not symmetric positive semidefinite");
  }
  const auto& dspec = spec.at("drift");
  const std::string kind = dspec.at("kind").get<std::string>();
  Vec c = Vec::Zero(dim_);
  if (dspec.contains("c")) c = parse_vector(dspec.at("c"), dim_, "semilinear.drift.c");
  const double scale = dspec.value("scale", 1.0);
  DriftFn drift = make_drift(kind, sqrt_r->sqrt(), c, scale);
  const double k1 = spec.value("k1", 0.0);
  const double k2 = spec.value("k2", 0.0);
  try {
    return SemilinearSystem(prop, r, drift, k1, k2);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("semilinear: ") + e.what());
  }
}

}  // namespace mehlerlab
