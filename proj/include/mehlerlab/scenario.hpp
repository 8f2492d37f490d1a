#pragma once

#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "mehlerlab/girsanov.hpp"
#include "mehlerlab/mehler_kernel.hpp"
#include "mehlerlab/null_control.hpp"

namespace mehlerlab {

/// Validated experiment configuration: dimension, grid, generator and noise
/// specs, optional control / semilinear sections, stability hint, tags.
class Scenario {
 public:
  static Scenario from_json(const nlohmann::json& j);
  static Scenario from_file(const std::string& path);

  int dim() const { return dim_; }
  double base_step() const { return base_step_; }
  const StabilityHint& hint() const { return hint_; }
  const FamilyTags& tags() const { return tags_; }
  double window_s() const { return window_s_; }
  double window_t() const { return window_t_; }
  bool has_control() const { return control_spec_.has_value(); }
  bool has_semilinear() const { return semilinear_spec_.has_value(); }
  const nlohmann::json& raw() const { return raw_; }

  /// FNV-1a hash of the canonical serialized form, as a hex string.
  std::string hash() const;

  std::shared_ptr<const Propagator> make_propagator() const;
  MehlerSystem make_mehler_system(std::shared_ptr<const Propagator> prop = nullptr) const;
  ControlSystem make_control_system(std::shared_ptr<const Propagator> prop = nullptr) const;
  SemilinearSystem make_semilinear_system(std::shared_ptr<const Propagator> prop = nullptr) const;

 private:
  int dim_ = 0;
  double base_step_ = 0.0;
  StabilityHint hint_;
  FamilyTags tags_;
  double window_s_ = 0.0;
  double window_t_ = 1.0;
  nlohmann::json generator_spec_;
  nlohmann::json noise_spec_;
  std::optional<nlohmann::json> control_spec_;
  std::optional<nlohmann::json> semilinear_spec_;
  nlohmann::json raw_;
};

/// Builds the time-dependent matrix family described by a generator spec.
std::function<Mat(double)> make_matrix_family(const nlohmann::json& spec, int dim,
                                              const std::string& field);

}  // namespace mehlerlab
