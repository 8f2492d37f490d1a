#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <utility>

#include "mehlerlab/evolution_family.hpp"
#include "mehlerlab/id_triplet.hpp"
#include "mehlerlab/mc.hpp"

namespace mehlerlab {

struct NoiseTags {
  bool constant = false;
  std::optional<double> period;
};

/// Instantaneous noise rate r -> (a_r, R_r, m_r).
class NoiseRate {
 public:
  NoiseRate(int dim, std::function<Vec(double)> a_rate, std::function<Mat(double)> r_rate,
            std::function<LevyMeasure(double)> m_rate, NoiseTags tags = {});

  int dim() const { return dim_; }
  const NoiseTags& tags() const { return tags_; }
  Vec a_at(double r) const;
  Mat r_at(double r) const;
  LevyMeasure m_at(double r) const;

 private:
  int dim_;
  std::function<Vec(double)> a_rate_;
  std::function<Mat(double)> r_rate_;
  std::function<LevyMeasure(double)> m_rate_;
  NoiseTags tags_;
};

/// Evolution family plus noise rate; produces the kernel laws mu_{t,s} by
/// composite-midpoint quadrature on the propagator grid and evaluates the
/// transition operator p_{s,t} by Monte Carlo.
class MehlerSystem {
 public:
  MehlerSystem(std::shared_ptr<const Propagator> prop, NoiseRate noise,
               std::size_t atom_cap = 1'000'000);

  int dim() const { return noise_.dim(); }
  double quad_step() const { return prop_->base_step(); }
  const Propagator& prop() const { return *prop_; }
  std::shared_ptr<const Propagator> prop_ptr() const { return prop_; }
  const NoiseRate& noise() const { return noise_; }

  /// mu_{t,s} = D[a_{t,s}, R_{t,s}, m_{t,s}].
  IdTriplet build_triplet(double s, double t) const;

  /// max over xis of |psi_{t,s} - psi_{t,r} - psi_{r,s}(U(t,r)^T .)|.
  double flow_defect(double s, double r, double t, const std::vector<Vec>& xis) const;

  /// Monte Carlo mean of f(U(t,s)x + Y), Y ~ mu_{t,s}.
  McEstimate mehler_apply(double s, double t, const std::function<double(const Vec&)>& f,
                          const Vec& x, std::int64_t n, std::uint64_t seed) const;

  /// (Gaussian factor D[0,R,0], jump factor D[a,0,m]).
  std::pair<IdTriplet, IdTriplet> gauss_jump_split(double s, double t) const;

  /// Left-difference estimate psi_{t,t-dh}(xi)/dh of the rate symbol.
  Cplx rate_recovery(double t, const Vec& xi, double dh) const;

 private:
  std::shared_ptr<const Propagator> prop_;
  NoiseRate noise_;
  std::size_t atom_cap_;
};

}  // namespace mehlerlab
