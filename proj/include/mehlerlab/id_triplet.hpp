#pragma once

#include <memory>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mehlerlab/psd.hpp"
#include "mehlerlab/rng.hpp"
#include "mehlerlab/types.hpp"

namespace mehlerlab {

struct LevyAtom {
  Vec x;
  double w;
};

/// Atomic Levy measure: finitely many atoms off the origin with positive
/// weights (compound-Poisson class).
class LevyMeasure {
 public:
  LevyMeasure() = default;
  explicit LevyMeasure(std::vector<LevyAtom> atoms);

  const std::vector<LevyAtom>& atoms() const { return atoms_; }
  bool empty() const { return atoms_.empty(); }
  std::size_t size() const { return atoms_.size(); }

  double total_mass() const;
  /// sum of w * (1 and |x|^2, whichever is smaller)
  double truncated_second_moment() const;
  double second_moment() const;

 private:
  std::vector<LevyAtom> atoms_;
};

/// Infinitely divisible law D[a, R, m]: drift, Gaussian covariance, atomic
/// Levy measure, with the 1/(1+|x|^2) compensator convention throughout.
class IdTriplet {
 public:
  IdTriplet(Vec a, Mat R, LevyMeasure m);

  static IdTriplet point_mass(const Vec& x);
  static IdTriplet zero(int dim);

  int dim() const { return static_cast<int>(a_.size()); }
  const Vec& drift() const { return a_; }
  const Mat& covariance() const { return r_; }
  const LevyMeasure& levy() const { return m_; }
  const PsdSqrt& cov_sqrt() const { return *cov_sqrt_; }

  /// psi(xi) with mu_hat(xi) = exp(-psi(xi)).
  Cplx char_exponent(const Vec& xi) const;

  /// One exact-in-law draw: compensated drift + Gaussian part +
  /// compound-Poisson jumps.
  Vec sample_one(Rng& rng) const;
  /// n draws as rows of an n x d matrix.
  Mat sample(std::int64_t n, Rng& rng) const;

 private:
  Vec a_;
  Mat r_;
  LevyMeasure m_;
  std::shared_ptr<const PsdSqrt> cov_sqrt_;
  Vec compensated_drift_;
  std::vector<double> cum_weights_;
  double total_mass_ = 0.0;
};

IdTriplet convolve(const IdTriplet& lhs, const IdTriplet& rhs);
IdTriplet pushforward(const IdTriplet& trip, const Mat& m);

/// Maximum modulus of psi_1 - psi_2 over the probe frequencies.
double exponent_distance(const IdTriplet& lhs, const IdTriplet& rhs, const std::vector<Vec>& xis);

/// Deterministic probe frequencies: axis and diagonal directions with
/// magnitudes between 0.25 and 4.
std::vector<Vec> probe_frequencies(int dim, int count = 10);

void to_json(nlohmann::json& j, const IdTriplet& trip);
IdTriplet triplet_from_json(const nlohmann::json& j);

}  // namespace mehlerlab
