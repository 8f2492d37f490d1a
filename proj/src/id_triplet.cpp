#include "mehlerlab/id_triplet.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace mehlerlab {

LevyMeasure::LevyMeasure(std::vector<LevyAtom> atoms) : atoms_(std::move(atoms)) {
  for (const auto& atom : atoms_) {
    if (!is_finite(atom.x)) throw DomainError("LevyMeasure: non-finite atom position");
    if (atom.x.norm() == 0.0) throw DomainError("LevyMeasure: atom at the origin");
    if (!(atom.w > 0.0) || !std::isfinite(atom.w))
      throw DomainError("LevyMeasure: weights must be strictly positive and finite");
  }
  if (!std::isfinite(truncated_second_moment()))
    throw DomainError("LevyMeasure: divergent truncated second moment");
}

double LevyMeasure::total_mass() const {
  double s = 0.0;
  for (const auto& atom : atoms_) s += atom.w;
  return s;
}

double LevyMeasure::truncated_second_moment() const {
  double s = 0.0;
  for (const auto& atom : atoms_) s += atom.w * std::min(1.0, atom.x.squaredNorm());
  return s;
}

double LevyMeasure::second_moment() const {
  double s = 0.0;
  for (const auto& atom : atoms_) s += atom.w * atom.x.squaredNorm();
  return s;
}

IdTriplet::IdTriplet(Vec a, Mat R, LevyMeasure m)
    : a_(std::move(a)), r_(std::move(R)), m_(std::move(m)) {
  const int d = dim();
  if (r_.rows() != d || r_.cols() != d) throw DomainError("IdTriplet: covariance shape mismatch");
  for (const auto& atom : m_.atoms())
    if (atom.x.size() != d) throw DomainError("IdTriplet: atom dimension mismatch");
  if (!is_finite(a_)) throw DomainError("IdTriplet: non-finite drift");
  cov_sqrt_ = std::make_shared<const PsdSqrt>(r_);

  compensated_drift_ = a_;
  total_mass_ = m_.total_mass();
  cum_weights_.reserve(m_.size());
  double acc = 0.0;
  for (const auto& atom : m_.atoms()) {
    compensated_drift_ -= atom.w / (1.0 + atom.x.squaredNorm()) * atom.x;
    acc += atom.w;
    cum_weights_.push_back(acc);
  }
}

IdTriplet IdTriplet::point_mass(const Vec& x) {
  return IdTriplet(x, Mat::Zero(x.size(), x.size()), LevyMeasure());
}

IdTriplet IdTriplet::zero(int dim) { return point_mass(Vec::Zero(dim)); }

Cplx IdTriplet::char_exponent(const Vec& xi) const {
  if (xi.size() != dim()) throw DomainError("char_exponent: frequency dimension mismatch");
  Cplx psi(0.5 * xi.dot(r_ * xi), -a_.dot(xi));
  for (const auto& atom : m_.atoms()) {
    const double phase = xi.dot(atom.x);
    const Cplx integrand =
        std::exp(Cplx(0.0, phase)) - 1.0 - Cplx(0.0, phase / (1.0 + atom.x.squaredNorm()));
    psi -= atom.w * integrand;
  }
  return psi;
}

Vec IdTriplet::sample_one(Rng& rng) const {
  Vec y = compensated_drift_;
  if (cov_sqrt_->singular_values().maxCoeff() > 0.0)
    y += cov_sqrt_->sqrt() * rng.normal_vec(dim());
  if (total_mass_ > 0.0) {
    const long jumps = rng.poisson(total_mass_);
    for (long j = 0; j < jumps; ++j) {
      const double u = rng.uniform01() * total_mass_;
      const auto it = std::lower_bound(cum_weights_.begin(), cum_weights_.end(), u);
      const std::size_t idx =
          std::min(static_cast<std::size_t>(it - cum_weights_.begin()), m_.size() - 1);
      y += m_.atoms()[idx].x;
    }
  }
  return y;
}

Mat IdTriplet::sample(std::int64_t n, Rng& rng) const {
  if (n < 1) throw DomainError("sample: need n >= 1");
  Mat out(n, dim());
  for (std::int64_t i = 0; i < n; ++i) out.row(i) = sample_one(rng).transpose();
  return out;
}

IdTriplet convolve(const IdTriplet& lhs, const IdTriplet& rhs) {
  if (lhs.dim() != rhs.dim()) throw DomainError("convolve: dimension mismatch");
  std::vector<LevyAtom> atoms = lhs.levy().atoms();
  atoms.insert(atoms.end(), rhs.levy().atoms().begin(), rhs.levy().atoms().end());
  return IdTriplet(lhs.drift() + rhs.drift(), lhs.covariance() + rhs.covariance(),
                   LevyMeasure(std::move(atoms)));
}

IdTriplet pushforward(const IdTriplet& trip, const Mat& m) {
  if (m.rows() != trip.dim() || m.cols() != trip.dim())
    throw DomainError("pushforward: matrix dimension mismatch");
  Vec a = m * trip.drift();
  std::vector<LevyAtom> atoms;
  atoms.reserve(trip.levy().size());
  for (const auto& atom : trip.levy().atoms()) {
    const Vec y = m * atom.x;
    if (y.norm() == 0.0) continue;  // Levy measures charge the complement of {0}
    a += atom.w * (1.0 / (1.0 + y.squaredNorm()) - 1.0 / (1.0 + atom.x.squaredNorm())) * y;
    atoms.push_back({y, atom.w});
  }
  const Mat r = m * trip.covariance() * m.transpose();
  return IdTriplet(std::move(a), 0.5 * (r + r.transpose()), LevyMeasure(std::move(atoms)));
}

double exponent_distance(const IdTriplet& lhs, const IdTriplet& rhs, const std::vector<Vec>& xis) {
  double worst = 0.0;
  for (const auto& xi : xis)
    worst = std::max(worst, std::abs(lhs.char_exponent(xi) - rhs.char_exponent(xi)));
  return worst;
}

std::vector<Vec> probe_frequencies(int dim, int count) {
  static const double mags[] = {0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0};
  std::vector<Vec> out;
  out.reserve(count);
  for (int j = 0; j < count; ++j) {
    Vec dir = Vec::Zero(dim);
    const int which = j % (dim + 1);
    if (which < dim) {
      dir(which) = 1.0;
    } else {
      dir.setOnes();
      dir /= std::sqrt(static_cast<double>(dim));
    }
    out.push_back(mags[j % 10] * dir);
  }
  return out;
}

void to_json(nlohmann::json& j, const IdTriplet& trip) {
  j = nlohmann::json::object();
  j["a"] = std::vector<double>(trip.drift().data(), trip.drift().data() + trip.dim());
  auto rows = nlohmann::json::array();
  for (int i = 0; i < trip.dim(); ++i) {
    auto row = nlohmann::json::array();
    for (int k = 0; k < trip.dim(); ++k) row.push_back(trip.covariance()(i, k));
    rows.push_back(row);
  }
  j["R"] = rows;
  auto atoms = nlohmann::json::array();
  for (const auto& atom : trip.levy().atoms()) {
    nlohmann::json a;
    a["x"] = std::vector<double>(atom.x.data(), atom.x.data() + atom.x.size());
    a["w"] = atom.w;
    atoms.push_back(a);
  }
  j["atoms"] = atoms;
}

IdTriplet triplet_from_json(const nlohmann::json& j) {
  const auto av = j.at("a").get<std::vector<double>>();
  const int d = static_cast<int>(av.size());
  Vec a = Eigen::Map<const Vec>(av.data(), d);
  Mat r(d, d);
  const auto& rows = j.at("R");
  if (static_cast<int>(rows.size()) != d) throw ConfigError("triplet_from_json: bad R shape");
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) r(i, k) = rows.at(i).at(k).get<double>();
  std::vector<LevyAtom> atoms;
  if (j.contains("atoms")) {
    for (const auto& a_json : j.at("atoms")) {
      const auto xv = a_json.at("x").get<std::vector<double>>();
      if (static_cast<int>(xv.size()) != d) throw ConfigError("triplet_from_json: bad atom dim");
      atoms.push_back({Eigen::Map<const Vec>(xv.data(), d), a_json.at("w").get<double>()});
    }
  }
  return IdTriplet(std::move(a), std::move(r), LevyMeasure(std::move(atoms)));
}

}  // namespace mehlerlab
