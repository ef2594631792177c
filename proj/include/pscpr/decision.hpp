// Rician amplitude statistics of the three 16-QAM rings and the amplitude
// decision thresholds used to partition received symbols into rings.
//
// Each ring m of radius A_m seen through circular AWGN with per-component
// variance sigma2 has amplitude density
//   f(r | A_m) = r/sigma2 * exp(-(r^2 + A_m^2) / (2 sigma2)) * I0(r A_m / sigma2),
// and the received amplitude follows the prior-weighted mixture. The MAP
// boundary between adjacent rings is where the prior-weighted densities cross.

#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "pscpr/constellation.hpp"
#include "pscpr/special.hpp"

namespace pscpr {

/// Amplitude decision boundary; may be infinite (the outer class is never chosen).
class Boundary {
 public:
  static constexpr Boundary at(double r) { return Boundary(r); }
  static constexpr Boundary infinite() { return Boundary(); }

  constexpr bool is_infinite() const { return !value_.has_value(); }
  /// Finite value; throws for the infinite boundary.
  double value() const { return value_.value(); }
  /// Numeric view, +inf for the infinite boundary.
  constexpr double as_double() const {
    return value_ ? *value_ : std::numeric_limits<double>::infinity();
  }
  /// True when amplitude `r` falls on the outer side.
  constexpr bool outer(double r) const { return value_ && r >= *value_; }

  friend constexpr bool operator==(const Boundary&, const Boundary&) = default;

 private:
  constexpr Boundary() = default;
  constexpr explicit Boundary(double r) : value_(r) {}
  std::optional<double> value_;
};

enum class ThresholdKind { Median, Map };

struct Thresholds {
  Boundary r1 = Boundary::infinite();  ///< C1 / C2 boundary
  Boundary r2 = Boundary::infinite();  ///< C2 / C3 boundary
  ThresholdKind kind = ThresholdKind::Median;
};

struct RingModel {
  std::array<double, kNumRings> radii{};
  std::array<double, kNumRings> probs{};
  double sigma2 = 1.0;  ///< per-component noise variance

  void validate() const {
    for (std::size_t m = 0; m < kNumRings; ++m) {
      if (!(radii[m] > 0.0)) throw std::invalid_argument("RingModel: radii must be positive");
      if (m > 0 && !(radii[m] > radii[m - 1]))
        throw std::invalid_argument("RingModel: radii must be strictly ascending");
      if (!(probs[m] >= 0.0)) throw std::invalid_argument("RingModel: negative probability");
    }
    const double s = std::accumulate(probs.begin(), probs.end(), 0.0);
    if (std::fabs(s - 1.0) > 1e-12) throw std::invalid_argument("RingModel: probs must sum to 1");
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
      throw std::invalid_argument("RingModel: sigma2 must be positive");
  }
};

inline RingModel ring_model(const Constellation& c, const ShapedSource& s, double sigma2) {
  RingModel m{c.ring_radii, s.ring_probs, sigma2};
  m.validate();
  return m;
}

/// log f(r | a, sigma2); -inf at r = 0. Stable for r*a/sigma2 far beyond exp() range.
inline double rician_log_pdf(double r, double a, double sigma2) {
  if (!(r >= 0.0) || !(a >= 0.0) || !(sigma2 > 0.0))
    throw std::domain_error("rician_pdf: requires r >= 0, a >= 0, sigma2 > 0");
  if (r == 0.0) return -std::numeric_limits<double>::infinity();
  const double d = r - a;
  return std::log(r / sigma2) - d * d / (2.0 * sigma2) + log_i0_scaled(r * a / sigma2);
}

inline double rician_pdf(double r, double a, double sigma2) {
  return std::exp(rician_log_pdf(r, a, sigma2));
}

inline double mixture_pdf(double r, const RingModel& model) {
  double p = 0.0;
  for (std::size_t m = 0; m < kNumRings; ++m)
    if (model.probs[m] > 0.0) p += model.probs[m] * rician_pdf(r, model.radii[m], model.sigma2);
  return p;
}

/// Conventional thresholds halfway between adjacent ring radii.
inline Thresholds median_thresholds(const Constellation& c) {
  return {Boundary::at(0.5 * (c.ring_radii[0] + c.ring_radii[1])),
          Boundary::at(0.5 * (c.ring_radii[1] + c.ring_radii[2])), ThresholdKind::Median};
}

namespace detail {

// Probability mass of the Rician density over [lo, hi]. The support is cut
// to a +-40 sigma window around `a` and split into pieces no wider than 4 sigma
// so the adaptive rule always resolves the peak.
inline double rician_mass(double a, double sigma2, double lo, double hi) {
  const double sigma = std::sqrt(sigma2);
  lo = std::max({lo, 0.0, a - 40.0 * sigma});
  hi = std::min(hi, a + 40.0 * sigma);
  if (!(hi > lo)) return 0.0;
  const auto pieces = static_cast<int>(std::ceil((hi - lo) / (4.0 * sigma)));
  const double width = (hi - lo) / pieces;
  auto f = [&](double r) { return r > 0.0 ? rician_pdf(r, a, sigma2) : 0.0; };
  double total = 0.0;
  for (int i = 0; i < pieces; ++i) {
    const double u = lo + i * width;
    const double v = (i + 1 == pieces) ? hi : u + width;
    double err = 0.0;
    total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, u, v, 15, 1e-12,
                                                                            &err);
  }
  return total;
}

// Boundary between rings m and m+1 where the prior-weighted densities cross.
inline Boundary map_boundary(const RingModel& model, std::size_t m) {
  const double p_in = model.probs[m], p_out = model.probs[m + 1];
  if (p_out <= 0.0) return Boundary::infinite();
  if (p_in <= 0.0) return Boundary::at(0.0);

  const double a_in = model.radii[m], a_out = model.radii[m + 1], s2 = model.sigma2;
  const double log_prior = std::log(p_in) - std::log(p_out);
  // Positive while the inner ring is more likely; decreasing in r.
  auto g = [&](double r) {
    return log_prior + rician_log_pdf(r, a_in, s2) - rician_log_pdf(r, a_out, s2);
  };
  // r -> 0 limit of g, from the small-r behaviour of both densities.
  const double g0 = log_prior + (a_out * a_out - a_in * a_in) / (2.0 * s2);
  if (g0 <= 0.0) return Boundary::at(0.0);

  double lo = a_in;
  while (g(lo) <= 0.0) {
    lo *= 0.5;
    if (lo < 1e-300) return Boundary::at(0.0);
  }
  const double cap = a_out + 20.0 * std::sqrt(s2);
  double hi = std::min(lo + std::sqrt(s2), cap);
  while (g(hi) > 0.0) {
    if (hi >= cap) return Boundary::infinite();
    hi = std::min(lo + 2.0 * (hi - lo), cap);
  }
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0.0 ? lo : hi) = mid;
  }
  const double root = 0.5 * (lo + hi);

#ifndef NDEBUG
  // The likelihood ratio is monotone, so there is exactly one sign change.
  int changes = 0;
  double prev = g(1e-3 * a_in);
  for (int i = 1; i <= 200; ++i) {
    const double cur = g(cap * i / 200.0);
    if ((prev > 0.0) != (cur > 0.0)) ++changes;
    prev = cur;
  }
  assert(changes <= 1);
#endif
  return Boundary::at(root);
}

}  // namespace detail

/// MAP ring thresholds for the given amplitude model.
inline Thresholds map_threshold_pair(const RingModel& model) {
  model.validate();
  return {detail::map_boundary(model, 0), detail::map_boundary(model, 1), ThresholdKind::Map};
}

/// Ring misclassification probability between adjacent rings:
///   sum_m  p_m P(r >= t_m | A_m) + p_{m+1} P(r < t_m | A_{m+1}).
inline double decision_error_probability(const Thresholds& t, const RingModel& model) {
  model.validate();
  const std::array<Boundary, 2> bounds{t.r1, t.r2};
  const double inf = std::numeric_limits<double>::infinity();
  double err = 0.0;
  for (std::size_t m = 0; m + 1 < kNumRings; ++m) {
    const double cut = bounds[m].as_double();
    if (model.probs[m] > 0.0)
      err += model.probs[m] * detail::rician_mass(model.radii[m], model.sigma2, cut, inf);
    if (model.probs[m + 1] > 0.0)
      err += model.probs[m + 1] * detail::rician_mass(model.radii[m + 1], model.sigma2, 0.0, cut);
  }
  return err;
}

/// Blind per-component noise variance from received power and the known
/// shaped mean energy: (E|y|^2 - Es) / 2, floored at a tiny positive value.
inline double estimate_noise_var_blind(std::span<const cplx> rx, double mean_energy) {
  if (rx.empty()) throw std::invalid_argument("estimate_noise_var_blind: empty input");
  double p = 0.0;
  for (const auto& y : rx) p += std::norm(y);
  p /= static_cast<double>(rx.size());
  return std::max(0.5 * (p - mean_energy), 1e-12 * mean_energy);
}

}  // namespace pscpr
