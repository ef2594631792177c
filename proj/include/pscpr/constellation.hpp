// 16-QAM geometry and the Maxwell-Boltzmann shaping family.
//
// The constellation is kept on the unnormalized integer grid {-3,-1,+1,+3}^2
// so that ring radii and amplitude thresholds read in the same units as the
// usual 16-QAM literature (sqrt(2), sqrt(10), 3*sqrt(2)).

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>

namespace pscpr {

using cplx = std::complex<double>;

inline constexpr std::size_t kNumPoints = 16;
inline constexpr std::size_t kNumRings = 3;

/// Amplitude ring of a 16-QAM point: C1 inner, C2 middle, C3 outer.
enum class Ring : unsigned char { Inner = 0, Middle = 1, Outer = 2 };

inline constexpr std::size_t ring_index(Ring r) { return static_cast<std::size_t>(r); }

struct Constellation {
  std::array<cplx, kNumPoints> points;
  std::array<double, kNumRings> ring_radii;
  std::array<Ring, kNumPoints> ring_of_point;

  /// Index of the grid point nearest to `x` (exact for points of the grid).
  std::size_t nearest_index(cplx x) const {
    auto level = [](double v) {
      // -3,-1,1,3 -> 0,1,2,3
      int i = static_cast<int>(std::lround((v + 3.0) / 2.0));
      return i < 0 ? 0 : (i > 3 ? 3 : i);
    };
    return static_cast<std::size_t>(4 * level(x.real()) + level(x.imag()));
  }
};

/// Canonical unnormalized 16-QAM. Point index is 4*i + q with i, q indexing
/// the in-phase and quadrature levels {-3,-1,1,3}.
inline Constellation build_16qam() {
  constexpr std::array<double, 4> levels{-3.0, -1.0, 1.0, 3.0};
  Constellation c{};
  c.ring_radii = {std::sqrt(2.0), std::sqrt(10.0), 3.0 * std::sqrt(2.0)};
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t q = 0; q < 4; ++q) {
      const std::size_t k = 4 * i + q;
      c.points[k] = {levels[i], levels[q]};
      const double e = std::norm(c.points[k]);
      c.ring_of_point[k] = e < 6.0 ? Ring::Inner : (e < 14.0 ? Ring::Middle : Ring::Outer);
    }
  }
  return c;
}

struct ShapedSource {
  double lambda = 0.0;
  std::array<double, kNumPoints> pmf{};
  std::array<double, kNumRings> ring_probs{};
  double entropy_bits = 0.0;
  double mean_energy = 0.0;
};

/// Maxwell-Boltzmann source P(x) ~ exp(-lambda |x|^2) over the constellation.
inline ShapedSource shaped_source(const Constellation& c, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("shaped_source: lambda must be finite and >= 0");

  ShapedSource s;
  s.lambda = lambda;
  // Weights relative to the inner ring keep exp() away from underflow for large lambda.
  const double e_min = 2.0;
  double z = 0.0;
  for (std::size_t k = 0; k < kNumPoints; ++k) {
    s.pmf[k] = std::exp(-lambda * (std::norm(c.points[k]) - e_min));
    z += s.pmf[k];
  }
  for (std::size_t k = 0; k < kNumPoints; ++k) {
    s.pmf[k] /= z;
    s.ring_probs[ring_index(c.ring_of_point[k])] += s.pmf[k];
    s.mean_energy += s.pmf[k] * std::norm(c.points[k]);
    if (s.pmf[k] > 0.0) s.entropy_bits -= s.pmf[k] * std::log2(s.pmf[k]);
  }
  return s;
}

/// Shaping factor whose source entropy equals `target_bits`, by bisection on
/// the monotone entropy(lambda) map.
inline double lambda_for_entropy(const Constellation& c, double target_bits) {
  if (!(target_bits > 0.0 && target_bits <= 4.0))
    throw std::invalid_argument("lambda_for_entropy: target must lie in (0, 4] bit/symbol");
  auto entropy = [&](double l) { return shaped_source(c, l).entropy_bits; };
  if (entropy(0.0) - target_bits <= 1e-15) return 0.0;

  // Entropy tends to 2 bits (the 4 inner points) as lambda grows.
  double lo = 0.0, hi = 0.5;
  while (entropy(hi) > target_bits) {
    hi *= 2.0;
    if (hi > 1e6)
      throw std::invalid_argument("lambda_for_entropy: target below achievable entropy");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (entropy(mid) > target_bits ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace pscpr
