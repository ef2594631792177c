// Mutual information (measured and AWGN-theoretical) and phase-estimate MSE.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "pscpr/channel.hpp"
#include "pscpr/constellation.hpp"
#include "pscpr/rng.hpp"

namespace pscpr {

struct MetricReport {
  double mi_bits = 0.0;
  double mi_theoretical_bits = 0.0;
  double phase_mse = 0.0;
  std::size_t n_used = 0;
};

namespace detail {

// log2 of sum_j P_j exp(-|y - x_j|^2 / noise) relative to the x_k term,
// i.e. log2( sum_j P_j q(y|x_j) / q(y|x_k) ).
inline double log2_posterior_norm(const Constellation& c, const ShapedSource& s, cplx y,
                                  std::size_t k, double noise) {
  std::array<double, kNumPoints> e{};
  const double ek = -std::norm(y - c.points[k]) / noise;
  double emax = ek;
  for (std::size_t j = 0; j < kNumPoints; ++j) {
    e[j] = -std::norm(y - c.points[j]) / noise;
    emax = std::max(emax, e[j]);
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < kNumPoints; ++j) sum += s.pmf[j] * std::exp(e[j] - emax);
  return (std::log(sum) + emax - ek) / std::numbers::ln2;
}

}  // namespace detail

/// Achievable-rate estimate with a circular Gaussian auxiliary channel whose
/// variance is fitted to the residuals y - x:
///   MI = mean_k log2( q(y_k|x_k) / sum_i P(x_i) q(y_k|x_i) ),
/// clamped to [0, H(X)].
inline double estimate_mi(std::span<const cplx> compensated, std::span<const std::uint8_t> tx_index,
                          const ShapedSource& source, const Constellation& c) {
  if (compensated.size() != tx_index.size())
    throw std::invalid_argument("estimate_mi: length mismatch");
  if (compensated.size() < 1000) throw std::invalid_argument("estimate_mi: need >= 1000 symbols");
  const std::size_t n = compensated.size();

  double noise = 0.0;  // 2 * sigma_hat^2
  for (std::size_t k = 0; k < n; ++k) noise += std::norm(compensated[k] - c.points[tx_index[k]]);
  noise /= static_cast<double>(n);
  if (!(noise > 0.0)) return source.entropy_bits;

  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    acc -= detail::log2_posterior_norm(c, source, compensated[k], tx_index[k], noise);
  return std::clamp(acc / static_cast<double>(n), 0.0, source.entropy_bits);
}

inline double estimate_mi(std::span<const cplx> compensated, std::span<const cplx> tx,
                          const ShapedSource& source, const Constellation& c) {
  std::vector<std::uint8_t> idx(tx.size());
  std::transform(tx.begin(), tx.end(), idx.begin(),
                 [&](cplx x) { return static_cast<std::uint8_t>(c.nearest_index(x)); });
  return estimate_mi(compensated, std::span<const std::uint8_t>(idx), source, c);
}

/// Gauss-Hermite nodes and weights for weight function exp(-t^2).
struct GaussHermite {
  std::vector<double> nodes, weights;
};

/// Newton iteration on the orthonormal Hermite recurrence.
inline GaussHermite gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: n must be >= 1");
  const double pim4 = std::pow(std::numbers::pi, -0.25);
  GaussHermite gh;
  gh.nodes.assign(n, 0.0);
  gh.weights.assign(n, 0.0);
  double z = 0.0;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Initial guesses for the largest roots first.
    if (i == 0)
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    else if (i == 1)
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    else if (i == 2)
      z = 1.86 * z - 0.86 * gh.nodes[0];
    else if (i == 3)
      z = 1.91 * z - 0.91 * gh.nodes[1];
    else
      z = 2.0 * z - gh.nodes[i - 2];
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = pim4, p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double dz = p1 / pp;
      z -= dz;
      if (std::fabs(dz) <= 1e-15 * std::max(1.0, std::fabs(z))) break;
    }
    gh.nodes[i] = z;
    gh.nodes[n - 1 - i] = -z;
    gh.weights[i] = gh.weights[n - 1 - i] = 2.0 / (pp * pp);
  }
  return gh;
}

/// MI of the shaped discrete input over memoryless AWGN at Es/N0 = snr_db,
/// by 2-D Gauss-Hermite quadrature over the noise.
inline double theoretical_mi(const ShapedSource& source, const Constellation& c, double snr_db,
                             int nodes = 48) {
  const double n0 = noise_power(source.mean_energy, snr_db);
  if (n0 <= 0.0) return source.entropy_bits;
  const auto gh = gauss_hermite(nodes);
  const double scale = std::sqrt(n0);  // y = x_i + sqrt(N0) (t_a + j t_b)
  double loss = 0.0;
  for (std::size_t i = 0; i < kNumPoints; ++i) {
    if (source.pmf[i] <= 0.0) continue;
    double inner = 0.0;
    for (int a = 0; a < nodes; ++a) {
      for (int b = 0; b < nodes; ++b) {
        const cplx y = c.points[i] + scale * cplx(gh.nodes[a], gh.nodes[b]);
        inner += gh.weights[a] * gh.weights[b] * detail::log2_posterior_norm(c, source, y, i, n0);
      }
    }
    loss += source.pmf[i] * inner / std::numbers::pi;
  }
  return std::clamp(-loss, 0.0, source.entropy_bits);
}

struct MonteCarloMi {
  double mi_bits = 0.0;
  double std_error = 0.0;
};

/// Monte-Carlo counterpart of theoretical_mi.
inline MonteCarloMi theoretical_mi_mc(const ShapedSource& source, const Constellation& c,
                                      double snr_db, std::size_t samples, std::uint64_t seed) {
  if (samples < 2) throw std::invalid_argument("theoretical_mi_mc: need >= 2 samples");
  const double n0 = noise_power(source.mean_energy, snr_db);
  const auto idx = generate_symbol_indices(source, samples, seed, SourceMode::Iid);
  auto eng = make_engine(seed, Stream::Noise);
  std::normal_distribution<double> gauss(0.0, std::sqrt(n0 / 2.0));
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    const double re = gauss(eng);
    const double im = gauss(eng);
    const cplx y = c.points[idx[k]] + cplx(re, im);
    const double v = n0 > 0.0 ? -detail::log2_posterior_norm(c, source, y, idx[k], n0)
                              : -std::log2(source.pmf[idx[k]]);
    sum += v;
    sum2 += v * v;
  }
  const double ns = static_cast<double>(samples);
  const double mean = sum / ns;
  const double var = std::max(0.0, (sum2 / ns - mean * mean) * ns / (ns - 1.0));
  return {mean, std::sqrt(var / ns)};
}

/// Shaping factor on `grid` maximizing theoretical_mi at snr_db.
inline double optimal_lambda(const Constellation& c, double snr_db, std::span<const double> grid) {
  if (grid.empty()) throw std::invalid_argument("optimal_lambda: empty grid");
  double best = grid.front(), best_mi = -1.0;
  for (double l : grid) {
    const double mi = theoretical_mi(shaped_source(c, l), c, snr_db);
    if (mi > best_mi) {
      best_mi = mi;
      best = l;
    }
  }
  return best;
}

/// Mean squared phase error over [margin, n - margin), after removing the
/// global multiple of pi/2 that minimizes it.
inline double phase_mse(std::span<const double> true_phase, std::span<const double> est_phase,
                        std::size_t margin) {
  if (true_phase.size() != est_phase.size())
    throw std::invalid_argument("phase_mse: length mismatch");
  const std::size_t n = true_phase.size();
  if (2 * margin >= n) throw std::invalid_argument("phase_mse: empty evaluation range");
  const double quadrant = std::numbers::pi / 2.0;
  double mean = 0.0;
  for (std::size_t k = margin; k < n - margin; ++k) mean += est_phase[k] - true_phase[k];
  const double count = static_cast<double>(n - 2 * margin);
  mean /= count;
  // MSE is quadratic in the offset, so the best multiple is the one nearest the mean error.
  const double offset = quadrant * std::round(mean / quadrant);
  double mse = 0.0;
  for (std::size_t k = margin; k < n - margin; ++k) {
    const double d = est_phase[k] - true_phase[k] - offset;
    mse += d * d;
  }
  return mse / count;
}

}  // namespace pscpr
