// Shaped symbol generation and the back-to-back channel
//   y_k = x_k exp(j phi_k) + n_k,   phi_k = phi_{k-1} + w_k
// with Wiener laser phase noise and circular AWGN.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "pscpr/constellation.hpp"
#include "pscpr/rng.hpp"

namespace pscpr {

/// How the shaped symbol stream is drawn from the source PMF.
enum class SourceMode {
  Iid,                  ///< independent draws from the PMF
  ConstantComposition,  ///< fixed empirical composition, random order
};

struct ChannelParams {
  double snr_db = 10.0;  ///< Es/N0 with Es the shaped mean energy
  double linewidth_hz = 100e3;
  double baud = 56e9;
  std::size_t n_symbols = std::size_t{1} << 17;
  std::uint64_t seed = 1;
  SourceMode source_mode = SourceMode::Iid;

  void validate() const {
    if (!(linewidth_hz >= 0.0)) throw std::invalid_argument("channel: linewidth must be >= 0");
    if (!(baud > 0.0)) throw std::invalid_argument("channel: baud must be > 0");
    if (n_symbols < 1) throw std::invalid_argument("channel: n_symbols must be >= 1");
  }
};

struct ChannelRealization {
  std::vector<cplx> tx;
  std::vector<std::uint8_t> tx_index;  ///< constellation index of each tx symbol
  std::vector<double> phase;           ///< true laser phase, radians
  std::vector<cplx> rx;
  double noise_var_per_component = 0.0;  ///< sigma^2 = N0 / 2
  std::uint64_t seed = 0;

  std::size_t size() const { return rx.size(); }
};

/// Per-point symbol counts closest to n * pmf that sum to n (largest remainder).
inline std::array<std::size_t, kNumPoints> composition_counts(const ShapedSource& source,
                                                             std::size_t n) {
  std::array<std::size_t, kNumPoints> counts{};
  std::array<double, kNumPoints> rem{};
  std::size_t total = 0;
  for (std::size_t k = 0; k < kNumPoints; ++k) {
    const double target = static_cast<double>(n) * source.pmf[k];
    counts[k] = static_cast<std::size_t>(std::floor(target));
    rem[k] = target - static_cast<double>(counts[k]);
    total += counts[k];
  }
  std::array<std::size_t, kNumPoints> order{};
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; total < n; ++i, ++total) ++counts[order[i % kNumPoints]];
  return counts;
}

/// Constellation indices of a shaped symbol stream. Deterministic in `seed`.
inline std::vector<std::uint8_t> generate_symbol_indices(const ShapedSource& source,
                                                         std::size_t n, std::uint64_t seed,
                                                         SourceMode mode) {
  if (n < 1) throw std::invalid_argument("generate_symbols: n must be >= 1");
  auto eng = make_engine(seed, Stream::Symbols);
  std::vector<std::uint8_t> idx;
  idx.reserve(n);
  if (mode == SourceMode::Iid) {
    std::discrete_distribution<int> dist(source.pmf.begin(), source.pmf.end());
    for (std::size_t i = 0; i < n; ++i) idx.push_back(static_cast<std::uint8_t>(dist(eng)));
  } else {
    const auto counts = composition_counts(source, n);
    for (std::size_t k = 0; k < kNumPoints; ++k)
      idx.insert(idx.end(), counts[k], static_cast<std::uint8_t>(k));
    std::shuffle(idx.begin(), idx.end(), eng);
  }
  return idx;
}

inline std::vector<cplx> generate_symbols(const Constellation& c, const ShapedSource& source,
                                          std::size_t n, std::uint64_t seed, SourceMode mode) {
  const auto idx = generate_symbol_indices(source, n, seed, mode);
  std::vector<cplx> out(n);
  std::transform(idx.begin(), idx.end(), out.begin(), [&](auto k) { return c.points[k]; });
  return out;
}

/// Per-symbol phase increment variance 2*pi*linewidth/baud, rad^2.
inline double phase_increment_variance(double linewidth_hz, double baud) {
  return 2.0 * std::numbers::pi * linewidth_hz / baud;
}

/// Wiener phase track starting at 0.
inline std::vector<double> wiener_phase(std::size_t n, double linewidth_hz, double baud,
                                        std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("wiener_phase: n must be >= 1");
  if (!(linewidth_hz >= 0.0)) throw std::invalid_argument("wiener_phase: negative linewidth");
  if (!(baud > 0.0)) throw std::invalid_argument("wiener_phase: baud must be > 0");
  std::vector<double> phase(n, 0.0);
  const double sd = std::sqrt(phase_increment_variance(linewidth_hz, baud));
  if (sd == 0.0) return phase;
  auto eng = make_engine(seed, Stream::Phase);
  std::normal_distribution<double> w(0.0, sd);
  for (std::size_t k = 1; k < n; ++k) phase[k] = phase[k - 1] + w(eng);
  return phase;
}

/// Total complex noise power N0 for a given Es/N0. Zero when snr_db is +inf.
inline double noise_power(double mean_energy, double snr_db) {
  if (std::isinf(snr_db) && snr_db > 0) return 0.0;
  return mean_energy / std::pow(10.0, snr_db / 10.0);
}

/// Rotates `tx` by `phase` and adds circular Gaussian noise at Es/N0 = snr_db.
/// Leaves `tx_index` empty; see simulate_channel for the full realization.
inline ChannelRealization apply_channel(std::span<const cplx> tx, std::span<const double> phase,
                                        double snr_db, double mean_energy, std::uint64_t seed) {
  if (tx.size() != phase.size())
    throw std::invalid_argument("apply_channel: tx and phase lengths differ");
  if (!(mean_energy > 0.0)) throw std::invalid_argument("apply_channel: mean_energy must be > 0");

  ChannelRealization r;
  r.seed = seed;
  r.tx.assign(tx.begin(), tx.end());
  r.phase.assign(phase.begin(), phase.end());
  r.noise_var_per_component = noise_power(mean_energy, snr_db) / 2.0;
  r.rx.resize(tx.size());

  const double sd = std::sqrt(r.noise_var_per_component);
  auto eng = make_engine(seed, Stream::Noise);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t k = 0; k < tx.size(); ++k) {
    r.rx[k] = tx[k] * std::polar(1.0, phase[k]);
    if (sd > 0.0) {
      const double re = gauss(eng);
      const double im = gauss(eng);
      r.rx[k] += cplx(sd * re, sd * im);
    }
  }
  return r;
}

/// Full realization: shaped symbols, phase track and noisy received symbols.
inline ChannelRealization simulate_channel(const Constellation& c, const ShapedSource& source,
                                           const ChannelParams& p) {
  p.validate();
  auto idx = generate_symbol_indices(source, p.n_symbols, p.seed, p.source_mode);
  std::vector<cplx> tx(idx.size());
  std::transform(idx.begin(), idx.end(), tx.begin(), [&](auto k) { return c.points[k]; });
  const auto phase = wiener_phase(p.n_symbols, p.linewidth_hz, p.baud, p.seed);
  auto r = apply_channel(tx, phase, p.snr_db, source.mean_energy, p.seed);
  r.tx_index = std::move(idx);
  return r;
}

}  // namespace pscpr
