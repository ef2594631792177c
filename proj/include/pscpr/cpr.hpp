// QPSK-partition carrier phase recovery for 16-QAM.
//
// Received symbols are split into amplitude rings. Only the inner (C1) and
// outer (C3) rings carry QPSK-like phases pi/4 + n pi/2, so their 4th powers
// share a common modulation phase of pi and can be averaged over a sliding
// window. Outer-ring terms are scaled by the weight p:
//
//   S_k   = sum_{|n| <= N/2} u_{k-n},   u = (y/|y|)^4 (C1) or p (y/|y|)^4 (C3)
//   phi_k = (arg S_k - pi) / 4
//
// The raw estimate is ambiguous modulo pi/2; unwrapping makes the track
// continuous and a genie stage removes the remaining quadrant slips.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "pscpr/channel.hpp"
#include "pscpr/constellation.hpp"
#include "pscpr/decision.hpp"

namespace pscpr {

inline constexpr double kQuadrant = std::numbers::pi / 2.0;

enum class CprVariant {
  Conventional,  ///< median thresholds, p = 1
  Modified,      ///< arbitrary thresholds (usually MAP), tunable p
};

/// How quadrant ambiguities left after unwrapping are removed.
enum class SlipCorrection {
  /// Per symbol, move the estimate to the pi/2 branch closest to the true
  /// laser phase. Removes every cycle slip and nothing else.
  PhaseTrack,
  /// Per block of symbols, apply the rotation in {1, j, -1, -j} that best
  /// matches the transmitted symbols.
  TxBlock,
  None,
};

struct CprConfig {
  Thresholds thresholds;
  std::size_t half_window = 25;  ///< N/2; the filter spans N + 1 symbols
  double weight_p = 1.0;
  CprVariant variant = CprVariant::Conventional;
  bool normalize_amplitude = true;  ///< use (y/|y|)^4 rather than y^4
  SlipCorrection slip_correction = SlipCorrection::PhaseTrack;
  std::size_t slip_block = 500;  ///< block length for SlipCorrection::TxBlock

  static CprConfig conventional(const Constellation& c, std::size_t half_window) {
    CprConfig cfg;
    cfg.thresholds = median_thresholds(c);
    cfg.half_window = half_window;
    return cfg;
  }

  static CprConfig modified(const Thresholds& t, std::size_t half_window, double weight_p) {
    CprConfig cfg;
    cfg.thresholds = t;
    cfg.half_window = half_window;
    cfg.weight_p = weight_p;
    cfg.variant = CprVariant::Modified;
    return cfg;
  }

  void validate() const {
    if (!(weight_p >= 0.0) || !std::isfinite(weight_p))
      throw std::invalid_argument("CprConfig: weight_p must be finite and >= 0");
    if (slip_block < 1) throw std::invalid_argument("CprConfig: slip_block must be >= 1");
    if (variant == CprVariant::Conventional &&
        (weight_p != 1.0 || thresholds.kind != ThresholdKind::Median))
      throw std::invalid_argument("CprConfig: conventional variant requires median thresholds, p=1");
  }
};

struct CprResult {
  std::vector<double> raw_phase;        ///< per-symbol estimate before unwrapping
  std::vector<double> est_phase;        ///< unwrapped estimate
  std::vector<double> corrected_phase;  ///< after quadrant slip removal
  std::vector<cplx> compensated;        ///< y_k exp(-j corrected_phase_k)
  std::vector<Ring> ring_labels;
  std::vector<bool> used_mask;  ///< symbol classified C1 or C3
};

/// Amplitude decision; exact ties go to the outer class.
inline std::vector<Ring> classify_rings(std::span<const cplx> rx, const Thresholds& t) {
  std::vector<Ring> rings(rx.size());
  for (std::size_t k = 0; k < rx.size(); ++k) {
    const double a = std::abs(rx[k]);
    rings[k] = t.r2.outer(a) ? Ring::Outer : (t.r1.outer(a) ? Ring::Middle : Ring::Inner);
  }
  return rings;
}

/// Weighted 4th-power Viterbi-Viterbi estimate with a rectangular window
/// that shrinks at the sequence edges. Estimates lie in (-pi/2, 0]; a window
/// with no usable symbol repeats the previous estimate.
inline std::vector<double> vv_estimate(std::span<const cplx> rx, std::span<const Ring> rings,
                                       const CprConfig& cfg) {
  if (rx.size() != rings.size())
    throw std::invalid_argument("vv_estimate: rx and rings lengths differ");
  const std::size_t n = rx.size();

  // Prefix sums of the weighted 4th powers.
  std::vector<cplx> prefix(n + 1, cplx{});
  for (std::size_t j = 0; j < n; ++j) {
    cplx u{};
    const double a = std::abs(rx[j]);
    if (rings[j] != Ring::Middle && a > 0.0) {
      const cplx v = cfg.normalize_amplitude ? rx[j] / a : rx[j];
      const cplx v2 = v * v;
      u = v2 * v2;
      if (rings[j] == Ring::Outer) u *= cfg.weight_p;
    }
    prefix[j + 1] = prefix[j] + u;
  }

  std::vector<double> est(n);
  const std::size_t h = cfg.half_window;
  double prev = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t lo = k > h ? k - h : 0;
    const std::size_t hi = std::min(n, k + h + 1);
    const cplx s = prefix[hi] - prefix[lo];
    if (s == cplx{}) {
      est[k] = prev;
    } else {
      est[k] = (std::arg(s) - std::numbers::pi) / 4.0;
    }
    prev = est[k];
  }
  return est;
}

/// Removes pi/2 jumps so consecutive estimates differ by at most pi/4.
inline std::vector<double> unwrap(std::span<const double> raw) {
  std::vector<double> out(raw.begin(), raw.end());
  for (std::size_t k = 1; k < out.size(); ++k)
    out[k] = raw[k] + kQuadrant * std::round((out[k - 1] - raw[k]) / kQuadrant);
  return out;
}

namespace detail {
inline constexpr std::array<cplx, 4> kQuadrantRotations{cplx{1, 0}, cplx{0, 1}, cplx{-1, 0},
                                                        cplx{0, -1}};

// Index q of the rotation j^q that best maps `y` onto `x` over a block.
inline int best_rotation(std::span<const cplx> y, std::span<const cplx> x) {
  int best = 0;
  double best_err = std::numeric_limits<double>::infinity();
  for (int q = 0; q < 4; ++q) {
    double e = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) e += std::norm(kQuadrantRotations[q] * y[k] - x[k]);
    if (e < best_err) {
      best_err = e;
      best = q;
    }
  }
  return best;
}
}  // namespace detail

/// Per-block quadrant rotation that best matches the transmitted symbols.
inline std::vector<cplx> genie_slip_correct(std::span<const cplx> compensated,
                                            std::span<const cplx> tx, std::size_t block) {
  if (compensated.size() != tx.size())
    throw std::invalid_argument("genie_slip_correct: length mismatch");
  if (block < 1) throw std::invalid_argument("genie_slip_correct: block must be >= 1");
  std::vector<cplx> out(compensated.begin(), compensated.end());
  for (std::size_t b = 0; b < out.size(); b += block) {
    const std::size_t len = std::min(block, out.size() - b);
    const int q = detail::best_rotation(compensated.subspan(b, len), tx.subspan(b, len));
    for (std::size_t k = b; k < b + len; ++k) out[k] *= detail::kQuadrantRotations[q];
  }
  return out;
}

/// Moves each estimate to the pi/2 branch nearest the true phase.
inline std::vector<double> genie_phase_track_correct(std::span<const double> est,
                                                     std::span<const double> true_phase) {
  if (est.size() != true_phase.size())
    throw std::invalid_argument("genie_phase_track_correct: length mismatch");
  std::vector<double> out(est.size());
  for (std::size_t k = 0; k < est.size(); ++k)
    out[k] = est[k] - kQuadrant * std::round((est[k] - true_phase[k]) / kQuadrant);
  return out;
}

/// classify -> estimate -> unwrap -> slip correction -> compensate.
inline CprResult run_cpr(const ChannelRealization& r, const CprConfig& cfg) {
  cfg.validate();
  CprResult out;
  out.ring_labels = classify_rings(r.rx, cfg.thresholds);
  out.used_mask.resize(r.rx.size());
  std::transform(out.ring_labels.begin(), out.ring_labels.end(), out.used_mask.begin(),
                 [](Ring g) { return g != Ring::Middle; });
  out.raw_phase = vv_estimate(r.rx, out.ring_labels, cfg);
  out.est_phase = unwrap(out.raw_phase);

  out.compensated.resize(r.rx.size());
  switch (cfg.slip_correction) {
    case SlipCorrection::PhaseTrack:
      out.corrected_phase = genie_phase_track_correct(out.est_phase, r.phase);
      break;
    case SlipCorrection::TxBlock: {
      // Correct the phase track with the same block rotations applied to the symbols.
      out.corrected_phase = out.est_phase;
      std::vector<cplx> comp(r.rx.size());
      for (std::size_t k = 0; k < comp.size(); ++k)
        comp[k] = r.rx[k] * std::polar(1.0, -out.est_phase[k]);
      const std::span<const cplx> cs(comp), txs(r.tx);
      for (std::size_t b = 0; b < comp.size(); b += cfg.slip_block) {
        const std::size_t len = std::min(cfg.slip_block, comp.size() - b);
        const int q = detail::best_rotation(cs.subspan(b, len), txs.subspan(b, len));
        for (std::size_t k = b; k < b + len; ++k) out.corrected_phase[k] -= q * kQuadrant;
      }
      break;
    }
    case SlipCorrection::None:
      out.corrected_phase = out.est_phase;
      break;
  }
  for (std::size_t k = 0; k < r.rx.size(); ++k)
    out.compensated[k] = r.rx[k] * std::polar(1.0, -out.corrected_phase[k]);
  return out;
}

}  // namespace pscpr
