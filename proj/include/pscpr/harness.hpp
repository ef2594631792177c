// Parameter sweeps over the simulation chain
//   source -> symbols -> channel -> thresholds -> CPR -> metrics
// with deterministic seeding and figure presets.

#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "pscpr/channel.hpp"
#include "pscpr/constellation.hpp"
#include "pscpr/cpr.hpp"
#include "pscpr/decision.hpp"
#include "pscpr/metrics.hpp"
#include "pscpr/rng.hpp"

namespace pscpr {

/// Receiver algorithm evaluated at a sweep point.
enum class Variant {
  Conventional,  ///< median thresholds, p = 1
  Weighted,      ///< median thresholds, p from the grid
  Modified,      ///< MAP thresholds, p from the grid
};

enum class LambdaMode {
  Grid,     ///< every lambda of lambda_grid
  Optimal,  ///< per SNR, the lambda of lambda_grid maximizing theoretical MI
};

enum class NoiseEstimate { Genie, Blind };

enum class OutputFormat { Csv, Jsonl };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::Conventional: return "conventional";
    case Variant::Weighted: return "weighted";
    case Variant::Modified: return "modified";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "conventional") return Variant::Conventional;
  if (s == "weighted") return Variant::Weighted;
  if (s == "modified") return Variant::Modified;
  throw std::invalid_argument("unknown variant '" + s + "'");
}

/// Inclusive arithmetic grid lo, lo+step, ..., hi (hi included within rounding).
inline std::vector<double> arange(double lo, double step, double hi) {
  if (!(step > 0.0) || hi < lo) throw std::invalid_argument("arange: invalid range");
  std::vector<double> v;
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long i = 0; i <= count; ++i) {
    // Round to 12 decimals so grid values print cleanly (0.06, not 0.060000000000000005).
    v.push_back(std::round((lo + static_cast<double>(i) * step) * 1e12) / 1e12);
  }
  return v;
}

struct SweepSpec {
  std::vector<double> lambda_grid = arange(0.0, 0.02, 0.3);
  std::vector<double> p_grid = arange(1.0, 0.5, 5.0);
  std::vector<long> n_grid = {10, 20, 50, 100, 200, 400};  ///< filter lengths N (even)
  std::vector<double> snr_grid_db = arange(8.0, 1.0, 14.0);
  std::vector<double> linewidth_grid_hz = {100e3};
  std::vector<Variant> variants = {Variant::Conventional, Variant::Modified};
  long n_symbols = 1L << 17;
  double baud = 56e9;
  std::vector<std::uint64_t> seeds = {1};

  std::uint64_t master_seed = 2021;
  LambdaMode lambda_mode = LambdaMode::Grid;
  NoiseEstimate noise_estimate = NoiseEstimate::Genie;
  SlipCorrection slip_correction = SlipCorrection::PhaseTrack;
  long slip_block = 500;
  SourceMode source_mode = SourceMode::Iid;
  bool normalize_amplitude = true;
  bool timing = false;  ///< fill wall_time_s (makes output run-dependent)

  void validate() const {
    auto need = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(std::string("sweep spec: ") + what);
    };
    need(!lambda_grid.empty(), "lambda_grid is empty");
    need(!n_grid.empty(), "n_grid is empty");
    need(!snr_grid_db.empty(), "snr_grid_db is empty");
    need(!linewidth_grid_hz.empty(), "linewidth_grid_hz is empty");
    need(!variants.empty(), "variants is empty");
    need(!seeds.empty(), "seeds is empty");
    const bool uses_p = std::any_of(variants.begin(), variants.end(),
                                    [](Variant v) { return v != Variant::Conventional; });
    need(!uses_p || !p_grid.empty(), "p_grid is empty");
    for (double l : lambda_grid) need(l >= 0.0 && std::isfinite(l), "lambda must be >= 0");
    for (double p : p_grid) need(p >= 0.0 && std::isfinite(p), "p must be >= 0");
    for (long n : n_grid) need(n >= 0 && n % 2 == 0, "filter lengths must be even and >= 0");
    for (double s : snr_grid_db) need(std::isfinite(s), "snr must be finite");
    for (double w : linewidth_grid_hz) need(w >= 0.0 && std::isfinite(w), "linewidth must be >= 0");
    need(baud > 0.0, "baud must be > 0");
    need(slip_block >= 1, "slip_block must be >= 1");
    const long max_n = *std::max_element(n_grid.begin(), n_grid.end());
    need(n_symbols >= 2 * max_n + 1000, "n_symbols must be >= 2*max(N) + 1000");
  }
};

struct SweepRecord {
  double lambda = 0.0;
  double p = 1.0;
  long filter_n = 0;
  double snr_db = 0.0;
  double linewidth_hz = 0.0;
  Variant variant = Variant::Conventional;
  std::uint64_t seed = 0;
  double r1 = 0.0;
  double r2 = 0.0;  ///< +inf for the infinite boundary
  double entropy_bits = 0.0;
  double mi_bits = 0.0;
  double mi_theoretical_bits = 0.0;
  double phase_mse = 0.0;
  double wall_time_s = 0.0;
  std::string status = "ok";
  std::string config_hash;

  bool ok() const { return status == "ok"; }
};

/// One configuration point, before evaluation.
struct SweepPoint {
  double lambda, p;
  long filter_n;
  double snr_db, linewidth_hz;
  Variant variant;
  std::uint64_t seed;
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) h = (h ^ ch) * 0x100000001b3ULL;
  return h;
}

inline std::uint64_t bits(double x) { return std::bit_cast<std::uint64_t>(x); }

}  // namespace detail

/// Content address of a point under a spec: covers every input that affects the row.
inline std::string config_hash(const SweepSpec& s, const SweepPoint& p) {
  const std::string key = fmt::format(
      "lambda={:.17g};p={:.17g};N={};snr={:.17g};lw={:.17g};variant={};seed={};master={};"
      "nsym={};baud={:.17g};noise={};slip={}/{};source={};norm={}",
      p.lambda, p.p, p.filter_n, p.snr_db, p.linewidth_hz, to_string(p.variant), p.seed,
      s.master_seed, s.n_symbols, s.baud, static_cast<int>(s.noise_estimate),
      static_cast<int>(s.slip_correction), s.slip_block, static_cast<int>(s.source_mode),
      s.normalize_amplitude);
  return fmt::format("{:016x}", detail::fnv1a(key));
}

/// Seed of the channel realization shared by every receiver configuration
/// at the same (lambda, snr, linewidth, seed).
inline std::uint64_t channel_seed(const SweepSpec& s, double lambda, double snr_db,
                                  double linewidth_hz, std::uint64_t seed) {
  return split_seed(s.master_seed,
                    {seed, detail::bits(lambda), detail::bits(snr_db), detail::bits(linewidth_hz),
                     static_cast<std::uint64_t>(s.n_symbols), detail::bits(s.baud),
                     static_cast<std::uint64_t>(s.source_mode)});
}

/// Points sharing one channel realization.
struct ChannelGroup {
  double lambda, snr_db, linewidth_hz;
  std::uint64_t seed;
  std::vector<SweepPoint> points;
};

/// Canonical enumeration: snr, linewidth, lambda, seed | N, variant, p.
inline std::vector<ChannelGroup> enumerate_groups(const SweepSpec& s) {
  s.validate();
  const auto c = build_16qam();
  std::vector<ChannelGroup> groups;
  for (double snr : s.snr_grid_db) {
    std::vector<double> lambdas = s.lambda_grid;
    if (s.lambda_mode == LambdaMode::Optimal) lambdas = {optimal_lambda(c, snr, s.lambda_grid)};
    for (double lw : s.linewidth_grid_hz) {
      for (double lambda : lambdas) {
        for (std::uint64_t seed : s.seeds) {
          ChannelGroup g{lambda, snr, lw, seed, {}};
          for (long n : s.n_grid) {
            for (Variant v : s.variants) {
              const std::vector<double> ps =
                  v == Variant::Conventional ? std::vector<double>{1.0} : s.p_grid;
              for (double p : ps) g.points.push_back({lambda, p, n, snr, lw, v, seed});
            }
          }
          groups.push_back(std::move(g));
        }
      }
    }
  }
  return groups;
}

/// Evaluates every point of a group on one shared channel realization.
/// Points whose hash is in `skip` are left out of the result.
inline std::vector<SweepRecord> evaluate_group(const SweepSpec& s, const ChannelGroup& g,
                                               const std::set<std::string>& skip = {}) {
  using clock = std::chrono::steady_clock;
  const auto c = build_16qam();
  std::vector<SweepRecord> out;
  std::vector<const SweepPoint*> todo;
  for (const auto& p : g.points)
    if (!skip.contains(config_hash(s, p))) todo.push_back(&p);
  if (todo.empty()) return out;

  auto fill_point = [&](SweepRecord& rec, const SweepPoint& p) {
    rec.lambda = p.lambda;
    rec.p = p.p;
    rec.filter_n = p.filter_n;
    rec.snr_db = p.snr_db;
    rec.linewidth_hz = p.linewidth_hz;
    rec.variant = p.variant;
    rec.seed = p.seed;
    rec.config_hash = config_hash(s, p);
  };

  std::optional<ShapedSource> source;
  std::optional<ChannelRealization> real;
  double mi_theory = 0.0;
  std::string group_error;
  const auto t_group = clock::now();
  try {
    source = shaped_source(c, g.lambda);
    ChannelParams cp;
    cp.snr_db = g.snr_db;
    cp.linewidth_hz = g.linewidth_hz;
    cp.baud = s.baud;
    cp.n_symbols = static_cast<std::size_t>(s.n_symbols);
    cp.seed = channel_seed(s, g.lambda, g.snr_db, g.linewidth_hz, g.seed);
    cp.source_mode = s.source_mode;
    real = simulate_channel(c, *source, cp);
    mi_theory = theoretical_mi(*source, c, g.snr_db);
  } catch (const std::exception& e) {
    group_error = std::string("error: ") + e.what();
  }
  const double group_time =
      std::chrono::duration<double>(clock::now() - t_group).count() / static_cast<double>(todo.size());

  for (const SweepPoint* pp : todo) {
    const auto t0 = clock::now();
    SweepRecord rec;
    fill_point(rec, *pp);
    if (!group_error.empty()) {
      rec.status = group_error;
      out.push_back(std::move(rec));
      continue;
    }
    try {
      rec.entropy_bits = source->entropy_bits;
      rec.mi_theoretical_bits = mi_theory;
      const auto half = static_cast<std::size_t>(pp->filter_n / 2);
      CprConfig cfg;
      if (pp->variant == Variant::Conventional) {
        cfg = CprConfig::conventional(c, half);
      } else if (pp->variant == Variant::Weighted) {
        cfg = CprConfig::modified(median_thresholds(c), half, pp->p);
      } else {
        const double sigma2 = s.noise_estimate == NoiseEstimate::Genie
                                  ? real->noise_var_per_component
                                  : estimate_noise_var_blind(real->rx, source->mean_energy);
        cfg = CprConfig::modified(map_threshold_pair(ring_model(c, *source, sigma2)), half, pp->p);
      }
      cfg.slip_correction = s.slip_correction;
      cfg.slip_block = static_cast<std::size_t>(s.slip_block);
      cfg.normalize_amplitude = s.normalize_amplitude;
      rec.r1 = cfg.thresholds.r1.as_double();
      rec.r2 = cfg.thresholds.r2.as_double();

      const auto res = run_cpr(*real, cfg);
      const std::size_t n = real->size();
      const std::size_t used = n - 2 * half;
      rec.mi_bits = estimate_mi(std::span(res.compensated).subspan(half, used),
                                std::span<const std::uint8_t>(real->tx_index).subspan(half, used),
                                *source, c);
      rec.phase_mse = phase_mse(real->phase, res.corrected_phase, half);
      if (!std::isfinite(rec.mi_bits) || !std::isfinite(rec.phase_mse) ||
          !std::isfinite(rec.entropy_bits) || !std::isfinite(rec.mi_theoretical_bits) ||
          !std::isfinite(rec.r1))
        rec.status = "error: non-finite metric";
    } catch (const std::exception& e) {
      rec.status = std::string("error: ") + e.what();
    }
    if (s.timing)
      rec.wall_time_s = group_time + std::chrono::duration<double>(clock::now() - t0).count();
    out.push_back(std::move(rec));
  }
  return out;
}

/// Runs the sweep. Groups are evaluated by `workers` threads; `emit` (if set)
/// receives each group's records serially and in canonical order. Points
/// whose hash is in `skip` are not evaluated.
inline std::vector<SweepRecord> run_sweep(
    const SweepSpec& s, int workers = 1, const std::set<std::string>& skip = {},
    const std::function<void(const std::vector<SweepRecord>&)>& emit = {}) {
  const auto groups = enumerate_groups(s);
  workers = std::max(1, workers);
  std::vector<std::optional<std::vector<SweepRecord>>> results(groups.size());
  std::vector<SweepRecord> all;
  std::mutex mu;
  std::size_t next_emit = 0;
  std::atomic<std::size_t> next_group{0};

  auto flush_ready = [&] {
    // Caller holds mu.
    while (next_emit < results.size() && results[next_emit]) {
      if (emit) emit(*results[next_emit]);
      for (auto& r : *results[next_emit]) all.push_back(std::move(r));
      results[next_emit].reset();
      ++next_emit;
    }
  };
  auto work = [&] {
    for (std::size_t i = next_group++; i < groups.size(); i = next_group++) {
      auto recs = evaluate_group(s, groups[i], skip);
      std::lock_guard lock(mu);
      results[i] = std::move(recs);
      flush_ready();
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  return all;
}

/// Named presets reproducing the figure data sets.
inline SweepSpec preset(const std::string& name) {
  SweepSpec s;
  s.seeds = {1, 2, 3, 4, 5};
  s.n_grid = {50};
  s.snr_grid_db = {10};
  s.p_grid = {3};
  if (name == "fig3") {
    s.snr_grid_db = {9, 10};
    s.n_grid = {10, 20, 50, 100, 200};
    s.variants = {Variant::Conventional};
  } else if (name == "fig4") {
    s.p_grid = arange(1.0, 0.5, 5.0);
    s.variants = {Variant::Weighted};
  } else if (name == "fig7") {
    s.p_grid = arange(1.0, 0.5, 5.0);
    s.variants = {Variant::Modified};
  } else if (name == "fig8") {
    s.variants = {Variant::Conventional, Variant::Weighted, Variant::Modified};
  } else if (name == "fig9") {
    s.snr_grid_db = {8, 10, 12};
    s.variants = {Variant::Conventional, Variant::Modified};
  } else if (name == "fig10a") {
    s.snr_grid_db = arange(8.0, 1.0, 14.0);
    s.lambda_mode = LambdaMode::Optimal;
    s.variants = {Variant::Conventional, Variant::Modified};
  } else if (name == "fig10b") {
    s.linewidth_grid_hz = {100e3, 500e3, 1e6};
    s.variants = {Variant::Conventional, Variant::Modified};
  } else {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  return s;
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"fig3", "fig4",  "fig7",  "fig8",
                                              "fig9", "fig10a", "fig10b"};
  return names;
}

struct ThresholdRow {
  double snr_db, lambda, sigma2;
  Thresholds map;
};

/// MAP thresholds per SNR at the given shaping factor, or at the
/// theoretically optimal one on `lambda_grid` when none is given.
inline std::vector<ThresholdRow> threshold_table(std::span<const double> snr_grid_db,
                                                 const std::map<double, double>& lambda_per_snr = {},
                                                 std::span<const double> lambda_grid = {}) {
  const auto c = build_16qam();
  const auto default_grid = arange(0.0, 0.02, 0.3);
  if (lambda_grid.empty()) lambda_grid = default_grid;
  std::vector<ThresholdRow> rows;
  for (double snr : snr_grid_db) {
    const auto it = lambda_per_snr.find(snr);
    const double lambda = it != lambda_per_snr.end() ? it->second : optimal_lambda(c, snr, lambda_grid);
    const auto src = shaped_source(c, lambda);
    const double sigma2 = noise_power(src.mean_energy, snr) / 2.0;
    rows.push_back({snr, lambda, sigma2, map_threshold_pair(ring_model(c, src, sigma2))});
  }
  return rows;
}

}  // namespace pscpr
