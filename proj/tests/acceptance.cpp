// End-to-end acceptance checks against reference results. Prints one
// PASS/FAIL line per criterion and exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <fmt/format.h>

#include "pscpr/io.hpp"

using namespace pscpr;

namespace {

// Tolerances.
constexpr double kThresholdTol = 0.03;
constexpr double kGainTol = 0.05;
constexpr double kMseRelTol = 0.40;
constexpr double kLongFilterTol = 0.05;
constexpr double kDipRecover = 0.02;
constexpr double kWeightTol = 0.07;
constexpr double kPdfTol = 1e-8;
constexpr double kNoiselessTol = 1e-9;

const std::vector<std::uint64_t> kSeeds{1, 2, 3, 4, 5};

struct ReferenceRow {
  double snr, lambda, r1, r2;
};
const std::vector<ReferenceRow> kReference{
    {8, 0.12, 2.486, 4.551}, {9, 0.10, 2.418, 4.368},  {10, 0.08, 2.365, 4.218},
    {11, 0.06, 2.324, 4.096}, {12, 0.06, 2.317, 4.015}, {13, 0.04, 2.293, 3.937},
    {14, 0.02, 2.275, 3.875}};

double reference_lambda(double snr) {
  for (const auto& r : kReference)
    if (r.snr == snr) return r.lambda;
  throw std::logic_error("no table entry");
}

using clock_type = std::chrono::steady_clock;
double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

int failures = 0;
void report(int id, bool ok, const std::string& what, const std::string& detail) {
  if (!ok) ++failures;
  fmt::print("{} criterion {}: {}\n", ok ? "PASS" : "FAIL", id, what);
  fmt::print("    {}\n", detail);
  std::fflush(stdout);
}

// Seed-averaged metrics keyed by (variant, lambda, p, N, snr, linewidth).
using Key = std::tuple<Variant, double, double, long, double, double>;
struct Mean {
  double mi = 0, mi_theory = 0, mse = 0;
  int n = 0;
};

std::map<Key, Mean> averaged(const SweepSpec& s, bool& all_ok) {
  std::map<Key, Mean> m;
  for (const auto& r : run_sweep(s)) {
    if (!r.ok()) {
      all_ok = false;
      continue;
    }
    auto& e = m[{r.variant, r.lambda, r.p, r.filter_n, r.snr_db, r.linewidth_hz}];
    e.mi += r.mi_bits;
    e.mi_theory += r.mi_theoretical_bits;
    e.mse += r.phase_mse;
    ++e.n;
  }
  for (auto& [k, e] : m) {
    e.mi /= e.n;
    e.mi_theory /= e.n;
    e.mse /= e.n;
  }
  return m;
}

SweepSpec base_spec() {
  SweepSpec s;
  s.seeds = kSeeds;
  s.n_grid = {50};
  s.p_grid = {3};
  s.linewidth_grid_hz = {100e3};
  s.variants = {Variant::Conventional, Variant::Modified};
  return s;
}

const Mean& at(const std::map<Key, Mean>& m, Variant v, double lambda, double p, long n, double snr,
               double lw = 100e3) {
  return m.at({v, lambda, v == Variant::Conventional ? 1.0 : p, n, snr, lw});
}

void criterion1() {
  const auto t0 = clock_type::now();
  std::vector<double> snr;
  std::map<double, double> lambdas;
  for (const auto& r : kReference) {
    snr.push_back(r.snr);
    lambdas[r.snr] = r.lambda;
  }
  const auto rows = threshold_table(snr, lambdas);
  const double elapsed = seconds_since(t0);
  double worst = 0.0;
  std::string detail;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double r1 = rows[i].map.r1.as_double(), r2 = rows[i].map.r2.as_double();
    worst = std::max({worst, std::fabs(r1 - kReference[i].r1), std::fabs(r2 - kReference[i].r2)});
    detail += fmt::format("{}dB:{:.3f}/{:.3f} ", kReference[i].snr, r1, r2);
  }
  report(1, worst <= kThresholdTol && elapsed < 1.0, "MAP thresholds at the reference (SNR, lambda) points within 0.03, runtime < 1 s",
         fmt::format("{}| max dev {:.4f}, {:.3f} s", detail, worst, elapsed));
}

void criterion2() {
  const auto t0 = clock_type::now();
  auto s = base_spec();
  s.lambda_grid = {0.08};
  s.snr_grid_db = {10};
  bool ok = true;
  const auto m = averaged(s, ok);
  const double elapsed = seconds_since(t0);
  const double conv = at(m, Variant::Conventional, 0.08, 1, 50, 10).mi;
  const double mod = at(m, Variant::Modified, 0.08, 3, 50, 10).mi;
  const double gain = mod - conv;
  report(2, ok && std::fabs(gain - 0.107) <= kGainTol && elapsed < 30.0,
         "MI gain 0.107 +- 0.05 at 10 dB, lambda 0.08, N 50, p 3; runtime < 30 s",
         fmt::format("conventional {:.4f}, modified {:.4f}, gain {:.4f}, {:.1f} s", conv, mod, gain, elapsed));
}

void criterion3() {
  const std::vector<std::pair<double, double>> expected{{8, 0.100}, {9, 0.114}, {10, 0.107}};
  bool ok = true;
  std::string detail;
  for (const auto& [snr, want] : expected) {
    auto s = base_spec();
    const double lambda = reference_lambda(snr);
    s.lambda_grid = {lambda};
    s.snr_grid_db = {snr};
    const auto m = averaged(s, ok);
    const auto& c = at(m, Variant::Conventional, lambda, 1, 50, snr);
    const auto& d = at(m, Variant::Modified, lambda, 3, 50, snr);
    const double reduction = (c.mi_theory - c.mi) - (d.mi_theory - d.mi);
    ok = ok && std::fabs(reduction - want) <= kGainTol;
    detail += fmt::format("{}dB: gap {:.3f} -> {:.3f}, reduction {:.4f} (want {:.3f}); ", snr,
                          c.mi_theory - c.mi, d.mi_theory - d.mi, reduction, want);
  }
  report(3, ok, "gap-to-theory reduction (0.100, 0.114, 0.107) +- 0.05 at 8/9/10 dB", detail);
}

void criterion4() {
  const std::vector<std::tuple<double, double, double>> expected{
      {8, 7.6e-2, 5.6e-2}, {10, 3.0e-2, 1.8e-2}, {12, 8.7e-3, 5.5e-3}};
  auto s = base_spec();
  s.lambda_grid = arange(0.0, 0.02, 0.3);
  s.snr_grid_db = {8, 10, 12};
  bool ok = true;
  const auto m = averaged(s, ok);
  std::string detail;
  for (const auto& [snr, want_c, want_m] : expected) {
    const double lambda = reference_lambda(snr);
    const double c = at(m, Variant::Conventional, lambda, 1, 50, snr).mse;
    const double d = at(m, Variant::Modified, lambda, 3, 50, snr).mse;
    const bool close = std::fabs(c / want_c - 1) <= kMseRelTol && std::fabs(d / want_m - 1) <= kMseRelTol;
    ok = ok && close;
    detail += fmt::format("{}dB@{}: {:.2e}/{:.2e} (want {:.1e}/{:.1e}); ", snr, lambda, c, d, want_c, want_m);
  }
  int ordered = 0, total = 0;
  for (double snr : s.snr_grid_db) {
    for (double lambda : s.lambda_grid) {
      if (lambda == 0.0) continue;
      ++total;
      if (at(m, Variant::Modified, lambda, 3, 50, snr).mse < at(m, Variant::Conventional, lambda, 1, 50, snr).mse)
        ++ordered;
    }
  }
  ok = ok && ordered == total;
  detail += fmt::format("modified < conventional at {}/{} (snr, lambda > 0) points", ordered, total);
  report(4, ok, "phase MSE levels within 40% and modified < conventional for every lambda > 0", detail);
}

void criterion5() {
  auto s = base_spec();
  s.lambda_grid = arange(0.0, 0.02, 0.3);
  s.snr_grid_db = {10};
  s.n_grid = {10, 20, 50, 200};
  s.variants = {Variant::Conventional};
  bool ok = true;
  const auto m = averaged(s, ok);
  std::string detail;
  for (long n : {10L, 20L, 50L}) {
    std::vector<double> mi;
    for (double l : s.lambda_grid) mi.push_back(at(m, Variant::Conventional, l, 1, n, 10).mi);
    // Interior minimum over lambda <= 0.1, below MI(0), followed by a recovery.
    std::size_t arg = 0;
    for (std::size_t i = 0; i < mi.size() && s.lambda_grid[i] <= 0.1 + 1e-12; ++i)
      if (mi[i] < mi[arg]) arg = i;
    const double later = *std::max_element(mi.begin() + static_cast<long>(arg), mi.end());
    const bool dip = arg > 0 && mi[arg] < mi[0] && later - mi[arg] >= kDipRecover;
    ok = ok && dip;
    detail += fmt::format("N={}: MI(0) {:.3f}, min {:.3f} at {}, recovers to {:.3f}; ", n, mi[0], mi[arg],
                          s.lambda_grid[arg], later);
  }
  double worst = 0.0, worst_lambda = 0.0;
  for (double l : s.lambda_grid) {
    const auto& e = at(m, Variant::Conventional, l, 1, 200, 10);
    if (std::fabs(e.mi_theory - e.mi) > worst) {
      worst = std::fabs(e.mi_theory - e.mi);
      worst_lambda = l;
    }
  }
  ok = ok && worst <= kLongFilterTol;
  detail += fmt::format("N=200: max gap to theory {:.4f} at lambda {}", worst, worst_lambda);
  report(5, ok, "dip-then-recover for N in {10,20,50}; N=200 within 0.05 of theory for all lambda", detail);
}

void criterion6() {
  auto s = base_spec();
  s.snr_grid_db = {10};
  s.p_grid = {1, 5};
  s.lambda_grid = {0.15};
  s.variants = {Variant::Weighted};
  bool ok = true;
  const auto w = averaged(s, ok);
  s.lambda_grid = {0.14};
  s.p_grid = {5};
  s.variants = {Variant::Modified};
  const auto mp = averaged(s, ok);
  const double p1 = at(w, Variant::Weighted, 0.15, 1, 50, 10).mi;
  const double p5 = at(w, Variant::Weighted, 0.15, 5, 50, 10).mi;
  const double map5 = at(mp, Variant::Modified, 0.14, 5, 50, 10).mi;
  ok = ok && std::fabs(p1 - 3.07) <= kWeightTol && std::fabs(p5 - 2.9) <= kWeightTol &&
       std::fabs(map5 - 3.08) <= kWeightTol;
  report(6, ok, "median thresholds: 3.07 (p=1) -> 2.9 (p=5); MAP, p=5: 3.08; each +- 0.07",
         fmt::format("median p=1 {:.4f}, median p=5 {:.4f}, MAP p=5 {:.4f}", p1, p5, map5));
}

void criterion7() {
  auto s = base_spec();
  s.snr_grid_db = {10};
  s.lambda_grid = {0.08};
  s.linewidth_grid_hz = {100e3, 500e3, 1e6};
  bool ok = true;
  const auto m = averaged(s, ok);
  std::string detail;
  for (double lw : s.linewidth_grid_hz) {
    const double gain = at(m, Variant::Modified, 0.08, 3, 50, 10, lw).mi -
                        at(m, Variant::Conventional, 0.08, 1, 50, 10, lw).mi;
    ok = ok && std::fabs(gain - 0.1) <= kGainTol;
    detail += fmt::format("{:g} Hz: gain {:.4f}; ", lw, gain);
  }
  report(7, ok, "MI gain 0.1 +- 0.05 at linewidths 100 kHz, 500 kHz, 1 MHz", detail);
}

// Property suite.
void criterion8() {
  const auto c = build_16qam();
  std::string detail;
  bool ok = true;

  // MAP thresholds beat a scanned grid of threshold pairs.
  int map_checked = 0, map_beaten = 0;
  for (double snr : {8.0, 10.0, 14.0}) {
    for (double lambda : {0.0, 0.08, 0.16, 0.3}) {
      const auto src = shaped_source(c, lambda);
      const auto model = ring_model(c, src, noise_power(src.mean_energy, snr) / 2);
      const auto t = map_threshold_pair(model);
      const double best = decision_error_probability(t, model);
      for (double r1 = 1.6; r1 <= 3.0 + 1e-12; r1 += 0.02) {
        for (double r2 = 3.4; r2 <= 5.2 + 1e-12; r2 += 0.02) {
          const Thresholds cand{Boundary::at(r1), Boundary::at(r2), ThresholdKind::Median};
          ++map_checked;
          if (decision_error_probability(cand, model) < best - 1e-12) ++map_beaten;
        }
      }
    }
  }
  ok = ok && map_beaten == 0;
  detail += fmt::format("MAP beaten by {}/{} grid pairs; ", map_beaten, map_checked);

  // Densities integrate to one.
  boost::math::quadrature::tanh_sinh<double> ts;
  double pdf_worst = 0.0;
  for (double s2 : {0.05, 0.3, 1.0}) {
    for (double a : {std::sqrt(2.0), std::sqrt(10.0), 3 * std::sqrt(2.0)}) {
      const double hi = a + 40 * std::sqrt(s2);
      const double mass = ts.integrate([&](double r) { return r > 0 ? rician_pdf(r, a, s2) : 0.0; }, 0.0, a) +
                          ts.integrate([&](double r) { return rician_pdf(r, a, s2); }, a, hi);
      pdf_worst = std::max(pdf_worst, std::fabs(mass - 1));
    }
    const auto model = ring_model(c, shaped_source(c, 0.1), s2);
    const double hi = model.radii[2] + 40 * std::sqrt(s2);
    double mass = 0.0;
    for (int i = 0; i < 40; ++i)
      mass += ts.integrate([&](double r) { return r > 0 ? mixture_pdf(r, model) : 0.0; }, hi * i / 40,
                           hi * (i + 1) / 40);
    pdf_worst = std::max(pdf_worst, std::fabs(mass - 1));
  }
  ok = ok && pdf_worst <= kPdfTol;
  detail += fmt::format("max |pdf mass - 1| {:.1e}; ", pdf_worst);

  // Noiseless CPR with a constant phase offset recovers it exactly.
  double cpr_worst = 0.0;
  for (double lambda : {0.0, 0.15}) {
    const auto src = shaped_source(c, lambda);
    const auto tx = generate_symbols(c, src, 1 << 14, 17, SourceMode::Iid);
    const std::vector<double> phase(tx.size(), 0.3);
    const auto r = apply_channel(tx, phase, std::numeric_limits<double>::infinity(), src.mean_energy, 17);
    for (const auto& cfg : {CprConfig::conventional(c, 25), CprConfig::modified(median_thresholds(c), 25, 3)}) {
      const auto res = run_cpr(r, cfg);
      for (std::size_t k = 0; k < tx.size(); ++k) {
        cpr_worst = std::max(cpr_worst, std::fabs(res.corrected_phase[k] - 0.3));
        cpr_worst = std::max(cpr_worst, std::abs(res.compensated[k] - tx[k]));
      }
    }
  }
  ok = ok && cpr_worst <= kNoiselessTol;
  detail += fmt::format("noiseless CPR max error {:.1e}; ", cpr_worst);

  // PMF and entropy invariants over the lambda grid.
  bool pmf_ok = true;
  double prev_h = 5.0;
  for (double lambda : arange(0.0, 0.02, 0.3)) {
    const auto s = shaped_source(c, lambda);
    double sum = 0.0, h = 0.0;
    for (double p : s.pmf) {
      sum += p;
      if (p > 0) h -= p * std::log2(p);
    }
    pmf_ok = pmf_ok && std::fabs(sum - 1) < 1e-12 && std::fabs(h - s.entropy_bits) < 1e-12 &&
             s.entropy_bits <= 4.0 + 1e-12 && s.entropy_bits < prev_h &&
             s.ring_probs[0] / 4 >= s.ring_probs[1] / 8 && s.ring_probs[1] / 8 >= s.ring_probs[2] / 4;
    prev_h = s.entropy_bits;
  }
  ok = ok && pmf_ok;
  detail += fmt::format("PMF invariants {}; ", pmf_ok ? "hold" : "violated");

  // Byte-identical reruns.
  SweepSpec s;
  s.lambda_grid = {0.0, 0.14};
  s.snr_grid_db = {10};
  s.n_grid = {50};
  s.p_grid = {3};
  s.seeds = {1, 2};
  s.n_symbols = 1 << 15;
  s.variants = {Variant::Conventional, Variant::Weighted, Variant::Modified};
  std::ostringstream a, b;
  write_records(a, run_sweep(s, 1), OutputFormat::Csv);
  write_records(b, run_sweep(s, 2), OutputFormat::Csv);
  ok = ok && a.str() == b.str();
  detail += fmt::format("reruns {}", a.str() == b.str() ? "identical" : "differ");

  report(8, ok, "property suite (MAP optimality, pdf mass, noiseless CPR, PMF, determinism)", detail);
}

}  // namespace

int main() {
  const auto t0 = clock_type::now();
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  fmt::print("{} of 8 criteria failed ({:.0f} s)\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
