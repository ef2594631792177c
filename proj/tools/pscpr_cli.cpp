// Command-line front end: sweeps, figure presets and threshold / MI tables.
//
// Exit codes: 0 success, 1 invalid input, 2 numeric failures in the output.

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "pscpr/io.hpp"
#include "pscpr/pscpr.hpp"

namespace {

using namespace pscpr;

struct CommonOptions {
  std::string config;
  std::vector<std::string> settings;
  std::string out;
  std::string format;
  int workers = 0;
  long long seed = -1;
  std::vector<long long> seeds;
  long n_symbols = 0;
  bool timing = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--set", o.settings, "Override a setting, key=value (repeatable)");
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--seeds", o.seeds, "Replicate seeds")->delimiter(',');
  cmd->add_option("--n-symbols", o.n_symbols, "Symbols per realization");
  cmd->add_option("--out", o.out, "Output file (resumable); stdout when omitted");
  cmd->add_option("--format", o.format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
  cmd->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--timing", o.timing, "Record wall_time_s (output no longer reproducible)");
}

int run_spec(SweepSpec spec, const CommonOptions& o) {
  OutputSettings output;
  if (!o.config.empty()) parse_config(read_file(o.config), spec, output);
  for (const auto& kv : o.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    const auto key = kv.substr(0, eq), value = kv.substr(eq + 1);
    if (key == "out") output.out = value;
    else if (key == "format") output.format = value == "jsonl" ? OutputFormat::Jsonl : OutputFormat::Csv;
    else if (key == "workers") output.workers = std::stoi(value);
    else apply_setting(spec, key, value);
  }
  if (o.seed >= 0) spec.master_seed = static_cast<std::uint64_t>(o.seed);
  if (!o.seeds.empty()) {
    spec.seeds.clear();
    for (auto s : o.seeds) {
      if (s < 0) throw ConfigError("--seeds must be non-negative");
      spec.seeds.push_back(static_cast<std::uint64_t>(s));
    }
  }
  if (o.n_symbols > 0) spec.n_symbols = o.n_symbols;
  if (o.timing) spec.timing = true;
  if (!o.out.empty()) output.out = o.out;
  if (!o.format.empty()) output.format = o.format == "jsonl" ? OutputFormat::Jsonl : OutputFormat::Csv;
  if (o.workers > 0) output.workers = o.workers;
  spec.validate();

  std::size_t failures = 0;
  if (output.out.empty()) {
    const auto recs = run_sweep(spec, output.workers);
    write_records(std::cout, recs, output.format);
    for (const auto& r : recs) failures += r.ok() ? 0 : 1;
  } else {
    const auto res = run_sweep_to_file(spec, output.out, output.format, output.workers);
    failures = res.failures;
    std::cerr << fmt::format("{}: {} rows ({} reused), {} failed\n", output.out, res.rows,
                             res.reused, res.failures);
  }
  return failures == 0 ? 0 : 2;
}

std::vector<double> default_snr() { return arange(8.0, 1.0, 14.0); }

// Rows of a small table, in CSV or JSON lines.
void emit_table(std::ostream& out, const std::vector<std::string>& cols,
                const std::vector<std::vector<double>>& rows, const std::string& format) {
  if (format == "jsonl") {
    for (const auto& r : rows) {
      auto j = nlohmann::ordered_json::object();
      for (std::size_t i = 0; i < cols.size(); ++i) {
        if (std::isfinite(r[i])) j[cols[i]] = r[i];
        else j[cols[i]] = r[i] > 0 ? "inf" : "nan";
      }
      out << j.dump() << '\n';
    }
    return;
  }
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << fmt::format("{:.6g}", r[i]);
    out << '\n';
  }
}

std::ostream& open_out(const std::string& path, std::ofstream& file) {
  if (path.empty()) return std::cout;
  file.open(path);
  if (!file) throw std::runtime_error("cannot write " + path);
  return file;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Carrier phase recovery simulator for probabilistically shaped 16-QAM"};
  app.require_subcommand(1);

  CommonOptions sweep_opts;
  auto* sweep = app.add_subcommand("sweep", "Run a sweep described by a config file");
  sweep->add_option("--config", sweep_opts.config, "Config file (key = value)")->required()
      ->check(CLI::ExistingFile);
  add_common(sweep, sweep_opts);

  std::map<std::string, CommonOptions> preset_opts;
  std::map<std::string, CLI::App*> preset_cmds;
  for (const auto& name : preset_names()) {
    auto* cmd = app.add_subcommand(name, "Figure preset " + name);
    auto& o = preset_opts[name];
    cmd->add_option("--config", o.config, "Extra config file applied over the preset")
        ->check(CLI::ExistingFile);
    add_common(cmd, o);
    preset_cmds[name] = cmd;
  }

  std::vector<double> t1_snr = default_snr(), t1_lambda;
  std::string t1_out, t1_format = "csv";
  auto* table1 = app.add_subcommand("table1", "MAP thresholds at the MI-optimal shaping factor");
  table1->add_option("--snr", t1_snr, "SNR grid, dB")->delimiter(',');
  table1->add_option("--lambda", t1_lambda, "Shaping factor per SNR (default: MI-optimal)")
      ->delimiter(',');
  table1->add_option("--out", t1_out);
  table1->add_option("--format", t1_format)->check(CLI::IsMember({"csv", "jsonl"}));

  std::vector<double> mi_snr = default_snr(), mi_lambda = arange(0.0, 0.02, 0.3);
  int mi_nodes = 48;
  std::string mi_out, mi_format = "csv";
  auto* mi = app.add_subcommand("mi-theory", "Theoretical AWGN mutual information");
  mi->add_option("--snr", mi_snr, "SNR grid, dB")->delimiter(',');
  mi->add_option("--lambda", mi_lambda, "Shaping factors")->delimiter(',');
  mi->add_option("--nodes", mi_nodes, "Gauss-Hermite nodes per axis")->check(CLI::Range(8, 200));
  mi->add_option("--out", mi_out);
  mi->add_option("--format", mi_format)->check(CLI::IsMember({"csv", "jsonl"}));

  std::vector<double> th_snr{10}, th_lambda{0.08};
  std::string th_out, th_format = "csv";
  auto* th = app.add_subcommand("thresholds", "Median vs MAP thresholds and error probabilities");
  th->add_option("--snr", th_snr, "SNR grid, dB")->delimiter(',');
  th->add_option("--lambda", th_lambda, "Shaping factors")->delimiter(',');
  th->add_option("--out", th_out);
  th->add_option("--format", th_format)->check(CLI::IsMember({"csv", "jsonl"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    const auto c = build_16qam();
    if (*sweep) return run_spec(SweepSpec{}, sweep_opts);
    for (const auto& [name, cmd] : preset_cmds)
      if (*cmd) return run_spec(preset(name), preset_opts[name]);

    if (*table1) {
      std::map<double, double> lambda_per_snr;
      if (!t1_lambda.empty()) {
        if (t1_lambda.size() != t1_snr.size())
          throw ConfigError("--lambda needs one value per --snr value");
        for (std::size_t i = 0; i < t1_snr.size(); ++i) lambda_per_snr[t1_snr[i]] = t1_lambda[i];
      }
      std::vector<std::vector<double>> rows;
      for (const auto& r : threshold_table(t1_snr, lambda_per_snr))
        rows.push_back({r.snr_db, r.lambda, r.map.r1.as_double(), r.map.r2.as_double()});
      std::ofstream f;
      emit_table(open_out(t1_out, f), {"snr_db", "lambda", "r1", "r2"}, rows, t1_format);
      return 0;
    }
    if (*mi) {
      std::vector<std::vector<double>> rows;
      for (double snr : mi_snr) {
        for (double l : mi_lambda) {
          const auto src = shaped_source(c, l);
          rows.push_back({snr, l, src.entropy_bits, theoretical_mi(src, c, snr, mi_nodes)});
        }
      }
      std::ofstream f;
      emit_table(open_out(mi_out, f), {"snr_db", "lambda", "entropy_bits", "mi_theoretical_bits"},
                 rows, mi_format);
      return 0;
    }
    if (*th) {
      std::vector<std::vector<double>> rows;
      const auto med = median_thresholds(c);
      for (double snr : th_snr) {
        for (double l : th_lambda) {
          const auto src = shaped_source(c, l);
          const auto model = ring_model(c, src, noise_power(src.mean_energy, snr) / 2.0);
          const auto map = map_threshold_pair(model);
          rows.push_back({snr, l, model.sigma2, med.r1.as_double(), med.r2.as_double(),
                          map.r1.as_double(), map.r2.as_double(),
                          decision_error_probability(med, model),
                          decision_error_probability(map, model)});
        }
      }
      std::ofstream f;
      emit_table(open_out(th_out, f),
                 {"snr_db", "lambda", "sigma2", "r1_median", "r2_median", "r1_map", "r2_map",
                  "error_median", "error_map"},
                 rows, th_format);
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
