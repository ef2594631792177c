// Sweep configuration files and record serialization (CSV / JSON lines).
//
// Config files are `key = value` lines; `#` starts a comment. Lists are
// comma separated and numeric lists also accept `lo:step:hi` ranges, e.g.
//
//   lambda_grid = 0:0.02:0.3
//   variants    = conventional, modified
//   seeds       = 1, 2, 3

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "pscpr/harness.hpp"

namespace pscpr {

/// Thrown for malformed configuration; maps to CLI exit code 1.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, v));
  }
}

inline long to_long(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d != std::floor(d)) throw ConfigError(fmt::format("{}: '{}' is not an integer", key, v));
  return static_cast<long>(d);
}

inline std::vector<double> parse_reals(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split(v, ',')) {
    const auto parts = split(item, ':');
    if (parts.size() == 3) {
      try {
        const auto r = arange(to_double(key, parts[0]), to_double(key, parts[1]),
                              to_double(key, parts[2]));
        out.insert(out.end(), r.begin(), r.end());
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        throw ConfigError(fmt::format("{}: {}", key, e.what()));
      }
    } else if (parts.size() == 1) {
      out.push_back(to_double(key, parts[0]));
    } else {
      throw ConfigError(fmt::format("{}: malformed range '{}'", key, item));
    }
  }
  return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, v));
}

}  // namespace detail

/// Applies one `key = value` setting to a spec.
inline void apply_setting(SweepSpec& s, const std::string& key_in, const std::string& value_in) {
  using namespace detail;
  const std::string key = trim(key_in), v = trim(value_in);
  if (key == "lambda_grid") {
    s.lambda_grid = parse_reals(key, v);
  } else if (key == "p_grid") {
    s.p_grid = parse_reals(key, v);
  } else if (key == "n_grid") {
    s.n_grid.clear();
    for (double d : parse_reals(key, v)) s.n_grid.push_back(to_long(key, fmt::format("{}", d)));
  } else if (key == "snr_grid_db") {
    s.snr_grid_db = parse_reals(key, v);
  } else if (key == "linewidth_grid_hz") {
    s.linewidth_grid_hz = parse_reals(key, v);
  } else if (key == "variants") {
    s.variants.clear();
    for (const auto& name : split(v, ',')) {
      try {
        s.variants.push_back(parse_variant(name));
      } catch (const std::exception& e) {
        throw ConfigError(fmt::format("{}: {}", key, e.what()));
      }
    }
  } else if (key == "n_symbols") {
    s.n_symbols = to_long(key, v);
  } else if (key == "baud") {
    s.baud = to_double(key, v);
  } else if (key == "seeds") {
    s.seeds.clear();
    for (double d : parse_reals(key, v)) {
      if (d < 0 || d != std::floor(d)) throw ConfigError("seeds: must be non-negative integers");
      s.seeds.push_back(static_cast<std::uint64_t>(d));
    }
  } else if (key == "master_seed") {
    s.master_seed = static_cast<std::uint64_t>(to_long(key, v));
  } else if (key == "lambda_mode") {
    if (v == "grid") s.lambda_mode = LambdaMode::Grid;
    else if (v == "optimal") s.lambda_mode = LambdaMode::Optimal;
    else throw ConfigError("lambda_mode: expected grid or optimal");
  } else if (key == "noise_estimate") {
    if (v == "genie") s.noise_estimate = NoiseEstimate::Genie;
    else if (v == "blind") s.noise_estimate = NoiseEstimate::Blind;
    else throw ConfigError("noise_estimate: expected genie or blind");
  } else if (key == "slip_correction") {
    if (v == "phase-track") s.slip_correction = SlipCorrection::PhaseTrack;
    else if (v == "tx-block") s.slip_correction = SlipCorrection::TxBlock;
    else if (v == "none") s.slip_correction = SlipCorrection::None;
    else throw ConfigError("slip_correction: expected phase-track, tx-block or none");
  } else if (key == "slip_block") {
    s.slip_block = to_long(key, v);
  } else if (key == "source_mode") {
    if (v == "iid") s.source_mode = SourceMode::Iid;
    else if (v == "constant-composition") s.source_mode = SourceMode::ConstantComposition;
    else throw ConfigError("source_mode: expected iid or constant-composition");
  } else if (key == "normalize_amplitude") {
    s.normalize_amplitude = to_bool(key, v);
  } else if (key == "timing") {
    s.timing = to_bool(key, v);
  } else {
    throw ConfigError(fmt::format("unknown setting '{}'", key));
  }
}

/// Output settings that may also appear in a config file.
struct OutputSettings {
  std::string out;
  OutputFormat format = OutputFormat::Csv;
  int workers = 1;
};

/// Parses a config text onto `spec` (and `output`, for out/format/workers).
inline void parse_config(const std::string& text, SweepSpec& spec, OutputSettings& output) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("line {}: expected key = value", lineno));
    const std::string key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
    if (key == "out") {
      output.out = value;
    } else if (key == "format") {
      if (value == "csv") output.format = OutputFormat::Csv;
      else if (value == "jsonl") output.format = OutputFormat::Jsonl;
      else throw ConfigError("format: expected csv or jsonl");
    } else if (key == "workers") {
      output.workers = static_cast<int>(detail::to_long(key, value));
    } else {
      try {
        apply_setting(spec, key, value);
      } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("line {}: {}", lineno, e.what()));
      }
    }
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

/// SweepRecord columns in declared order, then status and config_hash.
inline const std::vector<std::string>& record_fields() {
  static const std::vector<std::string> f{
      "lambda",       "p",          "filter_n",     "snr_db",       "linewidth_hz",
      "variant",      "seed",       "r1",           "r2",           "entropy_bits",
      "mi_bits",      "mi_theoretical_bits",        "phase_mse",    "wall_time_s",
      "status",       "config_hash"};
  return f;
}

inline std::string csv_header() {
  std::string h;
  for (const auto& f : record_fields()) h += (h.empty() ? "" : ",") + f;
  return h;
}

namespace detail {
inline std::string num(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  return fmt::format("{:.10g}", x);
}
inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch == '\n' ? ' ' : ch);
  return out + "\"";
}
}  // namespace detail

inline std::string to_csv(const SweepRecord& r) {
  using detail::num;
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}", num(r.lambda), num(r.p),
                     r.filter_n, num(r.snr_db), num(r.linewidth_hz), to_string(r.variant), r.seed,
                     num(r.r1), num(r.r2), num(r.entropy_bits), num(r.mi_bits),
                     num(r.mi_theoretical_bits), num(r.phase_mse), num(r.wall_time_s),
                     detail::csv_escape(r.status), r.config_hash);
}

inline std::string to_jsonl(const SweepRecord& r) {
  auto j = nlohmann::ordered_json::object();
  auto real = [](double x) -> nlohmann::ordered_json {
    if (std::isfinite(x)) return x;
    return detail::num(x);  // JSON has no inf/nan
  };
  j["lambda"] = real(r.lambda);
  j["p"] = real(r.p);
  j["filter_n"] = r.filter_n;
  j["snr_db"] = real(r.snr_db);
  j["linewidth_hz"] = real(r.linewidth_hz);
  j["variant"] = to_string(r.variant);
  j["seed"] = r.seed;
  j["r1"] = real(r.r1);
  j["r2"] = real(r.r2);
  j["entropy_bits"] = real(r.entropy_bits);
  j["mi_bits"] = real(r.mi_bits);
  j["mi_theoretical_bits"] = real(r.mi_theoretical_bits);
  j["phase_mse"] = real(r.phase_mse);
  j["wall_time_s"] = real(r.wall_time_s);
  j["status"] = r.status;
  j["config_hash"] = r.config_hash;
  return j.dump();
}

inline std::string serialize(const SweepRecord& r, OutputFormat f) {
  return f == OutputFormat::Csv ? to_csv(r) : to_jsonl(r);
}

/// Complete rows of an earlier (possibly interrupted) output, keyed by
/// config_hash. Truncated or malformed lines are ignored.
inline std::map<std::string, std::string> load_completed_rows(const std::filesystem::path& path,
                                                               OutputFormat f) {
  std::map<std::string, std::string> rows;
  if (!std::filesystem::exists(path)) return rows;
  std::ifstream in(path);
  std::string line;
  const auto n_fields = record_fields().size();
  while (std::getline(in, line)) {
    if (in.eof()) break;  // last line without newline: partial write
    if (f == OutputFormat::Csv) {
      if (line == csv_header()) continue;
      // status is escaped when it contains commas; config_hash is always last.
      const auto last = line.rfind(',');
      if (last == std::string::npos) continue;
      const std::string hash = line.substr(last + 1);
      if (hash.size() != 16 || std::count(line.begin(), line.end(), ',') < static_cast<long>(n_fields - 1))
        continue;
      rows[hash] = line;
    } else {
      try {
        const auto j = nlohmann::json::parse(line);
        rows[j.at("config_hash").get<std::string>()] = line;
      } catch (const std::exception&) {
      }
    }
  }
  return rows;
}

struct SweepOutcome {
  std::size_t rows = 0;
  std::size_t reused = 0;
  std::size_t failures = 0;  ///< rows with a non-ok status
};

/// Runs a sweep and writes it to `path`, reusing rows already present there.
/// Rows are appended as their groups complete, so an interrupted run can be
/// resumed; the finished file is rewritten in canonical order, identical to
/// an uninterrupted run.
inline SweepOutcome run_sweep_to_file(const SweepSpec& spec, const std::filesystem::path& path,
                                      OutputFormat format, int workers) {
  spec.validate();
  const auto partial = std::filesystem::path(path.string() + ".partial");
  auto done = load_completed_rows(path, format);
  done.merge(load_completed_rows(partial, format));
  std::set<std::string> skip;
  for (const auto& [hash, line] : done) skip.insert(hash);

  // Progress file: previous rows first, then new rows as they arrive.
  {
    std::ofstream out(partial, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + partial.string());
    if (format == OutputFormat::Csv) out << csv_header() << '\n';
    for (const auto& [hash, line] : done) out << line << '\n';
  }

  std::ofstream progress(partial, std::ios::app);
  std::map<std::string, std::string> fresh;
  SweepOutcome outcome;
  run_sweep(spec, workers, skip, [&](const std::vector<SweepRecord>& recs) {
    for (const auto& r : recs) {
      const auto line = serialize(r, format);
      progress << line << '\n';
      fresh[r.config_hash] = line;
    }
    progress.flush();
  });
  progress.close();

  // Canonical rewrite.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    if (format == OutputFormat::Csv) out << csv_header() << '\n';
    for (const auto& g : enumerate_groups(spec)) {
      for (const auto& p : g.points) {
        const auto h = config_hash(spec, p);
        std::string line;
        if (auto it = fresh.find(h); it != fresh.end()) {
          line = it->second;
        } else if (auto jt = done.find(h); jt != done.end()) {
          line = jt->second;
          ++outcome.reused;
        } else {
          throw std::logic_error("sweep point missing from output");
        }
        const bool ok = format == OutputFormat::Csv
                            ? line.find(",ok,") != std::string::npos
                            : line.find("\"status\":\"ok\"") != std::string::npos;
        if (!ok) ++outcome.failures;
        out << line << '\n';
        ++outcome.rows;
      }
    }
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
  std::error_code ec;
  std::filesystem::remove(partial, ec);
  return outcome;
}

/// Writes records to a stream without resume support.
inline void write_records(std::ostream& out, const std::vector<SweepRecord>& recs, OutputFormat f) {
  if (f == OutputFormat::Csv) out << csv_header() << '\n';
  for (const auto& r : recs) out << serialize(r, f) << '\n';
}

}  // namespace pscpr
