#include "qwalk/cli.hpp"

#include <ctime>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

#include "CLI11.hpp"

#include "qwalk/corrnoise.hpp"
#include "qwalk/format.hpp"

namespace qwalk::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(CommandKind kind) noexcept {
  switch (kind) {
    case CommandKind::Trace: return "trace";
    case CommandKind::Run: return "run";
    case CommandKind::Scan: return "scan";
    case CommandKind::PhaseDiagram: return "phase-diagram";
  }
  return "unknown";
}

namespace {

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Typed access to a config object that records which keys were consumed so
// leftovers can be reported as unknown fields.
class Fields {
 public:
  Fields(const json& j, std::string_view what) : j_(j), what_(what) {
    if (!j.is_object()) throw ConfigError(what_ + " configuration must be a JSON object");
  }

  bool has(const std::string& name) const { return j_.contains(name) && !j_.at(name).is_null(); }

  template <typename T>
  T get(const std::string& name, T fallback) {
    used_.insert(name);
    if (!has(name)) return fallback;
    return convert<T>(name, j_.at(name));
  }

  template <typename T>
  T require(const std::string& name) {
    used_.insert(name);
    if (!has(name)) throw ConfigError("config field '" + name + "' is required");
    return convert<T>(name, j_.at(name));
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.contains(key)) {
        throw ConfigError("unknown config field '" + key + "' in " + what_ + " configuration");
      }
    }
  }

 private:
  template <typename T>
  static T convert(const std::string& name, const json& v) {
    auto fail = [&](const char* expected) -> ConfigError {
      return ConfigError("config field '" + name + "': expected " + expected + ", got " + v.dump());
    };
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw fail("a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (v.is_number_unsigned()) return v.get<std::uint64_t>();
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw fail("a non-negative integer");
      return static_cast<std::uint64_t>(v.get<std::int64_t>());
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw fail("an integer");
      return v.get<T>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw fail("a number");
      return v.get<double>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw fail("a string");
      return v.get<std::string>();
    } else {
      using Elem = typename T::value_type;
      if (!v.is_array()) throw fail("an array");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(convert<Elem>(name + "[" + std::to_string(i) + "]", v.at(i)));
      }
      return out;
    }
  }

  const json& j_;
  std::string what_;
  std::set<std::string> used_;
};

const json& parameters_of(const json& j) {
  if (j.is_object() && j.contains("command") && j.contains("parameters")) return j.at("parameters");
  return j;
}

void validate_or_config_error(const EnsembleConfig& c) {
  try {
    c.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
}

SnapshotMode parse_snapshot_mode(const std::string& s) {
  if (s == "ensemble") return SnapshotMode::EnsembleAverage;
  if (s == "first") return SnapshotMode::FirstRealization;
  throw ConfigError("config field 'snapshot_mode': expected \"ensemble\" or \"first\", got \"" + s + "\"");
}

std::string snapshot_mode_name(SnapshotMode m) {
  return m == SnapshotMode::EnsembleAverage ? "ensemble" : "first";
}

unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// Fields shared by every ensemble-driven command.
void read_common(Fields& f, EnsembleConfig& c) {
  c.realizations = f.get<std::int64_t>("realizations", 200);
  c.master_seed = f.get<std::uint64_t>("seed", 1);
  c.normalize_variance = f.get<bool>("normalize_variance", false);
  const auto workers = f.get<std::int64_t>("workers", default_workers());
  if (workers < 1) throw ConfigError("config field 'workers': must be >= 1");
  c.workers = static_cast<unsigned>(workers);
  c.max_work = f.get<double>("max_work", 1e10);
}

json common_json(const EnsembleConfig& c) {
  return {{"realizations", c.realizations},
          {"seed", c.master_seed},
          {"normalize_variance", c.normalize_variance},
          {"workers", c.workers},
          {"max_work", c.max_work}};
}

std::vector<Eigen::Index> read_sizes(Fields& f) {
  const auto raw = f.require<std::vector<std::int64_t>>("sizes");
  if (raw.size() < 3) throw ConfigError("config field 'sizes': need at least 3 lattice sizes");
  std::set<std::int64_t> distinct(raw.begin(), raw.end());
  if (distinct.size() != raw.size()) throw ConfigError("config field 'sizes': sizes must be distinct");
  return {raw.begin(), raw.end()};
}

void validate_sizes(const EnsembleConfig& base, const std::vector<Eigen::Index>& sizes,
                    std::size_t window_len) {
  for (Eigen::Index n : sizes) {
    EnsembleConfig c = base;
    c.lattice_size = n;
    c.steps = n / 2;
    validate_or_config_error(c);
    if (static_cast<std::size_t>(c.steps + 1) < window_len) {
      throw ConfigError("config field 'sizes': N=" + std::to_string(n) + " gives T=" +
                        std::to_string(c.steps) + ", too short for window_len=" +
                        std::to_string(window_len));
    }
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

// Manifest lifecycle: written before any data file, completed at the end.
class Manifest {
 public:
  Manifest(CommandKind kind, json parameters, std::uint64_t seed, const fs::path& out_dir)
      : path_(out_dir / "manifest.json") {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());
    j_ = {{"command", to_string(kind)},
          {"parameters", std::move(parameters)},
          {"seed", seed},
          {"tool_version", kToolVersion},
          {"output_dir", out_dir.string()},
          {"started_at", utc_now()},
          {"finished_at", nullptr},
          {"outputs", json::array()}};
    write_json(path_, j_);
  }

  void output(const fs::path& file) { j_["outputs"].push_back(file.filename().string()); }

  void finish() {
    j_["finished_at"] = utc_now();
    write_json(path_, j_);
  }

 private:
  fs::path path_;
  json j_;
};

json optional_time(const std::optional<std::int64_t>& t) { return t ? json(*t) : json(nullptr); }

json preset_run(Eigen::Index n, std::int64_t t, double a, double b, std::int64_t r,
                std::vector<std::int64_t> snaps) {
  return {{"N", n}, {"T", t}, {"alpha_t", a}, {"beta_s", b}, {"realizations", r}, {"seed", 1},
          {"snapshot_times", snaps}};
}

std::vector<double> grid(double step) {
  std::vector<double> g;
  for (int i = 0; i * step <= 4.0 + 1e-12; ++i) g.push_back(i * step);
  return g;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"fig1a", "fig1b", "fig1c", "fig2a", "fig2c", "fig2e", "fig2g", "fig3a", "fig3b",
          "fig3c", "fig3d", "fig4a", "fig4b", "fig4c", "fig5a", "fig5b", "fig5c", "fig6", "fig7"};
}

Preset find_preset(std::string_view name, std::string_view scale) {
  if (scale != "desk" && scale != "paper") {
    throw ConfigError("unknown preset scale '" + std::string(scale) + "' (use desk or paper)");
  }
  const bool paper = scale == "paper";
  const std::string n(name);
  const std::int64_t reps = paper ? 5000 : 200;

  if (n == "fig1a" || n == "fig1b" || n == "fig1c") {
    const double nu = n == "fig1a" ? 0.0 : (n == "fig1b" ? 1.0 : 2.0);
    return {n, CommandKind::Trace, {{"nu", nu}, {"length", 200}, {"seed", 1}},
            "single correlated phase sequence, M = 200"};
  }
  struct Pair { const char* id; double a; double b; };
  for (const Pair& p : {Pair{"a", 0, 0}, Pair{"c", 4, 0}, Pair{"e", 0, 4}, Pair{"g", 4, 4}}) {
    if (n == std::string("fig2") + p.id) {
      return {n, CommandKind::Run, preset_run(1000, 500, p.a, p.b, reps, {50, 200, 500}),
              "probability profile snapshots, N = 1000, T = N/2"};
    }
  }
  for (const Pair& p : {Pair{"a", 0, 0}, Pair{"b", 4, 0}, Pair{"c", 0, 4}, Pair{"d", 4, 4}}) {
    if (n == std::string("fig3") + p.id) {
      const Eigen::Index size = paper ? 32000 : 1000;
      return {n, CommandKind::Run, preset_run(size, 5 * size, p.a, p.b, reps, {}),
              "dispersion growth, T = 5N"};
    }
  }
  const std::vector<Eigen::Index> desk_sizes{500, 1000, 2000, 4000};
  const std::vector<Eigen::Index> paper_sizes{1000, 2000, 4000, 8000, 16000, 32000};
  const std::vector<double> g = grid(paper ? 0.5 : 1.0);
  auto sweep = [&](std::vector<double> alphas, std::vector<double> betas,
                   const std::vector<Eigen::Index>& sizes, std::string desc) {
    return Preset{n, CommandKind::PhaseDiagram,
                  {{"alpha", alphas}, {"beta", betas}, {"sizes", sizes}, {"realizations", reps},
                   {"seed", 1}},
                  std::move(desc)};
  };
  const auto& sizes = paper ? paper_sizes : desk_sizes;
  if (n == "fig4a") return sweep({0.0}, g, sizes, "sigma_bar vs N, alpha_t = 0");
  if (n == "fig4b") return sweep({2.0}, g, sizes, "sigma_bar vs N, alpha_t = 2");
  if (n == "fig4c") return sweep({4.0}, g, sizes, "sigma_bar vs N, alpha_t = 4");
  if (n == "fig5a") return sweep(g, {0.0}, sizes, "sigma_bar vs N, beta_s = 0");
  if (n == "fig5b") return sweep(g, {2.0}, sizes, "sigma_bar vs N, beta_s = 2");
  if (n == "fig5c") return sweep(g, {4.0}, sizes, "sigma_bar vs N, beta_s = 4");
  const std::vector<Eigen::Index> gamma_sizes =
      paper ? std::vector<Eigen::Index>{2000, 4000, 8000, 16000, 32000} : desk_sizes;
  if (n == "fig6") return sweep(g, g, gamma_sizes, "gamma over the (alpha_t, beta_s) grid");
  if (n == "fig7") return sweep(g, g, gamma_sizes, "regime phase diagram");
  throw ConfigError("unknown preset '" + n + "'");
}

TraceSpec parse_trace_config(const json& raw) {
  Fields f(parameters_of(raw), "trace");
  TraceSpec s;
  s.correlation.nu = f.get<double>("nu", 0.0);
  s.correlation.length = f.get<std::int64_t>("length", 200);
  s.correlation.seed = f.get<std::uint64_t>("seed", 1);
  f.finish();
  if (s.correlation.length < 1) throw ConfigError("config field 'length': must be >= 1");
  if (!(s.correlation.nu >= 0.0)) throw ConfigError("config field 'nu': must be >= 0");
  return s;
}

RunSpec parse_run_config(const json& raw) {
  Fields f(parameters_of(raw), "run");
  RunSpec s;
  EnsembleConfig& c = s.ensemble;
  c.lattice_size = f.require<std::int64_t>("N");
  c.steps = f.get<std::int64_t>("T", c.lattice_size / 2);
  c.alpha_t = f.get<double>("alpha_t", 0.0);
  c.beta_s = f.get<double>("beta_s", 0.0);
  c.snapshot_times = f.get<std::vector<std::int64_t>>("snapshot_times", {});
  c.snapshot_mode = parse_snapshot_mode(f.get<std::string>("snapshot_mode", "ensemble"));
  read_common(f, c);
  if (f.has("hurst_window")) {
    const auto w = f.get<std::vector<std::int64_t>>("hurst_window", {});
    if (w.size() != 2 || w[0] > w[1]) {
      throw ConfigError("config field 'hurst_window': expected [t_min, t_max] with t_min <= t_max");
    }
    s.hurst_window = TimeWindow{w[0], w[1]};
  } else {
    f.get<std::vector<std::int64_t>>("hurst_window", {});
  }
  f.finish();
  validate_or_config_error(c);
  return s;
}

ScanSpec parse_scan_config(const json& raw) {
  Fields f(parameters_of(raw), "scan");
  ScanSpec s;
  s.base.alpha_t = f.get<double>("alpha_t", 0.0);
  s.base.beta_s = f.get<double>("beta_s", 0.0);
  s.sizes = read_sizes(f);
  s.window_len = static_cast<std::size_t>(f.get<std::int64_t>("window_len", 100));
  read_common(f, s.base);
  f.finish();
  if (s.window_len < 1) throw ConfigError("config field 'window_len': must be >= 1");
  validate_sizes(s.base, s.sizes, s.window_len);
  return s;
}

SweepSpec parse_sweep_config(const json& raw) {
  Fields f(parameters_of(raw), "phase-diagram");
  SweepSpec s;
  s.alphas = f.require<std::vector<double>>("alpha");
  s.betas = f.require<std::vector<double>>("beta");
  s.sizes = read_sizes(f);
  s.window_len = static_cast<std::size_t>(f.get<std::int64_t>("window_len", 100));
  read_common(f, s.base);
  f.finish();
  if (s.alphas.empty()) throw ConfigError("config field 'alpha': grid must be non-empty");
  if (s.betas.empty()) throw ConfigError("config field 'beta': grid must be non-empty");
  for (double a : s.alphas) {
    if (!(a >= 0.0)) throw ConfigError("config field 'alpha': exponents must be >= 0");
  }
  for (double b : s.betas) {
    if (!(b >= 0.0)) throw ConfigError("config field 'beta': exponents must be >= 0");
  }
  if (s.window_len < 1) throw ConfigError("config field 'window_len': must be >= 1");
  validate_sizes(s.base, s.sizes, s.window_len);
  return s;
}

json to_json(const TraceSpec& s) {
  return {{"nu", s.correlation.nu}, {"length", s.correlation.length}, {"seed", s.correlation.seed}};
}

json to_json(const RunSpec& s) {
  const EnsembleConfig& c = s.ensemble;
  json j = common_json(c);
  j["N"] = c.lattice_size;
  j["T"] = c.steps;
  j["alpha_t"] = c.alpha_t;
  j["beta_s"] = c.beta_s;
  j["snapshot_times"] = c.snapshot_times;
  j["snapshot_mode"] = snapshot_mode_name(c.snapshot_mode);
  if (s.hurst_window) j["hurst_window"] = {s.hurst_window->t_min, s.hurst_window->t_max};
  return j;
}

json to_json(const ScanSpec& s) {
  json j = common_json(s.base);
  j["alpha_t"] = s.base.alpha_t;
  j["beta_s"] = s.base.beta_s;
  j["sizes"] = s.sizes;
  j["window_len"] = s.window_len;
  return j;
}

json to_json(const SweepSpec& s) {
  json j = common_json(s.base);
  j["alpha"] = s.alphas;
  j["beta"] = s.betas;
  j["sizes"] = s.sizes;
  j["window_len"] = s.window_len;
  return j;
}

json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

json execute_trace(const TraceSpec& spec, const fs::path& out_dir) {
  Manifest manifest(CommandKind::Trace, to_json(spec), spec.correlation.seed, out_dir);
  CorrelationSpec c = spec.correlation;
  const Eigen::Index requested = c.length;
  if (c.length % 2 != 0) ++c.length;
  const Eigen::ArrayXd trace = generate_fbm_trace(c).head(requested);
  const PhaseSequence phases = squash_to_phase(trace);

  const fs::path raw_path = out_dir / "trace_raw.csv";
  const fs::path phase_path = out_dir / "trace.csv";
  write_sequence_csv(raw_path, trace, "value");
  manifest.output(raw_path);
  write_sequence_csv(phase_path, phases.values(), "V");
  manifest.output(phase_path);

  json summary = {{"command", "trace"}, {"parameters", to_json(spec)},
                  {"min_V", phases.values().minCoeff()}, {"max_V", phases.values().maxCoeff()},
                  {"raw_mean", trace.mean()},
                  {"raw_variance", (trace - trace.mean()).square().mean()}};
  if (requested >= 16) {
    summary["periodogram_slope"] = periodogram_slope(trace, 2, std::max<Eigen::Index>(3, requested / 8));
  }
  const fs::path summary_path = out_dir / "summary.json";
  write_json(summary_path, summary);
  manifest.output(summary_path);
  manifest.finish();
  return summary;
}

json execute_run(const RunSpec& spec, const fs::path& out_dir) {
  const EnsembleConfig& c = spec.ensemble;
  Manifest manifest(CommandKind::Run, to_json(spec), c.master_seed, out_dir);
  const EnsembleResult res = run_ensemble(c);

  const fs::path traj = out_dir / "trajectory.csv";
  write_trajectory_csv(traj, res.stats);
  manifest.output(traj);
  for (const auto& [t, p] : res.stats.snapshots) {
    const fs::path snap = out_dir / ("snapshot_t" + std::to_string(t) + ".csv");
    write_profile_csv(snap, p);
    manifest.output(snap);
  }

  json hurst;
  const TimeWindow window = spec.hurst_window.value_or(default_hurst_window(res.stats));
  hurst["window"] = {window.t_min, window.t_max};
  try {
    const PowerLawFit fit = fit_hurst(res.stats, window);
    hurst["H"] = fit.exponent;
    hurst["stderr"] = fit.std_error;
    hurst["points"] = fit.points;
    hurst["regime"] = to_string(classify_regime(fit.exponent));
  } catch (const Error& e) {
    hurst["H"] = nullptr;
    hurst["error"] = e.what();
  }

  json summary = {{"command", "run"},
                  {"parameters", to_json(spec)},
                  {"hurst", hurst},
                  {"boundary_contact_time", optional_time(res.stats.boundary_contact_time)},
                  {"boundary_contact", res.stats.boundary_contact_time.has_value()},
                  {"final_sigma", res.stats.sigma[c.steps]},
                  {"final_sigma_std_error", res.final_sigma_std_error()},
                  {"wall_seconds", res.wall_seconds}};
  if (res.stats.size() >= 100) summary["sigma_bar"] = longtime_avg_dispersion(res.stats, 100);
  const fs::path summary_path = out_dir / "summary.json";
  write_json(summary_path, summary);
  manifest.output(summary_path);
  manifest.finish();
  return summary;
}

json execute_scan(const ScanSpec& spec, const fs::path& out_dir) {
  Manifest manifest(CommandKind::Scan, to_json(spec), spec.base.master_seed, out_dir);
  const auto entries = size_scan(spec.base, spec.sizes, spec.window_len);

  const fs::path csv = out_dir / "scan.csv";
  {
    std::ofstream out(csv, std::ios::binary);
    if (!out) throw IoError("cannot open " + csv.string() + " for writing");
    out << "N,T,sigma_bar,boundary_contact_time\n";
    for (const auto& e : entries) {
      out << e.lattice_size << ',' << e.steps << ',' << format_double(e.sigma_bar) << ','
          << (e.boundary_contact_time ? std::to_string(*e.boundary_contact_time) : "") << '\n';
    }
    if (!out) throw IoError("write failed for " + csv.string());
  }
  manifest.output(csv);

  const PowerLawFit fit = fit_gamma(to_points(entries));
  json summary = {{"command", "scan"},
                  {"parameters", to_json(spec)},
                  {"gamma", fit.exponent},
                  {"stderr", fit.std_error},
                  {"regime", to_string(classify_regime(fit.exponent))}};
  const fs::path summary_path = out_dir / "summary.json";
  write_json(summary_path, summary);
  manifest.output(summary_path);
  manifest.finish();
  return summary;
}

json execute_sweep(const SweepSpec& spec, const fs::path& out_dir, bool force) {
  Manifest manifest(CommandKind::PhaseDiagram, to_json(spec), spec.base.master_seed, out_dir);
  SweepOptions opt;
  opt.cell_dir = out_dir / "cells";
  opt.force = force;
  opt.window_len = spec.window_len;
  opt.on_cell = [](const SweepCell& cell, bool resumed) {
    std::cerr << "cell alpha=" << format_double(cell.alpha_t) << " beta=" << format_double(cell.beta_s)
              << " gamma=" << format_double(cell.gamma) << ' ' << to_string(cell.regime)
              << (resumed ? " (resumed)" : "") << '\n';
  };
  const SweepResult result = phase_diagram_sweep(spec.alphas, spec.betas, spec.base, spec.sizes, opt);

  const fs::path csv = out_dir / "grid.csv";
  write_sweep_csv(csv, result);
  manifest.output(csv);

  json cells = json::array();
  for (const auto& c : result.cells) {
    cells.push_back({{"alpha_t", c.alpha_t}, {"beta_s", c.beta_s}, {"gamma", c.gamma},
                     {"stderr", c.std_error}, {"regime", to_string(c.regime)}});
  }
  json summary = {{"command", "phase-diagram"}, {"parameters", to_json(spec)}, {"cells", cells}};
  const fs::path summary_path = out_dir / "summary.json";
  write_json(summary_path, summary);
  manifest.output(summary_path);
  manifest.finish();
  return summary;
}

namespace {

struct CommonFlags {
  std::string config;
  std::string preset;
  std::string scale = "desk";
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> workers;
  std::string out;
  bool force = false;
};

json resolve_parameters(CommandKind kind, const CommonFlags& flags, std::string& name) {
  json params = json::object();
  name = std::string(to_string(kind));
  if (!flags.preset.empty()) {
    const Preset p = find_preset(flags.preset, flags.scale);
    if (p.kind != kind) {
      throw ConfigError("preset '" + p.name + "' is a " + std::string(to_string(p.kind)) +
                        " preset, not " + std::string(to_string(kind)));
    }
    params = p.parameters;
    name = p.name;
  }
  if (!flags.config.empty()) {
    const json file = parameters_of(load_json(flags.config));
    if (!file.is_object()) throw ConfigError("config file must hold a JSON object");
    params.merge_patch(file);
    if (flags.preset.empty()) name = fs::path(flags.config).stem().string();
  }
  if (flags.seed) params["seed"] = *flags.seed;
  if (flags.workers) params["workers"] = *flags.workers;
  return params;
}

fs::path resolve_out(const CommonFlags& flags, const std::string& name) {
  if (!flags.out.empty()) return flags.out;
  if (const char* root = std::getenv("QWALK_OUT"); root && *root) return fs::path(root) / name;
  return fs::path("qwalk_out") / name;
}

void add_common(CLI::App* cmd, CommonFlags& f, bool with_force) {
  cmd->add_option("--config", f.config, "JSON configuration file (or a previous manifest.json)");
  cmd->add_option("--preset", f.preset, "named preset, see `qwalk presets`");
  cmd->add_option("--scale", f.scale, "preset scale: desk or paper");
  cmd->add_option("--seed", f.seed, "master seed, overrides the config");
  cmd->add_option("--workers", f.workers, "worker threads, overrides the config");
  cmd->add_option("--out", f.out, "output directory (default $QWALK_OUT/<name>)");
  if (with_force) cmd->add_flag("--force", f.force, "recompute cells already on disk");
}

}  // namespace

int main(int argc, const char* const* argv) {
  CLI::App app{"Correlated-disorder discrete-time quantum walk simulator", "qwalk"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  CommonFlags trace_flags, run_flags, scan_flags, sweep_flags;
  std::optional<double> nu;
  std::optional<std::int64_t> length;

  auto* trace = app.add_subcommand("trace", "generate one correlated phase sequence");
  add_common(trace, trace_flags, false);
  trace->add_option("--nu", nu, "power-law exponent");
  trace->add_option("--length", length, "sequence length M");

  auto* run = app.add_subcommand("run", "ensemble run: trajectory, snapshots and Hurst fit");
  add_common(run, run_flags, false);
  auto* scan = app.add_subcommand("scan", "lattice-size scan and gamma fit for one (alpha_t, beta_s)");
  add_common(scan, scan_flags, false);
  auto* sweep = app.add_subcommand("phase-diagram", "resumable gamma sweep over an (alpha_t, beta_s) grid");
  add_common(sweep, sweep_flags, true);
  auto* presets = app.add_subcommand("presets", "list named presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    std::string name;
    if (presets->parsed()) {
      for (const auto& n : preset_names()) {
        const Preset p = find_preset(n);
        std::cout << n << "\t" << to_string(p.kind) << "\t" << p.description << '\n';
      }
      return 0;
    }
    if (trace->parsed()) {
      json params = resolve_parameters(CommandKind::Trace, trace_flags, name);
      if (nu) params["nu"] = *nu;
      if (length) params["length"] = *length;
      const TraceSpec spec = parse_trace_config(params);
      const fs::path out = resolve_out(trace_flags, name);
      execute_trace(spec, out);
      std::cout << (out / "trace.csv").string() << '\n';
      return 0;
    }
    if (run->parsed()) {
      const RunSpec spec = parse_run_config(resolve_parameters(CommandKind::Run, run_flags, name));
      const fs::path out = resolve_out(run_flags, name);
      const json summary = execute_run(spec, out);
      std::cout << summary.at("hurst").dump() << '\n' << out.string() << '\n';
      return 0;
    }
    if (scan->parsed()) {
      const ScanSpec spec = parse_scan_config(resolve_parameters(CommandKind::Scan, scan_flags, name));
      const fs::path out = resolve_out(scan_flags, name);
      const json summary = execute_scan(spec, out);
      std::cout << "gamma=" << format_double(summary.at("gamma").get<double>()) << ' '
                << summary.at("regime").get<std::string>() << '\n' << out.string() << '\n';
      return 0;
    }
    if (sweep->parsed()) {
      const SweepSpec spec =
          parse_sweep_config(resolve_parameters(CommandKind::PhaseDiagram, sweep_flags, name));
      const fs::path out = resolve_out(sweep_flags, name);
      execute_sweep(spec, out, sweep_flags.force);
      std::cout << (out / "grid.csv").string() << '\n';
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "qwalk: configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "qwalk: error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace qwalk::cli
