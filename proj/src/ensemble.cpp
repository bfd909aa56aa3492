#include "qwalk/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>

#include "json.hpp"

#include "qwalk/corrnoise.hpp"
#include "qwalk/error.hpp"
#include "qwalk/format.hpp"
#include "qwalk/seeds.hpp"
#include "qwalk/walker.hpp"

namespace qwalk {

namespace {

// Runs fn(i) for i in [0, count) on up to `workers` threads. The first
// exception thrown by any task is rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
  const unsigned n_threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), count));
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(n_threads);
  for (unsigned w = 0; w < n_threads; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next.store(count);
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

void EnsembleConfig::validate() const {
  if (lattice_size < 2) {
    throw InvalidParameter("N must be >= 2, got " + std::to_string(lattice_size));
  }
  if (steps < 1) throw InvalidParameter("T must be >= 1, got " + std::to_string(steps));
  if (realizations < 1) {
    throw InvalidParameter("realizations must be >= 1, got " + std::to_string(realizations));
  }
  if (!(alpha_t >= 0.0) || !std::isfinite(alpha_t)) {
    throw InvalidParameter("alpha_t must be finite and >= 0");
  }
  if (!(beta_s >= 0.0) || !std::isfinite(beta_s)) {
    throw InvalidParameter("beta_s must be finite and >= 0");
  }
  for (std::int64_t t : snapshot_times) {
    if (t < 0 || t > steps) {
      throw InvalidParameter("snapshot time " + std::to_string(t) + " outside [0, " +
                             std::to_string(steps) + "]");
    }
  }
  const double work = static_cast<double>(lattice_size) * static_cast<double>(steps);
  if (work > max_work) {
    throw ResourceLimit("N*T = " + format_double(work) + " exceeds the configured limit of " +
                        format_double(max_work) + " amplitude updates per realization");
  }
}

std::uint64_t realization_seed(std::uint64_t master_seed, std::int64_t r) {
  return derive_seed(master_seed, static_cast<std::uint64_t>(r));
}

RealizationTrace trace_walk(const WalkerStated& start, const CoinPhases& phases, std::int64_t steps,
                            const std::vector<std::int64_t>& snapshot_times) {
  const Eigen::Index n = start.lattice_size();
  RealizationTrace trace;
  trace.mean.resize(steps + 1);
  trace.sigma.resize(steps + 1);
  trace.edge.resize(steps + 1);

  MomentTracker moments(n);
  auto record = [&](std::int64_t t, const WalkerStated& state) {
    const auto k = t - start.time;
    const StepMoments m = moments(state);
    trace.mean[k] = m.mean;
    trace.sigma[k] = m.sigma;
    trace.edge[k] = m.edge;
    if (std::find(snapshot_times.begin(), snapshot_times.end(), t) != snapshot_times.end()) {
      trace.snapshots[t] = moments.last_profile();
    }
  };
  record(start.time, start);
  evolve<double>(start, phases, steps, record);
  return trace;
}

std::optional<std::int64_t> boundary_contact(const Eigen::ArrayXd& edge) {
  for (Eigen::Index t = 0; t < edge.size(); ++t) {
    if (edge[t] > kBoundaryContactThreshold) return static_cast<std::int64_t>(t);
  }
  return std::nullopt;
}

TrajectoryStats to_stats(const RealizationTrace& trace) {
  TrajectoryStats stats;
  stats.times.resize(static_cast<std::size_t>(trace.sigma.size()));
  for (std::size_t t = 0; t < stats.times.size(); ++t) stats.times[t] = static_cast<std::int64_t>(t);
  stats.mean = trace.mean;
  stats.sigma = trace.sigma;
  stats.snapshots = trace.snapshots;
  stats.boundary_contact_time = boundary_contact(trace.edge);
  return stats;
}

RealizationTrace run_realization(const EnsembleConfig& config, std::int64_t r) {
  const std::uint64_t seed = realization_seed(config.master_seed, r);
  const CoinPhases phases = generate_coin_phases(config.steps, config.lattice_size, config.alpha_t,
                                                 config.beta_s, seed, {config.normalize_variance});
  const bool want_snapshots = config.snapshot_mode == SnapshotMode::EnsembleAverage || r == 1;
  RealizationTrace trace =
      trace_walk(initial_state_symmetric(config.lattice_size), phases, config.steps,
                 want_snapshots ? config.snapshot_times : std::vector<std::int64_t>{});
  trace.seed = seed;
  return trace;
}

double EnsembleResult::final_sigma_std_error() const {
  const auto r = static_cast<double>(final_sigma.size());
  if (r < 2) return 0.0;
  const double mean = final_sigma.mean();
  const double var = (final_sigma - mean).square().sum() / (r - 1.0);
  return std::sqrt(var / r);
}

EnsembleResult run_ensemble(const EnsembleConfig& config) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  const std::int64_t steps = config.steps;
  const auto big_r = static_cast<std::size_t>(config.realizations);

  Eigen::ArrayXd sum_mean = Eigen::ArrayXd::Zero(steps + 1);
  Eigen::ArrayXd sum_sigma = Eigen::ArrayXd::Zero(steps + 1);
  Eigen::ArrayXd sum_edge = Eigen::ArrayXd::Zero(steps + 1);
  std::map<std::int64_t, Eigen::ArrayXd> sum_snap;

  EnsembleResult result;
  result.config = config;
  result.seeds.reserve(big_r);
  result.final_sigma.resize(static_cast<Eigen::Index>(big_r));

  // Realizations run in chunks; each chunk is reduced in index order before
  // the next starts, which bounds memory and fixes the summation order.
  const std::size_t chunk = std::max<std::size_t>(1, config.workers) * 2;
  std::vector<RealizationTrace> slots;
  for (std::size_t base = 0; base < big_r; base += chunk) {
    const std::size_t count = std::min(chunk, big_r - base);
    slots.assign(count, {});
    parallel_for(count, config.workers, [&](std::size_t i) {
      slots[i] = run_realization(config, static_cast<std::int64_t>(base + i + 1));
    });
    for (std::size_t i = 0; i < count; ++i) {
      const RealizationTrace& tr = slots[i];
      sum_mean += tr.mean;
      sum_sigma += tr.sigma;
      sum_edge += tr.edge;
      for (const auto& [t, p] : tr.snapshots) {
        auto [it, inserted] = sum_snap.try_emplace(t, p);
        if (!inserted) it->second += p;
      }
      result.seeds.push_back(tr.seed);
      result.final_sigma[static_cast<Eigen::Index>(base + i)] = tr.sigma[steps];
    }
  }

  const auto r = static_cast<double>(config.realizations);
  TrajectoryStats& stats = result.stats;
  stats.times.resize(static_cast<std::size_t>(steps + 1));
  for (std::int64_t t = 0; t <= steps; ++t) stats.times[static_cast<std::size_t>(t)] = t;
  stats.mean = sum_mean / r;
  stats.sigma = sum_sigma / r;
  const double snap_norm = config.snapshot_mode == SnapshotMode::EnsembleAverage ? r : 1.0;
  for (auto& [t, p] : sum_snap) stats.snapshots.emplace(t, p / snap_norm);
  stats.boundary_contact_time = boundary_contact(sum_edge / r);

  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

std::vector<SizeScanEntry> size_scan(const EnsembleConfig& base, std::vector<Eigen::Index> sizes,
                                     std::size_t window_len) {
  if (sizes.size() < 3) {
    throw InvalidParameter("size scan needs at least 3 lattice sizes, got " +
                           std::to_string(sizes.size()));
  }
  std::sort(sizes.begin(), sizes.end());
  if (std::adjacent_find(sizes.begin(), sizes.end()) != sizes.end()) {
    throw InvalidParameter("size scan lattice sizes must be distinct");
  }
  std::vector<SizeScanEntry> out;
  out.reserve(sizes.size());
  for (Eigen::Index n : sizes) {
    EnsembleConfig cfg = base;
    cfg.lattice_size = n;
    cfg.steps = n / 2;
    cfg.master_seed = derive_seed(base.master_seed, static_cast<std::uint64_t>(n));
    cfg.snapshot_times.clear();
    const EnsembleResult res = run_ensemble(cfg);
    out.push_back({n, cfg.steps, cfg.master_seed, longtime_avg_dispersion(res.stats, window_len),
                   res.stats.boundary_contact_time});
  }
  return out;
}

std::vector<SizePoint> to_points(const std::vector<SizeScanEntry>& entries) {
  std::vector<SizePoint> pts;
  pts.reserve(entries.size());
  for (const auto& e : entries) pts.push_back(e.point());
  return pts;
}

std::uint64_t cell_seed(std::uint64_t master_seed, double alpha_t, double beta_s) {
  return derive_seed(derive_seed(master_seed, std::bit_cast<std::uint64_t>(alpha_t)),
                     std::bit_cast<std::uint64_t>(beta_s));
}

namespace {

using nlohmann::json;

json fingerprint(const EnsembleConfig& base, const std::vector<Eigen::Index>& sizes,
                 std::size_t window_len) {
  return {{"sizes", sizes},
          {"realizations", base.realizations},
          {"master_seed", base.master_seed},
          {"normalize_variance", base.normalize_variance},
          {"window_len", window_len}};
}

json cell_to_json(const SweepCell& cell, const json& fp) {
  json sizes = json::array();
  for (const auto& e : cell.sizes) {
    sizes.push_back({{"N", e.lattice_size},
                     {"T", e.steps},
                     {"seed", e.master_seed},
                     {"sigma_bar", e.sigma_bar},
                     {"boundary_contact_time", e.boundary_contact_time
                                                   ? json(*e.boundary_contact_time)
                                                   : json(nullptr)}});
  }
  return {{"alpha_t", cell.alpha_t}, {"beta_s", cell.beta_s},
          {"gamma", cell.gamma},     {"stderr", cell.std_error},
          {"regime", to_string(cell.regime)}, {"fingerprint", fp},
          {"sizes", sizes}};
}

std::optional<SweepCell> load_cell(const std::filesystem::path& path, const json& fp) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  json j;
  try {
    in >> j;
    if (j.at("fingerprint") != fp) return std::nullopt;
    SweepCell cell;
    cell.alpha_t = j.at("alpha_t").get<double>();
    cell.beta_s = j.at("beta_s").get<double>();
    cell.gamma = j.at("gamma").get<double>();
    cell.std_error = j.at("stderr").get<double>();
    cell.regime = parse_regime(j.at("regime").get<std::string>());
    for (const auto& e : j.at("sizes")) {
      SizeScanEntry entry;
      entry.lattice_size = e.at("N").get<Eigen::Index>();
      entry.steps = e.at("T").get<std::int64_t>();
      entry.master_seed = e.at("seed").get<std::uint64_t>();
      entry.sigma_bar = e.at("sigma_bar").get<double>();
      if (!e.at("boundary_contact_time").is_null()) {
        entry.boundary_contact_time = e.at("boundary_contact_time").get<std::int64_t>();
      }
      cell.sizes.push_back(entry);
    }
    return cell;
  } catch (const std::exception&) {
    // Truncated or foreign file: recompute the cell.
    return std::nullopt;
  }
}

void store_cell(const std::filesystem::path& path, const json& j) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

SweepResult phase_diagram_sweep(const std::vector<double>& grid_alpha,
                                const std::vector<double>& grid_beta, const EnsembleConfig& base,
                                const std::vector<Eigen::Index>& sizes,
                                const SweepOptions& options) {
  if (grid_alpha.empty() || grid_beta.empty()) {
    throw InvalidParameter("phase diagram grids must be non-empty");
  }
  if (options.cell_dir) std::filesystem::create_directories(*options.cell_dir);
  const json fp = fingerprint(base, sizes, options.window_len);

  SweepResult result{grid_alpha, grid_beta, {}};
  result.cells.reserve(grid_alpha.size() * grid_beta.size());
  for (double alpha : grid_alpha) {
    for (double beta : grid_beta) {
      std::optional<std::filesystem::path> path;
      if (options.cell_dir) {
        path = *options.cell_dir /
               ("cell_a" + format_double(alpha) + "_b" + format_double(beta) + ".json");
        if (!options.force) {
          if (auto cell = load_cell(*path, fp)) {
            if (options.on_cell) options.on_cell(*cell, true);
            result.cells.push_back(std::move(*cell));
            continue;
          }
        }
      }
      EnsembleConfig cfg = base;
      cfg.alpha_t = alpha;
      cfg.beta_s = beta;
      cfg.master_seed = cell_seed(base.master_seed, alpha, beta);
      SweepCell cell{alpha, beta, 0.0, 0.0, Regime::Diffusive,
                     size_scan(cfg, sizes, options.window_len)};
      const PowerLawFit fit = fit_gamma(to_points(cell.sizes));
      cell.gamma = fit.exponent;
      cell.std_error = fit.std_error;
      cell.regime = classify_regime(fit.exponent);
      if (path) store_cell(*path, cell_to_json(cell, fp));
      if (options.on_cell) options.on_cell(cell, false);
      result.cells.push_back(std::move(cell));
    }
  }
  return result;
}

void write_sweep_csv(const std::filesystem::path& path, const SweepResult& result) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "alpha,beta,gamma,stderr,regime\n";
  for (const auto& c : result.cells) {
    out << format_double(c.alpha_t) << ',' << format_double(c.beta_s) << ','
        << format_double(c.gamma) << ',' << format_double(c.std_error) << ','
        << to_string(c.regime) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace qwalk
