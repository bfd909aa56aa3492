#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "qwalk/observables.hpp"

namespace qwalk {

enum class SnapshotMode {
  EnsembleAverage,   // snapshots averaged over all realizations
  FirstRealization,  // snapshots of realization r = 1 only
};

struct EnsembleConfig {
  Eigen::Index lattice_size = 1000;  // N
  std::int64_t steps = 500;          // T
  double alpha_t = 0.0;
  double beta_s = 0.0;
  std::int64_t realizations = 200;   // R
  std::uint64_t master_seed = 1;
  std::vector<std::int64_t> snapshot_times;
  bool normalize_variance = false;
  SnapshotMode snapshot_mode = SnapshotMode::EnsembleAverage;
  unsigned workers = 1;
  double max_work = 1e10;            // cap on N * T per realization

  /// Throws InvalidParameter on out-of-range fields, ResourceLimit when
  /// N * T exceeds max_work.
  void validate() const;
};

/// Seed of realization r (1-based) under a master seed.
std::uint64_t realization_seed(std::uint64_t master_seed, std::int64_t r);

/// Observables of one realization, t = 0..T.
struct RealizationTrace {
  std::uint64_t seed = 0;
  Eigen::ArrayXd mean;
  Eigen::ArrayXd sigma;
  Eigen::ArrayXd edge;  // P_1 + P_N
  std::map<std::int64_t, Eigen::ArrayXd> snapshots;
};

/// Evolves `start` for `steps` steps, recording moments at t = 0..steps and
/// probability profiles at the requested times.
RealizationTrace trace_walk(const WalkerStated& start, const CoinPhases& phases, std::int64_t steps,
                            const std::vector<std::int64_t>& snapshot_times = {});

/// First t with edge > kBoundaryContactThreshold, if any.
std::optional<std::int64_t> boundary_contact(const Eigen::ArrayXd& edge);

/// Trajectory view of one realization (times 0..T).
TrajectoryStats to_stats(const RealizationTrace& trace);

/// Realization r (1-based) of an ensemble: fresh coin phases from
/// realization_seed(master, r), symmetric initial state, T steps.
RealizationTrace run_realization(const EnsembleConfig& config, std::int64_t r);

struct EnsembleResult {
  EnsembleConfig config;
  TrajectoryStats stats;              // realization-averaged mean and sigma
  std::vector<std::uint64_t> seeds;   // per realization, r = 1..R
  Eigen::ArrayXd final_sigma;         // sigma(T) of each realization
  double wall_seconds = 0.0;

  /// Standard error of sigma(T) across realizations.
  double final_sigma_std_error() const;
};

/// Averages are reduced in realization order, so the result does not depend
/// on config.workers or on scheduling.
EnsembleResult run_ensemble(const EnsembleConfig& config);

struct SizeScanEntry {
  Eigen::Index lattice_size = 0;
  std::int64_t steps = 0;
  std::uint64_t master_seed = 0;
  double sigma_bar = 0.0;
  std::optional<std::int64_t> boundary_contact_time;

  SizePoint point() const { return {static_cast<double>(lattice_size), sigma_bar}; }
};

/// One ensemble per size with T = N/2 and master seed derive_seed(base seed, N);
/// sigma_bar is the mean dispersion over the last window_len steps. Ordered by N.
std::vector<SizeScanEntry> size_scan(const EnsembleConfig& base, std::vector<Eigen::Index> sizes,
                                     std::size_t window_len = 100);

std::vector<SizePoint> to_points(const std::vector<SizeScanEntry>& entries);

struct SweepCell {
  double alpha_t = 0.0;
  double beta_s = 0.0;
  double gamma = 0.0;
  double std_error = 0.0;
  Regime regime = Regime::Diffusive;
  std::vector<SizeScanEntry> sizes;
};

struct SweepResult {
  std::vector<double> alphas;
  std::vector<double> betas;
  std::vector<SweepCell> cells;  // alpha-major: cells[i * betas.size() + j]

  const SweepCell& at(std::size_t i, std::size_t j) const { return cells[i * betas.size() + j]; }
};

struct SweepOptions {
  std::optional<std::filesystem::path> cell_dir;  // one JSON file per completed cell
  bool force = false;                             // recompute cells already on disk
  std::size_t window_len = 100;
  std::function<void(const SweepCell&, bool resumed)> on_cell;
};

/// Master seed of the (alpha_t, beta_s) cell.
std::uint64_t cell_seed(std::uint64_t master_seed, double alpha_t, double beta_s);

SweepResult phase_diagram_sweep(const std::vector<double>& grid_alpha,
                                const std::vector<double>& grid_beta, const EnsembleConfig& base,
                                const std::vector<Eigen::Index>& sizes,
                                const SweepOptions& options = {});

/// CSV `alpha,beta,gamma,stderr,regime`.
void write_sweep_csv(const std::filesystem::path& path, const SweepResult& result);

}  // namespace qwalk
