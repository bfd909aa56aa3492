#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "qwalk/walker.hpp"

namespace qwalk {

/// P_n = |up_n|^2 + |down_n|^2.
template <typename Scalar>
Eigen::Array<Scalar, Eigen::Dynamic, 1> probability_profile(const WalkerState<Scalar>& state) {
  return state.up.abs2() + state.down.abs2();
}

struct Dispersion {
  double mean = 0.0;   // site units, sites numbered from 1
  double sigma = 0.0;
};

/// Mean position and spread of a normalized profile over sites 1..N.
/// Throws InvalidInput if the profile has negative entries or its sum is
/// more than 1e-8 away from one.
Dispersion dispersion(const Eigen::ArrayXd& profile);

/// Moments of a walker state in one pass, without validating normalization.
/// Used inside the evolution loop; `edge` is P_1 + P_N.
struct StepMoments {
  double mean = 0.0;
  double sigma = 0.0;
  double edge = 0.0;
};

/// Reusable buffers for step moments on a fixed lattice size.
class MomentTracker {
 public:
  explicit MomentTracker(Eigen::Index lattice_size)
      : ref_(static_cast<double>(centre_site(lattice_size))),
        // Positions are measured from the centre site to avoid cancellation
        // in <x^2> - <x>^2 on large lattices.
        x_(Eigen::ArrayXd::LinSpaced(lattice_size, 1.0 - ref_,
                                     static_cast<double>(lattice_size) - ref_)),
        p_(lattice_size) {}

  template <typename Scalar>
  StepMoments operator()(const WalkerState<Scalar>& state) {
    const Eigen::Index n = state.lattice_size();
    if (n != x_.size()) throw InvalidParameter("moment tracker built for another lattice size");
    p_ = (state.up.abs2() + state.down.abs2()).template cast<double>();
    const double s0 = p_.sum();
    const double s1 = (p_ * x_).sum();
    const double s2 = (p_ * x_.square()).sum();
    const double mx = s1 / s0;
    const double var = s2 / s0 - mx * mx;
    return {ref_ + mx, var > 0.0 ? std::sqrt(var) : 0.0, p_[0] + p_[n - 1]};
  }

  /// Profile of the state passed to the most recent call.
  const Eigen::ArrayXd& last_profile() const noexcept { return p_; }

 private:
  double ref_;
  Eigen::ArrayXd x_;
  Eigen::ArrayXd p_;
};

template <typename Scalar>
StepMoments step_moments(const WalkerState<Scalar>& state) {
  return MomentTracker(state.lattice_size())(state);
}

/// Threshold on P_1 + P_N that marks the walker touching the lattice edge.
inline constexpr double kBoundaryContactThreshold = 1e-8;

/// Time series of mean position and dispersion, one entry per recorded time.
struct TrajectoryStats {
  std::vector<std::int64_t> times;
  Eigen::ArrayXd mean;
  Eigen::ArrayXd sigma;
  std::map<std::int64_t, Eigen::ArrayXd> snapshots;
  std::optional<std::int64_t> boundary_contact_time;

  std::size_t size() const noexcept { return times.size(); }
  /// Throws InvalidInput on mismatched lengths or negative sigma.
  void validate() const;
};

struct TimeWindow {
  std::int64_t t_min = 0;
  std::int64_t t_max = 0;
};

struct PowerLawFit {
  double exponent = 0.0;
  double std_error = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares slope of log y against log x.
PowerLawFit fit_log_log(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y);

/// [T/5, min(T, boundary_contact_time)] with T the last recorded time.
TimeWindow default_hurst_window(const TrajectoryStats& stats);

/// H from sigma(t) ~ t^H over the inclusive window. Needs >= 5 points with
/// t > 0; rejects windows reaching past the boundary contact time.
PowerLawFit fit_hurst(const TrajectoryStats& stats, TimeWindow window);

/// Mean of sigma over the final window_len recorded entries.
double longtime_avg_dispersion(const TrajectoryStats& stats, std::size_t window_len = 100);

struct SizePoint {
  double lattice_size = 0.0;
  double sigma_bar = 0.0;
};

/// gamma from sigma_bar ~ N^gamma over >= 3 positive points.
PowerLawFit fit_gamma(const std::vector<SizePoint>& points);

enum class Regime { Localized, Subdiffusive, Diffusive, Superdiffusive, Ballistic };

/// Half-open bands: [.., 0.10) L, [0.10, 0.40) SBD, [0.40, 0.60) D,
/// [0.60, 0.90) SPD, [0.90, ..) B.
Regime classify_regime(double gamma);

std::string_view to_string(Regime regime) noexcept;
/// Inverse of to_string; throws InvalidInput on an unknown name.
Regime parse_regime(std::string_view name);

/// CSV `t,mean,sigma`.
void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryStats& stats);
/// CSV `n,P`.
void write_profile_csv(const std::filesystem::path& path, const Eigen::ArrayXd& profile);

}  // namespace qwalk
