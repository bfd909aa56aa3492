#include "qwalk/observables.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "qwalk/error.hpp"
#include "qwalk/format.hpp"

namespace qwalk {

Dispersion dispersion(const Eigen::ArrayXd& profile) {
  if (profile.size() == 0) throw InvalidInput("empty probability profile");
  if (!profile.allFinite() || (profile < 0.0).any()) {
    throw InvalidInput("probability profile has negative or non-finite entries");
  }
  const double total = profile.sum();
  if (std::abs(total - 1.0) > 1e-8) {
    throw InvalidInput("probability profile sums to " + format_double(total) + ", not 1");
  }
  const Eigen::ArrayXd n = Eigen::ArrayXd::LinSpaced(profile.size(), 1.0,
                                                     static_cast<double>(profile.size()));
  const double mean = (n * profile).sum();
  const double var = ((n - mean).square() * profile).sum();
  return {mean, std::sqrt(var)};
}

void TrajectoryStats::validate() const {
  const auto n = static_cast<Eigen::Index>(times.size());
  if (mean.size() != n || sigma.size() != n) {
    throw InvalidInput("trajectory arrays differ in length");
  }
  if ((sigma < 0.0).any()) throw InvalidInput("negative dispersion in trajectory");
}

PowerLawFit fit_log_log(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y) {
  const Eigen::Index n = x.size();
  if (n != y.size()) throw InvalidInput("fit abscissa and ordinate differ in length");
  if (n < 2) throw InsufficientData("a slope needs at least two points");
  if ((x <= 0.0).any()) throw InvalidInput("log-log fit needs positive abscissae");
  if ((y <= 0.0).any()) throw DegenerateSeries("log-log fit needs positive ordinates");

  const Eigen::ArrayXd lx = x.log();
  const Eigen::ArrayXd ly = y.log();
  const Eigen::ArrayXd dx = lx - lx.mean();
  const Eigen::ArrayXd dy = ly - ly.mean();
  const double sxx = dx.square().sum();
  if (!(sxx > 0.0)) throw DegenerateSeries("log-log fit needs distinct abscissae");
  const double slope = (dx * dy).sum() / sxx;

  double se = 0.0;
  if (n > 2) {
    const double rss = (dy - slope * dx).square().sum();
    se = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  }
  return {slope, se, static_cast<std::size_t>(n)};
}

TimeWindow default_hurst_window(const TrajectoryStats& stats) {
  if (stats.times.empty()) throw InsufficientData("empty trajectory");
  const std::int64_t t_end = stats.times.back();
  std::int64_t t_eff = t_end;
  if (stats.boundary_contact_time) t_eff = std::min(t_eff, *stats.boundary_contact_time);
  return {std::max<std::int64_t>(1, t_end / 5), t_eff};
}

PowerLawFit fit_hurst(const TrajectoryStats& stats, TimeWindow window) {
  stats.validate();
  if (window.t_max < window.t_min) throw InvalidParameter("fit window has t_max < t_min");
  if (stats.boundary_contact_time && window.t_max > *stats.boundary_contact_time) {
    throw InvalidParameter("fit window ends at t=" + std::to_string(window.t_max) +
                           ", past boundary contact at t=" +
                           std::to_string(*stats.boundary_contact_time));
  }
  std::vector<double> ts, ss;
  for (std::size_t i = 0; i < stats.times.size(); ++i) {
    const std::int64_t t = stats.times[i];
    if (t < window.t_min || t > window.t_max || t <= 0) continue;
    ts.push_back(static_cast<double>(t));
    ss.push_back(stats.sigma[static_cast<Eigen::Index>(i)]);
  }
  if (ts.size() < 5) {
    throw InsufficientData("fit window [" + std::to_string(window.t_min) + ", " +
                           std::to_string(window.t_max) + "] holds " + std::to_string(ts.size()) +
                           " points, need 5");
  }
  const Eigen::Map<const Eigen::ArrayXd> x(ts.data(), static_cast<Eigen::Index>(ts.size()));
  const Eigen::Map<const Eigen::ArrayXd> y(ss.data(), static_cast<Eigen::Index>(ss.size()));
  if ((y <= 0.0).any()) throw DegenerateSeries("zero dispersion inside the fit window");
  return fit_log_log(x, y);
}

double longtime_avg_dispersion(const TrajectoryStats& stats, std::size_t window_len) {
  stats.validate();
  if (window_len == 0) throw InvalidParameter("averaging window must be positive");
  if (stats.size() < window_len) {
    throw InsufficientData("trajectory has " + std::to_string(stats.size()) +
                           " entries, averaging window needs " + std::to_string(window_len));
  }
  return stats.sigma.tail(static_cast<Eigen::Index>(window_len)).mean();
}

PowerLawFit fit_gamma(const std::vector<SizePoint>& points) {
  if (points.size() < 3) {
    throw InsufficientData("gamma fit needs at least 3 sizes, got " +
                           std::to_string(points.size()));
  }
  Eigen::ArrayXd x(static_cast<Eigen::Index>(points.size()));
  Eigen::ArrayXd y(x.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    x[static_cast<Eigen::Index>(i)] = points[i].lattice_size;
    y[static_cast<Eigen::Index>(i)] = points[i].sigma_bar;
  }
  return fit_log_log(x, y);
}

Regime classify_regime(double gamma) {
  if (!std::isfinite(gamma)) throw InvalidInput("cannot classify a non-finite exponent");
  if (gamma < 0.10) return Regime::Localized;
  if (gamma < 0.40) return Regime::Subdiffusive;
  if (gamma < 0.60) return Regime::Diffusive;
  if (gamma < 0.90) return Regime::Superdiffusive;
  return Regime::Ballistic;
}

std::string_view to_string(Regime regime) noexcept {
  switch (regime) {
    case Regime::Localized: return "localized";
    case Regime::Subdiffusive: return "subdiffusive";
    case Regime::Diffusive: return "diffusive";
    case Regime::Superdiffusive: return "superdiffusive";
    case Regime::Ballistic: return "ballistic";
  }
  return "unknown";
}

Regime parse_regime(std::string_view name) {
  for (Regime r : {Regime::Localized, Regime::Subdiffusive, Regime::Diffusive,
                   Regime::Superdiffusive, Regime::Ballistic}) {
    if (to_string(r) == name) return r;
  }
  throw InvalidInput("unknown regime '" + std::string(name) + "'");
}

void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryStats& stats) {
  stats.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "t,mean,sigma\n";
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out << stats.times[i] << ',' << format_double(stats.mean[k]) << ','
        << format_double(stats.sigma[k]) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

void write_profile_csv(const std::filesystem::path& path, const Eigen::ArrayXd& profile) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "n,P\n";
  for (Eigen::Index i = 0; i < profile.size(); ++i) {
    out << (i + 1) << ',' << format_double(profile[i]) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace qwalk
