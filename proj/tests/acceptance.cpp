// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails. Pass criterion numbers as arguments
// to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "qwalk/corrnoise.hpp"
#include "qwalk/ensemble.hpp"
#include "qwalk/format.hpp"
#include "qwalk/observables.hpp"
#include "qwalk/walker.hpp"

using namespace qwalk;
namespace fs = std::filesystem;

namespace {

constexpr double kNormTol = 1e-9;
constexpr double kOracleTol = 1e-10;
constexpr double kBallisticTol = 0.05;
constexpr double kDiffusiveH = 0.50;
constexpr double kDiffusiveTol = 0.10;
constexpr double kLocalizedMaxH = 0.15;
constexpr double kSaturationTol = 0.05;
constexpr double kDelocalizedTol = 0.07;
constexpr double kGammaDiffusive = 0.5;
constexpr double kGammaBallistic = 1.0;
constexpr double kGammaTol = 0.1;
constexpr double kGammaLocalizedMax = 0.15;
constexpr double kSubdiffusiveLow = 0.1;
constexpr double kSubdiffusiveHigh = 0.5;
constexpr double kPeakFactor = 3.0;
constexpr int kPeakSymmetryTol = 5;
constexpr double kSpectralTol = 0.3;

constexpr std::int64_t kDeskRealizations = 200;
constexpr std::uint64_t kMasterSeed = 20240611;
const std::vector<Eigen::Index> kDispersionSizes{1000, 2000};
const std::vector<Eigen::Index> kGammaSizes{500, 1000, 2000, 4000};

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [fail]");
  }
};

std::string fmt(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, x);
  return buf;
}

EnsembleConfig dispersion_config(Eigen::Index n, double alpha, double beta) {
  EnsembleConfig c;
  c.lattice_size = n;
  c.steps = 5 * n;
  c.alpha_t = alpha;
  c.beta_s = beta;
  c.realizations = kDeskRealizations;
  c.master_seed = kMasterSeed;
  c.workers = workers();
  return c;
}

// Ensemble runs shared between criteria, keyed by (N, alpha, beta).
std::map<std::tuple<Eigen::Index, double, double>, EnsembleResult>& cache() {
  static std::map<std::tuple<Eigen::Index, double, double>, EnsembleResult> runs;
  return runs;
}

const EnsembleResult& dispersion_run(Eigen::Index n, double alpha, double beta) {
  auto key = std::make_tuple(n, alpha, beta);
  auto it = cache().find(key);
  if (it == cache().end()) it = cache().emplace(key, run_ensemble(dispersion_config(n, alpha, beta))).first;
  return it->second;
}

WalkerStated random_state(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  WalkerStated s(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.up[i] = {g(rng), g(rng)};
    s.down[i] = {g(rng), g(rng)};
  }
  const double norm = std::sqrt(s.norm_squared());
  s.up /= norm;
  s.down /= norm;
  return s;
}

Outcome unitarity() {
  Outcome o;
  {
    const Eigen::Index n = 2000;
    const std::int64_t steps = 10000;
    const CoinPhases phases = generate_coin_phases(steps, n, 2.0, 2.0, kMasterSeed);
    double worst = 0.0;
    evolve<double>(initial_state_symmetric<double>(n), phases, steps,
           [&](std::int64_t, const WalkerStated& s) {
             worst = std::max(worst, std::abs(std::sqrt(s.norm_squared()) - 1.0));
           });
    o.check(worst < kNormTol, "max |norm-1| over 1e4 steps at N=2000 = " + fmt(worst, 3));
  }
  std::mt19937_64 rng(kMasterSeed);
  double worst = 0.0;
  int cases = 0;
  for (Eigen::Index n : {2, 5, 8, 17, 32}) {
    for (std::int64_t steps : {1, 6, 16}) {
      for (double exponent : {0.0, 2.5, 4.0}) {
        const CoinPhases phases = generate_coin_phases(steps, n, exponent, 4.0 - exponent, rng());
        const WalkerStated start = random_state(n, rng);
        const WalkerStated end = evolve(start, phases, steps);
        Eigen::VectorXcd psi = start.as_vector();
        for (std::int64_t k = 1; k <= steps; ++k) {
          psi = oracle::one_step_unitary(phases.theta[k - 1], phases.phi.values()) * psi;
        }
        worst = std::max(worst, (end.as_vector() - psi).cwiseAbs().maxCoeff());
        ++cases;
      }
    }
  }
  o.check(worst < kOracleTol,
          "dense oracle max diff over " + std::to_string(cases) + " cases = " + fmt(worst, 3));
  return o;
}

Outcome homogeneous_ballistic() {
  const Eigen::Index n = 2000;
  const std::int64_t steps = 1000;
  const CoinPhases phases{PhaseSequence(Eigen::ArrayXd::Zero(steps)),
                          PhaseSequence(Eigen::ArrayXd::Zero(n))};
  const TrajectoryStats stats = to_stats(trace_walk(initial_state_symmetric<double>(n), phases, steps));
  const PowerLawFit fit = fit_hurst(stats, {steps / 5, steps});
  Outcome o;
  o.check(std::abs(fit.exponent - 1.0) <= kBallisticTol, "H = " + fmt(fit.exponent) + " over [200, 1000]");
  return o;
}

Outcome diffusive(double alpha, double beta) {
  Outcome o;
  for (Eigen::Index n : kDispersionSizes) {
    const EnsembleResult& r = dispersion_run(n, alpha, beta);
    const TimeWindow w = default_hurst_window(r.stats);
    const PowerLawFit fit = fit_hurst(r.stats, w);
    o.check(std::abs(fit.exponent - kDiffusiveH) <= kDiffusiveTol,
            "N=" + std::to_string(n) + " H=" + fmt(fit.exponent) + " on [" + std::to_string(w.t_min) +
                ", " + std::to_string(w.t_max) + "]");
  }
  return o;
}

Outcome localized() {
  Outcome o;
  for (Eigen::Index n : kDispersionSizes) {
    const EnsembleResult& r = dispersion_run(n, 4.0, 0.0);
    const TimeWindow w = default_hurst_window(r.stats);
    const PowerLawFit fit = fit_hurst(r.stats, w);
    const Eigen::Index t = r.stats.sigma.size();
    const double last = r.stats.sigma.tail(100).mean();
    const double prev = r.stats.sigma.segment(t - 200, 100).mean();
    const double change = std::abs(last - prev) / prev;
    o.check(fit.exponent < kLocalizedMaxH, "N=" + std::to_string(n) + " H=" + fmt(fit.exponent));
    o.check(change < kSaturationTol, "N=" + std::to_string(n) + " sigma_bar change " + fmt(100 * change, 3) + "%");
  }
  return o;
}

Outcome delocalized() {
  Outcome o;
  for (Eigen::Index n : kDispersionSizes) {
    const EnsembleResult& r = dispersion_run(n, 4.0, 4.0);
    std::int64_t t_max = n / 2 - 1;
    if (r.stats.boundary_contact_time) t_max = std::min(t_max, *r.stats.boundary_contact_time);
    const PowerLawFit fit = fit_hurst(r.stats, {n / 10, t_max});
    o.check(std::abs(fit.exponent - 1.0) <= kDelocalizedTol,
            "N=" + std::to_string(n) + " H=" + fmt(fit.exponent) + " on [" + std::to_string(n / 10) + ", " +
                std::to_string(t_max) + "]");
  }
  return o;
}

Outcome gamma_scaling() {
  struct Case {
    double alpha, beta;
    std::function<bool(double)> ok;
    std::string target;
  };
  const auto near = [](double centre) {
    return [centre](double g) { return std::abs(g - centre) <= kGammaTol; };
  };
  const std::vector<Case> cases{
      {0, 0, near(kGammaDiffusive), "0.5+-0.1"},
      {0, 2, near(kGammaDiffusive), "0.5+-0.1"},
      {0, 4, near(kGammaDiffusive), "0.5+-0.1"},
      {4, 0, [](double g) { return g < kGammaLocalizedMax; }, "<0.15"},
      {4, 4, near(kGammaBallistic), "1.0+-0.1"},
      {2, 0, [](double g) { return g > kSubdiffusiveLow && g < kSubdiffusiveHigh; }, "(0.1,0.5)"},
  };
  Outcome o;
  for (const Case& c : cases) {
    EnsembleConfig base;
    base.alpha_t = c.alpha;
    base.beta_s = c.beta;
    base.realizations = kDeskRealizations;
    base.master_seed = cell_seed(kMasterSeed, c.alpha, c.beta);
    base.workers = workers();
    const PowerLawFit fit = fit_gamma(to_points(size_scan(base, kGammaSizes, 100)));
    o.check(c.ok(fit.exponent), "(" + fmt(c.alpha) + "," + fmt(c.beta) + ") gamma=" + fmt(fit.exponent) +
                                    " want " + c.target);
  }
  return o;
}

// Strict local maxima on the ring above `threshold`.
std::vector<Eigen::Index> peaks_above(const Eigen::ArrayXd& p, double threshold) {
  std::vector<Eigen::Index> out;
  const Eigen::Index n = p.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double left = p[(i + n - 1) % n], right = p[(i + 1) % n];
    if (p[i] > threshold && p[i] > left && p[i] > right) out.push_back(i + 1);
  }
  return out;
}

double median(Eigen::ArrayXd v) {
  std::sort(v.data(), v.data() + v.size());
  const Eigen::Index n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome two_peak_profile() {
  EnsembleConfig c;
  c.lattice_size = 1000;
  c.steps = 500;
  c.alpha_t = 4.0;
  c.beta_s = 4.0;
  c.realizations = kDeskRealizations;
  c.master_seed = kMasterSeed;
  c.snapshot_times = {500};
  c.workers = workers();
  const EnsembleResult r = run_ensemble(c);
  const Eigen::ArrayXd& p = r.stats.snapshots.at(500);
  const Eigen::Index n0 = centre_site(c.lattice_size);

  const double med = median(p);
  const auto peaks = peaks_above(p, kPeakFactor * med);
  Outcome o;
  bool ok = peaks.size() == 2;
  std::string where;
  if (peaks.size() == 2) {
    const auto offset = std::abs((peaks[0] + peaks[1]) - 2 * n0);
    ok = offset <= 2 * kPeakSymmetryTol;
    where = " at " + std::to_string(peaks[0]) + "," + std::to_string(peaks[1]);
  }
  o.check(ok, std::to_string(peaks.size()) + " maxima above 3x median (" + fmt(med, 3) + ")" + where);

  // The walk populates one sublattice parity per step; summing neighbouring
  // pairs removes the empty parity.
  Eigen::ArrayXd paired(p.size() / 2);
  for (Eigen::Index i = 0; i < paired.size(); ++i) paired[i] = p[2 * i] + p[2 * i + 1];
  const auto pair_peaks = peaks_above(paired, kPeakFactor * median(paired));
  o.detail += "; pair-summed profile has " + std::to_string(pair_peaks.size()) + " such maxima (diagnostic)";
  return o;
}

Outcome spectral_fidelity() {
  Outcome o;
  const Eigen::Index m = 4096;
  const int seeds = 50;
  for (double nu : {0.5, 1.0, 2.0, 3.0}) {
    double acc = 0.0;
    for (int s = 0; s < seeds; ++s) {
      acc += periodogram_slope(generate_fbm_trace({nu, m, kMasterSeed + static_cast<std::uint64_t>(s)}), 2, m / 8);
    }
    const double slope = acc / seeds;
    o.check(std::abs(slope + nu) <= kSpectralTol, "nu=" + fmt(nu) + " slope=" + fmt(slope));
  }

  std::int64_t checked = 0, outside = 0;
  auto tally = [&](const PhaseSequence& v) {
    for (double x : v.values()) {
      ++checked;
      if (!(x >= 0.0 && x < 2.0 * std::numbers::pi)) ++outside;
    }
  };
  for (double nu : {0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0}) {
    for (int s = 0; s < seeds; ++s) {
      tally(squash_to_phase(generate_fbm_trace({nu, m, kMasterSeed + static_cast<std::uint64_t>(s)})));
    }
  }
  Eigen::ArrayXd extremes(8);
  extremes << 0.0, -0.0, 1e-300, -1e-300, 40.0, -40.0, 1e308, -1e308;
  tally(squash_to_phase(extremes));
  o.check(outside == 0, std::to_string(outside) + " of " + std::to_string(checked) + " squashed values outside [0, 2pi)");
  return o;
}

std::string sigma_csv(const EnsembleResult& r, const fs::path& dir, const std::string& name) {
  const fs::path path = dir / name;
  write_trajectory_csv(path, r.stats);
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome schedule_independence() {
  const fs::path dir = fs::temp_directory_path() / "qwalk_acceptance";
  fs::create_directories(dir);
  Outcome o;
  for (Eigen::Index n : kDispersionSizes) {
    std::string reference;
    for (unsigned w : {1u, 4u, 8u}) {
      EnsembleConfig c = dispersion_config(n, 0.0, 0.0);
      c.workers = w;
      const std::string csv =
          sigma_csv(run_ensemble(c), dir, "sigma_N" + std::to_string(n) + "_w" + std::to_string(w) + ".csv");
      if (w == 1) {
        reference = csv;
        continue;
      }
      o.check(csv == reference, "N=" + std::to_string(n) + " workers=" + std::to_string(w) +
                                    (csv == reference ? " identical" : " differs"));
    }
  }
  fs::remove_all(dir);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "unitarity", unitarity},
      {2, "homogeneous ballistic", homogeneous_ballistic},
      {3, "uncorrelated diffusive", [] { return diffusive(0.0, 0.0); }},
      {4, "temporal-correlation localization", localized},
      {5, "spatial-correlation diffusive", [] { return diffusive(0.0, 4.0); }},
      {6, "fully correlated ballistic", delocalized},
      {7, "gamma scaling", gamma_scaling},
      {8, "two-peak profile", two_peak_profile},
      {9, "noise spectral fidelity", spectral_fidelity},
      {10, "schedule independence", schedule_independence},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.contains(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::printf("%s  criterion %2d  %-34s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d failed\n", failures);
  return failures == 0 ? 0 : 1;
}
