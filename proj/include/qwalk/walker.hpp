#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "qwalk/corrnoise.hpp"
#include "qwalk/error.hpp"
#include "qwalk/format.hpp"

namespace qwalk {

template <typename Scalar>
using Amplitudes = Eigen::Array<std::complex<Scalar>, Eigen::Dynamic, 1>;

/// Single-site SU(2) coin parameters; q is the bias, theta/phi the relative phases.
template <typename Scalar = double>
struct CoinParameters {
  Scalar q = Scalar(0.5);
  Scalar theta = Scalar(0);
  Scalar phi = Scalar(0);
};

/// [[sqrt(q), sqrt(1-q) e^{i theta}], [sqrt(1-q) e^{i phi}, -sqrt(q) e^{i(theta+phi)}]]
template <typename Scalar>
Eigen::Matrix<std::complex<Scalar>, 2, 2> coin_matrix(const CoinParameters<Scalar>& p) {
  if (!(p.q >= Scalar(0) && p.q <= Scalar(1))) {
    throw InvalidParameter("coin bias q must lie in [0, 1], got " +
                           format_double(static_cast<double>(p.q)));
  }
  using std::sqrt;
  const Scalar a = sqrt(p.q);
  const Scalar b = sqrt(Scalar(1) - p.q);
  Eigen::Matrix<std::complex<Scalar>, 2, 2> c;
  c << std::complex<Scalar>(a), std::polar(b, p.theta),
       std::polar(b, p.phi), -std::polar(a, p.theta + p.phi);
  return c;
}

/// Spin-up / spin-down amplitudes over sites n = 1..N (index n-1) at one time.
template <typename Scalar = double>
struct WalkerState {
  using Complex = std::complex<Scalar>;

  Amplitudes<Scalar> up;
  Amplitudes<Scalar> down;
  std::int64_t time = 0;

  WalkerState() = default;
  explicit WalkerState(Eigen::Index lattice_size)
      : up(Amplitudes<Scalar>::Zero(lattice_size)), down(Amplitudes<Scalar>::Zero(lattice_size)) {}

  Eigen::Index lattice_size() const noexcept { return up.size(); }

  Scalar norm_squared() const { return up.abs2().sum() + down.abs2().sum(); }

  /// Interleaved column vector (up_1, down_1, up_2, down_2, ...).
  Eigen::Matrix<Complex, Eigen::Dynamic, 1> as_vector() const {
    Eigen::Matrix<Complex, Eigen::Dynamic, 1> v(2 * lattice_size());
    for (Eigen::Index i = 0; i < lattice_size(); ++i) {
      v[2 * i] = up[i];
      v[2 * i + 1] = down[i];
    }
    return v;
  }
};

using WalkerStated = WalkerState<double>;

/// Site nearest the lattice centre, n0 = N/2 (1-based, integer division).
inline Eigen::Index centre_site(Eigen::Index lattice_size) { return lattice_size / 2; }

/// (|up> + i|down>)/sqrt(2) localized at n0 = N/2.
template <typename Scalar = double>
WalkerState<Scalar> initial_state_symmetric(Eigen::Index lattice_size) {
  if (lattice_size < 2) {
    throw InvalidParameter("lattice size must be >= 2, got " + std::to_string(lattice_size));
  }
  WalkerState<Scalar> s(lattice_size);
  const Eigen::Index i0 = centre_site(lattice_size) - 1;
  const Scalar r = Scalar(1) / std::sqrt(Scalar(2));
  s.up[i0] = {r, Scalar(0)};
  s.down[i0] = {Scalar(0), r};
  return s;
}

template <typename Scalar = double>
struct SiteAmplitude {
  Eigen::Index site = 1;  // 1-based
  std::complex<Scalar> up;
  std::complex<Scalar> down;
};

template <typename Scalar = double>
struct NormalizedState {
  WalkerState<Scalar> state;
  Scalar factor = Scalar(1);  // multiplier applied to the given amplitudes
};

/// Superposition of the listed site amplitudes, renormalized to unit norm.
/// Repeated sites accumulate.
template <typename Scalar = double>
NormalizedState<Scalar> initial_state_generic(Eigen::Index lattice_size,
                                              const std::vector<SiteAmplitude<Scalar>>& amplitudes) {
  if (lattice_size < 2) {
    throw InvalidParameter("lattice size must be >= 2, got " + std::to_string(lattice_size));
  }
  if (amplitudes.empty()) throw InvalidParameter("empty amplitude list");
  WalkerState<Scalar> s(lattice_size);
  for (const auto& a : amplitudes) {
    if (a.site < 1 || a.site > lattice_size) {
      throw InvalidParameter("site " + std::to_string(a.site) + " outside [1, " +
                             std::to_string(lattice_size) + "]");
    }
    s.up[a.site - 1] += a.up;
    s.down[a.site - 1] += a.down;
  }
  const Scalar norm2 = s.norm_squared();
  if (!(norm2 > Scalar(0)) || !std::isfinite(static_cast<double>(norm2))) {
    throw InvalidParameter("initial amplitudes have zero or non-finite norm");
  }
  const Scalar factor = Scalar(1) / std::sqrt(norm2);
  s.up *= factor;
  s.down *= factor;
  return {std::move(s), factor};
}

/// One step of the inhomogeneous coined walk at q = 1/2 on a periodic ring:
///   up'_n   = (up_{n+1} + e^{i theta} down_{n+1}) / sqrt2
///   down'_n = e^{i phi_n} (up_{n-1} - e^{i theta} down_{n-1}) / sqrt2
/// The spatial phase factors are precomputed once per phase sequence.
template <typename Scalar = double>
class Stepper {
 public:
  using Complex = std::complex<Scalar>;

  explicit Stepper(const PhaseSequence& phi) : phase_(phi.size()) {
    const Scalar r = Scalar(1) / std::sqrt(Scalar(2));
    for (Eigen::Index i = 0; i < phi.size(); ++i) {
      phase_[i] = std::polar(r, static_cast<Scalar>(phi[i]));
    }
  }

  Eigen::Index lattice_size() const noexcept { return phase_.size(); }

  /// Writes the state at in.time + 1 into out; out is resized if needed.
  void apply(const WalkerState<Scalar>& in, Scalar theta, WalkerState<Scalar>& out) const {
    const Eigen::Index n = in.lattice_size();
    if (n != lattice_size()) {
      throw InvalidParameter("phase sequence length " + std::to_string(lattice_size()) +
                             " does not match lattice size " + std::to_string(n));
    }
    if (&in == &out) throw InvalidParameter("step input and output must be distinct states");
    if (out.lattice_size() != n) {
      out.up.resize(n);
      out.down.resize(n);
    }
    const Scalar r = Scalar(1) / std::sqrt(Scalar(2));
    const Complex et = std::polar(Scalar(1), theta);
    const Complex et_r = et * r;
    const Eigen::Index m = n - 1;

    const Complex* __restrict u = in.up.data();
    const Complex* __restrict d = in.down.data();
    const Complex* ph = phase_.data();
    Complex* __restrict ou = out.up.data();
    Complex* __restrict od = out.down.data();
    const Scalar cr = et_r.real(), ci = et_r.imag();
    const Scalar tr = et.real(), ti = et.imag();
    // Plain component arithmetic: std::complex operator* goes through the
    // Annex G NaN handling and blocks vectorization.
    for (Eigen::Index i = 0; i < m; ++i) {
      const Scalar ur = u[i + 1].real(), ui = u[i + 1].imag();
      const Scalar dr = d[i + 1].real(), di = d[i + 1].imag();
      ou[i] = Complex(r * ur + cr * dr - ci * di, r * ui + cr * di + ci * dr);
    }
    ou[m] = r * u[0] + et_r * d[0];
    for (Eigen::Index i = 1; i < n; ++i) {
      const Scalar sr = u[i - 1].real() - (tr * d[i - 1].real() - ti * d[i - 1].imag());
      const Scalar si = u[i - 1].imag() - (tr * d[i - 1].imag() + ti * d[i - 1].real());
      od[i] = Complex(ph[i].real() * sr - ph[i].imag() * si, ph[i].real() * si + ph[i].imag() * sr);
    }
    od[0] = ph[0] * (u[m] - et * d[m]);
    out.time = in.time + 1;
  }

 private:
  Amplitudes<Scalar> phase_;  // e^{i phi_n} / sqrt2
};

/// Single step as a value transformation.
template <typename Scalar>
WalkerState<Scalar> step(const WalkerState<Scalar>& state, Scalar theta_t, const PhaseSequence& phi) {
  WalkerState<Scalar> out(state.lattice_size());
  Stepper<Scalar>(phi).apply(state, theta_t, out);
  return out;
}

template <typename Scalar>
using StepObserver = std::function<void(std::int64_t, const WalkerState<Scalar>&)>;

/// Applies `steps` steps, step k (k = 1..steps) using theta[k-1] and the fixed
/// phi sequence. The observer, if set, sees the state after every step.
template <typename Scalar>
WalkerState<Scalar> evolve(const WalkerState<Scalar>& state, const CoinPhases& phases,
                           std::int64_t steps, const StepObserver<Scalar>& observer = {}) {
  if (steps < 0) throw InvalidParameter("number of steps must be non-negative");
  if (phases.theta.size() < steps) {
    throw InvalidParameter("theta sequence has " + std::to_string(phases.theta.size()) +
                           " entries, need " + std::to_string(steps));
  }
  if (phases.phi.size() != state.lattice_size()) {
    throw InvalidParameter("phi sequence length " + std::to_string(phases.phi.size()) +
                           " does not match lattice size " + std::to_string(state.lattice_size()));
  }
  const Stepper<Scalar> stepper(phases.phi);
  WalkerState<Scalar> current = state;
  WalkerState<Scalar> next(state.lattice_size());
  for (std::int64_t k = 1; k <= steps; ++k) {
    stepper.apply(current, static_cast<Scalar>(phases.theta[k - 1]), next);
    std::swap(current, next);
    if (observer) observer(current.time, current);
  }
  return current;
}

/// CSV `n,re_up,im_up,re_down,im_down`.
template <typename Scalar>
void write_state_csv(const std::filesystem::path& path, const WalkerState<Scalar>& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "n,re_up,im_up,re_down,im_down\n";
  for (Eigen::Index i = 0; i < state.lattice_size(); ++i) {
    out << (i + 1) << ',' << format_double(state.up[i].real()) << ','
        << format_double(state.up[i].imag()) << ',' << format_double(state.down[i].real()) << ','
        << format_double(state.down[i].imag()) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace qwalk
