#include "qwalk/corrnoise.hpp"

#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "qwalk/error.hpp"
#include "qwalk/format.hpp"
#include "qwalk/seeds.hpp"

namespace qwalk {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Eigen::Index next_even(Eigen::Index n) { return n % 2 == 0 ? n : n + 1; }

}  // namespace

void CorrelationSpec::validate() const {
  if (!(nu >= 0.0) || !std::isfinite(nu)) {
    throw InvalidSpec("correlation exponent nu must be finite and >= 0, got " +
                      format_double(nu));
  }
  if (length < 2 || length % 2 != 0) {
    throw InvalidSpec("sequence length must be even and >= 2, got " + std::to_string(length));
  }
}

PhaseSequence::PhaseSequence(Eigen::ArrayXd values) : values_(std::move(values)) {
  for (Eigen::Index i = 0; i < values_.size(); ++i) {
    if (!(values_[i] >= 0.0 && values_[i] < kTwoPi)) {
      throw InvalidInput("phase value " + format_double(values_[i]) + " at index " +
                         std::to_string(i + 1) + " outside [0, 2pi)");
    }
  }
}

Eigen::ArrayXd draw_random_phases(std::uint64_t seed, Eigen::Index count) {
  // Explicit 53-bit mantissa construction keeps the stream identical across
  // standard library implementations.
  std::mt19937_64 rng(seed);
  Eigen::ArrayXd mu(count);
  for (Eigen::Index k = 0; k < count; ++k) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    mu[k] = kTwoPi * u;
  }
  return mu;
}

Eigen::ArrayXd spectral_amplitudes(double nu, Eigen::Index length) {
  const Eigen::Index half = length / 2;
  const double base = std::pow(kTwoPi / static_cast<double>(length), 1.0 - nu);
  Eigen::ArrayXd a(half);
  for (Eigen::Index k = 1; k <= half; ++k) {
    a[k - 1] = std::sqrt(base * std::pow(static_cast<double>(k), -nu));
  }
  return a;
}

Eigen::ArrayXd generate_fbm_trace(const CorrelationSpec& spec) {
  spec.validate();
  const Eigen::Index m = spec.length;
  const Eigen::ArrayXd mu = draw_random_phases(spec.seed, m / 2);
  const Eigen::ArrayXd a = spectral_amplitudes(spec.nu, m);

  std::vector<std::complex<double>> spectrum(static_cast<std::size_t>(m), {0.0, 0.0});
  for (Eigen::Index k = 1; k <= m / 2; ++k) {
    spectrum[static_cast<std::size_t>(k)] = std::polar(a[k - 1], mu[k - 1]);
  }

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::Unscaled);
  std::vector<std::complex<double>> field;
  fft.inv(field, spectrum);

  // field[j] = sum_k c_k e^{+2 pi i j k / M}; j = M wraps to slot 0.
  Eigen::ArrayXd trace(m);
  for (Eigen::Index j = 1; j <= m; ++j) {
    trace[j - 1] = field[static_cast<std::size_t>(j % m)].real();
  }
  return trace;
}

Eigen::ArrayXd generate_fbm_trace_direct(const CorrelationSpec& spec) {
  spec.validate();
  const Eigen::Index m = spec.length;
  const Eigen::ArrayXd mu = draw_random_phases(spec.seed, m / 2);
  const Eigen::ArrayXd a = spectral_amplitudes(spec.nu, m);

  Eigen::ArrayXd trace = Eigen::ArrayXd::Zero(m);
  for (Eigen::Index j = 1; j <= m; ++j) {
    double sum = 0.0;
    for (Eigen::Index k = 1; k <= m / 2; ++k) {
      // Reduce j*k mod M first so the cosine argument stays in [0, 2pi).
      const auto r = static_cast<double>((j * k) % m);
      sum += a[k - 1] * std::cos(kTwoPi * r / static_cast<double>(m) + mu[k - 1]);
    }
    trace[j - 1] = sum;
  }
  return trace;
}

Eigen::ArrayXd normalize_trace(const Eigen::ArrayXd& trace) {
  if (trace.size() == 0) return trace;
  const Eigen::ArrayXd centred = trace - trace.mean();
  const double var = centred.square().mean();
  if (!(var > 0.0)) return centred;
  return centred / std::sqrt(var);
}

PhaseSequence squash_to_phase(const Eigen::ArrayXd& trace) {
  if (trace.size() == 0) throw InvalidInput("cannot squash an empty trace");
  Eigen::ArrayXd v(trace.size());
  for (Eigen::Index j = 0; j < trace.size(); ++j) {
    if (!std::isfinite(trace[j])) {
      throw InvalidInput("non-finite trace entry at index " + std::to_string(j + 1));
    }
    double phase = std::numbers::pi * (std::tanh(trace[j]) + 1.0);
    // tanh rounds to exactly 1 for arguments beyond ~19; keep the half-open range.
    if (phase >= kTwoPi) phase = std::nextafter(kTwoPi, 0.0);
    v[j] = phase;
  }
  return PhaseSequence(std::move(v));
}

CoinPhases generate_coin_phases(Eigen::Index T, Eigen::Index N, double alpha_t, double beta_s,
                                std::uint64_t seed, CoinPhaseOptions options) {
  if (T < 1) throw InvalidParameter("T must be positive, got " + std::to_string(T));
  if (N < 1) throw InvalidParameter("N must be positive, got " + std::to_string(N));

  auto build = [&](Eigen::Index length, double nu, std::string_view label) {
    const CorrelationSpec spec{nu, next_even(length), derive_seed(seed, label)};
    Eigen::ArrayXd trace = generate_fbm_trace(spec).head(length);
    if (options.normalize_variance) trace = normalize_trace(trace);
    return squash_to_phase(trace);
  };
  return CoinPhases{build(T, alpha_t, "theta"), build(N, beta_s, "phi")};
}

double periodogram_slope(const Eigen::ArrayXd& series, Eigen::Index k_min, Eigen::Index k_max) {
  const Eigen::Index m = series.size();
  if (k_min < 1 || k_max <= k_min || k_max > m / 2) {
    throw InvalidParameter("periodogram window [" + std::to_string(k_min) + ", " +
                           std::to_string(k_max) + "] invalid for length " + std::to_string(m));
  }
  std::vector<double> in(series.data(), series.data() + m);
  std::vector<std::complex<double>> out;
  Eigen::FFT<double> fft;
  fft.fwd(out, in);

  const Eigen::Index count = k_max - k_min + 1;
  Eigen::ArrayXd x(count), y(count);
  for (Eigen::Index i = 0; i < count; ++i) {
    const Eigen::Index k = k_min + i;
    x[i] = std::log(static_cast<double>(k));
    y[i] = std::log(std::norm(out[static_cast<std::size_t>(k)]));
  }
  const Eigen::ArrayXd dx = x - x.mean();
  return (dx * (y - y.mean())).sum() / dx.square().sum();
}

void write_sequence_csv(const std::filesystem::path& path, const Eigen::ArrayXd& values,
                        std::string_view column) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "j," << column << '\n';
  for (Eigen::Index j = 0; j < values.size(); ++j) {
    out << (j + 1) << ',' << format_double(values[j]) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace qwalk
