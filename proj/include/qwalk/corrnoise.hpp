#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>

#include <Eigen/Core>

namespace qwalk {

/// Recipe for one long-range correlated sequence with spectrum S(k) ~ k^-nu.
struct CorrelationSpec {
  double nu = 0.0;
  Eigen::Index length = 0;  // M, even and >= 2
  std::uint64_t seed = 0;

  void validate() const;
};

/// Values in [0, 2pi), one per index j = 1..M (stored 0-based).
class PhaseSequence {
 public:
  PhaseSequence() = default;
  /// Throws InvalidInput if any value leaves [0, 2pi).
  explicit PhaseSequence(Eigen::ArrayXd values);

  const Eigen::ArrayXd& values() const noexcept { return values_; }
  Eigen::Index size() const noexcept { return values_.size(); }
  double operator[](Eigen::Index i) const { return values_[i]; }

  /// Exact elementwise equality.
  friend bool operator==(const PhaseSequence& a, const PhaseSequence& b) {
    return a.size() == b.size() && (a.values_ == b.values_).all();
  }

 private:
  Eigen::ArrayXd values_;
};

/// Temporal phases theta_t (t = 1..T) and spatial phases phi_n (n = 1..N).
struct CoinPhases {
  PhaseSequence theta;
  PhaseSequence phi;

  friend bool operator==(const CoinPhases&, const CoinPhases&) = default;
};

/// The M/2 random phases mu_k drawn uniformly on [0, 2pi) from the seed.
Eigen::ArrayXd draw_random_phases(std::uint64_t seed, Eigen::Index count);

/// Spectral amplitudes [(2pi/M)^(1-nu) k^-nu]^(1/2) for k = 1..M/2.
Eigen::ArrayXd spectral_amplitudes(double nu, Eigen::Index length);

/// Fractional Brownian motion trace
///   V~_j = sum_{k=1}^{M/2} a_k cos(2 pi j k / M + mu_k),  j = 1..M,
/// evaluated as an inverse FFT of the phasors a_k e^{i mu_k}.
Eigen::ArrayXd generate_fbm_trace(const CorrelationSpec& spec);

/// Same trace by direct O(M^2) summation. Reference path for the FFT route.
Eigen::ArrayXd generate_fbm_trace_direct(const CorrelationSpec& spec);

/// Rescale to zero mean and unit sample variance. Constant input is only centred.
Eigen::ArrayXd normalize_trace(const Eigen::ArrayXd& trace);

/// V_j = pi [tanh(V~_j) + 1]. Throws InvalidInput on empty or non-finite input.
PhaseSequence squash_to_phase(const Eigen::ArrayXd& trace);

struct CoinPhaseOptions {
  bool normalize_variance = false;
};

/// Independent theta (length T, exponent alpha_t) and phi (length N, exponent
/// beta_s) sequences. Sub-stream seeds are derive_seed(seed, "theta") and
/// derive_seed(seed, "phi"); odd lengths are generated at the next even length
/// and truncated.
CoinPhases generate_coin_phases(Eigen::Index T, Eigen::Index N, double alpha_t, double beta_s,
                                std::uint64_t seed, CoinPhaseOptions options = {});

/// Least-squares slope of log periodogram vs log k over k in [k_min, k_max].
/// Periodogram uses the plain DFT |sum_j x_j e^{-2 pi i j k / M}|^2.
double periodogram_slope(const Eigen::ArrayXd& series, Eigen::Index k_min, Eigen::Index k_max);

/// CSV with header `j,<column>`; j is 1-based.
void write_sequence_csv(const std::filesystem::path& path, const Eigen::ArrayXd& values,
                        std::string_view column = "value");

}  // namespace qwalk
