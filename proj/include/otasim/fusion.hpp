#pragma once

#include <utility>
#include <vector>

#include "otasim/rng.hpp"
#include "otasim/tensor.hpp"

// AWGN multiple-access channel and the three sensor-fusion operators:
// Lp-norm-inspired max approximation (fixed or trainable exponent), feature
// averaging, and exact elementwise max over orthogonal transmissions.

namespace otasim::fusion {

enum class SnrMode { fixed, uniform_linear };

struct ChannelSpec {
  SnrMode mode = SnrMode::fixed;
  double snr_db = 10.0;           // fixed mode
  double lo_db = 0.0, hi_db = 10.0;  // uniform_linear mode
  bool noiseless = false;         // forces sigma_n^2 = 0

  /// Fixed mode returns snr_db; uniform_linear draws uniformly in linear
  /// scale over [lo_db, hi_db] and converts back to dB.
  double draw_snr_db(RngStream& rng) const;
};

enum class FusionMode { lp, average, exact_max };

struct FusionSpec {
  FusionMode mode = FusionMode::lp;
  double p = 1.0;
  bool p_trainable = false;
};

/// One channel realization: the additive noise actually drawn and its variance.
struct MacRealization {
  Tensor noise;
  double sigma_n2 = 0.0;
};

/// x = f^p elementwise; features must be nonnegative (ReLU outputs).
Tensor preprocess(const Tensor& features, double p);

/// sigma_n^2 = signal_power / 10^(snr_db / 10).
double noise_variance_from_snr(double signal_power, double snr_db);

/// Mean per-element power of the noiseless superposition sum_m x_m; the
/// reference that calibrates sigma_n^2 for a given SNR.
double superposition_power(const std::vector<Tensor>& xs);

/// y = sum_m x_m + n over one MAC use, n iid N(0, sigma_n2).
std::pair<Tensor, MacRealization> mac_transmit(const std::vector<Tensor>& xs, double sigma_n2,
                                               RngStream& rng);

/// fused(i) = max(y(i), 0)^(1/p); negative received values are noise
/// artifacts and clamp to zero.
Tensor postprocess(const Tensor& y, double p);

struct FuseResult {
  Tensor fused;
  MacRealization mac;
  int channel_uses = 1;  // lp and average: 1; exact_max: M
};

/// Orthogonal baseline: each sensor's features cross an independent AWGN use
/// at the same sigma_n2, then the elementwise max is taken post-reception.
FuseResult fuse_exact_max(const std::vector<Tensor>& features, double sigma_n2, RngStream& rng);

/// OTA superposition divided by M.
FuseResult fuse_average(const std::vector<Tensor>& features, double sigma_n2, RngStream& rng);

struct FusionGradients {
  std::vector<Tensor> d_features;  // d fused / d F_m, per sensor
  Tensor d_p_coord;                // d fused(i) / d p, per coordinate
};

/// Analytic gradients of the lp postprocessed output with respect to each
/// sensor's features and to p, treating the noise as an additive constant.
/// Coordinates where the clamp is active (y <= 0) get zero gradients, as do
/// zero features (0 * log 0 := 0 convention).
FusionGradients fusion_gradients(const Tensor& y, const std::vector<Tensor>& features, double p);

}  // namespace otasim::fusion
