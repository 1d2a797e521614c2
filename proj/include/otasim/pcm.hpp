#pragma once

#include <array>
#include <cstdint>

#include "otasim/rng.hpp"
#include "otasim/tensor.hpp"

// Phase-change-memory device model: differential conductance mapping of
// trained weights, programming noise, conductance drift, read noise, and the
// reverse map back to noisy effective weights. All conductances are in uS.

namespace otasim::pcm {

struct PcmParams {
  double g_min = 0.0;      // uS
  double g_max = 25.0;     // uS
  double t_c = 20.0;       // programming epoch (s); drift reference time
  double t_read = 250e-9;  // read-pulse duration (s)

  // sigma_prog(g) = max(a*gh^2 + b*gh + c, 0) in uS, gh = g / g_max.
  std::array<double, 3> prog_coeffs = {-1.1731, 1.9650, 0.2635};

  // Clamp windows for the drift exponent statistics and the read-noise
  // coefficient. The log/pow arguments take g in uS.
  double mu_nu_lo = 0.049, mu_nu_hi = 0.1;
  double sigma_nu_lo = 0.008, sigma_nu_hi = 0.045;
  double q_s_cap = 0.2;

  // Noise stage switches; disabling all three makes the map->program->
  // drift->read->reverse chain an identity.
  bool prog_noise = true;
  bool drift_noise = true;  // when off, nu = 0 and conductance holds
  bool read_noise = true;

  // Keep conductances physical in [0, g_max] after each noisy stage. The
  // zero-mean unit tests switch this off to observe the raw Gaussians.
  bool clamp_conductance = true;
};

/// Differential pair targets for one weight tensor, plus the scale needed to
/// invert the mapping. Immutable after creation.
struct CrossbarProgram {
  Tensor g_pos;  // uS, in [0, g_max]
  Tensor g_neg;  // uS, in [0, g_max]
  double w_scale = 0.0;  // max|W| at mapping time
  PcmParams params;
  double programmed_at = 0.0;  // epoch (s)
};

/// Programming-noise std-dev (uS) at target conductance g_t (uS).
double sigma_prog(double g_t, const PcmParams& params);

/// Drift-exponent statistics at target conductance g_t (uS).
double mu_nu(double g_t, const PcmParams& params);
double sigma_nu(double g_t, const PcmParams& params);

/// Read-noise coefficient at target conductance g_t (uS).
double q_s(double g_t, const PcmParams& params);

/// Read-noise std-dev (uS) for a drifted conductance at absolute time t (s).
double sigma_read(double g_drift, double g_t, double t, const PcmParams& params);

/// g_prog = g_t + N(0, sigma_prog(g_t)) per cell, independent draws.
Tensor program(const Tensor& g_t, const PcmParams& params, RngStream& rng);

/// One drift exponent per cell, drawn at programming time and reused for all
/// later reads of that cell.
Tensor draw_nu(const Tensor& g_t, const PcmParams& params, RngStream& rng);

/// g_drift(t) = g_prog * (t / t_c)^(-nu). Requires t >= t_c.
Tensor drift(const Tensor& g_prog, const Tensor& nu, double t, const PcmParams& params);

/// g(t) = g_drift + N(0, sigma_read); fresh draw per read.
Tensor read(const Tensor& g_drift, const Tensor& g_t, double t, const PcmParams& params,
            RngStream& rng);

/// Differential mapping of weights onto target conductance pairs.
CrossbarProgram map_weights(const Tensor& weights, const PcmParams& params);

/// Exact inverse of map_weights: w' = (g'_pos - g'_neg) * w_scale / (g_max - g_min).
Tensor reverse_map(const CrossbarProgram& program, const Tensor& g_pos_noisy,
                   const Tensor& g_neg_noisy);

/// Full map -> program -> drift -> read -> reverse_map pipeline at absolute
/// time t (s). Fresh programming and drift draws per call.
Tensor noisy_weights(const Tensor& weights, double t, const PcmParams& params, RngStream& rng);

/// Same pipeline, but also exposes the read conductances the weights were
/// recovered from (the energy accounting needs the device-side state).
struct NoisyReadout {
  Tensor w_noisy;
  Tensor g_pos_read;
  Tensor g_neg_read;
};
NoisyReadout noisy_readout(const Tensor& weights, double t, const PcmParams& params,
                           RngStream& rng);

}  // namespace otasim::pcm
