#include "otasim/pcm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace otasim::pcm {

namespace {

double clamp_g(double g, const PcmParams& params) {
  if (!params.clamp_conductance) return g;
  return std::clamp(g, 0.0, params.g_max);
}

void check_targets(const Tensor& g_t, const PcmParams& params) {
  for (double g : g_t.data) {
    if (g < 0.0 || g > params.g_max) {
      throw std::invalid_argument("pcm: target conductance outside [0, g_max]");
    }
  }
}

}  // namespace

double sigma_prog(double g_t, const PcmParams& params) {
  if (g_t < 0.0) throw std::invalid_argument("pcm: negative target conductance");
  const double gh = g_t / params.g_max;
  const auto& c = params.prog_coeffs;
  return std::max(c[0] * gh * gh + c[1] * gh + c[2], 0.0);
}

double mu_nu(double g_t, const PcmParams& params) {
  // log(0) = -inf propagates to +inf and is caught by the upper clamp.
  const double raw = -0.0155 * std::log(g_t) + 0.0244;
  return std::min(std::max(raw, params.mu_nu_lo), params.mu_nu_hi);
}

double sigma_nu(double g_t, const PcmParams& params) {
  const double raw = -0.0125 * std::log(g_t) - 0.0059;
  return std::min(std::max(raw, params.sigma_nu_lo), params.sigma_nu_hi);
}

double q_s(double g_t, const PcmParams& params) {
  if (g_t < 0.0) throw std::invalid_argument("pcm: negative target conductance");
  const double denom = std::pow(g_t, 0.65);
  if (denom == 0.0) return params.q_s_cap;
  return std::min(0.0088 / denom, params.q_s_cap);
}

double sigma_read(double g_drift, double g_t, double t, const PcmParams& params) {
  const double arg = (t + params.t_c) / (2.0 * params.t_read);
  if (arg <= 1.0) {
    throw std::invalid_argument("pcm: read-noise log argument <= 1 (t_read too large)");
  }
  return g_drift * q_s(g_t, params) * std::sqrt(std::log(arg));
}

Tensor program(const Tensor& g_t, const PcmParams& params, RngStream& rng) {
  check_targets(g_t, params);
  Tensor out(g_t.shape);
  for (size_t i = 0; i < g_t.data.size(); ++i) {
    const double g = g_t.data[i];
    const double sigma = params.prog_noise ? sigma_prog(g, params) : 0.0;
    out.data[i] = clamp_g(g + (sigma > 0.0 ? rng.normal(0.0, sigma) : 0.0), params);
  }
  return out;
}

Tensor draw_nu(const Tensor& g_t, const PcmParams& params, RngStream& rng) {
  Tensor nu(g_t.shape);
  if (!params.drift_noise) return nu;  // all zeros: no decay
  for (size_t i = 0; i < g_t.data.size(); ++i) {
    nu.data[i] = rng.normal(mu_nu(g_t.data[i], params), sigma_nu(g_t.data[i], params));
  }
  return nu;
}

Tensor drift(const Tensor& g_prog, const Tensor& nu, double t, const PcmParams& params) {
  if (t < params.t_c) {
    throw std::invalid_argument("pcm: drift time before programming epoch t_c");
  }
  if (!g_prog.same_shape(nu)) throw std::invalid_argument("pcm: nu shape mismatch");
  const double ratio = t / params.t_c;
  Tensor out(g_prog.shape);
  for (size_t i = 0; i < g_prog.data.size(); ++i) {
    out.data[i] = clamp_g(g_prog.data[i] * std::pow(ratio, -nu.data[i]), params);
  }
  return out;
}

Tensor read(const Tensor& g_drift, const Tensor& g_t, double t, const PcmParams& params,
            RngStream& rng) {
  if (t < params.t_c) {
    throw std::invalid_argument("pcm: read time before programming epoch t_c");
  }
  if (!g_drift.same_shape(g_t)) throw std::invalid_argument("pcm: target shape mismatch");
  Tensor out(g_drift.shape);
  for (size_t i = 0; i < g_drift.data.size(); ++i) {
    const double sigma =
        params.read_noise ? sigma_read(g_drift.data[i], g_t.data[i], t, params) : 0.0;
    out.data[i] = clamp_g(g_drift.data[i] + (sigma > 0.0 ? rng.normal(0.0, sigma) : 0.0), params);
  }
  return out;
}

CrossbarProgram map_weights(const Tensor& weights, const PcmParams& params) {
  double w_scale = 0.0;
  for (double w : weights.data) w_scale = std::max(w_scale, std::abs(w));
  if (w_scale == 0.0) {
    throw std::invalid_argument("pcm: cannot map all-zero weights (scale undefined)");
  }
  const double span = params.g_max - params.g_min;
  CrossbarProgram prog;
  prog.g_pos = Tensor(weights.shape);
  prog.g_neg = Tensor(weights.shape);
  prog.w_scale = w_scale;
  prog.params = params;
  for (size_t i = 0; i < weights.data.size(); ++i) {
    const double w = weights.data[i];
    // (w / w_scale) * span puts the largest-magnitude weight exactly at the
    // span without rounding past g_max.
    if (w > 0.0) {
      prog.g_pos.data[i] = std::min(w / w_scale * span, params.g_max);
    } else if (w < 0.0) {
      prog.g_neg.data[i] = std::min(-w / w_scale * span, params.g_max);
    }
  }
  return prog;
}

Tensor reverse_map(const CrossbarProgram& program, const Tensor& g_pos_noisy,
                   const Tensor& g_neg_noisy) {
  if (!g_pos_noisy.same_shape(g_neg_noisy) || !g_pos_noisy.same_shape(program.g_pos)) {
    throw std::invalid_argument("pcm: reverse_map shape mismatch");
  }
  const double k = program.w_scale / (program.params.g_max - program.params.g_min);
  Tensor w(g_pos_noisy.shape);
  for (size_t i = 0; i < w.data.size(); ++i) {
    w.data[i] = (g_pos_noisy.data[i] - g_neg_noisy.data[i]) * k;
  }
  return w;
}

NoisyReadout noisy_readout(const Tensor& weights, double t, const PcmParams& params,
                           RngStream& rng) {
  CrossbarProgram prog = map_weights(weights, params);
  // Fixed draw order (pos then neg, each stage in flat cell order) so a
  // given (seed, stream) reproduces the same device state bit-exactly.
  Tensor prog_pos = program(prog.g_pos, params, rng);
  Tensor prog_neg = program(prog.g_neg, params, rng);
  Tensor nu_pos = draw_nu(prog.g_pos, params, rng);
  Tensor nu_neg = draw_nu(prog.g_neg, params, rng);
  Tensor drift_pos = drift(prog_pos, nu_pos, t, params);
  Tensor drift_neg = drift(prog_neg, nu_neg, t, params);
  NoisyReadout out;
  out.g_pos_read = read(drift_pos, prog.g_pos, t, params, rng);
  out.g_neg_read = read(drift_neg, prog.g_neg, t, params, rng);
  out.w_noisy = reverse_map(prog, out.g_pos_read, out.g_neg_read);
  return out;
}

Tensor noisy_weights(const Tensor& weights, double t, const PcmParams& params, RngStream& rng) {
  return noisy_readout(weights, t, params, rng).w_noisy;
}

}  // namespace otasim::pcm
