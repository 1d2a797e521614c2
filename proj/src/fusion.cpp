#include "otasim/fusion.hpp"

#include <cmath>
#include <stdexcept>

namespace otasim::fusion {

double ChannelSpec::draw_snr_db(RngStream& rng) const {
  if (mode == SnrMode::fixed) return snr_db;
  const double lin_lo = std::pow(10.0, lo_db / 10.0);
  const double lin_hi = std::pow(10.0, hi_db / 10.0);
  return 10.0 * std::log10(rng.uniform(lin_lo, lin_hi));
}

Tensor preprocess(const Tensor& features, double p) {
  if (p <= 0.0) throw std::invalid_argument("fusion: p must be positive");
  Tensor out(features.shape);
  for (size_t i = 0; i < features.data.size(); ++i) {
    const double f = features.data[i];
    if (f < 0.0) throw std::invalid_argument("fusion: negative feature (expected ReLU output)");
    out.data[i] = p == 1.0 ? f : std::pow(f, p);
  }
  return out;
}

double noise_variance_from_snr(double signal_power, double snr_db) {
  if (!(signal_power > 0.0)) {
    throw std::invalid_argument("fusion: signal power must be positive");
  }
  return signal_power / std::pow(10.0, snr_db / 10.0);
}

double superposition_power(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw std::invalid_argument("fusion: no transmissions");
  Tensor sum(xs[0].shape);
  for (const Tensor& x : xs) {
    if (!x.same_shape(sum)) throw std::invalid_argument("fusion: feature length mismatch");
    for (size_t i = 0; i < sum.data.size(); ++i) sum.data[i] += x.data[i];
  }
  double acc = 0.0;
  for (double v : sum.data) acc += v * v;
  return acc / static_cast<double>(sum.data.size());
}

std::pair<Tensor, MacRealization> mac_transmit(const std::vector<Tensor>& xs, double sigma_n2,
                                               RngStream& rng) {
  if (xs.empty()) throw std::invalid_argument("fusion: no transmissions");
  Tensor y(xs[0].shape);
  for (const Tensor& x : xs) {
    if (!x.same_shape(y)) throw std::invalid_argument("fusion: feature length mismatch");
    for (size_t i = 0; i < y.data.size(); ++i) y.data[i] += x.data[i];
  }
  MacRealization mac;
  mac.sigma_n2 = sigma_n2;
  mac.noise = Tensor(y.shape);
  if (sigma_n2 > 0.0) {
    const double sd = std::sqrt(sigma_n2);
    for (size_t i = 0; i < y.data.size(); ++i) {
      mac.noise.data[i] = rng.normal(0.0, sd);
      y.data[i] += mac.noise.data[i];
    }
  }
  return {std::move(y), std::move(mac)};
}

Tensor postprocess(const Tensor& y, double p) {
  if (p <= 0.0) throw std::invalid_argument("fusion: p must be positive");
  Tensor out(y.shape);
  const double inv_p = 1.0 / p;
  for (size_t i = 0; i < y.data.size(); ++i) {
    const double v = y.data[i] > 0.0 ? y.data[i] : 0.0;
    out.data[i] = p == 1.0 ? v : std::pow(v, inv_p);
  }
  return out;
}

FuseResult fuse_exact_max(const std::vector<Tensor>& features, double sigma_n2, RngStream& rng) {
  if (features.empty()) throw std::invalid_argument("fusion: no sensors");
  const auto& shape = features[0].shape;
  FuseResult r;
  r.channel_uses = static_cast<int>(features.size());
  r.mac.sigma_n2 = sigma_n2;
  r.mac.noise = Tensor(shape);
  Tensor fused(shape);
  bool first = true;
  const double sd = sigma_n2 > 0.0 ? std::sqrt(sigma_n2) : 0.0;
  for (const Tensor& f : features) {
    if (!f.same_shape(fused)) throw std::invalid_argument("fusion: feature length mismatch");
    for (size_t i = 0; i < fused.data.size(); ++i) {
      const double received = f.data[i] + (sd > 0.0 ? rng.normal(0.0, sd) : 0.0);
      if (first || received > fused.data[i]) fused.data[i] = received;
    }
    first = false;
  }
  r.fused = std::move(fused);
  return r;
}

FuseResult fuse_average(const std::vector<Tensor>& features, double sigma_n2, RngStream& rng) {
  auto [y, mac] = mac_transmit(features, sigma_n2, rng);
  const double inv_m = 1.0 / static_cast<double>(features.size());
  for (double& v : y.data) v *= inv_m;
  FuseResult r;
  r.fused = std::move(y);
  r.mac = std::move(mac);
  r.channel_uses = 1;
  return r;
}

FusionGradients fusion_gradients(const Tensor& y, const std::vector<Tensor>& features, double p) {
  if (p <= 0.0) throw std::invalid_argument("fusion: p must be positive");
  if (features.empty()) throw std::invalid_argument("fusion: no sensors");
  const size_t n = y.data.size();
  FusionGradients g;
  g.d_p_coord = Tensor(y.shape);
  g.d_features.reserve(features.size());
  for (const Tensor& f : features) {
    if (!f.same_shape(y)) throw std::invalid_argument("fusion: feature length mismatch");
    g.d_features.push_back(Tensor(y.shape));
  }
  const double inv_p = 1.0 / p;
  for (size_t i = 0; i < n; ++i) {
    const double s = y.data[i];
    if (s <= 0.0) continue;  // clamp active: zero subgradient
    const double fused = std::pow(s, inv_p);
    const double s_pow = std::pow(s, inv_p - 1.0);
    double sum_f_log = 0.0;  // sum_m F^p log F, with 0 log 0 := 0
    for (size_t m = 0; m < features.size(); ++m) {
      const double f = features[m].data[i];
      if (f > 0.0) {
        g.d_features[m].data[i] = s_pow * std::pow(f, p - 1.0);
        sum_f_log += std::pow(f, p) * std::log(f);
      }
    }
    g.d_p_coord.data[i] = fused * (-std::log(s) / (p * p) + sum_f_log / (p * s));
  }
  return g;
}

}  // namespace otasim::fusion
