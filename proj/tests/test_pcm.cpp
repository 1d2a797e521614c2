#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "otasim/pcm.hpp"
#include "test_util.hpp"

using namespace otasim;
using namespace otasim::pcm;
using testutil::max_rel_err;
using testutil::random_tensor;

TEST_CASE("sigma_prog quadratic: constant term, clamp, vertex") {
  PcmParams params;
  CHECK(sigma_prog(0.0, params) == 0.2635);
  CHECK(sigma_prog(2.0 * params.g_max, params) == 0.0);  // polynomial -0.4989, clamped
  const double g_vertex = params.g_max * 1.9650 / (2.0 * 1.1731);
  CHECK(sigma_prog(g_vertex, params) == doctest::Approx(1.08636).epsilon(1e-4));
  CHECK_THROWS_AS(sigma_prog(-1.0, params), std::invalid_argument);
}

TEST_CASE("programming noise: zero-noise params, Monte Carlo std, determinism") {
  PcmParams params;
  RngStream rng(100, {0});

  PcmParams degenerate = params;
  degenerate.prog_coeffs = {0.0, 0.0, 0.0};
  Tensor g = random_tensor({64}, rng, 0.0, params.g_max);
  Tensor out = program(g, degenerate, rng);
  CHECK(out.data == g.data);

  const double g_t = 10.0;
  const double expected = sigma_prog(g_t, params);
  const int n = 1000000;
  RngStream mc(101, {0});
  Tensor fixed({1}, {g_t});
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = program(fixed, params, mc).data[0] - g_t;
    sum += d;
    sumsq += d * d;
  }
  const double mean = sum / n;
  const double std_emp = std::sqrt(sumsq / n - mean * mean);
  CHECK(std::abs(std_emp - expected) / expected < 0.02);

  RngStream a(7, {3, 5}), b(7, {3, 5});
  Tensor ga = program(g, params, a), gb = program(g, params, b);
  CHECK(ga.data == gb.data);
}

TEST_CASE("drift: identity at t_c, closed form, clamped mu_nu") {
  PcmParams params;
  RngStream rng(102, {0});
  Tensor g_prog = random_tensor({16}, rng, 0.0, params.g_max);
  Tensor nu = random_tensor({16}, rng, -0.1, 0.2);
  Tensor out = drift(g_prog, nu, params.t_c, params);
  CHECK(max_rel_err(out, g_prog) < 1e-15);

  Tensor ten({1}, {10.0});
  Tensor nu_fixed({1}, {0.05});
  Tensor d = drift(ten, nu_fixed, 10.0 * params.t_c, params);
  CHECK(d.data[0] == doctest::Approx(10.0 * std::pow(10.0, -0.05)).epsilon(1e-12));

  // mu_nu raw value at 25 uS is -0.0155 ln 25 + 0.0244 ~ -0.02549 -> clamped.
  CHECK(mu_nu(25.0, params) == 0.049);
  CHECK(mu_nu(0.0, params) == params.mu_nu_hi);  // log(0) caught by the upper clamp
  CHECK(sigma_nu(0.0, params) == params.sigma_nu_hi);

  CHECK_THROWS_AS(drift(ten, nu_fixed, params.t_c - 1.0, params), std::invalid_argument);
}

TEST_CASE("drift is strictly decreasing in t for nu > 0") {
  PcmParams params;
  Tensor g({1}, {12.0});
  Tensor nu({1}, {0.06});
  double prev = 1e300;
  for (double t : {20.0, 200.0, 2000.0, 2e4, 2e5, 2e6}) {
    const double v = drift(g, nu, t, params).data[0];
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("read noise: Q_s value, closed-form sigma, disabled regime") {
  PcmParams params;
  CHECK(q_s(25.0, params) == doctest::Approx(1.0858e-3).epsilon(1e-4));
  CHECK(q_s(0.0, params) == params.q_s_cap);

  // Formula probe from the device-model definition.
  const double sigma = sigma_read(10.0, 25.0, 1.0, params);
  const double expect = 10.0 * q_s(25.0, params) * std::sqrt(std::log(21.0 / 5e-7));
  CHECK(sigma == doctest::Approx(expect).epsilon(1e-12));

  PcmParams quiet = params;
  quiet.read_noise = false;
  RngStream rng(103, {0});
  Tensor g_drift = random_tensor({32}, rng, 0.0, params.g_max);
  Tensor g_t = g_drift;
  Tensor out = read(g_drift, g_t, params.t_c, quiet, rng);
  CHECK(out.data == g_drift.data);

  PcmParams bad = params;
  bad.t_read = 1e9;  // log argument <= 1
  CHECK_THROWS_AS(read(g_drift, g_t, params.t_c, bad, rng), std::invalid_argument);

  const double expected = sigma_read(10.0, 10.0, params.t_c, params);
  Tensor fixed({1}, {10.0});
  RngStream mc(104, {0});
  const int n = 1000000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = read(fixed, fixed, params.t_c, params, mc).data[0] - 10.0;
    sum += d;
    sumsq += d * d;
  }
  const double mean = sum / n;
  const double std_emp = std::sqrt(sumsq / n - mean * mean);
  CHECK(std::abs(std_emp - expected) / expected < 0.02);
}

TEST_CASE("differential mapping") {
  PcmParams params;
  params.g_max = 50.0;
  Tensor w({2}, {2.0, -4.0});
  CrossbarProgram prog = map_weights(w, params);
  CHECK(prog.g_pos.data == std::vector<double>{25.0, 0.0});
  CHECK(prog.g_neg.data == std::vector<double>{0.0, 50.0});
  CHECK(prog.w_scale == 4.0);

  Tensor single({1}, {-3.0});
  CrossbarProgram sp = map_weights(single, params);
  CHECK(sp.g_neg.data[0] == params.g_max);

  RngStream rng(105, {0});
  Tensor rw = random_tensor({40}, rng, -2.0, 2.0);
  CrossbarProgram rp = map_weights(rw, params);
  for (size_t i = 0; i < rw.data.size(); ++i) {
    const double diff = rp.g_pos.data[i] - rp.g_neg.data[i];
    if (rw.data[i] > 0.0) CHECK(diff > 0.0);
    if (rw.data[i] < 0.0) CHECK(diff < 0.0);
    if (rw.data[i] == 0.0) CHECK(diff == 0.0);
  }

  Tensor zeros({3});
  CHECK_THROWS_AS(map_weights(zeros, params), std::invalid_argument);
}

TEST_CASE("reverse map inverts the forward map") {
  PcmParams params;
  params.g_max = 50.0;
  Tensor w({2}, {2.0, -4.0});
  CrossbarProgram prog = map_weights(w, params);
  Tensor g_pos({2}, {25.0, 0.0}), g_neg({2}, {0.0, 50.0});
  Tensor rt = reverse_map(prog, g_pos, g_neg);
  CHECK(rt.data[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(rt.data[1] == doctest::Approx(-4.0).epsilon(1e-12));

  // Symmetric perturbation on both devices cancels.
  for (double& v : g_pos.data) v += 0.75;
  for (double& v : g_neg.data) v += 0.75;
  Tensor shifted = reverse_map(prog, g_pos, g_neg);
  CHECK(max_rel_err(shifted, rt) < 1e-12);
}

TEST_CASE("zero-noise round trip is the identity on random tensors") {
  PcmParams quiet;
  quiet.prog_noise = false;
  quiet.drift_noise = false;
  quiet.read_noise = false;
  RngStream rng(106, {0});
  for (int rep = 0; rep < 100; ++rep) {
    Tensor w = random_tensor({8, 5}, rng, -3.0, 3.0);
    RngStream draw(106, {1, static_cast<uint64_t>(rep)});
    Tensor rt = noisy_weights(w, quiet.t_c, quiet, draw);
    CHECK(max_rel_err(rt, w, 1e-300) < 1e-12);
  }
}

TEST_CASE("noisy weights: unbiased at t_c and deterministic per stream") {
  // Clamping censors the saturated cell, so the zero-mean check runs on the
  // raw Gaussians.
  PcmParams params;
  params.clamp_conductance = false;
  Tensor w({4}, {0.5, -1.0, 0.25, -0.125});
  const int trials = 10000;
  std::vector<double> sums(4, 0.0), sumsqs(4, 0.0);
  for (int trial = 0; trial < trials; ++trial) {
    RngStream rng(107, {static_cast<uint64_t>(trial)});
    Tensor wn = noisy_weights(w, params.t_c, params, rng);
    for (int i = 0; i < 4; ++i) {
      sums[i] += wn.data[i];
      sumsqs[i] += wn.data[i] * wn.data[i];
    }
  }
  for (int i = 0; i < 4; ++i) {
    const double mean = sums[i] / trials;
    const double sd = std::sqrt(sumsqs[i] / trials - mean * mean);
    const double se = sd / std::sqrt(static_cast<double>(trials));
    CHECK(std::abs(mean - w.data[i]) < 3.0 * se);
  }

  RngStream a(108, {2, 9}), b(108, {2, 9});
  Tensor wa = noisy_weights(w, params.t_c + 5.0, params, a);
  Tensor wb = noisy_weights(w, params.t_c + 5.0, params, b);
  CHECK(wa.data == wb.data);
}

TEST_CASE("drift shrinks weight magnitudes over a year") {
  PcmParams params;
  Tensor w({6}, {1.5, -2.0, 0.8, -0.6, 2.5, -1.2});
  const double year = 365.25 * 86400.0;
  const int trials = 1000;
  std::vector<std::vector<double>> early(6), late(6);
  for (int trial = 0; trial < trials; ++trial) {
    RngStream r1(109, {static_cast<uint64_t>(trial), 1});
    RngStream r2(109, {static_cast<uint64_t>(trial), 1});  // same devices, later read
    Tensor w1 = noisy_weights(w, params.t_c + 1.0, params, r1);
    Tensor w2 = noisy_weights(w, params.t_c + year, params, r2);
    for (int i = 0; i < 6; ++i) {
      early[i].push_back(std::abs(w1.data[i]));
      late[i].push_back(std::abs(w2.data[i]));
    }
  }
  auto median = [](std::vector<double>& v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };
  for (int i = 0; i < 6; ++i) {
    CHECK(median(late[i]) < median(early[i]));
  }
}

TEST_CASE("all stages keep conductances inside [0, g_max]") {
  PcmParams params;
  RngStream rng(110, {0});
  Tensor w = random_tensor({64}, rng, -1.0, 1.0);
  for (double t : {20.0, 2000.0, 2e7}) {
    RngStream draw(111, {static_cast<uint64_t>(t)});
    CrossbarProgram prog = map_weights(w, params);
    Tensor gp = program(prog.g_pos, params, draw);
    Tensor nu = draw_nu(prog.g_pos, params, draw);
    Tensor gd = drift(gp, nu, t, params);
    Tensor gr = read(gd, prog.g_pos, t, params, draw);
    for (const Tensor* stage : {&gp, &gd, &gr}) {
      for (double v : stage->data) {
        CHECK(v >= 0.0);
        CHECK(v <= params.g_max);
      }
    }
  }
}
