#include <doctest.h>

#include <cmath>

#include "otasim/energy.hpp"
#include "otasim/pcm.hpp"
#include "test_util.hpp"

using namespace otasim;
using namespace otasim::energy;
using testutil::random_tensor;

TEST_CASE("mvm energy: single cell, idle input, linearity in t") {
  Tensor g({1, 1}, {50.0});
  Tensor v({1}, {0.5});
  CHECK(mvm_energy(g, v, 1e-3) == doctest::Approx(12.5e-9).epsilon(1e-12));

  RngStream rng(300, {0});
  Tensor gm = random_tensor({4, 6}, rng, 0.0, 50.0);
  Tensor zeros({4});
  CHECK(mvm_energy(gm, zeros, 1e-3) == 0.0);

  Tensor vr = random_tensor({4}, rng, 0.0, 0.5);
  const double e1 = mvm_energy(gm, vr, 1e-3);
  CHECK(mvm_energy(gm, vr, 2e-3) == doctest::Approx(2.0 * e1).epsilon(1e-12));

  Tensor neg({1, 1}, {-1.0});
  CHECK_THROWS_AS(mvm_energy(neg, v, 1e-3), std::invalid_argument);
  Tensor mism({3});
  CHECK_THROWS_AS(mvm_energy(gm, mism, 1e-3), std::invalid_argument);
}

TEST_CASE("upper bound and digital baseline worked example") {
  EnergySpec spec;  // g_max 50 uS, v_max 0.5 V, 1 ms, 15 W
  spec.sensors = 1;
  CHECK(upper_bound_energy(260, spec) == doctest::Approx(3.25e-6).epsilon(1e-12));
  spec.sensors = 10;
  CHECK(upper_bound_energy(260, spec) == doctest::Approx(32.5e-6).epsilon(1e-12));
  CHECK(digital_baseline_energy(spec) == doctest::Approx(0.15).epsilon(1e-12));

  EnergySpec dead = spec;
  dead.v_max = 0.0;
  CHECK(upper_bound_energy(260, dead) == 0.0);
  EnergySpec idle = spec;
  idle.rpi_power_w = 0.0;
  CHECK(digital_baseline_energy(idle) == 0.0);
  CHECK(digital_baseline_energy(EnergySpec{15.0, 0.5, 1.0, 15.0, 1}) ==
        doctest::Approx(15.0).epsilon(1e-12));
}

TEST_CASE("efficiency ratio") {
  EnergyReport r;
  r.digital_total_j = 0.15;
  r.upper_bound_j = 32.5e-6;
  CHECK(efficiency_ratio(r) == doctest::Approx(4615.3846).epsilon(1e-6));

  r.digital_total_j = 1.0;
  r.upper_bound_j = 1.0;
  CHECK(efficiency_ratio(r) == 1.0);

  r.upper_bound_j = 0.0;
  CHECK_THROWS_AS(efficiency_ratio(r), std::invalid_argument);

  // Same M on both sides cancels.
  for (int m : {1, 4, 9}) {
    EnergySpec spec;
    spec.sensors = m;
    EnergyReport rm = make_report(260, spec);
    CHECK(rm.efficiency_ratio == doctest::Approx(4615.3846).epsilon(1e-6));
  }
}

TEST_CASE("mapped crossbars stay under the bound for |v| <= v_max") {
  RngStream rng(301, {0});
  pcm::PcmParams dev;
  dev.g_max = 50.0;
  EnergySpec spec;
  spec.sensors = 1;
  for (int rep = 0; rep < 1000; ++rep) {
    const int64_t rows = 1 + static_cast<int64_t>(rng.next_u64() % 12);
    const int64_t cols = 1 + static_cast<int64_t>(rng.next_u64() % 8);
    Tensor w = random_tensor({rows, cols}, rng, -2.0, 2.0);
    pcm::CrossbarProgram prog = pcm::map_weights(w, dev);
    Tensor pair_g({rows, cols});
    for (size_t i = 0; i < pair_g.data.size(); ++i) {
      pair_g.data[i] = prog.g_pos.data[i] + prog.g_neg.data[i];
    }
    Tensor v = random_tensor({rows}, rng, -spec.v_max, spec.v_max);
    const double e = mvm_energy(pair_g, v, spec.op_duration_s);
    const double bound = upper_bound_energy(rows * cols, spec);
    CHECK(e >= 0.0);
    CHECK(e <= bound * (1.0 + 1e-12));
  }
}

TEST_CASE("report totals") {
  EnergyReport r = make_report(260, EnergySpec{50.0, 0.5, 1e-3, 15.0, 10});
  r.per_sensor_j = {1e-6, 2e-6, 3e-6};
  r.total_j = 6e-6;
  double sum = 0.0;
  for (double e : r.per_sensor_j) sum += e;
  CHECK(std::abs(r.total_j - sum) <= 1e-15 * r.total_j);
  CHECK(r.scope == "mvm-only");
  CHECK(r.upper_bound_j > 0.0);
}
