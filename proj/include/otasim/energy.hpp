#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "otasim/tensor.hpp"

// Per-inference energy accounting for memristive MVM against a digital
// (Raspberry-Pi class) sensor baseline. Covers the matrix-vector multiply
// only; peripherals and RF are out of scope, and reports say so.

namespace otasim::energy {

struct EnergySpec {
  double g_max_us = 50.0;      // uS
  double v_max = 0.5;          // V
  double op_duration_s = 1e-3; // s
  double rpi_power_w = 15.0;   // W
  int sensors = 1;
};

struct EnergyReport {
  std::vector<double> per_sensor_j;
  double total_j = 0.0;
  double upper_bound_j = 0.0;
  double digital_total_j = 0.0;
  double efficiency_ratio = 0.0;  // digital_total / upper_bound
  double voltage_scale = 0.0;     // activation -> volt factor used, 0 if unused
  std::string scope = "mvm-only";
};

/// E = sum_cells g * v^2 * t. Conductances in uS, voltages in V, result in J.
/// Accepts either G [rows, cols] with row voltages V [rows], or G and V of
/// identical shape for per-cell voltages.
double mvm_energy(const Tensor& conductance_us, const Tensor& voltage_v, double t_s);

/// M * n_cells * g_max * v_max^2 * t, all devices at maximum.
double upper_bound_energy(int64_t cells_per_sensor, const EnergySpec& spec);

/// M * P_rpi * t.
double digital_baseline_energy(const EnergySpec& spec);

/// digital_total / upper_bound (worst case for the memristor side).
double efficiency_ratio(const EnergyReport& report);

/// Assembles the bound/baseline/ratio fields for a crossbar of the given size.
EnergyReport make_report(int64_t cells_per_sensor, const EnergySpec& spec);

}  // namespace otasim::energy
