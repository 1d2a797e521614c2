#include "otasim/energy.hpp"

#include <stdexcept>

namespace otasim::energy {

double mvm_energy(const Tensor& conductance_us, const Tensor& voltage_v, double t_s) {
  if (t_s < 0.0) throw std::invalid_argument("energy: negative duration");
  for (double g : conductance_us.data) {
    if (g < 0.0) throw std::invalid_argument("energy: negative conductance");
  }
  double acc = 0.0;
  if (conductance_us.same_shape(voltage_v)) {
    for (size_t i = 0; i < conductance_us.data.size(); ++i) {
      acc += conductance_us.data[i] * voltage_v.data[i] * voltage_v.data[i];
    }
  } else if (conductance_us.ndim() == 2 && voltage_v.ndim() == 1 &&
             conductance_us.dim(0) == voltage_v.dim(0)) {
    const int64_t rows = conductance_us.dim(0), cols = conductance_us.dim(1);
    for (int64_t r = 0; r < rows; ++r) {
      double rowsum = 0.0;
      for (int64_t c = 0; c < cols; ++c) rowsum += conductance_us.at2(r, c);
      acc += rowsum * voltage_v.data[static_cast<size_t>(r)] *
             voltage_v.data[static_cast<size_t>(r)];
    }
  } else {
    throw std::invalid_argument("energy: conductance/voltage shapes not conformable");
  }
  return acc * 1e-6 * t_s;  // uS -> S
}

double upper_bound_energy(int64_t cells_per_sensor, const EnergySpec& spec) {
  if (cells_per_sensor <= 0 || spec.sensors <= 0) {
    throw std::invalid_argument("energy: counts must be positive");
  }
  return static_cast<double>(spec.sensors) * static_cast<double>(cells_per_sensor) *
         spec.g_max_us * 1e-6 * spec.v_max * spec.v_max * spec.op_duration_s;
}

double digital_baseline_energy(const EnergySpec& spec) {
  if (spec.op_duration_s <= 0.0) throw std::invalid_argument("energy: nonpositive duration");
  return static_cast<double>(spec.sensors) * spec.rpi_power_w * spec.op_duration_s;
}

double efficiency_ratio(const EnergyReport& report) {
  if (report.upper_bound_j <= 0.0) {
    throw std::invalid_argument("energy: memristor upper bound must be positive");
  }
  return report.digital_total_j / report.upper_bound_j;
}

EnergyReport make_report(int64_t cells_per_sensor, const EnergySpec& spec) {
  EnergyReport r;
  r.upper_bound_j = upper_bound_energy(cells_per_sensor, spec);
  r.digital_total_j = digital_baseline_energy(spec);
  r.efficiency_ratio = efficiency_ratio(r);
  return r;
}

}  // namespace otasim::energy
