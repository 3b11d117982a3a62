#pragma once

#include <cstddef>
#include <vector>

#include "qtdesign/constants.hpp"

namespace qtdesign {

/// Layered device: boundaries x_0 < ... < x_N (m), one potential per layer (J),
/// constant lead potentials on either side and the admissible design box.
struct DeviceSpec {
  std::vector<double> boundaries;
  std::vector<double> potentials;
  double outer_left = 0.0;
  double outer_right = 0.0;
  double lower_bound = 0.0;
  double upper_bound = 0.0;

  std::size_t layer_count() const { return potentials.size(); }
  double length() const { return boundaries.back() - boundaries.front(); }
  double layer_width(std::size_t j) const { return boundaries[j + 1] - boundaries[j]; }

  /// Geometry checks only; bounds are checked by the optimizer.
  void validate() const;

  /// Builds a device from interface units (nm, eV).
  static DeviceSpec from_interface_units(const std::vector<double>& boundaries_nm,
                                         const std::vector<double>& potentials_ev,
                                         double outer_left_ev, double outer_right_ev,
                                         double lower_ev, double upper_ev,
                                         const PhysicalConstants& constants);
};

/// Operating point: applied bias (V) and electron energy (J).
struct BiasPoint {
  double voltage = 0.0;
  double energy = 0.0;
};

/// Potential energy profile of the biased device. Layers are half-open
/// [x_{j-1}, x_j) except the last, which also owns x_N.
double potential_at(const DeviceSpec& spec, double voltage, double x,
                     const PhysicalConstants& constants);

/// Bias-induced potential drop accumulated from x_0 to x (J), clamped to the device.
double bias_drop(const DeviceSpec& spec, double voltage, double x, const PhysicalConstants& constants);

struct WaveNumber {
  double magnitude = 0.0;  // kg m / s
  bool propagating = false;
};

/// sqrt(2 m |dE|) with the branch flag; throws TurningPointError when dE == 0.
WaveNumber wavenumber(double mass, double energy_difference);

/// Linear profile of one layer under bias.
struct LayerProfile {
  double left_potential = 0.0;  // V at x_{j-1}
  double drop = 0.0;            // V(x_{j-1}) - V(x_j) >= 0 for positive bias
  double width = 0.0;
  double slope_constant = 0.0;  // m e V_bias / L
};

LayerProfile layer_profile(const DeviceSpec& spec, std::size_t layer, double voltage,
                           const PhysicalConstants& constants);

}  // namespace qtdesign
