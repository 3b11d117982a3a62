#include "qtdesign/device.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qtdesign/errors.hpp"

namespace qtdesign {

void PhysicalConstants::validate() const {
  const auto check = [](double v, const char* name) {
    if (!(std::isfinite(v) && v > 0.0)) {
      throw ConfigError(std::string("physical constant '") + name + "' must be finite and > 0");
    }
  };
  check(hbar, "hbar");
  check(m0, "m0");
  check(e, "e");
  check(effective_mass_factor, "effective_mass_factor");
}

void DeviceSpec::validate() const {
  if (potentials.empty()) throw ConfigError("device needs at least one layer");
  if (boundaries.size() != potentials.size() + 1) {
    throw ConfigError("device has " + std::to_string(potentials.size()) + " layers but " +
                      std::to_string(boundaries.size()) + " boundaries");
  }
  for (std::size_t j = 0; j + 1 < boundaries.size(); ++j) {
    if (!(boundaries[j + 1] > boundaries[j])) {
      throw ConfigError("device boundaries must be strictly increasing (index " +
                        std::to_string(j + 1) + ")");
    }
  }
  for (double u : potentials) {
    if (!std::isfinite(u)) throw ConfigError("layer potentials must be finite");
  }
  if (!std::isfinite(outer_left) || !std::isfinite(outer_right)) {
    throw ConfigError("lead potentials must be finite");
  }
}

DeviceSpec DeviceSpec::from_interface_units(const std::vector<double>& boundaries_nm,
                                            const std::vector<double>& potentials_ev,
                                            double outer_left_ev, double outer_right_ev,
                                            double lower_ev, double upper_ev,
                                            const PhysicalConstants& constants) {
  DeviceSpec spec;
  spec.boundaries.reserve(boundaries_nm.size());
  for (double x : boundaries_nm) spec.boundaries.push_back(units::nm_to_m(x));
  spec.potentials.reserve(potentials_ev.size());
  for (double u : potentials_ev) spec.potentials.push_back(units::ev_to_joule(u, constants));
  spec.outer_left = units::ev_to_joule(outer_left_ev, constants);
  spec.outer_right = units::ev_to_joule(outer_right_ev, constants);
  spec.lower_bound = units::ev_to_joule(lower_ev, constants);
  spec.upper_bound = units::ev_to_joule(upper_ev, constants);
  spec.validate();
  return spec;
}

double bias_drop(const DeviceSpec& spec, double voltage, double x, const PhysicalConstants& constants) {
  const double x0 = spec.boundaries.front();
  const double xn = spec.boundaries.back();
  const double clamped = std::clamp(x, x0, xn);
  return constants.e * voltage * (clamped - x0) / spec.length();
}

double potential_at(const DeviceSpec& spec, double voltage, double x,
                    const PhysicalConstants& constants) {
  const double x0 = spec.boundaries.front();
  const double xn = spec.boundaries.back();
  if (x < x0) return spec.outer_left;
  if (x > xn) return spec.outer_right - constants.e * voltage;
  // last boundary <= x selects the layer; x_N belongs to the last layer
  const auto it = std::upper_bound(spec.boundaries.begin(), spec.boundaries.end(), x);
  std::size_t layer = static_cast<std::size_t>(it - spec.boundaries.begin()) - 1;
  layer = std::min(layer, spec.layer_count() - 1);
  return spec.potentials[layer] - bias_drop(spec, voltage, x, constants);
}

WaveNumber wavenumber(double mass, double energy_difference) {
  if (energy_difference == 0.0) {
    throw TurningPointError("wave number vanishes (E == V)");
  }
  return {std::sqrt(2.0 * mass * std::abs(energy_difference)), energy_difference > 0.0};
}

LayerProfile layer_profile(const DeviceSpec& spec, std::size_t layer, double voltage,
                           const PhysicalConstants& constants) {
  const double length = spec.length();
  const double x_left = spec.boundaries[layer];
  LayerProfile p;
  p.width = spec.layer_width(layer);
  p.left_potential = spec.potentials[layer] - bias_drop(spec, voltage, x_left, constants);
  p.drop = constants.e * voltage * p.width / length;
  p.slope_constant = constants.mass() * constants.e * voltage / length;
  return p;
}

}  // namespace qtdesign
