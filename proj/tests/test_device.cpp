#include <cmath>

#include "doctest.h"
#include "qtdesign/device.hpp"
#include "qtdesign/errors.hpp"

using namespace qtdesign;

namespace {

DeviceSpec four_layers(const PhysicalConstants& c) {
  return DeviceSpec::from_interface_units({0, 1, 2, 3, 4}, {0.7, 1.3, 1.5, 0.7}, 0.0, 0.0, 0.7, 1.7, c);
}

}  // namespace

TEST_CASE("interface units are converted to SI") {
  PhysicalConstants c;
  const DeviceSpec d = four_layers(c);
  CHECK(d.layer_count() == 4);
  CHECK(d.length() == doctest::Approx(4e-9));
  CHECK(d.potentials[1] == doctest::Approx(1.3 * c.e));
  CHECK(d.upper_bound == doctest::Approx(1.7 * c.e));
  CHECK(c.mass() == doctest::Approx(0.07 * 9.10939e-31));
}

TEST_CASE("geometry validation") {
  PhysicalConstants c;
  CHECK_THROWS_AS(DeviceSpec::from_interface_units({0, 1, 1}, {1, 1}, 0, 0, 0, 2, c).validate(), ConfigError);
  CHECK_THROWS_AS(DeviceSpec::from_interface_units({0, 1}, {1, 1}, 0, 0, 0, 2, c).validate(), ConfigError);
  DeviceSpec d = four_layers(c);
  d.potentials[2] = NAN;
  CHECK_THROWS_AS(d.validate(), ConfigError);
  PhysicalConstants bad;
  bad.hbar = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("biased profile is the layer potential minus a linear drop") {
  PhysicalConstants c;
  const DeviceSpec d = four_layers(c);
  const double v = 0.2;
  CHECK(potential_at(d, v, 0.0, c) == doctest::Approx(0.7 * c.e));
  // x = 1.5 nm lies in layer 2 at 3/8 of the device
  CHECK(potential_at(d, v, 1.5e-9, c) == doctest::Approx(1.3 * c.e - c.e * v * 0.375));
  // left edge belongs to the layer on its right, last layer owns x_N
  CHECK(potential_at(d, v, 1e-9, c) == doctest::Approx(1.3 * c.e - c.e * v * 0.25));
  CHECK(potential_at(d, v, 4e-9, c) == doctest::Approx(0.7 * c.e - c.e * v));
  CHECK(bias_drop(d, v, 8e-9, c) == doctest::Approx(c.e * v));
  CHECK(bias_drop(d, v, -1e-9, c) == 0.0);

  const LayerProfile p = layer_profile(d, 2, v, c);
  CHECK(p.left_potential == doctest::Approx(1.5 * c.e - c.e * v * 0.5));
  CHECK(p.drop == doctest::Approx(c.e * v * 0.25));
  CHECK(p.width == doctest::Approx(1e-9));
  CHECK(p.slope_constant == doctest::Approx(c.mass() * c.e * v / 4e-9));
}

TEST_CASE("wave number branches") {
  const double m = 6e-32;
  const WaveNumber a = wavenumber(m, 2e-20);
  CHECK(a.propagating);
  CHECK(a.magnitude == doctest::Approx(std::sqrt(2 * m * 2e-20)));
  const WaveNumber b = wavenumber(m, -2e-20);
  CHECK_FALSE(b.propagating);
  CHECK(b.magnitude == doctest::Approx(a.magnitude));
  CHECK_THROWS_AS(wavenumber(m, 0.0), TurningPointError);
}
