#include <cmath>
#include <random>

#include "doctest.h"
#include "qtdesign/errors.hpp"
#include "qtdesign/wkb.hpp"

using namespace qtdesign;

namespace {

// Composite Simpson rule of sqrt(2 m |E - V(x)|) over the ramp.
double simpson_action(double energy, double potential, double voltage, double x1, double x2,
                      const PhysicalConstants& c) {
  const int n = 20000;
  const double h = (x2 - x1) / n;
  auto f = [&](double x) {
    const double v = potential - c.e * voltage * (x - x1) / (x2 - x1);
    return std::sqrt(2.0 * c.mass() * std::abs(energy - v));
  };
  double s = f(x1) + f(x2);
  for (int i = 1; i < n; ++i) s += f(x1 + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// Textbook transmission of a rectangular barrier between equal leads.
double rectangular_T(double energy, double height, double width, const PhysicalConstants& c) {
  const double k = std::sqrt(2.0 * c.mass() * energy) / c.hbar;
  if (energy < height) {
    const double q = std::sqrt(2.0 * c.mass() * (height - energy)) / c.hbar;
    const double s = std::sinh(q * width);
    return 1.0 / (1.0 + std::pow(k * k + q * q, 2) * s * s / (4 * k * k * q * q));
  }
  const double q = std::sqrt(2.0 * c.mass() * (energy - height)) / c.hbar;
  const double s = std::sin(q * width);
  return 1.0 / (1.0 + std::pow(k * k - q * q, 2) * s * s / (4 * k * k * q * q));
}

}  // namespace

TEST_CASE("phase integral matches quadrature of the local momentum") {
  PhysicalConstants c;
  const double ev = c.e;
  SUBCASE("over barrier") {
    const auto p = phase_integral(Regime::kOverBarrier, 0.9 * ev, 0.5 * ev, 0.3, 0, 2e-9, c);
    CHECK(p.regime == Regime::kOverBarrier);
    CHECK(p.value == doctest::Approx(simpson_action(0.9 * ev, 0.5 * ev, 0.3, 0, 2e-9, c)).epsilon(1e-10));
  }
  SUBCASE("under barrier") {
    const auto p = phase_integral(Regime::kUnderBarrier, 0.2 * ev, 1.0 * ev, 0.4, 1e-9, 3e-9, c);
    CHECK(p.value == doctest::Approx(simpson_action(0.2 * ev, 1.0 * ev, 0.4, 1e-9, 3e-9, c)).epsilon(1e-10));
  }
  SUBCASE("series branch is continuous with the exact form") {
    const double tiny = 1e-9;
    const auto a = phase_integral(Regime::kOverBarrier, 0.9 * ev, 0.5 * ev, tiny, 0, 1e-9, c);
    const auto b = phase_integral(Regime::kOverBarrier, 0.9 * ev, 0.5 * ev, 0.0, 0, 1e-9, c);
    CHECK(a.value == doctest::Approx(simpson_action(0.9 * ev, 0.5 * ev, tiny, 0, 1e-9, c)).epsilon(1e-12));
    CHECK(b.value == doctest::Approx(1e-9 * std::sqrt(2 * c.mass() * 0.4 * ev)).epsilon(1e-14));
  }
  SUBCASE("wrong regime is rejected") {
    CHECK_THROWS_AS(phase_integral(Regime::kUnderBarrier, 0.9 * ev, 0.5 * ev, 0.1, 0, 1e-9, c), RegimeError);
    CHECK_THROWS_AS(phase_integral(Regime::kOverBarrier, 0.5 * ev, 0.6 * ev, 0.3, 0, 1e-9, c), RegimeError);
  }
}

TEST_CASE("closed forms equal the matrix product") {
  PhysicalConstants c;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double width = (0.5 + 2.5 * u(rng)) * 1e-9;
    const Barrier g{0.0, width, 0.0, 0.0};
    const double v = 0.5 * u(rng);
    double energy = 0.0;
    double potential = 0.0;
    if (i % 2 == 0) {
      potential = (0.1 + 0.9 * u(rng)) * c.e;
      energy = potential + (0.01 + 0.5 * u(rng)) * c.e;
    } else {
      energy = (0.01 + 0.5 * u(rng)) * c.e;
      potential = energy + c.e * v + (0.01 + 0.8 * u(rng)) * c.e;
    }
    const auto closed = transmission_single_closed(energy, potential, v, g, c);
    const auto matrix = transmission_single_matrix(energy, potential, v, g, c);
    CHECK(closed.T == doctest::Approx(matrix.T).epsilon(1e-10));
    CHECK(closed.method == (i % 2 == 0 ? Method::kClosedFormOver : Method::kClosedFormUnder));
  }
}

TEST_CASE("single barrier error conditions") {
  PhysicalConstants c;
  const Barrier g{0.0, 1e-9, 0.0, 0.0};
  CHECK_THROWS_AS(transmission_single_closed(0.5 * c.e, 0.6 * c.e, 0.3, g, c), RegimeError);
  const Barrier high_left{0.0, 1e-9, 0.3 * c.e, 0.0};
  CHECK_THROWS_AS(transmission_single_closed(0.2 * c.e, 0.6 * c.e, 0.1, high_left, c), NoIncidentWaveError);
  const Barrier high_right{0.0, 1e-9, 0.0, 0.5 * c.e};
  CHECK_THROWS_AS(transmission_single_matrix(0.2 * c.e, 0.6 * c.e, 0.1, high_right, c),
                  EvanescentOutputError);
}

TEST_CASE("device WKB is exact for flat barriers at zero bias") {
  PhysicalConstants c;
  for (double height : {0.3, 0.5, 1.2}) {
    const DeviceSpec d = DeviceSpec::from_interface_units({0, 1.5}, {height}, 0, 0, 0, 2, c);
    const auto r = transmission_device(d, {0.0, 0.4 * c.e}, c);
    CHECK(r.method == Method::kMatrixWkb);
    CHECK(r.T == doctest::Approx(rectangular_T(0.4 * c.e, height * c.e, 1.5e-9, c)).epsilon(1e-10));
  }
}

TEST_CASE("device with one layer reproduces the single-barrier forms") {
  PhysicalConstants c;
  const DeviceSpec d = DeviceSpec::from_interface_units({0, 2}, {0.6}, 0, 0, 0, 2, c);
  const Barrier g{0.0, 2e-9, 0.0, 0.0};
  for (double v : {0.05, 0.1, 0.2}) {
    const auto dev = transmission_device(d, {v, 0.1 * c.e}, c);
    const auto closed = transmission_single_closed(0.1 * c.e, 0.6 * c.e, v, g, c);
    REQUIRE(dev.method == Method::kMatrixWkb);
    CHECK(dev.T == doctest::Approx(closed.T).epsilon(1e-9));
    CHECK(dev.flux_factor == doctest::Approx(closed.flux_factor));
    CHECK(dev.amplitude_ratio() == doctest::Approx(closed.T / closed.flux_factor));
  }
}

TEST_CASE("invalid layers fall back to slices") {
  PhysicalConstants c;
  // turning point inside the layer
  const DeviceSpec d = DeviceSpec::from_interface_units({0, 1, 2}, {0.5, 0.45}, 0, 0, 0, 2, c);
  const auto r = transmission_device(d, {0.3, 0.4 * c.e}, c);
  CHECK(r.method == Method::kPiecewiseConstantFallback);
  CHECK(r.validity_margin < 0.0);
  CHECK(r.T > 0.0);
  CHECK(r.T <= 1.0);
}

TEST_CASE("device gradient matches central differences") {
  PhysicalConstants c;
  const DeviceSpec base = DeviceSpec::from_interface_units({0, 1, 2, 3, 4}, {0.7, 1.31, 1.54, 0.7}, 0, 0,
                                                           0.7, 1.7, c);
  for (double v : {0.0, 0.1, 0.25}) {
    const BiasPoint bias{v, 0.026 * c.e};
    const auto g = transmission_device_gradient(base, bias, c);
    CHECK(g.result.T == doctest::Approx(transmission_device(base, bias, c).T).epsilon(1e-13));
    for (std::size_t j = 0; j < 4; ++j) {
      const double h = 1e-7 * c.e;
      DeviceSpec up = base;
      DeviceSpec dn = base;
      up.potentials[j] += h;
      dn.potentials[j] -= h;
      const double fd = (transmission_device(up, bias, c).T - transmission_device(dn, bias, c).T) / (2 * h);
      CHECK(g.dT_dU[j] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("validity margin") {
  PhysicalConstants c;
  const auto v = wkb_validity(0.7 * c.e, 0.48 * c.e, 0.0, 0, 1e-9, c);
  CHECK(v.valid);
  CHECK(v.margin == doctest::Approx(0.22 * c.e));
  const auto w = wkb_validity(0.7 * c.e, 0.48 * c.e, 0.5, 0, 1e-9, c);
  CHECK_FALSE(w.valid);
  const auto t = wkb_validity(0.3 * c.e, 0.5 * c.e, 0.4, 0, 1e-9, c);
  CHECK(t.margin == doctest::Approx(-0.2 * c.e));
}
