#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "qtdesign/errors.hpp"
#include "qtdesign/objective.hpp"
#include "qtdesign/reference.hpp"

using namespace qtdesign;

namespace {

DesignProblem four_layers() {
  DesignProblem p;
  p.device = DeviceSpec::from_interface_units({0, 1, 2, 3, 4}, {0.7, 0.7, 0.7, 0.7}, 0, 0, 0.7, 1.7,
                                              p.constants);
  p.energy = 0.026 * p.constants.e;
  p.target = TargetResponse::linear(2e-5, 9.9e-6, 0.25, 10);
  return p;
}

const std::vector<double> kReferenceU{0.70, 1.31, 1.54, 0.70};

}  // namespace

TEST_CASE("linear target samples") {
  const TargetResponse t = TargetResponse::linear(2e-5, 9.9e-6, 0.25, 10);
  REQUIRE(t.samples.size() == 10);
  CHECK(t.samples[0].voltage == doctest::Approx(0.025));
  CHECK(t.samples[9].voltage == doctest::Approx(0.25));
  CHECK(t.samples[9].T0 == doctest::Approx(2e-5 * 0.25 + 9.9e-6));
  CHECK_NOTHROW(t.validate());
  TargetResponse bad = t;
  bad.samples[3].T0 = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = t;
  std::swap(bad.samples[1], bad.samples[2]);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("deterministic cost against an exact-solver oracle") {
  const DesignProblem p = four_layers();
  const ObjectiveReport r = cost_deterministic(kReferenceU, p);
  const DeviceSpec d = p.with_potentials(kReferenceU);
  double j = 0.0;
  for (const TargetSample& s : p.target.samples) {
    const TransmissionResult t = transmission_pcpm(d, {s.voltage, p.energy}, 2000, p.constants);
    j += std::pow(s.T0 - t.amplitude_ratio(), 2);
  }
  // WKB vs exact transmission differ at the 1e-6 level here
  CHECK(r.value == doctest::Approx(j).epsilon(1e-3));
  CHECK(r.residuals.size() == 10);
  CHECK(r.value == doctest::Approx(1.4618e-12).epsilon(1e-3));
}

TEST_CASE("response kinds differ by the lead velocity ratio") {
  DesignProblem p = four_layers();
  const DeviceSpec d = p.with_potentials(kReferenceU);
  const TransmissionResult t = transmission_device(d, {0.25, p.energy}, p.constants);
  const double amp = p.target.samples[9].T0 - cost_deterministic(kReferenceU, p).residuals[9];
  p.response = ResponseKind::kFluxRatio;
  const double flux = p.target.samples[9].T0 - cost_deterministic(kReferenceU, p).residuals[9];
  CHECK(amp == doctest::Approx(t.amplitude_ratio()).epsilon(1e-12));
  CHECK(flux == doctest::Approx(t.T).epsilon(1e-12));
  CHECK(flux / amp == doctest::Approx(t.flux_factor).epsilon(1e-12));
}

TEST_CASE("deterministic gradient matches central differences") {
  for (ResponseKind kind : {ResponseKind::kAmplitudeRatio, ResponseKind::kFluxRatio}) {
    DesignProblem p = four_layers();
    p.response = kind;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.7, 1.7);
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<double> U(4);
      for (double& x : U) x = u(rng);
      const ObjectiveReport r = cost_deterministic(U, p);
      for (std::size_t j = 0; j < 4; ++j) {
        std::vector<double> up = U;
        std::vector<double> dn = U;
        up[j] += 1e-7;
        dn[j] -= 1e-7;
        const double fd =
            (cost_deterministic(up, p, false).value - cost_deterministic(dn, p, false).value) / 2e-7;
        CHECK(r.gradient[j] == doctest::Approx(fd).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("random cost shifts the potentials") {
  const DesignProblem p = four_layers();
  const std::vector<double> z{0.01, -0.02, 0.03, 0.0};
  std::vector<double> shifted = kReferenceU;
  for (std::size_t j = 0; j < 4; ++j) shifted[j] += z[j];
  CHECK(cost_random(kReferenceU, z, p) == cost_deterministic(shifted, p, false).value);
  CHECK_THROWS_AS(cost_random(kReferenceU, std::vector<double>{0.1}, p), ConfigError);
}

TEST_CASE("robust moments equal explicit grid quadrature") {
  const DesignProblem p = four_layers();
  RobustSpec rs;
  rs.half_widths = {0.05, 0.05, 0.05, 0.05};
  rs.level = 3;
  rs.alpha = 1e12;
  const RobustReport r = cost_robust(kReferenceU, p, rs, 2);
  const QuadratureGrid g = build_grid({4, 3, rs.half_widths});
  const double m1 = integrate(g, [&](std::span<const double> z) { return cost_random(kReferenceU, z, p); });
  const double m2 = integrate(g, [&](std::span<const double> z) {
    const double j = cost_random(kReferenceU, z, p);
    return j * j;
  });
  CHECK(r.nodes == g.node_count());
  CHECK(r.mean == doctest::Approx(m1).epsilon(1e-9));
  CHECK(r.second_moment == doctest::Approx(m2).epsilon(1e-9));
  CHECK(r.variance == doctest::Approx(m2 - m1 * m1).epsilon(1e-6));
  CHECK(r.value == doctest::Approx(r.mean + 1e12 * r.variance));
  CHECK(r.std_dev() == doctest::Approx(std::sqrt(r.variance)));
}

TEST_CASE("robust gradient matches central differences") {
  const DesignProblem p = four_layers();
  RobustSpec rs;
  rs.half_widths = {0.05, 0.04, 0.03, 0.02};
  rs.level = 2;
  rs.alpha = 1e11;
  const std::vector<double> U{0.8, 1.2, 1.5, 0.9};
  const RobustReport r = cost_robust(U, p, rs);
  for (std::size_t j = 0; j < 4; ++j) {
    std::vector<double> up = U;
    std::vector<double> dn = U;
    up[j] += 1e-7;
    dn[j] -= 1e-7;
    const double fd = (cost_robust(up, p, rs, 1, false).value - cost_robust(dn, p, rs, 1, false).value) / 2e-7;
    CHECK(r.gradient[j] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("zero half widths collapse to the deterministic cost") {
  const DesignProblem p = four_layers();
  RobustSpec rs;
  rs.half_widths = {0, 0, 0, 0};
  rs.level = 2;
  const RobustReport r = cost_robust(kReferenceU, p, rs);
  const ObjectiveReport d = cost_deterministic(kReferenceU, p);
  CHECK(r.mean == doctest::Approx(d.value).epsilon(1e-10));
  for (std::size_t j = 0; j < 4; ++j) CHECK(r.gradient[j] == doctest::Approx(d.gradient[j]).epsilon(1e-8));
  CHECK(r.variance == doctest::Approx(0.0).epsilon(1e-30));
}

TEST_CASE("robust spec validation") {
  RobustSpec rs;
  rs.half_widths = {0.1, 0.1};
  CHECK_THROWS_AS(rs.validate(4), ConfigError);
  rs.half_widths = {0.1, 0.1, -0.1, 0.1};
  CHECK_THROWS_AS(rs.validate(4), ConfigError);
  rs.half_widths = {0.1, 0.1, 0.1, 0.1};
  rs.alpha = -1;
  CHECK_THROWS_AS(rs.validate(4), ConfigError);
}

TEST_CASE("failing bias points are reported") {
  DesignProblem p = four_layers();
  p.device.outer_left = 0.1 * p.constants.e;  // E below the incident lead
  try {
    cost_deterministic(kReferenceU, p);
    FAIL("expected a BiasPointError");
  } catch (const BiasPointError& e) {
    CHECK(e.index() == 0);
  }
}
