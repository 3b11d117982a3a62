#include <cstdio>
#include <fstream>
#include <string>

#include "doctest.h"
#include "qtdesign/config.hpp"
#include "qtdesign/errors.hpp"

using namespace qtdesign;
using nlohmann::json;

namespace {

json minimal() {
  return json::parse(R"({
    "device": {"boundaries_nm": [0, 1, 2], "potentials_ev": [0.5, 0.6], "bounds_ev": [0.4, 1.0]},
    "energy_ev": 0.1
  })");
}

std::string error_of(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("minimal configuration and defaults") {
  const RunConfig c = parse_config(minimal());
  CHECK(c.device.layer_count() == 2);
  CHECK(c.energy_ev == 0.1);
  CHECK(c.response == ResponseKind::kAmplitudeRatio);
  CHECK(c.curves_ev.size() == 1);
  CHECK(c.curves_ev[0][1] == doctest::Approx(0.6));
  CHECK(c.optimizer.lower == doctest::Approx(0.4));
  CHECK(c.optimizer.initial_U[0] == doctest::Approx(0.5));
  CHECK_FALSE(c.target.has_value());
  CHECK_THROWS_AS(c.problem(), ConfigError);
}

TEST_CASE("errors carry the JSON pointer") {
  json d = minimal();
  d["device"]["colour"] = 1;
  CHECK(error_of(d) == "config /device/colour: unknown key");

  d = minimal();
  d["energy_ev"] = "high";
  CHECK(error_of(d) == "config /energy_ev: expected a number");

  d = minimal();
  d["device"]["potentials_ev"][1] = nullptr;
  CHECK(error_of(d) == "config /device/potentials_ev/1: expected a number");

  d = minimal();
  d.erase("energy_ev");
  CHECK(error_of(d) == "config /energy_ev: missing required key");

  d = minimal();
  d["optimizer"] = {{"gradient_mode", "newton"}};
  CHECK(error_of(d).rfind("config /optimizer/gradient_mode:", 0) == 0);

  d = minimal();
  d["robust"] = {{"half_widths_ev", {0.1, 0.1, 0.1}}};
  CHECK(error_of(d) == "config /robust/half_widths_ev: expected 2 values, got 3");

  d = minimal();
  d["target"] = {{"samples", {{0.1, 2.0}}}};
  CHECK(error_of(d).rfind("config /target:", 0) == 0);

  d = minimal();
  d["device"]["boundaries_nm"] = {0, 1};
  CHECK(error_of(d).rfind("config /device:", 0) == 0);
}

TEST_CASE("full configuration") {
  json d = minimal();
  d["response"] = "flux_ratio";
  d["curves_ev"] = {0.5, {0.55, 0.65}};
  d["sweep"] = {{"v_min", 0.0}, {"v_max", 0.2}, {"points", 5}};
  d["target"] = {{"linear", {{"slope", 2e-5}, {"intercept", 1e-5}, {"v_max", 0.2}, {"count", 4}}}};
  d["optimizer"] = {{"initial_u_ev", 0.7}, {"gradient_mode", "both"}, {"starts", 3}};
  d["robust"] = {{"half_widths_ev", 0.05}, {"alpha", {0, 1e10}}, {"epsilon", 1e-3}, {"level", 3}};
  d["quadrature"] = {{"dimension", 2}, {"level", 3}};
  d["output"] = {{"directory", "out/x"}};
  const RunConfig c = parse_config(d);
  CHECK(c.response == ResponseKind::kFluxRatio);
  REQUIRE(c.curves_ev.size() == 2);
  CHECK(c.curves_ev[0] == std::vector<double>{0.5, 0.5});
  CHECK(c.sweep.size() == 5);
  CHECK(c.sweep[4] == doctest::Approx(0.2));
  CHECK(c.target->samples.size() == 4);
  CHECK(c.compare_gradients);
  CHECK(c.optimizer.initial_U == std::vector<double>{0.7, 0.7});
  CHECK(c.optimizer.starts == 3);
  REQUIRE(c.robust.has_value());
  CHECK(c.robust->half_widths == std::vector<double>{0.05, 0.05});
  CHECK(c.alphas == std::vector<double>{0, 1e10});
  CHECK(c.robust->level == 3);
  CHECK_FALSE(c.robust->select_level);
  CHECK(c.quadrature->level == 3);
  CHECK(c.output_dir == "out/x");
  const DesignProblem p = c.problem();
  CHECK(p.energy == doctest::Approx(0.1 * c.constants.e));
}

TEST_CASE("files: syntax errors and missing files") {
  const std::string path = "qt_config_test_bad.json";
  {
    std::ofstream f(path);
    f << "{\n  \"energy_ev\": 0.1,\n  oops\n}\n";
  }
  try {
    load_config(path);
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_config("does/not/exist.json"), ConfigError);
}

TEST_CASE("shipped recipes parse") {
  for (const char* name : {"table1", "table2", "table3", "figure2", "figure3"}) {
    CAPTURE(name);
    const RunConfig c = load_config(std::string(QT_SOURCE_DIR) + "/recipes/" + name + ".json");
    CHECK(c.device.layer_count() >= 1);
  }
}
