#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qtdesign/objective.hpp"
#include "qtdesign/optimizer.hpp"
#include "qtdesign/sparse_grid.hpp"

namespace qtdesign {

struct OracleConfig {
  std::size_t fd_points = 4000;
  std::size_t slices = 1000;
};

/// Parsed run description. Interface units: eV, nm, V.
struct RunConfig {
  PhysicalConstants constants;
  DeviceSpec device;
  double energy_ev = 0.0;
  ResponseKind response = ResponseKind::kAmplitudeRatio;
  DeviceOptions options;
  std::vector<std::vector<double>> curves_ev;  // potentials per swept curve
  std::vector<double> sweep;  // V
  OracleConfig oracle;

  std::optional<TargetResponse> target;
  std::optional<RobustSpec> robust;
  std::vector<double> alphas;
  OptimizerConfig optimizer;
  bool compare_gradients = false;  // run both gradient modes in deterministic design

  std::optional<SparseGridSpec> quadrature;
  std::string output_dir = ".";

  /// The design problem; requires a target.
  DesignProblem problem() const;
};

/// Schema-checked conversion. Unknown keys and type errors raise ConfigError
/// naming the JSON pointer of the offending value.
RunConfig parse_config(const nlohmann::json& doc);

/// Reads and parses a file; syntax errors carry line and column.
RunConfig load_config(const std::string& path);

}  // namespace qtdesign
