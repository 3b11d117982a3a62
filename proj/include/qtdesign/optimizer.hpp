#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qtdesign/objective.hpp"
#include "qtdesign/sparse_grid.hpp"

namespace qtdesign {

enum class GradientMode { kAnalytic, kFiniteDifference };

const char* to_string(GradientMode m);

struct OptimizerConfig {
  int max_iterations = 500;
  double tolerance = 1e-15;  // relative objective decrease
  double gradient_tolerance = 1e-12;  // projected-gradient infinity norm
  std::vector<double> initial_U;  // eV
  double lower = 0.0;
  double upper = 1.0;
  GradientMode gradient_mode = GradientMode::kAnalytic;
  int memory = 10;
  double first_step = 0.1;  // infinity norm of the first trial step, in box widths
  int starts = 1;  // > 1 adds Latin-hypercube starts to initial_U
  std::uint64_t seed = 20240611;

  void validate() const;
};

struct TraceEntry {
  int iteration = 0;
  double objective = 0.0;
  double step = 0.0;  // accepted line-search parameter
  double projected_gradient = 0.0;
};

struct OptimizationResult {
  std::vector<double> U_opt;
  double objective = 0.0;
  double gradient_norm = 0.0;  // projected, infinity norm
  int iterations = 0;
  int evaluations = 0;
  std::vector<TraceEntry> trace;
  bool converged = false;
  std::string stop_reason;
  GradientMode gradient_mode = GradientMode::kAnalytic;
  std::vector<double> initial_U;
  std::optional<AdaptiveReport> adaptive;
  std::optional<RobustReport> robust;
};

struct Evaluation {
  double value = 0.0;
  std::vector<double> gradient;
};

struct Evaluator {
  std::function<double(std::span<const double>)> value;
  std::function<Evaluation(std::span<const double>)> value_and_gradient;
};

/// Projected limited-memory BFGS on the box [lower, upper]^n with an Armijo
/// backtracking search along the projected path.
OptimizationResult minimize(const Evaluator& f, const OptimizerConfig& config);

/// Forward differences with step 1e-8 max(1, |x_j|).
std::vector<double> forward_difference_gradient(const std::function<double(std::span<const double>)>& f,
                                                std::span<const double> x, double fx);

/// Infinity norm of P(x - g) - x.
double projected_gradient_norm(std::span<const double> x, std::span<const double> g, double lower,
                               double upper);

OptimizationResult solve_deterministic(const DesignProblem& problem, const OptimizerConfig& config);

/// Robust design. With robust.select_level the quadrature level is chosen once
/// by adaptive_moments at the initial iterate; throws NonConvergenceError if
/// that selection fails.
OptimizationResult solve_robust(const DesignProblem& problem, const RobustSpec& robust,
                                const OptimizerConfig& config, unsigned threads = 1);

/// Level selection alone, at potentials U (eV).
AdaptiveReport select_level(const DesignProblem& problem, std::span<const double> U_ev,
                            const RobustSpec& robust);

}  // namespace qtdesign
