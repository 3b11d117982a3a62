#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "qtdesign/constants.hpp"
#include "qtdesign/device.hpp"
#include "qtdesign/errors.hpp"
#include "qtdesign/sparse_grid.hpp"
#include "qtdesign/wkb.hpp"

namespace qtdesign {

struct TargetSample {
  double voltage = 0.0;  // V
  double T0 = 0.0;
};

struct TargetResponse {
  std::vector<TargetSample> samples;

  /// T0 = slope * V + intercept at V_i = i * v_max / count, i = 1..count.
  static TargetResponse linear(double slope, double intercept, double v_max, std::size_t count);
  void validate() const;
};

/// Which transmission quantity is fitted to the target. kAmplitudeRatio is
/// |A_out / A_in|^2, kFluxRatio multiplies it by kappa_out / kappa_in.
enum class ResponseKind { kAmplitudeRatio, kFluxRatio };

const char* to_string(ResponseKind k);

struct DesignProblem {
  DeviceSpec device;  // its potentials are ignored; bounds are used by the optimizer
  double energy = 0.0;  // J
  TargetResponse target;
  PhysicalConstants constants;
  DeviceOptions options;
  ResponseKind response = ResponseKind::kAmplitudeRatio;

  void validate() const;
  /// Device with layer potentials U (eV).
  DeviceSpec with_potentials(std::span<const double> U_ev) const;
};

struct ObjectiveReport {
  double value = 0.0;
  std::vector<double> gradient;  // 1/eV
  std::vector<double> residuals;  // T0_i - T_i
};

/// Transmission failure at one bias point of the target.
class BiasPointError : public NumericError {
 public:
  BiasPointError(const std::string& what, std::size_t index)
      : NumericError(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// Least-squares misfit of the response at potentials U (eV).
ObjectiveReport cost_deterministic(std::span<const double> U_ev, const DesignProblem& problem,
                                   bool with_gradient = true);

/// Misfit with the potentials perturbed by z (eV).
double cost_random(std::span<const double> U_ev, std::span<const double> z_ev,
                   const DesignProblem& problem);

struct RobustSpec {
  std::vector<double> half_widths;  // eV, one per layer
  double alpha = 0.0;
  int level = 0;  // quadrature level used by cost_robust
  bool select_level = true;  // solve_robust replaces `level` by the adaptive choice
  AdaptiveOptions adaptive;  // level selection in solve_robust

  void validate(std::size_t layers) const;
};

struct RobustReport {
  double value = 0.0;
  double mean = 0.0;
  double second_moment = 0.0;
  double variance = 0.0;  // clamped at zero
  double raw_variance = 0.0;
  std::vector<double> gradient;  // 1/eV
  std::size_t nodes = 0;

  double std_dev() const;
};

/// Mean + alpha * variance of the random misfit, by sparse-grid quadrature.
RobustReport cost_robust(std::span<const double> U_ev, const DesignProblem& problem,
                         const RobustSpec& robust, unsigned threads = 1,
                         bool with_gradient = true);

/// The random misfit as a streamed quadrature integrand over the box
/// prod [-a_j, a_j]. Outputs J and J^2, followed by dJ/dU (N) and J dJ/dU (N)
/// when gradients are requested (per eV).
class RandomCostIntegrand final : public NestedIntegrand {
 public:
  RandomCostIntegrand(const DesignProblem& problem, std::vector<double> U_ev,
                      std::vector<double> half_widths_ev, bool with_gradient);

  std::size_t outputs() const override;
  void prepare(const NestedRule& rule) override;
  std::unique_ptr<NestedIntegrand> clone() const override;
  void enter(std::size_t dim, std::size_t p, double x) override;
  void leave(std::size_t dim) override;
  void leaf(std::size_t p, double x, std::span<double> out) override;

 private:
  struct Shared;
  /// Row vector left * P_1 ... P_d per bias, with d/dU_j for j < d.
  struct Frame {
    std::vector<std::array<Complex, 2>> row;
    std::vector<double> log_scale;
    std::vector<std::array<Complex, 2>> drow;  // [bias * layers + j]
  };
  void push_layer(std::size_t dim, double potential);

  std::shared_ptr<const Shared> shared_;
  std::vector<Frame> stack_;
  std::vector<double> work_;
};

}  // namespace qtdesign
