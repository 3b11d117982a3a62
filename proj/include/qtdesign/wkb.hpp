#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "qtdesign/constants.hpp"
#include "qtdesign/device.hpp"
#include "qtdesign/matrix2.hpp"

namespace qtdesign {

using Complex = std::complex<double>;

enum class Regime { kOverBarrier, kUnderBarrier };

/// Accumulated WKB action (J s) across a linear ramp; the phase is value / hbar.
struct PhaseIntegral {
  double value = 0.0;
  Regime regime = Regime::kOverBarrier;
};

/// Amplitude-basis matrix: K, E, and their WKB counterparts.
using TransferMatrix = Mat2<Complex>;

/// Propagator of the state (psi, dpsi/dx) from the right edge of a layer to its
/// left edge. Real-valued, unit determinant, magnitude factored out.
using LayerBlock = ScaledMat2<double>;

enum class Method { kClosedFormOver, kClosedFormUnder, kMatrixWkb, kPiecewiseConstantFallback };

const char* to_string(Method m);

struct TransmissionResult {
  double T = 0.0;            // transmitted / incident probability current
  double flux_factor = 1.0;  // kappa_out / kappa_in
  Method method = Method::kMatrixWkb;
  double validity_margin = 0.0;  // J, minimum over layers
  std::vector<bool> per_layer_valid;

  /// |A_out / A_in|^2, i.e. T without the lead-velocity ratio.
  double amplitude_ratio() const { return T / flux_factor; }
};

/// Single linear-ramp barrier on [x1, x2]; leads at outer_left and
/// outer_right - e V_bias (J).
struct Barrier {
  double x1 = 0.0;
  double x2 = 1e-9;
  double outer_left = 0.0;
  double outer_right = 0.0;
};

/// m e V_bias / (x2 - x1).
double ramp_constant(double mass, double e, double voltage, double x1, double x2);

/// Action of the ramp U - e V (x - x1)/(x2 - x1) for the requested regime.
/// Throws RegimeError when the energy does not satisfy that regime on the whole ramp.
PhaseIntegral phase_integral(Regime regime, double energy, double potential, double voltage,
                             double x1, double x2, const PhysicalConstants& constants);

/// Relative switch below which the series branch of phase_integral is used.
inline constexpr double kZeroBiasSwitch = 1e-6;

/// Local WKB wave at one point: kappa (momentum units) and action measured from
/// the layer's left edge.
struct WkbLocal {
  double kappa = 0.0;
  double action = 0.0;
};

/// Factors of the continuity conditions at an interface x between a constant
/// region (kappa_left) and a WKB region.
struct InterfaceMatrices {
  TransferMatrix plane_k;      // K(kappa_left)
  TransferMatrix plane_phase;  // E(kappa_left, x)
  TransferMatrix wkb_k;        // K-script(kappa, x)
  TransferMatrix wkb_phase;    // E-script(kappa, x)
};

TransferMatrix plane_wave_k(double kappa, double hbar);
TransferMatrix plane_wave_phase(double kappa, double x, double hbar);
TransferMatrix wkb_k(const WkbLocal& local, double slope_constant, Regime regime, double hbar);
TransferMatrix wkb_phase(const WkbLocal& local, Regime regime, double hbar);

InterfaceMatrices interface_matrices(double kappa_left, double x, const WkbLocal& right,
                                     double slope_constant, Regime regime, double hbar);

/// WKB validity margin F (J) of a ramp and whether it is positive.
struct Validity {
  double margin = 0.0;
  bool valid = false;
};

Validity wkb_validity(double energy, double potential, double voltage, double x1, double x2,
                      const PhysicalConstants& constants);

/// Closed forms for a single ramp barrier, times the lead-velocity ratio.
TransmissionResult transmission_single_closed(double energy, double potential, double voltage,
                                              const Barrier& geometry,
                                              const PhysicalConstants& constants);

/// Same quantity from the explicit eight-factor matrix product.
TransmissionResult transmission_single_matrix(double energy, double potential, double voltage,
                                              const Barrier& geometry,
                                              const PhysicalConstants& constants);

struct DeviceOptions {
  std::size_t fallback_slices = 1000;
};

/// Transmission of the full device: WKB blocks where valid, sliced
/// piecewise-constant blocks elsewhere.
TransmissionResult transmission_device(const DeviceSpec& spec, const BiasPoint& bias,
                                       const PhysicalConstants& constants,
                                       const DeviceOptions& options = {});

/// Transmission plus dT/dU_j (per Joule) for every layer.
struct TransmissionGradient {
  TransmissionResult result;
  std::vector<double> dT_dU;
};

TransmissionGradient transmission_device_gradient(const DeviceSpec& spec, const BiasPoint& bias,
                                                  const PhysicalConstants& constants,
                                                  const DeviceOptions& options = {});

/// How one layer is propagated at a given operating point.
struct LayerChoice {
  bool use_wkb = false;
  Regime regime = Regime::kOverBarrier;
  double margin = 0.0;
};

LayerChoice classify_layer(const LayerProfile& profile, double energy,
                           const PhysicalConstants& constants);

/// Layer block with the layer potential replaced by `potential` (J).
LayerBlock layer_block(const DeviceSpec& spec, std::size_t layer, double potential,
                       const BiasPoint& bias, const PhysicalConstants& constants,
                       const DeviceOptions& options, LayerChoice* choice = nullptr);

/// Layer block and its derivative with respect to the layer potential (per J),
/// the derivative carried in the scale of `block`.
struct LayerBlockDerivative {
  LayerBlock block;
  Mat2<double> derivative;
  LayerChoice choice;
};

LayerBlockDerivative layer_block_derivative(const DeviceSpec& spec, std::size_t layer,
                                            double potential, const BiasPoint& bias,
                                            const PhysicalConstants& constants,
                                            const DeviceOptions& options);

/// Boundary vectors closing the device chain: M11 = left * P * right.
struct LeadVectors {
  std::array<Complex, 2> left;
  std::array<Complex, 2> right;
  double flux_factor = 1.0;
};

LeadVectors lead_vectors(const DeviceSpec& spec, const BiasPoint& bias,
                         const PhysicalConstants& constants);

}  // namespace qtdesign
