#pragma once

#include <cstddef>
#include <vector>

#include "qtdesign/constants.hpp"
#include "qtdesign/device.hpp"
#include "qtdesign/wkb.hpp"

namespace qtdesign {

/// Uniform nodes x_0 .. x_N.
struct FdGrid {
  std::size_t n_points = 4000;
  double x0 = 0.0;
  double spacing = 0.0;

  static FdGrid uniform(const DeviceSpec& spec, std::size_t n_points);
  double x(std::size_t i) const { return x0 + spacing * static_cast<double>(i); }
};

struct FdSolution {
  std::vector<Complex> psi;
  double T = 0.0;
};

/// Second-order finite differences for the scattering boundary-value problem,
/// incident amplitude 1. Node potentials are cell averages of the profile.
FdSolution solve_bvp_fd(const DeviceSpec& spec, const BiasPoint& bias, const FdGrid& grid,
                        const PhysicalConstants& constants);

struct Slice {
  double width = 0.0;
  double potential = 0.0;
};

/// Constant slices of every layer, potentials sampled at slice midpoints.
using SliceStack = std::vector<std::vector<Slice>>;

SliceStack slice_device(const DeviceSpec& spec, double voltage, std::size_t slices_per_layer,
                        const PhysicalConstants& constants);

/// Exact transfer-matrix transmission of the sliced device.
TransmissionResult transmission_pcpm(const DeviceSpec& spec, const BiasPoint& bias,
                                     std::size_t slices_per_layer,
                                     const PhysicalConstants& constants);

/// Product of slice propagators across one layer, in the same (psi, psi')
/// basis as the WKB blocks so the two compose in one chain.
LayerBlock fallback_block(const DeviceSpec& spec, std::size_t layer, const BiasPoint& bias,
                          std::size_t slices, const PhysicalConstants& constants);

/// Same for an explicit slice list.
LayerBlock slices_block(const std::vector<Slice>& slices, double energy,
                        const PhysicalConstants& constants);

}  // namespace qtdesign
