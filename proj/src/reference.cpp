#include "qtdesign/reference.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "qtdesign/detail/blocks.hpp"
#include "qtdesign/errors.hpp"

namespace qtdesign {
namespace {

constexpr double kMinPointsPerWavelength = 20.0;

/// Exact mean of the biased profile over [a, b] (clipped to the device).
double cell_average(const DeviceSpec& spec, double voltage, double a, double b,
                    const PhysicalConstants& c) {
  const double x0 = spec.boundaries.front();
  const double slope = c.e * voltage / spec.length();
  double integral = 0.0;
  for (std::size_t j = 0; j < spec.layer_count(); ++j) {
    const double lo = std::max(a, spec.boundaries[j]);
    const double hi = std::min(b, spec.boundaries[j + 1]);
    if (hi <= lo) continue;
    const double mid = 0.5 * (lo + hi);
    integral += (spec.potentials[j] - slope * (mid - x0)) * (hi - lo);
  }
  return integral / (b - a);
}

double largest_kinetic(const DeviceSpec& spec, double voltage, double energy,
                       const PhysicalConstants& c) {
  double worst = std::max(std::abs(energy - spec.outer_left),
                          std::abs(energy - spec.outer_right + c.e * voltage));
  for (std::size_t j = 0; j < spec.layer_count(); ++j) {
    const LayerProfile p = layer_profile(spec, j, voltage, c);
    worst = std::max({worst, std::abs(energy - p.left_potential),
                      std::abs(energy - p.left_potential + p.drop)});
  }
  return worst;
}

}  // namespace

FdGrid FdGrid::uniform(const DeviceSpec& spec, std::size_t n_points) {
  if (n_points < 3) throw ConfigError("finite-difference grid needs at least 3 points");
  FdGrid g;
  g.n_points = n_points;
  g.x0 = spec.boundaries.front();
  g.spacing = spec.length() / static_cast<double>(n_points - 1);
  return g;
}

FdSolution solve_bvp_fd(const DeviceSpec& spec, const BiasPoint& bias, const FdGrid& grid,
                        const PhysicalConstants& c) {
  const std::size_t n = grid.n_points;
  if (n < 3) throw ConfigError("finite-difference grid needs at least 3 points");
  const double h = grid.spacing;
  const double hbar = c.hbar;
  const double m = c.mass();

  const double kinetic = largest_kinetic(spec, bias.voltage, bias.energy, c);
  if (kinetic > 0.0) {
    const double wavelength = 2.0 * std::numbers::pi * hbar / std::sqrt(2.0 * m * kinetic);
    if (wavelength / h < kMinPointsPerWavelength) {
      throw ResolutionError("grid spacing resolves the shortest local wavelength with only " +
                            std::to_string(wavelength / h) + " points");
    }
  }

  const LeadVectors leads = lead_vectors(spec, bias, c);
  const double k_in = std::sqrt(2.0 * m * (bias.energy - spec.outer_left)) / hbar;
  const double k_out = k_in * leads.flux_factor;

  std::vector<double> diag_real(n, 0.0);
  const double scale = 2.0 * m * h * h / (hbar * hbar);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double xi = grid.x(i);
    const double v = cell_average(spec, bias.voltage, xi - 0.5 * h, xi + 0.5 * h, c);
    diag_real[i] = 2.0 + scale * (v - bias.energy);
  }

  // Tridiagonal rows after folding the one-sided second-order boundary
  // stencils into their neighbouring interior equations.
  std::vector<Complex> lower(n, 0.0), diag(n, 0.0), upper(n, 0.0), rhs(n, 0.0);
  const Complex i1{0.0, 1.0};
  diag[0] = 2.0 * i1 * k_in * h - 2.0;
  upper[0] = 4.0 - diag_real[1];
  rhs[0] = 2.0 * h * 2.0 * i1 * k_in * std::exp(i1 * k_in * grid.x0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    lower[i] = -1.0;
    diag[i] = diag_real[i];
    upper[i] = -1.0;
  }
  lower[n - 1] = 4.0 - diag_real[n - 2];
  diag[n - 1] = 2.0 * i1 * k_out * h - 2.0;

  // Thomas elimination
  for (std::size_t i = 1; i < n; ++i) {
    if (std::abs(diag[i - 1]) == 0.0) throw SolverError("zero pivot in tridiagonal solve");
    const Complex f = lower[i] / diag[i - 1];
    diag[i] -= f * upper[i - 1];
    rhs[i] -= f * rhs[i - 1];
  }
  if (std::abs(diag[n - 1]) == 0.0) throw SolverError("zero pivot in tridiagonal solve");
  FdSolution sol;
  sol.psi.assign(n, 0.0);
  sol.psi[n - 1] = rhs[n - 1] / diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) {
    sol.psi[i] = (rhs[i] - upper[i] * sol.psi[i + 1]) / diag[i];
  }
  for (const Complex& z : sol.psi) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
      throw SolverError("finite-difference solution is not finite");
    }
  }
  sol.T = leads.flux_factor * std::norm(sol.psi[n - 1]);
  return sol;
}

SliceStack slice_device(const DeviceSpec& spec, double voltage, std::size_t slices_per_layer,
                        const PhysicalConstants& c) {
  if (slices_per_layer == 0) throw ConfigError("slices_per_layer must be >= 1");
  SliceStack stack(spec.layer_count());
  const double s = static_cast<double>(slices_per_layer);
  for (std::size_t j = 0; j < spec.layer_count(); ++j) {
    const LayerProfile p = layer_profile(spec, j, voltage, c);
    stack[j].reserve(slices_per_layer);
    for (std::size_t k = 0; k < slices_per_layer; ++k) {
      const double frac = (static_cast<double>(k) + 0.5) / s;
      stack[j].push_back({p.width / s, p.left_potential - p.drop * frac});
    }
  }
  return stack;
}

LayerBlock slices_block(const std::vector<Slice>& slices, double energy, const PhysicalConstants& c) {
  LayerBlock out;
  for (const Slice& s : slices) out = out * detail::slice_block(energy - s.potential, s.width, c);
  return out;
}

LayerBlock fallback_block(const DeviceSpec& spec, std::size_t layer, const BiasPoint& bias,
                          std::size_t slices, const PhysicalConstants& c) {
  const LayerProfile p = layer_profile(spec, layer, bias.voltage, c);
  return detail::sliced_block(bias.energy - p.left_potential, p.drop, p.width, slices, c);
}

TransmissionResult transmission_pcpm(const DeviceSpec& spec, const BiasPoint& bias,
                                     std::size_t slices_per_layer, const PhysicalConstants& c) {
  if (slices_per_layer == 0) throw ConfigError("slices_per_layer must be >= 1");
  const LeadVectors leads = lead_vectors(spec, bias, c);
  std::array<Complex, 2> row = leads.left;
  double log_scale = 0.0;
  TransmissionResult r;
  r.validity_margin = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < spec.layer_count(); ++j) {
    const LayerProfile p = layer_profile(spec, j, bias.voltage, c);
    const LayerChoice choice = classify_layer(p, bias.energy, c);
    r.per_layer_valid.push_back(choice.use_wkb);
    r.validity_margin = std::min(r.validity_margin, choice.margin);
    const LayerBlock b = fallback_block(spec, j, bias, slices_per_layer, c);
    row = {row[0] * b.m.a11 + row[1] * b.m.a21, row[0] * b.m.a12 + row[1] * b.m.a22};
    log_scale += b.log_scale;
    const double s = std::max(std::abs(row[0]), std::abs(row[1]));
    row[0] /= s;
    row[1] /= s;
    log_scale += std::log(s);
  }
  const Complex m11 = row[0] * leads.right[0] + row[1] * leads.right[1];
  const double t = leads.flux_factor * std::exp(-2.0 * log_scale) / std::norm(m11);
  if (!std::isfinite(t)) throw NonFiniteError("transmission is not finite");
  if (t > 1.0 + 1e-9) throw NumericError("transmission exceeds 1");
  r.T = std::min(t, 1.0);
  r.flux_factor = leads.flux_factor;
  r.method = Method::kPiecewiseConstantFallback;
  return r;
}

}  // namespace qtdesign
