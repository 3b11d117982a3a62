#pragma once

// Layer propagators in the (psi, psi') basis, templated on the scalar so the
// same code yields values (double) and exact derivatives (Dual).

#include <cmath>
#include <cstddef>

#include "qtdesign/constants.hpp"
#include "qtdesign/dual.hpp"
#include "qtdesign/matrix2.hpp"
#include "qtdesign/wkb.hpp"

namespace qtdesign::detail {

using std::cos;
using std::exp;
using std::sin;
using std::sqrt;

/// Integral of kappa over a linear ramp with endpoint momenta ka, kb:
/// (kb^3 - ka^3) / (3 C) rewritten without the 1/C cancellation.
template <typename S>
S ramp_action(const S& ka, const S& kb, double width) {
  return (2.0 * width / 3.0) * (ka * ka + ka * kb + kb * kb) / (ka + kb);
}

/// WKB propagator across one ramp layer. `excess` is E - V(x_left) in J,
/// `drop` = V(x_left) - V(x_right), `slope` = m e V_bias / L.
template <typename S>
ScaledMat2<S> wkb_block(const S& excess, double drop, double width, double slope, Regime regime,
                        const PhysicalConstants& c) {
  const double m = c.mass();
  const double hbar = c.hbar;
  ScaledMat2<S> out;
  if (regime == Regime::kOverBarrier) {
    const S ka = sqrt(2.0 * m * excess);
    const S kb = sqrt(2.0 * m * (excess + drop));
    const S phase = ramp_action(ka, kb, width) / hbar;
    const S s = hbar / sqrt(ka * kb);
    const S wa = ka / hbar;
    const S wb = kb / hbar;
    const S ga = slope / (2.0 * ka * ka);
    const S gb = slope / (2.0 * kb * kb);
    const S cs = cos(phase);
    const S sn = sin(phase);
    out.m.a11 = s * (wb * cs - gb * sn);
    out.m.a12 = -s * sn;
    out.m.a21 = s * ((ga * gb + wa * wb) * sn - (ga * wb - wa * gb) * cs);
    out.m.a22 = s * (ga * sn + wa * cs);
  } else {
    const S qa = sqrt(2.0 * m * (-excess));
    const S qb = sqrt(-2.0 * m * (excess + drop));
    const S phase = ramp_action(qa, qb, width) / hbar;
    const S s = hbar / sqrt(qa * qb);
    const S wa = qa / hbar;
    const S wb = qb / hbar;
    const S ha = slope / (2.0 * qa * qa);
    const S hb = slope / (2.0 * qb * qb);
    // cosh and sinh with exp(phase) factored out
    const double shift = value_of(phase);
    const S grow = exp(phase - shift);
    const S decay = exp(-phase - shift);
    const S ch = 0.5 * (grow + decay);
    const S sh = 0.5 * (grow - decay);
    out.m.a11 = s * (wb * ch + hb * sh);
    out.m.a12 = -s * sh;
    out.m.a21 = s * ((ha * hb - wa * wb) * sh - (wa * hb - ha * wb) * ch);
    out.m.a22 = s * (wa * ch - ha * sh);
    out.log_scale = shift;
  }
  out.normalize();
  return out;
}

/// Exact propagator across a constant-potential slice of width d.
template <typename S>
ScaledMat2<S> slice_block(const S& excess, double d, const PhysicalConstants& c) {
  const double hbar = c.hbar;
  const S lambda = 2.0 * c.mass() * excess / (hbar * hbar);
  const double x = value_of(lambda) * d * d;
  ScaledMat2<S> out;
  if (std::abs(x) < 1e-8) {
    const S t = lambda * (d * d);
    out.m.a11 = 1.0 - 0.5 * t;
    out.m.a12 = -d * (1.0 - t / 6.0);
    out.m.a21 = lambda * d * (1.0 - t / 6.0);
    out.m.a22 = out.m.a11;
  } else if (x > 0.0) {
    const S k = sqrt(lambda);
    const S cs = cos(k * d);
    const S sn = sin(k * d);
    out.m = {cs, -sn / k, k * sn, cs};
  } else {
    const S q = sqrt(-lambda);
    const S theta = q * d;
    const double shift = value_of(theta);
    const S grow = exp(theta - shift);
    const S decay = exp(-theta - shift);
    const S ch = 0.5 * (grow + decay);
    const S sh = 0.5 * (grow - decay);
    out.m = {ch, -sh / q, -q * sh, ch};
    out.log_scale = shift;
  }
  out.normalize();
  return out;
}

/// Ramp replaced by `slices` constant slices sampled at their midpoints.
template <typename S>
ScaledMat2<S> sliced_block(const S& excess, double drop, double width, std::size_t slices,
                           const PhysicalConstants& c) {
  ScaledMat2<S> out;
  if (width <= 0.0 || slices == 0) return out;
  const double d = width / static_cast<double>(slices);
  for (std::size_t s = 0; s < slices; ++s) {
    const double frac = (static_cast<double>(s) + 0.5) / static_cast<double>(slices);
    out = out * slice_block(excess + drop * frac, d, c);
  }
  return out;
}

}  // namespace qtdesign::detail
