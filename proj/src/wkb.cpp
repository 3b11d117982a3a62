#include "qtdesign/wkb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qtdesign/detail/blocks.hpp"
#include "qtdesign/errors.hpp"

namespace qtdesign {
namespace {

constexpr Complex kI{0.0, 1.0};
constexpr double kClampTolerance = 1e-9;

/// F of the validity test: kinetic energy at the slowest point minus the
/// potential change over one decay length.
double margin_from(double kinetic, double drop, double width, const PhysicalConstants& c) {
  return kinetic - c.hbar * std::abs(drop) / (width * std::sqrt(2.0 * c.mass() * kinetic));
}

double finish_probability(double t) {
  if (!std::isfinite(t)) throw NonFiniteError("transmission is not finite");
  if (t > 1.0 + kClampTolerance) {
    throw NumericError("transmission " + std::to_string(t) + " exceeds 1");
  }
  return std::min(t, 1.0);
}

struct BarrierLeads {
  double kappa_in = 0.0;
  double kappa_out = 0.0;
};

BarrierLeads barrier_leads(double energy, double voltage, const Barrier& g,
                           const PhysicalConstants& c) {
  const double in = energy - g.outer_left;
  const double out = energy - g.outer_right + c.e * voltage;
  if (!(in > 0.0)) throw NoIncidentWaveError("E <= U_0: no propagating incident wave");
  if (!(out > 0.0)) throw EvanescentOutputError("E + e V_bias <= U_{N+1}: evanescent output lead");
  return {std::sqrt(2.0 * c.mass() * in), std::sqrt(2.0 * c.mass() * out)};
}

Regime barrier_regime(double energy, double potential, double voltage, const PhysicalConstants& c) {
  const double left = energy - potential;
  const double right = energy - potential + c.e * voltage;
  if (left == 0.0 || right == 0.0) throw TurningPointError("turning point at a barrier edge");
  if (left > 0.0 && right > 0.0) return Regime::kOverBarrier;
  if (left < 0.0 && right < 0.0) return Regime::kUnderBarrier;
  throw RegimeError("interior turning point: E - V changes sign on the barrier");
}

template <typename S>
ScaledMat2<S> make_block(const LayerProfile& p, const S& excess, const LayerChoice& choice,
                         const PhysicalConstants& c, const DeviceOptions& o) {
  if (choice.use_wkb) {
    return detail::wkb_block(excess, p.drop, p.width, p.slope_constant, choice.regime, c);
  }
  return detail::sliced_block(excess, p.drop, p.width, o.fallback_slices, c);
}

using Row = std::array<Complex, 2>;

Row times(const Row& r, const Mat2<double>& m) {
  return {r[0] * m.a11 + r[1] * m.a21, r[0] * m.a12 + r[1] * m.a22};
}

Row times(const Mat2<double>& m, const Row& col) {
  return {m.a11 * col[0] + m.a12 * col[1], m.a21 * col[0] + m.a22 * col[1]};
}

double normalize(Row& r) {
  const double s = std::max(std::abs(r[0]), std::abs(r[1]));
  if (s > 0.0 && std::isfinite(s)) {
    r[0] /= s;
    r[1] /= s;
    return std::log(s);
  }
  return 0.0;
}

Complex dot(const Row& a, const Row& b) { return a[0] * b[0] + a[1] * b[1]; }

struct LayerEval {
  LayerChoice choice;
  LayerBlock block;
  Mat2<double> derivative;  // d block / dU in the scale of `block`
};

LayerEval evaluate_layer(const DeviceSpec& spec, std::size_t j, const BiasPoint& bias,
                         const PhysicalConstants& c, const DeviceOptions& o, bool with_derivative) {
  const LayerProfile p = layer_profile(spec, j, bias.voltage, c);
  LayerEval out;
  out.choice = classify_layer(p, bias.energy, c);
  const double excess = bias.energy - p.left_potential;
  if (with_derivative) {
    // d(E - V)/dU_j = -1
    const ScaledMat2<Dual> b = make_block(p, Dual(excess, -1.0), out.choice, c, o);
    out.block.m = {b.m.a11.v, b.m.a12.v, b.m.a21.v, b.m.a22.v};
    out.block.log_scale = b.log_scale;
    out.derivative = {b.m.a11.d, b.m.a12.d, b.m.a21.d, b.m.a22.d};
  } else {
    out.block = make_block(p, excess, out.choice, c, o);
  }
  return out;
}

TransmissionResult summarize(const std::vector<LayerEval>& layers, double t, double flux) {
  TransmissionResult r;
  r.T = finish_probability(t);
  r.flux_factor = flux;
  r.validity_margin = std::numeric_limits<double>::infinity();
  bool all_wkb = true;
  for (const auto& l : layers) {
    r.per_layer_valid.push_back(l.choice.use_wkb);
    r.validity_margin = std::min(r.validity_margin, l.choice.margin);
    all_wkb = all_wkb && l.choice.use_wkb;
  }
  r.method = all_wkb ? Method::kMatrixWkb : Method::kPiecewiseConstantFallback;
  return r;
}

}  // namespace

const char* to_string(Method m) {
  switch (m) {
    case Method::kClosedFormOver: return "closed-form-over";
    case Method::kClosedFormUnder: return "closed-form-under";
    case Method::kMatrixWkb: return "matrix-wkb";
    case Method::kPiecewiseConstantFallback: return "piecewise-constant";
  }
  return "unknown";
}

double ramp_constant(double mass, double e, double voltage, double x1, double x2) {
  return mass * e * voltage / (x2 - x1);
}

PhaseIntegral phase_integral(Regime regime, double energy, double potential, double voltage,
                             double x1, double x2, const PhysicalConstants& c) {
  const double width = x2 - x1;
  const double ev = c.e * voltage;
  const double m = c.mass();
  // kinetic energy at the left edge and at the right edge
  double left = 0.0;
  double right = 0.0;
  if (regime == Regime::kOverBarrier) {
    left = energy - potential;
    right = left + ev;
  } else {
    left = potential - energy;
    right = left - ev;
  }
  if (!(left > 0.0 && right > 0.0)) {
    throw RegimeError(regime == Regime::kOverBarrier ? "over-barrier action needs E > V on the ramp"
                                                     : "under-barrier action needs E < V on the ramp");
  }
  PhaseIntegral out;
  out.regime = regime;
  if (std::abs(ev) < kZeroBiasSwitch * left) {
    const double eps = (right - left) / left;
    out.value = width * std::sqrt(2.0 * m * left) * (1.0 + eps / 4.0 - eps * eps / 24.0);
  } else {
    out.value = detail::ramp_action(std::sqrt(2.0 * m * left), std::sqrt(2.0 * m * right), width);
  }
  return out;
}

TransferMatrix plane_wave_k(double kappa, double hbar) {
  const Complex k = kI * kappa / hbar;
  return {1.0, 1.0, k, -k};
}

TransferMatrix plane_wave_phase(double kappa, double x, double hbar) {
  const Complex p = std::exp(kI * kappa * x / hbar);
  return TransferMatrix::diagonal(p, 1.0 / p);
}

TransferMatrix wkb_k(const WkbLocal& local, double slope_constant, Regime regime, double hbar) {
  const double kappa = local.kappa;
  if (kappa == 0.0) throw TurningPointError("WKB wave number vanishes at the interface");
  const double drift = slope_constant / (2.0 * kappa * kappa);
  if (regime == Regime::kOverBarrier) {
    const Complex k = kI * kappa / hbar;
    return {1.0, 1.0, -drift + k, -drift - k};
  }
  const double q = kappa / hbar;
  return {1.0, 1.0, drift + q, drift - q};
}

TransferMatrix wkb_phase(const WkbLocal& local, Regime regime, double hbar) {
  if (local.kappa == 0.0) throw TurningPointError("WKB wave number vanishes at the interface");
  const double amp = 1.0 / std::sqrt(local.kappa);
  const double phase = local.action / hbar;
  if (regime == Regime::kOverBarrier) {
    const Complex p = std::exp(kI * phase);
    return TransferMatrix::diagonal(amp * p, amp / p);
  }
  return TransferMatrix::diagonal(amp * std::exp(phase), amp * std::exp(-phase));
}

InterfaceMatrices interface_matrices(double kappa_left, double x, const WkbLocal& right,
                                     double slope_constant, Regime regime, double hbar) {
  if (kappa_left == 0.0) throw TurningPointError("plane-wave wave number vanishes");
  return {plane_wave_k(kappa_left, hbar), plane_wave_phase(kappa_left, x, hbar),
          wkb_k(right, slope_constant, regime, hbar), wkb_phase(right, regime, hbar)};
}

Validity wkb_validity(double energy, double potential, double voltage, double x1, double x2,
                      const PhysicalConstants& c) {
  const double ev = c.e * voltage;
  const double left = energy - potential;
  const double right = left + ev;
  if (left == 0.0 || right == 0.0) throw TurningPointError("turning point at a ramp edge in the validity test");
  Validity v;
  if (left > 0.0 && right > 0.0) {
    v.margin = margin_from(std::abs(left), ev, x2 - x1, c);
  } else if (left < 0.0 && right < 0.0) {
    v.margin = margin_from(std::abs(right), ev, x2 - x1, c);
  } else {
    v.margin = -std::min(std::abs(left), std::abs(right));
  }
  v.valid = v.margin > 0.0;
  return v;
}

TransmissionResult transmission_single_closed(double energy, double potential, double voltage,
                                              const Barrier& g, const PhysicalConstants& c) {
  const BarrierLeads leads = barrier_leads(energy, voltage, g, c);
  const Regime regime = barrier_regime(energy, potential, voltage, c);
  const double hbar = c.hbar;
  const double cc = ramp_constant(c.mass(), c.e, voltage, g.x1, g.x2);
  const double k1 = leads.kappa_in;
  const double k3 = leads.kappa_out;
  const double a = std::sqrt(2.0 * c.mass() * std::abs(energy - potential));
  const double b = std::sqrt(2.0 * c.mass() * std::abs(energy - potential + c.e * voltage));
  const double phase = phase_integral(regime, energy, potential, voltage, g.x1, g.x2, c).value / hbar;

  double bracket = 0.0;
  double growth = 1.0;  // exp(-2 phase) for the under-barrier case
  if (regime == Regime::kOverBarrier) {
    const double cs = std::cos(phase);
    const double sn = std::sin(phase);
    const double t1 = hbar * cc * cs / (4 * k1 * a * a) - hbar * a * cc * cs / (4 * k1 * b * b * b) -
                      a * sn / (2 * k1) -
                      hbar * hbar * cc * cc * sn / (8 * k1 * a * a * b * b * b) - k3 * sn / (2 * b);
    const double t2 = cs / 2 + k3 * a * cs / (2 * k1 * b) - hbar * cc * sn / (4 * b * b * b) +
                      hbar * cc * k3 * sn / (4 * k1 * a * a * b);
    bracket = t1 * t1 + t2 * t2;
  } else {
    // cosh, sinh scaled by exp(-phase)
    const double decay = std::exp(-2.0 * phase);
    const double ch = 0.5 * (1.0 + decay);
    const double sh = 0.5 * (1.0 - decay);
    const double t1 = a * sh / (2 * k1) - hbar * cc * ch / (4 * k1 * a * a) +
                      hbar * cc * a * ch / (4 * k1 * b * b * b) -
                      hbar * hbar * cc * cc * sh / (8 * k1 * a * a * b * b * b) - k3 * sh / (2 * b);
    const double t2 = ch / 2 + a * k3 * ch / (2 * k1 * b) + hbar * cc * sh / (4 * b * b * b) -
                      hbar * cc * k3 * sh / (4 * k1 * a * a * b);
    bracket = t1 * t1 + t2 * t2;
    growth = decay;
  }
  TransmissionResult r;
  r.flux_factor = k3 / k1;
  r.T = finish_probability(r.flux_factor * (a / b) * growth / bracket);
  r.method = regime == Regime::kOverBarrier ? Method::kClosedFormOver : Method::kClosedFormUnder;
  const Validity v = wkb_validity(energy, potential, voltage, g.x1, g.x2, c);
  r.validity_margin = v.margin;
  r.per_layer_valid = {v.valid};
  return r;
}

TransmissionResult transmission_single_matrix(double energy, double potential, double voltage,
                                              const Barrier& g, const PhysicalConstants& c) {
  const BarrierLeads leads = barrier_leads(energy, voltage, g, c);
  const Regime regime = barrier_regime(energy, potential, voltage, c);
  const double hbar = c.hbar;
  const double cc = ramp_constant(c.mass(), c.e, voltage, g.x1, g.x2);
  const WkbLocal at_x1{std::sqrt(2.0 * c.mass() * std::abs(energy - potential)), 0.0};
  const WkbLocal at_x2{std::sqrt(2.0 * c.mass() * std::abs(energy - potential + c.e * voltage)),
                       phase_integral(regime, energy, potential, voltage, g.x1, g.x2, c).value};

  const InterfaceMatrices in = interface_matrices(leads.kappa_in, g.x1, at_x1, cc, regime, hbar);
  const InterfaceMatrices out = interface_matrices(leads.kappa_out, g.x2, at_x2, cc, regime, hbar);
  const TransferMatrix m = in.plane_phase.inverse() * in.plane_k.inverse() * in.wkb_k *
                           in.wkb_phase * out.wkb_phase.inverse() * out.wkb_k.inverse() *
                           out.plane_k * out.plane_phase;

  TransmissionResult r;
  r.flux_factor = leads.kappa_out / leads.kappa_in;
  r.T = finish_probability(r.flux_factor / std::norm(m.a11));
  r.method = Method::kMatrixWkb;
  const Validity v = wkb_validity(energy, potential, voltage, g.x1, g.x2, c);
  r.validity_margin = v.margin;
  r.per_layer_valid = {v.valid};
  return r;
}

LayerChoice classify_layer(const LayerProfile& p, double energy, const PhysicalConstants& c) {
  const double left = energy - p.left_potential;
  const double right = left + p.drop;
  LayerChoice choice;
  if (left > 0.0 && right > 0.0) {
    choice.regime = Regime::kOverBarrier;
    choice.margin = margin_from(left, p.drop, p.width, c);
  } else if (left < 0.0 && right < 0.0) {
    choice.regime = Regime::kUnderBarrier;
    choice.margin = margin_from(-right, p.drop, p.width, c);
  } else {
    choice.margin = -std::min(std::abs(left), std::abs(right));
  }
  choice.use_wkb = choice.margin > 0.0;
  return choice;
}

LayerBlock layer_block(const DeviceSpec& spec, std::size_t layer, double potential,
                       const BiasPoint& bias, const PhysicalConstants& c,
                       const DeviceOptions& options, LayerChoice* choice) {
  LayerProfile p = layer_profile(spec, layer, bias.voltage, c);
  p.left_potential += potential - spec.potentials[layer];
  const LayerChoice chosen = classify_layer(p, bias.energy, c);
  if (choice != nullptr) *choice = chosen;
  return make_block(p, bias.energy - p.left_potential, chosen, c, options);
}

LayerBlockDerivative layer_block_derivative(const DeviceSpec& spec, std::size_t layer,
                                            double potential, const BiasPoint& bias,
                                            const PhysicalConstants& c, const DeviceOptions& options) {
  LayerProfile p = layer_profile(spec, layer, bias.voltage, c);
  p.left_potential += potential - spec.potentials[layer];
  LayerBlockDerivative out;
  out.choice = classify_layer(p, bias.energy, c);
  const ScaledMat2<Dual> b =
      make_block(p, Dual(bias.energy - p.left_potential, -1.0), out.choice, c, options);
  out.block.m = {b.m.a11.v, b.m.a12.v, b.m.a21.v, b.m.a22.v};
  out.block.log_scale = b.log_scale;
  out.derivative = {b.m.a11.d, b.m.a12.d, b.m.a21.d, b.m.a22.d};
  return out;
}

LeadVectors lead_vectors(const DeviceSpec& spec, const BiasPoint& bias, const PhysicalConstants& c) {
  const double in = bias.energy - spec.outer_left;
  const double out = bias.energy - spec.outer_right + c.e * bias.voltage;
  if (!(in > 0.0)) throw NoIncidentWaveError("E <= U_0: no propagating incident wave");
  if (!(out > 0.0)) throw EvanescentOutputError("E + e V_bias <= U_{N+1}: evanescent output lead");
  const double k_in = std::sqrt(2.0 * c.mass() * in);
  const double k_out = std::sqrt(2.0 * c.mass() * out);
  LeadVectors v;
  v.left = {Complex(0.5, 0.0), Complex(0.0, -0.5 * c.hbar / k_in)};
  v.right = {Complex(1.0, 0.0), Complex(0.0, k_out / c.hbar)};
  v.flux_factor = k_out / k_in;
  return v;
}

TransmissionResult transmission_device(const DeviceSpec& spec, const BiasPoint& bias,
                                       const PhysicalConstants& c, const DeviceOptions& options) {
  const LeadVectors leads = lead_vectors(spec, bias, c);
  std::vector<LayerEval> layers;
  layers.reserve(spec.layer_count());
  Row row = leads.left;
  double log_scale = 0.0;
  for (std::size_t j = 0; j < spec.layer_count(); ++j) {
    layers.push_back(evaluate_layer(spec, j, bias, c, options, false));
    row = times(row, layers.back().block.m);
    log_scale += layers.back().block.log_scale + normalize(row);
  }
  const Complex m11 = dot(row, leads.right);
  const double t = leads.flux_factor * std::exp(-2.0 * log_scale) / std::norm(m11);
  return summarize(layers, t, leads.flux_factor);
}

TransmissionGradient transmission_device_gradient(const DeviceSpec& spec, const BiasPoint& bias,
                                                  const PhysicalConstants& c,
                                                  const DeviceOptions& options) {
  const LeadVectors leads = lead_vectors(spec, bias, c);
  const std::size_t n = spec.layer_count();
  std::vector<LayerEval> layers;
  layers.reserve(n);
  for (std::size_t j = 0; j < n; ++j) layers.push_back(evaluate_layer(spec, j, bias, c, options, true));

  // prefix[j] = left * P_1 ... P_j (j blocks), suffix[j] = P_{j+1} ... P_N * right
  std::vector<Row> prefix(n + 1);
  std::vector<Row> suffix(n + 1);
  prefix[0] = leads.left;
  double log_scale = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    prefix[j + 1] = times(prefix[j], layers[j].block.m);
    log_scale += layers[j].block.log_scale + normalize(prefix[j + 1]);
  }
  suffix[n] = leads.right;
  for (std::size_t j = n; j-- > 0;) {
    suffix[j] = times(layers[j].block.m, suffix[j + 1]);
    normalize(suffix[j]);
  }
  const Complex m11 = dot(prefix[n], leads.right);
  const double t = leads.flux_factor * std::exp(-2.0 * log_scale) / std::norm(m11);

  TransmissionGradient g;
  g.result = summarize(layers, t, leads.flux_factor);
  g.dT_dU.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const Complex base = dot(prefix[j], times(layers[j].block.m, suffix[j + 1]));
    const Complex dm = dot(prefix[j], times(layers[j].derivative, suffix[j + 1]));
    g.dT_dU[j] = -2.0 * t * std::real(dm / base);
  }
  return g;
}

}  // namespace qtdesign
