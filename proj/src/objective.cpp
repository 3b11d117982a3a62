#include "qtdesign/objective.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace qtdesign {
namespace {

constexpr double kClampTolerance = 1e-9;

using Row = std::array<Complex, 2>;

double response_value(double t_flux, double flux, ResponseKind kind) {
  return kind == ResponseKind::kAmplitudeRatio ? t_flux / flux : t_flux;
}

double checked_flux_transmission(double t) {
  if (!std::isfinite(t)) throw NonFiniteError("transmission is not finite");
  if (t > 1.0 + kClampTolerance) throw NumericError("transmission exceeds 1");
  return std::min(t, 1.0);
}

double normalize(Row& r, std::span<Row> companions) {
  const double s = std::max(std::abs(r[0]), std::abs(r[1]));
  if (!(s > 0.0) || !std::isfinite(s)) throw NonFiniteError("transfer product degenerated");
  r[0] /= s;
  r[1] /= s;
  for (Row& c : companions) {
    c[0] /= s;
    c[1] /= s;
  }
  return std::log(s);
}

Row times(const Row& r, const Mat2<double>& m) {
  return {r[0] * m.a11 + r[1] * m.a21, r[0] * m.a12 + r[1] * m.a22};
}

Row times(const Mat2<double>& m, const Row& c) {
  return {m.a11 * c[0] + m.a12 * c[1], m.a21 * c[0] + m.a22 * c[1]};
}

Complex dot(const Row& a, const Row& b) { return a[0] * b[0] + a[1] * b[1]; }

}  // namespace

const char* to_string(ResponseKind k) {
  return k == ResponseKind::kAmplitudeRatio ? "amplitude_ratio" : "flux_ratio";
}

TargetResponse TargetResponse::linear(double slope, double intercept, double v_max,
                                      std::size_t count) {
  if (count == 0) throw ConfigError("target needs at least one sample");
  TargetResponse t;
  for (std::size_t i = 1; i <= count; ++i) {
    const double v = static_cast<double>(i) * v_max / static_cast<double>(count);
    t.samples.push_back({v, slope * v + intercept});
  }
  return t;
}

void TargetResponse::validate() const {
  if (samples.empty()) throw ConfigError("target needs at least one sample");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const TargetSample& s = samples[i];
    if (!(s.voltage >= 0.0) || !std::isfinite(s.voltage)) {
      throw ConfigError("target voltage " + std::to_string(i) + " must be finite and >= 0");
    }
    if (!(s.T0 > 0.0 && s.T0 < 1.0)) {
      throw ConfigError("target value " + std::to_string(i) + " must lie in (0, 1)");
    }
    if (i > 0 && !(s.voltage > samples[i - 1].voltage)) {
      throw ConfigError("target voltages must be strictly increasing");
    }
  }
}

void DesignProblem::validate() const {
  device.validate();
  target.validate();
  constants.validate();
  if (!(energy > 0.0)) throw ConfigError("electron energy must be > 0");
  if (!(device.lower_bound < device.upper_bound)) throw ConfigError("bounds must satisfy U_L < U_R");
  if (options.fallback_slices == 0) throw ConfigError("fallback_slices must be >= 1");
}

DeviceSpec DesignProblem::with_potentials(std::span<const double> U_ev) const {
  if (U_ev.size() != device.layer_count()) {
    throw ConfigError("expected " + std::to_string(device.layer_count()) + " layer potentials");
  }
  DeviceSpec d = device;
  for (std::size_t j = 0; j < U_ev.size(); ++j) d.potentials[j] = U_ev[j] * constants.e;
  return d;
}

ObjectiveReport cost_deterministic(std::span<const double> U_ev, const DesignProblem& problem,
                                   bool with_gradient) {
  const DeviceSpec device = problem.with_potentials(U_ev);
  const std::size_t n = device.layer_count();
  ObjectiveReport r;
  r.gradient.assign(n, 0.0);
  for (std::size_t i = 0; i < problem.target.samples.size(); ++i) {
    const TargetSample& s = problem.target.samples[i];
    const BiasPoint bias{s.voltage, problem.energy};
    try {
      if (with_gradient) {
        const TransmissionGradient g =
            transmission_device_gradient(device, bias, problem.constants, problem.options);
        const double scale =
            problem.response == ResponseKind::kAmplitudeRatio ? 1.0 / g.result.flux_factor : 1.0;
        const double residual = s.T0 - g.result.T * scale;
        r.residuals.push_back(residual);
        for (std::size_t j = 0; j < n; ++j) {
          r.gradient[j] += -2.0 * residual * g.dT_dU[j] * scale * problem.constants.e;
        }
      } else {
        const TransmissionResult t =
            transmission_device(device, bias, problem.constants, problem.options);
        r.residuals.push_back(s.T0 - response_value(t.T, t.flux_factor, problem.response));
      }
    } catch (const NumericError& e) {
      throw BiasPointError(std::string(e.what()) + " at bias index " + std::to_string(i) +
                               " (V_bias = " + std::to_string(s.voltage) + " V)",
                           i);
    }
  }
  for (const double x : r.residuals) r.value += x * x;
  if (!std::isfinite(r.value)) throw NonFiniteError("objective is not finite");
  return r;
}

double cost_random(std::span<const double> U_ev, std::span<const double> z_ev,
                   const DesignProblem& problem) {
  if (z_ev.size() != U_ev.size()) throw ConfigError("perturbation size mismatch");
  std::vector<double> u(U_ev.begin(), U_ev.end());
  for (std::size_t j = 0; j < u.size(); ++j) u[j] += z_ev[j];
  return cost_deterministic(u, problem, false).value;
}

void RobustSpec::validate(std::size_t layers) const {
  if (half_widths.size() != layers) throw ConfigError("half_widths needs one entry per layer");
  for (const double a : half_widths) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("half_widths must be finite and >= 0");
  }
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be finite and >= 0");
  if (level < 0) throw ConfigError("quadrature level must be >= 0");
}

double RobustReport::std_dev() const { return std::sqrt(variance); }

RobustReport cost_robust(std::span<const double> U_ev, const DesignProblem& problem,
                         const RobustSpec& robust, unsigned threads, bool with_gradient) {
  const std::size_t n = problem.device.layer_count();
  robust.validate(n);
  RandomCostIntegrand f(problem, std::vector<double>(U_ev.begin(), U_ev.end()), robust.half_widths,
                        with_gradient);
  const LevelSums s = integrate_levels(f, robust.level, n, threads);
  const std::vector<double>& m = s.sums[robust.level];
  RobustReport r;
  r.nodes = s.nodes;
  r.mean = m[0];
  r.second_moment = m[1];
  r.raw_variance = m[1] - m[0] * m[0];
  r.variance = std::max(0.0, r.raw_variance);
  r.value = r.mean + robust.alpha * r.variance;
  if (with_gradient) {
    r.gradient.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double eg = m[2 + j];
      const double ejg = m[2 + n + j];
      r.gradient[j] = eg + robust.alpha * (2.0 * ejg - 2.0 * r.mean * eg);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------

struct RandomCostIntegrand::Shared {
  DesignProblem problem;
  DeviceSpec device;
  std::vector<double> U;  // J
  std::vector<double> a;  // J
  bool gradient = false;
  std::size_t layers = 0;
  std::size_t biases = 0;
  std::vector<BiasPoint> bias;
  std::vector<LeadVectors> leads;
  // last layer closed with the right lead, per (fine node, bias)
  std::vector<Row> column;
  std::vector<Row> dcolumn;
  std::vector<double> column_log;
};

RandomCostIntegrand::RandomCostIntegrand(const DesignProblem& problem, std::vector<double> U_ev,
                                         std::vector<double> half_widths_ev, bool with_gradient) {
  problem.validate();
  auto s = std::make_shared<Shared>();
  s->problem = problem;
  s->device = problem.with_potentials(U_ev);
  s->layers = s->device.layer_count();
  if (half_widths_ev.size() != s->layers) throw ConfigError("half_widths needs one entry per layer");
  s->U = s->device.potentials;
  for (const double a : half_widths_ev) s->a.push_back(a * problem.constants.e);
  s->gradient = with_gradient;
  s->biases = problem.target.samples.size();
  for (const TargetSample& t : problem.target.samples) {
    s->bias.push_back({t.voltage, problem.energy});
    s->leads.push_back(lead_vectors(s->device, s->bias.back(), problem.constants));
  }
  Frame base;
  base.row.resize(s->biases);
  base.log_scale.assign(s->biases, 0.0);
  if (with_gradient) base.drow.assign(s->biases * s->layers, Row{});
  for (std::size_t i = 0; i < s->biases; ++i) base.row[i] = s->leads[i].left;
  stack_.push_back(std::move(base));
  work_.assign(2 + 2 * s->layers, 0.0);
  shared_ = std::move(s);
}

std::size_t RandomCostIntegrand::outputs() const {
  return shared_->gradient ? 2 + 2 * shared_->layers : 2;
}

std::unique_ptr<NestedIntegrand> RandomCostIntegrand::clone() const {
  auto c = std::make_unique<RandomCostIntegrand>(*this);
  c->stack_.resize(1);
  return c;
}

void RandomCostIntegrand::prepare(const NestedRule& rule) {
  auto s = std::make_shared<Shared>(*shared_);
  const std::size_t last = s->layers - 1;
  const std::size_t count = rule.size() * s->biases;
  s->column.assign(count, Row{});
  s->column_log.assign(count, 0.0);
  if (s->gradient) s->dcolumn.assign(count, Row{});
  const PhysicalConstants& c = s->problem.constants;
  for (std::size_t p = 0; p < rule.size(); ++p) {
    const double potential = s->U[last] + s->a[last] * rule.coordinate(p);
    for (std::size_t i = 0; i < s->biases; ++i) {
      const std::size_t at = p * s->biases + i;
      const LayerBlockDerivative b =
          s->gradient ? layer_block_derivative(s->device, last, potential, s->bias[i], c,
                                               s->problem.options)
                      : LayerBlockDerivative{layer_block(s->device, last, potential, s->bias[i], c,
                                                         s->problem.options),
                                             {}, {}};
      Row col = times(b.block.m, s->leads[i].right);
      Row dcol{};
      if (s->gradient) dcol = times(b.derivative, s->leads[i].right);
      const double ls = normalize(col, std::span<Row>(&dcol, 1));
      s->column[at] = col;
      s->column_log[at] = b.block.log_scale + ls;
      if (s->gradient) s->dcolumn[at] = dcol;
    }
  }
  shared_ = std::move(s);
}

void RandomCostIntegrand::push_layer(std::size_t dim, double potential) {
  const Shared& s = *shared_;
  const Frame& prev = stack_.back();
  Frame next = prev;
  for (std::size_t i = 0; i < s.biases; ++i) {
    if (s.gradient) {
      const LayerBlockDerivative b = layer_block_derivative(s.device, dim, potential, s.bias[i],
                                                            s.problem.constants, s.problem.options);
      Row* d = &next.drow[i * s.layers];
      for (std::size_t j = 0; j < dim; ++j) d[j] = times(prev.drow[i * s.layers + j], b.block.m);
      d[dim] = times(prev.row[i], b.derivative);
      next.row[i] = times(prev.row[i], b.block.m);
      next.log_scale[i] =
          prev.log_scale[i] + b.block.log_scale + normalize(next.row[i], std::span<Row>(d, dim + 1));
    } else {
      const LayerBlock b = layer_block(s.device, dim, potential, s.bias[i], s.problem.constants,
                                       s.problem.options);
      next.row[i] = times(prev.row[i], b.m);
      next.log_scale[i] = prev.log_scale[i] + b.log_scale + normalize(next.row[i], {});
    }
  }
  stack_.push_back(std::move(next));
}

void RandomCostIntegrand::enter(std::size_t dim, std::size_t, double x) {
  push_layer(dim, shared_->U[dim] + shared_->a[dim] * x);
}

void RandomCostIntegrand::leave(std::size_t) { stack_.pop_back(); }

void RandomCostIntegrand::leaf(std::size_t p, double, std::span<double> out) {
  const Shared& s = *shared_;
  const Frame& f = stack_.back();
  const std::size_t n = s.layers;
  double j_value = 0.0;
  std::fill(work_.begin(), work_.end(), 0.0);
  double* grad = work_.data();
  for (std::size_t i = 0; i < s.biases; ++i) {
    const std::size_t at = p * s.biases + i;
    const Row& col = s.column[at];
    const Complex m11 = dot(f.row[i], col);
    const double flux = s.leads[i].flux_factor;
    const double t_flux = checked_flux_transmission(
        flux * std::exp(-2.0 * (f.log_scale[i] + s.column_log[at])) / std::norm(m11));
    const double t = response_value(t_flux, flux, s.problem.response);
    const double residual = s.problem.target.samples[i].T0 - t;
    j_value += residual * residual;
    if (s.gradient) {
      const double scale = -2.0 * residual * -2.0 * t * s.problem.constants.e;
      for (std::size_t j = 0; j + 1 < n; ++j) {
        grad[j] += scale * std::real(dot(f.drow[i * n + j], col) / m11);
      }
      grad[n - 1] += scale * std::real(dot(f.row[i], s.dcolumn[at]) / m11);
    }
  }
  if (!std::isfinite(j_value)) throw NonFiniteError("objective is not finite");
  out[0] = j_value;
  out[1] = j_value * j_value;
  if (s.gradient) {
    for (std::size_t j = 0; j < n; ++j) {
      out[2 + j] = grad[j];
      out[2 + n + j] = j_value * grad[j];
    }
  }
}

}  // namespace qtdesign
