#include "qtdesign/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "qtdesign/errors.hpp"

namespace qtdesign {
namespace {

using nlohmann::json;

/// Object view that remembers which keys were read, so leftovers can be
/// reported as unknown.
class Obj {
 public:
  Obj(const json& j, std::string pointer) : j_(j), ptr_(std::move(pointer)) {
    if (!j_.is_object()) fail(ptr_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) fail(path(key), "missing required key");
    return j_.at(key);
  }

  Obj object(const std::string& key) { return Obj(raw(key), path(key)); }

  double number(const std::string& key) { return as_number(raw(key), path(key)); }
  double number(const std::string& key, double fallback) {
    return has(key) ? number(key) : fallback;
  }

  long integer(const std::string& key, long fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number_integer()) fail(path(key), "expected an integer");
    return v.get<long>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_boolean()) fail(path(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_string()) fail(path(key), "expected a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& key) { return as_numbers(raw(key), path(key)); }

  /// A list, or a scalar repeated `count` times.
  std::vector<double> numbers_or_scalar(const std::string& key, std::size_t count) {
    const json& v = raw(key);
    if (v.is_number()) return std::vector<double>(count, as_number(v, path(key)));
    std::vector<double> out = as_numbers(v, path(key));
    if (out.size() != count) {
      fail(path(key), "expected " + std::to_string(count) + " values, got " +
                          std::to_string(out.size()));
    }
    return out;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) fail(path(it.key()), "unknown key");
    }
  }

  std::string path(const std::string& key) const { return ptr_ + "/" + key; }

  [[noreturn]] static void fail(const std::string& pointer, const std::string& what) {
    throw ConfigError("config " + (pointer.empty() ? std::string("/") : pointer) + ": " + what);
  }

  static double as_number(const json& v, const std::string& pointer) {
    if (!v.is_number()) fail(pointer, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(pointer, "expected a finite number");
    return d;
  }

  static std::vector<double> as_numbers(const json& v, const std::string& pointer) {
    if (!v.is_array()) fail(pointer, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back(as_number(v[i], pointer + "/" + std::to_string(i)));
    }
    return out;
  }

 private:
  const json& j_;
  std::string ptr_;
  std::set<std::string> used_;
};

std::vector<double> parse_sweep(Obj s) {
  std::vector<double> v;
  if (s.has("voltages")) {
    v = s.numbers("voltages");
  } else {
    const double lo = s.number("v_min", 0.0);
    const double hi = s.number("v_max");
    const long n = s.integer("points", 51);
    if (n < 0) Obj::fail(s.path("points"), "must be >= 0");
    for (long i = 0; i < n; ++i) {
      v.push_back(n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
    }
  }
  s.finish();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 0.0)) Obj::fail("/sweep", "bias voltages must be >= 0");
  }
  return v;
}

}  // namespace

DesignProblem RunConfig::problem() const {
  if (!target) throw ConfigError("config: a target is required for this command");
  DesignProblem p;
  p.device = device;
  p.energy = energy_ev * constants.e;
  p.target = *target;
  p.constants = constants;
  p.options = options;
  p.response = response;
  p.validate();
  return p;
}

RunConfig parse_config(const json& doc) {
  Obj root(doc, "");
  RunConfig c;

  if (root.has("constants")) {
    Obj k = root.object("constants");
    c.constants.hbar = k.number("hbar", c.constants.hbar);
    c.constants.m0 = k.number("m0", c.constants.m0);
    c.constants.e = k.number("e", c.constants.e);
    c.constants.effective_mass_factor =
        k.number("effective_mass_factor", c.constants.effective_mass_factor);
    k.finish();
  }
  c.constants.validate();

  {
    Obj d = root.object("device");
    const std::vector<double> boundaries = d.numbers("boundaries_nm");
    const std::vector<double> potentials = d.numbers("potentials_ev");
    const double left = d.number("outer_left_ev", 0.0);
    const double right = d.number("outer_right_ev", 0.0);
    double lo = 0.0;
    double hi = 0.0;
    if (d.has("bounds_ev")) {
      const std::vector<double> b = d.numbers("bounds_ev");
      if (b.size() != 2) Obj::fail("/device/bounds_ev", "expected [lower, upper]");
      lo = b[0];
      hi = b[1];
    }
    d.finish();
    try {
      c.device = DeviceSpec::from_interface_units(boundaries, potentials, left, right, lo, hi,
                                                  c.constants);
    } catch (const ConfigError& e) {
      Obj::fail("/device", e.what());
    }
  }
  c.energy_ev = root.number("energy_ev");
  if (!(c.energy_ev > 0.0)) Obj::fail("/energy_ev", "must be > 0");

  const std::string response = root.string("response", "amplitude_ratio");
  if (response == "amplitude_ratio") {
    c.response = ResponseKind::kAmplitudeRatio;
  } else if (response == "flux_ratio") {
    c.response = ResponseKind::kFluxRatio;
  } else {
    Obj::fail("/response", "expected \"amplitude_ratio\" or \"flux_ratio\"");
  }
  const long slices = root.integer("fallback_slices", 1000);
  if (slices < 1) Obj::fail("/fallback_slices", "must be >= 1");
  c.options.fallback_slices = static_cast<std::size_t>(slices);

  const std::size_t n = c.device.layer_count();
  if (root.has("curves_ev")) {
    const json& v = root.raw("curves_ev");
    if (!v.is_array() || v.empty()) Obj::fail("/curves_ev", "expected a non-empty array");
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string ptr = "/curves_ev/" + std::to_string(i);
      std::vector<double> u = v[i].is_number() ? std::vector<double>(n, Obj::as_number(v[i], ptr))
                                               : Obj::as_numbers(v[i], ptr);
      if (u.size() != n) Obj::fail(ptr, "expected " + std::to_string(n) + " potentials");
      c.curves_ev.push_back(std::move(u));
    }
  } else {
    std::vector<double> u;
    for (const double p : c.device.potentials) u.push_back(p / c.constants.e);
    c.curves_ev.push_back(std::move(u));
  }

  if (root.has("sweep")) c.sweep = parse_sweep(root.object("sweep"));

  if (root.has("oracle")) {
    Obj o = root.object("oracle");
    const long fd = o.integer("fd_points", 4000);
    const long s = o.integer("slices", 1000);
    if (fd < 3) Obj::fail("/oracle/fd_points", "must be >= 3");
    if (s < 1) Obj::fail("/oracle/slices", "must be >= 1");
    c.oracle.fd_points = static_cast<std::size_t>(fd);
    c.oracle.slices = static_cast<std::size_t>(s);
    o.finish();
  }

  if (root.has("target")) {
    Obj t = root.object("target");
    TargetResponse target;
    if (t.has("samples")) {
      const json& v = t.raw("samples");
      if (!v.is_array()) Obj::fail("/target/samples", "expected an array of [V, T0] pairs");
      for (std::size_t i = 0; i < v.size(); ++i) {
        const std::vector<double> pair = Obj::as_numbers(v[i], "/target/samples/" + std::to_string(i));
        if (pair.size() != 2) Obj::fail("/target/samples/" + std::to_string(i), "expected [V, T0]");
        target.samples.push_back({pair[0], pair[1]});
      }
    } else {
      Obj l = t.object("linear");
      const double slope = l.number("slope");
      const double intercept = l.number("intercept");
      const double v_max = l.number("v_max");
      const long count = l.integer("count", 10);
      if (count < 1) Obj::fail("/target/linear/count", "must be >= 1");
      l.finish();
      target = TargetResponse::linear(slope, intercept, v_max, static_cast<std::size_t>(count));
    }
    t.finish();
    try {
      target.validate();
    } catch (const ConfigError& e) {
      Obj::fail("/target", e.what());
    }
    c.target = std::move(target);
  }

  {
    OptimizerConfig& o = c.optimizer;
    o.lower = c.device.lower_bound / c.constants.e;
    o.upper = c.device.upper_bound / c.constants.e;
    o.initial_U = c.curves_ev.front();
    if (root.has("optimizer")) {
      Obj p = root.object("optimizer");
      o.max_iterations = static_cast<int>(p.integer("max_iterations", o.max_iterations));
      o.tolerance = p.number("tolerance", o.tolerance);
      o.gradient_tolerance = p.number("gradient_tolerance", o.gradient_tolerance);
      if (p.has("initial_u_ev")) o.initial_U = p.numbers_or_scalar("initial_u_ev", n);
      const std::string mode = p.string("gradient_mode", "analytic");
      if (mode == "analytic") {
        o.gradient_mode = GradientMode::kAnalytic;
      } else if (mode == "finite_difference") {
        o.gradient_mode = GradientMode::kFiniteDifference;
      } else if (mode == "both") {
        o.gradient_mode = GradientMode::kAnalytic;
        c.compare_gradients = true;
      } else {
        Obj::fail("/optimizer/gradient_mode", "expected \"analytic\", \"finite_difference\" or \"both\"");
      }
      o.memory = static_cast<int>(p.integer("memory", o.memory));
      o.first_step = p.number("first_step", o.first_step);
      o.starts = static_cast<int>(p.integer("starts", o.starts));
      o.seed = static_cast<std::uint64_t>(p.integer("seed", static_cast<long>(o.seed)));
      p.finish();
    }
  }

  if (root.has("robust")) {
    Obj r = root.object("robust");
    RobustSpec spec;
    spec.half_widths = r.numbers_or_scalar("half_widths_ev", n);
    if (r.has("alpha")) {
      const json& a = r.raw("alpha");
      c.alphas = a.is_number() ? std::vector<double>{Obj::as_number(a, "/robust/alpha")}
                               : Obj::as_numbers(a, "/robust/alpha");
    } else {
      c.alphas = {0.0};
    }
    spec.adaptive.epsilon = r.number("epsilon", spec.adaptive.epsilon);
    spec.adaptive.reference_level =
        static_cast<int>(r.integer("reference_level", spec.adaptive.reference_level));
    spec.adaptive.escalation_step =
        static_cast<int>(r.integer("escalation_step", spec.adaptive.escalation_step));
    spec.adaptive.max_reference_level =
        static_cast<int>(r.integer("max_reference_level", spec.adaptive.max_reference_level));
    spec.adaptive.node_budget = r.number("node_budget", spec.adaptive.node_budget);
    if (r.has("level")) {
      spec.level = static_cast<int>(r.integer("level", 0));
      spec.select_level = false;
    }
    r.finish();
    try {
      spec.validate(n);
      for (const double a : c.alphas) {
        if (!(a >= 0.0)) throw ConfigError("alpha must be >= 0");
      }
      if (!(spec.adaptive.epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
      if (spec.adaptive.reference_level < 1) throw ConfigError("reference_level must be >= 1");
    } catch (const ConfigError& e) {
      Obj::fail("/robust", e.what());
    }
    c.robust = std::move(spec);
  }

  if (root.has("quadrature")) {
    Obj q = root.object("quadrature");
    SparseGridSpec g;
    g.dimension = static_cast<std::size_t>(q.integer("dimension", static_cast<long>(n)));
    g.level = static_cast<int>(q.integer("level", 0));
    if (q.has("half_widths")) g.half_widths = q.numbers_or_scalar("half_widths", g.dimension);
    q.finish();
    try {
      g.validate();
    } catch (const ConfigError& e) {
      Obj::fail("/quadrature", e.what());
    }
    c.quadrature = std::move(g);
  }

  if (root.has("output")) {
    Obj o = root.object("output");
    c.output_dir = o.string("directory", c.output_dir);
    o.finish();
  }
  root.finish();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return parse_config(doc);
}

}  // namespace qtdesign
