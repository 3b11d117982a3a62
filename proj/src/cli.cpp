#include "qtdesign/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "qtdesign/errors.hpp"
#include "qtdesign/reference.hpp"

namespace qtdesign {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Output {
 public:
  Output(const RunConfig& c, const CommandOptions& o)
      : dir_(o.out_dir.empty() ? c.output_dir : o.out_dir), timestamp_(o.timestamp) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir_.string() + "'");
  }

  std::ofstream open(const std::string& name) const {
    std::ofstream f(dir_ / name);
    if (!f) throw ConfigError("cannot write '" + (dir_ / name).string() + "'");
    if (timestamp_ && name.ends_with(".csv")) f << "# generated " << now() << "\n";
    return f;
  }

  void write_json(const std::string& name, json j) const {
    if (timestamp_) j["generated"] = now();
    std::ofstream f = open(name);
    f << j.dump(2) << "\n";
  }

 private:
  static std::string now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  fs::path dir_;
  bool timestamp_;
};

DeviceSpec device_for(const RunConfig& c, const std::vector<double>& u_ev) {
  DeviceSpec d = c.device;
  for (std::size_t j = 0; j < u_ev.size(); ++j) d.potentials[j] = u_ev[j] * c.constants.e;
  return d;
}

std::string u_header(std::size_t n) {
  std::string h;
  for (std::size_t j = 0; j < n; ++j) h += ",U" + std::to_string(j + 1);
  return h;
}

std::string u_row(const std::vector<double>& u) {
  std::string r;
  for (const double v : u) r += "," + num(v);
  return r;
}

void write_curves(const Output& out, const RunConfig& c) {
  std::ofstream f = out.open("curves.csv");
  f << "curve" << u_header(c.device.layer_count()) << "\n";
  for (std::size_t k = 0; k < c.curves_ev.size(); ++k) f << k + 1 << u_row(c.curves_ev[k]) << "\n";
}

void write_trace(const Output& out, const std::string& name, const OptimizationResult& r) {
  std::ofstream f = out.open(name);
  f << "iteration,objective,step,projected_gradient\n";
  for (const TraceEntry& t : r.trace) {
    f << t.iteration << "," << num(t.objective) << "," << num(t.step) << ","
      << num(t.projected_gradient) << "\n";
  }
}

json result_json(const OptimizationResult& r) {
  return {{"gradient_mode", to_string(r.gradient_mode)},
          {"objective", r.objective},
          {"U_opt_ev", r.U_opt},
          {"initial_U_ev", r.initial_U},
          {"gradient_norm", r.gradient_norm},
          {"iterations", r.iterations},
          {"evaluations", r.evaluations},
          {"converged", r.converged},
          {"stop_reason", r.stop_reason}};
}

void write_adaptive(const Output& out, const AdaptiveReport& a) {
  std::ofstream f = out.open("adaptive.csv");
  f << "level,rel_err_m1,rel_err_m2\n";
  for (const LevelError& e : a.errors_by_level) {
    f << e.level << "," << num(e.rel_err_m1) << "," << num(e.rel_err_m2) << "\n";
  }
}

json adaptive_json(const AdaptiveReport& a) {
  return {{"converged", a.converged},
          {"level_opt", a.level_opt},
          {"reference_level", a.reference_level},
          {"reference_nodes", a.reference_nodes},
          {"m1_reference", a.m1_reference},
          {"m2_reference", a.m2_reference}};
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

int design_deterministic(const RunConfig& c, const Output& out) {
  const DesignProblem problem = c.problem();
  std::vector<OptimizationResult> runs;
  OptimizerConfig cfg = c.optimizer;
  runs.push_back(solve_deterministic(problem, cfg));
  if (c.compare_gradients) {
    cfg.gradient_mode = GradientMode::kFiniteDifference;
    runs.push_back(solve_deterministic(problem, cfg));
  }
  std::ofstream table = out.open("design_table.csv");
  table << "gradient,J" << u_header(c.device.layer_count()) << "\n";
  json j;
  j["mode"] = "deterministic";
  j["response"] = to_string(c.response);
  bool converged = true;
  for (const OptimizationResult& r : runs) {
    table << to_string(r.gradient_mode) << "," << num(r.objective) << u_row(r.U_opt) << "\n";
    write_trace(out, std::string("trace_") + to_string(r.gradient_mode) + ".csv", r);
    j["runs"].push_back(result_json(r));
    converged = converged && r.converged;
  }
  out.write_json("design.json", j);
  return converged ? kExitOk : kExitNonConvergence;
}

int design_robust(const RunConfig& c, const CommandOptions& o, const Output& out) {
  if (!c.robust) throw ConfigError("config: robust mode needs a \"robust\" section");
  const DesignProblem problem = c.problem();
  RobustSpec spec = *c.robust;
  json j;
  j["mode"] = "robust";
  j["response"] = to_string(c.response);
  if (spec.select_level) {
    spec.adaptive.threads = o.threads;
    const AdaptiveReport a = select_level(problem, c.optimizer.initial_U, spec);
    write_adaptive(out, a);
    j["adaptive"] = adaptive_json(a);
    if (!a.converged) {
      out.write_json("design.json", j);
      std::cerr << "error: adaptive level selection did not converge below reference level "
                << a.reference_level << "\n";
      return kExitNonConvergence;
    }
    spec.level = a.level_opt;
    spec.select_level = false;
  }
  j["level"] = spec.level;

  std::ofstream table = out.open("robust_table.csv");
  table << "design,alpha,mean,std" << u_header(c.device.layer_count()) << "\n";
  bool converged = true;

  const OptimizationResult det = solve_deterministic(problem, c.optimizer);
  converged = converged && det.converged;
  RobustSpec at_det = spec;
  at_det.alpha = 0.0;
  const RobustReport det_moments = cost_robust(det.U_opt, problem, at_det, o.threads, false);
  table << "deterministic,," << num(det_moments.mean) << "," << num(det_moments.std_dev())
        << u_row(det.U_opt) << "\n";
  write_trace(out, "trace_deterministic.csv", det);
  json dj = result_json(det);
  dj["mean"] = det_moments.mean;
  dj["std"] = det_moments.std_dev();
  j["deterministic"] = dj;

  for (std::size_t i = 0; i < c.alphas.size(); ++i) {
    spec.alpha = c.alphas[i];
    const OptimizationResult r = solve_robust(problem, spec, c.optimizer, o.threads);
    converged = converged && r.converged;
    table << "robust," << num(spec.alpha) << "," << num(r.robust->mean) << ","
          << num(r.robust->std_dev()) << u_row(r.U_opt) << "\n";
    write_trace(out, "trace_alpha_" + std::to_string(i + 1) + ".csv", r);
    json rj = result_json(r);
    rj["alpha"] = spec.alpha;
    rj["mean"] = r.robust->mean;
    rj["std"] = r.robust->std_dev();
    rj["robust_value"] = r.objective;
    rj["nodes"] = r.robust->nodes;
    j["robust"].push_back(rj);
  }
  out.write_json("design.json", j);
  return converged ? kExitOk : kExitNonConvergence;
}

}  // namespace

int cmd_transmission(const RunConfig& c, const CommandOptions& o) {
  const Output out(c, o);
  write_curves(out, c);
  for (std::size_t k = 0; k < c.curves_ev.size(); ++k) {
    const DeviceSpec d = device_for(c, c.curves_ev[k]);
    std::ofstream f = out.open("transmission_" + std::to_string(k + 1) + ".csv");
    f << "V_bias,T,method,validity_margin,T_amplitude_ratio\n";
    for (const double v : c.sweep) {
      const TransmissionResult r =
          transmission_device(d, {v, c.energy_ev * c.constants.e}, c.constants, c.options);
      f << num(v) << "," << num(r.T) << "," << to_string(r.method) << ","
        << num(r.validity_margin / c.constants.e) << "," << num(r.amplitude_ratio()) << "\n";
    }
  }
  return kExitOk;
}

int cmd_validate_wkb(const RunConfig& c, const CommandOptions& o) {
  const Output out(c, o);
  write_curves(out, c);
  std::ofstream f = out.open("validity.csv");
  f << "curve,V_bias,F,valid\n";
  const double energy = c.energy_ev * c.constants.e;
  for (std::size_t k = 0; k < c.curves_ev.size(); ++k) {
    const DeviceSpec d = device_for(c, c.curves_ev[k]);
    for (const double v : c.sweep) {
      double margin = INFINITY;
      bool valid = true;
      for (std::size_t j = 0; j < d.layer_count(); ++j) {
        const LayerChoice ch = classify_layer(layer_profile(d, j, v, c.constants), energy, c.constants);
        margin = std::min(margin, ch.margin);
        valid = valid && ch.use_wkb;
      }
      f << k + 1 << "," << num(v) << "," << num(margin / c.constants.e) << "," << (valid ? 1 : 0)
        << "\n";
    }
  }
  return kExitOk;
}

int cmd_design(const RunConfig& c, const CommandOptions& o) {
  const Output out(c, o);
  if (o.mode == "deterministic") return design_deterministic(c, out);
  if (o.mode == "robust") return design_robust(c, o, out);
  throw ConfigError("--mode must be deterministic or robust");
}

int cmd_oracle_compare(const RunConfig& c, const CommandOptions& o) {
  const Output out(c, o);
  write_curves(out, c);
  for (std::size_t k = 0; k < c.curves_ev.size(); ++k) {
    const DeviceSpec d = device_for(c, c.curves_ev[k]);
    std::ofstream f = out.open("oracle_" + std::to_string(k + 1) + ".csv");
    f << "V_bias,T_wkb,T_pcpm,T_fd,rel_wkb_pcpm,rel_wkb_fd,rel_pcpm_fd,method\n";
    for (const double v : c.sweep) {
      const BiasPoint b{v, c.energy_ev * c.constants.e};
      const TransmissionResult w = transmission_device(d, b, c.constants, c.options);
      const double p = transmission_pcpm(d, b, c.oracle.slices, c.constants).T;
      const double fd = solve_bvp_fd(d, b, FdGrid::uniform(d, c.oracle.fd_points), c.constants).T;
      f << num(v) << "," << num(w.T) << "," << num(p) << "," << num(fd) << "," << num(rel(w.T, p))
        << "," << num(rel(w.T, fd)) << "," << num(rel(p, fd)) << "," << to_string(w.method) << "\n";
    }
  }
  return kExitOk;
}

int cmd_quadrature_export(const RunConfig& c, const CommandOptions& o) {
  if (!c.quadrature) throw ConfigError("config: quadrature-export needs a \"quadrature\" section");
  const Output out(c, o);
  const QuadratureGrid g = build_grid(*c.quadrature);
  std::ofstream f = out.open("grid.csv");
  write_grid_csv(f, g);
  return kExitOk;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Transmission and layer-potential design for multi-barrier devices"};
  app.require_subcommand(1);
  std::string config_path;
  CommandOptions options;
  bool no_timestamp = false;
  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--out", options.out_dir, "output directory (overrides the config)");
  app.add_flag("--no-timestamp", no_timestamp, "omit the generation-time header");
  app.add_option("--threads", options.threads, "worker threads for quadrature")
      ->check(CLI::Range(1u, 1024u));
  app.add_option("--mode", options.mode, "design mode")
      ->check(CLI::IsMember({"deterministic", "robust"}));

  struct Sub {
    const char* name;
    const char* help;
    int (*run)(const RunConfig&, const CommandOptions&);
  };
  const Sub subs[] = {
      {"transmission", "sweep T(V_bias) for each configured curve", cmd_transmission},
      {"validate-wkb", "sweep the WKB validity margin", cmd_validate_wkb},
      {"design", "optimal design of the layer potentials", cmd_design},
      {"oracle-compare", "WKB against the two exact solvers", cmd_oracle_compare},
      {"quadrature-export", "write sparse-grid nodes and weights", cmd_quadrature_export},
  };
  for (const Sub& s : subs) app.add_subcommand(s.name, s.help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  options.timestamp = !no_timestamp;

  try {
    const RunConfig config = load_config(config_path);
    for (const Sub& s : subs) {
      if (app.got_subcommand(s.name)) return s.run(config, options);
    }
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NonConvergenceError& e) {
    std::cerr << "not converged: " << e.what() << "\n";
    return kExitNonConvergence;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

}  // namespace qtdesign
