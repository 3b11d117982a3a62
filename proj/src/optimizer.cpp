#include "qtdesign/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "qtdesign/errors.hpp"

namespace qtdesign {
namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 60;

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b) { return std::inner_product(a.begin(), a.end(), b.begin(), 0.0); }

double inf_norm(const Vec& a) {
  double m = 0.0;
  for (const double v : a) m = std::max(m, std::abs(v));
  return m;
}

std::string vec_text(const Vec& x) {
  std::ostringstream s;
  s.precision(17);
  s << "(";
  for (std::size_t i = 0; i < x.size(); ++i) s << (i ? ", " : "") << x[i];
  s << ")";
  return s.str();
}

struct Point {
  Vec x;
  double f = 0.0;
  Vec g;
};

class Counted {
 public:
  Counted(const Evaluator& f, GradientMode mode) : f_(f), mode_(mode) {}

  Point eval(const Vec& x) {
    Point p;
    p.x = x;
    try {
      if (mode_ == GradientMode::kAnalytic) {
        Evaluation e = f_.value_and_gradient(x);
        ++count;
        p.f = e.value;
        p.g = std::move(e.gradient);
      } else {
        p.f = f_.value(x);
        ++count;
        p.g = forward_difference_gradient(
            [&](std::span<const double> y) {
              ++count;
              return f_.value(y);
            },
            x, p.f);
      }
    } catch (const NumericError& e) {
      throw IterateError(std::string(e.what()) + " at iterate " + vec_text(x), x);
    }
    if (!std::isfinite(p.f)) throw NonFiniteError("objective is not finite at " + vec_text(x));
    for (const double v : p.g) {
      if (!std::isfinite(v)) throw NonFiniteError("gradient is not finite at " + vec_text(x));
    }
    return p;
  }

  double value(const Vec& x) {
    try {
      ++count;
      const double v = f_.value(x);
      if (!std::isfinite(v)) throw NonFiniteError("objective is not finite at " + vec_text(x));
      return v;
    } catch (const IterateError&) {
      throw;
    } catch (const NumericError& e) {
      throw IterateError(std::string(e.what()) + " at iterate " + vec_text(x), x);
    }
  }

  int count = 0;

 private:
  const Evaluator& f_;
  GradientMode mode_;
};

/// Variables held at a bound by a gradient pointing out of the box.
std::vector<bool> active_set(const Vec& x, const Vec& g, double lo, double hi) {
  std::vector<bool> a(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    a[i] = (x[i] <= lo && g[i] > 0.0) || (x[i] >= hi && g[i] < 0.0);
  }
  return a;
}

Vec project(Vec x, double lo, double hi) {
  for (double& v : x) v = std::clamp(v, lo, hi);
  return x;
}

OptimizationResult run_single(const Evaluator& f, const OptimizerConfig& cfg, const Vec& start) {
  const double lo = cfg.lower;
  const double hi = cfg.upper;
  const std::size_t n = start.size();
  Counted eval(f, cfg.gradient_mode);

  OptimizationResult r;
  r.gradient_mode = cfg.gradient_mode;
  r.initial_U = start;
  Point cur = eval.eval(project(start, lo, hi));
  double pg = projected_gradient_norm(cur.x, cur.g, lo, hi);
  r.trace.push_back({0, cur.f, 0.0, pg});

  std::deque<std::pair<Vec, Vec>> memory;  // (s, y)
  int it = 0;
  for (;;) {
    if (pg <= cfg.gradient_tolerance) {
      r.converged = true;
      r.stop_reason = "projected gradient below tolerance";
      break;
    }
    if (it >= cfg.max_iterations) {
      r.stop_reason = "iteration limit reached";
      break;
    }
    const std::vector<bool> active = active_set(cur.x, cur.g, lo, hi);

    // two-loop recursion on the free variables
    Vec q = cur.g;
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i]) q[i] = 0.0;
    }
    std::vector<double> alphas(memory.size());
    for (std::size_t k = memory.size(); k-- > 0;) {
      const auto& [s, y] = memory[k];
      alphas[k] = dot(s, q) / dot(s, y);
      for (std::size_t i = 0; i < n; ++i) q[i] -= alphas[k] * y[i];
    }
    if (!memory.empty()) {
      const auto& [s, y] = memory.back();
      const double gamma = dot(s, y) / dot(y, y);
      for (double& v : q) v *= gamma;
    }
    for (std::size_t k = 0; k < memory.size(); ++k) {
      const auto& [s, y] = memory[k];
      const double beta = dot(y, q) / dot(s, y);
      for (std::size_t i = 0; i < n; ++i) q[i] += (alphas[k] - beta) * s[i];
    }
    Vec d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = active[i] ? 0.0 : -q[i];
    if (!(dot(d, cur.g) < 0.0)) {
      memory.clear();
      for (std::size_t i = 0; i < n; ++i) d[i] = active[i] ? 0.0 : -cur.g[i];
    }
    if (memory.empty()) {
      const double dn = inf_norm(d);
      if (dn > 0.0) {
        for (double& v : d) v *= cfg.first_step * (hi - lo) / dn;
      }
    }

    // projected Armijo backtracking
    double t = 1.0;
    bool accepted = false;
    Vec trial;
    double f_trial = 0.0;
    for (int b = 0; b < kMaxBacktracks; ++b) {
      trial = cur.x;
      for (std::size_t i = 0; i < n; ++i) trial[i] += t * d[i];
      trial = project(std::move(trial), lo, hi);
      Vec step(n);
      for (std::size_t i = 0; i < n; ++i) step[i] = trial[i] - cur.x[i];
      const double decrease = dot(cur.g, step);
      if (inf_norm(step) == 0.0) break;
      f_trial = eval.value(trial);
      if (f_trial <= cur.f + kArmijo * decrease && f_trial <= cur.f) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      if (!memory.empty()) {
        memory.clear();  // retry once along the steepest-descent direction
        continue;
      }
      r.converged = true;
      r.stop_reason = "no further decrease along the projected path";
      break;
    }
    ++it;
    Point next = eval.eval(trial);
    next.f = f_trial;
    Vec s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = next.x[i] - cur.x[i];
      y[i] = next.g[i] - cur.g[i];
    }
    const double sy = dot(s, y);
    if (sy > 1e-12 * std::sqrt(dot(s, s) * dot(y, y)) && sy > 0.0) {
      memory.emplace_back(std::move(s), std::move(y));
      if (static_cast<int>(memory.size()) > cfg.memory) memory.pop_front();
    }
    const double rel = (cur.f - next.f) / std::max(std::abs(cur.f), std::numeric_limits<double>::min());
    cur = std::move(next);
    pg = projected_gradient_norm(cur.x, cur.g, lo, hi);
    r.trace.push_back({it, cur.f, t, pg});
    if (rel <= cfg.tolerance) {
      r.converged = true;
      r.stop_reason = "relative decrease below tolerance";
      break;
    }
  }
  r.U_opt = cur.x;
  r.objective = cur.f;
  r.gradient_norm = pg;
  r.iterations = it;
  r.evaluations = eval.count;
  return r;
}

std::vector<Vec> latin_hypercube(std::size_t count, std::size_t dim, double lo, double hi,
                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vec> pts(count, Vec(dim));
  for (std::size_t j = 0; j < dim; ++j) {
    std::vector<std::size_t> perm(count);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t k = 0; k < count; ++k) {
      const double u = (static_cast<double>(perm[k]) + unit(rng)) / static_cast<double>(count);
      pts[k][j] = lo + (hi - lo) * u;
    }
  }
  return pts;
}

}  // namespace

const char* to_string(GradientMode m) {
  return m == GradientMode::kAnalytic ? "analytic" : "finite_difference";
}

void OptimizerConfig::validate() const {
  if (!(lower < upper)) throw ConfigError("optimizer bounds must satisfy lower < upper");
  if (initial_U.empty()) throw ConfigError("initial_U is empty");
  for (const double u : initial_U) {
    if (!(u >= lower && u <= upper)) throw ConfigError("initial_U must lie within the bounds");
  }
  if (!(tolerance > 0.0)) throw ConfigError("tolerance must be > 0");
  if (!(gradient_tolerance >= 0.0)) throw ConfigError("gradient_tolerance must be >= 0");
  if (max_iterations < 0) throw ConfigError("max_iterations must be >= 0");
  if (memory < 1) throw ConfigError("memory must be >= 1");
  if (!(first_step > 0.0)) throw ConfigError("first_step must be > 0");
  if (starts < 1) throw ConfigError("starts must be >= 1");
}

double projected_gradient_norm(std::span<const double> x, std::span<const double> g, double lo,
                               double hi) {
  // computed without forming x - g, so gradients far below ulp(x) still count
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double v = std::abs(g[i]);
    if (g[i] > 0.0) v = std::min(v, x[i] - lo);
    if (g[i] < 0.0) v = std::min(v, hi - x[i]);
    m = std::max(m, std::max(v, 0.0));
  }
  return m;
}

std::vector<double> forward_difference_gradient(const std::function<double(std::span<const double>)>& f,
                                                std::span<const double> x, double fx) {
  std::vector<double> g(x.size());
  std::vector<double> y(x.begin(), x.end());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double h = 1e-8 * std::max(1.0, std::abs(x[j]));
    y[j] = x[j] + h;
    g[j] = (f(y) - fx) / ((x[j] + h) - x[j]);
    y[j] = x[j];
  }
  return g;
}

OptimizationResult minimize(const Evaluator& f, const OptimizerConfig& cfg) {
  cfg.validate();
  std::vector<Vec> starts{cfg.initial_U};
  if (cfg.starts > 1) {
    auto extra = latin_hypercube(static_cast<std::size_t>(cfg.starts - 1), cfg.initial_U.size(),
                                 cfg.lower, cfg.upper, cfg.seed);
    starts.insert(starts.end(), extra.begin(), extra.end());
  }
  std::optional<OptimizationResult> best;
  int evaluations = 0;
  for (const Vec& s : starts) {
    OptimizationResult r = run_single(f, cfg, s);
    evaluations += r.evaluations;
    if (!best || r.objective < best->objective) best = std::move(r);
  }
  best->evaluations = evaluations;
  return *best;
}

OptimizationResult solve_deterministic(const DesignProblem& problem, const OptimizerConfig& config) {
  problem.validate();
  Evaluator e;
  e.value = [&](std::span<const double> u) { return cost_deterministic(u, problem, false).value; };
  e.value_and_gradient = [&](std::span<const double> u) {
    ObjectiveReport r = cost_deterministic(u, problem, true);
    return Evaluation{r.value, std::move(r.gradient)};
  };
  return minimize(e, config);
}

AdaptiveReport select_level(const DesignProblem& problem, std::span<const double> U_ev,
                            const RobustSpec& robust) {
  robust.validate(problem.device.layer_count());
  RandomCostIntegrand f(problem, std::vector<double>(U_ev.begin(), U_ev.end()), robust.half_widths,
                        false);
  return adaptive_moments(f, problem.device.layer_count(), robust.adaptive);
}

OptimizationResult solve_robust(const DesignProblem& problem, const RobustSpec& robust,
                                const OptimizerConfig& config, unsigned threads) {
  problem.validate();
  config.validate();
  RobustSpec spec = robust;
  std::optional<AdaptiveReport> report;
  if (spec.select_level) {
    spec.adaptive.threads = std::max(spec.adaptive.threads, threads);
    report = select_level(problem, config.initial_U, spec);
    if (!report->converged) {
      throw NonConvergenceError("adaptive level selection did not meet epsilon below reference level " +
                                std::to_string(report->reference_level));
    }
    spec.level = report->level_opt;
  }
  Evaluator e;
  e.value = [&](std::span<const double> u) { return cost_robust(u, problem, spec, threads, false).value; };
  e.value_and_gradient = [&](std::span<const double> u) {
    RobustReport r = cost_robust(u, problem, spec, threads, true);
    return Evaluation{r.value, std::move(r.gradient)};
  };
  OptimizationResult r = minimize(e, config);
  r.adaptive = report;
  r.robust = cost_robust(r.U_opt, problem, spec, threads, false);
  return r;
}

}  // namespace qtdesign
