#include "qtdesign/sparse_grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>

#include "qtdesign/errors.hpp"

namespace qtdesign {
namespace {

constexpr int kMaxRuleLevel = 30;

/// Clenshaw-Curtis weights on n + 1 points (n even) for the uniform density
/// on [-1, 1], via a type-I DCT of the even Chebyshev moments.
std::vector<double> cc_weights(std::size_t n) {
  if (n == 0) return {1.0};
  std::vector<double> x(n + 1, 0.0);
  std::vector<double> y(n + 1, 0.0);
  for (std::size_t l = 0; l <= n; l += 2) {
    const double ld = static_cast<double>(l);
    x[l] = 1.0 / (1.0 - ld * ld);
  }
  static std::mutex planner;  // the FFTW planner is not reentrant
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner);
    plan = fftw_plan_r2r_1d(static_cast<int>(n + 1), x.data(), y.data(), FFTW_REDFT00,
                            FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(planner);
    fftw_destroy_plan(plan);
  }
  std::vector<double> w(n + 1);
  const double nd = static_cast<double>(n);
  for (std::size_t k = 0; k <= n; ++k) {
    const double ck = (k == 0 || k == n) ? 1.0 : 2.0;
    w[k] = 0.5 * ck * y[k] / nd;
  }
  // exact symmetry
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double s = 0.5 * (w[k] + w[n - k]);
    w[k] = s;
    w[n - k] = s;
  }
  return w;
}

double cc_node(std::size_t k, std::size_t n) {
  if (n == 0) return 0.0;
  const double nd = static_cast<double>(n);
  return std::sin(std::numbers::pi * (nd - 2.0 * static_cast<double>(k)) / (2.0 * nd));
}

void check_level(int level) {
  if (level < 0) throw ConfigError("sparse-grid level must be >= 0");
  if (level + 1 > kMaxRuleLevel) throw ConfigError("sparse-grid level too large");
}

std::string node_text(const std::vector<double>& node) {
  std::ostringstream s;
  s.precision(17);
  s << "(";
  for (std::size_t i = 0; i < node.size(); ++i) s << (i ? ", " : "") << node[i];
  s << ")";
  return s.str();
}

/// Depth-first walk shared by the streaming and the explicit paths.
class Walker {
 public:
  Walker(const NestedRule& rule, NestedIntegrand& f, int level, std::size_t dimension)
      : rule_(rule),
        f_(f),
        level_(level),
        dim_(dimension),
        k_(f.outputs()),
        carry_(dimension, std::vector<double>(level + 1, 0.0)),
        acc_((level + 1) * k_),
        leaf_acc_((level + 1) * k_),
        out_(k_, 0.0),
        path_(dimension, 0) {
    carry_[0][0] = 1.0;
  }

  /// Contributions of one top-level node (or of the whole grid when the
  /// dimension is 1); sums per Smolyak degree s.
  std::vector<double> run_top(std::size_t p) {
    std::fill(acc_.begin(), acc_.end(), CompensatedSum{});
    if (dim_ == 1) {
      leaves(0, 0);
    } else {
      step(0, 0, p);
    }
    std::vector<double> r(acc_.size());
    for (std::size_t i = 0; i < acc_.size(); ++i) r[i] = acc_[i].value();
    return r;
  }

  std::size_t nodes() const { return nodes_; }

 private:
  void step(std::size_t d, int used, std::size_t p) {
    const int b = rule_.birth(p);
    const std::span<const double> delta = rule_.deltas(p);
    std::vector<double>& next = carry_[d + 1];
    const std::vector<double>& cur = carry_[d];
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t t = 0; t < delta.size(); ++t) {
      const int shift = b - 1 + static_cast<int>(t);
      for (int s = used + shift; s <= level_; ++s) next[s] += delta[t] * cur[s - shift];
    }
    path_[d] = p;
    f_.enter(d, p, rule_.coordinate(p));
    visit(d + 1, used + b - 1);
    f_.leave(d);
  }

  void visit(std::size_t d, int used) {
    if (d + 1 == dim_) {
      leaves(d, used);
      return;
    }
    for (const std::uint32_t p : rule_.members(level_ - used + 1)) step(d, used, p);
  }

  void leaves(std::size_t d, int used) {
    std::fill(leaf_acc_.begin(), leaf_acc_.end(), CompensatedSum{});
    int lowest = level_ + 1;
    for (const std::uint32_t p : rule_.members(level_ - used + 1)) {
      path_[d] = p;
      try {
        f_.leaf(p, rule_.coordinate(p), out_);
      } catch (const NumericError& e) {
        std::vector<double> node(dim_);
        for (std::size_t i = 0; i < dim_; ++i) node[i] = rule_.coordinate(path_[i]);
        throw NodeEvaluationError(std::string(e.what()) + " at quadrature node " + node_text(node),
                                  node);
      }
      ++nodes_;
      const int b = rule_.birth(p);
      lowest = std::min(lowest, b - 1);
      const std::span<const double> delta = rule_.deltas(p);
      for (std::size_t t = 0; t < delta.size(); ++t) {
        CompensatedSum* row = &leaf_acc_[(b - 1 + t) * k_];
        for (std::size_t k = 0; k < k_; ++k) row[k].add(delta[t] * out_[k]);
      }
    }
    const std::vector<double>& cur = carry_[d];
    for (int t = lowest; t + used <= level_; ++t) {
      for (int s = used + t; s <= level_; ++s) {
        const double c = cur[s - t];
        if (c == 0.0) continue;
        for (std::size_t k = 0; k < k_; ++k) {
          acc_[s * k_ + k].add(c * leaf_acc_[t * k_ + k].value());
        }
      }
    }
  }

  const NestedRule& rule_;
  NestedIntegrand& f_;
  int level_;
  std::size_t dim_;
  std::size_t k_;
  std::vector<std::vector<double>> carry_;
  std::vector<CompensatedSum> acc_;
  std::vector<CompensatedSum> leaf_acc_;
  std::vector<double> out_;
  std::vector<std::size_t> path_;
  std::size_t nodes_ = 0;
};

/// Records explicit nodes; output is unused.
class Recorder final : public NestedIntegrand {
 public:
  explicit Recorder(std::size_t dim) : prefix_(dim, 0) {}
  std::size_t outputs() const override { return 1; }
  std::unique_ptr<NestedIntegrand> clone() const override { return std::make_unique<Recorder>(*this); }
  void enter(std::size_t dim, std::size_t p, double) override { prefix_[dim] = p; }
  void leave(std::size_t) override {}
  void leaf(std::size_t p, double, std::span<double> out) override {
    prefix_.back() = p;
    visited.push_back(prefix_);
    out[0] = 0.0;
  }
  std::vector<std::vector<std::size_t>> visited;

 private:
  std::vector<std::size_t> prefix_;
};

/// Weight of one node in the level-`level` Smolyak rule: sum over admissible
/// rule indices of the product of 1D deltas.
double node_weight(const NestedRule& rule, const std::vector<std::size_t>& node, int level) {
  std::vector<double> poly(level + 1, 0.0);
  poly[0] = 1.0;
  std::vector<double> next(level + 1);
  for (const std::size_t p : node) {
    std::fill(next.begin(), next.end(), 0.0);
    const int b = rule.birth(p);
    const std::span<const double> delta = rule.deltas(p);
    for (std::size_t t = 0; t < delta.size(); ++t) {
      const int shift = b - 1 + static_cast<int>(t);
      for (int s = shift; s <= level; ++s) next[s] += delta[t] * poly[s - shift];
    }
    poly.swap(next);
  }
  CompensatedSum w;
  for (const double v : poly) w.add(v);
  return w.value();
}

/// Forwards output 0 and its square.
class Squared final : public NestedIntegrand {
 public:
  explicit Squared(std::unique_ptr<NestedIntegrand> inner)
      : inner_(std::move(inner)), buf_(inner_->outputs()) {}
  std::size_t outputs() const override { return 2; }
  void prepare(const NestedRule& rule) override { inner_->prepare(rule); }
  std::unique_ptr<NestedIntegrand> clone() const override {
    return std::make_unique<Squared>(inner_->clone());
  }
  void enter(std::size_t d, std::size_t p, double x) override { inner_->enter(d, p, x); }
  void leave(std::size_t d) override { inner_->leave(d); }
  void leaf(std::size_t p, double x, std::span<double> out) override {
    inner_->leaf(p, x, buf_);
    out[0] = buf_[0];
    out[1] = buf_[0] * buf_[0];
  }

 private:
  std::unique_ptr<NestedIntegrand> inner_;
  std::vector<double> buf_;
};

}  // namespace

void SparseGridSpec::validate() const {
  if (dimension == 0) throw ConfigError("sparse-grid dimension must be >= 1");
  check_level(level);
  if (!half_widths.empty() && half_widths.size() != dimension) {
    throw ConfigError("half_widths must have one entry per dimension");
  }
  for (const double a : half_widths) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("half_widths must be finite and >= 0");
  }
}

std::vector<std::vector<int>> index_set(int level, std::size_t dimension) {
  if (level < 0) throw ConfigError("level must be >= 0");
  if (dimension == 0) throw ConfigError("dimension must be >= 1");
  std::vector<std::vector<int>> out;
  std::vector<int> cur(dimension, 1);
  // lexicographic: first component varies slowest
  auto rec = [&](auto&& self, std::size_t d, int budget) -> void {
    if (d == dimension) {
      out.push_back(cur);
      return;
    }
    for (int i = 1; i <= budget + 1; ++i) {
      cur[d] = i;
      self(self, d + 1, budget - (i - 1));
    }
    cur[d] = 1;
  };
  rec(rec, 0, level);
  return out;
}

Rule1d nodes_1d(int i) {
  if (i < 1) throw ConfigError("1D rule index must be >= 1");
  if (i > kMaxRuleLevel) throw ConfigError("1D rule index too large");
  const std::size_t n = rule_size(i) - 1;
  Rule1d r;
  r.weights = cc_weights(n);
  r.nodes.resize(n + 1);
  for (std::size_t k = 0; k <= n; ++k) r.nodes[k] = cc_node(k, n);
  return r;
}

NestedRule::NestedRule(int max_level) : max_level_(max_level) {
  if (max_level < 1 || max_level > kMaxRuleLevel) throw ConfigError("invalid nested rule level");
  const int top = max_level;
  const std::size_t fine = top == 1 ? 0 : (std::size_t{1} << (top - 1));
  const std::size_t count = fine + 1;
  coordinates_.resize(count);
  births_.resize(count);
  for (std::size_t p = 0; p < count; ++p) {
    coordinates_[p] = cc_node(p, fine);
    if (top == 1 || 2 * p == fine) {
      births_[p] = 1;
    } else if (p == 0 || p == fine) {
      births_[p] = 2;
    } else {
      births_[p] = top - std::countr_zero(p);
    }
  }

  // weights of every rule on the fine index set
  std::vector<std::vector<double>> rule_weights(top + 1);
  for (int i = 1; i <= top; ++i) rule_weights[i] = cc_weights(rule_size(i) - 1);
  auto weight_in = [&](int i, std::size_t p) -> double {
    if (i < births_[p]) return 0.0;
    if (i == 1) return 1.0;
    const std::size_t stride = fine >> (i - 1);
    return rule_weights[i][p / stride];
  };

  delta_offsets_.assign(count + 1, 0);
  for (std::size_t p = 0; p < count; ++p) {
    delta_offsets_[p + 1] = delta_offsets_[p] + static_cast<std::size_t>(top - births_[p] + 1);
  }
  delta_values_.resize(delta_offsets_.back());
  for (std::size_t p = 0; p < count; ++p) {
    for (int i = births_[p]; i <= top; ++i) {
      delta_values_[delta_offsets_[p] + (i - births_[p])] = weight_in(i, p) - weight_in(i - 1, p);
    }
  }

  by_birth_.resize(count);
  for (std::size_t p = 0; p < count; ++p) by_birth_[p] = static_cast<std::uint32_t>(p);
  std::stable_sort(by_birth_.begin(), by_birth_.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return births_[a] < births_[b]; });
  level_counts_.assign(top + 1, 0);
  for (std::size_t p = 0; p < count; ++p) ++level_counts_[births_[p]];
  for (int i = 1; i <= top; ++i) level_counts_[i] += level_counts_[i - 1];
}

std::span<const std::uint32_t> NestedRule::members(int level) const {
  const int l = std::clamp(level, 0, max_level_);
  return {by_birth_.data(), level_counts_[l]};
}

double node_count(int level, std::size_t dimension) {
  check_level(level);
  // new nodes per 1D birth level
  std::vector<double> born(level + 2, 0.0);
  born[1] = 1.0;
  if (level + 1 >= 2) born[2] = 2.0;
  for (int b = 3; b <= level + 1; ++b) born[b] = std::ldexp(1.0, b - 2);
  // count[r]: nodes of the trailing dimensions with birth excess <= r
  std::vector<double> count(level + 1, 1.0);
  for (std::size_t d = 0; d < dimension; ++d) {
    std::vector<double> next(level + 1, 0.0);
    for (int r = 0; r <= level; ++r) {
      for (int b = 1; b <= r + 1; ++b) next[r] += born[b] * count[r - (b - 1)];
    }
    count.swap(next);
  }
  return count[level];
}

LevelSums integrate_levels(NestedIntegrand& f, int level, std::size_t dimension, unsigned threads) {
  check_level(level);
  if (dimension == 0) throw ConfigError("dimension must be >= 1");
  const NestedRule rule(level + 1);
  f.prepare(rule);
  const std::size_t k = f.outputs();
  const std::size_t width = static_cast<std::size_t>(level + 1) * k;

  const std::span<const std::uint32_t> top = rule.members(level + 1);
  const std::size_t tasks = dimension == 1 ? 1 : top.size();
  constexpr std::size_t kChunk = 8;
  const std::size_t chunks = (tasks + kChunk - 1) / kChunk;
  std::vector<std::vector<double>> chunk_sums(chunks);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> visited{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_lock;

  auto work = [&](NestedIntegrand& local) {
    Walker walker(rule, local, level, dimension);
    try {
      for (std::size_t c = next++; c < chunks && !failed; c = next++) {
        std::vector<CompensatedSum> sum(width);
        for (std::size_t t = c * kChunk; t < std::min(tasks, (c + 1) * kChunk); ++t) {
          const std::vector<double> part = walker.run_top(dimension == 1 ? 0 : top[t]);
          for (std::size_t i = 0; i < width; ++i) sum[i].add(part[i]);
        }
        chunk_sums[c].resize(width);
        for (std::size_t i = 0; i < width; ++i) chunk_sums[c][i] = sum[i].value();
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_lock);
      if (!error) error = std::current_exception();
      failed = true;
    }
    visited += walker.nodes();
  };

  const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(chunks)));
  if (n_threads == 1) {
    work(f);
  } else {
    std::vector<std::unique_ptr<NestedIntegrand>> clones;
    for (unsigned i = 0; i < n_threads; ++i) clones.push_back(f.clone());
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(work, std::ref(*clones[i]));
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  std::vector<CompensatedSum> degree(width);
  for (const auto& c : chunk_sums) {
    for (std::size_t i = 0; i < width; ++i) degree[i].add(c[i]);
  }
  LevelSums out;
  out.nodes = visited;
  out.sums.assign(level + 1, std::vector<double>(k, 0.0));
  for (std::size_t j = 0; j < k; ++j) {
    CompensatedSum running;
    for (int l = 0; l <= level; ++l) {
      running.add(degree[l * k + j].value());
      out.sums[l][j] = running.value();
    }
  }
  return out;
}

QuadratureGrid build_grid(const SparseGridSpec& spec) {
  spec.validate();
  const NestedRule rule(spec.level + 1);
  Recorder rec(spec.dimension);
  Walker walker(rule, rec, spec.level, spec.dimension);
  if (spec.dimension == 1) {
    walker.run_top(0);
  } else {
    for (const std::uint32_t p : rule.members(spec.level + 1)) walker.run_top(p);
  }
  QuadratureGrid g;
  g.nodes.reserve(rec.visited.size());
  g.weights.reserve(rec.visited.size());
  for (const auto& node : rec.visited) {
    std::vector<double> x(spec.dimension);
    for (std::size_t j = 0; j < spec.dimension; ++j) {
      x[j] = spec.half_width(j) * rule.coordinate(node[j]);
    }
    g.nodes.push_back(std::move(x));
    g.weights.push_back(node_weight(rule, node, spec.level));
  }
  return g;
}

double integrate(const QuadratureGrid& grid, const std::function<double(std::span<const double>)>& f,
                 unsigned threads) {
  const std::size_t n = grid.node_count();
  std::vector<double> values(n);
  auto eval = [&](std::size_t r) {
    try {
      values[r] = f(grid.nodes[r]);
    } catch (const NumericError& e) {
      throw NodeEvaluationError(std::string(e.what()) + " at quadrature node " +
                                    std::to_string(r) + " " + node_text(grid.nodes[r]),
                                grid.nodes[r]);
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (n_threads <= 1) {
    for (std::size_t r = 0; r < n; ++r) eval(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex lock;
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n_threads; ++i) {
      pool.emplace_back([&] {
        for (std::size_t r = next++; r < n; r = next++) {
          try {
            eval(r);
          } catch (...) {
            std::lock_guard<std::mutex> g(lock);
            if (!error) error = std::current_exception();
            next = n;
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }
  CompensatedSum s;
  for (std::size_t r = 0; r < n; ++r) s.add(grid.weights[r] * values[r]);
  return s.value();
}

void write_grid_csv(std::ostream& out, const QuadratureGrid& grid) {
  const std::size_t dim = grid.nodes.empty() ? 0 : grid.nodes.front().size();
  for (std::size_t j = 0; j < dim; ++j) out << "z" << (j + 1) << ",";
  out << "weight\n";
  char buf[32];
  for (std::size_t r = 0; r < grid.node_count(); ++r) {
    for (const double x : grid.nodes[r]) {
      std::snprintf(buf, sizeof buf, "%.17g", x);
      out << buf << ",";
    }
    std::snprintf(buf, sizeof buf, "%.17g", grid.weights[r]);
    out << buf << "\n";
  }
}

AdaptiveReport adaptive_moments(NestedIntegrand& f, std::size_t dimension,
                                const AdaptiveOptions& o) {
  if (!(o.epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (o.reference_level < 1) throw ConfigError("reference level must be >= 1");
  if (f.outputs() < 1) throw ConfigError("integrand has no outputs");
  Squared moments(f.clone());
  AdaptiveReport report;
  for (int ref = o.reference_level; ref <= o.max_reference_level; ref += o.escalation_step) {
    if (node_count(ref, dimension) > o.node_budget) break;
    const LevelSums s = integrate_levels(moments, ref, dimension, o.threads);
    report = AdaptiveReport{};
    report.reference_level = ref;
    report.reference_nodes = s.nodes;
    report.m1_reference = s.sums[ref][0];
    report.m2_reference = s.sums[ref][1];
    if (!(report.m1_reference > 0.0) || !(report.m2_reference > 0.0)) {
      throw ReferenceDegenerateError("reference moments are not positive");
    }
    for (int l = 1; l < ref; ++l) {
      LevelError e;
      e.level = l;
      e.rel_err_m1 = std::abs(report.m1_reference - s.sums[l][0]) / report.m1_reference;
      e.rel_err_m2 = std::abs(report.m2_reference - s.sums[l][1]) / report.m2_reference;
      report.errors_by_level.push_back(e);
      if (report.level_opt < 0 && std::max(e.rel_err_m1, e.rel_err_m2) <= o.epsilon) {
        report.level_opt = l;
        report.converged = true;
      }
    }
    if (report.converged) return report;
    if (o.escalation_step <= 0) break;
  }
  return report;
}

}  // namespace qtdesign
