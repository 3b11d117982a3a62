#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

namespace qtdesign {

/// Isotropic Smolyak rule over the box prod [-a_j, a_j] with nested
/// Clenshaw-Curtis 1D rules; weights include the uniform density.
struct SparseGridSpec {
  std::size_t dimension = 1;
  int level = 0;
  std::vector<double> half_widths;  // one per dimension; empty means all 1

  void validate() const;
  double half_width(std::size_t j) const { return half_widths.empty() ? 1.0 : half_widths[j]; }
};

struct QuadratureGrid {
  std::vector<std::vector<double>> nodes;
  std::vector<double> weights;

  std::size_t node_count() const { return weights.size(); }
};

/// Multi-indices i >= 1 with sum(i_n - 1) <= level, lexicographic order.
std::vector<std::vector<int>> index_set(int level, std::size_t dimension);

/// Points of 1D rule i.
inline std::size_t rule_size(int i) { return i <= 1 ? 1 : (std::size_t{1} << (i - 1)) + 1; }

struct Rule1d {
  std::vector<double> nodes;
  std::vector<double> weights;  // sum to 1
};

/// Clenshaw-Curtis rule i on [-1, 1] for the uniform density.
Rule1d nodes_1d(int i);

/// All nested 1D rules up to `max_level`, indexed on the finest node set.
/// A node is identified by its fine index p; its birth is the first rule
/// containing it, and deltas(p)[t] is the weight of p in rule (birth + t)
/// minus its weight in the rule before.
class NestedRule {
 public:
  explicit NestedRule(int max_level);

  int max_level() const { return max_level_; }
  std::size_t size() const { return coordinates_.size(); }
  double coordinate(std::size_t p) const { return coordinates_[p]; }
  int birth(std::size_t p) const { return births_[p]; }
  std::span<const double> deltas(std::size_t p) const {
    return {delta_values_.data() + delta_offsets_[p], delta_offsets_[p + 1] - delta_offsets_[p]};
  }
  /// Fine indices of rule `level`, oldest nodes first.
  std::span<const std::uint32_t> members(int level) const;

 private:
  int max_level_;
  std::vector<double> coordinates_;
  std::vector<int> births_;
  std::vector<std::size_t> delta_offsets_;
  std::vector<double> delta_values_;
  std::vector<std::uint32_t> by_birth_;
  std::vector<std::size_t> level_counts_;
};

/// Number of distinct nodes of the Smolyak grid (after merging).
double node_count(int level, std::size_t dimension);

/// Integrand evaluated along a depth-first walk of the grid. enter() fixes
/// the coordinate of one dimension, leaf() evaluates with the last one.
/// Coordinates are on [-1, 1].
class NestedIntegrand {
 public:
  virtual ~NestedIntegrand() = default;
  virtual std::size_t outputs() const = 0;
  /// Called once before the walk, before any clone.
  virtual void prepare(const NestedRule& /*rule*/) {}
  virtual std::unique_ptr<NestedIntegrand> clone() const = 0;
  virtual void enter(std::size_t dim, std::size_t p, double x) = 0;
  virtual void leave(std::size_t dim) = 0;
  virtual void leaf(std::size_t p, double x, std::span<double> out) = 0;
};

/// sums[l][k]: integral of output k with the level-l rule, for l = 0..level.
struct LevelSums {
  std::vector<std::vector<double>> sums;
  std::size_t nodes = 0;
};

/// Streams over the level-`level` grid once and returns the integrals for
/// every coarser level as well (the grids are nested). Reduction order is
/// fixed, so results do not depend on `threads`.
LevelSums integrate_levels(NestedIntegrand& f, int level, std::size_t dimension,
                           unsigned threads = 1);

/// Explicit nodes and weights.
QuadratureGrid build_grid(const SparseGridSpec& spec);

/// sum_r w_r F(node_r), compensated, in node order.
double integrate(const QuadratureGrid& grid, const std::function<double(std::span<const double>)>& f,
                 unsigned threads = 1);

void write_grid_csv(std::ostream& out, const QuadratureGrid& grid);

struct LevelError {
  int level = 0;
  double rel_err_m1 = 0.0;
  double rel_err_m2 = 0.0;
};

struct AdaptiveReport {
  int level_opt = -1;
  int reference_level = 0;
  std::vector<LevelError> errors_by_level;
  bool converged = false;
  double m1_reference = 0.0;
  double m2_reference = 0.0;
  std::size_t reference_nodes = 0;
};

struct AdaptiveOptions {
  double epsilon = 1e-7;
  int reference_level = 20;
  int escalation_step = 5;
  int max_reference_level = 40;
  double node_budget = 1e9;  // largest grid the loop will walk
  unsigned threads = 1;
};

/// Level selection: moments of output 0 of `f` and of its square at every
/// level below the reference, stopping at the first level whose relative
/// errors are both <= epsilon. The reference level grows by escalation_step
/// on failure while the grid fits the node budget.
AdaptiveReport adaptive_moments(NestedIntegrand& f, std::size_t dimension,
                                const AdaptiveOptions& options);

/// Compensated (Neumaier) accumulator.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace qtdesign
