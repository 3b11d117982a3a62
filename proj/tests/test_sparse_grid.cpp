#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "qtdesign/errors.hpp"
#include "qtdesign/sparse_grid.hpp"

using namespace qtdesign;

namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

double uniform_moment(int k) { return k % 2 ? 0.0 : 1.0 / (k + 1); }

// prod_j exp(c_j x_j), streamed.
class ExpProduct final : public NestedIntegrand {
 public:
  explicit ExpProduct(std::vector<double> rates) : rates_(std::move(rates)), partial_{1.0} {}
  std::size_t outputs() const override { return 1; }
  std::unique_ptr<NestedIntegrand> clone() const override { return std::make_unique<ExpProduct>(rates_); }
  void enter(std::size_t dim, std::size_t, double x) override {
    partial_.push_back(partial_.back() * std::exp(rates_[dim] * x));
  }
  void leave(std::size_t) override { partial_.pop_back(); }
  void leaf(std::size_t, double x, std::span<double> out) override {
    out[0] = partial_.back() * std::exp(rates_.back() * x);
  }

 private:
  std::vector<double> rates_;
  std::vector<double> partial_;
};

// x_0, whose mean vanishes.
class FirstCoordinate final : public NestedIntegrand {
 public:
  std::size_t outputs() const override { return 1; }
  std::unique_ptr<NestedIntegrand> clone() const override { return std::make_unique<FirstCoordinate>(); }
  void enter(std::size_t dim, std::size_t, double x) override {
    if (dim == 0) x0_ = x;
  }
  void leave(std::size_t) override {}
  void leaf(std::size_t, double, std::span<double> out) override { out[0] = x0_; }

 private:
  double x0_ = 0.0;
};

double exact_exp(const std::vector<double>& rates) {
  double r = 1.0;
  for (const double c : rates) r *= std::sinh(c) / c;
  return r;
}

}  // namespace

TEST_CASE("index set size is binomial") {
  for (std::size_t n = 1; n <= 5; ++n) {
    for (int l = 0; l <= 6; ++l) {
      CHECK(index_set(l, n).size() == static_cast<std::size_t>(binomial(l + static_cast<int>(n), l)));
    }
  }
  const auto s = index_set(1, 2);
  REQUIRE(s.size() == 3);
  CHECK(s[0] == std::vector<int>{1, 1});
  CHECK(s[1] == std::vector<int>{1, 2});
  CHECK(s[2] == std::vector<int>{2, 1});
  CHECK_THROWS_AS(index_set(-1, 2), ConfigError);
}

TEST_CASE("one-dimensional Clenshaw-Curtis rules") {
  CHECK(rule_size(1) == 1);
  CHECK(rule_size(2) == 3);
  CHECK(rule_size(5) == 17);
  const Rule1d r1 = nodes_1d(1);
  CHECK(r1.nodes == std::vector<double>{0.0});
  CHECK(r1.weights[0] == doctest::Approx(1.0));
  const Rule1d r2 = nodes_1d(2);
  CHECK(r2.weights[0] == doctest::Approx(1.0 / 6));
  CHECK(r2.weights[1] == doctest::Approx(2.0 / 3));
  for (int i = 1; i <= 8; ++i) {
    const Rule1d r = nodes_1d(i);
    const int exact_degree = static_cast<int>(r.nodes.size()) - 1 + (r.nodes.size() % 2);
    for (int k = 0; k <= exact_degree; ++k) {
      double s = 0.0;
      for (std::size_t p = 0; p < r.nodes.size(); ++p) s += r.weights[p] * std::pow(r.nodes[p], k);
      CHECK(s == doctest::Approx(uniform_moment(k)).epsilon(1e-13));
    }
  }
}

TEST_CASE("node counts of the merged grid") {
  CHECK(node_count(0, 4) == 1);
  CHECK(node_count(1, 4) == 9);
  CHECK(node_count(8, 4) == 18945);
  CHECK(node_count(5, 2) == 145);
  for (std::size_t n = 1; n <= 4; ++n) {
    for (int l = 0; l <= 5; ++l) {
      const SparseGridSpec s{n, l, {}};
      CHECK(build_grid(s).node_count() == static_cast<std::size_t>(node_count(l, n)));
    }
  }
}

TEST_CASE("polynomial moments are exact up to total degree 2l+1") {
  for (std::size_t n = 1; n <= 4; ++n) {
    for (int l = 0; l <= 4; ++l) {
      const QuadratureGrid g = build_grid({n, l, {}});
      double wsum = 0.0;
      for (const double w : g.weights) wsum += w;
      CHECK(wsum == doctest::Approx(1.0).epsilon(1e-14));
      for (const auto& alpha : index_set(2 * l + 1, n)) {
        auto f = [&](std::span<const double> x) {
          double v = 1.0;
          for (std::size_t j = 0; j < n; ++j) v *= std::pow(x[j], alpha[j] - 1);
          return v;
        };
        double exact = 1.0;
        for (std::size_t j = 0; j < n; ++j) exact *= uniform_moment(alpha[j] - 1);
        CHECK(std::abs(integrate(g, f) - exact) <= 1e-12);
      }
    }
  }
}

TEST_CASE("half widths scale nodes and keep the density normalized") {
  const QuadratureGrid g = build_grid({2, 3, {0.5, 2.0}});
  auto f = [](std::span<const double> x) { return x[0] * x[0] + x[1] * x[1]; };
  CHECK(integrate(g, f) == doctest::Approx(0.25 / 3 + 4.0 / 3).epsilon(1e-13));
  std::ostringstream csv;
  write_grid_csv(csv, g);
  CHECK(csv.str().rfind("z1,z2,weight\n", 0) == 0);
}

TEST_CASE("exponential integrand converges exponentially") {
  const std::vector<double> rates{1.0, 0.8, 0.6, 0.4};
  ExpProduct f(rates);
  const LevelSums s = integrate_levels(f, 9, 4);
  const double exact = exact_exp(rates);
  std::vector<double> err;
  for (int l = 0; l <= 9; ++l) err.push_back(std::abs(s.sums[l][0] - exact) / exact);
  for (int l = 1; l <= 6; ++l) CHECK(err[l] < err[l - 1]);
  CHECK(err[3] < 1e-4);
  CHECK(err[7] < 1e-11);
  CHECK(s.nodes == static_cast<std::size_t>(node_count(9, 4)));
}

TEST_CASE("streamed level sums equal explicit grids at every level") {
  const std::vector<double> rates{0.9, -0.7, 0.5};
  ExpProduct f(rates);
  const LevelSums s = integrate_levels(f, 6, 3);
  for (int l = 0; l <= 6; ++l) {
    const QuadratureGrid g = build_grid({3, l, {}});
    const double direct = integrate(g, [&](std::span<const double> x) {
      return std::exp(0.9 * x[0] - 0.7 * x[1] + 0.5 * x[2]);
    });
    CHECK(s.sums[l][0] == doctest::Approx(direct).epsilon(1e-14));
  }
}

TEST_CASE("results do not depend on the thread count") {
  ExpProduct f({1.0, 0.8, 0.6, 0.4});
  const LevelSums a = integrate_levels(f, 8, 4, 1);
  const LevelSums b = integrate_levels(f, 8, 4, 4);
  const LevelSums c = integrate_levels(f, 8, 4, 3);
  for (int l = 0; l <= 8; ++l) {
    CHECK(a.sums[l][0] == b.sums[l][0]);
    CHECK(a.sums[l][0] == c.sums[l][0]);
  }
  const QuadratureGrid g = build_grid({4, 6, {}});
  auto h = [](std::span<const double> x) { return std::cos(x[0] + 2 * x[1] - x[2] * x[3]); };
  CHECK(integrate(g, h, 1) == integrate(g, h, 5));
}

TEST_CASE("adaptive level selection") {
  ExpProduct f({1.0, 0.8, 0.6, 0.4});
  AdaptiveOptions o;
  o.epsilon = 1e-8;
  o.reference_level = 10;
  const AdaptiveReport r = adaptive_moments(f, 4, o);
  REQUIRE(r.converged);
  CHECK(r.level_opt > 0);
  CHECK(r.level_opt < 10);
  CHECK(r.errors_by_level.size() == 9);
  const LevelError& e = r.errors_by_level[r.level_opt - 1];
  CHECK(e.rel_err_m1 <= 1e-8);
  CHECK(e.rel_err_m2 <= 1e-8);
  CHECK(r.m1_reference == doctest::Approx(exact_exp({1.0, 0.8, 0.6, 0.4})).epsilon(1e-13));
  CHECK(r.m2_reference == doctest::Approx(exact_exp({2.0, 1.6, 1.2, 0.8})).epsilon(1e-12));

  SUBCASE("unreachable tolerance within the budget") {
    o.epsilon = 1e-300;
    o.reference_level = 4;
    o.node_budget = node_count(9, 4);
    const AdaptiveReport u = adaptive_moments(f, 4, o);
    CHECK_FALSE(u.converged);
    CHECK(u.reference_level == 9);
  }
  SUBCASE("vanishing mean is rejected") {
    FirstCoordinate g;
    CHECK_THROWS_AS(adaptive_moments(g, 2, o), ReferenceDegenerateError);
  }
}

TEST_CASE("grid spec validation") {
  CHECK_THROWS_AS(SparseGridSpec({0, 2, {}}).validate(), ConfigError);
  CHECK_THROWS_AS(SparseGridSpec({2, -1, {}}).validate(), ConfigError);
  CHECK_THROWS_AS(SparseGridSpec({2, 2, {1.0}}).validate(), ConfigError);
  CHECK_THROWS_AS(nodes_1d(0), ConfigError);
}

TEST_CASE("compensated sum") {
  CompensatedSum s;
  s.add(1e16);
  for (int i = 0; i < 1000; ++i) s.add(1.0);
  s.add(-1e16);
  CHECK(s.value() == 1000.0);
}
