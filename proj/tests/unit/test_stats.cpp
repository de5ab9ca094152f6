#include <cmath>

#include "doctest.h"
#include "rilab/stats.hpp"

using namespace rilab;

TEST_CASE("normal quantiles") {
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963985).epsilon(1e-8));
  CHECK(normal_quantile(0.995) == doctest::Approx(2.575829304).epsilon(1e-8));
}

TEST_CASE("Wilson intervals") {
  const auto z = wilson(0, 100);
  CHECK(z.value == 0);
  CHECK(z.ci_lo == 0);
  CHECK(z.ci_hi > 0);
  const auto o = wilson(100, 100);
  CHECK(o.ci_hi == doctest::Approx(1.0));
  CHECK(o.ci_lo < 1);
  const auto h = wilson(50, 100, 0.95);
  CHECK(h.ci_lo < 0.5);
  CHECK(h.ci_hi > 0.5);
  CHECK(0.5 - h.ci_lo == doctest::Approx(h.ci_hi - 0.5));
  // Closed form for the 95% interval at 50/100.
  const double zq = 1.959963985, n = 100;
  const double half = zq * std::sqrt(0.25 / n + zq * zq / (4 * n * n)) / (1 + zq * zq / n);
  CHECK(h.ci_hi - 0.5 == doctest::Approx(half).epsilon(1e-8));
}

TEST_CASE("chi-square tests") {
  const auto perfect = chi_square_gof({25, 25, 25, 25}, {0.25, 0.25, 0.25, 0.25});
  CHECK(perfect.statistic == 0);
  CHECK(perfect.p_value == doctest::Approx(1.0));
  // (15^2 + 3*5^2) / 25 = 12 on 3 dof.
  const auto g = chi_square_gof({40, 20, 20, 20}, {0.25, 0.25, 0.25, 0.25});
  CHECK(g.statistic == doctest::Approx(12.0));
  CHECK(g.dof == 3);
  CHECK(g.p_value == doctest::Approx(0.0073832).epsilon(1e-4));
  const auto t = chi_square_two_sample({10, 20, 30}, {10, 20, 30});
  CHECK(t.statistic == doctest::Approx(0.0));
  const auto ind = chi_square_independence({10, 10, 10, 10}, 2, 2);
  CHECK(ind.statistic == doctest::Approx(0.0));
  CHECK(ind.dof == 1);
}

TEST_CASE("covariance accumulator") {
  CovarianceAccumulator a, b, all;
  for (int i = 0; i < 100; ++i) {
    const double x = i % 7, y = (i * 3) % 5 + 0.5 * x;
    (i < 40 ? a : b).add(x, y);
    all.add(x, y);
  }
  a.merge(b);
  CHECK(a.count() == 100);
  CHECK(a.covariance() == doctest::Approx(all.covariance()));
  CHECK(a.std_error() == doctest::Approx(all.std_error()));
  CovarianceAccumulator c;
  for (int i = 0; i < 10; ++i) c.add(1.0, i);
  CHECK(c.covariance() == 0);
}

TEST_CASE("weighted line fit") {
  const auto f = fit_line({1, 2, 3, 4}, {3, 5, 7, 9});
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.slope_se == doctest::Approx(0.0));
  const auto w = fit_line({0, 1, 2}, {0, 1, 5}, {1, 1, 0});
  CHECK(w.slope == doctest::Approx(1.0));
}
