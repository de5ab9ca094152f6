#include "../oracles.hpp"
#include "doctest.h"
#include "rilab/percolation.hpp"
#include "rilab/torus_vacant.hpp"

using namespace rilab;

TEST_CASE("zero steps leave only the start visited") {
  const auto run = sample_torus_vacant(8, 3, 0.0, 1);
  CHECK(run.steps() == 0);
  CHECK(run.trace().vacant_count() == 8 * 8 * 8 - 1);
  CHECK(run.trace().occupied(run.start_index()));
  // floor(u N^d) = 0 for u N^d < 1 as well.
  CHECK(sample_torus_vacant(8, 3, 1.0 / 1024, 1).trace().vacant_count() == 511);
}

TEST_CASE("property: vacant sets are nested in u and match the range") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto run = sample_torus_vacant(10, 3, 2.0, seed);
    const auto t1 = run.trace(1.0), t2 = run.trace(2.0), th = run.trace(0.5);
    CHECK(th.subset_of(t1));
    CHECK(t1.subset_of(t2));
    CHECK(t2.vacant_count() <= t1.vacant_count());
    CHECK(run.range_size(1.0) == t1.occupied_count());
    CHECK(run.steps_at(1.0) == 1000);
    // Range of an explicit walk with the same first-visit bookkeeping.
    std::int64_t visited = 0;
    for (std::int64_t i = 0; i < run.volume(); ++i) visited += run.first_visit(i) <= run.steps_at(1.0);
    CHECK(visited == t1.occupied_count());
  }
}

TEST_CASE("the torus budget is enforced before any work") {
  TorusRunOptions opt;
  opt.max_sites = 1000;
  CHECK_THROWS_AS(sample_torus_vacant(11, 3, 1.0, 1, opt), ResourceError);
  CHECK_NOTHROW(sample_torus_vacant(10, 3, 1.0, 1, opt));
}

TEST_CASE("torus runs replay exactly") {
  const auto a = sample_torus_vacant(12, 3, 1.5, 99);
  const auto b = sample_torus_vacant(12, 3, 1.5, 99);
  CHECK(a.visit_order() == b.visit_order());
  const auto la = ClusterLabeling::compute(a.trace()), lb = ClusterLabeling::compute(b.trace());
  CHECK(la.labels() == lb.labels());
  CHECK(la.linf_diameter(la.largest()) == lb.linf_diameter(lb.largest()));
}

TEST_CASE("vacancy marginals do not depend on the site") {
  const std::int64_t N = 8, n = 3000;
  oracle::Gen g(6);
  std::vector<std::int64_t> sites;
  for (int i = 0; i < 8; ++i) sites.push_back(g.below(N * N * N));
  std::vector<double> hits(sites.size(), 0);
  for (std::int64_t r = 0; r < n; ++r) {
    const auto t = sample_torus_vacant(N, 3, 1.0, derive_key(44, r)).trace();
    for (std::size_t i = 0; i < sites.size(); ++i) hits[i] += t.vacant(sites[i]);
  }
  for (std::size_t i = 0; i < sites.size(); ++i)
    for (std::size_t j = i + 1; j < sites.size(); ++j) {
      const double p = (hits[i] + hits[j]) / (2.0 * n);
      CHECK(std::abs(hits[i] - hits[j]) / n < 4 * std::sqrt(2 * p * (1 - p) / n));
    }
}

TEST_CASE("local limit table at u = 0") {
  TorusCalibration cal;
  const auto t = local_limit_compare({8, 12}, {Site{}, Site{1, 0, 0}}, 0.0, Convention::simple_lawler, 50, 3, cal);
  REQUIRE(t.rows.size() == 2);
  for (const auto& r : t.rows) {
    CHECK(r.estimate.value == 1.0);
    CHECK(r.limit == 1.0);
  }
}

TEST_CASE("lazy torus kernel is selectable") {
  TorusRunOptions opt;
  opt.laziness = Laziness::lazy;
  const auto run = sample_torus_vacant(8, 3, 1.0, 5, opt);
  CHECK(run.kernel().is_lazy());
  CHECK(run.trace().occupied_count() <= std::int64_t(run.steps()) + 1);
}
