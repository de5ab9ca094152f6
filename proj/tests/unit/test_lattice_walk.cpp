#include <map>
#include <set>

#include "../oracles.hpp"
#include "doctest.h"
#include "rilab/lattice_walk.hpp"

using namespace rilab;

namespace {

std::map<Site, double> as_map(const std::vector<std::pair<Site, double>>& v) {
  std::map<Site, double> m;
  for (const auto& [s, p] : v) m[s] += p;
  return m;
}

}  // namespace

TEST_CASE("step distribution examples") {
  SUBCASE("lazy d=3") {
    const auto m = as_map(step_distribution(WalkKernel::lattice(3, Laziness::lazy), Site{}));
    CHECK(m.size() == 7);
    CHECK(m.at(Site{}) == doctest::Approx(0.5));
    for (int a = 0; a < 3; ++a) {
      CHECK(m.at(Site::unit(a)) == doctest::Approx(1.0 / 12));
      CHECK(m.at(Site::unit(a, -1)) == doctest::Approx(1.0 / 12));
    }
  }
  SUBCASE("simple d=3") {
    const auto m = as_map(step_distribution(WalkKernel::lattice(3, Laziness::simple), Site{}));
    CHECK(m.size() == 6);
    CHECK(m.count(Site{}) == 0);
    for (const auto& [s, p] : m) CHECK(p == doctest::Approx(1.0 / 6));
  }
  SUBCASE("lazy d=1") {
    const auto m = as_map(step_distribution(WalkKernel::lattice(1, Laziness::lazy), Site{}));
    CHECK(m.size() == 3);
    CHECK(m.at(Site{}) == doctest::Approx(0.5));
    CHECK(m.at(Site{1}) == doctest::Approx(0.25));
    CHECK(m.at(Site{-1}) == doctest::Approx(0.25));
  }
}

TEST_CASE("torus sites outside [0,N) are rejected") {
  const auto k = WalkKernel::torus(3, Laziness::simple, 5);
  CHECK_THROWS_AS(step_distribution(k, Site{5, 0, 0}), DomainError);
  CHECK_THROWS_AS(step_distribution(k, Site{-1, 0, 0}), DomainError);
  const auto m = as_map(step_distribution(k, Site{0, 0, 0}));
  CHECK(m.count(Site{4, 0, 0}) == 1);
}

TEST_CASE("property: one-step law sums to one and is translation invariant") {
  oracle::Gen g(11);
  for (int d = 1; d <= 4; ++d)
    for (auto lazy : {Laziness::simple, Laziness::lazy}) {
      const auto k = WalkKernel::lattice(d, lazy);
      const auto base = step_distribution(k, Site{});
      for (int t = 0; t < 50; ++t) {
        Site x;
        for (int i = 0; i < d; ++i) x[i] = static_cast<std::int32_t>(g.below(201) - 100);
        const auto sd = step_distribution(k, x);
        double sum = 0;
        for (const auto& [s, p] : sd) {
          CHECK(p >= 0);
          sum += p;
        }
        CHECK(std::abs(sum - 1) < 1e-12);
        REQUIRE(sd.size() == base.size());
        for (std::size_t i = 0; i < sd.size(); ++i) {
          CHECK(sd[i].first == base[i].first + x);
          CHECK(sd[i].second == base[i].second);
        }
      }
    }
  for (std::int64_t N : {2, 3, 7}) {
    const auto k = WalkKernel::torus(3, Laziness::lazy, N);
    Box(3, Site{}, Site::filled(3, static_cast<std::int32_t>(N - 1))).for_each([&](const Site& x) {
      double sum = 0;
      for (const auto& [s, p] : step_distribution(k, x)) {
        CHECK(k.valid_site(s));
        sum += p;
      }
      CHECK(std::abs(sum - 1) < 1e-12);
    });
  }
}

TEST_CASE("sample_trajectory") {
  const auto k = WalkKernel::lattice(3, Laziness::lazy);
  CHECK_THROWS_AS(sample_trajectory(k, Site{}, 0, Stream(1)), DomainError);

  const auto one = sample_trajectory(k, Site{1, 2, 3}, 1, Stream(1));
  CHECK(one.length() == 1);
  CHECK(one.sites(k) == std::vector<Site>{Site{1, 2, 3}});

  const auto a = sample_trajectory(k, Site{}, 500, Stream(42));
  const auto b = sample_trajectory(k, Site{}, 500, Stream(42));
  CHECK(a == b);
  CHECK(a.sites(k) == b.sites(k));
  CHECK_FALSE(a == sample_trajectory(k, Site{}, 500, Stream(43)));
}

TEST_CASE("property: trajectories move by at most one unit and |range| <= length") {
  oracle::Gen g(3);
  for (int t = 0; t < 200; ++t) {
    const int d = 1 + static_cast<int>(g.below(4));
    const auto k = WalkKernel::lattice(d, g.below(2) ? Laziness::lazy : Laziness::simple);
    const auto len = 1 + g.below(300);
    const auto w = sample_trajectory(k, Site{}, len, Stream(g.next()));
    const auto s = w.sites(k);
    REQUIRE(static_cast<std::int64_t>(s.size()) == len);
    for (std::size_t i = 1; i < s.size(); ++i) CHECK(norm1(s[i] - s[i - 1]) <= 1);
    if (!k.is_lazy())
      for (std::size_t i = 1; i < s.size(); ++i) CHECK(norm1(s[i] - s[i - 1]) == 1);
    const auto r = w.range(k);
    CHECK(static_cast<std::int64_t>(r.size()) <= len);
    CHECK(std::set<Site>(s.begin(), s.end()).size() == r.size());
  }
}

TEST_CASE("extending a trajectory matches sampling it longer") {
  const auto k = WalkKernel::lattice(3, Laziness::lazy);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto w = sample_trajectory(k, Site{}, 37, Stream(seed));
    w.extend(k, 301);
    CHECK(w == sample_trajectory(k, Site{}, 301, Stream(seed)));
    w.truncate(37);
    CHECK(w.sites(k) == sample_trajectory(k, Site{}, 37, Stream(seed)).sites(k));
  }
}

TEST_CASE("torus walks stay on the torus") {
  const auto k = WalkKernel::torus(3, Laziness::simple, 4);
  const auto w = sample_trajectory(k, Site{0, 0, 0}, 2000, Stream(9));
  for (const auto& s : w.sites(k)) CHECK(k.valid_site(s));
}

TEST_CASE("empirical one-step frequencies match the kernel") {
  for (auto lazy : {Laziness::simple, Laziness::lazy}) {
    const auto k = WalkKernel::lattice(3, lazy);
    const std::int64_t n = 1000000;
    std::map<Site, double> count;
    Stream s(derive_key(5, static_cast<std::uint64_t>(lazy)));
    for (std::int64_t i = 0; i < n; ++i) count[k.step(Site{}, k.draw_move(s))] += 1;
    for (const auto& [y, p] : step_distribution(k, Site{})) {
      const double sigma = std::sqrt(p * (1 - p) / n);
      CHECK(std::abs(count[y] / n - p) < 4 * sigma);
    }
    CHECK(count.size() == step_distribution(k, Site{}).size());
  }
}

TEST_CASE("apply_transition") {
  const auto k = WalkKernel::lattice(3, Laziness::lazy);
  oracle::Gen g(17);
  LatticeFunction f(Box::centered(3, 4));
  for (auto& v : f.values) v = g.uniform() - 0.3;

  SUBCASE("P_0 is the identity") {
    const auto p0 = apply_transition(k, f, 0);
    f.box.for_each([&](const Site& x) { CHECK(p0(x) == f(x)); });
  }
  SUBCASE("support grows by at most n and mass is preserved") {
    const auto p5 = apply_transition(k, f, 5);
    CHECK(f.box.expanded(5).intersect(p5.box) == p5.box);
    CHECK(std::abs(p5.sum() - f.sum()) < 1e-10);
  }
  SUBCASE("semigroup P_{n+m} = P_n P_m") {
    const auto a = apply_transition(k, f, 6);
    const auto b = apply_transition(k, apply_transition(k, f, 3), 3);
    a.box.for_each([&](const Site& x) { CHECK(std::abs(a(x) - b(x)) < 1e-12); });
  }
  SUBCASE("constants are preserved away from the edge") {
    LatticeFunction c(Box::centered(3, 10));
    for (auto& v : c.values) v = 2.5;
    const auto pc = apply_transition(k, c, 4);
    Box::centered(3, 6).for_each([&](const Site& x) { CHECK(pc(x) == doctest::Approx(2.5).epsilon(1e-13)); });
  }
  SUBCASE("one step is the explicit average") {
    const auto p1 = apply_transition(k, f, 1);
    Box::centered(3, 3).for_each([&](const Site& x) {
      double want = 0;
      for (const auto& [y, p] : step_distribution(k, x)) want += p * f(y);
      CHECK(std::abs(p1(x) - want) < 1e-14);
    });
  }
}

TEST_CASE("replicate keys are pairwise distinct") {
  std::set<std::uint64_t> keys;
  for (std::uint64_t r = 0; r < 100000; ++r) keys.insert(derive_key(12345, r));
  CHECK(keys.size() == 100000);
}

TEST_CASE("stream outputs below n stay in range and are roughly uniform") {
  Stream s(77);
  std::vector<double> c(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto v = s.below(7);
    REQUIRE(v < 7);
    c[v] += 1;
  }
  for (double x : c) CHECK(std::abs(x / n - 1.0 / 7) < 4 * std::sqrt((1.0 / 7) * (6.0 / 7) / n));
}
