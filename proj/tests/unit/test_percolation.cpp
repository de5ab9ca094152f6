#include <algorithm>
#include <set>

#include "../oracles.hpp"
#include "doctest.h"
#include "rilab/percolation.hpp"

using namespace rilab;

namespace {

std::vector<std::int64_t> labels_of(const ClusterLabeling& cl) { return cl.labels(); }

// Brute-force diameters of a member list.
struct Brute {
  std::int64_t linf = 0, l1 = 0, chemical = 0;
};

Brute brute_diameters(const OccupancyField& f, const std::vector<std::int64_t>& members) {
  const Window& W = f.window();
  const int d = W.dim();
  Brute b;
  auto wrap = [&](std::int64_t a) {
    if (!W.is_torus()) return std::abs(a);
    const auto N = W.torus_side();
    a = ((a % N) + N) % N;
    return std::min(a, N - a);
  };
  for (auto i : members)
    for (auto j : members) {
      std::int64_t li = 0, l1 = 0;
      for (int a = 0; a < d; ++a) {
        const auto x = wrap(std::int64_t(W.site(i)[a]) - W.site(j)[a]);
        li = std::max(li, x);
        l1 += x;
      }
      b.linf = std::max(b.linf, li);
      b.l1 = std::max(b.l1, l1);
    }
  // Chemical: BFS restricted to the cluster, from every member.
  const std::set<std::int64_t> in(members.begin(), members.end());
  for (auto s : members) {
    std::map<std::int64_t, std::int64_t> dist{{s, 0}};
    std::vector<std::int64_t> q{s};
    for (std::size_t h = 0; h < q.size(); ++h)
      for (int m = 0; m < 2 * d; ++m) {
        const auto j = W.neighbor(q[h], m);
        if (j >= 0 && in.count(j) && !dist.count(j)) {
          dist[j] = dist[q[h]] + 1;
          b.chemical = std::max(b.chemical, dist[j]);
          q.push_back(j);
        }
      }
  }
  return b;
}

OccupancyField full(WindowPtr W) {
  OccupancyField f(W);
  for (std::int64_t i = 0; i < f.size(); ++i) f.set(i);
  return f;
}

}  // namespace

TEST_CASE("trivial fields") {
  const auto W = make_window(Window::ball(3, 3));
  CHECK(ClusterLabeling::compute(full(W)).cluster_count() == 0);
  const auto cl = ClusterLabeling::compute(OccupancyField(W));
  CHECK(cl.cluster_count() == 1);
  CHECK(cl.size(0) == 343);
  CHECK(cl.linf_diameter(0) == 6);
  CHECK(cl.graph_diameter(0).value == 18);
  CHECK(cl.chemical_diameter(0).value == 18);
}

TEST_CASE("property: union-find equals BFS") {
  oracle::Gen g(1234);
  SUBCASE("boxes B_6") {
    const auto W = make_window(Window::ball(3, 6));
    for (int t = 0; t < 1000; ++t) {
      const double p = std::array{0.2, 0.5, 0.8}[t % 3];
      const auto f = oracle::random_field(W, p, g);
      const auto cl = ClusterLabeling::compute(f);
      CHECK(oracle::same_partition(labels_of(cl), oracle::bfs_labels(f)));
      std::int64_t total = 0;
      for (std::int64_t c = 0; c < cl.cluster_count(); ++c) total += cl.size(c);
      CHECK(total == f.vacant_count());
    }
  }
  SUBCASE("tori") {
    for (int t = 0; t < 300; ++t) {
      const auto W = make_window(Window::torus(3, 2 + g.below(7)));
      const auto f = oracle::random_field(W, 0.3 + 0.4 * g.uniform(), g);
      CHECK(oracle::same_partition(labels_of(ClusterLabeling::compute(f)), oracle::bfs_labels(f)));
    }
  }
  SUBCASE("irregular windows") {
    for (int t = 0; t < 200; ++t) {
      std::vector<Site> sites;
      Box::centered(3, 4).for_each([&](const Site& s) {
        if (g.uniform() < 0.7) sites.push_back(s);
      });
      const auto W = make_window(Window::from_sites(3, sites));
      const auto f = oracle::random_field(W, 0.3, g);
      CHECK(oracle::same_partition(labels_of(ClusterLabeling::compute(f)), oracle::bfs_labels(f)));
    }
  }
}

TEST_CASE("property: largest cluster and diameters agree with brute force") {
  oracle::Gen g(55);
  for (int t = 0; t < 150; ++t) {
    const bool torus = t % 2;
    const auto W = make_window(torus ? Window::torus(3, 3 + g.below(5)) : Window::ball(3, 1 + g.below(3)));
    const auto f = oracle::random_field(W, 0.35 + 0.3 * g.uniform(), g);
    const auto cl = ClusterLabeling::compute(f);
    if (cl.cluster_count() == 0) continue;
    std::int64_t best = 0;
    for (std::int64_t c = 0; c < cl.cluster_count(); ++c) best = std::max(best, cl.size(c));
    CHECK(cl.size(cl.largest()) == best);
    for (std::int64_t c = 0; c < cl.cluster_count(); ++c) {
      const auto b = brute_diameters(f, cl.members(c));
      CHECK(cl.linf_diameter(c) == b.linf);
      const auto gd = cl.graph_diameter(c);
      CHECK(gd.exact);
      CHECK(gd.value == b.l1);
      const auto ch = cl.chemical_diameter(c);
      CHECK(ch.exact);
      CHECK(ch.value == b.chemical);
      // Lower bounds never exceed the exact value.
      CHECK(cl.chemical_diameter(c, 1).value <= b.chemical);
      CHECK(cl.graph_diameter(c, 1).value <= b.l1);
    }
  }
}

TEST_CASE("property: events agree with BFS oracles") {
  oracle::Gen g(77);
  const std::int64_t R = 3;
  const auto W = make_window(Window::ball(3, 2 * R));
  for (int t = 0; t < 300; ++t) {
    const auto f = oracle::random_field(W, 0.2 + 0.5 * g.uniform(), g);
    // Restrict oracles to the relevant ball by occupying everything outside it.
    auto inside = [&](std::int64_t r) {
      OccupancyField h = f;
      for (std::int64_t i = 0; i < W->size(); ++i)
        if (norm_inf(W->site(i)) > r) h.set(i);
      return h;
    };
    const auto fR = inside(R), f2R = inside(2 * R);
    CHECK(origin_connected_to_sphere(f, R) ==
          oracle::bfs_connects(fR, [](const Site& x) { return x == Site{}; },
                               [&](const Site& x) { return norm_inf(x) == R; }));
    CHECK(crossing(f, R) == oracle::bfs_connects(f2R, [&](const Site& x) { return norm_inf(x) <= R; },
                                                 [&](const Site& x) { return norm_inf(x) == 2 * R; }));
    const Site x{2, 1, 0};
    CHECK(two_point_connected(f, x) ==
          oracle::bfs_connects(f, [](const Site& y) { return y == Site{}; }, [&](const Site& y) { return y == x; }));
    CHECK(disconnected(f, 1, 2 * R) !=
          oracle::bfs_connects(f2R, [](const Site& y) { return norm_inf(y) <= 1; },
                               [&](const Site& y) { return norm_inf(y) == 2 * R; }));
  }
}

TEST_CASE("exist and unique") {
  const std::int64_t R = 10;
  const auto W = make_window(Window::ball(3, 2 * R));
  const OccupancyField vacant(W);
  CHECK_THROWS_AS(exist_unique(vacant, vacant, 1.0, 1.0, R), DomainError);
  CHECK_THROWS_AS(exist_unique(vacant, vacant, 1.0, 2.0, R), DomainError);

  SUBCASE("fully vacant") {
    const auto e = exist_unique(vacant, vacant, 1.0, 0.5, R);
    CHECK(e.exist);
    CHECK(e.unique);
  }
  SUBCASE("one spanning cluster") {
    OccupancyField fu = full(W);
    for (int k = -R; k <= R; ++k) fu.set(W->index_of(Site{k, 0, 0}), false);
    OccupancyField fv = fu;
    for (int k = -R; k <= R; ++k) fv.set(W->index_of(Site{k, 1, 0}), false);
    const auto e = exist_unique(fu, fv, 1.0, 0.5, R);
    CHECK(e.exist);
    CHECK(e.unique);
  }
  SUBCASE("two clusters behind an occupied slab") {
    // Lines at y = -3 and y = +3 in B_R; the plane y = 0 is occupied in B_2R at both levels.
    OccupancyField fu = full(W);
    for (int k = -R; k <= R; ++k) {
      fu.set(W->index_of(Site{k, -3, 0}), false);
      fu.set(W->index_of(Site{k, 3, 0}), false);
    }
    OccupancyField fv(W);
    Box::centered(3, 2 * R).for_each([&](const Site& s) {
      if (s[1] == 0) fv.set(W->index_of(s));
    });
    const auto e = exist_unique(fu, fv, 1.0, 0.5, R);
    CHECK(e.exist);
    CHECK_FALSE(e.unique);
    // Opening a hole in the slab at level v reconnects them.
    fv.set(W->index_of(Site{5, 0, 7}), false);
    CHECK(exist_unique(fu, fv, 1.0, 0.5, R).unique);
  }
  SUBCASE("property: Unique is monotone in the level-v field; Exist decreases in u") {
    oracle::Gen g(9);
    const auto Ws = make_window(Window::ball(3, 8));
    for (int t = 0; t < 100; ++t) {
      const auto fu = oracle::random_field(Ws, 0.25 + 0.2 * g.uniform(), g);
      auto fv = oracle::random_field(Ws, 0.35, g);
      const bool before = exist_unique(fu, fv, 1.0, 0.5, 4).unique;
      auto more = fv;
      for (std::int64_t i = 0; i < more.size(); ++i)
        if (g.uniform() < 0.3) more.set(i, false);
      if (before) CHECK(exist_unique(fu, more, 1.0, 0.5, 4).unique);
      auto fu2 = fu;
      fu2.unite(oracle::random_field(Ws, 0.2, g));
      if (exist_event(fu2, 4)) CHECK(exist_event(fu, 4));
    }
  }
}

TEST_CASE("estimators on degenerate samplers") {
  const auto W = make_window(Window::ball(3, 6));
  const VacantSampler empty = [&](double, std::uint64_t) { return OccupancyField(W); };
  CHECK(theta_R(empty, 0.0, 4, 50, 1).value == 1.0);
  CHECK(crossing_probability(empty, 0.0, 3, 50, 1).value == 1.0);
  CHECK(two_point(empty, 0.0, Site{3, 0, 0}, 50, 1).value == 1.0);
  const auto d = disconnection_statistic(empty, 0.0, 2, 6, 50, 1);
  CHECK(d.value == 0.0);
  const VacantSampler filled = [&](double, std::uint64_t) { return full(W); };
  const auto dd = disconnection_statistic(filled, 50.0, 2, 6, 50, 1);
  CHECK(dd.value == doctest::Approx(27.0));

  const VacantSampler coin = [&](double, std::uint64_t seed) {
    oracle::Gen h(seed);
    return oracle::random_field(W, 0.5, h);
  };
  const FieldEvent A = vacant_sites_event({Site{}});
  const FieldEvent always = [](const OccupancyField&) { return true; };
  const auto same = fkg_check(coin, 1.0, A, A, 400, 2);
  CHECK(same.cov >= 0);
  CHECK(same.cov == doctest::Approx(0.25).epsilon(0.2));
  CHECK(fkg_check(coin, 1.0, always, A, 400, 2).cov == 0.0);
}

TEST_CASE("two-point function at the origin is the vacancy probability") {
  const auto W = make_window(Window::ball(3, 2));
  const VacantSampler coin = [&](double, std::uint64_t seed) {
    oracle::Gen h(seed);
    return oracle::random_field(W, 0.5, h);
  };
  const auto a = two_point(coin, 1.0, Site{}, 500, 8);
  std::int64_t v = 0;
  for (std::int64_t r = 0; r < 500; ++r) v += coin(1.0, derive_key(8, r)).vacant(W->index_of(Site{}));
  CHECK(a.successes == v);
}
