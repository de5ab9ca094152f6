#include <set>
#include <sstream>

#include "../oracles.hpp"
#include "doctest.h"
#include "rilab/interlacements.hpp"
#include "rilab/stats.hpp"

using namespace rilab;

namespace {

std::vector<Site> box_sites(std::int64_t R) {
  std::vector<Site> K;
  Box::centered(3, R).for_each([&](const Site& s) { K.push_back(s); });
  return K;
}

const InterlacementSampler& b2_sampler() {
  static const InterlacementSampler s = InterlacementSampler::for_window(make_window(Window::ball(3, 2)), Convention::paper_lazy);
  return s;
}

}  // namespace

TEST_CASE("interlacements at level zero are empty") {
  const auto s = b2_sampler().sample(0.0, 1);
  CHECK(s.trajectories == 0);
  CHECK(s.field.occupied_count() == 0);
  CHECK_THROWS_AS(b2_sampler().sample(-0.1, 1), DomainError);
}

TEST_CASE("property: label thinning is monotone in u") {
  const auto& S = b2_sampler();
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto hi = S.sample(2.0, seed).field;
    const auto mid = S.sample(0.7, seed).field;
    const auto lo = S.sample(0.2, seed).field;
    CHECK(lo.subset_of(mid));
    CHECK(mid.subset_of(hi));
    // field_from_cloud at a lower label reproduces the thinned sample.
    const auto full = S.sample(2.0, seed);
    CHECK(field_from_cloud(full.cloud, 0.7 * S.equilibrium().capacity).subset_of(hi));
  }
}

TEST_CASE("occupation times are positive exactly on occupied sites") {
  const auto& S = b2_sampler();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = S.sample(1.0, seed);
    const auto occ = occupation_field(s.cloud);
    CHECK(occ.normalizer == 12);
    for (std::int64_t i = 0; i < s.field.size(); ++i) {
      CHECK((occ.value(i) > 0) == s.field.occupied(i));
      CHECK(occ.visits[static_cast<std::size_t>(i)] == s.field.multiplicity(i));
    }
  }
  LabeledTrajectorySet empty;
  empty.window = make_window(Window::ball(3, 1));
  empty.kernel = WalkKernel::lattice(3, Laziness::lazy);
  const auto z = occupation_field(empty);
  for (std::int64_t i = 0; i < empty.window->size(); ++i) CHECK(z.value(i) == 0);
}

TEST_CASE("vacancy of a sub-window follows the capacity formula") {
  const auto& S = b2_sampler();
  const auto K = box_sites(1);
  const double cap = equilibrium_measure(K, 3, Convention::paper_lazy).capacity;
  std::vector<std::int64_t> idx;
  for (const auto& x : K) idx.push_back(S.window()->index_of(x));
  const double u = 0.3;
  const std::int64_t n = 20000;
  std::int64_t hits = 0;
  for (std::int64_t r = 0; r < n; ++r) hits += S.sample(u, derive_key(99, r)).field.all_vacant(idx);
  const double p = std::exp(-u * cap);
  CHECK(std::abs(double(hits) / n - p) < 4 * std::sqrt(p * (1 - p) / n) + S.bias_bound(u));
}

TEST_CASE("serialization round trips") {
  const auto s = b2_sampler().sample(1.5, 4);
  std::stringstream a;
  s.field.serialize(a);
  CHECK(OccupancyField::deserialize(a) == s.field);
  std::stringstream b;
  s.cloud.serialize(b);
  const auto c = LabeledTrajectorySet::deserialize(b);
  REQUIRE(c.points.size() == s.cloud.points.size());
  CHECK(*c.window == *s.cloud.window);
  CHECK(c.kernel == s.cloud.kernel);
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    CHECK(c.points[i].label == s.cloud.points[i].label);
    CHECK(c.points[i].visits == s.cloud.points[i].visits);
    CHECK(c.points[i].path == s.cloud.points[i].path);
  }
  std::stringstream bad("not a field");
  CHECK_THROWS(OccupancyField::deserialize(bad));
}

TEST_CASE("intensity profiles") {
  const auto h = IntensityProfile::homogeneous(3, 0.7, 16);
  CHECK(h.rate(16, Site{3, -2, 9}) == doctest::Approx(12 * 0.7 / 16));
  CHECK(h.rate(15, Site{}) == 0);
  IntensityProfile p(3);
  CHECK_THROWS_AS(p.add(4, Site{}, -1.0), DomainError);
  p.add(4, Site{}, 0.5);
  p.add(4, Site{}, 0.25);
  CHECK(p.rate(4, Site{}) == 0.75);
  CHECK(p.is_sparse(4));
}

TEST_CASE("mean occupation density") {
  for (std::int64_t L : {1, 4, 16})
    CHECK(std::abs(mean_occupation_density(IntensityProfile::homogeneous(3, 1.3, L), Site{2, 0, 1}) - 1.3) < 1e-12);
  oracle::Gen g(5);
  IntensityProfile a(3), b(3);
  for (int i = 0; i < 10; ++i) {
    a.add(1 + g.below(6), Site{int(g.below(5)) - 2, int(g.below(5)) - 2, 0}, g.uniform());
    b.add(1 + g.below(6), Site{0, int(g.below(5)) - 2, int(g.below(5)) - 2}, g.uniform());
  }
  IntensityProfile ab = a;
  ab += b;
  const Site x{1, 0, 0};
  CHECK(std::abs(mean_occupation_density(ab, x) - mean_occupation_density(a, x) - mean_occupation_density(b, x)) <
        1e-12);

  // MC oracle: E[l_x] = visits / 4d from sample_rho_model.
  const auto W = make_window(Window::from_sites(3, {x}));
  const std::int64_t n = 40000;
  double s1 = 0, s2 = 0;
  for (std::int64_t r = 0; r < n; ++r) {
    const double v = double(sample_rho_model(a, W, derive_key(71, r)).field.multiplicity(0)) / 12;
    s1 += v;
    s2 += v * v;
  }
  const double mean = s1 / n, se = std::sqrt((s2 / n - mean * mean) / n);
  CHECK(std::abs(mean - mean_occupation_density(a, x)) < 4 * se);
}

TEST_CASE("finite-length models") {
  const auto W = make_window(Window::ball(3, 2));
  CHECK(sample_rho_model(IntensityProfile(3), W, 1).field.occupied_count() == 0);
  IntensityProfile inf(3);
  inf.add(kInfiniteLength, Site{}, 1.0);
  CHECK_THROWS_AS(sample_rho_model(inf, W, 1), DomainError);
  CHECK(sample_J([](const Site&) { return 0.0; }, 8, W, 1).occupied_count() == 0);
  CHECK_THROWS_AS(sample_J([](const Site&) { return 1.0; }, 0, W, 1), DomainError);
  // Homogeneous profile and sample_J coincide at the same seed.
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    CHECK(sample_rho_model(IntensityProfile::homogeneous(3, 0.4, 8), W, seed).field ==
          sample_J([](const Site&) { return 0.4; }, 8, W, seed));
}

TEST_CASE("truncated model occupation mean equals u") {
  const auto W = make_window(Window::from_sites(3, {Site{}}));
  const double u = 2;
  for (std::int64_t L : {8, 16}) {
    const std::int64_t n = L == 8 ? 8000 : 1500;
    double s1 = 0, s2 = 0;
    for (std::int64_t r = 0; r < n; ++r) {
      const double v =
          double(sample_J([&](const Site&) { return u; }, L, W, derive_key(72, {std::uint64_t(L), std::uint64_t(r)}))
                     .multiplicity(0)) /
          12;
      s1 += v;
      s2 += v * v;
    }
    const double mean = s1 / n, se = std::sqrt((s2 / n - mean * mean) / n);
    CHECK(std::abs(mean - u) < 4 * se);
  }
}

TEST_CASE("rerooting") {
  SUBCASE("unreachable mass reroots to zero") {
    IntensityProfile far(3);
    far.add(3, Site{10, 0, 0}, 1.0);
    const auto r = reroot_profile(far, {Site{}});
    for (std::int64_t l = 1; l <= 3; ++l) CHECK(r.rate(l, Site{}) == 0);
  }
  SUBCASE("rerooted intensity lives on K") {
    IntensityProfile p(3);
    p.add(4, Site{2, 0, 0}, 0.3);
    p.add(2, Site{1, 1, 0}, 0.2);
    const std::vector<Site> K{Site{}, Site{1, 0, 0}};
    const auto r = reroot_profile(p, K);
    for (auto l : r.lengths())
      for (const auto& [x, v] : r.entries(l)) {
        CHECK(std::find(K.begin(), K.end(), x) != K.end());
        CHECK(v >= 0);
      }
  }
  SUBCASE("fast forward keeps only trajectories that hit K, restarted on K") {
    const auto W = make_window(Window::ball(3, 3));
    const auto K = make_window(Window::ball(3, 1));
    const auto s = sample_rho_model(IntensityProfile::homogeneous(3, 0.5, 6), W, 3);
    const auto ff = fast_forward(s.cloud, K);
    const auto k = WalkKernel::lattice(3, Laziness::lazy);
    for (const auto& p : ff.points) {
      CHECK(K->contains(p.path.start()));
      CHECK(p.path.length() == p.length);
    }
  }
  SUBCASE("escape-by-time tables start at one and decrease") {
    const auto T = EscapeByTime::compute(WalkKernel::lattice(3, Laziness::lazy), box_sites(1), 40);
    for (std::size_t i = 0; i < T.sites().size(); ++i) {
      CHECK(T(i, 0) == doctest::Approx(1.0));
      for (std::int64_t t = 1; t <= 40; ++t) CHECK(T(i, t) <= T(i, t - 1) + 1e-15);
    }
  }
}

TEST_CASE("rerooted J sampler matches its exact vacancy probability") {
  const auto K = make_window(Window::ball(3, 1));
  const RerootedJSampler S(K, 16);
  const double u = 0.05;
  const std::int64_t n = 20000;
  std::int64_t v = 0;
  for (std::int64_t r = 0; r < n; ++r) v += S.sample(u, derive_key(73, r)).occupied_count() == 0;
  const double p = S.vacancy_probability(u);
  CHECK(std::abs(double(v) / n - p) < 4 * std::sqrt(p * (1 - p) / n));
  for (std::uint64_t seed = 0; seed < 100; ++seed) CHECK(S.sample(0.02, seed).subset_of(S.sample(0.05, seed)));
}
