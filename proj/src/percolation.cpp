#include "rilab/percolation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <numeric>

namespace rilab {

namespace {

struct UnionFind {
  std::vector<std::int64_t> parent, size;
  explicit UnionFind(std::int64_t n) : parent(static_cast<std::size_t>(n)), size(static_cast<std::size_t>(n), 1) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  std::int64_t find(std::int64_t x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      auto& p = parent[static_cast<std::size_t>(x)];
      p = parent[static_cast<std::size_t>(p)];
      x = p;
    }
    return x;
  }
  void unite(std::int64_t a, std::int64_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size[static_cast<std::size_t>(a)] < size[static_cast<std::size_t>(b)]) std::swap(a, b);
    parent[static_cast<std::size_t>(b)] = a;
    size[static_cast<std::size_t>(a)] += size[static_cast<std::size_t>(b)];
  }
};

}  // namespace

ClusterLabeling ClusterLabeling::compute(const OccupancyField& field) {
  ClusterLabeling out;
  out.window_ = field.window_ptr();
  const Window& W = field.window();
  const int d = W.dim();
  const auto n = W.size();
  UnionFind uf(n);
  for (std::int64_t i = 0; i < n; ++i) {
    if (field.occupied(i)) continue;
    // Positive moves suffice: every edge is seen from one endpoint.
    for (int a = 0; a < d; ++a) {
      const auto j = W.neighbor(i, 2 * a);
      if (j >= 0 && field.vacant(j)) uf.unite(i, j);
    }
  }
  out.labels_.assign(static_cast<std::size_t>(n), -1);
  std::vector<std::int64_t> root_label(static_cast<std::size_t>(n), -1);
  for (std::int64_t i = 0; i < n; ++i) {
    if (field.occupied(i)) continue;
    const auto r = uf.find(i);
    auto& l = root_label[static_cast<std::size_t>(r)];
    if (l < 0) {
      l = static_cast<std::int64_t>(out.sizes_.size());
      out.sizes_.push_back(0);
      out.bbox_.push_back(Box(d, W.site(i), W.site(i)));
    }
    out.labels_[static_cast<std::size_t>(i)] = l;
    ++out.sizes_[static_cast<std::size_t>(l)];
    Box& b = out.bbox_[static_cast<std::size_t>(l)];
    Site lo = b.lo(), hi = b.hi();
    const Site& s = W.site(i);
    for (int a = 0; a < d; ++a) {
      lo[a] = std::min(lo[a], s[a]);
      hi[a] = std::max(hi[a], s[a]);
    }
    b = Box(d, lo, hi);
  }
  return out;
}

std::int64_t ClusterLabeling::largest() const {
  if (sizes_.empty()) return -1;
  return std::max_element(sizes_.begin(), sizes_.end()) - sizes_.begin();
}

std::vector<std::int64_t> ClusterLabeling::members(std::int64_t c) const {
  std::vector<std::int64_t> out;
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == c) out.push_back(static_cast<std::int64_t>(i));
  return out;
}

ClusterLabeling::GraphDiameter ClusterLabeling::linf_diameter_bound(std::int64_t c, std::int64_t exact_cap) const {
  if (window_->is_torus()) return torus_pairwise(c, true, exact_cap);
  const Box& b = bounding_box(c);
  GraphDiameter g;
  for (int a = 0; a < b.dim(); ++a) g.value = std::max(g.value, b.extent(a) - 1);
  return g;
}

ClusterLabeling::GraphDiameter ClusterLabeling::torus_pairwise(std::int64_t c, bool linf, std::int64_t exact_cap) const {
  GraphDiameter g;
  const auto mem = members(c);
  if (mem.empty()) return g;
  const Window& W = *window_;
  const int d = W.dim();
  const std::int64_t N = W.torus_side();
  auto dist = [&](std::int64_t i, std::int64_t j) {
    const Site &x = W.site(i), &y = W.site(j);
    std::int64_t s = 0;
    for (int a = 0; a < d; ++a) {
      const std::int64_t t = std::llabs(std::int64_t(x[a]) - y[a]);
      const std::int64_t w = std::min(t, N - t);
      s = linf ? std::max(s, w) : s + w;
    }
    return s;
  };
  auto farthest = [&](std::int64_t i) {
    std::int64_t best = i, bd = 0;
    for (auto j : mem)
      if (const auto dd = dist(i, j); dd > bd) {
        bd = dd;
        best = j;
      }
    return std::pair{best, bd};
  };
  if (static_cast<std::int64_t>(mem.size()) <= exact_cap) {
    for (auto i : mem) g.value = std::max(g.value, farthest(i).second);
    return g;
  }
  g.exact = false;
  const auto a = farthest(mem.front()).first;
  g.value = farthest(a).second;
  return g;
}

std::vector<std::int64_t> ClusterLabeling::bfs_distances(std::int64_t source, std::int64_t& farthest) const {
  const Window& W = *window_;
  std::vector<std::int64_t> dist(labels_.size(), -1);
  std::deque<std::int64_t> q{source};
  dist[static_cast<std::size_t>(source)] = 0;
  farthest = source;
  const auto c = label(source);
  while (!q.empty()) {
    const auto i = q.front();
    q.pop_front();
    if (dist[static_cast<std::size_t>(i)] > dist[static_cast<std::size_t>(farthest)]) farthest = i;
    for (int m = 0; m < 2 * W.dim(); ++m) {
      const auto j = W.neighbor(i, m);
      if (j < 0 || label(j) != c || dist[static_cast<std::size_t>(j)] >= 0) continue;
      dist[static_cast<std::size_t>(j)] = dist[static_cast<std::size_t>(i)] + 1;
      q.push_back(j);
    }
  }
  return dist;
}

ClusterLabeling::GraphDiameter ClusterLabeling::graph_diameter(std::int64_t c, std::int64_t exact_cap) const {
  const Window& W = *window_;
  if (W.is_torus()) return torus_pairwise(c, false, exact_cap);
  GraphDiameter g;
  const auto mem = members(c);
  const int d = W.dim();
  // max |x - y|_1 = max over sign vectors s of (max s.x - min s.x).
  for (int mask = 0; mask < (1 << (d - 1)) && !mem.empty(); ++mask) {
    std::int64_t lo = INT64_MAX, hi = INT64_MIN;
    for (auto i : mem) {
      const Site& x = W.site(i);
      std::int64_t p = x[0];
      for (int a = 1; a < d; ++a) p += (mask >> (a - 1)) & 1 ? -x[a] : x[a];
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
    g.value = std::max(g.value, hi - lo);
  }
  return g;
}

ClusterLabeling::GraphDiameter ClusterLabeling::chemical_diameter(std::int64_t c, std::int64_t exact_cap) const {
  GraphDiameter g;
  const auto mem = members(c);
  if (mem.empty()) return g;
  std::int64_t far = 0;
  if (static_cast<std::int64_t>(mem.size()) <= exact_cap) {
    for (auto s : mem) {
      const auto dist = bfs_distances(s, far);
      g.value = std::max(g.value, dist[static_cast<std::size_t>(far)]);
    }
    return g;
  }
  g.exact = false;
  bfs_distances(mem.front(), far);
  const auto dist = bfs_distances(far, far);
  g.value = dist[static_cast<std::size_t>(far)];
  return g;
}

namespace {

// The field restricted to B_R, which it must cover.
OccupancyField restrict_to_ball(const OccupancyField& field, std::int64_t R) {
  const int d = field.window().dim();
  const Box ball = Box::centered(d, R);
  for (const Site& c : {ball.lo(), ball.hi()})
    require(field.window().contains(c), "percolation: field does not cover the required ball");
  return field.restricted(make_window(Window::box(ball)));
}

bool sphere_site(const Site& x, std::int64_t R) { return norm_inf(x) == R; }

}  // namespace

bool origin_connected_to_sphere(const OccupancyField& field, std::int64_t R) {
  require(R >= 0, "origin_connected_to_sphere: R must be >= 0");
  const auto f = restrict_to_ball(field, R);
  const auto o = f.window().index_of(Site{});
  if (f.occupied(o)) return false;
  if (R == 0) return true;
  const auto cl = ClusterLabeling::compute(f);
  const auto c0 = cl.label(o);
  const Window& W = f.window();
  for (std::int64_t i = 0; i < W.size(); ++i)
    if (cl.label(i) == c0 && sphere_site(W.site(i), R)) return true;
  return false;
}

bool crossing(const OccupancyField& field, std::int64_t R) {
  require(R >= 1, "crossing: R must be >= 1");
  const auto f = restrict_to_ball(field, 2 * R);
  const auto cl = ClusterLabeling::compute(f);
  const Window& W = f.window();
  std::vector<char> inner(static_cast<std::size_t>(cl.cluster_count()), 0);
  for (std::int64_t i = 0; i < W.size(); ++i)
    if (cl.label(i) >= 0 && norm_inf(W.site(i)) <= R) inner[static_cast<std::size_t>(cl.label(i))] = 1;
  for (std::int64_t i = 0; i < W.size(); ++i)
    if (cl.label(i) >= 0 && sphere_site(W.site(i), 2 * R) && inner[static_cast<std::size_t>(cl.label(i))])
      return true;
  return false;
}

bool two_point_connected(const OccupancyField& field, const Site& x) {
  const Window& W = field.window();
  const auto o = W.index_of(Site{}), j = W.index_of(x);
  require(o >= 0 && j >= 0, "two_point_connected: sites outside the window");
  if (field.occupied(o) || field.occupied(j)) return false;
  if (o == j) return true;
  return ClusterLabeling::compute(field).connected(o, j);
}

bool disconnected(const OccupancyField& field, std::int64_t R, std::int64_t M) {
  require(M > R && R >= 0, "disconnected: need M > R >= 0");
  const auto f = restrict_to_ball(field, M);
  const auto cl = ClusterLabeling::compute(f);
  const Window& W = f.window();
  std::vector<char> inner(static_cast<std::size_t>(cl.cluster_count()), 0);
  for (std::int64_t i = 0; i < W.size(); ++i)
    if (cl.label(i) >= 0 && norm_inf(W.site(i)) <= R) inner[static_cast<std::size_t>(cl.label(i))] = 1;
  for (std::int64_t i = 0; i < W.size(); ++i)
    if (cl.label(i) >= 0 && sphere_site(W.site(i), M) && inner[static_cast<std::size_t>(cl.label(i))])
      return false;
  return true;
}

ClusterLabeling::GraphDiameter cluster_diameter(const ClusterLabeling& cl, std::int64_t c, DiameterMetric metric) {
  switch (metric) {
    case DiameterMetric::linf_box:
      return cl.linf_diameter_bound(c);
    case DiameterMetric::graph:
      return cl.graph_diameter(c);
    case DiameterMetric::chemical:
      return cl.chemical_diameter(c);
  }
  return {};
}

bool exist_event(const OccupancyField& field, std::int64_t R, DiameterMetric metric) {
  require(R >= 1, "exist_event: R must be >= 1");
  const auto cl = ClusterLabeling::compute(restrict_to_ball(field, R));
  for (std::int64_t c = 0; c < cl.cluster_count(); ++c) {
    const double dm = double(cluster_diameter(cl, c, metric).value);
    if (dm >= double(R) / 5) return true;
  }
  return false;
}

EventFlags exist_unique(const OccupancyField& field_u, const OccupancyField& field_v, double u, double v,
                        std::int64_t R, DiameterMetric metric) {
  if (!(v < u)) throw DomainError("exist_unique: requires v < u");
  require(R >= 1, "exist_unique: R must be >= 1");
  const auto fu = restrict_to_ball(field_u, R);
  const auto fv = restrict_to_ball(field_v, 2 * R);
  const auto cu = ClusterLabeling::compute(fu);
  const auto cv = ClusterLabeling::compute(fv);
  auto diam = [&](std::int64_t c) { return double(cluster_diameter(cu, c, metric).value); };
  EventFlags e;
  std::vector<std::int64_t> big;  // a representative site (index in fv) per large cluster
  std::vector<std::int64_t> rep(static_cast<std::size_t>(cu.cluster_count()), -1);
  for (std::int64_t i = 0; i < fu.window().size(); ++i) {
    const auto c = cu.label(i);
    if (c >= 0 && rep[static_cast<std::size_t>(c)] < 0) rep[static_cast<std::size_t>(c)] = i;
  }
  for (std::int64_t c = 0; c < cu.cluster_count(); ++c) {
    const double dm = diam(c);
    if (dm >= double(R) / 5) e.exist = true;
    if (dm >= double(R) / 10) big.push_back(fv.window().index_of(fu.window().site(rep[static_cast<std::size_t>(c)])));
  }
  e.unique = true;
  for (std::size_t a = 1; a < big.size() && e.unique; ++a)
    if (!cv.connected(big[0], big[a])) e.unique = false;
  return e;
}

namespace {
template <class Pred>
Estimate bernoulli_run(const VacantSampler& sampler, double u, std::int64_t replicates, std::uint64_t seed,
                       Pred&& pred) {
  require(replicates > 0, "observable: replicates must be > 0");
  std::int64_t k = 0;
  for (std::int64_t r = 0; r < replicates; ++r)
    if (pred(sampler(u, derive_key(seed, static_cast<std::uint64_t>(r))))) ++k;
  return wilson(k, replicates);
}
}  // namespace

Estimate theta_R(const VacantSampler& sampler, double u, std::int64_t R, std::int64_t replicates, std::uint64_t seed) {
  return bernoulli_run(sampler, u, replicates, seed,
                       [R](const OccupancyField& f) { return origin_connected_to_sphere(f, R); });
}

Estimate crossing_probability(const VacantSampler& sampler, double u, std::int64_t R, std::int64_t replicates,
                              std::uint64_t seed) {
  return bernoulli_run(sampler, u, replicates, seed, [R](const OccupancyField& f) { return crossing(f, R); });
}

Estimate two_point(const VacantSampler& sampler, double u, const Site& x, std::int64_t replicates,
                   std::uint64_t seed) {
  return bernoulli_run(sampler, u, replicates, seed,
                       [&x](const OccupancyField& f) { return two_point_connected(f, x); });
}

DisconnectionEstimate disconnection_statistic(const VacantSampler& sampler, double u, std::int64_t R,
                                              std::int64_t M, std::int64_t replicates, std::uint64_t seed) {
  DisconnectionEstimate e;
  e.probability =
      bernoulli_run(sampler, u, replicates, seed, [R, M](const OccupancyField& f) { return disconnected(f, R, M); });
  int d = 3;
  if (replicates > 0) d = sampler(0.0, seed).window().dim();
  const double scale = std::pow(double(M) / double(R), d);
  e.value = scale * e.probability.value;
  e.ci_lo = scale * e.probability.ci_lo;
  e.ci_hi = scale * e.probability.ci_hi;
  return e;
}

CovarianceEstimate fkg_check(const VacantSampler& sampler, double u, const FieldEvent& A, const FieldEvent& B,
                             std::int64_t replicates, std::uint64_t seed) {
  require(replicates > 1, "fkg_check: replicates must be > 1");
  CovarianceAccumulator acc;
  for (std::int64_t r = 0; r < replicates; ++r) {
    const auto f = sampler(u, derive_key(seed, static_cast<std::uint64_t>(r)));
    acc.add(A(f) ? 1.0 : 0.0, B(f) ? 1.0 : 0.0);
  }
  return summarize(acc);
}

FieldEvent vacant_sites_event(const std::vector<Site>& sites) {
  return [sites](const OccupancyField& f) {
    for (const auto& x : sites) {
      const auto i = f.window().index_of(x);
      require(i >= 0, "vacant_sites_event: site outside the window");
      if (f.occupied(i)) return false;
    }
    return true;
  };
}

}  // namespace rilab
