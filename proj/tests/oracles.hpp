#pragma once

// Reference implementations that share no code with the library beyond the
// Site/Window/OccupancyField containers.

#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <vector>

#include "rilab/occupancy.hpp"

namespace oracle {

// G(0) of the simple walk on Z^3 in closed form (Watson's integral):
// sqrt(6)/(32 pi^3) Gamma(1/24) Gamma(5/24) Gamma(7/24) Gamma(11/24).
inline double watson_green_origin() {
  const double pi = 3.14159265358979323846;
  return std::sqrt(6.0) / (32 * pi * pi * pi) * std::tgamma(1.0 / 24) * std::tgamma(5.0 / 24) *
         std::tgamma(7.0 / 24) * std::tgamma(11.0 / 24);
}

// Component labels by breadth-first search from each unlabeled vacant site,
// with neighbours computed from coordinates (wrapping when the window is a
// torus).  -1 marks occupied sites.
inline std::vector<std::int64_t> bfs_labels(const rilab::OccupancyField& f) {
  const rilab::Window& W = f.window();
  const int d = W.dim();
  std::vector<std::int64_t> lab(static_cast<std::size_t>(W.size()), -1);
  std::int64_t next = 0;
  for (std::int64_t s = 0; s < W.size(); ++s) {
    if (f.occupied(s) || lab[static_cast<std::size_t>(s)] >= 0) continue;
    std::deque<std::int64_t> q{s};
    lab[static_cast<std::size_t>(s)] = next;
    while (!q.empty()) {
      const auto i = q.front();
      q.pop_front();
      for (int a = 0; a < d; ++a)
        for (int sign : {1, -1}) {
          rilab::Site y = W.site(i);
          y[a] += sign;
          if (W.is_torus()) {
            const auto N = static_cast<std::int32_t>(W.torus_side());
            y[a] = ((y[a] % N) + N) % N;
          }
          const auto j = W.index_of(y);
          if (j < 0 || f.occupied(j) || lab[static_cast<std::size_t>(j)] >= 0) continue;
          lab[static_cast<std::size_t>(j)] = next;
          q.push_back(j);
        }
    }
    ++next;
  }
  return lab;
}

// Two labelings describe the same partition of the vacant sites.
inline bool same_partition(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
  if (a.size() != b.size()) return false;
  std::map<std::int64_t, std::int64_t> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] < 0) != (b[i] < 0)) return false;
    if (a[i] < 0) continue;
    auto [it1, new1] = ab.emplace(a[i], b[i]);
    auto [it2, new2] = ba.emplace(b[i], a[i]);
    if (it1->second != b[i] || it2->second != a[i]) return false;
  }
  return true;
}

// Vacant path from any site satisfying `from` to any site satisfying `to`,
// by BFS over coordinates.
template <class From, class To>
bool bfs_connects(const rilab::OccupancyField& f, From&& from, To&& to) {
  const auto lab = bfs_labels(f);
  const rilab::Window& W = f.window();
  std::vector<char> hit;
  for (std::int64_t i = 0; i < W.size(); ++i)
    if (lab[static_cast<std::size_t>(i)] >= 0 && from(W.site(i))) {
      const auto c = static_cast<std::size_t>(lab[static_cast<std::size_t>(i)]);
      if (hit.size() <= c) hit.resize(c + 1, 0);
      hit[c] = 1;
    }
  for (std::int64_t i = 0; i < W.size(); ++i) {
    const auto c = lab[static_cast<std::size_t>(i)];
    if (c >= 0 && static_cast<std::size_t>(c) < hit.size() && hit[static_cast<std::size_t>(c)] && to(W.site(i)))
      return true;
  }
  return false;
}

// Splittable test generator independent of the library's streams.
struct Gen {
  std::uint64_t s;
  explicit Gen(std::uint64_t seed) : s(seed * 0x9E3779B97F4A7C15ULL + 1) {}
  std::uint64_t next() {
    s ^= s << 13;
    s ^= s >> 7;
    s ^= s << 17;
    return s;
  }
  double uniform() { return double(next() >> 11) * 0x1.0p-53; }
  std::int64_t below(std::int64_t n) { return static_cast<std::int64_t>(next() % static_cast<std::uint64_t>(n)); }
};

// i.i.d. occupied with probability p on a window.
inline rilab::OccupancyField random_field(rilab::WindowPtr W, double p, Gen& g) {
  rilab::OccupancyField f(std::move(W));
  for (std::int64_t i = 0; i < f.size(); ++i)
    if (g.uniform() < p) f.set(i);
  return f;
}

}  // namespace oracle
