#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "rilab/errors.hpp"
#include "rilab/rng.hpp"

namespace rilab {

inline constexpr int kMaxDim = 6;

// Integer lattice point.  Coordinates beyond the working dimension are kept
// at zero, so equality, ordering and norms never need the dimension.
struct Site {
  std::array<std::int32_t, kMaxDim> c{};

  Site() = default;
  Site(std::initializer_list<std::int32_t> xs) {
    require(xs.size() <= kMaxDim, "Site: too many coordinates");
    int i = 0;
    for (auto x : xs) c[i++] = x;
  }

  std::int32_t& operator[](int i) { return c[i]; }
  std::int32_t operator[](int i) const { return c[i]; }

  friend bool operator==(const Site&, const Site&) = default;
  friend auto operator<=>(const Site&, const Site&) = default;

  Site& operator+=(const Site& o) {
    for (int i = 0; i < kMaxDim; ++i) c[i] += o.c[i];
    return *this;
  }
  Site& operator-=(const Site& o) {
    for (int i = 0; i < kMaxDim; ++i) c[i] -= o.c[i];
    return *this;
  }
  friend Site operator+(Site a, const Site& b) { return a += b; }
  friend Site operator-(Site a, const Site& b) { return a -= b; }
  friend Site operator-(Site a) {
    for (auto& x : a.c) x = -x;
    return a;
  }

  static Site unit(int axis, int sign = 1) {
    Site s;
    s.c[axis] = sign;
    return s;
  }
  static Site filled(int dim, std::int32_t v) {
    Site s;
    for (int i = 0; i < dim; ++i) s.c[i] = v;
    return s;
  }
};

inline std::int64_t norm_inf(const Site& s) {
  std::int64_t m = 0;
  for (auto x : s.c) m = std::max<std::int64_t>(m, std::llabs(x));
  return m;
}
inline std::int64_t norm1(const Site& s) {
  std::int64_t m = 0;
  for (auto x : s.c) m += std::llabs(x);
  return m;
}
inline std::int64_t norm2_sq(const Site& s) {
  std::int64_t m = 0;
  for (auto x : s.c) m += std::int64_t(x) * x;
  return m;
}
inline double norm2(const Site& s) { return std::sqrt(double(norm2_sq(s))); }

inline std::uint64_t site_tag(const Site& s) {
  std::uint64_t h = 0x2545f4914f6cdd1dULL;
  for (auto x : s.c) h = derive_key(h, static_cast<std::uint64_t>(static_cast<std::uint32_t>(x)));
  return h;
}

std::string to_string(const Site& s, int dim);

struct SiteHash {
  std::size_t operator()(const Site& s) const {
    std::uint64_t h = 0;
    for (auto x : s.c) h = h * 0x100000001b3ULL ^ static_cast<std::uint32_t>(x);
    return static_cast<std::size_t>(mix64(h));
  }
};

// Axis-aligned box [lo, hi] (inclusive) in dimension dim.  Linear indices are
// lexicographic with the first coordinate most significant.
class Box {
 public:
  Box() = default;
  Box(int dim, const Site& lo, const Site& hi);
  static Box ball(int dim, const Site& center, std::int64_t radius);
  static Box centered(int dim, std::int64_t radius) { return ball(dim, Site{}, radius); }

  int dim() const { return dim_; }
  const Site& lo() const { return lo_; }
  const Site& hi() const { return hi_; }
  std::int64_t extent(int i) const { return std::int64_t(hi_[i]) - lo_[i] + 1; }
  std::int64_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  bool contains(const Site& s) const {
    for (int i = 0; i < dim_; ++i)
      if (s[i] < lo_[i] || s[i] > hi_[i]) return false;
    return true;
  }
  std::int64_t index(const Site& s) const {
    std::int64_t k = 0;
    for (int i = 0; i < dim_; ++i) k += std::int64_t(s[i] - lo_[i]) * stride_[i];
    return k;
  }
  Site site(std::int64_t k) const;
  std::int64_t stride(int i) const { return stride_[i]; }

  Box expanded(std::int64_t r) const;
  Box intersect(const Box& o) const;

  friend bool operator==(const Box& a, const Box& b) {
    return a.dim_ == b.dim_ && a.lo_ == b.lo_ && a.hi_ == b.hi_;
  }

  template <class F>
  void for_each(F&& f) const {
    if (size_ == 0) return;
    Site s = lo_;
    for (std::int64_t k = 0; k < size_; ++k) {
      f(s);
      for (int i = dim_ - 1; i >= 0; --i) {
        if (s[i] < hi_[i]) {
          ++s[i];
          break;
        }
        s[i] = lo_[i];
      }
    }
  }

 private:
  int dim_ = 0;
  Site lo_, hi_;
  std::array<std::int64_t, kMaxDim> stride_{};
  std::int64_t size_ = 0;
};

// Finite set of sites with O(1) index lookup.  A torus window is the full
// torus (Z/NZ)^dim with sites reduced to [0,N)^dim.
class Window {
 public:
  Window() = default;
  static Window box(const Box& b);
  static Window ball(int dim, std::int64_t radius) { return box(Box::centered(dim, radius)); }
  static Window torus(int dim, std::int64_t side);
  static Window from_sites(int dim, std::vector<Site> sites);

  int dim() const { return dim_; }
  std::int64_t size() const { return static_cast<std::int64_t>(sites_.size()); }
  const Site& site(std::int64_t i) const { return sites_[i]; }
  const std::vector<Site>& sites() const { return sites_; }
  const Box& bounding_box() const { return bbox_; }
  bool is_box() const { return is_box_; }
  bool is_torus() const { return torus_side_ > 0; }
  std::int64_t torus_side() const { return torus_side_; }

  // Reduce a site to its torus representative (identity off the torus).
  Site reduce(Site s) const;
  // -1 when absent.
  std::int64_t index_of(const Site& s) const;
  bool contains(const Site& s) const { return index_of(s) >= 0; }

  // Index of the neighbor of site i along move code m (axis m/2, sign + for
  // even m), or -1 if it leaves the window.
  std::int64_t neighbor(std::int64_t i, int move) const;

  // Sites with a nearest neighbor outside the window (empty on the torus).
  std::vector<Site> inner_boundary() const;

  friend bool operator==(const Window& a, const Window& b) {
    return a.dim_ == b.dim_ && a.torus_side_ == b.torus_side_ && a.sites_ == b.sites_;
  }

 private:
  void build_lookup();

  int dim_ = 0;
  std::int64_t torus_side_ = 0;
  bool is_box_ = false;
  Box bbox_;
  std::vector<Site> sites_;
  std::vector<std::int32_t> lookup_;  // over bbox_; empty when is_box_
};

// Move codes shared by kernels and windows: 0..2d-1 are unit steps
// (axis = m/2, +1 for even m), 2d is the hold move.
inline Site move_offset(int move, int dim) {
  if (move >= 2 * dim) return Site{};
  return Site::unit(move / 2, (move & 1) ? -1 : 1);
}

}  // namespace rilab
