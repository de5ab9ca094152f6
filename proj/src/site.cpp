#include "rilab/site.hpp"

#include <algorithm>
#include <sstream>

namespace rilab {

std::string to_string(const Site& s, int dim) {
  std::ostringstream os;
  os << '(';
  for (int i = 0; i < dim; ++i) os << (i ? "," : "") << s[i];
  os << ')';
  return os.str();
}

Box::Box(int dim, const Site& lo, const Site& hi) : dim_(dim), lo_(lo), hi_(hi) {
  require(dim >= 1 && dim <= kMaxDim, "Box: dimension out of range");
  for (int i = dim; i < kMaxDim; ++i) lo_[i] = hi_[i] = 0;
  size_ = 1;
  for (int i = dim - 1; i >= 0; --i) {
    stride_[i] = size_;
    const std::int64_t e = std::int64_t(hi_[i]) - lo_[i] + 1;
    if (e <= 0) {
      size_ = 0;
      return;
    }
    size_ *= e;
  }
}

Box Box::ball(int dim, const Site& center, std::int64_t radius) {
  Site lo = center, hi = center;
  for (int i = 0; i < dim; ++i) {
    lo[i] = static_cast<std::int32_t>(center[i] - radius);
    hi[i] = static_cast<std::int32_t>(center[i] + radius);
  }
  return Box(dim, lo, hi);
}

Site Box::site(std::int64_t k) const {
  Site s;
  for (int i = 0; i < dim_; ++i) {
    s[i] = static_cast<std::int32_t>(lo_[i] + k / stride_[i]);
    k %= stride_[i];
  }
  return s;
}

Box Box::expanded(std::int64_t r) const {
  Site lo = lo_, hi = hi_;
  for (int i = 0; i < dim_; ++i) {
    lo[i] = static_cast<std::int32_t>(lo[i] - r);
    hi[i] = static_cast<std::int32_t>(hi[i] + r);
  }
  return Box(dim_, lo, hi);
}

Box Box::intersect(const Box& o) const {
  Site lo, hi;
  for (int i = 0; i < dim_; ++i) {
    lo[i] = std::max(lo_[i], o.lo_[i]);
    hi[i] = std::min(hi_[i], o.hi_[i]);
  }
  return Box(dim_, lo, hi);
}

Window Window::box(const Box& b) {
  Window w;
  w.dim_ = b.dim();
  w.bbox_ = b;
  w.is_box_ = true;
  w.sites_.reserve(static_cast<std::size_t>(b.size()));
  b.for_each([&](const Site& s) { w.sites_.push_back(s); });
  return w;
}

Window Window::torus(int dim, std::int64_t side) {
  require(side >= 2, "torus side must be >= 2");
  Window w = box(Box(dim, Site{}, Site::filled(dim, static_cast<std::int32_t>(side - 1))));
  w.torus_side_ = side;
  return w;
}

Window Window::from_sites(int dim, std::vector<Site> sites) {
  require(dim >= 1 && dim <= kMaxDim, "Window: dimension out of range");
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  Window w;
  w.dim_ = dim;
  w.sites_ = std::move(sites);
  if (w.sites_.empty()) {
    w.bbox_ = Box(dim, Site::filled(dim, 0), Site::filled(dim, -1));
    return w;
  }
  Site lo = w.sites_.front(), hi = w.sites_.front();
  for (const auto& s : w.sites_)
    for (int i = 0; i < dim; ++i) {
      lo[i] = std::min(lo[i], s[i]);
      hi[i] = std::max(hi[i], s[i]);
    }
  w.bbox_ = Box(dim, lo, hi);
  w.is_box_ = w.bbox_.size() == w.size();
  if (!w.is_box_) w.build_lookup();
  return w;
}

void Window::build_lookup() {
  lookup_.assign(static_cast<std::size_t>(bbox_.size()), -1);
  for (std::int64_t i = 0; i < size(); ++i)
    lookup_[static_cast<std::size_t>(bbox_.index(sites_[i]))] = static_cast<std::int32_t>(i);
}

Site Window::reduce(Site s) const {
  if (torus_side_ > 0)
    for (int i = 0; i < dim_; ++i) {
      std::int64_t v = s[i] % torus_side_;
      if (v < 0) v += torus_side_;
      s[i] = static_cast<std::int32_t>(v);
    }
  return s;
}

std::int64_t Window::index_of(const Site& s0) const {
  const Site s = reduce(s0);
  if (!bbox_.contains(s)) return -1;
  const std::int64_t k = bbox_.index(s);
  return is_box_ ? k : lookup_[static_cast<std::size_t>(k)];
}

std::int64_t Window::neighbor(std::int64_t i, int move) const {
  return index_of(sites_[i] + move_offset(move, dim_));
}

std::vector<Site> Window::inner_boundary() const {
  std::vector<Site> out;
  if (is_torus()) return out;
  for (const auto& s : sites_) {
    for (int m = 0; m < 2 * dim_; ++m)
      if (!contains(s + move_offset(m, dim_))) {
        out.push_back(s);
        break;
      }
  }
  return out;
}

}  // namespace rilab
