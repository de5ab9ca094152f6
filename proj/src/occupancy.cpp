#include "rilab/occupancy.hpp"

#include <bit>
#include <istream>
#include <ostream>

#include "binary_io.hpp"

namespace rilab {

namespace {
constexpr char kFieldMagic[9] = "RILFIELD";
}

OccupancyField::OccupancyField(WindowPtr w, bool track_multiplicity) : window_(std::move(w)) {
  require(window_ != nullptr, "OccupancyField: null window");
  bits_.assign(static_cast<std::size_t>((window_->size() + 63) / 64), 0);
  if (track_multiplicity) counts_.assign(static_cast<std::size_t>(window_->size()), 0);
}

bool OccupancyField::occupied_at(const Site& x) const {
  const auto i = window_->index_of(x);
  require(i >= 0, "OccupancyField: site outside window");
  return occupied(i);
}

std::int64_t OccupancyField::occupied_count() const {
  std::int64_t n = 0;
  for (auto w : bits_) n += std::popcount(w);
  return n;
}

bool OccupancyField::all_vacant(const std::vector<std::int64_t>& idx) const {
  for (auto i : idx)
    if (occupied(i)) return false;
  return true;
}

bool OccupancyField::subset_of(const OccupancyField& o) const {
  require(*window_ == *o.window_, "OccupancyField::subset_of: windows differ");
  for (std::size_t k = 0; k < bits_.size(); ++k)
    if (bits_[k] & ~o.bits_[k]) return false;
  return true;
}

void OccupancyField::unite(const OccupancyField& o) {
  require(window_->size() == o.window_->size(), "OccupancyField::unite: windows differ");
  for (std::size_t k = 0; k < bits_.size(); ++k) bits_[k] |= o.bits_[k];
  if (!counts_.empty() && !o.counts_.empty())
    for (std::size_t k = 0; k < counts_.size(); ++k) counts_[k] += o.counts_[k];
}

OccupancyField OccupancyField::restricted(WindowPtr sub) const {
  OccupancyField out(sub, has_multiplicity());
  for (std::int64_t j = 0; j < sub->size(); ++j) {
    const auto i = window_->index_of(sub->site(j));
    require(i >= 0, "OccupancyField::restricted: sub-window not contained");
    if (has_multiplicity())
      out.add_visits(j, counts_[static_cast<std::size_t>(i)]);
    else if (occupied(i))
      out.set(j);
  }
  return out;
}

std::uint64_t OccupancyField::pattern(const std::vector<std::int64_t>& idx) const {
  std::uint64_t p = 0;
  for (std::size_t j = 0; j < idx.size(); ++j)
    if (occupied(idx[j])) p |= std::uint64_t(1) << j;
  return p;
}

bool operator==(const OccupancyField& a, const OccupancyField& b) {
  if (a.size() != b.size()) return false;
  if (a.size() > 0 && !(*a.window_ == *b.window_)) return false;
  return a.bits_ == b.bits_ && a.counts_ == b.counts_;
}

void OccupancyField::serialize(std::ostream& os) const {
  const Window& w = *window_;
  io::put_magic(os, kFieldMagic);
  io::put_u32(os, kVersion);
  io::put_u32(os, static_cast<std::uint32_t>(w.dim()));
  io::put_i64(os, w.torus_side());
  io::put_u32(os, w.is_box() ? 0 : 1);
  if (w.is_box()) {
    for (int i = 0; i < w.dim(); ++i) io::put_i32(os, w.bounding_box().lo()[i]);
    for (int i = 0; i < w.dim(); ++i) io::put_i32(os, w.bounding_box().hi()[i]);
  } else {
    io::put_u64(os, static_cast<std::uint64_t>(w.size()));
    for (const auto& s : w.sites())
      for (int i = 0; i < w.dim(); ++i) io::put_i32(os, s[i]);
  }
  // Runs of equal bits, starting with a vacant run (possibly empty).
  std::vector<std::uint64_t> runs;
  bool cur = false;
  std::uint64_t len = 0;
  for (std::int64_t i = 0; i < w.size(); ++i) {
    if (occupied(i) != cur) {
      runs.push_back(len);
      cur = !cur;
      len = 0;
    }
    ++len;
  }
  runs.push_back(len);
  io::put_u64(os, runs.size());
  for (auto r : runs) io::put_varint(os, r);
  io::put_u32(os, has_multiplicity() ? 1 : 0);
  if (has_multiplicity())
    for (auto c : counts_) io::put_varint(os, c);
}

OccupancyField OccupancyField::deserialize(std::istream& is) {
  io::expect_magic(is, kFieldMagic, "OccupancyField");
  if (io::get_u32(is) != kVersion) throw DomainError("OccupancyField: unsupported version");
  const int dim = static_cast<int>(io::get_u32(is));
  require(dim >= 1 && dim <= kMaxDim, "OccupancyField: bad dimension");
  const auto side = io::get_i64(is);
  const auto kind = io::get_u32(is);
  Window w;
  if (kind == 0) {
    Site lo, hi;
    for (int i = 0; i < dim; ++i) lo[i] = io::get_i32(is);
    for (int i = 0; i < dim; ++i) hi[i] = io::get_i32(is);
    w = side > 0 ? Window::torus(dim, side) : Window::box(Box(dim, lo, hi));
  } else if (kind == 1) {
    const auto n = io::get_u64(is);
    std::vector<Site> sites(n);
    for (auto& s : sites)
      for (int i = 0; i < dim; ++i) s[i] = io::get_i32(is);
    w = Window::from_sites(dim, std::move(sites));
  } else {
    throw DomainError("OccupancyField: bad window kind");
  }
  const auto nruns = io::get_u64(is);
  std::vector<std::uint64_t> runs(nruns);
  for (auto& r : runs) r = io::get_varint(is);
  const bool mult = io::get_u32(is) == 1;
  OccupancyField f(make_window(std::move(w)), mult);
  std::int64_t i = 0;
  bool cur = false;
  for (auto r : runs) {
    require(i + static_cast<std::int64_t>(r) <= f.size(), "OccupancyField: runs exceed window");
    for (std::uint64_t k = 0; k < r; ++k, ++i)
      if (cur) f.set(i);
    cur = !cur;
  }
  require(i == f.size(), "OccupancyField: runs do not cover window");
  if (mult)
    for (auto& c : f.counts_) c = io::get_varint(is);
  return f;
}

}  // namespace rilab
