#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "rilab/site.hpp"

namespace rilab {

using WindowPtr = std::shared_ptr<const Window>;

inline WindowPtr make_window(Window w) { return std::make_shared<const Window>(std::move(w)); }

// Occupied/vacant indicator over a window, optionally with per-site visit
// counts.  When counts are tracked, count(x) > 0 iff x is occupied.
class OccupancyField {
 public:
  static constexpr std::uint32_t kVersion = 1;

  OccupancyField() = default;
  explicit OccupancyField(WindowPtr w, bool track_multiplicity = false);

  const Window& window() const { return *window_; }
  const WindowPtr& window_ptr() const { return window_; }
  std::int64_t size() const { return window_ ? window_->size() : 0; }

  bool occupied(std::int64_t i) const { return (bits_[static_cast<std::size_t>(i >> 6)] >> (i & 63)) & 1U; }
  bool vacant(std::int64_t i) const { return !occupied(i); }
  bool occupied_at(const Site& x) const;
  void set(std::int64_t i, bool occ = true) {
    const std::uint64_t m = std::uint64_t(1) << (i & 63);
    if (occ)
      bits_[static_cast<std::size_t>(i >> 6)] |= m;
    else
      bits_[static_cast<std::size_t>(i >> 6)] &= ~m;
  }
  void add_visits(std::int64_t i, std::uint64_t n) {
    if (n == 0) return;
    set(i);
    if (!counts_.empty()) counts_[static_cast<std::size_t>(i)] += n;
  }

  bool has_multiplicity() const { return !counts_.empty(); }
  std::uint64_t multiplicity(std::int64_t i) const { return counts_[static_cast<std::size_t>(i)]; }

  std::int64_t occupied_count() const;
  std::int64_t vacant_count() const { return size() - occupied_count(); }
  bool all_vacant(const std::vector<std::int64_t>& idx) const;

  // Occupied set of *this is contained in that of o (same window).
  bool subset_of(const OccupancyField& o) const;
  void unite(const OccupancyField& o);
  // Same occupancy on a sub-window (sites must all lie in the window).
  OccupancyField restricted(WindowPtr sub) const;
  // Bit pattern of the given sites (bit j = occupied(sites[j])).
  std::uint64_t pattern(const std::vector<std::int64_t>& idx) const;

  const std::vector<std::uint64_t>& words() const { return bits_; }

  // Run-length encoded binary format: window header, runs as varints,
  // optional counts.  Little-endian, versioned.
  void serialize(std::ostream& os) const;
  static OccupancyField deserialize(std::istream& is);

  friend bool operator==(const OccupancyField& a, const OccupancyField& b);

 private:
  WindowPtr window_;
  std::vector<std::uint64_t> bits_;
  std::vector<std::uint64_t> counts_;
};

}  // namespace rilab
