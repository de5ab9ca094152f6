#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rilab/rng.hpp"
#include "rilab/site.hpp"

namespace rilab {

enum class Laziness : std::uint8_t { simple = 0, lazy = 1 };

const char* to_string(Laziness l);
Laziness laziness_from_string(const std::string& s);

// Nearest-neighbour kernel on Z^d or on the torus (Z/NZ)^d.
//   lazy:   p(x,x) = 1/2, p(x,x+-e_i) = 1/(4d)   (a_xy = 1, a_xx = 2d, a_x = 4d)
//   simple: p(x,x+-e_i) = 1/(2d)
class WalkKernel {
 public:
  WalkKernel() = default;
  static WalkKernel lattice(int dim, Laziness lazy);
  static WalkKernel torus(int dim, Laziness lazy, std::int64_t side);

  int dim() const { return dim_; }
  Laziness laziness() const { return lazy_; }
  bool is_lazy() const { return lazy_ == Laziness::lazy; }
  bool is_torus() const { return side_ > 0; }
  std::int64_t side() const { return side_; }

  double hold_probability() const { return is_lazy() ? 0.5 : 0.0; }
  double neighbor_probability() const { return is_lazy() ? 1.0 / (4 * dim_) : 1.0 / (2 * dim_); }
  // Total conductance a_x of the lazy convention (4d), or 2d for the simple walk.
  double conductance() const { return is_lazy() ? 4.0 * dim_ : 2.0 * dim_; }

  // Move code in [0, 2d]; 2d is the hold move (never drawn for the simple walk).
  int draw_move(Stream& s) const {
    if (is_lazy()) {
      const auto r = static_cast<int>(s.below(4 * static_cast<std::uint64_t>(dim_)));
      return r < 2 * dim_ ? r : 2 * dim_;
    }
    return static_cast<int>(s.below(2 * static_cast<std::uint64_t>(dim_)));
  }

  bool valid_site(const Site& x) const;
  Site reduce(Site x) const;
  Site step(const Site& x, int move) const { return reduce(x + move_offset(move, dim_)); }

  friend bool operator==(const WalkKernel&, const WalkKernel&) = default;

 private:
  int dim_ = 3;
  Laziness lazy_ = Laziness::lazy;
  std::int64_t side_ = 0;
};

// Support of p(x, .) with probabilities.  Domain error for a torus site
// outside [0,N)^d.
std::vector<std::pair<Site, double>> step_distribution(const WalkKernel& k, const Site& x);

// Path w[0..length-1] stored as the start site plus 4-bit move codes.  The
// stream state after the last step is kept so the walk can be extended with
// exactly the increments it would have had if sampled longer from the start.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(int dim, const Site& start, const Stream& rng) : dim_(dim), start_(start), rng_(rng) {}

  int dim() const { return dim_; }
  const Site& start() const { return start_; }
  std::int64_t length() const { return steps_ + 1; }
  std::int64_t steps() const { return steps_; }
  int move(std::int64_t i) const {
    const std::uint8_t b = packed_[static_cast<std::size_t>(i >> 1)];
    return (i & 1) ? (b >> 4) : (b & 0xF);
  }
  const Stream& rng() const { return rng_; }

  void push_move(int m) {
    if ((steps_ & 1) == 0)
      packed_.push_back(static_cast<std::uint8_t>(m));
    else
      packed_.back() = static_cast<std::uint8_t>(packed_.back() | (m << 4));
    ++steps_;
  }
  // Sample further moves until length() == new_length.
  void extend(const WalkKernel& k, std::int64_t new_length);
  // Drop moves beyond new_length - 1.
  void truncate(std::int64_t new_length);

  std::vector<Site> sites(const WalkKernel& k) const;
  // Distinct sites visited, sorted.
  std::vector<Site> range(const WalkKernel& k) const;

  const std::vector<std::uint8_t>& packed() const { return packed_; }
  static Trajectory from_packed(int dim, const Site& start, const Stream& rng, std::int64_t steps,
                                std::vector<std::uint8_t> packed);

  friend bool operator==(const Trajectory& a, const Trajectory& b) {
    return a.dim_ == b.dim_ && a.start_ == b.start_ && a.steps_ == b.steps_ && a.packed_ == b.packed_;
  }

 private:
  int dim_ = 0;
  Site start_;
  Stream rng_;
  std::int64_t steps_ = 0;
  std::vector<std::uint8_t> packed_;
};

Trajectory sample_trajectory(const WalkKernel& k, const Site& x0, std::int64_t length, Stream rng);

// Real function with support inside a box (values outside are zero).  On the
// torus the box is the whole torus.
struct LatticeFunction {
  Box box;
  std::vector<double> values;

  LatticeFunction() = default;
  explicit LatticeFunction(const Box& b) : box(b), values(static_cast<std::size_t>(b.size()), 0.0) {}

  double operator()(const Site& x) const {
    return box.contains(x) ? values[static_cast<std::size_t>(box.index(x))] : 0.0;
  }
  double& at(const Site& x) { return values[static_cast<std::size_t>(box.index(x))]; }
  double sum() const;
};

// P_n f by n exact one-step convolutions.  On Z^d the support grows by one in
// every coordinate per step.
LatticeFunction apply_transition(const WalkKernel& k, const LatticeFunction& f, std::int64_t n);

}  // namespace rilab
