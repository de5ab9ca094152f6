#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rilab/lattice_walk.hpp"

namespace rilab {

// paper_lazy:    lazy walk, e_K(x) = 4d * P_x[no return to K], g = visits / (4d)
// simple_lawler: simple walk, e_K(x) = P_x[no return to K], G = expected visits
// cap_paper_lazy = 2d * cap_simple_lawler.
enum class Convention : std::uint8_t { paper_lazy = 0, simple_lawler = 1 };

const char* to_string(Convention c);
Convention convention_from_string(const std::string& s);
inline Laziness laziness_of(Convention c) {
  return c == Convention::paper_lazy ? Laziness::lazy : Laziness::simple;
}
inline Convention convention_of(Laziness l) {
  return l == Laziness::lazy ? Convention::paper_lazy : Convention::simple_lawler;
}
// a_x used to normalise visit counts into occupation times.
inline double occupation_normalizer(Convention c, int dim) {
  return c == Convention::paper_lazy ? 4.0 * dim : 1.0;
}

// Expected number of visits to x of the simple random walk started at 0
// (d >= 3), from
//   G(x) = d * int_0^inf prod_i e^{-s} I_{|x_i|}(s) ds,
// which is the lattice Fourier integral after integrating out the angles.
// Absolute accuracy is about 1e-12.
double simple_green(int dim, const Site& x);
std::vector<double> simple_green_many(int dim, const std::vector<Site>& offsets);

enum class GreenMethod : std::uint8_t { quadrature = 0, monte_carlo = 1 };

struct GreenEstimate {
  double value = 0;
  double error_bound = 0;  // deterministic bound (quadrature error or truncation bias)
  double std_error = 0;    // statistical error, zero for quadrature
};

struct MonteCarloGreenParams {
  std::int64_t samples = 100000;
  std::int64_t truncation_radius = 32;
  std::uint64_t seed = 1;
};

// g(0,x) in the kernel's convention: G_simple / (2d) for the lazy kernel,
// G_simple for the simple kernel.
GreenEstimate green_value(const WalkKernel& k, const Site& x);
GreenEstimate green_value(const WalkKernel& k, const Site& x, const MonteCarloGreenParams& mc);

// C with g(0,x) ~ C |x|^{2-d}: (d/2) Gamma(d/2 - 1) pi^{-d/2}, divided by 2d
// for the lazy kernel.
double green_asymptotic_constant(const WalkKernel& k);

// Dense table of g(0,x) over the cube |x|_inf <= radius.
class GreenTable {
 public:
  static constexpr std::uint32_t kVersion = 1;

  static GreenTable build(const WalkKernel& k, std::int64_t radius);
  static GreenTable load(const std::string& path);
  // Reads cache_dir/<key>.bin when present and valid, otherwise builds and writes it.
  static GreenTable cached(const WalkKernel& k, std::int64_t radius, const std::string& cache_dir);
  void save(const std::string& path) const;
  std::string cache_key() const;

  int dim() const { return dim_; }
  Laziness laziness() const { return lazy_; }
  Convention convention() const { return convention_of(lazy_); }
  std::int64_t radius() const { return radius_; }
  GreenMethod method() const { return method_; }
  double error_bound() const { return error_bound_; }

  bool covers(const Site& offset) const { return norm_inf(offset) <= radius_; }
  double operator()(const Site& offset) const {
    if (!covers(offset)) throw DomainError("GreenTable: offset outside table radius");
    return values_[static_cast<std::size_t>(box_.index(offset))];
  }
  const std::vector<double>& values() const { return values_; }

 private:
  int dim_ = 3;
  Laziness lazy_ = Laziness::lazy;
  std::int64_t radius_ = 0;
  GreenMethod method_ = GreenMethod::quadrature;
  double error_bound_ = 0;
  Box box_;
  std::vector<double> values_;
};

struct EquilibriumMeasure {
  int dim = 3;
  Convention convention = Convention::paper_lazy;
  std::vector<Site> sites;     // K, sorted
  std::vector<double> weights;  // e_K
  double capacity = 0;
  double rcond = 1;  // reciprocal condition estimate of the solved system

  double weight(const Site& x) const;
  std::vector<double> normalized() const;
};

enum class EquilibriumSolve { automatic, full, boundary };

// Solves sum_y g(x,y) e(y) = 1 on K.  `boundary` solves on the inner boundary
// only (e_K vanishes inside); `automatic` uses the full system for |K| <= 1000.
EquilibriumMeasure equilibrium_measure(const std::vector<Site>& K, const GreenTable& green,
                                       EquilibriumSolve mode = EquilibriumSolve::automatic);

// Green table big enough for K - K, built in place.
EquilibriumMeasure equilibrium_measure(const std::vector<Site>& K, int dim, Convention c);

struct EscapeEstimate {
  double estimate = 0;
  double std_error = 0;
  double error_bound = 0;  // bias from scoring exit of B(K,M) as escape
  std::int64_t samples = 0;
  std::int64_t truncation = 0;
};

// P_x[no return to K], walks stopped on return or on leaving B(K, M).
EscapeEstimate escape_probability_mc(const WalkKernel& k, const std::vector<Site>& K, const Site& x,
                                     std::int64_t M, std::int64_t samples, std::uint64_t seed);

// Smallest M with cap * C_asym * M^{2-d} < tol.
std::int64_t default_truncation(const WalkKernel& k, double capacity, double tol = 1e-4);

// Inner boundary of a finite set: sites with a neighbour outside.
std::vector<Site> inner_boundary(const std::vector<Site>& K, int dim);
std::int64_t diameter_inf(const std::vector<Site>& K);

}  // namespace rilab
