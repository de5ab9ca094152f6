#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <vector>

#include "rilab/lattice_walk.hpp"
#include "rilab/occupancy.hpp"
#include "rilab/potential.hpp"

namespace rilab {

inline constexpr std::int64_t kInfiniteLength = -1;

// rho(l, x): rate of length-l trajectories started at x.  Each length carries
// explicit (site, rate) entries, a spatially constant part and arbitrary
// rate functions (optionally with a support box); rate() is their sum.
class IntensityProfile {
 public:
  using Rate = std::function<double(const Site&)>;

  explicit IntensityProfile(int dim = 3) : dim_(dim) {}
  // 4d u / L at length L, every site.
  static IntensityProfile homogeneous(int dim, double u, std::int64_t L);
  // (4d / L) f(x) at length L.
  static IntensityProfile truncated(int dim, std::int64_t L, Rate f, std::optional<Box> support = {});

  int dim() const { return dim_; }
  void add(std::int64_t length, const Site& x, double rate);
  void add_constant(std::int64_t length, double rate);
  void add_function(std::int64_t length, Rate f, std::optional<Box> support = {});
  IntensityProfile& operator+=(const IntensityProfile& o);

  double rate(std::int64_t length, const Site& x) const;
  // Sum of rates over lengths > `after`.
  double tail_rate(std::int64_t after, const Site& x) const;

  std::vector<std::int64_t> lengths() const;
  bool has_infinite() const { return parts_.count(kInfiniteLength) > 0; }
  std::int64_t max_length() const;
  // True when the length has only explicit entries.
  bool is_sparse(std::int64_t length) const;
  // Constant rate when the length has only a constant part.
  std::optional<double> constant(std::int64_t length) const;
  const std::map<Site, double>& entries(std::int64_t length) const;

 private:
  struct Part {
    std::map<Site, double> entries;
    double constant = 0;
    std::vector<std::pair<Rate, std::optional<Box>>> functions;
  };
  int dim_;
  std::map<std::int64_t, Part> parts_;
};

// Per-site rate-one Poisson arrival processes.  Arrival j at x has label
// v_j (increasing in j) and walk stream key arrival_walk_key(cloud, x, j); a
// model keeps the arrivals with label below its threshold, so models with
// ordered thresholds built from the same cloud are pathwise ordered.
std::uint64_t arrival_site_key(std::uint64_t cloud, const Site& x);
inline std::uint64_t arrival_walk_key(std::uint64_t site_key, std::uint64_t j) {
  return derive_key(site_key, j + 1);
}
// Calls f(label, j) for every arrival with lo < label <= hi.
template <class F>
void for_each_arrival(std::uint64_t site_key, double lo, double hi, F&& f) {
  if (!(hi > lo) || hi <= 0) return;
  Stream s(site_key);
  double v = 0;
  for (std::uint64_t j = 0;; ++j) {
    v += s.exponential();
    if (v > hi) return;
    if (v > lo) f(v, j);
  }
}

struct TrajectoryRecord {
  double label = 0;
  std::int64_t length = 0;           // kInfiniteLength for interlacement walks
  Trajectory path;                   // finite models: w[0..length-1]; interlacements: start only
  std::vector<std::int32_t> visits;  // interlacements: window indices of the time steps spent in the window
};

struct LabeledTrajectorySet {
  static constexpr std::uint32_t kVersion = 1;

  WindowPtr window;
  WalkKernel kernel;
  std::vector<TrajectoryRecord> points;

  // Length-prefixed record stream, little-endian, versioned.  The window is
  // stored as an explicit site list.
  void serialize(std::ostream& os) const;
  static LabeledTrajectorySet deserialize(std::istream& is);
};

// Visit counts per window site; occupation time = count / normalizer (a_x).
struct OccupationField {
  WindowPtr window;
  std::vector<std::uint64_t> visits;
  double normalizer = 1;
  double value(std::int64_t i) const { return double(visits[static_cast<std::size_t>(i)]) / normalizer; }
};

// Sums visits of the records with label <= max_label.  normalizer defaults to
// the a_x of the kernel's convention (4d lazy, 1 simple).
OccupationField occupation_field(const LabeledTrajectorySet& cloud, double max_label = INFINITY);
// Occupancy of the records with label <= max_label, with visit counts.
OccupancyField field_from_cloud(const LabeledTrajectorySet& cloud, double max_label = INFINITY);

// ---------------------------------------------------------------------------
// Interlacements in a finite window.

enum class InterlacementTruncation {
  // Off-window excursions replaced by an exact jump to the re-entrance point
  // (or escape), from the harmonic measure h_y = G_dW^{-1} g(y, dW).
  exact_excursions,
  // Walks stopped on leaving B(W, M); exit counts as escape.
  fixed_radius,
};

struct InterlacementOptions {
  InterlacementTruncation mode = InterlacementTruncation::exact_excursions;
  std::int64_t radius = 0;  // fixed_radius only; 0 = default_truncation
  bool keep_trajectories = true;
};

struct InterlacementSample {
  OccupancyField field;  // with visit counts
  LabeledTrajectorySet cloud;
  double bias_bound = 0;  // bound on P[some trajectory returns after truncation]
  std::int64_t trajectories = 0;
};

class InterlacementSampler {
 public:
  InterlacementSampler(WindowPtr W, Convention c, const GreenTable& green, InterlacementOptions opt = {});
  InterlacementSampler(WindowPtr W, Convention c, const EquilibriumMeasure& eq, const GreenTable& green,
                       InterlacementOptions opt = {});
  // Builds the Green table it needs.
  static InterlacementSampler for_window(WindowPtr W, Convention c, InterlacementOptions opt = {});

  // Poisson(u cap(W)) walks from the normalised equilibrium measure.  Labels
  // are arrival times of a rate-cap(W) process, so sample(u', seed) is the
  // label-thinning of sample(u, seed) for u' < u.
  InterlacementSample sample(double u, std::uint64_t seed) const;

  const EquilibriumMeasure& equilibrium() const { return eq_; }
  Convention convention() const { return conv_; }
  const WindowPtr& window() const { return window_; }
  const WalkKernel& kernel() const { return kernel_; }
  double bias_bound(double u) const;
  std::int64_t truncation_radius() const { return radius_; }
  InterlacementTruncation mode() const { return opt_.mode; }

 private:
  void build(const GreenTable& green);
  void run_walk(Stream& rng, std::int64_t start, std::vector<std::int32_t>& visits) const;

  WindowPtr window_;
  Convention conv_;
  WalkKernel kernel_;
  EquilibriumMeasure eq_;
  InterlacementOptions opt_;
  std::int64_t radius_ = 0;
  double g_at_radius_ = 0;

  std::vector<double> start_cdf_;         // over window indices
  std::vector<std::int32_t> neighbor_;    // [i * 2d + m]: window index, or -(1 + outside index)
  std::vector<Site> outside_;             // outer boundary sites
  std::vector<std::int32_t> entry_site_;  // inner boundary as window indices
  std::vector<double> entry_cdf_;         // [k * |entry| + j]
};

// Fixed-radius sampler in the signature of the classic construction; M = 0
// selects the exact-excursion mode instead.
InterlacementSample sample_interlacement_window(double u, Convention c, WindowPtr W, const EquilibriumMeasure& eq,
                                                std::int64_t M, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Finite-length models (lazy walk).

struct RhoSample {
  OccupancyField field;  // with visit counts
  LabeledTrajectorySet cloud;
};

// Per (l, x): Poisson(rho(l, x)) lazy walks of length l from x, via the
// arrival processes of cloud key derive_key(seed, l).  Only starts in
// B(window, l-1) can reach the window.
RhoSample sample_rho_model(const IntensityProfile& rho, WindowPtr window, std::uint64_t seed);

// Cloud key of the length-l arrival processes under `seed`.
inline std::uint64_t length_cloud_key(std::uint64_t seed, std::int64_t l) {
  return derive_key(seed, static_cast<std::uint64_t>(l));
}

// Length-L trajectories whose label lies in (lo(x), hi(x)] at their start x,
// read off the arrival processes of `cloud_key`; lo may be empty (zero).
// Starts are restricted to `starts` when given.  lo > hi raises DomainError.
RhoSample sample_label_band(std::int64_t L, const IntensityProfile::Rate& lo, const IntensityProfile::Rate& hi,
                            WindowPtr window, std::uint64_t cloud_key, std::optional<Box> starts = {});

// J^{f,L} on the window: wrapper over sample_rho_model.
OccupancyField sample_J(const IntensityProfile::Rate& f, std::int64_t L, WindowPtr window, std::uint64_t seed,
                        int dim = 3);

// Fast-forward every trajectory to its first visit of K: w -> w[H_K, l-1].
// Trajectories missing K are dropped.
LabeledTrajectorySet fast_forward(const LabeledTrajectorySet& cloud, WindowPtr K);

// P_x[H~_K > t] for x in K and t = 0..T (lazy or simple walk), by backward
// dynamic programming v_t(y) = P_y[H_K <= t] on a box around K truncated where
// the walk cannot travel within the horizon up to probability `tol`.
// Reflection symmetries of K are used to fold the grid.
class EscapeByTime {
 public:
  static EscapeByTime compute(const WalkKernel& k, const std::vector<Site>& K, std::int64_t T, double tol = 1e-13);
  const std::vector<Site>& sites() const { return sites_; }
  std::int64_t horizon() const { return T_; }
  double operator()(std::size_t i, std::int64_t t) const {
    return surv_[i * static_cast<std::size_t>(T_ + 1) + static_cast<std::size_t>(t)];
  }
  double truncation_error() const { return tol_; }

 private:
  std::vector<Site> sites_;
  std::int64_t T_ = 0;
  double tol_ = 0;
  std::vector<double> surv_;
};

enum class RerootMethod { automatic, dynamic_programming, escape_table };

// rho_K(l,x) = sum_{l'>=0} E_x[rho(l+l', X_l') 1{H~_K > l'}] 1{x in K}.
IntensityProfile reroot_profile(const IntensityProfile& rho, const std::vector<Site>& K,
                                RerootMethod method = RerootMethod::automatic);

// (1/4d) sum_{l>=0} E_x[rho(l + N*, X_l)].
double mean_occupation_density(const IntensityProfile& rho, const Site& x);

// J^{u,L} restricted to K through its rerooted intensity
// rho_K(l,x) = (4du/L) P_x[H~_K > L-l], 1 <= l <= L.
class RerootedJSampler {
 public:
  RerootedJSampler(WindowPtr K, std::int64_t L, int dim = 3);
  RerootedJSampler(WindowPtr K, std::int64_t L, const EscapeByTime& table);

  // Expected number of trajectories hitting K, per unit u.
  double mass_per_unit() const { return mass_; }
  double vacancy_probability(double u) const { return std::exp(-u * mass_); }
  // Labels are arrival times of a rate-mass process on [0,u]: thinning in u.
  OccupancyField sample(double u, std::uint64_t seed) const;
  std::int64_t length() const { return L_; }
  const WindowPtr& window() const { return window_; }

 private:
  void init(const EscapeByTime& table);
  WindowPtr window_;
  std::int64_t L_;
  WalkKernel kernel_;
  double mass_ = 0;
  std::vector<double> cdf_;  // over (site index, l)
};

}  // namespace rilab
