#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "rilab/interlacements.hpp"
#include "rilab/occupancy.hpp"
#include "rilab/rng.hpp"

namespace rilab {

// ---------------------------------------------------------------------------
// Noise operator

// Forcing probability delta, split into an "occupied" band and a "vacant"
// band of mass delta/2 each.  Bands are integer thresholds on 64-bit uniform
// words, computed from log(delta), so delta = e^{-L} is exact down to the
// resolution 2^-64 and flagged below it.
class NoiseParams {
 public:
  NoiseParams() = default;
  static NoiseParams of(double delta);
  // delta = e^{-L}.
  static NoiseParams at_scale(std::int64_t L);

  double delta() const { return std::exp(log_delta_); }
  double log_delta() const { return log_delta_; }
  // A word w forces "occupied" when w < band() and "vacant" when ~w < band().
  std::uint64_t band() const { return band_; }
  // delta > 0 but both bands are empty at 64-bit resolution.
  bool below_resolution() const { return band_ == 0 && std::isfinite(log_delta_); }

 private:
  static NoiseParams from_log(double log_delta);
  double log_delta_ = -INFINITY;
  std::uint64_t band_ = 0;
};

// i.i.d. uniform words U_x keyed by site, so any window sees the same values.
class UniformField {
 public:
  explicit UniformField(std::uint64_t key = 0) : key_(key) {}
  std::uint64_t word(const Site& x) const { return mix64(derive_key(key_, site_tag(x))); }
  double value(const Site& x) const { return double(word(x) >> 11) * 0x1.0p-53; }
  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
};

// U_x <= delta/2 forces occupied, U_x >= 1 - delta/2 forces vacant, otherwise
// the input is copied.  The output carries no visit counts.
OccupancyField apply_noise(const OccupancyField& I, const NoiseParams& p, const UniformField& U);
OccupancyField apply_noise(const OccupancyField& I, const std::function<NoiseParams(const Site&)>& p,
                           const UniformField& U);

// ---------------------------------------------------------------------------
// Sprinkling fields

enum class SprinkleMode { plain, decomposed };

std::string to_string(SprinkleMode m);
SprinkleMode sprinkle_mode_from_string(const std::string& s);

// sigma_L on the tiles B(m(2L+1), L), m in Z^d.  Plain mode: 1 + Poisson(1)
// per tile.  Decomposed mode: sigma^{B'}_B = 1 for B' = B and Poisson with
// mean |m - m'|^{-(d+1)} / c_sum otherwise.  Sources within l-inf distance
// source_radius (in tiles) are drawn shell by shell; the rest is one
// Poisson(neglected_mass()) remainder with no source attached.
// Values are a pure function of (key, tile).
class SprinkleField {
 public:
  struct Source {
    Site tile;
    std::int64_t count = 0;
  };
  struct TileDraw {
    std::vector<Source> sources;  // sorted by tile, excludes the tile itself
    std::int64_t remainder = 0;
    std::int64_t total = 1;
  };

  SprinkleField() = default;
  SprinkleField(int dim, std::int64_t L, std::uint64_t key, SprinkleMode mode = SprinkleMode::plain,
                std::int64_t source_radius = 64);

  int dim() const { return dim_; }
  std::int64_t L() const { return L_; }
  std::int64_t spacing() const { return 2 * L_ + 1; }
  SprinkleMode mode() const { return mode_; }
  std::int64_t source_radius() const { return radius_; }
  std::uint64_t key() const { return key_; }

  Site tile_of(const Site& x) const;
  Site tile_center(const Site& m) const;
  Box tile_box(const Site& m) const;

  std::int64_t tile_value(const Site& m) const;
  std::int64_t value(const Site& x) const { return tile_value(tile_of(x)); }

  // Decomposed mode only.
  TileDraw draw(const Site& m) const;
  // sigma^{B'}_B for target tile m and source tile m'; sources beyond the
  // radius read 0 (their mass sits in the remainder).
  std::int64_t component(const Site& target, const Site& source) const;
  double neglected_mass() const { return neglected_; }

  // Caches the tiles meeting `region`; later reads of those tiles are lookups.
  void materialize(const Box& region);

  // sum over z != 0 of |z|_inf^{-(d+1)}.
  static double c_sum(int dim);
  // Mean of sigma^{B'}_B at tile offset m' - m (0 for the zero offset).
  static double source_mean(int dim, const Site& offset);

 private:
  TileDraw compute(const Site& m) const;

  int dim_ = 0;
  std::int64_t L_ = 0;
  std::uint64_t key_ = 0;
  SprinkleMode mode_ = SprinkleMode::plain;
  std::int64_t radius_ = 0;
  std::vector<double> shell_mass_;  // [k-1]: Poisson mean of shell k
  double neglected_ = 0;
  std::shared_ptr<std::unordered_map<Site, TileDraw, SiteHash>> cache_;
};

SprinkleField sample_sprinkle(std::int64_t L, const Window& window, std::uint64_t seed, bool decomposed,
                              std::int64_t source_radius = 64);

// ---------------------------------------------------------------------------
// Box enumerations

// Enumeration x_0, x_1, ... of the tiles B(m(2r+1), r): increasing |m|_inf,
// then lexicographic in m, after an optional front-loaded list.
class BoxEnumeration {
 public:
  BoxEnumeration() = default;
  BoxEnumeration(int dim, std::int64_t radius, std::vector<Site> front = {});

  int dim() const { return dim_; }
  std::int64_t radius() const { return radius_; }
  std::int64_t spacing() const { return 2 * radius_ + 1; }
  const std::vector<Site>& front() const { return front_; }

  std::int64_t index_of(const Site& tile) const;
  Site tile(std::int64_t j) const;
  Site tile_of(const Site& x) const;
  Site center(const Site& tile) const;
  Box box(std::int64_t j) const;
  std::int64_t box_index(const Site& x) const { return index_of(tile_of(x)); }

  // Tiles meeting `region`, in the standard order.
  std::vector<Site> tiles_meeting(const Box& region) const;

  // Standard order without front-loading.
  std::int64_t standard_rank(const Site& tile) const;
  Site standard_unrank(std::int64_t j) const;

 private:
  int dim_ = 0;
  std::int64_t radius_ = 0;
  std::vector<Site> front_;
  std::vector<std::int64_t> front_ranks_;  // sorted standard ranks of front_
};

// ---------------------------------------------------------------------------
// Mixed models

// l in N/2 or infinity, stored as 2l.
class HalfIndex {
 public:
  static HalfIndex from_double(double l);
  static HalfIndex whole(std::int64_t k);
  static HalfIndex half(std::int64_t k);  // k + 1/2
  static HalfIndex infinity() { return HalfIndex(-1); }

  bool is_infinite() const { return twice_ < 0; }
  bool is_half() const { return twice_ >= 0 && (twice_ & 1); }
  std::int64_t twice() const { return twice_; }
  std::int64_t ceil() const { return (twice_ + 1) / 2; }
  std::string to_string() const;
  friend bool operator==(const HalfIndex&, const HalfIndex&) = default;

 private:
  explicit HalfIndex(std::int64_t t) : twice_(t) {}
  std::int64_t twice_ = 0;
};

inline constexpr std::int64_t kInfiniteIndex = -1;

enum class MixedVariant { tilde, bar };

std::string to_string(MixedVariant v);
MixedVariant mixed_variant_from_string(const std::string& s);

struct MixedModelConfig {
  MixedVariant variant = MixedVariant::tilde;
  int d = 3;
  double u = 1.0;
  std::int64_t L = 8;
  double gamma = 20.0;
  // delta_2 = delta_1 / C1; 0 selects 6^d, which bounds the number of box
  // centers within l-inf distance 6L of a site for both variants.
  double C1 = 0;
  std::int64_t source_radius = 64;
  // Boxes meeting this region are enumerated first.
  std::optional<Box> front_load;

  void validate() const;
  // (log scale)^{-(gamma+5)}, natural log.
  double epsilon(std::int64_t scale) const;
  double delta1() const;
  double delta2() const;
  double sprinkling_constant() const;
  // Radius of the enumerated boxes: 2L (tilde) or L (bar).
  std::int64_t box_radius() const { return variant == MixedVariant::tilde ? 2 * L : L; }
  // Length of the omega_1/omega_2 trajectories and of the omega_3/omega_4 ones.
  std::int64_t gr_length() const { return variant == MixedVariant::tilde ? L : 2 * L; }
  std::int64_t hs_length() const { return variant == MixedVariant::tilde ? 2 * L : L; }
};

// Key material of one sample: omega_1..omega_4, the Sigma family and U.
struct MixedStreams {
  std::uint64_t omega[4];
  std::uint64_t sigma;
  std::uint64_t noise;
  static MixedStreams from_seed(std::uint64_t seed);
};

// Scale-s field of the Sigma family.
inline SprinkleField sigma_family_field(int dim, std::uint64_t sigma_key, std::int64_t scale,
                                        std::int64_t source_radius) {
  return SprinkleField(dim, scale, derive_key(sigma_key, static_cast<std::uint64_t>(scale)),
                       SprinkleMode::decomposed, source_radius);
}

// Profiles g_k, h_k (deterministic) and r_k, s_k (functions of Sigma) of one
// variant.  k = kInfiniteIndex stands for k = infinity.
class InterpolationScheme {
 public:
  explicit InterpolationScheme(const MixedModelConfig& cfg);

  const MixedModelConfig& config() const { return cfg_; }
  const BoxEnumeration& boxes() const { return boxes_; }

  // Unshifted g and h.
  double g_base(const Site& y) const;
  double h_base(const Site& y) const;

  double g(std::int64_t k, const Site& x) const;
  double h(std::int64_t k, const Site& x) const;
  // sigma_other: Sigma field at the scale of the r profile (L tilde, 2L bar).
  double r(std::int64_t k, const Site& x, const SprinkleField& sigma_other) const;
  // sigma_own: Sigma field whose tiles are the enumerated boxes.
  double s(std::int64_t k, const Site& x, const SprinkleField& sigma_own) const;

  std::int64_t own_scale() const { return cfg_.box_radius(); }
  std::int64_t other_scale() const { return cfg_.variant == MixedVariant::tilde ? cfg_.L : 2 * cfg_.L; }

  // Noise on enumerated box j at index l.
  NoiseParams noise(std::int64_t j, HalfIndex l) const;

 private:
  template <class F>
  void for_centers_near(const Site& x, std::int64_t reach, F&& f) const;

  MixedModelConfig cfg_;
  BoxEnumeration boxes_;
  LatticeFunction smoothed_;  // ((1 + P_L)/2) 1_{B_a}, a = 2L (tilde) or L (bar)
};

struct MixedSample {
  OccupancyField J;  // before noise, with visit counts
  OccupancyField I;
};

// Samples I_l of one variant on a window.  Different l at the same seed share
// omega_1..omega_4, Sigma and U, which realises the pathwise coupling.
// Deterministic profiles are cached per (k, length).
class MixedSampler {
 public:
  MixedSampler(MixedModelConfig cfg, WindowPtr window);

  MixedSample sample(HalfIndex l, std::uint64_t seed) const;
  MixedSample sample(HalfIndex l, const MixedStreams& streams) const;

  const InterpolationScheme& scheme() const { return scheme_; }
  const WindowPtr& window() const { return window_; }

 private:
  std::shared_ptr<const LatticeFunction> profile(char which, std::int64_t k, std::int64_t length) const;

  InterpolationScheme scheme_;
  WindowPtr window_;
  mutable std::mutex mu_;
  mutable std::map<std::tuple<char, std::int64_t, std::int64_t>, std::shared_ptr<const LatticeFunction>> cache_;
};

OccupancyField sample_mixed(const MixedModelConfig& cfg, HalfIndex l, WindowPtr window, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Homogeneous model I^{u,L} = N^L(J^{u,L}(omega) u J^{eps_L sigma_L, L}(omega~))

struct HomogeneousStreams {
  std::uint64_t omega;        // cloud family of J^{u,L}
  std::uint64_t omega_tilde;  // cloud family of the sprinkled trajectories
  std::uint64_t sigma;        // Sigma family; the scale-L field is derived from it
  std::uint64_t noise;        // U
  static HomogeneousStreams from_seed(std::uint64_t seed);
  // The streams that the l = infinity mixed model shares with the homogeneous
  // model it is dominated by (omega_3, omega_4, Sigma, U).
  static HomogeneousStreams mixed_limit(const MixedStreams& m);
};

struct HomogeneousOptions {
  double gamma = 20.0;
  std::int64_t source_radius = 64;
};

// Direct sampler: every start in the cone of the window.
OccupancyField sample_homogeneous(double u, std::int64_t L, double gamma, WindowPtr window, std::uint64_t seed);
OccupancyField sample_homogeneous(double u, std::int64_t L, WindowPtr window, const HomogeneousStreams& streams,
                                  const HomogeneousOptions& opt = {});

// Local sampler for small windows and large L.  The omega part is drawn from
// its rerooted intensity; the sprinkled part by proposing (x, t) uniformly on
// K x [0, L), running the time-reversed walk t steps, and accepting when it
// avoids K and with probability sigma(start) / sigma_max.  Exact in law, but
// not pathwise equal to the direct sampler at the same seed.
class HomogeneousLocalSampler {
 public:
  HomogeneousLocalSampler(WindowPtr K, std::int64_t L, HomogeneousOptions opt = {});
  OccupancyField sample(double u, std::uint64_t seed) const;
  OccupancyField sample(double u, const HomogeneousStreams& streams) const;
  const RerootedJSampler& rerooted() const { return rerooted_; }

 private:
  WindowPtr window_;
  std::int64_t L_;
  HomogeneousOptions opt_;
  RerootedJSampler rerooted_;
};

// ---------------------------------------------------------------------------
// Label-interval models

// J^{[f1,f2],L}: trajectories with label in ((4d/L) f1(x), (4d/L) f2(x)],
// from the same arrival processes as sample_J(f, L, window, seed).
OccupancyField two_sided_J(const IntensityProfile::Rate& f1, const IntensityProfile::Rate& f2, std::int64_t L,
                           WindowPtr window, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Tubes

enum class TauReading { time_steps, distinct_sites };

std::string to_string(TauReading r);
TauReading tau_reading_from_string(const std::string& s);

// T = T^j_{r,R}(z), T' = T^j_{2r,R}(z) (l-inf), T° = l2 tube of radius r°,
// with R = floor(sqrt(L) (log L)^gamma2), r = 4 ceil(sqrt(L) (log L)^-gamma2_bar),
// r° = 4 ceil(sqrt(L) (log L)^{-2 gamma2}).
struct TubeSpec {
  int d = 3;
  Site z;
  int axis = 0;  // 0-based
  std::int64_t L = 1 << 20;
  double gamma2 = 1.5;
  double gamma2_bar = 0;  // 0 selects 3 gamma2

  void validate() const;
  double bar_exponent() const { return gamma2_bar > 0 ? gamma2_bar : 3 * gamma2; }
  std::int64_t R() const;
  std::int64_t r() const;
  std::int64_t r_prime() const { return 2 * r(); }
  std::int64_t r_circ() const;

  bool in_T(const Site& y) const { return in_linf_tube(y, r()); }
  bool in_T_prime(const Site& y) const { return in_linf_tube(y, r_prime()); }
  bool in_T_circ(const Site& y) const;
  Box bounding_box() const;  // of T°

  // Smallest L = 2^n (n <= 62) with r < r' < r° and r' sqrt(d) <= r°, which
  // gives T ⊆ T' ⊆ T°; 0 if none.
  static std::int64_t ordering_threshold(int d, double gamma2, double gamma2_bar);

 private:
  bool in_linf_tube(const Site& y, std::int64_t radius) const;
};

struct TubeTransformOptions {
  TauReading reading = TauReading::time_steps;
  std::int64_t cap_factor = 1000;  // extension beyond cap_factor * l raises ResourceError
};

// Drops trajectories starting in T°; every other trajectory of length l gets
// length tau(l, w), the first l' at which the steps n < l' outside T' (or the
// distinct sites visited outside T') number l.  Walks are extended from
// their stored streams.
LabeledTrajectorySet tube_transform(const LabeledTrajectorySet& cloud, const TubeSpec& tube,
                                    const TubeTransformOptions& opt = {});

}  // namespace rilab
