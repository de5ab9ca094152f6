#include "rilab/truncated.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <unordered_set>

namespace rilab {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return -floor_div(-a, b); }

std::int64_t ipow(std::int64_t b, int e) {
  std::int64_t r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Noise

NoiseParams NoiseParams::from_log(double log_delta) {
  NoiseParams p;
  p.log_delta_ = log_delta;
  if (log_delta >= 0) {
    p.band_ = std::uint64_t(1) << 63;
  } else if (log_delta > -700) {
    // delta/2 * 2^64, floored.
    const double b = std::ldexp(std::exp(log_delta), 63);
    p.band_ = b >= 0x1.0p63 ? (std::uint64_t(1) << 63) : static_cast<std::uint64_t>(b);
  }
  return p;
}

NoiseParams NoiseParams::of(double delta) {
  if (!(delta >= 0 && delta <= 1)) throw DomainError("NoiseParams: delta must lie in [0,1]");
  return from_log(delta > 0 ? std::log(delta) : -INFINITY);
}

NoiseParams NoiseParams::at_scale(std::int64_t L) {
  require(L >= 0, "NoiseParams::at_scale: L must be >= 0");
  return from_log(-double(L));
}

OccupancyField apply_noise(const OccupancyField& I, const NoiseParams& p, const UniformField& U) {
  return apply_noise(I, [&p](const Site&) { return p; }, U);
}

OccupancyField apply_noise(const OccupancyField& I, const std::function<NoiseParams(const Site&)>& p,
                           const UniformField& U) {
  OccupancyField out(I.window_ptr());
  const Window& W = I.window();
  for (std::int64_t i = 0; i < W.size(); ++i) {
    const Site& x = W.site(i);
    const std::uint64_t band = p(x).band();
    const std::uint64_t w = U.word(x);
    if (w < band)
      out.set(i);
    else if (~w < band)
      continue;
    else if (I.occupied(i))
      out.set(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sprinkling

std::string to_string(SprinkleMode m) { return m == SprinkleMode::plain ? "plain" : "decomposed"; }

SprinkleMode sprinkle_mode_from_string(const std::string& s) {
  if (s == "plain") return SprinkleMode::plain;
  if (s == "decomposed") return SprinkleMode::decomposed;
  throw DomainError("unknown sprinkle mode '" + s + "'");
}

double SprinkleField::c_sum(int dim) {
  require(dim >= 1 && dim <= kMaxDim, "c_sum: bad dimension");
  // (2k+1)^d - (2k-1)^d = sum over odd i of 2 C(d,i) (2k)^{d-i}.
  static const auto table = [] {
    std::array<double, kMaxDim + 1> t{};
    for (int d = 1; d <= kMaxDim; ++d) {
      double binom = 1;
      for (int i = 1; i <= d; ++i) {
        binom = binom * (d - i + 1) / i;
        if (i % 2 == 1) t[d] += 2 * binom * std::ldexp(1.0, d - i) * std::riemann_zeta(double(i + 1));
      }
    }
    return t;
  }();
  return table[static_cast<std::size_t>(dim)];
}

double SprinkleField::source_mean(int dim, const Site& offset) {
  const auto k = norm_inf(offset);
  if (k == 0) return 0;
  return std::pow(double(k), -(dim + 1)) / c_sum(dim);
}

SprinkleField::SprinkleField(int dim, std::int64_t L, std::uint64_t key, SprinkleMode mode,
                             std::int64_t source_radius)
    : dim_(dim), L_(L), key_(key), mode_(mode), radius_(source_radius) {
  require(dim >= 1 && dim <= kMaxDim, "SprinkleField: bad dimension");
  require(L >= 1, "SprinkleField: L must be >= 1");
  if (mode == SprinkleMode::decomposed) {
    require(source_radius >= 1, "SprinkleField: source radius must be >= 1");
    const double c = c_sum(dim);
    double acc = 0;
    shell_mass_.resize(static_cast<std::size_t>(source_radius));
    for (std::int64_t k = 1; k <= source_radius; ++k) {
      const double n = std::pow(2.0 * k + 1, dim) - std::pow(2.0 * k - 1, dim);
      shell_mass_[static_cast<std::size_t>(k - 1)] = n * std::pow(double(k), -(dim + 1)) / c;
      acc += shell_mass_[static_cast<std::size_t>(k - 1)];
    }
    neglected_ = std::max(0.0, 1.0 - acc);
  }
}

Site SprinkleField::tile_of(const Site& x) const {
  Site m;
  for (int i = 0; i < dim_; ++i) m[i] = static_cast<std::int32_t>(floor_div(x[i] + L_, spacing()));
  return m;
}

Site SprinkleField::tile_center(const Site& m) const {
  Site c;
  for (int i = 0; i < dim_; ++i) c[i] = static_cast<std::int32_t>(m[i] * spacing());
  return c;
}

Box SprinkleField::tile_box(const Site& m) const { return Box::ball(dim_, tile_center(m), L_); }

SprinkleField::TileDraw SprinkleField::compute(const Site& m) const {
  TileDraw d;
  const std::uint64_t tk = site_tag(m);
  if (mode_ == SprinkleMode::plain) {
    Stream s(derive_key(key_, {tk, tag("plain")}));
    d.total = 1 + s.poisson(1.0);
    return d;
  }
  std::int64_t sum = 0;
  for (std::int64_t k = 1; k <= radius_; ++k) {
    Stream s(derive_key(key_, {tk, static_cast<std::uint64_t>(k)}));
    const auto n = s.poisson(shell_mass_[static_cast<std::size_t>(k - 1)]);
    for (std::int64_t c = 0; c < n; ++c) {
      // Uniform on the shell |o|_inf = k by rejection from the cube.
      Site o;
      do {
        for (int i = 0; i < dim_; ++i)
          o[i] = static_cast<std::int32_t>(static_cast<std::int64_t>(s.below(2 * std::uint64_t(k) + 1)) - k);
      } while (norm_inf(o) != k);
      d.sources.push_back({m + o, 1});
    }
    sum += n;
  }
  std::sort(d.sources.begin(), d.sources.end(), [](const Source& a, const Source& b) { return a.tile < b.tile; });
  std::vector<Source> merged;
  for (const auto& s : d.sources) {
    if (!merged.empty() && merged.back().tile == s.tile)
      merged.back().count += s.count;
    else
      merged.push_back(s);
  }
  d.sources = std::move(merged);
  d.remainder = Stream(derive_key(key_, {tk, tag("tail")})).poisson(neglected_);
  d.total = 1 + sum + d.remainder;
  return d;
}

SprinkleField::TileDraw SprinkleField::draw(const Site& m) const {
  require(mode_ == SprinkleMode::decomposed, "SprinkleField::draw: decomposed mode required");
  if (cache_) {
    auto it = cache_->find(m);
    if (it != cache_->end()) return it->second;
  }
  return compute(m);
}

std::int64_t SprinkleField::tile_value(const Site& m) const {
  if (cache_) {
    auto it = cache_->find(m);
    if (it != cache_->end()) return it->second.total;
  }
  return compute(m).total;
}

std::int64_t SprinkleField::component(const Site& target, const Site& source) const {
  if (target == source) return 1;
  if (norm_inf(source - target) > radius_) return 0;
  const auto d = draw(target);
  auto it = std::lower_bound(d.sources.begin(), d.sources.end(), source,
                             [](const Source& s, const Site& t) { return s.tile < t; });
  return (it != d.sources.end() && it->tile == source) ? it->count : 0;
}

void SprinkleField::materialize(const Box& region) {
  if (region.empty()) return;
  // Copy on write: copies of this field keep reading their own cache.
  auto next = cache_ ? std::make_shared<std::unordered_map<Site, TileDraw, SiteHash>>(*cache_)
                     : std::make_shared<std::unordered_map<Site, TileDraw, SiteHash>>();
  const Box tiles(dim_, tile_of(region.lo()), tile_of(region.hi()));
  tiles.for_each([&](const Site& m) {
    if (!next->count(m)) next->emplace(m, compute(m));
  });
  cache_ = std::move(next);
}

SprinkleField sample_sprinkle(std::int64_t L, const Window& window, std::uint64_t seed, bool decomposed,
                              std::int64_t source_radius) {
  if (L < 1) throw DomainError("sample_sprinkle: L must be >= 1");
  SprinkleField f(window.dim(), L, derive_key(seed, tag("sprinkle")),
                  decomposed ? SprinkleMode::decomposed : SprinkleMode::plain, source_radius);
  if (!window.is_torus()) f.materialize(window.bounding_box());
  return f;
}

// ---------------------------------------------------------------------------
// Box enumeration

BoxEnumeration::BoxEnumeration(int dim, std::int64_t radius, std::vector<Site> front)
    : dim_(dim), radius_(radius), front_(std::move(front)) {
  require(dim >= 1 && dim <= kMaxDim, "BoxEnumeration: bad dimension");
  require(radius >= 0, "BoxEnumeration: radius must be >= 0");
  for (const auto& f : front_) front_ranks_.push_back(standard_rank(f));
  std::sort(front_ranks_.begin(), front_ranks_.end());
  require(std::adjacent_find(front_ranks_.begin(), front_ranks_.end()) == front_ranks_.end(),
          "BoxEnumeration: front-loaded tiles must be distinct");
}

std::int64_t BoxEnumeration::standard_rank(const Site& m) const {
  const std::int64_t r = norm_inf(m);
  if (r == 0) return 0;
  require(std::pow(2.0 * r + 1, dim_) < 0x1.0p62, "BoxEnumeration: tile too far for 64-bit ranks");
  std::int64_t rank = ipow(2 * r - 1, dim_);
  bool hit = false;
  for (int i = 0; i < dim_; ++i) {
    const int rem = dim_ - i - 1;
    const std::int64_t A = ipow(2 * r + 1, rem);
    const std::int64_t B = ipow(2 * r - 1, rem);
    // Values v in [-r, m_i - 1]; only v = -r lies on the shell boundary.
    const std::int64_t n_total = std::int64_t(m[i]) + r;
    if (hit) {
      rank += n_total * A;
    } else if (n_total > 0) {
      rank += A + (n_total - 1) * (A - B);
    }
    if (std::abs(std::int64_t(m[i])) == r) hit = true;
  }
  return rank;
}

Site BoxEnumeration::standard_unrank(std::int64_t j) const {
  require(j >= 0, "BoxEnumeration: negative index");
  Site m;
  if (j == 0) return m;
  auto r = static_cast<std::int64_t>((std::pow(double(j), 1.0 / dim_) - 1) / 2);
  r = std::max<std::int64_t>(r - 1, 0);
  while (ipow(2 * r + 1, dim_) <= j) ++r;
  std::int64_t s = j - ipow(2 * r - 1, dim_);
  bool hit = false;
  for (int i = 0; i < dim_; ++i) {
    const int rem = dim_ - i - 1;
    const std::int64_t A = ipow(2 * r + 1, rem);
    const std::int64_t B = ipow(2 * r - 1, rem);
    std::int64_t v;
    if (hit) {
      v = -r + s / A;
      s %= A;
    } else if (s < A) {
      v = -r;
      hit = true;
    } else {
      s -= A;
      const std::int64_t C = A - B;
      if (s < (2 * r - 1) * C) {
        v = -r + 1 + s / C;
        s %= C;
      } else {
        s -= (2 * r - 1) * C;
        v = r;
        hit = true;
      }
    }
    m[i] = static_cast<std::int32_t>(v);
  }
  return m;
}

std::int64_t BoxEnumeration::index_of(const Site& tile) const {
  for (std::size_t p = 0; p < front_.size(); ++p)
    if (front_[p] == tile) return static_cast<std::int64_t>(p);
  const std::int64_t sr = standard_rank(tile);
  const auto before = std::lower_bound(front_ranks_.begin(), front_ranks_.end(), sr) - front_ranks_.begin();
  return static_cast<std::int64_t>(front_.size()) + sr - before;
}

Site BoxEnumeration::tile(std::int64_t j) const {
  require(j >= 0, "BoxEnumeration: negative index");
  if (j < static_cast<std::int64_t>(front_.size())) return front_[static_cast<std::size_t>(j)];
  std::int64_t s = j - static_cast<std::int64_t>(front_.size());
  for (auto f : front_ranks_)
    if (f <= s) ++s;
  return standard_unrank(s);
}

Site BoxEnumeration::tile_of(const Site& x) const {
  Site m;
  for (int i = 0; i < dim_; ++i) m[i] = static_cast<std::int32_t>(floor_div(x[i] + radius_, spacing()));
  return m;
}

Site BoxEnumeration::center(const Site& t) const {
  Site c;
  for (int i = 0; i < dim_; ++i) c[i] = static_cast<std::int32_t>(t[i] * spacing());
  return c;
}

Box BoxEnumeration::box(std::int64_t j) const { return Box::ball(dim_, center(tile(j)), radius_); }

std::vector<Site> BoxEnumeration::tiles_meeting(const Box& region) const {
  std::vector<Site> out;
  if (region.empty()) return out;
  Box(dim_, tile_of(region.lo()), tile_of(region.hi())).for_each([&](const Site& m) { out.push_back(m); });
  std::sort(out.begin(), out.end(),
            [this](const Site& a, const Site& b) { return standard_rank(a) < standard_rank(b); });
  return out;
}

// ---------------------------------------------------------------------------
// Mixed models

HalfIndex HalfIndex::from_double(double l) {
  if (std::isinf(l) && l > 0) return infinity();
  const double t = 2 * l;
  if (!(l >= 0) || t != std::floor(t) || t > 0x1.0p60) throw DomainError("half-index must lie in N/2 or be inf");
  return HalfIndex(static_cast<std::int64_t>(t));
}

HalfIndex HalfIndex::whole(std::int64_t k) {
  require(k >= 0, "HalfIndex: negative index");
  return HalfIndex(2 * k);
}

HalfIndex HalfIndex::half(std::int64_t k) {
  require(k >= 0, "HalfIndex: negative index");
  return HalfIndex(2 * k + 1);
}

std::string HalfIndex::to_string() const {
  if (is_infinite()) return "inf";
  return std::to_string(twice_ / 2) + (is_half() ? ".5" : "");
}

std::string to_string(MixedVariant v) { return v == MixedVariant::tilde ? "tilde" : "bar"; }

MixedVariant mixed_variant_from_string(const std::string& s) {
  if (s == "tilde") return MixedVariant::tilde;
  if (s == "bar") return MixedVariant::bar;
  throw DomainError("unknown mixed-model variant '" + s + "'");
}

void MixedModelConfig::validate() const {
  require(d >= 1 && d <= kMaxDim, "MixedModelConfig: bad dimension");
  require(u > 0, "MixedModelConfig: u must be > 0");
  require(L >= 4 && (L & (L - 1)) == 0, "MixedModelConfig: L must be a power of two, >= 4");
  require(gamma > 1, "MixedModelConfig: gamma must be > 1");
  require(C1 >= 0, "MixedModelConfig: C1 must be >= 0");
  require(source_radius >= 1, "MixedModelConfig: source_radius must be >= 1");
}

double MixedModelConfig::epsilon(std::int64_t scale) const {
  require(scale >= 2, "epsilon: scale must be >= 2");
  return std::pow(std::log(double(scale)), -(gamma + 5));
}

double MixedModelConfig::delta1() const { return std::pow(std::log(double(L)), -4.0); }

double MixedModelConfig::sprinkling_constant() const { return C1 > 0 ? C1 : std::pow(6.0, d); }

double MixedModelConfig::delta2() const { return delta1() / sprinkling_constant(); }

MixedStreams MixedStreams::from_seed(std::uint64_t seed) {
  MixedStreams s;
  for (std::uint64_t i = 0; i < 4; ++i) s.omega[i] = derive_key(seed, {tag("omega"), i + 1});
  s.sigma = derive_key(seed, tag("Sigma"));
  s.noise = derive_key(seed, tag("U"));
  return s;
}

InterpolationScheme::InterpolationScheme(const MixedModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  std::vector<Site> front;
  const BoxEnumeration plain(cfg_.d, cfg_.box_radius());
  if (cfg_.front_load) front = plain.tiles_meeting(*cfg_.front_load);
  boxes_ = BoxEnumeration(cfg_.d, cfg_.box_radius(), std::move(front));
  const std::int64_t a = cfg_.variant == MixedVariant::tilde ? 2 * cfg_.L : cfg_.L;
  LatticeFunction ind(Box::centered(cfg_.d, a));
  std::fill(ind.values.begin(), ind.values.end(), 1.0);
  const LatticeFunction moved = apply_transition(WalkKernel::lattice(cfg_.d, Laziness::lazy), ind, cfg_.L);
  smoothed_ = LatticeFunction(moved.box);
  moved.box.for_each([&](const Site& y) { smoothed_.at(y) = 0.5 * (ind(y) + moved(y)); });
}

double InterpolationScheme::g_base(const Site& y) const {
  if (cfg_.variant == MixedVariant::tilde) return smoothed_(y);
  return norm_inf(y) <= cfg_.L ? 1.0 : 0.0;
}

double InterpolationScheme::h_base(const Site& y) const {
  const auto n = norm_inf(y);
  const double extra = n <= 6 * cfg_.L ? cfg_.delta2() : 0.0;
  if (cfg_.variant == MixedVariant::tilde) return (n <= 2 * cfg_.L ? 1.0 : 0.0) + extra;
  return smoothed_(y) + extra;
}

template <class F>
void InterpolationScheme::for_centers_near(const Site& x, std::int64_t reach, F&& f) const {
  const std::int64_t sp = boxes_.spacing();
  Site lo, hi;
  for (int i = 0; i < cfg_.d; ++i) {
    lo[i] = static_cast<std::int32_t>(ceil_div(x[i] - reach, sp));
    hi[i] = static_cast<std::int32_t>(floor_div(x[i] + reach, sp));
  }
  Box(cfg_.d, lo, hi).for_each(f);
}

double InterpolationScheme::g(std::int64_t k, const Site& x) const {
  if (k == kInfiniteIndex) return 0;
  if (cfg_.variant == MixedVariant::bar) return boxes_.box_index(x) >= k ? 1.0 : 0.0;
  double v = 0;
  for_centers_near(x, 3 * cfg_.L, [&](const Site& t) {
    if (boxes_.index_of(t) >= k) v += g_base(x - boxes_.center(t));
  });
  return v;
}

double InterpolationScheme::h(std::int64_t k, const Site& x) const {
  if (k == 0) return 0;
  double v = 0;
  for_centers_near(x, 6 * cfg_.L, [&](const Site& t) {
    if (k == kInfiniteIndex || boxes_.index_of(t) < k) v += h_base(x - boxes_.center(t));
  });
  return v;
}

double InterpolationScheme::r(std::int64_t k, const Site& x, const SprinkleField& sigma_other) const {
  if (k == kInfiniteIndex) return 0;
  require(sigma_other.L() == other_scale(), "InterpolationScheme::r: sprinkle field at the wrong scale");
  if (boxes_.box_index(x) < k) return 0;
  return cfg_.epsilon(other_scale()) * double(sigma_other.value(x));
}

double InterpolationScheme::s(std::int64_t k, const Site& x, const SprinkleField& sigma_own) const {
  if (k == 0) return 0;
  require(sigma_own.L() == own_scale() && sigma_own.mode() == SprinkleMode::decomposed,
          "InterpolationScheme::s: decomposed sprinkle field at the box scale required");
  const double eps = cfg_.epsilon(own_scale());
  if (k == kInfiniteIndex) return eps * double(sigma_own.value(x));
  const Site target = boxes_.tile_of(x);
  std::int64_t n = boxes_.index_of(target) < k ? 1 : 0;
  for (const auto& src : sigma_own.draw(target).sources)
    if (boxes_.index_of(src.tile) < k) n += src.count;
  return eps * double(n);
}

NoiseParams InterpolationScheme::noise(std::int64_t j, HalfIndex l) const {
  const bool converted = l.is_infinite() || j < l.ceil();
  return NoiseParams::at_scale(converted ? cfg_.hs_length() : cfg_.gr_length());
}

MixedSampler::MixedSampler(MixedModelConfig cfg, WindowPtr window) : scheme_(cfg), window_(std::move(window)) {
  require(window_ && !window_->is_torus(), "MixedSampler: lattice window required");
  require(window_->dim() == scheme_.config().d, "MixedSampler: dimension mismatch");
}

std::shared_ptr<const LatticeFunction> MixedSampler::profile(char which, std::int64_t k, std::int64_t length) const {
  const auto key = std::make_tuple(which, k, length);
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  auto f = std::make_shared<LatticeFunction>(window_->bounding_box().expanded(length - 1));
  f->box.for_each([&](const Site& x) { f->at(x) = which == 'g' ? scheme_.g(k, x) : scheme_.h(k, x); });
  std::lock_guard<std::mutex> lock(mu_);
  return cache_.emplace(key, std::move(f)).first->second;
}

MixedSample MixedSampler::sample(HalfIndex l, std::uint64_t seed) const {
  return sample(l, MixedStreams::from_seed(seed));
}

MixedSample MixedSampler::sample(HalfIndex l, const MixedStreams& streams) const {
  const auto& cfg = scheme_.config();
  std::int64_t kg, kh, ks;
  if (l.is_infinite()) {
    kg = kh = ks = kInfiniteIndex;
  } else if (l.is_half()) {
    kg = kh = l.ceil();
    ks = l.ceil() - 1;
  } else {
    kg = kh = ks = l.ceil();
  }
  const std::int64_t Lg = cfg.gr_length(), Lh = cfg.hs_length();
  const Box& wb = window_->bounding_box();
  SprinkleField other = sigma_family_field(cfg.d, streams.sigma, scheme_.other_scale(), cfg.source_radius);
  SprinkleField own = sigma_family_field(cfg.d, streams.sigma, scheme_.own_scale(), cfg.source_radius);
  other.materialize(wb.expanded(Lg - 1));
  own.materialize(wb.expanded(Lh - 1));

  const double cg = 4.0 * cfg.d / double(Lg) * cfg.u;
  const double ch = 4.0 * cfg.d / double(Lh) * cfg.u;
  const auto gp = profile('g', kg, Lg);
  const auto hp = profile('h', kh, Lh);
  const IntensityProfile::Rate none;

  MixedSample out;
  out.J = sample_label_band(Lg, none, [&](const Site& x) { return cg * (*gp)(x); }, window_,
                            length_cloud_key(streams.omega[0], Lg))
              .field;
  out.J.unite(sample_label_band(Lg, none, [&](const Site& x) { return cg * scheme_.r(kg, x, other); }, window_,
                                length_cloud_key(streams.omega[1], Lg))
                  .field);
  out.J.unite(sample_label_band(Lh, none, [&](const Site& x) { return ch * (*hp)(x); }, window_,
                                length_cloud_key(streams.omega[2], Lh))
                  .field);
  // s_k is constant on the boxes.
  std::unordered_map<Site, double, SiteHash> s_tile;
  const auto& boxes = scheme_.boxes();
  auto s_rate = [&](const Site& x) {
    const Site t = boxes.tile_of(x);
    auto it = s_tile.find(t);
    if (it == s_tile.end()) it = s_tile.emplace(t, ch * scheme_.s(ks, x, own)).first;
    return it->second;
  };
  out.J.unite(sample_label_band(Lh, none, s_rate, window_,
                                length_cloud_key(streams.omega[3], Lh))
                  .field);
  out.I = apply_noise(out.J, [&](const Site& x) { return scheme_.noise(boxes.box_index(x), l); },
                      UniformField(streams.noise));
  return out;
}

OccupancyField sample_mixed(const MixedModelConfig& cfg, HalfIndex l, WindowPtr window, std::uint64_t seed) {
  return MixedSampler(cfg, std::move(window)).sample(l, seed).I;
}

// ---------------------------------------------------------------------------
// Homogeneous model

HomogeneousStreams HomogeneousStreams::from_seed(std::uint64_t seed) {
  const auto m = MixedStreams::from_seed(seed);
  return {m.omega[0], m.omega[1], m.sigma, m.noise};
}

HomogeneousStreams HomogeneousStreams::mixed_limit(const MixedStreams& m) {
  return {m.omega[2], m.omega[3], m.sigma, m.noise};
}

namespace {
void check_homogeneous(double u, std::int64_t L, const HomogeneousOptions& opt) {
  require(u >= 0, "sample_homogeneous: u must be >= 0");
  require(L >= 4 && (L & (L - 1)) == 0, "sample_homogeneous: L must be a power of two, >= 4");
  require(opt.gamma > 1, "sample_homogeneous: gamma must be > 1");
}

double epsilon_at(std::int64_t L, double gamma) { return std::pow(std::log(double(L)), -(gamma + 5)); }
}  // namespace

OccupancyField sample_homogeneous(double u, std::int64_t L, double gamma, WindowPtr window, std::uint64_t seed) {
  HomogeneousOptions opt;
  opt.gamma = gamma;
  return sample_homogeneous(u, L, std::move(window), HomogeneousStreams::from_seed(seed), opt);
}

OccupancyField sample_homogeneous(double u, std::int64_t L, WindowPtr window, const HomogeneousStreams& streams,
                                  const HomogeneousOptions& opt) {
  check_homogeneous(u, L, opt);
  require(window && !window->is_torus(), "sample_homogeneous: lattice window required");
  const int d = window->dim();
  SprinkleField sigma = sigma_family_field(d, streams.sigma, L, opt.source_radius);
  sigma.materialize(window->bounding_box().expanded(L - 1));
  const double c = 4.0 * d / double(L);
  const double eps = epsilon_at(L, opt.gamma);
  const IntensityProfile::Rate none;
  OccupancyField J = sample_label_band(L, none, [&](const Site&) { return c * u; }, window,
                                       length_cloud_key(streams.omega, L))
                         .field;
  J.unite(sample_label_band(L, none, [&](const Site& x) { return c * eps * double(sigma.value(x)); }, window,
                            length_cloud_key(streams.omega_tilde, L))
              .field);
  return apply_noise(J, NoiseParams::at_scale(L), UniformField(streams.noise));
}

HomogeneousLocalSampler::HomogeneousLocalSampler(WindowPtr K, std::int64_t L, HomogeneousOptions opt)
    : window_(K), L_(L), opt_(opt), rerooted_(K, L, K->dim()) {
  check_homogeneous(1.0, L, opt_);
}

OccupancyField HomogeneousLocalSampler::sample(double u, std::uint64_t seed) const {
  return sample(u, HomogeneousStreams::from_seed(seed));
}

OccupancyField HomogeneousLocalSampler::sample(double u, const HomogeneousStreams& streams) const {
  check_homogeneous(u, L_, opt_);
  const Window& K = *window_;
  const int d = K.dim();
  OccupancyField J = rerooted_.sample(u, streams.omega);

  SprinkleField sigma = sigma_family_field(d, streams.sigma, L_, opt_.source_radius);
  const Box reach = K.bounding_box().expanded(L_ - 1);
  sigma.materialize(reach);
  std::int64_t smax = 1;
  Box(d, sigma.tile_of(reach.lo()), sigma.tile_of(reach.hi())).for_each([&](const Site& m) {
    smax = std::max(smax, sigma.tile_value(m));
  });
  const double eps = epsilon_at(L_, opt_.gamma);
  const WalkKernel k = WalkKernel::lattice(d, Laziness::lazy);
  Stream s(derive_key(streams.omega_tilde, tag("local")));
  const auto n = s.poisson(eps * double(smax) * 4.0 * d * double(K.size()));
  std::vector<std::int64_t> hits;
  for (std::int64_t p = 0; p < n; ++p) {
    const auto i = static_cast<std::int64_t>(s.below(static_cast<std::uint64_t>(K.size())));
    const auto t = static_cast<std::int64_t>(s.below(static_cast<std::uint64_t>(L_)));
    // Reversed path from the first entrance back to the start.
    Site y = K.site(i);
    bool avoids = true;
    for (std::int64_t q = 0; q < t; ++q) {
      y += move_offset(k.draw_move(s), d);
      if (K.contains(y)) avoids = false;
    }
    const bool accept = s.uniform() * double(smax) < double(sigma.value(y));
    if (!avoids || !accept) continue;
    hits.clear();
    hits.push_back(i);
    Site x = K.site(i);
    for (std::int64_t q = t + 1; q < L_; ++q) {
      x += move_offset(k.draw_move(s), d);
      const auto j = K.index_of(x);
      if (j >= 0) hits.push_back(j);
    }
    for (auto j : hits) J.set(j);
  }
  return apply_noise(J, NoiseParams::at_scale(L_), UniformField(streams.noise));
}

// ---------------------------------------------------------------------------
// Label-interval models

OccupancyField two_sided_J(const IntensityProfile::Rate& f1, const IntensityProfile::Rate& f2, std::int64_t L,
                           WindowPtr window, std::uint64_t seed) {
  if (L < 1) throw DomainError("two_sided_J: L must be >= 1");
  require(window != nullptr, "two_sided_J: null window");
  const double c = 4.0 * window->dim() / double(L);
  IntensityProfile::Rate lo;
  if (f1) lo = [&](const Site& x) { return c * f1(x); };
  return sample_label_band(L, lo, [&](const Site& x) { return c * f2(x); }, window, length_cloud_key(seed, L))
      .field;
}

// ---------------------------------------------------------------------------
// Tubes

std::string to_string(TauReading r) { return r == TauReading::time_steps ? "time_steps" : "distinct_sites"; }

TauReading tau_reading_from_string(const std::string& s) {
  if (s == "time_steps") return TauReading::time_steps;
  if (s == "distinct_sites") return TauReading::distinct_sites;
  throw DomainError("unknown tau reading '" + s + "'");
}

void TubeSpec::validate() const {
  require(d >= 2 && d <= kMaxDim, "TubeSpec: bad dimension");
  require(axis >= 0 && axis < d, "TubeSpec: axis out of range");
  require(L >= 3, "TubeSpec: L must be >= 3");
  require(gamma2 > 0, "TubeSpec: gamma2 must be > 0");
  require(gamma2_bar == 0 || gamma2_bar >= 3 * gamma2, "TubeSpec: gamma2_bar must be >= 3 gamma2");
}

std::int64_t TubeSpec::R() const {
  return static_cast<std::int64_t>(std::floor(std::sqrt(double(L)) * std::pow(std::log(double(L)), gamma2)));
}

std::int64_t TubeSpec::r() const {
  return 4 * static_cast<std::int64_t>(
                 std::ceil(std::sqrt(double(L)) * std::pow(std::log(double(L)), -bar_exponent())));
}

std::int64_t TubeSpec::r_circ() const {
  return 4 * static_cast<std::int64_t>(std::ceil(std::sqrt(double(L)) * std::pow(std::log(double(L)), -2 * gamma2)));
}

bool TubeSpec::in_linf_tube(const Site& y, std::int64_t radius) const {
  for (int i = 0; i < d; ++i) {
    const std::int64_t a = std::int64_t(y[i]) - z[i];
    if (i == axis) {
      if (a < -radius || a > R() + radius) return false;
    } else if (std::abs(a) > radius) {
      return false;
    }
  }
  return true;
}

bool TubeSpec::in_T_circ(const Site& y) const {
  const std::int64_t rc = r_circ();
  double dist2 = 0;
  for (int i = 0; i < d; ++i) {
    const std::int64_t a = std::int64_t(y[i]) - z[i];
    const std::int64_t off = i == axis ? a - std::clamp<std::int64_t>(a, 0, R()) : a;
    dist2 += double(off) * double(off);
  }
  return dist2 <= double(rc) * double(rc);
}

Box TubeSpec::bounding_box() const {
  const std::int64_t rc = r_circ();
  Site lo, hi;
  for (int i = 0; i < d; ++i) {
    lo[i] = static_cast<std::int32_t>(z[i] - rc);
    hi[i] = static_cast<std::int32_t>(z[i] + rc + (i == axis ? R() : 0));
  }
  return Box(d, lo, hi);
}

std::int64_t TubeSpec::ordering_threshold(int d, double gamma2, double gamma2_bar) {
  TubeSpec t;
  t.d = d;
  t.gamma2 = gamma2;
  t.gamma2_bar = gamma2_bar;
  for (int n = 2; n <= 62; ++n) {
    t.L = std::int64_t(1) << n;
    const auto r = t.r(), rp = t.r_prime(), rc = t.r_circ();
    if (r < rp && rp < rc && double(rp) * std::sqrt(double(d)) <= double(rc)) return t.L;
  }
  return 0;
}

LabeledTrajectorySet tube_transform(const LabeledTrajectorySet& cloud, const TubeSpec& tube,
                                    const TubeTransformOptions& opt) {
  tube.validate();
  require(opt.cap_factor >= 1, "tube_transform: cap_factor must be >= 1");
  LabeledTrajectorySet out;
  out.window = cloud.window;
  out.kernel = cloud.kernel;
  std::unordered_set<Site, SiteHash> outside;
  for (const auto& rec : cloud.points) {
    require(rec.length != kInfiniteLength, "tube_transform: finite-length trajectories required");
    require(rec.path.length() >= rec.length, "tube_transform: trajectory records fewer steps than its length");
    if (tube.in_T_circ(rec.path.start())) continue;
    TrajectoryRecord r = rec;
    const std::int64_t l = rec.length;
    const std::int64_t cap = opt.cap_factor * l;
    std::int64_t count = 0;
    outside.clear();
    Site y = r.path.start();
    std::int64_t n = 0;
    for (;; ++n) {
      if (n >= cap)
        throw ResourceError("tube_transform: free clock exceeded " + std::to_string(cap) + " steps for a length-" +
                            std::to_string(l) + " trajectory started at " + to_string(rec.path.start(), tube.d) +
                            " (" + std::to_string(count) + " counted)");
      if (n > 0) {
        if (n >= r.path.length()) r.path.extend(cloud.kernel, std::min(cap, std::max(2 * r.path.length(), n + 1)));
        y = cloud.kernel.step(y, r.path.move(n - 1));
      }
      if (!tube.in_T_prime(y)) {
        if (opt.reading == TauReading::time_steps)
          ++count;
        else if (outside.insert(y).second)
          ++count;
      }
      if (count >= l) break;
    }
    r.length = n + 1;
    r.path.truncate(r.length);
    out.points.push_back(std::move(r));
  }
  return out;
}

}  // namespace rilab
