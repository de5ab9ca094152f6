#include "rilab/interlacements.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "binary_io.hpp"

namespace rilab {

// ---------------------------------------------------------------------------
// IntensityProfile

namespace {
void check_length(std::int64_t length) {
  require(length >= 1 || length == kInfiniteLength, "IntensityProfile: length must be >= 1 or infinite");
}
}  // namespace

IntensityProfile IntensityProfile::homogeneous(int dim, double u, std::int64_t L) {
  require(L >= 1, "homogeneous profile: L must be >= 1");
  require(u >= 0, "homogeneous profile: u must be >= 0");
  IntensityProfile p(dim);
  p.add_constant(L, 4.0 * dim * u / double(L));
  return p;
}

IntensityProfile IntensityProfile::truncated(int dim, std::int64_t L, Rate f, std::optional<Box> support) {
  require(L >= 1, "truncated profile: L must be >= 1");
  IntensityProfile p(dim);
  const double c = 4.0 * dim / double(L);
  p.add_function(L, [f = std::move(f), c](const Site& x) { return c * f(x); }, support);
  return p;
}

void IntensityProfile::add(std::int64_t length, const Site& x, double rate) {
  check_length(length);
  require(rate >= 0, "IntensityProfile: negative rate");
  if (rate == 0) return;
  parts_[length].entries[x] += rate;
}

void IntensityProfile::add_constant(std::int64_t length, double rate) {
  check_length(length);
  require(rate >= 0, "IntensityProfile: negative rate");
  parts_[length].constant += rate;
}

void IntensityProfile::add_function(std::int64_t length, Rate f, std::optional<Box> support) {
  check_length(length);
  parts_[length].functions.emplace_back(std::move(f), support);
}

IntensityProfile& IntensityProfile::operator+=(const IntensityProfile& o) {
  require(o.dim_ == dim_, "IntensityProfile: dimension mismatch");
  for (const auto& [l, part] : o.parts_) {
    auto& mine = parts_[l];
    for (const auto& [x, r] : part.entries) mine.entries[x] += r;
    mine.constant += part.constant;
    for (const auto& f : part.functions) mine.functions.push_back(f);
  }
  return *this;
}

double IntensityProfile::rate(std::int64_t length, const Site& x) const {
  auto it = parts_.find(length);
  if (it == parts_.end()) return 0;
  const Part& p = it->second;
  double r = p.constant;
  if (!p.entries.empty()) {
    auto e = p.entries.find(x);
    if (e != p.entries.end()) r += e->second;
  }
  for (const auto& [f, support] : p.functions) {
    if (support && !support->contains(x)) continue;
    const double v = f(x);
    if (v < 0) throw DomainError("IntensityProfile: rate function returned a negative value");
    r += v;
  }
  return r;
}

double IntensityProfile::tail_rate(std::int64_t after, const Site& x) const {
  double r = 0;
  for (auto it = parts_.upper_bound(after); it != parts_.end(); ++it) r += rate(it->first, x);
  return r;
}

std::vector<std::int64_t> IntensityProfile::lengths() const {
  std::vector<std::int64_t> out;
  for (const auto& kv : parts_) out.push_back(kv.first);
  return out;
}

std::int64_t IntensityProfile::max_length() const {
  if (has_infinite()) throw DomainError("IntensityProfile: profile has infinite-length mass");
  return parts_.empty() ? 0 : parts_.rbegin()->first;
}

bool IntensityProfile::is_sparse(std::int64_t length) const {
  auto it = parts_.find(length);
  return it == parts_.end() || (it->second.constant == 0 && it->second.functions.empty());
}

std::optional<double> IntensityProfile::constant(std::int64_t length) const {
  auto it = parts_.find(length);
  if (it == parts_.end()) return 0.0;
  if (!it->second.entries.empty() || !it->second.functions.empty()) return std::nullopt;
  return it->second.constant;
}

const std::map<Site, double>& IntensityProfile::entries(std::int64_t length) const {
  static const std::map<Site, double> empty;
  auto it = parts_.find(length);
  return it == parts_.end() ? empty : it->second.entries;
}

std::uint64_t arrival_site_key(std::uint64_t cloud, const Site& x) { return derive_key(cloud, site_tag(x)); }

// ---------------------------------------------------------------------------
// Trajectory sets and fields

namespace {
constexpr char kCloudMagic[9] = "RILCLOUD";

void write_site(std::ostream& os, const Site& s, int dim) {
  for (int i = 0; i < dim; ++i) io::put_i32(os, s[i]);
}
Site read_site(std::istream& is, int dim) {
  Site s;
  for (int i = 0; i < dim; ++i) s[i] = io::get_i32(is);
  return s;
}

// Calls f(window index) for every time step the record spends in the window.
template <class F>
void for_each_window_visit(const LabeledTrajectorySet& cloud, const TrajectoryRecord& r, F&& f) {
  if (r.length == kInfiniteLength) {
    for (auto i : r.visits) f(static_cast<std::int64_t>(i));
    return;
  }
  const Window& W = *cloud.window;
  Site x = r.path.start();
  const std::int64_t n = r.path.steps();
  for (std::int64_t t = 0;; ++t) {
    const auto i = W.index_of(x);
    if (i >= 0) f(i);
    if (t == n) break;
    x = cloud.kernel.step(x, r.path.move(t));
  }
}
}  // namespace

void LabeledTrajectorySet::serialize(std::ostream& os) const {
  const int d = kernel.dim();
  io::put_magic(os, kCloudMagic);
  io::put_u32(os, kVersion);
  io::put_u32(os, static_cast<std::uint32_t>(d));
  io::put_u32(os, static_cast<std::uint32_t>(kernel.laziness()));
  io::put_i64(os, kernel.side());
  io::put_u64(os, static_cast<std::uint64_t>(window->size()));
  for (const auto& s : window->sites()) write_site(os, s, d);
  io::put_u64(os, points.size());
  for (const auto& r : points) {
    std::ostringstream rec;
    io::put_f64(rec, r.label);
    io::put_i64(rec, r.length);
    write_site(rec, r.path.start(), d);
    io::put_u64(rec, r.path.rng().key());
    io::put_u64(rec, r.path.rng().counter());
    io::put_i64(rec, r.path.steps());
    rec.write(reinterpret_cast<const char*>(r.path.packed().data()),
              static_cast<std::streamsize>(r.path.packed().size()));
    io::put_u64(rec, r.visits.size());
    for (auto v : r.visits) io::put_varint(rec, static_cast<std::uint64_t>(v));
    const std::string bytes = rec.str();
    io::put_u64(os, bytes.size());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
}

LabeledTrajectorySet LabeledTrajectorySet::deserialize(std::istream& is) {
  io::expect_magic(is, kCloudMagic, "LabeledTrajectorySet");
  if (io::get_u32(is) != kVersion) throw DomainError("LabeledTrajectorySet: unsupported version");
  const int d = static_cast<int>(io::get_u32(is));
  require(d >= 1 && d <= kMaxDim, "LabeledTrajectorySet: bad dimension");
  const auto lz = io::get_u32(is);
  require(lz <= 1, "LabeledTrajectorySet: bad laziness");
  const auto side = io::get_i64(is);
  LabeledTrajectorySet out;
  out.kernel = side > 0 ? WalkKernel::torus(d, static_cast<Laziness>(lz), side)
                        : WalkKernel::lattice(d, static_cast<Laziness>(lz));
  const auto nsites = io::get_u64(is);
  std::vector<Site> sites(nsites);
  for (auto& s : sites) s = read_site(is, d);
  out.window = make_window(side > 0 ? Window::torus(d, side) : Window::from_sites(d, std::move(sites)));
  const auto n = io::get_u64(is);
  out.points.reserve(n);
  for (std::uint64_t k = 0; k < n; ++k) {
    const auto len = io::get_u64(is);
    std::string bytes(len, '\0');
    if (!is.read(bytes.data(), static_cast<std::streamsize>(len)))
      throw DomainError("LabeledTrajectorySet: truncated record");
    std::istringstream rec(bytes);
    TrajectoryRecord r;
    r.label = io::get_f64(rec);
    r.length = io::get_i64(rec);
    const Site start = read_site(rec, d);
    const auto key = io::get_u64(rec);
    const auto counter = io::get_u64(rec);
    const auto steps = io::get_i64(rec);
    require(steps >= 0, "LabeledTrajectorySet: bad step count");
    std::vector<std::uint8_t> packed(static_cast<std::size_t>((steps + 1) / 2));
    if (!rec.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size())))
      throw DomainError("LabeledTrajectorySet: truncated moves");
    r.path = Trajectory::from_packed(d, start, Stream(key, counter), steps, std::move(packed));
    const auto nv = io::get_u64(rec);
    r.visits.resize(nv);
    for (auto& v : r.visits) v = static_cast<std::int32_t>(io::get_varint(rec));
    out.points.push_back(std::move(r));
  }
  return out;
}

OccupationField occupation_field(const LabeledTrajectorySet& cloud, double max_label) {
  OccupationField f;
  f.window = cloud.window;
  f.visits.assign(static_cast<std::size_t>(cloud.window->size()), 0);
  f.normalizer = occupation_normalizer(convention_of(cloud.kernel.laziness()), cloud.kernel.dim());
  for (const auto& r : cloud.points) {
    if (r.label > max_label) continue;
    for_each_window_visit(cloud, r, [&](std::int64_t i) { ++f.visits[static_cast<std::size_t>(i)]; });
  }
  return f;
}

OccupancyField field_from_cloud(const LabeledTrajectorySet& cloud, double max_label) {
  OccupancyField f(cloud.window, true);
  for (const auto& r : cloud.points) {
    if (r.label > max_label) continue;
    for_each_window_visit(cloud, r, [&](std::int64_t i) { f.add_visits(i, 1); });
  }
  return f;
}

// ---------------------------------------------------------------------------
// Interlacement sampler

InterlacementSampler::InterlacementSampler(WindowPtr W, Convention c, const GreenTable& green,
                                           InterlacementOptions opt)
    : InterlacementSampler(W, c, equilibrium_measure(W->sites(), green), green, opt) {}

InterlacementSampler::InterlacementSampler(WindowPtr W, Convention c, const EquilibriumMeasure& eq,
                                           const GreenTable& green, InterlacementOptions opt)
    : window_(std::move(W)), conv_(c), eq_(eq), opt_(opt) {
  require(window_ && window_->size() > 0, "InterlacementSampler: empty window");
  require(!window_->is_torus(), "InterlacementSampler: lattice window required");
  require(eq_.convention == c, "InterlacementSampler: equilibrium measure convention mismatch");
  require(eq_.sites == window_->sites(), "InterlacementSampler: equilibrium measure is not for this window");
  require(green.laziness() == laziness_of(c) && green.dim() == window_->dim(),
          "InterlacementSampler: Green table does not match the convention");
  kernel_ = WalkKernel::lattice(window_->dim(), laziness_of(c));
  build(green);
}

InterlacementSampler InterlacementSampler::for_window(WindowPtr W, Convention c, InterlacementOptions opt) {
  const auto table =
      GreenTable::build(WalkKernel::lattice(W->dim(), laziness_of(c)), diameter_inf(W->sites()) + 2);
  return InterlacementSampler(W, c, table, opt);
}

void InterlacementSampler::build(const GreenTable& green) {
  const Window& W = *window_;
  const int d = W.dim();
  const auto n = W.size();

  start_cdf_.resize(static_cast<std::size_t>(n));
  double acc = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    acc += std::max(0.0, eq_.weights[static_cast<std::size_t>(i)]);
    start_cdf_[static_cast<std::size_t>(i)] = acc;
  }
  for (auto& c : start_cdf_) c /= acc;

  std::map<Site, std::int32_t> outside_index;
  neighbor_.resize(static_cast<std::size_t>(n * 2 * d));
  for (std::int64_t i = 0; i < n; ++i)
    for (int m = 0; m < 2 * d; ++m) {
      const Site y = W.site(i) + move_offset(m, d);
      const auto j = W.index_of(y);
      if (j >= 0) {
        neighbor_[static_cast<std::size_t>(i * 2 * d + m)] = static_cast<std::int32_t>(j);
      } else {
        auto [it, fresh] = outside_index.emplace(y, static_cast<std::int32_t>(outside_.size()));
        if (fresh) outside_.push_back(y);
        neighbor_[static_cast<std::size_t>(i * 2 * d + m)] = -(1 + it->second);
      }
    }

  if (opt_.mode == InterlacementTruncation::fixed_radius) {
    radius_ = opt_.radius > 0 ? opt_.radius : default_truncation(kernel_, eq_.capacity);
    Site far{};
    far[0] = static_cast<std::int32_t>(radius_);
    g_at_radius_ = green_value(kernel_, far).value;
    return;
  }

  // Re-entrance distribution h_y(w) = P_y[H_W < inf, X_{H_W} = w], w in dW.
  const auto boundary = W.inner_boundary();
  for (const auto& s : boundary) entry_site_.push_back(static_cast<std::int32_t>(W.index_of(s)));
  const auto E = static_cast<Eigen::Index>(boundary.size());
  const auto O = static_cast<Eigen::Index>(outside_.size());
  if (double(E) * double(O) > 2.5e8)
    throw ResourceError("InterlacementSampler: excursion table too large; use fixed_radius mode");
  require(diameter_inf(W.sites()) + 1 <= green.radius(), "InterlacementSampler: Green table too small");
  Eigen::MatrixXd G(E, E), R(E, O);
  for (Eigen::Index a = 0; a < E; ++a) {
    for (Eigen::Index b = 0; b < E; ++b)
      G(a, b) = green(boundary[static_cast<std::size_t>(a)] - boundary[static_cast<std::size_t>(b)]);
    for (Eigen::Index k = 0; k < O; ++k)
      R(a, k) = green(outside_[static_cast<std::size_t>(k)] - boundary[static_cast<std::size_t>(a)]);
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(G);
  if (!(lu.rcond() >= 1e-8)) throw NumericError("InterlacementSampler: ill-conditioned boundary Green matrix");
  const Eigen::MatrixXd H = lu.solve(R);
  entry_cdf_.resize(static_cast<std::size_t>(E * O));
  for (Eigen::Index k = 0; k < O; ++k) {
    double c = 0;
    for (Eigen::Index a = 0; a < E; ++a) {
      double h = H(a, k);
      if (h < -1e-9) throw NumericError("InterlacementSampler: negative harmonic measure");
      c += std::max(0.0, h);
      entry_cdf_[static_cast<std::size_t>(k * E + a)] = c;
    }
    if (c > 1 + 1e-9) throw NumericError("InterlacementSampler: harmonic measure exceeds one");
  }
}

double InterlacementSampler::bias_bound(double u) const {
  if (opt_.mode == InterlacementTruncation::exact_excursions) return 0;
  return u * eq_.capacity * eq_.capacity * g_at_radius_;
}

void InterlacementSampler::run_walk(Stream& rng, std::int64_t start, std::vector<std::int32_t>& visits) const {
  const int d = kernel_.dim();
  const int hold = 2 * d;
  if (opt_.mode == InterlacementTruncation::exact_excursions) {
    const auto E = entry_site_.size();
    auto i = static_cast<std::int32_t>(start);
    for (;;) {
      visits.push_back(i);
      const int m = kernel_.draw_move(rng);
      if (m == hold) continue;
      const auto nb = neighbor_[static_cast<std::size_t>(i) * hold + m];
      if (nb >= 0) {
        i = nb;
        continue;
      }
      const double* row = entry_cdf_.data() + static_cast<std::size_t>(-(nb + 1)) * E;
      const double r = rng.uniform();
      if (r >= row[E - 1]) return;
      i = entry_site_[static_cast<std::size_t>(std::upper_bound(row, row + E, r) - row)];
    }
  }
  const Window& W = *window_;
  const Box stop = W.bounding_box().expanded(radius_);
  Site x = W.site(start);
  std::int64_t i = start;
  for (;;) {
    if (i >= 0) visits.push_back(static_cast<std::int32_t>(i));
    const int m = kernel_.draw_move(rng);
    if (m == hold) continue;
    x += move_offset(m, d);
    if (!stop.contains(x)) return;
    i = W.index_of(x);
  }
}

InterlacementSample InterlacementSampler::sample(double u, std::uint64_t seed) const {
  if (u < 0) throw DomainError("sample_interlacement_window: u must be >= 0");
  InterlacementSample out;
  out.field = OccupancyField(window_, true);
  out.cloud.window = window_;
  out.cloud.kernel = kernel_;
  out.bias_bound = bias_bound(u);
  if (u == 0 || eq_.capacity <= 0) return out;
  Stream arrivals(derive_key(seed, tag("arrivals")));
  double v = 0;
  std::vector<std::int32_t> visits;
  for (std::uint64_t j = 0;; ++j) {
    v += arrivals.exponential(eq_.capacity);
    if (v > u) break;
    Stream rng(derive_key(seed, {tag("walk"), j}));
    const double r = rng.uniform();
    const auto start = static_cast<std::int64_t>(
        std::min<std::size_t>(std::upper_bound(start_cdf_.begin(), start_cdf_.end(), r) - start_cdf_.begin(),
                              start_cdf_.size() - 1));
    visits.clear();
    run_walk(rng, start, visits);
    for (auto i : visits) out.field.add_visits(i, 1);
    ++out.trajectories;
    if (opt_.keep_trajectories) {
      TrajectoryRecord rec;
      rec.label = v;
      rec.length = kInfiniteLength;
      rec.path = Trajectory(window_->dim(), window_->site(start), rng);
      rec.visits = visits;
      out.cloud.points.push_back(std::move(rec));
    }
  }
  return out;
}

InterlacementSample sample_interlacement_window(double u, Convention c, WindowPtr W, const EquilibriumMeasure& eq,
                                                std::int64_t M, std::uint64_t seed) {
  InterlacementOptions opt;
  if (M > 0) {
    opt.mode = InterlacementTruncation::fixed_radius;
    opt.radius = M;
  }
  const auto table =
      GreenTable::build(WalkKernel::lattice(W->dim(), laziness_of(c)), diameter_inf(W->sites()) + 2);
  return InterlacementSampler(W, c, eq, table, opt).sample(u, seed);
}

// ---------------------------------------------------------------------------
// Finite-length models

namespace {
// Runs the arrivals of one start site with labels in (lo, hi] and records the
// trajectories that meet the window.
class BandCollector {
 public:
  BandCollector(RhoSample& out, std::int64_t L, std::uint64_t cloud_key)
      : out_(out), W_(*out.cloud.window), k_(out.cloud.kernel), L_(L), cloud_key_(cloud_key) {}

  void run(const Site& x, double lo, double hi) {
    if (!(hi > lo) || hi <= 0) return;
    const int d = W_.dim();
    const Box& wbox = W_.bounding_box();
    const std::uint64_t sk = arrival_site_key(cloud_key_, x);
    for_each_arrival(sk, lo, hi, [&](double label, std::uint64_t j) {
      Stream ws(arrival_walk_key(sk, j));
      moves_.clear();
      hits_.clear();
      Site y = x;
      for (std::int64_t t = 0;; ++t) {
        if (wbox.contains(y)) {
          const auto i = W_.index_of(y);
          if (i >= 0) hits_.push_back(i);
        }
        if (t == L_ - 1) break;
        const int m = k_.draw_move(ws);
        moves_.push_back(static_cast<std::uint8_t>(m));
        y += move_offset(m, d);
      }
      if (hits_.empty()) return;
      for (auto i : hits_) out_.field.add_visits(i, 1);
      TrajectoryRecord rec;
      rec.label = label;
      rec.length = L_;
      rec.path = Trajectory(d, x, ws);
      for (auto m : moves_) rec.path.push_move(m);
      out_.cloud.points.push_back(std::move(rec));
    });
  }

 private:
  RhoSample& out_;
  const Window& W_;
  const WalkKernel& k_;
  std::int64_t L_;
  std::uint64_t cloud_key_;
  std::vector<std::uint8_t> moves_;
  std::vector<std::int64_t> hits_;
};

RhoSample empty_sample(const WindowPtr& window) {
  require(window && !window->is_torus(), "finite-length sampler: lattice window required");
  RhoSample out;
  out.field = OccupancyField(window, true);
  out.cloud.window = window;
  out.cloud.kernel = WalkKernel::lattice(window->dim(), Laziness::lazy);
  return out;
}
}  // namespace

RhoSample sample_rho_model(const IntensityProfile& rho, WindowPtr window, std::uint64_t seed) {
  if (rho.has_infinite()) throw DomainError("sample_rho_model: infinite-length mass; use the interlacement sampler");
  RhoSample out = empty_sample(window);
  require(rho.dim() == window->dim(), "sample_rho_model: dimension mismatch");
  const Box& wbox = window->bounding_box();
  for (const auto L : rho.lengths()) {
    BandCollector c(out, L, length_cloud_key(seed, L));
    const Box cone = wbox.expanded(L - 1);
    if (rho.is_sparse(L)) {
      for (const auto& [x, r] : rho.entries(L))
        if (cone.contains(x)) c.run(x, 0.0, r);
    } else {
      cone.for_each([&](const Site& x) { c.run(x, 0.0, rho.rate(L, x)); });
    }
  }
  return out;
}

RhoSample sample_label_band(std::int64_t L, const IntensityProfile::Rate& lo, const IntensityProfile::Rate& hi,
                            WindowPtr window, std::uint64_t cloud_key, std::optional<Box> starts) {
  require(L >= 1, "sample_label_band: L must be >= 1");
  RhoSample out = empty_sample(window);
  Box cone = window->bounding_box().expanded(L - 1);
  if (starts) cone = cone.intersect(*starts);
  BandCollector c(out, L, cloud_key);
  cone.for_each([&](const Site& x) {
    const double a = lo ? lo(x) : 0.0;
    const double b = hi(x);
    if (a > b) throw DomainError("sample_label_band: lower rate exceeds upper rate at " + to_string(x, window->dim()));
    c.run(x, a, b);
  });
  return out;
}

OccupancyField sample_J(const IntensityProfile::Rate& f, std::int64_t L, WindowPtr window, std::uint64_t seed,
                        int dim) {
  if (L < 1) throw DomainError("sample_J: L must be >= 1");
  return sample_rho_model(IntensityProfile::truncated(dim, L, f), std::move(window), seed).field;
}

LabeledTrajectorySet fast_forward(const LabeledTrajectorySet& cloud, WindowPtr K) {
  LabeledTrajectorySet out;
  out.window = K;
  out.kernel = cloud.kernel;
  for (const auto& r : cloud.points) {
    require(r.length != kInfiniteLength, "fast_forward: finite-length trajectories required");
    Site x = r.path.start();
    std::int64_t t = 0;
    const std::int64_t n = r.path.steps();
    while (!K->contains(x) && t < n) x = cloud.kernel.step(x, r.path.move(t++));
    if (!K->contains(x)) continue;
    TrajectoryRecord ff;
    ff.label = r.label;
    ff.length = r.length - t;
    ff.path = Trajectory(r.path.dim(), x, r.path.rng());
    for (std::int64_t s = t; s < n; ++s) ff.path.push_move(r.path.move(s));
    out.points.push_back(std::move(ff));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Escape-by-time table

EscapeByTime EscapeByTime::compute(const WalkKernel& k, const std::vector<Site>& K0, std::int64_t T, double tol) {
  require(!k.is_torus(), "EscapeByTime: lattice kernel required");
  require(T >= 0 && !K0.empty() && tol > 0, "EscapeByTime: bad arguments");
  const int d = k.dim();
  std::vector<Site> K = K0;
  std::sort(K.begin(), K.end());
  K.erase(std::unique(K.begin(), K.end()), K.end());
  const Window Kw = Window::from_sites(d, K);
  const Box& kb = Kw.bounding_box();

  // Radius beyond which the walk cannot travel within T steps, up to tol
  // (Bernstein bound for each coordinate of the walk's running maximum).
  const double sigma2 = k.is_lazy() ? 1.0 / (2 * d) : 1.0 / d;
  const double c = std::log(2.0 * d / tol);
  std::int64_t R = static_cast<std::int64_t>(
                       std::ceil(0.5 * (2 * c / 3 + std::sqrt(4 * c * c / 9 + 8 * c * double(T) * sigma2)))) +
                   1;
  R = std::min<std::int64_t>(R, std::max<std::int64_t>(T, 1));

  struct Axis {
    std::int64_t first = 0, n = 0, c = 0;
    bool folded = false;
    std::vector<std::int32_t> nbm, nbp;
    std::int64_t pos(std::int64_t y) const {
      if (folded && 2 * y < c) y = c - y;
      const auto p = y - first;
      return (p >= 0 && p < n) ? p : -1;
    }
  };
  std::vector<Axis> ax(static_cast<std::size_t>(d));
  for (int a = 0; a < d; ++a) {
    Axis& A = ax[static_cast<std::size_t>(a)];
    const std::int64_t lo = kb.lo()[a], hi = kb.hi()[a];
    A.c = lo + hi;
    A.folded = std::all_of(K.begin(), K.end(), [&](Site s) {
      s[a] = static_cast<std::int32_t>(A.c - s[a]);
      return Kw.contains(s);
    });
    A.first = A.folded ? (A.c >= 0 ? (A.c + 1) / 2 : -((-A.c) / 2)) : lo - R;
    A.n = hi + R - A.first + 1;
    A.nbm.resize(static_cast<std::size_t>(A.n));
    A.nbp.resize(static_cast<std::size_t>(A.n));
    for (std::int64_t p = 0; p < A.n; ++p) {
      A.nbm[static_cast<std::size_t>(p)] = static_cast<std::int32_t>(A.pos(A.first + p - 1));
      A.nbp[static_cast<std::size_t>(p)] = static_cast<std::int32_t>(A.pos(A.first + p + 1));
    }
  }
  std::vector<std::int64_t> stride(static_cast<std::size_t>(d));
  std::int64_t total = 1;
  for (int a = d - 1; a >= 0; --a) {
    stride[static_cast<std::size_t>(a)] = total;
    total *= ax[static_cast<std::size_t>(a)].n;
  }
  if (total > 400'000'000) throw ResourceError("EscapeByTime: grid too large");
  auto grid_index = [&](const Site& s) {
    std::int64_t q = 0;
    for (int a = 0; a < d; ++a) q += ax[static_cast<std::size_t>(a)].pos(s[a]) * stride[static_cast<std::size_t>(a)];
    return q;
  };
  std::vector<std::int64_t> kpos;
  for (const auto& s : K) kpos.push_back(grid_index(s));
  std::sort(kpos.begin(), kpos.end());
  kpos.erase(std::unique(kpos.begin(), kpos.end()), kpos.end());

  const double ph = k.hold_probability(), pn = k.neighbor_probability();
  std::vector<double> v(static_cast<std::size_t>(total), 0.0), w(static_cast<std::size_t>(total), 0.0);
  for (auto q : kpos) v[static_cast<std::size_t>(q)] = 1.0;

  // (P v)(site) at a grid position given per-axis positions.
  std::vector<std::int64_t> p(static_cast<std::size_t>(d));
  auto apply_at = [&](const std::vector<double>& f, const Site& s) {
    double acc = 0;
    const auto q = grid_index(s);
    for (int a = 0; a < d; ++a) {
      const Axis& A = ax[static_cast<std::size_t>(a)];
      const auto pa = A.pos(s[a]);
      const auto st = stride[static_cast<std::size_t>(a)];
      if (A.nbm[static_cast<std::size_t>(pa)] >= 0) acc += f[static_cast<std::size_t>(q + (A.nbm[static_cast<std::size_t>(pa)] - pa) * st)];
      if (A.nbp[static_cast<std::size_t>(pa)] >= 0) acc += f[static_cast<std::size_t>(q + (A.nbp[static_cast<std::size_t>(pa)] - pa) * st)];
    }
    return ph * f[static_cast<std::size_t>(q)] + pn * acc;
  };

  EscapeByTime out;
  out.sites_ = K;
  out.T_ = T;
  out.tol_ = tol;
  const auto T1 = static_cast<std::size_t>(T + 1);
  out.surv_.assign(K.size() * T1, 1.0);

  std::vector<std::int64_t> plo(static_cast<std::size_t>(d)), phi(static_cast<std::size_t>(d));
  std::vector<std::int64_t> outer_off;
  for (std::int64_t t = 1; t <= T; ++t) {
    for (std::size_t i = 0; i < K.size(); ++i) out.surv_[i * T1 + static_cast<std::size_t>(t)] = 1.0 - apply_at(v, K[i]);
    if (t == T) break;
    // v_t = P v_{t-1} off K, on the positions within distance min(t, R) of K.
    const std::int64_t r = std::min(t, R);
    for (int a = 0; a < d; ++a) {
      const Axis& A = ax[static_cast<std::size_t>(a)];
      const std::int64_t lo = kb.lo()[a] - r, hi = kb.hi()[a] + r;
      plo[static_cast<std::size_t>(a)] = std::max<std::int64_t>(0, (A.folded ? A.first : lo) - A.first);
      phi[static_cast<std::size_t>(a)] = std::min<std::int64_t>(A.n - 1, hi - A.first);
    }
    for (int a = 0; a < d; ++a) p[static_cast<std::size_t>(a)] = plo[static_cast<std::size_t>(a)];
    const Axis& IA = ax[static_cast<std::size_t>(d - 1)];
    const auto ilo = plo[static_cast<std::size_t>(d - 1)], ihi = phi[static_cast<std::size_t>(d - 1)];
    for (;;) {
      std::int64_t q0 = 0;
      outer_off.clear();
      for (int a = 0; a < d - 1; ++a) {
        const Axis& A = ax[static_cast<std::size_t>(a)];
        const auto pa = p[static_cast<std::size_t>(a)];
        const auto st = stride[static_cast<std::size_t>(a)];
        q0 += pa * st;
        if (A.nbm[static_cast<std::size_t>(pa)] >= 0) outer_off.push_back((A.nbm[static_cast<std::size_t>(pa)] - pa) * st);
        if (A.nbp[static_cast<std::size_t>(pa)] >= 0) outer_off.push_back((A.nbp[static_cast<std::size_t>(pa)] - pa) * st);
      }
      const double* V = v.data();
      double* Wt = w.data();
      for (std::int64_t pi = ilo; pi <= ihi; ++pi) {
        const std::int64_t q = q0 + pi;
        double s = 0;
        for (auto off : outer_off) s += V[q + off];
        const auto im = IA.nbm[static_cast<std::size_t>(pi)], ip = IA.nbp[static_cast<std::size_t>(pi)];
        if (im >= 0) s += V[q0 + im];
        if (ip >= 0) s += V[q0 + ip];
        Wt[q] = ph * V[q] + pn * s;
      }
      int a = d - 2;
      for (; a >= 0; --a) {
        if (p[static_cast<std::size_t>(a)] < phi[static_cast<std::size_t>(a)]) {
          ++p[static_cast<std::size_t>(a)];
          break;
        }
        p[static_cast<std::size_t>(a)] = plo[static_cast<std::size_t>(a)];
      }
      if (a < 0) break;
    }
    for (auto q : kpos) w[static_cast<std::size_t>(q)] = 1.0;
    std::swap(v, w);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rerooting and occupation density

IntensityProfile reroot_profile(const IntensityProfile& rho, const std::vector<Site>& K0, RerootMethod method) {
  const int d = rho.dim();
  const std::int64_t Lmax = rho.max_length();
  std::vector<Site> K = K0;
  std::sort(K.begin(), K.end());
  K.erase(std::unique(K.begin(), K.end()), K.end());
  IntensityProfile out(d);
  if (Lmax == 0 || K.empty()) return out;
  const auto lengths = rho.lengths();
  const WalkKernel k = WalkKernel::lattice(d, Laziness::lazy);

  bool all_constant = true;
  for (auto L : lengths) all_constant = all_constant && rho.constant(L).has_value();
  if (method == RerootMethod::automatic)
    method = all_constant ? RerootMethod::escape_table : RerootMethod::dynamic_programming;

  if (method == RerootMethod::escape_table) {
    require(all_constant, "reroot_profile: escape_table needs spatially constant rates");
    const auto table = EscapeByTime::compute(k, K, Lmax - 1);
    for (std::size_t i = 0; i < K.size(); ++i)
      for (std::int64_t l = 1; l <= Lmax; ++l) {
        double r = 0;
        for (auto L : lengths)
          if (L >= l) r += *rho.constant(L) * table(i, L - l);
        out.add(l, K[i], r);
      }
    return out;
  }

  const Window Kw = Window::from_sites(d, K);
  for (const auto& x : K) {
    std::vector<double> acc(static_cast<std::size_t>(Lmax + 1), 0.0);
    LatticeFunction q(Box::ball(d, x, 0));
    q.at(x) = 1.0;
    for (std::int64_t lp = 0; lp < Lmax; ++lp) {
      for (auto L : lengths) {
        if (L <= lp) continue;
        double s = 0;
        if (rho.is_sparse(L)) {
          for (const auto& [y, r] : rho.entries(L)) s += q(y) * r;
        } else {
          std::int64_t idx = 0;
          q.box.for_each([&](const Site& y) {
            const double qy = q.values[static_cast<std::size_t>(idx++)];
            if (qy != 0) s += qy * rho.rate(L, y);
          });
        }
        acc[static_cast<std::size_t>(L - lp)] += s;
      }
      if (lp + 1 == Lmax) break;
      q = apply_transition(k, q, 1);
      std::int64_t idx = 0;
      q.box.for_each([&](const Site& y) {
        if (Kw.contains(y)) q.values[static_cast<std::size_t>(idx)] = 0;
        ++idx;
      });
    }
    for (std::int64_t l = 1; l <= Lmax; ++l) out.add(l, x, acc[static_cast<std::size_t>(l)]);
  }
  return out;
}

double mean_occupation_density(const IntensityProfile& rho, const Site& x) {
  const int d = rho.dim();
  const std::int64_t Lmax = rho.max_length();
  if (Lmax == 0) return 0;
  const auto lengths = rho.lengths();
  bool all_constant = true;
  for (auto L : lengths) all_constant = all_constant && rho.constant(L).has_value();
  if (all_constant) {
    double s = 0;
    for (auto L : lengths) s += double(L) * *rho.constant(L);
    return s / (4.0 * d);
  }
  const WalkKernel k = WalkKernel::lattice(d, Laziness::lazy);
  LatticeFunction p(Box::ball(d, x, 0));
  p.at(x) = 1.0;
  double total = 0;
  for (std::int64_t l = 0; l < Lmax; ++l) {
    for (auto L : lengths) {
      if (L <= l) continue;
      if (rho.is_sparse(L)) {
        for (const auto& [y, r] : rho.entries(L)) total += p(y) * r;
      } else {
        std::int64_t idx = 0;
        p.box.for_each([&](const Site& y) {
          const double py = p.values[static_cast<std::size_t>(idx++)];
          if (py != 0) total += py * rho.rate(L, y);
        });
      }
    }
    if (l + 1 < Lmax) p = apply_transition(k, p, 1);
  }
  return total / (4.0 * d);
}

// ---------------------------------------------------------------------------
// Rerooted J sampler

RerootedJSampler::RerootedJSampler(WindowPtr K, std::int64_t L, int dim)
    : window_(std::move(K)), L_(L), kernel_(WalkKernel::lattice(dim, Laziness::lazy)) {
  require(L >= 1, "RerootedJSampler: L must be >= 1");
  init(EscapeByTime::compute(kernel_, window_->sites(), L - 1));
}

RerootedJSampler::RerootedJSampler(WindowPtr K, std::int64_t L, const EscapeByTime& table)
    : window_(std::move(K)), L_(L) {
  require(L >= 1, "RerootedJSampler: L must be >= 1");
  init(table);
}

void RerootedJSampler::init(const EscapeByTime& table) {
  kernel_ = WalkKernel::lattice(window_->dim(), Laziness::lazy);
  require(table.sites() == window_->sites(), "RerootedJSampler: table is for a different set");
  require(table.horizon() >= L_ - 1, "RerootedJSampler: table horizon too short");
  const double c = 4.0 * window_->dim() / double(L_);
  cdf_.resize(window_->sites().size() * static_cast<std::size_t>(L_));
  double acc = 0;
  for (std::size_t i = 0; i < window_->sites().size(); ++i)
    for (std::int64_t l = 1; l <= L_; ++l) {
      acc += c * table(i, L_ - l);
      cdf_[i * static_cast<std::size_t>(L_) + static_cast<std::size_t>(l - 1)] = acc;
    }
  mass_ = acc;
}

OccupancyField RerootedJSampler::sample(double u, std::uint64_t seed) const {
  require(u >= 0, "RerootedJSampler: u must be >= 0");
  OccupancyField f(window_);
  if (u == 0 || mass_ <= 0) return f;
  const Window& W = *window_;
  const int d = W.dim();
  Stream arrivals(derive_key(seed, tag("arrivals")));
  double v = 0;
  for (std::uint64_t j = 0;; ++j) {
    v += arrivals.exponential(mass_);
    if (v > u) break;
    Stream rng(derive_key(seed, {tag("walk"), j}));
    const double r = rng.uniform() * mass_;
    const auto cell = static_cast<std::size_t>(
        std::min<std::ptrdiff_t>(std::upper_bound(cdf_.begin(), cdf_.end(), r) - cdf_.begin(),
                                 static_cast<std::ptrdiff_t>(cdf_.size()) - 1));
    const auto i = static_cast<std::int64_t>(cell / static_cast<std::size_t>(L_));
    const auto l = static_cast<std::int64_t>(cell % static_cast<std::size_t>(L_)) + 1;
    Site x = W.site(i);
    f.set(i);
    for (std::int64_t t = 1; t < l; ++t) {
      x += move_offset(kernel_.draw_move(rng), d);
      const auto k = W.index_of(x);
      if (k >= 0) f.set(k);
    }
  }
  return f;
}

}  // namespace rilab
