#include "rilab/potential.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_bessel.h>

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "binary_io.hpp"

namespace rilab {

const char* to_string(Convention c) { return c == Convention::paper_lazy ? "paper_lazy" : "simple_lawler"; }

Convention convention_from_string(const std::string& s) {
  if (s == "paper_lazy") return Convention::paper_lazy;
  if (s == "simple_lawler") return Convention::simple_lawler;
  throw DomainError("unknown convention '" + s + "'");
}

namespace {

struct Node {
  double s, w;
};

// Quadrature nodes for int_0^S ds: Gauss-Legendre on [0,1], then panels of
// width 1/2 in log s up to S.
std::vector<Node> green_nodes(double S) {
  using GL = boost::math::quadrature::gauss<double, 20>;
  std::vector<Node> nodes;
  auto add_panel = [&](double a, double b, bool logscale) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    const auto& x = GL::abscissa();
    const auto& w = GL::weights();
    for (std::size_t i = 0; i < x.size(); ++i)
      for (double sg : {-1.0, 1.0}) {
        const double y = c + sg * h * x[i];
        if (logscale) {
          const double s = std::exp(y);
          nodes.push_back({s, h * w[i] * s});
        } else {
          nodes.push_back({y, h * w[i]});
        }
      }
  };
  add_panel(0.0, 0.5, false);
  add_panel(0.5, 1.0, false);
  const double ymax = std::log(S);
  const int panels = static_cast<int>(std::ceil(ymax / 0.5));
  for (int p = 0; p < panels; ++p) add_panel(ymax * p / panels, ymax * (p + 1) / panels, true);
  return nodes;
}

// e^{-s} I_n(s) for n = 0..nmax.
void scaled_bessel(int nmax, double s, std::vector<double>& out) {
  out.assign(static_cast<std::size_t>(nmax + 1), 0.0);
  if (gsl_sf_bessel_In_scaled_array(0, nmax, s, out.data()) == GSL_SUCCESS) return;
  for (int n = 0; n <= nmax; ++n) {
    gsl_sf_result r;
    out[static_cast<std::size_t>(n)] = gsl_sf_bessel_In_scaled_e(n, s, &r) == GSL_SUCCESS ? r.val : 0.0;
  }
}

// int_S^inf prod_i e^{-s} I_{n_i}(s) ds from the large-s expansion
// e^{-s} I_n(s) ~ (2 pi s)^{-1/2} sum_k (-1)^k a_k(n) s^{-k}.
double asymptotic_tail(int dim, const std::array<int, kMaxDim>& n, double S) {
  constexpr int kTerms = 7;
  std::vector<double> poly(1, 1.0);
  for (int i = 0; i < dim; ++i) {
    const double mu = 4.0 * double(n[i]) * n[i];
    std::vector<double> a(kTerms, 0.0);
    a[0] = 1;
    for (int k = 1; k < kTerms; ++k) a[k] = -a[k - 1] * (mu - double(2 * k - 1) * (2 * k - 1)) / (8.0 * k);
    std::vector<double> next(std::min<std::size_t>(poly.size() + kTerms - 1, kTerms), 0.0);
    for (std::size_t p = 0; p < poly.size(); ++p)
      for (int k = 0; k < kTerms && p + k < next.size(); ++k) next[p + k] += poly[p] * a[k];
    poly = std::move(next);
  }
  const double h = 0.5 * dim;
  double total = 0;
  for (std::size_t m = 0; m < poly.size(); ++m)
    total += poly[m] * std::pow(S, 1.0 - h - double(m)) / (h + double(m) - 1.0);
  return total * std::pow(2.0 * std::numbers::pi, -h);
}

}  // namespace

std::vector<double> simple_green_many(int dim, const std::vector<Site>& offsets) {
  if (dim < 3) throw DomainError("Green function diverges for d < 3");
  require(dim <= kMaxDim, "dimension too large");
  gsl_set_error_handler_off();
  int nmax = 0;
  for (const auto& x : offsets) nmax = std::max<int>(nmax, static_cast<int>(norm_inf(x)));
  const double S = std::max(2.0e4, 500.0 * double(nmax) * nmax);
  const auto nodes = green_nodes(S);

  std::vector<std::array<int, kMaxDim>> n(offsets.size());
  for (std::size_t j = 0; j < offsets.size(); ++j)
    for (int i = 0; i < kMaxDim; ++i) n[j][i] = std::abs(offsets[j][i]);

  std::vector<double> acc(offsets.size(), 0.0), ie;
  for (const auto& node : nodes) {
    scaled_bessel(nmax, node.s, ie);
    for (std::size_t j = 0; j < offsets.size(); ++j) {
      double p = node.w;
      for (int i = 0; i < dim; ++i) p *= ie[static_cast<std::size_t>(n[j][i])];
      acc[j] += p;
    }
  }
  for (std::size_t j = 0; j < offsets.size(); ++j) acc[j] = dim * (acc[j] + asymptotic_tail(dim, n[j], S));
  return acc;
}

double simple_green(int dim, const Site& x) { return simple_green_many(dim, {x})[0]; }

GreenEstimate green_value(const WalkKernel& k, const Site& x) {
  require(!k.is_torus(), "green_value: lattice kernel required");
  const double G = simple_green(k.dim(), x);
  const double scale = k.is_lazy() ? 1.0 / (2 * k.dim()) : 1.0;
  return {G * scale, 1e-10 * scale, 0.0};
}

double green_asymptotic_constant(const WalkKernel& k) {
  const double d = k.dim();
  const double c = 0.5 * d * std::tgamma(0.5 * d - 1.0) * std::pow(std::numbers::pi, -0.5 * d);
  return k.is_lazy() ? c / (2 * d) : c;
}

GreenEstimate green_value(const WalkKernel& k, const Site& x, const MonteCarloGreenParams& mc) {
  if (k.dim() < 3) throw DomainError("Green function diverges for d < 3");
  require(mc.samples > 0, "green_value: samples must be positive");
  require(norm_inf(x) < mc.truncation_radius, "green_value: offset must lie inside the truncation box");
  const std::int64_t M = mc.truncation_radius;
  double sum = 0, sum2 = 0;
  for (std::int64_t i = 0; i < mc.samples; ++i) {
    Stream rng(derive_key(mc.seed, static_cast<std::uint64_t>(i)));
    Site y{};
    double visits = (y == x) ? 1 : 0;
    while (norm_inf(y) <= M) {
      y += move_offset(k.draw_move(rng), k.dim());
      if (y == x) visits += 1;
    }
    sum += visits;
    sum2 += visits * visits;
  }
  const double n = double(mc.samples);
  const double mean = sum / n;
  const double var = std::max(0.0, sum2 / n - mean * mean);
  const double a = k.is_lazy() ? 4.0 * k.dim() : 1.0;
  // After leaving B_M the walk is at l_inf distance >= M+1-|x| from x.
  Site far{};
  far[0] = static_cast<std::int32_t>(M + 1 - norm_inf(x));
  const double bias = green_value(k, far).value;
  return {mean / a, bias, std::sqrt(var / n) / a};
}

// ---------------------------------------------------------------------------

GreenTable GreenTable::build(const WalkKernel& k, std::int64_t radius) {
  require(!k.is_torus(), "GreenTable: lattice kernel required");
  require(radius >= 0, "GreenTable: radius must be >= 0");
  if (k.dim() < 3) throw DomainError("Green function diverges for d < 3");
  const int d = k.dim();
  GreenTable t;
  t.dim_ = d;
  t.lazy_ = k.laziness();
  t.radius_ = radius;
  t.box_ = Box::centered(d, radius);
  t.values_.assign(static_cast<std::size_t>(t.box_.size()), 0.0);

  // Values depend only on the sorted absolute coordinates.
  std::vector<Site> canon;
  Site c{};
  std::function<void(int, int)> rec = [&](int i, int from) {
    if (i == d) {
      canon.push_back(c);
      return;
    }
    for (int v = from; v <= radius; ++v) {
      c[i] = v;
      rec(i + 1, v);
    }
    c[i] = 0;
  };
  rec(0, 0);
  const auto G = simple_green_many(d, canon);
  const double scale = k.is_lazy() ? 1.0 / (2 * d) : 1.0;
  for (std::size_t j = 0; j < canon.size(); ++j)
    t.values_[static_cast<std::size_t>(t.box_.index(canon[j]))] = G[j] * scale;
  t.box_.for_each([&](const Site& x) {
    Site s{};
    for (int i = 0; i < d; ++i) s[i] = std::abs(x[i]);
    std::sort(s.c.begin(), s.c.begin() + d);
    t.values_[static_cast<std::size_t>(t.box_.index(x))] = t.values_[static_cast<std::size_t>(t.box_.index(s))];
  });
  t.error_bound_ = 1e-10 * scale;
  return t;
}

namespace {
constexpr char kGreenMagic[9] = "RILGREEN";
}

void GreenTable::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DomainError("GreenTable::save: cannot open " + path);
  io::put_magic(os, kGreenMagic);
  io::put_u32(os, kVersion);
  io::put_u32(os, static_cast<std::uint32_t>(dim_));
  io::put_u32(os, static_cast<std::uint32_t>(lazy_));
  io::put_i64(os, radius_);
  io::put_u32(os, static_cast<std::uint32_t>(method_));
  io::put_f64(os, error_bound_);
  io::put_u64(os, values_.size());
  for (double v : values_) io::put_f64(os, v);
  if (!os) throw DomainError("GreenTable::save: write failed");
}

GreenTable GreenTable::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DomainError("GreenTable::load: cannot open " + path);
  io::expect_magic(is, kGreenMagic, "GreenTable");
  if (io::get_u32(is) != kVersion) throw DomainError("GreenTable::load: unsupported version");
  GreenTable t;
  t.dim_ = static_cast<int>(io::get_u32(is));
  require(t.dim_ >= 3 && t.dim_ <= kMaxDim, "GreenTable::load: bad dimension");
  const auto lz = io::get_u32(is);
  require(lz <= 1, "GreenTable::load: bad laziness");
  t.lazy_ = static_cast<Laziness>(lz);
  t.radius_ = io::get_i64(is);
  require(t.radius_ >= 0, "GreenTable::load: bad radius");
  const auto m = io::get_u32(is);
  require(m <= 1, "GreenTable::load: bad method");
  t.method_ = static_cast<GreenMethod>(m);
  t.error_bound_ = io::get_f64(is);
  t.box_ = Box::centered(t.dim_, t.radius_);
  const auto n = io::get_u64(is);
  require(n == static_cast<std::uint64_t>(t.box_.size()), "GreenTable::load: size mismatch");
  t.values_.resize(n);
  for (auto& v : t.values_) v = io::get_f64(is);
  return t;
}

std::string GreenTable::cache_key() const {
  std::ostringstream os;
  os << "green_d" << dim_ << '_' << to_string(lazy_) << "_r" << radius_ << '_'
     << (method_ == GreenMethod::quadrature ? "quad" : "mc") << "_v" << kVersion;
  return os.str();
}

GreenTable GreenTable::cached(const WalkKernel& k, std::int64_t radius, const std::string& cache_dir) {
  GreenTable probe;
  probe.dim_ = k.dim();
  probe.lazy_ = k.laziness();
  probe.radius_ = radius;
  const auto path = std::filesystem::path(cache_dir) / (probe.cache_key() + ".bin");
  if (std::filesystem::exists(path)) {
    try {
      auto t = load(path.string());
      if (t.dim_ == k.dim() && t.lazy_ == k.laziness() && t.radius_ == radius) return t;
    } catch (const DomainError&) {
      // stale or corrupt cache: rebuild below
    }
  }
  auto t = build(k, radius);
  std::filesystem::create_directories(cache_dir);
  t.save(path.string());
  return t;
}

// ---------------------------------------------------------------------------

double EquilibriumMeasure::weight(const Site& x) const {
  auto it = std::lower_bound(sites.begin(), sites.end(), x);
  return (it != sites.end() && *it == x) ? weights[static_cast<std::size_t>(it - sites.begin())] : 0.0;
}

std::vector<double> EquilibriumMeasure::normalized() const {
  std::vector<double> out = weights;
  for (auto& w : out) w /= capacity;
  return out;
}

std::vector<Site> inner_boundary(const std::vector<Site>& K, int dim) {
  return Window::from_sites(dim, K).inner_boundary();
}

std::int64_t diameter_inf(const std::vector<Site>& K) {
  if (K.empty()) return 0;
  std::int64_t d = 0;
  for (int i = 0; i < kMaxDim; ++i) {
    std::int64_t lo = K[0][i], hi = K[0][i];
    for (const auto& s : K) {
      lo = std::min<std::int64_t>(lo, s[i]);
      hi = std::max<std::int64_t>(hi, s[i]);
    }
    d = std::max(d, hi - lo);
  }
  return d;
}

EquilibriumMeasure equilibrium_measure(const std::vector<Site>& K0, const GreenTable& green,
                                       EquilibriumSolve mode) {
  require(!K0.empty(), "equilibrium_measure: K must be nonempty");
  std::vector<Site> K = K0;
  std::sort(K.begin(), K.end());
  K.erase(std::unique(K.begin(), K.end()), K.end());
  require(diameter_inf(K) <= green.radius(), "equilibrium_measure: Green table does not cover K - K");

  if (mode == EquilibriumSolve::automatic)
    mode = K.size() <= 1000 ? EquilibriumSolve::full : EquilibriumSolve::boundary;
  const std::vector<Site> S = mode == EquilibriumSolve::full ? K : inner_boundary(K, green.dim());

  const auto n = static_cast<Eigen::Index>(S.size());
  Eigen::MatrixXd G(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      G(i, j) = green(S[static_cast<std::size_t>(i)] - S[static_cast<std::size_t>(j)]);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(G);
  const double rc = lu.rcond();
  if (!(rc >= 1e-8)) {
    std::ostringstream os;
    os << "equilibrium_measure: ill-conditioned system, rcond estimate " << rc;
    throw NumericError(os.str());
  }
  const Eigen::VectorXd e = lu.solve(Eigen::VectorXd::Ones(n));

  EquilibriumMeasure out;
  out.dim = green.dim();
  out.convention = green.convention();
  out.sites = K;
  out.weights.assign(K.size(), 0.0);
  out.rcond = rc;
  std::size_t j = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    while (K[j] != S[static_cast<std::size_t>(i)]) ++j;
    out.weights[j] = e(i);
  }
  for (double w : out.weights) out.capacity += w;
  return out;
}

EquilibriumMeasure equilibrium_measure(const std::vector<Site>& K, int dim, Convention c) {
  const auto table = GreenTable::build(WalkKernel::lattice(dim, laziness_of(c)), diameter_inf(K));
  return equilibrium_measure(K, table);
}

EscapeEstimate escape_probability_mc(const WalkKernel& k, const std::vector<Site>& K, const Site& x,
                                     std::int64_t M, std::int64_t samples, std::uint64_t seed) {
  if (samples <= 0) throw DomainError("escape_probability_mc: samples must be positive");
  if (k.dim() < 3) throw DomainError("escape_probability_mc: d >= 3 required");
  require(!k.is_torus(), "escape_probability_mc: lattice kernel required");
  const Window W = Window::from_sites(k.dim(), K);
  require(W.contains(x), "escape_probability_mc: x must lie in K");
  require(M >= 2 * diameter_inf(K), "escape_probability_mc: M must be >= 2 diam(K)");
  const Box stop = W.bounding_box().expanded(M);

  std::int64_t escaped = 0;
  for (std::int64_t i = 0; i < samples; ++i) {
    Stream rng(derive_key(seed, static_cast<std::uint64_t>(i)));
    Site y = x;
    for (;;) {
      y += move_offset(k.draw_move(rng), k.dim());
      if (W.contains(y)) break;
      if (!stop.contains(y)) {
        ++escaped;
        break;
      }
    }
  }
  EscapeEstimate r;
  r.samples = samples;
  r.truncation = M;
  r.estimate = double(escaped) / double(samples);
  r.std_error = std::sqrt(std::max(r.estimate * (1 - r.estimate), 0.25 / samples) / double(samples));
  const auto eq = equilibrium_measure(K, k.dim(), convention_of(k.laziness()));
  Site far{};
  far[0] = static_cast<std::int32_t>(M);
  r.error_bound = eq.capacity * green_value(k, far).value;
  return r;
}

std::int64_t default_truncation(const WalkKernel& k, double capacity, double tol) {
  require(k.dim() >= 3 && capacity >= 0 && tol > 0, "default_truncation: bad arguments");
  const double C = green_asymptotic_constant(k);
  return static_cast<std::int64_t>(std::ceil(std::pow(capacity * C / tol, 1.0 / (k.dim() - 2))));
}

}  // namespace rilab
