#include "rilab/torus_vacant.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

namespace rilab {

std::uint64_t TorusRun::steps_at(double u_prime) const {
  require(u_prime >= 0 && u_prime <= u_, "TorusRun: level must lie in [0, u]");
  return static_cast<std::uint64_t>(std::floor(u_prime * double(volume())));
}

std::int64_t TorusRun::range_size(double u_prime) const {
  const auto t = steps_at(u_prime);
  return std::upper_bound(visit_time_.begin(), visit_time_.end(), t) - visit_time_.begin();
}

OccupancyField TorusRun::trace(double u_prime) const {
  OccupancyField f(window_);
  const auto n = range_size(u_prime);
  for (std::int64_t k = 0; k < n; ++k) f.set(visit_order_[static_cast<std::size_t>(k)]);
  return f;
}

namespace {
// Torus windows are immutable and large; runs on the same torus share one.
WindowPtr torus_window(int d, std::int64_t N) {
  static std::mutex mu;
  static std::map<std::pair<int, std::int64_t>, WindowPtr> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& w = cache[{d, N}];
  if (!w) w = make_window(Window::torus(d, N));
  return w;
}
}  // namespace

TorusRun sample_torus_vacant(std::int64_t N, int d, double u, std::uint64_t seed, const TorusRunOptions& opt) {
  require(N >= 2, "sample_torus_vacant: N must be >= 2");
  require(d >= 1 && d <= kMaxDim, "sample_torus_vacant: bad dimension");
  require(u >= 0 && std::isfinite(u), "sample_torus_vacant: u must be finite and >= 0");
  const double vol = std::pow(double(N), d);
  if (vol > double(opt.max_sites))
    throw ResourceError("sample_torus_vacant: N^d = " + std::to_string(vol) + " exceeds the site budget " +
                        std::to_string(opt.max_sites));
  TorusRun run;
  run.N_ = N;
  run.u_ = u;
  run.kernel_ = WalkKernel::torus(d, opt.laziness, N);
  run.window_ = torus_window(d, N);
  const auto V = run.window_->size();
  run.steps_ = static_cast<std::uint64_t>(std::floor(u * double(V)));
  run.first_visit_.assign(static_cast<std::size_t>(V), TorusRun::kNever);

  std::int64_t stride[kMaxDim];
  stride[d - 1] = 1;
  for (int i = d - 2; i >= 0; --i) stride[i] = stride[i + 1] * N;

  Stream rng(derive_key(seed, tag("torus")));
  std::int64_t idx = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(V)));
  std::int32_t c[kMaxDim];
  {
    const Site s = run.window_->site(idx);
    for (int i = 0; i < d; ++i) c[i] = s[i];
  }
  auto visit = [&](std::uint64_t t) {
    auto& fv = run.first_visit_[static_cast<std::size_t>(idx)];
    if (fv != TorusRun::kNever) return;
    fv = t;
    run.visit_order_.push_back(idx);
    run.visit_time_.push_back(t);
  };
  visit(0);
  const auto n32 = static_cast<std::int32_t>(N);
  for (std::uint64_t t = 1; t <= run.steps_; ++t) {
    const int m = run.kernel_.draw_move(rng);
    if (m >= 2 * d) continue;
    const int a = m / 2;
    if (m & 1) {
      if (--c[a] < 0) {
        c[a] = n32 - 1;
        idx += stride[a] * (N - 1);
      } else {
        idx -= stride[a];
      }
    } else {
      if (++c[a] == n32) {
        c[a] = 0;
        idx -= stride[a] * (N - 1);
      } else {
        idx += stride[a];
      }
    }
    visit(t);
  }
  return run;
}

namespace {
double cap_of(const std::vector<Site>& K, int d, Convention c) { return equilibrium_measure(K, d, c).capacity; }
}  // namespace

TorusCalibration calibrate_torus(const std::vector<std::int64_t>& Ns, double u, std::int64_t replicates,
                                 std::uint64_t seed, const TorusRunOptions& opt) {
  require(!Ns.empty(), "calibrate_torus: empty N list");
  require(u > 0, "calibrate_torus: u must be > 0");
  require(replicates > 0, "calibrate_torus: replicates must be > 0");
  const int d = 3;
  TorusCalibration cal;
  cal.laziness = opt.laziness;
  cal.u = u;
  cal.Ns = Ns;
  const double cap0 = cap_of({Site{}}, d, Convention::simple_lawler);
  for (std::size_t n = 0; n < Ns.size(); ++n) {
    std::int64_t hits = 0;
    for (std::int64_t r = 0; r < replicates; ++r) {
      const auto run =
          sample_torus_vacant(Ns[n], d, u, derive_key(seed, {tag("calibrate"), std::uint64_t(Ns[n]), std::uint64_t(r)}),
                              opt);
      if (run.first_visit(0) > run.steps()) ++hits;
    }
    const auto e = wilson(hits, replicates);
    cal.estimates.push_back(e);
    cal.c_by_N.push_back(-std::log(e.value) / (u * cap0));
  }
  const auto& last = cal.estimates.back();
  cal.c = cal.c_by_N.back();
  cal.c_lo = -std::log(last.ci_hi) / (u * cap0);
  cal.c_hi = -std::log(std::max(last.ci_lo, 1e-300)) / (u * cap0);
  return cal;
}

LocalLimitTable local_limit_compare(const std::vector<std::int64_t>& Ns, const std::vector<Site>& K, double u,
                                    Convention convention, std::int64_t replicates, std::uint64_t seed,
                                    const TorusCalibration& calibration, const TorusRunOptions& opt) {
  require(!Ns.empty() && !K.empty(), "local_limit_compare: empty N list or pattern");
  require(u >= 0, "local_limit_compare: u must be >= 0");
  require(replicates > 0, "local_limit_compare: replicates must be > 0");
  const int d = 3;
  const auto nmin = *std::min_element(Ns.begin(), Ns.end());
  require(4 * diameter_inf(K) <= nmin, "local_limit_compare: pattern too large for the smallest torus");
  LocalLimitTable table;
  table.calibration = calibration;
  const double cap = u > 0 ? cap_of(K, d, convention) : 0;
  const double cap_sl = u > 0 ? cap_of(K, d, Convention::simple_lawler) : 0;
  for (auto N : Ns) {
    const Window torus = Window::torus(d, N);
    std::vector<std::int64_t> idx;
    for (const auto& x : K) idx.push_back(torus.index_of(x));
    std::int64_t hits = 0;
    for (std::int64_t r = 0; r < replicates; ++r) {
      const auto run =
          sample_torus_vacant(N, d, u, derive_key(seed, {tag("local-limit"), std::uint64_t(N), std::uint64_t(r)}), opt);
      bool vacant = true;
      for (auto i : idx) vacant = vacant && run.first_visit(i) > run.steps();
      hits += vacant;
    }
    LocalLimitRow row;
    row.N = N;
    row.estimate = wilson(hits, replicates);
    row.limit = std::exp(-u * cap);
    row.calibrated = std::exp(-calibration.c * u * cap_sl);
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace rilab
