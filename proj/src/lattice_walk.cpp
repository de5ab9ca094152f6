#include "rilab/lattice_walk.hpp"

#include <algorithm>
#include <numeric>

namespace rilab {

const char* to_string(Laziness l) { return l == Laziness::lazy ? "lazy" : "simple"; }

Laziness laziness_from_string(const std::string& s) {
  if (s == "lazy") return Laziness::lazy;
  if (s == "simple") return Laziness::simple;
  throw DomainError("unknown laziness '" + s + "'");
}

WalkKernel WalkKernel::lattice(int dim, Laziness lazy) {
  require(dim >= 1 && dim <= kMaxDim, "kernel dimension out of range");
  WalkKernel k;
  k.dim_ = dim;
  k.lazy_ = lazy;
  return k;
}

WalkKernel WalkKernel::torus(int dim, Laziness lazy, std::int64_t side) {
  require(side >= 2, "torus side must be >= 2");
  WalkKernel k = lattice(dim, lazy);
  k.side_ = side;
  return k;
}

bool WalkKernel::valid_site(const Site& x) const {
  for (int i = dim_; i < kMaxDim; ++i)
    if (x[i] != 0) return false;
  if (!is_torus()) return true;
  for (int i = 0; i < dim_; ++i)
    if (x[i] < 0 || x[i] >= side_) return false;
  return true;
}

Site WalkKernel::reduce(Site x) const {
  if (is_torus())
    for (int i = 0; i < dim_; ++i) {
      if (x[i] < 0) x[i] = static_cast<std::int32_t>(x[i] + side_);
      else if (x[i] >= side_) x[i] = static_cast<std::int32_t>(x[i] - side_);
    }
  return x;
}

std::vector<std::pair<Site, double>> step_distribution(const WalkKernel& k, const Site& x) {
  if (!k.valid_site(x)) throw DomainError("step_distribution: invalid site " + to_string(x, k.dim()));
  std::vector<std::pair<Site, double>> out;
  if (k.is_lazy()) out.emplace_back(x, 0.5);
  for (int m = 0; m < 2 * k.dim(); ++m) {
    const Site y = k.step(x, m);
    // On a torus of side 2 the two neighbours along an axis coincide.
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& e) { return e.first == y; });
    if (it != out.end())
      it->second += k.neighbor_probability();
    else
      out.emplace_back(y, k.neighbor_probability());
  }
  return out;
}

void Trajectory::extend(const WalkKernel& k, std::int64_t new_length) {
  require(k.dim() == dim_, "Trajectory::extend: kernel dimension mismatch");
  while (length() < new_length) push_move(k.draw_move(rng_));
}

void Trajectory::truncate(std::int64_t new_length) {
  require(new_length >= 1, "Trajectory::truncate: length must be >= 1");
  if (new_length >= length()) return;
  steps_ = new_length - 1;
  packed_.resize(static_cast<std::size_t>((steps_ + 1) / 2));
  if (steps_ & 1) packed_.back() &= 0x0F;
}

std::vector<Site> Trajectory::sites(const WalkKernel& k) const {
  std::vector<Site> out;
  out.reserve(static_cast<std::size_t>(length()));
  Site x = k.reduce(start_);
  out.push_back(x);
  for (std::int64_t i = 0; i < steps_; ++i) {
    x = k.step(x, move(i));
    out.push_back(x);
  }
  return out;
}

std::vector<Site> Trajectory::range(const WalkKernel& k) const {
  auto s = sites(k);
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

Trajectory Trajectory::from_packed(int dim, const Site& start, const Stream& rng, std::int64_t steps,
                                   std::vector<std::uint8_t> packed) {
  require(static_cast<std::int64_t>(packed.size()) == (steps + 1) / 2, "Trajectory: packed size mismatch");
  Trajectory t(dim, start, rng);
  t.steps_ = steps;
  t.packed_ = std::move(packed);
  for (std::int64_t i = 0; i < steps; ++i)
    require(t.move(i) <= 2 * dim, "Trajectory: invalid move code");
  return t;
}

Trajectory sample_trajectory(const WalkKernel& k, const Site& x0, std::int64_t length, Stream rng) {
  if (length < 1) throw DomainError("sample_trajectory: length must be >= 1");
  if (!k.valid_site(x0)) throw DomainError("sample_trajectory: invalid start site");
  Trajectory t(k.dim(), x0, rng);
  t.extend(k, length);
  return t;
}

double LatticeFunction::sum() const { return std::accumulate(values.begin(), values.end(), 0.0); }

namespace {

LatticeFunction step_once(const WalkKernel& k, const LatticeFunction& f) {
  const int d = k.dim();
  const double ph = k.hold_probability(), pn = k.neighbor_probability();
  if (k.is_torus()) {
    LatticeFunction out(f.box);
    f.box.for_each([&](const Site& x) {
      double v = ph * f.values[static_cast<std::size_t>(f.box.index(x))];
      for (int m = 0; m < 2 * d; ++m) v += pn * f.values[static_cast<std::size_t>(f.box.index(k.step(x, m)))];
      out.at(x) = v;
    });
    return out;
  }
  LatticeFunction out(f.box.expanded(1));
  out.box.for_each([&](const Site& x) {
    double v = ph * f(x);
    for (int m = 0; m < 2 * d; ++m) v += pn * f(x + move_offset(m, d));
    out.at(x) = v;
  });
  return out;
}

}  // namespace

LatticeFunction apply_transition(const WalkKernel& k, const LatticeFunction& f, std::int64_t n) {
  require(n >= 0, "apply_transition: n must be >= 0");
  require(f.box.dim() == k.dim(), "apply_transition: dimension mismatch");
  if (k.is_torus()) {
    const Box full(k.dim(), Site{}, Site::filled(k.dim(), static_cast<std::int32_t>(k.side() - 1)));
    require(f.box == full, "apply_transition: torus functions must live on the full torus box");
  }
  LatticeFunction g = f;
  for (std::int64_t i = 0; i < n; ++i) g = step_once(k, g);
  return g;
}

}  // namespace rilab
