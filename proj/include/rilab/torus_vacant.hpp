#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rilab/lattice_walk.hpp"
#include "rilab/occupancy.hpp"
#include "rilab/potential.hpp"
#include "rilab/stats.hpp"

namespace rilab {

struct TorusRunOptions {
  Laziness laziness = Laziness::simple;
  // Budget on N^d; larger tori raise ResourceError before any work.
  std::int64_t max_sites = std::int64_t(1) << 27;
};

// One walk on (Z/NZ)^d from a uniform start, run for floor(u N^d) steps.
// First-visit times are kept, so the trace at any u' <= u is a prefix of the
// visit order.
class TorusRun {
 public:
  static constexpr std::uint64_t kNever = ~std::uint64_t(0);

  std::int64_t N() const { return N_; }
  int dim() const { return window_->dim(); }
  double u() const { return u_; }
  const WalkKernel& kernel() const { return kernel_; }
  const WindowPtr& window() const { return window_; }
  std::int64_t volume() const { return window_->size(); }
  std::uint64_t steps() const { return steps_; }
  std::uint64_t steps_at(double u_prime) const;
  std::int64_t start_index() const { return visit_order_.front(); }

  std::uint64_t first_visit(std::int64_t i) const { return first_visit_[static_cast<std::size_t>(i)]; }
  // Sites in order of first visit.
  const std::vector<std::int64_t>& visit_order() const { return visit_order_; }

  // Occupied = visited within floor(u' N^d) steps; u' <= u.
  OccupancyField trace(double u_prime) const;
  OccupancyField trace() const { return trace(u_); }
  std::int64_t range_size(double u_prime) const;
  std::int64_t vacant_count(double u_prime) const { return volume() - range_size(u_prime); }

 private:
  friend TorusRun sample_torus_vacant(std::int64_t, int, double, std::uint64_t, const TorusRunOptions&);
  std::int64_t N_ = 0;
  double u_ = 0;
  WalkKernel kernel_;
  WindowPtr window_;
  std::uint64_t steps_ = 0;
  std::vector<std::uint64_t> first_visit_;
  std::vector<std::int64_t> visit_order_;
  std::vector<std::uint64_t> visit_time_;  // parallel to visit_order_
};

TorusRun sample_torus_vacant(std::int64_t N, int d, double u, std::uint64_t seed, const TorusRunOptions& opt = {});

struct LocalLimitRow {
  std::int64_t N = 0;
  Estimate estimate;       // P[pi(K) vacant]
  double limit = 0;        // exp(-u cap(K)) in the requested convention
  double calibrated = 0;   // exp(-c u cap_simple_lawler(K))
};

struct TorusCalibration {
  Laziness laziness = Laziness::simple;
  double u = 0;
  std::vector<std::int64_t> Ns;
  std::vector<double> c_by_N;       // -log P_N[0 vacant] / (u cap_simple_lawler({0}))
  std::vector<Estimate> estimates;  // P_N[0 vacant]
  double c = 1;                     // value at the largest N
  double c_lo = 1, c_hi = 1;        // from the Wilson interval at the largest N
};

// Fits c in P[0 vacant] = exp(-c u cap_simple_lawler({0})).
TorusCalibration calibrate_torus(const std::vector<std::int64_t>& Ns, double u, std::int64_t replicates,
                                 std::uint64_t seed, const TorusRunOptions& opt = {});

struct LocalLimitTable {
  std::vector<LocalLimitRow> rows;
  TorusCalibration calibration;
};

// Monte Carlo P[pi(K) in V_N^u] for each N (K placed at the origin; the start
// is uniform, so the placement is immaterial), next to the capacity formula.
// K must satisfy diam(K) <= N/4 for the smallest N.
LocalLimitTable local_limit_compare(const std::vector<std::int64_t>& Ns, const std::vector<Site>& K, double u,
                                    Convention convention, std::int64_t replicates, std::uint64_t seed,
                                    const TorusCalibration& calibration, const TorusRunOptions& opt = {});

}  // namespace rilab
