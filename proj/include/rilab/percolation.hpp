#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "rilab/occupancy.hpp"
#include "rilab/stats.hpp"

namespace rilab {

// Clusters of vacant sites under nearest-neighbour adjacency inside the
// window (wrapping on a torus window), by union-find with path halving and
// union by size.  Cluster ids are 0..count-1 in order of their smallest site
// index.
class ClusterLabeling {
 public:
  static ClusterLabeling compute(const OccupancyField& field);

  const WindowPtr& window() const { return window_; }
  std::int64_t cluster_count() const { return static_cast<std::int64_t>(sizes_.size()); }
  // -1 for occupied sites.
  std::int64_t label(std::int64_t i) const { return labels_[static_cast<std::size_t>(i)]; }
  const std::vector<std::int64_t>& labels() const { return labels_; }
  std::int64_t size(std::int64_t c) const { return sizes_[static_cast<std::size_t>(c)]; }
  bool connected(std::int64_t i, std::int64_t j) const { return label(i) >= 0 && label(i) == label(j); }
  // Largest cluster (smallest id among ties), or -1 if none.
  std::int64_t largest() const;
  std::vector<std::int64_t> members(std::int64_t c) const;

  // Largest l-inf distance between two members: the bounding-box extent on a
  // box window, wrapped distances on a torus (exact up to `exact_cap`
  // members, a double-sweep lower bound beyond).
  std::int64_t linf_diameter(std::int64_t c) const { return linf_diameter_bound(c).value; }
  const Box& bounding_box(std::int64_t c) const { return bbox_[static_cast<std::size_t>(c)]; }

  struct GraphDiameter {
    std::int64_t value = 0;
    bool exact = true;  // false: double-sweep lower bound
  };
  // Largest graph distance of the ambient lattice or torus between two
  // members (l1, wrapped on a torus).  Exact on box windows; on a torus exact
  // by all pairs when size <= exact_cap, otherwise a double-sweep lower bound.
  GraphDiameter graph_diameter(std::int64_t c, std::int64_t exact_cap = 4000) const;
  GraphDiameter linf_diameter_bound(std::int64_t c, std::int64_t exact_cap = 4000) const;
  // Largest intrinsic (path-inside-the-cluster) distance; exact by BFS from
  // every member when size <= exact_cap, otherwise a double-sweep lower bound.
  GraphDiameter chemical_diameter(std::int64_t c, std::int64_t exact_cap = 500) const;

 private:
  std::vector<std::int64_t> bfs_distances(std::int64_t source, std::int64_t& farthest) const;
  GraphDiameter torus_pairwise(std::int64_t c, bool linf, std::int64_t exact_cap) const;

  WindowPtr window_;
  std::vector<std::int64_t> labels_;
  std::vector<std::int64_t> sizes_;
  std::vector<Box> bbox_;
};

// Vacant-set samplers: field over a fixed window whose occupied sites are the
// model's trace at level u.
using VacantSampler = std::function<OccupancyField(double u, std::uint64_t seed)>;

// 0 <-> {|x|_inf = R} by a vacant path in B_R.  The field must cover B_R.
bool origin_connected_to_sphere(const OccupancyField& field, std::int64_t R);
// B_R <-> {|x|_inf = 2R} by a vacant path in B_2R.
bool crossing(const OccupancyField& field, std::int64_t R);
// 0 <-> x by a vacant path in the window.
bool two_point_connected(const OccupancyField& field, const Site& x);
// B_R not connected to {|x|_inf = M} in B_M.
bool disconnected(const OccupancyField& field, std::int64_t R, std::int64_t M);

struct EventFlags {
  bool exist = false;
  bool unique = false;
};

// linf_box: l-inf extent (wrapped on a torus); graph: ambient l1 (torus)
// distance; chemical: path length inside the cluster.
enum class DiameterMetric { linf_box, graph, chemical };
ClusterLabeling::GraphDiameter cluster_diameter(const ClusterLabeling& cl, std::int64_t c, DiameterMetric metric);

// Some cluster of V n B_R has diameter >= R/5.
bool exist_event(const OccupancyField& field, std::int64_t R, DiameterMetric metric = DiameterMetric::linf_box);

// Exist: a cluster of V^u n B_R with diameter >= R/5.  Unique: all clusters of
// V^u n B_R with diameter >= R/10 are connected in V^v n B_2R.  Requires v < u;
// field_u must cover B_R and field_v B_2R.
EventFlags exist_unique(const OccupancyField& field_u, const OccupancyField& field_v, double u, double v,
                        std::int64_t R, DiameterMetric metric = DiameterMetric::linf_box);

// Replicate r uses seed derive_key(seed, r).
Estimate theta_R(const VacantSampler& sampler, double u, std::int64_t R, std::int64_t replicates, std::uint64_t seed);
Estimate crossing_probability(const VacantSampler& sampler, double u, std::int64_t R, std::int64_t replicates,
                              std::uint64_t seed);
Estimate two_point(const VacantSampler& sampler, double u, const Site& x, std::int64_t replicates,
                   std::uint64_t seed);

struct DisconnectionEstimate {
  Estimate probability;
  double value = 0;  // (M/R)^d P
  double ci_lo = 0, ci_hi = 0;
};
DisconnectionEstimate disconnection_statistic(const VacantSampler& sampler, double u, std::int64_t R,
                                              std::int64_t M, std::int64_t replicates, std::uint64_t seed);

using FieldEvent = std::function<bool(const OccupancyField&)>;
CovarianceEstimate fkg_check(const VacantSampler& sampler, double u, const FieldEvent& A, const FieldEvent& B,
                             std::int64_t replicates, std::uint64_t seed);

// Event "all of the given sites are vacant" (increasing in the vacant set).
FieldEvent vacant_sites_event(const std::vector<Site>& sites);

}  // namespace rilab
