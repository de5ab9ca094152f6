#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "rilab/percolation.hpp"
#include "rilab/potential.hpp"
#include "rilab/truncated.hpp"

namespace rilab {

// ---------------------------------------------------------------------------
// Experiment configuration: INI text with sections [model], [observable] and
// [run].  Unknown sections or keys are errors.  Lists are comma separated;
// sites are "x y z" and patterns are sites separated by ';'.

enum class ModelId { interlacement, truncated, homogeneous, mixed, torus };
enum class ObservableId {
  vacancy,          // P[K vacant]
  occupation_mean,  // E[l_0], interlacement only
  theta,            // 0 <-> dB_R
  crossing,         // B_R <-> dB_2R
  two_point,        // 0 <-> x
  disconnection,    // (M/R)^d P[B_R not <-> dB_M]
  exist,            // Exist(R, u)
  unique,           // Unique(R, u, v)
  giant,            // |C_max| / |window| and its diameter
  covariance,       // Cov(1{x vacant}, 1{y vacant})
  fkg,              // Cov(1{K vacant}, 1{K2 vacant})
};

std::string to_string(ModelId m);
std::string to_string(ObservableId o);
ModelId model_from_string(const std::string& s);
ObservableId observable_from_string(const std::string& s);

struct ExperimentConfig {
  // [model]
  ModelId model = ModelId::interlacement;
  int d = 3;
  std::vector<double> u_grid;
  Convention convention = Convention::paper_lazy;
  Laziness laziness = Laziness::simple;  // torus kernel
  std::int64_t L = 8;
  std::int64_t N = 32;
  double gamma = 20.0;
  double gamma2 = 1.5;
  MixedVariant variant = MixedVariant::tilde;
  HalfIndex ell = HalfIndex::whole(0);
  std::int64_t source_radius = 64;
  // Lattice window B_radius; 0 derives it from the observable.
  std::int64_t window_radius = 0;

  // [observable]
  ObservableId observable = ObservableId::theta;
  std::int64_t R = 4;
  std::int64_t M = 8;
  Site x{1, 0, 0};
  Site y{0, 0, 0};
  std::vector<Site> K{Site{}};
  std::vector<Site> K2{Site{2, 0, 0}};
  double v = 0;  // unique: level of the second field, v < u
  DiameterMetric metric = DiameterMetric::linf_box;

  // [run]
  std::int64_t replicates = 100;
  std::uint64_t seed = 1;
  std::string output;
  std::int64_t max_sites = std::int64_t(1) << 27;

  void validate() const;
  // Lattice window actually sampled (box windows only).
  std::int64_t effective_window_radius() const;

  std::string to_ini() const;
  static ExperimentConfig from_ini(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  // 64-bit FNV-1a of to_ini(), hex.
  std::string hash() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Replicate r of any cell draws from derive_key(master, r): the same stream at
// every u, so cells along the u grid are pathwise coupled.
inline std::uint64_t replicate_seed(std::uint64_t master, std::int64_t r) {
  return derive_key(master, static_cast<std::uint64_t>(r));
}

// ---------------------------------------------------------------------------

struct ResultRecord {
  std::string config_hash;
  std::string observable;
  std::string model;
  std::map<std::string, double> params;  // u and observable parameters
  double estimate = 0;
  double ci_lo = 0, ci_hi = 0;
  double std_error = 0;
  std::int64_t replicates = 0;
  std::uint64_t seed = 0;
  double wall_time = 0;  // seconds, excluded from comparisons
  std::vector<std::string> bias_notes;

  std::string to_json() const;
  static ResultRecord from_json(const std::string& line);
  // Equality of everything except wall_time.
  bool same_result(const ResultRecord& o) const;
};

// Sampler of vacant fields for the configured model on its window.  Shared
// state (Green tables, equilibrium measures) is built once here.
VacantSampler make_sampler(const ExperimentConfig& cfg);

// Bias notes that apply to every record of the config at level u.
std::vector<std::string> bias_notes(const ExperimentConfig& cfg, double u);

// Runs every u of the grid with cfg.replicates replicates on `threads`
// workers.  Per-replicate outcomes land in fixed slots and are reduced in
// replicate order, so the records do not depend on the thread count.
// Budget violations raise ResourceError before any sampling.
std::vector<ResultRecord> run_sweep(const ExperimentConfig& cfg, int threads = 1);

// ---------------------------------------------------------------------------

enum class TransitionProxy { torus_giant, crossing };

struct TransitionOptions {
  TransitionProxy proxy = TransitionProxy::torus_giant;
  double threshold = 0.1;
  double u_min = 0.5, u_max = 6.0;
  double tolerance = 0.25;  // stop when u_high - u_low <= tolerance
  std::int64_t replicates = 50;
  std::int64_t max_replicates = 800;
  int max_steps = 30;
};

struct TransitionResult {
  enum class Status { ok, inconclusive, degenerate };
  Status status = Status::ok;
  double u_low = 0;   // proxy CI above the threshold
  double u_high = 0;  // proxy CI below the threshold
  std::vector<ResultRecord> evaluations;
  std::string note;
};
std::string to_string(TransitionResult::Status s);

// Bisection in u on a decreasing proxy.  This brackets a finite-size proxy
// crossing, not a critical parameter.  The config supplies the model (torus
// N or lattice R), seed and threads are passed through to run_sweep.
TransitionResult estimate_transition(const ExperimentConfig& cfg, const TransitionOptions& opt, int threads = 1);

// ---------------------------------------------------------------------------

enum class PlotKind { curve, convergence, loglog };
PlotKind plot_kind_from_string(const std::string& s);
std::string to_string(PlotKind k);

// Writes <path> (CSV) and <path>.meta.json.  curve: u,estimate,ci_lo,ci_hi;
// convergence: scale,u,estimate,ci_lo,ci_hi with scale = L or N; loglog:
// distance,estimate,ci_lo,ci_hi,log_distance,log_estimate.
void emit_plotdata(const std::vector<ResultRecord>& records, PlotKind kind, const std::string& path);

}  // namespace rilab
