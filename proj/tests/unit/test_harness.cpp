#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "rilab/harness.hpp"
#include "rilab/stats.hpp"

using namespace rilab;

namespace {

ExperimentConfig theta_config() {
  ExperimentConfig c;
  c.model = ModelId::interlacement;
  c.u_grid = {0.5, 1.0, 2.0};
  c.observable = ObservableId::theta;
  c.R = 3;
  c.replicates = 60;
  c.seed = 17;
  return c;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("rilab_test_" + name)).string();
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream f(path);
  std::vector<std::string> out;
  for (std::string l; std::getline(f, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("config round trips through the text format") {
  ExperimentConfig c;
  c.model = ModelId::mixed;
  c.d = 3;
  c.u_grid = {0.1, 1.0 / 3, 2.5e-7};
  c.convention = Convention::simple_lawler;
  c.laziness = Laziness::lazy;
  c.L = 16;
  c.N = 24;
  c.gamma = 7.25;
  c.gamma2 = 1.75;
  c.variant = MixedVariant::bar;
  c.ell = HalfIndex::half(3);
  c.source_radius = 12;
  c.window_radius = 9;
  c.observable = ObservableId::fkg;
  c.R = 5;
  c.M = 40;
  c.x = Site{3, -1, 0};
  c.y = Site{0, 2, 1};
  c.K = {Site{}, Site{1, 0, 0}};
  c.K2 = {Site{4, 0, 0}, Site{4, 1, 0}, Site{4, 1, 1}};
  c.v = 0.3;
  c.metric = DiameterMetric::chemical;
  c.replicates = 123;
  c.seed = 0xFFFFFFFFFFFFFFFFULL;
  c.output = "out/records.jsonl";
  c.max_sites = 1000000;
  const auto back = ExperimentConfig::from_ini(c.to_ini());
  CHECK(back == c);
  CHECK(back.hash() == c.hash());
  CHECK(back.to_ini() == c.to_ini());
  c.seed -= 1;
  CHECK(back.hash() != c.hash());

  ExperimentConfig inf;
  inf.ell = HalfIndex::infinity();
  CHECK(ExperimentConfig::from_ini(inf.to_ini()) == inf);
}

TEST_CASE("config parsing is strict") {
  CHECK_THROWS_AS(ExperimentConfig::from_ini("[model]\nid = torus\nbogus = 1\n"), DomainError);
  CHECK_THROWS_AS(ExperimentConfig::from_ini("[extra]\nx = 1\n"), DomainError);
  CHECK_THROWS_AS(ExperimentConfig::from_ini("[model]\nid = nonsense\n"), DomainError);
  CHECK_THROWS_AS(ExperimentConfig::from_ini("[model]\nu = 1, x\n"), DomainError);
  CHECK_THROWS_AS(ExperimentConfig::from_ini("[observable]\nx = 1 2\n"), DomainError);
  CHECK_THROWS_AS(ExperimentConfig::load(temp_path("does_not_exist.ini")), DomainError);
  const auto c = ExperimentConfig::from_ini("[model]\nid = torus\nu = 1, 2\nN = 8\n[run]\nseed = 4\n");
  CHECK(c.model == ModelId::torus);
  CHECK(c.u_grid == std::vector<double>{1, 2});
  CHECK(c.seed == 4);
}

TEST_CASE("empty u grid gives no records") {
  auto c = theta_config();
  c.u_grid.clear();
  CHECK(run_sweep(c).empty());
}

TEST_CASE("sweeps are deterministic across runs and thread counts") {
  const auto c = theta_config();
  const auto a = run_sweep(c, 1);
  const auto b = run_sweep(c, 1);
  const auto t = run_sweep(c, 4);
  REQUIRE(a.size() == 3);
  REQUIRE(b.size() == 3);
  REQUIRE(t.size() == 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].same_result(b[i]));
    CHECK(a[i].same_result(t[i]));
    CHECK(a[i].config_hash == c.hash());
    CHECK(a[i].seed == c.seed);
    CHECK(a[i].params.at("u") == c.u_grid[i]);
  }
  // Pathwise coupling across u: estimates are nonincreasing.
  CHECK(a[0].estimate >= a[1].estimate);
  CHECK(a[1].estimate >= a[2].estimate);
}

TEST_CASE("budget violations are resource errors") {
  ExperimentConfig c;
  c.model = ModelId::torus;
  c.N = 1000;
  c.u_grid = {1.0};
  c.observable = ObservableId::giant;
  CHECK_THROWS_AS(run_sweep(c), ResourceError);
  ExperimentConfig b = theta_config();
  b.window_radius = 400;
  CHECK_THROWS_AS(run_sweep(b), ResourceError);
}

TEST_CASE("bias notes reach the records") {
  ExperimentConfig c;
  c.model = ModelId::homogeneous;
  c.L = 4;
  c.u_grid = {0.2};
  c.observable = ObservableId::vacancy;
  c.replicates = 5;
  const auto recs = run_sweep(c);
  REQUIRE(recs.size() == 1);
  bool tail = false;
  for (const auto& n : recs[0].bias_notes) tail |= n.find("sprinkle") != std::string::npos;
  CHECK(tail);
  CHECK(recs[0].bias_notes == bias_notes(c, 0.2));
}

TEST_CASE("result records round trip through JSON") {
  ResultRecord r;
  r.config_hash = "0123456789abcdef";
  r.observable = "theta";
  r.model = "interlacement";
  r.params = {{"u", 0.1}, {"R", 4}};
  r.estimate = 1.0 / 3;
  r.ci_lo = 0.1;
  r.ci_hi = 0.6;
  r.std_error = 0.01;
  r.replicates = 77;
  r.seed = 0xFFFFFFFFFFFFFFFFULL;
  r.wall_time = 1.5;
  r.bias_notes = {"a", "b \"quoted\""};
  const auto back = ResultRecord::from_json(r.to_json());
  CHECK(back.same_result(r));
  CHECK(back.wall_time == r.wall_time);
  const auto j = nlohmann::json::parse(r.to_json());
  for (const char* key : {"observable", "model", "params", "estimate", "ci_lo", "ci_hi", "replicates", "seed", "bias_notes",
                          "config_hash"})
    CHECK(j.contains(key));
}

TEST_CASE("plot data") {
  const auto path = temp_path("curve.csv");
  const auto recs = run_sweep(theta_config());
  CHECK_THROWS_AS(emit_plotdata({}, PlotKind::curve, path), DomainError);
  emit_plotdata(recs, PlotKind::curve, path);
  const auto lines = read_lines(path);
  REQUIRE(lines.size() == recs.size() + 1);
  CHECK(lines[0] == "u,estimate,ci_lo,ci_hi");
  const auto meta = nlohmann::json::parse(std::ifstream(path + ".meta.json"));
  CHECK(meta["kind"] == "curve");
  CHECK(meta["observable"] == "theta");
  CHECK(meta["rows"] == recs.size());

  auto mixed = recs;
  mixed[1].observable = "crossing";
  CHECK_THROWS_AS(emit_plotdata(mixed, PlotKind::curve, path), DomainError);
  CHECK_THROWS_AS(emit_plotdata(recs, PlotKind::loglog, path), DomainError);  // no distance parameter
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".meta.json");
}

TEST_CASE("log-log plot data reproduces the slope fit input") {
  std::vector<ResultRecord> recs;
  std::vector<double> lx, ly;
  for (int k = 4; k <= 16; k += 2) {
    ResultRecord r;
    r.observable = "covariance";
    r.model = "interlacement";
    r.params = {{"u", 1.0}, {"distance", double(k)}};
    r.estimate = 0.3 * std::pow(k, -1.0) * (1 + 0.01 * (k % 3));
    r.ci_lo = r.estimate * 0.9;
    r.ci_hi = r.estimate * 1.1;
    recs.push_back(r);
    lx.push_back(std::log(double(k)));
    ly.push_back(std::log(r.estimate));
  }
  const auto path = temp_path("loglog.csv");
  emit_plotdata(recs, PlotKind::loglog, path);
  const auto lines = read_lines(path);
  REQUIRE(lines.size() == recs.size() + 1);
  CHECK(lines[0] == "distance,estimate,ci_lo,ci_hi,log_distance,log_estimate");
  std::vector<double> px, py;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::stringstream ss(lines[i]);
    std::vector<double> v;
    for (std::string cell; std::getline(ss, cell, ',');) v.push_back(std::stod(cell));
    REQUIRE(v.size() == 6);
    px.push_back(v[4]);
    py.push_back(v[5]);
  }
  const auto a = fit_line(lx, ly), b = fit_line(px, py);
  CHECK(a.slope == doctest::Approx(b.slope).epsilon(1e-12));
  CHECK(a.intercept == doctest::Approx(b.intercept).epsilon(1e-12));
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".meta.json");
}

TEST_CASE("transition brackets") {
  ExperimentConfig c;
  c.model = ModelId::torus;
  c.seed = 3;
  SUBCASE("constant proxy gives a degenerate bracket at the grid edge") {
    c.N = 8;
    TransitionOptions o;
    o.threshold = 0.5;
    o.u_min = o.u_max = 0;
    o.replicates = 10;
    o.max_replicates = 10;
    const auto r = estimate_transition(c, o);
    CHECK(r.status == TransitionResult::Status::degenerate);
    CHECK(r.u_low == 0);
    CHECK(r.u_high == 0);
    CHECK_FALSE(r.note.empty());
  }
  SUBCASE("torus giant fraction at threshold 0.1") {
    TransitionOptions o;
    o.threshold = 0.1;
    o.u_min = 0.5;
    o.u_max = 6.0;
    o.replicates = 20;
    o.max_replicates = 160;
    c.N = 24;
    const auto a = estimate_transition(c, o);
    CHECK(a.status == TransitionResult::Status::ok);
    CHECK(a.u_high - a.u_low <= 1.0);
    CHECK(a.u_low > 0.5);
    CHECK(a.u_high < 6.0);
    CHECK(a.note.find("finite-size proxy") != std::string::npos);
    c.N = 16;
    const auto b = estimate_transition(c, o);
    CHECK(b.status == TransitionResult::Status::ok);
    CHECK(std::max(a.u_low, b.u_low) <= std::min(a.u_high, b.u_high) + 0.5);
  }
  SUBCASE("proxy and model must match") {
    TransitionOptions o;
    o.proxy = TransitionProxy::crossing;
    CHECK_THROWS_AS(estimate_transition(c, o), DomainError);
  }
}

TEST_CASE("replicate seeds are pairwise distinct") {
  std::set<std::uint64_t> s;
  for (std::int64_t r = 0; r < 100000; ++r) s.insert(replicate_seed(42, r));
  CHECK(s.size() == 100000);
}
