#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "criteria.hpp"
#include "json.hpp"
#include "rilab/harness.hpp"
#include "rilab/potential.hpp"

using namespace rilab;
using nlohmann::json;

namespace {

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
  std::string out;
  bool dump_field = false;
};

std::vector<Site> parse_sites(const std::string& s, int d) {
  std::vector<Site> K;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ';')) {
    std::istringstream is(part);
    Site x;
    int i = 0;
    for (std::int32_t v; is >> v; ++i) {
      if (i >= d) throw DomainError("site '" + part + "' has more than d coordinates");
      x[i] = v;
    }
    if (i == 0) continue;
    if (i != d) throw DomainError("site '" + part + "' needs " + std::to_string(d) + " coordinates");
    K.push_back(x);
  }
  return K;
}

json site_json(const Site& x, int d) {
  json a = json::array();
  for (int i = 0; i < d; ++i) a.push_back(x[i]);
  return a;
}

ExperimentConfig load_config(const Globals& g) {
  if (g.config.empty()) throw DomainError("--config is required");
  auto cfg = ExperimentConfig::load(g.config);
  if (g.seed_set) cfg.seed = g.seed;
  return cfg;
}

// Writes to --out, else to the config's output path, else stdout.
void emit_lines(const std::vector<std::string>& lines, const std::string& path) {
  if (path.empty()) {
    for (const auto& l : lines) std::cout << l << "\n";
    return;
  }
  std::ofstream f(path);
  if (!f) throw DomainError("cannot write " + path);
  for (const auto& l : lines) f << l << "\n";
}

std::vector<std::string> record_lines(const std::vector<ResultRecord>& recs) {
  std::vector<std::string> out;
  for (const auto& r : recs) out.push_back(r.to_json());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rilab: random interlacement laboratory"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "experiment config (INI)");
  auto* seed_opt = app.add_option("--seed", g.seed, "master seed, overrides the config");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "output path");
  app.add_flag("--dump-field", g.dump_field, "write the sampled field in the binary field format");

  int d = 3;
  std::string pattern, convention = "paper_lazy", laziness = "lazy", site = "0 0 0";
  std::int64_t box = -1, mc_samples = 0;

  auto* cap = app.add_subcommand("capacity", "capacity and equilibrium measure of a finite set");
  cap->fallthrough();
  cap->add_option("--d", d, "dimension");
  cap->add_option("--pattern", pattern, "sites 'x y z; x y z; ...'");
  cap->add_option("--box", box, "use the box B_R instead of a pattern");
  cap->add_option("--convention", convention, "paper_lazy or simple_lawler");

  auto* green = app.add_subcommand("green", "Green's function g(0, x)");
  green->fallthrough();
  green->add_option("--d", d, "dimension");
  green->add_option("--x", site, "site 'x y z'");
  green->add_option("--laziness", laziness, "lazy or simple");
  green->add_option("--mc-samples", mc_samples, "Monte Carlo samples (0: quadrature)");

  auto* sample = app.add_subcommand("sample", "sample the configured model once at the first u");
  sample->fallthrough();
  auto* observe = app.add_subcommand("observe", "evaluate the configured observable at the first u");
  observe->fallthrough();
  auto* sweep = app.add_subcommand("sweep", "run the configured sweep");
  sweep->fallthrough();

  std::string proxy = "torus_giant";
  TransitionOptions topt;
  auto* transition = app.add_subcommand("transition", "bracket a finite-size proxy crossing in u");
  transition->fallthrough();
  transition->add_option("--proxy", proxy, "torus_giant or crossing");
  transition->add_option("--threshold", topt.threshold);
  transition->add_option("--u-min", topt.u_min);
  transition->add_option("--u-max", topt.u_max);
  transition->add_option("--tolerance", topt.tolerance);
  transition->add_option("--replicates", topt.replicates);
  transition->add_option("--max-replicates", topt.max_replicates);

  std::string in_path, kind = "curve";
  auto* plot = app.add_subcommand("plotdata", "CSV plot data from JSON-lines records");
  plot->fallthrough();
  plot->add_option("--in", in_path, "records (JSON lines)")->required();
  plot->add_option("--kind", kind, "curve, convergence or loglog");

  std::vector<int> ids;
  auto* selftest = app.add_subcommand("selftest", "run the acceptance suite");
  selftest->fallthrough();
  selftest->add_option("ids", ids, "criteria to run (default all)");

  CLI11_PARSE(app, argc, argv);
  g.seed_set = seed_opt->count() > 0;

  try {
    if (*cap) {
      const auto conv = convention_from_string(convention);
      std::vector<Site> K;
      if (box >= 0)
        Box::centered(d, box).for_each([&](const Site& s) { K.push_back(s); });
      else
        K = parse_sites(pattern.empty() ? "0 0 0" : pattern, d);
      const auto eq = equilibrium_measure(K, d, conv);
      json j;
      j["convention"] = to_string(conv);
      j["d"] = d;
      j["capacity"] = eq.capacity;
      j["rcond"] = eq.rcond;
      j["sites"] = eq.sites.size();
      if (eq.sites.size() <= 1000) {
        json w = json::array();
        for (std::size_t i = 0; i < eq.sites.size(); ++i) w.push_back({{"x", site_json(eq.sites[i], d)}, {"e", eq.weights[i]}});
        j["weights"] = w;
      }
      emit_lines({j.dump()}, g.out);
    } else if (*green) {
      const auto k = WalkKernel::lattice(d, laziness_from_string(laziness));
      const auto xs = parse_sites(site, d);
      if (xs.size() != 1) throw DomainError("--x needs exactly one site");
      GreenEstimate e;
      if (mc_samples > 0) {
        MonteCarloGreenParams p;
        p.samples = mc_samples;
        p.seed = g.seed_set ? g.seed : 1;
        e = green_value(k, xs[0], p);
      } else {
        e = green_value(k, xs[0]);
      }
      json j{{"x", site_json(xs[0], d)},
             {"laziness", to_string(k.laziness())},
             {"value", e.value},
             {"error_bound", e.error_bound},
             {"std_error", e.std_error}};
      emit_lines({j.dump()}, g.out);
    } else if (*sample) {
      auto cfg = load_config(g);
      if (cfg.u_grid.empty()) throw DomainError("config has an empty u grid");
      const double u = cfg.u_grid.front();
      const auto f = make_sampler(cfg)(u, cfg.seed);
      json j{{"model", to_string(cfg.model)},   {"u", u},
             {"seed", cfg.seed},                {"config_hash", cfg.hash()},
             {"sites", f.size()},               {"occupied", f.occupied_count()},
             {"vacant", f.vacant_count()},      {"bias_notes", bias_notes(cfg, u)}};
      if (g.dump_field) {
        if (g.out.empty()) throw DomainError("--dump-field needs --out");
        std::ofstream os(g.out, std::ios::binary);
        if (!os) throw DomainError("cannot write " + g.out);
        f.serialize(os);
        j["field"] = g.out;
      }
      std::cout << j.dump() << "\n";
    } else if (*observe) {
      auto cfg = load_config(g);
      if (cfg.u_grid.size() > 1) cfg.u_grid.resize(1);
      emit_lines(record_lines(run_sweep(cfg, g.threads)), g.out);
    } else if (*sweep) {
      const auto cfg = load_config(g);
      emit_lines(record_lines(run_sweep(cfg, g.threads)), g.out.empty() ? cfg.output : g.out);
    } else if (*transition) {
      const auto cfg = load_config(g);
      if (proxy == "torus_giant")
        topt.proxy = TransitionProxy::torus_giant;
      else if (proxy == "crossing")
        topt.proxy = TransitionProxy::crossing;
      else
        throw DomainError("unknown proxy '" + proxy + "'");
      const auto res = estimate_transition(cfg, topt, g.threads);
      json ev = json::array();
      for (const auto& r : res.evaluations) ev.push_back(json::parse(r.to_json()));
      json j{{"status", to_string(res.status)}, {"u_low", res.u_low},  {"u_high", res.u_high},
             {"threshold", topt.threshold},      {"note", res.note},    {"evaluations", ev}};
      emit_lines({j.dump()}, g.out);
    } else if (*plot) {
      std::ifstream in(in_path);
      if (!in) throw DomainError("cannot open " + in_path);
      std::vector<ResultRecord> recs;
      for (std::string line; std::getline(in, line);)
        if (!line.empty()) recs.push_back(ResultRecord::from_json(line));
      if (g.out.empty()) throw DomainError("plotdata needs --out");
      emit_plotdata(recs, plot_kind_from_string(kind), g.out);
    } else if (*selftest) {
      const auto results = acceptance::run(std::set<int>(ids.begin(), ids.end()), std::cout);
      for (const auto& r : results)
        if (!r.pass) return 1;
    }
  } catch (const ResourceError& e) {
    std::cerr << "resource error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
