#include "rilab/harness.hpp"

#include <atomic>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "rilab/interlacements.hpp"
#include "rilab/torus_vacant.hpp"

namespace rilab {

namespace {

template <class E>
E parse_enum(const std::string& s, std::initializer_list<std::pair<const char*, E>> table, const char* what) {
  for (const auto& [name, v] : table)
    if (s == name) return v;
  throw DomainError(std::string("unknown ") + what + ": '" + s + "'");
}

template <class E>
std::string enum_name(E v, std::initializer_list<std::pair<const char*, E>> table) {
  for (const auto& [name, x] : table)
    if (x == v) return name;
  return "?";
}

const std::initializer_list<std::pair<const char*, ModelId>> kModels = {
    {"interlacement", ModelId::interlacement}, {"truncated", ModelId::truncated},
    {"homogeneous", ModelId::homogeneous},     {"mixed", ModelId::mixed},
    {"torus", ModelId::torus}};

const std::initializer_list<std::pair<const char*, ObservableId>> kObservables = {
    {"vacancy", ObservableId::vacancy},     {"occupation_mean", ObservableId::occupation_mean},
    {"theta", ObservableId::theta},         {"crossing", ObservableId::crossing},
    {"two_point", ObservableId::two_point}, {"disconnection", ObservableId::disconnection},
    {"exist", ObservableId::exist},         {"unique", ObservableId::unique},
    {"giant", ObservableId::giant},         {"covariance", ObservableId::covariance},
    {"fkg", ObservableId::fkg}};

const std::initializer_list<std::pair<const char*, DiameterMetric>> kMetrics = {
    {"linf_box", DiameterMetric::linf_box}, {"graph", DiameterMetric::graph}, {"chemical", DiameterMetric::chemical}};

const std::initializer_list<std::pair<const char*, PlotKind>> kPlotKinds = {
    {"curve", PlotKind::curve}, {"convergence", PlotKind::convergence}, {"loglog", PlotKind::loglog}};

std::string fmt(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& s, const std::string& key) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw DomainError("config: bad number for " + key + ": '" + s + "'");
  }
  if (s.find_first_not_of(" \t", pos) != std::string::npos)
    throw DomainError("config: bad number for " + key + ": '" + s + "'");
  return v;
}

std::int64_t parse_int(const std::string& s, const std::string& key) {
  std::int64_t v = 0;
  const auto* b = s.data();
  const auto* e = s.data() + s.size();
  while (b < e && *b == ' ') ++b;
  auto r = std::from_chars(b, e, v);
  if (r.ec != std::errc() || r.ptr != e) throw DomainError("config: bad integer for " + key + ": '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& s, const std::string& key) {
  std::uint64_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw DomainError("config: bad unsigned integer for " + key + ": '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) {
    const auto b = cur.find_first_not_of(" \t");
    const auto e = cur.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(cur.substr(b, e - b + 1));
  }
  return out;
}

Site parse_site(const std::string& s, int d, const std::string& key) {
  const auto parts = split(s, ' ');
  if (static_cast<int>(parts.size()) != d)
    throw DomainError("config: " + key + " needs " + std::to_string(d) + " coordinates: '" + s + "'");
  Site x;
  for (int i = 0; i < d; ++i) x[i] = static_cast<std::int32_t>(parse_int(parts[static_cast<std::size_t>(i)], key));
  return x;
}

std::string site_text(const Site& x, int d) {
  std::string s;
  for (int i = 0; i < d; ++i) s += (i ? " " : "") + std::to_string(x[i]);
  return s;
}

std::vector<Site> parse_pattern(const std::string& s, int d, const std::string& key) {
  std::vector<Site> out;
  for (const auto& p : split(s, ';')) out.push_back(parse_site(p, d, key));
  if (out.empty()) throw DomainError("config: empty pattern for " + key);
  return out;
}

std::string pattern_text(const std::vector<Site>& K, int d) {
  std::string s;
  for (std::size_t i = 0; i < K.size(); ++i) s += (i ? "; " : "") + site_text(K[i], d);
  return s;
}

bool is_cluster_observable(ObservableId o) {
  switch (o) {
    case ObservableId::theta:
    case ObservableId::crossing:
    case ObservableId::two_point:
    case ObservableId::disconnection:
    case ObservableId::exist:
    case ObservableId::unique:
    case ObservableId::giant:
      return true;
    default:
      return false;
  }
}

bool needs_ball(ObservableId o) {
  switch (o) {
    case ObservableId::theta:
    case ObservableId::crossing:
    case ObservableId::disconnection:
    case ObservableId::exist:
    case ObservableId::unique:
      return true;
    default:
      return false;
  }
}

}  // namespace

std::string to_string(ModelId m) { return enum_name(m, kModels); }
std::string to_string(ObservableId o) { return enum_name(o, kObservables); }
ModelId model_from_string(const std::string& s) { return parse_enum(s, kModels, "model"); }
ObservableId observable_from_string(const std::string& s) { return parse_enum(s, kObservables, "observable"); }
PlotKind plot_kind_from_string(const std::string& s) { return parse_enum(s, kPlotKinds, "plot kind"); }
std::string to_string(PlotKind k) { return enum_name(k, kPlotKinds); }

// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
  require(d >= 1 && d <= kMaxDim, "config: d out of range");
  for (double u : u_grid) require(std::isfinite(u) && u >= 0, "config: u values must be finite and >= 0");
  require(replicates > 0, "config: replicates must be > 0");
  require(max_sites > 0, "config: max_sites must be > 0");
  if (is_cluster_observable(observable)) require(d >= 3, "config: percolation observables need d >= 3");
  if (observable == ObservableId::occupation_mean)
    require(model == ModelId::interlacement, "config: occupation_mean needs the interlacement model");
  if (observable == ObservableId::covariance || observable == ObservableId::fkg)
    require(replicates > 1, "config: covariance observables need at least 2 replicates");
  require(R >= 1, "config: R must be >= 1");
  if (observable == ObservableId::disconnection) require(M > R, "config: disconnection needs M > R");
  if (observable == ObservableId::unique) {
    require(v >= 0, "config: v must be >= 0");
    for (double u : u_grid)
      if (!(v < u)) throw DomainError("config: unique needs v < u for every u of the grid");
  }
  switch (model) {
    case ModelId::interlacement:
      break;
    case ModelId::truncated:
      require(L >= 1, "config: L must be >= 1");
      break;
    case ModelId::homogeneous:
      require(L >= 2, "config: L must be >= 2");
      require(gamma > 1, "config: gamma must be > 1");
      break;
    case ModelId::mixed: {
      MixedModelConfig mc;
      mc.variant = variant;
      mc.d = d;
      mc.L = L;
      mc.gamma = gamma;
      mc.source_radius = source_radius;
      mc.validate();
      break;
    }
    case ModelId::torus:
      require(N >= 2, "config: N must be >= 2");
      require(!needs_ball(observable), "config: ball observables are not defined on the torus");
      require(observable != ObservableId::occupation_mean, "config: occupation_mean needs the interlacement model");
      for (const auto& s : {x, y})
        require(norm_inf(s) < N, "config: sites must lie within one torus period");
      break;
  }
  require(window_radius >= 0, "config: window radius must be >= 0");
  if (model != ModelId::torus && window_radius > 0) {
    const auto need = [&] {
      ExperimentConfig c = *this;
      c.window_radius = 0;
      return c.effective_window_radius();
    }();
    require(window_radius >= need, "config: window too small for the observable");
  }
}

std::int64_t ExperimentConfig::effective_window_radius() const {
  if (window_radius > 0) return window_radius;
  std::int64_t r = 0;
  auto cover = [&r](const std::vector<Site>& S) {
    for (const auto& s : S) r = std::max(r, norm_inf(s));
  };
  switch (observable) {
    case ObservableId::vacancy:
      cover(K);
      break;
    case ObservableId::fkg:
      cover(K);
      cover(K2);
      break;
    case ObservableId::covariance:
      cover({x, y});
      break;
    case ObservableId::occupation_mean:
      break;
    case ObservableId::theta:
    case ObservableId::giant:
      r = R;
      break;
    case ObservableId::crossing:
    case ObservableId::exist:
    case ObservableId::unique:
      r = 2 * R;
      break;
    case ObservableId::two_point:
      r = norm_inf(x);
      break;
    case ObservableId::disconnection:
      r = M;
      break;
  }
  return r;
}

std::string ExperimentConfig::to_ini() const {
  std::ostringstream os;
  os << "[model]\n";
  os << "id = " << to_string(model) << "\n";
  os << "d = " << d << "\n";
  os << "u = ";
  for (std::size_t i = 0; i < u_grid.size(); ++i) os << (i ? ", " : "") << fmt(u_grid[i]);
  os << "\n";
  os << "convention = " << rilab::to_string(convention) << "\n";
  os << "laziness = " << rilab::to_string(laziness) << "\n";
  os << "L = " << L << "\n";
  os << "N = " << N << "\n";
  os << "gamma = " << fmt(gamma) << "\n";
  os << "gamma2 = " << fmt(gamma2) << "\n";
  os << "variant = " << rilab::to_string(variant) << "\n";
  os << "ell = " << ell.to_string() << "\n";
  os << "source_radius = " << source_radius << "\n";
  os << "window_radius = " << window_radius << "\n";
  os << "\n[observable]\n";
  os << "id = " << to_string(observable) << "\n";
  os << "R = " << R << "\n";
  os << "M = " << M << "\n";
  os << "x = " << site_text(x, d) << "\n";
  os << "y = " << site_text(y, d) << "\n";
  os << "K = " << pattern_text(K, d) << "\n";
  os << "K2 = " << pattern_text(K2, d) << "\n";
  os << "v = " << fmt(v) << "\n";
  os << "metric = " << enum_name(metric, kMetrics) << "\n";
  os << "\n[run]\n";
  os << "replicates = " << replicates << "\n";
  os << "seed = " << seed << "\n";
  os << "output = " << output << "\n";
  os << "max_sites = " << max_sites << "\n";
  return os.str();
}

ExperimentConfig ExperimentConfig::from_ini(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::ini_parser::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw DomainError(std::string("config: ") + e.what());
  }
  static const std::map<std::string, std::set<std::string>> allowed = {
      {"model",
       {"id", "d", "u", "convention", "laziness", "L", "N", "gamma", "gamma2", "variant", "ell", "source_radius",
        "window_radius"}},
      {"observable", {"id", "R", "M", "x", "y", "K", "K2", "v", "metric"}},
      {"run", {"replicates", "seed", "output", "max_sites"}},
  };
  for (const auto& [section, body] : tree) {
    auto it = allowed.find(section);
    if (it == allowed.end()) throw DomainError("config: unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      (void)value;
      if (!it->second.count(key)) throw DomainError("config: unknown key '" + key + "' in [" + section + "]");
    }
  }
  ExperimentConfig c;
  auto get = [&tree](const std::string& path) -> std::optional<std::string> {
    auto v = tree.get_optional<std::string>(pt::ptree::path_type(path, '/'));
    if (!v) return std::nullopt;
    return *v;
  };
  // d first: sites depend on it.
  if (auto s = get("model/d")) c.d = static_cast<int>(parse_int(*s, "d"));
  require(c.d >= 1 && c.d <= kMaxDim, "config: d out of range");
  if (auto s = get("model/id")) c.model = model_from_string(*s);
  if (auto s = get("model/u")) {
    c.u_grid.clear();
    for (const auto& p : split(*s, ',')) c.u_grid.push_back(parse_double(p, "u"));
  }
  if (auto s = get("model/convention")) c.convention = convention_from_string(*s);
  if (auto s = get("model/laziness")) c.laziness = laziness_from_string(*s);
  if (auto s = get("model/L")) c.L = parse_int(*s, "L");
  if (auto s = get("model/N")) c.N = parse_int(*s, "N");
  if (auto s = get("model/gamma")) c.gamma = parse_double(*s, "gamma");
  if (auto s = get("model/gamma2")) c.gamma2 = parse_double(*s, "gamma2");
  if (auto s = get("model/variant")) c.variant = mixed_variant_from_string(*s);
  if (auto s = get("model/ell")) c.ell = HalfIndex::from_double(parse_double(*s, "ell"));
  if (auto s = get("model/source_radius")) c.source_radius = parse_int(*s, "source_radius");
  if (auto s = get("model/window_radius")) c.window_radius = parse_int(*s, "window_radius");
  if (auto s = get("observable/id")) c.observable = observable_from_string(*s);
  if (auto s = get("observable/R")) c.R = parse_int(*s, "R");
  if (auto s = get("observable/M")) c.M = parse_int(*s, "M");
  if (auto s = get("observable/x")) c.x = parse_site(*s, c.d, "x");
  if (auto s = get("observable/y")) c.y = parse_site(*s, c.d, "y");
  if (auto s = get("observable/K")) c.K = parse_pattern(*s, c.d, "K");
  if (auto s = get("observable/K2")) c.K2 = parse_pattern(*s, c.d, "K2");
  if (auto s = get("observable/v")) c.v = parse_double(*s, "v");
  if (auto s = get("observable/metric")) c.metric = parse_enum(*s, kMetrics, "metric");
  if (auto s = get("run/replicates")) c.replicates = parse_int(*s, "replicates");
  if (auto s = get("run/seed")) c.seed = parse_u64(*s, "seed");
  if (auto s = get("run/output")) c.output = *s;
  if (auto s = get("run/max_sites")) c.max_sites = parse_int(*s, "max_sites");
  // Coordinates beyond d are not representable in the text form.
  for (Site* s : {&c.x, &c.y})
    for (int i = c.d; i < kMaxDim; ++i) (*s)[i] = 0;
  for (auto* P : {&c.K, &c.K2})
    for (auto& s : *P)
      for (int i = c.d; i < kMaxDim; ++i) s[i] = 0;
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_ini(ss.str());
}

std::string ExperimentConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_ini()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// ---------------------------------------------------------------------------

std::string ResultRecord::to_json() const {
  nlohmann::json j;
  j["observable"] = observable;
  j["model"] = model;
  j["params"] = params;
  j["estimate"] = estimate;
  j["ci_lo"] = ci_lo;
  j["ci_hi"] = ci_hi;
  j["std_error"] = std_error;
  j["replicates"] = replicates;
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  j["wall_time"] = wall_time;
  j["bias_notes"] = bias_notes;
  return j.dump();
}

ResultRecord ResultRecord::from_json(const std::string& line) {
  ResultRecord r;
  try {
    const auto j = nlohmann::json::parse(line);
    r.observable = j.at("observable").get<std::string>();
    r.model = j.at("model").get<std::string>();
    r.params = j.at("params").get<std::map<std::string, double>>();
    r.estimate = j.at("estimate").get<double>();
    r.ci_lo = j.at("ci_lo").get<double>();
    r.ci_hi = j.at("ci_hi").get<double>();
    r.std_error = j.value("std_error", 0.0);
    r.replicates = j.at("replicates").get<std::int64_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.wall_time = j.value("wall_time", 0.0);
    r.bias_notes = j.value("bias_notes", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("record: ") + e.what());
  }
  return r;
}

bool ResultRecord::same_result(const ResultRecord& o) const {
  return config_hash == o.config_hash && observable == o.observable && model == o.model && params == o.params &&
         estimate == o.estimate && ci_lo == o.ci_lo && ci_hi == o.ci_hi && std_error == o.std_error &&
         replicates == o.replicates && seed == o.seed && bias_notes == o.bias_notes;
}

// ---------------------------------------------------------------------------

namespace {

struct Model {
  VacantSampler sample;
  std::function<std::vector<std::string>(double)> notes;
};

MixedModelConfig mixed_config(const ExperimentConfig& cfg, double u) {
  MixedModelConfig mc;
  mc.variant = cfg.variant;
  mc.d = cfg.d;
  mc.u = u;
  mc.L = cfg.L;
  mc.gamma = cfg.gamma;
  mc.source_radius = cfg.source_radius;
  return mc;
}

std::string noise_note(std::int64_t scale) {
  const auto p = NoiseParams::at_scale(scale);
  if (p.below_resolution())
    return "noise at scale " + std::to_string(scale) + " is below 64-bit resolution and acts as the identity";
  return "noise delta at scale " + std::to_string(scale) + " = " + fmt(p.delta());
}

Model build_model(const ExperimentConfig& cfg) {
  const int d = cfg.d;
  Model m;
  if (cfg.model == ModelId::torus) {
    const double vol = std::pow(double(cfg.N), d);
    if (vol > double(cfg.max_sites))
      throw ResourceError("sweep: torus volume " + fmt(vol) + " exceeds max_sites " + std::to_string(cfg.max_sites));
    TorusRunOptions opt{cfg.laziness, cfg.max_sites};
    const auto N = cfg.N;
    m.sample = [N, d, opt](double u, std::uint64_t seed) { return sample_torus_vacant(N, d, u, seed, opt).trace(); };
    m.notes = [](double) { return std::vector<std::string>{}; };
    return m;
  }
  const auto r = cfg.effective_window_radius();
  const double vol = std::pow(double(2 * r + 1), d);
  if (vol > double(cfg.max_sites))
    throw ResourceError("sweep: window volume " + fmt(vol) + " exceeds max_sites " + std::to_string(cfg.max_sites));
  const auto W = make_window(Window::ball(d, r));
  switch (cfg.model) {
    case ModelId::interlacement: {
      InterlacementOptions opt;
      opt.keep_trajectories = false;
      auto s = std::make_shared<InterlacementSampler>(InterlacementSampler::for_window(W, cfg.convention, opt));
      m.sample = [s](double u, std::uint64_t seed) { return s->sample(u, seed).field; };
      m.notes = [s](double u) {
        std::vector<std::string> n;
        if (s->mode() == InterlacementTruncation::fixed_radius)
          n.push_back("interlacement truncation bias <= " + fmt(s->bias_bound(u)));
        return n;
      };
      return m;
    }
    case ModelId::truncated: {
      const auto L = cfg.L;
      m.sample = [W, L, d](double u, std::uint64_t seed) {
        return sample_J([u](const Site&) { return u; }, L, W, seed, d);
      };
      m.notes = [](double) { return std::vector<std::string>{}; };
      return m;
    }
    case ModelId::homogeneous: {
      const auto L = cfg.L;
      const double gamma = cfg.gamma;
      const auto R = cfg.source_radius;
      m.sample = [W, L, gamma, R](double u, std::uint64_t seed) {
        HomogeneousOptions opt;
        opt.gamma = gamma;
        opt.source_radius = R;
        return sample_homogeneous(u, L, W, HomogeneousStreams::from_seed(seed), opt);
      };
      m.notes = [L, d, R](double) {
        SprinkleField f(d, L, 0, SprinkleMode::decomposed, R);
        return std::vector<std::string>{noise_note(L), "neglected sprinkle tail mass per tile = " + fmt(f.neglected_mass())};
      };
      return m;
    }
    case ModelId::mixed: {
      auto samplers = std::make_shared<std::map<double, std::shared_ptr<MixedSampler>>>();
      for (double u : cfg.u_grid) (*samplers)[u] = std::make_shared<MixedSampler>(mixed_config(cfg, u), W);
      auto mu = std::make_shared<std::mutex>();
      const auto ell = cfg.ell;
      m.sample = [samplers, mu, cfg, W, ell](double u, std::uint64_t seed) {
        std::shared_ptr<MixedSampler> s;
        {
          std::lock_guard<std::mutex> lock(*mu);
          auto& slot = (*samplers)[u];
          if (!slot) slot = std::make_shared<MixedSampler>(mixed_config(cfg, u), W);
          s = slot;
        }
        return s->sample(ell, seed).I;
      };
      m.notes = [cfg](double) {
        SprinkleField f(cfg.d, cfg.L, 0, SprinkleMode::decomposed, cfg.source_radius);
        return std::vector<std::string>{noise_note(cfg.L), noise_note(2 * cfg.L),
                                        "neglected sprinkle tail mass per tile = " + fmt(f.neglected_mass())};
      };
      return m;
    }
    case ModelId::torus:
      break;
  }
  throw DomainError("sweep: unknown model");
}

struct Outcome {
  double a = 0, b = 0;
  bool lower_bound = false;
};

bool all_vacant(const OccupancyField& f, const std::vector<Site>& K) {
  for (const auto& x : K)
    if (f.occupied_at(x)) return false;
  return true;
}

Outcome evaluate(const ExperimentConfig& cfg, const Model& model, double u, std::uint64_t seed) {
  const auto f = model.sample(u, seed);
  Outcome o;
  switch (cfg.observable) {
    case ObservableId::vacancy:
      o.a = all_vacant(f, cfg.K);
      break;
    case ObservableId::occupation_mean: {
      const auto i = f.window().index_of(Site{});
      o.a = f.has_multiplicity() ? double(f.multiplicity(i)) / occupation_normalizer(cfg.convention, cfg.d) : 0;
      break;
    }
    case ObservableId::theta:
      o.a = origin_connected_to_sphere(f, cfg.R);
      break;
    case ObservableId::crossing:
      o.a = crossing(f, cfg.R);
      break;
    case ObservableId::two_point:
      o.a = two_point_connected(f, cfg.x);
      break;
    case ObservableId::disconnection:
      o.a = disconnected(f, cfg.R, cfg.M);
      break;
    case ObservableId::exist:
      o.a = exist_event(f, cfg.R, cfg.metric);
      break;
    case ObservableId::unique: {
      const auto fv = model.sample(cfg.v, seed);
      o.a = exist_unique(f, fv, u, cfg.v, cfg.R, cfg.metric).unique;
      break;
    }
    case ObservableId::giant: {
      const auto cl = ClusterLabeling::compute(f);
      const auto c = cl.largest();
      if (c < 0) break;
      o.a = double(cl.size(c)) / double(f.size());
      const auto g = cluster_diameter(cl, c, cfg.metric);
      o.b = double(g.value);
      o.lower_bound = !g.exact;
      break;
    }
    case ObservableId::covariance:
      o.a = all_vacant(f, {cfg.x});
      o.b = all_vacant(f, {cfg.y});
      break;
    case ObservableId::fkg:
      o.a = all_vacant(f, cfg.K);
      o.b = all_vacant(f, cfg.K2);
      break;
  }
  return o;
}

ResultRecord mean_record(const std::vector<Outcome>& out, std::size_t begin, std::int64_t n, bool use_b) {
  double s = 0, ss = 0;
  for (std::int64_t r = 0; r < n; ++r) {
    const auto& o = out[begin + static_cast<std::size_t>(r)];
    const double x = use_b ? o.b : o.a;
    s += x;
    ss += x * x;
  }
  ResultRecord rec;
  const double nn = double(n);
  rec.estimate = s / nn;
  const double var = n > 1 ? std::max(0.0, (ss - s * s / nn) / (nn - 1)) : 0;
  rec.std_error = std::sqrt(var / nn);
  const double z = normal_quantile(0.995);
  rec.ci_lo = rec.estimate - z * rec.std_error;
  rec.ci_hi = rec.estimate + z * rec.std_error;
  return rec;
}

void set_estimate(ResultRecord& rec, const Estimate& e) {
  rec.estimate = e.value;
  rec.ci_lo = e.ci_lo;
  rec.ci_hi = e.ci_hi;
  rec.std_error = e.std_error;
}

}  // namespace

VacantSampler make_sampler(const ExperimentConfig& cfg) {
  cfg.validate();
  return build_model(cfg).sample;
}

std::vector<std::string> bias_notes(const ExperimentConfig& cfg, double u) {
  cfg.validate();
  auto n = build_model(cfg).notes(u);
  if (cfg.observable == ObservableId::disconnection)
    n.push_back("disconnection uses the surrogate M = " + std::to_string(cfg.M));
  return n;
}

std::vector<ResultRecord> run_sweep(const ExperimentConfig& cfg, int threads) {
  cfg.validate();
  require(threads >= 1, "run_sweep: threads must be >= 1");
  if (cfg.u_grid.empty()) return {};
  const auto t0 = std::chrono::steady_clock::now();
  const Model model = build_model(cfg);
  const auto n = cfg.replicates;
  const std::size_t cells = cfg.u_grid.size();
  const std::size_t tasks = cells * static_cast<std::size_t>(n);
  std::vector<Outcome> out(tasks);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex fail_mu;
  std::atomic<bool> stop{false};
  auto worker = [&] {
    for (;;) {
      if (stop.load()) return;
      const auto t = next.fetch_add(1);
      if (t >= tasks) return;
      const auto cell = t / static_cast<std::size_t>(n);
      const auto r = static_cast<std::int64_t>(t % static_cast<std::size_t>(n));
      try {
        out[t] = evaluate(cfg, model, cfg.u_grid[cell], replicate_seed(cfg.seed, r));
      } catch (...) {
        std::lock_guard<std::mutex> lock(fail_mu);
        if (!failure) failure = std::current_exception();
        stop = true;
      }
    }
  };
  const int workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(threads), tasks));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / double(cells);

  const auto hash = cfg.hash();
  std::vector<ResultRecord> records;
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const double u = cfg.u_grid[cell];
    const std::size_t begin = cell * static_cast<std::size_t>(n);
    auto notes = model.notes(u);
    ResultRecord base;
    base.config_hash = hash;
    base.model = to_string(cfg.model);
    base.observable = to_string(cfg.observable);
    base.replicates = n;
    base.seed = cfg.seed;
    base.wall_time = wall;
    base.params["u"] = u;
    base.params["d"] = cfg.d;
    if (cfg.model == ModelId::torus) {
      base.params["N"] = double(cfg.N);
    } else {
      base.params["window_radius"] = double(cfg.effective_window_radius());
      if (cfg.model != ModelId::interlacement) base.params["L"] = double(cfg.L);
    }
    if (cfg.model == ModelId::mixed) base.params["ell"] = cfg.ell.is_infinite() ? -1.0 : double(cfg.ell.twice()) / 2;

    std::int64_t k = 0;
    for (std::int64_t r = 0; r < n; ++r) k += out[begin + static_cast<std::size_t>(r)].a != 0;
    switch (cfg.observable) {
      case ObservableId::vacancy:
      case ObservableId::theta:
      case ObservableId::crossing:
      case ObservableId::two_point:
      case ObservableId::exist:
      case ObservableId::unique: {
        ResultRecord rec = base;
        set_estimate(rec, wilson(k, n));
        if (cfg.observable == ObservableId::theta || cfg.observable == ObservableId::crossing ||
            cfg.observable == ObservableId::exist || cfg.observable == ObservableId::unique)
          rec.params["R"] = double(cfg.R);
        if (cfg.observable == ObservableId::unique) rec.params["v"] = cfg.v;
        if (cfg.observable == ObservableId::two_point) rec.params["distance"] = norm2(cfg.x);
        if (cfg.observable == ObservableId::vacancy) rec.params["K_size"] = double(cfg.K.size());
        rec.bias_notes = notes;
        records.push_back(std::move(rec));
        break;
      }
      case ObservableId::disconnection: {
        ResultRecord rec = base;
        const double scale = std::pow(double(cfg.M) / double(cfg.R), cfg.d);
        const auto e = wilson(k, n);
        rec.estimate = scale * e.value;
        rec.ci_lo = scale * e.ci_lo;
        rec.ci_hi = scale * e.ci_hi;
        rec.std_error = scale * e.std_error;
        rec.params["R"] = double(cfg.R);
        rec.params["M"] = double(cfg.M);
        rec.params["probability"] = e.value;
        rec.bias_notes = notes;
        rec.bias_notes.push_back("disconnection uses the surrogate M = " + std::to_string(cfg.M));
        records.push_back(std::move(rec));
        break;
      }
      case ObservableId::occupation_mean: {
        ResultRecord rec = mean_record(out, begin, n, false);
        const auto est = rec;
        rec = base;
        rec.estimate = est.estimate;
        rec.ci_lo = est.ci_lo;
        rec.ci_hi = est.ci_hi;
        rec.std_error = est.std_error;
        rec.bias_notes = notes;
        records.push_back(std::move(rec));
        break;
      }
      case ObservableId::giant: {
        std::int64_t bounded = 0;
        for (std::int64_t r = 0; r < n; ++r) bounded += out[begin + static_cast<std::size_t>(r)].lower_bound;
        for (bool diam : {false, true}) {
          const auto est = mean_record(out, begin, n, diam);
          ResultRecord rec = base;
          rec.observable = diam ? "giant_diameter" : "giant_fraction";
          rec.estimate = est.estimate;
          rec.ci_lo = est.ci_lo;
          rec.ci_hi = est.ci_hi;
          rec.std_error = est.std_error;
          rec.params["R"] = double(cfg.R);
          rec.bias_notes = notes;
          if (diam) {
            rec.params["metric"] = double(static_cast<int>(cfg.metric));
            if (bounded > 0)
              rec.bias_notes.push_back("diameter is a double-sweep lower bound in " + std::to_string(bounded) +
                                       " replicates");
          }
          records.push_back(std::move(rec));
        }
        break;
      }
      case ObservableId::covariance:
      case ObservableId::fkg: {
        CovarianceAccumulator acc;
        for (std::int64_t r = 0; r < n; ++r) {
          const auto& o = out[begin + static_cast<std::size_t>(r)];
          acc.add(o.a, o.b);
        }
        const auto c = summarize(acc);
        ResultRecord rec = base;
        rec.estimate = c.cov;
        rec.ci_lo = c.ci_lo;
        rec.ci_hi = c.ci_hi;
        rec.std_error = c.std_error;
        if (cfg.observable == ObservableId::covariance) rec.params["distance"] = norm2(cfg.x - cfg.y);
        rec.bias_notes = notes;
        records.push_back(std::move(rec));
        break;
      }
    }
  }
  return records;
}

// ---------------------------------------------------------------------------

std::string to_string(TransitionResult::Status s) {
  switch (s) {
    case TransitionResult::Status::ok:
      return "ok";
    case TransitionResult::Status::inconclusive:
      return "inconclusive";
    case TransitionResult::Status::degenerate:
      return "degenerate";
  }
  return "?";
}

TransitionResult estimate_transition(const ExperimentConfig& cfg, const TransitionOptions& opt, int threads) {
  require(opt.threshold > 0 && opt.threshold < 1, "estimate_transition: threshold must lie in (0,1)");
  require(opt.u_min >= 0 && opt.u_min <= opt.u_max, "estimate_transition: need 0 <= u_min <= u_max");
  require(opt.replicates > 0 && opt.max_replicates >= opt.replicates, "estimate_transition: bad replicate counts");
  ExperimentConfig c = cfg;
  if (opt.proxy == TransitionProxy::torus_giant) {
    require(cfg.model == ModelId::torus, "estimate_transition: the giant-fraction proxy needs the torus model");
    c.observable = ObservableId::giant;
  } else {
    require(cfg.model != ModelId::torus, "estimate_transition: the crossing proxy needs a lattice model");
    c.observable = ObservableId::crossing;
  }
  TransitionResult res;
  // +1: CI above the threshold, -1: below, 0: not separated at max replicates.
  auto classify = [&](double u) {
    for (auto n = opt.replicates;; n *= 2) {
      c.u_grid = {u};
      c.replicates = std::min(n, opt.max_replicates);
      const auto recs = run_sweep(c, threads);
      const auto& rec = recs.front();
      res.evaluations.push_back(rec);
      if (rec.ci_lo > opt.threshold) return 1;
      if (rec.ci_hi < opt.threshold) return -1;
      if (c.replicates >= opt.max_replicates) return 0;
    }
  };
  const int lo = classify(opt.u_min);
  if (lo <= 0) {
    res.status = TransitionResult::Status::degenerate;
    res.u_low = res.u_high = opt.u_min;
    res.note = "proxy is not above the threshold at u_min; bracket pinned to the lower grid edge";
    return res;
  }
  const int hi = opt.u_max > opt.u_min ? classify(opt.u_max) : 1;
  if (hi >= 0) {
    res.status = TransitionResult::Status::degenerate;
    res.u_low = res.u_high = opt.u_max;
    res.note = "proxy is not below the threshold at u_max; bracket pinned to the upper grid edge";
    return res;
  }
  res.u_low = opt.u_min;
  res.u_high = opt.u_max;
  for (int step = 0; step < opt.max_steps && res.u_high - res.u_low > opt.tolerance; ++step) {
    const double mid = 0.5 * (res.u_low + res.u_high);
    const int s = classify(mid);
    if (s > 0) {
      res.u_low = mid;
    } else if (s < 0) {
      res.u_high = mid;
    } else {
      res.status = TransitionResult::Status::inconclusive;
      res.note = "proxy CI contains the threshold at u = " + fmt(mid) + " with " +
                 std::to_string(opt.max_replicates) + " replicates";
      return res;
    }
  }
  if (res.u_high - res.u_low > opt.tolerance) {
    res.status = TransitionResult::Status::inconclusive;
    res.note = "step limit reached";
  }
  res.note += (res.note.empty() ? "" : "; ") + std::string("finite-size proxy, not a critical parameter");
  return res;
}

// ---------------------------------------------------------------------------

void emit_plotdata(const std::vector<ResultRecord>& records, PlotKind kind, const std::string& path) {
  if (records.empty()) throw DomainError("emit_plotdata: no records");
  const auto& first = records.front();
  for (const auto& r : records)
    if (r.observable != first.observable || r.model != first.model)
      throw DomainError("emit_plotdata: records mix observables or models (" + first.observable + "/" + first.model +
                        " vs " + r.observable + "/" + r.model + ")");
  auto param = [](const ResultRecord& r, const char* key) {
    auto it = r.params.find(key);
    if (it == r.params.end()) throw DomainError(std::string("emit_plotdata: record lacks parameter ") + key);
    return it->second;
  };
  std::vector<std::string> columns;
  std::vector<std::pair<double, std::string>> rows;  // sort key, line
  for (const auto& r : records) {
    std::ostringstream line;
    double key = 0;
    switch (kind) {
      case PlotKind::curve:
        key = param(r, "u");
        line << fmt(key) << "," << fmt(r.estimate) << "," << fmt(r.ci_lo) << "," << fmt(r.ci_hi);
        break;
      case PlotKind::convergence: {
        const char* sk = r.model == "torus" ? "N" : "L";
        key = param(r, sk);
        line << fmt(key) << "," << fmt(param(r, "u")) << "," << fmt(r.estimate) << "," << fmt(r.ci_lo) << ","
             << fmt(r.ci_hi);
        break;
      }
      case PlotKind::loglog: {
        key = param(r, "distance");
        if (!(key > 0)) throw DomainError("emit_plotdata: loglog needs positive distances");
        line << fmt(key) << "," << fmt(r.estimate) << "," << fmt(r.ci_lo) << "," << fmt(r.ci_hi) << ","
             << fmt(std::log(key)) << ",";
        if (r.estimate > 0) line << fmt(std::log(r.estimate));
        break;
      }
    }
    rows.emplace_back(key, line.str());
  }
  switch (kind) {
    case PlotKind::curve:
      columns = {"u", "estimate", "ci_lo", "ci_hi"};
      break;
    case PlotKind::convergence:
      columns = {first.model == "torus" ? "N" : "L", "u", "estimate", "ci_lo", "ci_hi"};
      break;
    case PlotKind::loglog:
      columns = {"distance", "estimate", "ci_lo", "ci_hi", "log_distance", "log_estimate"};
      break;
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::ofstream csv(path);
  if (!csv) throw DomainError("emit_plotdata: cannot write " + path);
  for (std::size_t i = 0; i < columns.size(); ++i) csv << (i ? "," : "") << columns[i];
  csv << "\n";
  for (const auto& [k, line] : rows) csv << line << "\n";

  nlohmann::json meta;
  meta["kind"] = to_string(kind);
  meta["observable"] = first.observable;
  meta["model"] = first.model;
  meta["columns"] = columns;
  meta["rows"] = rows.size();
  std::set<std::string> hashes, notes;
  std::set<std::uint64_t> seeds;
  for (const auto& r : records) {
    hashes.insert(r.config_hash);
    seeds.insert(r.seed);
    notes.insert(r.bias_notes.begin(), r.bias_notes.end());
  }
  meta["config_hashes"] = hashes;
  meta["seeds"] = seeds;
  meta["bias_notes"] = notes;
  std::ofstream side(path + ".meta.json");
  if (!side) throw DomainError("emit_plotdata: cannot write " + path + ".meta.json");
  side << meta.dump(2) << "\n";
}

}  // namespace rilab
