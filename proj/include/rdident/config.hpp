#pragma once

#include <cstdio>
#include <map>
#include <random>
#include <sstream>

#include "rdident/dsl.hpp"
#include "rdident/fieldfile.hpp"
#include "rdident/optimizer.hpp"

namespace rdident {

/// One batch run, as written in a config file. Sections and keys are fixed;
/// unknown keys are rejected so typos fail loudly. Values echo back through
/// print_config in canonical form and re-parse to the same run.
struct RunConfig {
  // [paths]
  std::string network, mask, data, external, initial_state, output_dir = "out";
  // [domain]
  int nx = 0, ny = 0;
  double hx = 1.0, hy = 1.0;
  MaskMode mask_mode = MaskMode::binary;
  // [time]
  double T = 1.0;
  int nt = 100;
  double lin_tol = 1e-12;
  // [observation]
  std::vector<std::string> observed;
  // [parameters]
  std::map<std::string, double> d_values, k_values, I_values, ext_values;
  std::map<std::string, std::pair<double, double>> d_bounds, k_bounds, I_bounds;
  bool random_init = false;
  // [optimizer]
  OptimizerSettings optimizer;
  int checkpoint_stride = 0;
  // [output]
  uint64_t seed = 1;
  double noise = 0.0;
  bool full_state = false;
  bool write_adjoint = false;
};

namespace detail {

inline std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r");
  const auto b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& s, int line) {
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line) + ": expected a number, got '" + s + "'");
  }
  if (used != s.size())
    throw ConfigError("line " + std::to_string(line) + ": trailing characters in number '" + s + "'");
  return v;
}

inline long long parse_int(const std::string& s, int line) {
  size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line) + ": expected an integer, got '" + s + "'");
  }
  if (used != s.size())
    throw ConfigError("line " + std::to_string(line) + ": trailing characters in integer '" + s + "'");
  return v;
}

inline bool parse_bool(const std::string& s, int line) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError("line " + std::to_string(line) + ": expected true or false, got '" + s + "'");
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  cur = trim(cur);
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline std::pair<double, double> parse_interval(const std::string& s, int line) {
  const auto parts = split_list(s);
  if (parts.size() != 2)
    throw ConfigError("line " + std::to_string(line) + ": expected 'low, high'");
  return {parse_double(parts[0], line), parse_double(parts[1], line)};
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// name lookups in configs must fail loudly, not return -1
inline int species_index_checked(const ReactionNetwork& net, const std::string& name) {
  const int i = net.species_index(name);
  if (i < 0) throw ConfigError("unknown species '" + name + "'");
  return i;
}

inline int rate_index_checked(const ReactionNetwork& net, const std::string& name) {
  const int i = net.rate_index(name);
  if (i < 0) throw ConfigError("unknown rate constant '" + name + "'");
  return i;
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string raw, section;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = detail::trim(raw);
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line = detail::trim(line.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      static const char* known[] = {"paths", "domain", "time", "observation",
                                    "parameters", "optimizer", "output"};
      bool ok = false;
      for (const char* s : known) ok = ok || section == s;
      if (!ok) throw ConfigError("line " + std::to_string(lineno) + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": empty key or value");
    const int ln = lineno;

    auto unknown = [&]() -> ConfigError {
      return ConfigError("line " + std::to_string(ln) + ": unknown key '" + key +
                         "' in section [" + section + "]");
    };

    if (section == "paths") {
      if (key == "network") cfg.network = val;
      else if (key == "mask") cfg.mask = val;
      else if (key == "data") cfg.data = val;
      else if (key == "external") cfg.external = val;
      else if (key == "initial_state") cfg.initial_state = val;
      else if (key == "output_dir") cfg.output_dir = val;
      else throw unknown();
    } else if (section == "domain") {
      if (key == "nx") cfg.nx = static_cast<int>(detail::parse_int(val, ln));
      else if (key == "ny") cfg.ny = static_cast<int>(detail::parse_int(val, ln));
      else if (key == "hx") cfg.hx = detail::parse_double(val, ln);
      else if (key == "hy") cfg.hy = detail::parse_double(val, ln);
      else if (key == "mask_mode") {
        if (val == "binary") cfg.mask_mode = MaskMode::binary;
        else if (val == "signed-distance") cfg.mask_mode = MaskMode::signed_distance;
        else throw ConfigError("line " + std::to_string(ln) + ": mask_mode is binary or signed-distance");
      } else throw unknown();
    } else if (section == "time") {
      if (key == "T") cfg.T = detail::parse_double(val, ln);
      else if (key == "nt") cfg.nt = static_cast<int>(detail::parse_int(val, ln));
      else if (key == "lin_tol") cfg.lin_tol = detail::parse_double(val, ln);
      else throw unknown();
    } else if (section == "observation") {
      if (key == "observed") cfg.observed = detail::split_list(val);
      else throw unknown();
    } else if (section == "parameters") {
      const auto dot = key.find('.');
      const std::string head = dot == std::string::npos ? key : key.substr(0, dot);
      const std::string name = dot == std::string::npos ? "" : key.substr(dot + 1);
      if (head == "d" && !name.empty()) cfg.d_values[name] = detail::parse_double(val, ln);
      else if (head == "k" && !name.empty()) cfg.k_values[name] = detail::parse_double(val, ln);
      else if (head == "I" && !name.empty()) cfg.I_values[name] = detail::parse_double(val, ln);
      else if (head == "ext" && !name.empty()) cfg.ext_values[name] = detail::parse_double(val, ln);
      else if (head == "d_bounds" && !name.empty()) cfg.d_bounds[name] = detail::parse_interval(val, ln);
      else if (head == "k_bounds" && !name.empty()) cfg.k_bounds[name] = detail::parse_interval(val, ln);
      else if (head == "I_bounds" && !name.empty()) cfg.I_bounds[name] = detail::parse_interval(val, ln);
      else if (key == "random_init") cfg.random_init = detail::parse_bool(val, ln);
      else throw unknown();
    } else if (section == "optimizer") {
      if (key == "max_iterations") cfg.optimizer.max_iterations = static_cast<int>(detail::parse_int(val, ln));
      else if (key == "memory") cfg.optimizer.memory = static_cast<int>(detail::parse_int(val, ln));
      else if (key == "grad_tol") cfg.optimizer.grad_tol = detail::parse_double(val, ln);
      else if (key == "armijo") cfg.optimizer.armijo = detail::parse_double(val, ln);
      else if (key == "shrink") cfg.optimizer.shrink = detail::parse_double(val, ln);
      else if (key == "max_line_search") cfg.optimizer.max_line_search = static_cast<int>(detail::parse_int(val, ln));
      else if (key == "checkpoint_stride") cfg.checkpoint_stride = static_cast<int>(detail::parse_int(val, ln));
      else throw unknown();
    } else if (section == "output") {
      if (key == "seed") cfg.seed = static_cast<uint64_t>(detail::parse_int(val, ln));
      else if (key == "noise") cfg.noise = detail::parse_double(val, ln);
      else if (key == "full_state") cfg.full_state = detail::parse_bool(val, ln);
      else if (key == "write_adjoint") cfg.write_adjoint = detail::parse_bool(val, ln);
      else throw unknown();
    } else {
      throw ConfigError("line " + std::to_string(lineno) + ": key outside any section");
    }
  }
  return cfg;
}

inline RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline std::string print_config(const RunConfig& c) {
  using detail::fmt;
  std::ostringstream o;
  o << "[paths]\n";
  o << "network = " << c.network << "\n";
  if (!c.mask.empty()) o << "mask = " << c.mask << "\n";
  if (!c.data.empty()) o << "data = " << c.data << "\n";
  if (!c.external.empty()) o << "external = " << c.external << "\n";
  if (!c.initial_state.empty()) o << "initial_state = " << c.initial_state << "\n";
  o << "output_dir = " << c.output_dir << "\n";
  o << "\n[domain]\n";
  o << "nx = " << c.nx << "\nny = " << c.ny << "\n";
  o << "hx = " << fmt(c.hx) << "\nhy = " << fmt(c.hy) << "\n";
  o << "mask_mode = " << (c.mask_mode == MaskMode::binary ? "binary" : "signed-distance") << "\n";
  o << "\n[time]\n";
  o << "T = " << fmt(c.T) << "\nnt = " << c.nt << "\n";
  o << "lin_tol = " << fmt(c.lin_tol) << "\n";
  o << "\n[observation]\n";
  if (!c.observed.empty()) {
    o << "observed = ";
    for (size_t i = 0; i < c.observed.size(); ++i)
      o << (i ? ", " : "") << c.observed[i];
    o << "\n";
  }
  o << "\n[parameters]\n";
  for (const auto& [n, v] : c.d_values) o << "d." << n << " = " << fmt(v) << "\n";
  for (const auto& [n, v] : c.k_values) o << "k." << n << " = " << fmt(v) << "\n";
  for (const auto& [n, v] : c.I_values) o << "I." << n << " = " << fmt(v) << "\n";
  for (const auto& [n, v] : c.ext_values) o << "ext." << n << " = " << fmt(v) << "\n";
  for (const auto& [n, v] : c.d_bounds)
    o << "d_bounds." << n << " = " << fmt(v.first) << ", " << fmt(v.second) << "\n";
  for (const auto& [n, v] : c.k_bounds)
    o << "k_bounds." << n << " = " << fmt(v.first) << ", " << fmt(v.second) << "\n";
  for (const auto& [n, v] : c.I_bounds)
    o << "I_bounds." << n << " = " << fmt(v.first) << ", " << fmt(v.second) << "\n";
  o << "random_init = " << (c.random_init ? "true" : "false") << "\n";
  o << "\n[optimizer]\n";
  o << "max_iterations = " << c.optimizer.max_iterations << "\n";
  o << "memory = " << c.optimizer.memory << "\n";
  o << "grad_tol = " << fmt(c.optimizer.grad_tol) << "\n";
  o << "armijo = " << fmt(c.optimizer.armijo) << "\n";
  o << "shrink = " << fmt(c.optimizer.shrink) << "\n";
  o << "max_line_search = " << c.optimizer.max_line_search << "\n";
  o << "checkpoint_stride = " << c.checkpoint_stride << "\n";
  o << "\n[output]\n";
  o << "seed = " << c.seed << "\n";
  o << "noise = " << fmt(c.noise) << "\n";
  o << "full_state = " << (c.full_state ? "true" : "false") << "\n";
  o << "write_adjoint = " << (c.write_adjoint ? "true" : "false") << "\n";
  return o.str();
}

// ---------------------------------------------------------------------------
// Run assembly: turning a config plus its referenced files into solver inputs.

/// Bound tables used when the config gives no override: diffusivities by the
/// species' membrane flag, rates by reaction direction, initial values one
/// decade band below typical concentrations.
inline BoundsSet default_bounds(const ReactionNetwork& net, const ObservationOperator& obs) {
  const int N = net.n_species(), M = net.n_rates();
  BoundsSet b;
  b.d_lo.resize(N);
  b.d_hi.resize(N);
  for (int i = 0; i < N; ++i) {
    const bool mem = net.species()[i].membrane;
    b.d_lo[i] = mem ? 1e-3 : 0.1;
    b.d_hi[i] = mem ? 0.1 : 1.0;
  }
  b.k_lo.resize(M);
  b.k_hi.resize(M);
  std::vector<bool> backward(M, false);
  for (const auto& rx : net.reactions()) backward[rx.rate] = rx.backward;
  for (int m = 0; m < M; ++m) {
    b.k_lo[m] = backward[m] ? 1e-7 : 1e-3;
    b.k_hi[m] = backward[m] ? 1e-3 : 10.0;
  }
  b.I_lo.assign(obs.unobserved.size(), 1e-4);
  b.I_hi.assign(obs.unobserved.size(), 1.0);
  return b;
}

inline ObservationOperator make_observation(const ReactionNetwork& net, const RunConfig& cfg) {
  if (cfg.observed.empty()) throw ConfigError("no observed species configured");
  std::vector<int> idx;
  for (const auto& name : cfg.observed)
    idx.push_back(detail::species_index_checked(net, name));
  return ObservationOperator::from_observed(net.n_species(), std::move(idx));
}

inline BoundsSet make_bounds(const ReactionNetwork& net, const ObservationOperator& obs,
                             const RunConfig& cfg) {
  BoundsSet b = default_bounds(net, obs);
  for (const auto& [name, iv] : cfg.d_bounds) {
    const int i = detail::species_index_checked(net, name);
    b.d_lo[i] = iv.first;
    b.d_hi[i] = iv.second;
  }
  for (const auto& [name, iv] : cfg.k_bounds) {
    const int m = detail::rate_index_checked(net, name);
    b.k_lo[m] = iv.first;
    b.k_hi[m] = iv.second;
  }
  for (const auto& [name, iv] : cfg.I_bounds) {
    const int j = detail::species_index_checked(net, name);
    for (size_t f = 0; f < obs.unobserved.size(); ++f)
      if (obs.unobserved[f] == j) {
        b.I_lo[f] = iv.first;
        b.I_hi[f] = iv.second;
      }
  }
  auto check = [](std::span<const double> lo, std::span<const double> hi, const char* what) {
    for (size_t i = 0; i < lo.size(); ++i)
      if (!(lo[i] <= hi[i])) throw InvalidBounds(std::string("empty ") + what + " bound interval");
  };
  check(b.d_lo, b.d_hi, "diffusivity");
  check(b.k_lo, b.k_hi, "rate");
  check(b.I_lo, b.I_hi, "initial-value");
  return b;
}

inline SpatialGrid load_grid(const RunConfig& cfg) {
  if (!cfg.mask.empty()) {
    const FieldFile f = read_field_file(cfg.mask);
    if (cfg.nx != 0 && (cfg.nx != static_cast<int>(f.header.nx) ||
                        cfg.ny != static_cast<int>(f.header.ny)))
      throw ConfigError("mask dimensions disagree with [domain] nx, ny");
    return load_mask(f, cfg.mask_mode);
  }
  if (cfg.nx <= 0 || cfg.ny <= 0) throw ConfigError("[domain] nx, ny required without a mask");
  return SpatialGrid::full(cfg.nx, cfg.ny, cfg.hx, cfg.hy);
}

/// Reads a stack of fields over the grid from one file level, strict about
/// the NaN layout matching the mask.
inline std::vector<double> fields_from_level(const SpatialGrid& g, const FieldFile& f,
                                             int level, int n_fields) {
  std::vector<double> out(size_t(n_fields) * g.n_active);
  for (int j = 0; j < n_fields; ++j) {
    const auto active = from_full(g, f.level_field(level, j));
    std::copy(active.begin(), active.end(), out.begin() + size_t(j) * g.n_active);
  }
  return out;
}

inline void check_geometry(const FieldFile& f, const SpatialGrid& g, const char* what) {
  if (static_cast<int>(f.header.nx) != g.nx || static_cast<int>(f.header.ny) != g.ny)
    throw ConfigError(std::string(what) + ": grid dimensions disagree with the run domain");
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); };
  if (!close(f.header.hx, g.hx) || !close(f.header.hy, g.hy))
    throw ConfigError(std::string(what) + ": cell size disagrees with the run domain");
}

inline ObservationData load_observation_data(const RunConfig& cfg, const SpatialGrid& g,
                                             const ObservationOperator& obs,
                                             const TimeAxis& time) {
  if (cfg.data.empty()) throw ConfigError("this command needs [paths] data");
  const FieldFile f = read_field_file(cfg.data);
  check_geometry(f, g, "data file");
  if (static_cast<int>(f.header.nt_plus_1) != time.nt + 1)
    throw ConfigError("data file has " + std::to_string(f.header.nt_plus_1) +
                      " time levels, the run expects " + std::to_string(time.nt + 1));
  if (static_cast<int>(f.header.n_fields) != obs.n_observed())
    throw ConfigError("data file has " + std::to_string(f.header.n_fields) +
                      " fields, the observation list has " + std::to_string(obs.n_observed()));
  const double dt = time.dt();
  if (std::abs(f.header.dt - dt) > 1e-9 * dt)
    throw ConfigError("data file time step disagrees with [time] T / nt");
  ObservationData c(time.nt + 1, obs.n_observed(), g.n_active);
  for (int t = 0; t <= time.nt; ++t) {
    const auto lvl = fields_from_level(g, f, t, obs.n_observed());
    std::copy(lvl.begin(), lvl.end(), c.data.begin() + size_t(t) * obs.n_observed() * g.n_active);
  }
  return c;
}

inline ExternalFields load_external(const ReactionNetwork& net, const RunConfig& cfg,
                                    const SpatialGrid& g) {
  const int ne = net.n_external();
  if (ne == 0) {
    if (!cfg.ext_values.empty() || !cfg.external.empty())
      throw ConfigError("external values given, but the network has no external species");
    return ExternalFields::none();
  }
  if (!cfg.external.empty()) {
    if (!cfg.ext_values.empty())
      throw ConfigError("give either an external field file or ext.* constants, not both");
    const FieldFile f = read_field_file(cfg.external);
    check_geometry(f, g, "external field file");
    if (static_cast<int>(f.header.n_fields) != ne)
      throw ConfigError("external field file must carry one field per external species");
    const int nl = static_cast<int>(f.header.nt_plus_1);
    std::vector<double> data(size_t(nl) * ne * g.n_active);
    for (int t = 0; t < nl; ++t) {
      const auto lvl = fields_from_level(g, f, t, ne);
      std::copy(lvl.begin(), lvl.end(), data.begin() + size_t(t) * ne * g.n_active);
    }
    return ExternalFields::fields(ne, g.n_active, nl, std::move(data));
  }
  std::vector<double> vals(ne);
  for (int e = 0; e < ne; ++e) {
    const auto& name = net.externals()[e].name;
    const auto it = cfg.ext_values.find(name);
    if (it == cfg.ext_values.end())
      throw ConfigError("no value for external species " + name +
                        " (ext." + name + " or an external field file)");
    vals[e] = it->second;
  }
  for (const auto& pair : cfg.ext_values)
    if (net.external_index(pair.first) < 0)
      throw ConfigError("unknown external species '" + pair.first + "'");
  return ExternalFields::constants(std::move(vals));
}

/// Deterministic draw of the unspecified parameters: log-uniform for d and k
/// (box bounds are positive), uniform for initial values. Draw order is fixed
/// (d by species, k by rate, I by unobserved field), so one seed pins the
/// whole start point.
class ParameterSampler {
 public:
  explicit ParameterSampler(uint64_t seed) : rng_(seed) {}

  double log_uniform(double lo, double hi) {
    if (lo == hi) return lo;
    if (!(lo > 0.0)) throw InvalidBounds("log-uniform draw needs positive bounds");
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    return std::exp(u(rng_));
  }
  double uniform(double lo, double hi) {
    if (lo == hi) return lo;
    std::uniform_real_distribution<double> u(lo, hi);
    return u(rng_);
  }
  std::mt19937_64& raw() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// Fills d and k from named config values; missing entries are sampled when
/// random_init is set and rejected otherwise.
inline void fill_dk(const ReactionNetwork& net, const RunConfig& cfg, const BoundsSet& b,
                    ParameterSampler& smp, std::vector<double>& d, std::vector<double>& k) {
  const int N = net.n_species(), M = net.n_rates();
  d.assign(N, -1.0);
  k.assign(M, -1.0);
  for (const auto& [name, v] : cfg.d_values) d[detail::species_index_checked(net, name)] = v;
  for (const auto& [name, v] : cfg.k_values) k[detail::rate_index_checked(net, name)] = v;
  std::string missing;
  for (int i = 0; i < N; ++i)
    if (d[i] < 0.0) {
      if (cfg.random_init) d[i] = smp.log_uniform(b.d_lo[i], b.d_hi[i]);
      else missing += " d." + net.species()[i].name;
    }
  for (int m = 0; m < M; ++m)
    if (k[m] < 0.0) {
      if (cfg.random_init) k[m] = smp.log_uniform(b.k_lo[m], b.k_hi[m]);
      else missing += " k." + net.rate_names()[m];
    }
  if (!missing.empty())
    throw ConfigError("missing parameter values (set them or random_init = true):" + missing);
}

/// Full initial state for a plain forward run: every internal species from
/// the initial-state file, or constant fields from I.* values (sampled under
/// random_init when absent).
inline std::vector<double> full_initial_state(const ReactionNetwork& net, const RunConfig& cfg,
                                              const SpatialGrid& g, const BoundsSet& b,
                                              const ObservationOperator& obs,
                                              ParameterSampler& smp) {
  const int N = net.n_species(), nc = g.n_active;
  if (!cfg.initial_state.empty()) {
    const FieldFile f = read_field_file(cfg.initial_state);
    check_geometry(f, g, "initial state file");
    if (f.header.nt_plus_1 != 1 || static_cast<int>(f.header.n_fields) != N)
      throw ConfigError("initial state file must hold one level with one field per species");
    return fields_from_level(g, f, 0, N);
  }
  for (const auto& pair : cfg.I_values) (void)detail::species_index_checked(net, pair.first);
  std::vector<double> u0(size_t(N) * nc);
  auto bound_of = [&](int i) -> std::pair<double, double> {
    for (size_t f = 0; f < obs.unobserved.size(); ++f)
      if (obs.unobserved[f] == i) return {b.I_lo[f], b.I_hi[f]};
    return {1e-4, 1.0};
  };
  for (int i = 0; i < N; ++i) {
    const auto& name = net.species()[i].name;
    const auto it = cfg.I_values.find(name);
    double v;
    if (it != cfg.I_values.end()) {
      v = it->second;
    } else if (cfg.random_init) {
      const auto [lo, hi] = bound_of(i);
      v = smp.uniform(lo, hi);
    } else {
      throw ConfigError("missing initial value I." + name);
    }
    if (v < 0.0) throw InvalidInitial("initial value for " + name + " is negative");
    std::fill_n(u0.begin() + size_t(i) * nc, nc, v);
  }
  return u0;
}

/// Initial guess for the unknown initial fields of an identification run.
inline std::vector<double> initial_field_guess(const ReactionNetwork& net, const RunConfig& cfg,
                                               const SpatialGrid& g, const BoundsSet& b,
                                               const ObservationOperator& obs,
                                               ParameterSampler& smp) {
  const int nc = g.n_active;
  const int nu = static_cast<int>(obs.unobserved.size());
  if (!cfg.initial_state.empty()) {
    const FieldFile f = read_field_file(cfg.initial_state);
    check_geometry(f, g, "initial state file");
    if (f.header.nt_plus_1 != 1 || static_cast<int>(f.header.n_fields) != net.n_species())
      throw ConfigError("initial state file must hold one level with one field per species");
    const auto all = fields_from_level(g, f, 0, net.n_species());
    std::vector<double> I(size_t(nu) * nc);
    for (int u = 0; u < nu; ++u)
      std::copy(all.begin() + size_t(obs.unobserved[u]) * nc,
                all.begin() + size_t(obs.unobserved[u] + 1) * nc, I.begin() + size_t(u) * nc);
    return I;
  }
  for (const auto& pair : cfg.I_values) (void)detail::species_index_checked(net, pair.first);
  std::vector<double> I(size_t(nu) * nc);
  for (int u = 0; u < nu; ++u) {
    const auto& name = net.species()[obs.unobserved[u]].name;
    const auto it = cfg.I_values.find(name);
    double v;
    if (it != cfg.I_values.end()) v = it->second;
    else if (cfg.random_init) v = smp.uniform(b.I_lo[u], b.I_hi[u]);
    else throw ConfigError("missing initial guess I." + name);
    std::fill_n(I.begin() + size_t(u) * nc, nc, v);
  }
  return I;
}

}  // namespace rdident
