#pragma once

#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>

#include "rdident/config.hpp"

namespace rdident {

constexpr int exit_ok = 0;
constexpr int exit_error = 1;
constexpr int exit_noncompliant = 2;
constexpr int exit_gradcheck_failed = 3;
constexpr int exit_not_converged = 4;

namespace detail {

inline FieldFile make_field_file(const SpatialGrid& g, double dt, int n_levels,
                                 int n_fields,
                                 const std::function<std::span<const double>(int, int)>& at) {
  FieldFile f;
  f.header.nx = static_cast<uint32_t>(g.nx);
  f.header.ny = static_cast<uint32_t>(g.ny);
  f.header.nt_plus_1 = static_cast<uint32_t>(n_levels);
  f.header.n_fields = static_cast<uint32_t>(n_fields);
  f.header.hx = g.hx;
  f.header.hy = g.hy;
  f.header.dt = dt;
  f.payload.reserve(f.header.payload_len());
  for (int t = 0; t < n_levels; ++t)
    for (int j = 0; j < n_fields; ++j) {
      const auto plane = to_full(g, at(t, j));
      f.payload.insert(f.payload.end(), plane.begin(), plane.end());
    }
  return f;
}

inline std::string coef_name_list(const ReactionNetwork& net, const std::vector<int>& w) {
  std::string s;
  for (int i = 0; i < net.n_species(); ++i) {
    if (w[i] == 0) continue;
    if (!s.empty()) s += " + ";
    if (w[i] != 1) s += std::to_string(w[i]) + " ";
    s += net.species()[i].name;
  }
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------

struct ValidateArgs {
  std::string network;
};

inline int cmd_validate(const ValidateArgs& a, std::ostream& out, std::ostream& err) {
  ReactionNetwork net;
  try {
    net = parse_network_file(a.network);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_error;
  }
  out << "species: " << net.n_species() << " internal, " << net.n_external()
      << " external, " << net.n_rates() << " rate constants\n";
  for (const auto& s : net.species()) {
    out << "  " << s.name << "  category " << s.category() << "  {";
    for (size_t i = 0; i < s.composition.size(); ++i)
      out << (i ? ", " : "") << s.composition[i];
    out << "}";
    if (s.membrane) out << "  membrane";
    if (s.observed) out << "  observed";
    if (s.initial_known) out << "  initial-known";
    out << "\n";
  }
  for (const auto& s : net.externals()) out << "  " << s.name << "  external\n";

  const auto rep = validate(net);
  for (const auto& n : rep.composition_notes)
    out << "note: reaction " << n.reaction + 1 << ": " << n.message << "\n";
  if (!rep.compliant()) {
    for (const auto& v : rep.violations)
      err << "rule (" << v.rule << ") violated by reaction " << v.reaction + 1 << ": "
          << v.message << "\n";
    err << "network is not compliant\n";
    return exit_noncompliant;
  }
  out << "arity rules: compliant\n";

  try {
    const auto forms = reaction_forms(net);
    const auto qp = check_quasi_positivity(forms);
    out << "quasi-positivity: certified (" << qp.terms_checked << " terms)\n";

    const DenseMatrix L = lower_triangular_certificate(net);
    out << "combination matrix (lower triangular, unit diagonal):\n";
    for (int i = 0; i < L.rows(); ++i) {
      out << " ";
      for (int j = 0; j < L.cols(); ++j) out << " " << detail::fmt(L(i, j));
      out << "\n";
    }

    const auto sb = sum_bound_certificate(net);
    if (!sb.quadratic_ok) {
      err << "total-amount bound failed: " << sb.offending << "\n";
      return exit_noncompliant;
    }
    out << "total-amount bound: quadratic part nonpositive, linear constant "
        << detail::fmt(sb.a_unit) << " at unit rates\n";
  } catch (const Error& e) {
    err << "certificate failure: " << e.what() << "\n";
    return exit_noncompliant;
  }

  const auto moieties = conserved_moieties(net);
  out << "conserved totals: " << moieties.size() << "\n";
  for (const auto& w : moieties) out << "  " << detail::coef_name_list(net, w) << "\n";
  return exit_ok;
}

// ---------------------------------------------------------------------------

namespace detail {

/// Everything the data-driven commands share, assembled from one config.
struct AssembledRun {
  ReactionNetwork net;
  RunConfig cfg;
  IdentificationProblem prob;
  std::vector<std::string> rate_names;
};

inline AssembledRun assemble(const RunConfig& cfg, bool with_data) {
  AssembledRun r;
  r.cfg = cfg;
  r.net = parse_network_file(cfg.network);
  const auto rep = validate(r.net);
  if (!rep.compliant())
    throw NonCompliantNetwork("network violates rule (" +
                              std::string(1, rep.violations.front().rule) +
                              "); run validate for details");
  r.prob.rates = CompiledRates(r.net);
  r.prob.grid = load_grid(cfg);
  r.prob.time = TimeAxis{cfg.T, cfg.nt};
  if (cfg.T <= 0.0 || cfg.nt < 1) throw ConfigError("[time] requires T > 0 and nt >= 1");
  r.prob.obs = make_observation(r.net, cfg);
  r.prob.bounds = make_bounds(r.net, r.prob.obs, cfg);
  r.prob.ext = load_external(r.net, cfg, r.prob.grid);
  r.prob.fopt.lin_tol = cfg.lin_tol;
  r.prob.checkpoint_stride = cfg.checkpoint_stride;
  if (with_data)
    r.prob.data = load_observation_data(cfg, r.prob.grid, r.prob.obs, r.prob.time);
  r.rate_names = r.net.rate_names();
  return r;
}

inline ParameterSet make_theta(const AssembledRun& r, ParameterSampler& smp) {
  ParameterSet t;
  fill_dk(r.net, r.cfg, r.prob.bounds, smp, t.d, t.k);
  t.I = initial_field_guess(r.net, r.cfg, r.prob.grid, r.prob.bounds, r.prob.obs, smp);
  return t;
}

}  // namespace detail

struct SimulateArgs {
  std::string config;
  bool print_config = false;
  bool full_state = false;
  double noise = -1.0;     // override of [output] noise when >= 0
  long long seed = -1;     // override of [output] seed when >= 0
};

inline int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  try {
    RunConfig cfg = parse_config_file(a.config);
    if (a.print_config) {
      out << print_config(cfg);
      return exit_ok;
    }
    if (a.noise >= 0.0) cfg.noise = a.noise;
    if (a.seed >= 0) cfg.seed = static_cast<uint64_t>(a.seed);

    auto run = detail::assemble(cfg, /*with_data=*/false);
    ParameterSampler smp(cfg.seed);
    ParameterSet t;
    fill_dk(run.net, cfg, run.prob.bounds, smp, t.d, t.k);
    const auto u0 = full_initial_state(run.net, cfg, run.prob.grid, run.prob.bounds,
                                       run.prob.obs, smp);
    run.prob.fopt.warnings = &err;
    const auto traj = solve_forward(run.prob.rates, run.prob.grid, run.prob.time, t.d, t.k,
                                    u0, run.prob.ext, run.prob.fopt);

    const auto& obs = run.prob.obs;
    FieldFile f = detail::make_field_file(
        run.prob.grid, run.prob.time.dt(), traj.n_levels, obs.n_observed(),
        [&](int tt, int j) { return traj.field(tt, obs.observed[j]); });
    if (cfg.noise > 0.0) {
      std::normal_distribution<double> gauss(0.0, cfg.noise);
      for (double& v : f.payload)
        if (!std::isnan(v)) v += gauss(smp.raw());
    }
    std::filesystem::create_directories(cfg.output_dir);
    const std::string obs_path = cfg.output_dir + "/observed.rdf";
    write_field_file(obs_path, f);
    out << "wrote " << obs_path << " (" << traj.n_levels << " levels, "
        << obs.n_observed() << " fields, " << run.prob.grid.n_active << " cells)\n";

    if (a.full_state || cfg.full_state) {
      FieldFile full = detail::make_field_file(
          run.prob.grid, run.prob.time.dt(), traj.n_levels, traj.n_species,
          [&](int tt, int j) { return traj.field(tt, j); });
      const std::string full_path = cfg.output_dir + "/state.rdf";
      write_field_file(full_path, full);
      out << "wrote " << full_path << "\n";
    }
    return exit_ok;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_error;
  }
}

// ---------------------------------------------------------------------------

struct GradcheckArgs {
  std::string config;
  bool print_config = false;
  double threshold = 5e-3;
  double fd_step = 1e-5;
  bool slope = false;
  bool corrupt_gradient = false;  // negative-control hook for tests
};

inline int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out, std::ostream& err) {
  try {
    const RunConfig cfg = parse_config_file(a.config);
    if (a.print_config) {
      out << print_config(cfg);
      return exit_ok;
    }
    auto run = detail::assemble(cfg, /*with_data=*/true);
    ParameterSampler smp(cfg.seed);
    const ParameterSet theta = detail::make_theta(run, smp);

    const int N = run.prob.n_species(), M = run.prob.n_rates();
    const CoordinateMap map(N, M, run.prob.n_unobserved(), run.prob.n_cells());
    const Objective f = make_objective(run.prob, map);
    const auto x = map.flatten(theta);
    std::vector<double> g(x.size());
    const double J0 = f(x, g);
    if (a.corrupt_gradient && !g.empty()) g[0] = 2.0 * g[0] + 1.0;
    const double gmax = max_abs(g);

    auto fd_along = [&](const std::vector<double>& dir, double s) {
      std::vector<double> xp(x), xm(x);
      for (size_t i = 0; i < x.size(); ++i) {
        xp[i] += s * dir[i];
        xm[i] -= s * dir[i];
      }
      return (f(xp, {}) - f(xm, {})) / (2.0 * s);
    };
    auto fd_component = [&](size_t i, double step) {
      std::vector<double> xp(x), xm(x);
      xp[i] += step;
      xm[i] -= step;
      return (f(xp, {}) - f(xm, {})) / (2.0 * step);
    };

    // The difference quotient carries the cost's own arithmetic noise
    // (roughly a thousand ulps of J from the inner solves) amplified by
    // 1/(2s). Quotients smaller than this say nothing about the gradient.
    const double eps = std::numeric_limits<double>::epsilon();
    const double fd_noise = 8192.0 * eps * std::abs(J0) / (2.0 * a.fd_step);

    std::ostringstream csv;
    csv << "name,kind,adjoint,fd,rel_err,status\n";
    int failures = 0;
    auto relerr = [](double ad, double fd) {
      const double mag = std::max(std::abs(ad), std::abs(fd));
      return mag == 0.0 ? 0.0 : std::abs(ad - fd) / mag;
    };
    auto emit = [&](const std::string& name, const char* kind, double ad,
                    const std::function<double(double)>& quot) {
      const double floor_mag = 1e-10 * std::max(1e-300, gmax);
      double fd = quot(a.fd_step);
      std::string status;
      double rel = 0.0;
      if (std::abs(ad) <= floor_mag && std::abs(fd) <= std::max(floor_mag, fd_noise)) {
        status = "below-floor";
      } else {
        rel = relerr(ad, fd);
        // The optimal step grows as the component shrinks: roundoff in the
        // quotient scales like 1/(2s) while truncation scales like s^2, so
        // a fixed step undershoots for the smallest entries. Retry coarser
        // and keep the best agreement.
        for (double s = 10.0 * a.fd_step; rel > a.threshold && s <= 0.25; s *= 10.0) {
          const double fd2 = quot(s);
          const double rel2 = relerr(ad, fd2);
          if (rel2 < rel) {
            rel = rel2;
            fd = fd2;
          }
        }
        status = rel <= a.threshold ? "ok" : "FAIL";
        if (rel > a.threshold) ++failures;
      }
      csv << name << "," << kind << "," << detail::fmt(ad) << "," << detail::fmt(fd)
          << "," << detail::fmt(rel) << "," << status << "\n";
    };

    for (int i = 0; i < N; ++i)
      emit("d." + run.net.species()[i].name, "d", g[i],
           [&](double s) { return fd_component(i, s); });
    for (int m = 0; m < M; ++m)
      emit("k." + run.rate_names[m], "k", g[N + m],
           [&](double s) { return fd_component(N + m, s); });

    // three random directions through the initial-field block
    for (int rep = 0; rep < 3; ++rep) {
      std::vector<double> dir(x.size(), 0.0);
      std::normal_distribution<double> gauss(0.0, 1.0);
      double nrm = 0.0;
      for (size_t i = N + M; i < x.size(); ++i) {
        dir[i] = gauss(smp.raw());
        nrm += dir[i] * dir[i];
      }
      nrm = std::sqrt(nrm);
      if (nrm == 0.0) nrm = 1.0;
      for (auto& v : dir) v /= nrm;
      double ad = 0.0;
      for (size_t i = 0; i < x.size(); ++i) ad += g[i] * dir[i];
      emit("I.dir" + std::to_string(rep + 1), "I", ad,
           [&](double s) { return fd_along(dir, s); });
    }

    bool slope_ok = true;
    if (a.slope) {
      // A direction spread over the whole vector dilutes each coordinate by
      // 1/sqrt(dim); with thousands of field entries the cubic Taylor term
      // then sits under roundoff at every usable step. Probe the diffusion
      // and rate block instead, where the scale is dimension-independent.
      std::vector<double> dir(x.size(), 0.0);
      std::normal_distribution<double> gauss(0.0, 1.0);
      double nrm = 0.0;
      for (int i = 0; i < N + M; ++i) {
        dir[i] = gauss(smp.raw());
        nrm += dir[i] * dir[i];
      }
      nrm = std::sqrt(nrm);
      if (nrm == 0.0) nrm = 1.0;
      for (auto& v : dir) v /= nrm;
      double ad = 0.0;
      for (size_t i = 0; i < x.size(); ++i) ad += g[i] * dir[i];

      // Points whose error sits inside the roundoff band say nothing about
      // the Taylor order; fit only the informative prefix.
      std::vector<double> ls, le;
      for (double s : {1e-2, 1e-3, 1e-4, 1e-5}) {
        const double e = std::abs(fd_along(dir, s) - ad);
        const double noise =
            8192.0 * eps * std::max(std::abs(J0), s * std::abs(ad)) / (2.0 * s);
        if (e > noise) {
          ls.push_back(std::log(s));
          le.push_back(std::log(e));
        }
      }
      double slope = 2.0;  // at roundoff floor everywhere: treat as ideal
      if (ls.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (size_t i = 0; i < ls.size(); ++i) {
          sx += ls[i];
          sy += le[i];
          sxx += ls[i] * ls[i];
          sxy += ls[i] * le[i];
        }
        const double n = static_cast<double>(ls.size());
        slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
      }
      slope_ok = slope >= 1.8 && slope <= 2.2;
      csv << "# fd-error slope " << detail::fmt(slope) << " target [1.8, 2.2] "
          << (slope_ok ? "ok" : "FAIL") << "\n";
      if (!slope_ok) ++failures;
    }

    std::filesystem::create_directories(cfg.output_dir);
    {
      std::ofstream os(cfg.output_dir + "/gradcheck.csv", std::ios::binary);
      os << csv.str();
    }
    out << csv.str();
    if (failures > 0) {
      err << failures << " gradient check(s) above threshold " << a.threshold << "\n";
      return exit_gradcheck_failed;
    }
    return exit_ok;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_error;
  }
}

// ---------------------------------------------------------------------------

struct IdentifyArgs {
  std::string config;
  bool print_config = false;
};

inline int cmd_identify(const IdentifyArgs& a, std::ostream& out, std::ostream& err) {
  try {
    const RunConfig cfg = parse_config_file(a.config);
    if (a.print_config) {
      out << print_config(cfg);
      return exit_ok;
    }
    auto run = detail::assemble(cfg, /*with_data=*/true);
    ParameterSampler smp(cfg.seed);
    const ParameterSet theta0 = detail::make_theta(run, smp);

    const int N = run.prob.n_species(), M = run.prob.n_rates();
    const int nu = run.prob.n_unobserved(), nc = run.prob.n_cells();
    const CoordinateMap map(N, M, nu, nc);
    const Objective f = make_objective(run.prob, map);
    const auto x0 = map.flatten(theta0);
    auto [lo, hi] = map.flatten_bounds(run.prob.bounds);

    std::filesystem::create_directories(cfg.output_dir);
    std::ofstream log(cfg.output_dir + "/iterations.csv", std::ios::binary);
    log << "iteration,cost,stationarity,step_length,ls_trials\n";

    const double J0 = f(x0, {});
    out << "initial cost " << detail::fmt(J0) << ", " << x0.size() << " unknowns, "
        << nc << " cells\n";

    const auto res = optimize(f, x0, lo, hi, cfg.optimizer, [&](const IterationRecord& r) {
      log << r.iteration << "," << detail::fmt(r.cost) << "," << detail::fmt(r.stationarity)
          << "," << detail::fmt(r.step_length) << "," << r.ls_trials << "\n";
      out << "it " << r.iteration << "  cost " << detail::fmt(r.cost) << "  stat "
          << detail::fmt(r.stationarity) << "  step " << detail::fmt(r.step_length) << "\n";
    });
    const ParameterSet best = map.unflatten(res.x);

    {
      std::ofstream th(cfg.output_dir + "/theta.txt", std::ios::binary);
      th << "# stop: " << to_string(res.reason) << ", cost " << detail::fmt(res.cost)
         << " (initial " << detail::fmt(J0) << ")\n";
      th << "# d and k are optimized on log scale; values below are linear\n";
      for (int i = 0; i < N; ++i)
        th << "d." << run.net.species()[i].name << " = " << detail::fmt(best.d[i]) << "\n";
      for (int m = 0; m < M; ++m)
        th << "k." << run.rate_names[m] << " = " << detail::fmt(best.k[m]) << "\n";
      for (int u = 0; u < nu; ++u) {
        double mean = 0.0;
        for (int c = 0; c < nc; ++c) mean += best.I[size_t(u) * nc + c];
        mean /= nc;
        th << "I." << run.net.species()[run.prob.obs.unobserved[u]].name << " = "
           << detail::fmt(mean) << " # field mean, full field in initial.rdf\n";
      }
    }

    if (nu > 0) {
      const FieldFile init = detail::make_field_file(
          run.prob.grid, 0.0, 1, nu, [&](int, int u) {
            return std::span<const double>(best.I.data() + size_t(u) * nc, size_t(nc));
          });
      write_field_file(cfg.output_dir + "/initial.rdf", init);
    }

    const auto traj = run.prob.simulate(best);
    const FieldFile fitted = detail::make_field_file(
        run.prob.grid, run.prob.time.dt(), traj.n_levels, run.prob.obs.n_observed(),
        [&](int tt, int j) { return traj.field(tt, run.prob.obs.observed[j]); });
    write_field_file(cfg.output_dir + "/fitted.rdf", fitted);

    if (cfg.write_adjoint) {
      const auto adj = solve_adjoint(run.prob.rates, run.prob.grid, run.prob.time, best.d,
                                     best.k, run.prob.ext, run.prob.obs, traj,
                                     run.prob.data, run.prob.fopt);
      const FieldFile af = detail::make_field_file(
          run.prob.grid, run.prob.time.dt(), adj.n_levels, N,
          [&](int tt, int j) { return adj.level_field(tt, j); });
      write_field_file(cfg.output_dir + "/adjoint.rdf", af);
    }

    out << "stop: " << to_string(res.reason) << ", final cost " << detail::fmt(res.cost)
        << " after " << res.history.size() << " iterations\n";
    out << "wrote " << cfg.output_dir << "/theta.txt, iterations.csv, fitted.rdf\n";
    return res.reason == StopReason::converged ? exit_ok : exit_not_converged;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_error;
  }
}

// ---------------------------------------------------------------------------

struct ExportArgs {
  std::string file;
  bool stats = false;
  std::string slice;  // "t=IDX,field=IDX"
};

inline int cmd_export(const ExportArgs& a, std::ostream& out, std::ostream& err) {
  try {
    const FieldFile f = read_field_file(a.file);
    const int nx = f.header.nx, ny = f.header.ny;
    if (a.stats) {
      out << "level,field,integral,min,max\n";
      for (uint32_t t = 0; t < f.header.nt_plus_1; ++t)
        for (uint32_t j = 0; j < f.header.n_fields; ++j) {
          const double* plane = f.level_field(t, j);
          double sum = 0.0, lo = 0.0, hi = 0.0;
          bool first = true;
          for (int c = 0; c < nx * ny; ++c) {
            if (std::isnan(plane[c])) continue;
            sum += plane[c];
            lo = first ? plane[c] : std::min(lo, plane[c]);
            hi = first ? plane[c] : std::max(hi, plane[c]);
            first = false;
          }
          out << t << "," << j << "," << detail::fmt(sum * f.header.hx * f.header.hy)
              << "," << detail::fmt(lo) << "," << detail::fmt(hi) << "\n";
        }
      return exit_ok;
    }
    if (!a.slice.empty()) {
      int t = -1, j = -1;
      for (const auto& part : detail::split_list(a.slice)) {
        const auto eq = part.find('=');
        if (eq == std::string::npos) throw ConfigError("slice syntax: t=IDX,field=IDX");
        const std::string key = detail::trim(part.substr(0, eq));
        const int v = static_cast<int>(detail::parse_int(detail::trim(part.substr(eq + 1)), 0));
        if (key == "t") t = v;
        else if (key == "field") j = v;
        else throw ConfigError("slice syntax: t=IDX,field=IDX");
      }
      if (t < 0 || t >= static_cast<int>(f.header.nt_plus_1) || j < 0 ||
          j >= static_cast<int>(f.header.n_fields))
        throw ConfigError("slice index out of range");
      const double* plane = f.level_field(t, j);
      out << "x,y,value\n";
      for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) {
          const double v = plane[size_t(y) * nx + x];
          if (std::isnan(v)) continue;
          out << detail::fmt((x + 0.5) * f.header.hx) << ","
              << detail::fmt((y + 0.5) * f.header.hy) << "," << detail::fmt(v) << "\n";
        }
      return exit_ok;
    }
    err << "export needs --stats or --slice t=IDX,field=IDX\n";
    return exit_error;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_error;
  }
}

}  // namespace rdident
