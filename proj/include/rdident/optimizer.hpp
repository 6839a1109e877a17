#pragma once

#include <deque>
#include <functional>

#include "rdident/gradient.hpp"

namespace rdident {

struct OptimizerSettings {
  int max_iterations = 500;
  int memory = 10;
  double grad_tol = 1e-8;  // projected-gradient stationarity threshold
  double armijo = 1e-4;
  double shrink = 0.5;
  int max_line_search = 30;
};

enum class StopReason { converged, iteration_cap, line_search_failure };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::converged: return "converged";
    case StopReason::iteration_cap: return "iteration-cap";
    default: return "line-search-failure";
  }
}

struct IterationRecord {
  int iteration = 0;
  double cost = 0.0;
  double stationarity = 0.0;
  double step_length = 0.0;
  int ls_trials = 0;
};

struct OptimizeResult {
  std::vector<double> x;
  double cost = 0.0;
  StopReason reason = StopReason::iteration_cap;
  std::vector<IterationRecord> history;
};

/// Objective callback: returns the cost at x; fills `grad` when nonempty.
using Objective = std::function<double(std::span<const double>, std::span<double>)>;

inline void project_box(std::span<double> x, std::span<const double> lo,
                        std::span<const double> hi) {
  for (size_t i = 0; i < x.size(); ++i) x[i] = std::min(std::max(x[i], lo[i]), hi[i]);
}

/// Limited-memory inverse-Hessian model, two-loop recursion with the usual
/// scaling by the newest curvature pair. Pairs with tiny s.y are rejected to
/// keep the model positive definite.
class LbfgsHistory {
 public:
  explicit LbfgsHistory(int memory) : memory_(std::max(1, memory)) {}

  void clear() { pairs_.clear(); }
  int size() const { return static_cast<int>(pairs_.size()); }

  bool push(std::vector<double> s, std::vector<double> y) {
    double sy = 0.0, ss = 0.0, yy = 0.0;
    for (size_t i = 0; i < s.size(); ++i) {
      sy += s[i] * y[i];
      ss += s[i] * s[i];
      yy += y[i] * y[i];
    }
    if (!(sy > 1e-10 * std::sqrt(ss * yy))) return false;
    pairs_.push_back({std::move(s), std::move(y), 1.0 / sy, sy / yy});
    if (static_cast<int>(pairs_.size()) > memory_) pairs_.pop_front();
    return true;
  }

  /// p = -(approximate inverse Hessian) g
  void direction(std::span<const double> g, std::span<double> p) const {
    const size_t n = g.size();
    std::copy(g.begin(), g.end(), p.begin());
    std::vector<double> alpha(pairs_.size());
    for (int i = static_cast<int>(pairs_.size()) - 1; i >= 0; --i) {
      const auto& pr = pairs_[i];
      double a = 0.0;
      for (size_t j = 0; j < n; ++j) a += pr.s[j] * p[j];
      a *= pr.rho;
      alpha[i] = a;
      for (size_t j = 0; j < n; ++j) p[j] -= a * pr.y[j];
    }
    const double gamma = pairs_.empty() ? 1.0 : pairs_.back().gamma;
    for (size_t j = 0; j < n; ++j) p[j] *= gamma;
    for (size_t i = 0; i < pairs_.size(); ++i) {
      const auto& pr = pairs_[i];
      double b = 0.0;
      for (size_t j = 0; j < n; ++j) b += pr.y[j] * p[j];
      b *= pr.rho;
      for (size_t j = 0; j < n; ++j) p[j] += (alpha[i] - b) * pr.s[j];
    }
    for (size_t j = 0; j < n; ++j) p[j] = -p[j];
  }

 private:
  struct Pair {
    std::vector<double> s, y;
    double rho, gamma;
  };
  int memory_;
  std::deque<Pair> pairs_;
};

/// Projected L-BFGS with backtracking line search along the projected path.
/// Gradient components that push outward at an active bound are masked before
/// the quasi-Newton direction is formed; the Armijo test uses the inner
/// product of the full gradient with the actual (projected) displacement. On
/// a failed search the memory is dropped once and the steepest-descent
/// direction is retried before giving up.
inline OptimizeResult optimize(const Objective& f, std::vector<double> x0,
                               std::span<const double> lo, std::span<const double> hi,
                               const OptimizerSettings& set,
                               const std::function<void(const IterationRecord&)>& on_iter = {}) {
  const size_t n = x0.size();
  if (lo.size() != n || hi.size() != n) throw DimensionMismatch("bound vector lengths");
  for (size_t i = 0; i < n; ++i)
    if (!(lo[i] <= hi[i])) throw InvalidBounds("lower bound exceeds upper bound");

  OptimizeResult res;
  res.x = std::move(x0);
  project_box(res.x, lo, hi);

  std::vector<double> g(n), gmask(n), p(n), xt(n), gt(n);
  double J = f(res.x, g);
  if (!std::isfinite(J) || !all_finite(g))
    throw NonFiniteState("objective is not finite at the start point");

  LbfgsHistory hist(set.memory);

  auto stationarity = [&]() {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double step = std::min(std::max(res.x[i] - g[i], lo[i]), hi[i]) - res.x[i];
      s = std::max(s, std::abs(step));
    }
    return s;
  };

  for (int it = 0; it < set.max_iterations; ++it) {
    const double sigma = stationarity();
    if (sigma <= set.grad_tol) {
      res.reason = StopReason::converged;
      res.cost = J;
      return res;
    }

    for (size_t i = 0; i < n; ++i) {
      const bool block_down = res.x[i] <= lo[i] && g[i] > 0.0;
      const bool block_up = res.x[i] >= hi[i] && g[i] < 0.0;
      gmask[i] = (block_down || block_up) ? 0.0 : g[i];
    }

    double alpha = 0.0, Jt = 0.0;
    int trials = 0;
    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 0) {
        hist.direction(gmask, p);
      } else {
        hist.clear();  // model rejected: restart from steepest descent
        for (size_t i = 0; i < n; ++i) p[i] = -gmask[i];
      }
      alpha = 1.0;
      for (int t = 0; t < set.max_line_search; ++t, alpha *= set.shrink) {
        ++trials;
        for (size_t i = 0; i < n; ++i) xt[i] = res.x[i] + alpha * p[i];
        project_box(xt, lo, hi);
        double m = 0.0;
        for (size_t i = 0; i < n; ++i) m += g[i] * (xt[i] - res.x[i]);
        if (!(m < 0.0)) continue;
        Jt = f(xt, {});
        if (std::isfinite(Jt) && Jt <= J + set.armijo * m) {
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) {
      res.reason = StopReason::line_search_failure;
      res.cost = J;
      return res;
    }

    Jt = f(xt, gt);
    if (!std::isfinite(Jt) || !all_finite(gt))
      throw NonFiniteState("objective is not finite at an accepted step");

    std::vector<double> s(n), y(n);
    for (size_t i = 0; i < n; ++i) {
      s[i] = xt[i] - res.x[i];
      y[i] = gt[i] - g[i];
    }
    hist.push(std::move(s), std::move(y));

    res.x = xt;
    J = Jt;
    g = gt;

    IterationRecord rec;
    rec.iteration = it + 1;
    rec.cost = J;
    rec.stationarity = stationarity();
    rec.step_length = alpha;
    rec.ls_trials = trials;
    res.history.push_back(rec);
    if (on_iter) on_iter(rec);
  }
  res.reason = StopReason::iteration_cap;
  res.cost = J;
  return res;
}

// ---------------------------------------------------------------------------
// Coordinate map between the optimizer's flat vector and the parameter set.
// Diffusivities and rates live on log scale (they are positive and span
// orders of magnitude); initial fields stay linear.

class CoordinateMap {
 public:
  CoordinateMap(int n_species, int n_rates, int n_unobserved, int n_cells)
      : N_(n_species), M_(n_rates), nu_(n_unobserved), nc_(n_cells) {}

  size_t size() const { return size_t(N_) + M_ + size_t(nu_) * nc_; }

  std::vector<double> flatten(const ParameterSet& t) const {
    std::vector<double> x(size());
    for (int i = 0; i < N_; ++i) x[i] = safe_log(t.d[i], "diffusivity");
    for (int m = 0; m < M_; ++m) x[N_ + m] = safe_log(t.k[m], "rate constant");
    std::copy(t.I.begin(), t.I.end(), x.begin() + N_ + M_);
    return x;
  }

  ParameterSet unflatten(std::span<const double> x) const {
    ParameterSet t;
    t.d.resize(N_);
    t.k.resize(M_);
    t.I.assign(x.begin() + N_ + M_, x.end());
    for (int i = 0; i < N_; ++i) t.d[i] = std::exp(x[i]);
    for (int m = 0; m < M_; ++m) t.k[m] = std::exp(x[N_ + m]);
    return t;
  }

  /// Chain rule: d/d(log v) = v * d/dv.
  std::vector<double> flatten_gradient(const ParameterSet& t, const GradientSet& gr) const {
    std::vector<double> g(size());
    for (int i = 0; i < N_; ++i) g[i] = t.d[i] * gr.d[i];
    for (int m = 0; m < M_; ++m) g[N_ + m] = t.k[m] * gr.k[m];
    std::copy(gr.I.begin(), gr.I.end(), g.begin() + N_ + M_);
    return g;
  }

  std::pair<std::vector<double>, std::vector<double>> flatten_bounds(
      const BoundsSet& b) const {
    std::vector<double> lo(size()), hi(size());
    for (int i = 0; i < N_; ++i) {
      lo[i] = safe_log(b.d_lo[i], "diffusivity bound");
      hi[i] = safe_log(b.d_hi[i], "diffusivity bound");
    }
    for (int m = 0; m < M_; ++m) {
      lo[N_ + m] = safe_log(b.k_lo[m], "rate bound");
      hi[N_ + m] = safe_log(b.k_hi[m], "rate bound");
    }
    for (int f = 0; f < nu_; ++f)
      for (int a = 0; a < nc_; ++a) {
        lo[N_ + M_ + size_t(f) * nc_ + a] = b.I_lo[f];
        hi[N_ + M_ + size_t(f) * nc_ + a] = b.I_hi[f];
      }
    return {std::move(lo), std::move(hi)};
  }

 private:
  static double safe_log(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw InvalidBounds(std::string(what) + " must be positive and finite for the "
                          "logarithmic parameterization");
    return std::log(v);
  }

  int N_, M_, nu_, nc_;
};

/// Wires an identification problem into the flat optimizer interface.
inline Objective make_objective(const IdentificationProblem& prob, const CoordinateMap& map) {
  return [&prob, map](std::span<const double> x, std::span<double> grad) {
    const ParameterSet t = map.unflatten(x);
    if (grad.empty()) return prob.cost_at(t);
    auto [J, gr] = prob.cost_and_gradient(t);
    const auto flat = map.flatten_gradient(t, gr);
    std::copy(flat.begin(), flat.end(), grad.begin());
    return J;
  };
}

}  // namespace rdident
