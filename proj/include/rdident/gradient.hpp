#pragma once

#include "rdident/adjoint.hpp"

namespace rdident {

/// Unknowns of the identification problem: diffusivities (per species), rate
/// constants, and the initial fields of the unobserved species (field-major,
/// in ObservationOperator::unobserved order).
struct ParameterSet {
  std::vector<double> d, k, I;
};

/// Euclidean cost derivatives in the same layout as ParameterSet.
struct GradientSet {
  std::vector<double> d, k, I;

  double max_norm() const {
    return std::max(max_abs(d), std::max(max_abs(k), max_abs(I)));
  }
  bool finite() const { return all_finite(d) && all_finite(k) && all_finite(I); }
};

/// Box bounds; d and k entrywise, initial fields one interval per unobserved
/// species applied to every cell. Equal lower and upper pins a value.
struct BoundsSet {
  std::vector<double> d_lo, d_hi, k_lo, k_hi, I_lo, I_hi;
};

// ---------------------------------------------------------------------------
// Forward state access with bounded memory: full levels are kept only at
// every `stride`-th step; intermediate levels are recomputed segment by
// segment on demand. Recomputation is bit-identical to the original pass
// because every solver decision is a pure function of the step inputs.

class CheckpointedForward {
 public:
  using LevelCallback = std::function<void(int, std::span<const double>)>;

  CheckpointedForward(const CompiledRates& rates, const SpatialGrid& g,
                      const TimeAxis& time, std::span<const double> d,
                      std::span<const double> k, std::span<const double> u0,
                      const ExternalFields& ext, const ForwardOptions& opt, int stride,
                      const LevelCallback& on_level = {})
      : rates_(&rates), grid_(&g), time_(time), d_(d.begin(), d.end()),
        k_(k.begin(), k.end()), ext_(&ext), opt_(opt),
        stride_(std::max(1, stride)), stepper_(rates, opt.reaction) {
    const int N = rates.n_species(), nc = g.n_active;
    level_len_ = size_t(N) * nc;
    if (u0.size() != level_len_) throw DimensionMismatch("initial state length");
    for (double v : u0)
      if (v < 0.0) throw InvalidInitial("initial state has negative entries");

    const int nt = time.nt;
    n_checkpoints_ = nt / stride_ + 1;
    checkpoints_.assign(size_t(n_checkpoints_) * level_len_, 0.0);
    final_.assign(level_len_, 0.0);

    std::vector<double> cur(u0.begin(), u0.end()), next(level_len_);
    std::copy(cur.begin(), cur.end(), checkpoint(0).begin());
    if (on_level) on_level(0, cur);
    for (int m = 0; m < nt; ++m) {
      step(rates, stepper_, g, cur, d_, k_, *ext_, m, time.dt(), opt_, next, work_);
      cur.swap(next);
      if ((m + 1) % stride_ == 0 && (m + 1) / stride_ < n_checkpoints_)
        std::copy(cur.begin(), cur.end(), checkpoint((m + 1) / stride_).begin());
      if (on_level) on_level(m + 1, cur);
    }
    std::copy(cur.begin(), cur.end(), final_.begin());
  }

  std::span<const double> level(int m) {
    if (m == time_.nt) return final_;
    if (m % stride_ == 0) return checkpoint(m / stride_);
    const int seg = m / stride_;
    if (seg != window_seg_) fill_window(seg);
    return {window_.data() + size_t(m - seg * stride_) * level_len_, level_len_};
  }

  std::span<const double> final_level() const { return final_; }

 private:
  std::span<double> checkpoint(int j) {
    return {checkpoints_.data() + size_t(j) * level_len_, level_len_};
  }

  void fill_window(int seg) {
    const int base = seg * stride_;
    const int top = std::min(base + stride_, time_.nt);
    window_.resize(size_t(top - base + 1) * level_len_);
    auto at = [&](int off) {
      return std::span<double>(window_.data() + size_t(off) * level_len_, level_len_);
    };
    auto cp = checkpoint(seg);
    std::copy(cp.begin(), cp.end(), at(0).begin());
    for (int m = base; m < top; ++m)
      step(*rates_, stepper_, *grid_, at(m - base), d_, k_, *ext_, m, time_.dt(), opt_,
           at(m - base + 1), work_);
    window_seg_ = seg;
  }

  const CompiledRates* rates_;
  const SpatialGrid* grid_;
  TimeAxis time_;
  std::vector<double> d_, k_;
  const ExternalFields* ext_;
  ForwardOptions opt_;
  int stride_;
  size_t level_len_ = 0;
  int n_checkpoints_ = 0;
  std::vector<double> checkpoints_, final_, window_;
  int window_seg_ = -1;
  ReactionStepper stepper_;
  StepWorkspace work_;
};

// ---------------------------------------------------------------------------

/// Everything fixed about one identification run: network, domain, time axis,
/// observation pattern, data, and external drives. The initial state of an
/// observed species is pinned to its data at level 0; the initial fields of
/// the unobserved species are unknowns.
struct IdentificationProblem {
  CompiledRates rates;
  SpatialGrid grid;
  TimeAxis time;
  ObservationOperator obs;
  ObservationData data;
  ExternalFields ext;
  BoundsSet bounds;
  ForwardOptions fopt;
  int checkpoint_stride = 0;  // 0 or 1: store every level

  int n_species() const { return rates.n_species(); }
  int n_rates() const { return rates.n_rates(); }
  int n_unobserved() const { return static_cast<int>(obs.unobserved.size()); }
  int n_cells() const { return grid.n_active; }

  ParameterSet make_parameters() const {
    ParameterSet t;
    t.d.assign(n_species(), 0.0);
    t.k.assign(n_rates(), 0.0);
    t.I.assign(size_t(n_unobserved()) * n_cells(), 0.0);
    return t;
  }

  void check(const ParameterSet& t) const {
    if (static_cast<int>(t.d.size()) != n_species() ||
        static_cast<int>(t.k.size()) != n_rates() ||
        t.I.size() != size_t(n_unobserved()) * n_cells())
      throw DimensionMismatch("parameter set layout");
  }

  /// Builds the full initial state: observed species from the data's first
  /// level, unobserved species from the unknowns.
  std::vector<double> assemble_initial(const ParameterSet& t) const {
    check(t);
    const int nc = n_cells();
    std::vector<double> u0(size_t(n_species()) * nc, 0.0);
    for (int f = 0; f < obs.n_observed(); ++f) {
      auto src = data.field(0, f);
      std::copy(src.begin(), src.end(), u0.begin() + size_t(obs.observed[f]) * nc);
    }
    for (int f = 0; f < n_unobserved(); ++f)
      std::copy(t.I.begin() + size_t(f) * nc, t.I.begin() + size_t(f + 1) * nc,
                u0.begin() + size_t(obs.unobserved[f]) * nc);
    return u0;
  }

  StateTrajectory simulate(const ParameterSet& t) const {
    const auto u0 = assemble_initial(t);
    return solve_forward(rates, grid, time, t.d, t.k, u0, ext, fopt);
  }

  /// Cost only, streaming: two state levels of memory, no trajectory.
  double cost_at(const ParameterSet& t) const {
    const auto u0 = assemble_initial(t);
    const int nc = n_cells();
    const double w = 0.5 * time.dt() * grid.cell_weight();
    ReactionStepper stepper(rates, fopt.reaction);
    StepWorkspace work;
    std::vector<double> cur = u0, next(u0.size());
    double J = 0.0;
    for (int m = 0; m < time.nt; ++m) {
      step(rates, stepper, grid, cur, t.d, t.k, ext, m, time.dt(), fopt, next, work);
      cur.swap(next);
      for (int f = 0; f < obs.n_observed(); ++f) {
        auto cf = data.field(m + 1, f);
        const double* uf = cur.data() + size_t(obs.observed[f]) * nc;
        double lvl = 0.0;
        for (int a = 0; a < nc; ++a) {
          const double r = uf[a] - cf[a];
          lvl += r * r;
        }
        J += w * lvl;
      }
    }
    return J;
  }

  /// Cost and its exact Euclidean gradient via one forward pass and one
  /// reverse sweep.
  std::pair<double, GradientSet> cost_and_gradient(const ParameterSet& t) const {
    check(t);
    const auto u0 = assemble_initial(t);
    const int N = n_species(), nc = n_cells();

    GradientSet gr;
    gr.d.assign(N, 0.0);
    gr.k.assign(n_rates(), 0.0);
    std::vector<double> gu0(size_t(N) * nc, 0.0);
    AdjointOutputs out;
    out.grad_d = gr.d;
    out.grad_k = gr.k;
    out.grad_u0 = gu0;

    double J = 0.0;
    const double w = 0.5 * time.dt() * grid.cell_weight();
    auto add_mismatch = [&](int m, std::span<const double> u) {
      if (m == 0) return;
      for (int f = 0; f < obs.n_observed(); ++f) {
        auto cf = data.field(m, f);
        const double* uf = u.data() + size_t(obs.observed[f]) * nc;
        double lvl = 0.0;
        for (int a = 0; a < nc; ++a) {
          const double r = uf[a] - cf[a];
          lvl += r * r;
        }
        J += w * lvl;
      }
    };

    if (checkpoint_stride <= 1) {
      const auto u = solve_forward(rates, grid, time, t.d, t.k, u0, ext, fopt);
      for (int m = 1; m <= time.nt; ++m) add_mismatch(m, u.level(m));
      backward_sweep(rates, grid, time, t.d, t.k, ext, obs,
                     [&](int m) { return u.level(m); }, data, fopt, out);
    } else {
      CheckpointedForward cf(rates, grid, time, t.d, t.k, u0, ext, fopt,
                             checkpoint_stride, add_mismatch);
      backward_sweep(rates, grid, time, t.d, t.k, ext, obs,
                     [&](int m) { return cf.level(m); }, data, fopt, out);
    }

    gr.I.assign(size_t(n_unobserved()) * nc, 0.0);
    for (int f = 0; f < n_unobserved(); ++f)
      std::copy(gu0.begin() + size_t(obs.unobserved[f]) * nc,
                gu0.begin() + size_t(obs.unobserved[f] + 1) * nc,
                gr.I.begin() + size_t(f) * nc);
    return {J, gr};
  }
};

// ---------------------------------------------------------------------------
// Quadrature forms of the parameter gradients, evaluated from stored state
// and multiplier trajectories. These agree with the sweep-accumulated values
// and exist so the two routes can be checked against each other.

/// dJ/dd_i = -dt * W * sum_m <interval multiplier_i^m, Laplacian u_i^{m+1}>.
inline std::vector<double> grad_d_quadrature(const SpatialGrid& g, const TimeAxis& time,
                                             const StateTrajectory& u,
                                             const AdjointTrajectory& adj) {
  const int N = u.n_species, nc = u.n_cells;
  std::vector<double> gd(N, 0.0), lap(nc);
  const double dt = time.dt(), W = g.cell_weight();
  for (int m = 0; m < time.nt; ++m)
    for (int i = 0; i < N; ++i) {
      laplacian(g, u.field(m + 1, i), lap);
      auto gi = adj.interval_field(m, i);
      double acc = 0.0;
      for (int a = 0; a < nc; ++a) acc += gi[a] * lap[a];
      gd[i] += -dt * W * acc;
    }
  return gd;
}

/// dJ/dk through the replayed reaction substeps, driven by the stored
/// interval multipliers.
inline std::vector<double> grad_k_quadrature(const CompiledRates& rates,
                                             const SpatialGrid& g, const TimeAxis& time,
                                             std::span<const double> k,
                                             const ExternalFields& ext,
                                             const StateTrajectory& u,
                                             const AdjointTrajectory& adj,
                                             const ForwardOptions& opt = {}) {
  const int N = u.n_species, nc = u.n_cells;
  const double W = g.cell_weight();
  std::vector<double> gk(rates.n_rates(), 0.0);
  std::vector<double> xcell(N), gcell(N), extcell(rates.n_external());
  ReactionStepper stepper(rates, opt.reaction);
  for (int m = time.nt - 1; m >= 0; --m)
    for (int a = 0; a < nc; ++a) {
      for (int i = 0; i < N; ++i) {
        xcell[i] = u.field(m, i)[a];
        gcell[i] = -W * adj.interval_field(m, i)[a];
      }
      ext.gather_cell(m, a, extcell);
      stepper.adjoint_cell(xcell, k, extcell, time.dt(), gcell, gk);
    }
  return gk;
}

/// dJ/d(initial state), Euclidean, every species: -W times the multiplier at
/// level zero.
inline std::vector<double> grad_initial_quadrature(const SpatialGrid& g,
                                                   const AdjointTrajectory& adj) {
  std::vector<double> gi(size_t(adj.n_species) * adj.n_cells);
  const double W = g.cell_weight();
  for (size_t idx = 0; idx < gi.size(); ++idx) gi[idx] = -W * adj.levels[idx];
  return gi;
}

}  // namespace rdident
