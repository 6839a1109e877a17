#pragma once

#include <functional>

#include "rdident/forward.hpp"

namespace rdident {

/// Restriction to the observed species. Fields of observed quantities are
/// always ordered by ascending species index.
struct ObservationOperator {
  int n_species = 0;
  std::vector<int> observed;
  std::vector<int> unobserved;

  static ObservationOperator from_observed(int n_species, std::vector<int> obs) {
    std::sort(obs.begin(), obs.end());
    obs.erase(std::unique(obs.begin(), obs.end()), obs.end());
    if (!obs.empty() && (obs.front() < 0 || obs.back() >= n_species))
      throw DimensionMismatch("observed species index out of range");
    ObservationOperator op;
    op.n_species = n_species;
    op.observed = std::move(obs);
    size_t next = 0;
    for (int i = 0; i < n_species; ++i) {
      if (next < op.observed.size() && op.observed[next] == i)
        ++next;
      else
        op.unobserved.push_back(i);
    }
    return op;
  }

  int n_observed() const { return static_cast<int>(observed.size()); }
};

/// Measured concentration fields on the trajectory time levels.
/// Layout: level-major, then observed field, then cell. Level 0 is stored for
/// alignment but does not enter the mismatch cost.
struct ObservationData {
  int n_levels = 0, n_fields = 0, n_cells = 0;
  std::vector<double> data;

  ObservationData() = default;
  ObservationData(int levels, int fields, int cells)
      : n_levels(levels), n_fields(fields), n_cells(cells),
        data(size_t(levels) * fields * cells, 0.0) {}

  std::span<double> field(int t, int f) {
    return {data.data() + (size_t(t) * n_fields + f) * n_cells, size_t(n_cells)};
  }
  std::span<const double> field(int t, int f) const {
    return {data.data() + (size_t(t) * n_fields + f) * n_cells, size_t(n_cells)};
  }
};

/// Extracts the observed fields of a full trajectory (e.g. to synthesize twin
/// data from a forward run).
inline ObservationData observe(const ObservationOperator& obs, const StateTrajectory& u) {
  ObservationData c(u.n_levels, obs.n_observed(), u.n_cells);
  for (int t = 0; t < u.n_levels; ++t)
    for (int f = 0; f < obs.n_observed(); ++f) {
      auto src = u.field(t, obs.observed[f]);
      std::copy(src.begin(), src.end(), c.field(t, f).begin());
    }
  return c;
}

/// Mismatch cost: right-anchored rectangle rule over time, cell quadrature in
/// space, J = sum_{m=1..nt} dt * hx*hy * 1/2 * |observed(u^m) - c^m|^2.
inline double cost(const SpatialGrid& g, const TimeAxis& time,
                   const ObservationOperator& obs, const StateTrajectory& u,
                   const ObservationData& c) {
  if (c.n_levels != u.n_levels || c.n_cells != u.n_cells ||
      c.n_fields != obs.n_observed())
    throw DimensionMismatch("cost: data does not match trajectory layout");
  const double w = time.dt() * g.cell_weight();
  double total = 0.0;
  for (int m = 1; m < u.n_levels; ++m) {
    double lvl = 0.0;
    for (int f = 0; f < c.n_fields; ++f) {
      auto uf = u.field(m, obs.observed[f]);
      auto cf = c.field(m, f);
      for (int a = 0; a < u.n_cells; ++a) {
        const double r = uf[a] - cf[a];
        lvl += r * r;
      }
    }
    total += 0.5 * w * lvl;
  }
  return total;
}

/// Adjoint fields of the mismatch cost. `levels` holds the multiplier at each
/// time level (the final level is identically zero); `intervals` holds the
/// one multiplier per time step that the parameter quadratures use. Both are
/// density-scaled: the cost gradient with respect to the initial state of
/// species j is -levels(0, j) times the cell volume.
struct AdjointTrajectory {
  int n_levels = 0, n_species = 0, n_cells = 0;
  std::vector<double> levels;
  std::vector<double> intervals;

  AdjointTrajectory() = default;
  AdjointTrajectory(int levels_, int species, int cells)
      : n_levels(levels_), n_species(species), n_cells(cells),
        levels(size_t(levels_) * species * cells, 0.0),
        intervals(size_t(levels_ - 1) * species * cells, 0.0) {}

  std::span<double> level_field(int t, int i) {
    return {levels.data() + (size_t(t) * n_species + i) * n_cells, size_t(n_cells)};
  }
  std::span<const double> level_field(int t, int i) const {
    return {levels.data() + (size_t(t) * n_species + i) * n_cells, size_t(n_cells)};
  }
  std::span<double> interval_field(int m, int i) {
    return {intervals.data() + (size_t(m) * n_species + i) * n_cells, size_t(n_cells)};
  }
  std::span<const double> interval_field(int m, int i) const {
    return {intervals.data() + (size_t(m) * n_species + i) * n_cells, size_t(n_cells)};
  }
};

/// Optional accumulation targets for the backward sweep. Empty spans are
/// skipped. Gradients are Euclidean derivatives of the cost: grad_u0 receives
/// dJ/du0 for every species and cell (select rows for the identifiable part).
struct AdjointOutputs {
  std::span<double> grad_d;
  std::span<double> grad_k;
  std::span<double> grad_u0;
  AdjointTrajectory* trajectory = nullptr;
};

/// Reverse sweep through the reaction-diffusion stepping, exact with respect
/// to the discrete forward map: each interval applies the transposed inverse
/// of the diffusion operator (self-adjoint, same solver) and then the
/// transposed inverse of the reaction linearization through a deterministic
/// replay of the substep decomposition. `state_level` must return the forward
/// state at any requested level (full storage or checkpoint recomputation).
inline void backward_sweep(const CompiledRates& rates, const SpatialGrid& g,
                           const TimeAxis& time, std::span<const double> d,
                           std::span<const double> k, const ExternalFields& ext,
                           const ObservationOperator& obs,
                           const std::function<std::span<const double>(int)>& state_level,
                           const ObservationData& c, const ForwardOptions& opt,
                           const AdjointOutputs& out) {
  const int N = rates.n_species(), nc = g.n_active, nt = time.nt;
  const double dt = time.dt(), W = g.cell_weight();
  if (c.n_levels != nt + 1 || c.n_cells != nc || c.n_fields != obs.n_observed())
    throw DimensionMismatch("backward sweep: data layout");
  if (!out.grad_d.empty() && static_cast<int>(out.grad_d.size()) != N)
    throw DimensionMismatch("backward sweep: grad_d size");
  if (!out.grad_k.empty() && static_cast<int>(out.grad_k.size()) != rates.n_rates())
    throw DimensionMismatch("backward sweep: grad_k size");
  if (!out.grad_u0.empty() && out.grad_u0.size() != size_t(N) * nc)
    throw DimensionMismatch("backward sweep: grad_u0 size");
  if (out.trajectory) *out.trajectory = AdjointTrajectory(nt + 1, N, nc);

  ReactionStepper stepper(rates, opt.reaction);
  PcgWork pcg;
  std::vector<double> mu(size_t(N) * nc, 0.0);  // multiplier at the level above
  std::vector<double> s(size_t(N) * nc), gvec(size_t(N) * nc), lap(nc);
  std::vector<double> xcell(N), gcell(N), extcell(rates.n_external());
  const int max_iter = opt.lin_maxiter_factor * nc;

  for (int m = nt - 1; m >= 0; --m) {
    auto u_next = state_level(m + 1);
    auto u_cur = state_level(m);

    // source: multiplier from above plus the weighted data mismatch at m+1
    std::copy(mu.begin(), mu.end(), s.begin());
    for (int f = 0; f < obs.n_observed(); ++f) {
      const int j = obs.observed[f];
      auto cf = c.field(m + 1, f);
      for (int a = 0; a < nc; ++a)
        s[size_t(j) * nc + a] += dt * W * (u_next[size_t(j) * nc + a] - cf[a]);
    }

    // transposed diffusion solve per species (the operator is symmetric)
    for (int i = 0; i < N; ++i) {
      std::span<const double> si(s.data() + size_t(i) * nc, size_t(nc));
      std::span<double> gi(gvec.data() + size_t(i) * nc, size_t(nc));
      std::copy(si.begin(), si.end(), gi.begin());
      pcg_solve(g, dt * d[i], si, gi, opt.lin_tol, max_iter, pcg);

      if (!out.grad_d.empty()) {
        laplacian(g, {u_next.data() + size_t(i) * nc, size_t(nc)}, lap);
        double acc = 0.0;
        for (int a = 0; a < nc; ++a) acc += gi[a] * lap[a];
        out.grad_d[i] += dt * acc;
      }
      if (out.trajectory) {
        auto dst = out.trajectory->interval_field(m, i);
        for (int a = 0; a < nc; ++a) dst[a] = -gi[a] / W;
      }
    }

    // transposed reaction update per cell, replaying the forward substeps
    for (int a = 0; a < nc; ++a) {
      for (int i = 0; i < N; ++i) {
        xcell[i] = u_cur[size_t(i) * nc + a];
        gcell[i] = gvec[size_t(i) * nc + a];
      }
      ext.gather_cell(m, a, extcell);
      stepper.adjoint_cell(xcell, k, extcell, dt, gcell, out.grad_k);
      for (int i = 0; i < N; ++i) mu[size_t(i) * nc + a] = gcell[i];
    }
    if (!all_finite(mu)) throw NonFiniteAdjoint("adjoint is not finite at level " +
                                                std::to_string(m));
    if (out.trajectory)
      for (size_t idx = 0; idx < mu.size(); ++idx)
        out.trajectory->levels[size_t(m) * N * nc + idx] = -mu[idx] / W;
  }
  if (!out.grad_u0.empty()) std::copy(mu.begin(), mu.end(), out.grad_u0.begin());
}

/// Convenience wrapper: runs the sweep over a fully stored trajectory and
/// returns the multiplier fields.
inline AdjointTrajectory solve_adjoint(const CompiledRates& rates, const SpatialGrid& g,
                                       const TimeAxis& time, std::span<const double> d,
                                       std::span<const double> k,
                                       const ExternalFields& ext,
                                       const ObservationOperator& obs,
                                       const StateTrajectory& u, const ObservationData& c,
                                       const ForwardOptions& opt = {}) {
  AdjointTrajectory adj;
  AdjointOutputs out;
  out.trajectory = &adj;
  backward_sweep(rates, g, time, d, k, ext, obs,
                 [&](int m) { return u.level(m); }, c, opt, out);
  return adj;
}

}  // namespace rdident
