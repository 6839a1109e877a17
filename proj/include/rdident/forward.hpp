#pragma once

#include <cmath>
#include <ostream>
#include <vector>

#include "rdident/grid.hpp"
#include "rdident/network.hpp"

namespace rdident {

struct TimeAxis {
  double T = 1.0;
  int nt = 1;
  double dt() const { return T / nt; }
};

/// Prescribed external concentration fields, piecewise constant in time: the
/// snapshot at level n drives the step n -> n+1. Levels beyond the stored
/// range clamp to the last snapshot.
class ExternalFields {
 public:
  ExternalFields() = default;

  static ExternalFields none() { return {}; }

  static ExternalFields constants(std::vector<double> values) {
    ExternalFields e;
    e.n_ext_ = static_cast<int>(values.size());
    e.constants_ = std::move(values);
    return e;
  }

  /// data layout: level-major, then external index, then cell.
  static ExternalFields fields(int n_ext, int n_cells, int n_levels,
                               std::vector<double> data) {
    if (data.size() != size_t(n_ext) * n_cells * n_levels)
      throw DimensionMismatch("external field data size");
    ExternalFields e;
    e.n_ext_ = n_ext;
    e.n_cells_ = n_cells;
    e.n_levels_ = n_levels;
    e.data_ = std::move(data);
    return e;
  }

  int n_ext() const { return n_ext_; }

  void gather_cell(int level, int cell, std::span<double> out) const {
    if (n_ext_ == 0) return;
    if (!constants_.empty()) {
      for (int e = 0; e < n_ext_; ++e) out[e] = constants_[e];
      return;
    }
    const int lv = level < n_levels_ ? level : n_levels_ - 1;
    const size_t base = size_t(lv) * n_ext_ * n_cells_;
    for (int e = 0; e < n_ext_; ++e) out[e] = data_[base + size_t(e) * n_cells_ + cell];
  }

 private:
  int n_ext_ = 0, n_cells_ = 0, n_levels_ = 0;
  std::vector<double> constants_;
  std::vector<double> data_;
};

/// Time-indexed stack of concentration fields over the active cells.
/// Layout: level-major, then species, then cell.
struct StateTrajectory {
  int n_levels = 0, n_species = 0, n_cells = 0;
  std::vector<double> data;

  StateTrajectory() = default;
  StateTrajectory(int levels, int species, int cells)
      : n_levels(levels), n_species(species), n_cells(cells),
        data(size_t(levels) * species * cells, 0.0) {}

  std::span<double> level(int t) {
    return {data.data() + size_t(t) * n_species * n_cells, size_t(n_species) * n_cells};
  }
  std::span<const double> level(int t) const {
    return {data.data() + size_t(t) * n_species * n_cells, size_t(n_species) * n_cells};
  }
  std::span<double> field(int t, int i) {
    return {data.data() + (size_t(t) * n_species + i) * n_cells, size_t(n_cells)};
  }
  std::span<const double> field(int t, int i) const {
    return {data.data() + (size_t(t) * n_species + i) * n_cells, size_t(n_cells)};
  }
};

// ---------------------------------------------------------------------------
// Diffusion solve: (I - c * Laplacian) x = b, symmetric positive definite
// M-matrix for c >= 0.

struct PcgResult {
  int iterations = 0;
  double rel_residual = 0.0;
};

struct PcgWork {
  std::vector<double> r, z, p, Ap, diag;
};

/// Jacobi-preconditioned conjugate gradient. `x` carries the warm start on
/// entry and the solution on return. Throws LinearSolveFailure when the
/// iteration cap is hit before the relative residual reaches `tol`.
inline PcgResult pcg_solve(const SpatialGrid& g, double c, std::span<const double> b,
                           std::span<double> x, double tol, int max_iter, PcgWork& w) {
  check_field(g, b);
  check_field(g, x);
  const int n = g.n_active;
  const double wx = c / (g.hx * g.hx), wy = c / (g.hy * g.hy);

  auto apply = [&](std::span<const double> in, std::span<double> out) {
    for (int a = 0; a < n; ++a) {
      const auto& nb = g.nbr[a];
      double acc = in[a];
      if (nb[0] >= 0) acc -= wx * (in[nb[0]] - in[a]);
      if (nb[1] >= 0) acc -= wx * (in[nb[1]] - in[a]);
      if (nb[2] >= 0) acc -= wy * (in[nb[2]] - in[a]);
      if (nb[3] >= 0) acc -= wy * (in[nb[3]] - in[a]);
      out[a] = acc;
    }
  };

  double bnorm = 0.0;
  for (int a = 0; a < n; ++a) bnorm += b[a] * b[a];
  bnorm = std::sqrt(bnorm);
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    return {0, 0.0};
  }

  w.r.resize(n);
  w.z.resize(n);
  w.p.resize(n);
  w.Ap.resize(n);
  w.diag.resize(n);
  for (int a = 0; a < n; ++a) {
    const auto& nb = g.nbr[a];
    w.diag[a] = 1.0 + wx * ((nb[0] >= 0) + (nb[1] >= 0)) + wy * ((nb[2] >= 0) + (nb[3] >= 0));
  }

  apply(x, w.Ap);
  double rnorm2 = 0.0;
  for (int a = 0; a < n; ++a) {
    w.r[a] = b[a] - w.Ap[a];
    rnorm2 += w.r[a] * w.r[a];
  }
  double rz = 0.0;
  for (int a = 0; a < n; ++a) {
    w.z[a] = w.r[a] / w.diag[a];
    w.p[a] = w.z[a];
    rz += w.r[a] * w.z[a];
  }

  int it = 0;
  while (std::sqrt(rnorm2) > tol * bnorm) {
    if (it >= max_iter)
      throw LinearSolveFailure("diffusion solve: no convergence in " +
                               std::to_string(max_iter) + " iterations (residual " +
                               std::to_string(std::sqrt(rnorm2) / bnorm) + ")");
    apply(w.p, w.Ap);
    double pAp = 0.0;
    for (int a = 0; a < n; ++a) pAp += w.p[a] * w.Ap[a];
    const double alpha = rz / pAp;
    rnorm2 = 0.0;
    for (int a = 0; a < n; ++a) {
      x[a] += alpha * w.p[a];
      w.r[a] -= alpha * w.Ap[a];
      rnorm2 += w.r[a] * w.r[a];
    }
    double rz_new = 0.0;
    for (int a = 0; a < n; ++a) {
      w.z[a] = w.r[a] / w.diag[a];
      rz_new += w.r[a] * w.z[a];
    }
    const double beta = rz_new / rz;
    rz = rz_new;
    for (int a = 0; a < n; ++a) w.p[a] = w.z[a] + beta * w.p[a];
    ++it;
  }
  return {it, std::sqrt(rnorm2) / bnorm};
}

// ---------------------------------------------------------------------------
// Reaction stage: per-cell implicit solve of v = x + h r(v).

struct ReactionSolveOptions {
  double tol = 1e-13;   // residual tolerance, scaled by max(1, |x|, |v|)
  int max_newton = 25;
  int max_halvings = 24;  // substep refinement cap: up to 2^24 substeps
};

/// Solves the reaction update per cell with backward-Euler substeps. The
/// solve is damped Newton started from a positivity-preserving predictor
/// (production explicit, destruction implicitly scaled); when Newton fails
/// or lands on a negative root, the step is retried with twice as many
/// uniform substeps. Decisions depend only on the inputs, so an adjoint
/// replay reproduces the exact substep decomposition. The converged update
/// satisfies v = x + h r(v) to roundoff, which transfers conservation of any
/// vector w with w.r identically zero to the discrete step.
class ReactionStepper {
 public:
  explicit ReactionStepper(const CompiledRates& rates, ReactionSolveOptions opt = {})
      : rates_(&rates), opt_(opt), n_(rates.n_species()),
        p_(n_), q_(n_), rv_(n_), f_(n_), vtrial_(n_), dv_(n_), xcur_(n_),
        J_(n_, n_), piv_(n_) {}

  int substeps_used() const { return last_substeps_; }

  /// v <- solution of v = x + h r(v, k, ext), componentwise >= 0.
  void advance_cell(std::span<const double> x, std::span<const double> k,
                    std::span<const double> ext, double h, std::span<double> v) {
    if (!try_chain(x, k, ext, h, &v, nullptr))
      throw ReactionSolveFailure("reaction update failed at " +
                                 std::to_string(1 << opt_.max_halvings) + " substeps");
  }

  /// Reverse-mode update through the same substep chain: on entry `gbar`
  /// holds dJ/dv; on return it holds dJ/dx, and h * (dr/dk)^T contributions
  /// accumulate into `gk` (which may be empty to skip).
  void adjoint_cell(std::span<const double> x, std::span<const double> k,
                    std::span<const double> ext, double h, std::span<double> gbar,
                    std::span<double> gk) {
    chain_.clear();
    if (!try_chain(x, k, ext, h, nullptr, &chain_))
      throw ReactionSolveFailure("adjoint replay: reaction update failed");
    const int n_sub = static_cast<int>(chain_.size() / n_) - 1;
    const double hsub = h / n_sub;
    for (int s = n_sub - 1; s >= 0; --s) {
      std::span<const double> vs(chain_.data() + size_t(s + 1) * n_, n_);
      rates_->jacobian_u(vs, k, ext, J_);
      // transpose of (I - h J) in place
      for (int i = 0; i < n_; ++i)
        for (int j = i; j < n_; ++j) {
          const double aij = (i == j ? 1.0 : 0.0) - hsub * J_(i, j);
          const double aji = (i == j ? 1.0 : 0.0) - hsub * J_(j, i);
          J_(i, j) = aji;
          J_(j, i) = aij;
        }
      if (!lu_factor(J_, piv_))
        throw ReactionSolveFailure("adjoint replay: singular reaction Jacobian");
      lu_solve(J_, piv_, gbar, f_);
      std::copy(f_.begin(), f_.end(), gbar.begin());
      if (!gk.empty()) {
        for (const auto& t : rates_->terms()) {
          double val = t.coef;
          if (t.j1 >= 0) val *= vs[t.j1];
          if (t.j2 >= 0) val *= vs[t.j2];
          if (t.e1 >= 0) val *= ext[t.e1];
          if (t.e2 >= 0) val *= ext[t.e2];
          gk[t.rate] += hsub * val * gbar[t.species];
        }
      }
    }
  }

 private:
  /// Runs the substep chain, doubling the substep count on failure. Exactly
  /// one of `v_out` / `chain` is used: `chain` records all n_sub+1 states.
  bool try_chain(std::span<const double> x, std::span<const double> k,
                 std::span<const double> ext, double h, std::span<double>* v_out,
                 std::vector<double>* chain) {
    for (int halv = 0; halv <= opt_.max_halvings; ++halv) {
      const int n_sub = 1 << halv;
      const double hsub = h / n_sub;
      std::copy(x.begin(), x.end(), xcur_.begin());
      if (chain) {
        chain->assign(x.begin(), x.end());
      }
      bool ok = true;
      for (int s = 0; s < n_sub; ++s) {
        if (!be_solve(xcur_, k, ext, hsub, vtrial_)) {
          ok = false;
          break;
        }
        std::copy(vtrial_.begin(), vtrial_.end(), xcur_.begin());
        if (chain) chain->insert(chain->end(), vtrial_.begin(), vtrial_.end());
      }
      if (ok) {
        last_substeps_ = n_sub;
        if (v_out) std::copy(xcur_.begin(), xcur_.end(), v_out->begin());
        return true;
      }
      if (chain) chain->clear();
    }
    return false;
  }

  bool be_solve(std::span<const double> x, std::span<const double> k,
                std::span<const double> ext, double h, std::vector<double>& v) {
    double scale = 1.0;
    if (rates_->quasi_positive()) {
      rates_->eval_split(x, k, ext, p_, q_);
      for (int i = 0; i < n_; ++i) {
        v[i] = (x[i] + h * p_[i]) / (1.0 + h * q_[i]);
        scale = std::max(scale, std::abs(x[i]));
      }
    } else {
      for (int i = 0; i < n_; ++i) {
        v[i] = x[i];
        scale = std::max(scale, std::abs(x[i]));
      }
    }
    for (int it = 0; it < opt_.max_newton; ++it) {
      rates_->eval(v, k, ext, rv_);
      double fnorm = 0.0;
      for (int i = 0; i < n_; ++i) {
        f_[i] = v[i] - x[i] - h * rv_[i];
        fnorm = std::max(fnorm, std::abs(f_[i]));
        scale = std::max(scale, std::abs(v[i]));
      }
      if (!std::isfinite(fnorm)) return false;
      if (fnorm <= opt_.tol * scale) {
        const double floor = -1e-14 * scale;
        for (int i = 0; i < n_; ++i) {
          if (v[i] < floor) return false;  // negative root: refine substeps
          if (v[i] < 0.0) v[i] = 0.0;
        }
        return true;
      }
      rates_->jacobian_u(v, k, ext, J_);
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) J_(i, j) = (i == j ? 1.0 : 0.0) - h * J_(i, j);
      if (!lu_factor(J_, piv_)) return false;
      for (int i = 0; i < n_; ++i) f_[i] = -f_[i];
      // dv_ is a dedicated buffer: v may alias vtrial_ in the substep chain
      lu_solve(J_, piv_, f_, dv_);
      double alpha = 1.0;
      for (int i = 0; i < n_; ++i)
        if (v[i] + dv_[i] < 0.0 && dv_[i] < 0.0)
          alpha = std::min(alpha, 0.95 * v[i] / -dv_[i]);
      if (alpha < 1e-6) return false;  // stuck on the boundary: refine substeps
      for (int i = 0; i < n_; ++i) v[i] += alpha * dv_[i];
    }
    return false;
  }

  const CompiledRates* rates_;
  ReactionSolveOptions opt_;
  int n_;
  int last_substeps_ = 1;
  std::vector<double> p_, q_, rv_, f_, vtrial_, dv_, xcur_, chain_;
  DenseMatrix J_;
  std::vector<int> piv_;
};

// ---------------------------------------------------------------------------
// Full step and forward solve

struct ForwardOptions {
  double lin_tol = 1e-12;
  int lin_maxiter_factor = 10;  // iteration cap = factor * active cells
  ReactionSolveOptions reaction;
  double destruction_dt_warn = 10.0;
  std::ostream* warnings = nullptr;
};

struct StepWorkspace {
  std::vector<double> xcell, vcell, extcell, vfield;
  PcgWork pcg;
};

/// Advances one time step: implicit reaction per cell (exactly conservative,
/// nonnegative), then implicit diffusion per species through the M-matrix
/// solve. The exact diffusion solve preserves both the cell sum and
/// nonnegativity of its nonnegative input; the iterative solve leaves
/// residual-scale noise in both, so negatives are clamped and the field is
/// rescaled back to the exact pre-solve sum. Both corrections are identities
/// in exact arithmetic and so do not perturb the adjoint.
inline void step(const CompiledRates& rates, ReactionStepper& stepper,
                 const SpatialGrid& g, std::span<const double> u_in,
                 std::span<const double> d, std::span<const double> k,
                 const ExternalFields& ext, int level, double dt,
                 const ForwardOptions& opt, std::span<double> u_out, StepWorkspace& w) {
  const int N = rates.n_species(), nc = g.n_active;
  w.xcell.resize(N);
  w.vcell.resize(N);
  w.extcell.resize(rates.n_external());
  w.vfield.resize(size_t(N) * nc);

  for (int a = 0; a < nc; ++a) {
    for (int i = 0; i < N; ++i) w.xcell[i] = u_in[size_t(i) * nc + a];
    ext.gather_cell(level, a, w.extcell);
    stepper.advance_cell(w.xcell, k, w.extcell, dt, w.vcell);
    for (int i = 0; i < N; ++i) w.vfield[size_t(i) * nc + a] = w.vcell[i];
  }

  const int max_iter = opt.lin_maxiter_factor * nc;
  for (int i = 0; i < N; ++i) {
    std::span<const double> b(w.vfield.data() + size_t(i) * nc, size_t(nc));
    std::span<double> x(u_out.data() + size_t(i) * nc, size_t(nc));
    std::copy(b.begin(), b.end(), x.begin());
    pcg_solve(g, dt * d[i], b, x, opt.lin_tol, max_iter, w.pcg);

    double sb = 0.0;
    for (int a = 0; a < nc; ++a) sb += b[a];
    double sx = 0.0;
    for (int a = 0; a < nc; ++a) {
      if (x[a] < 0.0) x[a] = 0.0;
      sx += x[a];
    }
    if (sb > 0.0) {
      if (!(sx > 0.0))
        throw LinearSolveFailure("diffusion emptied a field holding positive mass");
      const double scale = sb / sx;
      for (int a = 0; a < nc; ++a) x[a] *= scale;
    }
  }
  if (!all_finite(u_out)) throw NonFiniteState("state is not finite after a step");
}

inline StateTrajectory solve_forward(const CompiledRates& rates, const SpatialGrid& g,
                                     const TimeAxis& time, std::span<const double> d,
                                     std::span<const double> k,
                                     std::span<const double> u0,
                                     const ExternalFields& ext,
                                     const ForwardOptions& opt = {}) {
  const int N = rates.n_species(), nc = g.n_active;
  if (time.T <= 0.0 || time.nt < 1) throw ConfigError("time axis requires T > 0, nt >= 1");
  if (static_cast<int>(d.size()) != N || static_cast<int>(k.size()) != rates.n_rates())
    throw DimensionMismatch("parameter vector lengths");
  if (static_cast<int>(u0.size()) != N * nc) throw DimensionMismatch("initial state length");
  bool has_zero = false;
  for (double v : u0) {
    if (v < 0.0) throw InvalidInitial("initial state has negative entries");
    if (v == 0.0) has_zero = true;
  }
  if (has_zero && opt.warnings)
    *opt.warnings << "note: initial state touches zero; the scheme tolerates this\n";

  StateTrajectory traj(time.nt + 1, N, nc);
  std::copy(u0.begin(), u0.end(), traj.level(0).begin());

  ReactionStepper stepper(rates, opt.reaction);
  StepWorkspace work;

  if (opt.warnings && nc > 0 && rates.quasi_positive()) {
    std::vector<double> p(N), q(N), e(rates.n_external());
    std::vector<double> x0(N);
    for (int i = 0; i < N; ++i) x0[i] = u0[size_t(i) * nc];
    ext.gather_cell(0, 0, e);
    rates.eval_split(x0, k, e, p, q);
    const double qmax = max_abs(q);
    if (time.dt() * qmax > opt.destruction_dt_warn)
      *opt.warnings << "note: dt * max destruction rate = " << time.dt() * qmax
                    << "; expect substepping (accuracy, not stability)\n";
  }

  for (int m = 0; m < time.nt; ++m)
    step(rates, stepper, g, traj.level(m), d, k, ext, m, time.dt(), opt, traj.level(m + 1),
         work);
  return traj;
}

}  // namespace rdident
