#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rdident/common.hpp"

namespace rdident {

/// One chemical species. `composition` is the multiset of base-protein names
/// the species is built from (kept sorted); its size is the species category.
/// Modification states (e.g. a phosphorylated form) share the composition of
/// the plain form. External species are prescribed fields: they appear in
/// rate terms but carry no balance equation of their own.
struct Species {
  std::string name;
  std::vector<std::string> composition;
  bool external = false;
  bool observed = false;
  bool membrane = false;
  bool initial_known = false;

  int category() const { return static_cast<int>(composition.size()); }
};

/// Reference to a participant: either an index into the internal species list
/// or, when `external` is set, into the external species list.
struct SpeciesRef {
  bool external = false;
  int index = 0;
  friend bool operator==(const SpeciesRef&, const SpeciesRef&) = default;
};

enum class ReactionKind { association, dissociation, conversion, invalid };

/// A single irreversible mass-action reaction. Reversible statements are
/// desugared into two of these with consecutive rate indices; the second leg
/// carries `backward = true` (this drives the default rate bounds).
struct ElementaryReaction {
  std::vector<SpeciesRef> reactants;
  std::vector<SpeciesRef> products;
  int rate = 0;
  bool backward = false;

  ReactionKind kind() const {
    const size_t nr = reactants.size(), np = products.size();
    if (nr == 2 && np == 1) return ReactionKind::association;
    if (nr == 1 && np == 2) return ReactionKind::dissociation;
    if (nr == 1 && np == 1) return ReactionKind::conversion;
    return ReactionKind::invalid;
  }
};

/// Mass-action reaction network. Internal species are kept in non-decreasing
/// category order (stable with respect to declaration), which the certificate
/// construction relies on. Rate constants are dense-indexed 0..M-1 and keep
/// their file names for serialization and reporting.
class ReactionNetwork {
 public:
  const std::vector<Species>& species() const { return internal_; }
  const std::vector<Species>& externals() const { return external_; }
  const std::vector<ElementaryReaction>& reactions() const { return reactions_; }
  const std::vector<std::string>& rate_names() const { return rate_names_; }

  int n_species() const { return static_cast<int>(internal_.size()); }
  int n_rates() const { return static_cast<int>(rate_names_.size()); }
  int n_external() const { return static_cast<int>(external_.size()); }

  /// Index of an internal species by name; -1 if absent.
  int species_index(const std::string& name) const {
    auto it = internal_index_.find(name);
    return it == internal_index_.end() ? -1 : it->second;
  }
  int external_index(const std::string& name) const {
    auto it = external_index_.find(name);
    return it == external_index_.end() ? -1 : it->second;
  }
  int rate_index(const std::string& name) const {
    for (int i = 0; i < n_rates(); ++i)
      if (rate_names_[i] == name) return i;
    return -1;
  }

  const std::string& participant_name(const SpeciesRef& ref) const {
    return ref.external ? external_[ref.index].name : internal_[ref.index].name;
  }

 private:
  friend class NetworkBuilder;
  std::vector<Species> internal_;
  std::vector<Species> external_;
  std::vector<ElementaryReaction> reactions_;
  std::vector<std::string> rate_names_;
  std::map<std::string, int> internal_index_;
  std::map<std::string, int> external_index_;
};

/// Incremental construction with name resolution. Species may be declared in
/// any order; internal species are stable-sorted by category at build time so
/// the network invariant holds regardless of declaration order.
class NetworkBuilder {
 public:
  NetworkBuilder& species(Species s) {
    if (s.composition.empty())
      throw NonCompliantNetwork("species '" + s.name + "' has empty composition");
    std::sort(s.composition.begin(), s.composition.end());
    for (const auto& d : declared_)
      if (d.name == s.name) throw DuplicateSpecies("duplicate species '" + s.name + "'");
    declared_.push_back(std::move(s));
    return *this;
  }

  NetworkBuilder& species(const std::string& name, std::vector<std::string> composition,
                          bool external = false, bool observed = false,
                          bool membrane = false, bool initial_known = false) {
    return species(Species{name, std::move(composition), external, observed, membrane,
                           initial_known});
  }

  /// Adds one irreversible reaction; the rate name must be fresh.
  NetworkBuilder& reaction(std::vector<std::string> reactants,
                           std::vector<std::string> products, const std::string& rate,
                           bool backward = false) {
    raw_.push_back({std::move(reactants), std::move(products), rate, backward});
    return *this;
  }

  /// Adds a reversible pair: forward then backward, consecutive rate indices.
  NetworkBuilder& reversible(const std::vector<std::string>& lhs,
                             const std::vector<std::string>& rhs,
                             const std::string& rate_fwd, const std::string& rate_bwd) {
    reaction(lhs, rhs, rate_fwd, false);
    reaction(rhs, lhs, rate_bwd, true);
    return *this;
  }

  ReactionNetwork build() const {
    ReactionNetwork net;
    for (const auto& s : declared_)
      (s.external ? net.external_ : net.internal_).push_back(s);
    std::stable_sort(net.internal_.begin(), net.internal_.end(),
                     [](const Species& a, const Species& b) {
                       return a.category() < b.category();
                     });
    for (int i = 0; i < net.n_species(); ++i) net.internal_index_[net.internal_[i].name] = i;
    for (int i = 0; i < net.n_external(); ++i) net.external_index_[net.external_[i].name] = i;

    std::set<std::string> seen_rates;
    for (const auto& r : raw_) {
      if (!seen_rates.insert(r.rate).second)
        throw DuplicateRate("rate '" + r.rate + "' assigned twice");
      ElementaryReaction e;
      e.rate = static_cast<int>(net.rate_names_.size());
      e.backward = r.backward;
      auto resolve = [&](const std::string& name) -> SpeciesRef {
        if (int i = net.species_index(name); i >= 0) return {false, i};
        if (int i = net.external_index(name); i >= 0) return {true, i};
        throw UnknownSpecies("reaction references undeclared species '" + name + "'");
      };
      for (const auto& n : r.reactants) e.reactants.push_back(resolve(n));
      for (const auto& n : r.products) e.products.push_back(resolve(n));
      net.rate_names_.push_back(r.rate);
      net.reactions_.push_back(std::move(e));
    }
    return net;
  }

 private:
  struct RawReaction {
    std::vector<std::string> reactants, products;
    std::string rate;
    bool backward;
  };
  std::vector<Species> declared_;
  std::vector<RawReaction> raw_;
};

// ---------------------------------------------------------------------------
// Validation

struct RuleViolation {
  int reaction;   // index into reactions()
  char rule;      // 'A' (binding arity), 'B' (dissociation arity), 'C' (no 2->2)
  std::string message;
};

/// Composition bookkeeping mismatches are reported but do not make a network
/// non-compliant: compliance is decided by the arity rules alone. (Networks
/// with untracked catalytic participants are common in practice.)
struct CompositionNote {
  int reaction;
  std::string message;
};

struct ValidationReport {
  std::vector<RuleViolation> violations;
  std::vector<CompositionNote> composition_notes;
  bool compliant() const { return violations.empty(); }
};

inline std::string describe_reaction(const ReactionNetwork& net, const ElementaryReaction& e) {
  std::ostringstream os;
  for (size_t i = 0; i < e.reactants.size(); ++i)
    os << (i ? " + " : "") << net.participant_name(e.reactants[i]);
  os << " -> ";
  for (size_t i = 0; i < e.products.size(); ++i)
    os << (i ? " + " : "") << net.participant_name(e.products[i]);
  return os.str();
}

inline ValidationReport validate(const ReactionNetwork& net) {
  ValidationReport rep;
  for (int a = 0; a < static_cast<int>(net.reactions().size()); ++a) {
    const auto& e = net.reactions()[a];
    const size_t nr = e.reactants.size(), np = e.products.size();
    const std::string desc = describe_reaction(net, e);
    if (nr > 2 || nr == 0)
      rep.violations.push_back({a, 'A', desc + ": " + std::to_string(nr) + " reactants"});
    if (np > 2 || np == 0)
      rep.violations.push_back({a, 'B', desc + ": " + std::to_string(np) + " products"});
    if (nr == 2 && np == 2)
      rep.violations.push_back({a, 'C', desc + ": simultaneous binding and dissociation"});
    if (e.kind() == ReactionKind::invalid) continue;

    auto multiset_of = [&](const std::vector<SpeciesRef>& side) {
      std::vector<std::string> bases;
      for (const auto& ref : side) {
        const Species& s = ref.external ? net.externals()[ref.index] : net.species()[ref.index];
        bases.insert(bases.end(), s.composition.begin(), s.composition.end());
      }
      std::sort(bases.begin(), bases.end());
      return bases;
    };
    if (multiset_of(e.reactants) != multiset_of(e.products))
      rep.composition_notes.push_back({a, desc + ": base-protein multisets differ across the reaction"});
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Reaction functions as symbolic quadratic forms

/// One signed coefficient: coef * k[rate] * prod of external field values.
/// External factors only ever appear on constant and linear monomials: a
/// quadratic monomial needs both reactant slots for internal species.
struct RateCoef {
  int rate = 0;
  double coef = 0.0;
  std::vector<int> ext;  // indices into externals(), sorted

  friend bool operator==(const RateCoef&, const RateCoef&) = default;
};

/// Per-species polynomial of degree at most two in the internal state, with
/// coefficients linear in the rate constants.
struct QuadraticForm {
  std::vector<RateCoef> constant;
  std::map<int, std::vector<RateCoef>> linear;                    // u_j
  std::map<std::pair<int, int>, std::vector<RateCoef>> quadratic; // u_a u_b, a <= b
};

namespace detail {
inline void add_coef(std::vector<RateCoef>& list, int rate, double coef,
                     const std::vector<int>& ext) {
  for (auto& c : list)
    if (c.rate == rate && c.ext == ext) {
      c.coef += coef;
      return;
    }
  list.push_back({rate, coef, ext});
}
}  // namespace detail

/// Builds the per-species reaction functions. Requires an arity-compliant
/// network.
inline std::vector<QuadraticForm> reaction_forms(const ReactionNetwork& net) {
  {
    const auto rep = validate(net);
    if (!rep.compliant())
      throw NonCompliantNetwork("reaction_forms: network violates rule (" +
                                std::string(1, rep.violations.front().rule) + "): " +
                                rep.violations.front().message);
  }
  std::vector<QuadraticForm> forms(net.n_species());
  for (const auto& e : net.reactions()) {
    std::vector<int> vars, exts;
    for (const auto& ref : e.reactants)
      (ref.external ? exts : vars).push_back(ref.index);
    std::sort(vars.begin(), vars.end());
    std::sort(exts.begin(), exts.end());

    auto deposit = [&](int target, double sign) {
      auto& f = forms[target];
      if (vars.size() == 2)
        detail::add_coef(f.quadratic[{vars[0], vars[1]}], e.rate, sign, exts);
      else if (vars.size() == 1)
        detail::add_coef(f.linear[vars[0]], e.rate, sign, exts);
      else
        detail::add_coef(f.constant, e.rate, sign, exts);
    };
    for (const auto& ref : e.reactants)
      if (!ref.external) deposit(ref.index, -1.0);
    for (const auto& ref : e.products)
      if (!ref.external) deposit(ref.index, +1.0);
  }
  return forms;
}

// ---------------------------------------------------------------------------
// Compiled evaluation tables

/// Flattened term list for numeric work. Derived from the quadratic forms so
/// the evaluation path and the symbolic certificates share one definition.
struct CompiledTerm {
  int species;
  int j1 = -1, j2 = -1;        // internal variable factors (j1 <= j2 when both set)
  int e1 = -1, e2 = -1;        // external field factors
  int rate = 0;
  double coef = 0.0;
};

class CompiledRates {
 public:
  CompiledRates() = default;

  explicit CompiledRates(const ReactionNetwork& net)
      : n_species_(net.n_species()), n_rates_(net.n_rates()),
        n_external_(net.n_external()) {
    const auto forms = reaction_forms(net);
    for (int i = 0; i < n_species_; ++i) {
      auto push = [&](int j1, int j2, const RateCoef& c) {
        CompiledTerm t;
        t.species = i;
        t.j1 = j1;
        t.j2 = j2;
        t.rate = c.rate;
        t.coef = c.coef;
        if (c.ext.size() > 2)
          throw NonCompliantNetwork("more than two external factors in one term");
        if (!c.ext.empty()) t.e1 = c.ext[0];
        if (c.ext.size() == 2) t.e2 = c.ext[1];
        if (c.coef != 0.0) terms_.push_back(t);
      };
      for (const auto& c : forms[i].constant) push(-1, -1, c);
      for (const auto& [j, list] : forms[i].linear)
        for (const auto& c : list) push(j, -1, c);
      for (const auto& [jj, list] : forms[i].quadratic)
        for (const auto& c : list) push(jj.first, jj.second, c);
    }
    quasi_positive_ = true;
    for (const auto& t : terms_)
      if (t.coef < 0.0 && t.j1 != t.species && t.j2 != t.species) quasi_positive_ = false;
  }

  int n_species() const { return n_species_; }
  int n_rates() const { return n_rates_; }
  int n_external() const { return n_external_; }
  bool quasi_positive() const { return quasi_positive_; }
  const std::vector<CompiledTerm>& terms() const { return terms_; }

  double term_value(const CompiledTerm& t, std::span<const double> u,
                    std::span<const double> k, std::span<const double> ext) const {
    double v = t.coef * k[t.rate];
    if (t.j1 >= 0) v *= u[t.j1];
    if (t.j2 >= 0) v *= u[t.j2];
    if (t.e1 >= 0) v *= ext[t.e1];
    if (t.e2 >= 0) v *= ext[t.e2];
    return v;
  }

  /// r_i(u, k): net production rate per internal species.
  void eval(std::span<const double> u, std::span<const double> k,
            std::span<const double> ext, std::span<double> r) const {
    check_args(u, k, ext);
    if (static_cast<int>(r.size()) != n_species_)
      throw DimensionMismatch("eval: output size");
    std::fill(r.begin(), r.end(), 0.0);
    for (const auto& t : terms_) r[t.species] += term_value(t, u, k, ext);
  }

  /// J(i, j) = dr_i/du_j.
  void jacobian_u(std::span<const double> u, std::span<const double> k,
                  std::span<const double> ext, DenseMatrix& J) const {
    check_args(u, k, ext);
    if (J.rows() != n_species_ || J.cols() != n_species_)
      J = DenseMatrix(n_species_, n_species_);
    else
      std::fill(J.data(), J.data() + size_t(n_species_) * n_species_, 0.0);
    for (const auto& t : terms_) {
      double kk = t.coef * k[t.rate];
      if (t.e1 >= 0) kk *= ext[t.e1];
      if (t.e2 >= 0) kk *= ext[t.e2];
      if (t.j1 < 0) continue;
      if (t.j2 < 0) {
        J(t.species, t.j1) += kk;
      } else if (t.j1 == t.j2) {
        J(t.species, t.j1) += 2.0 * kk * u[t.j1];
      } else {
        J(t.species, t.j1) += kk * u[t.j2];
        J(t.species, t.j2) += kk * u[t.j1];
      }
    }
  }

  /// Jk(i, m) = dr_i/dk_m (r is linear in k).
  void jacobian_k(std::span<const double> u, std::span<const double> ext,
                  DenseMatrix& Jk) const {
    if (Jk.rows() != n_species_ || Jk.cols() != n_rates_)
      Jk = DenseMatrix(n_species_, n_rates_);
    else
      std::fill(Jk.data(), Jk.data() + size_t(n_species_) * n_rates_, 0.0);
    for (const auto& t : terms_) {
      double v = t.coef;
      if (t.j1 >= 0) v *= u[t.j1];
      if (t.j2 >= 0) v *= u[t.j2];
      if (t.e1 >= 0) v *= ext[t.e1];
      if (t.e2 >= 0) v *= ext[t.e2];
      Jk(t.species, t.rate) += v;
    }
  }

  /// Splits r_i = p_i - u_i q_i with nonnegative p, q (possible exactly when
  /// the network is quasi-positive). Used as the positivity-preserving
  /// predictor for the implicit reaction solve.
  void eval_split(std::span<const double> u, std::span<const double> k,
                  std::span<const double> ext, std::span<double> p,
                  std::span<double> q) const {
    if (!quasi_positive_)
      throw CertificateFailure("eval_split: network is not quasi-positive");
    check_args(u, k, ext);
    std::fill(p.begin(), p.end(), 0.0);
    std::fill(q.begin(), q.end(), 0.0);
    for (const auto& t : terms_) {
      if (t.coef > 0.0) {
        p[t.species] += term_value(t, u, k, ext);
      } else {
        // negative terms carry a u_i factor; divide one out
        double v = -t.coef * k[t.rate];
        if (t.e1 >= 0) v *= ext[t.e1];
        if (t.e2 >= 0) v *= ext[t.e2];
        if (t.j1 == t.species) {
          if (t.j2 >= 0) v *= u[t.j2];
        } else {
          v *= u[t.j1];
        }
        q[t.species] += v;
      }
    }
  }

 private:
  void check_args(std::span<const double> u, std::span<const double> k,
                  std::span<const double> ext) const {
    if (static_cast<int>(u.size()) != n_species_ ||
        static_cast<int>(k.size()) != n_rates_ ||
        static_cast<int>(ext.size()) != n_external_)
      throw DimensionMismatch("rate evaluation: argument sizes");
  }

  int n_species_ = 0, n_rates_ = 0, n_external_ = 0;
  bool quasi_positive_ = true;
  std::vector<CompiledTerm> terms_;
};

/// Convenience wrapper matching the one-shot use in tests and the CLI.
inline std::vector<double> evaluate_rates(const CompiledRates& c, std::span<const double> u,
                                          std::span<const double> k,
                                          std::span<const double> ext = {}) {
  std::vector<double> r(c.n_species());
  std::vector<double> no_ext;
  if (ext.empty() && c.n_external() > 0) no_ext.assign(c.n_external(), 0.0);
  c.eval(u, k, ext.empty() && c.n_external() > 0 ? std::span<const double>(no_ext) : ext, r);
  return r;
}

// ---------------------------------------------------------------------------
// Certificates

struct QuasiPositivityCertificate {
  int terms_checked = 0;
};

/// Verifies that every negative coefficient multiplies the species' own
/// concentration, so r_i(u) >= 0 whenever u >= 0 and u_i = 0. Throws
/// CertificateFailure naming the offending term.
inline QuasiPositivityCertificate check_quasi_positivity(
    const std::vector<QuadraticForm>& forms) {
  QuasiPositivityCertificate cert;
  const double tol = 0.0;
  for (int i = 0; i < static_cast<int>(forms.size()); ++i) {
    for (const auto& c : forms[i].constant) {
      ++cert.terms_checked;
      if (c.coef < tol)
        throw CertificateFailure("species " + std::to_string(i + 1) +
                                 ": negative constant term via rate index " +
                                 std::to_string(c.rate + 1));
    }
    for (const auto& [j, list] : forms[i].linear)
      for (const auto& c : list) {
        ++cert.terms_checked;
        if (c.coef < tol && j != i)
          throw CertificateFailure("species " + std::to_string(i + 1) +
                                   ": negative linear term in u_" + std::to_string(j + 1));
      }
    for (const auto& [jj, list] : forms[i].quadratic)
      for (const auto& c : list) {
        ++cert.terms_checked;
        if (c.coef < tol && jj.first != i && jj.second != i)
          throw CertificateFailure("species " + std::to_string(i + 1) +
                                   ": negative quadratic term in u_" +
                                   std::to_string(jj.first + 1) + " u_" +
                                   std::to_string(jj.second + 1));
      }
  }
  return cert;
}

inline QuasiPositivityCertificate check_quasi_positivity(const ReactionNetwork& net) {
  return check_quasi_positivity(reaction_forms(net));
}

namespace detail {
/// Quadratic part of a row combination: (a,b) monomial -> rate -> coefficient.
/// Quadratic monomials never carry external factors (see RateCoef).
using QuadCoeffs = std::map<std::pair<int, int>, std::map<int, double>>;

inline QuadCoeffs quad_coeffs(const QuadraticForm& f) {
  QuadCoeffs q;
  for (const auto& [jj, list] : f.quadratic)
    for (const auto& c : list)
      if (c.coef != 0.0) q[jj][c.rate] += c.coef;
  return q;
}

inline void axpy(QuadCoeffs& dst, double w, const QuadCoeffs& src) {
  for (const auto& [jj, rates] : src)
    for (const auto& [rate, c] : rates) dst[jj][rate] += w * c;
}
}  // namespace detail

/// Builds the lower-triangular matrix L (unit diagonal, nonnegative entries)
/// such that every quadratic coefficient of L*r is nonpositive. Row i starts
/// as e_i; every positive quadratic monomial u_l u_m (an association forming
/// species i from lower-index species) is neutralized by raising the weight
/// of the already-certified rows l and m to 0.5, in ascending (l, m)
/// lexicographic order. Raising is idempotent per row, which is what keeps
/// shared association partners at weight 0.5 instead of accumulating.
inline DenseMatrix lower_triangular_certificate(const ReactionNetwork& net) {
  const auto forms = reaction_forms(net);
  const int n = net.n_species();
  DenseMatrix L(n, n);
  std::vector<detail::QuadCoeffs> row_quads(n);

  const double tol = 1e-12;
  for (int i = 0; i < n; ++i) {
    L(i, i) = 1.0;
    detail::QuadCoeffs combined = detail::quad_coeffs(forms[i]);
    std::vector<double> lambda(n, 0.0);

    for (int pass = 0; pass < 100; ++pass) {
      std::optional<std::pair<int, int>> worst;
      for (const auto& [jj, rates] : combined) {
        for (const auto& [rate, c] : rates)
          if (c > tol) { worst = jj; break; }
        if (worst) break;
      }
      if (!worst) break;
      const auto [l, m] = *worst;
      if (l >= i || m >= i)
        throw ConstructionFailure(
            "row " + std::to_string(i + 1) + ": positive quadratic term u_" +
            std::to_string(l + 1) + " u_" + std::to_string(m + 1) +
            " is not formed from lower-index species");
      bool progressed = false;
      for (int j : {l, m}) {
        if (lambda[j] >= 0.5) continue;
        const double w = 0.5 - lambda[j];
        lambda[j] = 0.5;
        for (int c = 0; c <= j; ++c) L(i, c) += w * L(j, c);
        detail::axpy(combined, w, row_quads[j]);
        progressed = true;
      }
      if (!progressed)
        throw ConstructionFailure("row " + std::to_string(i + 1) +
                                  ": no admissible correction for u_" +
                                  std::to_string(l + 1) + " u_" + std::to_string(m + 1));
    }

    for (const auto& [jj, rates] : combined)
      for (const auto& [rate, c] : rates)
        if (c > tol)
          throw ConstructionFailure("row " + std::to_string(i + 1) +
                                    ": residual positive quadratic coefficient");
    row_quads[i] = std::move(combined);
  }
  return L;
}

/// Checks that the quadratic part of sum_i r_i is coefficient-wise
/// nonpositive and reports the largest net linear/constant coefficient of the
/// summed rates at unit rate constants and unit external fields. That
/// constant scales linearly with k, so it is a reference value, not a
/// runtime bound.
struct SumBoundCertificate {
  bool quadratic_ok = true;
  double a_unit = 0.0;
  std::string offending;
};

inline SumBoundCertificate sum_bound_certificate(const ReactionNetwork& net) {
  const auto forms = reaction_forms(net);
  SumBoundCertificate cert;

  std::map<std::pair<int, int>, std::map<int, double>> quad;
  std::map<int, double> lin;  // per linear monomial: net coefficient at k=1
  double const_sum = 0.0;
  for (const auto& f : forms) {
    for (const auto& [jj, list] : f.quadratic)
      for (const auto& c : list) quad[jj][c.rate] += c.coef;
    for (const auto& [j, list] : f.linear) {
      double s = 0.0;
      for (const auto& c : list) s += c.coef;
      lin[j] += s;
    }
    for (const auto& c : f.constant) const_sum += c.coef;
  }
  for (const auto& [jj, rates] : quad)
    for (const auto& [rate, c] : rates)
      if (c > 1e-12) {
        cert.quadratic_ok = false;
        cert.offending = "u_" + std::to_string(jj.first + 1) + " u_" +
                         std::to_string(jj.second + 1) + " via rate index " +
                         std::to_string(rate + 1);
      }
  cert.a_unit = std::max(0.0, const_sum);
  for (const auto& [j, s] : lin) cert.a_unit = std::max(cert.a_unit, s);
  return cert;
}

/// Conserved moieties: nonnegative integer left null vectors of the internal
/// stoichiometric matrix, generated from per-base-protein composition counts.
/// Counts involving externally supplied bases drop out automatically (their
/// reactions change the tracked total).
inline std::vector<std::vector<int>> conserved_moieties(const ReactionNetwork& net) {
  const int n = net.n_species();
  std::set<std::string> bases;
  for (const auto& s : net.species())
    for (const auto& b : s.composition) bases.insert(b);

  std::vector<std::vector<int>> result;
  for (const auto& b : bases) {
    std::vector<int> w(n, 0);
    for (int i = 0; i < n; ++i)
      w[i] = static_cast<int>(std::count(net.species()[i].composition.begin(),
                                         net.species()[i].composition.end(), b));
    bool conserved = true;
    for (const auto& e : net.reactions()) {
      long net_change = 0;
      for (const auto& ref : e.products)
        if (!ref.external) net_change += w[ref.index];
      for (const auto& ref : e.reactants)
        if (!ref.external) net_change -= w[ref.index];
      if (net_change != 0) { conserved = false; break; }
    }
    if (!conserved) continue;
    if (std::all_of(w.begin(), w.end(), [](int x) { return x == 0; })) continue;
    if (std::find(result.begin(), result.end(), w) == result.end())
      result.push_back(std::move(w));
  }
  return result;
}

}  // namespace rdident
