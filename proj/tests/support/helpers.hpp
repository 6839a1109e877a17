#pragma once

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "rdident/rdident.hpp"

namespace testsup {

/// Scratch directory, removed on destruction.
struct TmpDir {
  std::filesystem::path path;

  explicit TmpDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("rdident-" + tag + "-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TmpDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

/// Multiset of base names, kept sorted like Species::composition.
using Comp = std::vector<std::string>;

inline Comp merge(const Comp& a, const Comp& b) {
  Comp out = a;
  out.insert(out.end(), b.begin(), b.end());
  std::sort(out.begin(), out.end());
  return out;
}

/// Random network that respects the structural rules by construction: every
/// complex composition is the union of its parts, dissociations split a
/// composition, conversions keep it. Arity stays inside the binding and
/// dissociation limits and 2->2 never appears.
inline rdident::ReactionNetwork random_compliant_network(std::mt19937_64& rng,
                                                         int max_species = 12) {
  using rdident::NetworkBuilder;
  auto pick = [&](int n) { return static_cast<int>(rng() % n); };

  const int n_bases = 2 + pick(2);
  std::vector<std::string> bases;
  for (int b = 0; b < n_bases; ++b) bases.push_back("X" + std::to_string(b));

  // species pool: names + compositions; start with one or two per base
  std::vector<std::string> names;
  std::vector<Comp> comps;
  auto add_species = [&](const Comp& c) {
    names.push_back("S" + std::to_string(names.size()));
    comps.push_back(c);
    return static_cast<int>(names.size()) - 1;
  };
  for (const auto& b : bases) {
    add_species({b});
    if (pick(2) == 0 && static_cast<int>(names.size()) < max_species) add_species({b});
  }

  auto find_comp = [&](const Comp& c) {
    std::vector<int> hits;
    for (int i = 0; i < static_cast<int>(comps.size()); ++i)
      if (comps[i] == c) hits.push_back(i);
    return hits;
  };
  auto get_or_make = [&](const Comp& c) -> int {
    const auto hits = find_comp(c);
    if (!hits.empty() && (pick(2) == 0 || static_cast<int>(names.size()) >= max_species))
      return hits[pick(static_cast<int>(hits.size()))];
    if (static_cast<int>(names.size()) < max_species) return add_species(c);
    return hits.empty() ? -1 : hits[pick(static_cast<int>(hits.size()))];
  };

  struct Rxn {
    std::vector<std::string> lhs, rhs;
    bool reversible;
  };
  std::vector<Rxn> rxns;
  const int target = 2 + pick(2 * max_species - 2);
  for (int attempt = 0; attempt < 8 * target && static_cast<int>(rxns.size()) < target;
       ++attempt) {
    const int kind = pick(3);
    if (kind == 0) {  // association
      const int a = pick(static_cast<int>(names.size()));
      const int b = pick(static_cast<int>(names.size()));
      const int c = get_or_make(merge(comps[a], comps[b]));
      if (c < 0 || c == a || c == b) continue;
      rxns.push_back({{names[a], names[b]}, {names[c]}, pick(2) == 0});
    } else if (kind == 1) {  // dissociation
      const int c = pick(static_cast<int>(names.size()));
      if (comps[c].size() < 2) continue;
      Comp left, right;
      do {
        left.clear();
        right.clear();
        for (const auto& base : comps[c]) (pick(2) == 0 ? left : right).push_back(base);
      } while (left.empty() || right.empty());
      const int a = get_or_make(left), b = get_or_make(right);
      if (a < 0 || b < 0 || a == c || b == c) continue;
      rxns.push_back({{names[c]}, {names[a], names[b]}, pick(2) == 0});
    } else {  // conversion
      const int a = pick(static_cast<int>(names.size()));
      const int b = get_or_make(comps[a]);
      if (b < 0 || b == a) continue;
      rxns.push_back({{names[a]}, {names[b]}, pick(2) == 0});
    }
  }
  if (rxns.empty()) {
    const int a = 0, b = static_cast<int>(names.size()) > 1 ? 1 : 0;
    const int c = get_or_make(merge(comps[a], comps[b]));
    if (c >= 0 && c != a && c != b)
      rxns.push_back({{names[a], names[b]}, {names[c]}, true});
  }

  NetworkBuilder nb;
  for (size_t i = 0; i < names.size(); ++i) nb.species(names[i], comps[i]);
  int rate = 0;
  for (const auto& r : rxns) {
    if (r.reversible) {
      nb.reversible(r.lhs, r.rhs, "k" + std::to_string(rate), "k" + std::to_string(rate + 1));
      rate += 2;
    } else {
      nb.reaction(r.lhs, r.rhs, "k" + std::to_string(rate));
      rate += 1;
    }
  }
  return nb.build();
}

inline std::vector<double> random_vector(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

/// Dense oracle for the implicit diffusion solve: assembles I - c*Laplacian
/// over the active cells and solves directly.
inline std::vector<double> dense_diffusion_solve(const rdident::SpatialGrid& g, double c,
                                                 std::span<const double> b) {
  const int n = g.n_active;
  rdident::DenseMatrix A(n, n);
  const double wx = c / (g.hx * g.hx), wy = c / (g.hy * g.hy);
  for (int a = 0; a < n; ++a) {
    A(a, a) = 1.0;
    const auto& nb = g.nbr[a];
    const double w[4] = {wx, wx, wy, wy};
    for (int s = 0; s < 4; ++s)
      if (nb[s] >= 0) {
        A(a, a) += w[s];
        A(a, nb[s]) -= w[s];
      }
  }
  return rdident::dense_solve(A, b);
}

/// Central finite difference of a scalar functional.
template <typename F>
double central_fd(F&& f, std::vector<double> x, size_t i, double h) {
  x[i] += h;
  const double fp = f(x);
  x[i] -= 2 * h;
  const double fm = f(x);
  return (fp - fm) / (2 * h);
}

}  // namespace testsup
