#include <catch2/catch_amalgamated.hpp>

#include "support/helpers.hpp"

using namespace rdident;
using Catch::Approx;

namespace {

ReactionNetwork three_protein() { return parse_network_file("data/three_protein.rxn"); }
ReactionNetwork factin() { return parse_network_file("data/factin.rxn"); }

/// Direct per-reaction mass-action loop, independent of the compiled term
/// tables: rate = k * product of reactant concentrations, subtracted from
/// every internal reactant and added to every internal product.
std::vector<double> naive_rates(const ReactionNetwork& net, std::span<const double> u,
                                std::span<const double> k, std::span<const double> ext) {
  std::vector<double> r(net.n_species(), 0.0);
  for (const auto& e : net.reactions()) {
    double v = k[e.rate];
    for (const auto& ref : e.reactants) v *= ref.external ? ext[ref.index] : u[ref.index];
    for (const auto& ref : e.reactants)
      if (!ref.external) r[ref.index] -= v;
    for (const auto& ref : e.products)
      if (!ref.external) r[ref.index] += v;
  }
  return r;
}

}  // namespace

TEST_CASE("mass action rates match hand-computed values") {
  const auto net = three_protein();
  REQUIRE(net.n_species() == 9);
  REQUIRE(net.n_rates() == 12);
  REQUIRE(net.n_external() == 0);
  const CompiledRates cr(net);

  // Only pA, B, pAB populated; only the first binding pair active.
  std::vector<double> u(9, 0.0), k(12, 0.0), r(9);
  u[net.species_index("pA")] = 1.0;
  u[net.species_index("B")] = 2.0;
  u[net.species_index("pAB")] = 3.0;
  k[0] = 1.0;  // k1
  k[1] = 2.0;  // k2
  cr.eval(u, k, {}, r);
  CHECK(r[net.species_index("B")] == Approx(4.0).margin(1e-14));
  CHECK(r[net.species_index("pA")] == Approx(4.0).margin(1e-14));
  CHECK(r[net.species_index("pAB")] == Approx(-4.0).margin(1e-14));

  DenseMatrix J, Jk;
  cr.jacobian_u(u, k, {}, J);
  CHECK(J(net.species_index("B"), net.species_index("pA")) == Approx(-2.0).margin(1e-14));
  cr.jacobian_k(u, {}, Jk);
  CHECK(Jk(net.species_index("B"), 1) == Approx(3.0).margin(1e-14));

  // Full vector at a generic point, all twelve rates distinct.
  std::vector<double> u2 = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<double> k2 = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  cr.eval(u2, k2, {}, r);
  const double expect[9] = {11.89, 8.7, 10.28, 1.36, 21.65, 3.9, -3.34, -8.3, -17.25};
  for (int i = 0; i < 9; ++i) CHECK(r[i] == Approx(expect[i]).margin(1e-12));
}

TEST_CASE("jacobians match central finite differences") {
  const auto net = three_protein();
  const CompiledRates cr(net);
  std::mt19937_64 rng(42);
  const auto u = testsup::random_vector(rng, 9, 0.05, 2.0);
  const auto k = testsup::random_vector(rng, 12, 0.1, 3.0);

  DenseMatrix J, Jk;
  cr.jacobian_u(u, k, {}, J);
  cr.jacobian_k(u, {}, Jk);

  const double h = 1e-6;
  std::vector<double> r(9);
  for (int j = 0; j < 9; ++j) {
    auto up = u, um = u;
    up[j] += h;
    um[j] -= h;
    std::vector<double> rp(9), rm(9);
    cr.eval(up, k, {}, rp);
    cr.eval(um, k, {}, rm);
    for (int i = 0; i < 9; ++i)
      CHECK(J(i, j) == Approx((rp[i] - rm[i]) / (2 * h)).margin(1e-6));
  }
  for (int m = 0; m < 12; ++m) {
    auto kp = k, km = k;
    kp[m] += h;
    km[m] -= h;
    std::vector<double> rp(9), rm(9);
    cr.eval(u, kp, {}, rp);
    cr.eval(u, km, {}, rm);
    for (int i = 0; i < 9; ++i)
      CHECK(Jk(i, m) == Approx((rp[i] - rm[i]) / (2 * h)).margin(1e-6));
  }
}

TEST_CASE("compiled evaluation agrees with a direct reaction loop") {
  std::mt19937_64 rng(7);
  for (const auto* path : {"data/three_protein.rxn", "data/factin.rxn"}) {
    const auto net = parse_network_file(path);
    const CompiledRates cr(net);
    std::vector<double> r(net.n_species());
    for (int trial = 0; trial < 50; ++trial) {
      const auto u = testsup::random_vector(rng, net.n_species(), 0.0, 2.0);
      const auto k = testsup::random_vector(rng, net.n_rates(), 1e-3, 5.0);
      const auto ext = testsup::random_vector(rng, net.n_external(), 0.0, 2.0);
      cr.eval(u, k, ext, r);
      const auto ref = naive_rates(net, u, k, ext);
      for (int i = 0; i < net.n_species(); ++i)
        REQUIRE(r[i] == Approx(ref[i]).margin(1e-12 * (1.0 + std::abs(ref[i]))));
    }
  }
}

TEST_CASE("production-destruction split is exact and nonnegative") {
  const auto net = three_protein();
  const CompiledRates cr(net);
  REQUIRE(cr.quasi_positive());
  std::mt19937_64 rng(11);
  std::vector<double> r(9), p(9), q(9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto u = testsup::random_vector(rng, 9, 0.0, 3.0);
    const auto k = testsup::random_vector(rng, 12, 1e-3, 4.0);
    cr.eval(u, k, {}, r);
    cr.eval_split(u, k, {}, p, q);
    for (int i = 0; i < 9; ++i) {
      CHECK(p[i] >= 0.0);
      CHECK(q[i] >= 0.0);
      CHECK(p[i] - u[i] * q[i] == Approx(r[i]).margin(1e-12 * (1.0 + std::abs(r[i]))));
    }
  }
}

TEST_CASE("triangular certificate reproduces the reference matrix") {
  const auto net = three_protein();
  const auto L = lower_triangular_certificate(net);
  REQUIRE(L.rows() == 9);

  DenseMatrix ref = DenseMatrix::identity(9);
  // complexes draw weight 0.5 from each species feeding an association
  const double half = 0.5;
  const int pA = 0, A = 1, pB = 2, B = 3, pC = 4, C = 5, pAB = 6, pBC = 7, pCA = 8;
  ref(pAB, pA) = half;
  ref(pAB, pB) = half;
  ref(pAB, B) = half;
  ref(pBC, pB) = half;
  ref(pBC, pC) = half;
  ref(pBC, C) = half;
  ref(pCA, pA) = half;
  ref(pCA, A) = half;
  ref(pCA, pC) = half;
  CHECK(L == ref);
}

TEST_CASE("sum bound certificate at unit rates") {
  const auto cert = sum_bound_certificate(three_protein());
  CHECK(cert.quadratic_ok);
  CHECK(cert.a_unit == 2.0);
  CHECK(cert.offending.empty());
}

TEST_CASE("conserved moieties of the bundled networks") {
  const auto net = three_protein();
  const auto m = conserved_moieties(net);
  REQUIRE(m.size() == 3);
  CHECK(m[0] == std::vector<int>{1, 1, 0, 0, 0, 0, 1, 0, 1});  // base A
  CHECK(m[1] == std::vector<int>{0, 0, 1, 1, 0, 0, 1, 1, 0});  // base B
  CHECK(m[2] == std::vector<int>{0, 0, 0, 0, 1, 1, 0, 1, 1});  // base C

  const auto fa = factin();
  const auto mf = conserved_moieties(fa);
  CHECK(mf.size() == 10);  // Arp23 recycling and the external ligand break two bases
  for (const auto& w : mf) {
    for (const auto& e : fa.reactions()) {
      long change = 0;
      for (const auto& ref : e.products)
        if (!ref.external) change += w[ref.index];
      for (const auto& ref : e.reactants)
        if (!ref.external) change -= w[ref.index];
      REQUIRE(change == 0);
    }
  }
  // counting Arp23 must NOT be conserved: the severing step drops it
  std::vector<int> arp(fa.n_species(), 0);
  for (int i = 0; i < fa.n_species(); ++i)
    arp[i] = static_cast<int>(std::count(fa.species()[i].composition.begin(),
                                         fa.species()[i].composition.end(), "Arp23"));
  CHECK(std::find(mf.begin(), mf.end(), arp) == mf.end());
}

TEST_CASE("moieties annihilate the rate vector numerically") {
  std::mt19937_64 rng(13);
  for (const auto* path : {"data/three_protein.rxn", "data/factin.rxn"}) {
    const auto net = parse_network_file(path);
    const CompiledRates cr(net);
    const auto moieties = conserved_moieties(net);
    std::vector<double> r(net.n_species());
    for (int trial = 0; trial < 20; ++trial) {
      const auto u = testsup::random_vector(rng, net.n_species(), 0.0, 2.0);
      const auto k = testsup::random_vector(rng, net.n_rates(), 1e-3, 5.0);
      const auto ext = testsup::random_vector(rng, net.n_external(), 0.0, 2.0);
      cr.eval(u, k, ext, r);
      for (const auto& w : moieties) {
        double dot = 0.0, scale = 0.0;
        for (int i = 0; i < net.n_species(); ++i) {
          dot += w[i] * r[i];
          scale += std::abs(w[i] * r[i]);
        }
        CHECK(std::abs(dot) <= 1e-12 * (1.0 + scale));
      }
    }
  }
}

TEST_CASE("validation flags the arity rules") {
  // two reactants and two products in one step
  NetworkBuilder nb;
  nb.species("A", {"a"}).species("B", {"b"}).species("C", {"a"}).species("D", {"b"});
  nb.reaction({"A", "B"}, {"C", "D"}, "k1");
  const auto net = nb.build();
  const auto rep = validate(net);
  REQUIRE_FALSE(rep.compliant());
  REQUIRE(rep.violations.size() == 1);
  CHECK(rep.violations[0].rule == 'C');
  CHECK_THROWS_AS(reaction_forms(net), NonCompliantNetwork);

  // three reactants
  NetworkBuilder nb3;
  nb3.species("A", {"a"}).species("B", {"b"}).species("C", {"c"}).species("D", {"a", "b", "c"});
  nb3.reaction({"A", "B", "C"}, {"D"}, "k1");
  const auto rep3 = validate(nb3.build());
  REQUIRE_FALSE(rep3.compliant());
  CHECK(rep3.violations[0].rule == 'A');

  // three products
  NetworkBuilder nbp;
  nbp.species("A", {"a"}).species("B", {"b"}).species("C", {"c"}).species("D", {"a", "b", "c"});
  nbp.reaction({"D"}, {"A", "B", "C"}, "k1");
  const auto repp = validate(nbp.build());
  REQUIRE_FALSE(repp.compliant());
  CHECK(repp.violations[0].rule == 'B');
}

TEST_CASE("composition notes report bookkeeping drift without blocking") {
  const auto rep = validate(factin());
  CHECK(rep.compliant());
  CHECK(rep.violations.empty());
  REQUIRE(rep.composition_notes.size() == 2);
  CHECK(rep.composition_notes[0].reaction == 46);
  CHECK(rep.composition_notes[1].reaction == 47);
}

TEST_CASE("quasi-positivity certificate rejects a spurious cross term") {
  // r_0 = -k_0 u_1: species 0 destroyed by a term without a u_0 factor
  std::vector<QuadraticForm> forms(2);
  forms[0].linear[1].push_back({0, -1.0, {}});
  forms[1].linear[1].push_back({0, -1.0, {}});
  CHECK_THROWS_AS(check_quasi_positivity(forms), CertificateFailure);

  // the same magnitude on the diagonal is fine
  std::vector<QuadraticForm> ok(2);
  ok[0].linear[0].push_back({0, -1.0, {}});
  ok[1].linear[0].push_back({0, 1.0, {}});
  CHECK(check_quasi_positivity(ok).terms_checked == 2);
}

TEST_CASE("self-association uses the squared-concentration law") {
  NetworkBuilder nb;
  nb.species("X", {"b"}).species("Y", {"b", "b"});
  nb.reaction({"X", "X"}, {"Y"}, "k1");
  const CompiledRates cr(nb.build());
  std::vector<double> u = {3.0, 0.0}, k = {1.0}, r(2);
  cr.eval(u, k, {}, r);
  CHECK(r[0] == Approx(-18.0).margin(1e-14));
  CHECK(r[1] == Approx(9.0).margin(1e-14));

  DenseMatrix J;
  cr.jacobian_u(u, k, {}, J);
  CHECK(J(0, 0) == Approx(-12.0).margin(1e-14));  // d(-2k x^2)/dx = -4kx
  CHECK(J(1, 0) == Approx(6.0).margin(1e-14));
}

TEST_CASE("species order is non-decreasing in category after build") {
  for (const auto* path : {"data/three_protein.rxn", "data/factin.rxn"}) {
    const auto net = parse_network_file(path);
    for (int i = 1; i < net.n_species(); ++i)
      REQUIRE(net.species()[i - 1].category() <= net.species()[i].category());
  }
}

TEST_CASE("random structurally sound networks pass every certificate") {
  std::mt19937_64 rng(2024);
  for (int it = 0; it < 60; ++it) {
    const auto net = testsup::random_compliant_network(rng);
    CAPTURE(it, net.n_species(), net.n_rates());

    const auto rep = validate(net);
    REQUIRE(rep.compliant());
    for (int i = 1; i < net.n_species(); ++i)
      REQUIRE(net.species()[i - 1].category() <= net.species()[i].category());

    const CompiledRates cr(net);
    REQUIRE(cr.quasi_positive());
    REQUIRE_NOTHROW(check_quasi_positivity(net));

    // destruction terms vanish with the species itself
    std::vector<double> r(net.n_species());
    for (int trial = 0; trial < 100; ++trial) {
      auto u = testsup::random_vector(rng, net.n_species(), 0.0, 2.0);
      const int zi = static_cast<int>(rng() % net.n_species());
      u[zi] = 0.0;
      const auto k = testsup::random_vector(rng, net.n_rates(), 1e-3, 2.0);
      const auto ext = testsup::random_vector(rng, net.n_external(), 0.0, 2.0);
      cr.eval(u, k, ext, r);
      REQUIRE(r[zi] >= -1e-12);
      const auto ref = naive_rates(net, u, k, ext);
      for (int i = 0; i < net.n_species(); ++i)
        REQUIRE(r[i] == Approx(ref[i]).margin(1e-12 * (1.0 + std::abs(ref[i]))));
    }

    // L certificate: shape plus an independent recomputation of L*r
    const auto L = lower_triangular_certificate(net);
    const auto forms = reaction_forms(net);
    for (int i = 0; i < net.n_species(); ++i) {
      REQUIRE(L(i, i) == 1.0);
      for (int j = 0; j < net.n_species(); ++j) {
        REQUIRE(L(i, j) >= 0.0);
        if (j > i) REQUIRE(L(i, j) == 0.0);
      }
      detail::QuadCoeffs combined;
      for (int j = 0; j <= i; ++j)
        if (L(i, j) != 0.0) detail::axpy(combined, L(i, j), detail::quad_coeffs(forms[j]));
      for (const auto& [jj, rates] : combined)
        for (const auto& [rate, c] : rates) REQUIRE(c <= 1e-9);
    }

    CHECK(sum_bound_certificate(net).quadratic_ok);

    for (const auto& w : conserved_moieties(net))
      for (const auto& e : net.reactions()) {
        long change = 0;
        for (const auto& ref : e.products)
          if (!ref.external) change += w[ref.index];
        for (const auto& ref : e.reactants)
          if (!ref.external) change -= w[ref.index];
        REQUIRE(change == 0);
      }
  }
}
