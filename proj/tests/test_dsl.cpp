#include <catch2/catch_amalgamated.hpp>

#include "support/helpers.hpp"

using namespace rdident;

TEST_CASE("bundled network files parse and round-trip") {
  for (const auto* path : {"data/three_protein.rxn", "data/factin.rxn"}) {
    const auto net = parse_network_file(path);
    const auto text = serialize_network(net);
    const auto back = parse_network(text);
    REQUIRE(structurally_equal(net, back));
    // canonical form is a fixed point
    REQUIRE(serialize_network(back) == text);
  }
}

TEST_CASE("species flags survive parsing") {
  const auto net = parse_network_file("data/factin.rxn");
  const int eph = net.species_index("EphA2");
  REQUIRE(eph >= 0);
  CHECK(net.species()[eph].membrane);
  CHECK_FALSE(net.species()[eph].observed);
  const int act = net.species_index("ActinOn");
  REQUIRE(act >= 0);
  CHECK(net.species()[act].observed);
  CHECK(net.external_index("EphrinA1") == 0);
  CHECK(net.species_index("EphrinA1") == -1);

  const auto x = parse_network("species K {B} initial-known\n");
  CHECK(x.species()[0].initial_known);
}

TEST_CASE("rate names keep file order and reversible pairs are adjacent") {
  const auto net = parse_network_file("data/three_protein.rxn");
  REQUIRE(net.n_rates() == 12);
  for (int m = 0; m < 12; ++m) {
    CHECK(net.rate_names()[m] == "k" + std::to_string(m + 1));
    CHECK(net.rate_index("k" + std::to_string(m + 1)) == m);
  }
  for (int a = 0; a < static_cast<int>(net.reactions().size()); ++a) {
    const auto& e = net.reactions()[a];
    CHECK(e.rate == a);
    CHECK(e.backward == (a % 2 == 1));
  }
}

TEST_CASE("composition multisets are stored sorted") {
  const auto net = parse_network("species C {Beta, Alpha}\n");
  CHECK(net.species()[0].composition == std::vector<std::string>{"Alpha", "Beta"});
}

TEST_CASE("comments, blank lines, and CRLF endings are tolerated") {
  const auto net = parse_network(
      "# header comment\r\n"
      "\r\n"
      "\tspecies A {a}   # trailing comment\r\n"
      "species B {a}\r\n"
      "rxn A -> B : k1 # conversion\r\n");
  CHECK(net.n_species() == 2);
  CHECK(net.n_rates() == 1);
}

TEST_CASE("empty and reaction-free documents are valid") {
  const auto empty = parse_network("");
  CHECK(empty.n_species() == 0);
  CHECK(empty.reactions().empty());

  const auto spec_only = parse_network("species A {a}\nspecies B {b}\n");
  CHECK(spec_only.n_species() == 2);
  CHECK(spec_only.reactions().empty());
  CHECK(validate(spec_only).compliant());
}

TEST_CASE("two-to-two statements parse but fail validation") {
  const auto net = parse_network(
      "species A {a}\nspecies B {b}\nspecies C {a}\nspecies D {b}\n"
      "rxn A + B -> C + D : k1\n");
  REQUIRE(net.n_rates() == 1);
  const auto rep = validate(net);
  REQUIRE_FALSE(rep.compliant());
  CHECK(rep.violations[0].rule == 'C');
}

TEST_CASE("parse errors carry line numbers and precise causes") {
  CHECK_THROWS_AS(parse_network("species A {a}\nrxn A + A + A -> A : k1\n"), ArityError);
  CHECK_THROWS_AS(parse_network("rxn A -> B : k1\n"), UnknownSpecies);
  CHECK_THROWS_AS(parse_network("species A {a}\nspecies A {a}\n"), DuplicateSpecies);
  CHECK_THROWS_AS(
      parse_network("species A {a}\nspecies B {a}\n"
                    "rxn A -> B : k1\nrxn B -> A : k1\n"),
      DuplicateRate);
  CHECK_THROWS_AS(parse_network("species 3X {a}\n"), SyntaxError);
  CHECK_THROWS_AS(parse_network("species A {}\n"), SyntaxError);
  CHECK_THROWS_AS(parse_network("species A {a} frobnicate\n"), SyntaxError);
  CHECK_THROWS_AS(parse_network("species A {a} externalFoo\n"), SyntaxError);
  CHECK_THROWS_AS(parse_network("frobnicate A\n"), SyntaxError);
  CHECK_THROWS_AS(parse_network("species A {a}\nspecies B {a}\nrxn A => B : k1\n"),
                  SyntaxError);
  CHECK_THROWS_AS(parse_network("species A {a}\nspecies B {a}\nrxn A -> B k1\n"),
                  SyntaxError);
  // reversible statements need two rates, irreversible exactly one
  CHECK_THROWS_AS(parse_network("species A {a}\nspecies B {a}\nrxn A <=> B : k1\n"),
                  SyntaxError);
  CHECK_THROWS_AS(parse_network("species A {a}\nspecies B {a}\nrxn A -> B : k1, k2\n"),
                  SyntaxError);
  CHECK_THROWS_AS(parse_network("species A {a}\nspecies B {a}\nrxn A -> B : k1 junk\n"),
                  SyntaxError);

  try {
    parse_network("species A {a}\n\nrxn A -> : k1\n");
    FAIL("expected SyntaxError");
  } catch (const SyntaxError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("missing network file reports the path") {
  CHECK_THROWS_AS(parse_network_file("data/no_such_network.rxn"), FormatError);
}

TEST_CASE("serialization re-sugars reversible pairs") {
  const auto text = serialize_network(parse_network_file("data/three_protein.rxn"));
  CHECK(text.find("<=>") != std::string::npos);
  CHECK(text.find("k1, k2") != std::string::npos);
  // externals are emitted last with their flag
  const auto fa = serialize_network(parse_network_file("data/factin.rxn"));
  CHECK(fa.find("species EphrinA1 {EphrinA1} external") != std::string::npos);
}

TEST_CASE("random networks survive a serialize-parse cycle") {
  std::mt19937_64 rng(99);
  for (int it = 0; it < 40; ++it) {
    const auto net = testsup::random_compliant_network(rng);
    const auto back = parse_network(serialize_network(net));
    REQUIRE(structurally_equal(net, back));
  }
}
