#pragma once

#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rdident/network.hpp"

namespace rdident {

// Network description files. Line oriented; '#' starts a comment.
//
//   species NAME {BASE, BASE, ...} [external] [observed] [membrane] [initial-known]
//   rxn A + B -> C : k1
//   rxn A + B <=> C : k1, k2
//
// A side holds one or two participants; reversible statements desugar into a
// forward/backward pair with consecutive rate constants. Rate names must be
// unique across the file.

namespace detail {

struct LineLexer {
  std::string_view text;
  size_t pos = 0;
  int line;

  void skip_ws() {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  }
  bool done() {
    skip_ws();
    return pos >= text.size();
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw SyntaxError("line " + std::to_string(line) + ": " + what);
  }
  bool is_name_char(char c) const {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  }
  std::string name(const char* what) {
    skip_ws();
    size_t start = pos;
    while (pos < text.size() && is_name_char(text[pos])) ++pos;
    if (pos == start) fail(std::string("expected ") + what);
    if (std::isdigit(static_cast<unsigned char>(text[start])))
      fail(std::string(what) + " may not start with a digit");
    return std::string(text.substr(start, pos - start));
  }
  bool accept(std::string_view tok) {
    skip_ws();
    if (text.substr(pos, tok.size()) == tok) {
      pos += tok.size();
      return true;
    }
    return false;
  }
  /// accept() for keywords: the match must end at a token boundary.
  bool accept_word(std::string_view tok) {
    skip_ws();
    if (text.substr(pos, tok.size()) == tok &&
        (pos + tok.size() >= text.size() || !is_name_char(text[pos + tok.size()]))) {
      pos += tok.size();
      return true;
    }
    return false;
  }
  void expect(std::string_view tok) {
    if (!accept(tok)) fail("expected '" + std::string(tok) + "'");
  }
};

inline std::vector<std::string> parse_side(LineLexer& lx) {
  std::vector<std::string> names;
  names.push_back(lx.name("species name"));
  while (lx.accept("+")) {
    names.push_back(lx.name("species name"));
    if (names.size() > 2)
      throw ArityError("line " + std::to_string(lx.line) +
                       ": more than two participants on one side");
  }
  return names;
}

}  // namespace detail

/// Parses a network description. Throws SyntaxError, ArityError,
/// DuplicateSpecies, DuplicateRate, or UnknownSpecies.
inline ReactionNetwork parse_network(const std::string& text) {
  NetworkBuilder builder;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    while (!raw.empty() && (raw.back() == '\r' || raw.back() == ' ' || raw.back() == '\t'))
      raw.pop_back();
    detail::LineLexer lx{raw, 0, lineno};
    if (lx.done()) continue;

    if (lx.accept_word("species")) {
      Species s;
      s.name = lx.name("species name");
      lx.expect("{");
      if (!lx.accept("}")) {
        do {
          s.composition.push_back(lx.name("base protein name"));
        } while (lx.accept(","));
        lx.expect("}");
      }
      while (!lx.done()) {
        if (lx.accept_word("external")) s.external = true;
        else if (lx.accept_word("observed")) s.observed = true;
        else if (lx.accept_word("membrane")) s.membrane = true;
        else if (lx.accept_word("initial-known")) s.initial_known = true;
        else lx.fail("unknown species flag");
      }
      if (s.composition.empty())
        lx.fail("species '" + s.name + "' declares no base proteins");
      builder.species(std::move(s));
    } else if (lx.accept_word("rxn")) {
      auto lhs = detail::parse_side(lx);
      bool reversible;
      if (lx.accept("<=>")) reversible = true;
      else if (lx.accept("->")) reversible = false;
      else lx.fail("expected '->' or '<=>'");
      auto rhs = detail::parse_side(lx);
      lx.expect(":");
      std::string kf = lx.name("rate name");
      if (reversible) {
        lx.expect(",");
        std::string kb = lx.name("rate name");
        if (!lx.done()) lx.fail("trailing content after rate names");
        builder.reversible(lhs, rhs, kf, kb);
      } else {
        if (lx.accept(",")) lx.fail("one rate name expected for an irreversible reaction");
        if (!lx.done()) lx.fail("trailing content after rate name");
        builder.reaction(lhs, rhs, kf);
      }
    } else {
      lx.fail("expected 'species' or 'rxn'");
    }
  }
  return builder.build();
}

inline ReactionNetwork parse_network_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open network file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_network(buf.str());
}

/// Canonical text form: species sorted by (category, name) with externals
/// last, reactions in rate order with adjacent inverse pairs re-sugared to
/// '<=>'. Parsing the output reproduces the network up to declaration order.
inline std::string serialize_network(const ReactionNetwork& net) {
  std::ostringstream os;
  std::vector<const Species*> order;
  for (const auto& s : net.species()) order.push_back(&s);
  std::stable_sort(order.begin(), order.end(), [](const Species* a, const Species* b) {
    return a->category() != b->category() ? a->category() < b->category()
                                          : a->name < b->name;
  });
  for (const auto& s : net.externals()) order.push_back(&s);

  auto emit_species = [&](const Species& s) {
    os << "species " << s.name << " {";
    for (size_t i = 0; i < s.composition.size(); ++i)
      os << (i ? ", " : "") << s.composition[i];
    os << "}";
    if (s.external) os << " external";
    if (s.membrane) os << " membrane";
    if (s.observed) os << " observed";
    if (s.initial_known) os << " initial-known";
    os << "\n";
  };
  for (const auto* s : order) emit_species(*s);

  auto side_names = [&](const std::vector<SpeciesRef>& side) {
    std::vector<std::string> v;
    for (const auto& ref : side) v.push_back(net.participant_name(ref));
    return v;
  };
  auto emit_side = [&](const std::vector<SpeciesRef>& side) {
    for (size_t i = 0; i < side.size(); ++i)
      os << (i ? " + " : "") << net.participant_name(side[i]);
  };
  auto sorted = [](std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return v;
  };

  os << "\n";
  const auto& rxns = net.reactions();
  for (size_t a = 0; a < rxns.size(); ++a) {
    const auto& e = rxns[a];
    bool paired = false;
    if (a + 1 < rxns.size()) {
      const auto& b = rxns[a + 1];
      paired = b.backward && !e.backward && b.rate == e.rate + 1 &&
               sorted(side_names(b.reactants)) == sorted(side_names(e.products)) &&
               sorted(side_names(b.products)) == sorted(side_names(e.reactants));
    }
    os << "rxn ";
    emit_side(e.reactants);
    os << (paired ? " <=> " : " -> ");
    emit_side(e.products);
    os << " : " << net.rate_names()[e.rate];
    if (paired) {
      os << ", " << net.rate_names()[rxns[a + 1].rate];
      ++a;
    }
    os << "\n";
  }
  return os.str();
}

inline void write_network_file(const ReactionNetwork& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write network file '" + path + "'");
  out << serialize_network(net);
}

/// Order-insensitive equality: same species (by name, with composition and
/// flags), same rate names in index order, and the same reactions up to
/// participant order within a side.
inline bool structurally_equal(const ReactionNetwork& a, const ReactionNetwork& b) {
  auto species_key = [](const ReactionNetwork& n) {
    std::map<std::string, std::tuple<std::vector<std::string>, bool, bool, bool, bool>> m;
    for (const auto& list : {n.species(), n.externals()})
      for (const auto& s : list)
        m[s.name] = {s.composition, s.external, s.observed, s.membrane, s.initial_known};
    return m;
  };
  if (species_key(a) != species_key(b)) return false;
  if (a.rate_names() != b.rate_names()) return false;
  if (a.reactions().size() != b.reactions().size()) return false;

  auto rxn_key = [](const ReactionNetwork& n, const ElementaryReaction& e) {
    std::vector<std::string> r, p;
    for (const auto& ref : e.reactants) r.push_back(n.participant_name(ref));
    for (const auto& ref : e.products) p.push_back(n.participant_name(ref));
    std::sort(r.begin(), r.end());
    std::sort(p.begin(), p.end());
    return std::make_tuple(e.rate, e.backward, r, p);
  };
  for (size_t i = 0; i < a.reactions().size(); ++i)
    if (rxn_key(a, a.reactions()[i]) != rxn_key(b, b.reactions()[i])) return false;
  return true;
}

}  // namespace rdident
