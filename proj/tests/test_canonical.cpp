#include "dlg/canonical.hpp"

#include <algorithm>

#include "dlg/syntax.hpp"
#include "doctest.h"
#include "gen.hpp"

using namespace dlg;

namespace {

FilterExpr parseFilter(const std::string& text) {
    Program p = parseProgram("@Transaction.Execute; @X.Q(), " + text + ";");
    return p.statements[0].query->filter;
}

std::string normPrint(const std::string& text) {
    return printFilter(normalizeFilter(parseFilter(text)));
}

// Truth-table oracle: treat each distinct atom (by printed form) as a
// propositional variable and compare the two filters on all assignments.
void collectAtoms(const FilterExpr& f, std::set<std::string>& atoms) {
    switch (f.kind) {
    case FilterKind::True: return;
    case FilterKind::And:
    case FilterKind::Or:
    case FilterKind::Not:
        for (const auto& c : f.children)
            collectAtoms(c, atoms);
        return;
    default:
        atoms.insert(printFilter(f));
    }
}

bool evalBool(const FilterExpr& f, const std::map<std::string, bool>& assignment) {
    switch (f.kind) {
    case FilterKind::True: return true;
    case FilterKind::Not: return !evalBool(f.children[0], assignment);
    case FilterKind::And:
        return std::all_of(f.children.begin(), f.children.end(),
                           [&](const FilterExpr& c) { return evalBool(c, assignment); });
    case FilterKind::Or:
        return std::any_of(f.children.begin(), f.children.end(),
                           [&](const FilterExpr& c) { return evalBool(c, assignment); });
    default:
        return assignment.at(printFilter(f));
    }
}

bool equivalentByTruthTable(const FilterExpr& a, const FilterExpr& b) {
    std::set<std::string> atomSet;
    collectAtoms(a, atomSet);
    collectAtoms(b, atomSet);
    std::vector<std::string> atoms(atomSet.begin(), atomSet.end());
    REQUIRE(atoms.size() <= 6);
    for (unsigned mask = 0; mask < (1u << atoms.size()); mask++) {
        std::map<std::string, bool> assignment;
        for (size_t i = 0; i < atoms.size(); i++)
            assignment[atoms[i]] = (mask >> i) & 1;
        if (evalBool(a, assignment) != evalBool(b, assignment))
            return false;
    }
    return true;
}

// Small propositional trees over a fixed atom pool (shared atoms make
// tautologies and duplicates reachable).
FilterExpr randomPropFilter(dlggen::Rng& rng, int depth) {
    static const std::vector<FilterExpr> pool = {
        FilterExpr::atom("a", FilterOp::Eq, Value::ofNumber(1)),
        FilterExpr::atom("b", FilterOp::Eq, Value::ofNumber(2)),
        FilterExpr::atom("c", FilterOp::Ge, Value::ofNumber(3)),
        FilterExpr::atom("d", FilterOp::Eq, Value::ofString("x")),
    };
    if (depth <= 0 || rng.chance(0.35))
        return rng.chance(0.05) ? FilterExpr::trueExpr() : rng.pick(pool);
    switch (rng.range(0, 2)) {
    case 0: {
        std::vector<FilterExpr> cs;
        int n = rng.range(2, 3);
        for (int i = 0; i < n; i++)
            cs.push_back(randomPropFilter(rng, depth - 1));
        return FilterExpr::mkAnd(std::move(cs));
    }
    case 1: {
        std::vector<FilterExpr> cs;
        int n = rng.range(2, 3);
        for (int i = 0; i < n; i++)
            cs.push_back(randomPropFilter(rng, depth - 1));
        return FilterExpr::mkOr(std::move(cs));
    }
    default:
        return FilterExpr::mkNot(randomPropFilter(rng, depth - 1));
    }
}

void shuffleFilter(FilterExpr& f, dlggen::Rng& rng) {
    for (auto& c : f.children)
        shuffleFilter(c, rng);
    if (f.kind == FilterKind::And || f.kind == FilterKind::Or)
        std::shuffle(f.children.begin(), f.children.end(), rng.engine());
}

Program shuffled(const Program& p, dlggen::Rng& rng) {
    Program out = p;
    for (auto& s : out.statements) {
        if (s.query) {
            shuffleFilter(s.query->filter, rng);
            std::shuffle(s.query->projection.begin(), s.query->projection.end(),
                         rng.engine());
            std::shuffle(s.query->computed.begin(), s.query->computed.end(), rng.engine());
        }
        if (s.action)
            std::shuffle(s.action->args.begin(), s.action->args.end(), rng.engine());
    }
    return out;
}

} // namespace

TEST_CASE("filter normalization examples") {
    CHECK(normPrint("b == 2 && a == 1") == "a == 1 && b == 2");
    CHECK(normPrint("!(!(c >= 3))") == "c >= 3");
    CHECK(normPrint("(a == 1 || b == 2) && a == 1") ==
          normPrint("a == 1 && (b == 2 || a == 1)"));
    CHECK(normPrint("a == 1 && a == 1") == "a == 1");
    CHECK(normPrint("a == 1 || !a == 1") == "true");  // tautological clause drops
    // Cross-clause contradiction stays in CNF; only per-clause reduction applies.
    CHECK(normPrint("a == 1 && !a == 1") == "!a == 1 && a == 1");
    CHECK(normPrint("!true || !true") == "!true");  // unsatisfiable clause
    CHECK(normPrint("!(a == 1 && b == 2)") == "!a == 1 || !b == 2");
    CHECK(normPrint("!(a == 1 || b == 2)") == "!a == 1 && !b == 2");
    // Distribution: Or over And becomes And of Or-clauses.
    CHECK(normPrint("a == 1 || (b == 2 && c >= 3)") ==
          "(a == 1 || b == 2) && (a == 1 || c >= 3)");
    CHECK(normalizeFilter(FilterExpr::trueExpr()).isTrue());
}

TEST_CASE("normalized measures use the base unit") {
    CHECK(normPrint("weight >= 5km") == "weight >= 5000m");
    CHECK(normPrint("weight >= 5000m") == "weight >= 5000m");
    CHECK(normPrint("t == 30min") == "t == 1800s");
    // Offset units convert affinely.
    FilterExpr f = normalizeFilter(parseFilter("t == 0C"));
    CHECK(printFilter(f) == "t == 273.15K");
}

TEST_CASE("CNF blowup guard") {
    // Or of 13 two-atom conjunctions distributes to 2^13 clauses.
    std::vector<FilterExpr> disjuncts;
    for (int i = 0; i < 13; i++) {
        std::vector<FilterExpr> pair;
        pair.push_back(FilterExpr::atom("f" + std::to_string(2 * i), FilterOp::Eq,
                                        Value::ofNumber(i)));
        pair.push_back(FilterExpr::atom("f" + std::to_string(2 * i + 1), FilterOp::Eq,
                                        Value::ofNumber(i)));
        disjuncts.push_back(FilterExpr::mkAnd(std::move(pair)));
    }
    FilterExpr blowup = FilterExpr::mkOr(std::move(disjuncts));
    CHECK_THROWS_WITH_AS(normalizeFilter(blowup), doctest::Contains("4096"), Error);
}

TEST_CASE("truth-table equivalence of CNF on random propositional filters") {
    dlggen::Rng rng(4242);
    for (int i = 0; i < 500; i++) {
        FilterExpr f = randomPropFilter(rng, 3);
        FilterExpr normalized = normalizeFilter(f);
        CAPTURE(printFilter(f));
        CAPTURE(printFilter(normalized));
        CHECK(equivalentByTruthTable(f, normalized));
        // Idempotence at the filter level.
        CHECK(printFilter(normalizeFilter(normalized)) == printFilter(normalized));
    }
}

TEST_CASE("program canonicalization examples") {
    auto canonBytes = [](const std::string& text) {
        return printProgram(canonicalizeProgram(parseProgram(text)));
    };
    CHECK(canonBytes("@Transaction.Execute; @Spotify.Play(song=\"s\"^^Spotify:Song, "
                     "device=\"d\"^^Spotify:Device);") ==
          canonBytes("@Transaction.Execute; @Spotify.Play(device=\"d\"^^Spotify:Device, "
                     "song=\"s\"^^Spotify:Song);"));
    CHECK(canonBytes("@Transaction.Execute; [name, id] of @Yelp.Restaurant();") ==
          canonBytes("@Transaction.Execute; [id, name] of @Yelp.Restaurant();"));
    CHECK(canonBytes("@Transaction.Execute; @X.Q(), d >= 5km;") ==
          canonBytes("@Transaction.Execute; @X.Q(), d >= 5000m;"));
    // Statement order is semantic and stays put.
    std::string two = "@Transaction.Execute; @A.Q(); @B.Q();";
    CHECK(canonBytes(two) == two);

    Program a = parseProgram("@Transaction.Execute; @X.Q(), b == 2 && a == 1;");
    Program b = parseProgram("@Transaction.Execute; @X.Q(), a == 1, b == 2;");
    CHECK(equalModuloCanonical(a, b));
    CHECK_FALSE(equalModuloCanonical(
        a, parseProgram("@Transaction.Execute; @X.Q(), a == 2, b == 2;")));
}

TEST_CASE("canonicalization is idempotent and permutation-invariant") {
    dlggen::Rng rng(999);
    for (int i = 0; i < 300; i++) {
        Program p = dlggen::randomProgram(rng);
        Program canon = canonicalizeProgram(p);
        std::string bytes = printProgram(canon);
        CAPTURE(printProgram(p));
        // Idempotent, and the canonical form reparses to itself.
        CHECK(printProgram(canonicalizeProgram(canon)) == bytes);
        CHECK(printProgram(canonicalizeProgram(parseProgram(bytes))) == bytes);
        // Shuffling commutative lists never changes the canonical bytes.
        for (int round = 0; round < 3; round++)
            CHECK(printProgram(canonicalizeProgram(shuffled(p, rng))) == bytes);
    }
}

TEST_CASE("canonicalize carries the typed program through") {
    Registry reg = resolveLibrary(dlggen::libraryForVocabulary());
    TypedProgram tp = typecheckOrThrow(
        parseProgram("@Transaction.Execute; @gen.Store.Item(), rating >= 4 && price <= "
                     "20USD => @gen.Store.Buy(qty=2, item=id);"),
        reg);
    CanonicalForm form = canonicalize(tp);
    CHECK(form.bytes ==
          "@Transaction.Execute; @gen.Store.Item(), price <= 20USD, rating >= 4 => "
          "@gen.Store.Buy(item=id, qty=2);");
    CHECK(typecheckProgram(form.typed.program, reg).ok());
    CHECK(canonicalize(form.typed).bytes == form.bytes);
}
