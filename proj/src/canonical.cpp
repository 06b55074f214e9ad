#include "dlg/canonical.hpp"

#include <algorithm>

#include "dlg/syntax.hpp"

namespace dlg {

Value canonicalizeValue(const Value& v, const UnitTable& units) {
    if (v.isEnvRef())
        return v;
    Value out = v;
    if (v.kind == TypeKind::Measure && units.known(v.text)) {
        const std::string& base = units.baseUnit(units.unitClassOf(v.text));
        out.num = units.toBase(v.num, v.text);
        out.text = base;
    } else if (v.kind == TypeKind::Array) {
        for (auto& e : out.elems)
            e = canonicalizeValue(e, units);
    }
    return out;
}

namespace {

// A literal is an atom-like filter (Atom/Subquery/DontCare/True), possibly
// wrapped in one Not.
struct Literal {
    FilterExpr expr;
    std::string printed;
    bool negated = false;
    std::string atomPrinted;  // printed form without the negation
};

Literal makeLiteral(FilterExpr e, const UnitTable& units) {
    Literal lit;
    lit.negated = e.kind == FilterKind::Not;
    lit.atomPrinted = printFilter(lit.negated ? e.children[0] : e, units);
    lit.printed = printFilter(e, units);
    lit.expr = std::move(e);
    return lit;
}

using Clause = std::vector<Literal>;

class CnfBuilder {
public:
    explicit CnfBuilder(const UnitTable& units) : units_(units) {}

    std::vector<Clause> build(const FilterExpr& f) { return toCnf(f, false); }

private:
    const UnitTable& units_;
    size_t literals_ = 0;

    void charge(size_t n) {
        literals_ += n;
        if (literals_ > kMaxCnfLiterals)
            throw Error("FilterTooLarge",
                        "CNF exceeds " + std::to_string(kMaxCnfLiterals) + " literals");
    }

    FilterExpr atomWithCanonicalValues(const FilterExpr& f) {
        FilterExpr out = f;
        if (out.kind == FilterKind::Atom && !out.rhsIsVar)
            out.rhsValue = canonicalizeValue(out.rhsValue, units_);
        if (out.kind == FilterKind::Subquery)
            out.inner[0] = canonicalizeQuery(out.inner[0], units_);
        return out;
    }

    std::vector<Clause> toCnf(const FilterExpr& f, bool negated) {
        switch (f.kind) {
        case FilterKind::Not:
            return toCnf(f.children[0], !negated);
        case FilterKind::And:
        case FilterKind::Or: {
            bool conjunctive = (f.kind == FilterKind::And) != negated;  // De Morgan
            std::vector<Clause> acc;
            if (conjunctive) {
                for (const auto& c : f.children)
                    for (auto& clause : toCnf(c, negated))
                        acc.push_back(std::move(clause));
                return acc;
            }
            acc.push_back({});  // disjunction: cross product of child clause sets
            for (const auto& c : f.children) {
                std::vector<Clause> childCnf = toCnf(c, negated);
                std::vector<Clause> next;
                for (const auto& left : acc)
                    for (const auto& right : childCnf) {
                        Clause merged = left;
                        merged.insert(merged.end(), right.begin(), right.end());
                        charge(right.size());
                        next.push_back(std::move(merged));
                    }
                acc = std::move(next);
            }
            return acc;
        }
        default: {
            FilterExpr atom = atomWithCanonicalValues(f);
            FilterExpr lit = negated ? FilterExpr::mkNot(std::move(atom)) : std::move(atom);
            charge(1);
            return {{makeLiteral(std::move(lit), units_)}};
        }
        }
    }
};

// Unsatisfiable filters have no native form; !true is the canonical one.
FilterExpr falseExpr() { return FilterExpr::mkNot(FilterExpr::trueExpr()); }

} // namespace

FilterExpr normalizeFilter(const FilterExpr& f, const UnitTable& units) {
    std::vector<Clause> clauses = CnfBuilder(units).build(f);

    std::vector<FilterExpr> keptClauses;
    std::set<std::string> clauseKeys;
    for (auto& clause : clauses) {
        std::sort(clause.begin(), clause.end(),
                  [](const Literal& a, const Literal& b) { return a.printed < b.printed; });
        std::vector<Literal> kept;
        std::set<std::string> seen;
        std::map<std::string, bool> polarity;
        bool tautology = false;
        for (auto& lit : clause) {
            if (!lit.negated && lit.expr.kind == FilterKind::True) {
                tautology = true;  // `true` literal
                break;
            }
            if (lit.negated && lit.expr.children[0].kind == FilterKind::True)
                continue;  // `!true` literal is false: drop it
            auto pol = polarity.find(lit.atomPrinted);
            if (pol != polarity.end() && pol->second != lit.negated) {
                tautology = true;  // x || !x
                break;
            }
            polarity[lit.atomPrinted] = lit.negated;
            if (seen.insert(lit.printed).second)
                kept.push_back(std::move(lit));
        }
        if (tautology)
            continue;
        if (kept.empty())
            return falseExpr();  // every literal was false
        std::vector<FilterExpr> lits;
        for (auto& lit : kept)
            lits.push_back(std::move(lit.expr));
        FilterExpr rebuilt = FilterExpr::mkOr(std::move(lits));
        std::string key = printFilter(rebuilt, units);
        if (clauseKeys.insert(key).second)
            keptClauses.push_back(std::move(rebuilt));
    }
    std::sort(keptClauses.begin(), keptClauses.end(),
              [&](const FilterExpr& a, const FilterExpr& b) {
                  return printFilter(a, units) < printFilter(b, units);
              });
    return FilterExpr::mkAnd(std::move(keptClauses));
}

Query canonicalizeQuery(const Query& q, const UnitTable& units) {
    Query out = q;
    out.filter = normalizeFilter(q.filter, units);
    for (auto& cf : out.computed)
        if (!cf.expr.useHere)
            cf.expr.location[0] = canonicalizeValue(cf.expr.location[0], units);
    std::sort(out.computed.begin(), out.computed.end(),
              [](const ComputedField& a, const ComputedField& b) { return a.name < b.name; });
    std::sort(out.projection.begin(), out.projection.end());
    out.projection.erase(std::unique(out.projection.begin(), out.projection.end()),
                         out.projection.end());
    return out;
}

Program canonicalizeProgram(const Program& p, const UnitTable& units) {
    Program out = p;
    for (auto& s : out.statements) {
        if (s.query)
            s.query = canonicalizeQuery(*s.query, units);
        if (s.action) {
            for (auto& [name, arg] : s.action->args)
                if (arg.kind == ArgKind::Constant)
                    arg.value = canonicalizeValue(arg.value, units);
            std::stable_sort(s.action->args.begin(), s.action->args.end(),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
        }
    }
    return out;
}

CanonicalForm canonicalize(const TypedProgram& p, const UnitTable& units) {
    CanonicalForm out;
    out.typed = p;
    out.typed.program = canonicalizeProgram(p.program, units);
    out.bytes = printProgram(out.typed.program, units);
    return out;
}

bool equalModuloCanonical(const Program& a, const Program& b, const UnitTable& units) {
    return printProgram(canonicalizeProgram(a, units), units) ==
           printProgram(canonicalizeProgram(b, units), units);
}

} // namespace dlg
