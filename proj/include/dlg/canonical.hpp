#pragma once

#include "dlg/typecheck.hpp"

namespace dlg {

// Blowup guard: CNF conversion aborts past this many literals.
inline constexpr size_t kMaxCnfLiterals = 4096;

// Rewrite a filter to conjunctive normal form: And of Or of literals, Not
// pushed onto atoms, duplicates and tautologies removed, clauses and literals
// in bytewise order of their printed form. An unsatisfiable filter comes back
// as !true. Throws Error("FilterTooLarge", ...) past kMaxCnfLiterals.
FilterExpr normalizeFilter(const FilterExpr& f,
                           const UnitTable& units = UnitTable::builtin());

// Syntax-level canonicalization: filters normalized, action args / projections
// / computed fields sorted by name, measures re-expressed in their base unit.
// Statement order is preserved.
Program canonicalizeProgram(const Program& p,
                            const UnitTable& units = UnitTable::builtin());
Query canonicalizeQuery(const Query& q, const UnitTable& units = UnitTable::builtin());
Value canonicalizeValue(const Value& v, const UnitTable& units = UnitTable::builtin());

struct CanonicalForm {
    TypedProgram typed;
    std::string bytes;  // canonical printed form
};

CanonicalForm canonicalize(const TypedProgram& p,
                           const UnitTable& units = UnitTable::builtin());

bool equalModuloCanonical(const Program& a, const Program& b,
                          const UnitTable& units = UnitTable::builtin());

} // namespace dlg
