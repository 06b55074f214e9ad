#pragma once

#include <string>

#include "dlg/ast.hpp"
#include "dlg/lexer.hpp"

namespace dlg {

// Recursive-descent parsers for the program and class-library grammars.
// First error wins; no recovery.
Program parseProgram(const std::string& text,
                     const UnitTable& units = UnitTable::builtin());
Library parseLibrary(const std::string& text,
                     const UnitTable& units = UnitTable::builtin());

// Canonical deterministic rendering; parseProgram(printProgram(p)) == p.
std::string printProgram(const Program& p, const UnitTable& units = UnitTable::builtin());
std::string printStatement(const Statement& s, const UnitTable& units = UnitTable::builtin());
std::string printQuery(const Query& q, const UnitTable& units = UnitTable::builtin());
std::string printFilter(const FilterExpr& f, const UnitTable& units = UnitTable::builtin());
std::string printValue(const Value& v, const UnitTable& units = UnitTable::builtin());
std::string printLibrary(const Library& lib, const UnitTable& units = UnitTable::builtin());
std::string printClass(const ClassDef& c, const UnitTable& units = UnitTable::builtin());
std::string printType(const TypeExpr& t);

// Debug dump of the AST (indented tree), used by the CLI `parse` command.
std::string dumpProgram(const Program& p);

} // namespace dlg
