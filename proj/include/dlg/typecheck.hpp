#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "dlg/ast.hpp"

namespace dlg {

// A class with inheritance flattened and entity types qualified.
struct ResolvedClass {
    std::string name;
    bool isAbstract = false;
    std::vector<std::string> extends;
    std::set<std::string> entityTypes;              // qualified ns:Name
    std::vector<FunctionSig> functions;             // own + inherited, declaration order
    std::optional<LoaderBinding> loader;
    std::string canonical;

    const FunctionSig* findFunction(const std::string& name) const;
    // Concrete enough to execute: has a dataset/simrest loader.
    bool executable() const {
        return loader && loader->kind != LoaderKind::External;
    }
};

class Registry {
public:
    Registry();  // seeds the builtin @Transaction dialogue acts

    void addClass(ResolvedClass cls);  // throws on duplicate DNS name
    void addDialogueActs(const std::string& ns, const std::vector<std::string>& acts);

    const ResolvedClass* findClass(const std::string& name) const;
    const ResolvedClass& cls(const std::string& name) const;  // throws UnknownClass
    bool knownAct(const DialogueActRef& act) const;
    bool knownEntityType(const std::string& qualified) const;

    const std::map<std::string, ResolvedClass>& classes() const { return classes_; }

    bool operator==(const Registry& other) const {
        return acts_ == other.acts_ && classNames() == other.classNames();
    }
    std::vector<std::string> classNames() const;

private:
    std::map<std::string, ResolvedClass> classes_;
    std::map<std::string, std::set<std::string>> acts_;
};

// Flattens inheritance into a Registry. Throws Error with codes
// CyclicInheritance / DuplicateClass / UnknownClass / SignatureConflict.
Registry resolveLibrary(const Library& lib);
void resolveInto(Registry& registry, const Library& lib);

struct TypeError {
    std::string code;
    SourceSpan span;  // zero span when checking an in-memory AST
    std::string path;  // statement-level location, e.g. "statement 1: action @X.Y"
    std::string message;
};

struct TypedStatement {
    const ResolvedClass* queryClass = nullptr;
    const FunctionSig* querySig = nullptr;
    const ResolvedClass* actionClass = nullptr;
    const FunctionSig* actionSig = nullptr;
    std::map<std::string, TypeExpr> outFields;  // query out-params plus computed fields
    bool executable = true;  // false when a target class has no usable loader
};

// Program plus bindings. `program` may differ from the input by the
// zero-argument-action fixup (a bare @X.Y(); parses as a query).
struct TypedProgram {
    Program program;
    std::vector<TypedStatement> statements;
};

struct TypeCheckResult {
    TypedProgram typed;
    std::vector<TypeError> errors;
    bool ok() const { return errors.empty(); }
};

TypeCheckResult typecheckProgram(const Program& p, const Registry& registry,
                                 const UnitTable& units = UnitTable::builtin());

// Convenience: throws Error("TypeErrors", joined message) when not ok.
TypedProgram typecheckOrThrow(const Program& p, const Registry& registry,
                              const UnitTable& units = UnitTable::builtin());

// Resolve display text to an entity via the lexicon; exact alias match,
// case-insensitive. Throws UnknownEntity / AmbiguousEntity.
Value lookupEntity(const Registry& registry, const EntityLexicon& lexicon,
                   const std::string& entityType, const std::string& text);

} // namespace dlg
