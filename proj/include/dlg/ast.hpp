#pragma once

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dlg/types.hpp"

namespace dlg {

// Reference to a function inside a class, e.g. @Spotify.Play splits into
// cls="Spotify", name="Play". Class names are reverse-DNS identifiers.
struct FunctionRef {
    std::string cls;
    std::string name;

    bool operator==(const FunctionRef&) const = default;
    std::string str() const { return "@" + cls + "." + name; }
};

struct DialogueActRef {
    std::string ns;
    std::string name;

    bool operator==(const DialogueActRef&) const = default;
    std::string str() const { return "@" + ns + "." + name; }
};

// The only computed-field expression: great-circle distance from a geo field
// to a fixed location or to the environment's `$here`.
struct ComputeExpr {
    std::string geoField;
    bool useHere = true;
    std::vector<Value> location;  // one element when !useHere

    bool operator==(const ComputeExpr&) const = default;
};

struct ComputedField {
    std::string name;
    ComputeExpr expr;

    bool operator==(const ComputedField&) const = default;
};

enum class FilterKind { True, And, Or, Not, Atom, Subquery, DontCare };
enum class FilterOp { Eq, Ge, Le, Contains, InArray, Substr };

enum class ArgKind { Constant, Var, Missing };

struct ArgValue {
    ArgKind kind = ArgKind::Missing;
    Value value;      // Constant
    std::string var;  // Var: names an output field of the statement's query

    static ArgValue constant(Value v) { return {ArgKind::Constant, std::move(v), {}}; }
    static ArgValue varRef(std::string field) { return {ArgKind::Var, {}, std::move(field)}; }
    static ArgValue missing() { return {ArgKind::Missing, {}, {}}; }

    bool operator==(const ArgValue&) const = default;
};

struct Query;

struct FilterExpr {
    FilterKind kind = FilterKind::True;
    std::vector<FilterExpr> children;  // And/Or (>=2 after parse), Not (exactly 1)
    std::string field;                 // Atom / Subquery / DontCare
    FilterOp op = FilterOp::Eq;        // Atom / Subquery
    bool rhsIsVar = false;             // Atom: rhs is another field of the same row
    Value rhsValue;
    std::string rhsVar;
    std::vector<Query> inner;  // Subquery: exactly one element
    std::string innerField;    // Subquery: field of the inner query

    static FilterExpr trueExpr() { return {}; }
    static FilterExpr mkAnd(std::vector<FilterExpr> children);
    static FilterExpr mkOr(std::vector<FilterExpr> children);
    static FilterExpr mkNot(FilterExpr child);
    static FilterExpr atom(std::string field, FilterOp op, Value rhs);
    static FilterExpr atomVar(std::string field, FilterOp op, std::string rhsField);
    static FilterExpr dontCare(std::string field);
    static FilterExpr subquery(std::string field, FilterOp op, Query inner,
                               std::string innerField);

    bool isTrue() const { return kind == FilterKind::True; }

    bool operator==(const FilterExpr&) const = default;
};

struct SortSpec {
    std::string field;
    bool ascending = true;

    bool operator==(const SortSpec&) const = default;
};

// 1-based inclusive start plus row count; [1:3] selects the first three rows.
struct SliceSpec {
    long start = 1;
    long count = 1;

    bool operator==(const SliceSpec&) const = default;
};

enum class AggOp { Count, Min, Max, Sum, Avg };

struct AggSpec {
    AggOp op = AggOp::Count;
    std::string field;  // empty for count

    bool operator==(const AggSpec&) const = default;
};

// Pipeline order is fixed: base rows, computed fields, filter, sort, slice,
// aggregate, projection.
struct Query {
    FunctionRef base;
    FilterExpr filter;
    std::vector<ComputedField> computed;
    std::optional<SortSpec> sort;
    std::optional<SliceSpec> slice;
    std::optional<AggSpec> aggregate;
    std::vector<std::string> projection;

    bool operator==(const Query&) const = default;
};

struct Action {
    FunctionRef target;
    std::vector<std::pair<std::string, ArgValue>> args;

    bool operator==(const Action&) const = default;
};

// q => a. Either side may be absent, not both. A monitor statement
// re-evaluates the query over time instead of running it once.
struct Statement {
    std::optional<Query> query;
    std::optional<Action> action;
    bool monitor = false;

    bool operator==(const Statement&) const = default;
};

struct Program {
    DialogueActRef act;
    std::vector<Statement> statements;

    bool operator==(const Program&) const = default;
};

enum class ParamDir { In, Out };

struct Param {
    ParamDir dir = ParamDir::Out;
    std::string name;
    TypeExpr type;
    bool required = true;   // in-params only, `#[required=false]` clears it
    std::string canonical;  // `#_[canonical="..."]`

    bool operator==(const Param&) const = default;
};

enum class FunctionKind { Query, Action };

struct FunctionSig {
    FunctionKind kind = FunctionKind::Query;
    std::string name;
    std::vector<Param> params;
    bool confirmation = false;  // actions: require explicit user confirmation
    std::string canonical;

    const Param* findParam(const std::string& name) const;

    bool operator==(const FunctionSig&) const = default;
};

enum class LoaderKind { Dataset, SimRest, External };

struct LoaderBinding {
    LoaderKind kind = LoaderKind::External;
    std::string dns;  // loader class as written, e.g. org.dlg.dataset
    std::vector<std::pair<std::string, std::string>> args;

    std::string arg(const std::string& name) const;

    bool operator==(const LoaderBinding&) const = default;
};

struct ClassDef {
    std::string name;  // DNS name without the @
    bool isAbstract = false;
    std::vector<std::string> extends;
    std::vector<std::string> entities;  // unqualified; qualified as <name>:<entity>
    std::vector<FunctionSig> functions;
    std::optional<LoaderBinding> loader;
    std::string canonical;

    bool operator==(const ClassDef&) const = default;
};

struct DialogueActDecl {
    std::string ns;
    std::vector<std::string> acts;

    bool operator==(const DialogueActDecl&) const = default;
};

struct Library {
    std::vector<ClassDef> classes;
    std::vector<DialogueActDecl> actDecls;

    bool operator==(const Library&) const = default;
};

// Output fields the statement's action reads from its query.
std::set<std::string> freeVariables(const Statement& stmt);

// Required in-params still marked Missing, in signature order.
std::vector<std::string> missingParams(const Statement& stmt, const FunctionSig& sig);

// Structural invariant check; throws Error("InvalidProgram", ...) on violation.
void validateProgram(const Program& p);

} // namespace dlg
