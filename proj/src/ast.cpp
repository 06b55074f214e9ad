#include "dlg/ast.hpp"

#include <algorithm>

namespace dlg {

FilterExpr FilterExpr::mkAnd(std::vector<FilterExpr> children) {
    if (children.empty())
        return trueExpr();
    if (children.size() == 1)
        return std::move(children[0]);
    FilterExpr f;
    f.kind = FilterKind::And;
    f.children = std::move(children);
    return f;
}

FilterExpr FilterExpr::mkOr(std::vector<FilterExpr> children) {
    if (children.size() == 1)
        return std::move(children[0]);
    FilterExpr f;
    f.kind = FilterKind::Or;
    f.children = std::move(children);
    return f;
}

FilterExpr FilterExpr::mkNot(FilterExpr child) {
    FilterExpr f;
    f.kind = FilterKind::Not;
    f.children.push_back(std::move(child));
    return f;
}

FilterExpr FilterExpr::atom(std::string field, FilterOp op, Value rhs) {
    FilterExpr f;
    f.kind = FilterKind::Atom;
    f.field = std::move(field);
    f.op = op;
    f.rhsValue = std::move(rhs);
    return f;
}

FilterExpr FilterExpr::atomVar(std::string field, FilterOp op, std::string rhsField) {
    FilterExpr f;
    f.kind = FilterKind::Atom;
    f.field = std::move(field);
    f.op = op;
    f.rhsIsVar = true;
    f.rhsVar = std::move(rhsField);
    return f;
}

FilterExpr FilterExpr::dontCare(std::string field) {
    FilterExpr f;
    f.kind = FilterKind::DontCare;
    f.field = std::move(field);
    return f;
}

FilterExpr FilterExpr::subquery(std::string field, FilterOp op, Query inner,
                                std::string innerField) {
    FilterExpr f;
    f.kind = FilterKind::Subquery;
    f.field = std::move(field);
    f.op = op;
    f.inner.push_back(std::move(inner));
    f.innerField = std::move(innerField);
    return f;
}

const Param* FunctionSig::findParam(const std::string& paramName) const {
    for (const auto& p : params)
        if (p.name == paramName)
            return &p;
    return nullptr;
}

std::string LoaderBinding::arg(const std::string& name) const {
    for (const auto& [k, v] : args)
        if (k == name)
            return v;
    return {};
}

std::set<std::string> freeVariables(const Statement& stmt) {
    std::set<std::string> vars;
    if (!stmt.action || !stmt.query)
        return vars;
    for (const auto& [name, arg] : stmt.action->args)
        if (arg.kind == ArgKind::Var)
            vars.insert(arg.var);
    return vars;
}

std::vector<std::string> missingParams(const Statement& stmt, const FunctionSig& sig) {
    if (!stmt.action || stmt.action->target.name != sig.name)
        throw Error("SignatureMismatch", "statement action does not target " + sig.name);
    std::vector<std::string> missing;
    for (const auto& param : sig.params) {
        if (param.dir != ParamDir::In || !param.required)
            continue;
        bool bound = false;
        for (const auto& [name, arg] : stmt.action->args)
            if (name == param.name && arg.kind != ArgKind::Missing)
                bound = true;
        if (!bound)
            missing.push_back(param.name);
    }
    return missing;
}

static void validateFilter(const FilterExpr& f) {
    switch (f.kind) {
    case FilterKind::True:
        break;
    case FilterKind::And:
    case FilterKind::Or:
        if (f.children.size() < 2)
            throw Error("InvalidProgram", "and/or needs at least two children");
        for (const auto& c : f.children)
            validateFilter(c);
        break;
    case FilterKind::Not:
        if (f.children.size() != 1)
            throw Error("InvalidProgram", "not needs exactly one child");
        validateFilter(f.children[0]);
        break;
    case FilterKind::Atom:
    case FilterKind::DontCare:
        if (f.field.empty())
            throw Error("InvalidProgram", "filter atom needs a field");
        break;
    case FilterKind::Subquery:
        if (f.inner.size() != 1)
            throw Error("InvalidProgram", "subquery needs exactly one inner query");
        if (f.inner[0].aggregate)
            throw Error("InvalidProgram", "subquery inner query cannot aggregate");
        break;
    }
}

static void validateQuery(const Query& q) {
    if (q.base.cls.empty() || q.base.name.empty())
        throw Error("InvalidProgram", "query needs a function reference");
    validateFilter(q.filter);
    if (q.slice && (q.slice->start < 1 || q.slice->count < 1))
        throw Error("InvalidProgram", "slice start and count must be >= 1");
    std::set<std::string> seen;
    for (const auto& field : q.projection)
        if (!seen.insert(field).second)
            throw Error("InvalidProgram", "duplicate projection field " + field);
    if (q.aggregate && q.aggregate->op != AggOp::Count && q.aggregate->field.empty())
        throw Error("InvalidProgram", "aggregate needs a field");
}

void validateProgram(const Program& p) {
    const std::string& act = p.act.name;
    bool isExecute = act == "Execute";
    if ((act == "Greet" || act == "Cancel" || act == "ThankYou") && !p.statements.empty())
        throw Error("InvalidProgram", act + " carries no statements");
    if (isExecute && p.statements.empty())
        throw Error("InvalidProgram", "Execute needs at least one statement");
    for (const auto& stmt : p.statements) {
        if (!stmt.query && !stmt.action)
            throw Error("InvalidProgram", "statement needs a query or an action");
        if (stmt.monitor) {
            if (!stmt.query || !stmt.action)
                throw Error("InvalidProgram", "monitor statement needs both query and action");
            if (stmt.query->aggregate)
                throw Error("InvalidProgram", "monitored query cannot aggregate");
        }
        if (stmt.query)
            validateQuery(*stmt.query);
        if (stmt.action) {
            std::set<std::string> names;
            for (const auto& [name, arg] : stmt.action->args) {
                if (!names.insert(name).second)
                    throw Error("InvalidProgram", "duplicate argument " + name);
                if (arg.kind == ArgKind::Var && !stmt.query)
                    throw Error("InvalidProgram",
                                "variable argument " + name + " without a query");
            }
        }
    }
}

} // namespace dlg
