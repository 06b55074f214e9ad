#include "dlg/typecheck.hpp"

#include <algorithm>

#include "dlg/syntax.hpp"

namespace dlg {

const FunctionSig* ResolvedClass::findFunction(const std::string& fname) const {
    for (const auto& f : functions)
        if (f.name == fname)
            return &f;
    return nullptr;
}

Registry::Registry() {
    acts_["Transaction"] = {"Execute", "Greet", "Cancel", "ThankYou"};
}

void Registry::addClass(ResolvedClass cls) {
    if (classes_.count(cls.name))
        throw Error("DuplicateClass", "@" + cls.name + " is already registered");
    classes_[cls.name] = std::move(cls);
}

void Registry::addDialogueActs(const std::string& ns, const std::vector<std::string>& acts) {
    for (const auto& a : acts)
        acts_[ns].insert(a);
}

const ResolvedClass* Registry::findClass(const std::string& name) const {
    auto it = classes_.find(name);
    return it == classes_.end() ? nullptr : &it->second;
}

const ResolvedClass& Registry::cls(const std::string& name) const {
    const ResolvedClass* c = findClass(name);
    if (!c)
        throw Error("UnknownClass", "@" + name);
    return *c;
}

bool Registry::knownAct(const DialogueActRef& act) const {
    auto it = acts_.find(act.ns);
    return it != acts_.end() && it->second.count(act.name) > 0;
}

bool Registry::knownEntityType(const std::string& qualified) const {
    if (qualified.rfind("tt:", 0) == 0)
        return true;
    for (const auto& [name, c] : classes_)
        if (c.entityTypes.count(qualified))
            return true;
    return false;
}

std::vector<std::string> Registry::classNames() const {
    std::vector<std::string> names;
    for (const auto& [name, c] : classes_)
        names.push_back(name);
    return names;
}

namespace {

class LibraryResolver {
public:
    LibraryResolver(Registry& registry, const Library& lib) : registry_(registry) {
        for (const auto& c : lib.classes) {
            if (byName_.count(c.name) || registry.findClass(c.name))
                throw Error("DuplicateClass", "@" + c.name);
            byName_[c.name] = &c;
        }
        for (const auto& d : lib.actDecls)
            registry.addDialogueActs(d.ns, d.acts);
        for (const auto& c : lib.classes)
            resolve(c.name);
    }

private:
    Registry& registry_;
    std::map<std::string, const ClassDef*> byName_;
    std::set<std::string> inProgress_;

    const ResolvedClass& resolve(const std::string& name) {
        if (const ResolvedClass* done = registry_.findClass(name))
            return *done;
        if (!inProgress_.insert(name).second)
            throw Error("CyclicInheritance", "@" + name);
        auto it = byName_.find(name);
        if (it == byName_.end())
            throw Error("UnknownClass", "@" + name + " (in extends)");
        const ClassDef& def = *it->second;

        ResolvedClass out;
        out.name = def.name;
        out.isAbstract = def.isAbstract;
        out.extends = def.extends;
        out.loader = def.loader;
        out.canonical = def.canonical;
        for (const auto& e : def.entities)
            out.entityTypes.insert(def.name + ":" + e);

        // Inherited functions first, in parent order.
        for (const auto& parent : def.extends) {
            const ResolvedClass& base = resolve(parent);
            for (const auto& e : base.entityTypes)
                out.entityTypes.insert(e);
            for (const auto& f : base.functions)
                mergeFunction(out, f);
        }
        for (const auto& f : def.functions)
            mergeFunction(out, qualifySig(f, def, out));

        inProgress_.erase(name);
        registry_.addClass(std::move(out));
        return *registry_.findClass(name);
    }

    // Child redeclaration with an identical signature is allowed; a different
    // signature under the same name is a conflict.
    static void mergeFunction(ResolvedClass& cls, const FunctionSig& sig) {
        for (const auto& existing : cls.functions) {
            if (existing.name != sig.name)
                continue;
            if (existing == sig)
                return;
            throw Error("SignatureConflict",
                        "@" + cls.name + "." + sig.name + " redeclared with a different type");
        }
        cls.functions.push_back(sig);
    }

    // Qualify unqualified Entity(...) types by the class (self or ancestor)
    // that declares the entity.
    FunctionSig qualifySig(FunctionSig sig, const ClassDef& def, const ResolvedClass& partial) {
        for (auto& p : sig.params) {
            qualifyType(p.type, def, partial);
        }
        return sig;
    }

    void qualifyType(TypeExpr& t, const ClassDef& def, const ResolvedClass& partial) {
        if (t.kind == TypeKind::Array) {
            qualifyType(t.element[0], def, partial);
            return;
        }
        if (t.kind != TypeKind::Entity || t.entityType.find(':') != std::string::npos)
            return;
        std::string unqualified = t.entityType;
        for (const auto& qualified : partial.entityTypes) {
            if (qualified.substr(qualified.find(':') + 1) == unqualified) {
                t.entityType = qualified;
                return;
            }
        }
        throw Error("UnknownEntityType",
                    "entity type " + unqualified + " not declared before use in @" + def.name);
    }
};

bool typesCompatible(const TypeExpr& expected, const TypeExpr& actual) {
    if (expected.kind != actual.kind)
        return false;
    switch (expected.kind) {
    case TypeKind::Measure: return expected.unitClass == actual.unitClass;
    case TypeKind::Entity: return expected.entityType == actual.entityType;
    case TypeKind::Enum:
        // A value-level enum carries just its observed variant; accept it when
        // it is one of the declared variants.
        if (actual.variants.size() == 1)
            return std::find(expected.variants.begin(), expected.variants.end(),
                             actual.variants[0]) != expected.variants.end();
        return expected.variants == actual.variants;
    case TypeKind::Array:
        return typesCompatible(expected.elementType(), actual.elementType());
    default:
        return true;
    }
}

bool orderable(const TypeExpr& t) {
    switch (t.kind) {
    case TypeKind::Number:
    case TypeKind::Measure:
    case TypeKind::Currency:
    case TypeKind::Date:
    case TypeKind::Time:
        return true;
    default:
        return false;
    }
}

class Checker {
public:
    Checker(const Registry& registry, const UnitTable& units)
        : registry_(registry), units_(units) {}

    TypeCheckResult run(const Program& p) {
        result_.typed.program = p;
        if (!registry_.knownAct(p.act))
            error("UnknownFunction", "unknown dialogue act " + p.act.str());
        for (size_t i = 0; i < result_.typed.program.statements.size(); i++) {
            path_ = "statement " + std::to_string(i + 1);
            Statement& stmt = result_.typed.program.statements[i];
            result_.typed.statements.push_back(checkStatement(stmt));
        }
        return std::move(result_);
    }

private:
    const Registry& registry_;
    const UnitTable& units_;
    TypeCheckResult result_;
    std::string path_;

    void error(const std::string& code, const std::string& message) {
        result_.errors.push_back(TypeError{code, SourceSpan{}, path_, message});
    }

    TypedStatement checkStatement(Statement& stmt) {
        TypedStatement typed;
        // A bare @X.Y(); parses as a query; flip it when Y is an action.
        if (stmt.query && !stmt.action && stmt.query->filter.isTrue() &&
            !stmt.query->sort && !stmt.query->slice && !stmt.query->aggregate &&
            stmt.query->projection.empty()) {
            const ResolvedClass* c = registry_.findClass(stmt.query->base.cls);
            const FunctionSig* f = c ? c->findFunction(stmt.query->base.name) : nullptr;
            if (f && f->kind == FunctionKind::Action) {
                Action a;
                a.target = stmt.query->base;
                stmt.action = a;
                stmt.query.reset();
            }
        }
        if (stmt.query)
            checkQuery(*stmt.query, typed);
        if (stmt.action)
            checkAction(stmt, typed);
        return typed;
    }

    void checkQuery(const Query& q, TypedStatement& typed) {
        const ResolvedClass* c = registry_.findClass(q.base.cls);
        if (!c) {
            error("UnknownClass", q.base.str());
            return;
        }
        const FunctionSig* sig = c->findFunction(q.base.name);
        if (!sig) {
            error("UnknownFunction", q.base.str());
            return;
        }
        if (sig->kind != FunctionKind::Query) {
            error("TypeMismatch", q.base.str() + " is an action, not a query");
            return;
        }
        typed.queryClass = c;
        typed.querySig = sig;
        if (!c->executable())
            typed.executable = false;
        if (c->isAbstract)
            typed.executable = false;

        for (const auto& p : sig->params)
            if (p.dir == ParamDir::Out)
                typed.outFields[p.name] = p.type;
        for (const auto& cf : q.computed) {
            auto geo = typed.outFields.find(cf.expr.geoField);
            if (geo == typed.outFields.end())
                error("UnknownField", "computed field input " + cf.expr.geoField);
            else if (geo->second.kind != TypeKind::Location)
                error("TypeMismatch", "distance() needs a Location field, got " +
                                          geo->second.str());
            if (!cf.expr.useHere &&
                (cf.expr.location.empty() ||
                 cf.expr.location[0].kind != TypeKind::Location))
                error("TypeMismatch", "distance() reference must be a location");
            typed.outFields[cf.name] = TypeExpr::measure("length");
        }

        checkFilter(q.filter, typed.outFields);

        if (q.sort) {
            auto it = typed.outFields.find(q.sort->field);
            if (it == typed.outFields.end())
                error("UnknownField", "sort key " + q.sort->field);
            else if (!orderable(it->second))
                error("BadOperatorForType", "cannot sort by " + it->second.str());
        }
        if (q.aggregate && q.aggregate->op != AggOp::Count) {
            auto it = typed.outFields.find(q.aggregate->field);
            if (it == typed.outFields.end()) {
                error("UnknownField", "aggregate field " + q.aggregate->field);
            } else {
                bool minMax =
                    q.aggregate->op == AggOp::Min || q.aggregate->op == AggOp::Max;
                bool numeric = it->second.kind == TypeKind::Number ||
                               it->second.kind == TypeKind::Measure ||
                               it->second.kind == TypeKind::Currency;
                if (!(numeric || (minMax && orderable(it->second))))
                    error("BadOperatorForType",
                          "cannot aggregate over " + it->second.str());
            }
        }
        for (const auto& f : q.projection)
            if (!typed.outFields.count(f))
                error("UnknownField", "projection field " + f);
    }

    void checkFilter(const FilterExpr& f, const std::map<std::string, TypeExpr>& fields) {
        switch (f.kind) {
        case FilterKind::True:
            return;
        case FilterKind::And:
        case FilterKind::Or:
        case FilterKind::Not:
            for (const auto& c : f.children)
                checkFilter(c, fields);
            return;
        case FilterKind::DontCare:
            if (!fields.count(f.field))
                error("UnknownField", "dontcare(" + f.field + ")");
            return;
        case FilterKind::Subquery: {
            auto outer = fields.find(f.field);
            if (outer == fields.end()) {
                error("UnknownField", "subquery outer field " + f.field);
                return;
            }
            TypedStatement inner;
            checkQuery(f.inner[0], inner);
            auto it = inner.outFields.find(f.innerField);
            if (it == inner.outFields.end()) {
                if (inner.querySig)  // suppress cascade after resolution failure
                    error("UnknownField", "subquery inner field " + f.innerField);
                return;
            }
            checkComparison(it->second, outer->second, f.op, f.field);
            return;
        }
        case FilterKind::Atom:
            checkAtom(f, fields);
            return;
        }
    }

    // In filters a String literal may stand in for an Entity (matched against
    // the entity display name at runtime, like the paper's entity linking).
    static bool entityStringMatch(const TypeExpr& lhs, const TypeExpr& rhs) {
        return lhs.kind == TypeKind::Entity && rhs.kind == TypeKind::String;
    }

    void checkComparison(const TypeExpr& lhs, const TypeExpr& rhs, FilterOp op,
                         const std::string& field) {
        if (entityStringMatch(lhs, rhs)) {
            if (op != FilterOp::Eq)
                error("BadOperatorForType", "ordering comparison on " + lhs.str());
            return;
        }
        if (!typesCompatible(lhs, rhs)) {
            error("TypeMismatch", "comparison on " + field + ": " + lhs.str() + " vs " +
                                      rhs.str());
            return;
        }
        if ((op == FilterOp::Ge || op == FilterOp::Le) && !orderable(lhs))
            error("BadOperatorForType", "ordering comparison on " + lhs.str());
    }

    void checkAtom(const FilterExpr& f, const std::map<std::string, TypeExpr>& fields) {
        auto it = fields.find(f.field);
        if (it == fields.end()) {
            error("UnknownField", "filter field " + f.field);
            return;
        }
        const TypeExpr& fieldType = it->second;
        TypeExpr rhsType;
        if (f.rhsIsVar) {
            auto rv = fields.find(f.rhsVar);
            if (rv == fields.end()) {
                error("UnknownField", "filter value field " + f.rhsVar);
                return;
            }
            rhsType = rv->second;
        } else if (f.rhsValue.kind == TypeKind::Array && f.rhsValue.elems.empty()) {
            rhsType = TypeExpr::array(TypeExpr::number());  // empty array: wildcard
        } else {
            try {
                rhsType = typeOfValue(f.rhsValue, units_);
            } catch (const Error& e) {
                error("TypeMismatch", e.what());
                return;
            }
        }
        switch (f.op) {
        case FilterOp::Eq:
        case FilterOp::Ge:
        case FilterOp::Le:
            checkComparison(fieldType, rhsType, f.op, f.field);
            return;
        case FilterOp::Contains:
            if (fieldType.kind != TypeKind::Array)
                error("BadOperatorForType", "contains() needs an Array field");
            else if (!f.rhsValue.elems.empty() || f.rhsIsVar ||
                     f.rhsValue.kind != TypeKind::Array) {
                if (!typesCompatible(fieldType.elementType(), rhsType) &&
                    !entityStringMatch(fieldType.elementType(), rhsType))
                    error("TypeMismatch", "contains(" + f.field + "): element " +
                                              fieldType.elementType().str() + " vs " +
                                              rhsType.str());
            }
            return;
        case FilterOp::InArray:
            if (rhsType.kind != TypeKind::Array)
                error("BadOperatorForType", "in_array() needs an array value");
            else if (f.rhsValue.elems.empty() ||
                     typesCompatible(TypeExpr::array(fieldType), rhsType))
                return;
            else
                error("TypeMismatch", "in_array(" + f.field + ")");
            return;
        case FilterOp::Substr:
            if (fieldType.kind != TypeKind::String || rhsType.kind != TypeKind::String)
                error("BadOperatorForType", "substr() needs String operands");
            return;
        }
    }

    void checkAction(const Statement& stmt, TypedStatement& typed) {
        const Action& a = *stmt.action;
        const ResolvedClass* c = registry_.findClass(a.target.cls);
        if (!c) {
            error("UnknownClass", a.target.str());
            return;
        }
        const FunctionSig* sig = c->findFunction(a.target.name);
        if (!sig) {
            error("UnknownFunction", a.target.str());
            return;
        }
        if (sig->kind != FunctionKind::Action) {
            error("TypeMismatch", a.target.str() + " is a query, not an action");
            return;
        }
        typed.actionClass = c;
        typed.actionSig = sig;
        if (!c->executable() || c->isAbstract)
            typed.executable = false;

        std::set<std::string> seen;
        for (const auto& [name, arg] : a.args) {
            if (!seen.insert(name).second)
                error("DuplicateArg", name);
            const Param* param = sig->findParam(name);
            if (!param || param->dir != ParamDir::In) {
                error("UnknownField", "argument " + name + " not declared by " +
                                          a.target.str());
                continue;
            }
            if (arg.kind == ArgKind::Missing)
                continue;
            if (arg.kind == ArgKind::Var) {
                auto it = typed.outFields.find(arg.var);
                if (it == typed.outFields.end()) {
                    error("UnknownField", "variable " + arg.var +
                                              " is not an output of the query");
                    continue;
                }
                if (!typesCompatible(param->type, it->second))
                    error("TypeMismatch", "argument " + name + ": " + param->type.str() +
                                              " vs " + it->second.str());
                continue;
            }
            TypeExpr valueType;
            try {
                valueType = typeOfValue(arg.value, units_);
            } catch (const Error& e) {
                error("TypeMismatch", e.what());
                continue;
            }
            if (param->type.kind == TypeKind::Enum) {
                if (arg.value.kind != TypeKind::Enum ||
                    std::find(param->type.variants.begin(), param->type.variants.end(),
                              arg.value.text) == param->type.variants.end())
                    error("TypeMismatch", "argument " + name + " is not a variant of " +
                                              param->type.str());
                continue;
            }
            if (!typesCompatible(param->type, valueType))
                error("TypeMismatch", "argument " + name + ": expected " +
                                          param->type.str() + ", got " + valueType.str());
        }
    }
};

} // namespace

void resolveInto(Registry& registry, const Library& lib) {
    LibraryResolver resolver(registry, lib);
}

Registry resolveLibrary(const Library& lib) {
    Registry registry;
    resolveInto(registry, lib);
    return registry;
}

TypeCheckResult typecheckProgram(const Program& p, const Registry& registry,
                                 const UnitTable& units) {
    return Checker(registry, units).run(p);
}

TypedProgram typecheckOrThrow(const Program& p, const Registry& registry,
                              const UnitTable& units) {
    TypeCheckResult result = typecheckProgram(p, registry, units);
    if (!result.ok()) {
        std::string message;
        for (const auto& e : result.errors)
            message += (message.empty() ? "" : "; ") + e.code + " (" + e.path + "): " +
                       e.message;
        throw Error("TypeErrors", message);
    }
    return std::move(result.typed);
}

Value lookupEntity(const Registry& registry, const EntityLexicon& lexicon,
                   const std::string& entityType, const std::string& text) {
    if (!registry.knownEntityType(entityType) && !lexicon.knownType(entityType))
        throw Error("UnknownEntity", "unknown entity type " + entityType);
    return lexicon.lookup(entityType, text);
}

} // namespace dlg
