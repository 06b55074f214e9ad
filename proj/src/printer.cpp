#include <cstdio>

#include "dlg/syntax.hpp"

namespace dlg {

namespace {

std::string escapeString(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default: out += c;
        }
    }
    return out + "\"";
}

const char* opSymbol(FilterOp op) {
    switch (op) {
    case FilterOp::Eq: return "==";
    case FilterOp::Ge: return ">=";
    case FilterOp::Le: return "<=";
    default: return "?";
    }
}

const char* aggName(AggOp op) {
    switch (op) {
    case AggOp::Count: return "count";
    case AggOp::Min: return "min";
    case AggOp::Max: return "max";
    case AggOp::Sum: return "sum";
    case AggOp::Avg: return "avg";
    }
    return "?";
}

// Precedence levels: or < and < not/primary.
std::string printFilterPrec(const FilterExpr& f, int minLevel, const UnitTable& units);

std::string printAtomLike(const FilterExpr& f, const UnitTable& units) {
    switch (f.kind) {
    case FilterKind::True:
        return "true";
    case FilterKind::DontCare:
        return "dontcare(" + f.field + ")";
    case FilterKind::Subquery:
        return "any(" + f.innerField + " " + opSymbol(f.op) + " " + f.field + " of " +
               printQuery(f.inner[0], units) + ")";
    case FilterKind::Atom:
        switch (f.op) {
        case FilterOp::Contains:
            return "contains(" + f.field + ", " + printValue(f.rhsValue, units) + ")";
        case FilterOp::InArray:
            return "in_array(" + f.field + ", " + printValue(f.rhsValue, units) + ")";
        case FilterOp::Substr:
            return "substr(" + f.field + ", " + printValue(f.rhsValue, units) + ")";
        default:
            return f.field + " " + opSymbol(f.op) + " " +
                   (f.rhsIsVar ? f.rhsVar : printValue(f.rhsValue, units));
        }
    default:
        return "?";
    }
}

std::string printFilterPrec(const FilterExpr& f, int minLevel, const UnitTable& units) {
    switch (f.kind) {
    case FilterKind::Or: {
        std::string out;
        for (size_t i = 0; i < f.children.size(); i++)
            out += (i ? " || " : "") + printFilterPrec(f.children[i], 1, units);
        return minLevel > 0 ? "(" + out + ")" : out;
    }
    case FilterKind::And: {
        std::string out;
        for (size_t i = 0; i < f.children.size(); i++)
            out += (i ? " && " : "") + printFilterPrec(f.children[i], 2, units);
        return minLevel > 1 ? "(" + out + ")" : out;
    }
    case FilterKind::Not:
        return "!" + printFilterPrec(f.children[0], 2, units);
    default:
        return printAtomLike(f, units);
    }
}

} // namespace

std::string printValue(const Value& v, const UnitTable& units) {
    if (v.isEnvRef())
        return v.text;
    switch (v.kind) {
    case TypeKind::Boolean:
        return v.boolean ? "true" : "false";
    case TypeKind::Number:
        return formatNumber(v.num);
    case TypeKind::String:
        return escapeString(v.text);
    case TypeKind::Measure:
    case TypeKind::Currency:
        return formatNumber(v.num) + v.text;
    case TypeKind::Date: {
        char buf[40];
        if (v.date.hasTime)
            std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d", v.date.year,
                          v.date.month, v.date.day, v.date.hour, v.date.minute,
                          v.date.second);
        else
            std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", v.date.year, v.date.month,
                          v.date.day);
        return buf;
    }
    case TypeKind::Time: {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "time(%d:%02d)", v.hour, v.minute);
        return buf;
    }
    case TypeKind::Location: {
        std::string out = "location(" + formatNumber(v.lat) + ", " + formatNumber(v.lon);
        if (!v.display.empty())
            out += ", " + escapeString(v.display);
        return out + ")";
    }
    case TypeKind::Entity: {
        std::string out = escapeString(v.text) + "^^" + v.entityType;
        if (!v.display.empty())
            out += "(" + escapeString(v.display) + ")";
        return out;
    }
    case TypeKind::Enum:
        return "enum(" + v.text + ")";
    case TypeKind::Array: {
        std::string out = "[";
        for (size_t i = 0; i < v.elems.size(); i++)
            out += (i ? ", " : "") + printValue(v.elems[i], units);
        return out + "]";
    }
    }
    return "?";
}

std::string printFilter(const FilterExpr& f, const UnitTable& units) {
    return printFilterPrec(f, 0, units);
}

// Filters attach to the base invocation as comma-separated conjuncts.
static std::string printFilterSuffix(const FilterExpr& f, const UnitTable& units) {
    if (f.isTrue())
        return "";
    if (f.kind == FilterKind::And) {
        std::string out;
        for (const auto& child : f.children)
            out += ", " + printFilterPrec(child, 2, units);
        return out;
    }
    return ", " + printFilter(f, units);
}

std::string printQuery(const Query& q, const UnitTable& units) {
    std::string core = q.base.str() + "()";
    std::string filters = printFilterSuffix(q.filter, units);
    std::string out;
    if (q.sort) {
        std::string key = q.sort->field;
        for (const auto& cf : q.computed) {
            if (cf.name != q.sort->field)
                continue;
            key = "distance(" + cf.expr.geoField + ", " +
                  (cf.expr.useHere ? "$here" : printValue(cf.expr.location[0], units)) + ")";
        }
        out = "sort(" + key + " " + (q.sort->ascending ? "asc" : "desc") + " of " + core +
              filters + ")";
    } else {
        out = core + filters;
    }
    if (q.slice)
        out += "[" + std::to_string(q.slice->start) + ":" + std::to_string(q.slice->count) +
               "]";
    if (q.aggregate) {
        std::string agg = aggName(q.aggregate->op);
        if (q.aggregate->op != AggOp::Count)
            agg += ", " + q.aggregate->field;
        out = "aggregate(" + agg + " of " + out + ")";
    }
    if (!q.projection.empty()) {
        std::string proj = "[";
        for (size_t i = 0; i < q.projection.size(); i++)
            proj += (i ? ", " : "") + q.projection[i];
        out = proj + "] of " + out;
    }
    return out;
}

static std::string printAction(const Action& a, const UnitTable& units) {
    std::string out = a.target.str() + "(";
    for (size_t i = 0; i < a.args.size(); i++) {
        const auto& [name, arg] = a.args[i];
        out += (i ? ", " : "") + name + "=";
        switch (arg.kind) {
        case ArgKind::Constant: out += printValue(arg.value, units); break;
        case ArgKind::Var: out += arg.var; break;
        case ArgKind::Missing: out += "$?"; break;
        }
    }
    return out + ")";
}

std::string printStatement(const Statement& s, const UnitTable& units) {
    std::string out;
    if (s.monitor)
        out = "monitor(" + printQuery(*s.query, units) + ") => " +
              printAction(*s.action, units);
    else if (s.query && s.action)
        out = printQuery(*s.query, units) + " => " + printAction(*s.action, units);
    else if (s.query)
        out = printQuery(*s.query, units);
    else
        out = printAction(*s.action, units);
    return out + ";";
}

std::string printProgram(const Program& p, const UnitTable& units) {
    std::string out = p.act.str() + ";";
    for (const auto& s : p.statements)
        out += " " + printStatement(s, units);
    return out;
}

std::string printType(const TypeExpr& t) {
    switch (t.kind) {
    case TypeKind::Enum: {
        std::string out = "Enum(";
        for (size_t i = 0; i < t.variants.size(); i++)
            out += (i ? ", " : "") + t.variants[i];
        return out + ")";
    }
    case TypeKind::Array:
        return "Array(" + printType(t.elementType()) + ")";
    default:
        return t.str();
    }
}

std::string printClass(const ClassDef& c, const UnitTable& units) {
    (void)units;
    std::string out;
    if (c.isAbstract)
        out += "abstract ";
    out += "class @" + c.name;
    if (!c.extends.empty()) {
        out += " extends ";
        for (size_t i = 0; i < c.extends.size(); i++)
            out += (i ? ", @" : "@") + c.extends[i];
    }
    if (!c.canonical.empty())
        out += " #_[canonical=" + escapeString(c.canonical) + "]";
    out += " {\n";
    if (!c.entities.empty()) {
        out += "  entity ";
        for (size_t i = 0; i < c.entities.size(); i++)
            out += (i ? ", " : "") + c.entities[i];
        out += ";\n";
    }
    if (c.loader) {
        out += "  loader @" + c.loader->dns + "(";
        for (size_t i = 0; i < c.loader->args.size(); i++)
            out += (i ? ", " : "") + c.loader->args[i].first + "=" +
                   escapeString(c.loader->args[i].second);
        out += ");\n";
    }
    for (const auto& sig : c.functions) {
        out += sig.kind == FunctionKind::Query ? "  query " : "  action ";
        out += sig.name + "(";
        for (size_t i = 0; i < sig.params.size(); i++) {
            const Param& p = sig.params[i];
            out += (i ? ", " : "");
            out += p.dir == ParamDir::In ? "in " : "out ";
            out += p.name + " : " + printType(p.type);
            if (!p.required && p.dir == ParamDir::In)
                out += " #[required=false]";
            if (!p.canonical.empty())
                out += " #_[canonical=" + escapeString(p.canonical) + "]";
        }
        out += ")";
        if (sig.confirmation)
            out += " #[confirmation=true]";
        if (!sig.canonical.empty())
            out += " #_[canonical=" + escapeString(sig.canonical) + "]";
        out += ";\n";
    }
    return out + "}\n";
}

std::string printLibrary(const Library& lib, const UnitTable& units) {
    std::string out;
    for (const auto& decl : lib.actDecls) {
        out += "dialogue acts @" + decl.ns + " {\n";
        for (const auto& act : decl.acts)
            out += "  " + act + ";\n";
        out += "}\n";
    }
    for (const auto& c : lib.classes) {
        if (!out.empty())
            out += "\n";
        out += printClass(c, units);
    }
    return out;
}

namespace {

void dumpQuery(const Query& q, std::string& out, const std::string& indent) {
    out += indent + "query " + q.base.str() + "\n";
    if (!q.filter.isTrue())
        out += indent + "  filter: " + printFilter(q.filter) + "\n";
    for (const auto& cf : q.computed)
        out += indent + "  computed: " + cf.name + " = distance(" + cf.expr.geoField +
               ", " + (cf.expr.useHere ? "$here" : printValue(cf.expr.location[0])) + ")\n";
    if (q.sort)
        out += indent + "  sort: " + q.sort->field + (q.sort->ascending ? " asc" : " desc") +
               "\n";
    if (q.slice)
        out += indent + "  slice: [" + std::to_string(q.slice->start) + ":" +
               std::to_string(q.slice->count) + "]\n";
    if (q.aggregate)
        out += indent + "  aggregate: " + std::string(aggName(q.aggregate->op)) +
               (q.aggregate->field.empty() ? "" : " " + q.aggregate->field) + "\n";
    if (!q.projection.empty()) {
        out += indent + "  project:";
        for (const auto& f : q.projection)
            out += " " + f;
        out += "\n";
    }
}

} // namespace

std::string dumpProgram(const Program& p) {
    std::string out = "program act=" + p.act.str() + "\n";
    for (const auto& s : p.statements) {
        out += s.monitor ? "statement (monitor)\n" : "statement\n";
        if (s.query)
            dumpQuery(*s.query, out, "  ");
        if (s.action) {
            out += "  action " + s.action->target.str() + "\n";
            for (const auto& [name, arg] : s.action->args) {
            std::string rendered = arg.kind == ArgKind::Constant ? printValue(arg.value)
                                   : arg.kind == ArgKind::Var    ? arg.var
                                                                 : "$?";
                out += "    " + name + " = " + rendered + "\n";
            }
        }
    }
    return out;
}

} // namespace dlg
