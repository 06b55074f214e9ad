#include "dlg/exec.hpp"

#include <algorithm>

#include "dlg/canonical.hpp"
#include "dlg/syntax.hpp"

namespace dlg {

namespace {

Value substituteEnv(const Value& v, const Env& env) {
    if (v.kind == TypeKind::Location && v.text == "$here")
        return env.here;
    if (v.kind == TypeKind::Date && v.text == "$now")
        return env.nowValue();
    if (v.kind == TypeKind::Array) {
        Value out = v;
        for (auto& e : out.elems)
            e = substituteEnv(e, env);
        return out;
    }
    return v;
}

std::string entityText(const Value& v) {
    return normalizeString(v.display.empty() ? v.text : v.display);
}

// compareValues plus the entity-vs-string display match used by filters.
bool evalCompare(const Value& a, const Value& b, FilterOp op, const UnitTable& units) {
    CmpOp cmp = op == FilterOp::Ge ? CmpOp::Ge : op == FilterOp::Le ? CmpOp::Le : CmpOp::Eq;
    if (a.kind == TypeKind::Entity && b.kind == TypeKind::String)
        return cmp == CmpOp::Eq && entityText(a) == normalizeString(b.text);
    if (a.kind == TypeKind::String && b.kind == TypeKind::Entity)
        return cmp == CmpOp::Eq && entityText(b) == normalizeString(a.text);
    return compareValues(a, b, cmp, units);
}

bool strictLess(const Value& a, const Value& b, const UnitTable& units) {
    return compareValues(a, b, CmpOp::Le, units) && !compareValues(a, b, CmpOp::Eq, units);
}

class QueryEval {
public:
    QueryEval(SkillSet& skills, const Env& env)
        : skills_(skills), env_(env), units_(UnitTable::builtin()) {}

    std::vector<Record> run(const Query& q) {
        std::vector<Record> rows = skills_.rows(q.base);

        for (auto& row : rows)
            for (const auto& cf : q.computed)
                addComputed(row, cf);

        std::erase_if(rows, [&](const Record& r) { return !evalFilter(q.filter, r); });

        // Deterministic order: (sort key, id, input order); stable sorts keep
        // the later components.
        std::stable_sort(rows.begin(), rows.end(), [](const Record& a, const Record& b) {
            const Value* ia = a.get("id");
            const Value* ib = b.get("id");
            return (ia ? printValue(*ia) : "") < (ib ? printValue(*ib) : "");
        });
        if (q.sort) {
            const std::string& key = q.sort->field;
            bool asc = q.sort->ascending;
            std::stable_sort(rows.begin(), rows.end(),
                             [&](const Record& a, const Record& b) {
                                 const Value* va = a.get(key);
                                 const Value* vb = b.get(key);
                                 if (!va || !vb)
                                     return va && !vb;  // nulls last
                                 return asc ? strictLess(*va, *vb, units_)
                                            : strictLess(*vb, *va, units_);
                             });
        }
        if (q.slice) {
            size_t begin = (size_t)std::max(q.slice->start - 1, 0L);
            begin = std::min(begin, rows.size());
            size_t count = (size_t)std::max(q.slice->count, 0L);
            rows.assign(rows.begin() + begin,
                        rows.begin() + begin + std::min(count, rows.size() - begin));
        }
        if (q.aggregate)
            rows = {aggregate(*q.aggregate, rows)};
        if (!q.projection.empty())
            for (auto& row : rows)
                project(row, q.projection);
        return rows;
    }

    bool evalFilter(const FilterExpr& f, const Record& row) {
        switch (f.kind) {
        case FilterKind::True:
            return true;
        case FilterKind::And:
            return std::all_of(f.children.begin(), f.children.end(),
                               [&](const FilterExpr& c) { return evalFilter(c, row); });
        case FilterKind::Or:
            return std::any_of(f.children.begin(), f.children.end(),
                               [&](const FilterExpr& c) { return evalFilter(c, row); });
        case FilterKind::Not:
            return !evalFilter(f.children[0], row);
        case FilterKind::DontCare:
            return true;
        case FilterKind::Subquery: {
            const Value* outer = row.get(f.field);
            if (!outer)
                return false;
            for (const Record& inner : run(f.inner[0]))
                if (const Value* iv = inner.get(f.innerField))
                    if (evalCompare(*iv, *outer, f.op, units_))
                        return true;
            return false;
        }
        case FilterKind::Atom:
            return evalAtom(f, row);
        }
        return false;
    }

private:
    SkillSet& skills_;
    const Env& env_;
    const UnitTable& units_;

    void addComputed(Record& row, const ComputedField& cf) {
        const Value* geo = row.get(cf.expr.geoField);
        if (!geo || geo->kind != TypeKind::Location)
            return;  // null input: computed field stays null
        Value ref = cf.expr.useHere ? env_.here : substituteEnv(cf.expr.location[0], env_);
        row.set(cf.name, geoDistance(*geo, ref));
    }

    bool evalAtom(const FilterExpr& f, const Record& row) {
        const Value* lhs = row.get(f.field);
        if (!lhs)
            return false;
        Value rhs;
        if (f.rhsIsVar) {
            const Value* rv = row.get(f.rhsVar);
            if (!rv)
                return false;
            rhs = *rv;
        } else {
            rhs = substituteEnv(f.rhsValue, env_);
        }
        switch (f.op) {
        case FilterOp::Contains:
            return lhs->kind == TypeKind::Array &&
                   std::any_of(lhs->elems.begin(), lhs->elems.end(), [&](const Value& e) {
                       return evalCompare(e, rhs, FilterOp::Eq, units_);
                   });
        case FilterOp::InArray:
            return rhs.kind == TypeKind::Array &&
                   std::any_of(rhs.elems.begin(), rhs.elems.end(), [&](const Value& e) {
                       return evalCompare(*lhs, e, FilterOp::Eq, units_);
                   });
        case FilterOp::Substr:
            return lhs->kind == TypeKind::String && rhs.kind == TypeKind::String &&
                   normalizeString(lhs->text).find(normalizeString(rhs.text)) !=
                       std::string::npos;
        default:
            return evalCompare(*lhs, rhs, f.op, units_);
        }
    }

    Record aggregate(const AggSpec& agg, const std::vector<Record>& rows) {
        Record out;
        if (agg.op == AggOp::Count) {
            out.set("count", Value::ofNumber((double)rows.size()));
            return out;
        }
        std::vector<Value> values;
        for (const auto& r : rows)
            if (const Value* v = r.get(agg.field))
                values.push_back(canonicalizeValue(*v, units_));
        if (values.empty())
            throw Error("EmptyAggregate",
                        "aggregate over no non-null values of " + agg.field);
        const char* name = agg.op == AggOp::Min   ? "min"
                           : agg.op == AggOp::Max ? "max"
                           : agg.op == AggOp::Sum ? "sum"
                                                  : "avg";
        if (agg.op == AggOp::Min || agg.op == AggOp::Max) {
            Value best = values[0];
            for (const Value& v : values) {
                bool better = agg.op == AggOp::Min ? strictLess(v, best, units_)
                                                   : strictLess(best, v, units_);
                if (better)
                    best = v;
            }
            out.set(name, best);
            return out;
        }
        // sum/avg over numbers, base-unit measures, or one-currency amounts.
        Value acc = values[0];
        for (size_t i = 1; i < values.size(); i++) {
            if (values[i].kind != acc.kind ||
                (acc.kind != TypeKind::Number && values[i].text != acc.text))
                throw Error("TypeMismatch", "mixed values under " + agg.field);
            acc.num += values[i].num;
        }
        if (agg.op == AggOp::Avg)
            acc.num /= (double)values.size();
        out.set(name, acc);
        return out;
    }

    static void project(Record& row, const std::vector<std::string>& fields) {
        Record out;
        if (const Value* id = row.get("id"))
            out.set("id", *id);  // id is retained implicitly
        for (const auto& f : fields)
            if (const Value* v = row.get(f))
                out.set(f, *v);
        row = std::move(out);
    }
};

std::vector<std::pair<std::string, Value>> bindArgs(const Action& a, const Record* row,
                                                    const Env& env) {
    std::vector<std::pair<std::string, Value>> bound;
    for (const auto& [name, arg] : a.args) {
        switch (arg.kind) {
        case ArgKind::Missing:
            throw Error("MissingParameter", name);
        case ArgKind::Constant:
            bound.emplace_back(name, substituteEnv(arg.value, env));
            break;
        case ArgKind::Var:
            if (row)
                if (const Value* v = row->get(arg.var))
                    bound.emplace_back(name, *v);
            break;  // null row field: argument stays unbound
        }
    }
    return bound;
}

} // namespace

std::vector<Record> executeQuery(const Query& q, SkillSet& skills, const Env& env) {
    return QueryEval(skills, env).run(q);
}

StatementResult executeStatement(const Statement& s, SkillSet& skills, const Env& env) {
    StatementResult result;
    if (s.action)
        for (const auto& [name, arg] : s.action->args)
            if (arg.kind == ArgKind::Missing)
                throw Error("MissingParameter", name);
    if (s.query)
        result.rows = executeQuery(*s.query, skills, env);
    if (!s.action)
        return result;
    if (s.query) {
        for (const Record& row : result.rows)
            result.outcomes.push_back(skills.invoke(s.action->target,
                                                    bindArgs(*s.action, &row, env)));
    } else {
        result.outcomes.push_back(skills.invoke(s.action->target,
                                                bindArgs(*s.action, nullptr, env)));
    }
    return result;
}

ProgramResult executeProgram(const TypedProgram& p, SkillSet& skills, const Env& env) {
    ProgramResult result;
    for (const auto& s : p.program.statements)
        result.statements.push_back(executeStatement(s, skills, env));
    return result;
}

std::string serializeRecord(const Record& r, const UnitTable& units) {
    std::string out = "{";
    bool first = true;
    for (const auto& [name, value] : r.fields) {
        out += (first ? "" : ", ") + name + "=" +
               printValue(canonicalizeValue(value, units), units);
        first = false;
    }
    return out + "}";
}

std::string serializeResult(const ProgramResult& r, const UnitTable& units) {
    std::string out;
    for (size_t i = 0; i < r.statements.size(); i++) {
        const StatementResult& s = r.statements[i];
        out += "statement " + std::to_string(i + 1) + ":\n";
        for (const auto& row : s.rows)
            out += "  row " + serializeRecord(row, units) + "\n";
        for (const auto& o : s.outcomes)
            out += std::string("  outcome ") + (o.success ? "ok" : "failed") + ": " +
                   o.message + "\n";
    }
    return out;
}

std::vector<TickResult> runMonitor(const Statement& s, SkillSet& skills, const Env& env,
                                   int maxTicks, const std::function<void(int)>& beforeTick) {
    if (!s.query || !s.action)
        throw Error("InvalidProgram", "monitor needs both a query and an action");
    if (s.query->aggregate)
        throw Error("InvalidProgram", "monitored query must be aggregate-free");

    auto snapshot = [&] {
        std::set<std::string> seen;
        for (const Record& row : executeQuery(*s.query, skills, env))
            seen.insert(serializeRecord(row));
        return seen;
    };

    std::set<std::string> seen = snapshot();
    long lastVersion = skills.version(s.query->base);
    std::vector<TickResult> ticks;
    for (int tick = 1; tick <= maxTicks; tick++) {
        if (beforeTick)
            beforeTick(tick);
        TickResult tr;
        tr.tick = tick;
        long version = skills.version(s.query->base);
        if (version != lastVersion) {
            lastVersion = version;
            std::set<std::string> now;
            for (const Record& row : executeQuery(*s.query, skills, env)) {
                std::string key = serializeRecord(row);
                now.insert(key);
                if (!seen.count(key)) {  // new or changed row fires
                    tr.outcomes.push_back(
                        skills.invoke(s.action->target, bindArgs(*s.action, &row, env)));
                    tr.fired.push_back(row);
                }
            }
            seen = std::move(now);
        }
        ticks.push_back(std::move(tr));
    }
    return ticks;
}

} // namespace dlg
