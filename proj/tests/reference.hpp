#pragma once

// Naive reference evaluator for the relational pipeline, kept deliberately
// independent of src/exec.cpp: own unit factors, own date arithmetic, own
// string normalization, quadratic algorithms throughout. Used as the oracle
// in fuzz comparisons.

#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dlg/exec.hpp"
#include "dlg/syntax.hpp"

namespace dlgref {

using namespace dlg;

inline std::string refNorm(std::string s) {
    std::string out;
    size_t i = 0, j = s.size();
    while (i < j && std::isspace((unsigned char)s[i])) i++;
    while (j > i && std::isspace((unsigned char)s[j - 1])) j--;
    bool pendingSpace = false;
    for (; i < j; i++) {
        if (std::isspace((unsigned char)s[i])) {
            pendingSpace = true;
            continue;
        }
        if (pendingSpace && !out.empty())
            out += ' ';
        pendingSpace = false;
        out += (char)std::tolower((unsigned char)s[i]);
    }
    return out;
}

inline double refUnitFactor(const std::string& unit, double& offset) {
    static const std::map<std::string, std::pair<double, double>> table = {
        {"m", {1, 0}},       {"mm", {0.001, 0}},   {"cm", {0.01, 0}},
        {"km", {1000, 0}},   {"mi", {1609.344, 0}}, {"ft", {0.3048, 0}},
        {"s", {1, 0}},       {"ms", {0.001, 0}},   {"min", {60, 0}},
        {"h", {3600, 0}},    {"day", {86400, 0}},  {"week", {604800, 0}},
        {"K", {1, 0}},       {"C", {1, 273.15}},   {"F", {5.0 / 9.0, 255.3722222222222}},
        {"kg", {1, 0}},      {"g", {0.001, 0}},    {"mg", {1e-6, 0}},
        {"lb", {0.45359237, 0}}, {"oz", {0.028349523125, 0}},
    };
    auto it = table.at(unit);
    offset = it.second;
    return it.first;
}

inline long long refDateSeconds(const DateValue& d) {
    // Days since epoch by brute-force year/month walk; independent of the
    // days-from-civil formula in the library.
    static const int monthDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    auto leap = [](int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; };
    long long days = 0;
    if (d.year >= 1970)
        for (int y = 1970; y < d.year; y++)
            days += leap(y) ? 366 : 365;
    else
        for (int y = d.year; y < 1970; y++)
            days -= leap(y) ? 366 : 365;
    for (int m = 1; m < d.month; m++)
        days += monthDays[m - 1] + (m == 2 && leap(d.year) ? 1 : 0);
    days += d.day - 1;
    return days * 86400LL + d.hour * 3600LL + d.minute * 60LL + d.second;
}

inline std::optional<double> refOrderedKey(const Value& v) {
    switch (v.kind) {
    case TypeKind::Number: return v.num;
    case TypeKind::Currency: return v.num;
    case TypeKind::Measure: {
        double offset = 0;
        double factor = refUnitFactor(v.text, offset);
        return v.num * factor + offset;
    }
    case TypeKind::Date: return (double)refDateSeconds(v.date);
    case TypeKind::Time: return (double)(v.hour * 60 + v.minute);
    default: return std::nullopt;
    }
}

inline bool refNumEq(double a, double b) {
    return std::fabs(a - b) <= 1e-9 * std::max({1.0, std::fabs(a), std::fabs(b)});
}

inline bool refEq(const Value& a, const Value& b) {
    if (a.kind == TypeKind::Entity && b.kind == TypeKind::String)
        return refNorm(a.display.empty() ? a.text : a.display) == refNorm(b.text);
    if (a.kind == TypeKind::String && b.kind == TypeKind::Entity)
        return refNorm(b.display.empty() ? b.text : b.display) == refNorm(a.text);
    if (a.kind != b.kind)
        return false;
    auto ka = refOrderedKey(a), kb = refOrderedKey(b);
    if (ka && kb)
        return refNumEq(*ka, *kb);
    switch (a.kind) {
    case TypeKind::Boolean: return a.boolean == b.boolean;
    case TypeKind::String: return refNorm(a.text) == refNorm(b.text);
    case TypeKind::Location: return refNumEq(a.lat, b.lat) && refNumEq(a.lon, b.lon);
    case TypeKind::Entity: return a.entityType == b.entityType && a.text == b.text;
    case TypeKind::Enum: return a.text == b.text;
    case TypeKind::Array: {
        if (a.elems.size() != b.elems.size())
            return false;
        for (size_t i = 0; i < a.elems.size(); i++)
            if (!refEq(a.elems[i], b.elems[i]))
                return false;
        return true;
    }
    default: return false;
    }
}

inline bool refCmp(const Value& a, const Value& b, FilterOp op) {
    if (op == FilterOp::Eq)
        return refEq(a, b);
    auto ka = refOrderedKey(a), kb = refOrderedKey(b);
    if (!ka || !kb)
        return false;
    if (refNumEq(*ka, *kb))
        return true;
    return op == FilterOp::Ge ? *ka > *kb : *ka < *kb;
}

inline double refHaversineMeters(double lat1, double lon1, double lat2, double lon2) {
    const double rad = std::acos(-1.0) / 180.0;
    double a = std::pow(std::sin((lat2 - lat1) * rad / 2), 2) +
               std::cos(lat1 * rad) * std::cos(lat2 * rad) *
                   std::pow(std::sin((lon2 - lon1) * rad / 2), 2);
    return 2 * 6371008.8 * std::asin(std::sqrt(std::min(1.0, a)));
}

using Tables = std::map<std::string, std::vector<Record>>;  // query name -> rows

inline bool refFilter(const FilterExpr& f, const Record& row, const Tables& tables,
                      const Value& here);

inline std::vector<Record> refExecute(const Query& q, const Tables& tables,
                                      const Value& here) {
    std::vector<Record> rows = tables.count(q.base.name) ? tables.at(q.base.name)
                                                         : std::vector<Record>{};
    for (auto& row : rows)
        for (const auto& cf : q.computed) {
            const Value* geo = row.get(cf.expr.geoField);
            if (!geo || geo->kind != TypeKind::Location)
                continue;
            const Value& ref = cf.expr.useHere ? here : cf.expr.location[0];
            row.set(cf.name, Value::ofMeasure(refHaversineMeters(geo->lat, geo->lon,
                                                                 ref.lat, ref.lon),
                                              "m"));
        }

    std::vector<Record> filtered;
    for (const auto& row : rows)
        if (refFilter(q.filter, row, tables, here))
            filtered.push_back(row);
    rows = filtered;

    // Selection sort on (sort key asc/desc, printed id) — O(n^2) on purpose,
    // with nulls last and input order as the final tiebreak.
    auto idKey = [](const Record& r) {
        const Value* id = r.get("id");
        return id ? printValue(*id) : std::string();
    };
    std::vector<Record> ordered;
    std::vector<bool> taken(rows.size(), false);
    for (size_t n = 0; n < rows.size(); n++) {
        int best = -1;
        for (size_t i = 0; i < rows.size(); i++) {
            if (taken[i])
                continue;
            if (best < 0) {
                best = (int)i;
                continue;
            }
            const Record& a = rows[i];
            const Record& b = rows[(size_t)best];
            bool aWins = false;
            bool decided = false;
            if (q.sort) {
                const Value* va = a.get(q.sort->field);
                const Value* vb = b.get(q.sort->field);
                auto ka = va ? refOrderedKey(*va) : std::nullopt;
                auto kb = vb ? refOrderedKey(*vb) : std::nullopt;
                if (ka.has_value() != kb.has_value()) {
                    aWins = ka.has_value();  // nulls last
                    decided = true;
                } else if (ka && kb && !refNumEq(*ka, *kb)) {
                    aWins = q.sort->ascending ? *ka < *kb : *ka > *kb;
                    decided = true;
                }
            }
            if (!decided) {
                std::string ia = idKey(a), ib = idKey(b);
                if (ia != ib) {
                    aWins = ia < ib;
                    decided = true;
                }
            }
            // equal keys: keep earlier input index (best), i.e. a does not win
            if (decided && aWins)
                best = (int)i;
        }
        taken[(size_t)best] = true;
        ordered.push_back(rows[(size_t)best]);
    }
    rows = ordered;

    if (q.slice) {
        std::vector<Record> sliced;
        for (long pos = q.slice->start; pos < q.slice->start + q.slice->count; pos++)
            if (pos >= 1 && pos <= (long)rows.size())
                sliced.push_back(rows[(size_t)(pos - 1)]);
        rows = sliced;
    }

    if (q.aggregate) {
        Record out;
        if (q.aggregate->op == AggOp::Count) {
            out.set("count", Value::ofNumber((double)rows.size()));
        } else {
            std::vector<Value> vals;
            for (const auto& r : rows)
                if (const Value* v = r.get(q.aggregate->field))
                    vals.push_back(*v);
            if (vals.empty())
                throw Error("EmptyAggregate", q.aggregate->field);
            const char* name = q.aggregate->op == AggOp::Min   ? "min"
                               : q.aggregate->op == AggOp::Max ? "max"
                               : q.aggregate->op == AggOp::Sum ? "sum"
                                                               : "avg";
            if (q.aggregate->op == AggOp::Min || q.aggregate->op == AggOp::Max) {
                Value best = vals[0];
                for (const auto& v : vals) {
                    bool better = q.aggregate->op == AggOp::Min
                                      ? *refOrderedKey(v) < *refOrderedKey(best)
                                      : *refOrderedKey(v) > *refOrderedKey(best);
                    if (better)
                        best = v;
                }
                // Measures aggregate in base units.
                if (best.kind == TypeKind::Measure) {
                    double offset = 0;
                    double factor = refUnitFactor(best.text, offset);
                    std::string baseUnit = best.text == "kg" || best.text == "g" ||
                                                   best.text == "mg" || best.text == "lb" ||
                                                   best.text == "oz"
                                               ? "kg"
                                           : best.text == "K" || best.text == "C" ||
                                                   best.text == "F"
                                               ? "K"
                                           : best.text == "s" || best.text == "ms" ||
                                                   best.text == "min" || best.text == "h" ||
                                                   best.text == "day" || best.text == "week"
                                               ? "s"
                                               : "m";
                    best = Value::ofMeasure(best.num * factor + offset, baseUnit);
                }
                out.set(name, best);
            } else {
                double total = 0;
                for (const auto& v : vals)
                    total += *refOrderedKey(v);
                if (q.aggregate->op == AggOp::Avg)
                    total /= (double)vals.size();
                Value v0 = vals[0];
                Value acc = v0.kind == TypeKind::Currency
                                ? Value::ofCurrency(total, v0.text)
                            : v0.kind == TypeKind::Measure
                                ? Value::ofMeasure(total, "kg")  // mass-only corpus
                                : Value::ofNumber(total);
                out.set(name, acc);
            }
        }
        rows = {out};
    }

    if (!q.projection.empty())
        for (auto& row : rows) {
            Record out;
            if (const Value* id = row.get("id"))
                out.set("id", *id);
            for (const auto& f : q.projection)
                if (const Value* v = row.get(f))
                    out.set(f, *v);
            row = out;
        }
    return rows;
}

inline bool refFilter(const FilterExpr& f, const Record& row, const Tables& tables,
                      const Value& here) {
    switch (f.kind) {
    case FilterKind::True:
        return true;
    case FilterKind::And:
        for (const auto& c : f.children)
            if (!refFilter(c, row, tables, here))
                return false;
        return true;
    case FilterKind::Or:
        for (const auto& c : f.children)
            if (refFilter(c, row, tables, here))
                return true;
        return false;
    case FilterKind::Not:
        return !refFilter(f.children[0], row, tables, here);
    case FilterKind::DontCare:
        return true;
    case FilterKind::Subquery: {
        const Value* outer = row.get(f.field);
        if (!outer)
            return false;
        for (const auto& inner : refExecute(f.inner[0], tables, here))
            if (const Value* iv = inner.get(f.innerField))
                if (refCmp(*iv, *outer, f.op))
                    return true;
        return false;
    }
    case FilterKind::Atom: {
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
            rhs = f.rhsValue;
        }
        switch (f.op) {
        case FilterOp::Contains:
            if (lhs->kind != TypeKind::Array)
                return false;
            for (const auto& e : lhs->elems)
                if (refEq(e, rhs))
                    return true;
            return false;
        case FilterOp::InArray:
            if (rhs.kind != TypeKind::Array)
                return false;
            for (const auto& e : rhs.elems)
                if (refEq(*lhs, e))
                    return true;
            return false;
        case FilterOp::Substr:
            return lhs->kind == TypeKind::String && rhs.kind == TypeKind::String &&
                   refNorm(lhs->text).find(refNorm(rhs.text)) != std::string::npos;
        default:
            return refCmp(*lhs, rhs, f.op);
        }
    }
    }
    return false;
}

} // namespace dlgref
