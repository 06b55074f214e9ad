#pragma once

// Random AST generators for property tests. Programs from `randomProgram` are
// structurally valid per the surface grammar but not necessarily well-typed;
// typed generation against a registry lives in the fixtures header.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dlg/ast.hpp"
#include "dlg/skills.hpp"
#include "dlg/syntax.hpp"

namespace dlggen {

using namespace dlg;

class Rng {
public:
    explicit Rng(unsigned seed) : engine_(seed) {}

    int range(int lo, int hi) {  // inclusive
        return std::uniform_int_distribution<int>(lo, hi)(engine_);
    }
    bool chance(double p) { return std::uniform_real_distribution<>(0, 1)(engine_) < p; }
    template <class T>
    const T& pick(const std::vector<T>& v) {
        return v[(size_t)range(0, (int)v.size() - 1)];
    }
    std::mt19937& engine() { return engine_; }

private:
    std::mt19937 engine_;
};

inline std::string randomIdent(Rng& rng) {
    static const std::vector<std::string> pool = {
        "id",     "name",   "geo",    "price",  "rating",  "genres", "artists",
        "status", "song",   "device", "cuisine", "link",    "title",  "body",
        "speed",  "weight", "temp",   "start",  "finish",  "owner",  "tags"};
    return rng.pick(pool);
}

inline std::string randomDns(Rng& rng) {
    static const std::vector<std::string> pool = {"com.example", "org.demo", "net.test",
                                                  "Spotify", "Yelp", "TMDB", "io.data"};
    return rng.pick(pool);
}

inline double randomNiceNumber(Rng& rng) {
    double n = rng.range(-9999, 9999);
    int scale = rng.range(0, 2);
    for (int i = 0; i < scale; i++)
        n /= 10;
    return n == 0 ? 1 : n;  // avoid -0 ambiguity
}

inline Value randomValue(Rng& rng, int depth = 0) {
    int kind = rng.range(0, depth > 0 ? 9 : 10);
    switch (kind) {
    case 0: return Value::ofBool(rng.chance(0.5));
    case 1: return Value::ofNumber(randomNiceNumber(rng));
    case 2: {
        static const std::vector<std::string> strings = {"hello", "Chinese food", "adele",
                                                         "jazz", "a b  c", "quote\"inside"};
        return Value::ofString(rng.pick(strings));
    }
    case 3: {
        static const std::vector<std::string> units = {"m", "km", "s", "min", "h",
                                                       "K", "C", "kg", "g"};
        return Value::ofMeasure(std::abs(randomNiceNumber(rng)), rng.pick(units));
    }
    case 4: {
        static const std::vector<std::string> codes = {"USD", "EUR", "JPY"};
        return Value::ofCurrency(std::abs(randomNiceNumber(rng)), rng.pick(codes));
    }
    case 5: {
        DateValue d;
        d.year = rng.range(1990, 2030);
        d.month = rng.range(1, 12);
        d.day = rng.range(1, 28);
        if (rng.chance(0.3)) {
            d.hasTime = true;
            d.hour = rng.range(0, 23);
            d.minute = rng.range(0, 59);
            d.second = rng.range(0, 59);
        }
        return Value::ofDate(d);
    }
    case 6: return Value::ofTime(rng.range(0, 23), rng.range(0, 59));
    case 7:
        return Value::ofLocation(rng.range(-89, 89) + 0.5, rng.range(-179, 179) + 0.25,
                                 rng.chance(0.5) ? "Somewhere" : "");
    case 8: {
        static const std::vector<std::string> types = {"tt:country", "tt:stock_ticker",
                                                       "Spotify:Song"};
        return Value::ofEntity(rng.pick(types), "id" + std::to_string(rng.range(1, 99)),
                               rng.chance(0.5) ? "Display Name" : "");
    }
    case 9: {
        static const std::vector<std::string> variants = {"small", "medium", "large"};
        return Value::ofEnum(rng.pick(variants));
    }
    default: {
        std::vector<Value> elems;
        int n = rng.range(1, 3);
        for (int i = 0; i < n; i++)
            elems.push_back(Value::ofNumber(randomNiceNumber(rng)));
        return Value::ofArray(std::move(elems));
    }
    }
}

inline Query randomQuery(Rng& rng, int filterDepth, bool allowAggregate = true);

inline FilterExpr randomFilter(Rng& rng, int depth) {
    if (depth <= 0 || rng.chance(0.4)) {
        switch (rng.range(0, 6)) {
        case 0: return FilterExpr::trueExpr();
        case 1:
            return FilterExpr::atom(randomIdent(rng),
                                    (FilterOp)rng.range(0, 2), randomValue(rng, 1));
        case 2:
            return FilterExpr::atom(randomIdent(rng), FilterOp::Contains,
                                    randomValue(rng, 1));
        case 3: {
            std::vector<Value> elems;
            int n = rng.range(1, 3);
            for (int i = 0; i < n; i++)
                elems.push_back(randomValue(rng, 1));
            return FilterExpr::atom(randomIdent(rng), FilterOp::InArray,
                                    Value::ofArray(std::move(elems)));
        }
        case 4:
            return FilterExpr::atom(randomIdent(rng), FilterOp::Substr,
                                    Value::ofString("sub"));
        case 5: return FilterExpr::dontCare(randomIdent(rng));
        default:
            return FilterExpr::subquery(randomIdent(rng), (FilterOp)rng.range(0, 2),
                                        randomQuery(rng, 0, false), randomIdent(rng));
        }
    }
    switch (rng.range(0, 2)) {
    case 0: {
        std::vector<FilterExpr> children;
        int n = rng.range(2, 3);
        for (int i = 0; i < n; i++)
            children.push_back(randomFilter(rng, depth - 1));
        auto f = FilterExpr::mkAnd(std::move(children));
        return f.kind == FilterKind::And ? f : FilterExpr::mkNot(f);
    }
    case 1: {
        std::vector<FilterExpr> children;
        int n = rng.range(2, 3);
        for (int i = 0; i < n; i++)
            children.push_back(randomFilter(rng, depth - 1));
        return FilterExpr::mkOr(std::move(children));
    }
    default:
        return FilterExpr::mkNot(randomFilter(rng, depth - 1));
    }
}

inline Query randomQuery(Rng& rng, int filterDepth, bool allowAggregate) {
    Query q;
    q.base = {randomDns(rng), "Item"};
    q.filter = randomFilter(rng, filterDepth);
    if (rng.chance(0.3)) {
        SortSpec sort;
        if (rng.chance(0.4)) {
            ComputedField cf;
            cf.name = "distance";
            cf.expr.geoField = "geo";
            cf.expr.useHere = rng.chance(0.7);
            if (!cf.expr.useHere)
                cf.expr.location.push_back(Value::ofLocation(10.5, 20.5));
            q.computed.push_back(cf);
            sort.field = "distance";
        } else {
            sort.field = randomIdent(rng);
        }
        sort.ascending = rng.chance(0.5);
        q.sort = sort;
    }
    if (rng.chance(0.3))
        q.slice = SliceSpec{rng.range(1, 5), rng.range(1, 5)};
    if (allowAggregate && rng.chance(0.2)) {
        AggSpec agg;
        agg.op = (AggOp)rng.range(0, 4);
        if (agg.op != AggOp::Count)
            agg.field = randomIdent(rng);
        q.aggregate = agg;
    }
    if (rng.chance(0.2)) {
        std::set<std::string> fields;
        int n = rng.range(1, 3);
        for (int i = 0; i < n; i++)
            fields.insert(randomIdent(rng));
        q.projection.assign(fields.begin(), fields.end());
    }
    return q;
}

inline Action randomAction(Rng& rng, bool allowVars, int minArgs) {
    Action a;
    a.target = {randomDns(rng), "Do"};
    std::set<std::string> names;
    int n = rng.range(minArgs, 3);
    for (int i = 0; i < n; i++)
        names.insert(randomIdent(rng));
    for (const auto& name : names) {
        if (allowVars && rng.chance(0.3))
            a.args.emplace_back(name, ArgValue::varRef(randomIdent(rng)));
        else if (rng.chance(0.15))
            a.args.emplace_back(name, ArgValue::missing());
        else
            a.args.emplace_back(name, ArgValue::constant(randomValue(rng)));
    }
    return a;
}

inline Statement randomStatement(Rng& rng) {
    Statement s;
    int form = rng.range(0, 3);
    if (form == 0) {
        s.query = randomQuery(rng, 2);
    } else if (form == 1) {
        // Bare zero-arg actions parse as queries, so action-only needs >= 1 arg.
        s.action = randomAction(rng, false, 1);
    } else if (form == 2) {
        s.query = randomQuery(rng, 2);
        s.action = randomAction(rng, true, 0);
    } else {
        s.monitor = true;
        s.query = randomQuery(rng, 1, false);
        s.action = randomAction(rng, true, 0);
    }
    return s;
}

inline Program randomProgram(Rng& rng) {
    Program p;
    switch (rng.range(0, 4)) {
    case 0: p.act = {"Transaction", "Greet"}; return p;
    case 1: p.act = {"Transaction", "Cancel"}; return p;
    case 2: p.act = {"Transaction", "ThankYou"}; return p;
    default:
        p.act = {"Transaction", "Execute"};
        int n = rng.range(1, 3);
        for (int i = 0; i < n; i++)
            p.statements.push_back(randomStatement(rng));
        return p;
    }
}

// --- Typed generation -------------------------------------------------------
// A fixed vocabulary library; randomTypedProgram only emits programs that are
// well-typed against it, and mutateProgram breaks exactly one thing.

inline Library libraryForVocabulary() {
    static const char* text = R"(
class @gen.Store {
  entity Item;
  loader @org.dlg.dataset(file="store.jsonl");
  query Item(out id : Entity(Item), out name : String, out geo : Location,
             out price : Currency, out rating : Number, out tags : Array(String),
             out weight : Measure(mass), out added : Date, out open : Time,
             out size : Enum(small, medium, large));
  query Owner(out id : Entity(Item), out rating : Number);
  action Buy(in item : Entity(Item), in qty : Number,
             in note : String #[required=false]);
}
)";
    return parseLibrary(text);
}

inline Value typedEntity(Rng& rng) {
    return Value::ofEntity("gen.Store:Item", "id" + std::to_string(rng.range(1, 99)));
}

inline FilterExpr randomTypedAtom(Rng& rng) {
    switch (rng.range(0, 9)) {
    case 0:
        return FilterExpr::atom("rating", (FilterOp)rng.range(0, 2),
                                Value::ofNumber(randomNiceNumber(rng)));
    case 1:
        return FilterExpr::atom("name", rng.chance(0.5) ? FilterOp::Eq : FilterOp::Substr,
                                Value::ofString(rng.chance(0.5) ? "adele" : "jazz club"));
    case 2:
        return FilterExpr::atom("price", (FilterOp)rng.range(0, 2),
                                Value::ofCurrency(std::abs(randomNiceNumber(rng)), "USD"));
    case 3:
        return FilterExpr::atom("tags", FilterOp::Contains, Value::ofString("vegan"));
    case 4:
        return FilterExpr::atom("weight", (FilterOp)rng.range(0, 2),
                                Value::ofMeasure(std::abs(randomNiceNumber(rng)),
                                                 rng.chance(0.5) ? "kg" : "g"));
    case 5: {
        DateValue d;
        d.year = rng.range(1990, 2030);
        d.month = rng.range(1, 12);
        d.day = rng.range(1, 28);
        return FilterExpr::atom("added", (FilterOp)rng.range(0, 2), Value::ofDate(d));
    }
    case 6: {
        static const std::vector<std::string> sizes = {"small", "medium", "large"};
        return FilterExpr::atom("size", FilterOp::Eq, Value::ofEnum(rng.pick(sizes)));
    }
    case 7: {
        std::vector<Value> elems;
        int n = rng.range(1, 3);
        for (int i = 0; i < n; i++)
            elems.push_back(Value::ofNumber(randomNiceNumber(rng)));
        return FilterExpr::atom("rating", FilterOp::InArray, Value::ofArray(std::move(elems)));
    }
    case 8: return FilterExpr::dontCare("name");
    default: {
        Query owner;
        owner.base = {"gen.Store", "Owner"};
        return FilterExpr::subquery("id", FilterOp::Eq, std::move(owner), "id");
    }
    }
}

inline FilterExpr randomTypedFilter(Rng& rng, int depth) {
    if (depth <= 0 || rng.chance(0.5))
        return rng.chance(0.1) ? FilterExpr::trueExpr() : randomTypedAtom(rng);
    std::vector<FilterExpr> children;
    int n = rng.range(2, 3);
    for (int i = 0; i < n; i++)
        children.push_back(randomTypedFilter(rng, depth - 1));
    switch (rng.range(0, 2)) {
    case 0: {
        auto f = FilterExpr::mkAnd(std::move(children));
        return f.kind == FilterKind::And ? f : randomTypedAtom(rng);
    }
    case 1: return FilterExpr::mkOr(std::move(children));
    default: return FilterExpr::mkNot(randomTypedFilter(rng, depth - 1));
    }
}

inline Query randomTypedQuery(Rng& rng, bool allowAggregate = true) {
    static const std::vector<std::string> sortable = {"rating", "price", "weight",
                                                      "added", "open"};
    static const std::vector<std::string> numeric = {"rating", "price", "weight"};
    static const std::vector<std::string> projectable = {"id", "name", "price",
                                                         "rating", "tags"};
    Query q;
    q.base = {"gen.Store", "Item"};
    q.filter = randomTypedFilter(rng, 2);
    if (rng.chance(0.3)) {
        SortSpec sort;
        if (rng.chance(0.3)) {
            ComputedField cf;
            cf.name = "distance";
            cf.expr.geoField = "geo";
            cf.expr.useHere = rng.chance(0.7);
            if (!cf.expr.useHere)
                cf.expr.location.push_back(Value::ofLocation(10.5, 20.5));
            q.computed.push_back(cf);
            sort.field = "distance";
        } else {
            sort.field = rng.pick(sortable);
        }
        sort.ascending = rng.chance(0.5);
        q.sort = sort;
    }
    if (rng.chance(0.3))
        q.slice = SliceSpec{rng.range(1, 5), rng.range(1, 5)};
    if (allowAggregate && rng.chance(0.2)) {
        AggSpec agg;
        agg.op = (AggOp)rng.range(0, 4);
        if (agg.op == AggOp::Min || agg.op == AggOp::Max)
            agg.field = rng.pick(sortable);
        else if (agg.op != AggOp::Count)
            agg.field = rng.pick(numeric);
        q.aggregate = agg;
    }
    if (rng.chance(0.2)) {
        std::set<std::string> fields;
        int n = rng.range(1, 3);
        for (int i = 0; i < n; i++)
            fields.insert(rng.pick(projectable));
        q.projection.assign(fields.begin(), fields.end());
    }
    return q;
}

inline Action randomTypedAction(Rng& rng, bool hasQuery) {
    Action a;
    a.target = {"gen.Store", "Buy"};
    if (hasQuery && rng.chance(0.6))
        a.args.emplace_back("item", ArgValue::varRef("id"));
    else if (rng.chance(0.8))
        a.args.emplace_back("item", ArgValue::constant(typedEntity(rng)));
    else
        a.args.emplace_back("item", ArgValue::missing());
    if (rng.chance(0.7)) {
        if (hasQuery && rng.chance(0.3))
            a.args.emplace_back("qty", ArgValue::varRef("rating"));
        else
            a.args.emplace_back("qty",
                                ArgValue::constant(Value::ofNumber(rng.range(1, 9))));
    }
    if (rng.chance(0.3))
        a.args.emplace_back("note", ArgValue::constant(Value::ofString("gift wrap")));
    return a;
}

inline Program randomTypedProgram(Rng& rng) {
    Program p;
    p.act = {"Transaction", "Execute"};
    int n = rng.range(1, 2);
    for (int i = 0; i < n; i++) {
        Statement s;
        switch (rng.range(0, 3)) {
        case 0: s.query = randomTypedQuery(rng); break;
        case 1: s.action = randomTypedAction(rng, false); break;
        case 2:
            s.query = randomTypedQuery(rng);
            s.action = randomTypedAction(rng, true);
            break;
        default:
            s.monitor = true;
            s.query = randomTypedQuery(rng, false);
            s.action = randomTypedAction(rng, true);
            break;
        }
        p.statements.push_back(std::move(s));
    }
    return p;
}

// Random tables matching libraryForVocabulary's @gen.Store signatures; fields
// are sometimes absent (null) except id.
inline std::map<std::string, std::vector<dlg::Record>> randomStoreTables(Rng& rng,
                                                                         int maxRows) {
    using dlg::Record;
    static const std::vector<std::string> names = {"adele", "jazz club", "corner shop",
                                                   "big mart", "tiny store"};
    static const std::vector<std::string> tags = {"vegan", "spicy", "cheap", "fancy"};
    static const std::vector<std::string> sizes = {"small", "medium", "large"};
    std::map<std::string, std::vector<Record>> tables;
    int itemRows = rng.range(0, maxRows);
    for (int i = 0; i < itemRows; i++) {
        Record r;
        r.set("id", Value::ofEntity("gen.Store:Item", "id" + std::to_string(i + 1)));
        auto maybe = [&](const char* field, Value v) {
            if (!rng.chance(0.15))
                r.set(field, std::move(v));
        };
        maybe("name", Value::ofString(rng.pick(names)));
        maybe("geo", Value::ofLocation(rng.range(-89, 89) + 0.5, rng.range(-179, 179) + 0.25));
        maybe("price", Value::ofCurrency(std::abs(randomNiceNumber(rng)), "USD"));
        maybe("rating", Value::ofNumber(randomNiceNumber(rng)));
        {
            std::vector<Value> elems;
            int n = rng.range(0, 2);
            for (int k = 0; k <= n; k++)
                elems.push_back(Value::ofString(rng.pick(tags)));
            maybe("tags", Value::ofArray(std::move(elems)));
        }
        maybe("weight", Value::ofMeasure(std::abs(randomNiceNumber(rng)),
                                         rng.chance(0.5) ? "kg" : "g"));
        {
            DateValue d;
            d.year = rng.range(1990, 2030);
            d.month = rng.range(1, 12);
            d.day = rng.range(1, 28);
            maybe("added", Value::ofDate(d));
        }
        maybe("open", Value::ofTime(rng.range(0, 23), rng.range(0, 59)));
        maybe("size", Value::ofEnum(rng.pick(sizes)));
        tables["Item"].push_back(std::move(r));
    }
    int ownerRows = rng.range(0, 4);
    for (int i = 0; i < ownerRows; i++) {
        Record r;
        // Overlap Owner ids with Item ids so subqueries sometimes match.
        r.set("id", Value::ofEntity("gen.Store:Item",
                                    "id" + std::to_string(rng.range(1, maxRows))));
        if (!rng.chance(0.2))
            r.set("rating", Value::ofNumber(randomNiceNumber(rng)));
        // Owner ids may repeat; drop duplicates to keep ids unique per query.
        bool dup = false;
        for (const auto& prev : tables["Owner"])
            if (*prev.get("id") == *r.get("id"))
                dup = true;
        if (!dup)
            tables["Owner"].push_back(std::move(r));
    }
    tables["Item"];
    tables["Owner"];
    return tables;
}

inline FilterExpr* firstAtom(FilterExpr& f) {
    if (f.kind == FilterKind::Atom)
        return &f;
    for (auto& c : f.children)
        if (FilterExpr* a = firstAtom(c))
            return a;
    return nullptr;
}

// Applies one type-breaking edit; the result stays grammatically valid.
inline Program mutateProgram(const Program& p, Rng& rng) {
    Program out = p;
    Statement& s = out.statements[(size_t)rng.range(0, (int)out.statements.size() - 1)];
    std::vector<std::function<void()>> edits;
    if (s.query) {
        Query& q = *s.query;
        edits.push_back([&q] { q.base.cls = "no.such.Class"; });
        edits.push_back([&q] { q.base.name = "NoSuchFunction"; });
        edits.push_back([&q] { q.projection.push_back("zzz_unknown"); });
        if (FilterExpr* atom = firstAtom(q.filter)) {
            edits.push_back([atom] { atom->field = "zzz_unknown"; });
            edits.push_back([atom] {
                atom->rhsIsVar = false;
                atom->rhsValue = Value::ofBool(true);
            });
        }
        if (q.sort)
            edits.push_back([&q] { q.sort->field = "tags"; });  // Array: unsortable
        if (q.aggregate && q.aggregate->op != AggOp::Count)
            edits.push_back([&q] { q.aggregate->field = "name"; });  // String: no sum/min
    }
    if (s.action) {
        Action& a = *s.action;
        edits.push_back([&a] { a.target.cls = "no.such.Class"; });
        edits.push_back([&a] { a.args.emplace_back("zzz_unknown",
                                                   ArgValue::constant(Value::ofNumber(1))); });
        for (auto& [name, arg] : a.args) {
            if (arg.kind == ArgKind::Var)
                edits.push_back([&arg] { arg.var = "zzz_unknown"; });
            else if (arg.kind == ArgKind::Constant)
                edits.push_back([&arg] { arg.value = Value::ofBool(true); });
        }
    }
    edits[(size_t)rng.range(0, (int)edits.size() - 1)]();
    return out;
}

} // namespace dlggen
