#include "dlg/synth.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "dlg/canonical.hpp"
#include "dlg/syntax.hpp"

namespace dlg {

namespace {

const std::set<std::string> kCategories = {"value-phrase", "filter-phrase", "query-phrase",
                                           "action-phrase", "statement", "dialogue-turn"};
const std::set<std::string> kHoleCategories = {"value",  "param",   "filter",   "query",
                                               "action", "vaction", "statement"};

struct Hole {
    std::string name;
    std::string cat;    // empty for program-side holes
    std::string token;  // the literal ${...} text
};

std::vector<Hole> holesOf(const std::string& text) {
    std::vector<Hole> holes;
    for (size_t i = 0; (i = text.find("${", i)) != std::string::npos;) {
        size_t close = text.find('}', i);
        if (close == std::string::npos)
            throw Error("BadTemplate", "unterminated hole in: " + text);
        std::string body = text.substr(i + 2, close - i - 2);
        Hole h;
        h.token = text.substr(i, close - i + 1);
        size_t colon = body.find(':');
        h.name = body.substr(0, colon == std::string::npos ? body.size() : colon);
        if (colon != std::string::npos)
            h.cat = body.substr(colon + 1);
        holes.push_back(std::move(h));
        i = close + 1;
    }
    return holes;
}

std::string trimCopy(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

std::string replaceAll(std::string text, const std::string& from, const std::string& to) {
    for (size_t pos = 0; (pos = text.find(from, pos)) != std::string::npos;
         pos += to.size())
        text.replace(pos, from.size(), to);
    return text;
}

// Shifts every ${k} slot reference by `offset`.
std::string renumberSlots(const std::string& text, size_t offset) {
    std::string out;
    for (size_t i = 0; i < text.size();) {
        if (text.compare(i, 2, "${") == 0) {
            size_t close = text.find('}', i);
            std::string body = text.substr(i + 2, close - i - 2);
            out += "${" + std::to_string(std::stoul(body) + offset) + "}";
            i = close + 1;
        } else {
            out += text[i++];
        }
    }
    return out;
}

std::string fillSlots(const std::string& text, const std::vector<std::string>& slotTexts) {
    std::string out;
    for (size_t i = 0; i < text.size();) {
        if (text.compare(i, 2, "${") == 0) {
            size_t close = text.find('}', i);
            out += slotTexts.at(std::stoul(text.substr(i + 2, close - i - 2)));
            i = close + 1;
        } else {
            out += text[i++];
        }
    }
    return out;
}

bool matchesGuard(const TypeExpr& t, const std::string& guard) {
    if (guard.empty() || guard == "*")
        return true;
    if (guard == "orderable")
        return t.kind == TypeKind::Number || t.kind == TypeKind::Measure ||
               t.kind == TypeKind::Currency || t.kind == TypeKind::Date ||
               t.kind == TypeKind::Time;
    if (guard == "numeric")
        return t.kind == TypeKind::Number || t.kind == TypeKind::Measure ||
               t.kind == TypeKind::Currency;
    if (guard.rfind("Measure(", 0) == 0)
        return t.kind == TypeKind::Measure &&
               guard == "Measure(" + t.unitClass + ")";
    if (guard == "Array(String)")
        return t.kind == TypeKind::Array && t.elementType().kind == TypeKind::String;
    if (guard == "Array(Entity)")
        return t.kind == TypeKind::Array && t.elementType().kind == TypeKind::Entity;
    if (guard == "Number") return t.kind == TypeKind::Number;
    if (guard == "String") return t.kind == TypeKind::String;
    if (guard == "Entity") return t.kind == TypeKind::Entity;
    if (guard == "Enum") return t.kind == TypeKind::Enum;
    if (guard == "Date") return t.kind == TypeKind::Date;
    if (guard == "Time") return t.kind == TypeKind::Time;
    if (guard == "Currency") return t.kind == TypeKind::Currency;
    if (guard == "Location") return t.kind == TypeKind::Location;
    return false;
}

TypeExpr typeFromGuard(const std::string& guard) {
    if (guard == "Number") return TypeExpr::number();
    if (guard == "String") return TypeExpr::string();
    if (guard == "Date") return TypeExpr::date();
    if (guard == "Time") return TypeExpr::time();
    if (guard == "Currency") return TypeExpr::currency();
    if (guard == "Location") return TypeExpr::location();
    if (guard.rfind("Measure(", 0) == 0)
        return TypeExpr::measure(guard.substr(8, guard.size() - 9));
    throw Error("BadTemplate", "value-phrase guard must name a concrete type: " + guard);
}

// Construct tags inferred from the program fragment a template produces.
std::set<std::string> tagConstructs(const std::string& program) {
    std::set<std::string> out;
    auto has = [&](const char* s) { return program.find(s) != std::string::npos; };
    if (has(" >= ")) out.insert("ge");
    if (has(" <= ")) out.insert("le");
    if (has(" == ")) out.insert("eq");
    if (has("contains(")) out.insert("contains");
    if (has("in_array(")) out.insert("in_array");
    if (has("substr(")) out.insert("substr");
    if (has("dontcare(")) out.insert("dontcare");
    if (has("any(")) out.insert("subquery");
    if (has("&&")) out.insert("and");
    if (has("||")) out.insert("or");
    if (has("!(")) out.insert("not");
    if (has(" asc ")) out.insert("sort_asc");
    if (has(" desc ")) out.insert("sort_desc");
    if (has("[1:")) out.insert("slice");
    if (has("aggregate(count")) out.insert("count");
    if (has("aggregate(min")) out.insert("min");
    if (has("aggregate(max")) out.insert("max");
    if (has("aggregate(sum")) out.insert("sum");
    if (has("aggregate(avg")) out.insert("avg");
    if (has("] of ")) out.insert("projection");
    if (has("distance(")) out.insert("distance");
    if (has("monitor(")) out.insert("monitor");
    else if (has("=>")) out.insert("query_then_action");
    return out;
}

struct ValueCand {
    TypeExpr type;
    std::string utter;
    std::string prog;
    bool slot = true;  // false: literal phrase (e.g. "today" -> $now)
};

// A partially assembled fragment: utterance/program text with ${k} slots.
struct Deriv {
    std::string utter;
    std::string prog;
    std::vector<SlotSpec> slots;
    std::vector<std::string> slotUtter;
    std::vector<std::string> slotProg;
    std::set<std::string> constructs;
    std::string templateId;
    int depth = 1;
    std::string cls, fn;     // owning query for filters/queries
    std::string entityType;  // vaction: type of the id-bound parameter
    bool hasFilter = false, hasSort = false, hasSlice = false, hasAgg = false,
         hasProj = false;

    std::string utterance() const { return fillSlots(utter, slotUtter); }
    std::string program() const { return fillSlots(prog, slotProg); }
};

// Appends the child's slots to the target and returns the child's texts with
// renumbered references.
std::pair<std::string, std::string> absorb(Deriv& target, const Deriv& child) {
    size_t offset = target.slots.size();
    target.slots.insert(target.slots.end(), child.slots.begin(), child.slots.end());
    target.slotUtter.insert(target.slotUtter.end(), child.slotUtter.begin(),
                            child.slotUtter.end());
    target.slotProg.insert(target.slotProg.end(), child.slotProg.begin(),
                           child.slotProg.end());
    target.constructs.insert(child.constructs.begin(), child.constructs.end());
    return {renumberSlots(child.utter, offset), renumberSlots(child.prog, offset)};
}

std::string addSlot(Deriv& d, const std::string& name, const ValueCand& v) {
    if (!v.slot)
        return "";  // literal phrases inline directly
    d.slots.push_back({name, v.type});
    d.slotUtter.push_back(v.utter);
    d.slotProg.push_back(v.prog);
    return "${" + std::to_string(d.slots.size() - 1) + "}";
}

std::string phraseOf(const FunctionSig& sig) {
    if (!sig.canonical.empty())
        return sig.canonical;
    std::string out;
    for (char c : sig.name)
        out += (char)std::tolower((unsigned char)c);
    return out;
}

std::string phraseOf(const Param& p) { return p.canonical.empty() ? p.name : p.canonical; }

std::string typeKey(const TypeExpr& t) { return printType(t); }

std::string renderValueUtter(const Value& v, const UnitTable& units) {
    switch (v.kind) {
    case TypeKind::String: return v.text;
    case TypeKind::Entity: return v.display.empty() ? v.text : v.display;
    case TypeKind::Enum: return v.text;
    case TypeKind::Time: return std::to_string(v.hour) + ":" +
                                (v.minute < 10 ? "0" : "") + std::to_string(v.minute);
    default: return printValue(v, units);
    }
}

constexpr size_t kMaxValuesPerType = 6;
constexpr size_t kMaxAtomFilters = 60;    // per query function
constexpr size_t kMaxAtomsPerTemplate = 4;  // per atom template per function
constexpr size_t kMaxFilters = 80;        // per query function, all depths
constexpr size_t kMaxAttachPerBase = 30;       // filters attached per base query
constexpr size_t kMaxDecorationsPerQuery = 4;  // per (template, source query)
constexpr size_t kMaxDecorationsPerFn = 12;    // per (template, query function)
constexpr size_t kMaxVactionPairsPerFn = 20;   // per (template, query function)
constexpr size_t kMaxActionCombos = 8;
constexpr size_t kCombinerBasis = 10;     // atoms considered by &&/||/!
constexpr size_t kMaxCombosPerTemplate = 12;  // per combinator per function

struct Engine {
    SkillSet& skills;
    const std::vector<Template>& templates;
    SynthOptions opts;
    const UnitTable& units = UnitTable::builtin();

    std::map<std::string, std::vector<ValueCand>> values{};  // by typeKey
    std::map<std::string, std::vector<const Param*>> params{};  // by cls.fn
    std::map<std::string, std::vector<Deriv>> filters{};        // by cls.fn
    std::vector<Deriv> queries{};
    std::vector<Deriv> actions{};
    std::vector<Deriv> vactions{};
    std::vector<Deriv> statements{};
    std::vector<Deriv> turns{};

    bool probe(const std::string& programText) {
        try {
            return typecheckProgram(parseProgram(programText, units), skills.registry(),
                                    units)
                .ok();
        } catch (const Error&) {
            return false;
        }
    }

    void addValue(const TypeExpr& type, ValueCand cand) {
        auto& pool = values[typeKey(type)];
        for (const auto& existing : pool)
            if (existing.prog == cand.prog)
                return;
        if (pool.size() < kMaxValuesPerType)
            pool.push_back(std::move(cand));
    }

    void harvestValues() {
        for (const auto& [cls, rc] : skills.registry().classes()) {
            if (!skills.backend(cls))
                continue;
            for (const auto& sig : rc.functions) {
                if (sig.kind != FunctionKind::Query)
                    continue;
                std::vector<Record> rows;
                try {
                    rows = skills.rows({cls, sig.name});
                } catch (const Error&) {
                    continue;
                }
                for (const Record& row : rows)
                    for (const Param& p : sig.params) {
                        const Value* v = row.get(p.name);
                        if (!v)
                            continue;
                        if (p.type.kind == TypeKind::Array) {
                            for (const Value& e : v->elems)
                                addValue(p.type.elementType(),
                                         {p.type.elementType(), renderValueUtter(e, units),
                                          printValue(e, units), true});
                        } else if (p.type.kind != TypeKind::Location &&
                                   p.type.kind != TypeKind::Boolean) {
                            addValue(p.type, {p.type, renderValueUtter(*v, units),
                                              printValue(*v, units), true});
                        }
                    }
            }
        }
        // Small integers keep slices and party sizes well-formed.
        addValue(TypeExpr::number(), {TypeExpr::number(), "2", "2", true});
        addValue(TypeExpr::number(), {TypeExpr::number(), "3", "3", true});
        for (const Template& t : templates)
            if (t.category == "value-phrase")
                addValue(typeFromGuard(t.guard),
                         {typeFromGuard(t.guard), t.pattern, t.program, false});
    }

    std::vector<ValueCand> candidatesFor(const TypeExpr& t) {
        std::vector<ValueCand> out;
        auto it = values.find(typeKey(t));
        if (it != values.end())
            out = it->second;
        if (t.kind == TypeKind::Array) {
            auto et = values.find(typeKey(t.elementType()));
            if (et != values.end())
                out.insert(out.end(), et->second.begin(), et->second.end());
        }
        return out;
    }

    void buildParamPool() {
        for (const auto& [cls, rc] : skills.registry().classes()) {
            if (!rc.executable())
                continue;
            for (const auto& sig : rc.functions) {
                if (sig.kind != FunctionKind::Query)
                    continue;
                auto& pool = params[cls + "." + sig.name];
                for (const Param& p : sig.params)
                    if (p.dir == ParamDir::Out)
                        pool.push_back(&p);
            }
        }
    }

    void buildBaseQueries() {
        for (const auto& [cls, rc] : skills.registry().classes()) {
            if (!rc.executable())
                continue;
            for (const auto& sig : rc.functions) {
                if (sig.kind != FunctionKind::Query)
                    continue;
                Deriv d;
                d.utter = phraseOf(sig);
                d.prog = FunctionRef{cls, sig.name}.str() + "()";
                d.cls = cls;
                d.fn = sig.name;
                d.constructs = {"query"};
                d.templateId = "builtin.query";
                queries.push_back(std::move(d));
            }
        }
    }

    bool plain(const Deriv& q) const {
        return !q.hasSort && !q.hasSlice && !q.hasAgg && !q.hasProj;
    }

    // Atom templates: value/param holes only.
    void buildAtomFilters() {
        for (const auto& [key, paramPool] : params) {
            std::string cls = key.substr(0, key.find('.'));
            std::string fn = key.substr(key.find('.') + 1);
            auto& pool = filters[key];
            for (const Template& t : templates) {
                if (t.category != "filter-phrase")
                    continue;
                std::vector<Hole> holes = holesOf(t.pattern);
                bool simple = true;
                std::vector<std::string> valueHoles;
                for (const Hole& h : holes) {
                    if (h.cat == "value")
                        valueHoles.push_back(h.name);
                    else if (h.cat != "param")
                        simple = false;
                }
                if (!simple)
                    continue;
                size_t emitted = 0;
                for (const Param* p : paramPool) {
                    if (!matchesGuard(p->type, t.guard) || pool.size() >= kMaxAtomFilters)
                        continue;
                    std::vector<ValueCand> cands = candidatesFor(p->type);
                    auto build = [&](const std::vector<const ValueCand*>& chosen) {
                        if (pool.size() >= kMaxAtomFilters ||
                            emitted >= kMaxAtomsPerTemplate)
                            return;
                        Deriv d;
                        d.cls = cls;
                        d.fn = fn;
                        d.templateId = t.id;
                        d.constructs = tagConstructs(t.program);
                        std::string utter = t.pattern, prog = t.program;
                        utter = replaceAll(utter, "${p:param}", phraseOf(*p));
                        prog = replaceAll(prog, "${p}", p->name);
                        for (size_t i = 0; i < valueHoles.size(); i++) {
                            std::string ref = addSlot(d, p->name, *chosen[i]);
                            std::string u = ref.empty() ? chosen[i]->utter : ref;
                            std::string g = ref.empty() ? chosen[i]->prog : ref;
                            utter = replaceAll(utter, "${" + valueHoles[i] + ":value}", u);
                            prog = replaceAll(prog, "${" + valueHoles[i] + "}", g);
                        }
                        d.utter = utter;
                        d.prog = prog;
                        if (probe("@Transaction.Execute; @" + cls + "." + fn + "(), " +
                                  d.program() + ";")) {
                            pool.push_back(std::move(d));
                            emitted++;
                        }
                    };
                    if (valueHoles.empty()) {
                        build({});
                    } else if (valueHoles.size() == 1) {
                        for (const ValueCand& v : cands)
                            build({&v});
                    } else if (valueHoles.size() == 2) {
                        for (size_t i = 0; i < cands.size(); i++)
                            for (size_t j = i + 1; j < cands.size(); j++)
                                build({&cands[i], &cands[j]});
                    }
                }
            }
        }
    }

    void buildSubqueryFilters() {
        for (const auto& [key, paramPool] : params) {
            std::string cls = key.substr(0, key.find('.'));
            std::string fn = key.substr(key.find('.') + 1);
            auto& pool = filters[key];
            for (const Template& t : templates) {
                if (t.category != "filter-phrase" ||
                    t.program.find("any(") == std::string::npos)
                    continue;
                for (const Param* p : paramPool) {
                    if (!matchesGuard(p->type, t.guard))
                        continue;
                    for (const Deriv& inner : queries) {
                        if (!plain(inner) || inner.hasFilter ||
                            (inner.cls == cls && inner.fn == fn))
                            continue;
                        const Param* innerField = nullptr;
                        auto innerPool = params.find(inner.cls + "." + inner.fn);
                        if (innerPool == params.end())
                            continue;
                        for (const Param* ip : innerPool->second)
                            if (ip->type == p->type && (!innerField || ip->name == "id"))
                                innerField = ip;
                        if (!innerField || pool.size() >= kMaxFilters)
                            continue;
                        Deriv d;
                        d.cls = cls;
                        d.fn = fn;
                        d.templateId = t.id;
                        d.constructs = tagConstructs(t.program);
                        auto [iu, ip] = absorb(d, inner);
                        std::string utter = t.pattern, prog = t.program;
                        utter = replaceAll(utter, "${p:param}", phraseOf(*p));
                        utter = replaceAll(utter, "${q:query}", iu);
                        prog = replaceAll(prog, "${p}", p->name);
                        prog = replaceAll(prog, "${if}", innerField->name);
                        prog = replaceAll(prog, "${q}", ip);
                        d.utter = utter;
                        d.prog = prog;
                        if (probe("@Transaction.Execute; @" + cls + "." + fn + "(), " +
                                  d.program() + ";"))
                            pool.push_back(std::move(d));
                    }
                }
            }
        }
    }

    void combineFilters() {
        for (auto& [key, pool] : filters) {
            size_t atomCount = std::min(pool.size(), kCombinerBasis);
            for (const Template& t : templates) {
                if (t.category != "filter-phrase")
                    continue;
                std::vector<Hole> holes = holesOf(t.pattern);
                std::vector<std::string> filterHoles;
                for (const Hole& h : holes)
                    if (h.cat == "filter")
                        filterHoles.push_back(h.name);
                if (filterHoles.empty())
                    continue;
                size_t emitted = 0;
                auto emit = [&](const Deriv* a, const Deriv* b) {
                    int depth = a->depth + (b ? b->depth : 0);
                    if (depth > opts.depth || pool.size() >= kMaxFilters ||
                        emitted >= kMaxCombosPerTemplate)
                        return;
                    emitted++;
                    Deriv d;
                    d.cls = a->cls;
                    d.fn = a->fn;
                    d.depth = depth;
                    d.templateId = t.id;
                    d.constructs = tagConstructs(t.program);
                    std::string utter = t.pattern, prog = t.program;
                    auto [au, ap] = absorb(d, *a);
                    utter = replaceAll(utter, "${" + filterHoles[0] + ":filter}", au);
                    prog = replaceAll(prog, "${" + filterHoles[0] + "}", ap);
                    if (b) {
                        auto [bu, bp] = absorb(d, *b);
                        utter = replaceAll(utter, "${" + filterHoles[1] + ":filter}", bu);
                        prog = replaceAll(prog, "${" + filterHoles[1] + "}", bp);
                    }
                    d.utter = utter;
                    d.prog = prog;
                    pool.push_back(std::move(d));
                };
                if (filterHoles.size() == 1) {
                    for (size_t i = 0; i < atomCount; i++)
                        if (pool[i].depth == 1)
                            emit(&pool[i], nullptr);
                } else if (filterHoles.size() == 2) {
                    for (size_t i = 0; i < atomCount; i++)
                        for (size_t j = i + 1; j < atomCount; j++)
                            emit(&pool[i], &pool[j]);
                }
            }
        }
    }

    void attachFilters() {
        for (const Template& t : templates) {
            if (t.category != "query-phrase" ||
                t.program.find(", ${f}") == std::string::npos)
                continue;
            size_t baseCount = queries.size();
            for (size_t qi = 0; qi < baseCount; qi++) {
                Deriv q = queries[qi];  // copy: queries grows below
                if (!plain(q) || q.hasFilter)
                    continue;
                // Stride across the pool so combined filters near the end
                // still get attached under the cap.
                const std::vector<Deriv>& pool = filters[q.cls + "." + q.fn];
                size_t step = std::max<size_t>(1, (pool.size() + kMaxAttachPerBase - 1) /
                                                      kMaxAttachPerBase);
                for (size_t fi = 0; fi < pool.size(); fi += step) {
                    const Deriv& f = pool[fi];
                    Deriv d;
                    d.cls = q.cls;
                    d.fn = q.fn;
                    d.hasFilter = true;
                    d.depth = f.depth;
                    d.templateId = t.id;
                    auto [qu, qp] = absorb(d, q);
                    auto [fu, fp] = absorb(d, f);
                    d.utter = replaceAll(replaceAll(t.pattern, "${q:query}", qu),
                                         "${f:filter}", fu);
                    d.prog =
                        replaceAll(replaceAll(t.program, "${q}", qp), "${f}", fp);
                    queries.push_back(std::move(d));
                }
            }
        }
    }

    // Sort/slice/aggregate/projection wrappers; one pass applies each
    // template to every eligible query currently in the pool.
    void decorateQueries() {
        size_t snapshot = queries.size();
        for (const Template& t : templates) {
            if (t.category != "query-phrase" ||
                t.program.find(", ${f}") != std::string::npos)
                continue;
            bool isSort = t.program.find("sort(") != std::string::npos;
            bool isSlice = t.program.find("[1:") != std::string::npos;
            bool isAgg = t.program.find("aggregate(") != std::string::npos;
            bool isProj = !isAgg && t.program.find("] of ") != std::string::npos;
            bool wantsParam = t.program.find("${p}") != std::string::npos;
            bool wantsValue = t.pattern.find(":value}") != std::string::npos;
            std::map<std::string, size_t> perFn;
            for (size_t qi = 0; qi < snapshot; qi++) {
                Deriv q = queries[qi];
                if (isSort && !plain(q))
                    continue;
                if (isSlice && (q.hasSlice || q.hasAgg || q.hasProj))
                    continue;
                if ((isAgg || isProj) && (q.hasAgg || q.hasProj))
                    continue;
                size_t& fnCount = perFn[q.cls + "." + q.fn];
                if (fnCount >= kMaxDecorationsPerFn)
                    continue;
                std::vector<const Param*> fieldChoices = {nullptr};
                if (wantsParam) {
                    fieldChoices.clear();
                    for (const Param* p : params[q.cls + "." + q.fn])
                        if (matchesGuard(p->type, t.guard) && p->name != "id")
                            fieldChoices.push_back(p);
                }
                size_t added = 0;
                for (const Param* p : fieldChoices) {
                    std::vector<const ValueCand*> valueChoices = {nullptr};
                    if (wantsValue) {
                        valueChoices.clear();
                        for (const ValueCand& v : values[typeKey(TypeExpr::number())])
                            if (v.prog.find('.') == std::string::npos && v.slot)
                                valueChoices.push_back(&v);
                    }
                    for (const ValueCand* v : valueChoices) {
                        if (added >= kMaxDecorationsPerQuery ||
                            fnCount >= kMaxDecorationsPerFn)
                            break;
                        Deriv d;
                        d.cls = q.cls;
                        d.fn = q.fn;
                        d.hasFilter = q.hasFilter;
                        d.hasSort = q.hasSort || isSort;
                        d.hasSlice = q.hasSlice || isSlice;
                        d.hasAgg = q.hasAgg || isAgg;
                        d.hasProj = q.hasProj || isProj;
                        d.depth = q.depth;
                        d.templateId = t.id;
                        d.constructs = tagConstructs(t.program);
                        auto [qu, qp] = absorb(d, q);
                        std::string utter = replaceAll(t.pattern, "${q:query}", qu);
                        std::string prog = replaceAll(t.program, "${q}", qp);
                        if (p) {
                            utter = replaceAll(utter, "${p:param}", phraseOf(*p));
                            prog = replaceAll(prog, "${p}", p->name);
                        }
                        if (v) {
                            std::string ref = addSlot(d, "n", *v);
                            utter = replaceAll(utter, "${n:value}",
                                               ref.empty() ? v->utter : ref);
                            prog = replaceAll(prog, "${n}", ref.empty() ? v->prog : ref);
                        }
                        d.utter = utter;
                        d.prog = prog;
                        if (probe("@Transaction.Execute; " + d.program() + ";")) {
                            queries.push_back(std::move(d));
                            added++;
                            fnCount++;
                        }
                    }
                }
            }
        }
    }

    void buildActions() {
        for (const auto& [cls, rc] : skills.registry().classes()) {
            if (!rc.executable())
                continue;
            for (const auto& sig : rc.functions) {
                if (sig.kind != FunctionKind::Action)
                    continue;
                std::vector<const Param*> required;
                for (const Param& p : sig.params)
                    if (p.dir == ParamDir::In && p.required)
                        required.push_back(&p);

                // Plain actions: every required param bound to a value.
                std::vector<std::vector<ValueCand>> options;
                bool fillable = true;
                for (const Param* p : required) {
                    std::vector<ValueCand> cands = candidatesFor(p->type);
                    if (cands.size() > 3)
                        cands.resize(3);
                    if (cands.empty())
                        fillable = false;
                    options.push_back(std::move(cands));
                }
                if (fillable) {
                    size_t combos = 1;
                    for (const auto& o : options)
                        combos *= o.size();
                    combos = std::min(combos, kMaxActionCombos);
                    for (size_t c = 0; c < combos; c++) {
                        Deriv d;
                        d.cls = cls;
                        d.templateId = "builtin.action";
                        d.constructs = {"action"};
                        std::string utter = phraseOf(sig);
                        std::string prog = FunctionRef{cls, sig.name}.str() + "(";
                        size_t rem = c;
                        for (size_t i = 0; i < required.size(); i++) {
                            const ValueCand& v = options[i][rem % options[i].size()];
                            rem /= options[i].size();
                            std::string ref = addSlot(d, required[i]->name, v);
                            utter += (i ? " with " + phraseOf(*required[i]) + " " : " ") +
                                     (ref.empty() ? v.utter : ref);
                            prog += (i ? ", " : "") + required[i]->name + "=" +
                                    (ref.empty() ? v.prog : ref);
                        }
                        d.utter = utter;
                        d.prog = prog + ")";
                        actions.push_back(std::move(d));
                    }
                }

                // Var-bound variants: the first required entity param reads
                // the query's id output; the rest still take values.
                const Param* entityParam = nullptr;
                for (const Param* p : required)
                    if (p->type.kind == TypeKind::Entity && !entityParam)
                        entityParam = p;
                if (!entityParam)
                    continue;
                Deriv d;
                d.cls = cls;
                d.entityType = entityParam->type.entityType;
                d.templateId = "builtin.vaction";
                d.constructs = {"action"};
                std::string utter = phraseOf(sig);
                std::string prog = FunctionRef{cls, sig.name}.str() + "(";
                bool ok = true, first = true;
                for (const Param* p : required) {
                    std::string piece;
                    if (p == entityParam) {
                        piece = p->name + "=id";
                    } else {
                        std::vector<ValueCand> cands = candidatesFor(p->type);
                        if (cands.empty()) {
                            ok = false;
                            break;
                        }
                        std::string ref = addSlot(d, p->name, cands[0]);
                        utter += " with " + phraseOf(*p) + " " +
                                 (ref.empty() ? cands[0].utter : ref);
                        piece = p->name + "=" + (ref.empty() ? cands[0].prog : ref);
                    }
                    prog += (first ? "" : ", ") + piece;
                    first = false;
                }
                if (!ok)
                    continue;
                d.utter = utter;
                d.prog = prog + ")";
                vactions.push_back(std::move(d));
            }
        }
    }

    const TypeExpr* idTypeOf(const std::string& cls, const std::string& fn) {
        for (const Param* p : params[cls + "." + fn])
            if (p->name == "id")
                return &p->type;
        return nullptr;
    }

    void buildStatements() {
        for (const Template& t : templates) {
            if (t.category != "statement")
                continue;
            std::vector<Hole> holes = holesOf(t.pattern);
            std::string qHole, aHole, aCat;
            for (const Hole& h : holes) {
                if (h.cat == "query")
                    qHole = h.name;
                else if (h.cat == "action" || h.cat == "vaction") {
                    aHole = h.name;
                    aCat = h.cat;
                }
            }
            auto emit = [&](const Deriv* q, const Deriv* a) {
                Deriv d;
                // Composite id: truncation round-robins over shapes, not just
                // over the handful of statement wrappers.
                d.templateId = t.id + (q ? ":" + q->templateId : "") +
                               (a ? ":" + a->templateId : "");
                d.constructs = tagConstructs(t.program);
                d.depth = q ? q->depth : 1;
                std::string utter = t.pattern, prog = t.program;
                if (q) {
                    auto [qu, qp] = absorb(d, *q);
                    utter = replaceAll(utter, "${" + qHole + ":query}", qu);
                    prog = replaceAll(prog, "${" + qHole + "}", qp);
                }
                if (a) {
                    auto [au, ap] = absorb(d, *a);
                    utter = replaceAll(utter, "${" + aHole + ":" + aCat + "}", au);
                    prog = replaceAll(prog, "${" + aHole + "}", ap);
                }
                d.utter = utter;
                d.prog = prog;
                statements.push_back(std::move(d));
            };
            bool isMonitor = t.program.find("monitor(") != std::string::npos;
            if (!qHole.empty() && aHole.empty()) {
                // The first wrapper covers every query; alternative phrasings
                // sample a strided subset to keep the corpus bounded.
                size_t ordinal = kQueryStmtSeen++;
                size_t stride = ordinal == 0 ? 1 : 5;
                for (size_t i = 0; i < queries.size(); i++)
                    if (i % stride == ordinal % stride)
                        emit(&queries[i], nullptr);
            } else if (qHole.empty() && aCat == "action") {
                for (const Deriv& a : actions)
                    emit(nullptr, &a);
            } else if (!qHole.empty() && aCat == "vaction") {
                std::map<std::string, size_t> perFn;
                for (const Deriv& q : queries) {
                    if (q.hasAgg || (isMonitor && (q.hasSlice || q.hasProj)))
                        continue;
                    const TypeExpr* idType = idTypeOf(q.cls, q.fn);
                    if (!idType || idType->kind != TypeKind::Entity)
                        continue;
                    size_t& fnCount = perFn[q.cls + "." + q.fn];
                    if (fnCount >= kMaxVactionPairsPerFn)
                        continue;
                    for (const Deriv& a : vactions)
                        if (a.entityType == idType->entityType) {
                            emit(&q, &a);
                            fnCount++;
                        }
                }
            }
        }
    }
    size_t kQueryStmtSeen = 0;

    void buildTurns() {
        size_t ordinal = 0;
        for (const Template& t : templates) {
            if (t.category != "dialogue-turn")
                continue;
            size_t stride = ordinal == 0 ? 1 : 7;
            size_t offset = ordinal++;
            for (size_t si = 0; si < statements.size(); si++) {
                if (si % stride != offset % stride)
                    continue;
                const Deriv& s = statements[si];
                Deriv d;
                d.templateId = s.templateId;  // round-robin over statement shapes
                d.depth = s.depth;
                auto [su, sp] = absorb(d, s);
                d.utter = replaceAll(t.pattern, "${s:statement}", su);
                d.prog = replaceAll(t.program, "${s}", sp);
                turns.push_back(std::move(d));
            }
        }
    }

    std::vector<SynthPair> finalize() {
        std::vector<SynthPair> out;
        std::set<std::pair<std::string, std::string>> seen;
        for (const Deriv& d : turns) {
            std::string programText = d.program();
            TypedProgram typed;
            try {
                TypeCheckResult r =
                    typecheckProgram(parseProgram(programText, units), skills.registry(),
                                     units);
                if (!r.ok())
                    continue;
                typed = std::move(r.typed);
            } catch (const Error&) {
                continue;
            }
            SynthPair pair;
            pair.context = "act: none";
            pair.utterance = d.utterance();
            pair.program = canonicalize(typed, units).bytes;
            pair.utterPattern = d.utter;
            pair.progPattern = d.prog;
            pair.slots = d.slots;
            pair.depth = d.depth;
            pair.templateId = d.templateId;
            pair.constructs = d.constructs;
            if (seen.insert({pair.utterance, pair.program}).second)
                out.push_back(std::move(pair));
        }
        return out;
    }
};

std::vector<SynthPair> truncateRoundRobin(std::vector<SynthPair> pairs, size_t limit) {
    if (limit == 0 || pairs.size() <= limit)
        return pairs;
    std::map<std::string, std::vector<SynthPair>> groups;
    for (auto& p : pairs)
        groups[p.templateId].push_back(std::move(p));
    std::vector<SynthPair> out;
    for (size_t round = 0; out.size() < limit; round++) {
        bool any = false;
        for (auto& [id, group] : groups) {
            if (round < group.size() && out.size() < limit) {
                out.push_back(std::move(group[round]));
                any = true;
            }
        }
        if (!any)
            break;
    }
    return out;
}

} // namespace

std::vector<Template> parseTemplates(const std::string& text) {
    std::vector<Template> out;
    std::set<std::string> ids;
    std::istringstream in(text);
    Template current;
    bool open = false;
    auto flush = [&]() {
        if (!open)
            return;
        if (current.category.empty() || !kCategories.count(current.category))
            throw Error("BadTemplate", current.id + ": bad category " + current.category);
        if (current.pattern.empty() || current.program.empty())
            throw Error("BadTemplate", current.id + ": pattern and program required");
        std::set<std::string> patternHoles;
        for (const Hole& h : holesOf(current.pattern)) {
            if (!kHoleCategories.count(h.cat))
                throw Error("UnknownHoleCategory", current.id + ": " + h.token);
            if (!patternHoles.insert(h.name).second)
                throw Error("BadTemplate", current.id + ": duplicate hole " + h.name);
        }
        for (const Hole& h : holesOf(current.program))
            if (!patternHoles.count(h.name) && h.name != "p" && h.name != "if")
                throw Error("BadTemplate",
                            current.id + ": program hole " + h.token + " not in pattern");
        if (!ids.insert(current.id).second)
            throw Error("DuplicateTemplateId", current.id);
        out.push_back(current);
        current = {};
        open = false;
    };
    for (std::string line; std::getline(in, line);) {
        line = trimCopy(line);
        if (line.empty() || line[0] == '#')
            continue;
        if (line.rfind("template ", 0) == 0) {
            flush();
            current.id = trimCopy(line.substr(9));
            open = true;
            continue;
        }
        if (!open)
            throw Error("BadTemplate", "line outside a template stanza: " + line);
        size_t colon = line.find(':');
        if (colon == std::string::npos)
            throw Error("BadTemplate", current.id + ": malformed line: " + line);
        std::string key = trimCopy(line.substr(0, colon));
        std::string value = trimCopy(line.substr(colon + 1));
        if (key == "category") current.category = value;
        else if (key == "guard") current.guard = value;
        else if (key == "pattern") current.pattern = value;
        else if (key == "program") current.program = value;
        else throw Error("BadTemplate", current.id + ": unknown key " + key);
    }
    flush();
    return out;
}

std::vector<Template> loadTemplates(const std::string& path) {
    std::vector<std::string> files;
    if (std::filesystem::is_directory(path)) {
        for (const auto& entry : std::filesystem::directory_iterator(path))
            if (entry.path().extension() == ".tmpl")
                files.push_back(entry.path().string());
        std::sort(files.begin(), files.end());
    } else {
        files.push_back(path);
    }
    if (files.empty())
        throw Error("IoError", "no .tmpl files in " + path);
    std::string text;
    for (const auto& f : files) {
        std::ifstream in(f);
        if (!in)
            throw Error("IoError", "cannot open template file: " + f);
        std::ostringstream buf;
        buf << in.rdbuf();
        text += buf.str() + "\n";
    }
    return parseTemplates(text);
}

std::vector<SynthPair> expand(SkillSet& skills, const std::vector<Template>& templates,
                              const SynthOptions& opts) {
    if (opts.depth < 1)
        throw Error("BadOptions", "depth must be >= 1");
    Engine engine{skills, templates, opts};
    engine.harvestValues();
    engine.buildParamPool();
    engine.buildBaseQueries();
    engine.buildAtomFilters();
    engine.buildSubqueryFilters();
    if (opts.depth > 1)
        engine.combineFilters();
    engine.attachFilters();
    for (int pass = 0; pass < opts.depth; pass++)
        engine.decorateQueries();
    engine.buildActions();
    engine.buildStatements();
    engine.buildTurns();
    return truncateRoundRobin(engine.finalize(), opts.limit);
}

const std::vector<std::string>& allConstructs() {
    static const std::vector<std::string> list = {
        "query",    "action",   "eq",    "ge",    "le",         "contains",
        "in_array", "substr",   "dontcare", "and", "or",        "not",
        "subquery", "sort_asc", "sort_desc", "slice", "count",  "min",
        "max",      "sum",      "avg",   "projection", "distance", "monitor",
        "query_then_action"};
    return list;
}

std::set<std::string> coverage(const std::vector<SynthPair>& pairs) {
    std::set<std::string> out;
    for (const auto& p : pairs)
        out.insert(p.constructs.begin(), p.constructs.end());
    return out;
}

namespace {

void collectConstants(const Value& v, std::vector<std::string>& out,
                      const UnitTable& units) {
    if (v.kind == TypeKind::String)
        out.push_back(v.text);
    else if (v.kind == TypeKind::Number)
        out.push_back(printValue(v, units));
    else if (v.kind == TypeKind::Array)
        for (const Value& e : v.elems)
            collectConstants(e, out, units);
}

void collectConstants(const FilterExpr& f, std::vector<std::string>& out,
                      const UnitTable& units) {
    if (f.kind == FilterKind::Atom && !f.rhsIsVar)
        collectConstants(f.rhsValue, out, units);
    if (f.kind == FilterKind::Subquery)
        collectConstants(f.inner[0].filter, out, units);
    for (const FilterExpr& c : f.children)
        collectConstants(c, out, units);
}

std::vector<std::string> programConstants(const Program& p, const UnitTable& units) {
    std::vector<std::string> out;
    for (const Statement& s : p.statements) {
        if (s.query)
            collectConstants(s.query->filter, out, units);
        if (s.action)
            for (const auto& [name, arg] : s.action->args)
                if (arg.kind == ArgKind::Constant)
                    collectConstants(arg.value, out, units);
    }
    return out;
}

} // namespace

std::vector<LintViolation> lintPair(const SynthPair& pair, const Registry& registry) {
    const UnitTable& units = UnitTable::builtin();
    std::vector<LintViolation> out;
    Program program;
    try {
        program = parseProgram(pair.program, units);
        TypeCheckResult r = typecheckProgram(program, registry, units);
        if (!r.ok()) {
            out.push_back({LintKind::TypeError, r.errors[0].code + ": " +
                           r.errors[0].message});
            return out;
        }
        if (canonicalize(r.typed, units).bytes != pair.program)
            out.push_back({LintKind::NonCanonicalProgram, pair.program});
    } catch (const Error& e) {
        out.push_back({LintKind::TypeError, e.what()});
        return out;
    }
    std::string haystack =
        " " + normalizeUtterance(pair.utterance + " " + pair.context) + " ";
    for (const std::string& constant : programConstants(program, units)) {
        std::string needle = normalizeUtterance(constant);
        if (needle.empty())
            continue;
        if (haystack.find(" " + needle + " ") == std::string::npos)
            out.push_back({LintKind::ConstantNotInUtteranceOrContext, constant});
    }
    return out;
}

ParserIndex buildParserIndex(const std::vector<SynthPair>& pairs) {
    ParserIndex index;
    for (const SynthPair& p : pairs) {
        if (p.utterPattern.empty())
            continue;
        IndexEntry entry;
        entry.pattern = normalizeUtterance(p.utterPattern);
        entry.slots = p.slots;
        entry.program = p.progPattern;
        entry.depth = p.depth;
        index.add(std::move(entry));
    }
    return index;
}

void writeTsv(std::ostream& out, const std::vector<SynthPair>& pairs) {
    for (size_t i = 0; i < pairs.size(); i++)
        out << "p" << i << "\t" << pairs[i].context << "\t" << pairs[i].utterance << "\t"
            << pairs[i].program << "\n";
}

std::vector<SynthPair> readTsv(std::istream& in) {
    std::vector<SynthPair> out;
    std::string line;
    for (int n = 1; std::getline(in, line); n++) {
        if (line.empty())
            continue;
        std::vector<std::string> fields;
        size_t start = 0;
        for (size_t tab; (tab = line.find('\t', start)) != std::string::npos;
             start = tab + 1)
            fields.push_back(line.substr(start, tab - start));
        fields.push_back(line.substr(start));
        if (fields.size() != 4)
            throw Error("MalformedTsv", "line " + std::to_string(n) + ": expected 4 "
                        "tab-separated fields, got " + std::to_string(fields.size()));
        SynthPair pair;
        pair.templateId = fields[0];
        pair.context = fields[1];
        pair.utterance = fields[2];
        pair.program = fields[3];
        out.push_back(std::move(pair));
    }
    return out;
}

namespace {

std::string canonicalBytes(const std::string& programText, SkillSet& skills) {
    return canonicalize(typecheckOrThrow(parseProgram(programText), skills.registry()))
        .bytes;
}

// Drops the first droppable constant arg of the program's action so the
// simulator exercises slot filling. Returns empty when nothing droppable.
std::string dropOneArg(const std::string& programText, SkillSet& skills) {
    Program p = parseProgram(programText);
    for (Statement& s : p.statements) {
        if (!s.action)
            continue;
        const ResolvedClass* cls = skills.registry().findClass(s.action->target.cls);
        const FunctionSig* sig = cls ? cls->findFunction(s.action->target.name) : nullptr;
        if (!sig)
            continue;
        for (auto& [name, arg] : s.action->args) {
            const Param* param = sig->findParam(name);
            if (arg.kind == ArgKind::Constant && param && param->required) {
                arg = ArgValue::missing();
                return printProgram(p);
            }
        }
    }
    return "";
}

} // namespace

std::vector<DialogueTranscript> synthesizeDialogues(SkillSet& skills,
                                                    const std::vector<SynthPair>& pairs,
                                                    int nDialogues, unsigned seed) {
    std::vector<DialogueTranscript> out;
    if (pairs.empty() || nDialogues <= 0)
        return out;
    std::mt19937 rng(seed);
    auto pick = [&](size_t n) { return (size_t)(rng() % n); };
    Env env;

    // Value texts per type for slot answers.
    static const std::vector<Template> kNoTemplates;
    Engine harvester{skills, kNoTemplates, SynthOptions{}};
    harvester.harvestValues();

    for (int d = 0; d < nDialogues; d++) {
        DialogueTranscript transcript;
        DialogueState state;
        const int maxTurns = 12;
        for (int turn = 0; turn < maxTurns; turn++) {
            DialogueTurnRecord rec;
            rec.context = summarize(state);
            bool lastTurn = turn == maxTurns - 1;

            bool slotPending = false, confirmPending = false;
            for (const auto& [domain, item] : state.outstanding) {
                slotPending |= item.phase == PendingPhase::SlotFilling;
                confirmPending |= item.phase == PendingPhase::AwaitingConfirmation;
            }

            if (slotPending && !lastTurn) {
                // Answer the agent's AskSlot with a matching value.
                AgentTurn ask = agentPolicy(state, skills);
                const PendingItem& item = state.outstanding.at(ask.domain);
                std::string domain = ask.domain;
                const FunctionSig* sig = skills.registry()
                                             .cls(item.stmt.action->target.cls)
                                             .findFunction(item.stmt.action->target.name);
                const Param* param = sig->findParam(ask.param);
                std::optional<DialogueState> next;
                for (const ValueCand& v : harvester.candidatesFor(param->type)) {
                    next = supplySlot(state, v.utter, skills, env);
                    if (next) {
                        rec.userUtterance = v.utter;
                        break;
                    }
                }
                if (!next) {  // nothing bindable: abandon the transaction
                    rec.userUtterance = "cancel";
                    next = applyUserTurn(
                        state,
                        typecheckOrThrow(parseProgram("@Transaction.Cancel;"),
                                         skills.registry()),
                        skills, env);
                }
                state = *next;
                const Statement* stmt = nullptr;
                if (auto it = state.outstanding.find(domain);
                    it != state.outstanding.end())
                    stmt = &it->second.stmt;
                else if (auto it2 = state.completed.find(domain);
                         it2 != state.completed.end())
                    stmt = &it2->second.stmt;
                if (stmt)
                    rec.userProgram = canonicalBytes(
                        "@Transaction.Execute; " + printStatement(*stmt), skills);
            } else if (confirmPending && !lastTurn) {
                bool yes = rng() % 100 < 75;
                rec.userUtterance = yes ? "yes" : "no";
                state = confirmOrReject(state, yes, skills, env);
            } else {
                // Free move: new command / refinement / thank-you.
                int roll = (int)(rng() % 100);
                bool canRefine = false;
                for (const auto& [domain, c] : state.completed)
                    canRefine |= !c.hasAction;
                if (lastTurn || roll < 20 || (turn > 0 && roll < 30)) {
                    rec.userUtterance = "thank you";
                    state = applyUserTurn(
                        state,
                        typecheckOrThrow(parseProgram("@Transaction.ThankYou;"),
                                         skills.registry()),
                        skills, env);
                } else {
                    const SynthPair* chosen = &pairs[pick(pairs.size())];
                    if (canRefine && roll >= 70) {
                        // Prefer a pair touching an already-discussed domain.
                        for (size_t attempt = 0; attempt < 8; attempt++) {
                            const SynthPair& cand = pairs[pick(pairs.size())];
                            Program cp = parseProgram(cand.program);
                            const Statement& cs = cp.statements[0];
                            std::string domain = cs.action ? cs.action->target.cls
                                                           : cs.query->base.cls;
                            if (state.completed.count(domain)) {
                                chosen = &cand;
                                break;
                            }
                        }
                    }
                    std::string programText = chosen->program;
                    if (rng() % 100 < 35) {
                        std::string dropped = dropOneArg(programText, skills);
                        if (!dropped.empty())
                            programText = dropped;
                    }
                    rec.userUtterance = chosen->utterance;
                    TypedProgram typed =
                        typecheckOrThrow(parseProgram(programText), skills.registry());
                    rec.userProgram = canonicalize(typed).bytes;
                    state = applyUserTurn(state, typed, skills, env);
                }
            }

            AgentTurn agent = agentPolicy(state, skills);
            rec.agentAct = agent.label();
            rec.agentUtterance = agent.utterance;
            rec.state = state;
            bool done = agent.act == AgentAct::Goodbye;
            state = agent.newState;
            transcript.turns.push_back(std::move(rec));
            if (done)
                break;
        }
        out.push_back(std::move(transcript));
    }
    return out;
}

void writeTranscript(std::ostream& out, const DialogueTranscript& t) {
    for (const DialogueTurnRecord& rec : t.turns) {
        out << "C: " << rec.context << "\n";
        out << "U: " << rec.userUtterance << "\n";
        if (!rec.userProgram.empty())
            out << "P: " << rec.userProgram << "\n";
        out << "A: " << rec.agentAct << " | " << rec.agentUtterance << "\n";
    }
    out << "\n";
}

} // namespace dlg
