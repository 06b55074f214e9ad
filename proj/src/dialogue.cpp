#include "dlg/dialogue.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "dlg/canonical.hpp"
#include "dlg/syntax.hpp"

namespace dlg {

namespace {

std::string domainOf(const Statement& stmt) {
    return stmt.action ? stmt.action->target.cls : stmt.query->base.cls;
}

Program wrap(const Statement& stmt) {
    Program p;
    p.act = {"Transaction", "Execute"};
    p.statements = {stmt};
    return p;
}

Statement canonicalStmt(const Statement& stmt, const UnitTable& units) {
    return canonicalizeProgram(wrap(stmt), units).statements[0];
}

const FunctionSig* sigOf(const Registry& registry, const FunctionRef& ref) {
    const ResolvedClass* cls = registry.findClass(ref.cls);
    return cls ? cls->findFunction(ref.name) : nullptr;
}

std::string paramPhrase(const Registry& registry, const FunctionRef& ref,
                        const std::string& param) {
    const FunctionSig* sig = sigOf(registry, ref);
    const Param* p = sig ? sig->findParam(param) : nullptr;
    return p && !p->canonical.empty() ? p->canonical : param;
}

void collectFilterFields(const FilterExpr& f, std::set<std::string>& fields) {
    if (!f.field.empty())
        fields.insert(f.field);
    for (const auto& child : f.children)
        collectFilterFields(child, fields);
}

// Highest-cardinality out-param with a canonical phrase that the filter does
// not already constrain; empty when nothing qualifies.
std::string refinementField(const Query& q, const std::vector<Record>& rows,
                            const Registry& registry) {
    const FunctionSig* sig = sigOf(registry, q.base);
    if (!sig)
        return "";
    std::set<std::string> filtered;
    collectFilterFields(q.filter, filtered);
    std::string best;
    size_t bestCard = 0;
    for (const Param& p : sig->params) {
        if (p.dir != ParamDir::Out || p.name == "id" || p.canonical.empty() ||
            filtered.count(p.name))
            continue;
        std::set<std::string> distinct;
        for (const Record& r : rows)
            if (const Value* v = r.get(p.name))
                distinct.insert(printValue(*v));
        if (distinct.size() > bestCard) {
            bestCard = distinct.size();
            best = p.name;
        }
    }
    return best;
}

void completeStatement(DialogueState& s, const std::string& domain, const Statement& stmt,
                       SkillSet& skills, const Env& env) {
    CompletedItem item;
    item.stmt = canonicalStmt(stmt, UnitTable::builtin());
    item.hasAction = stmt.action.has_value();
    try {
        TypedProgram tp = typecheckOrThrow(wrap(stmt), skills.registry());
        ProgramResult r = executeProgram(tp, skills, env);
        const StatementResult& sr = r.statements[0];
        item.totalCount = (long)sr.rows.size();
        for (size_t i = 0; i < sr.rows.size() && i < 3; i++) {
            item.rows.push_back(serializeRecord(sr.rows[i]));
            item.topRecords.push_back(sr.rows[i]);
        }
        for (const auto& o : sr.outcomes)
            if (!o.success) {
                item.ok = false;
                item.message = o.message;
                break;
            }
        if (item.ok && stmt.query && item.totalCount > 3)
            item.refineField = refinementField(*stmt.query, sr.rows, skills.registry());
    } catch (const Error& e) {
        item.ok = false;
        item.message = e.what();
    }
    s.completed[domain] = std::move(item);
    s.justCompleted = domain;
}

// Installs the statement as pending (missing params / unconfirmed
// confirmation-action) or executes it; the domain's previous outstanding item
// is always abandoned first.
void installOrExecute(DialogueState& s, const Statement& stmt, SkillSet& skills,
                      const Env& env) {
    std::string domain = domainOf(stmt);
    s.outstanding.erase(domain);
    const FunctionSig* asig =
        stmt.action ? sigOf(skills.registry(), stmt.action->target) : nullptr;
    if (asig) {
        if (!missingParams(stmt, *asig).empty()) {
            s.outstanding[domain] = {stmt, PendingPhase::SlotFilling};
            return;
        }
        if (asig->confirmation) {
            s.outstanding[domain] = {stmt, PendingPhase::AwaitingConfirmation};
            return;
        }
    }
    completeStatement(s, domain, stmt, skills, env);
}

std::string joinRows(const std::vector<std::string>& rows) {
    std::string out;
    for (size_t i = 0; i < rows.size(); i++)
        out += (i ? " | " : "") + rows[i];
    return out;
}

EntityLexicon lexiconFromSkills(SkillSet& skills) {
    EntityLexicon lex = EntityLexicon::builtin();
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& [name, cls] : skills.registry().classes()) {
        if (!skills.backend(name))
            continue;
        for (const auto& sig : cls.functions) {
            if (sig.kind != FunctionKind::Query)
                continue;
            std::vector<Record> rows;
            try {
                rows = skills.rows({name, sig.name});
            } catch (const Error&) {
                continue;
            }
            auto addEntity = [&](const Value& v, auto&& self) -> void {
                if (v.kind == TypeKind::Array) {
                    for (const Value& e : v.elems)
                        self(e, self);
                    return;
                }
                if (v.kind != TypeKind::Entity ||
                    !seen.insert({v.entityType, v.text}).second)
                    return;
                std::vector<std::string> aliases = {v.text};
                if (!v.display.empty())
                    aliases.push_back(v.display);
                lex.add(v.entityType, {v.text, v.display, aliases});
            };
            for (const Record& row : rows)
                for (const auto& [field, value] : row.fields)
                    addEntity(value, addEntity);
        }
    }
    return lex;
}

// "the first one" -> 1, "it"/"that" -> 0 (meaning: the unique result).
int coreferenceOrdinal(const std::string& norm) {
    if (norm == "it" || norm == "that")
        return 0;
    if (norm == "the first one")
        return 1;
    if (norm == "the second one")
        return 2;
    if (norm == "the third one")
        return 3;
    return -1;
}

std::optional<Value> bindCoreference(const std::string& norm, const TypeExpr& type,
                                     const DialogueState& state) {
    int ordinal = coreferenceOrdinal(norm);
    if (ordinal < 0 || type.kind != TypeKind::Entity)
        return std::nullopt;
    for (const auto& [domain, item] : state.completed) {
        if (item.topRecords.empty())
            continue;
        const Value* id = item.topRecords[0].get("id");
        if (!id || id->kind != TypeKind::Entity || id->entityType != type.entityType)
            continue;
        if (ordinal == 0) {
            if (item.totalCount == 1)
                return *item.topRecords[0].get("id");
            continue;
        }
        if ((size_t)ordinal <= item.topRecords.size())
            return *item.topRecords[(size_t)ordinal - 1].get("id");
    }
    return std::nullopt;
}

std::optional<double> parseNumber(const std::string& text, size_t* consumed = nullptr) {
    const char* begin = text.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin)
        return std::nullopt;
    if (consumed)
        *consumed = (size_t)(end - begin);
    else if (*end != '\0')
        return std::nullopt;
    return v;
}

std::string trimmed(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    size_t b = s.find_last_not_of(" \t");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

std::optional<Value> bindSlotText(const std::string& rawText, const TypeExpr& type,
                                  const DialogueState& state, SkillSet& skills,
                                  const UnitTable& units) {
    std::string text = trimmed(rawText);
    if (text.empty())
        return std::nullopt;
    std::string norm = normalizeUtterance(text);
    if (auto v = bindCoreference(norm, type, state))
        return v;
    switch (type.kind) {
    case TypeKind::Number: {
        auto n = parseNumber(text);
        return n ? std::optional(Value::ofNumber(*n)) : std::nullopt;
    }
    case TypeKind::String:
        return Value::ofString(text);
    case TypeKind::Entity: {
        try {
            return lexiconFromSkills(skills).lookup(type.entityType, text);
        } catch (const Error&) {
            return std::nullopt;
        }
    }
    case TypeKind::Enum: {
        for (const auto& variant : type.variants)
            if (normalizeUtterance(variant) == norm)
                return Value::ofEnum(variant);
        return std::nullopt;
    }
    case TypeKind::Measure: {
        size_t consumed = 0;
        auto n = parseNumber(text, &consumed);
        if (!n)
            return std::nullopt;
        std::string unit = trimmed(text.substr(consumed));
        if (!units.known(unit) || units.unitClassOf(unit) != type.unitClass)
            return std::nullopt;
        return Value::ofMeasure(*n, unit);
    }
    case TypeKind::Currency: {
        std::string body = text[0] == '$' ? text.substr(1) : text;
        size_t consumed = 0;
        auto n = parseNumber(body, &consumed);
        if (!n)
            return std::nullopt;
        std::string code = normalizeUtterance(body.substr(consumed));
        if (code == "dollars" || code == "dollar")
            code = "usd";
        return Value::ofCurrency(*n, code.empty() ? "usd" : code);
    }
    case TypeKind::Date: {
        DateValue d;
        if (std::sscanf(text.c_str(), "%d-%d-%d", &d.year, &d.month, &d.day) != 3)
            return std::nullopt;
        return Value::ofDate(d);
    }
    case TypeKind::Time: {
        int h = 0, m = 0;
        if (std::sscanf(text.c_str(), "%d:%d", &h, &m) != 2)
            return std::nullopt;
        return Value::ofTime(h, m);
    }
    case TypeKind::Boolean:
        if (norm == "true" || norm == "yes")
            return Value::ofBool(true);
        if (norm == "false" || norm == "no")
            return Value::ofBool(false);
        return std::nullopt;
    default:
        return std::nullopt;
    }
}

// Splits "play ${0} by ${1}" into literal segments and slot numbers.
struct PatternParts {
    std::vector<std::string> literals;  // slots.size() + 1 entries
    std::vector<size_t> slots;
};

PatternParts splitPattern(const std::string& pattern) {
    PatternParts parts;
    std::string literal;
    for (size_t i = 0; i < pattern.size();) {
        if (pattern[i] == '$' && i + 1 < pattern.size() && pattern[i + 1] == '{') {
            size_t close = pattern.find('}', i);
            std::string hole =
                close == std::string::npos ? "" : pattern.substr(i + 2, close - i - 2);
            if (hole.empty() || hole.find_first_not_of("0123456789") != std::string::npos)
                throw Error("BadPattern", "malformed slot in: " + pattern);
            parts.literals.push_back(literal);
            literal.clear();
            parts.slots.push_back((size_t)std::stoul(hole));
            i = close + 1;
        } else {
            literal += pattern[i++];
        }
    }
    parts.literals.push_back(literal);
    return parts;
}

// Leftmost-shortest match of the normalized utterance against the pattern;
// every slot captures at least one character.
bool matchPattern(const PatternParts& parts, const std::string& text,
                  std::vector<std::string>& captures) {
    captures.assign(parts.slots.size(), "");
    if (parts.slots.empty())
        return text == parts.literals[0];
    if (text.compare(0, parts.literals[0].size(), parts.literals[0]) != 0)
        return false;
    size_t pos = parts.literals[0].size();
    for (size_t k = 0; k < parts.slots.size(); k++) {
        const std::string& next = parts.literals[k + 1];
        size_t end;
        if (k + 1 == parts.slots.size() && next.empty()) {
            end = text.size();
        } else if (k + 1 == parts.slots.size()) {
            if (text.size() < next.size() + pos + 1)
                return false;
            end = text.size() - next.size();
            if (text.compare(end, next.size(), next) != 0)
                return false;
        } else {
            end = text.find(next, pos + 1);
            if (end == std::string::npos)
                return false;
        }
        if (end <= pos)
            return false;
        captures[parts.slots[k]] = text.substr(pos, end - pos);
        pos = end + next.size();
    }
    return pos == text.size();
}

std::string substitute(const std::string& programPattern,
                       const std::vector<Value>& values, const UnitTable& units) {
    PatternParts parts = splitPattern(programPattern);
    std::string out = parts.literals[0];
    for (size_t k = 0; k < parts.slots.size(); k++) {
        out += printValue(values.at(parts.slots[k]), units);
        out += parts.literals[k + 1];
    }
    return out;
}

std::string actName(AgentAct act) {
    switch (act) {
    case AgentAct::AskSlot: return "AskSlot";
    case AgentAct::Confirm: return "Confirm";
    case AgentAct::ReportQuery: return "ReportQuery";
    case AgentAct::ReportActionSuccess: return "ReportActionSuccess";
    case AgentAct::ReportActionError: return "ReportActionError";
    case AgentAct::Greet: return "Greet";
    case AgentAct::Goodbye: return "Goodbye";
    }
    return "?";
}

} // namespace

std::string AgentTurn::label() const {
    switch (act) {
    case AgentAct::AskSlot:
        return "AskSlot(" + param + ")";
    case AgentAct::ReportQuery:
        return refineField.empty() ? "ReportQuery"
                                   : "ReportQuery+OfferRefinement(" + refineField + ")";
    default:
        return actName(act);
    }
}

DialogueState applyUserTurn(const DialogueState& state, const TypedProgram& p,
                            SkillSet& skills, const Env& env) {
    DialogueState s = state;
    s.turnIndex++;
    s.lastAct = p.program.act;
    s.justCompleted.clear();
    const std::string& act = p.program.act.name;
    if (act == "Cancel") {
        s.outstanding.clear();
        return s;
    }
    if (act != "Execute")
        return s;  // Greet / ThankYou carry no statements
    for (const Statement& stmt : p.program.statements)
        installOrExecute(s, stmt, skills, env);
    return s;
}

AgentTurn agentPolicy(const DialogueState& state, SkillSet& skills) {
    const Registry& registry = skills.registry();
    AgentTurn t;
    t.newState = state;
    t.newState.justCompleted.clear();

    for (const auto& [domain, item] : state.outstanding) {
        if (item.phase != PendingPhase::SlotFilling)
            continue;
        const FunctionSig* sig = sigOf(registry, item.stmt.action->target);
        std::vector<std::string> missing = missingParams(item.stmt, *sig);
        t.act = AgentAct::AskSlot;
        t.domain = domain;
        t.param = missing.at(0);
        t.utterance = "What " + paramPhrase(registry, item.stmt.action->target, t.param) +
                      " would you like?";
        return t;
    }
    for (const auto& [domain, item] : state.outstanding) {
        if (item.phase != PendingPhase::AwaitingConfirmation)
            continue;
        t.act = AgentAct::Confirm;
        t.domain = domain;
        t.statement = item.stmt;
        t.utterance = "Please confirm: " + printStatement(item.stmt) + " (yes/no)";
        return t;
    }
    if (!state.justCompleted.empty()) {
        const CompletedItem& c = state.completed.at(state.justCompleted);
        t.domain = state.justCompleted;
        if (!c.ok) {
            t.act = AgentAct::ReportActionError;
            t.message = c.message;
            t.utterance = "Sorry, that did not work: " + c.message;
            return t;
        }
        if (c.hasAction) {
            t.act = AgentAct::ReportActionSuccess;
            t.utterance = "Done!";
            return t;
        }
        t.act = AgentAct::ReportQuery;
        t.rows = c.rows;
        t.count = c.totalCount;
        t.refineField = c.refineField;
        if (c.totalCount == 0) {
            t.utterance = "I found no results.";
        } else {
            t.utterance = "I found " + std::to_string(c.totalCount) +
                          (c.totalCount == 1 ? " result: " : " results: ") +
                          joinRows(c.rows) + ".";
        }
        if (!t.refineField.empty())
            t.utterance += " Would you like to refine by " +
                           paramPhrase(registry, c.stmt.query->base, t.refineField) + "?";
        return t;
    }
    if (state.lastAct.name == "Cancel" || state.lastAct.name == "ThankYou") {
        t.act = AgentAct::Goodbye;
        t.utterance = "Alright, goodbye!";
        return t;
    }
    t.act = AgentAct::Greet;
    t.utterance = state.lastAct.ns.empty() ? "Hello! What can I do for you?"
                                           : "Okay. What else can I do for you?";
    return t;
}

DialogueState confirmOrReject(const DialogueState& state, bool yes, SkillSet& skills,
                              const Env& env) {
    for (const auto& [domain, item] : state.outstanding) {
        if (item.phase != PendingPhase::AwaitingConfirmation)
            continue;
        DialogueState s = state;
        s.turnIndex++;
        s.justCompleted.clear();
        Statement stmt = item.stmt;
        s.outstanding.erase(domain);
        if (yes)
            completeStatement(s, domain, stmt, skills, env);
        return s;
    }
    throw Error("NothingToConfirm", "no action awaits confirmation");
}

std::optional<DialogueState> supplySlot(const DialogueState& state, const std::string& text,
                                        SkillSet& skills, const Env& env) {
    for (const auto& [domain, item] : state.outstanding) {
        if (item.phase != PendingPhase::SlotFilling)
            continue;
        const FunctionSig* sig = sigOf(skills.registry(), item.stmt.action->target);
        std::vector<std::string> missing = missingParams(item.stmt, *sig);
        const Param* param = sig->findParam(missing.at(0));
        std::optional<Value> bound =
            bindSlotText(text, param->type, state, skills, UnitTable::builtin());
        if (!bound)
            return std::nullopt;
        DialogueState s = state;
        s.turnIndex++;
        s.justCompleted.clear();
        Statement stmt = item.stmt;
        bool replaced = false;
        for (auto& [name, arg] : stmt.action->args)
            if (name == param->name) {
                arg = ArgValue::constant(*bound);
                replaced = true;
            }
        if (!replaced)
            stmt.action->args.emplace_back(param->name, ArgValue::constant(*bound));
        installOrExecute(s, stmt, skills, env);
        return s;
    }
    return std::nullopt;
}

std::string summarize(const DialogueState& state, const UnitTable& units) {
    std::vector<std::string> pieces;
    std::set<std::string> domains;
    for (const auto& [d, _] : state.completed)
        domains.insert(d);
    for (const auto& [d, _] : state.outstanding)
        domains.insert(d);
    for (const std::string& d : domains) {
        if (auto it = state.completed.find(d); it != state.completed.end()) {
            const CompletedItem& c = it->second;
            std::string piece = "executed: " + printStatement(c.stmt, units) + " #" +
                                std::to_string(c.totalCount) +
                                " results: " + joinRows(c.rows);
            if (!c.ok)
                piece += " error: " + c.message;
            pieces.push_back(piece + ";");
        }
        if (auto it = state.outstanding.find(d); it != state.outstanding.end()) {
            std::string printed = printStatement(it->second.stmt, units);
            // Mark holes as ?? in the context form.
            size_t pos = 0;
            while ((pos = printed.find("$?", pos)) != std::string::npos) {
                printed.replace(pos, 2, "??");
                pos += 2;
            }
            pieces.push_back("outstanding: " + printed + ";");
        }
    }
    pieces.push_back("act: " + (state.lastAct.ns.empty() ? "none" : state.lastAct.str()));
    std::string out;
    for (size_t i = 0; i < pieces.size(); i++)
        out += (i ? " " : "") + pieces[i];
    return out;
}

void ParserIndex::add(IndexEntry entry) {
    splitPattern(entry.pattern);  // validates hole syntax
    auto pos = std::find_if(entries_.begin(), entries_.end(),
                            [&](const IndexEntry& e) { return e.pattern == entry.pattern; });
    if (pos != entries_.end()) {
        if (std::pair(entry.depth, entry.program) < std::pair(pos->depth, pos->program))
            *pos = std::move(entry);
        return;
    }
    auto order = [](const IndexEntry& e) { return std::pair(e.slots.size(), e.pattern); };
    auto it = std::lower_bound(entries_.begin(), entries_.end(), entry,
                               [&](const IndexEntry& a, const IndexEntry& b) {
                                   return order(a) < order(b);
                               });
    entries_.insert(it, std::move(entry));
}

std::string normalizeUtterance(const std::string& s) {
    std::string out;
    for (char c : s) {
        unsigned char u = (unsigned char)c;
        if (std::ispunct(u) && u != '-' && u != '$' && u != '{' && u != '}')
            c = ' ';
        if (std::isspace(u))
            c = ' ';
        if (c == ' ' && (out.empty() || out.back() == ' '))
            continue;
        out += (char)std::tolower((unsigned char)c);
    }
    while (!out.empty() && out.back() == ' ')
        out.pop_back();
    return out;
}

TypedProgram resolveUtterance(const DialogueState& state, const std::string& utterance,
                              const ParserIndex& index, SkillSet& skills) {
    const UnitTable& units = UnitTable::builtin();
    std::string norm = normalizeUtterance(utterance);
    auto typed = [&](const char* text) {
        return typecheckOrThrow(parseProgram(text), skills.registry());
    };
    if (norm == "hello" || norm == "hi" || norm == "hey")
        return typed("@Transaction.Greet;");
    if (norm == "thanks" || norm == "thank you")
        return typed("@Transaction.ThankYou;");
    if (norm == "cancel" || norm == "never mind" || norm == "forget it")
        return typed("@Transaction.Cancel;");

    for (const IndexEntry& entry : index.entries()) {
        std::vector<std::string> captures;
        if (!matchPattern(splitPattern(entry.pattern), norm, captures))
            continue;
        std::vector<Value> values;
        bool bound = true;
        for (size_t k = 0; k < entry.slots.size() && bound; k++) {
            auto v = bindSlotText(captures.at(k), entry.slots[k].type, state, skills, units);
            if (v)
                values.push_back(*v);
            else
                bound = false;
        }
        if (!bound)
            continue;
        try {
            Program p = parseProgram(substitute(entry.program, values, units), units);
            TypeCheckResult r = typecheckProgram(p, skills.registry(), units);
            if (r.ok())
                return r.typed;
        } catch (const Error&) {
            // fall through to the next candidate template
        }
    }
    throw Error("Unparseable", utterance);
}

namespace {

bool actMatches(const std::string& expected, const AgentTurn& turn) {
    std::string label = turn.label();
    if (expected == label)
        return true;
    size_t cut = label.find_first_of("(+");
    return expected == label.substr(0, cut);
}

} // namespace

ScenarioResult runScenario(const std::string& text, SkillSet& skills, const Env& env,
                           const ParserIndex* index) {
    ParserIndex emptyIndex;
    const ParserIndex& idx = index ? *index : emptyIndex;
    std::vector<std::pair<char, std::string>> lines;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        line = trimmed(line);
        if (line.empty() || line[0] == '#')
            continue;
        if (line.rfind("U:", 0) == 0)
            lines.emplace_back('U', trimmed(line.substr(2)));
        else if (line.rfind("A:", 0) == 0)
            lines.emplace_back('A', trimmed(line.substr(2)));
        else
            return {false, "malformed scenario line: " + line, {}};
    }

    ScenarioResult result;
    DialogueState state;
    for (size_t i = 0; i < lines.size(); i++) {
        if (lines[i].first != 'U') {
            result.ok = false;
            result.message = "expected a U: line, got: " + lines[i].second;
            return result;
        }
        const std::string& input = lines[i].second;
        try {
            if (input == "yes" || input == "no") {
                state = confirmOrReject(state, input == "yes", skills, env);
            } else if (!input.empty() && input[0] == '@') {
                state = applyUserTurn(
                    state, typecheckOrThrow(parseProgram(input), skills.registry()), skills,
                    env);
            } else {
                try {
                    state = applyUserTurn(state, resolveUtterance(state, input, idx, skills),
                                          skills, env);
                } catch (const Error& e) {
                    if (e.code() != "Unparseable")
                        throw;
                    auto filled = supplySlot(state, input, skills, env);
                    if (!filled)
                        throw;
                    state = *filled;
                }
            }
        } catch (const Error& e) {
            result.ok = false;
            result.message = "turn '" + input + "' failed: " + e.what();
            return result;
        }
        ScenarioTurn turn;
        turn.user = input;
        turn.state = state;
        turn.agent = agentPolicy(state, skills);
        if (i + 1 < lines.size() && lines[i + 1].first == 'A') {
            turn.expected = lines[++i].second;
            if (!actMatches(turn.expected, turn.agent)) {
                result.ok = false;
                result.message = "turn '" + input + "': expected " + turn.expected +
                                 ", got " + turn.agent.label();
            }
        }
        state = turn.agent.newState;
        result.turns.push_back(std::move(turn));
        if (!result.ok)
            return result;
    }
    return result;
}

ScenarioResult runScenarioFile(const std::string& path, SkillSet& skills, const Env& env,
                               const ParserIndex* index) {
    std::ifstream in(path);
    if (!in)
        throw Error("IoError", "cannot open scenario file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return runScenario(buf.str(), skills, env, index);
}

void validateState(const DialogueState& state, const Registry& registry) {
    auto fail = [](const std::string& msg) { throw Error("InvalidDialogueState", msg); };
    for (const auto& [domain, item] : state.outstanding) {
        if (!item.stmt.action)
            fail(domain + ": outstanding item without an action");
        const FunctionSig* sig = sigOf(registry, item.stmt.action->target);
        if (!sig)
            fail(domain + ": outstanding action has no signature");
        std::vector<std::string> missing = missingParams(item.stmt, *sig);
        if (item.phase == PendingPhase::AwaitingConfirmation &&
            (!missing.empty() || !sig->confirmation))
            fail(domain + ": awaiting confirmation with missing params or no confirmation");
        if (item.phase == PendingPhase::SlotFilling && missing.empty())
            fail(domain + ": slot filling with nothing missing");
    }
    for (const auto& [domain, item] : state.completed) {
        if (item.rows.size() > 3 || item.rows.size() != item.topRecords.size())
            fail(domain + ": completed item retains more than the top-3 rows");
        if ((long)item.rows.size() > item.totalCount)
            fail(domain + ": retained rows exceed the total count");
    }
    if (!state.justCompleted.empty() && !state.completed.count(state.justCompleted))
        fail("justCompleted names an absent domain");
}

} // namespace dlg
