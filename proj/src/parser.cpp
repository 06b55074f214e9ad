#include <cstdlib>

#include "dlg/syntax.hpp"

namespace dlg {

namespace {

const char* kComparisonOps[] = {"==", ">=", "<="};

FilterOp comparisonOp(const std::string& lexeme) {
    if (lexeme == "==") return FilterOp::Eq;
    if (lexeme == ">=") return FilterOp::Ge;
    if (lexeme == "<=") return FilterOp::Le;
    throw Error("InternalError", "not a comparison op: " + lexeme);
}

class Parser {
public:
    Parser(const std::string& text, const UnitTable& units)
        : tokens_(tokenize(text)), units_(units) {}

    Program program() {
        Program p;
        p.act = dialogueActRef();
        expectPunct(";");
        while (!atEnd())
            p.statements.push_back(statement());
        validateProgram(p);
        return p;
    }

    Library library() {
        Library lib;
        while (!atEnd()) {
            if (peekIs("dialogue"))
                lib.actDecls.push_back(dialogueActsDecl());
            else
                lib.classes.push_back(classDef());
        }
        return lib;
    }

private:
    std::vector<Token> tokens_;
    size_t pos_ = 0;
    const UnitTable& units_;

    const Token& peek(size_t off = 0) const {
        size_t i = std::min(pos_ + off, tokens_.size() - 1);
        return tokens_[i];
    }

    bool atEnd() const { return peek().kind == TokenKind::EndOfInput; }

    const Token& advance() { return tokens_[pos_ < tokens_.size() - 1 ? pos_++ : pos_]; }

    [[noreturn]] void fail(const std::string& expected) const {
        const Token& t = peek();
        std::string found = t.kind == TokenKind::EndOfInput ? "end of input" : t.lexeme;
        throw ParseError("expected " + expected + ", found '" + found + "'", t.span,
                         expected, found);
    }

    bool peekIs(const std::string& lexeme, size_t off = 0) const {
        const Token& t = peek(off);
        return (t.kind == TokenKind::Punct || t.kind == TokenKind::Identifier ||
                t.kind == TokenKind::EnvConst) &&
               t.lexeme == lexeme;
    }

    bool accept(const std::string& lexeme) {
        if (!peekIs(lexeme))
            return false;
        advance();
        return true;
    }

    void expectPunct(const std::string& lexeme) {
        if (!accept(lexeme))
            fail("'" + lexeme + "'");
    }

    std::string expectIdent(const std::string& what = "identifier") {
        if (peek().kind != TokenKind::Identifier)
            fail(what);
        return advance().lexeme;
    }

    std::string expectDns() {
        if (peek().kind != TokenKind::DnsName)
            fail("'@' name");
        return advance().lexeme;
    }

    double expectNumber() {
        if (peek().kind != TokenKind::Number)
            fail("number");
        return std::strtod(advance().lexeme.c_str(), nullptr);
    }

    long expectInteger() {
        if (peek().kind != TokenKind::Number)
            fail("integer");
        return std::strtol(advance().lexeme.c_str(), nullptr, 10);
    }

    // Splits @a.b.Fn into (a.b, Fn) on the last dot.
    static std::pair<std::string, std::string> splitDns(const std::string& dns) {
        size_t dot = dns.rfind('.');
        if (dot == std::string::npos)
            return {dns, ""};
        return {dns.substr(0, dot), dns.substr(dot + 1)};
    }

    DialogueActRef dialogueActRef() {
        const Token& t = peek();
        auto [ns, name] = splitDns(expectDns());
        if (name.empty())
            throw ParseError("dialogue act needs a namespace: @" + ns, t.span);
        return {ns, name};
    }

    // ---- programs ----

    Statement statement() {
        Statement s;
        if (accept("monitor")) {
            expectPunct("(");
            s.query = queryTop();
            expectPunct(")");
            expectPunct("=>");
            s.action = action();
            s.monitor = true;
            expectPunct(";");
            return s;
        }
        if (startsAction()) {
            s.action = action();
            expectPunct(";");
            return s;
        }
        s.query = queryTop();
        if (accept("=>"))
            s.action = action();
        expectPunct(";");
        return s;
    }

    // @X.Y(name=... is an action; anything else starting a statement is a query.
    bool startsAction() const {
        return peek().kind == TokenKind::DnsName && peekIs("(", 1) &&
               peek(2).kind == TokenKind::Identifier && peekIs("=", 3);
    }

    FunctionRef functionRef() {
        const Token& t = peek();
        auto [cls, name] = splitDns(expectDns());
        if (name.empty())
            throw ParseError("function reference needs a class and name: @" + cls, t.span);
        return {cls, name};
    }

    Query queryTop() {
        // Projection prefix: [f1, f2] of <query>
        if (peekIs("[") && peek(1).kind == TokenKind::Identifier) {
            advance();
            std::vector<std::string> fields;
            fields.push_back(expectIdent("projection field"));
            while (accept(","))
                fields.push_back(expectIdent("projection field"));
            expectPunct("]");
            if (!accept("of"))
                fail("'of'");
            Query q = queryTop();
            q.projection = std::move(fields);
            return q;
        }
        if (accept("aggregate")) {
            expectPunct("(");
            std::string opName = expectIdent("aggregate operator");
            AggSpec agg;
            if (opName == "count") agg.op = AggOp::Count;
            else if (opName == "min") agg.op = AggOp::Min;
            else if (opName == "max") agg.op = AggOp::Max;
            else if (opName == "sum") agg.op = AggOp::Sum;
            else if (opName == "avg") agg.op = AggOp::Avg;
            else fail("aggregate operator (count, min, max, sum, avg)");
            if (agg.op != AggOp::Count) {
                expectPunct(",");
                agg.field = expectIdent("aggregate field");
            }
            if (!accept("of"))
                fail("'of'");
            Query q = sortOrBase();
            expectPunct(")");
            q.aggregate = agg;
            return q;
        }
        return sortOrBase();
    }

    Query sortOrBase() {
        Query q;
        if (accept("sort")) {
            expectPunct("(");
            SortSpec sort;
            if (peekIs("distance") && peekIs("(", 1)) {
                advance();
                advance();
                ComputedField cf;
                cf.name = "distance";
                cf.expr.geoField = expectIdent("geo field");
                expectPunct(",");
                if (accept("$here")) {
                    cf.expr.useHere = true;
                } else {
                    cf.expr.useHere = false;
                    cf.expr.location.push_back(value());
                }
                expectPunct(")");
                q.computed.push_back(cf);
                sort.field = "distance";
            } else {
                sort.field = expectIdent("sort field");
            }
            if (accept("asc"))
                sort.ascending = true;
            else if (accept("desc"))
                sort.ascending = false;
            else
                fail("'asc' or 'desc'");
            if (!accept("of"))
                fail("'of'");
            q.base = functionRef();
            expectPunct("(");
            expectPunct(")");
            q.filter = filterList();
            expectPunct(")");
            q.sort = sort;
        } else {
            q.base = functionRef();
            expectPunct("(");
            expectPunct(")");
            q.filter = filterList();
        }
        // Slice postfix: [a:b] or [k].
        if (peekIs("[") && peek(1).kind == TokenKind::Number) {
            advance();
            SliceSpec slice;
            slice.start = expectInteger();
            if (accept(":"))
                slice.count = expectInteger();
            expectPunct("]");
            q.slice = slice;
        }
        return q;
    }

    // Zero or more `, <orExpr>` conjuncts.
    FilterExpr filterList() {
        std::vector<FilterExpr> conjuncts;
        while (accept(","))
            conjuncts.push_back(orExpr());
        return FilterExpr::mkAnd(std::move(conjuncts));
    }

    FilterExpr orExpr() {
        std::vector<FilterExpr> children;
        children.push_back(andExpr());
        while (accept("||"))
            children.push_back(andExpr());
        return FilterExpr::mkOr(std::move(children));
    }

    FilterExpr andExpr() {
        std::vector<FilterExpr> children;
        children.push_back(notExpr());
        while (accept("&&"))
            children.push_back(notExpr());
        return FilterExpr::mkAnd(std::move(children));
    }

    FilterExpr notExpr() {
        if (accept("!"))
            return FilterExpr::mkNot(notExpr());
        return filterPrimary();
    }

    FilterExpr filterPrimary() {
        if (accept("(")) {
            FilterExpr f = orExpr();
            expectPunct(")");
            return f;
        }
        if (accept("true"))
            return FilterExpr::trueExpr();
        if (peekIs("contains") && peekIs("(", 1)) {
            advance();
            advance();
            std::string field = expectIdent("field");
            expectPunct(",");
            Value v = value();
            expectPunct(")");
            return FilterExpr::atom(field, FilterOp::Contains, std::move(v));
        }
        if (peekIs("in_array") && peekIs("(", 1)) {
            advance();
            advance();
            std::string field = expectIdent("field");
            expectPunct(",");
            Value v = value();
            if (v.kind != TypeKind::Array)
                fail("array value");
            expectPunct(")");
            return FilterExpr::atom(field, FilterOp::InArray, std::move(v));
        }
        if (peekIs("substr") && peekIs("(", 1)) {
            advance();
            advance();
            std::string field = expectIdent("field");
            expectPunct(",");
            if (peek().kind != TokenKind::QuotedString)
                fail("string literal");
            Value v = Value::ofString(advance().lexeme);
            expectPunct(")");
            return FilterExpr::atom(field, FilterOp::Substr, std::move(v));
        }
        if (peekIs("dontcare") && peekIs("(", 1)) {
            advance();
            advance();
            std::string field = expectIdent("field");
            expectPunct(")");
            return FilterExpr::dontCare(field);
        }
        if (peekIs("any") && peekIs("(", 1)) {
            // any(innerField op outerField of innerQuery)
            advance();
            advance();
            std::string innerField = expectIdent("inner field");
            FilterOp op = comparisonFromToken();
            std::string outerField = expectIdent("outer field");
            if (!accept("of"))
                fail("'of'");
            Query inner = queryTop();
            expectPunct(")");
            return FilterExpr::subquery(outerField, op, std::move(inner), innerField);
        }
        // Plain comparison atom: field op rhs.
        std::string field = expectIdent("filter atom");
        FilterOp op = comparisonFromToken();
        if (peek().kind == TokenKind::Identifier && !startsValue())
            return FilterExpr::atomVar(field, op, advance().lexeme);
        return FilterExpr::atom(field, op, value());
    }

    FilterOp comparisonFromToken() {
        for (const char* op : kComparisonOps)
            if (accept(op))
                return comparisonOp(op);
        fail("comparison operator (==, >=, <=)");
    }

    bool startsValue() const {
        const Token& t = peek();
        switch (t.kind) {
        case TokenKind::Number:
        case TokenKind::MeasureLit:
        case TokenKind::QuotedString:
        case TokenKind::DateLit:
            return true;
        case TokenKind::EnvConst:
            return t.lexeme == "$here" || t.lexeme == "$now";
        case TokenKind::Identifier:
            return (t.lexeme == "true" || t.lexeme == "false" ||
                    ((t.lexeme == "enum" || t.lexeme == "location" || t.lexeme == "time") &&
                     peekIs("(", 1)));
        case TokenKind::Punct:
            return t.lexeme == "[";
        default:
            return false;
        }
    }

    Value value() {
        const Token& t = peek();
        switch (t.kind) {
        case TokenKind::Number:
            return Value::ofNumber(expectNumber());
        case TokenKind::MeasureLit: {
            advance();
            double n = std::strtod(t.numText.c_str(), nullptr);
            if (units_.known(t.suffix))
                return Value::ofMeasure(n, t.suffix);
            bool isCurrency = t.suffix.size() == 3;
            for (char c : t.suffix)
                isCurrency = isCurrency && std::isupper((unsigned char)c);
            if (isCurrency)
                return Value::ofCurrency(n, t.suffix);
            throw ParseError("unknown unit '" + t.suffix + "'", t.span);
        }
        case TokenKind::QuotedString: {
            std::string text = advance().lexeme;
            if (accept("^^"))
                return entityTail(std::move(text));
            return Value::ofString(std::move(text));
        }
        case TokenKind::DateLit:
            return Value::ofDate(parseDate(advance()));
        case TokenKind::EnvConst:
            if (accept("$here"))
                return Value::envHere();
            if (accept("$now"))
                return Value::envNow();
            fail("value");
        case TokenKind::Identifier:
            if (accept("true"))
                return Value::ofBool(true);
            if (accept("false"))
                return Value::ofBool(false);
            if (peekIs("enum") && peekIs("(", 1)) {
                advance();
                advance();
                std::string variant = expectIdent("enum variant");
                expectPunct(")");
                return Value::ofEnum(variant);
            }
            if (peekIs("location") && peekIs("(", 1)) {
                advance();
                advance();
                double lat = expectNumber();
                expectPunct(",");
                double lon = expectNumber();
                std::string display;
                if (accept(",")) {
                    if (peek().kind != TokenKind::QuotedString)
                        fail("string literal");
                    display = advance().lexeme;
                }
                expectPunct(")");
                return Value::ofLocation(lat, lon, display);
            }
            if (peekIs("time") && peekIs("(", 1)) {
                advance();
                advance();
                long h = expectInteger();
                expectPunct(":");
                long m = expectInteger();
                expectPunct(")");
                if (h < 0 || h > 23 || m < 0 || m > 59)
                    throw ParseError("time out of range", t.span);
                return Value::ofTime((int)h, (int)m);
            }
            fail("value");
        case TokenKind::Punct:
            if (accept("[")) {
                std::vector<Value> elems;
                if (!peekIs("]")) {
                    elems.push_back(value());
                    while (accept(","))
                        elems.push_back(value());
                }
                expectPunct("]");
                return Value::ofArray(std::move(elems));
            }
            fail("value");
        default:
            fail("value");
        }
    }

    Value entityTail(std::string id) {
        // Qualified entity type: ns(.ns)*:Name
        std::string type = expectIdent("entity namespace");
        while (accept("."))
            type += "." + expectIdent("entity namespace segment");
        expectPunct(":");
        type += ":" + expectIdent("entity type name");
        std::string display;
        if (accept("(")) {
            if (peek().kind != TokenKind::QuotedString)
                fail("string literal");
            display = advance().lexeme;
            expectPunct(")");
        }
        return Value::ofEntity(type, std::move(id), display);
    }

    DateValue parseDate(const Token& t) {
        DateValue d;
        int n = 0;
        const std::string& s = t.lexeme;
        if (std::sscanf(s.c_str(), "%d-%d-%d%n", &d.year, &d.month, &d.day, &n) != 3)
            throw ParseError("malformed date literal", t.span);
        if ((size_t)n < s.size()) {
            d.hasTime = true;
            int fields = std::sscanf(s.c_str() + n, "T%d:%d:%d", &d.hour, &d.minute, &d.second);
            if (fields < 2)
                throw ParseError("malformed date-time literal", t.span);
        }
        if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31 || d.hour > 23 ||
            d.minute > 59 || d.second > 59)
            throw ParseError("date out of range", t.span);
        return d;
    }

    Action action() {
        Action a;
        a.target = functionRef();
        expectPunct("(");
        if (!peekIs(")")) {
            do {
                std::string name = expectIdent("parameter name");
                expectPunct("=");
                a.args.emplace_back(name, argValue());
            } while (accept(","));
        }
        expectPunct(")");
        return a;
    }

    ArgValue argValue() {
        if (accept("$?"))
            return ArgValue::missing();
        if (peek().kind == TokenKind::Identifier && !startsValue())
            return ArgValue::varRef(advance().lexeme);
        return ArgValue::constant(value());
    }

    // ---- class libraries ----

    DialogueActDecl dialogueActsDecl() {
        DialogueActDecl decl;
        expectPunct("dialogue");
        if (!accept("acts"))
            fail("'acts'");
        decl.ns = expectDns();
        expectPunct("{");
        while (!accept("}")) {
            decl.acts.push_back(expectIdent("dialogue act name"));
            expectPunct(";");
        }
        return decl;
    }

    ClassDef classDef() {
        ClassDef c;
        c.isAbstract = accept("abstract");
        if (!accept("class"))
            fail("'class'");
        c.name = expectDns();
        if (accept("extends")) {
            c.extends.push_back(expectDns());
            while (accept(","))
                c.extends.push_back(expectDns());
        }
        applyAnnotations(c.canonical, nullptr, nullptr);
        expectPunct("{");
        while (!accept("}")) {
            if (accept("entity")) {
                c.entities.push_back(expectIdent("entity name"));
                while (accept(","))
                    c.entities.push_back(expectIdent("entity name"));
                expectPunct(";");
            } else if (accept("loader")) {
                c.loader = loaderBinding();
            } else if (peekIs("query") || peekIs("action")) {
                c.functions.push_back(functionSig());
            } else {
                fail("'entity', 'query', 'action', 'loader' or '}'");
            }
        }
        if (c.isAbstract && c.loader)
            throw Error("InvalidLibrary", "abstract class @" + c.name + " cannot have a loader");
        return c;
    }

    LoaderBinding loaderBinding() {
        LoaderBinding b;
        b.dns = expectDns();
        if (b.dns == "org.dlg.dataset")
            b.kind = LoaderKind::Dataset;
        else if (b.dns == "org.dlg.simrest")
            b.kind = LoaderKind::SimRest;
        else
            b.kind = LoaderKind::External;
        expectPunct("(");
        if (!peekIs(")")) {
            do {
                std::string name = expectIdent("loader argument");
                expectPunct("=");
                if (peek().kind != TokenKind::QuotedString)
                    fail("string literal");
                b.args.emplace_back(name, advance().lexeme);
            } while (accept(","));
        }
        expectPunct(")");
        expectPunct(";");
        return b;
    }

    FunctionSig functionSig() {
        FunctionSig sig;
        sig.kind = accept("query") ? FunctionKind::Query
                                   : (expectPunct("action"), FunctionKind::Action);
        sig.name = expectIdent("function name");
        expectPunct("(");
        if (!peekIs(")")) {
            do {
                Param p;
                if (accept("in"))
                    p.dir = ParamDir::In;
                else if (accept("out"))
                    p.dir = ParamDir::Out;
                else
                    fail("'in' or 'out'");
                p.name = expectIdent("parameter name");
                expectPunct(":");
                p.type = typeExpr();
                bool required = true;
                applyAnnotations(p.canonical, &required, nullptr);
                p.required = required;
                sig.params.push_back(std::move(p));
            } while (accept(","));
        }
        expectPunct(")");
        applyAnnotations(sig.canonical, nullptr, &sig.confirmation);
        expectPunct(";");
        if (sig.kind == FunctionKind::Action)
            for (const auto& p : sig.params)
                if (p.dir == ParamDir::Out)
                    throw Error("InvalidLibrary", "action " + sig.name + " has out params");
        return sig;
    }

    // Zero or more #_[k="..."] / #[k=true|false] suffixes.
    void applyAnnotations(std::string& canonical, bool* required, bool* confirmation) {
        for (;;) {
            if (accept("#_")) {
                expectPunct("[");
                std::string key = expectIdent("annotation key");
                expectPunct("=");
                if (peek().kind != TokenKind::QuotedString)
                    fail("string literal");
                std::string val = advance().lexeme;
                expectPunct("]");
                if (key == "canonical")
                    canonical = val;
            } else if (accept("#")) {
                expectPunct("[");
                std::string key = expectIdent("annotation key");
                expectPunct("=");
                bool val = accept("true") || (expectPunct("false"), false);
                expectPunct("]");
                if (key == "required" && required)
                    *required = val;
                else if (key == "confirmation" && confirmation)
                    *confirmation = val;
                else
                    throw ParseError("unknown annotation #[" + key + "]", peek().span);
            } else {
                break;
            }
        }
    }

    TypeExpr typeExpr() {
        const Token& t = peek();
        std::string name = expectIdent("type");
        if (name == "Boolean") return TypeExpr::boolean();
        if (name == "Number") return TypeExpr::number();
        if (name == "String") return TypeExpr::string();
        if (name == "Currency") return TypeExpr::currency();
        if (name == "Date") return TypeExpr::date();
        if (name == "Time") return TypeExpr::time();
        if (name == "Location") return TypeExpr::location();
        if (name == "Measure") {
            expectPunct("(");
            std::string unitClass = expectIdent("unit class");
            expectPunct(")");
            if (!units_.knownClass(unitClass))
                throw ParseError("unknown unit class " + unitClass, t.span);
            return TypeExpr::measure(unitClass);
        }
        if (name == "Entity") {
            expectPunct("(");
            std::string type = expectIdent("entity type");
            while (accept("."))
                type += "." + expectIdent("entity type segment");
            if (accept(":"))
                type += ":" + expectIdent("entity type name");
            expectPunct(")");
            return TypeExpr::entity(type);
        }
        if (name == "Enum") {
            expectPunct("(");
            std::vector<std::string> variants;
            variants.push_back(expectIdent("enum variant"));
            while (accept(","))
                variants.push_back(expectIdent("enum variant"));
            expectPunct(")");
            return TypeExpr::enumeration(std::move(variants));
        }
        if (name == "Array") {
            expectPunct("(");
            TypeExpr element = typeExpr();
            expectPunct(")");
            return TypeExpr::array(std::move(element));
        }
        throw ParseError("unknown type " + name, t.span);
    }
};

} // namespace

Program parseProgram(const std::string& text, const UnitTable& units) {
    return Parser(text, units).program();
}

Library parseLibrary(const std::string& text, const UnitTable& units) {
    return Parser(text, units).library();
}

} // namespace dlg
