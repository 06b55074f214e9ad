#include "dlg/types.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dlg {

TypeExpr TypeExpr::enumeration(std::vector<std::string> variants) {
    if (variants.empty())
        throw Error("InvalidType", "enum must have at least one variant");
    for (const auto& v : variants) {
        if (v.empty() || std::count(variants.begin(), variants.end(), v) != 1)
            throw Error("InvalidType", "enum variants must be unique and non-empty");
        for (char c : v)
            if (!(std::islower((unsigned char)c) || std::isdigit((unsigned char)c) || c == '_'))
                throw Error("InvalidType", "enum variant must be a lowercase identifier: " + v);
    }
    TypeExpr t = TypeExpr::ofKind(TypeKind::Enum);
    t.variants = std::move(variants);
    return t;
}

TypeExpr TypeExpr::array(TypeExpr elementType) {
    if (elementType.kind == TypeKind::Array)
        throw Error("InvalidType", "nested arrays are not supported");
    TypeExpr t = TypeExpr::ofKind(TypeKind::Array);
    t.element.push_back(std::move(elementType));
    return t;
}

std::string TypeExpr::str() const {
    switch (kind) {
    case TypeKind::Boolean: return "Boolean";
    case TypeKind::Number: return "Number";
    case TypeKind::String: return "String";
    case TypeKind::Measure: return "Measure(" + unitClass + ")";
    case TypeKind::Currency: return "Currency";
    case TypeKind::Date: return "Date";
    case TypeKind::Time: return "Time";
    case TypeKind::Location: return "Location";
    case TypeKind::Entity: return "Entity(" + entityType + ")";
    case TypeKind::Enum: {
        std::string out = "Enum(";
        for (size_t i = 0; i < variants.size(); i++)
            out += (i ? "," : "") + variants[i];
        return out + ")";
    }
    case TypeKind::Array: return "Array(" + elementType().str() + ")";
    }
    return "?";
}

long long DateValue::toSeconds() const {
    // Howard Hinnant's days-from-civil.
    long long y = year;
    y -= month <= 2;
    long long era = (y >= 0 ? y : y - 399) / 400;
    unsigned yoe = (unsigned)(y - era * 400);
    unsigned doy = (unsigned)((153 * (month + (month > 2 ? -3 : 9)) + 2) / 5 + day - 1);
    unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    long long days = era * 146097LL + (long long)doe - 719468LL;
    return days * 86400LL + hour * 3600LL + minute * 60LL + second;
}

Value Value::ofBool(bool b) {
    Value v;
    v.kind = TypeKind::Boolean;
    v.boolean = b;
    return v;
}

Value Value::ofNumber(double n) {
    Value v;
    v.kind = TypeKind::Number;
    v.num = n;
    return v;
}

Value Value::ofString(std::string s) {
    Value v;
    v.kind = TypeKind::String;
    v.text = std::move(s);
    return v;
}

Value Value::ofMeasure(double magnitude, std::string unit) {
    Value v;
    v.kind = TypeKind::Measure;
    v.num = magnitude;
    v.text = std::move(unit);
    return v;
}

Value Value::envHere() {
    Value v;
    v.kind = TypeKind::Location;
    v.text = "$here";
    return v;
}

Value Value::envNow() {
    Value v;
    v.kind = TypeKind::Date;
    v.text = "$now";
    return v;
}

Value Value::ofCurrency(double amount, std::string code) {
    Value v;
    v.kind = TypeKind::Currency;
    v.num = amount;
    v.text = std::move(code);
    return v;
}

Value Value::ofDate(DateValue d) {
    Value v;
    v.kind = TypeKind::Date;
    v.date = d;
    return v;
}

Value Value::ofTime(int hour, int minute) {
    Value v;
    v.kind = TypeKind::Time;
    v.hour = hour;
    v.minute = minute;
    return v;
}

Value Value::ofLocation(double lat, double lon, std::string display) {
    if (lat < -90.0 || lat > 90.0 || lon < -180.0 || lon > 180.0)
        throw Error("InvalidValue", "location coordinates out of range");
    Value v;
    v.kind = TypeKind::Location;
    v.lat = lat;
    v.lon = lon;
    v.display = std::move(display);
    return v;
}

Value Value::ofEntity(std::string entityType, std::string id, std::string display) {
    if (id.empty())
        throw Error("InvalidValue", "entity id must be non-empty");
    Value v;
    v.kind = TypeKind::Entity;
    v.entityType = std::move(entityType);
    v.text = std::move(id);
    v.display = std::move(display);
    return v;
}

Value Value::ofEnum(std::string variant) {
    Value v;
    v.kind = TypeKind::Enum;
    v.text = std::move(variant);
    return v;
}

Value Value::ofArray(std::vector<Value> values) {
    Value v;
    v.kind = TypeKind::Array;
    v.elems = std::move(values);
    return v;
}

const UnitTable& UnitTable::builtin() {
    static const UnitTable table = [] {
        UnitTable t;
        t.add("length", "m", 1, 0);
        t.add("length", "mm", 0.001, 0);
        t.add("length", "cm", 0.01, 0);
        t.add("length", "km", 1000, 0);
        t.add("length", "mi", 1609.344, 0);
        t.add("length", "ft", 0.3048, 0);
        t.add("duration", "s", 1, 0);
        t.add("duration", "ms", 0.001, 0);
        t.add("duration", "min", 60, 0);
        t.add("duration", "h", 3600, 0);
        t.add("duration", "day", 86400, 0);
        t.add("duration", "week", 604800, 0);
        t.add("temperature", "K", 1, 0);
        t.add("temperature", "C", 1, 273.15);
        t.add("temperature", "F", 5.0 / 9.0, 255.3722222222222);
        t.add("mass", "kg", 1, 0);
        t.add("mass", "g", 0.001, 0);
        t.add("mass", "mg", 1e-6, 0);
        t.add("mass", "lb", 0.45359237, 0);
        t.add("mass", "oz", 0.028349523125, 0);
        return t;
    }();
    return table;
}

void UnitTable::add(const std::string& unitClass, const std::string& symbol, double scale,
                    double offset) {
    if (scale <= 0)
        throw Error("InvalidUnit", "scale factor must be positive: " + symbol);
    if (units_.count(symbol))
        throw Error("InvalidUnit", "duplicate unit symbol: " + symbol);
    if (scale == 1.0 && offset == 0.0) {
        if (base_.count(unitClass))
            throw Error("InvalidUnit", "unit class " + unitClass + " already has a base unit");
        base_[unitClass] = symbol;
    }
    units_[symbol] = UnitDef{unitClass, scale, offset};
}

void UnitTable::loadFile(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("MissingDataFile", path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        std::istringstream ls(line);
        std::string unitClass, symbol;
        double scale, offset = 0;
        if (!(ls >> unitClass >> symbol >> scale))
            throw DataError("DataValidation", "bad unit table line: " + line);
        ls >> offset;
        add(unitClass, symbol, scale, offset);
    }
    for (const auto& [symbol, def] : units_)
        if (!base_.count(def.unitClass))
            throw DataError("DataValidation", "unit class without base unit: " + def.unitClass);
}

const UnitDef& UnitTable::lookup(const std::string& symbol) const {
    auto it = units_.find(symbol);
    if (it == units_.end())
        throw Error("UnknownUnit", symbol);
    return it->second;
}

const std::string& UnitTable::unitClassOf(const std::string& symbol) const {
    return lookup(symbol).unitClass;
}

const std::string& UnitTable::baseUnit(const std::string& unitClass) const {
    auto it = base_.find(unitClass);
    if (it == base_.end())
        throw Error("UnknownUnit", "no base unit for class " + unitClass);
    return it->second;
}

double UnitTable::toBase(double magnitude, const std::string& symbol) const {
    const UnitDef& def = lookup(symbol);
    return magnitude * def.scale + def.offset;
}

double UnitTable::fromBase(double baseMagnitude, const std::string& symbol) const {
    const UnitDef& def = lookup(symbol);
    return (baseMagnitude - def.offset) / def.scale;
}

EntityLexicon EntityLexicon::builtin() {
    EntityLexicon lex;
    auto add = [&](const std::string& type, const std::string& id, const std::string& display,
                   std::vector<std::string> aliases = {}) {
        lex.add(type, EntityEntry{id, display, std::move(aliases)});
    };
    // ISO 639-1 language codes.
    for (auto [id, name] : std::initializer_list<std::pair<const char*, const char*>>{
             {"en", "English"}, {"it", "Italian"}, {"fr", "French"}, {"de", "German"},
             {"es", "Spanish"}, {"pt", "Portuguese"}, {"zh", "Chinese"}, {"ja", "Japanese"},
             {"ko", "Korean"}, {"ru", "Russian"}, {"ar", "Arabic"}, {"hi", "Hindi"},
             {"nl", "Dutch"}, {"sv", "Swedish"}, {"no", "Norwegian"}, {"da", "Danish"},
             {"fi", "Finnish"}, {"pl", "Polish"}, {"tr", "Turkish"}, {"el", "Greek"},
             {"he", "Hebrew"}, {"th", "Thai"}, {"vi", "Vietnamese"}, {"cs", "Czech"}})
        add("tt:iso_lang_code", id, name);
    // ISO 3166-1 alpha-2 country codes.
    for (auto [id, name] : std::initializer_list<std::pair<const char*, const char*>>{
             {"us", "United States"}, {"it", "Italy"}, {"fr", "France"}, {"de", "Germany"},
             {"gb", "United Kingdom"}, {"es", "Spain"}, {"pt", "Portugal"}, {"cn", "China"},
             {"jp", "Japan"}, {"kr", "South Korea"}, {"ru", "Russia"}, {"in", "India"},
             {"nl", "Netherlands"}, {"se", "Sweden"}, {"no", "Norway"}, {"dk", "Denmark"},
             {"fi", "Finland"}, {"pl", "Poland"}, {"tr", "Turkey"}, {"gr", "Greece"},
             {"br", "Brazil"}, {"mx", "Mexico"}, {"ca", "Canada"}, {"au", "Australia"}})
        add("tt:country", id, name);
    lex.add("tt:country", EntityEntry{"it", "", {"italia"}});  // merges into the Italy row
    // Companies by stock ticker.
    for (auto [id, name] : std::initializer_list<std::pair<const char*, const char*>>{
             {"AAPL", "Apple"}, {"MSFT", "Microsoft"}, {"GOOG", "Google"}, {"AMZN", "Amazon"},
             {"META", "Meta"}, {"TSLA", "Tesla"}, {"NVDA", "Nvidia"}, {"NFLX", "Netflix"},
             {"IBM", "IBM"}, {"ORCL", "Oracle"}, {"INTC", "Intel"}, {"AMD", "AMD"},
             {"CRM", "Salesforce"}, {"ADBE", "Adobe"}, {"UBER", "Uber"}, {"ABNB", "Airbnb"},
             {"SHOP", "Shopify"}, {"SPOT", "Spotify"}, {"TWTR", "Twitter"}, {"SONY", "Sony"},
             {"BABA", "Alibaba"}, {"SAP", "SAP"}, {"CSCO", "Cisco"}, {"QCOM", "Qualcomm"}})
        add("tt:stock_ticker", id, name);
    return lex;
}

void EntityLexicon::add(const std::string& entityType, EntityEntry entry) {
    auto& list = byType_[entityType];
    for (auto& existing : list) {
        if (existing.id == entry.id) {
            // Merge aliases for a repeated id.
            for (auto& a : entry.aliases)
                existing.aliases.push_back(a);
            if (existing.display.empty())
                existing.display = entry.display;
            return;
        }
    }
    list.push_back(std::move(entry));
}

void EntityLexicon::loadFile(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("MissingDataFile", path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        std::istringstream ls(line);
        std::string type, id, display, aliases;
        if (!(ls >> type >> id >> display))
            throw DataError("DataValidation", "bad lexicon line: " + line);
        std::replace(display.begin(), display.end(), '_', ' ');
        EntityEntry entry{id, display, {}};
        if (ls >> aliases) {
            std::istringstream as(aliases);
            std::string alias;
            while (std::getline(as, alias, '|')) {
                std::replace(alias.begin(), alias.end(), '_', ' ');
                if (!alias.empty())
                    entry.aliases.push_back(alias);
            }
        }
        add(type, std::move(entry));
    }
}

const std::vector<EntityEntry>& EntityLexicon::entries(const std::string& entityType) const {
    static const std::vector<EntityEntry> empty;
    auto it = byType_.find(entityType);
    return it == byType_.end() ? empty : it->second;
}

Value EntityLexicon::lookup(const std::string& entityType, const std::string& text) const {
    std::string needle = normalizeString(text);
    std::vector<const EntityEntry*> matches;
    for (const auto& entry : entries(entityType)) {
        bool hit = normalizeString(entry.id) == needle ||
                   normalizeString(entry.display) == needle;
        for (const auto& alias : entry.aliases)
            hit = hit || normalizeString(alias) == needle;
        if (hit)
            matches.push_back(&entry);
    }
    if (matches.empty())
        throw Error("UnknownEntity", entityType + ": " + text);
    if (matches.size() > 1)
        throw Error("AmbiguousEntity", entityType + ": " + text);
    return Value::ofEntity(entityType, matches[0]->id, matches[0]->display);
}

std::string normalizeString(const std::string& s) {
    std::string out;
    bool pendingSpace = false;
    for (char c : s) {
        if (std::isspace((unsigned char)c)) {
            pendingSpace = !out.empty();
            continue;
        }
        if (pendingSpace) {
            out += ' ';
            pendingSpace = false;
        }
        out += (char)std::tolower((unsigned char)c);
    }
    return out;
}

Value convertMeasure(const Value& v, const std::string& targetUnit, const UnitTable& units) {
    if (v.kind != TypeKind::Measure)
        throw Error("TypeMismatch", "convertMeasure expects a measure");
    const UnitDef& from = units.lookup(v.text);
    const UnitDef& to = units.lookup(targetUnit);
    if (from.unitClass != to.unitClass)
        throw Error("UnitClassMismatch", v.text + " vs " + targetUnit);
    return Value::ofMeasure(units.fromBase(units.toBase(v.num, v.text), targetUnit),
                            targetUnit);
}

static bool numericEq(double a, double b) {
    if (a == b)
        return true;
    double scale = std::max(std::fabs(a), std::fabs(b));
    return std::fabs(a - b) <= 1e-9 * scale;
}

bool compareValues(const Value& a, const Value& b, CmpOp op, const UnitTable& units) {
    if (a.kind != b.kind)
        throw Error("TypeMismatch",
                    "cannot compare values of different kinds");
    bool ordered = false;
    double na = 0, nb = 0;
    switch (a.kind) {
    case TypeKind::Number:
        ordered = true;
        na = a.num;
        nb = b.num;
        break;
    case TypeKind::Measure:
        if (units.unitClassOf(a.text) != units.unitClassOf(b.text))
            throw Error("TypeMismatch", "measures of different unit classes");
        ordered = true;
        na = units.toBase(a.num, a.text);
        nb = units.toBase(b.num, b.text);
        break;
    case TypeKind::Currency:
        if (a.text != b.text)
            throw Error("TypeMismatch", "currencies with different codes");
        ordered = true;
        na = a.num;
        nb = b.num;
        break;
    case TypeKind::Date:
        ordered = true;
        na = (double)a.date.toSeconds();
        nb = (double)b.date.toSeconds();
        break;
    case TypeKind::Time:
        ordered = true;
        na = a.hour * 60 + a.minute;
        nb = b.hour * 60 + b.minute;
        break;
    default:
        break;
    }
    if (ordered) {
        switch (op) {
        case CmpOp::Eq: return numericEq(na, nb);
        case CmpOp::Ge: return na > nb || numericEq(na, nb);
        case CmpOp::Le: return na < nb || numericEq(na, nb);
        }
    }
    if (op != CmpOp::Eq)
        throw Error("UnsupportedOperator", "ordering is only defined for numeric-like types");
    switch (a.kind) {
    case TypeKind::Boolean:
        return a.boolean == b.boolean;
    case TypeKind::String:
        return normalizeString(a.text) == normalizeString(b.text);
    case TypeKind::Location:
        return numericEq(a.lat, b.lat) && numericEq(a.lon, b.lon);
    case TypeKind::Entity:
        if (a.entityType != b.entityType)
            throw Error("TypeMismatch", "entities of different types");
        return a.text == b.text;
    case TypeKind::Enum:
        return a.text == b.text;
    case TypeKind::Array: {
        if (a.elems.size() != b.elems.size())
            return false;
        for (size_t i = 0; i < a.elems.size(); i++)
            if (!compareValues(a.elems[i], b.elems[i], CmpOp::Eq, units))
                return false;
        return true;
    }
    default:
        throw Error("UnsupportedOperator", "unsupported comparison");
    }
}

Value geoDistance(const Value& a, const Value& b) {
    if (a.kind != TypeKind::Location || b.kind != TypeKind::Location)
        throw Error("TypeMismatch", "geoDistance expects locations");
    constexpr double kEarthRadius = 6371008.8;
    constexpr double kDeg = 3.14159265358979323846 / 180.0;
    double phi1 = a.lat * kDeg, phi2 = b.lat * kDeg;
    double dphi = (b.lat - a.lat) * kDeg;
    double dlam = (b.lon - a.lon) * kDeg;
    double s = std::sin(dphi / 2), t = std::sin(dlam / 2);
    double h = s * s + std::cos(phi1) * std::cos(phi2) * t * t;
    double d = 2 * kEarthRadius * std::asin(std::min(1.0, std::sqrt(h)));
    return Value::ofMeasure(d, "m");
}

TypeExpr typeOfValue(const Value& v, const UnitTable& units) {
    switch (v.kind) {
    case TypeKind::Boolean: return TypeExpr::boolean();
    case TypeKind::Number: return TypeExpr::number();
    case TypeKind::String: return TypeExpr::string();
    case TypeKind::Measure: return TypeExpr::measure(units.unitClassOf(v.text));
    case TypeKind::Currency: return TypeExpr::currency();
    case TypeKind::Date: return TypeExpr::date();
    case TypeKind::Time: return TypeExpr::time();
    case TypeKind::Location: return TypeExpr::location();
    case TypeKind::Entity: return TypeExpr::entity(v.entityType);
    case TypeKind::Enum: {
        TypeExpr t = TypeExpr::ofKind(TypeKind::Enum);
        t.variants.push_back(v.text);
        return t;
    }
    case TypeKind::Array: {
        if (v.elems.empty())
            throw Error("TypeMismatch", "cannot infer element type of an empty array");
        return TypeExpr::array(typeOfValue(v.elems[0], units));
    }
    }
    throw Error("TypeMismatch", "unknown value kind");
}

std::string formatNumber(double d) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), d);
    return std::string(buf, res.ptr);
}

} // namespace dlg
