#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dlg/errors.hpp"

namespace dlg {

enum class TypeKind {
    Boolean,
    Number,
    String,
    Measure,
    Currency,
    Date,
    Time,
    Location,
    Entity,
    Enum,
    Array,
};

// Static type of a value. Array element is stored as a 0/1-element vector so
// the type stays a regular value type with defaulted equality.
struct TypeExpr {
    TypeKind kind = TypeKind::Boolean;
    std::string unitClass;              // Measure
    std::string entityType;             // Entity, qualified as ns:Name
    std::vector<std::string> variants;  // Enum
    std::vector<TypeExpr> element;      // Array

    static TypeExpr ofKind(TypeKind k) {
        TypeExpr t;
        t.kind = k;
        return t;
    }
    static TypeExpr boolean() { return ofKind(TypeKind::Boolean); }
    static TypeExpr number() { return ofKind(TypeKind::Number); }
    static TypeExpr string() { return ofKind(TypeKind::String); }
    static TypeExpr measure(std::string unitClass) {
        TypeExpr t = ofKind(TypeKind::Measure);
        t.unitClass = std::move(unitClass);
        return t;
    }
    static TypeExpr currency() { return ofKind(TypeKind::Currency); }
    static TypeExpr date() { return ofKind(TypeKind::Date); }
    static TypeExpr time() { return ofKind(TypeKind::Time); }
    static TypeExpr location() { return ofKind(TypeKind::Location); }
    static TypeExpr entity(std::string entityType) {
        TypeExpr t = ofKind(TypeKind::Entity);
        t.entityType = std::move(entityType);
        return t;
    }
    static TypeExpr enumeration(std::vector<std::string> variants);
    static TypeExpr array(TypeExpr elementType);

    const TypeExpr& elementType() const { return element.at(0); }

    bool operator==(const TypeExpr&) const = default;

    std::string str() const;
};

struct DateValue {
    int year = 1970;
    int month = 1;
    int day = 1;
    bool hasTime = false;
    int hour = 0;
    int minute = 0;
    int second = 0;

    // Seconds since 1970-01-01T00:00:00, missing time treated as midnight.
    long long toSeconds() const;

    bool operator==(const DateValue&) const = default;
};

// Runtime value. One fat struct with a tag; unused fields stay at their
// defaults so defaulted equality is structural equality.
struct Value {
    TypeKind kind = TypeKind::Boolean;
    bool boolean = false;
    double num = 0.0;          // Number; Measure magnitude in its unit; Currency amount
    std::string text;          // String text; Measure unit; Currency code; Enum variant; Entity id
    std::string display;       // Entity / Location display
    std::string entityType;    // Entity
    DateValue date;
    int hour = 0, minute = 0;  // Time
    double lat = 0.0, lon = 0.0;
    std::vector<Value> elems;  // Array

    static Value ofBool(bool b);
    static Value ofNumber(double n);
    static Value ofString(std::string s);
    // `magnitude` is expressed in `unit`; canonicalization rewrites to the base unit.
    static Value ofMeasure(double magnitude, std::string unit);
    // Environment references parse as placeholder values and are substituted
    // with the execution environment's location/date before evaluation.
    static Value envHere();
    static Value envNow();
    bool isEnvRef() const {
        return (kind == TypeKind::Location && text == "$here") ||
               (kind == TypeKind::Date && text == "$now");
    }
    static Value ofCurrency(double amount, std::string code);
    static Value ofDate(DateValue d);
    static Value ofTime(int hour, int minute);
    static Value ofLocation(double lat, double lon, std::string display = {});
    static Value ofEntity(std::string entityType, std::string id, std::string display = {});
    static Value ofEnum(std::string variant);
    static Value ofArray(std::vector<Value> values);

    bool operator==(const Value&) const = default;
};

struct UnitDef {
    std::string unitClass;
    double scale = 1.0;
    double offset = 0.0;
};

// Conversion table: base = magnitude * scale + offset.
class UnitTable {
public:
    static const UnitTable& builtin();

    void add(const std::string& unitClass, const std::string& symbol, double scale,
             double offset);
    void loadFile(const std::string& path);

    bool known(const std::string& symbol) const { return units_.count(symbol) > 0; }
    const UnitDef& lookup(const std::string& symbol) const;
    const std::string& unitClassOf(const std::string& symbol) const;
    const std::string& baseUnit(const std::string& unitClass) const;
    bool knownClass(const std::string& unitClass) const { return base_.count(unitClass) > 0; }

    double toBase(double magnitude, const std::string& symbol) const;
    double fromBase(double baseMagnitude, const std::string& symbol) const;

private:
    std::map<std::string, UnitDef> units_;
    std::map<std::string, std::string> base_;
};

struct EntityEntry {
    std::string id;
    std::string display;
    std::vector<std::string> aliases;
};

class EntityLexicon {
public:
    static EntityLexicon builtin();

    void add(const std::string& entityType, EntityEntry entry);
    void loadFile(const std::string& path);

    bool knownType(const std::string& entityType) const {
        return byType_.count(entityType) > 0;
    }
    const std::vector<EntityEntry>& entries(const std::string& entityType) const;

    // Exact alias match, case-insensitive. Throws UnknownEntity / AmbiguousEntity.
    Value lookup(const std::string& entityType, const std::string& text) const;

private:
    std::map<std::string, std::vector<EntityEntry>> byType_;
};

enum class CmpOp { Eq, Ge, Le };

// Lowercase, trim, collapse internal whitespace runs to single spaces.
std::string normalizeString(const std::string& s);

Value convertMeasure(const Value& v, const std::string& targetUnit,
                     const UnitTable& units = UnitTable::builtin());

bool compareValues(const Value& a, const Value& b, CmpOp op,
                   const UnitTable& units = UnitTable::builtin());

// Haversine great-circle distance in meters.
Value geoDistance(const Value& a, const Value& b);

// Static type of a runtime value; Enum variant lists are not recoverable from
// a value alone, so Enum comes back with just the observed variant.
TypeExpr typeOfValue(const Value& v, const UnitTable& units = UnitTable::builtin());

std::string formatNumber(double d);

} // namespace dlg
