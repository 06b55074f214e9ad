#pragma once

#include <functional>
#include <memory>

#include "dlg/typecheck.hpp"

namespace dlg {

// One backend row. An absent field is null; filters treat null as
// non-matching.
struct Record {
    std::map<std::string, Value> fields;

    const Value* get(const std::string& name) const {
        auto it = fields.find(name);
        return it == fields.end() ? nullptr : &it->second;
    }
    void set(std::string name, Value v) { fields[std::move(name)] = std::move(v); }

    bool operator==(const Record&) const = default;
};

struct ActionOutcome {
    bool success = true;
    std::string message;
    std::map<std::string, Value> outputs;
};

struct EffectEntry {
    std::string cls;
    std::string action;
    std::vector<std::pair<std::string, Value>> args;
};

// Query + action interface one concrete skill implements.
class Backend {
public:
    virtual ~Backend() = default;
    virtual const std::vector<Record>& rows(const std::string& queryName) = 0;
    // Monotonically nondecreasing per query; monitors poll it.
    virtual long version(const std::string& queryName) = 0;
    virtual ActionOutcome invoke(const std::string& actionName,
                                 const std::vector<std::pair<std::string, Value>>& args) = 0;
};

// Parse one JSON (nlohmann) value into a Value of the given type. Exposed for
// backends and tests; throws Error("DataValidation", ...).
Value valueFromJsonText(const std::string& jsonText, const TypeExpr& type,
                        const UnitTable& units = UnitTable::builtin());

struct Mutation {
    enum class Kind { Insert, Delete, Update, Noop };
    Kind kind = Kind::Noop;
    Record row;         // Insert
    Value id;           // Delete / Update: matched against the `id` field
    std::string field;  // Update
    Value value;        // Update
};

// In-memory tables loaded from a JSON-lines file. Rows validate against the
// class signatures at load time; actions are simulated (always succeed).
class DatasetBackend : public Backend {
public:
    DatasetBackend(const ResolvedClass& cls, const std::string& dataFile,
                   const UnitTable& units = UnitTable::builtin());
    // Empty backend for programmatic fixtures.
    explicit DatasetBackend(const ResolvedClass& cls);

    const std::vector<Record>& rows(const std::string& queryName) override;
    long version(const std::string& queryName) override;
    ActionOutcome invoke(const std::string& actionName,
                         const std::vector<std::pair<std::string, Value>>& args) override;

    // Test/monitor hook: applies the mutation and always bumps the version.
    void mutate(const std::string& queryName, const Mutation& m);
    void setRows(const std::string& queryName, std::vector<Record> rows);

private:
    const ResolvedClass& cls_;
    std::map<std::string, std::vector<Record>> tables_;
    std::map<std::string, long> versions_;

    std::vector<Record>& table(const std::string& queryName);
};

// Hermetic mock REST fixture server; serves <dir>/<query>.json, a version
// counter per query, and accepts action POSTs. Runs on an ephemeral port.
class MockRestServer {
public:
    explicit MockRestServer(const std::string& fixtureDir);
    ~MockRestServer();

    std::string url() const;  // http://127.0.0.1:<port>
    void bumpVersion(const std::string& queryName);
    int actionCalls() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Talks to the mock server: GET <base>/<query>.json, GET <base>/<query>.version,
// POST <base>/<action>.
class SimRestBackend : public Backend {
public:
    SimRestBackend(const ResolvedClass& cls, const std::string& baseUrl,
                   const UnitTable& units = UnitTable::builtin());
    ~SimRestBackend();

    const std::vector<Record>& rows(const std::string& queryName) override;
    long version(const std::string& queryName) override;
    ActionOutcome invoke(const std::string& actionName,
                         const std::vector<std::pair<std::string, Value>>& args) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Resolved classes plus their backends plus the session effect log.
class SkillSet {
public:
    Registry& registry() { return registry_; }
    const Registry& registry() const { return registry_; }

    // Parses a .skill manifest (library syntax), resolves it into the
    // registry, and constructs backends for dataset/simrest loaders. Relative
    // dataset paths resolve against the manifest's directory.
    void loadFile(const std::string& path);
    // Loads every *.skill in the directory as one library (so classes may
    // extend across files).
    void loadDirectory(const std::string& dir);
    void loadLibrary(const Library& lib, const std::string& baseDir);

    // Throws Error("DuplicateSkill") when the class already has a backend.
    void registerBackend(const std::string& cls, std::shared_ptr<Backend> backend);
    Backend* backend(const std::string& cls);
    DatasetBackend* dataset(const std::string& cls);

    // Backend access used by the executor; logs successful invocations.
    const std::vector<Record>& rows(const FunctionRef& query);
    long version(const FunctionRef& query);
    ActionOutcome invoke(const FunctionRef& action,
                         const std::vector<std::pair<std::string, Value>>& args);

    const std::vector<EffectEntry>& effectLog() const { return effectLog_; }

private:
    Registry registry_;
    std::map<std::string, std::shared_ptr<Backend>> backends_;
    std::vector<EffectEntry> effectLog_;
};

} // namespace dlg
