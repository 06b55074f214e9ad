#include "dlg/skills.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "dlg/syntax.hpp"
#include "httplib.h"
#include "json.hpp"

namespace dlg {

namespace {

using nlohmann::json;

DateValue parseIsoDate(const std::string& s) {
    DateValue d;
    int n = std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d", &d.year, &d.month, &d.day, &d.hour,
                        &d.minute, &d.second);
    if (n != 3 && n != 6)
        throw Error("DataValidation", "bad date " + s);
    d.hasTime = n == 6;
    return d;
}

Value jsonToValue(const json& j, const TypeExpr& type, const UnitTable& units) {
    auto fail = [&](const std::string& got) -> Value {
        throw Error("DataValidation", "expected " + type.str() + ", got " + got);
    };
    switch (type.kind) {
    case TypeKind::Boolean:
        return j.is_boolean() ? Value::ofBool(j.get<bool>()) : fail(j.dump());
    case TypeKind::Number:
        return j.is_number() ? Value::ofNumber(j.get<double>()) : fail(j.dump());
    case TypeKind::String:
        return j.is_string() ? Value::ofString(j.get<std::string>()) : fail(j.dump());
    case TypeKind::Measure: {
        if (j.is_number())
            return Value::ofMeasure(j.get<double>(), units.baseUnit(type.unitClass));
        if (!j.is_object() || !j.contains("value") || !j.contains("unit"))
            return fail(j.dump());
        std::string unit = j["unit"].get<std::string>();
        if (!units.known(unit) || units.unitClassOf(unit) != type.unitClass)
            return fail("unit " + unit);
        return Value::ofMeasure(j["value"].get<double>(), unit);
    }
    case TypeKind::Currency:
        if (j.is_number())
            return Value::ofCurrency(j.get<double>(), "USD");
        if (!j.is_object() || !j.contains("value") || !j.contains("code"))
            return fail(j.dump());
        return Value::ofCurrency(j["value"].get<double>(), j["code"].get<std::string>());
    case TypeKind::Date:
        return j.is_string() ? Value::ofDate(parseIsoDate(j.get<std::string>()))
                             : fail(j.dump());
    case TypeKind::Time: {
        if (!j.is_string())
            return fail(j.dump());
        int h = 0, m = 0;
        if (std::sscanf(j.get<std::string>().c_str(), "%d:%d", &h, &m) != 2)
            return fail(j.dump());
        return Value::ofTime(h, m);
    }
    case TypeKind::Location:
        if (!j.is_object() || !j.contains("lat") || !j.contains("lon"))
            return fail(j.dump());
        return Value::ofLocation(j["lat"].get<double>(), j["lon"].get<double>(),
                                 j.value("display", std::string()));
    case TypeKind::Entity:
        if (j.is_string())
            return Value::ofEntity(type.entityType, j.get<std::string>());
        if (!j.is_object() || !j.contains("id"))
            return fail(j.dump());
        return Value::ofEntity(type.entityType, j["id"].get<std::string>(),
                               j.value("display", std::string()));
    case TypeKind::Enum: {
        if (!j.is_string())
            return fail(j.dump());
        std::string v = j.get<std::string>();
        if (std::find(type.variants.begin(), type.variants.end(), v) == type.variants.end())
            return fail(v);
        return Value::ofEnum(v);
    }
    case TypeKind::Array: {
        if (!j.is_array())
            return fail(j.dump());
        std::vector<Value> elems;
        for (const auto& e : j)
            elems.push_back(jsonToValue(e, type.elementType(), units));
        return Value::ofArray(std::move(elems));
    }
    }
    return fail(j.dump());
}

Record recordFromJson(const json& obj, const FunctionSig& sig, const UnitTable& units) {
    if (!obj.is_object())
        throw Error("DataValidation", "row is not an object: " + obj.dump());
    Record rec;
    for (const auto& [key, val] : obj.items()) {
        if (key == "$query")
            continue;
        const Param* p = sig.findParam(key);
        if (!p || p->dir != ParamDir::Out)
            throw Error("DataValidation",
                        sig.name + ": unknown field " + key + " in " + obj.dump());
        if (val.is_null())
            continue;  // explicit null: absent field
        try {
            rec.set(key, jsonToValue(val, p->type, units));
        } catch (const Error& e) {
            throw Error("DataValidation", sig.name + "." + key + ": " + e.what());
        }
    }
    return rec;
}

void checkUniqueIds(const std::string& queryName, const std::vector<Record>& rows) {
    std::set<std::string> ids;
    for (const auto& r : rows) {
        const Value* id = r.get("id");
        if (!id)
            continue;
        if (!ids.insert(printValue(*id)).second)
            throw Error("DataValidation",
                        queryName + ": duplicate id " + printValue(*id));
    }
}

json outcomeArgsToJson(const std::vector<std::pair<std::string, Value>>& args) {
    json out = json::object();
    for (const auto& [name, v] : args)
        out[name] = printValue(v);
    return out;
}

} // namespace

Value valueFromJsonText(const std::string& jsonText, const TypeExpr& type,
                        const UnitTable& units) {
    json j;
    try {
        j = json::parse(jsonText);
    } catch (const std::exception& e) {
        throw Error("DataValidation", e.what());
    }
    return jsonToValue(j, type, units);
}

// --- DatasetBackend ----------------------------------------------------------

DatasetBackend::DatasetBackend(const ResolvedClass& cls) : cls_(cls) {
    for (const auto& f : cls.functions)
        if (f.kind == FunctionKind::Query) {
            tables_[f.name];
            versions_[f.name] = 1;
        }
}

DatasetBackend::DatasetBackend(const ResolvedClass& cls, const std::string& dataFile,
                               const UnitTable& units)
    : DatasetBackend(cls) {
    std::ifstream in(dataFile);
    if (!in)
        throw Error("MissingDataFile", dataFile);
    // Sole query in the class may omit the $query discriminator.
    std::string soleQuery;
    if (tables_.size() == 1)
        soleQuery = tables_.begin()->first;
    std::string line;
    size_t lineNo = 0;
    while (std::getline(in, line)) {
        lineNo++;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const std::exception& e) {
            throw Error("DataValidation",
                        dataFile + ":" + std::to_string(lineNo) + ": " + e.what());
        }
        std::string queryName = obj.value("$query", soleQuery);
        auto it = tables_.find(queryName);
        if (it == tables_.end())
            throw Error("DataValidation", dataFile + ":" + std::to_string(lineNo) +
                                              ": unknown query " + queryName);
        const FunctionSig* sig = cls_.findFunction(queryName);
        it->second.push_back(recordFromJson(obj, *sig, units));
    }
    for (const auto& [name, rows] : tables_)
        checkUniqueIds(name, rows);
}

std::vector<Record>& DatasetBackend::table(const std::string& queryName) {
    auto it = tables_.find(queryName);
    if (it == tables_.end())
        throw Error("UnknownQuery", cls_.name + "." + queryName);
    return it->second;
}

const std::vector<Record>& DatasetBackend::rows(const std::string& queryName) {
    return table(queryName);
}

long DatasetBackend::version(const std::string& queryName) {
    table(queryName);
    return versions_[queryName];
}

ActionOutcome DatasetBackend::invoke(const std::string& actionName,
                                     const std::vector<std::pair<std::string, Value>>& args) {
    (void)args;
    const FunctionSig* sig = cls_.findFunction(actionName);
    if (!sig || sig->kind != FunctionKind::Action)
        return {false, cls_.name + "." + actionName + " is not an action", {}};
    return {true, "@" + cls_.name + "." + actionName + " ok", {}};
}

void DatasetBackend::mutate(const std::string& queryName, const Mutation& m) {
    std::vector<Record>& rows = table(queryName);
    switch (m.kind) {
    case Mutation::Kind::Insert:
        rows.push_back(m.row);
        break;
    case Mutation::Kind::Delete:
        rows.erase(std::remove_if(rows.begin(), rows.end(),
                                  [&](const Record& r) {
                                      const Value* id = r.get("id");
                                      return id && *id == m.id;
                                  }),
                   rows.end());
        break;
    case Mutation::Kind::Update:
        for (auto& r : rows) {
            const Value* id = r.get("id");
            if (id && *id == m.id)
                r.set(m.field, m.value);
        }
        break;
    case Mutation::Kind::Noop:
        break;
    }
    versions_[queryName]++;
}

void DatasetBackend::setRows(const std::string& queryName, std::vector<Record> rows) {
    checkUniqueIds(queryName, rows);
    table(queryName) = std::move(rows);
    versions_[queryName]++;
}

// --- MockRestServer ----------------------------------------------------------

struct MockRestServer::Impl {
    std::string dir;
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::mutex mutex;
    std::map<std::string, long> versions;
    std::atomic<int> actionCalls{0};
};

MockRestServer::MockRestServer(const std::string& fixtureDir) : impl_(new Impl) {
    impl_->dir = fixtureDir;
    Impl* impl = impl_.get();

    impl->server.Get(R"(/(\w+)\.json)", [impl](const httplib::Request& req,
                                               httplib::Response& res) {
        std::ifstream in(impl->dir + "/" + req.matches[1].str() + ".json");
        if (!in) {
            res.status = 404;
            return;
        }
        std::string body((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
        res.set_content(body, "application/json");
    });
    impl->server.Get(R"(/(\w+)\.version)", [impl](const httplib::Request& req,
                                                  httplib::Response& res) {
        std::lock_guard<std::mutex> lock(impl->mutex);
        long v = impl->versions.try_emplace(req.matches[1].str(), 1).first->second;
        res.set_content(std::to_string(v), "text/plain");
    });
    impl->server.Post(R"(/(\w+))", [impl](const httplib::Request& req,
                                          httplib::Response& res) {
        (void)req;
        impl->actionCalls++;
        res.set_content(R"({"success": true, "message": "ok"})", "application/json");
    });

    impl->port = impl->server.bind_to_any_port("127.0.0.1");
    if (impl->port <= 0)
        throw Error("BackendFailure", "mock server could not bind");
    impl->thread = std::thread([impl] { impl->server.listen_after_bind(); });
    impl->server.wait_until_ready();
}

MockRestServer::~MockRestServer() {
    impl_->server.stop();
    impl_->thread.join();
}

std::string MockRestServer::url() const {
    return "http://127.0.0.1:" + std::to_string(impl_->port);
}

void MockRestServer::bumpVersion(const std::string& queryName) {
    std::lock_guard<std::mutex> lock(impl_->mutex);
    long& v = impl_->versions.try_emplace(queryName, 1).first->second;
    v++;
}

int MockRestServer::actionCalls() const { return impl_->actionCalls; }

// --- SimRestBackend ----------------------------------------------------------

struct SimRestBackend::Impl {
    const ResolvedClass& cls;
    const UnitTable& units;
    httplib::Client client;
    std::map<std::string, std::vector<Record>> cache;

    Impl(const ResolvedClass& c, const std::string& baseUrl, const UnitTable& u)
        : cls(c), units(u), client(baseUrl) {}
};

SimRestBackend::SimRestBackend(const ResolvedClass& cls, const std::string& baseUrl,
                               const UnitTable& units)
    : impl_(new Impl(cls, baseUrl, units)) {}

SimRestBackend::~SimRestBackend() = default;

const std::vector<Record>& SimRestBackend::rows(const std::string& queryName) {
    const FunctionSig* sig = impl_->cls.findFunction(queryName);
    if (!sig || sig->kind != FunctionKind::Query)
        throw Error("UnknownQuery", impl_->cls.name + "." + queryName);
    auto res = impl_->client.Get("/" + queryName + ".json");
    if (!res || res->status != 200)
        throw Error("BackendFailure", "GET " + queryName + ".json failed");
    json body;
    try {
        body = json::parse(res->body);
    } catch (const std::exception& e) {
        throw Error("DataValidation", e.what());
    }
    if (!body.is_array())
        throw Error("DataValidation", queryName + ".json is not an array");
    std::vector<Record> out;
    for (const auto& obj : body)
        out.push_back(recordFromJson(obj, *sig, impl_->units));
    checkUniqueIds(queryName, out);
    return impl_->cache[queryName] = std::move(out);
}

long SimRestBackend::version(const std::string& queryName) {
    auto res = impl_->client.Get("/" + queryName + ".version");
    if (!res || res->status != 200)
        throw Error("BackendFailure", "GET " + queryName + ".version failed");
    return std::stol(res->body);
}

ActionOutcome SimRestBackend::invoke(const std::string& actionName,
                                     const std::vector<std::pair<std::string, Value>>& args) {
    auto res = impl_->client.Post("/" + actionName, outcomeArgsToJson(args).dump(),
                                  "application/json");
    if (!res || res->status != 200)
        return {false, "POST " + actionName + " failed", {}};
    json body = json::parse(res->body, nullptr, false);
    if (body.is_discarded() || !body.value("success", false))
        return {false, body.is_object() ? body.value("message", "") : "bad response", {}};
    return {true, body.value("message", "ok"), {}};
}

// --- SkillSet ----------------------------------------------------------------

void SkillSet::loadLibrary(const Library& lib, const std::string& baseDir) {
    resolveInto(registry_, lib);
    for (const auto& def : lib.classes) {
        const ResolvedClass& cls = registry_.cls(def.name);
        if (cls.isAbstract || !cls.loader)
            continue;
        switch (cls.loader->kind) {
        case LoaderKind::Dataset: {
            std::string file = cls.loader->arg("file");
            if (file.empty())
                throw Error("MissingDataFile", "@" + cls.name + " dataset loader has no file");
            std::filesystem::path path(file);
            if (path.is_relative())
                path = std::filesystem::path(baseDir) / path;
            registerBackend(cls.name,
                            std::make_shared<DatasetBackend>(cls, path.string()));
            break;
        }
        case LoaderKind::SimRest: {
            std::string url = cls.loader->arg("url");
            if (url.empty())
                throw Error("DataValidation", "@" + cls.name + " simrest loader has no url");
            registerBackend(cls.name, std::make_shared<SimRestBackend>(cls, url));
            break;
        }
        case LoaderKind::External:
            break;  // signatures only
        }
    }
}

void SkillSet::loadFile(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw Error("MissingDataFile", path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    loadLibrary(parseLibrary(text), std::filesystem::path(path).parent_path().string());
}

void SkillSet::loadDirectory(const std::string& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.path().extension() == ".skill")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    // One merged library so classes may extend across files.
    Library merged;
    for (const auto& file : files) {
        std::ifstream in(file);
        std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
        Library lib = parseLibrary(text);
        for (auto& c : lib.classes)
            merged.classes.push_back(std::move(c));
        for (auto& d : lib.actDecls)
            merged.actDecls.push_back(std::move(d));
    }
    loadLibrary(merged, dir);
}

void SkillSet::registerBackend(const std::string& cls, std::shared_ptr<Backend> backend) {
    if (!registry_.findClass(cls))
        throw Error("UnknownClass", "@" + cls);
    if (!backends_.emplace(cls, std::move(backend)).second)
        throw Error("DuplicateSkill", "@" + cls + " already has a backend");
}

Backend* SkillSet::backend(const std::string& cls) {
    auto it = backends_.find(cls);
    return it == backends_.end() ? nullptr : it->second.get();
}

DatasetBackend* SkillSet::dataset(const std::string& cls) {
    return dynamic_cast<DatasetBackend*>(backend(cls));
}

const std::vector<Record>& SkillSet::rows(const FunctionRef& query) {
    Backend* b = backend(query.cls);
    if (!b)
        throw Error("NonConcreteClass", query.str() + " has no backend");
    return b->rows(query.name);
}

long SkillSet::version(const FunctionRef& query) {
    Backend* b = backend(query.cls);
    if (!b)
        throw Error("NonConcreteClass", query.str() + " has no backend");
    return b->version(query.name);
}

ActionOutcome SkillSet::invoke(const FunctionRef& action,
                               const std::vector<std::pair<std::string, Value>>& args) {
    Backend* b = backend(action.cls);
    if (!b)
        throw Error("NonConcreteClass", action.str() + " has no backend");
    ActionOutcome outcome = b->invoke(action.name, args);
    if (outcome.success)
        effectLog_.push_back({action.cls, action.name, args});
    return outcome;
}

} // namespace dlg
