#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "dlg/canonical.hpp"
#include "dlg/synth.hpp"
#include "dlg/syntax.hpp"
#include "json.hpp"

using namespace dlg;

namespace {

constexpr int kOk = 0;
constexpr int kLanguageError = 1;
constexpr int kUsageError = 2;
constexpr int kActionFailure = 3;

std::string readFile(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw Error("IoError", "cannot open: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

bool isIoCode(const std::string& code) {
    return code == "IoError" || code == "MalformedTsv";
}

// `dlgc.conf` key=value defaults, searched upward from cwd. Flags and
// environment variables override it.
std::map<std::string, std::string> loadConfig() {
    namespace fs = std::filesystem;
    std::map<std::string, std::string> out;
    fs::path dir = fs::current_path();
    for (;;) {
        fs::path candidate = dir / "dlgc.conf";
        if (fs::exists(candidate)) {
            std::ifstream in(candidate);
            for (std::string line; std::getline(in, line);) {
                if (line.empty() || line[0] == '#')
                    continue;
                size_t eq = line.find('=');
                if (eq != std::string::npos)
                    out[line.substr(0, eq)] = line.substr(eq + 1);
            }
            break;
        }
        if (dir == dir.root_path())
            break;
        dir = dir.parent_path();
    }
    return out;
}

struct Settings {
    std::string skills;
    std::string templates;
    std::string here;
    std::string now;
    std::string out = ".";
    unsigned seed = 1;

    void resolve() {
        std::map<std::string, std::string> conf = loadConfig();
        auto fill = [&](std::string& field, const char* env, const char* key,
                        const std::string& fallback) {
            if (!field.empty())
                return;
            if (env)
                if (const char* v = std::getenv(env); v && *v) {
                    field = v;
                    return;
                }
            if (auto it = conf.find(key); it != conf.end())
                field = it->second;
            else
                field = fallback;
        };
        fill(skills, "DLGC_SKILLS", "skills", "data/skills");
        fill(templates, nullptr, "templates", "data/templates");
        if (const char* v = std::getenv("DLGC_SEED"); v && *v)
            seed = (unsigned)std::stoul(v);
        else if (auto it = conf.find("seed"); it != conf.end())
            seed = (unsigned)std::stoul(it->second);
    }
};

SkillSet loadSkills(const Settings& s) {
    SkillSet skills;
    skills.loadDirectory(s.skills);
    return skills;
}

Env makeEnv(const Settings& s) {
    Env env;
    env.rngSeed = s.seed;
    if (!s.here.empty()) {
        size_t comma = s.here.find(',');
        if (comma == std::string::npos)
            throw Error("IoError", "--here expects lat,lon");
        env.here = Value::ofLocation(std::stod(s.here.substr(0, comma)),
                                     std::stod(s.here.substr(comma + 1)));
    }
    if (!s.now.empty()) {
        int y, m, d;
        if (std::sscanf(s.now.c_str(), "%d-%d-%d", &y, &m, &d) != 3)
            throw Error("IoError", "--now expects YYYY-MM-DD");
        env.now = {y, m, d, false, 0, 0, 0};
    }
    return env;
}

int cmdParse(const std::string& file) {
    Program p = parseProgram(readFile(file));
    std::cout << dumpProgram(p);
    return kOk;
}

int cmdCheck(const std::string& file, const Settings& s) {
    SkillSet skills = loadSkills(s);
    Program p = parseProgram(readFile(file));
    TypeCheckResult r = typecheckProgram(p, skills.registry());
    for (const TypeError& e : r.errors)
        std::cerr << file << ":" << e.span.line << ":" << e.span.column << ": " << e.code
                  << ": " << e.path << ": " << e.message << "\n";
    return r.ok() ? kOk : kLanguageError;
}

int cmdCanon(const std::string& file, const Settings& s) {
    SkillSet skills = loadSkills(s);
    TypedProgram typed =
        typecheckOrThrow(parseProgram(readFile(file)), skills.registry());
    std::cout << canonicalize(typed).bytes << "\n";
    return kOk;
}

nlohmann::json recordJson(const Record& r) {
    nlohmann::json obj = nlohmann::json::object();
    for (const auto& [name, value] : r.fields)
        obj[name] = printValue(value);
    return obj;
}

int cmdExec(const std::string& file, const Settings& s) {
    SkillSet skills = loadSkills(s);
    Env env = makeEnv(s);
    TypedProgram typed =
        typecheckOrThrow(parseProgram(readFile(file)), skills.registry());
    ProgramResult result = executeProgram(typed, skills, env);
    bool failed = false;
    for (size_t i = 0; i < result.statements.size(); i++) {
        for (const Record& row : result.statements[i].rows) {
            nlohmann::json line = {{"statement", i}, {"row", recordJson(row)}};
            std::cout << line.dump() << "\n";
        }
        for (const ActionOutcome& o : result.statements[i].outcomes) {
            nlohmann::json line = {{"statement", i},
                                   {"outcome",
                                    {{"success", o.success}, {"message", o.message}}}};
            std::cout << line.dump() << "\n";
            failed |= !o.success;
        }
    }
    return failed ? kActionFailure : kOk;
}

ParserIndex buildIndex(SkillSet& skills, const Settings& s) {
    SynthOptions opts;
    opts.seed = s.seed;
    return buildParserIndex(expand(skills, loadTemplates(s.templates), opts));
}

// One REPL/replay user turn against the live state. Mirrors the scenario
// runner: yes/no confirm, raw programs with '@', utterances via the index
// with a supply-slot fallback.
bool applyReplTurn(DialogueState& state, const std::string& line, SkillSet& skills,
                   const Env& env, const ParserIndex& index) {
    std::string norm = normalizeUtterance(line);
    if (norm == "yes" || norm == "no") {
        state = confirmOrReject(state, norm == "yes", skills, env);
        return true;
    }
    if (!line.empty() && line[0] == '@') {
        state = applyUserTurn(state, typecheckOrThrow(parseProgram(line), skills.registry()),
                              skills, env);
        return true;
    }
    try {
        TypedProgram p = resolveUtterance(state, line, index, skills);
        state = applyUserTurn(state, p, skills, env);
        return true;
    } catch (const Error&) {
        if (std::optional<DialogueState> next = supplySlot(state, line, skills, env)) {
            state = *next;
            return true;
        }
        return false;
    }
}

int cmdRepl(const Settings& s, const std::string& replay, bool showState) {
    SkillSet skills = loadSkills(s);
    Env env = makeEnv(s);
    ParserIndex index = buildIndex(skills, s);

    if (!replay.empty()) {
        ScenarioResult r = runScenarioFile(replay, skills, env, &index);
        for (const ScenarioTurn& turn : r.turns) {
            std::cout << "U: " << turn.user << "\n";
            std::cout << "A: " << turn.agent.label() << " | " << turn.agent.utterance
                      << "\n";
            if (showState)
                std::cout << "-- state: " << summarize(turn.state) << "\n";
        }
        if (!r.ok)
            std::cerr << "replay mismatch: " << r.message << "\n";
        return r.ok ? kOk : kLanguageError;
    }

    DialogueState state;
    std::cout << "A: " << agentPolicy(state, skills).utterance << "\n";
    for (std::string line; std::cout << "U: " << std::flush, std::getline(std::cin, line);) {
        if (line == "\\quit")
            return kOk;
        if (line.empty())
            continue;
        bool understood = false;
        try {
            understood = applyReplTurn(state, line, skills, env, index);
        } catch (const Error& e) {
            std::cout << "A: Sorry, that did not work (" << e.what() << ").\n";
            continue;
        }
        if (!understood) {
            std::cout << "A: Sorry, I did not understand.\n";
            continue;
        }
        AgentTurn agent = agentPolicy(state, skills);
        std::cout << "A: " << agent.utterance << "\n";
        if (showState)
            std::cout << "-- state: " << summarize(state) << "\n";
        state = agent.newState;
    }
    return kOk;
}

int cmdSynth(const Settings& s, int depth, long limit, int nDialogues) {
    SkillSet skills = loadSkills(s);
    std::filesystem::create_directories(s.out);
    std::string datasetPath = s.out + "/dataset.tsv";

    if (limit == 0) {
        std::ofstream(datasetPath).flush();
        std::cerr << "warning: --limit 0 writes an empty dataset\n";
        std::cout << "wrote 0 pairs to " << datasetPath << "\n";
        return kOk;
    }

    SynthOptions opts;
    opts.depth = depth;
    opts.limit = limit < 0 ? 0 : (size_t)limit;
    opts.seed = s.seed;
    std::vector<SynthPair> pairs = expand(skills, loadTemplates(s.templates), opts);

    std::ofstream out(datasetPath);
    if (!out)
        throw Error("IoError", "cannot write: " + datasetPath);
    writeTsv(out, pairs);
    std::cout << "wrote " << pairs.size() << " pairs to " << datasetPath << "\n";

    if (nDialogues > 0) {
        std::string transcriptPath = s.out + "/dialogues.txt";
        std::ofstream tout(transcriptPath);
        for (const DialogueTranscript& d :
             synthesizeDialogues(skills, pairs, nDialogues, s.seed))
            writeTranscript(tout, d);
        std::cout << "wrote " << nDialogues << " dialogues to " << transcriptPath << "\n";
    }

    size_t lintViolations = 0;
    for (const SynthPair& p : pairs)
        lintViolations += lintPair(p, skills.registry()).size();

    std::set<std::string> covered = coverage(pairs);
    const std::vector<std::string>& all = allConstructs();
    std::cout << "coverage: " << covered.size() << "/" << all.size() << "\n";
    bool full = true;
    for (const std::string& c : all)
        if (!covered.count(c)) {
            std::cout << "missing construct: " << c << "\n";
            full = false;
        }
    if (lintViolations)
        std::cout << "lint violations: " << lintViolations << "\n";
    return full && lintViolations == 0 ? kOk : kLanguageError;
}

int cmdLint(const std::string& file, const Settings& s) {
    SkillSet skills = loadSkills(s);
    std::ifstream in(file);
    if (!in)
        throw Error("IoError", "cannot open: " + file);
    std::vector<SynthPair> rows = readTsv(in);
    size_t flagged = 0;
    for (size_t i = 0; i < rows.size(); i++) {
        std::vector<LintViolation> vs = lintPair(rows[i], skills.registry());
        if (!vs.empty())
            flagged++;
        for (const LintViolation& v : vs) {
            const char* kind = v.kind == LintKind::ConstantNotInUtteranceOrContext
                                   ? "ConstantNotInUtteranceOrContext"
                               : v.kind == LintKind::NonCanonicalProgram
                                   ? "NonCanonicalProgram"
                                   : "TypeError";
            std::cout << file << ":" << i + 1 << ": " << kind << ": " << v.detail
                      << "\n";
        }
    }
    std::cout << flagged << " of " << rows.size() << " rows flagged\n";
    return flagged == 0 ? kOk : kLanguageError;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dlgc: dialogue representation language toolkit"};
    app.require_subcommand(1);

    Settings settings;
    std::string file, replay;
    bool showState = false;
    int depth = 2, nDialogues = 0;
    long limit = -1;

    auto addSkills = [&](CLI::App* cmd) {
        cmd->add_option("--skills", settings.skills, "skill manifest directory");
    };

    CLI::App* parse = app.add_subcommand("parse", "parse a program and dump its AST");
    parse->add_option("file", file)->required();

    CLI::App* check = app.add_subcommand("check", "parse and typecheck a program");
    check->add_option("file", file)->required();
    addSkills(check);

    CLI::App* canon = app.add_subcommand("canon", "print the canonical form");
    canon->add_option("file", file)->required();
    addSkills(canon);

    CLI::App* exec = app.add_subcommand("exec", "execute a program on the fixtures");
    exec->add_option("file", file)->required();
    addSkills(exec);
    exec->add_option("--here", settings.here, "override location as lat,lon");
    exec->add_option("--now", settings.now, "override date as YYYY-MM-DD");
    exec->add_option("--seed", settings.seed, "rng seed");

    CLI::App* repl = app.add_subcommand("repl", "interactive dialogue loop");
    addSkills(repl);
    repl->add_option("--templates", settings.templates, "template file or directory");
    repl->add_option("--replay", replay, "run a scripted scenario file");
    repl->add_flag("--show-state", showState, "print the state summary each turn");

    CLI::App* synth = app.add_subcommand("synth", "synthesize a training dataset");
    addSkills(synth);
    synth->add_option("--templates", settings.templates, "template file or directory");
    synth->add_option("--depth", depth, "max filter atoms / decoration passes");
    synth->add_option("--limit", limit, "max pairs (round-robin truncated)");
    synth->add_option("--dialogues", nDialogues, "also synthesize N dialogues");
    synth->add_option("--seed", settings.seed, "rng seed");
    synth->add_option("--out", settings.out, "output directory");

    CLI::App* lint = app.add_subcommand("lint", "lint a dataset TSV");
    lint->add_option("file", file)->required();
    addSkills(lint);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kUsageError;
    }

    try {
        settings.resolve();
        if (parse->parsed())
            return cmdParse(file);
        if (check->parsed())
            return cmdCheck(file, settings);
        if (canon->parsed())
            return cmdCanon(file, settings);
        if (exec->parsed())
            return cmdExec(file, settings);
        if (repl->parsed())
            return cmdRepl(settings, replay, showState);
        if (synth->parsed())
            return cmdSynth(settings, depth, limit, nDialogues);
        if (lint->parsed())
            return cmdLint(file, settings);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return isIoCode(e.code()) ? kUsageError : kLanguageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    }
    return kUsageError;
}
