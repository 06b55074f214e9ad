// Python bindings for the core operations: parse/print, typecheck,
// canonicalize, execute, dialogue scenarios, and synthesis/lint.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dlg/canonical.hpp"
#include "dlg/dialogue.hpp"
#include "dlg/exec.hpp"
#include "dlg/skills.hpp"
#include "dlg/synth.hpp"
#include "dlg/syntax.hpp"
#include "dlg/typecheck.hpp"

namespace py = pybind11;
using namespace dlg;

namespace {

std::string lintKindName(LintKind k) {
    switch (k) {
    case LintKind::ConstantNotInUtteranceOrContext:
        return "ConstantNotInUtteranceOrContext";
    case LintKind::NonCanonicalProgram:
        return "NonCanonicalProgram";
    default:
        return "TypeError";
    }
}

// Owns a skill set plus dialogue state so one object drives a whole session.
struct Session {
    SkillSet skills;
    Env env;
    DialogueState state;

    explicit Session(const std::string& skillsDir) { skills.loadDirectory(skillsDir); }

    std::vector<py::dict> check(const std::string& text) {
        TypeCheckResult r = typecheckProgram(parseProgram(text), skills.registry());
        std::vector<py::dict> out;
        for (const TypeError& e : r.errors) {
            py::dict d;
            d["line"] = e.span.line;
            d["column"] = e.span.column;
            d["code"] = e.code;
            d["path"] = e.path;
            d["message"] = e.message;
            out.push_back(std::move(d));
        }
        return out;
    }

    std::string canonical(const std::string& text) {
        return canonicalize(typecheckOrThrow(parseProgram(text), skills.registry()))
            .bytes;
    }

    std::string execute(const std::string& text) {
        TypedProgram p = typecheckOrThrow(parseProgram(text), skills.registry());
        return serializeResult(executeProgram(p, skills, env));
    }

    std::vector<py::dict> functions(const std::string& cls) {
        std::vector<py::dict> out;
        for (const FunctionSig& f : skills.registry().cls(cls).functions) {
            py::dict d;
            d["name"] = f.name;
            d["kind"] = f.kind == FunctionKind::Query ? "query" : "action";
            py::dict params;
            for (const Param& p : f.params)
                params[py::str(p.name)] = printType(p.type);
            d["params"] = params;
            out.push_back(std::move(d));
        }
        return out;
    }

    std::string apply(const std::string& text) {
        TypedProgram p = typecheckOrThrow(parseProgram(text), skills.registry());
        state = applyUserTurn(state, p, skills, env);
        AgentTurn agent = agentPolicy(state, skills);
        state = agent.newState;
        return agent.label() + " | " + agent.utterance;
    }

    py::tuple runScenario(const std::string& path) {
        ScenarioResult r = runScenarioFile(path, skills, env, nullptr);
        return py::make_tuple(r.ok, r.message, r.turns.size());
    }

    std::vector<py::dict> synthesize(const std::string& templatesDir, int depth,
                                     size_t limit, unsigned seed) {
        SynthOptions opts;
        opts.depth = depth;
        opts.limit = limit;
        opts.seed = seed;
        std::vector<py::dict> out;
        for (const SynthPair& p : expand(skills, loadTemplates(templatesDir), opts)) {
            py::dict d;
            d["context"] = p.context;
            d["utterance"] = p.utterance;
            d["program"] = p.program;
            d["template_id"] = p.templateId;
            d["constructs"] = p.constructs;
            out.push_back(std::move(d));
        }
        return out;
    }

    std::vector<py::tuple> lint(const std::string& context, const std::string& utterance,
                                const std::string& program) {
        SynthPair p;
        p.context = context;
        p.utterance = utterance;
        p.program = program;
        std::vector<py::tuple> out;
        for (const LintViolation& v : lintPair(p, skills.registry()))
            out.push_back(py::make_tuple(lintKindName(v.kind), v.detail));
        return out;
    }
};

} // namespace

PYBIND11_MODULE(_dlgtalk, m) {
    m.doc() = "Executable dialogue DSL toolkit";

    py::register_exception<Error>(m, "DlgError");

    m.def("parse", [](const std::string& text) { return printProgram(parseProgram(text)); },
          "Parse a program and return its printed surface form.");
    m.def("dump", [](const std::string& text) { return dumpProgram(parseProgram(text)); },
          "Parse a program and return an AST debug dump.");
    m.def("round_trips", [](const std::string& text) {
        Program p = parseProgram(text);
        return parseProgram(printProgram(p)) == p;
    });
    m.def("constructs", &allConstructs, "All synthesis construct tags.");

    py::class_<Session>(m, "Session")
        .def(py::init<const std::string&>(), py::arg("skills_dir"))
        .def("check", &Session::check, py::arg("text"),
             "Typecheck; returns a list of error dicts (empty when well-typed).")
        .def("canonical", &Session::canonical, py::arg("text"),
             "Canonical byte form of a well-typed program.")
        .def("execute", &Session::execute, py::arg("text"),
             "Execute and return the deterministic result serialization.")
        .def("functions", &Session::functions, py::arg("cls"),
             "Function signatures exposed by a skill class.")
        .def("apply", &Session::apply, py::arg("text"),
             "Apply one user program to the dialogue state; returns the agent turn.")
        .def("reset", [](Session& s) { s.state = DialogueState{}; })
        .def("summarize", [](const Session& s) { return summarize(s.state); })
        .def("run_scenario", &Session::runScenario, py::arg("path"),
             "Replay a scripted scenario file; returns (ok, message, turns).")
        .def("synthesize", &Session::synthesize, py::arg("templates_dir"),
             py::arg("depth") = 2, py::arg("limit") = 0, py::arg("seed") = 1)
        .def("lint", &Session::lint, py::arg("context"), py::arg("utterance"),
             py::arg("program"));
}
