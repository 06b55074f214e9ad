#pragma once

#include "dlg/skills.hpp"

namespace dlg {

// Execution environment; fixed for the duration of one execute call.
struct Env {
    Value here = Value::ofLocation(37.442, -122.165, "home");
    DateValue now{2025, 1, 1, false, 0, 0, 0};
    unsigned rngSeed = 0;

    Value nowValue() const { return Value::ofDate(now); }
};

struct StatementResult {
    std::vector<Record> rows;            // query path; aggregate yields one row
    std::vector<ActionOutcome> outcomes; // one per invocation (per row when q => a)
};

struct ProgramResult {
    std::vector<StatementResult> statements;
};

// Relational pipeline: base rows -> computed fields -> filter -> sort ->
// slice -> aggregate -> projection. Atom on a null field is false; sort is
// stable with nulls last; slice is 1-based and clamps; rows order is
// (sort key, id, input order). Throws EmptyAggregate / NonConcreteClass.
std::vector<Record> executeQuery(const Query& q, SkillSet& skills, const Env& env);

// q => a invokes the action once per row in row order; per-row failures are
// captured in outcomes, not thrown. Throws MissingParameter on a $? arg.
StatementResult executeStatement(const Statement& s, SkillSet& skills, const Env& env);
ProgramResult executeProgram(const TypedProgram& p, SkillSet& skills, const Env& env);

// Deterministic text form: fields in name order, canonical values.
std::string serializeRecord(const Record& r, const UnitTable& units = UnitTable::builtin());
std::string serializeResult(const ProgramResult& r,
                            const UnitTable& units = UnitTable::builtin());

struct TickResult {
    int tick = 0;
    std::vector<Record> fired;
    std::vector<ActionOutcome> outcomes;
};

// Polls the monitored query's backend version each tick; on change, fires the
// action for rows whose canonical serialization was not present before.
// `beforeTick` runs first each tick (test scripts mutate the backend there).
std::vector<TickResult> runMonitor(const Statement& s, SkillSet& skills, const Env& env,
                                   int maxTicks,
                                   const std::function<void(int)>& beforeTick = {});

} // namespace dlg
