#pragma once

#include "dlg/exec.hpp"

namespace dlg {

// One finished transaction per domain: the canonical statement plus the top-3
// result rows (canonical-printed) and the total row count.
struct CompletedItem {
    Statement stmt;
    std::vector<std::string> rows;    // canonical serializations, at most 3
    std::vector<Record> topRecords;   // same rows, kept for coreference
    long totalCount = 0;
    bool hasAction = false;
    bool ok = true;
    std::string message;              // runtime/action error text when !ok
    std::string refineField;          // refinement offer when totalCount > 3

    bool operator==(const CompletedItem&) const = default;
};

enum class PendingPhase { SlotFilling, AwaitingConfirmation };

struct PendingItem {
    Statement stmt;  // may contain Missing args
    PendingPhase phase = PendingPhase::SlotFilling;

    bool operator==(const PendingItem&) const = default;
};

// At most one completed and one outstanding entry per domain (map keys are
// class DNS names); abandoned items are erased, never retained.
struct DialogueState {
    std::map<std::string, CompletedItem> completed;
    std::map<std::string, PendingItem> outstanding;
    DialogueActRef lastAct;      // {"",""} before the first user turn
    int turnIndex = 0;
    std::string justCompleted;   // domain finished by the latest user turn

    bool empty() const {
        return completed.empty() && outstanding.empty() && lastAct.ns.empty();
    }
};

enum class AgentAct {
    AskSlot,
    Confirm,
    ReportQuery,
    ReportActionSuccess,
    ReportActionError,
    Greet,
    Goodbye,
};

struct AgentTurn {
    AgentAct act = AgentAct::Greet;
    std::string domain;
    std::string param;                // AskSlot
    std::optional<Statement> statement;  // Confirm
    std::vector<std::string> rows;    // ReportQuery top-3
    long count = 0;
    std::string message;              // ReportActionError
    std::string refineField;          // ReportQuery refinement offer
    std::string utterance;            // deterministic template rendering
    DialogueState newState;

    // "AskSlot(param)", "ReportQuery+OfferRefinement(field)", ...
    std::string label() const;
};

// Applies one typed user program. Cancel clears all outstanding items;
// Greet/ThankYou only update lastAct; Execute installs or runs each statement
// (a new request in a domain abandons that domain's outstanding item).
// Runtime errors are recorded in the completed entry, the state still
// advances.
DialogueState applyUserTurn(const DialogueState& state, const TypedProgram& p,
                            SkillSet& skills, const Env& env);

// Domain-independent policy: AskSlot > Confirm > report just-completed action
// > report just-completed query (+ refinement offer when count > 3) > greet /
// goodbye per lastAct.
AgentTurn agentPolicy(const DialogueState& state, SkillSet& skills);

// Executes (yes) or abandons (no) the first outstanding item awaiting
// confirmation. Throws Error("NothingToConfirm") when there is none.
DialogueState confirmOrReject(const DialogueState& state, bool yes, SkillSet& skills,
                              const Env& env);

// Parses `text` as a value of the pending slot's type (coreference phrases,
// entity display names, plain literals) and re-applies the statement.
// Returns nullopt when no slot is pending or the text does not bind.
std::optional<DialogueState> supplySlot(const DialogueState& state, const std::string& text,
                                        SkillSet& skills, const Env& env);

// Deterministic linearization used as parser context: per domain
// `executed: <stmt> #<count> results: <rows>;` / `outstanding: <stmt>;`
// (Missing args marked ??), then `act: <lastAct>`. Empty state -> `act: none`.
std::string summarize(const DialogueState& state,
                      const UnitTable& units = UnitTable::builtin());

// Utterance template index built by the synth module. Patterns are normalized
// utterances with `${k}` value slots; programs carry the same placeholders in
// surface syntax.
struct SlotSpec {
    std::string name;
    TypeExpr type;
};

struct IndexEntry {
    std::string pattern;          // normalized, e.g. "play ${0}"
    std::vector<SlotSpec> slots;  // slot k described by slots[k]
    std::string program;          // surface syntax with ${k} holes
    int depth = 0;
};

class ParserIndex {
public:
    // Collisions on `pattern` keep the lower depth, then the smaller program.
    void add(IndexEntry entry);
    const std::vector<IndexEntry>& entries() const { return entries_; }
    size_t size() const { return entries_.size(); }

private:
    std::vector<IndexEntry> entries_;  // kept sorted: fewer slots, then pattern
};

// Lowercase, punctuation stripped, whitespace collapsed.
std::string normalizeUtterance(const std::string& s);

// Resolves an utterance against the builtin phrases (hello / thanks / cancel)
// and the template index. Slot text binds by type; coreference phrases
// ("it", "that", "the first/second/third one") bind against the matching
// domain's completed rows. Throws Error("Unparseable", ...).
TypedProgram resolveUtterance(const DialogueState& state, const std::string& utterance,
                              const ParserIndex& index, SkillSet& skills);

// Scripted dialogue: `U: <utterance|program|yes|no>` lines alternating with
// expected `A: <act label>` lines ('#' comments and blank lines ignored).
// An expectation matches the full label or its base act name.
struct ScenarioTurn {
    std::string user;
    std::string expected;
    AgentTurn agent;
    DialogueState state;  // after the user turn
};

struct ScenarioResult {
    bool ok = true;
    std::string message;  // first mismatch, when !ok
    std::vector<ScenarioTurn> turns;
};

ScenarioResult runScenario(const std::string& text, SkillSet& skills, const Env& env,
                           const ParserIndex* index = nullptr);
ScenarioResult runScenarioFile(const std::string& path, SkillSet& skills, const Env& env,
                               const ParserIndex* index = nullptr);

// Structural invariants (pending phase consistency, result retention bounds);
// throws Error("InvalidDialogueState", ...) on violation. Tests call this
// after every transition.
void validateState(const DialogueState& state, const Registry& registry);

} // namespace dlg
