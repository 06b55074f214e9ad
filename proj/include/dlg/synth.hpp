#pragma once

#include <iosfwd>

#include "dlg/dialogue.hpp"

namespace dlg {

// One grammar rule: an utterance pattern with typed holes paired with a
// program fragment in surface syntax using the same holes. Hole syntax in the
// pattern is ${name:category}; the program refers back with ${name}. The
// reserved holes ${p} (the engine-chosen field) and ${if} (a subquery's inner
// field) may appear in the program only.
struct Template {
    std::string id;
    std::string category;  // value-phrase | filter-phrase | query-phrase |
                           // action-phrase | statement | dialogue-turn
    std::string guard;     // type constraint for the field hole; "*" = any
    std::string pattern;
    std::string program;
};

// Stanza format: `template <id>` then `category:` / `guard:` / `pattern:` /
// `program:` lines, '#' comments. Throws DuplicateTemplateId /
// UnknownHoleCategory / BadTemplate.
std::vector<Template> parseTemplates(const std::string& text);
std::vector<Template> loadTemplates(const std::string& path);  // file or *.tmpl dir

// One synthesized (context, utterance, program) example plus the provenance
// the parser index needs (utterance/program with value slots re-abstracted).
struct SynthPair {
    std::string context;    // linearized dialogue state; "act: none" when fresh
    std::string utterance;
    std::string program;    // canonical bytes
    std::string utterPattern;
    std::string progPattern;
    std::vector<SlotSpec> slots;
    int depth = 1;
    std::string templateId;  // outermost template, drives round-robin truncation
    std::set<std::string> constructs;
};

struct SynthOptions {
    int depth = 2;          // max filter atoms and query decoration passes
    size_t limit = 0;       // 0 = unlimited
    unsigned seed = 1;
};

// Bottom-up grammar expansion over the loaded skills: values come from
// backend rows, phrases from canonical annotations. Every emitted program
// type-checks, is canonical, and is deduplicated by (utterance, program).
std::vector<SynthPair> expand(SkillSet& skills, const std::vector<Template>& templates,
                              const SynthOptions& opts);

// The construct checklist the synthesizer must cover at depth <= 2.
const std::vector<std::string>& allConstructs();
std::set<std::string> coverage(const std::vector<SynthPair>& pairs);

enum class LintKind { ConstantNotInUtteranceOrContext, NonCanonicalProgram, TypeError };

struct LintViolation {
    LintKind kind;
    std::string detail;  // offending constant or error text
};

// Static annotation checks: every String/Number constant in the program must
// appear (normalized) in the utterance or context; the program must equal its
// canonical form; the program must type-check.
std::vector<LintViolation> lintPair(const SynthPair& pair, const Registry& registry);

// Exact-match index for dialogue::resolveUtterance. Collisions prefer lower
// depth, then the lexicographically smaller program.
ParserIndex buildParserIndex(const std::vector<SynthPair>& pairs);

// `id<TAB>context<TAB>utterance<TAB>program` per line.
void writeTsv(std::ostream& out, const std::vector<SynthPair>& pairs);
std::vector<SynthPair> readTsv(std::istream& in);  // throws Error("MalformedTsv")

struct DialogueTurnRecord {
    std::string context;        // summarize(state) before the user turn
    std::string userUtterance;
    std::string userProgram;    // canonical; empty on yes/no turns
    std::string agentAct;       // agent turn label
    std::string agentUtterance;
    DialogueState state;        // after the user turn
};

struct DialogueTranscript {
    std::vector<DialogueTurnRecord> turns;
};

// Seeded user simulator (new query / refine / supply slot / confirm or reject
// / thank) talking to the agent policy; draws commands from the expanded
// pairs. Every dialogue terminates with a thank-you turn.
std::vector<DialogueTranscript> synthesizeDialogues(SkillSet& skills,
                                                    const std::vector<SynthPair>& pairs,
                                                    int nDialogues, unsigned seed);

void writeTranscript(std::ostream& out, const DialogueTranscript& t);

} // namespace dlg
