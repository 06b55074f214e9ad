#include "dlg/dialogue.hpp"

#include <set>

#include "dlg/syntax.hpp"
#include "doctest.h"
#include "paths.hpp"

using namespace dlg;

namespace {

SkillSet demoSkills() {
    SkillSet skills;
    skills.loadDirectory(skillsDir());
    return skills;
}

DialogueState apply(const DialogueState& state, const std::string& text, SkillSet& skills,
                    const Env& env) {
    DialogueState next =
        applyUserTurn(state, typecheckOrThrow(parseProgram(text), skills.registry()),
                      skills, env);
    validateState(next, skills.registry());
    return next;
}

ParserIndex demoIndex() {
    ParserIndex index;
    index.add({"post a tweet saying ${0}",
               {{"status", TypeExpr::string()}},
               "@Transaction.Execute; @Twitter.Post(status=${0});",
               1});
    index.add({"play ${0}",
               {{"song", TypeExpr::entity("MediaPlayer:Song")}},
               "@Transaction.Execute; @Spotify.Play(song=${0});",
               1});
    index.add({"find songs by ${0}",
               {{"artist", TypeExpr::string()}},
               "@Transaction.Execute; @Spotify.Song(), contains(artists, ${0});",
               1});
    return index;
}

// Everything summarize() is supposed to pin down, minus bookkeeping
// (turnIndex, justCompleted) and derived fields.
std::string fingerprint(const DialogueState& s) {
    std::string out;
    for (const auto& [domain, c] : s.completed) {
        out += domain + "|" + printStatement(c.stmt) + "|" +
               std::to_string(c.totalCount) + "|" + (c.ok ? "ok" : c.message) + "|";
        for (const auto& r : c.rows)
            out += r + "|";
    }
    for (const auto& [domain, p] : s.outstanding)
        out += domain + "|" + printStatement(p.stmt) + "|" +
               (p.phase == PendingPhase::SlotFilling ? "slot" : "confirm") + "|";
    return out + s.lastAct.str();
}

} // namespace

TEST_CASE("completed query turn: state, report, and refinement offer") {
    SkillSet skills = demoSkills();
    Env env;
    DialogueState s;
    s = apply(s, "@Transaction.Execute; @TMDB.Movie(), contains(genres, \"action\");",
              skills, env);

    REQUIRE(s.completed.count("TMDB") == 1);
    CHECK(s.outstanding.empty());
    const CompletedItem& c = s.completed.at("TMDB");
    CHECK(c.totalCount == 4);
    CHECK(c.rows.size() == 3);
    CHECK(c.ok);
    CHECK_FALSE(c.hasAction);
    // Highest-cardinality unfiltered annotated field: title is distinct per
    // row and first in signature order among the ties.
    CHECK(c.refineField == "title");

    AgentTurn turn = agentPolicy(s, skills);
    CHECK(turn.act == AgentAct::ReportQuery);
    CHECK(turn.count == 4);
    CHECK(turn.rows.size() == 3);
    CHECK(turn.label() == "ReportQuery+OfferRefinement(title)");
    CHECK(turn.utterance.find("I found 4 results") != std::string::npos);
    CHECK(turn.utterance.find("refine by title") != std::string::npos);
    CHECK(turn.newState.justCompleted.empty());

    // A second policy call after the report no longer reports.
    AgentTurn again = agentPolicy(turn.newState, skills);
    CHECK(again.act == AgentAct::Greet);

    // A fresh query in the same domain replaces the completed entry.
    s = apply(turn.newState, "@Transaction.Execute; @TMDB.Movie(), popularity >= 90;",
              skills, env);
    CHECK(s.completed.size() == 1);
    CHECK(s.completed.at("TMDB").totalCount != 4);
}

TEST_CASE("missing parameter installs a slot-filling item") {
    SkillSet skills = demoSkills();
    Env env;
    DialogueState s;
    s = apply(s, "@Transaction.Execute; @Spotify.Play(song=$?);", skills, env);

    REQUIRE(s.outstanding.count("Spotify") == 1);
    CHECK(s.completed.empty());
    CHECK(s.outstanding.at("Spotify").phase == PendingPhase::SlotFilling);

    AgentTurn turn = agentPolicy(s, skills);
    CHECK(turn.label() == "AskSlot(song)");
    CHECK(turn.utterance == "What song would you like?");

    std::string summary = summarize(s);
    CHECK(summary.find("outstanding:") != std::string::npos);
    CHECK(summary.find("??") != std::string::npos);
    CHECK(summary.find("$?") == std::string::npos);

    // Supplying the slot by display name executes the action.
    auto filled = supplySlot(s, "Take Five", skills, env);
    REQUIRE(filled);
    validateState(*filled, skills.registry());
    CHECK(filled->outstanding.empty());
    REQUIRE(filled->completed.count("Spotify") == 1);
    CHECK(filled->completed.at("Spotify").ok);
    CHECK(skills.effectLog().size() == 1);
    CHECK(skills.effectLog()[0].args[0].second.text == "song:take_five");
    CHECK(agentPolicy(*filled, skills).act == AgentAct::ReportActionSuccess);

    // Unbindable text leaves the state alone.
    CHECK_FALSE(supplySlot(s, "no such song", skills, env));
    // Nothing pending: supplySlot declines.
    CHECK_FALSE(supplySlot(*filled, "Take Five", skills, env));
}

TEST_CASE("cancel empties outstanding and is idempotent") {
    SkillSet skills = demoSkills();
    Env env;
    DialogueState s;
    s = apply(s, "@Transaction.Execute; @Spotify.Play(song=$?);", skills, env);
    s = apply(s, "@Transaction.Execute; @Yelp.Book(restaurant=\"r1\"^^Yelp:Restaurant, "
                 "party_size=2);",
              skills, env);
    CHECK(s.outstanding.size() == 2);

    DialogueState cancelled = apply(s, "@Transaction.Cancel;", skills, env);
    CHECK(cancelled.outstanding.empty());
    CHECK(agentPolicy(cancelled, skills).act == AgentAct::Goodbye);

    DialogueState twice = apply(cancelled, "@Transaction.Cancel;", skills, env);
    CHECK(twice.outstanding == cancelled.outstanding);
    CHECK(twice.completed == cancelled.completed);
    CHECK(twice.lastAct == cancelled.lastAct);

    // Greet / ThankYou only move lastAct.
    DialogueState greeted = apply(cancelled, "@Transaction.Greet;", skills, env);
    CHECK(greeted.completed == cancelled.completed);
    CHECK(agentPolicy(greeted, skills).act == AgentAct::Greet);
    DialogueState thanked = apply(greeted, "@Transaction.ThankYou;", skills, env);
    CHECK(agentPolicy(thanked, skills).act == AgentAct::Goodbye);
}

TEST_CASE("confirmation-gated actions execute only after an explicit yes") {
    SkillSet skills = demoSkills();
    Env env;
    DialogueState s;
    s = apply(s, "@Transaction.Execute; @Yelp.Book(restaurant=\"r1\"^^Yelp:Restaurant, "
                 "party_size=4);",
              skills, env);

    REQUIRE(s.outstanding.count("Yelp") == 1);
    CHECK(s.outstanding.at("Yelp").phase == PendingPhase::AwaitingConfirmation);
    CHECK(skills.effectLog().empty());  // nothing ran yet

    AgentTurn turn = agentPolicy(s, skills);
    CHECK(turn.act == AgentAct::Confirm);
    CHECK(turn.utterance.find("@Yelp.Book") != std::string::npos);

    SUBCASE("yes executes and completes") {
        DialogueState done = confirmOrReject(s, true, skills, env);
        validateState(done, skills.registry());
        CHECK(done.outstanding.empty());
        REQUIRE(done.completed.count("Yelp") == 1);
        CHECK(done.completed.at("Yelp").ok);
        CHECK(skills.effectLog().size() == 1);
        CHECK(agentPolicy(done, skills).act == AgentAct::ReportActionSuccess);
    }
    SUBCASE("no abandons without executing") {
        DialogueState dropped = confirmOrReject(s, false, skills, env);
        validateState(dropped, skills.registry());
        CHECK(dropped.outstanding.empty());
        CHECK(dropped.completed.empty());
        CHECK(skills.effectLog().empty());
        CHECK(agentPolicy(dropped, skills).act == AgentAct::Greet);
        CHECK_THROWS_AS(confirmOrReject(dropped, true, skills, env), Error);
    }
    SUBCASE("a new request in the domain abandons the pending one") {
        DialogueState replaced =
            apply(s, "@Transaction.Execute; @Yelp.Book(restaurant=\"r2\"^^Yelp:Restaurant, "
                     "party_size=$?);",
                  skills, env);
        CHECK(replaced.outstanding.size() == 1);
        CHECK(replaced.outstanding.at("Yelp").phase == PendingPhase::SlotFilling);
    }
}

TEST_CASE("runtime errors become report-action-error material") {
    SkillSet skills = demoSkills();
    Env env;
    DialogueState s;
    s = apply(s, "@Transaction.Execute; aggregate(avg, rating of @Yelp.Restaurant(), "
                 "rating >= 100);",
              skills, env);
    REQUIRE(s.completed.count("Yelp") == 1);
    CHECK_FALSE(s.completed.at("Yelp").ok);

    AgentTurn turn = agentPolicy(s, skills);
    CHECK(turn.act == AgentAct::ReportActionError);
    CHECK(turn.message.find("EmptyAggregate") != std::string::npos);
    // The error is part of the context so the summary stays injective.
    CHECK(summarize(s).find("error:") != std::string::npos);
}

TEST_CASE("summarize linearization") {
    SkillSet skills = demoSkills();
    Env env;
    DialogueState s;
    CHECK(summarize(s) == "act: none");

    s = apply(s, "@Transaction.Execute; @TMDB.Movie(), contains(genres, \"action\");",
              skills, env);
    std::string summary = summarize(s);
    CHECK(summary.find("executed: @TMDB.Movie(), contains(genres, \"action\");") !=
          std::string::npos);
    CHECK(summary.find("#4 results:") != std::string::npos);
    CHECK(summary.find("act: @Transaction.Execute") != std::string::npos);

    s = apply(s, "@Transaction.Execute; @Spotify.Play(song=$?);", skills, env);
    summary = summarize(s);
    // Domains linearize in sorted order; both entries present.
    size_t spotify = summary.find("outstanding: @Spotify.Play(song=\?\?);");
    size_t tmdb = summary.find("executed: @TMDB.Movie");
    REQUIRE(spotify != std::string::npos);
    REQUIRE(tmdb != std::string::npos);
    CHECK(spotify < tmdb);
}

TEST_CASE("resolve_utterance: builtins, templates, entities, coreference") {
    SkillSet skills = demoSkills();
    Env env;
    ParserIndex index = demoIndex();
    DialogueState s;

    CHECK(resolveUtterance(s, "Hello!", index, skills).program.act.name == "Greet");
    CHECK(resolveUtterance(s, "thank you", index, skills).program.act.name == "ThankYou");
    CHECK(resolveUtterance(s, "never mind", index, skills).program.act.name == "Cancel");

    TypedProgram tweet =
        resolveUtterance(s, "Post a tweet saying hello world", index, skills);
    REQUIRE(tweet.program.statements.size() == 1);
    CHECK(tweet.program.statements[0].action->args[0].second.value ==
          Value::ofString("hello world"));

    TypedProgram play = resolveUtterance(s, "play take five", index, skills);
    CHECK(play.program.statements[0].action->args[0].second.value.text ==
          "song:take_five");

    // Coreference binds against the completed result rows.
    s = apply(s, "@Transaction.Execute; @Spotify.Song(), contains(artists, \"adele\");",
              skills, env);
    REQUIRE(s.completed.at("Spotify").totalCount == 2);
    TypedProgram first = resolveUtterance(s, "play the first one", index, skills);
    CHECK(first.program.statements[0].action->args[0].second.value.text == "song:hello");
    TypedProgram second = resolveUtterance(s, "play the second one", index, skills);
    CHECK(second.program.statements[0].action->args[0].second.value.text ==
          "song:rolling");
    // "it" needs a unique result; two rows do not qualify.
    CHECK_THROWS_WITH_AS(resolveUtterance(s, "play it", index, skills),
                         doctest::Contains("play it"), Error);

    DialogueState one =
        apply(s, "@Transaction.Execute; @Spotify.CurrentlyPlaying();", skills, env);
    // CurrentlyPlaying replaced the Spotify entry with a single row.
    TypedProgram it = resolveUtterance(one, "play it", index, skills);
    CHECK(it.program.statements[0].action->args[0].second.value.text == "song:take_five");

    CHECK_THROWS_WITH_AS(resolveUtterance(s, "frobnicate the blorp", index, skills),
                         "Unparseable: frobnicate the blorp", Error);
}

TEST_CASE("parser index keeps deterministic winners on pattern collisions") {
    ParserIndex index;
    index.add({"do ${0}", {{"x", TypeExpr::string()}}, "@B;", 2});
    index.add({"do ${0}", {{"x", TypeExpr::string()}}, "@A;", 1});  // lower depth wins
    REQUIRE(index.size() == 1);
    CHECK(index.entries()[0].program == "@A;");
    index.add({"do ${0}", {{"x", TypeExpr::string()}}, "@0;", 1});  // smaller program wins
    CHECK(index.entries()[0].program == "@0;");
    CHECK_THROWS_AS(index.add({"bad ${", {}, "@X;", 1}), Error);
    CHECK_THROWS_AS(index.add({"bad ${name}", {}, "@X;", 1}), Error);
}

TEST_CASE("scenario replay: bundled scripts pass with per-turn invariants") {
    Env env;
    std::vector<DialogueState> reachable;
    for (const char* name : {"restaurant.txt", "media.txt"}) {
        SkillSet skills = demoSkills();
        ParserIndex index = demoIndex();
        ScenarioResult r =
            runScenarioFile(repoDataDir() + "/scenarios/" + std::string(name), skills, env,
                            &index);
        INFO(name << ": " << r.message);
        REQUIRE(r.ok);
        for (const ScenarioTurn& turn : r.turns) {
            validateState(turn.state, skills.registry());
            reachable.push_back(turn.state);
            reachable.push_back(turn.agent.newState);
        }
    }
    // summarize is injective over the reachable states: equal summaries imply
    // equal states (modulo turn bookkeeping).
    for (size_t i = 0; i < reachable.size(); i++)
        for (size_t j = i + 1; j < reachable.size(); j++)
            if (summarize(reachable[i]) == summarize(reachable[j]))
                CHECK(fingerprint(reachable[i]) == fingerprint(reachable[j]));
}

TEST_CASE("scenario replay: booking side effects happen exactly once") {
    SkillSet skills = demoSkills();
    Env env;
    ScenarioResult r =
        runScenarioFile(repoDataDir() + "/scenarios/restaurant.txt", skills, env);
    INFO(r.message);
    REQUIRE(r.ok);
    REQUIRE(skills.effectLog().size() == 1);
    CHECK(skills.effectLog()[0].action == "Book");
    // The transaction settles within (required params + 2) turns of its
    // introduction: install, slot fill, confirm.
    int bookTurn = -1, doneTurn = -1;
    for (size_t i = 0; i < r.turns.size(); i++) {
        if (r.turns[i].user.find("@Yelp.Book") != std::string::npos)
            bookTurn = (int)i;
        if (r.turns[i].agent.act == AgentAct::ReportActionSuccess)
            doneTurn = (int)i;
    }
    REQUIRE(bookTurn >= 0);
    REQUIRE(doneTurn >= 0);
    CHECK(doneTurn - bookTurn <= 2 + 2);
}

TEST_CASE("scenario mismatches are reported, not thrown") {
    SkillSet skills = demoSkills();
    Env env;
    ScenarioResult r = runScenario("U: hello\nA: Goodbye\n", skills, env);
    CHECK_FALSE(r.ok);
    CHECK(r.message.find("expected Goodbye, got Greet") != std::string::npos);

    ScenarioResult bad = runScenario("X: what\n", skills, env);
    CHECK_FALSE(bad.ok);

    ScenarioResult unparseable = runScenario("U: gibberish here\n", skills, env);
    CHECK_FALSE(unparseable.ok);
    CHECK(unparseable.message.find("Unparseable") != std::string::npos);
}
