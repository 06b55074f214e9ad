import os

import pytest

import dlgtalk

ROOT = os.environ.get("DLG_SOURCE_DIR", os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))
SKILLS = os.path.join(ROOT, "data", "skills")
TEMPLATES = os.path.join(ROOT, "data", "templates")
SCENARIO = os.path.join(ROOT, "data", "scenarios", "restaurant.txt")


def test_parse_round_trip():
    text = '@Transaction.Execute; @Yelp.Restaurant(), rating >= 4.4;'
    assert dlgtalk.round_trips(text)
    assert "Restaurant" in dlgtalk.parse(text)
    assert "Statement" in dlgtalk.dump(text) or "@Yelp" in dlgtalk.dump(text)


def test_parse_error_raises():
    with pytest.raises(dlgtalk.DlgError):
        dlgtalk.parse("@@@ nope")


def test_check_and_canonical():
    s = dlgtalk.Session(SKILLS)
    assert s.check('@Transaction.Execute; @Yelp.Restaurant(), rating >= 4.4;') == []

    errs = s.check('@Transaction.Execute; @Yelp.Restaurant(), rating == "chinese";')
    assert errs and errs[0]["code"] == "TypeMismatch" and errs[0]["path"]

    # conjunct order is normalized
    a = s.canonical('@Transaction.Execute; @Yelp.Restaurant(), '
                    'rating >= 4.4 && price <= 20USD;')
    b = s.canonical('@Transaction.Execute; @Yelp.Restaurant(), '
                    'price <= 20USD && rating >= 4.4;')
    assert a == b


def test_execute():
    s = dlgtalk.Session(SKILLS)
    out = s.execute('@Transaction.Execute; aggregate(count of @Yelp.Restaurant());')
    assert "12" in out


def test_library_surface():
    s = dlgtalk.Session(SKILLS)
    names = {f["name"] for f in s.functions("Spotify")}
    assert names == {"Song", "CurrentlyPlaying", "Play", "Favorites"}


def test_dialogue_session():
    s = dlgtalk.Session(SKILLS)
    reply = s.apply('@Transaction.Execute; @Yelp.Restaurant(), '
                    'contains(cuisines, "Chinese");')
    assert reply.startswith("ReportQuery")
    assert "executed:" in s.summarize()
    s.reset()
    assert s.summarize() == "act: none"


def test_scenario_replay():
    s = dlgtalk.Session(SKILLS)
    ok, message, turns = s.run_scenario(SCENARIO)
    assert ok, message
    assert turns > 3


def test_synthesize_and_lint():
    s = dlgtalk.Session(SKILLS)
    pairs = s.synthesize(TEMPLATES, depth=1, limit=50)
    assert len(pairs) == 50
    for p in pairs:
        assert s.lint(p["context"], p["utterance"], p["program"]) == []
    bad = s.lint("act: none", "highly rated places",
                 "@Transaction.Execute; @Yelp.Restaurant(), rating >= 4.4;")
    assert bad[0][0] == "ConstantNotInUtteranceOrContext"
    assert set(dlgtalk.constructs()) >= {"query", "and", "monitor"}
