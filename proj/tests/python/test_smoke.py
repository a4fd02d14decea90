import talkdep


def test_roster_and_bands():
    roster = talkdep.default_roster()
    assert len(roster) == 12
    scores = {p["persona_id"]: p["bdi_total"] for p in roster}
    assert scores["maria"] == 40 and scores["noah"] == 5
    assert talkdep.band_of(28) == "moderate"
    assert talkdep.band_of(29) == "severe"


def test_accept_rule():
    assert talkdep.accept(36, 40)
    assert not talkdep.accept(35, 40)


def test_invalid_roster_raises():
    try:
        talkdep.validate_roster('[{"persona_id": "x"}]')
    except talkdep.TalkDepError:
        pass
    else:
        raise AssertionError("expected TalkDepError")


def test_synthesize_and_bench(tmp_path):
    run = talkdep.synthesize(tmp_path, "laura")
    assert run["status"] == "accepted"
    assert run["outcome"]["predicted_bdi"] == 23

    report = talkdep.oracle_bench(tmp_path / "bench", seed=3)
    assert report["total_pairs"] == 66
    assert report["accuracy_pct"] == 100.0
    assert report["neither_count"] == 0
    assert report["same_level_pairs"] == 12

    rescored = talkdep.score_verdicts(report["verdicts"])
    assert rescored["correct"] == 66


def test_aggregate_forms():
    forms = [
        {"persona_id": "laura", "rater_id": r,
         "scores": {"humanness": s, "naturalness": s, "fluency": s, "emotional_consistency": s,
                    "symptom_realism": s, "engagement_responsiveness": s, "cognitive_load": s}}
        for r, s in (("r1", 4), ("r2", 5))
    ]
    stats = talkdep.aggregate_forms(forms)
    assert stats["overall_mean"] == 4.5


def test_screen_text():
    assert talkdep.screen_text("We had lunch by the river.") == []
    flags = talkdep.screen_text("Sometimes I want to die.")
    assert [f["category"] for f in flags] == ["self_harm_cue"]
    assert flags[0]["severity"] == "review"
