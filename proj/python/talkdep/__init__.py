"""Python access to the TalkDep engine."""

import json

from . import _core
from ._core import TalkDepError, accept, band_of

__all__ = [
    "TalkDepError",
    "accept",
    "aggregate_forms",
    "band_of",
    "default_roster",
    "oracle_bench",
    "score_verdicts",
    "screen_text",
    "synthesize",
    "validate_roster",
]


def default_roster():
    return json.loads(_core.default_roster())


def validate_roster(text):
    """Persona ids of a valid roster document; raises TalkDepError otherwise."""
    return json.loads(_core.validate_roster(text))


def synthesize(data_root, persona_id, max_attempts=3, seed=0):
    return json.loads(_core.synthesize(str(data_root), persona_id, max_attempts, seed))


def oracle_bench(data_root, seed=0, both_orders=False):
    """Synthesize every persona with the scripted oracle and run the pairwise benchmark."""
    return json.loads(_core.oracle_bench(str(data_root), seed, both_orders))


def score_verdicts(verdicts, roster=None):
    roster_json = json.dumps(roster) if roster is not None else ""
    return json.loads(_core.score_verdicts(json.dumps(verdicts), roster_json))


def aggregate_forms(forms, roster=None):
    roster_json = json.dumps(roster) if roster is not None else ""
    lines = "".join(json.dumps(f) + "\n" for f in forms)
    return json.loads(_core.aggregate_forms(lines, roster_json))


def screen_text(text):
    return json.loads(_core.screen_text(text))
