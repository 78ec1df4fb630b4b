"""JSON documents for games, policies and potentials, plus CSV trace parsing.

A game document looks like::

    {"format": "alphapot-game", "version": 1,
     "game": {...MarkovGame.to_dict()...},
     "potential": {...PotentialSpec.to_dict()...} | null}

Transitions are stored sparsely (flat ``index``/``value`` lists) when fewer
than a quarter of the entries are nonzero.
"""
from __future__ import annotations

import csv
import json
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ShapeError
from .game import JointPolicy, MarkovGame
from .potentials import PotentialSpec

GAME_FORMAT = "alphapot-game"
POLICY_FORMAT = "alphapot-policy"
FORMAT_VERSION = 1
SPARSE_DENSITY = 0.25


def load_schema(name: str) -> dict:
    """Bundled JSON schema, e.g. ``load_schema("game")``."""
    text = resources.files("alphapot").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def game_document(game: MarkovGame, potential: PotentialSpec | None = None, meta: dict | None = None) -> dict:
    body = game.to_dict()
    flat = game.transitions.ravel()
    nz = np.flatnonzero(flat)
    if nz.size < SPARSE_DENSITY * flat.size:
        del body["transitions"]
        body["transitions_sparse"] = {"index": nz.tolist(), "value": flat[nz].tolist()}
    doc = {
        "format": GAME_FORMAT,
        "version": FORMAT_VERSION,
        "game": body,
        "potential": None if potential is None else potential.to_dict(),
    }
    if meta:
        doc["meta"] = meta
    return doc


def parse_game_document(doc: dict) -> tuple[MarkovGame, PotentialSpec | None]:
    if doc.get("format") != GAME_FORMAT:
        raise ShapeError(f"not a game document (format={doc.get('format')!r})")
    game = MarkovGame.from_dict(doc["game"])
    pot = doc.get("potential")
    spec = None if pot is None else PotentialSpec.from_dict(pot, game.num_states, game.num_joint)
    return game, spec


def save_game(path, game: MarkovGame, potential: PotentialSpec | None = None, meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(game_document(game, potential, meta)))
    return path


def load_game(path) -> tuple[MarkovGame, PotentialSpec | None]:
    return parse_game_document(json.loads(Path(path).read_text()))


def policy_document(policy: JointPolicy) -> dict:
    doc = {"format": POLICY_FORMAT, "version": FORMAT_VERSION}
    doc.update(policy.to_dict())
    return doc


def save_policy(path, policy: JointPolicy) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(policy_document(policy)))
    return path


def load_policy(path) -> JointPolicy:
    doc = json.loads(Path(path).read_text())
    if doc.get("format", POLICY_FORMAT) != POLICY_FORMAT:
        raise ShapeError(f"not a policy document (format={doc.get('format')!r})")
    return JointPolicy.from_dict(doc)


def _cell(text: str):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        return float(text)


def read_trace(path) -> list[dict]:
    """Trace CSV rows as dicts; empty cells become ``None``."""
    with open(path, newline="") as fh:
        return [{k: _cell(v) for k, v in row.items()} for row in csv.DictReader(fh)]


__all__ = [
    "load_schema",
    "game_document",
    "parse_game_document",
    "save_game",
    "load_game",
    "policy_document",
    "save_policy",
    "load_policy",
    "read_trace",
]
