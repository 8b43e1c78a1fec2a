"""Environment-class files.

A class file is a JSON object::

    {
      "r_max": 1.0,
      "environments": [
        {"kind": "bandit", "arms": [0.9, 0.1]},
        {"kind": "mdp", "transitions": [[[...]]], "rewards": [[[...]]], "initial_state": 0},
        {"kind": "iid", "percepts": [[0, 0.0], [0, 1.0]], "probs": [0.3, 0.7], "n_actions": 2}
      ],
      "weights": [0.5, 0.5]
    }

All members share one percept alphabet, the sorted union of the percepts
each member can emit.  Weights within 1e-9 of summing to one are
renormalized.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .mixture import WeightedClass
from .models import BanditSpec, IidSpec, MdpSpec, as_env, natural_percepts

log = logging.getLogger(__name__)

WEIGHT_SUM_TOL = 1e-9


@dataclass(frozen=True)
class ClassFile:
    r_max: float
    specs: tuple
    weights: tuple[float, ...]

    def percepts(self):
        return tuple(sorted({p for s in self.specs for p in natural_percepts(s)}))

    def to_class(self) -> WeightedClass:
        alphabet = self.percepts()
        envs = tuple(as_env(s, alphabet, self.r_max) for s in self.specs)
        return WeightedClass(envs, np.array(self.weights))


def _number(v, field: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(field, f"expected a number, got {v!r}")
    return float(v)


def _spec(doc, r_max: float, prefix: str):
    if not isinstance(doc, dict):
        raise ValidationError(prefix, "expected an object")
    kind = doc.get("kind")
    try:
        if kind == "mdp":
            for key in ("transitions", "rewards"):
                if key not in doc:
                    raise ValidationError(key, "missing")
            t = doc["transitions"]
            # report malformed rows before numpy sees ragged input
            if not isinstance(t, list):
                raise ValidationError("transitions", "expected a nested array")
            for a, rows in enumerate(t):
                if not isinstance(rows, list):
                    raise ValidationError(f"transitions[{a}]", "expected an array of rows")
                for s, row in enumerate(rows):
                    if not isinstance(row, list) or len(row) != len(rows):
                        raise ValidationError(f"transitions[{a}][{s}]", f"expected {len(rows)} probabilities")
                    for j, v in enumerate(row):
                        _number(v, f"transitions[{a}][{s}][{j}]")
            return MdpSpec(np.array(t, dtype=float), np.array(doc["rewards"], dtype=float),
                           int(doc.get("initial_state", 0)), r_max)
        if kind == "bandit":
            arms = doc.get("arms")
            if not isinstance(arms, list):
                raise ValidationError("arms", "expected an array of probabilities")
            spec = BanditSpec(tuple(_number(p, f"arms[{i}]") for i, p in enumerate(arms)))
            if r_max < 1.0:
                raise ValidationError("arms", "bandit rewards are 0/1 but r_max < 1")
            return spec
        if kind == "iid":
            return IidSpec(tuple(tuple(p) for p in doc.get("percepts", [])), tuple(doc.get("probs", [])),
                           int(doc.get("n_actions", 1)))
    except ValidationError as e:
        raise ValidationError(f"{prefix}.{e.field}", e.message) from None
    except (TypeError, ValueError) as e:
        raise ValidationError(prefix, str(e)) from None
    raise ValidationError(f"{prefix}.kind", f"unknown environment kind {kind!r}")


def load_class_document(doc) -> ClassFile:
    if not isinstance(doc, dict):
        raise ValidationError("$", "class file must be an object")
    r_max = _number(doc.get("r_max", 1.0), "r_max")
    if r_max <= 0:
        raise ValidationError("r_max", "must be positive")
    envs = doc.get("environments")
    if not isinstance(envs, list) or not envs:
        raise ValidationError("environments", "expected a non-empty array")
    specs = tuple(_spec(e, r_max, f"environments[{i}]") for i, e in enumerate(envs))
    weights = doc.get("weights")
    if not isinstance(weights, list) or len(weights) != len(specs):
        raise ValidationError("weights", f"expected an array of {len(specs)} weights")
    w = [_number(v, f"weights[{i}]") for i, v in enumerate(weights)]
    for i, v in enumerate(w):
        if v <= 0:
            raise ValidationError(f"weights[{i}]", f"weight {v} must be positive")
    total = sum(w)
    if abs(total - 1.0) > WEIGHT_SUM_TOL:
        raise ValidationError("weights", f"weights sum to {total!r}, not 1")
    if total != 1.0:
        log.info("renormalizing class weights (sum was %r)", total)
        w = [v / total for v in w]
    n_actions = {as_env(s, None, r_max).n_actions for s in specs}
    if len(n_actions) != 1:
        raise ValidationError("environments", f"members disagree on the number of actions: {sorted(n_actions)}")
    return ClassFile(r_max, specs, tuple(w))


def read_class_file(path) -> ClassFile:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ValidationError("$", f"malformed JSON: {e}") from None
    except OSError as e:
        raise ValidationError("$", f"cannot read {path}: {e.strerror}") from None
    return load_class_document(doc)


def parse_class_file(path) -> WeightedClass:
    return read_class_file(path).to_class()
