"""Formula traces that can be replayed to reproduce a computed constant."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable


def coth(x: float) -> float:
    return math.cosh(x) / math.sinh(x)


def arccot(x: float) -> float:
    return math.atan2(1.0, x)


FORMULAS: dict[str, Callable[..., float]] = {}


def formula(tag: str):
    def deco(fn):
        FORMULAS[tag] = fn
        return fn
    return deco


@dataclass
class Step:
    name: str
    tag: str
    inputs: dict
    value: float
    note: str = ""

    def to_dict(self) -> dict:
        out = {"name": self.name, "formula": self.tag, "inputs": dict(self.inputs), "value": self.value}
        if self.note:
            out["note"] = self.note
        return out


@dataclass
class Record:
    """A computed value together with every intermediate step that produced it."""
    name: str
    steps: list = field(default_factory=list)

    def add(self, name: str, tag: str, note: str = "", **inputs) -> float:
        value = float(FORMULAS[tag](**inputs))
        self.steps.append(Step(name, tag, {k: _plain(v) for k, v in inputs.items()}, value, note))
        return value

    @property
    def value(self) -> float:
        return self.steps[-1].value

    def get(self, name: str) -> float:
        for s in self.steps:
            if s.name == name:
                return s.value
        raise KeyError(name)

    def replay(self) -> float:
        """Re-evaluate every step from its formula tag and stored inputs."""
        for s in self.steps:
            again = float(FORMULAS[s.tag](**s.inputs))
            if again != s.value and not (math.isnan(again) and math.isnan(s.value)):
                raise AssertionError(f"step {s.name} does not replay: {again!r} != {s.value!r}")
        return self.value

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "trace": [s.to_dict() for s in self.steps]}


def _plain(v):
    if isinstance(v, bool) or v is None or isinstance(v, str):
        return v
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return float(v)
