"""Run configuration and its flat ``key = value`` file format.

Blank lines and ``#`` comments are ignored. An empty value means "unset".
Keys are the :class:`RunConfig` field names.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ValidationError
from .seedselect import SELECTOR_KINDS

PROB_MODELS = ("wc", "tv", "file")


@dataclass
class RunConfig:
    # graph and probability model
    graph: str | None = None
    undirected: bool = False
    id_map: str | None = None
    prob_model: str = "wc"
    prob_seed: int = 0
    # live-graph ensemble
    samples: int = 1000
    seed: int = 0
    ensemble: str | None = None
    # selector
    selector: str = "live-graph-greedy"
    selection_samples: int | None = None
    irie_alpha: float = 0.7
    irie_iterations: int = 20
    convergence_tol: float = 1e-4
    # command parameters
    budget: int | None = None
    phases: int = 2
    split: str | None = None
    seeds: str | None = None
    exact: bool = False
    coarse_step: float = 0.1
    fine_step: float = 0.05
    top_refine: int = 10
    strategy: str = "grid"
    deltas: str = "0.5,0.6,0.7,0.8,0.9,1.0"
    spreads: str | None = None
    # execution
    output_dir: str = "."
    workers: int = 0

    def validate(self) -> "RunConfig":
        if self.prob_model not in PROB_MODELS:
            raise ValidationError(f"prob_model must be one of {PROB_MODELS}")
        if self.selector not in SELECTOR_KINDS:
            raise ValidationError(f"selector must be one of {SELECTOR_KINDS}")
        if self.samples < 1:
            raise ValidationError("samples must be at least 1")
        if self.budget is not None and self.budget < 0:
            raise ValidationError("budget must be non-negative")
        if self.phases < 1:
            raise ValidationError("phases must be at least 1")
        if self.workers < 0:
            raise ValidationError("workers must be non-negative")
        return self

    def delta_grid(self) -> list[float]:
        return parse_floats(self.deltas, "deltas")

    def spread_list(self) -> list[float] | None:
        return None if self.spreads is None else parse_floats(self.spreads, "spreads")

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                value = ""
            elif isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValidationError(f"config line {lineno}: expected 'key = value'")
            values[key.strip()] = value.strip()
        return cls().updated(values)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_text(Path(path).read_text())

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    def updated(self, values: dict) -> "RunConfig":
        """Copy with ``values`` (strings or typed) coerced to each field's type."""
        known = {f.name: f for f in fields(self)}
        changes = {}
        for key, value in values.items():
            if key not in known:
                raise ValidationError(f"unknown config key {key!r}")
            changes[key] = _coerce(key, known[key].type, value)
        return dataclasses.replace(self, **changes)


def _coerce(key, annotation, value):
    if not isinstance(value, str):
        return value
    if value == "":
        if "None" in str(annotation):
            return None
        raise ValidationError(f"config key {key!r} needs a value")
    kind = str(annotation).split("|")[0].strip()
    try:
        if kind == "bool":
            low = value.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError
            return low in ("true", "1", "yes")
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
    except ValueError:
        raise ValidationError(f"config key {key!r}: cannot read {value!r} as {kind}") from None
    return value


def parse_floats(text: str, name: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ValidationError(f"{name} must be a comma-separated list of numbers") from None
