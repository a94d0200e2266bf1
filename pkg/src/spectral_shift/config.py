"""Run configurations: parsing, validation, hashing and the objects they describe."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError
from .generators import ContinuedFraction, SftGraph, Substitution, from_spec
from .hilbert import make_alpha
from .measures import (
    MeasureAssignment,
    empirical_measure,
    parry_measure,
    sturmian_measure,
    substitution_measure,
)
from .words import LanguageTable

MEASURE_SOURCES = ("auto", "parry", "interval", "substitution", "empirical")

_DEFAULT_SOURCE = {SftGraph: "parry", ContinuedFraction: "interval", Substitution: "substitution"}


@dataclass
class RunConfig:
    subshift: dict
    N: int = 6
    measure: str = "auto"
    alpha: object = "linear"
    experiment: dict = field(default_factory=dict)
    experiments: list = field(default_factory=list)
    output: dict = field(default_factory=dict)
    seed: int = 0
    sample_length: int = 1_000_000
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ValidationError("config must be a JSON object")
        known = {"subshift", "N", "measure", "alpha", "experiment", "experiments", "output", "seed", "sample_length"}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValidationError(f"unknown config keys: {unknown}")
        if "subshift" not in d or not isinstance(d["subshift"], dict):
            raise ValidationError("config needs a 'subshift' object")
        cfg = cls(
            subshift=d["subshift"],
            N=d.get("N", 6),
            measure=d.get("measure", "auto"),
            alpha=d.get("alpha", "linear"),
            experiment=d.get("experiment", {}),
            experiments=d.get("experiments", []),
            output=d.get("output", {}),
            seed=d.get("seed", 0),
            sample_length=d.get("sample_length", 1_000_000),
            raw=d,
        )
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from None
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {path} is not valid JSON: {exc}") from None
        return cls.from_dict(d)

    def validate(self) -> None:
        if not isinstance(self.N, int) or isinstance(self.N, bool) or self.N < 2:
            raise ValidationError(f"N must be an integer >= 2, got {self.N!r}")
        if self.measure not in MEASURE_SOURCES:
            raise ValidationError(f"measure must be one of {MEASURE_SOURCES}, got {self.measure!r}")
        if not isinstance(self.seed, int):
            raise ValidationError("seed must be an integer")
        if not isinstance(self.sample_length, int) or self.sample_length < 1:
            raise ValidationError("sample_length must be a positive integer")
        make_alpha(self.alpha, self.N)
        for e in self.all_experiments():
            if not isinstance(e, dict) or not isinstance(e.get("name"), str):
                raise ValidationError("every experiment needs a 'name'")

    def all_experiments(self) -> list[dict]:
        exps = list(self.experiments)
        if self.experiment:
            exps.insert(0, self.experiment)
        return exps

    def canonical(self) -> str:
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()

    # -- objects

    def generator(self):
        return from_spec(self.subshift)

    def measure_source(self, gen) -> str:
        if self.measure != "auto":
            return self.measure
        return _DEFAULT_SOURCE[type(gen)]

    def build(self, N: int | None = None) -> tuple[object, LanguageTable, MeasureAssignment]:
        gen = self.generator()
        table = gen.language(self.N if N is None else N)
        return gen, table, build_measure(gen, table, self.measure_source(gen), self.sample_length, self.seed)


def build_measure(gen, table: LanguageTable, source: str, sample_length: int = 1_000_000, seed: int = 0) -> MeasureAssignment:
    if source == "parry":
        if not isinstance(gen, SftGraph):
            raise ValidationError("the Parry measure needs an SFT")
        return parry_measure(gen, None, table)
    if source == "interval":
        if not isinstance(gen, ContinuedFraction):
            raise ValidationError("interval measures need a Sturmian subshift")
        return sturmian_measure(gen, table)
    if source == "substitution":
        if not isinstance(gen, Substitution):
            raise ValidationError("substitution frequencies need a substitution")
        return substitution_measure(gen, table)
    if source == "empirical":
        return empirical_measure(gen, table, sample_length, seed=seed)
    raise ValidationError(f"unknown measure source {source!r}")
