"""Invariant probability measures on the cylinders of a language table.

Four sources are available: the Parry measure of an SFT, the exact arc
lengths of a Sturmian coding, the Perron frequencies of a primitive
substitution, and Birkhoff counts along a long sample.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, InvariantError, NotFoundError, PrecisionError, ValidationError
from .generators import (
    ContinuedFraction,
    Interval,
    LinearForm,
    PerronData,
    SftGraph,
    Substitution,
    perron,
    perron_pair,
    sturmian_arcs,
    three_distance_set,
)
from .words import LanguageTable

log = logging.getLogger(__name__)

# Recorded in every artifact. The product formula u_i v_t lambda^-(n-1) has total
# mass lambda; the exponent -n is what makes mu a probability measure.
PARRY_CONVENTION = "parry-exponent-corrected:u_initial*v_terminal*lambda^-n"


@dataclass
class MeasureAssignment:
    """``mu`` on every level of ``table``; ``mu[n][i]`` is the mass of word ``i`` at level ``n``."""

    table: LanguageTable
    mu: tuple[np.ndarray, ...]
    source: str
    forms: tuple[tuple[LinearForm, ...], ...] | None = None  # exact arc lengths (Sturmian only)
    bracket: Interval | None = None
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.mu) != self.table.max_level + 1:
            raise ValidationError("one mass array per level is required")
        for n, (arr, words) in enumerate(zip(self.mu, self.table.levels)):
            if arr.shape != (len(words),):
                raise ValidationError(f"level {n}: {arr.shape[0]} masses for {len(words)} words")
            arr.setflags(write=False)

    def __call__(self, word: str) -> float:
        return float(self.mu[len(word)][self.table.id(word)])

    @property
    def max_level(self) -> int:
        return self.table.max_level

    def enclosure(self, word: str) -> Interval:
        if self.forms is None:
            raise ValidationError(f"{self.source} measures carry no enclosures")
        return self.forms[len(word)][self.table.id(word)].enclosure(self.bracket)

    # -- invariant defects (max absolute deviation)

    def total_mass_defects(self) -> list[float]:
        return [abs(float(a.sum()) - 1.0) for a in self.mu]

    def additivity_defect(self) -> float:
        worst = 0.0
        for n in range(self.max_level):
            agg = np.zeros(len(self.mu[n]))
            np.add.at(agg, self.table.parent[n + 1], self.mu[n + 1])
            worst = max(worst, float(np.max(np.abs(agg - self.mu[n]))))
        return worst

    def left_right_defect(self) -> float:
        """Largest gap between ``mu(w)``, the mass of its left extensions and of its right extensions."""
        t = self.table
        worst = 0.0
        for n in range(self.max_level):
            left = np.zeros(len(t.levels[n]))
            right = np.zeros(len(t.levels[n]))
            below = t.index[n]
            for j, v in enumerate(t.levels[n + 1]):
                left[below[v[1:]]] += self.mu[n + 1][j]
                right[below[v[:-1]]] += self.mu[n + 1][j]
            worst = max(worst, float(np.max(np.abs(left - self.mu[n]))), float(np.max(np.abs(right - self.mu[n]))))
        return worst

    def min_mass(self) -> float:
        return float(min(a.min() for a in self.mu))

    def check(self, tol: float = 1e-10) -> None:
        """Raise :class:`InvariantError` if mass, additivity, invariance or support fail."""
        if abs(float(self.mu[0][0]) - 1.0) > tol:
            raise InvariantError(f"mu(empty word) = {self.mu[0][0]!r}, expected 1")
        add = self.additivity_defect()
        if add > tol:
            raise InvariantError(f"additivity over children fails by {add:.3e}")
        lr = self.left_right_defect()
        if lr > tol:
            raise InvariantError(f"left/right extension masses differ by {lr:.3e}")
        if self.min_mass() <= 0:
            raise InvariantError("some admissible word has zero mass")

    def perturbed(self, word: str, delta: float) -> "MeasureAssignment":
        """Copy with one value shifted by ``delta``; used to test that the checks bite."""
        mu = [a.copy() for a in self.mu]
        mu[len(word)][self.table.id(word)] += delta
        return MeasureAssignment(self.table, tuple(mu), self.source + "+perturbed", notes=dict(self.notes))


# ---------------------------------------------------------------------------
# exact sources


def parry_measure(graph: SftGraph, pd: PerronData | None, table: LanguageTable) -> MeasureAssignment:
    pd = pd or perron(graph)
    log.info("Parry measure uses the corrected exponent lambda^-n (printed form has total mass lambda)")
    mu = [np.ones(1)]
    for n in range(1, table.max_level + 1):
        arr = np.empty(len(table.levels[n]))
        scale = pd.lam ** (-n)
        for i, w in enumerate(table.levels[n]):
            try:
                first, last = graph.by_label[w[0]], graph.by_label[w[-1]]
            except KeyError:
                raise ValidationError(f"{w!r} uses letters that are not edges of the graph") from None
            arr[i] = pd.u[first.initial] * pd.v[last.terminal] * scale
        mu.append(arr)
    for n, a in enumerate(mu):
        if abs(a.sum() - 1.0) > 1e-9:
            raise InvariantError(f"Parry masses at level {n} sum to {a.sum():.12g}; table and graph disagree?")
    return MeasureAssignment(table, tuple(mu), "parry", notes={"convention": PARRY_CONVENTION})


def sturmian_measure(cf: ContinuedFraction, table: LanguageTable) -> MeasureAssignment:
    """Arc lengths with exact endpoints; every value is classified into its three-distance band."""
    br = cf.bracket
    mu, forms, classes = [np.ones(1)], [(LinearForm(1, 0),)], [None]
    for n in range(1, table.max_level + 1):
        arcs = {a.word: a.length for a in sturmian_arcs(cf, n)}
        if set(arcs) != set(table.levels[n]):
            raise InvariantError(f"level {n}: arc words and table words differ")
        lv = tuple(arcs[w] for w in table.levels[n])
        band = three_distance_set(cf, n)
        cls = []
        for w, f in zip(table.levels[n], lv):
            if f.sign(br) <= 0:
                raise InvariantError(f"arc of {w!r} has nonpositive length")
            hit = [j for j, b in enumerate(band.values) if b == f]
            if not hit:
                raise InvariantError(f"mu({w!r}) = {f} is not one of the three allowed lengths at level {n}")
            cls.append(hit[0])
        forms.append(lv)
        mu.append(np.array([f.enclosure(br).mid for f in lv]))
        classes.append(tuple(cls))
    return MeasureAssignment(
        table,
        tuple(mu),
        "interval",
        forms=tuple(forms),
        bracket=br,
        notes={"three_distance_classes": classes},
    )


def substitution_measure(sub: Substitution, table: LanguageTable) -> MeasureAssignment:
    """Word frequencies from the Perron vector of the induced substitution on length-n words.

    ``sigma_n(w)`` is made of the first ``|sigma(w_0)|`` length-n factors of
    ``sigma(w)``; its normalised Perron vector gives the frequency of each
    length-n word in any sequence of the subshift.
    """
    sub.require_valid()
    mu = [np.ones(1)]
    for n in range(1, table.max_level + 1):
        words = table.levels[n]
        idx = table.index[n]
        M = np.zeros((len(words), len(words)))
        for j, w in enumerate(words):
            img = sub.image(w)
            for s in range(len(sub.rules[w[0]])):
                try:
                    M[idx[img[s : s + n]], j] += 1
                except KeyError:
                    raise InvariantError(f"{img[s:s + n]!r} occurs in sigma({w!r}) but is not in the table") from None
        _, _, v = perron_pair(M)
        mu.append(v / v.sum())
    return MeasureAssignment(table, tuple(mu), "substitution")


# ---------------------------------------------------------------------------
# Birkhoff counts


def _window_codes(x: np.ndarray, n: int, base: int) -> np.ndarray:
    codes = np.zeros(len(x) - n + 1, dtype=np.int64)
    for k in range(n):
        codes = codes * base + x[k : len(x) - n + 1 + k]
    return codes


def empirical_measure(generator, table: LanguageTable, sample_length: int, seed: int | None = 0) -> MeasureAssignment:
    """Occurrence frequencies along one sample; ``generator`` is a subshift or a ready-made string."""
    N = table.max_level
    if sample_length < 100 * max(N, 1):
        raise InsufficientDataError(f"sample of {sample_length} letters is shorter than 100*N = {100 * N}")
    text = generator if isinstance(generator, str) else generator.sample(sample_length, seed=seed)
    if len(text) < sample_length:
        raise InsufficientDataError("sample shorter than requested")
    text = text[:sample_length]
    alphabet = sorted(set(text) | set(table.levels[1]))
    base = len(alphabet)
    if base ** N >= 2**62:
        raise ValidationError("window codes would overflow; lower N")
    lut = np.zeros(0x110000 if max(map(ord, alphabet)) > 255 else 256, dtype=np.int64)
    for k, a in enumerate(alphabet):
        lut[ord(a)] = k
    x = lut[np.frombuffer(text.encode("utf-32-le"), dtype=np.uint32)]
    mu = [np.ones(1)]
    for n in range(1, N + 1):
        codes, counts = np.unique(_window_codes(x, n, base), return_counts=True)
        words = table.levels[n]
        wc = np.array([sum(lut[ord(c)] * base ** (n - 1 - k) for k, c in enumerate(w)) for w in words], dtype=np.int64)
        pos = np.searchsorted(codes, wc)
        pos = np.minimum(pos, len(codes) - 1)
        found = codes[pos] == wc
        if found.sum() != len(codes):
            raise InvariantError(f"sample contains length-{n} words outside the table")
        arr = np.where(found, counts[pos], 0) / (sample_length - n + 1)
        mu.append(arr.astype(float))
    return MeasureAssignment(table, tuple(mu), "empirical", notes={"sample_length": sample_length, "seed": seed})


# ---------------------------------------------------------------------------


def ratio_R(table: LanguageTable, measure: MeasureAssignment, w: str) -> float:
    """``sup mu(w)/mu(w')`` over children ``w'`` of ``w``."""
    n = len(w)
    if n >= table.max_level:
        raise InsufficientDataError(f"children of the level-{n} word {w!r} are not tabulated")
    kids = table.children[n][table.id(w)]
    return float(measure.mu[n][table.id(w)] / measure.mu[n + 1][list(kids)].min())


def ratio_R_level(measure: MeasureAssignment, n: int) -> np.ndarray:
    """Vector of ``R`` over all level-``n`` words."""
    t = measure.table
    if n >= t.max_level:
        raise InsufficientDataError(f"R at level {n} needs level {n + 1}")
    smallest = np.full(len(t.levels[n]), np.inf)
    np.minimum.at(smallest, t.parent[n + 1], measure.mu[n + 1])
    return measure.mu[n] / smallest


def measure_records(measure: MeasureAssignment) -> list[dict]:
    t = measure.table
    rows = []
    for n, words in enumerate(t.levels):
        R = ratio_R_level(measure, n) if n < t.max_level else None
        spec = t.special(n) if n < t.max_level else None
        for i, w in enumerate(words):
            rows.append(
                {
                    "level": n,
                    "word": w,
                    "mu": float(measure.mu[n][i]),
                    "R": None if R is None else float(R[i]),
                    "special": None if spec is None else bool(spec[i]),
                }
            )
    return rows


def three_distance_report(cf: ContinuedFraction, measure: MeasureAssignment) -> list[dict]:
    """Per level: which of the allowed lengths occur, and the widest enclosure."""
    if measure.forms is None:
        raise ValidationError("three-distance report needs an interval measure")
    out = []
    for n in range(1, measure.max_level + 1):
        band = three_distance_set(cf, n)
        classes = measure.notes["three_distance_classes"][n]
        width = max(float(f.enclosure(measure.bracket).width) for f in measure.forms[n])
        out.append(
            {
                "level": n,
                "band": band.n,
                "k": band.k,
                "classes_present": sorted(set(classes)),
                "third_absent_expected": band.third_absent,
                "max_width": width,
            }
        )
    return out
