"""Registry of invariants run by ``spectral-shift verify``.

Each entry measures one defect on a configured subshift and compares it with
a tolerance. Anchors name the property being checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .analysis import commutant_dimension, eta_zeta_checks, q_reconstruction_defect
from .errors import InsufficientDataError, ValidationError
from .generators import ContinuedFraction, SftGraph, perron, three_distance_set
from .hilbert import Dirac, TruncatedSpace, commutator, make_alpha, operator_norm, project
from .measures import MeasureAssignment
from .words import LanguageTable, pi


@dataclass
class Context:
    generator: object
    table: LanguageTable
    measure: MeasureAssignment
    alpha: object
    seed: int = 0
    _space: TruncatedSpace | None = None
    _D: Dirac | None = None

    @property
    def N(self) -> int:
        return self.table.max_level

    @property
    def space(self) -> TruncatedSpace:
        if self._space is None:
            self._space = TruncatedSpace(self.table, self.measure, self.N)
        return self._space

    @property
    def D(self) -> Dirac:
        if self._D is None:
            self._D = Dirac(self.space, make_alpha(self.alpha, self.N))
        return self._D


@dataclass(frozen=True)
class Invariant:
    name: str
    module: str
    anchor: str
    check: Callable[[Context], float]
    tol: float = 1e-10
    applies: Callable[[Context], bool] = lambda ctx: True


REGISTRY: list[Invariant] = []


def register(name: str, module: str, anchor: str, tol: float = 1e-10, applies=None):
    def deco(fn):
        REGISTRY.append(Invariant(name, module, anchor, fn, tol, applies or (lambda ctx: True)))
        return fn

    return deco


def _is_sft(ctx: Context) -> bool:
    return isinstance(ctx.generator, SftGraph)


def _is_sturmian(ctx: Context) -> bool:
    return isinstance(ctx.generator, ContinuedFraction)


# -- words


@register("parent_is_pi", "words", "every parent pointer equals the level-lowering map")
def _parent_is_pi(ctx):
    t = ctx.table
    bad = 0
    for n in range(1, t.max_level + 1):
        for i, w in enumerate(t.levels[n]):
            bad += t.levels[n - 1][t.parent[n][i]] != pi(w)
    return float(bad)


@register("special_count_matches_growth", "words", "sum of (children - 1) over level n equals #X_{n+1} - #X_n")
def _special_growth(ctx):
    t = ctx.table
    c = t.counts()
    worst = 0
    for n in range(t.max_level):
        excess = sum(len(k) - 1 for k in t.children[n])
        worst = max(worst, abs(excess - (c[n + 1] - c[n])))
    return float(worst)


@register("sturmian_complexity", "generators", "a Sturmian language has n + 1 words of length n", applies=_is_sturmian)
def _sturmian_complexity(ctx):
    return float(max(abs(c - (n + 1)) for n, c in enumerate(ctx.table.counts())))


@register("sft_path_count", "generators", "#X_n equals the number of length-n edge paths", applies=_is_sft)
def _sft_count(ctx):
    return float(max(abs(len(ctx.table.levels[n]) - ctx.generator.count(n)) for n in range(ctx.N + 1)))


@register("perron_residual", "generators", "A^T u = lambda u and A v = lambda v for the Perron pair", applies=_is_sft)
def _perron(ctx):
    pd = perron(ctx.generator)
    return float(max(pd.residuals(ctx.generator.incidence)))


# -- measures


@register("total_mass", "measures", "cylinder masses sum to one on every level")
def _total_mass(ctx):
    return max(ctx.measure.total_mass_defects())


@register("additivity", "measures", "mu(w) equals the total mass of its children")
def _additivity(ctx):
    return ctx.measure.additivity_defect()


@register("shift_invariance", "measures", "left and right one-letter extensions carry the mass of w")
def _left_right(ctx):
    return ctx.measure.left_right_defect()


@register("positive_mass", "measures", "every admissible word has positive mass", tol=0.0)
def _positive(ctx):
    return 0.0 if ctx.measure.min_mass() > 0 else 1.0


@register("three_distance", "measures", "arc lengths take at most three values, two at the band boundary", tol=0.0, applies=_is_sturmian)
def _three_distance(ctx):
    m = ctx.measure
    if m.forms is None:
        return 0.0
    bad = 0
    for n in range(1, m.max_level + 1):
        band = three_distance_set(ctx.generator, n)
        bad += sum(f not in band.values for f in m.forms[n])
        if band.third_absent:
            bad += len(set(m.forms[n])) > 2
    return float(bad)


# -- hilbert


@register("projection_idempotent", "hilbert", "P_n is an orthogonal projection onto the level-n functions")
def _projections(ctx):
    s = ctx.space
    rng = np.random.default_rng(ctx.seed)
    f = s.random_function(rng)
    worst = 0.0
    for n in range(s.N + 1):
        g = project(f, n)
        worst = max(worst, float(np.max(np.abs(project(g, n).values - g.values))))
        worst = max(worst, abs((f - g).inner(g)))
        worst = max(worst, 0.0 if g.in_level(n, tol=1e-9) else 1.0)
    return worst


@register("dirac_spectrum", "hilbert", "D has eigenvalue alpha_n with multiplicity #X_n - #X_{n-1}", tol=1e-8)
def _dirac_spectrum(ctx):
    s = ctx.space
    if s.dim > 1500:
        raise InsufficientDataError("spectrum check limited to dimension 1500")
    ev = np.sort(np.linalg.eigvalsh(ctx.D.matrix))
    c = ctx.table.counts()
    expected = np.sort(np.concatenate([[ctx.D.alpha[0]]] + [np.full(c[n] - c[n - 1], ctx.D.alpha[n]) for n in range(1, s.N + 1)]))
    return float(np.max(np.abs(ev - expected)))


@register("commutator_antisymmetric", "hilbert", "[D, f] is antisymmetric for real f")
def _antisym(ctx):
    rng = np.random.default_rng(ctx.seed + 1)
    f = ctx.space.random_function(rng)
    M = commutator(ctx.space, ctx.D, f).matrix
    return float(np.max(np.abs(M + M.T)))


# -- analysis


@register("eta_zeta_calculus", "analysis", "support, square, norm, oscillation and rank-two commutator of eta(w)", tol=1e-9)
def _eta_zeta(ctx):
    s, t = ctx.space, ctx.table
    worst = 0.0
    keys = ("in_C_n+1", "perp_C_n", "square", "norm2", "osc", "zeta_in_C_n", "rank2", "norm_product")
    for n in range(t.max_level):
        for p, sp in zip(t.levels[n], t.special(n)):
            if not sp:
                continue
            for w in t.children_of(p):
                r = eta_zeta_checks(s, ctx.D, w)
                worst = max(worst, *(r[k] for k in keys), max(0.0, -r["bound_margin"]))
    return worst


@register("commutant_is_constants", "analysis", "only constants commute with D", tol=0.0)
def _commutant(ctx):
    r = commutant_dimension(ctx.space, ctx.D)
    return float(abs(r["dimension"] - 1) + r["ambiguous"])


@register("q_decomposition", "analysis", "f = P_0 f + sum over special w of Q_w f")
def _q_decomposition(ctx):
    rng = np.random.default_rng(ctx.seed + 2)
    return q_reconstruction_defect(ctx.space, ctx.space.random_function(rng))


@register("lip_of_xi_finite", "analysis", "||[D, xi(w)]|| is finite and vanishes only for constants", tol=0.0)
def _lip_xi(ctx):
    s = ctx.space
    w = s.table.levels[1][0]
    lip = operator_norm(commutator(s, ctx.D, s.xi(w)))
    return 0.0 if math.isfinite(lip) and (lip > 0 or len(s.table.levels[1]) == 1) else 1.0


@dataclass
class Outcome:
    name: str
    module: str
    anchor: str
    value: float
    tol: float
    status: str  # pass | fail | skipped
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "module": self.module,
            "anchor": self.anchor,
            "value": self.value,
            "tol": self.tol,
            "status": self.status,
            "detail": self.detail,
        }


def run_all(ctx: Context) -> list[Outcome]:
    out = []
    for inv in REGISTRY:
        if not inv.applies(ctx):
            continue
        try:
            v = float(inv.check(ctx))
        except (InsufficientDataError, ValidationError) as exc:
            out.append(Outcome(inv.name, inv.module, inv.anchor, float("nan"), inv.tol, "skipped", str(exc)))
            continue
        ok = v <= inv.tol
        out.append(Outcome(inv.name, inv.module, inv.anchor, v, inv.tol, "pass" if ok else "fail"))
    return out
