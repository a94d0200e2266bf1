"""Experiments on the truncated spectral triples.

Summability of the Dirac operator, the commutant of D, witness functions
whose oscillation outgrows their Lipschitz seminorm, the Q_w estimates and
the explicit tail bound for linearly recurrent subshifts.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InsufficientDataError, InvariantError, PrecisionError, ValidationError
from .generators import ContinuedFraction, Interval, LinearForm, SftGraph, perron
from .hilbert import (
    Dirac,
    LevelFunction,
    TruncatedSpace,
    commutator,
    eta,
    make_alpha,
    operator_norm,
    project,
    q_projection,
    zeta,
)
from .measures import MeasureAssignment, ratio_R, ratio_R_level
from .words import LanguageTable, entropy_profile, pi, project_word, return_words, window

log = logging.getLogger(__name__)


def _harmonic(K: int) -> float:
    return float(sum(1.0 / k for k in range(1, K + 1)))


# ---------------------------------------------------------------------------
# summability


@dataclass
class SummabilityReport:
    kind: str
    s: float
    N: int
    terms: list[float]
    partial_sums: list[float]
    verdict: str  # converging | diverging | inconclusive
    rule: str
    estimate: float  # entropy or fitted degree the verdict is measured against
    margin: float
    trend: str  # what the terms themselves do at the end of the data
    evidence: dict = field(default_factory=dict)

    @property
    def tail_term(self) -> float:
        return self.terms[-1]

    def to_dict(self) -> dict:
        return asdict(self)


def _counts(source, N: int) -> list[int]:
    if isinstance(source, LanguageTable):
        c = source.counts()
        if len(c) < N + 1:
            raise InsufficientDataError(f"table stops at level {len(c) - 1}, need {N}")
        return c[: N + 1]
    if hasattr(source, "count"):  # exact path counts of an SFT
        return [source.count(n) for n in range(N + 1)]
    c = list(source)
    if len(c) < N + 1:
        raise InsufficientDataError(f"complexity sequence has {len(c)} values, need {N + 1}")
    return c[: N + 1]


def _increments(c: list[int]) -> list[int]:
    return [c[0]] + [c[n] - c[n - 1] for n in range(1, len(c))]


def exp_summability(source, s: float, N: int, margin: float = 0.1) -> SummabilityReport:
    """Partial sums of ``sum e^{-sn} (#X_n - #X_{n-1})``.

    Verdict: converging if ``s`` exceeds the entropy estimate by ``margin``,
    diverging if it falls short by ``margin``. The trend field records the
    ratio of the last terms independently of the entropy estimate.
    """
    c = _counts(source, N)
    inc = _increments(c)
    terms = [math.exp(-s * n + math.log(d)) if d > 0 else 0.0 for n, d in enumerate(inc)]
    partial = list(np.cumsum(terms))
    ratios, running = entropy_profile(c)
    h = running[-1]
    verdict = "converging" if s > h + margin else "diverging" if s < h - margin else "inconclusive"
    tail = [t for t in terms[-6:] if t > 0]
    rate = (tail[-1] / tail[0]) ** (1 / (len(tail) - 1)) if len(tail) > 1 else 1.0
    trend = "diverging" if rate > 1 + 1e-9 else "converging" if rate < 1 - 1e-3 else "inconclusive"
    if trend == "inconclusive":
        # polynomially growing increments against e^{-sn} still decay; check the tail sum is small
        trend = "converging" if s > 0 and terms[-1] < 1e-6 * partial[-1] else "inconclusive"
    return SummabilityReport(
        "exp",
        s,
        N,
        terms,
        [float(x) for x in partial],
        verdict,
        f"entropy estimate {h:.6g}, margin {margin}",
        h,
        margin,
        trend,
        {"tail_ratio": rate, "entropy_ratios_last": ratios[-1]},
    )


def fitted_degree(c: list[int], start: int | None = None) -> float:
    """Least-squares slope of ``log #X_n`` against ``log n`` over the second half of the data."""
    N = len(c) - 1
    start = start if start is not None else max(1, N // 2)
    n = np.arange(start, N + 1, dtype=float)
    y = np.log(np.array([float(x) for x in c[start:]]))
    return float(np.polyfit(np.log(n), y, 1)[0])


def power_summability(source, s: float, N: int, margin: float = 0.3) -> SummabilityReport:
    """Partial sums of ``sum (1+n^2)^{-s/2} (#X_n - #X_{n-1})`` with a verdict against the fitted degree."""
    c = _counts(source, N)
    inc = _increments(c)
    terms = [float(np.exp(-0.5 * s * np.log1p(n * n) + np.log(d))) if d > 0 else 0.0 for n, d in enumerate(inc)]
    partial = list(np.cumsum(terms))
    d_hat = fitted_degree(c)
    verdict = "converging" if s > d_hat + margin else "diverging" if s < d_hat - margin else "inconclusive"
    # tail exponent of the terms: terms ~ n^{-beta}; the series converges iff beta > 1
    lo = max(1, N // 2)
    nn = np.arange(lo, N + 1, dtype=float)
    tt = np.array(terms[lo:])
    pos = tt > 0
    beta = float(-np.polyfit(np.log(nn[pos]), np.log(tt[pos]), 1)[0]) if pos.sum() >= 2 else float("nan")
    growing = all(b > a for a, b in zip(terms[-6:], terms[-5:]))
    if growing or beta < 1 - 0.05:
        trend = "diverging"
    elif beta > 1 + 0.05:
        trend = "converging"
    else:
        trend = "inconclusive"
    return SummabilityReport(
        "power",
        s,
        N,
        terms,
        [float(x) for x in partial],
        verdict,
        f"fitted complexity degree {d_hat:.6g}, margin {margin}",
        d_hat,
        margin,
        trend,
        {"tail_exponent": beta, "terms_increasing_at_end": growing},
    )


# ---------------------------------------------------------------------------
# commutant of D


def commutant_dimension(space: TruncatedSpace, D: Dirac, tol: float = 1e-9) -> dict:
    """Dimension of ``{f in C_N : [D, f] = 0}``.

    ``||[D, M_f]||_HS^2 = 2 f^T L f`` where ``L`` is the graph Laplacian with
    weights ``D_ij^2``; the commutant is the kernel of ``L``.
    """
    M = D.matrix
    W = M * M
    np.fill_diagonal(W, 0.0)
    L = np.diag(W.sum(axis=1)) - W
    ev = np.linalg.eigvalsh(L)
    scale = max(float(ev[-1]), 1e-300)
    rel = ev / scale
    dim = int(np.sum(rel < tol))
    ambiguous = bool(np.any((rel >= tol / 100) & (rel < tol * 100)))
    if ambiguous:
        log.warning("commutant rank is ambiguous: singular values near the tolerance")
    gap = float(rel[dim]) if dim < len(rel) else 0.0
    return {"dimension": dim, "relative_gap": gap, "ambiguous": ambiguous, "size": space.dim}


def commutant_dimension_svd(space: TruncatedSpace, D: Dirac, tol: float = 1e-9) -> int:
    """Same quantity from the SVD of ``f -> vec([D, M_f])``; only for small spaces."""
    M = D.matrix
    d = space.dim
    cols = np.empty((d * d, d))
    for i in range(d):
        C = np.zeros((d, d))
        C[:, i] += M[:, i]
        C[i, :] -= M[i, :]  # [D, E_ii] = D E_ii - E_ii D
        cols[:, i] = C.ravel()
    sv = np.linalg.svd(cols, compute_uv=False)
    return int(np.sum(sv < tol * sv[0]))


# ---------------------------------------------------------------------------
# eta / zeta calculus


def eta_zeta_checks(space: TruncatedSpace, D: Dirac, w: str) -> dict:
    """Residuals of the identities for ``eta(w)`` and ``zeta(w)`` (``pi w`` special)."""
    p = pi(w)
    n = len(p)
    e = eta(space, w)
    z = zeta(space, D, w)
    r = space.mu(p) / space.mu(w)
    xp = space.xi(p)
    out = {"word": w, "level": n + 1, "ratio": r}
    out["in_C_n+1"] = float(np.max(np.abs(project(e, n + 1).values - e.values)))
    out["perp_C_n"] = float(np.max(np.abs(project(e, n).values)))
    out["square"] = float(np.max(np.abs((e * e).values - ((r - 2) * e + (r - 1) * xp).values)))
    out["norm2"] = abs(e.norm2() ** 2 - space.mu(p) * (r - 1))
    out["osc"] = abs(e.osc() - r / 2)
    out["zeta_in_C_n"] = float(np.max(np.abs(project(z, n).values - z.values)))
    out["zeta_norm"] = z.norm2()
    C = commutator(space, D, e)  # [D, eta] = -[eta, D]
    A = -C.matrix if space.dim <= 2500 else None
    xe, xz = e.coords, z.coords
    if A is not None:
        out["rank2"] = float(np.max(np.abs(A - (np.outer(xe, xz) - np.outer(xz, xe)))))
        lip = float(np.linalg.norm(A, 2))
    else:
        rng = np.random.default_rng(0)
        X = rng.standard_normal((space.dim, 4))
        lhs = -(C @ X)
        rhs = np.outer(xe, xz @ X) - np.outer(xz, xe @ X)
        out["rank2"] = float(np.max(np.abs(lhs - rhs)))
        lip = operator_norm(C)
    out["lip"] = lip
    out["norm_product"] = abs(lip - e.norm2() * z.norm2())
    out["bound_margin"] = math.sqrt(r) * D.alpha[n + 1] - lip
    return out


# ---------------------------------------------------------------------------
# shift of finite type: the f_K witnesses


@dataclass
class WitnessReport:
    label: str
    words: list[str]
    levels: list[int]
    lip: float
    osc: float
    ratio_quantity: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SftCycle:
    vertex: int  # index of a vertex with at least two incoming edges
    cycle: str  # w = e_1..e_p with i(e_1) = t(e_p) = vertex
    a: float  # mu(pi(w_k)) / mu(w_k)

    @property
    def p(self) -> int:
        return len(self.cycle)

    def w_k(self, k: int) -> str:
        return self.cycle[-1] + self.cycle * (2 * k)


def find_sft_cycle(graph: SftGraph, measure: MeasureAssignment | None = None) -> SftCycle:
    """Branching vertex of smallest index and a shortest cycle through it."""
    cands = [j for j in range(len(graph.vertices)) if len(graph.in_edges[j]) > 1]
    if not cands:
        raise ValidationError("no vertex has two incoming edges; the f_K construction does not apply")
    j = cands[0]
    # breadth-first search over paths leaving j until one returns
    queue: deque[tuple[int, str]] = deque((e.terminal, e.label) for e in graph.out_edges[j])
    seen: set[int] = set()
    cycle = None
    while queue:
        v, path = queue.popleft()
        if v == j:
            cycle = path
            break
        if v in seen:
            continue
        seen.add(v)
        queue.extend((e.terminal, path + e.label) for e in graph.out_edges[v])
    if cycle is None:
        raise ValidationError("graph is not irreducible")
    a = float("nan")
    if measure is not None:
        c0 = SftCycle(j, cycle, float("nan"))
        w1 = c0.w_k(1)
        if len(w1) <= measure.max_level:
            a = measure(pi(w1)) / measure(w1)
    return SftCycle(j, cycle, a)


def fk_function(space: TruncatedSpace, cyc: SftCycle, K: int) -> LevelFunction:
    f = space.constant(0.0)
    for k in range(1, K + 1):
        f = f + eta(space, cyc.w_k(k)) / k
    return f


def lowrank_lip(space: TruncatedSpace, D: Dirac, words: list[str], coeffs: list[float]) -> float:
    """``||[D, sum c_k eta(w_k)]||`` from the rank-two pieces; only needs a ``2K x 2K`` eigenproblem."""
    E = np.column_stack([eta(space, w).coords for w in words])
    Z = np.column_stack([zeta(space, D, w).coords for w in words])
    Q, R = np.linalg.qr(np.hstack([E, Z]))
    K = len(words)
    C = np.diag(coeffs)
    M = np.block([[np.zeros((K, K)), C], [-C, np.zeros((K, K))]])
    return float(np.linalg.norm(R @ M @ R.T, 2))


def sft_fk_experiment(graph: SftGraph, table: LanguageTable, measure: MeasureAssignment, K_max: int, alpha="linear") -> list[WitnessReport]:
    """``f_K = sum_{k<=K} eta(w_k)/k`` with ``w_k = e_p w^{2k}``, for ``K = 1..K_max``.

    The exact oscillation is ``((a-1) H_K + 1)/2``: ``f_K`` equals
    ``(a-1) H_K`` on ``U(w_K)`` and ``-1`` on ``U(pi w_1) minus U(w_1)``.
    """
    cyc = find_sft_cycle(graph, measure)
    if not cyc.a > 1:
        raise InvariantError(f"mass ratio a = {cyc.a} is not above 1; the witness construction fails")
    need = 2 * cyc.p * K_max + 1
    if table.max_level < need:
        raise InsufficientDataError(f"f_{K_max} needs level {need}; table stops at {table.max_level}; reduce K_max")
    out = []
    for K in range(1, K_max + 1):
        N = 2 * cyc.p * K + 1
        space = TruncatedSpace(table, measure, N)
        D = Dirac(space, make_alpha(alpha, N))
        f = fk_function(space, cyc, K)
        words = [cyc.w_k(k) for k in range(1, K + 1)]
        lip_direct = operator_norm(commutator(space, D, f))
        lip_low = lowrank_lip(space, D, words, [1.0 / k for k in range(1, K + 1)])
        H = _harmonic(K)
        rep = WitnessReport(
            f"f_{K}",
            words,
            [len(w) for w in words],
            lip_direct,
            f.osc(),
            extra={
                "K": K,
                "a": cyc.a,
                "harmonic": H,
                "lip_lowrank": lip_low,
                "osc_claimed": 0.5 * (cyc.a - 1) * H,
                "osc_exact": 0.5 * ((cyc.a - 1) * H + 1),
                "plateau_value": (cyc.a - 1) * H,
                "min_value": float(f.values.min()),
                "dimension": space.dim,
            },
        )
        out.append(rep)
    return out


def sft_projection_identities(graph: SftGraph, table: LanguageTable, measure: MeasureAssignment, k: int) -> dict:
    """Residuals of the projection identities for ``xi(pi(w_k))`` at one index ``k``.

    With ``s_j = xi(w^{2j})`` (so ``s_0 = 1``):

    1. ``P_{2p(k-1)} s_k = lambda^{-2p} s_{k-1}``
    2. ``s_k - lambda^{-2p} s_{k-1}`` lies in ``C_{2pk}`` and is orthogonal to ``C_{2p(k-1)}``
    3. its squared norm is ``u_j v_j (1 - lambda^{-2p}) lambda^{-2pk}``
    4. ``s_k = sum_{i<=k} lambda^{-2p(k-i)} (s_i - lambda^{-2p} s_{i-1}) + lambda^{-2pk}``

    Points 1-3 need ``k >= 2``: at ``k = 1`` the left side of 1 is
    ``mu(w^2) = u_j v_j lambda^{-2p}``, off by the factor ``u_j v_j``. The
    ``k = 1`` residuals are still computed and reported next to that factor.
    """
    if k < 1:
        raise ValidationError("k starts at 1")
    cyc = find_sft_cycle(graph, measure)
    p = cyc.p
    N = 2 * p * k
    if table.max_level < N:
        raise InsufficientDataError(f"identities at k={k} need level {N}")
    space = TruncatedSpace(table, measure, N)
    pd = perron(graph)
    lam = pd.lam
    uv = pd.u[cyc.vertex] * pd.v[cyc.vertex]

    def s(j: int) -> LevelFunction:
        return space.xi(cyc.cycle * (2 * j))

    shrink = lam ** (-2 * p)
    lhs = project(s(k), 2 * p * (k - 1))
    rhs = shrink * s(k - 1)
    diff = s(k) - rhs
    memb = max(
        float(np.max(np.abs(project(diff, 2 * p * k).values - diff.values))),
        float(np.max(np.abs(project(diff, 2 * p * (k - 1)).values))),
    )
    expected = uv * (1 - shrink) * lam ** (-2 * p * k)
    total = space.constant(lam ** (-2 * p * k))
    for i in range(1, k + 1):
        total = total + lam ** (-2 * p * (k - i)) * (s(i) - shrink * s(i - 1))
    return {
        "k": k,
        "p": p,
        "uv": float(uv),
        "pt1": float(np.max(np.abs(lhs.values - rhs.values))),
        "pt2": memb,
        "pt3": float(abs(diff.norm2() ** 2 - expected)),
        "pt4": float(np.max(np.abs(total.values - s(k).values))),
        "k1_expected_defect": float(abs(uv - 1) * shrink) if k == 1 else 0.0,
    }


# ---------------------------------------------------------------------------
# Sturmian witnesses


def _ratio_enclosure(num: LinearForm, den: LinearForm, br: Interval) -> Interval:
    """Enclosure of ``num/den`` over the bracket; a Moebius map is monotone there."""
    if den.sign(br) <= 0:
        raise PrecisionError("denominator not certified positive")
    vals = [Fraction(num.c0 + num.c1 * t) / Fraction(den.c0 + den.c1 * t) for t in (br.lo, br.hi)]
    return Interval(min(vals), max(vals))


# length-(m+1) factors first show up near the end of s_{n+1}, of length q_{n+1}
MATERIALISE_LIMIT = 100_000


def sturmian_witness(cf: ContinuedFraction, n: int, build_function: bool = True, alpha="linear") -> WitnessReport:
    """Witness at ``m = q_n + q_{n-1} - 1``: the unique special word there has mass ``lambda_n``
    and a child of mass ``lambda_{n+1}``.

    ``ratio_quantity = (m+1)^{-2} lambda_n / lambda_{n+1}``, certified by an
    exact enclosure. When the language is small enough to materialise, the
    function ``f_w = (m+1)^{-1} r^{-1/2} eta(w)`` is built and measured.
    """
    if n < 1:
        raise ValidationError("n starts at 1")
    if cf.depth < n + 1:
        raise PrecisionError(f"the witness at n={n} needs {n + 1} partial quotients, have {cf.depth}")
    m = cf.q(n) + cf.q(n - 1) - 1
    br = cf.bracket
    ln, ln1 = cf.lambda_form(n), cf.lambda_form(n + 1)
    ratio = _ratio_enclosure(ln, ln1, br)
    rq = Interval(ratio.lo / (m + 1) ** 2, ratio.hi / (m + 1) ** 2)
    if rq.width > Fraction(1, 10**9) * max(rq.hi, 1):
        raise PrecisionError("enclosure of lambda_n / lambda_{n+1} too wide; supply more quotients")
    extra = {
        "n": n,
        "m": m,
        "a_next": cf.a(n + 1),
        "ratio_lo": float(ratio.lo),
        "ratio_hi": float(ratio.hi),
        "ratio_quantity_lo": float(rq.lo),
        "ratio_quantity_hi": float(rq.hi),
        "certified_at_least_n": bool(rq.lo >= n),
    }
    words: list[str] = []
    lip = osc = float("nan")
    if build_function and cf.q(n + 1) > MATERIALISE_LIMIT:
        extra["function"] = f"not materialised: q_{n + 1} = {cf.q(n + 1)} exceeds {MATERIALISE_LIMIT}"
    elif build_function:
        try:
            from .measures import sturmian_measure

            table = cf.language(m + 1)
        except PrecisionError as exc:
            extra["function"] = f"not materialised: {exc}"
        else:
            meas = sturmian_measure(cf, table)
            special = [w for w in table.levels[m] if table.is_special(w)]
            if len(special) != 1:
                raise InvariantError(f"expected one special word at length {m}, found {len(special)}")
            sw = special[0]
            if meas.forms[m][table.id(sw)] != ln:
                raise InvariantError("the special word does not carry mass lambda_n")
            kids = table.children_of(sw)
            w = next(c for c in kids if meas.forms[m + 1][table.id(c)] == ln1)
            space = TruncatedSpace(table, meas, m + 1)
            D = Dirac(space, make_alpha(alpha, m + 1))
            r = space.mu(sw) / space.mu(w)
            f = eta(space, w) / ((m + 1) * math.sqrt(r))
            lip = operator_norm(commutator(space, D, f))
            osc = f.osc()
            words = [w]
            extra.update(
                {
                    "special_word": sw,
                    "r": r,
                    "osc_predicted": math.sqrt(r) / (2 * (m + 1)),
                    "lip_bound": 1.0,
                }
            )
    return WitnessReport(f"sturmian_n{n}", words, [m + 1] if words else [], lip, osc, float(rq.mid), extra)


# ---------------------------------------------------------------------------
# Q_w control


class _QwContext:
    """Pieces shared by every ``(w, m)`` check on one function."""

    def __init__(self, space: TruncatedSpace, D: Dirac, f: LevelFunction, lip: float | None):
        self.space, self.D, self.f = space, D, f
        self.C = commutator(space, D, f)
        self.lip = operator_norm(self.C) if lip is None else lip
        self._Q: dict[str, LevelFunction] = {}
        self._Ce: dict[str, np.ndarray] = {}
        self._R: dict[str, float] = {}

    def Q(self, w: str) -> LevelFunction:
        if w not in self._Q:
            self._Q[w] = q_projection(self.space, w, self.f)
        return self._Q[w]

    def C_eta(self, w: str) -> np.ndarray:
        if w not in self._Ce:
            self._Ce[w] = self.C @ eta(self.space, w).coords
        return self._Ce[w]

    def R(self, w: str) -> float:
        if w not in self._R:
            self._R[w] = ratio_R(self.space.table, self.space.measure, w)
        return self._R[w]

    def check(self, w: str, m: int) -> dict:
        s, t = self.space, self.space.table
        n = len(w)
        if not m < n or n + 1 > s.N:
            raise ValidationError(f"need m < n = {n} and level {n + 1} available")
        wm = project_word(t, w, m)
        wm1 = project_word(t, w, m + 1)
        if not t.is_special(w) or not t.is_special(wm):
            raise ValidationError(f"{w!r} and its level-{m} ancestor must both be special")
        Q = self.Q(w)
        lhs = float(np.dot(self.C_eta(wm1), Q.coords))
        gap = self.D.alpha[n + 1] - self.D.alpha[m + 1]
        rhs = gap * Q.norm2() ** 2 * (s.mu(wm) / s.mu(wm1) - 1)
        common = math.sqrt(self.R(w) * self.R(wm)) / gap / math.sqrt(s.mu(w))
        printed = common * math.sqrt(s.mu(wm1))
        derived = common * math.sqrt(s.mu(wm))
        q_sup = Q.sup()
        return {
            "word": w,
            "m": m,
            "identity_lhs": lhs,
            "identity_rhs": rhs,
            "identity_residual": abs(lhs - rhs),
            "lip": self.lip,
            "q_sup": q_sup,
            "bound_printed": printed,
            "bound_derived": derived,
            # Q_w f is linear in f, so the bounds scale with lip
            "margin_printed": printed * self.lip - q_sup,
            "margin_derived": derived * self.lip - q_sup,
        }


def qw_bound_check(space: TruncatedSpace, D: Dirac, f: LevelFunction, w: str, m: int, lip: float | None = None) -> dict:
    """Inner-product identity and sup-norm bound for ``Q_w f``.

    Needs ``w`` special at level ``n``, ``pi_m(w)`` special and ``m < n``.
    The bound assumes ``||[D,f]|| <= 1``; pass ``lip`` to skip recomputing it.
    Two bounds are reported: the printed one with ``mu(pi_{m+1} w)^{1/2}``
    and the one the argument delivers, with ``mu(pi_m w)^{1/2}``.
    """
    return _QwContext(space, D, f, lip).check(w, m)


def qw_pairs(table: LanguageTable, N: int) -> list[tuple[str, int]]:
    """All ``(w, m)`` with ``w`` special at level ``n <= N-1`` and ``pi_m(w)`` special, ``m < n``."""
    out = []
    for n in range(1, N):
        for w in table.levels[n]:
            if not table.is_special(w):
                continue
            for m in range(n):
                if table.is_special(project_word(table, w, m)):
                    out.append((w, m))
    return out


def qw_random_trial(space: TruncatedSpace, D: Dirac, rng: np.random.Generator, pairs=None) -> dict:
    """One lip-normalised random ``f`` tested on every admissible ``(w, m)``."""
    f = space.random_function(rng)
    f = f - project(f, 0)
    f = f / operator_norm(commutator(space, D, f))
    ctx = _QwContext(space, D, f, lip=1.0)
    pairs = qw_pairs(space.table, space.N) if pairs is None else pairs
    worst = {"identity_residual": 0.0, "margin_printed": math.inf, "margin_derived": math.inf, "pairs": len(pairs)}
    for w, m in pairs:
        r = ctx.check(w, m)
        worst["identity_residual"] = max(worst["identity_residual"], r["identity_residual"])
        worst["margin_printed"] = min(worst["margin_printed"], r["margin_printed"])
        worst["margin_derived"] = min(worst["margin_derived"], r["margin_derived"])
    return worst


def q_reconstruction_defect(space: TruncatedSpace, f: LevelFunction) -> float:
    """``max |f - P_0 f - sum_w Q_w f|``, sum over special ``w`` below level ``N``."""
    g = project(f, 0)
    for n in range(space.N):
        for w, s in zip(space.table.levels[n], space.table.special(n)):
            if s:
                g = g + q_projection(space, w, f)
    return float(np.max(np.abs(g.values - f.values)))


# ---------------------------------------------------------------------------
# linear recurrence


def estimate_lr_constant(table: LanguageTable, measure: MeasureAssignment, sample: str, max_len: int | None = None) -> dict:
    """``K_hat``: the largest of ``|r|/|w|`` over return words seen in ``sample`` and of
    ``max(n mu(w), 1/(n mu(w)))`` over the table, for ``|w| <= max_len``."""
    L = max_len or table.max_level
    ret_ratio, freq = 1.0, 1.0
    per_level = []
    for n in range(1, L + 1):
        lvl_ret = 1.0
        for w in table.levels[n]:
            rw = return_words(sample, w, horizon=len(sample))
            if rw.returns:
                lvl_ret = max(lvl_ret, rw.max_ratio())
        mu = measure.mu[n]
        lvl_freq = float(max(np.max(n * mu), np.max(1.0 / (n * mu))))
        ret_ratio, freq = max(ret_ratio, lvl_ret), max(freq, lvl_freq)
        per_level.append({"n": n, "return_ratio": lvl_ret, "frequency_bound": lvl_freq, "K_running": max(ret_ratio, freq)})
    return {"K_hat": max(ret_ratio, freq), "return_ratio": ret_ratio, "frequency_bound": freq, "per_level": per_level}


def centred_window(sample: str, pos: int, n: int) -> str:
    lo, hi = window(n)
    if pos + lo < 0 or pos + hi >= len(sample):
        raise InsufficientDataError("window leaves the sample")
    return sample[pos + lo : pos + hi + 1]


def lr_certificate(table: LanguageTable, measure: MeasureAssignment, K_hat: float, N: int, sample: str, n_points: int = 200, k0_max: int = 12, seed: int = 0) -> dict:
    """Uniform tail bound ``sum_{k>=k0} K(K+1)^2 C alpha^k`` with constants from data.

    ``C_0 = sup (R(w) R(empty))^{1/2}`` over special words, ``C = C_0 (K(1+1/K))^{1/2}``
    and ``alpha = (1+1/K)^{-1/2}``. Band counts of special ancestors of
    sampled points are checked against ``K(K+1)^2``.
    """
    K = float(K_hat)
    if N > table.max_level - 1:
        raise InsufficientDataError(f"special flags known up to level {table.max_level - 1}")
    R0 = ratio_R(table, measure, "")
    sup_R = max(float(np.max(ratio_R_level(measure, n)[table.special(n)])) for n in range(1, N + 1))
    C0 = math.sqrt(sup_R * R0)
    ratio = 1 + 1 / K
    alpha = ratio**-0.5
    C = C0 * math.sqrt(K * ratio)
    branch = K * (K + 1) ** 2
    tail = {k0: branch * C * alpha**k0 / (1 - alpha) for k0 in range(0, k0_max + 1)}
    # band counts along sampled points
    rng = np.random.default_rng(seed)
    margin = N // 2 + 2
    points = rng.integers(margin, len(sample) - margin, size=n_points)
    bands: dict[int, int] = {}
    k = 0
    while ratio**k <= N:
        bands[k] = 0
        k += 1
    for pos in points:
        per = {}
        for n in range(1, N + 1):
            kk = int(math.floor(math.log(n) / math.log(ratio) + 1e-12))
            w = centred_window(sample, int(pos), n)
            if table.is_special(w):
                per[kk] = per.get(kk, 0) + 1
        for kk, c in per.items():
            bands[kk] = max(bands.get(kk, 0), c)
    exceeded = {k: c for k, c in bands.items() if c > branch}
    if exceeded:
        raise InvariantError(f"band counts {exceeded} exceed K(K+1)^2 = {branch:.3g}; K_hat is too small")
    return {
        "K_hat": K,
        "C0": C0,
        "C": C,
        "alpha": alpha,
        "branch_bound": branch,
        "tail_bound": tail,
        "band_counts": bands,
        "sup_R": sup_R,
        "R_empty": R0,
    }
