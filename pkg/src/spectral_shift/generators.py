"""Exact factor sets and arithmetic data for three families of subshifts.

* shifts of finite type given by a directed multigraph (letters are edges),
* primitive substitutions,
* Sturmian shifts given by the continued fraction of their slope.

The slope of a Sturmian shift is never held as a float. It is the sequence of
partial quotients together with the open interval of reals sharing that
prefix; quantities of the form ``c0 + c1*theta`` are kept as exact integer
pairs and compared through that interval.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import floor
from typing import Hashable, Iterable, Sequence

import numpy as np

from .errors import InvariantError, NumericError, PrecisionError, ValidationError
from .words import LanguageTable, build_language

log = logging.getLogger(__name__)

# standard-word construction stops here; longer words are a precision problem
MAX_WORD_LENGTH = 20_000_000


# ---------------------------------------------------------------------------
# Perron-Frobenius data


def perron_pair(A, tol: float = 1e-14, max_iter: int = 200_000) -> tuple[float, np.ndarray, np.ndarray]:
    """Perron eigenvalue with positive left/right eigenvectors of a nonnegative
    irreducible matrix.

    Power iteration runs on ``A + I``: it has the same eigenvectors, and its
    Perron root is strictly dominant even when ``A`` itself is periodic.
    Vectors are returned normalised to unit sum; callers renormalise.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    B = A + np.eye(n)

    def iterate(M):
        x = np.full(n, 1.0 / n)
        rho = 0.0
        for it in range(max_iter):
            y = M @ x
            rho_new = float(y.sum())  # x has unit sum, so this is the Rayleigh-type estimate
            y /= rho_new
            if abs(rho_new - rho) <= tol * rho_new and np.max(np.abs(y - x)) <= 10 * tol:
                return rho_new, y
            x, rho = y, rho_new
        raise NumericError(f"power iteration did not converge in {max_iter} steps")

    rho_r, v = iterate(B)
    rho_l, u = iterate(B.T)
    lam = 0.5 * (rho_r + rho_l) - 1.0
    if np.any(v <= 0) or np.any(u <= 0):
        raise NumericError("Perron vectors are not strictly positive; is the matrix irreducible?")
    return lam, u, v


@dataclass(frozen=True)
class PerronData:
    lam: float
    u: np.ndarray  # left eigenvector
    v: np.ndarray  # right eigenvector, sum(v) == 1, u . v == 1

    def residuals(self, A) -> tuple[float, float]:
        A = np.asarray(A, dtype=float)
        return (
            float(np.max(np.abs(self.u @ A - self.lam * self.u))),
            float(np.max(np.abs(A @ self.v - self.lam * self.v))),
        )


# ---------------------------------------------------------------------------
# Shifts of finite type


@dataclass(frozen=True)
class Edge:
    label: str
    initial: int  # vertex index
    terminal: int


class SftGraph:
    """Directed multigraph whose bi-infinite edge paths form the subshift.

    Edge labels must be single characters; vertices may be any hashables and
    are indexed in sorted order.
    """

    family = "sft"

    def __init__(self, edges: Iterable[Sequence]):
        raw = [tuple(e) for e in edges]
        if not raw:
            raise ValidationError("an SFT needs at least one edge")
        labels = [str(e[0]) for e in raw]
        if any(len(l) != 1 for l in labels):
            raise ValidationError(f"edge labels must be single characters, got {labels}")
        if len(set(labels)) != len(labels):
            raise ValidationError("edge labels must be distinct")
        verts: list[Hashable] = sorted({e[1] for e in raw} | {e[2] for e in raw}, key=lambda x: (str(type(x)), x))
        vid = {x: i for i, x in enumerate(verts)}
        self.vertices = tuple(verts)
        self.edges = tuple(Edge(str(l), vid[i], vid[t]) for l, i, t in raw)
        self.by_label = {e.label: e for e in self.edges}
        I = len(verts)
        A = np.zeros((I, I), dtype=np.int64)
        for e in self.edges:
            A[e.initial, e.terminal] += 1
        self.incidence = A
        self.out_edges = tuple(tuple(e for e in self.edges if e.initial == i) for i in range(I))
        self.in_edges = tuple(tuple(e for e in self.edges if e.terminal == i) for i in range(I))
        self.irreducible = self._check_irreducible()
        # for an irreducible graph the path space is finite iff the graph is a single cycle
        self.aperiodic = self.irreducible and any(len(o) > 1 for o in self.out_edges)

    @classmethod
    def from_spec(cls, spec: dict) -> "SftGraph":
        return cls(spec["edges"])

    def __repr__(self) -> str:
        return f"SftGraph({[(e.label, self.vertices[e.initial], self.vertices[e.terminal]) for e in self.edges]})"

    def _check_irreducible(self) -> bool:
        R = (self.incidence > 0).astype(np.int64)
        n = len(R)
        reach = np.eye(n, dtype=np.int64) | R
        for _ in range(n):
            reach = ((reach @ reach) > 0).astype(np.int64)
        return bool(np.all((R @ reach) > 0))

    def require_valid(self) -> None:
        if not self.irreducible:
            raise ValidationError("graph is reducible: some vertex cannot reach another")
        if not self.aperiodic:
            raise ValidationError("graph is a single cycle: its path space is finite (periodic)")

    def factors(self, n: int) -> list[str]:
        return sft_factors(self, n)

    def count(self, n: int) -> int:
        """Exact number of length-``n`` paths (sum of the entries of A^n)."""
        if n == 0:
            return 1
        M = self.incidence.astype(object)
        P = np.identity(len(M), dtype=object)
        base, k = M, n
        while k:
            if k & 1:
                P = P.dot(base)
            base = base.dot(base)
            k >>= 1
        return int(sum(P.flat))

    def language(self, N: int) -> LanguageTable:
        self.require_valid()
        return build_language(self.factors, N)

    def sample(self, length: int, seed: int | None = None, perron_data: PerronData | None = None) -> str:
        """A path drawn from the Markov chain of the measure of maximal entropy."""
        pd = perron_data or perron(self)
        rng = np.random.default_rng(seed)
        probs = [np.array([pd.v[e.terminal] / (pd.lam * pd.v[i]) for e in out]) for i, out in enumerate(self.out_edges)]
        draws = [rng.choice(len(out), size=length, p=p / p.sum()) for out, p in zip(self.out_edges, probs)]
        start = pd.u * pd.v
        state = int(rng.choice(len(start), p=start / start.sum()))
        out = []
        outs = [list(o) for o in self.out_edges]
        for t in range(length):
            e = outs[state][draws[state][t]]
            out.append(e.label)
            state = e.terminal
        return "".join(out)


def sft_factors(graph: SftGraph, n: int) -> list[str]:
    """All edge paths ``e_1 .. e_n`` with ``t(e_k) = i(e_{k+1})``, sorted."""
    graph.require_valid()
    if n == 0:
        return [""]
    paths = [(e.label, e.terminal) for e in graph.edges]
    for _ in range(n - 1):
        paths = [(w + e.label, e.terminal) for w, t in paths for e in graph.out_edges[t]]
    return sorted(w for w, _ in paths)


def perron(graph: SftGraph) -> PerronData:
    graph.require_valid()
    lam, u, v = perron_pair(graph.incidence)
    v = v / v.sum()
    u = u / float(u @ v)
    pd = PerronData(lam, u, v)
    ru, rv = pd.residuals(graph.incidence)
    if max(ru, rv) > 1e-12 * max(lam, 1.0):
        raise NumericError(f"Perron residuals too large: {ru:.3e}, {rv:.3e}")
    return pd


# ---------------------------------------------------------------------------
# Substitutions


class Substitution:
    family = "substitution"

    def __init__(self, rules: dict[str, str]):
        if not rules or any(len(a) != 1 or not b for a, b in rules.items()):
            raise ValidationError(f"rules must map single letters to nonempty words: {rules}")
        self.rules = dict(rules)
        self.alphabet = tuple(sorted(rules))
        if any(c not in rules for b in rules.values() for c in b):
            raise ValidationError("images use letters outside the alphabet")
        idx = {a: i for i, a in enumerate(self.alphabet)}
        M = np.zeros((len(idx), len(idx)), dtype=np.int64)
        for a, img in rules.items():
            for c in img:
                M[idx[c], idx[a]] += 1  # column a counts the letters of sigma(a)
        self.abelianization = M
        self._trans = str.maketrans(self.rules)
        self._cache: tuple[int, str] | None = None

    @classmethod
    def from_spec(cls, spec: dict) -> "Substitution":
        return cls(spec["rules"])

    def __repr__(self) -> str:
        return f"Substitution({self.rules})"

    @property
    def primitive(self) -> bool:
        n = len(self.alphabet)
        P = (self.abelianization > 0).astype(np.int64)
        Q = np.eye(n, dtype=np.int64)
        for _ in range(n * n):
            Q = ((Q @ P) > 0).astype(np.int64)
        return bool(np.all(Q > 0))

    def image(self, word: str) -> str:
        return word.translate(self._trans)

    def require_valid(self) -> None:
        if not self.primitive:
            raise ValidationError("substitution is not primitive")

    def fixed_point_prefix(self, length: int) -> str:
        """Prefix of a one-sided fixed point of some power of the substitution."""
        for p in range(1, len(self.alphabet) + 1):
            for a in self.alphabet:
                w = a
                for _ in range(p):
                    w = self.image(w)
                if w[0] == a and len(w) > 1:
                    while len(w) < length:
                        for _ in range(p):
                            w = self.image(w)
                    return w[:length]
        raise ValidationError("no power of the substitution has a one-sided fixed point")

    def _long_word(self, n: int) -> str:
        # grow sigma^j(a) until the length-n factor set is stable twice in a row
        if self._cache and self._cache[0] >= n:
            return self._cache[1]
        w, prev, stable = self.alphabet[0], -1, 0
        while True:
            w = self.image(w)
            if len(w) > MAX_WORD_LENGTH:
                raise PrecisionError("substitution iterate grew too long before the factor set stabilised")
            if len(w) < 4 * n + 4:
                continue
            size = len({w[i : i + n] for i in range(len(w) - n + 1)})
            stable = stable + 1 if size == prev else 0
            prev = size
            if stable >= 2:
                self._cache = (n, w)
                return w

    def factors(self, n: int) -> list[str]:
        return substitution_factors(self, n)

    def language(self, N: int) -> LanguageTable:
        self.require_valid()
        self._long_word(N)
        return build_language(self.factors, N)

    def sample(self, length: int, seed: int | None = None) -> str:
        return self.fixed_point_prefix(length)


def substitution_factors(sub: Substitution, n: int) -> list[str]:
    sub.require_valid()
    if n == 0:
        return [""]
    w = sub._long_word(n)
    return sorted({w[i : i + n] for i in range(len(w) - n + 1)})


# ---------------------------------------------------------------------------
# Exact arithmetic in Z + Z*theta


@dataclass(frozen=True, order=True)
class Interval:
    lo: Fraction
    hi: Fraction

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return float((self.lo + self.hi) / 2)

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi


@dataclass(frozen=True)
class LinearForm:
    """The real number ``c0 + c1 * theta`` with integer coefficients."""

    c0: int
    c1: int

    def __add__(self, o: "LinearForm") -> "LinearForm":
        return LinearForm(self.c0 + o.c0, self.c1 + o.c1)

    def __sub__(self, o: "LinearForm") -> "LinearForm":
        return LinearForm(self.c0 - o.c0, self.c1 - o.c1)

    def __neg__(self) -> "LinearForm":
        return LinearForm(-self.c0, -self.c1)

    def __rmul__(self, k: int) -> "LinearForm":
        return LinearForm(k * self.c0, k * self.c1)

    def enclosure(self, bracket: Interval) -> Interval:
        a = self.c0 + self.c1 * bracket.lo
        b = self.c0 + self.c1 * bracket.hi
        return Interval(min(a, b), max(a, b))

    def sign(self, bracket: Interval) -> int:
        if self.c1 == 0:
            return (self.c0 > 0) - (self.c0 < 0)
        e = self.enclosure(bracket)
        # theta is irrational and strictly inside the bracket, so the ends are excluded
        if e.lo >= 0:
            return 1
        if e.hi <= 0:
            return -1
        raise PrecisionError(f"sign of {self} undetermined: supply more partial quotients")

    def floor(self, bracket: Interval) -> int:
        if self.c1 == 0:
            return self.c0
        e = self.enclosure(bracket)
        f = floor(e.lo)
        if e.hi > f + 1:
            raise PrecisionError(f"floor of {self} undetermined: supply more partial quotients")
        return f


# ---------------------------------------------------------------------------
# Continued fractions and Sturmian shifts


class ContinuedFraction:
    """``theta = [0; a_1, a_2, ..., a_M, ...]`` known through its first M quotients.

    Convergents use the conventions ``p_{-2} = 0, p_{-1} = 1, q_{-2} = 1,
    q_{-1} = 0``.
    """

    family = "sturmian"

    def __init__(self, partial_quotients: Sequence[int]):
        a = tuple(int(x) for x in partial_quotients)
        if any(x < 1 for x in a):
            raise ValidationError("partial quotients a_1, a_2, ... must be positive integers")
        self.partial_quotients = a
        p, q = [0, 1], [1, 0]
        for ak in (0,) + a:  # a_0 = 0
            p.append(ak * p[-1] + p[-2])
            q.append(ak * q[-1] + q[-2])
        self._p, self._q = p, q
        self._floor_cache: dict[int, int] = {0: 0}

    @classmethod
    def from_spec(cls, spec: dict) -> "ContinuedFraction":
        if spec.get("preset") == "unbounded":
            return unbounded_theta(int(spec.get("n_max", 4)))
        if spec.get("preset") is not None:
            raise ValidationError(f"unknown Sturmian preset {spec['preset']!r}")
        return cls(spec["partial_quotients"])

    def __repr__(self) -> str:
        head = ", ".join(map(str, self.partial_quotients[:8]))
        more = ", ..." if len(self.partial_quotients) > 8 else ""
        return f"ContinuedFraction([0; {head}{more}])"

    @property
    def depth(self) -> int:
        return len(self.partial_quotients)

    def a(self, k: int) -> int:
        if k == 0:
            return 0
        if not 1 <= k <= self.depth:
            raise PrecisionError(f"partial quotient a_{k} not supplied (have {self.depth})")
        return self.partial_quotients[k - 1]

    def p(self, k: int) -> int:
        self._check_index(k)
        return self._p[k + 2]

    def q(self, k: int) -> int:
        self._check_index(k)
        return self._q[k + 2]

    def _check_index(self, k: int) -> None:
        if not -2 <= k <= self.depth:
            raise PrecisionError(f"convergent {k} needs a_{k}; only {self.depth} quotients supplied")

    @property
    def bracket(self) -> Interval:
        """Open interval of all irrationals whose expansion starts with the given quotients."""
        M = self.depth
        x = Fraction(self.p(M), self.q(M))
        y = Fraction(self.p(M) + self.p(M - 1), self.q(M) + self.q(M - 1))
        return Interval(min(x, y), max(x, y))

    def lambda_form(self, k: int) -> LinearForm:
        """``lambda_k = (-1)^(k-1) (q_{k-1} theta - p_{k-1})``; ``lambda_0 = 1``, ``lambda_1 = theta``."""
        s = 1 if (k - 1) % 2 == 0 else -1
        return LinearForm(-s * self.p(k - 1), s * self.q(k - 1))

    def floor_multiple(self, k: int) -> int:
        """``floor(k * theta)``, certified."""
        if k not in self._floor_cache:
            self._floor_cache[k] = LinearForm(0, k).floor(self.bracket)
        return self._floor_cache[k]

    def theta_float(self) -> float:
        return self.bracket.mid

    # -- subshift interface

    def factors(self, n: int) -> list[str]:
        return sturmian_factors(self, n)

    def language(self, N: int) -> LanguageTable:
        return build_language(self.factors, N)

    def sample(self, length: int, seed: int | None = None) -> str:
        return characteristic_prefix(self, length)


def standard_words(cf: ContinuedFraction, max_length: int = MAX_WORD_LENGTH):
    """Yield ``s_1, s_2, ...`` with ``s_1 = 0^(a_1 - 1) 1`` and ``s_{k+1} = s_k^(a_{k+1}) s_{k-1}``.

    ``|s_k| = q_k`` and ``s_k`` holds ``p_k`` ones, so the letter 1 has frequency theta.
    """
    prev, cur = "0", "0" * (cf.a(1) - 1) + "1" if cf.depth else None
    if cur is None:
        return
    yield cur
    for k in range(2, cf.depth + 1):
        if len(cur) * cf.a(k) + len(prev) > max_length:
            return
        prev, cur = cur, cur * cf.a(k) + prev
        yield cur


def cf_convergents(cf: ContinuedFraction, n: int) -> list[tuple[int, int, int]]:
    """``(k, p_k, q_k)`` for ``k = -2 .. n``."""
    return [(k, cf.p(k), cf.q(k)) for k in range(-2, n + 1)]


def lambda_sequence(cf: ContinuedFraction, n: int, tol: float | None = None) -> list[Interval]:
    """Certified enclosures of ``lambda_1 .. lambda_n``."""
    if cf.depth < n + 1:
        raise PrecisionError(f"lambda_{n} needs {n + 1} partial quotients, got {cf.depth}")
    br = cf.bracket
    encl = [cf.lambda_form(k).enclosure(br) for k in range(1, n + 1)]
    if tol is not None:
        worst = max(e.width for e in encl)
        if worst > tol:
            raise PrecisionError(f"enclosure width {float(worst):.3e} exceeds {tol:.1e}; supply more quotients")
    return encl


def rotation_coding(theta: float, length: int, x: float = 0.0) -> str:
    """Floating-point coding of the rotation orbit: '0' on [0, 1 - theta), '1' elsewhere.

    Only meant as a brute-force cross-check of the exact constructions.
    """
    j = np.arange(length, dtype=np.float64)
    frac = np.mod(j * theta - x, 1.0)
    return "".join(np.where(frac < 1.0 - theta, "0", "1"))


def characteristic_prefix(cf: ContinuedFraction, length: int) -> str:
    """First ``length`` letters of the characteristic word (the limit of the standard words).

    ``s_{k+1}`` starts with ``s_k^(a_{k+1})``, so a prefix shorter than that
    block is read off repeated copies of ``s_k`` without building ``s_{k+1}``.
    """
    if length > MAX_WORD_LENGTH:
        raise PrecisionError(f"prefix of length {length} exceeds the size cap {MAX_WORD_LENGTH}")
    if cf.depth == 0:
        raise PrecisionError("no partial quotients supplied")
    prev, cur, k = "0", "0" * (cf.a(1) - 1) + "1", 1
    while len(cur) < length:
        if k + 1 > cf.depth:
            if length <= len(cur) + len(prev):
                return (cur + prev)[:length]
            raise PrecisionError(f"{cf.depth} partial quotients give a characteristic prefix shorter than {length}")
        a = cf.a(k + 1)
        reps = -(-length // len(cur))
        if reps <= a:
            return (cur * reps)[:length]
        prev, cur, k = cur, cur * a + prev, k + 1
    return cur[:length]


def sturmian_factors(cf: ContinuedFraction, n: int) -> list[str]:
    """The ``n + 1`` factors of length ``n``, read off a long enough characteristic prefix.

    A prefix showing ``n + 1`` distinct factors has them all, since the
    language has exactly that many. The prefix doubles until that happens.
    """
    if n == 0:
        return [""]
    # whatever the next quotient is, the characteristic word starts with s_d s_{d-1}
    known = min(cf.q(cf.depth) + cf.q(cf.depth - 1), MAX_WORD_LENGTH)
    L = min(2 * n + 2, known)
    while True:
        s = characteristic_prefix(cf, L)
        found = {s[i : i + n] for i in range(len(s) - n + 1)}
        if len(found) == n + 1:
            return sorted(found)
        if len(found) > n + 1:
            raise InvariantError(f"{len(found)} factors of length {n}; a Sturmian word has {n + 1}")
        if L >= known:
            raise PrecisionError(
                f"{cf.depth} partial quotients do not determine the factors of length {n}: "
                f"the certified prefix of length {known} shows only {len(found)} of them"
            )
        L = min(2 * L, known)


def unbounded_theta(n_max: int) -> ContinuedFraction:
    """``a_1 = 1`` and ``a_{n+1} = n (q_n + q_{n-1})^2`` for ``n = 1 .. n_max``."""
    if n_max < 1:
        raise ValidationError("n_max must be at least 1")
    a = [1]
    for n in range(1, n_max + 1):
        cf = ContinuedFraction(a)
        a.append(n * (cf.q(n) + cf.q(n - 1)) ** 2)
    return ContinuedFraction(a)


@dataclass(frozen=True)
class Arc:
    """A level-``n`` cylinder of a Sturmian shift seen as an arc of the circle."""

    word: str
    start: LinearForm
    length: LinearForm


def sturmian_arcs(cf: ContinuedFraction, n: int) -> list[Arc]:
    """The ``n + 1`` arcs cut by the points ``{-i theta}``, ``i = 0..n``.

    The arc starting at ``{-i theta}`` codes the word
    ``floor((k+1) theta) - floor(k theta)`` for ``k = -i .. n - 1 - i``.
    """
    br = cf.bracket
    F = cf.floor_multiple
    points = [LinearForm(0, 0)] + [LinearForm(F(i) + 1, -i) for i in range(1, n + 1)]
    encl = [p.enclosure(br) for p in points]
    order = sorted(range(n + 1), key=lambda i: encl[i].lo)
    for a, b in zip(order, order[1:]):
        if not encl[a].hi < encl[b].lo and (points[b] - points[a]).sign(br) <= 0:
            raise PrecisionError(f"cannot order the level-{n} cut points")
    arcs = []
    for pos, i in enumerate(order):
        nxt = points[order[pos + 1]] if pos + 1 <= n else LinearForm(1, 0)
        word = "".join(str(F(k + 1) - F(k)) for k in range(-i, n - i))
        arcs.append(Arc(word, points[i], nxt - points[i]))
    return arcs


@dataclass(frozen=True)
class ThreeDistanceBand:
    n: int
    k: int
    values: tuple[LinearForm, LinearForm, LinearForm]
    third_absent: bool  # the last band element cannot occur at this length


def three_distance_set(cf: ContinuedFraction, m: int) -> ThreeDistanceBand:
    """Frequencies allowed for Sturmian words of length ``m``.

    With ``k q_n + q_{n-1} <= m < (k+1) q_n + q_{n-1}``, ``0 < k <= a_{n+1}``:
    ``{lambda_n - k lambda_{n+1}, lambda_{n+1}, lambda_n - (k-1) lambda_{n+1}}``.
    The band ``n = 0`` covers the short lengths ``m <= a_1``.
    """
    if m < 1:
        raise ValidationError("lengths start at 1")
    n = 0
    while True:
        a_next = cf.a(n + 1)
        lo = cf.q(n) + cf.q(n - 1)
        hi = cf.q(n + 1) + cf.q(n)
        if lo <= m < hi or (n == 0 and m < hi):
            k = (m - cf.q(n - 1)) // cf.q(n)
            k = max(1, min(k, a_next))
            ln, ln1 = cf.lambda_form(n), cf.lambda_form(n + 1)
            vals = (ln - k * ln1, ln1, ln - (k - 1) * ln1)
            return ThreeDistanceBand(n, k, vals, m == (k + 1) * cf.q(n) + cf.q(n - 1) - 1)
        n += 1


def from_spec(spec: dict):
    """Build a subshift from its JSON description."""
    if not isinstance(spec, dict):
        raise ValidationError("a subshift spec must be an object")
    kind = spec.get("type")
    builders = {"sft": SftGraph, "substitution": Substitution, "sturmian": ContinuedFraction}
    if kind not in builders:
        raise ValidationError(f"unknown subshift type {kind!r}; use one of {sorted(builders)}")
    try:
        gen = builders[kind].from_spec(spec)
    except (KeyError, TypeError, IndexError) as exc:
        raise ValidationError(f"malformed {kind} spec: {exc!r}") from None
    if kind != "sturmian":
        gen.require_valid()
    return gen
