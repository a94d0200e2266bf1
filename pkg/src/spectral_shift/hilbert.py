"""The truncated space C_N of functions constant on level-N cylinders.

Vectors are stored in the orthonormal basis ``e_w = xi(w) / sqrt(mu(w))``,
``w`` in ``X_N``. In that basis multiplication by a function is diagonal and
the projection ``P_n`` onto ``C_n`` factors as ``B_n^T B_n`` with a sparse
row-orthonormal ``B_n`` (one row per level-n word, entries
``sqrt(mu(w)/mu(v))`` on its fibre). Operators are applied matrix-free, so
norms stay cheap on spaces with many thousands of cylinders.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, eigsh

from .errors import InsufficientDataError, NumericError, ValidationError
from .measures import MeasureAssignment, ratio_R
from .words import LanguageTable, pi

log = logging.getLogger(__name__)

DENSE_LIMIT = 1500  # largest dimension for which norms use a full SVD


class TruncatedSpace:
    """``C_N`` for a table and measure; masses below ``N`` are aggregated from the leaves."""

    def __init__(self, table: LanguageTable, measure: MeasureAssignment, N: int | None = None):
        N = table.max_level if N is None else N
        if not 0 <= N <= table.max_level:
            raise InsufficientDataError(f"truncation {N} exceeds the table depth {table.max_level}")
        if measure.table is not table:
            raise ValidationError("measure was built on a different table")
        self.table, self.measure, self.N = table, measure, N
        leaf = np.asarray(measure.mu[N], dtype=float)
        self.mass: list[np.ndarray] = []
        for n in range(N + 1):
            agg = np.zeros(len(table.levels[n]))
            np.add.at(agg, table.ancestors(N, n), leaf)
            self.mass.append(agg)
        self.sqrt_mu = np.sqrt(leaf)
        self.dim = len(leaf)
        self._B: dict[int, sp.csr_matrix] = {}

    def __repr__(self) -> str:
        return f"TruncatedSpace(N={self.N}, dim={self.dim}, source={self.measure.source!r})"

    def restrict(self, N: int) -> "TruncatedSpace":
        return TruncatedSpace(self.table, self.measure, N)

    # -- basic pieces

    def fibre(self, n: int) -> np.ndarray:
        """Level-``n`` ancestor id of each basis vector."""
        return self.table.ancestors(self.N, n)

    def B(self, n: int) -> sp.csr_matrix:
        if n not in self._B:
            anc = self.fibre(n)
            vals = self.sqrt_mu / np.sqrt(self.mass[n][anc])
            self._B[n] = sp.csr_matrix((vals, (anc, np.arange(self.dim))), shape=(len(self.mass[n]), self.dim))
        return self._B[n]

    def word_id(self, w: str) -> int:
        if len(w) > self.N:
            raise InsufficientDataError(f"{w!r} lies below the truncation level {self.N}")
        return self.table.id(w)

    def mu(self, w: str) -> float:
        return float(self.mass[len(w)][self.word_id(w)])

    def xi(self, w: str) -> "LevelFunction":
        n = len(w)
        return LevelFunction(self, (self.fibre(n) == self.word_id(w)).astype(float))

    def constant(self, c: float = 1.0) -> "LevelFunction":
        return LevelFunction(self, np.full(self.dim, float(c)))

    def function(self, values) -> "LevelFunction":
        return LevelFunction(self, np.asarray(values, dtype=float))

    def lift(self, n: int, values) -> "LevelFunction":
        """Function in ``C_n`` given by one value per level-``n`` word."""
        values = np.asarray(values, dtype=float)
        if values.shape != (len(self.mass[n]),):
            raise ValidationError(f"need {len(self.mass[n])} values for level {n}")
        return LevelFunction(self, values[self.fibre(n)])

    def random_function(self, rng: np.random.Generator, level: int | None = None) -> "LevelFunction":
        n = self.N if level is None else level
        return self.lift(n, rng.standard_normal(len(self.mass[n])))


@dataclass
class LevelFunction:
    """A function in ``C_N`` given by its value on each level-N cylinder."""

    space: TruncatedSpace
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.space.dim,):
            raise ValidationError(f"expected {self.space.dim} values, got shape {self.values.shape}")

    @property
    def coords(self) -> np.ndarray:
        return self.values * self.space.sqrt_mu

    @classmethod
    def from_coords(cls, space: TruncatedSpace, x: np.ndarray) -> "LevelFunction":
        return cls(space, np.asarray(x, dtype=float) / space.sqrt_mu)

    def _other(self, o):
        if isinstance(o, LevelFunction):
            if o.space is not self.space:
                raise ValidationError("functions live in different spaces")
            return o.values
        return o

    def __add__(self, o):
        return LevelFunction(self.space, self.values + self._other(o))

    __radd__ = __add__

    def __sub__(self, o):
        return LevelFunction(self.space, self.values - self._other(o))

    def __rsub__(self, o):
        return LevelFunction(self.space, self._other(o) - self.values)

    def __mul__(self, o):
        return LevelFunction(self.space, self.values * self._other(o))

    __rmul__ = __mul__

    def __truediv__(self, c: float):
        return LevelFunction(self.space, self.values / c)

    def __neg__(self):
        return LevelFunction(self.space, -self.values)

    def inner(self, o: "LevelFunction") -> float:
        return float(np.dot(self.coords, o.coords))

    def norm2(self) -> float:
        return float(np.linalg.norm(self.coords))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def osc(self) -> float:
        """``inf_c ||f + c||_inf``, half the spread of the values."""
        return 0.5 * float(self.values.max() - self.values.min())

    def level(self, tol: float = 1e-12) -> int:
        """Smallest ``n`` with ``f`` in ``C_n`` (up to ``tol`` relative to ``sup``)."""
        scale = max(self.sup(), 1.0)
        for n in range(self.space.N + 1):
            if np.max(np.abs(project(self, n).values - self.values)) <= tol * scale:
                return n
        return self.space.N

    def in_level(self, n: int, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(project(self, n).values - self.values)) <= tol * max(self.sup(), 1.0))


class LinearMap:
    """Operator between truncated spaces in the ``e_w`` bases.

    Built from a dense matrix or from ``matvec``/``rmatvec`` callables that
    accept vectors or column blocks.
    """

    def __init__(
        self,
        shape: tuple[int, int],
        matvec: Callable[[np.ndarray], np.ndarray] | None = None,
        rmatvec: Callable[[np.ndarray], np.ndarray] | None = None,
        matrix: np.ndarray | None = None,
        name: str = "",
        meta: dict | None = None,
    ):
        if matrix is None and (matvec is None or rmatvec is None):
            raise ValidationError("a LinearMap needs a matrix or both matvec and rmatvec")
        self.shape = shape
        self._matvec, self._rmatvec, self._matrix = matvec, rmatvec, matrix
        self.name = name
        self.meta = meta or {}

    def __repr__(self) -> str:
        return f"LinearMap({self.name or 'op'}, shape={self.shape})"

    def __matmul__(self, x: np.ndarray) -> np.ndarray:
        if self._matrix is not None:
            return self._matrix @ x
        return self._matvec(x)

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        if self._matrix is not None:
            return self._matrix.T @ y
        return self._rmatvec(y)

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = np.asarray(self._matvec(np.eye(self.shape[1])))
        return self._matrix

    def apply(self, f: "LevelFunction", target: TruncatedSpace | None = None) -> "LevelFunction":
        return LevelFunction.from_coords(target or f.space, self @ f.coords)

    def norm(self, tol: float = 1e-12) -> float:
        return operator_norm(self, tol)


def operator_norm(op: LinearMap, tol: float = 1e-12) -> float:
    """Largest singular value: full SVD for small maps, Lanczos on ``A^T A`` otherwise."""
    m, n = op.shape
    if min(m, n) == 0:
        return 0.0
    if op._matrix is not None or max(m, n) <= DENSE_LIMIT:
        return float(np.linalg.norm(op.matrix, 2))
    small = min(m, n)
    if m >= n:
        gram = LinearOperator((n, n), matvec=lambda x: op.rmatvec(op @ x), dtype=float)
    else:
        gram = LinearOperator((m, m), matvec=lambda y: op @ op.rmatvec(y), dtype=float)
    try:
        k = 2 if small > 3 else 1
        vals = eigsh(gram, k=k, which="LA", tol=tol, return_eigenvectors=False, maxiter=20 * small)
    except Exception as exc:  # ArpackNoConvergence and friends
        raise NumericError(f"Lanczos norm estimate failed: {exc}") from exc
    return float(np.sqrt(max(float(np.max(vals)), 0.0)))


# ---------------------------------------------------------------------------
# projections and the Dirac operator


def project(f: LevelFunction, n: int) -> LevelFunction:
    """Conditional expectation of ``f`` onto ``C_n``."""
    s = f.space
    if not 0 <= n <= s.N:
        raise InsufficientDataError(f"P_{n} is not available on C_{s.N}")
    B = s.B(n)
    return LevelFunction.from_coords(s, B.T @ (B @ f.coords))


def projection(space: TruncatedSpace, n: int) -> LinearMap:
    if not 0 <= n <= space.N:
        raise InsufficientDataError(f"P_{n} is not available on C_{space.N}")
    B = space.B(n)
    mv = lambda x: B.T @ (B @ x)
    return LinearMap((space.dim, space.dim), mv, mv, name=f"P_{n}")


def make_alpha(spec, N: int) -> np.ndarray:
    """``alpha_0 .. alpha_N`` from ``"linear"``, ``"quadratic"`` or an explicit list."""
    if isinstance(spec, str):
        n = np.arange(N + 1, dtype=float)
        if spec == "linear":
            a = n
        elif spec == "quadratic":
            a = n**2
        else:
            raise ValidationError(f"unknown alpha spec {spec!r}; use 'linear', 'quadratic' or a list")
    else:
        a = np.asarray(list(spec), dtype=float)
        if len(a) < N + 1:
            raise ValidationError(f"alpha lists {len(a)} values but levels 0..{N} need {N + 1}")
        a = a[: N + 1]
    check_alpha(a)
    return a


def check_alpha(a) -> None:
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or len(a) == 0 or a[0] < 0 or np.any(np.diff(a) <= 0):
        raise ValidationError(
            "alpha must satisfy 0 <= alpha_0 < alpha_1 < ... (strictly increasing); "
            f"got {a.tolist()[:8]}"
        )


class Dirac(LinearMap):
    """``D = alpha_N - sum_{n<N} (alpha_{n+1} - alpha_n) P_n`` on ``C_N``."""

    def __init__(self, space: TruncatedSpace, alpha):
        a = np.asarray(alpha, dtype=float)
        if len(a) < space.N + 1:
            raise ValidationError(f"need alpha_0..alpha_{space.N}")
        a = a[: space.N + 1]
        check_alpha(a)
        self.space, self.alpha = space, a
        gaps = np.diff(a)
        Bs = [space.B(n) for n in range(space.N)]

        def mv(x):
            out = a[-1] * x
            for g, B in zip(gaps, Bs):
                out = out - g * (B.T @ (B @ x))
            return out

        super().__init__((space.dim, space.dim), mv, mv, name="D")


def dirac(space: TruncatedSpace, alpha) -> Dirac:
    return Dirac(space, alpha)


def commutator(space: TruncatedSpace, D: LinearMap, f: LevelFunction) -> LinearMap:
    """``[D, M_f]`` on ``C_N``; antisymmetric."""
    if f.space is not space or D.shape != (space.dim, space.dim):
        raise ValidationError("operator, function and space do not match")
    v = f.values

    def mv(x):
        vv = v if x.ndim == 1 else v[:, None]
        return D @ (vv * x) - vv * (D @ x)

    return LinearMap(D.shape, mv, lambda y: -mv(y), name="[D,f]")


# ---------------------------------------------------------------------------
# eta, zeta, Q_w


def eta(space: TruncatedSpace, w: str) -> LevelFunction:
    """``(mu(pi w)/mu(w)) xi(w) - xi(pi w)``; zero (with a warning) when ``pi w`` does not branch."""
    if len(w) > space.N:
        raise InsufficientDataError(f"eta({w!r}) needs level {len(w)}")
    p = pi(w)
    if not space.table.is_special(p):
        warnings.warn(f"parent {p!r} of {w!r} is not special; eta vanishes", RuntimeWarning, stacklevel=2)
        return space.constant(0.0)
    return (space.mu(p) / space.mu(w)) * space.xi(w) - space.xi(p)


def zeta(space: TruncatedSpace, D: Dirac, w: str) -> LevelFunction:
    """``mu(pi w)^{-1} (D - alpha_{n+1}) xi(pi w)`` with ``n = |pi w|``."""
    p = pi(w)
    n = len(p)
    if n + 1 > space.N:
        raise InsufficientDataError(f"zeta({w!r}) needs level {n + 1}")
    x = space.xi(p)
    y = D.apply(x) - D.alpha[n + 1] * x
    return y / space.mu(p)


def q_projection(space: TruncatedSpace, w: str, f: LevelFunction) -> LevelFunction:
    """``Q_w f = xi(w) (P_{n+1} f - P_n f)``."""
    n = len(w)
    if n + 1 > space.N:
        raise InsufficientDataError(f"Q_{w!r} needs level {n + 1} but the space stops at {space.N}")
    return space.xi(w) * (project(f, n + 1) - project(f, n))


def f_norm_comparison(space: TruncatedSpace, w: str, f: LevelFunction, tol: float = 1e-10) -> dict:
    """``||f||_2 <= mu(w)^{1/2} ||f||_inf <= R(w)^{1/2} ||f||_2`` for ``f`` in ``F_w``."""
    n = len(w)
    if n + 1 > space.N:
        raise InsufficientDataError(f"F_{w!r} needs level {n + 1}")
    scale = max(f.sup(), 1e-300)
    outside = np.max(np.abs(f.values * (1 - space.xi(w).values)))
    if outside > tol * scale or not f.in_level(n + 1) or project(f, n).sup() > tol * scale:
        raise ValidationError(f"function is not in F_{w!r}")
    l2, linf = f.norm2(), f.sup()
    mu_w = space.mu(w)
    R = ratio_R(space.table, space.measure, w)
    mid = np.sqrt(mu_w) * linf
    return {
        "l2": l2,
        "linf": linf,
        "mid": mid,
        "upper": np.sqrt(R) * l2,
        "R": R,
        "margin_lower": mid - l2,
        "margin_upper": np.sqrt(R) * l2 - mid,
        "holds": bool(mid - l2 >= -tol * mid and np.sqrt(R) * l2 - mid >= -tol * mid),
    }


def random_in_F(space: TruncatedSpace, w: str, rng: np.random.Generator) -> LevelFunction:
    """Random element of ``F_w``: supported on ``U(w)``, constant on its children, mean zero."""
    n = len(w)
    kids = space.table.children[n][space.word_id(w)]
    vals = np.zeros(len(space.mass[n + 1]))
    vals[list(kids)] = rng.standard_normal(len(kids))
    f = space.lift(n + 1, vals)
    return f - project(f, n)


# ---------------------------------------------------------------------------
# the shift


def shift_operator(big: TruncatedSpace, N: int) -> LinearMap:
    """``u: C_N -> C_{N+2}``, ``u xi(w) = sum xi(v)`` over ``v`` in ``X_{N+2}`` with prefix ``w``.

    ``(u f)(x) = f(sigma^{-1} x)``; moving the level-N window one step to the
    left inside the level-(N+2) window lands on the first ``N`` letters.
    """
    if big.N < N + 2:
        raise InsufficientDataError(f"the shift on C_{N} needs a space of level {N + 2}, have {big.N}")
    if big.N != N + 2:
        big = big.restrict(N + 2)
    t = big.table
    small = big.restrict(N)
    rows = np.arange(big.dim)
    cols = np.array([t.index[N][v[:N]] for v in t.levels[N + 2]], dtype=np.int64)
    mu_big = big.mass[N + 2]
    vals = np.sqrt(mu_big / small.mass[N][cols])
    U = sp.csr_matrix((vals, (rows, cols)), shape=(big.dim, small.dim))
    return LinearMap(
        U.shape,
        lambda x: U @ x,
        lambda y: U.T @ y,
        name=f"u:C_{N}->C_{N + 2}",
        meta={"sparse": U, "small": small, "big": big},
    )


def embedding(big: TruncatedSpace, N: int) -> LinearMap:
    """Inclusion ``C_N -> C_M`` in the two orthonormal bases (``M = big.N``)."""
    small = big.restrict(N)
    J = big.B(N).T.tocsr()
    return LinearMap(J.shape, lambda x: J @ x, lambda y: J.T @ y, name=f"J:C_{N}->C_{big.N}", meta={"small": small})


def du_commutator(big: TruncatedSpace, alpha, N: int, replace_u_by_embedding: bool = False) -> LinearMap:
    """``[D, u]`` restricted to ``C_N``: ``D_{N+2} U - U D_N``."""
    if big.N < N + 2:
        raise InsufficientDataError(f"[D,u] on C_{N} needs level {N + 2}")
    big = big if big.N == N + 2 else big.restrict(N + 2)
    U = embedding(big, N) if replace_u_by_embedding else shift_operator(big, N)
    small = big.restrict(N)
    Dbig, Dsmall = Dirac(big, alpha), Dirac(small, alpha)
    mv = lambda x: Dbig @ (U @ x) - U @ (Dsmall @ x)
    rmv = lambda y: U.rmatvec(Dbig @ y) - Dsmall @ U.rmatvec(y)
    return LinearMap((big.dim, small.dim), mv, rmv, name="[D,u]|C_N")


def du_norm(big: TruncatedSpace, alpha, N: int, replace_u_by_embedding: bool = False) -> float:
    """Norm of ``[D,u]`` on ``C_N``: a lower bound for the norm on the whole space."""
    return operator_norm(du_commutator(big, alpha, N, replace_u_by_embedding))


def dense_dirac(space: TruncatedSpace, alpha) -> np.ndarray:
    if space.dim > 4000:
        raise ValidationError("dense Dirac matrix requested on a very large space")
    return Dirac(space, alpha).matrix


def operator_records(op: LinearMap, tol: float = 0.0) -> list[dict]:
    """``(row, col, entry)`` triples of a map, skipping entries at or below ``tol``."""
    M = op.matrix
    r, c = np.nonzero(np.abs(M) > tol)
    return [{"row": int(i), "col": int(j), "entry": float(M[i, j])} for i, j in zip(r, c)]
