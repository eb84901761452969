"""Gauss-Legendre Butcher tableaux and their skew-symmetric perturbations.

The s-stage Gauss collocation matrix A factors as A = P C P^{-1}, where P is
the Vandermonde-like matrix of the shifted, L2-orthonormal Legendre polynomials
at the Gauss nodes and C is a tridiagonal core (1/2 in the top-left corner,
skew couplings +-xi_j on the off-diagonals).  Adding a skew-symmetric matrix W
to the core before transforming back yields a family of perturbed tableaux
that are symplectic for every value of the perturbation and reduce to the
Gauss method when the perturbation vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_STAGES = 10


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes and weights of the s-point Gauss-Legendre rule on [0, 1]."""

    s: int
    c: np.ndarray  # strictly increasing nodes in (0, 1)
    b: np.ndarray  # positive weights, sum 1

    @property
    def weight_diag(self):
        """Diagonal matrix of the weights."""
        return np.diag(self.b)


@dataclass(frozen=True, eq=False)
class LegendreBasis:
    """Shifted orthonormal Legendre polynomials evaluated at quadrature nodes.

    P[i, j] is the value at node c_i of the degree-j polynomial, normalized so
    that its square integrates to 1 over [0, 1], with positive leading
    coefficient.  The inverse comes from the discrete orthogonality
    P^T diag(b) P = I, i.e. Pinv = P^T diag(b).
    """

    s: int
    P: np.ndarray
    Pinv: np.ndarray


@dataclass(frozen=True)
class PerturbationSpec:
    """Which subdiagonal couplings of the tableau core are perturbed.

    Each entry (j, value) perturbs the coupling pair at subdiagonal position
    j (1-based, 1 <= j <= s-1) by `value`; the induced matrix is
    skew-symmetric by construction, so the perturbed method stays symplectic
    for every value.  An empty entry list leaves the Gauss method untouched.
    The orientation of the pair is fixed so that the energy-conserving roots
    of the Kepler benchmark come out positive (the two orientations differ
    only by the sign relabeling value -> -value).
    """

    s: int
    entries: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        entries = tuple((int(j), float(v)) for j, v in self.entries)
        object.__setattr__(self, "entries", entries)
        seen = set()
        for j, _ in entries:
            if not 1 <= j <= self.s - 1:
                raise ValueError(
                    f"perturbation index {j} outside 1..{self.s - 1} for s={self.s}"
                )
            if j in seen:
                raise ValueError(f"duplicate perturbation index {j}")
            seen.add(j)

    @classmethod
    def none(cls, s):
        return cls(s, ())

    @classmethod
    def single(cls, s, index, value):
        return cls(s, ((index, value),))

    @property
    def is_zero(self):
        return all(v == 0.0 for _, v in self.entries)

    @property
    def matrix(self):
        """The induced skew-symmetric s x s matrix."""
        W = np.zeros((self.s, self.s))
        for j, v in self.entries:
            W[j, j - 1] = -v
            W[j - 1, j] = v
        return W


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    """An s-stage Runge-Kutta method (c, A, b) with its perturbation record.

    `order` is the classical order: 2s for the unperturbed Gauss method,
    2*j_min when the lowest perturbed subdiagonal index is j_min.
    """

    quadrature: QuadratureRule
    A: np.ndarray
    perturbation: PerturbationSpec
    order: int

    @property
    def s(self):
        return self.quadrature.s

    @property
    def c(self):
        return self.quadrature.c

    @property
    def b(self):
        return self.quadrature.b


def _legendre_values_and_derivs(s, x):
    """Degree-s Legendre polynomial and derivative at x, by recurrence."""
    p_prev = np.ones_like(x)
    p = x.copy()
    for k in range(1, s):
        p_prev, p = p, ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
    dp = s * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


@lru_cache(maxsize=MAX_STAGES + 2)
def gauss_quadrature(s: int) -> QuadratureRule:
    """s-point Gauss-Legendre nodes and weights on [0, 1].

    Roots of the degree-s Legendre polynomial are found by Newton iteration
    started from the Chebyshev-node approximation; iteration stops once the
    update drops below 1e-15.  The result is symmetrized so that
    c_i + c_{s+1-i} = 1 and b_i = b_{s+1-i} hold to machine precision.
    """
    if not isinstance(s, (int, np.integer)) or isinstance(s, bool):
        raise ValueError(f"stage count must be an integer, got {s!r}")
    if not 1 <= s <= MAX_STAGES:
        raise ValueError(f"stage count {s} outside 1..{MAX_STAGES}")
    k = np.arange(1, s + 1)
    x = np.cos(np.pi * (4 * k - 1) / (4 * s + 2))  # descending in (-1, 1)
    for _ in range(100):
        p, dp = _legendre_values_and_derivs(s, x)
        dx = p / dp
        x -= dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    _, dp = _legendre_values_and_derivs(s, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    c = (1.0 + x[::-1]) / 2.0
    b = w[::-1] / 2.0
    c = 0.5 * (c + 1.0 - c[::-1])
    b = 0.5 * (b + b[::-1])
    return QuadratureRule(s=int(s), c=_frozen(c), b=_frozen(b))


def _build_basis(q):
    u = 2.0 * q.c - 1.0
    P = np.empty((q.s, q.s))
    P[:, 0] = 1.0
    if q.s > 1:
        P[:, 1] = u
    for k in range(1, q.s - 1):
        P[:, k + 1] = ((2 * k + 1) * u * P[:, k] - k * P[:, k - 1]) / (k + 1)
    P *= np.sqrt(2.0 * np.arange(q.s) + 1.0)
    Pinv = P.T * q.b  # P^T diag(b)
    return LegendreBasis(s=q.s, P=_frozen(P), Pinv=_frozen(Pinv))


@lru_cache(maxsize=MAX_STAGES + 2)
def _cached_basis(s):
    return _build_basis(gauss_quadrature(s))


def legendre_basis(q: QuadratureRule) -> LegendreBasis:
    """Orthonormal shifted-Legendre values at the nodes of `q`, with inverse."""
    if q is gauss_quadrature(q.s):
        return _cached_basis(q.s)
    return _build_basis(q)


def subdiagonal_coupling(j: int) -> float:
    """The coupling xi_j = 1 / (2 sqrt((2j+1)(2j-1))) of the tableau core."""
    return 0.5 / np.sqrt((2.0 * j + 1.0) * (2.0 * j - 1.0))


def gauss_core(s: int) -> np.ndarray:
    """Tridiagonal core of the Gauss tableau in the orthonormal Legendre basis.

    Entry (0, 0) is 1/2; entry (j, j-1) is xi_j and (j-1, j) is -xi_j for
    j = 1..s-1; everything else is zero.
    """
    if s < 1:
        raise ValueError(f"stage count {s} must be >= 1")
    X = np.zeros((s, s))
    X[0, 0] = 0.5
    for j in range(1, s):
        xi = subdiagonal_coupling(j)
        X[j, j - 1] = xi
        X[j - 1, j] = -xi
    return X


def butcher(q: QuadratureRule, pert: PerturbationSpec) -> ButcherTableau:
    """Assemble the (possibly perturbed) tableau A = P (core + W) P^{-1}."""
    if pert.s != q.s:
        raise ValueError(f"perturbation built for s={pert.s}, quadrature has s={q.s}")
    basis = legendre_basis(q)
    A = basis.P @ (gauss_core(q.s) + pert.matrix) @ basis.Pinv
    if pert.is_zero:
        order = 2 * q.s
    else:
        order = 2 * min(j for j, v in pert.entries if v != 0.0)
    return ButcherTableau(quadrature=q, A=_frozen(A), perturbation=pert, order=order)


def defect_weights(q: QuadratureRule, index: int | None = None) -> np.ndarray:
    """Weights G that express a unit subdiagonal perturbation through the
    unperturbed tableau: A(0) G = P W P^{-1}.

    These are the coefficients of the extra vector-field terms in the
    quasi-collocation identities satisfied by the stage interpolant.  `index`
    selects the perturbed subdiagonal pair (default: the last, s-1).
    """
    if q.s < 2:
        raise ValueError("defect weights need at least 2 stages")
    if index is None:
        index = q.s - 1
    basis = legendre_basis(q)
    W = PerturbationSpec.single(q.s, index, 1.0).matrix
    Z = np.linalg.solve(gauss_core(q.s), W)
    return basis.P @ Z @ basis.Pinv
