r"""Functional PCA on P-spline smoothed, registered curves.

Pipeline: :func:`register` maps every curve onto ``[0, 1]``,
:func:`psmooth` fits penalised cubic B-spline coefficients, and
:func:`fpca_fit` solves the covariance eigenproblem in basis coordinates.

With basis functions :math:`\phi` and Gram matrix
:math:`G = \int \phi \phi^T`, an eigenfunction :math:`f = \phi^T w` of the
covariance operator satisfies :math:`\Sigma G w = \lambda w`, where
:math:`\Sigma` is the sample covariance of the coefficients.  Substituting
:math:`u = G^{1/2} w` gives the symmetric problem
:math:`G^{1/2} \Sigma G^{1/2} u = \lambda u`.
"""

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.interpolate import BSpline

from .errors import DimensionError, DomainError
from .linalg import solve, sym_eigen

GRAM_QUAD_ORDER = 5
ORTHONORMAL_TOL = 1e-8
#: eigenvalues below this fraction of the largest are reported as zero
EIGEN_RTOL = 1e-12
#: curves whose centred coefficients are all below this fraction of the largest coefficient coincide
DEGENERATE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class Curve:
    id: str
    x: NDArray
    y: NDArray
    x_max: float
    native_x_max: float | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.shape != y.shape or x.ndim != 1:
            raise DimensionError(f"curve {self.id}: abscissa and ordinate shapes differ")
        if x.size < 4:
            raise DimensionError(f"curve {self.id}: need at least 4 samples, got {x.size}")
        if np.any(np.diff(x) <= 0):
            raise DomainError(f"curve {self.id}: abscissas must be strictly increasing")
        if self.x_max < x[-1]:
            raise DomainError(f"curve {self.id}: x_max {self.x_max} below last abscissa {x[-1]}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x_max", float(self.x_max))


@dataclass(frozen=True, eq=False)
class CurveSet:
    curves: tuple

    def __post_init__(self):
        object.__setattr__(self, "curves", tuple(self.curves))

    def __len__(self):
        return len(self.curves)

    def __iter__(self):
        return iter(self.curves)

    @property
    def ids(self):
        return [c.id for c in self.curves]

    @property
    def registered(self) -> bool:
        return all(c.native_x_max is not None for c in self.curves)


def read_curves(path, sidecar=None) -> CurveSet:
    """Read a ``curve_id,x,y[,x_max]`` CSV.

    Without an ``x_max`` column the per-curve endpoint comes from the
    optional sidecar JSON ``{curve_id: x_max}``, else the last abscissa.
    """
    rows = {}
    endpoints = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"curve_id", "x", "y"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            cid = row["curve_id"]
            rows.setdefault(cid, []).append((float(row["x"]), float(row["y"])))
            if row.get("x_max") not in (None, ""):
                endpoints[cid] = float(row["x_max"])
    if sidecar is not None:
        with open(sidecar) as fh:
            endpoints.update({str(k): float(v) for k, v in json.load(fh).items()})
    curves = []
    for cid, pts in rows.items():
        pts = np.array(pts)
        curves.append(Curve(cid, pts[:, 0], pts[:, 1], endpoints.get(cid, pts[-1, 0])))
    return CurveSet(curves)


def write_curves(cs: CurveSet, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["curve_id", "x", "y", "x_max"])
        for c in cs:
            for x, y in zip(c.x, c.y):
                w.writerow([c.id, f"{x:.17g}", f"{y:.17g}", f"{c.x_max:.17g}"])


def register(cs: CurveSet) -> CurveSet:
    """Rescale each curve's abscissas by its endpoint, ``u = x / x_max``."""
    out = []
    for c in cs:
        if not c.x_max > 0:
            raise DomainError(f"curve {c.id}: x_max must be positive")
        out.append(Curve(c.id, c.x / c.x_max, c.y, 1.0, native_x_max=c.x_max))
    return CurveSet(out)


def unregister(cs: CurveSet) -> CurveSet:
    """Inverse of :func:`register`."""
    return CurveSet(Curve(c.id, c.x * c.native_x_max, c.y, c.native_x_max) for c in cs)


@dataclass(frozen=True)
class BasisSpec:
    """Cubic B-spline basis on ``[0, 1]`` with equally spaced knots.

    ``dimension = interior_knots + order``.  The defaults give 20 basis
    functions over 17 equal spans of ``[0, 1]``, i.e. 16 interior knots
    (18 breakpoints counting the ends).  Asking for 17 interior knots with
    dimension 20 is rejected as inconsistent.
    """

    dimension: int = 20
    interior_knots: int = 16
    penalty_lambda: float = 0.5
    penalty_order: int = 2
    order: int = 4

    def __post_init__(self):
        if self.dimension != self.interior_knots + self.order:
            raise ValueError(
                f"dimension {self.dimension} inconsistent with {self.interior_knots} interior knots "
                f"(expected {self.interior_knots + self.order} for order {self.order})"
            )
        if self.penalty_lambda < 0:
            raise ValueError("penalty_lambda must be >= 0")
        if not 0 <= self.penalty_order < self.dimension:
            raise ValueError("penalty_order out of range")

    @property
    def degree(self) -> int:
        return self.order - 1

    @property
    def breakpoints(self) -> NDArray:
        return np.linspace(0.0, 1.0, self.interior_knots + 2)

    @property
    def knots(self) -> NDArray:
        """Equally spaced knots extended ``degree`` spans beyond each end.

        Unlike a clamped knot vector this keeps every basis function a
        translate of the others, so coefficients in arithmetic progression
        represent straight lines exactly and the order-2 difference penalty
        shrinks towards the least-squares line.
        """
        h = 1.0 / (self.interior_knots + 1)
        k = self.degree
        return np.arange(-k, self.interior_knots + 2 + k) * h

    def design(self, u: ArrayLike) -> NDArray:
        """Basis functions evaluated at ``u``, shape ``(len(u), dimension)``."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if np.any(u < 0) or np.any(u > 1):
            raise DomainError("basis is defined on [0, 1]")
        return BSpline.design_matrix(u, self.knots, self.degree).toarray()

    def _quadrature(self):
        nodes, weights = np.polynomial.legendre.leggauss(GRAM_QUAD_ORDER)
        bp = self.breakpoints
        lo, hi = bp[:-1, None], bp[1:, None]
        u = (0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)).ravel()
        w = (0.5 * (hi - lo) * weights).ravel()
        return self.design(u), w

    def gram(self) -> NDArray:
        """``int_0^1 phi phi^T`` by Gauss-Legendre quadrature on each knot span (exact for cubics)."""
        P, w = self._quadrature()
        G = (P * w[:, None]).T @ P
        return 0.5 * (G + G.T)

    def integrals(self) -> NDArray:
        """``int_0^1 phi_b``."""
        P, w = self._quadrature()
        return w @ P

    def penalty(self) -> NDArray:
        D = np.diff(np.eye(self.dimension), n=self.penalty_order, axis=0)
        return D.T @ D

    def to_dict(self) -> dict:
        return {
            "kind": "cubic-bspline",
            "dimension": self.dimension,
            "interior_knots": self.interior_knots,
            "penalty_lambda": self.penalty_lambda,
            "penalty_order": self.penalty_order,
            "order": self.order,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BasisSpec":
        return cls(**{k: d[k] for k in ("dimension", "interior_knots", "penalty_lambda", "penalty_order", "order")})


def psmooth(cs: CurveSet, basis: BasisSpec) -> NDArray:
    """P-spline coefficients of each registered curve.

    Row ``i`` minimises
    ``sum_k (y_k - (B c)_k)^2 + lambda * ||Delta^d c||^2``.

    Raises
    ------
    SingularMatrixError
        If the design is rank deficient and ``penalty_lambda`` is zero.
    """
    P = basis.penalty_lambda * basis.penalty()
    coefs = np.empty((len(cs), basis.dimension))
    for i, c in enumerate(cs):
        if c.x[0] < 0 or c.x[-1] > 1:
            raise DomainError(f"curve {c.id} is not registered to [0, 1]")
        B = basis.design(c.x)
        coefs[i] = solve(B.T @ B + P, B.T @ c.y)
    return coefs


@dataclass(frozen=True, eq=False)
class KLModel:
    """Truncated Karhunen-Loeve expansion in B-spline coordinates.

    Attributes
    ----------
    eigenfunction_coefs : ndarray, shape (dimension, r)
        Column ``j`` holds the coefficients of eigenfunction ``j + 1``.
    scores : ndarray, shape (n, r)
    explained : ndarray, shape (r,)
        Percent of ``total_variance`` per component.
    q : int
        Number of components selected by the variance cut-off.
    """

    basis: BasisSpec
    mean_coefs: NDArray
    eigenfunction_coefs: NDArray
    eigenvalues: NDArray
    scores: NDArray
    explained: NDArray
    total_variance: float
    q: int
    degenerate: bool = False
    curve_ids: tuple = field(default_factory=tuple)

    @property
    def n_components(self) -> int:
        return self.eigenvalues.size

    def mean(self, t: ArrayLike):
        return eval_basis(self, "mean", t)

    def eigenfunction(self, j: int, t: ArrayLike):
        return eval_basis(self, j, t)

    def reconstruct(self, q: int | None = None) -> NDArray:
        """Coefficients of ``mu + sum_{j<=q} xi_ij f_j`` for every curve."""
        q = self.n_components if q is None else q
        return self.mean_coefs + self.scores[:, :q] @ self.eigenfunction_coefs[:, :q].T

    def scree(self) -> list:
        """``(j, lambda_j)`` pairs for a scree graph."""
        return [(j + 1, float(v)) for j, v in enumerate(self.eigenvalues)]

    def to_dict(self) -> dict:
        return {
            "basis": self.basis.to_dict(),
            "mean_coefs": self.mean_coefs.tolist(),
            "eigenfunction_coefs": self.eigenfunction_coefs.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "scores": self.scores.tolist(),
            "explained": self.explained.tolist(),
            "total_variance": self.total_variance,
            "q": self.q,
            "degenerate": self.degenerate,
            "curve_ids": list(self.curve_ids),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KLModel":
        r = len(d["eigenvalues"])
        return cls(
            basis=BasisSpec.from_dict(d["basis"]),
            mean_coefs=np.array(d["mean_coefs"], dtype=float),
            eigenfunction_coefs=np.array(d["eigenfunction_coefs"], dtype=float).reshape(-1, r),
            eigenvalues=np.array(d["eigenvalues"], dtype=float),
            scores=np.array(d["scores"], dtype=float).reshape(-1, r),
            explained=np.array(d["explained"], dtype=float),
            total_variance=float(d["total_variance"]),
            q=int(d["q"]),
            degenerate=bool(d["degenerate"]),
            curve_ids=tuple(d.get("curve_ids", ())),
        )


def _fix_signs(W, basis):
    ints = basis.integrals() @ W
    mid = basis.design([0.5])[0] @ W
    # unit-norm eigenfunctions have |int f| <= 1, so an absolute tie threshold suffices
    flip = np.where(np.abs(ints) > 1e-12, ints < 0, mid < 0)
    return np.where(flip, -1.0, 1.0)


def select_q(explained: ArrayLike, cutoff: float) -> int:
    """Smallest number of components whose cumulative percentage reaches ``cutoff``."""
    if not 0 < cutoff <= 100:
        raise ValueError("cutoff must be in (0, 100]")
    cum = np.cumsum(explained)
    hits = np.flatnonzero(cum >= cutoff - 1e-9)
    return int(hits[0] + 1) if hits.size else len(cum)


def fpca_fit(coefs: ArrayLike, basis: BasisSpec, cutoff: float = 99.0, curve_ids=()) -> KLModel:
    """Functional PCA of curves given by their basis coefficients.

    Keeps every component and records in ``q`` how many are needed to
    reach ``cutoff`` percent of the total variance.  Covariance uses the
    ``n - 1`` divisor.  Eigenfunctions are oriented so that
    ``int f_j >= 0`` (ties: ``f_j(0.5) >= 0``).  When all curves coincide
    the model is flagged ``degenerate`` with ``q = 1``.
    """
    C = np.asarray(coefs, dtype=float)
    n, K = C.shape
    if n < 2:
        raise ValueError("FPCA needs at least two curves")
    if K != basis.dimension:
        raise DimensionError(f"coefficients have {K} columns, basis has {basis.dimension}")
    mean = C.mean(axis=0)
    D = C - mean
    cov = D.T @ D / (n - 1)

    G = basis.gram()
    g_vals, g_vecs = sym_eigen(G)
    G_half = (g_vecs * np.sqrt(g_vals)) @ g_vecs.T
    G_ihalf = (g_vecs / np.sqrt(g_vals)) @ g_vecs.T
    M = G_half @ cov @ G_half
    lam, U = sym_eigen(0.5 * (M + M.T))
    top = max(lam[0], 0.0)
    lam = np.where(lam > EIGEN_RTOL * top, lam, 0.0)
    if np.abs(D).max() <= DEGENERATE_RTOL * np.abs(C).max():
        lam[:] = 0.0
    W = G_ihalf @ U
    W = W * _fix_signs(W, basis)
    scores = D @ G @ W

    total = float(lam.sum())
    degenerate = total <= 0.0
    if degenerate:
        explained = np.zeros_like(lam)
        q = 1
    else:
        explained = 100.0 * lam / total
        q = select_q(explained, cutoff)
    return KLModel(basis, mean, W, lam, scores, explained, total, q, degenerate, tuple(curve_ids))


def kl_truncate(model: KLModel, q: int) -> KLModel:
    """Keep the first ``q`` components."""
    if not 1 <= q <= model.n_components:
        raise ValueError(f"q must lie in [1, {model.n_components}]")
    return replace(
        model,
        eigenfunction_coefs=model.eigenfunction_coefs[:, :q].copy(),
        eigenvalues=model.eigenvalues[:q].copy(),
        scores=model.scores[:, :q].copy(),
        explained=model.explained[:q].copy(),
        q=min(model.q, q),
    )


def eval_basis(model: KLModel, which, t: ArrayLike):
    """Evaluate the mean (``which="mean"``) or eigenfunction ``which`` (1-based) at ``t``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(t_arr > 1):
        raise DomainError("t must lie in [0, 1]")
    if which == "mean":
        c = model.mean_coefs
    else:
        j = int(which)
        if not 1 <= j <= model.n_components:
            raise ValueError(f"no eigenfunction {which}")
        c = model.eigenfunction_coefs[:, j - 1]
    out = model.basis.design(t_arr.ravel()) @ c
    return out.reshape(t_arr.shape) if t_arr.ndim else float(out[0])


def l2_inner(basis: BasisSpec, c1: ArrayLike, c2: ArrayLike) -> float:
    """``int_0^1 f g`` for two functions given by basis coefficients."""
    return float(np.asarray(c1) @ basis.gram() @ np.asarray(c2))


def save_klmodel(model: KLModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=1))


def load_klmodel(path) -> KLModel:
    return KLModel.from_dict(json.loads(Path(path).read_text()))
