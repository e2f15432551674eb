r"""Continuous phase-type distributions.

A phase-type law with representation :math:`(\alpha, T)` is the time to
absorption of a continuous-time Markov chain whose transient block is the
subgenerator :math:`T` and whose initial law on the transient states is
the substochastic vector :math:`\alpha`.  Mass ``1 - sum(alpha)`` starts in
the absorbing state and becomes an atom at zero.

.. math::

    R(x) = \alpha e^{Tx} \mathbf{1}, \qquad f(x) = \alpha e^{Tx} T^0,
    \qquad T^0 = -T\mathbf{1}.

>>> ph = erlang(2, 1.0)
>>> round(float(ph.reliability(1.0)), 7)
0.7357589
"""

from dataclasses import dataclass
from math import factorial

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DomainError, RepresentationError
from .linalg import block_bidiagonal, kron, mat_exp, solve

#: slack on ``sum(alpha) <= 1`` and on the sign conditions
PROB_TOL = 1e-12
#: slack on row sums ``<= 0``, relative to ``max(1, max|T_ii|)``
ROW_SUM_TOL = 1e-12
#: largest accepted 2-norm condition number of T
COND_MAX = 1e12


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PhaseType:
    """Phase-type distribution with representation ``(alpha, T)``.

    Construction validates the representation and raises
    :class:`RepresentationError` naming the first violated condition.
    """

    alpha: NDArray
    T: NDArray

    def __post_init__(self):
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float)).ravel()
        T = np.atleast_2d(np.asarray(self.T, dtype=float))
        m = alpha.size
        if T.shape != (m, m):
            raise RepresentationError(f"alpha has order {m} but T has shape {T.shape}")
        if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(T))):
            raise RepresentationError("representation has non-finite entries")
        if np.any(alpha < -PROB_TOL):
            raise RepresentationError("alpha has negative entries")
        if alpha.sum() > 1 + PROB_TOL:
            raise RepresentationError(f"alpha sums to {alpha.sum():.15g} > 1")
        diag = np.diag(T)
        if np.any(diag >= 0):
            raise RepresentationError("T has a non-negative diagonal entry")
        off = T - np.diag(diag)
        if np.any(off < -PROB_TOL * max(1.0, -diag.min())):
            raise RepresentationError("T has a negative off-diagonal entry")
        if np.any(T.sum(axis=1) > ROW_SUM_TOL * max(1.0, -diag.min())):
            raise RepresentationError("T has a positive row sum")
        if np.linalg.cond(T) > COND_MAX:
            raise RepresentationError("T is not invertible (condition number above 1e12)")
        object.__setattr__(self, "alpha", _readonly(np.clip(alpha, 0.0, None)))
        object.__setattr__(self, "T", _readonly(T))

    @property
    def order(self) -> int:
        return self.alpha.size

    @property
    def exit_vector(self) -> NDArray:
        """``T^0 = -T e``, clipped at zero to absorb round-off."""
        return np.clip(-self.T.sum(axis=1), 0.0, None)

    @property
    def atom(self) -> float:
        """Probability of immediate absorption, ``1 - sum(alpha)``."""
        return max(0.0, 1.0 - float(self.alpha.sum()))

    def _propagate(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise DomainError("phase-type functions are defined for x >= 0")
        return x, self.alpha @ mat_exp(self.T, x.ravel())

    def reliability(self, x: ArrayLike):
        """Survival function ``P(X > x)``."""
        x, rows = self._propagate(x)
        out = np.clip(rows.sum(axis=-1), 0.0, 1.0)
        return out.reshape(x.shape) if x.ndim else float(out[0])

    def cdf(self, x: ArrayLike):
        return 1.0 - self.reliability(x)

    def density(self, x: ArrayLike):
        """Density of the absolutely continuous part, ``alpha e^{Tx} T^0``."""
        x, rows = self._propagate(x)
        out = np.clip(rows @ self.exit_vector, 0.0, None)
        return out.reshape(x.shape) if x.ndim else float(out[0])

    def moment(self, n: int) -> float:
        """Raw moment ``E[X^n] = (-1)^n n! alpha T^{-n} e``."""
        if n < 1:
            raise DomainError("moment order must be >= 1")
        v = np.ones(self.order)
        for _ in range(n):
            v = solve(self.T, v)
        return float((-1) ** n * factorial(n) * (self.alpha @ v))

    def mean(self) -> float:
        return self.moment(1)

    def var(self) -> float:
        return self.moment(2) - self.moment(1) ** 2

    def scaled(self, gamma: float) -> "PhaseType":
        """Law of ``gamma * X`` for ``gamma > 0``: ``(alpha, T / gamma)``."""
        if not gamma > 0:
            raise DomainError("PH homothecy needs gamma > 0; use LPH scaling for negative factors")
        return PhaseType(self.alpha, self.T / gamma)

    def sample(self, n: int, seed=None) -> NDArray:
        """Absorption times of ``n`` independent chain trajectories.

        ``seed`` may be an integer or a ``numpy.random.Generator``; no
        global random state is touched.
        """
        rng = np.random.default_rng(seed)
        m = self.order
        rates = -np.diag(self.T)
        jump = np.empty((m, m + 1))
        jump[:, :m] = self.T / rates[:, None]
        jump[np.arange(m), np.arange(m)] = 0.0
        jump[:, m] = self.exit_vector / rates
        cum = np.cumsum(jump, axis=1)
        cum[:, -1] = 1.0

        start = np.append(self.alpha, self.atom)
        state = rng.choice(m + 1, size=n, p=start / start.sum())
        times = np.zeros(n)
        alive = np.flatnonzero(state < m)
        while alive.size:
            s = state[alive]
            times[alive] += rng.exponential(1.0 / rates[s])
            u = rng.random(alive.size)
            nxt = (u[:, None] >= cum[s]).sum(axis=1)
            state[alive] = np.minimum(nxt, m)
            alive = alive[state[alive] < m]
        return times

    def to_dict(self) -> dict:
        return {"alpha": self.alpha.tolist(), "T": self.T.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "PhaseType":
        return cls(d["alpha"], d["T"])

    def __repr__(self):
        return f"PhaseType(order={self.order}, mean={self.mean():.6g})"


def ph_new(alpha: ArrayLike, T: ArrayLike) -> PhaseType:
    return PhaseType(alpha, T)


def exponential(rate: float) -> PhaseType:
    return PhaseType([1.0], [[-rate]])


def erlang(k: int, rate: float) -> PhaseType:
    """Erlang law with ``k`` stages, each with the given rate."""
    T = -rate * np.eye(k) + rate * np.eye(k, k=1)
    alpha = np.zeros(k)
    alpha[0] = 1.0
    return PhaseType(alpha, T)


def hypoexponential(rates) -> PhaseType:
    rates = np.asarray(rates, dtype=float)
    T = -np.diag(rates) + np.diag(rates[:-1], k=1)
    alpha = np.zeros(rates.size)
    alpha[0] = 1.0
    return PhaseType(alpha, T)


def ph_sum(parts) -> PhaseType:
    """Law of the sum of independent PH variables.

    For stochastic initial vectors the representation is
    ``rho = (alpha_1, 0, ..., 0)`` and the upper block-bidiagonal
    ``L`` with diagonal blocks ``T_i`` and superdiagonal blocks
    ``T_i^0 (x) alpha_{i+1}``.  Defective initial vectors add the
    corresponding skip blocks so that atoms at zero pass straight through
    to the next summand.
    """
    parts = list(parts)
    if not parts:
        raise ValueError("ph_sum needs at least one distribution")
    if len(parts) == 1:
        return parts[0]
    diagonal = [p.T for p in parts]
    superdiag = [kron(p.exit_vector[:, None], q.alpha[None, :]) for p, q in zip(parts, parts[1:])]
    L = block_bidiagonal(diagonal, superdiag)

    atoms = np.array([p.atom for p in parts])
    sizes = [p.order for p in parts]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    rho = np.zeros(offsets[-1])
    carry = 1.0
    for i, p in enumerate(parts):
        rho[offsets[i]:offsets[i + 1]] = carry * p.alpha
        carry *= atoms[i]
    if np.any(atoms > 0):
        for i, p in enumerate(parts):
            skip = 1.0
            for j in range(i + 2, len(parts)):
                skip *= atoms[j - 1]
                if skip == 0.0:
                    break
                block = skip * np.outer(p.exit_vector, parts[j].alpha)
                L[offsets[i]:offsets[i + 1], offsets[j]:offsets[j + 1]] = block
    return PhaseType(rho, L)


def ph_scale(d: PhaseType, gamma: float) -> PhaseType:
    return d.scaled(gamma)
