r"""Linear-phase-type (LPH) distributions.

``X`` is LPH when ``Y = a + b X`` is phase-type for some real ``a`` and
``b != 0``.  The interchange representation is the 4-tuple
``(a, b, beta, S)`` with ``beta = alpha e^{Ta}`` and ``S = bT``; internally
the underlying ``PhaseType(alpha, T)`` and ``(a, b)`` are kept and every
quantity is evaluated through the change of variables ``y = a + b x``.
This avoids ``e^{Ta}`` blowing up when ``a`` is large and negative.

Second moments use ``E[X^2] = (E[Y^2] - 2a E[Y] + a^2) / b^2``.  Note that
the widely reproduced closed forms carrying ``1/b^2`` inside the bracket
and ``1/b^4`` in front of the variance only agree with this for
``|b| = 1``.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DivergenceError, DomainError, IncompatibleSlopeError
from .linalg import mat_exp, solve
from .phasetype import PhaseType, ph_sum

#: slopes closer than this (relative) are considered equal
SLOPE_TOL = 1e-12
#: eigenfunction weights with smaller magnitude are treated as zero
ZERO_WEIGHT_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class LinearPhaseType:
    """LPH law of ``X = (Y - a) / b`` with ``Y ~ ph``."""

    ph: PhaseType
    a: float
    b: float

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if not np.isfinite(a) or not np.isfinite(b):
            raise DomainError("LPH offset and slope must be finite")
        if b == 0.0:
            raise DomainError("LPH slope b must be non-zero")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_representation(cls, a, b, beta, S) -> "LinearPhaseType":
        """Recover ``(alpha, T)`` from ``(a, b, beta, S)``: ``T = S/b``, ``alpha = beta e^{-Ta}``."""
        if b == 0:
            raise DomainError("LPH slope b must be non-zero")
        T = np.asarray(S, dtype=float) / b
        alpha = np.asarray(beta, dtype=float) @ mat_exp(T, -a)
        return cls(PhaseType(alpha, T), a, b)

    @property
    def beta(self) -> NDArray:
        return self.ph.alpha @ mat_exp(self.ph.T, self.a)

    @property
    def S(self) -> NDArray:
        return self.b * self.ph.T

    @property
    def boundary(self) -> float:
        """Support endpoint ``-a/b``: support is above it for ``b > 0``, below for ``b < 0``."""
        return -self.a / self.b

    def _y(self, x):
        x = np.asarray(x, dtype=float)
        return x, self.a + self.b * x

    def reliability(self, x: ArrayLike):
        """``P(X > x)``."""
        x, y = self._y(x)
        yy = np.atleast_1d(y)
        out = np.empty(yy.shape)
        inside = yy > 0
        R = self.ph.reliability(yy[inside]) if inside.any() else np.empty(0)
        if self.b > 0:
            out[~inside] = np.where(yy[~inside] == 0, self.ph.reliability(0.0), 1.0)
            out[inside] = R
        else:
            out[~inside] = 0.0
            out[inside] = 1.0 - R
        return out.reshape(x.shape) if x.ndim else float(out[0])

    def cdf(self, x: ArrayLike):
        return 1.0 - self.reliability(x)

    def density(self, x: ArrayLike):
        """``|b| f_Y(a + b x)`` on the support side of ``-a/b``, zero elsewhere."""
        x, y = self._y(x)
        yy = np.atleast_1d(y)
        out = np.zeros(yy.shape)
        inside = yy > 0
        if inside.any():
            out[inside] = abs(self.b) * self.ph.density(yy[inside])
        return out.reshape(x.shape) if x.ndim else float(out[0])

    def mgf(self, t: float) -> float:
        r"""``-beta (S + It)^{-1} e^{-(S+It)a/b} S^0``, i.e. ``e^{-ta/b} M_Y(t/b)``.

        As in the closed form, the atom of ``Y`` at zero (if any) is not
        included, so ``mgf(0) == sum(alpha)``.
        """
        s = t / self.b
        T = self.ph.T
        shifted = T + s * np.eye(self.ph.order)
        abscissa = np.linalg.eigvals(shifted).real.max()
        if abscissa >= 0:
            raise DivergenceError(f"t={t} outside the convergence region (spectral abscissa {abscissa:.3g})")
        v = solve(shifted, self.ph.exit_vector)
        return float(-np.exp(-t * self.a / self.b) * (self.ph.alpha @ v))

    def moment(self, n: int) -> float:
        if n == 1:
            return (self.ph.moment(1) - self.a) / self.b
        if n == 2:
            m1, m2 = self.ph.moment(1), self.ph.moment(2)
            return (m2 - 2 * self.a * m1 + self.a ** 2) / self.b ** 2
        raise DomainError("LPH moments are provided for n in {1, 2}")

    def mean(self) -> float:
        return self.moment(1)

    def var(self) -> float:
        return self.ph.var() / self.b ** 2

    def scaled(self, gamma: float) -> "LinearPhaseType":
        """Law of ``gamma X``: ``(|gamma| a, b sgn(gamma), beta, S / gamma)``."""
        if gamma == 0:
            raise DomainError("scaling factor must be non-zero")
        g = abs(gamma)
        return LinearPhaseType(PhaseType(self.ph.alpha, self.ph.T / g), g * self.a, self.b * np.sign(gamma))

    def shifted(self, c: float) -> "LinearPhaseType":
        """Law of ``X + c``: same PH variable, offset ``a - b c``."""
        return LinearPhaseType(self.ph, self.a - self.b * c, self.b)

    def sample(self, n: int, seed=None) -> NDArray:
        return (self.ph.sample(n, seed) - self.a) / self.b

    def to_dict(self) -> dict:
        """``{a, b, beta, S}`` plus the underlying ``ph`` for lossless reloading."""
        return {
            "a": self.a,
            "b": self.b,
            "beta": self.beta.tolist(),
            "S": self.S.tolist(),
            "ph": self.ph.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearPhaseType":
        if "ph" in d:
            return cls(PhaseType.from_dict(d["ph"]), d["a"], d["b"])
        return cls.from_representation(d["a"], d["b"], d["beta"], d["S"])


def lph_from_ph(ph: PhaseType, a: float, b: float) -> LinearPhaseType:
    return LinearPhaseType(ph, a, b)


def _same_slope(b1, b2):
    return abs(b1 - b2) <= SLOPE_TOL * max(abs(b1), abs(b2))


def lph_sum(parts) -> LinearPhaseType:
    """Sum of independent LPH variables sharing a slope ``b``.

    Returns ``(sum a_i, b, rho e^{L sum a_i}, b L)`` where ``(rho, L)``
    represents the sum of the underlying PH variables.
    """
    parts = list(parts)
    if not parts:
        raise ValueError("lph_sum needs at least one distribution")
    b = parts[0].b
    for p in parts[1:]:
        if not _same_slope(p.b, b):
            raise IncompatibleSlopeError(f"slopes {b} and {p.b} differ")
    if len(parts) == 1:
        return parts[0]
    return LinearPhaseType(ph_sum([p.ph for p in parts]), sum(p.a for p in parts), b)


def lph_scale(d: LinearPhaseType, gamma: float) -> LinearPhaseType:
    return d.scaled(gamma)


def lph_shift(d: LinearPhaseType, c: float) -> LinearPhaseType:
    return d.shifted(c)


@dataclass(frozen=True, eq=False)
class ProcessPointLaw:
    """Law of the process value ``X(t)`` at a single point.

    ``rep`` is ``None`` when every eigenfunction vanishes at ``t``; the law
    is then a point mass at ``mean_shift``.
    """

    t: float
    rep: LinearPhaseType | None
    mean_shift: float
    dropped: tuple = field(default_factory=tuple)

    @property
    def degenerate(self) -> bool:
        return self.rep is None

    def cdf(self, x: ArrayLike):
        if self.rep is None:
            return np.where(np.asarray(x, dtype=float) >= self.mean_shift, 1.0, 0.0)
        return self.rep.cdf(x)

    def reliability(self, x: ArrayLike):
        return 1.0 - self.cdf(x)

    def density(self, x: ArrayLike):
        if self.rep is None:
            return np.zeros_like(np.asarray(x, dtype=float))
        return self.rep.density(x)

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "mean_shift": self.mean_shift,
            "degenerate": self.degenerate,
            "dropped": list(self.dropped),
            "rep": None if self.rep is None else self.rep.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProcessPointLaw":
        rep = None if d["rep"] is None else LinearPhaseType.from_dict(d["rep"])
        return cls(d["t"], rep, d["mean_shift"], tuple(d.get("dropped", ())))


def process_point_law(scores, eigenfunctions_at_t, mean_at_t: float, t: float) -> ProcessPointLaw:
    """LPH law of ``X(t) = mu(t) + sum_j f_j(t) xi_j`` for independent LPH scores.

    Each ``f_j(t) xi_j`` is rescaled (slope becomes ``b_j sgn f_j(t)``), the
    terms are summed with :func:`lph_sum`, and the mean is added back with
    :meth:`LinearPhaseType.shifted`.  A score whose weight vanishes at ``t``
    is dropped with a warning.

    Raises
    ------
    IncompatibleSlopeError
        If slope magnitudes differ, or if after rescaling the signed slopes
        disagree (a sum of terms with opposite orientation has unbounded
        support on both sides and is not LPH).
    """
    scores = list(scores)
    weights = [float(w) for w in eigenfunctions_at_t]
    if len(scores) != len(weights):
        raise ValueError("need one eigenfunction value per score")
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"t={t} outside the registered domain [0, 1]")
    if scores:
        b0 = abs(scores[0].b)
        for s in scores[1:]:
            if not _same_slope(abs(s.b), b0):
                raise IncompatibleSlopeError("scores must share the slope magnitude |b|")

    terms, dropped = [], []
    for j, (score, w) in enumerate(zip(scores, weights), start=1):
        if abs(w) <= ZERO_WEIGHT_TOL:
            dropped.append(j)
            warnings.warn(f"eigenfunction {j} vanishes at t={t}; component dropped", stacklevel=2)
            continue
        terms.append(score.scaled(w))
    if not terms:
        return ProcessPointLaw(float(t), None, float(mean_at_t), tuple(dropped))
    centered = lph_sum(terms)
    return ProcessPointLaw(float(t), centered.shifted(mean_at_t), float(mean_at_t), tuple(dropped))
