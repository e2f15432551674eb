"""Maximum-likelihood fitting of general phase-type laws by EM.

The E-step needs, for each observation ``y``, the forward vector
``alpha e^{Ty}``, the backward vector ``e^{Ty} T^0`` and the convolution
integral ``int_0^y e^{T(y-u)} T^0 alpha e^{Tu} du``.  All three come from
one exponential of the block matrix ``[[T, T^0 alpha], [0, T]]``: its
diagonal blocks are ``e^{Ty}`` and its top-right block is the integral.
"""

import logging
from dataclasses import dataclass, field, asdict
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DomainError, FitError, NumericError, RepresentationError
from .linalg import mat_exp
from .phasetype import PhaseType

logger = logging.getLogger(__name__)

#: floor applied to densities inside log-likelihoods
DENSITY_FLOOR = 1e-300
#: allowed decrease of the log-likelihood between EM iterations
MONOTONE_SLACK = 1e-9
#: states whose expected sojourn falls below this keep their previous row
MIN_SOJOURN = 1e-300


@dataclass
class EmConfig:
    phases: int = 4
    max_iter: int = 2000
    rel_tol: float = 1e-8
    seed: int = 0
    restarts: int = 5

    def __post_init__(self):
        if self.phases < 1:
            raise ValueError("phases must be >= 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class EmTrace:
    loglik_per_iter: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    restart: int = 0
    restart_logliks: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


class EStepIntegrals(NamedTuple):
    exp_Tx: NDArray
    """``e^{Tx}``, shape ``(m, m)`` (or ``(k, m, m)`` for vector input)"""
    conv: NDArray
    """``int_0^x e^{Tu} T^0 alpha e^{T(x-u)} du``"""
    forward: NDArray
    """``alpha e^{Tx}``"""
    backward: NDArray
    """``e^{Tx} T^0``"""


def em_estep_integrals(ph: PhaseType, x: ArrayLike) -> EStepIntegrals:
    """Conditional-expectation building blocks for one or many observations."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("E-step integrals need x > 0")
    m = ph.order
    t0 = ph.exit_vector
    A = np.zeros((2 * m, 2 * m))
    A[:m, :m] = ph.T
    A[m:, m:] = ph.T
    A[:m, m:] = np.outer(t0, ph.alpha)
    E = mat_exp(A, x.ravel())
    expTx = E[:, :m, :m]
    conv = E[:, :m, m:]
    forward = ph.alpha @ expTx
    backward = expTx @ t0
    if x.ndim == 0:
        return EStepIntegrals(expTx[0], conv[0], forward[0], backward[0])
    return EStepIntegrals(expTx, conv, forward, backward)


def loglik(ph: PhaseType, data: ArrayLike) -> float:
    """Sum of log densities, each floored at ``DENSITY_FLOOR``."""
    data = np.asarray(data, dtype=float)
    if data.size == 0:
        raise ValueError("loglik needs at least one observation")
    f = np.atleast_1d(ph.density(data))
    return float(np.sum(np.log(np.maximum(f, DENSITY_FLOOR))))


def _initial(m, rng):
    alpha = rng.dirichlet(np.ones(m))
    T = rng.uniform(0.0, 1.0, size=(m, m))
    np.fill_diagonal(T, 0.0)
    exits = rng.uniform(0.0, 1.0, size=m)
    np.fill_diagonal(T, -(T.sum(axis=1) + exits))
    ph = PhaseType(alpha, T)
    # data are normalised to mean one
    return PhaseType(alpha, T * ph.mean())


def _em_step(ph, y):
    """One EM update; returns the new model and the current log-likelihood."""
    m = ph.order
    ints = em_estep_integrals(ph, y)
    t0 = ph.exit_vector
    f = ints.forward @ t0
    if not np.all(np.isfinite(f)) or np.any(f <= 0):
        bad = int(np.sum(~(f > 0)))
        raise NumericError(f"E-step density underflow for {bad} observation(s); largest datum {y.max():.4g}")
    ll = float(np.sum(np.log(f)))
    w = 1.0 / f
    B = ph.alpha * np.einsum("k,ki->i", w, ints.backward)
    C = np.einsum("k,kij->ij", w, ints.conv)
    Z = np.diag(C).copy()
    N = ph.T * C.T
    np.fill_diagonal(N, 0.0)
    N0 = t0 * np.einsum("k,ki->i", w, ints.forward)

    alpha = B / B.sum()
    T = ph.T.copy()
    for i in range(m):
        if Z[i] <= MIN_SOJOURN:
            continue
        T[i] = N[i] / Z[i]
        T[i, i] = -(N0[i] + N[i].sum()) / Z[i]
    return PhaseType(alpha, T), ll


def _run(y, ph, cfg, scale, restart):
    n = y.size
    trace = EmTrace(restart=restart)
    prev = None
    for it in range(cfg.max_iter):
        new, ll = _em_step(ph, y)
        ll -= n * np.log(scale)
        trace.loglik_per_iter.append(ll)
        if prev is not None and abs(ll - prev) <= cfg.rel_tol * abs(prev):
            trace.converged = True
            break
        prev = ll
        ph = new
    else:
        ph = new
    trace.iterations = len(trace.loglik_per_iter)
    return ph, trace


def em_fit(data: ArrayLike, cfg: EmConfig) -> tuple[PhaseType, EmTrace]:
    """Fit an ``m``-phase PH law with unrestricted ``T``.

    Runs ``cfg.restarts`` independent random initialisations (Dirichlet
    ``alpha``, uniform off-diagonal rates, rescaled to the sample mean)
    and returns the model with the highest log-likelihood.  Seeds of the
    restarts are spawned from ``cfg.seed`` so the fit is reproducible.

    Returns
    -------
    ph : PhaseType
    trace : EmTrace
        Log-likelihood path of the winning restart, plus the final
        log-likelihood of every restart.

    Raises
    ------
    DomainError
        If any datum is not positive.
    FitError
        If every restart breaks down numerically.
    """
    x = np.asarray(data, dtype=float).ravel()
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise DomainError("EM fitting requires strictly positive, finite data")
    if x.size < cfg.phases + 1:
        raise ValueError(f"need at least {cfg.phases + 1} observations for {cfg.phases} phases")
    scale = float(x.mean())
    y = x / scale

    best = None
    finals, failures = [], []
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    for r, ss in enumerate(seeds):
        rng = np.random.default_rng(ss)
        try:
            ph, trace = _run(y, _initial(cfg.phases, rng), cfg, scale, r)
            final = loglik(PhaseType(ph.alpha, ph.T / scale), x)
        except (NumericError, RepresentationError) as exc:
            logger.warning("EM restart %d failed: %s", r, exc)
            failures.append(f"restart {r}: {exc}")
            finals.append(None)
            continue
        finals.append(final)
        if best is None or final > best[0]:
            best = (final, ph, trace)
    if best is None:
        raise FitError(f"all {cfg.restarts} EM restarts failed: " + "; ".join(failures))
    _, ph, trace = best
    trace.restart_logliks = finals
    trace.failures = failures
    return PhaseType(ph.alpha, ph.T / scale), trace
