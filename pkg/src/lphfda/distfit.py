"""Classical candidate fits and goodness-of-fit statistics.

Weibull, Normal and Cauchy laws are fitted by maximum likelihood and
compared with a fitted phase-type law through the Kolmogorov-Smirnov
statistic, the Anderson-Darling statistic and the log-likelihood.

KS p-values come from the asymptotic Kolmogorov distribution and do not
correct for estimated parameters.  AD p-values use a parametric
bootstrap under the fitted (simple) null.
"""

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike
from scipy import stats

from .errors import DomainError, FitError
from .emfit import DENSITY_FLOOR
from .phasetype import PhaseType

NEWTON_TOL = 1e-10
NEWTON_MAXITER = 200
#: CDF values are clamped to [CDF_CLAMP, 1 - CDF_CLAMP] inside the AD statistic
CDF_CLAMP = 1e-12
N_BOOTSTRAP = 1000


def mle_normal(data: ArrayLike) -> dict:
    x = np.asarray(data, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two observations")
    return {"mu": float(x.mean()), "sigma": float(x.std())}


def mle_weibull(data: ArrayLike) -> dict:
    """Weibull shape and scale by Newton iteration on the profile score.

    The shape ``k`` solves ``sum x^k ln x / sum x^k - 1/k - mean(ln x) = 0``
    and then ``scale = (mean x^k)^(1/k)``.
    """
    x = np.asarray(data, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two observations")
    if np.any(x <= 0):
        raise DomainError("Weibull fitting needs positive data")
    top = x.max()
    lz = np.log(x / top)  # rescaling leaves the shape equation unchanged
    mean_lz = lz.mean()
    sd = lz.std()
    if sd == 0:
        raise FitError("Weibull fit undefined for constant data")
    k = np.pi / (np.sqrt(6.0) * sd)
    for _ in range(NEWTON_MAXITER):
        w = np.exp(k * lz)
        s0, s1, s2 = w.sum(), (w * lz).sum(), (w * lz * lz).sum()
        g = s1 / s0 - 1.0 / k - mean_lz
        dg = (s2 * s0 - s1 * s1) / s0 ** 2 + 1.0 / k ** 2
        step = g / dg
        k_new = k - step
        if k_new <= 0:
            k_new = 0.5 * k
        if abs(k_new - k) <= NEWTON_TOL * max(1.0, k):
            k = k_new
            break
        k = k_new
    else:
        raise FitError("Weibull Newton iteration did not converge")
    scale = top * np.mean(np.exp(k * lz)) ** (1.0 / k)
    return {"shape": float(k), "scale": float(scale)}


def _cauchy_loglik(x, mu, s):
    r = x - mu
    return x.size * np.log(s) - np.sum(np.log(s * s + r * r)) - x.size * np.log(np.pi)


def mle_cauchy(data: ArrayLike) -> dict:
    """Cauchy location and scale by damped Newton on the score equations.

    Starts at the median and half the interquartile range; steps are
    halved until the log-likelihood does not decrease.
    """
    x = np.asarray(data, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two observations")
    q1, med, q3 = np.percentile(x, [25, 50, 75])
    mu, s = med, 0.5 * (q3 - q1)
    if s <= 0:
        s = max(np.abs(x - med).mean(), 1e-12)
    n = x.size
    ll = _cauchy_loglik(x, mu, s)
    for _ in range(NEWTON_MAXITER):
        r = x - mu
        den = s * s + r * r
        grad = np.array([np.sum(2 * r / den), n / s - np.sum(2 * s / den)])
        h_mm = np.sum(2 * (r * r - s * s) / den ** 2)
        h_ms = np.sum(-4 * r * s / den ** 2)
        h_ss = -n / s ** 2 + np.sum(2 * (s * s - r * r) / den ** 2)
        H = np.array([[h_mm, h_ms], [h_ms, h_ss]])
        if np.all(np.linalg.eigvalsh(H) < 0):
            step = -np.linalg.solve(H, grad)
        else:
            step = grad * s * s / n
        t = 1.0
        while True:
            mu_new, s_new = mu + t * step[0], s + t * step[1]
            if s_new > 0:
                ll_new = _cauchy_loglik(x, mu_new, s_new)
                if ll_new >= ll - 1e-12 * abs(ll):
                    break
            t *= 0.5
            if t < 1e-12:
                mu_new, s_new, ll_new = mu, s, ll
                break
        done = abs(mu_new - mu) + abs(s_new - s) <= NEWTON_TOL * (1.0 + abs(mu) + s)
        mu, s, ll = mu_new, s_new, ll_new
        if done:
            return {"location": float(mu), "scale": float(s)}
    raise FitError("Cauchy Newton iteration did not converge")


@dataclass
class Candidate:
    """A fitted model offered to the goodness-of-fit comparison."""

    name: str
    params: dict
    cdf: Callable
    pdf: Callable
    sampler: Callable  # (n, rng) -> ndarray
    n_params: int = 0


def weibull_candidate(data) -> Candidate:
    p = mle_weibull(data)
    d = stats.weibull_min(p["shape"], scale=p["scale"])
    return Candidate("Weibull", p, d.cdf, d.pdf, lambda n, rng: d.rvs(size=n, random_state=rng), 2)


def normal_candidate(data) -> Candidate:
    p = mle_normal(data)
    d = stats.norm(p["mu"], p["sigma"])
    return Candidate("Normal", p, d.cdf, d.pdf, lambda n, rng: d.rvs(size=n, random_state=rng), 2)


def cauchy_candidate(data) -> Candidate:
    p = mle_cauchy(data)
    d = stats.cauchy(p["location"], p["scale"])
    return Candidate("Cauchy", p, d.cdf, d.pdf, lambda n, rng: d.rvs(size=n, random_state=rng), 2)


def ph_candidate(ph: PhaseType, name: str = "PHD") -> Candidate:
    def _clip(f):
        return lambda x: f(np.maximum(np.asarray(x, dtype=float), 0.0)) * (np.asarray(x) >= 0)

    m = ph.order
    return Candidate(
        name,
        {"phases": m, **ph.to_dict()},
        _clip(ph.cdf),
        _clip(ph.density),
        lambda n, rng: ph.sample(n, rng),
        (m - 1) + m * m,
    )


CLASSICAL = {"weibull": weibull_candidate, "normal": normal_candidate, "cauchy": cauchy_candidate}


def ks_test(data: ArrayLike, cdf: Callable) -> tuple[float, float]:
    """One-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    x = np.sort(np.asarray(data, dtype=float))
    n = x.size
    if n < 1:
        raise ValueError("need at least one observation")
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d = max(float(np.max(i / n - F)), float(np.max(F - (i - 1) / n)), 0.0)
    return d, float(stats.kstwobign.sf(np.sqrt(n) * d))


def ad_statistic(x_sorted, F):
    n = x_sorted.shape[-1]
    i = np.arange(1, n + 1)
    logs = np.log(F) + np.log1p(-F[..., ::-1])
    return -n - np.sum((2 * i - 1) * logs, axis=-1) / n


def _clamped_cdf(cdf, x, warn=True):
    F = np.asarray(cdf(x), dtype=float)
    low, high = CDF_CLAMP, 1.0 - CDF_CLAMP
    if warn and (np.any(F < low) or np.any(F > high)):
        warnings.warn("CDF values outside (0, 1) clamped in Anderson-Darling statistic", stacklevel=3)
    return np.clip(F, low, high)


def ad_test(data: ArrayLike, cdf: Callable, sampler: Callable, seed: int = 0,
            n_boot: int = N_BOOTSTRAP) -> tuple[float, float]:
    """Anderson-Darling statistic with a parametric-bootstrap p-value.

    Replicate ``r`` draws ``len(data)`` values from ``sampler(n, rng)``
    with ``rng = default_rng(seed + r)``; the p-value is the fraction of
    replicate statistics at least as large as the observed one.
    """
    x = np.sort(np.asarray(data, dtype=float))
    n = x.size
    if n < 2:
        raise ValueError("need at least two observations")
    a2 = float(ad_statistic(x, _clamped_cdf(cdf, x)))
    exceed = 0
    for r in range(n_boot):
        xb = np.sort(sampler(n, np.random.default_rng(seed + r)))
        exceed += ad_statistic(xb, _clamped_cdf(cdf, xb, warn=False)) >= a2
    return a2, exceed / n_boot


@dataclass
class FitRow:
    name: str
    params: dict
    loglik: float
    ks_stat: float
    ks_pvalue: float
    ad_stat: float
    ad_pvalue: float


@dataclass
class FitReport:
    rows: list = field(default_factory=list)
    n: int = 0
    n_boot: int = N_BOOTSTRAP

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: -r.loglik)

    def best(self) -> FitRow:
        return self.rows[0]

    def row(self, name: str) -> FitRow:
        return next(r for r in self.rows if r.name == name)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "n_boot": self.n_boot,
            "rows": [r.__dict__ for r in self.rows],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitReport":
        return cls([FitRow(**r) for r in d["rows"]], d["n"], d["n_boot"])

    def to_text(self) -> str:
        def p(v):
            return "<0.001" if v < 0.001 else f"{v:.3f}"

        head = ("Distribution", "p-value K-S", "p-value Anderson-Darling", "LogL")
        body = [(r.name, p(r.ks_pvalue), p(r.ad_pvalue), f"{r.loglik:.2f}") for r in self.rows]
        widths = [max(len(row[c]) for row in [head, *body]) for c in range(4)]
        lines = ["  ".join(s.ljust(w) if c == 0 else s.rjust(w) for c, (s, w) in enumerate(zip(row, widths)))
                 for row in [head, *body]]
        rule = "-" * len(lines[0])
        notes = [
            f"n = {self.n}. K-S p-values are asymptotic and ignore parameter estimation.",
            f"Anderson-Darling p-values: parametric bootstrap, {self.n_boot} replicates, fitted model as null.",
        ]
        return "\n".join([rule, lines[0], rule, *lines[1:], rule, *notes]) + "\n"


def loglik_of(candidate: Candidate, data) -> float:
    f = np.asarray(candidate.pdf(np.asarray(data, dtype=float)), dtype=float)
    return float(np.sum(np.log(np.maximum(f, DENSITY_FLOOR))))


def fit_report(data: ArrayLike, candidates, seed: int = 0, n_boot: int = N_BOOTSTRAP) -> FitReport:
    x = np.asarray(data, dtype=float)
    rows = []
    for c in candidates:
        ks, ks_p = ks_test(x, c.cdf)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ad, ad_p = ad_test(x, c.cdf, c.sampler, seed=seed, n_boot=n_boot)
        rows.append(FitRow(c.name, c.params, loglik_of(c, x), ks, ks_p, ad, ad_p))
    return FitReport(rows, int(x.size), n_boot)


def nelson_aalen(data: ArrayLike, grid: ArrayLike):
    """Nelson-Aalen cumulative hazard of an uncensored sample at ``grid``."""
    x = np.sort(np.asarray(data, dtype=float))
    values, counts = np.unique(x, return_counts=True)
    at_risk = x.size - np.concatenate([[0], np.cumsum(counts)[:-1]])
    H = np.cumsum(counts / at_risk)
    idx = np.searchsorted(values, np.asarray(grid, dtype=float), side="right")
    return np.where(idx > 0, H[np.maximum(idx - 1, 0)], 0.0)


def empirical_curves(data: ArrayLike, models=(), grid_size: int = 200) -> dict:
    """Tables for ECDF, reliability, cumulative hazard and histogram density.

    Each table maps ``grid_x``, ``empirical`` and ``fitted_<name>`` to
    equal-length arrays.  The density table is gridded at the centres of
    Freedman-Diaconis histogram bins; the others on an even grid spanning
    the data.
    """
    x = np.sort(np.asarray(data, dtype=float))
    n = x.size
    if n < 2:
        raise ValueError("need at least two observations")
    grid = np.linspace(x[0], x[-1], grid_size)
    ecdf = np.searchsorted(x, grid, side="right") / n
    edges = np.histogram_bin_edges(x, bins="fd")
    hist, edges = np.histogram(x, bins=edges, density=True)
    centres = 0.5 * (edges[1:] + edges[:-1])

    tables = {
        "cdf": {"grid_x": grid, "empirical": ecdf},
        "reliability": {"grid_x": grid, "empirical": 1.0 - ecdf},
        "cumhazard": {"grid_x": grid, "empirical": nelson_aalen(x, grid)},
        "density": {"grid_x": centres, "empirical": hist},
    }
    for m in models:
        F = np.asarray(m.cdf(grid), dtype=float)
        R = np.clip(1.0 - F, 0.0, 1.0)
        tables["cdf"][f"fitted_{m.name}"] = F
        tables["reliability"][f"fitted_{m.name}"] = R
        with np.errstate(divide="ignore"):
            tables["cumhazard"][f"fitted_{m.name}"] = -np.log(np.maximum(R, DENSITY_FLOOR))
        tables["density"][f"fitted_{m.name}"] = np.asarray(m.pdf(centres), dtype=float)
    return tables


def write_table_csv(table: dict, path) -> None:
    cols = list(table)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in zip(*(table[c] for c in cols)):
            w.writerow([f"{v:.17g}" for v in row])


def read_table_csv(path) -> dict:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        cols = next(reader)
        rows = np.array([[float(v) for v in r] for r in reader])
    return {c: rows[:, i] for i, c in enumerate(cols)}


def save_report(report: FitReport, json_path, text_path=None) -> None:
    Path(json_path).write_text(json.dumps(report.to_dict(), indent=1))
    if text_path is not None:
        Path(text_path).write_text(report.to_text())
