"""Synthetic reset-curve ensembles with known K-L structure.

Curves follow ``I_i(u) = mu(u) + xi_i1 f_1(u) [+ xi_i2 f_2(u)] + noise`` on
the registered domain and are written back on a native voltage axis
``v = u * V_reset`` with a random reset voltage per curve.  The first
score has a user-chosen LPH law; the default makes ``1 + 1000 xi_1`` a
three-phase PH variable with mean one.
"""

import json
from pathlib import Path

import numpy as np

from .fpca import Curve, CurveSet, write_curves
from .lph import LinearPhaseType
from .phasetype import PhaseType, hypoexponential

SQRT2 = np.sqrt(2.0)


def true_mean(u):
    """Built-in mean current (amperes) on the registered domain."""
    u = np.asarray(u, dtype=float)
    return 1e-3 * (0.3 + 0.9 * u - 0.4 * u ** 2 + 0.05 * np.sin(3 * np.pi * u))


def true_eigenfunction(j: int, u):
    """Orthonormal ``sqrt(2) sin(j pi u)`` on ``[0, 1]``."""
    return SQRT2 * np.sin(j * np.pi * np.asarray(u, dtype=float))


def default_score_ph() -> PhaseType:
    """Hypoexponential law with rates (6, 3, 2); its mean is exactly one."""
    return hypoexponential([6.0, 3.0, 2.0])


def default_score_law(a: float = 1.0, b: float = 1000.0) -> LinearPhaseType:
    return LinearPhaseType(default_score_ph(), a, b)


def synthesize(n_curves: int, seed: int = 0, score_law: LinearPhaseType | None = None,
               noise_sd: float = 1e-6, second_sd: float = 0.0, n_points: int = 60,
               v_reset=(0.5, 0.8)):
    """Draw a curve ensemble.

    Returns
    -------
    curves : CurveSet
    truth : dict
        Ground-truth scores (``xi``, shape ``(n, q)``), the score law and
        generator settings.
    """
    if n_curves < 2:
        raise ValueError("need at least two curves")
    score_law = default_score_law() if score_law is None else score_law
    rng = np.random.default_rng(seed)
    xi1 = score_law.sample(n_curves, rng)
    cols = [xi1]
    if second_sd > 0:
        cols.append(rng.normal(0.0, second_sd, n_curves))
    xi = np.column_stack(cols)
    resets = rng.uniform(v_reset[0], v_reset[1], n_curves)
    u = np.linspace(0.0, 1.0, n_points)
    curves = []
    for i in range(n_curves):
        y = true_mean(u) + sum(xi[i, j] * true_eigenfunction(j + 1, u) for j in range(xi.shape[1]))
        y = y + rng.normal(0.0, noise_sd, n_points) if noise_sd > 0 else y
        curves.append(Curve(f"c{i:04d}", u * resets[i], y, resets[i]))
    truth = {
        "seed": seed,
        "n_curves": n_curves,
        "noise_sd": noise_sd,
        "second_sd": second_sd,
        "mean": "1e-3*(0.3 + 0.9u - 0.4u^2 + 0.05 sin(3 pi u))",
        "eigenfunctions": [f"sqrt(2) sin({j + 1} pi u)" for j in range(xi.shape[1])],
        "score_law": score_law.to_dict(),
        "curve_ids": [c.id for c in curves],
        "scores": xi.tolist(),
    }
    return CurveSet(curves), truth


def cmd_synth(n_curves: int, seed: int, outdir, score_law=None, noise_sd: float = 1e-6,
              second_sd: float = 0.0, n_points: int = 60) -> dict:
    """Write ``curves.csv`` and ``truth.json`` into ``outdir``."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    cs, truth = synthesize(n_curves, seed, score_law, noise_sd, second_sd, n_points)
    write_curves(cs, out / "curves.csv")
    (out / "truth.json").write_text(json.dumps(truth, indent=1))
    return {"curves": str(out / "curves.csv"), "truth": str(out / "truth.json")}
