"""End-to-end workflow: curves -> FPCA -> score laws -> process point laws.

``cmd_fit`` writes into its output directory::

    klmodel.json        full K-L model (all components, selected q)
    scree.csv           component, eigenvalue, explained, cumulative
    scores.csv          per-curve scores and transformed scores
    em_sweep.json       EM diagnostics for every phase count tried
    scorelaws.json      LPH law of each retained score
    fitreport.json/.txt candidate comparison for the first score
    pointlaw_<t>.json   law of the process at each requested t
    plots/*.csv         ECDF, reliability, cumulative hazard, density
    run_manifest.json   configuration, seed, tolerances and versions
"""

import csv
import json
import logging
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__, distfit, emfit, fpca, linalg, lph, phasetype
from .distfit import CLASSICAL, empirical_curves, fit_report, ks_test, ph_candidate, write_table_csv
from .emfit import EmConfig, em_fit, loglik
from .errors import IncompatibleSlopeError, LphError
from .fpca import BasisSpec, fpca_fit, load_klmodel, psmooth, read_curves, register, save_klmodel
from .lph import LinearPhaseType, ProcessPointLaw, process_point_law

logger = logging.getLogger(__name__)


class PipelineError(LphError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class PipelineConfig:
    input: str = "curves.csv"
    outdir: str = "out"
    sidecar: str | None = None
    dimension: int = 20
    interior_knots: int = 16
    penalty_lambda: float = 0.5
    penalty_order: int = 2
    cutoff: float = 99.0
    affine_a: float = 1.0
    affine_b: float = 1000.0
    phases: list = field(default_factory=lambda: [4, 8, 16, 21])
    restarts: int = 3
    max_iter: int = 2000
    rel_tol: float = 1e-8
    seed: int = 0
    candidates: list = field(default_factory=lambda: ["weibull", "normal", "cauchy"])
    eval_t: list = field(default_factory=lambda: [0.25, 0.5, 0.75])
    n_boot: int = 1000

    def __post_init__(self):
        if not 0 < self.cutoff <= 100:
            raise ValueError("cutoff must lie in (0, 100]")
        if self.affine_b == 0:
            raise ValueError("affine_b must be non-zero")
        if not self.phases:
            raise ValueError("need at least one phase count")
        unknown = set(self.candidates) - set(CLASSICAL)
        if unknown:
            raise ValueError(f"unknown candidate distributions {sorted(unknown)}")

    @property
    def basis(self) -> BasisSpec:
        return BasisSpec(self.dimension, self.interior_knots, self.penalty_lambda, self.penalty_order)

    @classmethod
    def from_json(cls, path, **overrides) -> "PipelineConfig":
        data = json.loads(Path(path).read_text()) if path else {}
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)


def _dump(obj, path):
    Path(path).write_text(json.dumps(obj, indent=1) + "\n")


def _t_label(t):
    return f"{t:g}"


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, str) else f"{v:.17g}" for v in r])


def tolerances() -> dict:
    return {
        "linalg": {k: getattr(linalg, k) for k in ("EXPM_REL_TOL", "SOLVE_RESIDUAL_TOL", "SINGULAR_PIVOT_TOL", "SYMMETRY_TOL")},
        "phasetype": {k: getattr(phasetype, k) for k in ("PROB_TOL", "ROW_SUM_TOL", "COND_MAX")},
        "lph": {k: getattr(lph, k) for k in ("SLOPE_TOL", "ZERO_WEIGHT_TOL")},
        "emfit": {k: getattr(emfit, k) for k in ("DENSITY_FLOOR", "MONOTONE_SLACK", "MIN_SOJOURN")},
        "fpca": {k: getattr(fpca, k) for k in ("GRAM_QUAD_ORDER", "ORTHONORMAL_TOL", "EIGEN_RTOL", "DEGENERATE_RTOL")},
        "distfit": {k: getattr(distfit, k) for k in ("NEWTON_TOL", "NEWTON_MAXITER", "CDF_CLAMP")},
    }


def _versions():
    import scipy

    return {"lphfda": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def sweep_phases(data, cfg: PipelineConfig):
    """Fit every configured phase count; return the best model and per-m diagnostics."""
    best, diagnostics = None, []
    for m in cfg.phases:
        em_cfg = EmConfig(phases=m, max_iter=cfg.max_iter, rel_tol=cfg.rel_tol, seed=cfg.seed, restarts=cfg.restarts)
        try:
            ph, trace = em_fit(data, em_cfg)
        except LphError as exc:
            diagnostics.append({"phases": m, "error": str(exc)})
            continue
        ll = loglik(ph, data)
        ks, ks_p = ks_test(data, ph.cdf)
        diagnostics.append({
            "phases": m,
            "loglik": ll,
            "ks_stat": ks,
            "ks_pvalue": ks_p,
            "iterations": trace.iterations,
            "converged": trace.converged,
            "restart_logliks": trace.restart_logliks,
            "failures": trace.failures,
        })
        if best is None or ll > best[0]:
            best = (ll, ph)
    if best is None:
        raise PipelineError("em", "no phase count could be fitted: " + json.dumps(diagnostics))
    return best[1], diagnostics


def point_laws(model, score_laws, ts):
    """Process point laws at each ``t``; unrepresentable points are reported, not raised."""
    out = {}
    for t in ts:
        if not 0 <= t <= 1:
            raise PipelineError("pointlaw", f"t={t} outside [0, 1]")
        weights = [fpca.eval_basis(model, j + 1, t) for j in range(len(score_laws))]
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                law = process_point_law(score_laws, weights, fpca.eval_basis(model, "mean", t), t)
                entry = law.to_dict()
            except IncompatibleSlopeError as exc:
                law, entry = None, {"t": t, "error": str(exc)}
        entry["eigenfunctions_at_t"] = weights
        entry["warnings"] = [str(w.message) for w in caught]
        out[t] = (law, entry)
    return out


def cmd_fit(cfg: PipelineConfig) -> dict:
    """Run the full workflow; returns a summary dict and writes artifacts to ``cfg.outdir``."""
    out = Path(cfg.outdir)
    (out / "plots").mkdir(parents=True, exist_ok=True)

    try:
        curves = read_curves(cfg.input, cfg.sidecar)
    except (OSError, ValueError) as exc:
        raise PipelineError("read", str(exc)) from exc
    try:
        reg = register(curves)
        coefs = psmooth(reg, cfg.basis)
    except LphError as exc:
        raise PipelineError("smooth", str(exc)) from exc
    try:
        model = fpca_fit(coefs, cfg.basis, cfg.cutoff, curve_ids=curves.ids)
    except (LphError, ValueError) as exc:
        raise PipelineError("fpca", str(exc)) from exc
    if model.degenerate:
        raise PipelineError("fpca", "all curves coincide; no variability to model")
    save_klmodel(model, out / "klmodel.json")
    cum = np.cumsum(model.explained)
    _write_rows(out / "scree.csv", ["component", "eigenvalue", "explained", "cumulative"],
                [(str(j), lam, e, c) for (j, lam), e, c in zip(model.scree(), model.explained, cum)])

    q = model.q
    a, b = cfg.affine_a, cfg.affine_b
    xi = model.scores[:, :q]
    transformed = a + b * xi
    for j in range(q):
        bad = np.flatnonzero(transformed[:, j] <= 0)
        if bad.size:
            raise PipelineError(
                "transform",
                f"{bad.size} transformed scores of component {j + 1} are <= 0 (min {transformed[:, j].min():.4g}); "
                "phase-type laws need positive support, increase --affine-a or reduce --affine-b",
            )
    _write_rows(out / "scores.csv",
                ["curve_id"] + [f"xi_{j + 1}" for j in range(q)] + [f"transformed_{j + 1}" for j in range(q)],
                [[cid, *xi[i], *transformed[i]] for i, cid in enumerate(model.curve_ids)])

    phs, sweeps = [], []
    for j in range(q):
        ph, diag = sweep_phases(transformed[:, j], cfg)
        phs.append(ph)
        sweeps.append({"component": j + 1, "sweep": diag, "selected_phases": ph.order})
    _dump(sweeps, out / "em_sweep.json")
    score_laws = [LinearPhaseType(ph, a, b) for ph in phs]
    _dump([law.to_dict() for law in score_laws], out / "scorelaws.json")

    first = transformed[:, 0]
    try:
        cands = [ph_candidate(phs[0])] + [CLASSICAL[name](first) for name in cfg.candidates]
    except LphError as exc:
        raise PipelineError("classical", str(exc)) from exc
    report = fit_report(first, cands, seed=cfg.seed, n_boot=cfg.n_boot)
    distfit.save_report(report, out / "fitreport.json", out / "fitreport.txt")
    for name, table in empirical_curves(first, cands).items():
        write_table_csv(table, out / "plots" / f"{name}.csv")

    laws = point_laws(model, score_laws, cfg.eval_t)
    for t, (_, entry) in laws.items():
        _dump(entry, out / f"pointlaw_{_t_label(t)}.json")

    manifest = {
        "config": asdict(cfg),
        "seed": cfg.seed,
        "q": q,
        "explained": model.explained[: max(q, 4)].tolist(),
        "tolerances": tolerances(),
        "versions": _versions(),
    }
    _dump(manifest, out / "run_manifest.json")
    return {"model": model, "score_laws": score_laws, "report": report, "point_laws": laws}


def cmd_eval(klmodel_path, scorelaws_path, ts, outdir, n_mc: int = 100_000, seed: int = 0,
             grid_size: int = 101) -> dict:
    """Point laws of ``X(t)`` plus gridded reliability/density and a Monte-Carlo column.

    The Monte-Carlo column is the empirical reliability of
    ``mu(t) + sum_j f_j(t) xi_j`` with independently simulated scores.
    """
    model = load_klmodel(klmodel_path)
    score_laws = [LinearPhaseType.from_dict(d) for d in json.loads(Path(scorelaws_path).read_text())]
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    draws = np.column_stack([law.sample(n_mc, rng) for law in score_laws])
    results = {}
    for t, (law, entry) in point_laws(model, score_laws, ts).items():
        _dump(entry, out / f"pointlaw_{_t_label(t)}.json")
        weights = np.asarray(entry["eigenfunctions_at_t"])
        mc = np.sort(fpca.eval_basis(model, "mean", t) + draws @ weights)
        lo, hi = np.quantile(mc, [0.001, 0.999])
        if hi <= lo:
            lo, hi = lo - 1e-12, hi + 1e-12
        grid = np.linspace(lo, hi, grid_size)
        table = {"grid_x": grid, "mc_reliability": 1.0 - np.searchsorted(mc, grid, side="right") / n_mc}
        if law is not None:
            table["reliability"] = np.asarray(law.reliability(grid))
            table["density"] = np.asarray(law.density(grid))
        write_table_csv(table, out / f"pointlaw_{_t_label(t)}.csv")
        results[t] = (law, table)
    return results


def load_point_law(path) -> ProcessPointLaw:
    return ProcessPointLaw.from_dict(json.loads(Path(path).read_text()))
