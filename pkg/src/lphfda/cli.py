"""Command-line entry point: ``lphfda synth|fit|eval``."""

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import LphError
from .lph import LinearPhaseType
from .phasetype import PhaseType
from .pipeline import PipelineConfig, PipelineError, cmd_eval, cmd_fit
from .synth import cmd_synth


def _floats(s):
    return [float(v) for v in s.split(",") if v]


def _ints(s):
    return [int(v) for v in s.split(",") if v]


def build_parser():
    p = argparse.ArgumentParser(prog="lphfda", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic curve ensemble")
    s.add_argument("--n-curves", type=int, default=232)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--outdir", default="synth")
    s.add_argument("--noise-sd", type=float, default=1e-6)
    s.add_argument("--second-sd", type=float, default=0.0,
                   help="standard deviation of an optional second (Gaussian) score")
    s.add_argument("--n-points", type=int, default=60)
    s.add_argument("--score-ph", help="JSON file {alpha, T} for the transformed first score")
    s.add_argument("--affine-a", type=float, default=1.0)
    s.add_argument("--affine-b", type=float, default=1000.0)

    f = sub.add_parser("fit", help="run the FPCA / PH fitting workflow")
    f.add_argument("--config", help="JSON configuration; flags override its values")
    f.add_argument("--input")
    f.add_argument("--sidecar", help="JSON {curve_id: x_max}")
    f.add_argument("--outdir")
    f.add_argument("--cutoff", type=float)
    f.add_argument("--affine-a", type=float)
    f.add_argument("--affine-b", type=float)
    f.add_argument("--phases", type=_ints, help="comma-separated phase counts to sweep")
    f.add_argument("--restarts", type=int)
    f.add_argument("--max-iter", type=int)
    f.add_argument("--seed", type=int)
    f.add_argument("--eval-t", type=_floats, help="comma-separated points in [0, 1]")
    f.add_argument("--n-boot", type=int)
    f.add_argument("--penalty-lambda", type=float)
    f.add_argument("--candidates", type=lambda s: s.split(","))

    e = sub.add_parser("eval", help="evaluate process point laws from fitted artifacts")
    e.add_argument("--klmodel", required=True)
    e.add_argument("--scorelaws", required=True)
    e.add_argument("--eval-t", type=_floats, required=True)
    e.add_argument("--outdir", default="eval")
    e.add_argument("--n-mc", type=int, default=100_000)
    e.add_argument("--seed", type=int, default=0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "synth":
            law = None
            if args.score_ph:
                ph = PhaseType.from_dict(json.loads(Path(args.score_ph).read_text()))
                law = LinearPhaseType(ph, args.affine_a, args.affine_b)
            paths = cmd_synth(args.n_curves, args.seed, args.outdir, law, args.noise_sd,
                              args.second_sd, args.n_points)
            print(json.dumps(paths))
        elif args.command == "fit":
            cfg = PipelineConfig.from_json(
                args.config,
                input=args.input, sidecar=args.sidecar, outdir=args.outdir, cutoff=args.cutoff,
                affine_a=args.affine_a, affine_b=args.affine_b, phases=args.phases,
                restarts=args.restarts, max_iter=args.max_iter, seed=args.seed, eval_t=args.eval_t,
                n_boot=args.n_boot, penalty_lambda=args.penalty_lambda, candidates=args.candidates,
            )
            res = cmd_fit(cfg)
            print(res["report"].to_text(), end="")
        else:
            cmd_eval(args.klmodel, args.scorelaws, args.eval_t, args.outdir, args.n_mc, args.seed)
    except PipelineError as exc:
        print(f"lphfda: stage '{exc.stage}' failed: {exc}", file=sys.stderr)
        return 2
    except (LphError, ValueError, OSError) as exc:
        print(f"lphfda: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
