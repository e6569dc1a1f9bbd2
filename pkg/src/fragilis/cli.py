"""Command-line interface.

Exit codes: 0 success, 1 bound violation or numerical failure, 2 usage or
input error.
"""

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import io
from .exceptions import FragilisError, InvalidInputError, ParseError
from .fragility import STRUCTURES, heatmap, perturb
from .sim import NoiseSpec, Sweep, SystemSpec, gen_system, simulate, summarize, validate_bounds
from .sysid import sliding_estimate

log = logging.getLogger("fragilis")

DEFAULT_SIM = {
    "n": 4,
    "target_norm": 0.95,
    "family": "dense-random",
    "samples": 2000,
    "rate": 1000.0,
    "noise_kind": "process",
    "noise_scale": 1.0,
}


class UsageError(Exception):
    pass


def resolve_threads(value):
    if value is None:
        value = os.environ.get("FRAGILIS_THREADS", "1")
    try:
        threads = int(value)
    except ValueError:
        raise UsageError(f"invalid thread count {value!r}") from None
    if threads < 1:
        raise UsageError("thread count must be >= 1")
    return threads


def _load_json(path):
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}", line=exc.lineno) from None


def _windowed_input(args, config):
    rec = io.read_recording(args.input, fmt=args.input_format, rate=args.rate)
    window_len, step = config.window_samples(rec.rate)
    return rec.windowed(window_len, step)


def cmd_compute(args):
    config = io.load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    ws = _windowed_input(args, config)
    log.info("%d channels, %d samples, %d windows of %d samples",
             ws.n_channels, ws.n_samples, ws.n_windows, ws.window_len)
    reports = sliding_estimate(ws, ridge=config.ridge, threads=args.threads)
    degenerate = sum(rep.degenerate for rep in reports)
    if degenerate:
        log.warning("%d of %d windows are rank-deficient", degenerate, len(reports))
    hm = heatmap(reports, config.targets, config.structure, window_times=ws.window_times(),
                 channel_labels=ws.channel_labels, threads=args.threads)
    if args.out is None:
        sys.stdout.write(io.heatmap_json(hm, config))
    else:
        io.write_heatmap(hm, args.out, fmt=args.format, config=config)
        log.info("wrote %s", args.out)
    return 0


def cmd_sysid(args):
    config = io.load_config(args.config)
    ws = _windowed_input(args, config)
    reports = sliding_estimate(ws, ridge=config.ridge, threads=args.threads)
    times = ws.window_times()
    doc = [
        {
            "window_index": rep.window_index,
            "window_start_s": float(times[rep.window_index]),
            "A_hat": rep.A_hat.tolist(),
            "residual_fro": rep.residual_fro,
            "cond": rep.cond if np.isfinite(rep.cond) else None,
            "degenerate": rep.degenerate,
        }
        for rep in reports
    ]
    text = json.dumps(doc, indent=2) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
    return 0


def cmd_simulate(args):
    spec = dict(DEFAULT_SIM)
    if args.spec:
        user = _load_json(args.spec)
        unknown = set(user) - set(spec) - {"seed"}
        if unknown:
            raise UsageError(f"unknown simulation spec keys: {sorted(unknown)}")
        spec.update(user)
    for key in ("n", "samples", "rate", "noise_scale"):
        if getattr(args, key) is not None:
            spec[key] = getattr(args, key)
    seed = args.seed if args.seed is not None else int(spec.get("seed", 0))

    sys_spec = SystemSpec(int(spec["n"]), float(spec["target_norm"]), seed, spec["family"])
    A = gen_system(sys_spec)
    x0 = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(3,))).standard_normal(sys_spec.n)
    X = simulate(A, x0, int(spec["samples"]), NoiseSpec(spec["noise_kind"], float(spec["noise_scale"]), seed))

    if args.out is None:
        io._write_series_csv(sys.stdout, X, [f"ch{i}" for i in range(sys_spec.n)])
    else:
        io.write_series(args.out, X, float(spec["rate"]), fmt=args.format)
        log.info("wrote %s (%d x %d at %g Hz)", args.out, X.shape[0], X.shape[1], spec["rate"])
    if args.matrix_out:
        np.savetxt(args.matrix_out, A, delimiter=",", fmt="%.17g")
    return 0


def _sweep_from(args):
    kw = {}
    if args.sweep:
        doc = _load_json(args.sweep)
        fields = set(Sweep.__dataclass_fields__)
        unknown = set(doc) - fields
        if unknown:
            raise UsageError(f"unknown sweep keys: {sorted(unknown)}")
        kw.update(doc)
        for key in ("n_list", "norms", "eps_list"):
            if key in kw:
                kw[key] = tuple(kw[key])
        if "r_list" in kw:
            kw["r_list"] = tuple(io.parse_complex(r) for r in kw["r_list"])
    if args.trials is not None:
        kw["trials"] = args.trials
    if args.seed is not None:
        kw["seed"] = args.seed
    return Sweep(**kw)


def cmd_validate_bounds(args):
    sweep = _sweep_from(args)
    records = validate_bounds(sweep, threads=args.threads)
    rows = [rec.to_row() for rec in records]
    columns = []
    for row in rows:
        columns.extend(c for c in row if c not in columns)
    out = sys.stdout if args.out is None else open(args.out, "w", newline="")
    try:
        w = csv.DictWriter(out, fieldnames=columns, lineterminator="\n", restval="")
        w.writeheader()
        for row in rows:
            w.writerow({k: io.fmt_float(v) if isinstance(v, float) else v for k, v in row.items()})
    finally:
        if out is not sys.stdout:
            out.close()
    summary = summarize(records)
    log.info("validate-bounds: %s", ", ".join(f"{k}={v}" for k, v in summary.items()))
    for rec in records:
        if rec.violated:
            log.error("VIOLATION trial=%d n=%d norm=%.3g eps=%.3g r=%s: %s",
                      rec.trial, rec.n, rec.norm_A, rec.eps, rec.r, ",".join(rec.violations))
    return 1 if summary["violations"] else 0


def cmd_perturb(args):
    A = io.read_matrix(args.matrix)
    r = io.parse_complex(args.r)
    result = perturb(A, r, args.k, args.structure)
    sys.stdout.write(json.dumps(result.to_dict(), indent=2) + "\n")
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master random seed")
    common.add_argument("--threads", default=argparse.SUPPRESS,
                        help="worker threads (default: $FRAGILIS_THREADS or 1)")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help="only print errors")

    parser = argparse.ArgumentParser(prog="fragilis", description="Neural fragility of windowed multichannel series.")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--threads", default=None)
    parser.add_argument("--quiet", action="store_true", default=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def series_input(p):
        p.add_argument("input", help="series file (.csv or .bin)")
        p.add_argument("--input-format", choices=("csv", "binary"), default=None)
        p.add_argument("--rate", type=float, default=None, help="sampling rate in Hz (overrides sidecar/header)")
        p.add_argument("--config", default=None, help="RunConfig JSON")
        p.add_argument("--out", default=None)

    p = sub.add_parser("compute", parents=[common], help="fragility heatmap of a recording")
    series_input(p)
    p.add_argument("--format", choices=("csv", "json"), default=None, help="output format (default: from --out)")
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("sysid", parents=[common], help="per-window least-squares state matrices as JSON")
    series_input(p)
    p.set_defaults(func=cmd_sysid)

    p = sub.add_parser("simulate", parents=[common], help="write a synthetic recording")
    p.add_argument("--spec", default=None, help="simulation spec JSON")
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "binary"), default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--noise-scale", type=float, default=None)
    p.add_argument("--matrix-out", default=None, help="also write the generating matrix as CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate-bounds", parents=[common], help="bound-validation sweep; exit 1 on violations")
    p.add_argument("--sweep", default=None, help="sweep JSON (keys of fragilis.sim.Sweep)")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_validate_bounds)

    p = sub.add_parser("perturb", parents=[common], help="single minimum-norm perturbation as JSON")
    p.add_argument("--matrix", required=True, help="square matrix CSV")
    p.add_argument("--r", required=True, help="target 're' or 're,im' (use --r=-1,0.5 for negatives)")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--structure", choices=STRUCTURES, default="row")
    p.set_defaults(func=cmd_perturb)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s", stream=sys.stderr, force=True)
    try:
        args.threads = resolve_threads(args.threads)
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"fragilis: error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"fragilis: error: file not found: {exc.filename}", file=sys.stderr)
        return 2
    except (ParseError, InvalidInputError, OSError) as exc:
        print(f"fragilis: error: {exc}", file=sys.stderr)
        return 2
    except FragilisError as exc:
        print(f"fragilis: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
