"""Command-line front end.

Subcommands: simulate, estimate, two-step (alias of estimate
--method two-step), evaluate, report, bench. Exit codes: 0 success,
2 usage error (argparse), 1 runtime error.
"""

from __future__ import annotations

import argparse
import sys
import time
import tracemalloc
from pathlib import Path

import numpy as np

from . import __version__
from .fileio import read_lead_field, write_delimited
from .kron import KronOperator, LeadField
from .pipeline import (
    estimate_study,
    evaluate_study,
    load_manifest,
    simulate_study,
)
from .report import write_report
from .simulate import SimulationSpec


def _add_common(parser):
    parser.add_argument("--out-dir", default="study", help="study directory (default: study)")
    parser.add_argument("--seed", type=int, default=0, help="root seed (default: 0)")
    parser.add_argument("--jobs", type=int, default=1, help="parallel repetition workers")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crosspec",
        description="Sparse cross-power spectrum estimation and its synthetic benchmark study",
    )
    parser.add_argument("--version", action="version", version=f"crosspec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate lead fields, ground truth, observations")
    _add_common(sim)
    sim.add_argument("--config", type=int, choices=(1, 2), default=1, help="coupling configuration")
    sim.add_argument("--m", type=int, default=30, help="sensor count")
    sim.add_argument("--n-fine", type=int, default=400, help="fine source count")
    sim.add_argument("--coarsen-factor", type=int, default=4, help="fine-to-coarse decimation")
    sim.add_argument("--snr-db", type=float, default=5.0)
    sim.add_argument("--samples", type=int, default=10_000, help="record length T")
    sim.add_argument("--fs", type=float, default=256.0, help="sampling rate, Hz")
    sim.add_argument("--reps", type=int, default=20)

    est = sub.add_parser("estimate", help="run an estimator over all repetitions")
    _add_est_flags(est)
    est.add_argument(
        "--method", choices=("one-step", "two-step"), default="one-step"
    )

    two = sub.add_parser("two-step", help="alias of: estimate --method two-step")
    _add_est_flags(two)

    ev = sub.add_parser("evaluate", help="score estimates against ground truth")
    _add_common(ev)
    ev.add_argument("--fraction", type=float, default=0.5, help="supra-threshold fraction")

    rep = sub.add_parser("report", help="aggregate evaluation rows into tables and figures")
    _add_common(rep)
    rep.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    bench = sub.add_parser("bench", help="time matrix-free vs dense Kronecker products")
    _add_common(bench)
    bench.add_argument(
        "--sizes",
        default="4x4,8x32,20x200",
        help="comma-separated m x n pairs, e.g. 4x4,20x200",
    )
    bench.add_argument("--repeats", type=int, default=5, help="timing repetitions per size")
    return parser


def _add_est_flags(parser):
    _add_common(parser)
    parser.add_argument(
        "--lambda-scale",
        type=float,
        action="append",
        default=None,
        help="repeatable; κ fraction of λ* (one-step) or ξ multiplier (two-step)",
    )
    parser.add_argument("--max-iter", type=int, default=5000)
    parser.add_argument("--tol", type=float, default=1e-5)
    parser.add_argument("--band", type=float, nargs=2, default=None, metavar=("LO", "HI"))
    parser.add_argument(
        "--channel-pair", type=int, nargs=2, default=(0, 1), metavar=("I", "J"),
        help="sensor pair whose spectrum peak selects the frequency bin (0-based)",
    )
    parser.add_argument("--leadfield", default=None, help="override the inverse lead field file")


def cmd_simulate(args) -> int:
    spec = SimulationSpec(
        configuration=args.config,
        n_sources_total=args.n_fine,
        m_sensors=args.m,
        coarsen_factor=args.coarsen_factor,
        snr_db=args.snr_db,
        duration_samples=args.samples,
        sampling_rate=args.fs,
        seed=args.seed,
        repetitions=args.reps,
    )
    simulate_study(spec, args.out_dir, jobs=args.jobs)
    coarse_n = read_lead_field(Path(args.out_dir) / "leadfield_coarse.txt").n
    print(f"simulated {spec.repetitions} repetitions into {args.out_dir}")
    print(f"  configuration {spec.configuration}, m={spec.m_sensors}, "
          f"n_fine={spec.n_sources_total}, coarse n={coarse_n}")
    return 0


def cmd_estimate(args, method=None) -> int:
    method = method or args.method
    manifest = estimate_study(
        args.out_dir,
        method=method,
        scale_factors=args.lambda_scale,
        max_iterations=args.max_iter,
        tolerance=args.tol,
        band=tuple(args.band) if args.band else None,
        channel_pair=tuple(args.channel_pair),
        leadfield_file=args.leadfield,
        jobs=args.jobs,
    )
    key = method.replace("-", "_")
    count = len(manifest.files["estimates"][key])
    print(f"wrote {count} {method} estimate files under {args.out_dir}/estimates/{key}")
    return 0


def cmd_evaluate(args) -> int:
    manifest = evaluate_study(args.out_dir, fraction=args.fraction)
    print(f"wrote {manifest.files['evaluation']} in {args.out_dir}")
    return 0


def cmd_report(args) -> int:
    manifest = load_manifest(args.out_dir)
    outputs = write_report(
        args.out_dir, manifest.spec.configuration, figures=not args.no_figures
    )
    for name, path in sorted(outputs.items()):
        print(f"{name}: {path}")
    return 0


def cmd_bench(args) -> int:
    sizes = []
    for token in args.sizes.split(","):
        token = token.strip()
        if not token:
            continue
        m_str, n_str = token.lower().split("x")
        sizes.append((int(m_str), int(n_str)))
    rng = np.random.default_rng(args.seed)
    rows = []
    for m, n in sizes:
        lead = LeadField(rng.standard_normal((m, n)))
        op = KronOperator(lead)
        ws = op.workspace()
        x = rng.standard_normal(n * n)

        t_mf = min(_time_once(lambda: op.apply(x, ws)) for _ in range(args.repeats))

        def dense_once():
            dense = np.kron(lead.entries, lead.entries)
            return dense @ x

        t_dense = min(_time_once(dense_once) for _ in range(args.repeats))
        rel_err = _relative_error(op.apply(x), dense_once())

        tracemalloc.start()
        op.apply(x, ws)
        _, peak = tracemalloc.get_traced_memory()
        tracemalloc.stop()
        dense_bytes = 8 * (m * m) * (n * n)
        if peak >= dense_bytes:
            raise RuntimeError(
                f"matrix-free apply allocated {peak} bytes, at least the dense {dense_bytes}"
            )
        rows.append(
            [m, n, t_mf * 1e3, t_dense * 1e3, t_dense / t_mf, rel_err, peak, dense_bytes]
        )
    header = ["m", "n", "t_matrixfree_ms", "t_dense_ms", "speedup", "max_rel_diff",
              "peak_matrixfree_bytes", "dense_matrix_bytes"]
    out_path = Path(args.out_dir) / "bench.tsv"
    write_delimited(out_path, header, rows)
    print("\t".join(header))
    for row in rows:
        print("\t".join(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row))
    print(f"written to {out_path} (peak-memory check: matrix-free stays under the dense size)")
    return 0


def _time_once(fn) -> float:
    start = time.perf_counter()
    fn()
    return time.perf_counter() - start


def _relative_error(a, b) -> float:
    scale = np.max(np.abs(b))
    if scale == 0.0:
        return float(np.max(np.abs(a - b)))
    return float(np.max(np.abs(a - b)) / scale)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "simulate": cmd_simulate,
        "estimate": cmd_estimate,
        "two-step": lambda a: cmd_estimate(a, method="two-step"),
        "evaluate": cmd_evaluate,
        "report": cmd_report,
        "bench": cmd_bench,
    }
    try:
        return handlers[args.command](args)
    except Exception as exc:  # runtime errors exit 1; argparse owns usage errors (2)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
