"""Command-line front end: ``oqrw validate|analyze|exact|simulate|blocks MODEL``.

MODEL is a path to a JSON model file or the name of a bundled model
(``oqrw validate --list`` shows them). Reports go to stdout as JSON; with
``--out DIR`` they are also written there together with CSV tables and
gnuplot scripts.

Exit codes: 0 success, 1 domain failure (validation, hypotheses), 2 usage or
parse error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from oqrw.blocks import mixture_clt, verify_blocks
from oqrw.channel import spectral_diagnostics
from oqrw.clt import analyze
from oqrw.errors import BlockStructureError, NonUniqueInvariantState, OQRWError, StructuralError
from oqrw.exact import SiteDistribution, distribution_moments, evolve, memory_estimate, to_csv
from oqrw.modelio import ModelParseError, bundled_names, decode_operators, load_model, read_document
from oqrw.operators import TOL_NORM, normalization_defect
from oqrw.trajectories import DEFAULT_SEED, classify_by_drift, ensemble_stats, simulate_ensemble, zscores

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _emit(report: dict, args, filename: str) -> None:
    text = json.dumps(report, indent=1) + "\n"
    sys.stdout.write(text)
    if args.out:
        _write(args.out, filename, text)


def _write(directory, filename: str, text: str) -> Path:
    path = Path(directory) / filename
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _load(args):
    return load_model(args.model, tol=args.tol)


# validate


def cmd_validate(args) -> int:
    if args.list:
        for name in bundled_names():
            print(name)
        return EXIT_OK
    if not args.model:
        raise UsageError("validate needs a MODEL argument (or --list)")
    doc, source = read_document(args.model)
    ops = decode_operators(doc, source)
    shapes = {op.shape for op in ops}
    h = ops[0].shape[0]
    defect = normalization_defect(ops)
    residual = float(np.abs(defect).max())
    row, col = np.unravel_index(np.argmax(np.abs(defect)), defect.shape)
    print(f"model: {source}")
    print(f"kind: {doc.get('kind')}  hilbert_dim: {h}  operators: {len(ops)}  shapes: {sorted(shapes)}")
    print(f"normalization residual: {residual:.6g} at entry ({row + 1},{col + 1})")
    if residual > args.tol:
        print(f"INVALID: sum A_i^* A_i differs from I by {residual:.6g} > tol {args.tol:g}")
        return EXIT_DOMAIN
    mf = _load(args)
    diag = spectral_diagnostics(mf.model)
    print(f"lattice_dim: {mf.model.dim}")
    print(f"fixed_space_dim: {diag.fixed_space_dim}  spectral_radius: {diag.spectral_radius:.12g}")
    print(f"peripheral eigenvalues: {len(diag.peripheral)}" + ("  (cycle present)" if diag.has_peripheral_cycle else ""))
    if mf.blocks is not None:
        try:
            dec = verify_blocks(mf.model, mf.blocks)
            print(f"blocks: {len(dec)} with dims {dec.block_dims}")
        except BlockStructureError as exc:
            print(f"INVALID blocks: {exc} (residual {exc.residual:.3e})")
            return EXIT_DOMAIN
    print("VALID")
    return EXIT_OK


# analyze


def cmd_analyze(args) -> int:
    mf = _load(args)
    try:
        report = analyze(mf.model)
    except NonUniqueInvariantState as exc:
        print(
            f"error: {exc}; fixed_space_dim = {exc.fixed_space_dim}. "
            "If the operators are block diagonal, supply projectors and use `oqrw blocks`.",
            file=sys.stderr,
        )
        return EXIT_DOMAIN
    out = {"model": mf.name, "kind": mf.kind}
    out.update(report.to_dict())
    _emit(out, args, "analysis.json")
    return EXIT_OK


# exact


def _gnuplot(csv_name: str, title: str, xcol: int, ycol: int, style: str = "impulses") -> str:
    return (
        "set datafile separator ','\n"
        f"set title '{title}'\n"
        "set key off\n"
        f"plot '{csv_name}' every ::1 using {xcol}:{ycol} with {style}\n"
    )


def cmd_exact(args) -> int:
    mf = _load(args)
    if mf.kind != "walk":
        raise UsageError("exact evolution needs a walk model")
    n = args.steps
    if n < 0:
        raise UsageError("--steps must be >= 0")
    need = memory_estimate(n, mf.model.lattice_dim, mf.hilbert_dim)
    if need > args.budget * 2**20:
        warnings.warn(f"exact evolution may need up to {need / 2**20:.1f} MiB (budget {args.budget} MiB)", stacklevel=1)
    t0 = time.perf_counter()
    dist = evolve(SiteDistribution.point_mass(mf.initial_state, mf.initial_site), mf.model, n, args.prune)
    elapsed = time.perf_counter() - t0
    mean, cov = distribution_moments(dist)
    probs = np.trace(dist.blocks, axis1=1, axis2=2).real
    report = {
        "model": mf.name,
        "n_steps": n,
        "prune": args.prune,
        "sites": len(dist),
        "total_probability": dist.total_trace(),
        "mean": mean.tolist(),
        "covariance": cov.tolist(),
        "covariance_per_step": (cov / n).tolist() if n else None,
        "probabilities": [
            {"site": [int(v) for v in s], "p": float(p)} for s, p in zip(dist.sites, probs)
        ],
    }
    print(f"exact evolution: {n} steps, {len(dist)} sites, {elapsed:.3f} s", file=sys.stderr)
    _emit(report, args, "exact.json")
    if args.out:
        _write(args.out, "exact.csv", to_csv(dist))
        if mf.model.lattice_dim == 1:
            _write(args.out, "exact.gp", _gnuplot("exact.csv", f"{mf.name}: n = {n}", 1, 2))
        else:
            _write(args.out, "exact.gp", "set datafile separator ','\nsplot 'exact.csv' every ::1 using 1:2:3 with points\n")
    return EXIT_OK


# simulate


def _trajectory_csv(ens) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    d, J = ens.final_sites.shape[1], ens.counts.shape[1]
    w.writerow([f"x{i + 1}" for i in range(d)] + [f"n{j + 1}" for j in range(J)])
    for site, cnt in zip(ens.final_sites, ens.counts):
        w.writerow([int(v) for v in site] + [int(c) for c in cnt])
    return buf.getvalue()


def _histogram_csv(stats) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["axis", "displacement", "count"])
    for k, (vals, cnts) in enumerate(stats.histograms):
        for v, c in zip(vals, cnts):
            w.writerow([k + 1, int(v), int(c)])
    return buf.getvalue()


def _check_counts(args):
    if args.steps < 1:
        raise UsageError("--steps must be >= 1")
    if args.traj < 2:
        raise UsageError("--traj must be >= 2")
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")


def cmd_simulate(args) -> int:
    _check_counts(args)
    mf = _load(args)
    analytic = None
    try:
        analytic = analyze(mf.model)
    except OQRWError as exc:
        print(f"note: no analytic comparison ({exc})", file=sys.stderr)
    t0 = time.perf_counter()
    ens = simulate_ensemble(mf.model, mf.initial_state, mf.initial_site, args.steps, args.traj, args.seed, args.workers)
    elapsed = time.perf_counter() - t0
    stats = ensemble_stats(ens, None if analytic is None else analytic.m)
    # Worker count and timing stay out of the report so it is byte-identical across runs.
    report = {
        "model": mf.name,
        "n_steps": args.steps,
        "n_traj": args.traj,
        "seed": args.seed,
        "empirical": stats.to_dict(),
    }
    if analytic is not None:
        report["analytic"] = {"m": analytic.m.tolist(), "C": analytic.C.tolist()}
        report["zscores"] = zscores(stats, analytic.m, analytic.C)
    print(f"simulated {args.traj} trajectories x {args.steps} steps in {elapsed:.2f} s", file=sys.stderr)
    _emit(report, args, "simulate.json")
    if args.out:
        _write(args.out, "trajectories.csv", _trajectory_csv(ens))
        _write(args.out, "histogram.csv", _histogram_csv(stats))
        _write(args.out, "histogram.gp", _gnuplot("histogram.csv", f"{mf.name}: X_n - X_0, n = {args.steps}", 2, 3))
    return EXIT_OK


# blocks


def cmd_blocks(args) -> int:
    _check_counts(args)
    mf = _load(args)
    if mf.kind != "walk":
        raise UsageError("block analysis is available for walk models only")
    projectors = mf.blocks if mf.blocks is not None else [np.eye(mf.hilbert_dim)]
    try:
        dec = verify_blocks(mf.model, projectors)
    except BlockStructureError as exc:
        print(f"error: {exc}; residual {exc.residual:.3e}", file=sys.stderr)
        return EXIT_DOMAIN
    mix = mixture_clt(mf.model, dec, mf.initial_state)
    report = {"model": mf.name}
    report.update(mix.to_dict())
    ens = simulate_ensemble(mf.model, mf.initial_state, mf.initial_site, args.steps, args.traj, args.seed, args.workers)
    report["n_steps"], report["n_traj"], report["seed"] = args.steps, args.traj, args.seed
    if mix.distinct:
        cls = classify_by_drift(ens.counts, mix.frequencies)
        se = cls.standard_errors
        diff = cls.fractions - mix.weights
        z = [float(d / s) if s > 0 else (0.0 if d == 0 else None) for d, s in zip(diff, se)]
        report["classification"] = dict(cls.to_dict(), expected=mix.weights.tolist(), zscores=z)
        if args.out:
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["trajectory", "block"] + [f"x{i + 1}" for i in range(ens.final_sites.shape[1])])
            for i, (lab, site) in enumerate(zip(cls.labels, ens.final_sites)):
                w.writerow([i, int(lab) + 1] + [int(v) for v in site])
            _write(args.out, "classification.csv", buf.getvalue())
    else:
        report["classification"] = None
    _emit(report, args, "blocks.json")
    return EXIT_OK


# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oqrw", description="Open quantum random walks: CLT analysis and simulation.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, model_required=True):
        sp.add_argument("model", nargs=None if model_required else "?", help="model file or bundled model name")
        sp.add_argument("--tol", type=float, default=TOL_NORM, help="Kraus normalization tolerance (default 1e-10)")
        sp.add_argument("--out", help="directory for JSON, CSV and gnuplot files")

    def sampling(sp, steps, traj):
        sp.add_argument("--steps", type=int, default=steps)
        sp.add_argument("--traj", type=int, default=traj)
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
        sp.add_argument("--workers", type=int, default=1)

    sp = sub.add_parser("validate", help="check normalization and spectral structure")
    common(sp, model_required=False)
    sp.add_argument("--list", action="store_true", help="list bundled models")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("analyze", help="invariant state, drift, Poisson solutions, covariance")
    common(sp)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("exact", help="exact site distribution after n steps")
    common(sp)
    sp.add_argument("--steps", type=int, default=4)
    sp.add_argument("--prune", type=float, default=0.0, help="drop sites with probability below this")
    sp.add_argument("--budget", type=float, default=1024.0, help="memory budget in MiB before warning")
    sp.set_defaults(func=cmd_exact)

    sp = sub.add_parser("simulate", help="Monte Carlo quantum trajectories with analytic comparison")
    common(sp)
    sampling(sp, 2000, 1000)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("blocks", help="block-diagonal mixture analysis and trajectory classification")
    common(sp)
    sampling(sp, 1000, 1000)
    sp.set_defaults(func=cmd_blocks)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    warnings.simplefilter("default")
    try:
        return args.func(args)
    except (ModelParseError, UsageError, StructuralError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OQRWError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
