"""Command-line harness: experiment runner and table reproduction checks.

Two subcommands:

``hypervem run``
    Solves a configured problem (uniform or adaptive refinement), writes
    ``results.csv``, ``results.json`` and a convergence plot ``plot.svg``
    into the output directory.

``hypervem repro --table ID``
    Re-runs the configuration behind one of the published convergence
    tables and diffs every numeric cell against the reference values at
    per-column tolerances.  Exit code 0 if all cells pass, 2 otherwise.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from .adaptivity import IterationRecord, drive, uniform_sequence
from .cases import make_case
from .dofmap import DegreeMap
from .fluxrec import global_flux_misfit
from .lifting import true_h1_error
from .mesh import build_mesh
from .primal import solve_primal

FAMILY = {"cartesian": "cartesian", "triangular": "structured_triangles"}


# ----------------------------------------------------------------------
# run
# ----------------------------------------------------------------------
def _write_outputs(records, config, outdir):
    os.makedirs(outdir, exist_ok=True)
    csv_path = os.path.join(outdir, "results.csv")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(IterationRecord.CSV_FIELDS)
        for r in records:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r.as_row()])

    def plain(v):
        if isinstance(v, np.integer):
            return int(v)
        if isinstance(v, np.floating):
            return float(v)
        return v

    json_path = os.path.join(outdir, "results.json")
    payload = {
        "config": config,
        "iterations": [
            {f: plain(getattr(r, f)) for f in IterationRecord.CSV_FIELDS}
            for r in records
        ],
    }
    with open(json_path, "w") as fh:
        json.dump(payload, fh, indent=2)

    svg_path = os.path.join(outdir, "plot.svg")
    _plot(records, config, svg_path)
    return csv_path, json_path, svg_path


def _plot(records, config, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    hp = config.get("mode") == "adapt-hp"
    expo = 1.0 / 3.0 if hp else 0.5
    x = np.array([r.ndof for r in records], dtype=float) ** expo
    fig, ax = plt.subplots(figsize=(5, 4))
    series = [
        ("err_primal", "o-", "error (primal)"),
        ("err_mixed_pair", "s-", "error (primal + flux)"),
        ("eta_eq", "^--", r"$\eta_{eq}$"),
        ("eta_res", "v--", r"$\eta_{res}$"),
        ("eta_flux", "d--", r"$\eta_{flux}$"),
    ]
    for field, style, label in series:
        y = np.array([getattr(r, field) for r in records], dtype=float)
        if np.all(np.isnan(y)):
            continue
        ax.semilogy(x, y, style, label=label)
    ax.set_xlabel(r"$\mathrm{ndof}^{1/3}$" if hp else r"$\mathrm{ndof}^{1/2}$")
    ax.set_ylabel("error / estimator")
    ax.set_title(f"{config.get('case')} {config.get('mode')} p={config.get('p')}")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def run_config(config, outdir):
    """Execute one experiment described by ``config`` and emit artifacts."""
    case = make_case(config["case"])
    family = FAMILY[config["mesh"]]
    mode = config["mode"]
    p = config["p"]
    iters = config["iters"]
    estimator = config["estimator"]
    stab = config["stab"]
    if mode == "uniform":
        records = uniform_sequence(
            case, family, p, range(1, iters + 1), estimator, stab,
            true_error=config.get("true_error", False),
        )
    else:
        mesh = build_mesh(case.domain, family, config.get("level", 1))
        records, _ = drive(
            case, mesh, p, mode, estimator, iters, stab,
            true_error=config.get("true_error", False),
        )
    return _write_outputs(records, config, outdir)


# ----------------------------------------------------------------------
# table reproduction
# ----------------------------------------------------------------------
def _eoc(errs):
    return [
        math.log(errs[i] / errs[i + 1]) / math.log(2.0) for i in range(len(errs) - 1)
    ]


def _uniform_table(family, p, levels=4):
    case = make_case("tc3")
    recs = uniform_sequence(
        case, family, p, range(1, levels + 1), estimator="flux", true_error=True
    )
    return {
        "err": [r.err_true for r in recs],
        "eta": [r.eta_flux for r in recs],
        "ratio": [r.eta_flux / r.err_true for r in recs],
        "osc": [r.oscillation for r in recs],
        "pou": [r.pou_quantity for r in recs],
    }


def _adaptive_table():
    case = make_case("tc3")
    mesh = build_mesh("unit_square", "structured_triangles", 1)
    recs, _ = drive(
        case, mesh, p=1, mode="adapt-h", estimator="flux", iters=8, true_error=True
    )
    return {
        "err": [r.err_true for r in recs],
        "eta": [r.eta_flux for r in recs],
        "osc": [r.oscillation for r in recs],
        "pou": [r.pou_quantity for r in recs],
    }


def _global_table(p, levels=5):
    case = make_case("tc3")
    r_col, mis_col = [], []
    for lvl in range(1, levels + 1):
        mesh = build_mesh("unit_square", "cartesian", lvl)
        psol = solve_primal(mesh, DegreeMap.uniform(mesh, p), case)
        r, mis = global_flux_misfit(case, psol)
        r_col.append(r)
        mis_col.append(mis)
    return {"r_norm": r_col, "mismatch": mis_col}


# Reference values to diff against, with per-column relative tolerances.
TABLES = {
    "p1-triangular": {
        "run": lambda: _uniform_table("structured_triangles", 1),
        "columns": {
            "err": ([0.446, 0.234, 0.120, 0.060], 0.02),
            "eta": ([0.469, 0.260, 0.137, 0.071], 0.02),
            "ratio": ([1.0515, 1.1121, 1.1422, 1.1804], 0.05),
            "osc": ([6.454e-2, 1.638e-2, 4.112e-3, 1.029e-3], 0.10),
            "pou": ([7.784e-2, 5.860e-2, 5.104e-2, 4.869e-2], 0.10),
        },
    },
    "p1-cartesian": {
        "run": lambda: _uniform_table("cartesian", 1),
        "columns": {
            "err": ([0.339, 0.169, 0.084, 0.042], 0.02),
            "eta": ([0.362, 0.186, 0.093, 0.046], 0.02),
            "ratio": ([1.068, 1.098, 1.106, 1.108], 0.05),
            "osc": ([1.035e-2, 1.638e-2, 2.600e-3, 6.507e-4], 0.10),
            "pou": ([5.723e-2, 4.703e-2, 4.407e-2, 4.329e-2], 0.10),
        },
    },
    "p2-triangular": {
        "run": lambda: _uniform_table("structured_triangles", 2),
        "columns": {
            "err": ([0.095, 0.024, 0.006, 0.001], 0.03),
            "ratio": ([1.803, 3.718, 10.649, 36.798], 0.10),
        },
    },
    "p2-cartesian": {
        "run": lambda: _uniform_table("cartesian", 2),
        "columns": {
            "err": ([0.079, 0.020, 0.005, 0.001], 0.03),
            "ratio": ([2.053, 3.461, 6.529, 12.846], 0.10),
        },
    },
    "adaptive-p1": {
        "run": _adaptive_table,
        "columns": {
            "err": (
                [0.446, 0.385, 0.234, 0.182, 0.120, 0.098, 0.059, 0.049],
                0.05,
            ),
        },
    },
    "global-p2": {
        "run": lambda: _global_table(2),
        "columns": {
            "r_norm": ([0.011, 0.002, 7.213e-4, 1.802e-4, 4.505e-5], 0.10),
            "mismatch": ([2.321e-2, 3.920e-3, 6.695e-4, 1.166e-4, 2.07587e-5], 0.10),
        },
    },
    "global-p3": {
        "run": lambda: _global_table(3),
        "columns": {
            "r_norm": ([1.766e-4, 1.081e-5, 6.726e-7, 4.201e-8, 2.626e-9], 0.10),
            "mismatch": ([4.256e-4, 2.896e-5, 1.913e-6, 1.308e-7, 9.432e-9], 0.10),
        },
    },
}


def table_repro(table_id, out=sys.stdout):
    """Run the configuration behind ``table_id`` and diff each cell.

    Returns True when every cell is within its column tolerance.
    """
    spec = TABLES[table_id]
    got = spec["run"]()
    ok = True
    print(f"table {table_id}", file=out)
    for col, (ref, tol) in spec["columns"].items():
        for i, (r, g) in enumerate(zip(ref, got[col])):
            rel = abs(g - r) / abs(r)
            status = "pass" if rel <= tol else "FAIL"
            if rel > tol:
                ok = False
            print(
                f"  {col}[{i + 1}] ref {r:<12.6g} got {g:<12.6g} "
                f"rel {rel:.3%} tol {tol:.0%} {status}",
                file=out,
            )
    print(f"table {table_id}: {'PASS' if ok else 'FAIL'}", file=out)
    return ok


# ----------------------------------------------------------------------
# argument parsing
# ----------------------------------------------------------------------
def build_parser():
    ap = argparse.ArgumentParser(prog="hypervem")
    sub = ap.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="run one experiment, emit csv/json/svg")
    runp.add_argument("--case", choices=("tc1", "tc2", "tc3", "smooth"), required=True)
    runp.add_argument("--mesh", choices=("cartesian", "triangular"), required=True)
    runp.add_argument("--p", type=int, default=1)
    runp.add_argument(
        "--mode", choices=("uniform", "adapt-h", "adapt-hp"), default="uniform"
    )
    runp.add_argument("--estimator", choices=("eq", "res", "flux"), default="eq")
    runp.add_argument("--stab", choices=("theoretical", "drecipe"), default="drecipe")
    runp.add_argument("--iters", type=int, default=4)
    runp.add_argument("--level", type=int, default=1, help="starting mesh level")
    runp.add_argument("--true-error", action="store_true",
                      help="also compute the lifted H1 error (slower)")
    runp.add_argument("--out", required=True)

    repro = sub.add_parser("repro", help="reproduce a published table")
    repro.add_argument("--table", choices=sorted(TABLES), required=True)
    return ap


def main(argv=None):
    threads = os.environ.get("HYPERVEM_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)
    args = build_parser().parse_args(argv)
    if args.command == "run":
        config = {
            "case": args.case,
            "mesh": args.mesh,
            "p": args.p,
            "mode": args.mode,
            "estimator": args.estimator,
            "stab": args.stab,
            "iters": args.iters,
            "level": args.level,
            "true_error": args.true_error,
        }
        paths = run_config(config, args.out)
        for p in paths:
            print(p)
        return 0
    if args.command == "repro":
        return 0 if table_repro(args.table) else 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
