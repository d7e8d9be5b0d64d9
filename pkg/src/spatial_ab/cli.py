"""Command line interface: layout, assign, simulate, estimate, mc."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from spatial_ab import __version__
from spatial_ab.design import (
    SPATIAL_LEVELS,
    TEMPORAL_POLICIES,
    AssignmentTensor,
    assign,
    cluster_design,
    global_design,
    individual_design,
)
from spatial_ab.dgp import PanelData, make_noise, simulate
from spatial_ab.dr import dr_crossfit
from spatial_ab.drl import drl_estimate
from spatial_ab.harness import (
    _COEFF_SALT,
    _NOISE_SALT,
    DGP_KINDS,
    NOISE_KINDS,
    ConfigError,
    _make_spec,
    default_noise,
    load_config,
    run_mc,
)
from spatial_ab.inference import DegenerateVarianceError, wald
from spatial_ab.lattice import (
    ClusterPartition,
    LayoutError,
    build_clusters,
    build_layout,
    diagnostics,
)
from spatial_ab.ols import tau_ols, tau_ols_dynamic
from spatial_ab.report import emit_reports
from spatial_ab.rng import derive_seed

_SHORT_TILING = {"triangular": "tri", "square": "sq", "hexagonal": "hex"}


# ---------------------------------------------------------------------------
# file formats


def write_layout_file(layout, partition, path) -> Path:
    lines = [f"{layout.R} {partition.m} {_SHORT_TILING[layout.tiling]}"]
    for i in range(layout.R):
        x, y = (float(v) for v in layout.coords[i])
        nb = " ".join(str(int(j)) for j in layout.neighbors[i])
        lines.append(
            f"{i} {x!r} {y!r} {int(partition.assignment[i])} "
            f"{int(layout.n_neighbors[i])} {nb}")
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_layout_file(path):
    text = Path(path).read_text(encoding="utf-8").strip().splitlines()
    try:
        R, m, tiling = text[0].split()
        R, m = int(R), int(m)
    except (IndexError, ValueError):
        raise LayoutError(f"malformed layout header in {path}") from None
    layout = build_layout(tiling, R)
    if len(text) != R + 1:
        raise LayoutError(f"layout file {path} must list all {R} units")
    assignment = np.zeros(R, dtype=np.int64)
    for line in text[1:]:
        parts = line.split()
        i = int(parts[0])
        assignment[i] = int(parts[3])
        nb = np.array([int(t) for t in parts[5:]], dtype=np.int64)
        if not np.array_equal(nb, layout.neighbors[i]):
            raise LayoutError(
                f"layout file {path} disagrees with the {tiling} tiling "
                f"at unit {i}")
    sizes = np.bincount(assignment, minlength=m)
    if m < 1 or R % m or not np.all(sizes == R // m):
        raise LayoutError(f"layout file {path} has uneven clusters")
    return layout, ClusterPartition(layout=layout, m=m,
                                    cluster_size=R // m,
                                    assignment=assignment)


def write_assignment_csv(tensor, path) -> Path:
    N, R, M = tensor.A.shape
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("day", "unit", "interval", "A", "Abar"))
        for i in range(N):
            for u in range(R):
                for t in range(M):
                    writer.writerow((i, u, t, int(tensor.A[i, u, t]),
                                     repr(float(tensor.Abar[i, u, t]))))
    return path


def read_assignment_csv(path, layout) -> AssignmentTensor:
    days, units, intervals, rows = _read_indexed_csv(
        path, ("A", "Abar"), layout)
    A = np.zeros((days, units, intervals))
    Abar = np.zeros((days, units, intervals))
    for (i, u, t), values in rows:
        A[i, u, t] = values[0]
        Abar[i, u, t] = values[1]
    # the originating design is not recorded in the file
    return AssignmentTensor(A=A, Abar=Abar, design=global_design(), seed=-1)


def write_panel_csv(panel, path) -> Path:
    N, R, M, d = panel.O.shape
    o_cols = ("O",) if d == 1 else tuple(f"O_{k + 1}" for k in range(d))
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("day", "unit", "interval") + o_cols
                        + ("A", "Abar", "Y"))
        for i in range(N):
            for u in range(R):
                for t in range(M):
                    writer.writerow(
                        (i, u, t)
                        + tuple(repr(float(v)) for v in panel.O[i, u, t])
                        + (int(panel.A[i, u, t]),
                           repr(float(panel.Abar[i, u, t])),
                           repr(float(panel.Y[i, u, t]))))
    return path


def read_panel_csv(path, layout) -> PanelData:
    with open(path, encoding="utf-8", newline="") as fh:
        header = next(csv.reader(fh))
    o_cols = tuple(h for h in header if h == "O" or h.startswith("O_"))
    if not o_cols:
        raise ValueError(f"panel file {path} has no covariate columns")
    days, units, intervals, rows = _read_indexed_csv(
        path, o_cols + ("A", "Abar", "Y"), layout)
    d = len(o_cols)
    O = np.zeros((days, units, intervals, d))
    A = np.zeros((days, units, intervals))
    Abar = np.zeros((days, units, intervals))
    Y = np.zeros((days, units, intervals))
    for (i, u, t), values in rows:
        O[i, u, t] = values[:d]
        A[i, u, t] = values[d]
        Abar[i, u, t] = values[d + 1]
        Y[i, u, t] = values[d + 2]
    return PanelData(layout=layout, O=O, A=A, Abar=Abar, Y=Y)


def _read_indexed_csv(path, value_cols, layout):
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in ("day", "unit", "interval") + tuple(value_cols)
                   if c not in (reader.fieldnames or ())]
        if missing:
            raise ValueError(
                f"{path} is missing columns: {', '.join(missing)}")
        for rec in reader:
            key = (int(rec["day"]), int(rec["unit"]), int(rec["interval"]))
            rows.append((key, [float(rec[c]) for c in value_cols]))
    if not rows:
        raise ValueError(f"{path} has no data rows")
    days = 1 + max(k[0] for k, _ in rows)
    units = 1 + max(k[1] for k, _ in rows)
    intervals = 1 + max(k[2] for k, _ in rows)
    if units != layout.R:
        raise ValueError(
            f"{path} covers {units} units but the layout has {layout.R}")
    if len(rows) != days * units * intervals:
        raise ValueError(f"{path} does not cover the full grid")
    return days, units, intervals, rows


# ---------------------------------------------------------------------------
# subcommands


def _make_design(spatial, temporal, p, partition):
    if spatial == "global":
        return global_design(temporal, p)
    if spatial == "individual":
        return individual_design(temporal, p)
    return cluster_design(partition, temporal, p)


def _cmd_layout(args) -> int:
    layout = build_layout(args.tiling, args.units)
    partition = build_clusters(layout, args.cluster_size)
    path = write_layout_file(layout, partition, args.out)
    print(f"wrote {path}")
    return 0


def _cmd_assign(args) -> int:
    layout, partition = read_layout_file(args.layout)
    design = _make_design(args.design, args.temporal, args.p, partition)
    tensor = assign(layout, design, args.days, args.intervals,
                    seed=args.seed)
    path = write_assignment_csv(tensor, args.out)
    print(f"wrote {path}")
    return 0


def _cmd_simulate(args) -> int:
    layout, _ = read_layout_file(args.layout)
    tensor = read_assignment_csv(args.assignments, layout)
    N, _, M = tensor.A.shape
    if args.kind in ("param_static", "semiparam_static") and M != 1:
        raise ConfigError(f"{args.kind} requires a single-interval "
                          f"assignment file, got M={M}")
    rng = np.random.default_rng(derive_seed(args.seed, _COEFF_SALT))
    spec = _make_spec(args.kind, layout, args.s, M, args.rho, rng)
    noise = make_noise(
        args.noise or default_noise(args.kind), args.rho, layout,
        rng=np.random.default_rng(derive_seed(args.seed, _NOISE_SALT)))
    panel = simulate(spec, tensor, noise, N, seed=args.seed)
    path = write_panel_csv(panel, args.out)
    print(f"wrote {path}")
    return 0


def _cmd_estimate(args) -> int:
    layout, partition = read_layout_file(args.layout)
    panel = read_panel_csv(args.infile, layout)
    design = _make_design(args.design, args.temporal, args.p, partition)
    diag = diagnostics(layout, partition)
    if args.method == "ols":
        if panel.M == 1:
            est = tau_ols(panel, design, layout, diag)
        else:
            est = tau_ols_dynamic(panel, design, layout, diag,
                                  bootstrap_B=args.bootstrap_b,
                                  seed=args.seed)
    elif args.method == "dr":
        est = dr_crossfit(panel, design, layout, diag, K=args.folds,
                          seed=args.seed, clip_weights=args.clip_weights)
    else:
        est = drl_estimate(panel, design, layout, diag, K=args.folds,
                           seed=args.seed)
    record = {
        "tau_hat": est.tau_hat,
        "var_hat": est.var_hat,
        "method": est.method,
        "design": design.name,
        "N": est.n_days,
        "R": layout.R,
        "M": panel.M,
        "seed": args.seed,
        "delta": args.delta,
    }
    try:
        test = wald(est, delta=args.delta)
        record.update(stat=test.stat, p_value=test.p_value,
                      reject=bool(test.reject))
    except DegenerateVarianceError:
        record.update(stat=None, p_value=None,
                      reject=bool(est.tau_hat > 0))
    record.update(est.extras)
    text = json.dumps(record, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return 0


def _cmd_mc(args) -> int:
    cfg = load_config(args.config)
    out_dir = args.out or cfg.out_dir
    if out_dir is None:
        raise ConfigError("no output directory (--out or config out_dir)")
    report = run_mc(cfg, threads=args.threads)
    written = emit_reports(report, out_dir)
    for path in written:
        print(f"wrote {path}")
    if report.failed_cells:
        for R, s in report.failed_cells:
            print(f"cell R={R} s={s:g} failed its replication budget",
                  file=sys.stderr)
        return 3
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spatial-ab",
        description="Spatial A/B experiment designs: simulation, "
                    "estimation, and Monte Carlo comparison.")
    parser.add_argument("--version", action="version",
                        version=f"spatial-ab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("layout", help="build a tiling and write it to a file")
    p.add_argument("--tiling", required=True,
                   choices=("tri", "sq", "hex", "triangular", "square",
                            "hexagonal"))
    p.add_argument("--units", type=int, required=True)
    p.add_argument("--cluster-size", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_layout)

    p = sub.add_parser("assign", help="draw treatment assignments")
    p.add_argument("--layout", required=True)
    p.add_argument("--design", required=True, choices=SPATIAL_LEVELS)
    p.add_argument("--temporal", default="constant",
                   choices=TEMPORAL_POLICIES)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--days", type=int, required=True)
    p.add_argument("--intervals", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_assign)

    p = sub.add_parser("simulate", help="simulate outcomes over assignments")
    p.add_argument("--layout", required=True)
    p.add_argument("--assignments", required=True)
    p.add_argument("--kind", required=True, choices=DGP_KINDS)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--noise", choices=NOISE_KINDS)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("estimate", help="estimate the ATE from a panel file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--layout", required=True)
    p.add_argument("--method", required=True, choices=("ols", "dr", "drl"))
    p.add_argument("--design", required=True, choices=SPATIAL_LEVELS)
    p.add_argument("--temporal", default="constant",
                   choices=TEMPORAL_POLICIES)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--folds", type=int, default=2)
    p.add_argument("--clip-weights", action="store_true")
    p.add_argument("--bootstrap-b", type=int, default=200)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("mc", help="run a Monte Carlo experiment config")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=_cmd_mc)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (LayoutError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
