"""Report emission: CSV tables and self-contained SVG power curves."""

from __future__ import annotations

import csv
from pathlib import Path

from spatial_ab.harness import MonteCarloReport

CSV_COLUMNS = ("R", "r", "rho", "s", "M", "N", "design", "temporal",
               "method", "bias", "var", "mse", "reject_rate", "r1", "r2",
               "reps", "seed")

_PALETTE = {"global": "#1b6ca8", "individual": "#d1495b",
            "cluster": "#3e8e5a"}

# rejection band highlighted on every power plot
_BAND = (0.03, 0.08)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def _comment(report) -> str:
    return f"# spatial-ab {report.version} seed={report.seed}"


def write_report_csv(report: MonteCarloReport, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_comment(report) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in report.rows:
            writer.writerow([
                _fmt(row.R), _fmt(row.r), _fmt(row.rho), _fmt(row.s),
                _fmt(row.M), _fmt(row.N), row.spatial, row.temporal,
                row.method, _fmt(row.bias), _fmt(row.var), _fmt(row.mse),
                _fmt(row.reject_rate), _fmt(row.r1), _fmt(row.r2),
                _fmt(row.reps), _fmt(report.seed),
            ])
    return path


def write_reps_csv(report: MonteCarloReport, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_comment(report) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("R", "s", "design", "temporal", "p", "method",
                         "rep", "seed", "tau_hat", "var_hat", "reject"))
        for rec in report.rep_records:
            writer.writerow([
                _fmt(rec.R), _fmt(rec.s), rec.spatial, rec.temporal,
                _fmt(rec.p), rec.method, _fmt(rec.rep), _fmt(rec.seed),
                _fmt(rec.tau_hat), _fmt(rec.var_hat), _fmt(rec.reject),
            ])
    return path


def write_failures_csv(report: MonteCarloReport, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_comment(report) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("R", "s", "rep", "seed", "error"))
        for rec in report.failures:
            writer.writerow([_fmt(rec.R), _fmt(rec.s), _fmt(rec.rep),
                             _fmt(rec.seed), rec.error])
    return path


# ---------------------------------------------------------------------------
# SVG power curves


def _svg_header(width, height, comment):
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}" '
        f'font-family="sans-serif" font-size="12">\n'
        f"<!-- {comment} -->\n"
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
    )


def write_power_svg(path, s_values, curves, comment="", title="") -> Path:
    """Rejection-vs-s plot: one polyline per design over a shared s axis.

    curves: list of (label, [(s, rate), ...]) pairs.
    """
    width, height = 640, 420
    ml, mr, mt, mb = 62, 18, 30, 52
    pw, ph = width - ml - mr, height - mt - mb
    smin, smax = min(s_values), max(s_values)
    span = smax - smin

    def x(s):
        if span == 0:
            return ml + pw / 2
        return ml + (s - smin) / span * pw

    def y(v):
        return mt + (1.0 - v) * ph

    parts = [_svg_header(width, height, comment)]
    if title:
        parts.append(f'<text x="{ml}" y="18">{title}</text>\n')
    band_top, band_h = y(_BAND[1]), y(_BAND[0]) - y(_BAND[1])
    parts.append(
        f'<rect x="{ml}" y="{band_top:.2f}" width="{pw}" '
        f'height="{band_h:.2f}" fill="#dddddd" opacity="0.6"/>\n')
    parts.append(
        f'<line x1="{ml}" y1="{y(0):.2f}" x2="{ml + pw}" y2="{y(0):.2f}" '
        f'stroke="black"/>\n'
        f'<line x1="{ml}" y1="{y(0):.2f}" x2="{ml}" y2="{y(1):.2f}" '
        f'stroke="black"/>\n')
    for s in s_values:
        xs = x(s)
        parts.append(
            f'<line x1="{xs:.2f}" y1="{y(0):.2f}" x2="{xs:.2f}" '
            f'y2="{y(0) + 4:.2f}" stroke="black"/>\n'
            f'<text x="{xs:.2f}" y="{y(0) + 18:.2f}" '
            f'text-anchor="middle">{s:g}</text>\n')
    for tick in (0.0, 0.2, 0.4, 0.6, 0.8, 1.0):
        parts.append(
            f'<line x1="{ml - 4}" y1="{y(tick):.2f}" x2="{ml}" '
            f'y2="{y(tick):.2f}" stroke="black"/>\n'
            f'<text x="{ml - 8}" y="{y(tick) + 4:.2f}" '
            f'text-anchor="end">{tick:g}</text>\n')
    parts.append(
        f'<text x="{ml + pw / 2}" y="{height - 12}" '
        f'text-anchor="middle">signal strength s</text>\n'
        f'<text x="16" y="{mt + ph / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {mt + ph / 2})">rejection rate</text>\n')
    for k, (label, points) in enumerate(curves):
        color = _PALETTE.get(label, "#777777")
        coords = " ".join(f"{x(s):.2f},{y(v):.2f}" for s, v in points)
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="2"/>\n')
        ly = mt + 14 + 16 * k
        parts.append(
            f'<line x1="{ml + pw - 120}" y1="{ly}" x2="{ml + pw - 96}" '
            f'y2="{ly}" stroke="{color}" stroke-width="2"/>\n'
            f'<text x="{ml + pw - 90}" y="{ly + 4}">{label}</text>\n')
    parts.append("</svg>\n")
    path = Path(path)
    path.write_text("".join(parts), encoding="utf-8")
    return path


def _svg_groups(report: MonteCarloReport):
    groups = {}
    for row in report.rows:
        groups.setdefault((row.method, row.temporal, row.p), {}) \
            .setdefault(row.spatial, {})[row.s] = row.reject_rate
    return groups


def emit_reports(report: MonteCarloReport, out_dir, formats=("csv", "svg")):
    if not (report.rows or report.rep_records or report.failures):
        raise ValueError("nothing to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        written.append(write_report_csv(report, out / "report.csv"))
        written.append(write_reps_csv(report, out / "reps.csv"))
        written.append(write_failures_csv(report, out / "failures.csv"))
    if "svg" in formats:
        multi_p = len(report.config.p) > 1
        for (method, temporal, p), by_design in sorted(_svg_groups(report)
                                                       .items()):
            s_values = sorted({s for rates in by_design.values()
                               for s in rates})
            curves = []
            for label in ("global", "individual", "cluster"):
                rates = by_design.get(label)
                if rates:
                    curves.append(
                        (label, [(s, rates[s]) for s in s_values
                                 if s in rates]))
            name = f"power_{method}_{temporal}"
            if multi_p:
                name += f"_p{list(report.config.p).index(p)}"
            title = f"{method} / {temporal} (p={p:g})"
            written.append(write_power_svg(
                out / f"{name}.svg", s_values, curves,
                comment=_comment(report).lstrip("# "), title=title))
    return written
