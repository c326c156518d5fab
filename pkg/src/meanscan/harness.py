"""Monte-Carlo experiment driver: empirical size/power tables and
change-point identification curves over (delta, n, p, T) grids.

Replication seeds derive from SeedSequence([base_seed, p, T, replication]),
deliberately excluding n and delta: cells that differ only in sample size or
signal strength then share underlying noise draws (common random numbers),
which sharpens monotonicity comparisons without biasing any single cell.
Aggregation sums integer counts, so results are identical for any worker
count.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from xml.sax.saxutils import escape

import numpy as np

from .homogeneity import StatisticUndefinedError, homogeneity_test
from .segmentation import binary_segmentation, score_identification
from .simulate import SimulationScenario, simulate_panel

PACKAGE_VERSION = "0.1.0"


@dataclass(frozen=True)
class ExperimentGrid:
    """Scenario template plus the axes it is swept over."""

    n_values: tuple
    p_values: tuple
    T_values: tuple
    delta_values: tuple
    replications: int = 500
    alpha: float = 0.05
    workers: int = 1
    base_seed: int = 0
    J: int = 2
    change_fracs: tuple = (0.4,)
    innovation: str = "gaussian"
    support_exponent: float = 0.7
    mixture_probs: tuple | None = None
    min_len: int = 6
    alpha_policy: str = "fixed"
    score_tolerance: int = 0

    def __post_init__(self):
        for name in ("n_values", "p_values", "T_values", "delta_values", "change_fracs"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")
        for name in ("n_values", "p_values", "T_values", "delta_values"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be nonempty")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.mixture_probs is not None:
            object.__setattr__(self, "mixture_probs", tuple(self.mixture_probs))

    def cells(self):
        return list(
            itertools.product(self.delta_values, self.n_values, self.p_values, self.T_values)
        )

    def scenario(self, delta, n, p, T, seed) -> SimulationScenario:
        fracs = self.change_fracs
        if np.isscalar(delta) and float(delta) == 0.0:
            fracs = ()
        return SimulationScenario(
            n=n,
            p=p,
            T=T,
            J=self.J,
            delta=delta,
            change_fracs=fracs,
            support_exponent=self.support_exponent,
            innovation=self.innovation,
            mixture_probs=self.mixture_probs,
            seed=seed,
        )


def replication_seed(base_seed: int, p: int, T: int, rep: int) -> int:
    """Deterministic per-replication seed, shared across n and delta axes."""
    ss = np.random.SeedSequence([int(base_seed), int(p), int(T), int(rep)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class SizePowerRow:
    delta: object
    n: int
    p: int
    T: int
    reps: int
    reject_rate: float
    mc_stderr: float
    failures: int = 0


@dataclass
class SizePowerTable:
    rows: list
    alpha: float
    variance_mode: str
    base_seed: int

    def rate(self, delta, n, p, T) -> float:
        for row in self.rows:
            if (row.delta, row.n, row.p, row.T) == (delta, n, p, T):
                return row.reject_rate
        raise KeyError(f"no cell ({delta}, {n}, {p}, {T})")


@dataclass(frozen=True)
class IdentificationRow:
    delta: object
    n: int
    p: int
    T: int
    reps: int
    mean_fp_plus_fn: float
    mean_tp: float
    failures: int = 0


@dataclass
class IdentificationCurves:
    rows: list
    alpha: float
    variance_mode: str
    base_seed: int

    def cell(self, delta, n, p, T) -> IdentificationRow:
        for row in self.rows:
            if (row.delta, row.n, row.p, row.T) == (delta, n, p, T):
                return row
        raise KeyError(f"no cell ({delta}, {n}, {p}, {T})")


def _mc_stderr(rate: float, reps: int) -> float:
    return math.sqrt(rate * (1.0 - rate) / reps)


# ---------------------------------------------------------------------------
# worker bodies (module level so process pools can pickle them)


def _test_rep(args):
    scenario, variance_mode, alpha, min_len = args
    panel = simulate_panel(scenario)
    try:
        report = homogeneity_test(
            panel, variance_mode=variance_mode, alpha=alpha, min_len=min_len
        )
        return 1 if report.reject else 0
    except StatisticUndefinedError:
        return -1


def _identify_rep(args):
    scenario, variance_mode, alpha, min_len, alpha_policy, truth, tolerance = args
    panel = simulate_panel(scenario)
    result = binary_segmentation(
        panel,
        alpha=alpha,
        variance_mode=variance_mode,
        min_len=min_len,
        alpha_policy=alpha_policy,
    )
    metrics = score_identification(result.change_points, truth, tolerance)
    return metrics.fp + metrics.fn, metrics.tp


def _run_tasks(fn, payloads, workers: int):
    if workers <= 1:
        return [fn(p) for p in payloads]
    chunk = max(1, len(payloads) // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, payloads, chunksize=chunk))


# ---------------------------------------------------------------------------
# drivers


def run_size_power(grid: ExperimentGrid, variance_mode: str = "ustat") -> SizePowerTable:
    """Empirical rejection rate of the homogeneity test for every grid cell."""
    rows = []
    for delta, n, p, T in grid.cells():
        payloads = [
            (
                grid.scenario(delta, n, p, T, replication_seed(grid.base_seed, p, T, rep)),
                variance_mode,
                grid.alpha,
                grid.min_len,
            )
            for rep in range(grid.replications)
        ]
        outcomes = _run_tasks(_test_rep, payloads, grid.workers)
        failures = sum(1 for o in outcomes if o < 0)
        rejects = sum(1 for o in outcomes if o == 1)
        rate = rejects / grid.replications
        rows.append(
            SizePowerRow(
                delta=delta,
                n=n,
                p=p,
                T=T,
                reps=grid.replications,
                reject_rate=rate,
                mc_stderr=_mc_stderr(rate, grid.replications),
                failures=failures,
            )
        )
    return SizePowerTable(
        rows=rows, alpha=grid.alpha, variance_mode=variance_mode, base_seed=grid.base_seed
    )


def run_mixture_power(grid: ExperimentGrid, variance_mode: str = "pairwise") -> SizePowerTable:
    """Size/power sweep under the three-group mixture generator."""
    if grid.mixture_probs is None:
        raise ValueError("mixture grid requires mixture_probs")
    return run_size_power(grid, variance_mode=variance_mode)


def run_identification(grid: ExperimentGrid, variance_mode: str = "ustat") -> IdentificationCurves:
    """Mean FP+FN and TP of binary segmentation for every grid cell."""
    rows = []
    for delta, n, p, T in grid.cells():
        truth = tuple(int(f * T) for f in grid.change_fracs)
        if not truth:
            raise ValueError("identification grids need at least one change fraction")
        payloads = [
            (
                grid.scenario(delta, n, p, T, replication_seed(grid.base_seed, p, T, rep)),
                variance_mode,
                grid.alpha,
                grid.min_len,
                grid.alpha_policy,
                truth,
                grid.score_tolerance,
            )
            for rep in range(grid.replications)
        ]
        outcomes = _run_tasks(_identify_rep, payloads, grid.workers)
        fpfn = sum(o[0] for o in outcomes)
        tp = sum(o[1] for o in outcomes)
        rows.append(
            IdentificationRow(
                delta=delta,
                n=n,
                p=p,
                T=T,
                reps=grid.replications,
                mean_fp_plus_fn=fpfn / grid.replications,
                mean_tp=tp / grid.replications,
            )
        )
    return IdentificationCurves(
        rows=rows, alpha=grid.alpha, variance_mode=variance_mode, base_seed=grid.base_seed
    )


# ---------------------------------------------------------------------------
# reporting


def format_delta(delta) -> str:
    if np.isscalar(delta):
        return repr(float(delta))
    return ";".join(repr(float(d)) for d in delta)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


def _svg_line_plot(series, title, xlabel, ylabel, width=640, height=420):
    """Self-contained SVG with one polyline per labelled (xs, ys) series."""
    margin = 60
    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [y for _, _, ys in series for y in ys]
    if not xs_all:
        xs_all, ys_all = [0.0, 1.0], [0.0, 1.0]
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all + [0.0]), max(ys_all + [1e-12])
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    def sx(x):
        return margin + (x - x_lo) / (x_hi - x_lo) * (width - 2 * margin)

    def sy(y):
        return height - margin - (y - y_lo) / (y_hi - y_lo) * (height - 2 * margin)

    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
        f'<text x="{width / 2}" y="{height - 15}" text-anchor="middle" font-size="12">'
        f"{escape(xlabel)}</text>",
        f'<text x="18" y="{height / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 18 {height / 2})">{escape(ylabel)}</text>',
    ]
    for k in range(5):
        yv = y_lo + k * (y_hi - y_lo) / 4
        xv = x_lo + k * (x_hi - x_lo) / 4
        parts.append(
            f'<text x="{margin - 6}" y="{sy(yv) + 4}" text-anchor="end" font-size="10">'
            f"{yv:.3g}</text>"
        )
        parts.append(
            f'<text x="{sx(xv)}" y="{height - margin + 14}" text-anchor="middle" '
            f'font-size="10">{xv:.3g}</text>'
        )
    for idx, (label, xs, ys) in enumerate(series):
        color = palette[idx % len(palette)]
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(
            f'<text x="{width - margin + 4}" y="{margin + 14 * idx}" font-size="10" '
            f'fill="{color}">{escape(str(label))}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)


def emit_report(results, out_dir, grid: ExperimentGrid | None = None) -> list:
    """Write CSV tables, a manifest, and SVG plots for one or more result sets.

    Returns the list of file paths written.  The manifest records the grid and
    base seed needed to rerun the experiment exactly.
    """
    os.makedirs(out_dir, exist_ok=True)
    if not isinstance(results, (list, tuple)):
        results = [results]
    written = []
    manifest = {
        "package": {"name": "meanscan", "version": PACKAGE_VERSION},
        "versions": {"numpy": np.__version__},
        "outputs": [],
    }
    if grid is not None:
        g = asdict(grid)
        g["delta_values"] = [format_delta(d) for d in grid.delta_values]
        manifest["grid"] = g
        manifest["base_seed"] = grid.base_seed

    for res in results:
        if isinstance(res, SizePowerTable):
            path = os.path.join(out_dir, "size_power.csv")
            _write_csv(
                path,
                ["delta", "n", "p", "T", "reps", "reject_rate", "mc_stderr"],
                [
                    (
                        format_delta(r.delta),
                        r.n,
                        r.p,
                        r.T,
                        r.reps,
                        repr(r.reject_rate),
                        repr(r.mc_stderr),
                    )
                    for r in res.rows
                ],
            )
            written.append(path)
            series = _series_over_n(res.rows, "reject_rate")
            svg = _svg_line_plot(series, "Empirical rejection rate", "n", "rejection rate")
            spath = os.path.join(out_dir, "size_power.svg")
            with open(spath, "w") as fh:
                fh.write(svg)
            written.append(spath)
            manifest["outputs"].append(
                {"kind": "size_power", "csv": os.path.basename(path), "alpha": res.alpha,
                 "variance_mode": res.variance_mode, "base_seed": res.base_seed}
            )
        elif isinstance(res, IdentificationCurves):
            path = os.path.join(out_dir, "identification.csv")
            _write_csv(
                path,
                ["delta", "n", "p", "T", "reps", "mean_fp_plus_fn", "mean_tp"],
                [
                    (
                        format_delta(r.delta),
                        r.n,
                        r.p,
                        r.T,
                        r.reps,
                        repr(r.mean_fp_plus_fn),
                        repr(r.mean_tp),
                    )
                    for r in res.rows
                ],
            )
            written.append(path)
            series = _series_over_n(res.rows, "mean_fp_plus_fn")
            svg = _svg_line_plot(series, "Mean FP+FN of identification", "n", "mean FP+FN")
            spath = os.path.join(out_dir, "identification.svg")
            with open(spath, "w") as fh:
                fh.write(svg)
            written.append(spath)
            manifest["outputs"].append(
                {"kind": "identification", "csv": os.path.basename(path), "alpha": res.alpha,
                 "variance_mode": res.variance_mode, "base_seed": res.base_seed}
            )
        else:
            raise TypeError(f"cannot emit report for {type(res).__name__}")

    mpath = os.path.join(out_dir, "manifest.json")
    with open(mpath, "w") as fh:
        json.dump(manifest, fh, indent=2)
    written.append(mpath)
    return written


def _series_over_n(rows, attr):
    """Group rows into (delta, p, T) series over the n axis."""
    groups = {}
    for r in rows:
        key = (format_delta(r.delta), r.p, r.T)
        groups.setdefault(key, []).append((r.n, getattr(r, attr)))
    series = []
    for (dlt, p, T), pts in sorted(groups.items()):
        pts.sort()
        label = f"d={dlt} p={p} T={T}"
        series.append((label, [x for x, _ in pts], [y for _, y in pts]))
    return series
