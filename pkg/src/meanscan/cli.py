"""Command-line surface: test, segment, simulate, bench-power,
bench-identify, localize.

Configuration files are flat ``key = value`` text; list values are
comma-separated, grid axes carry a ``grid.`` prefix, and mixture delta
triples join their three entries with semicolons (e.g. ``0.5;0.7;0.8``).
Command-line flags override file values.  Exit codes: 0 success, 1 usage or
configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import sys

from .harness import (
    ExperimentGrid,
    emit_report,
    run_identification,
    run_mixture_power,
    run_size_power,
)
from .homogeneity import StatisticUndefinedError, homogeneity_test
from .localize import localization_report
from .panel import PanelFormatError, TimeInterval, load_panel, save_panel
from .segmentation import binary_segmentation
from .simulate import SimulationScenario, simulate_panel


class UsageError(Exception):
    """Bad flag or configuration value; message names the offending field."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_config(path) -> dict:
    """Flat key = value file; '#' starts a comment, blank lines ignored."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value, got {raw.strip()!r}")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def _parse_delta(token: str):
    parts = [t for t in token.split(";") if t.strip()]
    try:
        if len(parts) == 1:
            return float(parts[0])
        return tuple(float(t) for t in parts)
    except ValueError:
        raise UsageError(f"delta: cannot parse {token!r}") from None


def _get(cfg, key, cast, default=None, required=False):
    if key not in cfg or cfg[key] == "":
        if required:
            raise UsageError(f"{key}: required configuration key is missing")
        return default
    try:
        return cast(cfg[key])
    except UsageError:
        raise
    except (TypeError, ValueError):
        raise UsageError(f"{key}: cannot parse {cfg[key]!r}") from None


def _float_list(text):
    return tuple(float(t) for t in text.split(",") if t.strip())


def _int_list(text):
    return tuple(int(t) for t in text.split(",") if t.strip())


def _delta_list(text):
    return tuple(_parse_delta(t) for t in text.split(",") if t.strip())


def _check_alpha(alpha: float) -> float:
    if not (0.0 < alpha < 1.0):
        raise UsageError(f"alpha: must lie in (0, 1), got {alpha}")
    return alpha


def scenario_from_config(cfg: dict, seed_override=None) -> SimulationScenario:
    seed = seed_override if seed_override is not None else _get(cfg, "seed", int, default=0)
    try:
        return SimulationScenario(
            n=_get(cfg, "n", int, required=True),
            p=_get(cfg, "p", int, required=True),
            T=_get(cfg, "T", int, required=True),
            J=_get(cfg, "J", int, default=2),
            delta=_get(cfg, "delta", _parse_delta, default=0.0),
            change_fracs=_get(cfg, "change_fracs", _float_list, default=()),
            support_exponent=_get(cfg, "support_exponent", float, default=0.7),
            innovation=_get(cfg, "innovation", str, default="gaussian"),
            mixture_probs=_get(cfg, "mixture_probs", _float_list, default=None),
            seed=seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def grid_from_config(cfg: dict, args) -> ExperimentGrid:
    try:
        return ExperimentGrid(
            n_values=_get(cfg, "grid.n", _int_list, required=True),
            p_values=_get(cfg, "grid.p", _int_list, required=True),
            T_values=_get(cfg, "grid.T", _int_list, required=True),
            delta_values=_get(cfg, "grid.delta", _delta_list, required=True),
            replications=(
                args.replications
                if args.replications is not None
                else _get(cfg, "replications", int, default=500)
            ),
            alpha=_check_alpha(
                args.alpha if args.alpha is not None else _get(cfg, "alpha", float, default=0.05)
            ),
            workers=(
                args.workers if args.workers is not None else _get(cfg, "workers", int, default=1)
            ),
            base_seed=(
                args.seed if args.seed is not None else _get(cfg, "base_seed", int, default=0)
            ),
            J=_get(cfg, "J", int, default=2),
            change_fracs=_get(cfg, "change_fracs", _float_list, default=(0.4,)),
            innovation=_get(cfg, "innovation", str, default="gaussian"),
            support_exponent=_get(cfg, "support_exponent", float, default=0.7),
            mixture_probs=_get(cfg, "mixture_probs", _float_list, default=None),
            min_len=_get(cfg, "min_len", int, default=6),
            alpha_policy=_get(cfg, "alpha_policy", str, default="fixed"),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_input(args):
    return load_panel(args.input, format=args.format)


def _emit(text: str, out_path) -> None:
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _cmd_test(args) -> int:
    panel = _load_input(args)
    interval = None
    if args.interval:
        try:
            lo, hi = (int(t) for t in args.interval.split(","))
            interval = TimeInterval(lo, hi)
        except ValueError as exc:
            raise UsageError(f"interval: {exc}") from None
    report = homogeneity_test(
        panel,
        interval=interval,
        variance_mode=args.variance_mode,
        alpha=_check_alpha(args.alpha if args.alpha is not None else 0.05),
        min_len=args.min_len,
    )
    _emit(report.to_json(), args.out)
    return 0


def _cmd_segment(args) -> int:
    panel = _load_input(args)
    result = binary_segmentation(
        panel,
        alpha=_check_alpha(args.alpha if args.alpha is not None else 0.05),
        variance_mode=args.variance_mode,
        min_len=args.min_len,
        alpha_policy=args.alpha_policy,
    )
    _emit(result.to_json(), args.out)
    return 0


def _cmd_simulate(args) -> int:
    cfg = parse_config(args.config)
    scenario = scenario_from_config(cfg, seed_override=args.seed)
    panel = simulate_panel(scenario)
    save_panel(panel, args.out, format=args.format)
    return 0


def _cmd_bench_power(args) -> int:
    cfg = parse_config(args.config)
    grid = grid_from_config(cfg, args)
    if grid.mixture_probs is not None:
        mode = args.variance_mode or "pairwise"
        table = run_mixture_power(grid, variance_mode=mode)
    else:
        mode = args.variance_mode or "ustat"
        table = run_size_power(grid, variance_mode=mode)
    for path in emit_report(table, args.out_dir, grid=grid):
        print(path)
    return 0


def _cmd_bench_identify(args) -> int:
    cfg = parse_config(args.config)
    grid = grid_from_config(cfg, args)
    curves = run_identification(grid, variance_mode=args.variance_mode or "ustat")
    for path in emit_report(curves, args.out_dir, grid=grid):
        print(path)
    return 0


def _cmd_localize(args) -> int:
    panel = _load_input(args)
    if not (0.0 < args.q < 1.0):
        raise UsageError(f"q: must lie in (0, 1), got {args.q}")
    report = localization_report(
        panel,
        tau=args.tau,
        window=args.window,
        q=args.q,
        method=args.method,
        storey_lambda=args.storey_lambda,
    )
    if args.csv:
        report.write_csv(args.csv)
    _emit(report.to_json(), args.out)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="meanscan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_io(p):
        p.add_argument("--input", required=True, help="panel file path")
        p.add_argument("--format", default="binary", choices=["binary", "csv"])
        p.add_argument("--out", default=None, help="write the JSON report here instead of stdout")

    p = sub.add_parser("test", help="homogeneity test on a panel")
    add_io(p)
    p.add_argument("--interval", default=None, help="LO,HI time window (default: whole panel)")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--variance-mode", default="ustat", choices=["ustat", "pairwise"])
    p.add_argument("--min-len", type=int, default=6)
    p.set_defaults(fn=_cmd_test)

    p = sub.add_parser("segment", help="binary segmentation of a panel")
    add_io(p)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--variance-mode", default="ustat", choices=["ustat", "pairwise"])
    p.add_argument("--min-len", type=int, default=6)
    p.add_argument("--alpha-policy", default="fixed", choices=["fixed", "per_level"])
    p.set_defaults(fn=_cmd_segment)

    p = sub.add_parser("simulate", help="generate a panel from a scenario config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", default="binary", choices=["binary", "csv"])
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=_cmd_simulate)

    for name, fn in (("bench-power", _cmd_bench_power), ("bench-identify", _cmd_bench_identify)):
        p = sub.add_parser(name, help=f"{name} experiment grid")
        p.add_argument("--config", required=True)
        p.add_argument("--out-dir", required=True)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--seed", type=int, default=None, help="override base_seed")
        p.add_argument("--alpha", type=float, default=None)
        p.add_argument("--replications", type=int, default=None)
        p.add_argument("--variance-mode", default=None, choices=["ustat", "pairwise"])
        p.set_defaults(fn=fn)

    p = sub.add_parser("localize", help="per-coordinate shift tests at a change-point")
    add_io(p)
    p.add_argument("--tau", type=int, required=True, help="change-point time")
    p.add_argument("--window", type=int, default=1)
    p.add_argument("--q", type=float, default=0.01, help="FDR level")
    p.add_argument("--method", default="storey", choices=["bh", "storey"])
    p.add_argument("--storey-lambda", type=float, default=0.5)
    p.add_argument("--csv", default=None, help="also write a per-coordinate CSV here")
    p.set_defaults(fn=_cmd_localize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (PanelFormatError, StatisticUndefinedError, FileNotFoundError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
