"""Command-line front end: ``run``, ``compare`` and ``sweep``.

Exit status is 0 on success, 2 for configuration errors and 3 when a run
or solve fails.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config, results
from .sim import (
    VARIANTS,
    ConfigError,
    SimulationError,
    compare_controllers,
    fuel_penalty,
    run,
    run_many,
    run_open_loop,
)
from .solver import SolverFailure

EXIT_OK, EXIT_CONFIG, EXIT_RUN = 0, 2, 3

DEFAULT_COMPARE = ("open_energy", "open_fuel", "kf_fixed_eps", "mtfkf_fixed_eps", "mtf_adaptive")

log = logging.getLogger("rvzhomotopy")


def _common(p):
    p.add_argument("--scenario", type=Path, help="YAML scenario file (defaults if omitted)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--variant", choices=VARIANTS, help="controller variant")
    p.add_argument("--seed", type=int, help="RNG seed")
    p.add_argument("--workers", type=int, default=1, help="worker processes for batch runs")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a scenario field, e.g. scheduler.beta=0.5 (repeatable)")


def parse_seeds(text: str) -> list:
    """``"0,3,5"`` or ``"0:20"`` (half-open range) or a mix of both."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            a, b = part.split(":", 1)
            seeds.extend(range(int(a), int(b)))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ConfigError("empty seed list")
    return seeds


def parse_grid(values: str | None, linspace: str | None) -> list:
    if (values is None) == (linspace is None):
        raise ConfigError("give exactly one of --values or --linspace")
    if values is not None:
        return [_scalar(v) for v in values.split(",") if v.strip()]
    try:
        a, b, num = linspace.split(",")
        return [float(v) for v in np.linspace(float(a), float(b), int(num))]
    except ValueError:
        raise ConfigError("--linspace takes start,stop,num") from None


def _scalar(text: str):
    # YAML 1.1 reads "1e-3" as a string, so try numbers first
    text = text.strip()
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    import yaml

    return yaml.safe_load(text)


def _load(args):
    cfg = config.load_scenario(args.scenario, args.overrides)
    if args.variant:
        cfg = replace(cfg, controller=args.variant)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg.validate()


def cmd_run(args) -> int:
    cfg = _load(args)
    args.out.mkdir(parents=True, exist_ok=True)
    metrics = run(cfg)
    if cfg.controller == "open_fuel":
        dv_fuel = metrics.total_delta_v
    else:
        dv_fuel = run_open_loop(replace(cfg, controller="open_fuel")).total_delta_v
    metrics.fuel_penalty_pct = fuel_penalty(metrics.total_delta_v, dv_fuel)
    summary = metrics.summary()
    summary["fuel_baseline_delta_v"] = dv_fuel
    results.write_history(args.out / "history.csv", metrics)
    results.write_summary(args.out / "summary.json", summary)
    print(results.one_line(cfg.controller, summary))
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _load(args)
    variants = args.variants.split(",") if args.variants else list(DEFAULT_COMPARE)
    variants = [v.strip() for v in variants if v.strip()]
    if len(variants) < 2:
        raise ConfigError("compare needs at least two variants")
    seeds = parse_seeds(args.seeds) if args.seeds else [cfg.seed]
    args.out.mkdir(parents=True, exist_ok=True)
    comp = compare_controllers(cfg, variants, seeds, workers=args.workers)
    rows = comp.rows()
    per_run = [{"variant": v, **comp.runs[(v, s)].summary()} for v in variants for s in seeds]
    results.write_rows(args.out / "comparison.csv", rows)
    results.write_rows(args.out / "runs.csv", per_run)
    table = results.format_table(rows, comp.fuel_baseline)
    (args.out / "comparison.txt").write_text(table + "\n")
    print(table)
    return EXIT_OK


def cmd_sweep(args) -> int:
    base = _load(args)
    sec, key = config.split_path(args.param)
    grid = parse_grid(args.values, args.linspace)
    mapping = config.to_mapping(base)
    cfgs = []
    for value in grid:
        data = {s: dict(b) for s, b in mapping.items()}
        data[sec][key] = value
        cfgs.append(config.from_mapping(data))
    args.out.mkdir(parents=True, exist_ok=True)
    metrics = run_many(cfgs, workers=args.workers, safe=True)
    rows = []
    baselines = {}
    for value, cfg, m in zip(grid, cfgs, metrics):
        row = {"parameter": f"{sec}.{key}", "value": value, "variant": cfg.controller}
        if isinstance(m, SimulationError):
            log.warning("grid point %s=%r failed: %s", args.param, value, m)
            rows.append({**row, "failed": 1})
            continue
        key_b = (cfg.n, cfg.u_max, cfg.tf, cfg.dt, cfg.x0, cfg.x_target, cfg.fixed_eps, cfg.eps_floor)
        if key_b not in baselines:
            try:
                baselines[key_b] = run_open_loop(replace(cfg, controller="open_fuel")).total_delta_v
            except SimulationError:
                baselines[key_b] = float("nan")
        m.fuel_penalty_pct = fuel_penalty(m.total_delta_v, baselines[key_b])
        rows.append({**row, "failed": 0, **m.summary()})
    results.write_rows(args.out / "sweep.csv", rows)
    for r in rows:
        if r["failed"]:
            print(f"{r['parameter']}={r['value']}: failed")
        else:
            print(f"{r['parameter']}={r['value']}: miss={r['terminal_miss']:.4e} km "
                  f"dv={r['total_delta_v']:.6e} km/s success={r['solve_success_rate']:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rvzhomotopy", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario")
    _common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="compare controller variants on shared noise")
    _common(p)
    p.add_argument("--variants", help=f"comma list (default {','.join(DEFAULT_COMPARE)})")
    p.add_argument("--seeds", help="seed list, e.g. 0:20 or 1,2,3")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="sweep one scenario parameter")
    _common(p)
    p.add_argument("--param", required=True, help="section.key or unique key")
    p.add_argument("--values", help="comma list of values")
    p.add_argument("--linspace", help="start,stop,num")
    p.set_defaults(func=cmd_sweep)

    sub.add_parser("defaults", help="print the default scenario file").set_defaults(func=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.func is None:
        from .sim import ScenarioConfig

        sys.stdout.write(config.dump_scenario(ScenarioConfig()))
        return EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationError, SolverFailure) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
