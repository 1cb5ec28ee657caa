"""Command-line driver: single runs, the benchmark matrix, NoC sweeps and reports."""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import archconfig
from .archconfig import ArchConfig
from .energy import ENERGY_COLUMNS, append_energy_csv, energy_row, run_energy
from .mapping import BudgetWarning, place, plan
from .noc import FLOWS
from .pipeline import NocModel, SimStats, geomean, simulate, speedup_table
from .traffic import PATTERNS, parse_rates, reception_curve, run_point, sweep
from .workload import NETWORK_NAMES, get_network

RUN_COLUMNS = ("net", "noc", "scenario", "cycles", "images", "fps", "tops")


@dataclass
class BenchmarkMatrix:
    cells: dict = field(default_factory=dict)  # (net, noc, scenario) -> SimStats
    failures: dict = field(default_factory=dict)  # key -> error message

    def keys(self):
        return sorted(self.cells)


def _run_cell(args):
    key, cfg_dict, images, noc_kw = args
    net_name, flow, scenario = key
    config = archconfig.from_dict(cfg_dict)
    net = get_network(net_name)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BudgetWarning)
        mplan = place(plan(net, config, replication_enabled=scenario >= 3), config, allow_wrap=True)
    return simulate(net, mplan, scenario, NocModel(flow, **noc_kw), images, config)


def run_matrix(
    config: ArchConfig,
    nets=NETWORK_NAMES,
    nocs=FLOWS,
    scenarios=(1, 2, 3, 4),
    jobs: int = 1,
    images: int = 4,
    noc_kw: dict | None = None,
) -> BenchmarkMatrix:
    """Simulate every selected (net, noc, scenario) cell.

    A failing cell is recorded in ``failures`` and does not stop the rest.
    """
    keys = sorted((n, f, s) for n in nets for f in nocs for s in scenarios)
    if not keys:
        raise ValueError("empty selection")
    cfg = archconfig.to_dict(config)
    tasks = [(k, cfg, images, noc_kw or {}) for k in keys]
    out = BenchmarkMatrix()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {k: pool.submit(_run_cell, t) for k, t in zip(keys, tasks)}
            for k, fut in futures.items():
                try:
                    out.cells[k] = fut.result()
                except Exception as exc:  # noqa: BLE001 - reported per cell
                    out.failures[k] = f"{type(exc).__name__}: {exc}"
    else:
        for k, t in zip(keys, tasks):
            try:
                out.cells[k] = _run_cell(t)
            except Exception as exc:  # noqa: BLE001
                out.failures[k] = f"{type(exc).__name__}: {exc}"
    return out


def run_row(stats: SimStats) -> list:
    return [stats.network, stats.noc, stats.scenario, stats.cycles_total, stats.images_completed,
            f"{stats.fps:.6g}", f"{stats.tops:.6g}"]


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def emit_reports(matrix: BenchmarkMatrix, out_dir: str | Path, config: ArchConfig) -> dict:
    """Write matrix, speedup, energy and VGG-E tables; return the geometric means."""
    if not matrix.cells:
        raise ValueError("matrix is empty, nothing to report")
    keys = matrix.keys()
    nets = sorted({k[0] for k in keys})
    by_scenario = speedup_table(
        {k: v for k, v in matrix.cells.items() if (k[0], k[1], 1) in matrix.cells}, baseline=1, axis=2
    )
    by_noc = speedup_table(
        {k: v for k, v in matrix.cells.items() if (k[0], "wormhole", k[2]) in matrix.cells}, baseline="wormhole", axis=1
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "matrix.csv", RUN_COLUMNS, [run_row(matrix.cells[k]) for k in keys])
    _write_csv(
        out / "speedups.csv",
        ("net", "noc", "scenario", "speedup_vs_scenario1"),
        [(*k, f"{by_scenario['speedups'][k]:.6g}") for k in sorted(by_scenario["speedups"])]
        + [("geomean", f, s, f"{g:.6g}") for (f, s), g in sorted(by_scenario["geomean"].items())],
    )
    _write_csv(
        out / "noc_speedups.csv",
        ("net", "noc", "scenario", "speedup_vs_wormhole"),
        [(*k, f"{by_noc['speedups'][k]:.6g}") for k in sorted(by_noc["speedups"])]
        + [("geomean", f, s, f"{g:.6g}") for (f, s), g in sorted(by_noc["geomean"].items())],
    )
    reports = {k: run_energy(matrix.cells[k], config) for k in keys}
    _write_csv(out / "energy.csv", ENERGY_COLUMNS, [energy_row(matrix.cells[k], reports[k]) for k in keys])
    vgg_e = [k for k in keys if k[0] == "vgg-e"]
    _write_csv(
        out / "vgg_e_throughput.csv",
        ("noc", "scenario", "fps", "tops", "tops_per_watt"),
        [(k[1], k[2], f"{matrix.cells[k].fps:.6g}", f"{matrix.cells[k].tops:.6g}",
          f"{reports[k].tops_per_watt:.6g}") for k in vgg_e],
    )
    summary = {"nets": nets}
    scen = {}
    for s in sorted({k[2] for k in keys}):
        vals = [by_scenario["speedups"][k] for k in by_scenario["speedups"] if k[2] == s]
        if vals:
            scen[str(s)] = geomean(vals)
    noc = {}
    for f in sorted({k[1] for k in keys}):
        vals = [by_noc["speedups"][k] for k in by_noc["speedups"] if k[1] == f]
        if vals:
            noc[f] = geomean(vals)
    summary["scenario_geomean"] = scen
    summary["noc_geomean"] = noc
    if matrix.failures:
        summary["failures"] = {"|".join(map(str, k)): v for k, v in sorted(matrix.failures.items())}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def _save_run(stats: SimStats, out_dir: Path) -> Path:
    runs = out_dir / "runs"
    runs.mkdir(parents=True, exist_ok=True)
    path = runs / f"{stats.network}_{stats.noc}_s{stats.scenario}.json"
    path.write_text(json.dumps(stats.to_dict(), indent=1) + "\n")
    return path


def _noc_kw(args) -> dict:
    return {"hpcmax": args.hpcmax, "buffer_depth": args.buffer_depth,
            "router_delay": args.router_delay, "link_delay": args.link_delay}


def cmd_sim_run(args, config):
    net = get_network(args.network)
    mplan = plan(net, config, replication_enabled=args.scenario >= 3, strict=args.strict)
    mplan = place(mplan, config, allow_wrap=not args.strict)
    stats = simulate(net, mplan, args.scenario, NocModel(args.noc, **_noc_kw(args)), args.images, config)
    out = Path(args.out_dir)
    _save_run(stats, out)
    csv_path = out / "runs.csv"
    new = not csv_path.exists()
    with csv_path.open("a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(RUN_COLUMNS)
        w.writerow(run_row(stats))
    summary = {k: v for k, v in stats.to_dict().items() if k not in ("noc_packet_latencies", "layer_starts")}
    print(json.dumps(summary, indent=2))


def cmd_sim_matrix(args, config):
    nets = args.nets.split(",") if args.nets else NETWORK_NAMES
    nocs = args.nocs.split(",") if args.nocs else FLOWS
    scenarios = [int(s) for s in args.scenarios.split(",")] if args.scenarios else (1, 2, 3, 4)
    matrix = run_matrix(config, nets, nocs, scenarios, args.jobs, args.images, _noc_kw(args))
    out = Path(args.out_dir)
    for stats in matrix.cells.values():
        _save_run(stats, out)
    for key, msg in sorted(matrix.failures.items()):
        print(f"cell {key} failed: {msg}", file=sys.stderr)
    if not matrix.cells:
        return 1
    summary = emit_reports(matrix, out, config)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 1 if matrix.failures else 0


def _mesh(text: str) -> tuple[int, int]:
    try:
        cols, rows = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"mesh must look like 8x8, got {text!r}") from None
    return rows, cols


def cmd_noc_sweep(args, config):
    patterns = PATTERNS if args.pattern == "all" else (args.pattern,)
    flows = ("wormhole", "smart") if args.flow == "all" else (args.flow,)
    rates = parse_rates(args.rates)
    results = []
    for pattern in patterns:
        for flow in flows:
            curve = sweep(pattern, flow, rates, args.warmup, args.measure, args.seed, args.mesh,
                          stop_after_saturation=args.stop_early, packet_length=args.packet_length,
                          **_noc_kw(args))
            if args.out and len(patterns) == len(flows) == 1:
                path = Path(args.out)
            else:
                path = Path(args.out_dir) / "curves" / f"{pattern}_{flow}.csv"
            curve.write_csv(path)
            if args.trace:
                tpath = Path(args.out_dir) / "traces" / f"{pattern}_{flow}_{rates[0]:g}.csv"
                tpath.parent.mkdir(parents=True, exist_ok=True)
                run_point(pattern, flow, rates[0], args.mesh, args.warmup, args.measure, args.seed,
                          args.packet_length, trace_path=tpath, **_noc_kw(args))
            _, plateau = reception_curve(curve)
            results.append({"pattern": pattern, "flow": flow, "saturation_rate": curve.saturation_rate,
                            "zero_load_latency": curve.zero_load_latency, "reception_plateau": plateau,
                            "csv": str(path)})
    print(json.dumps(results, indent=2))


def cmd_plan_dump(args, config):
    net = get_network(args.network)
    mplan = plan(net, config, replication_enabled=args.replication == "on", strict=args.strict)
    mplan = place(mplan, config, allow_wrap=not args.strict)
    print(json.dumps(mplan.to_dict(), indent=2))


def cmd_report_energy(args, config):
    stats = SimStats.from_dict(json.loads(Path(args.run).read_text()))
    report = run_energy(stats, config)
    append_energy_csv(Path(args.out_dir) / "energy.csv", stats, report)
    print(json.dumps(report.to_dict(), indent=2))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pimsim", description="ReRAM PIM node performance, NoC and energy simulator")
    p.add_argument("--config", help="JSON config (default: shipped config)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-dir", default="results")
    sub = p.add_subparsers(dest="group", required=True)

    def noc_flags(sp):
        sp.add_argument("--hpcmax", type=int, default=14)
        sp.add_argument("--buffer-depth", type=int, default=4)
        sp.add_argument("--router-delay", type=int, default=1)
        sp.add_argument("--link-delay", type=int, default=1)

    sim = sub.add_parser("sim").add_subparsers(dest="cmd", required=True)
    run = sim.add_parser("run", help="simulate one (network, scenario, noc) cell")
    run.add_argument("--network", default="vgg-e")
    run.add_argument("--scenario", type=int, choices=(1, 2, 3, 4), default=4)
    run.add_argument("--noc", choices=FLOWS, default="smart")
    run.add_argument("--images", type=int, default=4)
    run.add_argument("--strict", action="store_true", help="fail when the plan exceeds the tile budget")
    noc_flags(run)
    run.set_defaults(func=cmd_sim_run)
    mat = sim.add_parser("matrix", help="run the net x noc x scenario matrix and write reports")
    mat.add_argument("--nets", help="comma list (default: all five VGG nets)")
    mat.add_argument("--nocs", help="comma list (default: ideal,smart,wormhole)")
    mat.add_argument("--scenarios", help="comma list (default: 1,2,3,4)")
    mat.add_argument("--images", type=int, default=4)
    noc_flags(mat)
    mat.set_defaults(func=cmd_sim_matrix)

    noc = sub.add_parser("noc").add_subparsers(dest="cmd", required=True)
    sw = noc.add_parser("sweep", help="synthetic traffic injection sweep")
    sw.add_argument("--pattern", choices=PATTERNS + ("all",), default="uniform_random")
    sw.add_argument("--flow", choices=("wormhole", "smart", "ideal", "all"), default="all")
    sw.add_argument("--rates", default="0.01:0.5:0.01")
    sw.add_argument("--mesh", type=_mesh, default=(8, 8), help="COLSxROWS")
    sw.add_argument("--warmup", type=int, default=10_000)
    sw.add_argument("--measure", type=int, default=50_000)
    sw.add_argument("--packet-length", type=int, default=5)
    sw.add_argument("--stop-early", action="store_true", help="skip rates past deep saturation")
    sw.add_argument("--out", help="CSV path (single pattern and flow only)")
    sw.add_argument("--trace", action="store_true", help="also dump a per-cycle trace of the lowest rate")
    noc_flags(sw)
    sw.set_defaults(func=cmd_noc_sweep)

    pl = sub.add_parser("plan").add_subparsers(dest="cmd", required=True)
    dump = pl.add_parser("dump", help="print a mapping plan as JSON")
    dump.add_argument("--network", default="vgg-e")
    dump.add_argument("--replication", choices=("on", "off"), default="on")
    dump.add_argument("--strict", action="store_true")
    dump.set_defaults(func=cmd_plan_dump)

    rep = sub.add_parser("report").add_subparsers(dest="cmd", required=True)
    en = rep.add_parser("energy", help="energy report for a saved run")
    en.add_argument("--run", required=True, help="stats JSON written by sim run/matrix")
    en.set_defaults(func=cmd_report_energy)
    return p


def _short_warning(message, category, filename, lineno, line=None):
    return f"warning: {message}\n"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    warnings.formatwarning = _short_warning
    try:
        config = archconfig.load_config(args.config)
        return args.func(args, config) or 0
    except (archconfig.ConfigError, ValueError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
