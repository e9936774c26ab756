"""Command-line front end.

Usage: ``wpsn <command> [--config PATH] [--seed N] [--out DIR] [--frames N] [--ts]``

Commands and the files they write (under ``--out``, default ``.``):

  region      region.csv       sample_id, r1_w..rK_w, kind (random | pareto | ts)
  gain        gain.csv         azimuth_deg, p_tot_w, gamma, gamma_oracle, status
  simulate    timeseries.csv   one row per frame (see csvio.timeseries_header)
              summary.csv      key, value
  sweep       sweep.csv        mode, penalty_weight_j2, utility_exponent, averages
  static-opt  static_opt.csv   node, r_star_w, sigma_star, kappa_bar_j, varphi_bar_j
  bounds      bounds.csv       key, value
  check-config                 validates a config; ``--emit`` prints the normalized form

Exit codes: 0 success, 1 unexpected error, 2 invalid argument or unsupported
setting, 3 config error, 4 degenerate geometry, 5 numeric failure,
6 infeasible problem, 7 file I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import beamforming as bf
from . import controller as ctl
from . import csvio
from .config import RunConfig, build_scenario, emit_config, load_config, parse_config
from .errors import ConfigError, DegenerateGeometry, WpsnError
from .geometry import NodePlacement, build_layout, channel_matrix
from .sim import Scenario, run

log = logging.getLogger("wpsn")

EXIT_IO = 7


def _scenario(cfg: RunConfig, args) -> Scenario:
    return build_scenario(cfg.tree, n_frames=args.frames, seed=args.seed,
                          mode="ts" if args.ts else None)


def _channel(sc: Scenario, placements=None):
    layout = build_layout(sc.array_kind, sc.n_antennas, sc.array_dimension_m)
    return channel_matrix(layout, placements or sc.placements, sc.radio)


def _oracle(cfg: RunConfig, seed: int) -> bf.OracleConfig:
    return bf.OracleConfig(restarts=cfg.run["oracle_restarts"], seed=seed)


def cmd_region(cfg, args, out: Path) -> str:
    sc = _scenario(cfg, args)
    H = _channel(sc)
    K = sc.n_nodes
    samples = bf.sample_region(H, sc.budget, cfg.run["samples"], sc.seed)
    alphas = bf.alpha_grid(K, cfg.run["alpha_points"], sc.seed)
    frontier = bf.pareto_frontier(H, sc.budget, alphas, "oracle", _oracle(cfg, sc.seed))
    ts = bf.ts_solution(H, sc.budget)
    rows = []
    for kind, block in (("random", samples), ("pareto", frontier), ("ts", ts.power_matrix)):
        for r in block:
            rows.append([len(rows), *r, kind])
    csvio.write_rows(out / "region.csv", ["sample_id", *[f"r{k}_w" for k in range(1, K + 1)],
                                          "kind"], rows)
    n_dom = int(bf.dominated(samples, frontier).sum())
    return (f"region: {len(samples)} samples, {len(frontier)} frontier points, "
            f"{n_dom} frontier points dominated by a sample -> {out / 'region.csv'}")


def _gain_placements(sc: Scenario, layout: str, angle_deg: float) -> list:
    base = list(sc.placements)
    if layout == "pair":
        last = base[-1]
        base[-1] = NodePlacement(last.radius_m, base[0].azimuth_rad + np.deg2rad(angle_deg))
    else:
        base = [NodePlacement(p.radius_m, base[0].azimuth_rad + np.deg2rad(k * angle_deg))
                for k, p in enumerate(base)]
    return base


def cmd_gain(cfg, args, out: Path) -> str:
    sc = _scenario(cfg, args)
    if sc.n_nodes < 2:
        raise ConfigError(["nodes.radius_m: the gain sweep needs at least two nodes"])
    angles = cfg.sweep["azimuth_deg"] or [None]
    powers = cfg.sweep["p_tot_w"] or [sc.budget.p_tot_w]
    rows = []
    for p_tot in powers:
        budget = bf.PowerBudget(sc.budget.p_ant_w, p_tot)
        for angle in angles:
            placements = (list(sc.placements) if angle is None
                          else _gain_placements(sc, cfg.sweep["gain_layout"], angle))
            shown = angle if angle is not None else float(np.rad2deg(placements[-1].azimuth_rad))
            try:
                rep = bf.gain_report(_channel(sc, placements), budget, True,
                                     _oracle(cfg, sc.seed))
                rows.append([shown, p_tot, rep.gamma, rep.gamma_oracle, "ok"])
            except DegenerateGeometry:
                rows.append([shown, p_tot, float("nan"), float("nan"), "degenerate"])
    csvio.write_rows(out / "gain.csv",
                     ["azimuth_deg", "p_tot_w", "gamma", "gamma_oracle", "status"], rows)
    ok = [r for r in rows if r[-1] == "ok"]
    if ok:
        g = np.array([r[2] for r in ok])
        span = f"gamma in [{g.min():.4f}, {g.max():.4f}]"
    else:
        span = "no non-degenerate rows"
    return f"gain: {len(rows)} rows, {span} -> {out / 'gain.csv'}"


def _summary_line(s: dict) -> str:
    if "min_energy_node" not in s:
        return f"{s['frames']} frames, nothing to summarize"
    return (f"{s['frames']} frames, avg sum utility {s['avg_sum_utility']:.6g}, "
            f"avg sum deficiency {s['avg_sum_deficiency_j']:.6g} J, "
            f"min-energy node {s['min_energy_node']} ({s['min_stored_j']:.6g} J), "
            f"all alive: {s['all_alive']}")


def cmd_simulate(cfg, args, out: Path) -> str:
    sc = _scenario(cfg, args)
    series = run(sc)
    csvio.write_timeseries(out / "timeseries.csv", series)
    s = series.summary()
    rows = [["warmup_frames", series.warmup_frames]]
    for key, v in s.items():
        if isinstance(v, list):
            rows += [[f"{key}_{k + 1}", x] for k, x in enumerate(v)]
        else:
            rows.append([key, v])
    csvio.write_rows(out / "summary.csv", ["key", "value"], rows)
    return f"simulate ({sc.mode}): " + _summary_line(s) + f" -> {out / 'timeseries.csv'}"


def _sweep_one(task):
    sc, mode, lam, psi = task
    cfg = replace(sc.controller, penalty_weight_j2=lam, utility_exponent=psi)
    s = run(replace(sc, controller=cfg, mode=mode)).summary()
    sig = s.get("avg_sigma", [float("nan")])
    return [mode, lam, psi, s["avg_sum_utility"], s["avg_sum_deficiency_j"],
            max(sig) - min(sig), s.get("min_stored_j", float("nan")),
            s.get("all_alive", False), *sig]


def sweep_tasks(sc: Scenario, sweep: dict, modes=("bs", "ts")):
    lam0, psi0 = sc.controller.penalty_weight_j2, sc.controller.utility_exponent
    tasks = []
    for mode in modes:
        tasks += [(sc, mode, lam, psi0) for lam in sweep["penalty_weight_j2"]]
        tasks += [(sc, mode, lam0, psi) for psi in sweep["utility_exponent"]]
    return tasks


def cmd_sweep(cfg, args, out: Path) -> str:
    sc = _scenario(cfg, args)
    tasks = sweep_tasks(sc, cfg.sweep)
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_sweep_one, tasks))
    else:
        rows = [_sweep_one(t) for t in tasks]
    header = ["mode", "penalty_weight_j2", "utility_exponent", "avg_sum_utility",
              "avg_sum_deficiency_j", "sigma_spread", "min_stored_j", "all_alive",
              *[f"avg_sigma{k}" for k in range(1, sc.n_nodes + 1)]]
    csvio.write_rows(out / "sweep.csv", header, rows)
    return f"sweep: {len(rows)} runs of {sc.n_frames} frames -> {out / 'sweep.csv'}"


def _static(cfg, sc):
    H = _channel(sc)
    return H, ctl.static_optimum(H, sc.energy, sc.budget, sc.controller,
                                 n_alpha=cfg.run["static_alpha_points"], seed=sc.seed,
                                 max_iter=cfg.run["static_max_iter"])


def cmd_static_opt(cfg, args, out: Path) -> str:
    sc = _scenario(cfg, args)
    _, so = _static(cfg, sc)
    rows = [[k + 1, so.r_star[k], so.sigma_star[k], so.kappa_bar, so.varphi_bar]
            for k in range(sc.n_nodes)]
    csvio.write_rows(out / "static_opt.csv",
                     ["node", "r_star_w", "sigma_star", "kappa_bar_j", "varphi_bar_j"], rows)
    return (f"static-opt: U* = {so.u_star:.9g} (gap {so.gap:.2e}, {so.iterations} iterations, "
            f"{so.n_alpha} alpha points) -> {out / 'static_opt.csv'}")


def cmd_bounds(cfg, args, out: Path) -> str:
    # the bounds hold for a stationary network, so scripted events are dropped
    sc = replace(_scenario(cfg, args), events=())
    H, so = _static(cfg, sc)
    ups = ctl.upsilon(sc.energy, sc.budget, channel=H)
    rep = ctl.theorem_bounds(so.u_star, ups, sc.controller)
    rows = [["u_star", so.u_star], ["static_gap", so.gap], ["upsilon_j2", ups],
            ["utility_lower_bound", rep.utility_lower_bound],
            ["deficiency_upper_bound_j", rep.deficiency_upper_bound_j]]
    tail = " (scripted events ignored)" if cfg.scenario.events else ""
    if sc.n_frames > 0:
        s = run(sc).summary()
        ok_u = s["avg_sum_utility"] >= rep.utility_lower_bound - 3 * s["sem_sum_utility"]
        ok_d = s["avg_sum_deficiency_j"] <= rep.deficiency_upper_bound_j
        rows += [["frames", sc.n_frames], ["avg_sum_utility", s["avg_sum_utility"]],
                 ["sem_sum_utility", s["sem_sum_utility"]],
                 ["avg_sum_deficiency_j", s["avg_sum_deficiency_j"]],
                 ["utility_bound_holds", ok_u], ["deficiency_bound_holds", ok_d]]
        tail += (f"; simulated utility {s['avg_sum_utility']:.6g} "
                f"({'holds' if ok_u else 'VIOLATED'}), deficiency "
                f"{s['avg_sum_deficiency_j']:.6g} J ({'holds' if ok_d else 'VIOLATED'})")
    csvio.write_rows(out / "bounds.csv", ["key", "value"], rows)
    return (f"bounds: U* = {so.u_star:.6g}, upsilon = {ups:.6g} J^2, utility >= "
            f"{rep.utility_lower_bound:.6g}, deficiency <= {rep.deficiency_upper_bound_j:.6g} J"
            + tail)


def cmd_check_config(cfg, args, out: Path) -> str:
    if args.emit:
        sys.stdout.write(emit_config(cfg))
    return f"config ok: {cfg.scenario.n_nodes} nodes, {cfg.scenario.n_antennas} antennas"


COMMANDS = {
    "region": cmd_region,
    "gain": cmd_gain,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "static-opt": cmd_static_opt,
    "bounds": cmd_bounds,
    "check-config": cmd_check_config,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration")
    common.add_argument("--seed", type=int, help="override sim.seed")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--frames", type=int, help="override sim.frames")
    common.add_argument("--ts", action="store_true", help="time-sharing comparison mode")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="wpsn", description="Multi-antenna wireless power "
                                "beacon: beamforming, energy-neutral control and simulation.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "sweep":
            sp.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
        if name == "check-config":
            sp.add_argument("--emit", action="store_true", help="print the normalized config")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError(["--seed: must be an unsigned 64-bit integer"])
        if args.frames is not None and args.frames < 0:
            raise ConfigError(["--frames: must be nonnegative"])
        if args.config is not None:
            try:
                cfg = load_config(args.config)
            except ConfigError as exc:
                exc.errors = [f"{args.config}: {e}" for e in exc.errors]
                raise
        else:
            cfg = parse_config("")
        out = args.out
        if args.command != "check-config":
            out.mkdir(parents=True, exist_ok=True)
        print(COMMANDS[args.command](cfg, args, out))
        return 0
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return exc.exit_code
    except WpsnError as exc:
        print(f"{args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        where = exc.filename if exc.filename else "?"
        print(f"{args.command}: I/O error on {where}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
