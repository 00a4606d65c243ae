"""Command line front end.

Four subcommands:

* ``simulate``: Monte Carlo over one configuration; writes ``rmse.csv``
  (one row per time step, one column per algorithm) and ``summary.csv``
  (one row per algorithm), optionally saving every episode.
* ``sweep``: repeats simulate over the settings listed in a sweep config;
  writes ``sweep.csv``.
* ``table1``: tabulates decentralized TRMSE against consensus depth
  L = 1..5; writes ``table1.csv``.
* ``replay``: re-runs algorithms on a saved episode file and writes the
  same per-step outputs; data rows are bit-identical to the original
  single-run simulate under the same backend.

Every output file starts with ``#``-prefixed provenance lines (version,
command, config digest and the full flattened configuration), so data
rows alone define the file's content for comparisons.
"""

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__, kernels
from .config import (ScenarioConfig, config_digest, from_flat, load_scenario,
                     load_sweep, to_flat)
from .errors import RcifError
from .filters import ALGORITHMS, canonical_algorithm, plan_consensus
from .metrics import (MonteCarloResult, consensus_depth_table, evaluate,
                      rmse_over_runs, run_monte_carlo, run_sweep, trmse)
from .scenario import load_episode, save_episode

_TABLE_ALGOS = ("dRCIF-1", "dRCIF-2", "dCIF-t")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):  # incl. numpy scalars, which repr oddly
        return repr(float(value))
    return str(value)


def _provenance(cfg, command):
    lines = [f"# rcif {__version__}",
             f"# command: {command}",
             f"# config: {config_digest(cfg)}",
             f"# backend: {kernels.backend_name}"]
    for key, value in to_flat(cfg).items():
        lines.append(f"# cfg.{key}: {value}")
    return lines


def _write_csv(path, cfg, command, header, rows):
    with open(path, "w") as fh:
        for line in _provenance(cfg, command):
            fh.write(line + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path):
    """Read one of our CSV files, skipping provenance lines.

    Returns (header list, row lists of strings).
    """
    header, rows = None, []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
            else:
                rows.append(line.split(","))
    return header, rows


def _summary_rows(mc, algorithms):
    rows = []
    total = len(mc.results)
    for algo in algorithms:
        ok = len(mc.successful(algo))
        row = [algo, mc.trmse(algo) if ok else None, ok, total - ok]
        comm = mc.comm_reals(algo)
        row += [comm.get("prior"), comm.get("likelihood")]
        out_mean, nom_mean = mc.indicator_means(algo)
        row += [None if np.isnan(out_mean) else out_mean,
                None if np.isnan(nom_mean) else nom_mean]
        rows.append(row)
    return rows


_SUMMARY_HEADER = ("algorithm", "trmse", "runs_ok", "runs_failed",
                   "prior_reals", "likelihood_reals",
                   "indicator_outlier_mean", "indicator_nominal_mean")


def _write_step_outputs(out_dir, cfg, command, algorithms, curves, mc):
    steps = len(next(iter(curves.values()))) if curves else 0
    rows = [[t + 1] + [curves[a][t] for a in algorithms]
            for t in range(steps)]
    _write_csv(os.path.join(out_dir, "rmse.csv"), cfg, command,
               ("t",) + tuple(algorithms), rows)
    _write_csv(os.path.join(out_dir, "summary.csv"), cfg, command,
               _SUMMARY_HEADER, _summary_rows(mc, algorithms))


def _parse_algorithms(arg, default):
    if not arg:
        return tuple(default)
    return tuple(canonical_algorithm(a) for a in arg.split(","))


def _load_config(args):
    cfg = (load_scenario(args.config) if args.config else ScenarioConfig())
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _report(mc, algorithms):
    total = len(mc.results)
    for algo in algorithms:
        ok = len(mc.successful(algo))
        if ok:
            print(f"{algo}: TRMSE {mc.trmse(algo):.3f} m "
                  f"({ok}/{total} runs)")
        else:
            print(f"{algo}: all {total} runs failed")
    for index, algo, msg in mc.failures():
        print(f"warning: run {index} {algo} failed: {msg}",
              file=sys.stderr)


def _cmd_simulate(args, command):
    cfg = _load_config(args)
    algorithms = _parse_algorithms(args.algorithms, ALGORITHMS)
    os.makedirs(args.out, exist_ok=True)
    mc = run_monte_carlo(cfg, algorithms, jobs=args.jobs,
                         sensors_only=args.sensors_only,
                         keep_episodes=args.save_episodes)
    curves = {a: mc.rmse(a) for a in algorithms if mc.successful(a)}
    _write_step_outputs(args.out, cfg, command,
                        [a for a in algorithms if a in curves], curves, mc)
    if args.save_episodes:
        ep_dir = os.path.join(args.out, "episodes")
        os.makedirs(ep_dir, exist_ok=True)
        meta = to_flat(cfg)
        for r in mc.results:
            meta_run = dict(meta, run=str(r.run_index))
            save_episode(os.path.join(ep_dir, f"run_{r.run_index:05d}.txt"),
                         r.episode, mc.network, meta=meta_run)
    _report(mc, algorithms)
    print(f"wrote {args.out}/rmse.csv and {args.out}/summary.csv")
    return 0


def _cmd_sweep(args, command):
    if not args.config:
        raise RcifError("sweep needs --config with sweep_param and "
                        "sweep_values")
    base, param, values = load_sweep(args.config)
    if args.seed is not None:
        base = replace(base, seed=args.seed)
    algorithms = _parse_algorithms(args.algorithms, ALGORITHMS)
    os.makedirs(args.out, exist_ok=True)
    rows = []
    for value, mc in run_sweep(base, param, values, algorithms,
                               jobs=args.jobs,
                               sensors_only=args.sensors_only):
        print(f"{param} = {value}:")
        _report(mc, algorithms)
        for algo in algorithms:
            ok = len(mc.successful(algo))
            rows.append([param, value, algo,
                         mc.trmse(algo) if ok else None, ok,
                         len(mc.results) - ok])
    _write_csv(os.path.join(args.out, "sweep.csv"), base, command,
               ("param", "value", "algorithm", "trmse", "runs_ok",
                "runs_failed"), rows)
    print(f"wrote {args.out}/sweep.csv")
    return 0


def _cmd_table1(args, command):
    cfg = _load_config(args)
    algorithms = _parse_algorithms(args.algorithms, _TABLE_ALGOS)
    os.makedirs(args.out, exist_ok=True)
    table = consensus_depth_table(cfg, algorithms=algorithms,
                                  jobs=args.jobs,
                                  sensors_only=args.sensors_only)
    rows = []
    for algo in algorithms:
        for depth, mc in table:
            ok = len(mc.successful(algo))
            rows.append([algo, depth, mc.trmse(algo) if ok else None])
    _write_csv(os.path.join(args.out, "table1.csv"), cfg, command,
               ("algorithm", "consensus_rounds", "trmse"), rows)
    for algo in algorithms:
        cells = " ".join(f"{v:8.3f}" if v is not None else "   --   "
                         for a, d, v in rows if a == algo)
        print(f"{algo:>8}  {cells}")
    print(f"wrote {args.out}/table1.csv")
    return 0


def _cmd_replay(args, command):
    episode, network, meta = load_episode(args.episode)
    cfg = from_flat(meta)
    algorithms = _parse_algorithms(args.algorithms, ALGORITHMS)
    os.makedirs(args.out, exist_ok=True)
    plan = plan_consensus(network.graph, cfg.consensus_rounds)
    node_ids = (tuple(network.graph.sensor_ids) if args.sensors_only
                else None)
    result = evaluate(cfg, network, plan, episode, algorithms,
                      node_ids=node_ids)
    mc = MonteCarloResult(config=cfg, algorithms=algorithms,
                          network=network, node_ids=node_ids,
                          results=(result,))
    curves = {a: rmse_over_runs(result.sq_errors[a][None])
              for a in algorithms if a in result.sq_errors}
    _write_step_outputs(args.out, cfg, command,
                        [a for a in algorithms if a in curves], curves, mc)
    for algo in algorithms:
        if algo in result.sq_errors:
            print(f"{algo}: TRMSE {trmse(curves[algo]):.3f} m")
        else:
            print(f"{algo}: failed: {result.errors[algo]}",
                  file=sys.stderr)
    print(f"wrote {args.out}/rmse.csv and {args.out}/summary.csv")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rcif",
        description="Outlier-robust information fusion simulator")
    parser.add_argument("--version", action="version",
                        version=f"rcif {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_help):
        p.add_argument("--config", help=config_help)
        p.add_argument("--out", default="rcif_out",
                       help="output directory (default: rcif_out)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--jobs", type=int, default=1,
                       help="worker processes for Monte Carlo runs")
        p.add_argument("--algorithms", default=None,
                       help="comma-separated algorithm names")
        p.add_argument("--sensors-only", action="store_true",
                       help="evaluate RMSE over sensor nodes only")

    p = sub.add_parser("simulate", help="Monte Carlo over one config")
    common(p, "YAML scenario config (defaults when omitted)")
    p.add_argument("--save-episodes", action="store_true",
                   help="write every episode under OUT/episodes/")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("sweep", help="Monte Carlo over a config sweep")
    common(p, "YAML config with sweep_param and sweep_values")
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("table1",
                       help="decentralized TRMSE vs consensus depth")
    common(p, "YAML scenario config (defaults when omitted)")
    p.set_defaults(fn=_cmd_table1)

    p = sub.add_parser("replay", help="re-run algorithms on a saved episode")
    common(p, "ignored; the episode file carries its config")
    p.add_argument("--episode", required=True, help="episode file to replay")
    p.set_defaults(fn=_cmd_replay)

    return parser


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    command = "rcif " + " ".join(argv)
    try:
        return args.fn(args, command)
    except RcifError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
