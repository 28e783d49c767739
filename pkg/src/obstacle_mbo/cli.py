"""Command line: ``obstacle-mbo {run,invasion,study,bench,verify,render}``.

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration.
"""
from __future__ import annotations

import argparse
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .config import ConfigError, build_initial, build_obstacles, echo, load_config
from .experiments import (RNG_ALGORITHM, InvasionConfig, SteadyStateStudyConfig, bench,
                          invasion_run, loglog_slope, steady_state_study)
from .fileio import (BENCH_COLUMNS, METRIC_COLUMNS, STUDY_COLUMNS, FormatError,
                     load_mask, load_phase, save_mask, save_phase, write_json, write_pgm,
                     write_rows, render)
from .grid import GridGeometry, ObstacleOverlap
from .heat import fft_workers
from .scheme import SchemeConfig, run
from .verify import SUITES

log = logging.getLogger("obstacle_mbo")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class Outputs:
    """Output directory bookkeeping for one run."""

    def __init__(self, directory, run_id: str):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.run_id = run_id
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.dir / name

    def snapshot(self, it: int, u) -> None:
        save_phase(self.path(f"{self.run_id}_{it}.pgm"), u)

    def manifest(self, config: dict, seed: int, started: str, termination: str,
                 extra: dict | None = None) -> None:
        path = self.dir / f"{self.run_id}_manifest.json"
        doc = {"config": config, "version": __version__, "seed": seed,
               "rng": RNG_ALGORITHM, "started": started, "finished": _now(),
               "outputs": sorted(set(self.files)), "termination": termination}
        doc.update(extra or {})
        write_json(path, doc)


def _write_metrics(out: Outputs, record) -> None:
    write_rows(out.path(f"{out.run_id}_metrics.csv"), METRIC_COLUMNS, record.rows())


def cmd_run(args) -> int:
    started = _now()
    cfg = load_config(args.config)
    geom = GridGeometry(cfg["grid"]["n"])
    obs = build_obstacles(cfg, geom)
    u0 = build_initial(cfg, geom)
    sch = cfg["scheme"]
    scheme = SchemeConfig(h=sch["h"], max_iters=sch["max_iters"],
                          volume_target=sch["volume_target"],
                          record_energy=sch["record_energy"],
                          snapshot_stride=cfg["output"]["snapshot_stride"])
    seed = cfg["experiment"]["seed"]
    out = Outputs(args.out or cfg["output"]["dir"], cfg["experiment"]["run_id"])
    final, record = run(u0, obs, scheme, seed=seed, on_snapshot=out.snapshot)
    _write_metrics(out, record)
    if cfg["output"]["save_final"]:
        save_phase(out.path(f"{out.run_id}_final.pgm"), final)
        if not obs.is_empty:
            save_mask(out.path(f"{out.run_id}_phi.pgm"), obs.phi)
            save_mask(out.path(f"{out.run_id}_psi.pgm"), obs.psi)
    out.manifest(echo(cfg), seed, started, record.termination,
                 {"iterations": record.iterations_run})
    print(f"{record.termination} after {record.iterations_run} iterations; "
          f"outputs in {out.dir}")
    return EXIT_OK


def cmd_invasion(args) -> int:
    started = _now()
    cfg = load_config(args.config)
    exp = cfg["experiment"]
    inv = InvasionConfig(A_syst=exp["A_syst"], C=exp["C"], n=cfg["grid"]["n"],
                         h=cfg["scheme"]["h"], seed=exp["seed"],
                         padding_width=exp["padding_width"],
                         max_iters=cfg["scheme"]["max_iters"],
                         snapshot_stride=cfg["output"]["snapshot_stride"])
    out = Outputs(args.out or cfg["output"]["dir"], exp["run_id"])
    final, record, setup = invasion_run(inv, on_snapshot=out.snapshot)
    _write_metrics(out, record)
    if cfg["output"]["save_final"]:
        save_phase(out.path(f"{out.run_id}_final.pgm"), final)
        save_mask(out.path(f"{out.run_id}_phi.pgm"), setup.obstacles.phi)
        save_mask(out.path(f"{out.run_id}_psi.pgm"), setup.obstacles.psi)
    out.manifest(echo(cfg), inv.seed, started, record.termination,
                 {"iterations": record.iterations_run, "derived": {
                     "r_d": inv.r_d, "N_d": inv.N_d, "h": inv.diffusion_time,
                     "padding_width": inv.padding}})
    print(f"{record.termination} after {record.iterations_run} iterations; "
          f"final area fraction {record.area_fraction[-1]:.4f}")
    return EXIT_OK


def cmd_study(args) -> int:
    started = _now()
    cfg = load_config(args.config)
    exp = cfg["experiment"]
    expected = exp["expected"] if len(exp["expected"]) == len(exp["hs"]) else ()
    study = SteadyStateStudyConfig(n=cfg["grid"]["n"], radius=exp["radius"],
                                   left_x=exp["left_x"], gap=exp["gap"], hs=exp["hs"],
                                   expected=expected, max_iters=cfg["scheme"]["max_iters"])
    rows = steady_state_study(study, workers=fft_workers(),
                              keep_states=cfg["output"]["save_final"])
    out = Outputs(args.out or cfg["output"]["dir"], exp["run_id"])
    write_rows(out.path(f"{out.run_id}_study.csv"), STUDY_COLUMNS,
               [(r.h, r.iterations, r.components, r.hull_error, r.area_fraction_final)
                for r in rows])
    for r in rows:
        if r.final is not None:
            save_phase(out.path(f"{out.run_id}_h{r.h:g}.pgm"), r.final)
        print(f"h={r.h:g}: {r.components} component(s), hull error {r.hull_error:.4f}, "
              f"regime {r.regime}")
    out.manifest(echo(cfg), exp["seed"], started, "steady_state"
                 if all(r.termination == "steady_state" for r in rows) else "max_iters")
    return EXIT_OK


def cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",") if s]
    rows = bench(sizes, h=args.h, iters=args.iters)
    table = [(r.n, r.N, r.seconds_per_iter) for r in rows]
    if args.out:
        write_rows(args.out, BENCH_COLUMNS, table)
    else:
        print(",".join(BENCH_COLUMNS))
        for row in table:
            print(",".join(repr(x) if isinstance(x, float) else str(x) for x in row))
    if len(rows) > 1:
        print(f"log-log slope {loglog_slope(rows):.3f}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    ok = True
    for name in names:
        kwargs = {}
        if args.instances is not None:
            key = {"minimizer": "instances", "spectral": "fields",
                   "monotonicity": "pairs", "volume": "runs"}[name]
            kwargs[key] = args.instances
        result = SUITES[name](seed=args.seed, **kwargs)
        print(result.line())
        for note in result.notes[:10]:
            print("   ", note)
        ok &= result.ok
    return EXIT_OK if ok else EXIT_RUNTIME


def cmd_render(args) -> int:
    u = load_phase(args.state)
    phi = load_mask(args.phi) if args.phi else None
    psi = load_mask(args.psi) if args.psi else None
    for mask in (phi, psi):
        if mask is not None and mask.shape != u.shape:
            raise FormatError("obstacle mask does not match the state dimensions")
    write_pgm(args.out, render(u, phi, psi))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="obstacle-mbo",
                                description="Thresholding schemes for mean curvature flow "
                                            "with obstacles.")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    for name, fn, help_ in (("run", cmd_run, "run the scheme from a JSON config"),
                            ("invasion", cmd_invasion, "random-disk invasion run"),
                            ("study", cmd_study, "three-disk steady-state study")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("config")
        s.add_argument("--out", help="output directory (overrides output.dir)")
        s.set_defaults(func=fn)

    s = sub.add_parser("bench", help="time one step on grids of increasing size")
    s.add_argument("--sizes", default="256,512,1024,2048",
                   help="comma-separated grid sides, ascending")
    s.add_argument("--iters", type=int, default=100)
    s.add_argument("--h", type=float, default=1e-4)
    s.add_argument("--out", help="CSV file (default: stdout)")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("verify", help="run the self-check suites")
    s.add_argument("suite", nargs="?", default="all", choices=[*SUITES, "all"])
    s.add_argument("--instances", type=int, help="instances / fields / pairs / runs")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("render", help="render a snapshot with optional obstacle outlines")
    s.add_argument("state")
    s.add_argument("out")
    s.add_argument("--phi", help="inner obstacle mask (PGM)")
    s.add_argument("--psi", help="outer obstacle mask (PGM)")
    s.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ObstacleOverlap as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FormatError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
