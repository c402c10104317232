"""Command line entry point: ``chpeakon run|audit|verify-n0|selftest``."""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import diagnostics as dg
from . import modulation as mo
from .config import ConfigError, DEFAULTS, load_config, parse_config
from .field_solver import FieldTrajectory
from .measures import read_field_csv

log = logging.getLogger("chpeakon")


def _run_one(args):
    path, out = args
    from .scenarios import run_scenario
    cfg = load_config(path)
    report = run_scenario(cfg, out)
    return path, report.out_dir, report.ok, report.aborted, [c.line() for c in report.checks]


def cmd_run(ns) -> int:
    jobs = []
    try:
        for path in ns.configs:
            load_config(path)  # fail fast on bad files
    except (ConfigError, OSError) as exc:
        print(f"{path}: {exc}", file=sys.stderr)
        return 2
    for path in ns.configs:
        if ns.out is None:
            out = None
        elif len(ns.configs) == 1:
            out = ns.out
        else:
            out = os.path.join(ns.out, os.path.splitext(os.path.basename(path))[0])
        jobs.append((path, out))
    if ns.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=ns.jobs) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    ok = True
    for path, out, passed, aborted, lines in results:
        ok &= passed
        if not ns.quiet:
            print(f"== {path} -> {out}")
            if aborted:
                print(f"aborted: {aborted}")
            for line in lines:
                print(line)
    return 0 if ok else 1


def read_header(path) -> list[str]:
    lines = []
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            lines.append(line[1:].strip())
    return lines


def load_snapshots(directory) -> tuple[FieldTrajectory, list[str]]:
    """Stored field snapshots listed in ``fields/index.csv``."""
    fields = os.path.join(directory, "fields")
    index = os.path.join(fields, "index.csv")
    header = read_header(index)
    with open(index, newline="") as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    snaps = [read_field_csv(os.path.join(fields, row["file"])) for row in rows]
    times = np.array([float(row["t"]) for row in rows])
    samples = np.array([s.samples for s in snaps])
    return FieldTrajectory(snaps[0].grid, times, samples), header


def cmd_audit(ns) -> int:
    ft, header = load_snapshots(ns.directory)
    cfg_lines = [h for h in header if not h.startswith("n0 =")]
    n0_line = [h for h in header if h.startswith("n0 =")]
    try:
        cfg = parse_config("\n".join(cfg_lines))
    except ConfigError:
        cfg = None
    n0 = ns.n0 or (int(n0_line[0].split("=")[1]) if n0_line else mo.select_n0())
    defaults = DEFAULTS["monotonicity_audit"]
    R_values = ns.R or (cfg.get("R") if cfg and cfg.get("R") else defaults["R"])
    c = cfg.get("c", 1.0) if cfg else 1.0
    gammas = ns.gamma or (cfg.get("gamma") if cfg and cfg.get("gamma") else [0.0, 0.5 * c])
    zf = cfg.get("z_speed_fraction", 0.5) if cfg else 0.5
    track = mo.track(ft, n0, reseed=True)
    if track.lost_at is not None:
        print(f"modulation lost at t={track.lost_at}", file=sys.stderr)
        return 1
    from .scenarios import audit_suite
    summaries, K0 = audit_suite(ft, track.x, R_values, gammas, zf)
    out = ns.out or ns.directory
    os.makedirs(out, exist_ok=True)
    ok = True
    for s in summaries:
        tag = f"R{s.R:g}_g{s.gamma:g}"
        dg.write_audit_csv(os.path.join(out, f"audit_{tag}.csv"), s.reports[-1],
                           header + [f"audit_n0 = {n0}"])
        bound = K0 * np.exp(-s.R / 6.0)
        passed = s.worst_increase <= bound and s.worst_left_drop <= bound
        ok &= passed
        if not ns.quiet:
            print(f"CHECK audit_{tag} {'PASS' if passed else 'FAIL'} "
                  f"{max(s.worst_increase, s.worst_left_drop):.6g} {bound:.6g}")
    return 0 if ok else 1


def cmd_verify_n0(ns) -> int:
    n0 = ns.n0 if ns.n0 is not None else mo.select_n0()
    rep = mo.verify_n0(n0)
    if not ns.quiet:
        print(f"n0 = {rep.n0}")
        print(f"monotone = {rep.monotone}")
        print(f"min_slope = {rep.min_slope:.6g}")
        print(f"bound = {mo.SLOPE_BOUND:.6g}")
        print(f"admissible = {rep.admissible}")
    return 0 if rep.admissible else 1


def cmd_selftest(ns) -> int:
    from .selftest import run_selftest
    lines, ok = run_selftest()
    if not ns.quiet:
        for line in lines:
            print(line)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chpeakon",
                                 description="Peakon dynamics experiments for the "
                                             "Camassa-Holm equation.")
    ap.add_argument("--quiet", action="store_true", help="print nothing but errors")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run scenario config files")
    p.add_argument("configs", nargs="+")
    p.add_argument("--out", help="output directory (one subdirectory per config if several)")
    p.add_argument("--jobs", type=int, default=1, help="scenarios run concurrently")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("audit", help="monotonicity audit of stored field snapshots")
    p.add_argument("directory")
    p.add_argument("--out")
    p.add_argument("--n0", type=int)
    p.add_argument("--R", type=float, nargs="+")
    p.add_argument("--gamma", type=float, nargs="+")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("verify-n0", help="admissibility of the mollifier index n0")
    p.add_argument("--n0", type=int)
    p.set_defaults(func=cmd_verify_n0)

    p = sub.add_parser("selftest", help="fast consistency checks")
    p.set_defaults(func=cmd_selftest)

    # flags accepted after the subcommand too
    for name, sp in sub.choices.items():
        sp.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
        if name != "run":
            sp.add_argument("--jobs", type=int, default=1, help=argparse.SUPPRESS)
    return ap


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if ns.verbose else
                        logging.ERROR if ns.quiet else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return ns.func(ns)


if __name__ == "__main__":
    sys.exit(main())
