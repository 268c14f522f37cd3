"""Command line entry point ``sigff``.

Exit codes: 0 success, 1 a check failed, 2 bad configuration or input,
3 a resource cap was hit.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, SigffError
from ..extremal import m_centering
from ..fields.dgff import sample_dgff
from ..fields.inhomogeneous import inhomogeneous_operator, sample_inhomogeneous
from ..fields.threefield import calibrate_three_field
from ..fields.profile import VarianceProfile
from ..greenfn import green_table
from ..lattice import GridSpec
from ..sampler import RngStream
from .config import load_config, parse_profile
from .experiments import run_experiment
from .io import REPORT_COLUMNS, dump_field, file_digest, write_csv

SEED_ENV = "SIGFF_SEED"


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        raise ConfigurationError(f"no seed: pass --seed or set {SEED_ENV}")
    try:
        return int(env)
    except ValueError:
        raise ConfigurationError(f"{SEED_ENV}={env!r} is not an integer") from None


def _print_rows(rows):
    w = max(len(str(r[0])) for r in rows) if rows else 0
    for r in rows:
        print(f"{str(r[0]):<{w}}  statistic={r[1]}  bound={r[5]}  {r[6]}")


def cmd_sample(args) -> int:
    spec = GridSpec(args.N)
    stream = RngStream(_seed(args), ("cli", "sample"))
    size = None if args.replicas == 1 else args.replicas
    if args.profile == "dgff":
        fs = sample_dgff(spec, stream, size=size)
    else:
        fs = sample_inhomogeneous(spec, parse_profile(args.profile, args.override), stream, size=size)
    if not args.underlying:
        fs = type(fs)(fs.spec, fs.heights, None, fs.tag)
    Path(args.output).write_bytes(dump_field(fs))
    print(f"wrote {fs.replicas} field(s) of side {args.N} to {args.output}")
    return 0


def cmd_experiment(args) -> int:
    overrides = {"seed": args.seed if args.seed is not None else os.environ.get(SEED_ENV)}
    overrides.update({"replicas": args.replicas, "output": args.output, "workers": args.workers})
    cfg = load_config(args.config, overrides)
    res = run_experiment(cfg)
    _print_rows(res.rows)
    if res.failed:
        print(f"{len(res.failed)} replicas failed; see {res.manifest}", file=sys.stderr)
    print(f"outputs in {cfg.output}")
    return 0 if res.passed else 1


def cmd_calibrate(args) -> int:
    spec = GridSpec(args.N)
    profile = parse_profile(args.profile, args.override)
    calib = calibrate_three_field(spec, args.K, args.L, args.Kp, args.Lp, profile)
    res = float(np.abs(calib.residual()).max())
    rows = [
        ["alpha", calib.alpha, None, None, None, None, "INFO"],
        ["variance_residual", res, None, None, None, 1e-6, "PASS" if res <= 1e-6 else "FAIL"],
        ["representative", f"{calib.representative[0]}:{calib.representative[1]}", None, None, None, None, "INFO"],
    ]
    if args.output:
        write_csv(Path(args.output), REPORT_COLUMNS, rows)
    _print_rows(rows)
    return 0 if res <= 1e-6 else 1


def _check_green():
    gt = green_table([(x, y) for x in range(3) for y in range(3)])
    val = float(gt((1, 1), (1, 1)))
    ok = abs(val - 3 * math.pi / 4) <= 1e-9
    return ["green_center_V3", val, None, None, None, 3 * math.pi / 4, "PASS" if ok else "FAIL"]


def _check_centering():
    vals = [(16, 5.2902), (256, 10.6621)]
    ok = all(round(m_centering(N), 4) == v for N, v in vals)
    return ["centering", m_centering(16), None, None, None, 5.2902, "PASS" if ok else "FAIL"]


def _check_homogeneous():
    worst = 0.0
    for N in (8, 16, 32):
        op = inhomogeneous_operator(GridSpec(N), VarianceProfile.homogeneous())
        # dense Cholesky solve, independent of the spectral route used by the operator
        dense = green_table([(a, b) for a in range(N) for b in range(N)]).matrix
        worst = max(worst, float(np.abs(op.covariance - dense).max()))
    return ["homogeneous_reduction", worst, None, None, None, 1e-8, "PASS" if worst <= 1e-8 else "FAIL"]


CHECKS = {"green": _check_green, "centering": _check_centering, "homogeneous": _check_homogeneous}


def cmd_check(args) -> int:
    names = list(CHECKS) if args.name == "all" else [args.name]
    rows = [CHECKS[n]() for n in names]
    _print_rows(rows)
    return 0 if all(r[-1] == "PASS" for r in rows) else 1


def cmd_report(args) -> int:
    out = Path(args.directory)
    try:
        manifest = json.loads((out / "manifest.json").read_text())
    except (OSError, ValueError) as exc:
        raise ConfigurationError(f"cannot read manifest in {out}: {exc}") from None
    ok = True
    for name, digest in manifest["outputs"].items():
        path = out / name
        actual = file_digest(path) if path.exists() else None
        if actual != digest:
            print(f"{name}: digest mismatch", file=sys.stderr)
            ok = False
    print(f"kind={manifest['config']['kind']} seed={manifest['seed']} hash={manifest['config_hash'][:16]}")
    print((out / "report.csv").read_text(), end="")
    if manifest["failed_replicas"]:
        print(f"failed replicas: {len(manifest['failed_replicas'])}")
        ok = False
    verdicts = (out / "report.csv").read_text().splitlines()[1:]
    ok = ok and not any(line.endswith(",FAIL") for line in verdicts)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sigff", description="Scale-inhomogeneous Gaussian free field experiments.")
    p.add_argument("--seed", type=int, default=None, help=f"root seed (falls back to ${SEED_ENV})")
    # the seed may also follow the subcommand; SUPPRESS keeps an absent flag
    # from overwriting one given before it
    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=int, default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample", parents=[seeded], help="draw fields and write them in the binary SIGF format")
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--profile", default="two-scale", help="dgff, homogeneous, two-scale or two-scale:low,high,split")
    s.add_argument("--override", action="store_true", help="skip strict profile validation")
    s.add_argument("--replicas", type=int, default=1)
    s.add_argument("--underlying", action="store_true", help="also store the underlying DGFF")
    s.add_argument("--output", required=True)
    s.set_defaults(func=cmd_sample)

    e = sub.add_parser("experiment", help="configured experiments")
    esub = e.add_subparsers(dest="action", required=True)
    r = esub.add_parser("run", parents=[seeded], help="run an experiment from an INI file")
    r.add_argument("config")
    r.add_argument("--replicas", type=int, default=None)
    r.add_argument("--output", default=None)
    r.add_argument("--workers", type=int, default=None)
    r.set_defaults(func=cmd_experiment)

    c = sub.add_parser("calibrate", help="three-field variance matching")
    c.add_argument("--N", type=int, required=True)
    for name, default in (("K", 2), ("L", 2), ("Kp", 4), ("Lp", 4)):
        c.add_argument(f"--{name}", type=int, default=default)
    c.add_argument("--profile", default="two-scale")
    c.add_argument("--override", action="store_true")
    c.add_argument("--output", default=None)
    c.set_defaults(func=cmd_calibrate)

    k = sub.add_parser("check", help="fast analytic checks")
    k.add_argument("name", choices=[*CHECKS, "all"])
    k.set_defaults(func=cmd_check)

    rp = sub.add_parser("report", help="print a finished run and verify its manifest")
    rp.add_argument("directory")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SigffError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except MemoryError as exc:
        print(f"error: out of memory: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
