"""Command-line front end.

    ppm-demod error-rates --M 4 --pd 1e-5 --receivers dd,helstrom,cpn,type1,type2
    ppm-demod optimize --mode type2 --n-min 0.05 --n-max 3 --steps 60
    ppm-demod simulate --receiver cpn --M 4 --N 1 --trials 1000000 --seed 7
    ppm-demod capacity --family ppm-cpn-zero --m-list 4,8,16,32
    ppm-demod verify --quick

Exit status: 0 ok, 1 usage error, 2 statistical or verification failure.
Settings may also come from ``--config file.json`` whose keys mirror the
flag names; explicit flags win over the file, the file over the defaults.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Sequence

import numpy as np

from .analytic import dd_error, helstrom_ppm, symbol_error
from .capacity import DEFAULT_M_LIST, DEFAULT_MULTIPLIERS, FAMILIES, efficiency_sweep
from .core import DetectorModel, DomainError, ModulationConfig, NullingPolicy
from .optimizer import DEFAULT_GAIN_MAX, optimize_policy
from .simulator import ReceiverSpec, channel_matrix, simulate, worker_count
from .verify import run_checks

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_FAILURE = 0, 1, 2
Z_LIMIT = 4.0
RECEIVERS = ("dd", "helstrom", "cpn", "type1", "type2")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_csv(out, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def n_grid(args) -> np.ndarray:
    if args.steps < 1:
        raise UsageError("--steps must be >= 1")
    if args.n_min < 0 or args.n_max < args.n_min:
        raise UsageError("need 0 <= --n-min <= --n-max")
    if args.steps == 1:
        return np.array([float(args.n_min)])
    if args.scale == "geometric":
        if args.n_min <= 0:
            raise UsageError("a geometric grid needs --n-min > 0")
        return np.geomspace(args.n_min, args.n_max, args.steps)
    return np.linspace(args.n_min, args.n_max, args.steps)


def _split(value) -> List[str]:
    if isinstance(value, (list, tuple)):
        return [str(v).strip() for v in value]
    return [v.strip() for v in str(value).split(",") if v.strip()]


def _ordered_map(fn: Callable, items: Sequence) -> list:
    # output order follows the grid, never completion order
    workers = min(worker_count(), max(len(items), 1))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _detector(args) -> DetectorModel:
    return DetectorModel(eta=args.eta, pd=args.pd)


def emit(args, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            write_csv(fh, header, rows)
    else:
        write_csv(sys.stdout, header, rows)


# --- commands ---------------------------------------------------------------


def cmd_error_rates(args) -> int:
    receivers = _split(args.receivers)
    unknown = [r for r in receivers if r not in RECEIVERS]
    if unknown or not receivers:
        raise UsageError(f"unknown receiver(s) {unknown}; choose from {', '.join(RECEIVERS)}")
    det = _detector(args)
    grid = n_grid(args)

    def row(N: float) -> list:
        cfg = ModulationConfig(args.M, float(N))
        out = [float(N)]
        for r in receivers:
            if r == "dd":
                out.append(dd_error(cfg, det))
            elif r == "helstrom":
                # loss before the receiver rescales the received photon number
                out.append(helstrom_ppm(args.M, det.eta * N))
            elif r == "cpn":
                out.append(symbol_error(cfg, NullingPolicy.baseline(), det))
            else:
                out.append(optimize_policy(cfg, det, r, gain_max=args.gain_max).p_error_star)
        return out

    emit(args, ["N", *receivers], _ordered_map(row, list(grid)))
    return EXIT_OK


def cmd_optimize(args) -> int:
    det = _detector(args)

    def row(N: float) -> list:
        res = optimize_policy(ModulationConfig(args.M, float(N)), det, args.mode, gain_max=args.gain_max)
        return [float(N), res.n0_star, res.gain_star, res.p_error_star, res.evaluations, res.converged]

    rows = _ordered_map(row, list(n_grid(args)))
    emit(args, ["N", "n0_star", "gain_star", "p_error_star", "evaluations", "converged"], rows)
    return EXIT_OK


def _simulation_policy(args, cfg: ModulationConfig, det: DetectorModel) -> NullingPolicy:
    if args.receiver == "cpn":
        return NullingPolicy.baseline()
    if args.receiver == "type1":
        if args.n0 is not None:
            return NullingPolicy.type1(args.n0)
    elif args.n0 is not None or args.gain is not None:
        return NullingPolicy.type2(args.n0 or 0.0, args.gain or 1.0)
    return optimize_policy(cfg, det, args.receiver).policy


def cmd_simulate(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    cfg = ModulationConfig(args.M, args.N)
    det = _detector(args)
    kind = "dd" if args.receiver == "dd" else "cpn"
    policy = _simulation_policy(args, cfg, det) if kind == "cpn" else NullingPolicy.baseline()
    spec = ReceiverSpec(kind, cfg, det, policy, include_zero_codeword=args.zero_codeword, erasure_output=args.erasure)
    est, confusion = simulate(spec, args.trials, args.seed, shards=args.shards)

    if args.zero_codeword or args.erasure:
        reference, source = channel_matrix(spec).error_probability(), "exact path sum"
    elif kind == "dd":
        reference, source = dd_error(cfg, det), "closed form"
    else:
        reference, source = symbol_error(cfg, policy, det), "closed form"
    z = est.z_score(reference)

    print(f"receiver: {args.receiver} (n0={policy.n0:.6g}, gain={policy.gain:.6g})  M={cfg.M} N={cfg.N:g} eta={det.eta:g} pd={det.pd:g}")
    print(f"trials: {est.trials}  seed: {est.seed}")
    print(f"p_hat = {est.p_hat:.6f} +/- {est.std_err:.6f}")
    print(f"reference ({source}) = {reference:.6f}")
    print(f"z = {z:+.3f}")
    if args.confusion:
        if confusion is None:
            logger.warning("some input symbol was never drawn; confusion matrix not written")
        else:
            with open(args.confusion, "w", encoding="utf-8", newline="") as fh:
                header = ["input"] + [f"out{j}" for j in range(confusion.outputs)]
                write_csv(fh, header, ([k, *confusion.entries[k]] for k in range(confusion.inputs)))
    if not abs(z) <= Z_LIMIT:
        print(f"FAIL: |z| > {Z_LIMIT:g}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def cmd_capacity(args) -> int:
    try:
        m_list = [int(m) for m in _split(args.m_list)]
        multipliers = [float(x) for x in _split(args.multipliers)]
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    points = efficiency_sweep(
        args.family, m_list, list(n_grid(args)), _detector(args), tol=args.tol, multipliers=multipliers
    )
    points = sorted(points, key=lambda p: (p.N, p.M))
    header = ["family", "M", "N", "bits_per_symbol", "photon_eff", "spectral_eff", "pulse_N", "zero_prior", "envelope"]
    rows = (
        [p.family, p.M, p.N, p.bits_per_symbol, p.photon_eff, p.spectral_eff, p.pulse_N, p.zero_prior, p.envelope]
        for p in points
    )
    emit(args, header, rows)
    return EXIT_OK


def cmd_verify(args) -> int:
    outcomes = run_checks(quick=args.quick)
    width = max(len(o.name) for o in outcomes)
    for o in outcomes:
        status = "PASS" if o.ok else "FAIL"
        budget = "" if o.seconds <= o.budget_s else f" (over {o.budget_s:g}s budget)"
        print(f"{status}  {o.seconds:7.2f}s  {o.name:<{width}}  {o.detail}{budget}")
    failed = sum(not o.ok for o in outcomes)
    print(f"{len(outcomes) - failed}/{len(outcomes)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_FAILURE


# --- parser -----------------------------------------------------------------


def _grid_flags(p, n_min, n_max, steps, scale) -> None:
    p.add_argument("--n-min", type=float, default=n_min)
    p.add_argument("--n-max", type=float, default=n_max)
    p.add_argument("--steps", type=int, default=steps)
    p.add_argument("--scale", choices=("linear", "geometric"), default=scale)


def _detector_flags(p) -> None:
    p.add_argument("--eta", type=float, default=1.0, help="detector quantum efficiency")
    p.add_argument("--pd", type=float, default=0.0, help="per-slot dark-click probability")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file with flag values")
    common.add_argument("-o", "--output", help="write CSV here instead of stdout")

    parser = _Parser(prog="ppm-demod", description="PPM receiver error rates, simulation and capacities.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("error-rates", parents=[common], help="symbol error rate versus N (CSV)")
    p.add_argument("--M", type=int, default=4)
    _detector_flags(p)
    _grid_flags(p, 0.0, 10.0, 200, "linear")
    p.add_argument("--receivers", default="dd,helstrom,cpn,type1,type2")
    p.add_argument("--gain-max", type=float, default=DEFAULT_GAIN_MAX)
    p.set_defaults(func=cmd_error_rates)

    p = sub.add_parser("optimize", parents=[common], help="optimal nulling residue and PSA gain (CSV)")
    p.add_argument("--M", type=int, default=4)
    _detector_flags(p)
    _grid_flags(p, 0.05, 3.0, 60, "linear")
    p.add_argument("--mode", choices=("type1", "type2"), default="type2")
    p.add_argument("--gain-max", type=float, default=DEFAULT_GAIN_MAX)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo check against the closed forms")
    p.add_argument("--receiver", choices=("dd", "cpn", "type1", "type2"), default="cpn")
    p.add_argument("--M", type=int, default=4)
    p.add_argument("--N", type=float, default=1.0)
    _detector_flags(p)
    p.add_argument("--trials", type=int, default=10**6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shards", type=int, default=None)
    p.add_argument("--n0", type=float, default=None)
    p.add_argument("--gain", type=float, default=None)
    p.add_argument("--zero-codeword", action="store_true")
    p.add_argument("--erasure", action="store_true", help="send the all-silent outcome to its own output")
    p.add_argument("--confusion", help="write the empirical confusion matrix CSV here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("capacity", parents=[common], help="photon/spectral efficiency tradeoff (CSV)")
    p.add_argument("--family", required=True, help=f"one of {', '.join(FAMILIES)}")
    p.add_argument("--m-list", default=",".join(str(m) for m in DEFAULT_M_LIST))
    _detector_flags(p)
    _grid_flags(p, 0.01, 10.0, 40, "geometric")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--multipliers", default=",".join(str(x) for x in DEFAULT_MULTIPLIERS),
                   help="photon-cost multipliers (bits/photon) for the zero-codeword families")
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("verify", parents=[common], help="run the acceptance and invariant checks")
    p.add_argument("--quick", action="store_true")
    p.set_defaults(func=cmd_verify)

    parser.subparsers = sub.choices
    return parser


def _apply_config(parser, argv: Sequence[str], args) -> argparse.Namespace:
    try:
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    sub = parser.subparsers[args.command]
    known = {a.dest for a in sub._actions}
    values = {}
    for key, value in data.items():
        dest = key.lstrip("-").replace("-", "_")
        if dest not in known or dest in ("config", "help"):
            raise UsageError(f"unknown config key {key!r}")
        values[dest] = value
    sub.set_defaults(**values)
    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.config:
            args = _apply_config(parser, argv, args)
        return args.func(args)
    except (UsageError, DomainError) as exc:
        print(f"ppm-demod {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
