"""
Command-line front end.

Exit codes: 0 success, 1 invalid input, 2 numerical or capacity failure,
3 a verification suite failed.  Multi-worker sampling runs are reproducible
in distribution only; with ``--workers 1`` the output is a deterministic
function of the seed.  The SYMFIELD_SEED environment variable overrides
``--seed``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import Sequence

import numpy as np

from . import acceptance
from . import limit_engine as le
from .coverings import Polygon, monodromy, sample_covering, wilson_statistics
from .diagrams import Partition
from .errors import CapacityError, NotReducible, NumericalError, ValidationError
from .master_field import LassoWord, analytic_eval, mc_wilson
from .walk_sim import FiniteClass, estimate


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def emit(rows: list[dict], fmt: str, out) -> None:
    """Write a table as CSV (17 significant digits) or as a JSON array."""
    if fmt == "json":
        out.write(json.dumps(rows, default=_json_default) + "\n")
        return
    if not rows:
        return
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = list(rows[0])
    writer.writerow(header)
    for r in rows:
        writer.writerow([_fmt(r[h]) for h in header])
    out.write(buf.getvalue())


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _load_json(text: str):
    if os.path.exists(text):
        with open(text) as fh:
            text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON: {exc}") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ValidationError(f"bad number list {text!r}") from exc


def _grid(text: str) -> list[float]:
    try:
        a, b, step = (float(x) for x in text.split(":"))
    except ValueError as exc:
        raise ValidationError("grid must be a:b:step") from exc
    if step <= 0 or b < a:
        raise ValidationError("grid needs a <= b and step > 0")
    n = int(round((b - a) / step))
    return [a + i * step for i in range(n + 1)]


def _seed(args) -> int | None:
    env = os.environ.get("SYMFIELD_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ValidationError("SYMFIELD_SEED must be an integer") from exc
    return args.seed


def _load_loop(text: str):
    data = _load_json(text)
    if isinstance(data, dict) and "vertices" in data:
        return Polygon.from_json(data)
    if isinstance(data, dict) and "word" in data:
        return LassoWord.from_json(data)
    raise ValidationError("loop JSON must be a polygon or a lasso word")


# -- handlers ---------------------------------------------------------------------------


def cmd_limit(args, out):
    lc = le.LimitClass.from_json(_load_json(args.lclass))
    what = args.what
    if what == "moments":
        rows = []
        for t in _float_list(args.t):
            m = le.exclusive_moments(t, lc, args.nmax)
            rows += [{"n": n + 1, "t": t, "value": float(v)} for n, v in enumerate(m)]
        emit(rows, args.format, out)
    elif what == "measure":
        rows = []
        for t in _float_list(args.t):
            sm = le.spectral_measure(t, lc, tol=args.tol)
            order = sorted(sm.atom_weights)
            shown, hidden = order[: args.nmax], order[args.nmax:]
            rows += [{"n": n, "t": t, "value": sm.atom_weights[n]} for n in shown]
            # atomic mass of every order not listed above
            tail = math.fsum([sm.tail_mass] + [sm.atom_weights[n] for n in hidden])
            rows.append({"n": "tail", "t": t, "value": tail})
            rows.append({"n": "lebesgue", "t": t, "value": sm.lebesgue_weight})
        emit(rows, args.format, out)
    elif what == "tc":
        emit([{"t_c": le.critical_time(lc)}], args.format, out)
    elif what == "distance":
        emit([{"t": t, "value": le.mean_distance(t, lc, args.tol)} for t in _grid(args.t_grid)], args.format, out)
    elif what == "ode":
        rows = []
        for t in _float_list(args.t):
            table = le.ode_evolve(lc, args.kmax, t)
            for mu, v in table.rows():
                if mu:
                    rows.append({"cycle_type": "-".join(map(str, mu)), "t": t, "value": v})
        emit(rows, args.format, out)
    elif what == "logcumulant":
        p = Partition.from_json(_load_json(args.partition))
        emit([{"partition": json.dumps(p.to_json()), "log_cumulant": le.log_cumulant(p, lc),
               "generator_limit": le.generator_limit(p, lc)}], args.format, out)
    return 0


def cmd_simulate(args, out):
    c = FiniteClass.from_json(_load_json(args.class_finite))
    names = args.observable or ["fixed_fraction"]
    rows = []
    for t in _float_list(args.t):
        res = estimate(c, t, args.samples, names, rng=_seed(args), workers=args.workers)
        for name in names:
            e = res[name]
            rows.append({"observable": name, "t": t, "mean": e.mean, "stderr": e.stderr,
                         "variance": e.variance, "samples": e.samples})
    emit(rows, args.format, out)
    return 0


def cmd_master(args, out):
    w = LassoWord.from_json(_load_json(args.word))
    if args.what == "eval":
        emit([{"value": analytic_eval(w)}], args.format, out)
    else:
        e = mc_wilson(w, args.N, args.samples, rng=_seed(args), workers=args.workers)
        emit([{"N": args.N, "mean": e.mean, "stderr": e.stderr, "samples": e.samples}], args.format, out)
    return 0


def cmd_cover(args, out):
    loop = _load_loop(args.loop)
    rng = np.random.default_rng(_seed(args))
    if args.what == "sample":
        if isinstance(loop, Polygon):
            s = sample_covering(args.N, None, rng, avoid=loop)
        else:
            s = sample_covering(args.N, loop.areas, rng)
        perm = monodromy(loop, s)
        rec = {
            "N": args.N,
            "points": s.size,
            "transpositions": s.transpositions.tolist(),
            "positions": None if s.positions is None else s.positions.tolist(),
            "monodromy": perm.tolist(),
        }
        out.write(json.dumps(rec, default=_json_default) + "\n")
        return 0
    ws = wilson_statistics(loop, args.N, args.samples, rng, n_max=args.nmax)
    rows = [{"observable": "fixed_fraction", "mean": ws.fixed_fraction.mean, "stderr": ws.fixed_fraction.stderr}]
    rows += [{"observable": f"m:{n}", "mean": e.mean, "stderr": e.stderr} for n, e in ws.cycle_moments.items()]
    emit(rows, args.format, out)
    return 0


def cmd_verify(args, out):
    try:
        keys = acceptance.suite_keys(args.suite)
    except KeyError:
        raise ValidationError(f"unknown suite {args.suite!r}; choose all, 1..11 or one of {sorted(acceptance.ALIASES)}")
    failed = 0
    for key in keys:
        res = acceptance.run_check(key)
        out.write(res.line() + "\n")
        out.flush()
        failed += not res.passed
    out.write(f"{len(keys) - failed}/{len(keys)} criteria passed\n")
    return 3 if failed else 0


# -- parser -------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=["csv", "json"], default="csv")
    common.add_argument("--seed", type=int, default=None, help="base seed (SYMFIELD_SEED overrides)")
    common.add_argument("--workers", type=int, default=1,
                        help="worker processes; >1 is reproducible in distribution, not bitwise")

    p = _Parser(prog="symfield", description="Random walks on symmetric groups: simulation and large-N limits.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    lim = sub.add_parser("limit", help="large-N quantities")
    lsub = lim.add_subparsers(dest="what", required=True, parser_class=_Parser)
    for name in ("moments", "measure", "tc", "distance", "ode", "logcumulant"):
        q = lsub.add_parser(name, parents=[common])
        q.add_argument("--class", dest="lclass", required=True, help='e.g. {"alpha":0,"lambda":{"2":1}}')
        if name in ("moments", "measure", "ode"):
            q.add_argument("--t", required=True, help="comma-separated times")
        if name in ("moments", "measure"):
            q.add_argument("--nmax", type=int, default=10)
        if name in ("measure", "distance"):
            q.add_argument("--tol", type=float, default=1e-9)
        if name == "distance":
            q.add_argument("--t-grid", required=True, help="a:b:step")
        if name == "ode":
            q.add_argument("--kmax", type=int, default=4)
        if name == "logcumulant":
            q.add_argument("--partition", required=True, help="e.g. [[1,-2],[2,-1]]")
        q.set_defaults(func=cmd_limit)

    sim = sub.add_parser("simulate", help="finite-N Monte Carlo")
    ssub = sim.add_subparsers(dest="what", required=True, parser_class=_Parser)
    q = ssub.add_parser("walk", parents=[common])
    q.add_argument("--class-finite", required=True, help='e.g. {"N":100,"cycles":{"2":2}}')
    q.add_argument("--t", required=True)
    q.add_argument("--samples", type=int, default=10_000)
    q.add_argument("--observable", action="append",
                   help="fixed_fraction, normalized_distance, trace_distance, trace_distance_sq, jumps, m:<n>")
    q.set_defaults(func=cmd_simulate)

    mas = sub.add_parser("master", help="Wilson loops on lasso words")
    msub = mas.add_subparsers(dest="what", required=True, parser_class=_Parser)
    for name in ("eval", "mc"):
        q = msub.add_parser(name, parents=[common])
        q.add_argument("--word", required=True)
        q.add_argument("--N", type=int, default=500)
        q.add_argument("--samples", type=int, default=10_000)
        q.set_defaults(func=cmd_master)

    cov = sub.add_parser("cover", help="ramified covering monodromy")
    csub = cov.add_subparsers(dest="what", required=True, parser_class=_Parser)
    for name in ("sample", "wilson"):
        q = csub.add_parser(name, parents=[common])
        q.add_argument("--loop", required=True, help="polygon or lasso JSON")
        q.add_argument("--N", type=int, default=100)
        q.add_argument("--samples", type=int, default=1000)
        q.add_argument("--nmax", type=int, default=5)
        q.set_defaults(func=cmd_cover)

    ver = sub.add_parser("verify", help="run a named acceptance suite")
    ver.add_argument("suite", help="all, a criterion number, or a suite alias")
    ver.set_defaults(func=cmd_verify)
    return p


def run(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        for attr in ("samples", "N", "nmax", "kmax", "workers"):
            v = getattr(args, attr, None)
            if v is not None and v < 1:
                raise ValidationError(f"--{attr} must be positive")
        return args.func(args, out)
    except UsageError as exc:
        err.write(str(exc) + "\n")
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except ValidationError as exc:
        err.write(f"error: {exc}\n")
        return 1
    except (NumericalError, CapacityError, NotReducible) as exc:
        err.write(f"error: {exc}\n")
        return 2


def main() -> None:
    sys.exit(run())
