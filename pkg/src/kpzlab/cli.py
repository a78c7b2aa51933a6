"""Command-line front end: ``kpzlab <command> [options]``.

Numeric flags take a scalar or an inclusive range ``start:stop:step``.  Data
go to standard output (or ``--out``); progress goes to standard error.
Exit status: 0 on success, 1 on a numerical failure, 2 on a usage error.
"""

from __future__ import annotations

import argparse
import io
import itertools
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, asymptotics, ldp, moments, verify
from .errors import ConvergenceError, DomainError, EvaluationError, NumericalError, ParameterError
from .fredholm import (build_discretization, laplace_transform_value, nystrom_matrix, spectrum,
                       trace_exact)
from .kernel import KernelParams

COMMANDS = ("laplace", "trace", "moment", "decompose", "rate", "bounds", "nonunique", "verify",
            "sweep")
GRID_FLAGS = ("p", "t", "s", "y", "sigma")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    node_count: int = 300
    l_max: int = 6
    output_format: str = "csv"
    output_path: str | None = None
    threads: int = 1
    extra: dict = field(default_factory=dict)


def parse_grid(text, name="value"):
    """A scalar or an inclusive ``start:stop:step`` range, as a list of floats."""
    parts = text.split(":")
    try:
        nums = [float(v) for v in parts]
    except ValueError:
        raise UsageError(f"--{name}: cannot parse {text!r}") from None
    if not all(math.isfinite(v) for v in nums):
        raise UsageError(f"--{name}: values must be finite")
    if len(nums) == 1:
        return nums
    if len(nums) != 3:
        raise UsageError(f"--{name}: expected a scalar or start:stop:step, got {text!r}")
    start, stop, step = nums
    if step <= 0:
        raise UsageError(f"--{name}: step must be positive")
    if stop < start:
        raise UsageError(f"--{name}: stop must not be below start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    if count > 100000:
        raise UsageError(f"--{name}: range has too many points ({count})")
    return [start + i * step for i in range(count)]


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else _fmt(v)
    return v


def render(columns, rows, fmt, metadata):
    buf = io.StringIO()
    if fmt == "csv":
        buf.write(",".join(columns) + "\n")
        for row in rows:
            buf.write(",".join(_fmt(row[c]) for c in columns) + "\n")
    else:
        doc = {"metadata": metadata, "columns": list(columns),
               "rows": [{c: _jsonable(row[c]) for c in columns} for row in rows]}
        json.dump(doc, buf, indent=2, sort_keys=False)
        buf.write("\n")
    return buf.getvalue()


def _progress(msg):
    print(msg, file=sys.stderr, flush=True)


def _map_grid(fn, points, threads, label):
    """Evaluate ``fn`` on every grid point; results keep grid order."""
    total = len(points)

    def job(item):
        i, pt = item
        try:
            out = fn(*pt)
        except (ConvergenceError, NumericalError, EvaluationError, FloatingPointError) as exc:
            raise _PointFailure(pt, exc) from exc
        if total > 1:
            _progress(f"{label}: {i + 1}/{total}")
        return out

    items = list(enumerate(points))
    if threads <= 1 or total <= 1:
        return [job(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(job, items))


class _PointFailure(Exception):
    def __init__(self, point, exc):
        super().__init__(f"at grid point {point}: {exc}")
        self.point = point


def _require(cfg, *names):
    for n in names:
        if n not in cfg.params:
            raise UsageError(f"{cfg.command} needs --{n}")
    return [cfg.params[n] for n in names]


# ---------------------------------------------------------------------------
# commands


def cmd_laplace(cfg):
    s_grid, t_grid = _require(cfg, "s", "t")
    discs = {t: build_discretization(t, node_count=cfg.node_count) for t in t_grid}

    def one(s, t):
        p = KernelParams(s, t)
        spec = spectrum(p, discs[t])
        return {"s": s, "t": t, "det": laplace_transform_value(p, discs[t]),
                "largest_eigenvalue": spec.largest_eigenvalue}

    pts = list(itertools.product(s_grid, t_grid))
    return ["s", "t", "det", "largest_eigenvalue"], _map_grid(one, pts, cfg.threads, "laplace"), {}


def cmd_trace(cfg):
    s_grid, t_grid = _require(cfg, "s", "t")
    order = cfg.extra.get("order", 0)
    discs = {t: build_discretization(t, node_count=cfg.node_count) for t in t_grid}

    def one(s, t):
        p = KernelParams(s, t, order)
        return {"s": s, "t": t, "order": order,
                "trace_nystrom": float(np.trace(nystrom_matrix(p, discs[t]))),
                "trace_exact": trace_exact(p)}

    pts = list(itertools.product(s_grid, t_grid))
    cols = ["s", "t", "order", "trace_nystrom", "trace_exact"]
    return cols, _map_grid(one, pts, cfg.threads, "trace"), {}


def _moment_disc(cfg, t):
    if cfg.node_count == 300:
        return None
    return moments.moment_discretization(t, node_count=cfg.node_count)


def _log_abs(v):
    return math.log(abs(v)) if v != 0 else -math.inf


def cmd_moment(cfg):
    p_grid, t_grid = _require(cfg, "p", "t")
    discs = {t: _moment_disc(cfg, t) for t in t_grid}

    def one(p, t):
        log_m = moments.moment(p, t, discs[t])
        lead = moments.leading_term(p, t).log
        hat = moments.leading_term_hat(p, t)
        rem = math.exp(log_m) - math.exp(lead) + hat
        return {"p": p, "t": t, "log_moment": log_m, "log_leading": lead,
                "log_leading_hat": _log_abs(hat), "log_remainder_sum": _log_abs(rem)}

    pts = list(itertools.product(p_grid, t_grid))
    cols = ["p", "t", "log_moment", "log_leading", "log_leading_hat", "log_remainder_sum"]
    return cols, _map_grid(one, pts, cfg.threads, "moment"), {}


def cmd_decompose(cfg):
    p_grid, t_grid = _require(cfg, "p", "t")
    l_max = cfg.l_max
    discs = {t: _moment_disc(cfg, t) for t in t_grid}

    def one(p, t):
        d = moments.decompose(p, t, discs[t], l_max=l_max)
        row = {"p": p, "t": t, "n": d.n, "alpha": d.alpha, "leading": d.leading,
               "leading_hat": d.leading_hat, "tail_term": d.tail_term}
        for ell, b in enumerate(d.higher, start=2):
            row[f"B_{ell}"] = b
        row.update(total=d.total, reconstructed=d.reconstructed,
                   rel_error=abs(d.reconstructed - d.total) / abs(d.total))
        return row

    pts = list(itertools.product(p_grid, t_grid))
    cols = (["p", "t", "n", "alpha", "leading", "leading_hat", "tail_term"]
            + [f"B_{ell}" for ell in range(2, l_max + 1)]
            + ["total", "reconstructed", "rel_error"])
    return cols, _map_grid(one, pts, cfg.threads, "decompose"), {}


def cmd_rate(cfg):
    (y_grid,) = _require(cfg, "y")

    def one(y):
        r = ldp.rate_report(y)
        return {"y": y, "phi": r.phi, "chernoff": r.chernoff, "crossover": r.crossover}

    return ["y", "phi", "chernoff", "crossover"], _map_grid(one, [(y,) for y in y_grid], 1, "rate"), {}


def _bound_rows(rep, constant=None):
    c = rep.calibrated_constant if constant is None else constant
    rows = []
    for pt, lhs, rhs in rep.rows():
        rows.append({"name": rep.name, "point": " ".join(_fmt(v) for v in pt),
                     "lhs": lhs, "rhs": rhs, "constant": c, "pass": rep.satisfied})
    return rows


def cmd_bounds(cfg):
    t_grid = cfg.params.get("t", [1.0, 5.0, 20.0, 100.0])
    sigma_grid = cfg.params.get("sigma", [0.0, 0.1, 0.5, 2.0])
    reports = [asymptotics.airy_laplace_sandwich([0.5, 1.0, 2.0], t_grid)]
    for q in (0.5, 1.0, 2.0):
        rep = asymptotics.airy_laplace_partial(q, t_grid, [0.0, q * q / 16.0, math.inf])
        rep.name = f"airy_laplace_partial(q={q:g})"
        reports.append(rep)
    for n in (0, 1, 2):
        grid, lhs, rhs = [], [], []
        for sigma in sigma_grid:
            for t in (1.0, 4.0, 10.0):
                tr = trace_exact(KernelParams(math.exp(-t * sigma), t, n))
                grid.append((sigma, t))
                lhs.append(math.log(abs(tr)))
                rhs.append(asymptotics.log_trace_bound(sigma, t, n))
        reports.append(asymptotics.calibrate(f"trace_bound(n={n})", grid, lhs, rhs, cap=10.0,
                                             log_space=True))
    rows = []
    for rep in reports:
        # reports carry logarithms; the table shows the values
        for r in _bound_rows(rep):
            r["lhs"], r["rhs"] = math.exp(r["lhs"]), math.exp(r["rhs"])
            rows.append(r)
    consts = {rep.name: rep.calibrated_constant for rep in reports}
    return ["name", "point", "lhs", "rhs", "constant", "pass"], rows, {"calibrated_constants": consts}


def cmd_nonunique(cfg):
    y_grid = cfg.params.get("y", [0.05, 0.2, 0.5, 1.0, 3.0])
    blend = cfg.extra.get("blend", 0.0)
    rows = ldp.nonuniqueness_demo(y_grid, blend)
    for r in rows:
        r["blend"] = blend
    return ["y", "blend", "phi_plus_value", "blend_value", "difference"], rows, {}


def cmd_sweep(cfg):
    p_grid, t_grid = _require(cfg, "p", "t")
    pts = list(itertools.product(p_grid, t_grid))

    def one(p, t):
        lead = moments.leading_term(p, t).log
        log_m = moments.moment(p, t, _moment_disc(cfg, t)) if t <= moments.T_MAX else math.nan
        return {"p": p, "t": t, "log_moment": log_m, "log_leading": lead,
                "leading_rate": lead / t, "target_rate": p**3 / 12.0}

    cols = ["p", "t", "log_moment", "log_leading", "leading_rate", "target_rate"]
    return cols, _map_grid(one, pts, cfg.threads, "sweep"), {}


def cmd_verify(cfg):
    suite = cfg.extra.get("suite", "all")
    numbers = list(verify.CRITERIA) if suite == "all" else list(verify.FAST)
    results = verify.run(numbers)
    rows = []
    for res in results:
        for c in res.checks:
            rows.append({"criterion": res.number, "title": res.title, "check": c.label,
                         "value": c.value, "limit": c.limit, "pass": c.passed})
    meta = {"criteria": {str(r.number): r.passed for r in results}}
    return ["criterion", "title", "check", "value", "limit", "pass"], rows, meta


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="kpzlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"kpzlab {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    for name in GRID_FLAGS:
        parser.add_argument(f"--{name}", metavar="X|A:B:H")
    parser.add_argument("--nodes", type=int, default=300, help="Nystrom node count")
    parser.add_argument("--lmax", type=int, default=6, help="exterior powers kept")
    parser.add_argument("--order", type=int, default=0, help="kernel s-derivative (trace)")
    parser.add_argument("--blend", type=float, default=0.0, help="corridor blend (nonunique)")
    parser.add_argument("--suite", choices=("all", "fast"), default="all")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--out", default=None, help="output file (default stdout)")
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--timestamp", action="store_true",
                        help="record the wall-clock time in JSON metadata")
    return parser


def config_from_args(argv):
    args = build_parser().parse_args(argv)
    params = {}
    for name in GRID_FLAGS:
        text = getattr(args, name)
        if text is not None:
            params[name] = parse_grid(text, name)
    if not 10 <= args.nodes <= 2000:
        raise UsageError("--nodes must lie in [10, 2000]")
    if not 1 <= args.lmax <= 8:
        raise UsageError("--lmax must lie in [1, 8]")
    if args.threads < 1:
        raise UsageError("--threads must be positive")
    if not 0.0 <= args.blend <= 1.0:
        raise UsageError("--blend must lie in [0, 1]")
    extra = {"order": args.order, "blend": args.blend, "suite": args.suite,
             "timestamp": args.timestamp}
    return RunConfig(args.command, params, args.nodes, args.lmax, args.format, args.out,
                     args.threads, extra)


def _metadata(cfg, extra):
    meta = {"version": __version__, "command": cfg.command, "node_count": cfg.node_count,
            "l_max": cfg.l_max, "params": {k: list(v) for k, v in cfg.params.items()},
            "timestamp": None}
    if cfg.extra.get("timestamp"):
        import datetime
        meta["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    meta.update(extra)
    return meta


def run(cfg: RunConfig, stdout=None):
    """Execute ``cfg`` and write its table; returns the exit status."""
    stdout = stdout or sys.stdout
    try:
        cols, rows, extra = HANDLERS[cfg.command](cfg)
    except (UsageError, ParameterError, DomainError) as exc:
        print(f"kpzlab: usage error: {exc}", file=sys.stderr)
        return 2
    except _PointFailure as exc:
        print(f"kpzlab: numerical failure {exc}", file=sys.stderr)
        return 1
    except (ConvergenceError, NumericalError, EvaluationError) as exc:
        print(f"kpzlab: numerical failure: {exc}", file=sys.stderr)
        return 1
    text = render(cols, rows, cfg.output_format, _metadata(cfg, extra))
    if cfg.output_path:
        with open(cfg.output_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        stdout.write(text)
        stdout.flush()
    return 0


def main(argv=None):
    try:
        cfg = config_from_args(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"kpzlab: usage error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
