"""Command-line front end.

Every command writes a CSV table (with a header row) or a JSON document that
embeds the full run configuration.  Floats are written in their shortest
round-trip form so that identical runs give byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import analytic_branches as ab
from . import boundary_laws as bl
from . import solver
from .hc_graphs import GRAPH_NAMES, fertile_graph
from .tree_oracle import build_tree, check_consistency, constant_field, enumerate_admissible, transfer_matrix_count, weakly_periodic_field

SOLVE_SYSTEMS = ("I2", "I3", "I4", "WP8", "ti3-hinge", "ti3-wand", "ti2")


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    system: str | None = None
    graph: str | None = None
    case: str | None = None
    invariant: str | None = None
    law: str | None = None
    z: list[float] | None = None
    k: int = 2
    i: int | None = None
    n: int | None = None
    lam: float | None = None
    lam_min: float | None = None
    lam_max: float | None = None
    t_min: float | None = None
    t_max: float | None = None
    steps: int | None = None
    list_configs: bool = False
    out: str | None = None
    format: str = "csv"
    threads: int = 1

    @classmethod
    def from_args(cls, ns: argparse.Namespace) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        values = {key: val for key, val in vars(ns).items() if key in known}
        if values.get("format") is None:
            values["format"] = "json" if ns.command == "verify-consistency" else "csv"
        values["threads"] = _threads_from_env()
        return cls(**values)

    def validate(self) -> None:
        need = lambda *names: [_require(self, n) for n in names]
        if self.k < 1:
            raise UsageError("--k must be at least 1")
        if self.i is not None and not 1 <= self.i <= self.k + 1:
            raise UsageError(f"--i must lie in 1..k+1 = 1..{self.k + 1}")
        if self.command in ("solve", "sweep", "critical"):
            need("system")
            system = solver.System.parse(self.system)
            if system in (solver.System.I2, solver.System.I3) and (self.k != 2 or self.i not in (None, 2)):
                raise UsageError(f"{system.value} is defined for k = i = 2")
            if system is solver.System.I4 and (self.k < 2 or self.i not in (None, self.k)):
                raise UsageError("I4 is solved for k = i with k >= 2")
            if system is solver.System.WP8 and self.i is None:
                raise UsageError("WP8 needs --i")
            if self.invariant is not None and system is not solver.System.WP8:
                raise UsageError("--invariant applies to the WP8 system only")
        if self.command == "solve":
            need("lam")
            _positive("--lambda", self.lam)
        if self.command == "sweep":
            need("lam_min", "lam_max", "steps")
            _positive("--lambda-min", self.lam_min)
            if self.lam_max <= self.lam_min:
                raise UsageError("--lambda-max must exceed --lambda-min")
            if self.steps < 2:
                raise UsageError("--steps must be at least 2")
        if self.command == "branches":
            need("case", "t_min", "t_max", "steps")
            if not 0 < self.t_min < self.t_max < 1:
                raise UsageError("need 0 < --t-min < --t-max < 1")
            if self.steps < 2:
                raise UsageError("--steps must be at least 2")
        if self.command in ("verify-consistency", "enumerate"):
            need("graph", "n")
            if self.n < 0:
                raise UsageError("--n must be non-negative")
        if self.command == "verify-consistency":
            need("lam", "law")
            _positive("--lambda", self.lam)
            if self.n < 1:
                raise UsageError("consistency compares two volumes; --n must be at least 1")
            if self.law == "wp":
                if self.graph != "pipe":
                    raise UsageError("weakly periodic laws need --graph pipe")
                if self.z is None or len(self.z) != 8 or self.i is None:
                    raise UsageError("--law wp needs --i and eight --z values")
            elif self.z is not None and len(self.z) not in (1, 2):
                raise UsageError("--law ti takes one --z value (pipe) or two (hinge, wand)")
            if self.z is not None and min(self.z) <= 0:
                raise UsageError("--z values must be positive")


def _require(cfg: RunConfig, name: str) -> None:
    if getattr(cfg, name) is None:
        raise UsageError(f"{cfg.command} needs --{name.replace('_', '-').replace('lam', 'lambda')}")


def _positive(flag: str, value: float) -> None:
    if not (value > 0 and math.isfinite(value)):
        raise UsageError(f"{flag} must be a positive finite number")


def _threads_from_env() -> int:
    raw = os.environ.get("HC_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"HC_THREADS must be an integer, got {raw!r}") from None


# -- formatting --------------------------------------------------------------

def fmt(x) -> str:
    """Shortest round-trip text for a number; empty for a missing value."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        x = float(x)
    if isinstance(x, float) and math.isnan(x):
        return None
    return x


@dataclass
class Table:
    header: list[str]
    rows: list[list] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        w.writerows([fmt(v) for v in row] for row in self.rows)
        return buf.getvalue()

    def records(self) -> list[dict]:
        return [dict(zip(self.header, row)) for row in self.rows]


def render(cfg: RunConfig, table: Table, extra: dict | None = None) -> str:
    if cfg.format == "csv":
        return table.to_csv()
    doc = {"config": asdict(cfg), "rows": table.records()}
    if extra:
        doc.update(extra)
    return json.dumps(_plain(doc), indent=2, sort_keys=True) + "\n"


# -- commands ----------------------------------------------------------------

def _record_rows(lam: float, records: Sequence[solver.SolutionRecord], width: int) -> list[list]:
    if not records:
        return [[lam, 0, None] + [None] * width + [None, None, None]]
    rows = []
    for j, r in enumerate(records):
        coords = list(r.coordinates) + [None] * (width - len(r.coordinates))
        rows.append([lam, len(records), j] + coords + [r.classification, r.tangency, r.residual])
    return rows


def _coord_names(system: solver.System, invariant: str | None) -> list[str]:
    return {
        solver.System.I2: ["s", "t"],
        solver.System.I3: ["s", "t"],
        solver.System.I4: ["x", "y"],
        solver.System.TI3_HINGE: ["z1", "z2"],
        solver.System.TI3_WAND: ["z1", "z2"],
        solver.System.TI2: ["z"],
    }.get(system) or (["z1"] if invariant == "I1" else ["z1", "z7"] if invariant == "I3" else ["z1", "z2"])


def _solve_one(cfg: RunConfig, lam: float) -> list[solver.SolutionRecord]:
    system = solver.System.parse(cfg.system)
    if system is solver.System.WP8:
        return solver.solve_invariant(cfg.invariant or "I2", cfg.k, cfg.i, lam)
    return solver.solve(system, lam, cfg.k, cfg.i)


def cmd_solve(cfg: RunConfig) -> str:
    system = solver.System.parse(cfg.system)
    names = _coord_names(system, cfg.invariant)
    table = Table(["lambda", "count", "solution", *names, "classification", "tangency", "residual"])
    table.rows = _record_rows(cfg.lam, _solve_one(cfg, cfg.lam), len(names))
    return render(cfg, table)


def cmd_sweep(cfg: RunConfig) -> str:
    system = solver.System.parse(cfg.system)
    names = _coord_names(system, cfg.invariant)
    report = solver.sweep(system, cfg.k, cfg.i if cfg.i is not None else cfg.k, cfg.lam_min, cfg.lam_max, cfg.steps, invariant=cfg.invariant, workers=cfg.threads)
    table = Table(["lambda", "count", "solution", *names, "classification", "tangency", "residual"])
    for p in report.points:
        if p.error:
            table.rows.append([p.lam, None, None] + [None] * len(names) + [f"error: {p.error}", None, None])
        else:
            table.rows.extend(_record_rows(p.lam, p.records, len(names)))
    crit = [{"lambda": c.lam, "counts": list(c.counts), "method": c.method} for c in report.criticals]
    return render(cfg, table, {"transitions": crit})


def cmd_critical(cfg: RunConfig) -> str:
    system = solver.System.parse(cfg.system)
    i = cfg.i if cfg.i is not None else cfg.k
    kwargs = {}
    if cfg.lam_min is not None:
        kwargs["lam_min"] = cfg.lam_min
    if cfg.lam_max is not None:
        kwargs["lam_max"] = cfg.lam_max
    c = solver.critical_lambda(system, cfg.k, i, **kwargs)
    below, above = c.counts if c.counts else (None, None)
    table = Table(["system", "lambda", "argument", "method", "count_below", "count_above"])
    table.rows.append([c.system, c.lam, c.argument, c.method, below, above])
    return render(cfg, table)


def cmd_branches(cfg: RunConfig) -> str:
    t = np.linspace(cfg.t_min, cfg.t_max, cfg.steps)
    if cfg.case == "I2":
        cols = ab.i2_branches(t)
        header = ["t", "phi1", "phi2", "phi3"]
    else:
        cols = ab.i3_branches(t)
        header = ["t", "lt1", "lt2", "lt3"]
    table = Table(header, [list(r) for r in zip(t, *cols)])
    return render(cfg, table)


def _field(cfg: RunConfig, tree, graph):
    if cfg.law == "wp":
        return weakly_periodic_field(tree, graph, cfg.lam, cfg.z, cfg.i)
    if graph.num_states == 2:
        z = cfg.z[0] if cfg.z else bl.ti2_fixed_point(cfg.k, cfg.lam)
        return constant_field(tree, graph, cfg.lam, [1.0, z])
    if cfg.z:
        z1, z2 = cfg.z if len(cfg.z) == 2 else (cfg.z[0], cfg.z[0])
    else:
        sym = [r for r in solver.solve_TI3(graph, cfg.k, cfg.lam) if r.symmetric]
        z1, z2 = sym[0].coordinates
    return constant_field(tree, graph, cfg.lam, bl.TiLaw3(z1, z2, graph, cfg.k, cfg.lam).boundary_weights())


def cmd_verify(cfg: RunConfig) -> str:
    graph = fertile_graph(cfg.graph)
    tree = build_tree(cfg.k, cfg.n)
    field_ = _field(cfg, tree, graph)
    residual = check_consistency(tree, graph, cfg.lam, field_)
    table = Table(["graph", "k", "n", "lambda", "law", "residual"], [[cfg.graph, cfg.k, cfg.n, cfg.lam, cfg.law, residual]])
    return render(cfg, table, {"field": field_.tolist()})


def cmd_enumerate(cfg: RunConfig) -> str:
    graph = fertile_graph(cfg.graph)
    tree = build_tree(cfg.k, cfg.n)
    configs = enumerate_admissible(tree, graph)
    if cfg.list_configs:
        table = Table([f"v{x}" for x in range(tree.size)], configs.tolist())
        return render(cfg, table)
    table = Table(["graph", "k", "n", "vertices", "admissible", "transfer_matrix"])
    table.rows.append([cfg.graph, cfg.k, cfg.n, tree.size, len(configs), transfer_matrix_count(tree, graph)])
    return render(cfg, table)


DISPATCH = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "critical": cmd_critical,
    "branches": cmd_branches,
    "verify-consistency": cmd_verify,
    "enumerate": cmd_enumerate,
}


def run(cfg: RunConfig) -> str:
    cfg.validate()
    return DISPATCH[cfg.command](cfg)


# -- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hcgibbs", description="Boundary laws of hard-core models on Cayley trees.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--format", choices=("csv", "json"), default=None)
        p.add_argument("--out", help="output path (default: stdout)")

    def system_args(p):
        p.add_argument("--system", required=True, choices=SOLVE_SYSTEMS, type=_system_name)
        p.add_argument("--k", type=int, default=2)
        p.add_argument("--i", type=int)
        p.add_argument("--invariant", choices=[s.value for s in bl.InvariantSet])

    p = sub.add_parser("solve", help="all solutions at one activity")
    system_args(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    common(p)

    p = sub.add_parser("sweep", help="solutions over an activity grid")
    system_args(p)
    p.add_argument("--lambda-min", dest="lam_min", type=float, required=True)
    p.add_argument("--lambda-max", dest="lam_max", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    common(p)

    p = sub.add_parser("critical", help="first activity where the solution count changes")
    system_args(p)
    p.add_argument("--lambda-min", dest="lam_min", type=float)
    p.add_argument("--lambda-max", dest="lam_max", type=float)
    common(p)

    p = sub.add_parser("branches", help="closed-form branch curves of the I2 or I3 system")
    p.add_argument("--case", required=True, choices=("I2", "I3"))
    p.add_argument("--t-min", dest="t_min", type=float, required=True)
    p.add_argument("--t-max", dest="t_max", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    common(p)

    p = sub.add_parser("verify-consistency", help="finite-volume consistency residual of a boundary law")
    p.add_argument("--graph", required=True, choices=GRAPH_NAMES)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--law", choices=("ti", "wp"), default="ti")
    p.add_argument("--i", type=int)
    p.add_argument("--z", type=float, nargs="+")
    common(p)

    p = sub.add_parser("enumerate", help="count admissible configurations on a finite tree")
    p.add_argument("--graph", required=True, choices=GRAPH_NAMES)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--list", dest="list_configs", action="store_true", help="emit every configuration")
    common(p)
    return parser


def _system_name(name: str) -> str:
    try:
        return solver.System.parse(name).value
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = RunConfig.from_args(ns)
        text = run(cfg)
    except UsageError as exc:
        parser.error(str(exc))
    except (ValueError, ArithmeticError, LookupError, RuntimeError) as exc:
        print(f"hcgibbs: error: {exc}", file=sys.stderr)
        return 1
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
