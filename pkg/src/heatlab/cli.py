"""Command-line front end.

Every run writes three files into ``--out``:

* ``results.json``  command, config and numeric results (matrices as ``[re, im]`` pairs)
* ``results.csv``   a flat summary table derived from ``results.json`` only
* ``manifest.json`` inputs hash, library versions, seed and timings

``heatlab report --from DIR`` rebuilds the CSV table from an existing
``results.json``; the table is identical to the one written by the original run.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import inspect
import io
import json
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy

from . import __version__, presets
from .errors import ConfigError, HeatLabError, InvalidProblem, OutOfChart
from .expr import parse_field
from .geometry import LaplaceProblem, Tolerances, geodesic_bvp
from .serialize import dumps, encode

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4
COMMANDS = ("geodesic", "synge", "sdw", "psi", "kernel-mc", "scaling", "verify", "report")


@dataclass
class RunConfig:
    """Everything needed to reproduce one run; ``output`` is not part of the inputs."""
    command: str = "verify"
    preset: Optional[str] = None
    params: dict = field(default_factory=dict)
    problem: Optional[dict] = None      # expression fields, see build_problem
    x: Optional[list] = None
    y: Optional[list] = None
    z: Optional[list] = None
    k: int = 2
    N: int = 8
    tau: float = 0.5
    n_paths: int = 200_000
    n_steps: int = 128
    seed: int = 0
    suite: str = "fast"
    tolerances: dict = field(default_factory=dict)
    source: Optional[str] = None        # input directory for `report`
    output: Optional[str] = None

    def to_dict(self, with_output: bool = True) -> dict:
        d = dataclasses.asdict(self)
        if not with_output:
            d.pop("output")
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))

    def inputs_hash(self) -> str:
        text = json.dumps(self.to_dict(with_output=False), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()


# problem construction -------------------------------------------------------

def _is_constant(fe) -> bool:
    from .expr import Num
    return all(isinstance(re_, Num) and (im is None or isinstance(im, Num)) for re_, im in fe.ast)


def build_problem(cfg: RunConfig) -> LaplaceProblem:
    """A preset (``cfg.preset`` with ``cfg.params``) or expression fields (``cfg.problem``).

    Expression problems are dicts with keys ``dim``, ``fiber_dim`` (default 1),
    ``chart_domain`` (list of ``[lo, hi]``), ``metric_inv`` (d x d, default the
    identity), ``connection`` (list of d matrices, optional) and ``potential``
    (scalar or m x m, optional).
    """
    tol = Tolerances(**cfg.tolerances) if cfg.tolerances else Tolerances()
    if cfg.preset and cfg.problem:
        raise ConfigError("give either a preset or expression fields, not both")
    if cfg.preset:
        if cfg.preset not in presets.PRESETS:
            raise ConfigError(f"unknown preset {cfg.preset!r}; choose from {sorted(presets.PRESETS)}")
        factory = presets.PRESETS[cfg.preset]
        accepted = inspect.signature(factory).parameters
        bad = sorted(set(cfg.params) - set(accepted))
        if bad:
            raise ConfigError(f"preset {cfg.preset!r} does not take {', '.join(bad)}; "
                              f"it takes {', '.join(accepted) or 'no parameters'}")
        problem = factory(**cfg.params)
    elif cfg.problem:
        problem = _expression_problem(cfg.problem)
    else:
        raise ConfigError("no problem given: use --preset or a config with expression fields")
    return problem.replace(tol=tol) if cfg.tolerances else problem


def _expression_problem(fields: dict) -> LaplaceProblem:
    allowed = {"dim", "fiber_dim", "chart_domain", "metric_inv", "connection", "potential", "name"}
    unknown = sorted(set(fields) - allowed)
    if unknown:
        raise ConfigError(f"unknown problem keys: {', '.join(unknown)}")
    try:
        d = int(fields["dim"])
        domain = np.asarray(fields["chart_domain"], dtype=float)
    except KeyError as exc:
        raise ConfigError(f"expression problem needs {exc.args[0]!r}") from None
    m = int(fields.get("fiber_dim", 1))

    metric = fields.get("metric_inv")
    if metric is None:
        metric_fe, constant = None, True
        eye = np.eye(d)

        def metric_inv(x):
            return np.broadcast_to(eye, np.shape(x)[:-1] + (d, d))
    else:
        metric_fe = parse_field(metric, d, d)
        constant = _is_constant(metric_fe)

        def metric_inv(x):
            return metric_fe(x).real

    connection = None
    if fields.get("connection") is not None:
        comps = fields["connection"]
        if not isinstance(comps, list) or len(comps) != d:
            raise ConfigError(f"connection needs one {m}x{m} matrix per coordinate ({d})")
        fes = [parse_field(c, d, m) for c in comps]

        def connection(x):
            return np.stack([fe(x) for fe in fes], axis=-3)

    potential = None
    if fields.get("potential") is not None:
        pot = parse_field(fields["potential"], d, m)
        if pot.shape != (m, m):
            raise ConfigError(f"potential must be {m}x{m}")
        potential = pot

    return LaplaceProblem(d, m, metric_inv, domain, connection=connection, potential=potential,
                          constant_metric=constant, name=fields.get("name", "expression"))


def _point(cfg: RunConfig, name: str, dim: int, default=None) -> np.ndarray:
    val = getattr(cfg, name)
    if val is None:
        if default is None:
            raise ConfigError(f"--{name} is required for `{cfg.command}`")
        return np.asarray(default, dtype=float)
    arr = np.atleast_1d(np.asarray(val, dtype=float))
    if arr.shape != (dim,):
        raise ConfigError(f"--{name} needs {dim} coordinates, got {arr.size}")
    return arr


# commands -------------------------------------------------------------------

def _cmd_geodesic(cfg, problem):
    x, y = _point(cfg, "x", problem.dim), _point(cfg, "y", problem.dim)
    geo = geodesic_bvp(problem, y, x)
    return {"start": geo.start, "end": geo.end, "v0": geo.v0, "energy": geo.energy,
            "energy_drift": geo.energy_drift(problem), "lam": geo.lam,
            "positions": geo.positions, "velocities": geo.velocities}


def _cmd_synge(cfg, problem):
    from .synge import synge_data
    x, y = _point(cfg, "x", problem.dim), _point(cfg, "y", problem.dim)
    s = synge_data(problem, x, y)
    return {"x": s.x, "y": s.y, "sigma": s.sigma, "sigma_lower": s.sigma_lower,
            "sigma_upper": s.sigma_upper, "vanvleck": s.vanvleck}


def _cmd_sdw(cfg, problem):
    from .sdw import sdw_coefficients
    x, y = _point(cfg, "x", problem.dim), _point(cfg, "y", problem.dim)
    if cfg.k < 0:
        raise ConfigError("--k must be non-negative for `sdw`")
    t = sdw_coefficients(problem, x, y, cfg.k)
    return {"x": t.x, "y": t.y, "order": t.order, "coefficients": np.array(t.coeffs),
            "sigma": t.sigma, "vanvleck": t.vanvleck, "transport_tol": t.transport_tol,
            "stencil_width": t.stencil_width}


def _cmd_psi(cfg, problem):
    from .psi import psi
    x, y = _point(cfg, "x", problem.dim), _point(cfg, "y", problem.dim)
    p = psi(problem, cfg.k, x, y, cfg.N)
    return {"x": p.x, "y": p.y, "k": p.k, "N": p.N, "value": np.asarray(p.value, dtype=complex),
            "tail_estimate": p.tail_estimate}


def _flat(problem):
    from .feynman_kac import FlatProblem
    return FlatProblem.from_laplace(problem)


def _estimate(e):
    return {"mean": np.asarray(e.mean, dtype=complex), "stderr": np.asarray(e.stderr, dtype=float),
            "tau": e.tau, "x": e.x, "y": e.y}


def _cmd_kernel_mc(cfg, problem):
    from .feynman_kac import kernel_mc
    x, y = _point(cfg, "x", problem.dim), _point(cfg, "y", problem.dim)
    e = kernel_mc(_flat(problem), x, y, cfg.tau, cfg.n_paths, cfg.n_steps, cfg.seed)
    out = _estimate(e)
    out.update(n_paths=e.n_paths, n_steps=e.n_steps, seed=e.seed)
    return out


def _cmd_scaling(cfg, problem):
    from .feynman_kac import scaling_check
    x = _point(cfg, "x", problem.dim)
    y, z = _point(cfg, "y", problem.dim, x), _point(cfg, "z", problem.dim, x)
    r = scaling_check(_flat(problem), x, y, z, cfg.tau, cfg.n_paths, cfg.n_steps, cfg.seed)
    return {"z": z, "lhs": _estimate(r.lhs), "rhs": _estimate(r.rhs),
            "diff": np.asarray(r.diff, dtype=complex), "diff_stderr": r.diff_stderr,
            "agrees": r.agrees(), "n_paths": cfg.n_paths, "n_steps": cfg.n_steps, "seed": cfg.seed}


_HANDLERS = {"geodesic": _cmd_geodesic, "synge": _cmd_synge, "sdw": _cmd_sdw, "psi": _cmd_psi,
             "kernel-mc": _cmd_kernel_mc, "scaling": _cmd_scaling}


# summary tables -------------------------------------------------------------

def _matrix_rows(prefix, mat, extra=None):
    """Rows ``prefix + [i, j, re, im] (+ extra[i][j])`` from an encoded complex matrix."""
    rows = []
    for i, row in enumerate(mat):
        for j, (re_, im) in enumerate(row):
            r = list(prefix) + [i, j, re_, im]
            if extra is not None:
                r.append(extra[i][j])
            rows.append(r)
    return rows


def summary_table(doc: dict) -> str:
    """CSV summary of an encoded results document; depends on ``doc`` alone."""
    cmd, res = doc["command"], doc["results"]
    if cmd == "verify":
        header = ["check_id", "passed", "residual", "tolerance"]
        rows = [[c["check_id"], c["passed"], c["residual"], c["tolerance"]] for c in res["checks"]]
    elif cmd == "geodesic":
        d = len(res["v0"])
        header = ["lam"] + [f"x{i + 1}" for i in range(d)] + [f"v{i + 1}" for i in range(d)]
        rows = [[lam] + list(p) + list(v)
                for lam, p, v in zip(res["lam"], res["positions"], res["velocities"])]
    elif cmd == "synge":
        header = ["quantity", "value"]
        rows = [["sigma", res["sigma"]], ["vanvleck", res["vanvleck"]]]
        rows += [[f"sigma_lower_{i + 1}", v] for i, v in enumerate(res["sigma_lower"])]
        rows += [[f"sigma_upper_{i + 1}", v] for i, v in enumerate(res["sigma_upper"])]
    elif cmd == "sdw":
        header = ["k", "i", "j", "re", "im"]
        rows = [r for k, mat in enumerate(res["coefficients"]) for r in _matrix_rows([k], mat)]
    elif cmd == "psi":
        header = ["k", "N", "i", "j", "re", "im"]
        rows = _matrix_rows([res["k"], res["N"]], res["value"])
    elif cmd == "kernel-mc":
        header = ["i", "j", "re", "im", "stderr"]
        rows = _matrix_rows([], res["mean"], res["stderr"])
    elif cmd == "scaling":
        header = ["side", "i", "j", "re", "im", "stderr"]
        rows = (_matrix_rows(["lhs"], res["lhs"]["mean"], res["lhs"]["stderr"])
                + _matrix_rows(["rhs"], res["rhs"]["mean"], res["rhs"]["stderr"])
                + _matrix_rows(["diff"], res["diff"], res["diff_stderr"]))
    else:
        raise ConfigError(f"no summary table for command {cmd!r}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows([[repr(v) if isinstance(v, float) else v for v in r] for r in rows])
    return buf.getvalue()


# run ------------------------------------------------------------------------

def _versions() -> dict:
    return {"heatlab": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def _write(out_dir: str, name: str, text: str):
    with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
        fh.write(text)


def execute(cfg: RunConfig):
    """Run one command; returns ``(results document, runtimes)`` without writing anything."""
    if cfg.command == "verify":
        from .verification import SUITES, report_document, run_suite
        if cfg.suite not in SUITES:
            raise ConfigError(f"unknown suite {cfg.suite!r}; choose from {sorted(SUITES)}")
        reports = run_suite(cfg.suite, cfg.seed)
        results = report_document(reports, cfg.suite, cfg.seed)
        runtimes = {r.check_id: r.runtime_ms for r in reports}
    else:
        problem = build_problem(cfg)
        t0 = time.perf_counter()
        results = _HANDLERS[cfg.command](cfg, problem)
        runtimes = {cfg.command: int(round(1000 * (time.perf_counter() - t0)))}
    doc = {"command": cfg.command, "config": cfg.to_dict(with_output=False), "results": results}
    return json.loads(dumps(doc)), runtimes


def run(cfg: RunConfig, stdout=None) -> int:
    """Execute ``cfg``, write the artifacts and return the exit code."""
    stdout = stdout or sys.stdout
    t0 = time.perf_counter()
    out_dir = cfg.output or "heatlab-out"
    if cfg.command == "report":
        src = cfg.source or out_dir
        try:
            with open(os.path.join(src, "results.json"), encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read results from {src}: {exc}") from None
        table = summary_table(doc)
        os.makedirs(out_dir, exist_ok=True)
        _write(out_dir, "results.csv", table)
        stdout.write(table)
        return EXIT_OK

    doc, runtimes = execute(cfg)
    os.makedirs(out_dir, exist_ok=True)
    _write(out_dir, "results.json", dumps(doc))
    _write(out_dir, "results.csv", summary_table(doc))
    manifest = {"command": cfg.command, "inputs_hash": cfg.inputs_hash(), "seed": cfg.seed,
                "versions": _versions(), "wall_time_s": time.perf_counter() - t0,
                "runtimes_ms": runtimes, "threads": os.environ.get("HEATLAB_THREADS", "1")}
    _write(out_dir, "manifest.json", dumps(manifest))
    stdout.write(summary_table(doc))
    if cfg.command == "verify" and not doc["results"]["all_passed"]:
        failed = [c["check_id"] for c in doc["results"]["checks"] if not c["passed"]]
        print(f"failed checks: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


# argument parsing -------------------------------------------------------------

def _coords(values):
    text = " ".join(values).replace(",", " ")
    try:
        return [float(t) for t in text.split()]
    except ValueError:
        raise ConfigError(f"bad coordinates {' '.join(values)!r}") from None


def _set_value(text):
    key, sep, val = text.partition("=")
    if not sep or not key:
        raise ConfigError(f"--set expects key=value, got {text!r}")
    try:
        return key, json.loads(val)
    except ValueError:
        return key, val


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration; flags override its entries")
    common.add_argument("--preset", help=f"one of {', '.join(sorted(presets.PRESETS))}")
    common.add_argument("--c", type=float, help="preset parameter c")
    common.add_argument("--omega", type=float, help="preset parameter omega")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="any other preset parameter (value parsed as JSON when possible)")
    for name in ("x", "y", "z"):
        common.add_argument(f"--{name}", nargs="+", metavar="COORD",
                            help=f"point {name}, comma or space separated")
    common.add_argument("--k", type=int)
    common.add_argument("--N", type=int)
    common.add_argument("--tau", type=float)
    common.add_argument("--n-paths", type=int, dest="n_paths")
    common.add_argument("--n-steps", type=int, dest="n_steps")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", dest="output", metavar="DIR", help="output directory")

    parser = argparse.ArgumentParser(prog="heatlab", description="Local heat kernel toolkit.")
    parser.add_argument("--version", action="version", version=f"heatlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {"geodesic": "geodesic from y to x", "synge": "world function and Van Vleck determinant",
             "sdw": "transport coefficients a_0..a_k", "psi": "resummed Psi_k",
             "kernel-mc": "Monte Carlo heat kernel", "scaling": "coupled-path scaling check",
             "verify": "run a check battery", "report": "rebuild summary tables"}
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "verify":
            p.add_argument("--suite", choices=("fast", "all"))
        if name == "report":
            p.add_argument("--from", dest="source", metavar="DIR",
                           help="directory holding results.json (default: --out)")
    return parser


def config_from_args(args) -> RunConfig:
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = RunConfig.from_json(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        except TypeError as exc:
            raise ConfigError(f"bad config: {exc}") from None
    else:
        cfg = RunConfig()
    cfg.command = args.command
    if args.preset:
        cfg.preset, cfg.problem = args.preset, None
    params = dict(cfg.params)
    if args.c is not None:
        params["c"] = args.c
    if args.omega is not None:
        params["omega"] = args.omega
    params.update(_set_value(s) for s in args.set)
    cfg.params = params
    for name in ("x", "y", "z"):
        if getattr(args, name) is not None:
            setattr(cfg, name, _coords(getattr(args, name)))
    for name in ("k", "N", "tau", "n_paths", "n_steps", "seed", "output"):
        if getattr(args, name) is not None:
            setattr(cfg, name, getattr(args, name))
    if getattr(args, "suite", None):
        cfg.suite = args.suite
    if getattr(args, "source", None):
        cfg.source = args.source
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(config_from_args(args))
    except (ConfigError, InvalidProblem, OutOfChart, KeyError, TypeError) as exc:
        # parse and arity errors are ConfigError-like: both derive from ValueError
        print(f"heatlab: configuration error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HeatLabError as exc:
        if isinstance(exc, ValueError):
            print(f"heatlab: configuration error: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"heatlab: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
