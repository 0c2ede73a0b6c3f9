"""Named experiments driven by a flat key/value config.

Each experiment writes one artifact (CSV or JSON) whose header embeds the
toolkit version and the full config, so the artifact alone is enough to
re-run it.  Timing and thread count go to a separate ``.meta.json`` file,
which keeps artifacts byte-identical across runs and worker counts.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import subprocess
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from . import __version__
from .barrier import (
    barrier_centers,
    build_barrier_spec,
    counterexample_json,
    lower_bound_check,
    sample_barrier_couplings,
    sample_detour_set,
    straight_fraction_bound_check,
    verify_barrier_obliviousness,
)
from .ground_state import MAX_ENUM_VERTICES, MAX_TM_ROWS, CouplingField, solve
from .lattice import GeometryError, GridGraph, TerminalPair, build_grid, canonical_pair
from .ou_flow import DEFAULT_T_GRID, decorrelation_experiment, rows_to_csv
from .spectral import (
    MAX_CENSUS_EDGES,
    line_mass,
    mass_rows_to_csv,
    spectral_support_census,
)
from .streams import chunks, parallel_map, stream

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXPERIMENTS = (
    "ground-state",
    "census",
    "line-mass",
    "barrier-verify",
    "lower-bound",
    "decorrelate",
    "columns-check",
)
SOLVERS = ("auto", "enumeration", "transfer_matrix")
TOOL = "easpectral"


class ConfigError(ValueError):
    pass


class CounterexampleFound(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    """Flat experiment config; every key may appear in the TOML file.

    ``u`` and ``v`` default to the canonical pair of the grid.  ``n_values``
    drives the size sweeps of ``line-mass`` and ``lower-bound`` (square
    ``n x n`` grids).  ``threads`` and ``out`` never influence results.
    """

    experiment: str
    n_cols: int = 7
    n_rows: Optional[int] = None
    u: Optional[tuple[int, int]] = None
    v: Optional[tuple[int, int]] = None
    solver: str = "auto"
    strict: bool = False
    N_outer: int = 2000
    M_inner: int = 200
    replicas: int = 1000
    instances: int = 200
    samples: int = 10000
    D: int = 9
    q: int = 12
    low_threshold: float = 1.0
    high_threshold: float = 100.0
    t_grid: tuple[float, ...] = DEFAULT_T_GRID
    n_values: tuple[int, ...] = (4, 6, 8)
    max_edges: int = MAX_CENSUS_EDGES
    W: int = 5
    eps: float = 0.02
    seed: int = 0
    out: str = "results"
    threads: Optional[int] = None

    def __post_init__(self):
        if self.n_rows is None:
            self.n_rows = self.n_cols
        for k in ("u", "v"):
            if getattr(self, k) is not None:
                setattr(self, k, tuple(int(c) for c in getattr(self, k)))
        self.t_grid = tuple(float(t) for t in self.t_grid)
        self.n_values = tuple(int(n) for n in self.n_values)

    def result_keys(self) -> dict:
        """Config entries that determine the artifact contents."""
        d = dataclasses.asdict(self)
        d.pop("out")
        d.pop("threads")
        for k in ("u", "v", "t_grid", "n_values"):
            if d[k] is not None:
                d[k] = list(d[k])
        return d

    def to_dict(self) -> dict:
        d = self.result_keys()
        d["out"] = self.out
        d["threads"] = self.threads
        return d


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_INT_KEYS = {"n_cols", "n_rows", "N_outer", "M_inner", "replicas", "instances", "samples", "D", "q", "max_edges", "W",
             "seed", "threads"}
_FLOAT_KEYS = {"low_threshold", "high_threshold", "eps"}


def _coerce(key: str, value: Any):
    if value is None:
        return None
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return value
    if key in _FLOAT_KEYS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number, got {value!r}")
        return float(value)
    if key in ("u", "v"):
        if not (isinstance(value, (list, tuple)) and len(value) == 2 and all(isinstance(c, int) for c in value)):
            raise ConfigError(f"{key} must be a pair of integers [x, y]")
        return tuple(value)
    if key in ("t_grid", "n_values"):
        if not isinstance(value, (list, tuple)) or not value:
            raise ConfigError(f"{key} must be a nonempty array")
        return tuple(value)
    if key == "strict" and not isinstance(value, bool):
        raise ConfigError("strict must be true or false")
    if key in ("experiment", "solver", "out") and not isinstance(value, str):
        raise ConfigError(f"{key} must be a string")
    return value


def config_from_mapping(data: dict, experiment: Optional[str] = None) -> ExperimentConfig:
    data = dict(data)
    unknown = sorted(set(data) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    if experiment is not None:
        if data.get("experiment", experiment) != experiment:
            raise ConfigError(f"config is for {data['experiment']!r}, not {experiment!r}")
        data["experiment"] = experiment
    if "experiment" not in data:
        raise ConfigError("config needs an experiment name")
    kwargs = {k: _coerce(k, v) for k, v in data.items()}
    cfg = ExperimentConfig(**kwargs)
    validate(cfg)
    return cfg


def load_config(path, experiment: Optional[str] = None) -> ExperimentConfig:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return config_from_mapping(data, experiment)


def _solver_fits(n_cols: int, n_rows: int, solver: str) -> bool:
    tm = n_rows <= MAX_TM_ROWS
    en = n_cols * n_rows <= MAX_ENUM_VERTICES
    return {"transfer_matrix": tm, "enumeration": en, "auto": tm or en}[solver]


def _grid_dims(cfg: ExperimentConfig) -> list[tuple[int, int]]:
    if cfg.experiment in ("line-mass", "lower-bound"):
        return [(n, n) for n in cfg.n_values]
    if cfg.experiment in ("census", "columns-check"):
        return []
    return [(cfg.n_cols, cfg.n_rows)]


def validate(cfg: ExperimentConfig) -> None:
    """Reject configs that cannot run, before any work is done."""
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {cfg.experiment!r}")
    if cfg.solver not in SOLVERS:
        raise ConfigError(f"unknown solver {cfg.solver!r}")
    for k in ("n_cols", "n_rows", "N_outer", "M_inner", "replicas", "instances", "samples", "q", "max_edges", "W"):
        if getattr(cfg, k) < 1:
            raise ConfigError(f"{k} must be positive")
    if cfg.D < 0 or cfg.seed < 0:
        raise ConfigError("D and seed must be nonnegative")
    if cfg.threads is not None and cfg.threads < 1:
        raise ConfigError("threads must be positive")
    if min(cfg.N_outer, cfg.M_inner, cfg.replicas) < 2:
        raise ConfigError("N_outer, M_inner and replicas must be at least 2")
    if cfg.low_threshold <= 0 or cfg.high_threshold <= 0 or cfg.eps < 0:
        raise ConfigError("thresholds must be positive and eps nonnegative")
    if any(t < 0 or not math.isfinite(t) for t in cfg.t_grid):
        raise ConfigError("t_grid entries must be finite and nonnegative")
    if cfg.q % 2 or cfg.q > 64:
        raise ConfigError("quadrature order q must be even and at most 64")
    if (cfg.u is None) != (cfg.v is None):
        raise ConfigError("give both u and v or neither")
    for n_cols, n_rows in _grid_dims(cfg):
        if n_cols < 2:
            raise ConfigError("grids need at least two columns")
        if not _solver_fits(n_cols, n_rows, cfg.solver):
            raise ConfigError(f"solver {cfg.solver!r} cannot handle a {n_cols}x{n_rows} grid")
        if cfg.u is None and cfg.strict and n_rows % 2:
            raise ConfigError(f"canonical pair needs an even number of rows in strict mode, got {n_rows}")
    if cfg.u is not None and cfg.experiment in ("line-mass", "lower-bound"):
        raise ConfigError("size sweeps always use the canonical pair")
    if cfg.experiment == "columns-check" and cfg.u is None and cfg.strict and cfg.n_rows % 2:
        raise ConfigError(f"canonical pair needs an even number of rows in strict mode, got {cfg.n_rows}")
    if cfg.u is not None:
        g = build_grid(cfg.n_cols, cfg.n_rows)
        try:
            TerminalPair(cfg.u, cfg.v).indices(g)
        except GeometryError as exc:
            raise ConfigError(str(exc)) from exc


def _pair(cfg: ExperimentConfig, graph: GridGraph) -> TerminalPair:
    if cfg.u is not None:
        return TerminalPair(cfg.u, cfg.v)
    return canonical_pair(graph)


def _root(cfg: ExperimentConfig, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(cfg.seed, spawn_key=tuple(key))


def _header(cfg: ExperimentConfig) -> str:
    return f"# {TOOL} {__version__}\n# config: {json.dumps(cfg.result_keys(), sort_keys=True)}\n"


def _metadata(cfg: ExperimentConfig) -> dict:
    return {"tool": TOOL, "version": __version__, "config": cfg.result_keys()}


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


@dataclass
class Outcome:
    artifacts: dict[str, str]
    counterexample: bool = False
    summary: dict = field(default_factory=dict)


def run_ground_state(cfg: ExperimentConfig) -> Outcome:
    g = build_grid(cfg.n_cols, cfg.n_rows)
    pair = _pair(cfg, g)

    def one(i):
        J = CouplingField.gaussian(g, stream(_root(cfg), i))
        gs = solve(g, J, cfg.solver)
        gap = "" if gs.degeneracy_gap is None else repr(gs.degeneracy_gap)
        return [i, repr(gs.energy), gs.spins.relative(pair), gap, gs.method, gs.spins.to_json().replace(" ", "")]

    rows = parallel_map(one, range(cfg.replicas), cfg.threads)
    body = _csv(("instance", "energy", "sigma_u_sigma_v", "degeneracy_gap", "method", "spins"), rows)
    return Outcome({"ground-state.csv": _header(cfg) + body})


def census_graphs(max_edges: int) -> list[GridGraph]:
    out = []
    for n_rows in range(1, max_edges + 2):
        for n_cols in range(1, max_edges + 2):
            g = build_grid(n_cols, n_rows)
            if 1 <= g.n_edges <= max_edges:
                out.append(g)
    return out


def run_census(cfg: ExperimentConfig) -> Outcome:
    if cfg.max_edges > MAX_CENSUS_EDGES:
        raise ConfigError(f"census is limited to {MAX_CENSUS_EDGES} edges")
    jobs = []
    for g in census_graphs(cfg.max_edges):
        V = g.n_vertices
        for a in range(V):
            for b in range(a + 1, V):
                jobs.append((g, TerminalPair(g.vertex(a), g.vertex(b))))

    def one(job):
        g, pair = job
        c = spectral_support_census(g, pair, cfg.D, cfg.q)
        bad = [e for e in c.entries if not e.support_connects]
        return {
            "graph": [g.n_cols, g.n_rows],
            "u": list(pair.u),
            "v": list(pair.v),
            "captured_mass": c.captured_mass,
            "violations": len(c.violations()),
            "max_nonconnecting_alpha_sq": max((e.alpha_sq for e in bad), default=0.0),
            "entries": [
                {"multi_index": e.k.to_pairs(), "alpha_sq": e.alpha_sq, "weight": e.weight}
                for e in c.entries
                if e.alpha_sq > 1e-12
            ],
        }

    results = parallel_map(one, jobs, cfg.threads)
    n_bad = sum(r["violations"] for r in results)
    body = {"metadata": _metadata(cfg), "threshold": 1e-8, "total_violations": n_bad, "results": results}
    text = json.dumps(body, indent=1, sort_keys=True) + "\n"
    return Outcome({"census.json": text}, n_bad > 0, {"pairs": len(results), "violations": n_bad})


def run_line_mass(cfg: ExperimentConfig) -> Outcome:
    rows = []
    for n in cfg.n_values:
        g = build_grid(n, n)
        est = line_mass(g, canonical_pair(g), cfg.N_outer, cfg.M_inner, _root(cfg, n), cfg.threads)
        rows.append((n, "L", est, cfg.seed))
    return Outcome({"line-mass.csv": _header(cfg) + mass_rows_to_csv(rows)})


def run_barrier_verify(cfg: ExperimentConfig) -> Outcome:
    g = build_grid(cfg.n_cols, cfg.n_rows)
    pair = _pair(cfg, g)
    centers = barrier_centers(g, pair)
    if not centers:
        raise ConfigError(f"no barrier fits on the {g.n_cols}x{g.n_rows} grid for {pair.u}-{pair.v}")
    specs = [build_barrier_spec(g, e, cfg.low_threshold, cfg.high_threshold, pair) for e in centers]

    def one(i):
        rng = stream(_root(cfg), i)
        spec = specs[i % len(specs)]
        J = sample_barrier_couplings(spec, CouplingField.gaussian(g, rng), rng)
        rep = verify_barrier_obliviousness(g, pair, J, spec, cfg.solver)
        return i, spec, rep

    results = parallel_map(one, range(cfg.instances), cfg.threads)
    rows, bad = [], []
    for i, spec, rep in results:
        rows.append([i, spec.center, rep.relspin_plus, rep.relspin_minus, int(rep.walk_ok_plus), int(rep.walk_ok_minus),
                     int(rep.passed)])
        if not rep.passed:
            bad.append({"instance": i, **json.loads(counterexample_json(rep))})
    header = ("instance", "center", "relspin_plus", "relspin_minus", "walk_ok_plus", "walk_ok_minus", "passed")
    arts = {"barrier-verify.csv": _header(cfg) + _csv(header, rows)}
    if bad:
        arts["barrier-verify.counterexamples.json"] = json.dumps(
            {"metadata": _metadata(cfg), "counterexamples": bad}, sort_keys=True
        ) + "\n"
    passed = cfg.instances - len(bad)
    return Outcome(arts, bool(bad), {"passed": passed, "instances": cfg.instances})


def run_lower_bound(cfg: ExperimentConfig) -> Outcome:
    rows, ok = [], True
    for n in cfg.n_values:
        g = build_grid(n, n)
        rep = lower_bound_check(g, canonical_pair(g), cfg.replicas, _root(cfg, n), cfg.threads)
        ok &= rep.passed
        rows.append([n, rep.relspin, int(rep.line_aligned), rep.resamples, repr(rep.inner_mean), int(rep.all_identical),
                     int(rep.passed)])
    header = ("n", "relspin", "line_aligned", "resamples", "inner_mean", "all_identical", "passed")
    return Outcome({"lower-bound.csv": _header(cfg) + _csv(header, rows)}, not ok)


def run_decorrelate(cfg: ExperimentConfig) -> Outcome:
    g = build_grid(cfg.n_cols, cfg.n_rows)
    rows = decorrelation_experiment(g, _pair(cfg, g), cfg.t_grid, cfg.replicas, cfg.seed, cfg.threads, cfg.solver)
    return Outcome({"decorrelate.csv": _header(cfg) + rows_to_csv(rows)})


def run_columns_check(cfg: ExperimentConfig) -> Outcome:
    g = build_grid(cfg.n_cols, cfg.n_rows)
    pair = _pair(cfg, g)
    try:
        straight_fraction_bound_check(g, [], cfg.W, cfg.eps, pair)
    except GeometryError as exc:
        raise ConfigError(str(exc)) from exc

    def block(r):
        samples = [sample_detour_set(g, pair, cfg.eps, stream(_root(cfg), i)) for i in r]
        rep = straight_fraction_bound_check(g, samples, cfg.W, cfg.eps, pair)
        for f in rep.theta_failures + rep.envelope_failures:
            f["sample"] += r.start
        return rep

    reps = parallel_map(block, chunks(cfg.samples, 500), cfg.threads)
    min_theta = min(r.min_theta for r in reps)
    th = [f for r in reps for f in r.theta_failures]
    env = [f for r in reps for f in r.envelope_failures]
    header = ("samples", "n", "W", "eps", "bound", "min_theta", "theta_failures", "envelope_failures")
    row = [cfg.samples, pair.distance, cfg.W, repr(cfg.eps), repr(reps[0].bound), repr(min_theta), len(th), len(env)]
    arts = {"columns-check.csv": _header(cfg) + _csv(header, [row])}
    if th or env:
        arts["columns-check.failures.json"] = json.dumps(
            {"metadata": _metadata(cfg), "theta_failures": th, "envelope_failures": env}, sort_keys=True
        ) + "\n"
    return Outcome(arts, bool(th or env), {"min_theta": min_theta})


RUNNERS: dict[str, Callable[[ExperimentConfig], Outcome]] = {
    "ground-state": run_ground_state,
    "census": run_census,
    "line-mass": run_line_mass,
    "barrier-verify": run_barrier_verify,
    "lower-bound": run_lower_bound,
    "decorrelate": run_decorrelate,
    "columns-check": run_columns_check,
}


def git_version() -> str:
    """``git describe`` of the source tree when available, else the package version."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def run(cfg: ExperimentConfig) -> tuple[Outcome, Path]:
    """Run ``cfg``, write its artifacts and ``<experiment>.meta.json`` under ``cfg.out``."""
    validate(cfg)
    t0 = time.perf_counter()
    outcome = RUNNERS[cfg.experiment](cfg)
    wall = time.perf_counter() - t0
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in outcome.artifacts.items():
        (out / name).write_text(text)
    meta = {
        "tool": TOOL,
        "version": __version__,
        "git_version": git_version(),
        "experiment": cfg.experiment,
        "config": cfg.to_dict(),
        "artifacts": {name: sha256(text) for name, text in sorted(outcome.artifacts.items())},
        "wall_time_s": wall,
        "status": "counterexample" if outcome.counterexample else "ok",
        "summary": outcome.summary,
    }
    meta_path = out / f"{cfg.experiment}.meta.json"
    meta_path.write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    return outcome, meta_path


def read_meta(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def config_from_meta(meta: dict) -> ExperimentConfig:
    if meta.get("tool") != TOOL:
        raise ConfigError("not a metadata file of this toolkit")
    if meta.get("version") != __version__:
        raise ConfigError(f"metadata was written by version {meta.get('version')}, this is {__version__}")
    return config_from_mapping(meta["config"])
