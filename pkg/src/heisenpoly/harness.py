"""Experiment configuration, sweeps over ``mu``, slope fits, output and the CLI."""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import cached_property
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .lattice import Lattice, build_lattice, evolve_heat, heat_kernel, parse_lattice
from .polymer import Particle, bound_probe, cluster_ratio
from .product import ProductState, ap_expectation
from .quantum import ObservableA, SectorBasis, expectation_a, full_space, propagate, sharp_state
from .splitting import KINDS, BudgetExceeded, SplitVertex, VertexConfig, basic_theorem_check, signed_kick_sum, truncated_r

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "FitResult",
    "ReportRow",
    "ScalingReport",
    "CheckResult",
    "exact_expectation",
    "ap_expectation_at",
    "theorem91_bracket",
    "split_error",
    "polymer_residual",
    "scaling_sweep",
    "fit_loglog_slope",
    "write_csv",
    "write_json",
    "run_checks",
    "run_cli",
    "main",
]

SCHEMA_VERSION = "1"
COLUMNS = ("mu", "exact", "ap", "bracket", "split_err_V", "polymer_resid_V", "bound_probe")
FIT_MU_MAX = 0.1
EXACT_REGIME_TOL = 1e-11
BOUND_PROBE_A = 0.1


class ConfigError(ValueError):
    """Invalid experiment configuration or command line."""


def _default_grid() -> tuple[float, ...]:
    return tuple(float(x) for x in np.geomspace(1e-3, 1e-1, 12))


@dataclass(frozen=True)
class ExperimentConfig:
    lattice: str = "chain:6"
    s0: tuple[int, ...] = (0, 1, 2)
    k_set: tuple[int, ...] = (2,)
    alpha: float = 1.0
    mu_grid: tuple[float, ...] = field(default_factory=_default_grid)
    split_order: int = 1
    polymer_particles: int = 3
    quad_nodes: int = 8
    out: str = "results"
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        for name in ("s0", "k_set", "mu_grid"):
            value = getattr(self, name)
            if isinstance(value, (str, bytes)) or not hasattr(value, "__iter__"):
                raise ConfigError(f"{name} must be a list")
        object.__setattr__(self, "s0", tuple(sorted({int(i) for i in self.s0})))
        object.__setattr__(self, "k_set", tuple(sorted({int(i) for i in self.k_set})))
        object.__setattr__(self, "mu_grid", tuple(float(m) for m in self.mu_grid))
        try:
            lat = parse_lattice(self.lattice)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        n = lat.n_sites
        if not self.s0 or len(self.s0) >= n:
            raise ConfigError("s0 must be a nonempty proper subset of the sites")
        for name in ("s0", "k_set"):
            bad = [i for i in getattr(self, name) if not 0 <= i < n]
            if bad:
                raise ConfigError(f"{name} contains sites outside the lattice: {bad}")
        if not self.k_set:
            raise ConfigError("k_set must be nonempty")
        if not (isinstance(self.alpha, (int, float)) and self.alpha > 0 and math.isfinite(self.alpha)):
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")
        grid = self.mu_grid
        if not grid or any(not (m > 0 and math.isfinite(m)) for m in grid):
            raise ConfigError("mu_grid must be nonempty with positive entries")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("mu_grid must be strictly increasing")
        for name in ("split_order", "polymer_particles", "quad_nodes", "seed"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 0:
                raise ConfigError(f"{name} must be a nonnegative integer")
        if self.quad_nodes < 1 or self.workers < 1:
            raise ConfigError("quad_nodes and workers must be >= 1")

    @cached_property
    def lat(self) -> Lattice:
        return parse_lattice(self.lattice)

    @property
    def observable(self) -> ObservableA:
        return ObservableA(frozenset(self.k_set), self.alpha)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = asdict(self)
        for name in ("s0", "k_set", "mu_grid"):
            d[name] = list(d[name])
        return d

    def replace(self, **changes) -> "ExperimentConfig":
        return self.from_dict({**self.to_dict(), **changes})


# columns ----------------------------------------------------------------------


def exact_expectation(cfg: ExperimentConfig, mu: float) -> float:
    """``⟨A⟩`` in the evolved state, by exact propagation in the magnetization sector."""
    basis = SectorBasis(cfg.lat, len(cfg.s0))
    psi = propagate(basis, sharp_state(basis, cfg.s0), mu)
    return expectation_a(psi, cfg.observable)


def ap_expectation_at(cfg: ExperimentConfig, mu: float) -> float:
    """``Π_{i∈K} ρ_μ(i)`` for the heat-flow product state."""
    phi = evolve_heat(cfg.lat, ProductState.sharp(cfg.lat, cfg.s0).phi, mu)
    return ap_expectation(ProductState(cfg.lat, np.clip(phi, 0.0, 1.0)), cfg.observable)


def theorem91_bracket(cfg: ExperimentConfig, mu: float) -> float:
    """Exact ``⟨A⟩_μ`` minus its product-state approximation."""
    return exact_expectation(cfg, mu) - ap_expectation_at(cfg, mu)


def split_error(cfg: ExperimentConfig, mu: float) -> float:
    """Norm of the splitting series truncated at ``split_order`` minus the exact state."""
    basis = full_space(cfg.lat)
    approx = truncated_r(cfg.lat, cfg.s0, mu, cfg.split_order, nodes=cfg.quad_nodes, basis=basis)
    exact = propagate(basis, sharp_state(basis, cfg.s0), mu)
    return float(np.linalg.norm(approx.amplitudes - exact.amplitudes))


def polymer_residual(cfg: ExperimentConfig, mu: float, exact: float | None = None, ap: float | None = None) -> float:
    """Exact ``⟨A⟩`` minus the truncated cluster-series estimate of it."""
    exact = exact_expectation(cfg, mu) if exact is None else exact
    ap = ap_expectation_at(cfg, mu) if ap is None else ap
    norm_ratio, obs_ratio = cluster_ratio(
        cfg.lat, cfg.s0, cfg.k_set, cfg.alpha, mu, cfg.polymer_particles, nodes=cfg.quad_nodes
    )
    return exact - ap * obs_ratio / norm_ratio


def _bound_probe_value(cfg: ExperimentConfig, mu: float) -> float:
    anchor = Particle.at_site(cfg.k_set[0])
    ((_, value),) = bound_probe(cfg.lat, cfg.s0, anchor, BOUND_PROBE_A, [mu], cfg.polymer_particles, nodes=cfg.quad_nodes)
    return value


# report ----------------------------------------------------------------------


class ReportRow(NamedTuple):
    mu: float
    exact: float
    ap: float
    bracket: float
    split_err_V: float
    polymer_resid_V: float
    bound_probe: float


@dataclass(frozen=True)
class FitResult:
    slope: float
    r2: float
    n_used: int
    n_dropped: int

    def __iter__(self):
        return iter((self.slope, self.r2))


@dataclass(frozen=True)
class ScalingReport:
    config: ExperimentConfig
    rows: tuple[ReportRow, ...]
    slopes: dict
    exact_regime: bool

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


def fit_loglog_slope(rows) -> FitResult:
    """Least-squares slope of ``log value`` against ``log mu``.

    Rows with nonpositive or non-finite values are dropped and counted.
    """
    rows = [(float(m), float(v)) for m, v in rows]
    kept = [(m, v) for m, v in rows if m > 0 and v > 0 and math.isfinite(v)]
    if len(kept) < 4:
        raise ValueError(f"need at least 4 positive rows for a fit, got {len(kept)}")
    x = np.log([m for m, _ in kept])
    y = np.log([v for _, v in kept])
    if np.ptp(x) == 0:
        raise ValueError("degenerate mu grid")
    slope, intercept = np.polyfit(x, y, 1)
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return FitResult(float(slope), float(r2), len(kept), len(rows) - len(kept))


def _compute_row(cfg: ExperimentConfig, mu: float) -> ReportRow:
    exact = exact_expectation(cfg, mu)
    ap = ap_expectation_at(cfg, mu)
    return ReportRow(
        mu=mu,
        exact=exact,
        ap=ap,
        bracket=exact - ap,
        split_err_V=split_error(cfg, mu),
        polymer_resid_V=polymer_residual(cfg, mu, exact, ap),
        bound_probe=_bound_probe_value(cfg, mu),
    )


def _map_grid(cfg: ExperimentConfig, fn) -> list:
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(lambda mu: fn(cfg, mu), cfg.mu_grid))
    return [fn(cfg, mu) for mu in cfg.mu_grid]


def scaling_sweep(cfg: ExperimentConfig) -> ScalingReport:
    """Every report column over the ``mu`` grid, plus log-log slopes of their magnitudes."""
    if len(cfg.mu_grid) < 4 or math.log10(cfg.mu_grid[-1] / cfg.mu_grid[0]) < 1.5:
        raise ConfigError("mu_grid must have at least 4 points spanning at least 1.5 decades")
    rows = tuple(_map_grid(cfg, _compute_row))
    exact_regime = all(abs(r.bracket) <= EXACT_REGIME_TOL for r in rows)
    slopes = {}
    in_regime = [r for r in rows if r.mu <= FIT_MU_MAX]
    for name in ("bracket", "split_err_V", "polymer_resid_V", "bound_probe"):
        if name == "bracket" and exact_regime:
            slopes[name] = None
            continue
        try:
            slopes[name] = fit_loglog_slope([(r.mu, abs(getattr(r, name))) for r in in_regime])
        except ValueError:
            slopes[name] = None
    return ScalingReport(cfg, rows, slopes, exact_regime)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _jsonable(obj):
    if isinstance(obj, FitResult):
        return {"slope": obj.slope, "r2": obj.r2, "n_used": obj.n_used, "n_dropped": obj.n_dropped}
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(_fmt(obj))
    return obj


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_jsonable({"schema_version": SCHEMA_VERSION, **payload}), indent=2, sort_keys=True)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def report_payload(report: ScalingReport) -> dict:
    return {
        "config": report.config.to_dict(),
        "exact_regime": report.exact_regime,
        "fit_mu_max": FIT_MU_MAX,
        "slopes": report.slopes,
        "columns": list(COLUMNS),
    }


# property checks ---------------------------------------------------------------------


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str


def _check_kick_sum(rng, samples: int) -> CheckResult:
    worst = 0.0
    for lat in (build_lattice("chain", 8), build_lattice("grid", 3, 3)):
        for _ in range(samples):
            edge = lat.edges[rng.integers(len(lat.edges))]
            f = rng.random(lat.n_sites)
            worst = max(worst, float(np.abs(signed_kick_sum(edge, f, lat)).max()))
    return CheckResult("signed kick sum", worst == 0.0, f"max |sum| = {worst:.3g}")


def _random_config(rng, lat: Lattice, mu: float, max_kicks: int) -> VertexConfig:
    n = int(rng.integers(0, max_kicks + 1))
    return VertexConfig(
        tuple(
            SplitVertex(lat.edges[rng.integers(len(lat.edges))], float(rng.uniform(0, mu)), KINDS[rng.integers(4)])
            for _ in range(n)
        )
    )


def _check_basic_theorem(rng, samples: int) -> CheckResult:
    lat = build_lattice("chain", 6)
    failures = 0
    for _ in range(samples):
        f = np.sort(rng.random((3, lat.n_sites)), axis=0)
        mu = float(rng.uniform(0.01, 1.0))
        if not basic_theorem_check(lat, f[0], f[1], f[2], _random_config(rng, lat, mu, 4), mu):
            failures += 1
    return CheckResult("order and range preservation", failures == 0, f"{failures} of {samples} failed")


def _check_heat_kernel() -> CheckResult:
    worst = 0.0
    for lat in (build_lattice("chain", 5), build_lattice("grid", 3, 3)):
        for s, t in ((0.1, 0.3), (0.5, 1.2)):
            g_s, g_t, g_st = (heat_kernel(lat, m).matrix for m in (s, t, s + t))
            worst = max(
                worst,
                float(np.abs(g_s.sum(axis=1) - 1).max()),
                float(np.abs(g_s - g_s.T).max()),
                float(np.abs(g_s @ g_t - g_st).max()),
                float(max(0.0, -g_s.min())),
            )
    return CheckResult("heat kernel", worst <= 1e-10, f"max defect = {worst:.3g}")


def _check_two_site() -> CheckResult:
    worst = 0.0
    for alpha in (0.25, 1.0, 4.0):
        cfg = ExperimentConfig(lattice="chain:2", s0=(0,), k_set=(0,), alpha=alpha, mu_grid=(1.0,))
        for mu in np.linspace(0.0, 2.0, 20):
            worst = max(worst, abs(theorem91_bracket(cfg, mu)))
    return CheckResult("two-site bracket", worst <= 1e-11, f"max |D| = {worst:.3g}")


def run_checks(seed: int = 0, samples: int = 1000) -> list[CheckResult]:
    """Quick property suites: kick sum, order preservation, heat kernel, two-site exactness."""
    rng = np.random.default_rng(seed)
    return [
        _check_kick_sum(rng, samples),
        _check_basic_theorem(rng, max(1, samples // 10)),
        _check_heat_kernel(),
        _check_two_site(),
    ]


# command line -------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _site_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated site ids, got {text!r}") from None


def _build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--lattice", help="chain:N[:periodic] or grid:NX:NY[:periodic]")
    common.add_argument("--s0", type=_site_list, help="initial up sites, e.g. 0,1,2")
    common.add_argument("--k", dest="k_set", type=_site_list, help="sites of the observable")
    common.add_argument("--alpha", type=float)
    common.add_argument("--mu-min", type=float)
    common.add_argument("--mu-max", type=float)
    common.add_argument("--mu-points", type=int)
    common.add_argument("--split-order", type=int)
    common.add_argument("--polymer-particles", type=int)
    common.add_argument("--quad-nodes", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    parser = _Parser(prog="heisenpoly", description="Heisenberg heat-flow comparison experiments")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "exact": "exact expectation of A over the mu grid",
        "approx": "product-state expectation of A over the mu grid",
        "splitting": "error of the truncated splitting series",
        "polymer": "truncated cluster-series ratios and residual",
        "sweep": "full scaling report with slopes",
        "check": "run the property suites",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    return parser


def _config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    changes = {}
    for name in ("lattice", "s0", "k_set", "alpha", "split_order", "polymer_particles", "quad_nodes", "out", "seed", "workers"):
        value = getattr(args, name)
        if value is not None:
            changes[name] = value
    if args.lattice is not None and args.s0 is None and args.config is None:
        # keep the default initial state meaningful on a different lattice
        n = parse_lattice(args.lattice).n_sites
        changes.setdefault("s0", list(range(n // 2)))
        changes.setdefault("k_set", [n // 2 - 1])
    if any(v is not None for v in (args.mu_min, args.mu_max, args.mu_points)):
        lo = args.mu_min if args.mu_min is not None else cfg.mu_grid[0]
        hi = args.mu_max if args.mu_max is not None else cfg.mu_grid[-1]
        n = args.mu_points if args.mu_points is not None else len(cfg.mu_grid)
        if not (0 < lo < hi) or n < 2:
            raise ConfigError("need 0 < mu-min < mu-max and mu-points >= 2")
        changes["mu_grid"] = [float(x) for x in np.geomspace(lo, hi, n)]
    return cfg.replace(**changes) if changes else cfg


def _column_command(cfg: ExperimentConfig, command: str) -> tuple[list[str], list[tuple]]:
    if command == "exact":
        return ["mu", "exact"], _map_grid(cfg, lambda c, mu: (mu, exact_expectation(c, mu)))
    if command == "approx":
        return ["mu", "ap"], _map_grid(cfg, lambda c, mu: (mu, ap_expectation_at(c, mu)))
    if command == "splitting":
        return ["mu", "split_err_V"], _map_grid(cfg, lambda c, mu: (mu, split_error(c, mu)))

    def polymer_row(c, mu):
        norm_ratio, obs_ratio = cluster_ratio(c.lat, c.s0, c.k_set, c.alpha, mu, c.polymer_particles, nodes=c.quad_nodes)
        exact, ap = exact_expectation(c, mu), ap_expectation_at(c, mu)
        return (mu, norm_ratio, obs_ratio, exact - ap * obs_ratio / norm_ratio, _bound_probe_value(c, mu))

    return ["mu", "norm_ratio", "obs_ratio", "polymer_resid_V", "bound_probe"], _map_grid(cfg, polymer_row)


def run_cli(argv=None, stdout=None, stderr=None) -> int:
    """Entry point; returns 0 on success, 1 on invalid input, 2 when a work budget is exceeded."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = _build_parser().parse_args(argv)
        cfg = _config_from_args(args)
        out = Path(cfg.out)
        if args.command == "check":
            results = run_checks(cfg.seed)
            for r in results:
                print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}", file=stdout)
            return 0 if all(r.passed for r in results) else 1
        if args.command == "sweep":
            report = scaling_sweep(cfg)
            csv_path = write_csv(out / "sweep.csv", COLUMNS, report.rows)
            json_path = write_json(out / "sweep.json", report_payload(report))
            fit = report.slopes["bracket"]
            summary = "exact regime (bracket vanishes)" if report.exact_regime else (
                f"bracket slope {fit.slope:.4f} (R^2 {fit.r2:.4f})" if fit else "bracket slope undefined"
            )
            print(f"{summary}; wrote {csv_path} and {json_path}", file=stdout)
            return 0
        header, rows = _column_command(cfg, args.command)
        csv_path = write_csv(out / f"{args.command}.csv", header, rows)
        json_path = write_json(out / f"{args.command}.json", {"config": cfg.to_dict(), "columns": header})
        print(f"wrote {csv_path} and {json_path}", file=stdout)
        return 0
    except BudgetExceeded as exc:
        print(f"error: work budget exceeded: {exc}", file=stderr)
        return 2
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())
