"""Config-driven convergence-rate experiments.

A rate experiment sweeps a grid of sample sizes (and optionally block
counts), regenerates data independently for every (N, m, trial) cell
from counter-based sub-seeds, fits the batch and/or averaged estimator
with a lambda picked by one of the published schedules, and records
Monte-Carlo distance metrics with their standard errors.  Log-log
slopes over N are fitted per metric by ordinary least squares.

The run is fully deterministic given the config: cells are independent
jobs that may execute on a thread pool, and aggregation always happens
in (N, m, trial) order, so the emitted CSV is bit-identical for every
worker count.
"""

from __future__ import annotations

import json
import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import krr
from .distributed import fit_distributed, partition
from .kernels import kernel_from_config
from .krr import NumericError, l2_dist_mc, rkhs_dist_sq
from .synthetic import f_rho_eval, make_source_target, make_spectral, noise_from_config, sample_dataset

__all__ = [
    "METRICS",
    "ExperimentConfig",
    "RateRow",
    "SlopeFit",
    "RateResult",
    "lambda_rule",
    "m_restriction",
    "fit_loglog_slope",
    "run_rate_experiment",
    "m_monotonicity_report",
    "emit",
    "read_result_csv",
    "config_from_file",
    "config_from_dict",
]

# Distances recorded per trial; "avg" is the block-averaged estimator,
# "full" the whole-data estimator, "target" the regression function.
METRICS = (
    "avg_vs_full_rho",
    "avg_vs_full_rkhs",
    "full_vs_target_rho",
    "avg_vs_target_rho",
)


def lambda_rule(rule: str, n: int, m: int, alpha: float, r: float) -> float:
    """Regularization schedules tied to (N, m) and the decay/smoothness
    exponents.

    "ratio":    lambda = (m/N)^(2a / (2a max(2r,1) + 1))  -- tracks the
                per-block sample size N/m.
    "batch":    lambda = N^(-2a / (2a max(2r,1) + 1))     -- optimal for
                the whole-data estimator.
    "averaged": lambda = N^(-2a / (4ar + 1))              -- optimal for
                the averaged estimator against the target.
    """
    if not (np.isfinite(alpha) and alpha > 0):
        raise ValueError(f"alpha must be positive, got {alpha}")
    if not 0.0 < r <= 1.0:
        raise ValueError(f"r must lie in (0, 1], got {r}")
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    if rule == "ratio":
        return (m / n) ** (2.0 * alpha / (2.0 * alpha * max(2.0 * r, 1.0) + 1.0))
    if rule == "batch":
        return float(n) ** (-2.0 * alpha / (2.0 * alpha * max(2.0 * r, 1.0) + 1.0))
    if rule == "averaged":
        return float(n) ** (-2.0 * alpha / (4.0 * alpha * r + 1.0))
    raise ValueError(f"unknown lambda rule: {rule!r}")


def m_restriction(rule: str, n: int, alpha: float, r: float) -> int:
    """Largest admissible block count floor(N^exponent) under a rule.

    "ratio":    exponent (1 + 2a max(2r-1,0) + 2a(2r-1))
                         / (4 + 8a max(2r,1) - 4a + 4ar);
                reduces to 1/(4+6a) at r = 1/2.
    "averaged": exponent min((6a(2r-1)+1) / (5(4ar+1)), 2a(2r-1)/(4ar+1)).

    A nonpositive exponent yields m = 1 with a warning.
    """
    if not (np.isfinite(alpha) and alpha > 0):
        raise ValueError(f"alpha must be positive, got {alpha}")
    if not 0.0 < r <= 1.0:
        raise ValueError(f"r must lie in (0, 1], got {r}")
    if rule == "ratio":
        exponent = (1.0 + 2.0 * alpha * max(2.0 * r - 1.0, 0.0) + 2.0 * alpha * (2.0 * r - 1.0)) / (
            4.0 + 8.0 * alpha * max(2.0 * r, 1.0) - 4.0 * alpha + 4.0 * alpha * r
        )
    elif rule == "averaged":
        exponent = min(
            (6.0 * alpha * (2.0 * r - 1.0) + 1.0) / (5.0 * (4.0 * alpha * r + 1.0)),
            2.0 * alpha * (2.0 * r - 1.0) / (4.0 * alpha * r + 1.0),
        )
    else:
        raise ValueError(f"unknown m-restriction rule: {rule!r}")
    if exponent <= 0.0:
        warnings.warn(
            f"m restriction exponent {exponent:.4g} is nonpositive; falling back to m=1",
            stacklevel=2,
        )
        return 1
    return max(1, math.floor(float(n) ** exponent))


class SlopeFit(NamedTuple):
    slope: float
    stderr: float
    intercept: float


def fit_loglog_slope(points) -> SlopeFit:
    """Ordinary least squares of ln(y) on ln(x)."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 3:
        raise ValueError(f"slope fit needs at least 3 points, got {len(pts)}")
    if any(x <= 0 or y <= 0 for x, y in pts):
        raise ValueError("slope fit requires strictly positive coordinates")
    lx = np.log([x for x, _ in pts])
    ly = np.log([y for _, y in pts])
    mx = lx.mean()
    sxx = float(((lx - mx) ** 2).sum())
    if sxx == 0.0:
        raise ValueError("slope fit requires at least two distinct x values")
    slope = float(((lx - mx) * (ly - ly.mean())).sum() / sxx)
    intercept = float(ly.mean() - slope * mx)
    resid = ly - (intercept + slope * lx)
    dof = len(pts) - 2
    stderr = float(np.sqrt((resid @ resid) / dof / sxx)) if dof > 0 else 0.0
    return SlopeFit(slope=slope, stderr=stderr, intercept=intercept)


@dataclass(frozen=True)
class ExperimentConfig:
    kernel: dict
    target: dict
    noise: dict
    n_grid: tuple
    m_rule: dict
    lambda_rule: dict
    metrics: tuple
    trials: int = 20
    n_test: int = 2048
    seed: int = 0
    strategy: str = "contiguous"

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])) or not self.n_grid:
            raise ValueError("n_grid must be non-empty and strictly increasing")
        if self.trials < 3:
            raise ValueError(f"need at least 3 trials, got {self.trials}")
        unknown = set(self.metrics) - set(METRICS)
        if unknown:
            raise ValueError(f"unknown metrics: {sorted(unknown)}")
        if not self.metrics:
            raise ValueError("at least one metric is required")
        for n in self.n_grid:
            for m in self.m_values(n):
                if not 1 <= m <= n:
                    raise ValueError(f"block count m={m} invalid for n={n}")

    def m_values(self, n: int) -> tuple:
        kind = self.m_rule.get("kind")
        if kind == "fixed":
            return tuple(int(m) for m in self.m_rule["values"])
        if kind == "power":
            return (max(1, math.floor(float(n) ** float(self.m_rule["theta"]))),)
        raise ValueError(f"unknown m rule: {kind!r}")

    def lambda_for(self, n: int, m: int) -> float:
        kind = self.lambda_rule.get("kind")
        if kind == "fixed":
            value = float(self.lambda_rule["value"])
            if value <= 0:
                raise ValueError(f"fixed lambda must be positive, got {value}")
            return value
        return lambda_rule(
            kind, n, m, float(self.lambda_rule["alpha"]), float(self.lambda_rule["r"])
        )


def config_from_dict(raw: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig(
            kernel=dict(raw["kernel"]),
            target=dict(raw["target"]),
            noise=dict(raw["noise"]),
            n_grid=tuple(int(n) for n in raw["n_grid"]),
            m_rule=dict(raw.get("m_rule", {"kind": "fixed", "values": [1]})),
            lambda_rule=dict(raw["lambda_rule"]),
            metrics=tuple(raw["metrics"]),
            trials=int(raw.get("trials", 20)),
            n_test=int(raw.get("n_test", 2048)),
            seed=int(raw.get("seed", 0)),
            strategy=raw.get("strategy", "contiguous"),
        )
    except KeyError as exc:
        raise ValueError(f"config is missing required key {exc.args[0]!r}") from exc


def config_from_file(path) -> ExperimentConfig:
    """Load an experiment config from a JSON or TOML file."""
    text = open(path, "rb").read()
    if str(path).endswith(".toml"):
        if sys.version_info >= (3, 11):
            import tomllib as toml
        else:
            import tomli as toml
        raw = toml.loads(text.decode())
    else:
        raw = json.loads(text.decode())
    return config_from_dict(raw)


@dataclass(frozen=True)
class RateRow:
    n: int
    m: int
    lam: float
    metric: str
    mean: float
    stderr: float
    trials: int


@dataclass(frozen=True)
class RateResult:
    rows: tuple
    slopes: dict = field(default_factory=dict)


def _run_cell_trial(config: ExperimentConfig, spec, target, noise, kernel, n, m, t) -> dict:
    lam = config.lambda_for(n, m)
    need_full = any(mt in config.metrics for mt in ("avg_vs_full_rho", "avg_vs_full_rkhs", "full_vs_target_rho"))
    need_avg = any(mt in config.metrics for mt in ("avg_vs_full_rho", "avg_vs_full_rkhs", "avg_vs_target_rho"))
    try:
        data = sample_dataset(target, spec, noise, n, config.seed, "data", n, m, t)
        full = krr.fit(data, lam, kernel) if need_full else None
        avg = None
        if need_avg:
            part = partition(n, m, config.strategy, seed=(config.seed, "part", n, m, t))
            avg = fit_distributed(data, part, lam, kernel)

        def target_fn(xs):
            return f_rho_eval(target, spec, xs)

        test_seed = (config.seed, "test", n, m, t)
        values = {}
        for metric in config.metrics:
            if metric == "avg_vs_full_rho":
                values[metric] = l2_dist_mc(avg.predict, full.predict, config.n_test, test_seed)
            elif metric == "avg_vs_full_rkhs":
                values[metric] = float(np.sqrt(max(rkhs_dist_sq(avg.model, full), 0.0)))
            elif metric == "full_vs_target_rho":
                values[metric] = l2_dist_mc(full.predict, target_fn, config.n_test, test_seed)
            elif metric == "avg_vs_target_rho":
                values[metric] = l2_dist_mc(avg.predict, target_fn, config.n_test, test_seed)
        return values
    except NumericError as exc:
        raise NumericError(
            f"trial (n={n}, m={m}, t={t}) failed: {exc}", pivot=exc.pivot, block=exc.block
        ) from exc


def run_rate_experiment(config: ExperimentConfig, workers: int = 1) -> RateResult:
    """Run every (N, m, trial) cell and aggregate means, stderrs, and
    log-log slope fits; deterministic for any worker count."""
    kernel = kernel_from_config(config.kernel)
    spec = make_spectral(kernel)
    target = make_source_target(
        spec,
        r=float(config.target["r"]),
        decay=float(config.target["decay"]),
        seed=int(config.target.get("seed", config.seed)),
    )
    noise = noise_from_config(config.noise)

    cells = [(n, m) for n in config.n_grid for m in config.m_values(n)]
    jobs = [(ci, t) for ci in range(len(cells)) for t in range(config.trials)]
    results = [[None] * config.trials for _ in cells]

    def run_job(job):
        ci, t = job
        n, m = cells[ci]
        results[ci][t] = _run_cell_trial(config, spec, target, noise, kernel, n, m, t)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_job, jobs))
    else:
        for job in jobs:
            run_job(job)

    rows = []
    for ci, (n, m) in enumerate(cells):
        lam = config.lambda_for(n, m)
        for metric in config.metrics:
            vals = np.array([results[ci][t][metric] for t in range(config.trials)])
            rows.append(
                RateRow(
                    n=n,
                    m=m,
                    lam=lam,
                    metric=metric,
                    mean=float(vals.mean()),
                    stderr=float(vals.std(ddof=1) / np.sqrt(config.trials)),
                    trials=config.trials,
                )
            )

    slopes = {}
    multiple_m = config.m_rule.get("kind") == "fixed" and len(config.m_rule["values"]) > 1
    for metric in config.metrics:
        groups = {}
        for row in rows:
            if row.metric != metric:
                continue
            key = f"{metric}[m={row.m}]" if multiple_m else metric
            groups.setdefault(key, []).append((row.n, row.mean))
        for key, pts in groups.items():
            if len(pts) >= 3 and all(y > 0 for _, y in pts):
                slopes[key] = fit_loglog_slope(pts)
    return RateResult(rows=tuple(rows), slopes=slopes)


def m_monotonicity_report(result: RateResult, metric: str) -> list:
    """Consecutive-gap report for an m-sweep at fixed N.

    For each adjacent pair of block counts: the gap mean(m_k) -
    mean(m_{k+1}), the pooled standard error, and whether the decrease is
    significant at two pooled standard errors.  Expectation claims are
    reported this way rather than hard-asserted.
    """
    rows = sorted((r for r in result.rows if r.metric == metric), key=lambda r: (r.n, r.m))
    report = []
    for a, b in zip(rows, rows[1:]):
        if a.n != b.n:
            continue
        pooled = float(np.hypot(a.stderr, b.stderr))
        gap = a.mean - b.mean
        report.append(
            {
                "n": a.n,
                "m_from": a.m,
                "m_to": b.m,
                "gap": gap,
                "pooled_stderr": pooled,
                "significant_decrease": gap > 2 * pooled,
            }
        )
    return report


def emit(result: RateResult, path, fmt: str = "csv") -> None:
    """Write the result table as CSV (pinned schema, LF endings, shortest
    round-trip floats) or as a log-log SVG scatter with fitted lines."""
    if fmt == "csv":
        _emit_csv(result, path)
    elif fmt == "svg":
        _emit_svg(result, path)
    else:
        raise ValueError(f"unknown emit format: {fmt!r}")


def _emit_csv(result: RateResult, path) -> None:
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("N,m,lambda,metric,mean,stderr,trials\n")
            for row in result.rows:
                fh.write(
                    f"{row.n},{row.m},{row.lam!r},{row.metric},{row.mean!r},{row.stderr!r},{row.trials}\n"
                )
    except OSError as exc:
        raise IOError(f"cannot write {path}: {exc}") from exc


def emit_slopes_csv(result: RateResult, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("series,slope,stderr,intercept\n")
        for key in sorted(result.slopes):
            fsl = result.slopes[key]
            fh.write(f"{key},{fsl.slope!r},{fsl.stderr!r},{fsl.intercept!r}\n")


def read_result_csv(path) -> tuple:
    """Parse back an emitted CSV; floats reproduce bit-exactly."""
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "N,m,lambda,metric,mean,stderr,trials":
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in fh:
            n, m, lam, metric, mean, stderr, trials = line.rstrip("\n").split(",")
            rows.append(
                RateRow(
                    n=int(n),
                    m=int(m),
                    lam=float(lam),
                    metric=metric,
                    mean=float(mean),
                    stderr=float(stderr),
                    trials=int(trials),
                )
            )
    return tuple(rows)


_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _emit_svg(result: RateResult, path, width: int = 640, height: int = 480) -> None:
    """Log-log scatter of mean vs N with one fitted line per series."""
    series = {}
    multiple_m = len({row.m for row in result.rows}) > 1
    for row in result.rows:
        key = f"{row.metric}[m={row.m}]" if multiple_m else row.metric
        if row.mean > 0:
            series.setdefault(key, []).append((row.n, row.mean))
    pts = [p for ps in series.values() for p in ps]
    if not pts:
        xs_lo, xs_hi, ys_lo, ys_hi = 1.0, 10.0, 0.1, 1.0
    else:
        xs_lo = min(x for x, _ in pts)
        xs_hi = max(x for x, _ in pts)
        ys_lo = min(y for _, y in pts)
        ys_hi = max(y for _, y in pts)
    lx0, lx1 = math.log(xs_lo) - 0.2, math.log(xs_hi) + 0.2
    ly0, ly1 = math.log(ys_lo) - 0.2, math.log(ys_hi) + 0.2
    margin = 60

    def to_xy(x, y):
        px = margin + (math.log(x) - lx0) / (lx1 - lx0) * (width - 2 * margin)
        py = height - margin - (math.log(y) - ly0) / (ly1 - ly0) * (height - 2 * margin)
        return px, py

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{margin}" y="{margin}" width="{width - 2 * margin}" '
        f'height="{height - 2 * margin}" fill="none" stroke="#999"/>',
        f'<text x="{width / 2:.1f}" y="{height - 15}" text-anchor="middle" '
        f'font-size="13">N (log scale)</text>',
        f'<text x="18" y="{height / 2:.1f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 18 {height / 2:.1f})">mean distance (log scale)</text>',
    ]
    for i, key in enumerate(sorted(series)):
        color = _SVG_COLORS[i % len(_SVG_COLORS)]
        for x, y in series[key]:
            px, py = to_xy(x, y)
            parts.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="3.5" fill="{color}"/>')
        fsl = result.slopes.get(key)
        if fsl is not None:
            xa, xb = min(x for x, _ in series[key]), max(x for x, _ in series[key])
            pa = to_xy(xa, math.exp(fsl.intercept + fsl.slope * math.log(xa)))
            pb = to_xy(xb, math.exp(fsl.intercept + fsl.slope * math.log(xb)))
            parts.append(
                f'<line x1="{pa[0]:.2f}" y1="{pa[1]:.2f}" x2="{pb[0]:.2f}" y2="{pb[1]:.2f}" '
                f'stroke="{color}" stroke-width="1.5"/>'
            )
            label = f"{key}: slope {fsl.slope:.3f}"
        else:
            label = key
        parts.append(
            f'<text x="{margin + 8}" y="{margin + 18 + 16 * i}" font-size="12" '
            f'fill="{color}">{label}</text>'
        )
    parts.append("</svg>")
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(parts) + "\n")
    except OSError as exc:
        raise IOError(f"cannot write {path}: {exc}") from exc
