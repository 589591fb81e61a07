"""Command-line front end.

Subcommands: solve, distribute, effdim, verify-lemmas, rate-experiment.
Exit codes: 0 success, 2 config error, 3 numeric failure, 4 failed
verification assertion (verify-lemmas).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import krr, operator_lab
from .distributed import fit_distributed, partition
from .experiments import config_from_file, emit, emit_slopes_csv, run_rate_experiment
from .kernels import PeriodicSobolev, kernel_from_config
from .krr import NumericError
from .synthetic import (
    Dataset,
    load_dataset,
    make_source_target,
    make_spectral,
    noise_from_config,
    sample_dataset,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_ASSERTION = 4


def _load_json_or_toml(path: str) -> dict:
    if path.endswith(".toml"):
        if sys.version_info >= (3, 11):
            import tomllib as toml
        else:
            import tomli as toml
        return toml.loads(Path(path).read_text())
    return json.loads(Path(path).read_text())


def _dataset_from_config(cfg: dict) -> Dataset:
    if "csv" in cfg:
        return load_dataset(cfg["csv"])
    syn = cfg["synthetic"]
    kernel = kernel_from_config(syn["kernel"])
    spec = make_spectral(kernel)
    target = make_source_target(
        spec, r=float(syn["r"]), decay=float(syn.get("decay", 1.0)), seed=int(syn.get("seed", 0))
    )
    noise = noise_from_config(syn["noise"])
    return sample_dataset(target, spec, noise, int(syn["n"]), int(syn.get("seed", 0)))


def _cmd_solve(args) -> int:
    cfg = _load_json_or_toml(args.config)
    kernel = kernel_from_config(cfg["kernel"])
    data = _dataset_from_config(cfg["data"])
    model = krr.fit(data, float(cfg["lambda"]), kernel)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    krr.save_model(model, out / "model.csv")
    print(f"solved n={model.n} lambda={model.lam!r} rkhs_norm={float(np.sqrt(krr.rkhs_norm_sq(model)))!r}")
    print(f"wrote {out / 'model.csv'}")
    return EXIT_OK


def _cmd_distribute(args) -> int:
    kernel = kernel_from_config(json.loads(args.kernel))
    data = load_dataset(args.data)
    part = partition(data.n, args.m, strategy=args.strategy, seed=args.seed)
    avg = fit_distributed(data, part, args.lam, kernel, workers=args.workers)
    krr.save_model(avg.model, args.out)
    sizes = ",".join(str(s) for s in avg.block_sizes)
    print(f"averaged m={part.m} blocks (sizes {sizes}); wrote {args.out}")
    return EXIT_OK


def _cmd_effdim(args) -> int:
    cfg = _load_json_or_toml(args.config)
    kernel = kernel_from_config(cfg["kernel"])
    if not isinstance(kernel, PeriodicSobolev):
        raise ValueError("effdim requires the truncated periodic kernel")
    spec = make_spectral(kernel)
    lambdas = [float(v) for v in cfg["lambdas"]]
    empirical_cfg = cfg.get("empirical")
    rows = []
    gram = None
    n = None
    if empirical_cfg:
        target = make_source_target(spec, r=0.5, decay=1.0, seed=int(empirical_cfg.get("seed", 0)))
        noise = noise_from_config(empirical_cfg.get("noise", {"kind": "bounded_uniform", "half_width": 0.0}))
        n = int(empirical_cfg["n"])
        data = sample_dataset(target, spec, noise, n, int(empirical_cfg.get("seed", 0)))
        gram = kernel.gram(data.x)
    for lam in lambdas:
        spectral = operator_lab.effective_dimension_spectral(spec, lam)
        if gram is not None:
            empirical = operator_lab.effective_dimension_empirical(gram, n, lam)
            rows.append((lam, spectral, empirical))
        else:
            rows.append((lam, spectral, None))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "effdim.csv", "w", newline="\n") as fh:
        fh.write("lambda,spectral,empirical\n")
        for lam, spectral, empirical in rows:
            emp = "" if empirical is None else repr(empirical)
            fh.write(f"{lam!r},{spectral!r},{emp}\n")
    for lam, spectral, empirical in rows:
        line = f"lambda={lam:g} effdim={spectral:.6g}"
        if empirical is not None:
            line += f" empirical={empirical:.6g}"
        print(line)
    print(f"wrote {out / 'effdim.csv'}")
    return EXIT_OK


def _lemma_battery(cfg: dict):
    """Identity and concentration checks; yields (name, statistic,
    threshold, passed)."""
    seed = int(cfg.get("seed", 0))
    kernel = PeriodicSobolev(s=int(cfg.get("s", 1)), k_max=int(cfg.get("k_max", 30)))
    spec = make_spectral(kernel)
    target = make_source_target(spec, r=float(cfg.get("r", 0.5)), decay=1.0, seed=seed)
    noise = noise_from_config(cfg.get("noise", {"kind": "bounded_uniform", "half_width": 0.5}))

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(int(cfg.get("second_order_pairs", 100))):
        base_a = rng.standard_normal((50, 50))
        base_b = rng.standard_normal((50, 50))
        a = base_a @ base_a.T / 50 + 0.1 * np.eye(50)
        b = base_b @ base_b.T / 50 + 0.1 * np.eye(50)
        worst = max(worst, operator_lab.second_order_residual(a, b))
    yield ("second_order_residual", worst, 1e-10, worst <= 1e-10)

    worst = 0.0
    n = int(cfg.get("n", 60))
    for i, m in enumerate(cfg.get("m_values", (2, 3, 5))):
        data = sample_dataset(target, spec, noise, n, seed, "lemma-data", i)
        part = partition(n, int(m))
        worst = max(
            worst,
            operator_lab.verify_difference_representation(data, part, 0.1, kernel, target, spec),
        )
    yield ("difference_representation", worst, 1e-8, worst <= 1e-8)

    data = sample_dataset(target, spec, noise, n, seed, "m1-data")
    full = krr.fit(data, 0.1, kernel)
    avg = fit_distributed(data, partition(n, 1), 0.1, kernel)
    gap = np.sqrt(max(krr.rkhs_dist_sq(avg.model, full), 0.0))
    limit = 1e-10 * max(1.0, np.sqrt(krr.rkhs_norm_sq(full)))
    yield ("single_block_equivalence", gap, limit, gap <= limit)

    lam = float(cfg.get("lambda", 0.01))
    n_conc = int(cfg.get("concentration_n", 500))
    report = operator_lab.concentration_check(
        spec, lam, n_conc, int(cfg.get("trials", 500)), (0.05,), seed
    )
    yield ("hs_moment_bound", report.hs_sq_mean, report.hs_sq_bound, report.hs_bound_holds)
    frac = report.violations[0.05] / report.n_trials
    yield ("tail_bound_violations", frac, 0.05, frac <= 0.05)

    mean, stderr = operator_lab.whitened_feature_second_moment(spec, lam, 100_000, seed)
    eff = operator_lab.effective_dimension_spectral(spec, lam)
    err = abs(mean - eff)
    # For stationary kernels the whitened feature norm is a.s. constant, so
    # the Monte-Carlo stderr can collapse to 0; allow float accumulation.
    tol = 3.0 * stderr + 1e-9 * max(1.0, eff)
    yield ("whitened_feature_moment", err, tol, err <= tol)


def _cmd_verify_lemmas(args) -> int:
    cfg = _load_json_or_toml(args.config) if args.config else {}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = list(_lemma_battery(cfg))
    with open(out / "lemmas.csv", "w", newline="\n") as fh:
        fh.write("check,statistic,threshold,pass\n")
        for name, stat, thr, ok in rows:
            fh.write(f"{name},{stat!r},{thr!r},{ok}\n")
    all_ok = True
    for name, stat, thr, ok in rows:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {stat:.3e} (threshold {thr:.3e})")
        all_ok &= ok
    print(f"wrote {out / 'lemmas.csv'}")
    return EXIT_OK if all_ok else EXIT_ASSERTION


def _cmd_rate_experiment(args) -> int:
    config = config_from_file(args.config)
    result = run_rate_experiment(config, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    emit(result, out / "rates.csv", "csv")
    emit(result, out / "rates.svg", "svg")
    emit_slopes_csv(result, out / "slopes.csv")
    for key in sorted(result.slopes):
        fsl = result.slopes[key]
        print(f"{key}: slope {fsl.slope:+.4f} +- {fsl.stderr:.4f}")
    print(f"wrote {out / 'rates.csv'}, {out / 'slopes.csv'}, {out / 'rates.svg'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dac-krr",
        description="Divide-and-conquer kernel ridge regression toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="fit a single-machine estimator from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("distribute", help="fit the block-averaged estimator on a CSV dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--kernel", required=True, help='kernel JSON, e.g. {"kind":"gaussian","bandwidth":1.0}')
    p.add_argument("--strategy", choices=["contiguous", "shuffled"], default="contiguous")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_distribute)

    p = sub.add_parser("effdim", help="effective dimension along a lambda grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_effdim)

    p = sub.add_parser("verify-lemmas", help="run the operator identity and concentration battery")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_verify_lemmas)

    p = sub.add_parser("rate-experiment", help="config-driven convergence-rate sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=".")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_rate_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
