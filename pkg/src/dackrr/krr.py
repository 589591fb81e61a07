"""Single-machine regularized least-squares estimator and its norms.

The objective is the mean squared error plus lambda times the squared
RKHS norm, so the representer coefficients solve

    (G + N * lambda * I) alpha = y

(note the factor N in front of lambda: the data-fit term is averaged).
The system is solved by a Cholesky factorization; no jitter is ever
added silently, a failed factorization surfaces as ``NumericError``
carrying the failing pivot index.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .kernels import kernel_from_config, kernel_to_config
from .synthetic import Dataset, rng_for

__all__ = [
    "NumericError",
    "KrrModel",
    "fit",
    "predict",
    "rkhs_norm_sq",
    "rkhs_dist_sq",
    "l2_dist_mc",
    "save_model",
    "load_model",
]

RESIDUAL_RTOL = 1e-8


class NumericError(RuntimeError):
    """Linear-algebra failure; carries the failing pivot/block when known."""

    def __init__(self, message, pivot=None, block=None):
        super().__init__(message)
        self.pivot = pivot
        self.block = block


@dataclass(frozen=True)
class KrrModel:
    """f(x) = sum_i alpha_i K(support_i, x)."""

    support: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    lam: float
    kernel: object

    @property
    def n(self) -> int:
        return self.support.shape[0]

    def predict(self, x):
        return predict(self, x)

    def __call__(self, x):
        return predict(self, x)


def _cholesky_solve(a: np.ndarray, b: np.ndarray, block=None) -> np.ndarray:
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=True)
        return scipy.linalg.cho_solve(factor, b)
    except np.linalg.LinAlgError as exc:
        m = re.match(r"(\d+)-th leading minor", str(exc))
        pivot = int(m.group(1)) if m else None
        raise NumericError(
            f"Cholesky factorization failed: {exc}", pivot=pivot, block=block
        ) from exc
    except ValueError as exc:
        raise NumericError(f"non-finite linear system: {exc}", block=block) from exc


def fit(data: Dataset, lam: float, kernel, *, block=None) -> KrrModel:
    """Solve the regularized normal equations on the full sample."""
    if not (np.isfinite(lam) and lam > 0):
        raise ValueError(f"lambda must be positive, got {lam}")
    n = data.n
    gram = kernel.gram(data.x)
    system = gram + (n * lam) * np.eye(n)
    alpha = _cholesky_solve(system, data.y, block=block)
    residual = np.linalg.norm(system @ alpha - data.y)
    if residual > RESIDUAL_RTOL * max(np.linalg.norm(data.y), 1e-300):
        raise NumericError(
            f"normal-equation residual {residual:.3e} exceeds tolerance", block=block
        )
    return KrrModel(support=data.x, alpha=alpha, lam=lam, kernel=kernel)


def predict(model: KrrModel, x):
    """Representer evaluation sum_i alpha_i K(support_i, x)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = model.kernel.cross(x, model.support) @ model.alpha
    return float(out[0]) if out.size == 1 else out


def rkhs_norm_sq(model: KrrModel) -> float:
    gram = model.kernel.gram(model.support)
    return float(model.alpha @ gram @ model.alpha)


def rkhs_dist_sq(a: KrrModel, b: KrrModel) -> float:
    """Exact squared RKHS distance on the union of supports."""
    if a.kernel != b.kernel:
        raise ValueError("rkhs_dist_sq requires models sharing one kernel")
    if a.support.shape == b.support.shape and np.array_equal(a.support, b.support):
        delta = a.alpha - b.alpha
        gram = a.kernel.gram(a.support)
        return float(delta @ gram @ delta)
    support = np.concatenate([a.support, b.support])
    beta = np.concatenate([a.alpha, -b.alpha])
    gram = a.kernel.gram(support)
    return float(beta @ gram @ beta)


def l2_dist_mc(f, g, n_test: int, seed, *, with_stderr: bool = False):
    """Monte-Carlo L2 distance between two functions under uniform inputs.

    sqrt(mean((f(t) - g(t))^2)) over n_test points t ~ U[0, 1),
    deterministic given the seed.  With ``with_stderr`` the delta-method
    standard error of the distance is returned alongside.
    """
    if n_test < 1:
        raise ValueError(f"n_test must be >= 1, got {n_test}")
    t = rng_for(seed, "mc-l2").random(n_test)
    sq = np.square(np.asarray(f(t), dtype=float) - np.asarray(g(t), dtype=float))
    mean_sq = float(sq.mean())
    dist = float(np.sqrt(mean_sq))
    if not with_stderr:
        return dist
    if n_test < 2 or dist == 0.0:
        return dist, 0.0
    se_mean_sq = float(sq.std(ddof=1) / np.sqrt(n_test))
    return dist, se_mean_sq / (2.0 * dist)


def save_model(model: KrrModel, path) -> None:
    """One CSV file: a JSON header line (kernel, lambda, N) then the
    (support, coefficient) rows."""
    header = {
        "kernel": kernel_to_config(model.kernel),
        "lambda": model.lam,
        "n": model.n,
    }
    with open(path, "w", newline="\n") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        fh.write("support,coefficient\n")
        for xi, ai in zip(model.support, model.alpha):
            fh.write(f"{float(xi)!r},{float(ai)!r}\n")


def load_model(path) -> KrrModel:
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValueError(f"{path}: missing JSON header line")
        header = json.loads(first[2:])
        raw = np.loadtxt(fh, delimiter=",", skiprows=1, ndmin=2)
    model = KrrModel(
        support=raw[:, 0].copy(),
        alpha=raw[:, 1].copy(),
        lam=float(header["lambda"]),
        kernel=kernel_from_config(header["kernel"]),
    )
    if model.n != int(header["n"]):
        raise ValueError(f"{path}: row count != header n")
    return model
