"""Exactly computable operator quantities for the truncated kernel.

Everything here works in the RKHS-orthonormal coordinates phi_l =
sqrt(mu_l) * e_l, where

- the population integral operator is diag(mu),
- the empirical operator of a sample x_1..x_n is (1/n) sum v(x_i)v(x_i)^T
  with v(x) = sqrt(mu) * e(x),
- the RKHS norm is the Euclidean norm of the coordinate vector, and the
  L2 norm of a function with coordinates u is ||sqrt(mu) * u||.

The module provides the effective dimension (spectral and empirical),
the data-free limit of the ridge scheme with its approximation error,
the second-order expansion of inverse differences, the representation
of the averaged-minus-batch difference through empirical operators, and
Monte-Carlo checks of the whitened-operator concentration bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import krr
from .distributed import Partition, fit_distributed
from .synthetic import Dataset, SpectralModel, TargetFunction, rng_for

__all__ = [
    "effective_dimension_spectral",
    "effective_dimension_empirical",
    "data_free_limit",
    "approximation_error",
    "integral_operator_matrix",
    "empirical_operator_matrix",
    "second_order_residual",
    "verify_difference_representation",
    "whitened_feature_second_moment",
    "tail_constant",
    "ConcentrationReport",
    "concentration_check",
]


def effective_dimension_spectral(spec: SpectralModel, lam: float) -> float:
    """Trace of (L + lam)^(-1) L = sum_l mu_l / (mu_l + lam)."""
    if not (np.isfinite(lam) and lam > 0):
        raise ValueError(f"lambda must be positive, got {lam}")
    mu = spec.eigenvalues
    return float((mu / (mu + lam)).sum())


def effective_dimension_empirical(gram: np.ndarray, n: int, lam: float) -> float:
    """Same trace with the population operator replaced by the empirical
    one, computed from the Gram matrix as Tr((G/n)((G/n) + lam I)^(-1))."""
    if not (np.isfinite(lam) and lam > 0):
        raise ValueError(f"lambda must be positive, got {lam}")
    gram = np.asarray(gram, dtype=float)
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
        raise ValueError(f"gram must be square, got shape {gram.shape}")
    if not np.allclose(gram, gram.T, rtol=1e-12, atol=1e-12):
        raise ValueError("gram matrix is not symmetric")
    ev = np.linalg.eigvalsh(gram / n)
    ev = np.clip(ev, 0.0, None)
    return float((ev / (ev + lam)).sum())


def data_free_limit(spec: SpectralModel, target: TargetFunction, lam: float) -> np.ndarray:
    """Coefficients (orthonormal basis) of the population minimizer of the
    ridge objective: mu_l c_l / (mu_l + lam)."""
    if not (np.isfinite(lam) and lam > 0):
        raise ValueError(f"lambda must be positive, got {lam}")
    mu = spec.eigenvalues
    return mu * target.coeffs / (mu + lam)


def approximation_error(spec: SpectralModel, target: TargetFunction, lam: float, norm: str = "l2") -> float:
    """Exact distance between the data-free limit and the target.

    norm "l2": sqrt(sum (lam/(mu_l+lam))^2 c_l^2);
    norm "rkhs": the same sum weighted by 1/mu_l.
    """
    mu = spec.eigenvalues
    gap = data_free_limit(spec, target, lam) - target.coeffs
    if norm == "l2":
        return float(np.sqrt((gap * gap).sum()))
    if norm == "rkhs":
        return float(np.sqrt((gap * gap / mu).sum()))
    raise ValueError(f"norm must be 'l2' or 'rkhs', got {norm!r}")


def integral_operator_matrix(spec: SpectralModel) -> np.ndarray:
    return np.diag(spec.eigenvalues)


def empirical_operator_matrix(spec: SpectralModel, x) -> np.ndarray:
    """(1/n) sum_i v(x_i) v(x_i)^T in the RKHS-orthonormal coordinates."""
    v = spec.weighted_basis(x)
    t = (v.T @ v) / v.shape[0]
    return np.triu(t) + np.triu(t, 1).T


def second_order_residual(a: np.ndarray, b: np.ndarray) -> float:
    """Operator-norm residual of the exact expansion

        A^(-1) - B^(-1) = B^(-1)(B-A)B^(-1) + B^(-1)(B-A)A^(-1)(B-A)B^(-1).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    try:
        a_inv = np.linalg.inv(a)
        b_inv = np.linalg.inv(b)
    except np.linalg.LinAlgError as exc:
        raise krr.NumericError(f"singular operator: {exc}") from exc
    diff = b - a
    lhs = a_inv - b_inv
    rhs = b_inv @ diff @ b_inv + b_inv @ diff @ a_inv @ diff @ b_inv
    return float(np.linalg.norm(lhs - rhs, 2))


def _phi_coords(spec: SpectralModel, coeffs: np.ndarray) -> np.ndarray:
    """Orthonormal-basis coefficients -> RKHS-orthonormal coordinates."""
    return coeffs / np.sqrt(spec.eigenvalues)


def verify_difference_representation(
    data: Dataset,
    part: Partition,
    lam: float,
    kernel,
    target: TargetFunction,
    spec: SpectralModel,
) -> float:
    """Residual of the two operator representations of f_avg - f_full.

    Both representations express the difference through shifted inverses
    of empirical operators acting on the block fluctuation vectors; the
    fitted difference itself comes from the Gram-side solvers, so the
    check ties the two computational routes together.  Returns the larger
    of the two RKHS-norm residuals.
    """
    mu = spec.eigenvalues
    v = spec.weighted_basis(data.x)
    n = data.n

    full = krr.fit(data, lam, kernel)
    avg = fit_distributed(data, part, lam, kernel)
    lhs = v.T @ avg.model.alpha - v.T @ full.alpha

    f_rho_phi = _phi_coords(spec, target.coeffs)
    f_lam_phi = _phi_coords(spec, data_free_limit(spec, target, lam))
    mean_fluct = mu * (f_rho_phi - f_lam_phi)

    # Per-sample fluctuation vectors (y - f_lam(x)) v(x) and (y - f_rho(x)) v(x).
    resid_lam = data.y - v @ f_lam_phi
    resid_rho = data.y - v @ f_rho_phi

    t_full = (v.T @ v) / n
    eye = np.eye(spec.dim)
    shifted_full = t_full + lam * eye
    shifted_pop = np.diag(mu + lam)

    rhs_first = np.zeros(spec.dim)
    rhs_second = np.zeros(spec.dim)
    delta_full = np.zeros(spec.dim)
    for idx in part.blocks:
        w = len(idx) / n
        v_j = v[idx]
        delta_j = (v_j.T @ resid_lam[idx]) / len(idx) - mean_fluct
        delta_prime = (v_j.T @ resid_rho[idx]) / len(idx)
        delta_dprime = delta_j - delta_prime
        shifted_j = (v_j.T @ v_j) / len(idx) + lam * eye
        rhs_first += w * (
            np.linalg.solve(shifted_j, delta_j) - np.linalg.solve(shifted_full, delta_j)
        )
        q_j_prime = np.linalg.solve(shifted_j, delta_prime) - np.linalg.solve(shifted_pop, delta_prime)
        q_j_dprime = np.linalg.solve(shifted_j, delta_dprime) - np.linalg.solve(shifted_pop, delta_dprime)
        rhs_second += w * (q_j_prime + q_j_dprime)
        delta_full += w * delta_j
    rhs_second -= np.linalg.solve(shifted_full, delta_full) - np.linalg.solve(shifted_pop, delta_full)

    return float(
        max(np.linalg.norm(rhs_first - lhs), np.linalg.norm(rhs_second - lhs))
    )


def whitened_feature_second_moment(spec: SpectralModel, lam: float, n_draws: int, seed):
    """Monte-Carlo mean of ||(L + lam)^(-1/2) K_x||^2 over uniform draws,
    with its standard error.  The population value is the effective
    dimension."""
    if not (np.isfinite(lam) and lam > 0):
        raise ValueError(f"lambda must be positive, got {lam}")
    x = rng_for(seed, "feature-moment").random(n_draws)
    v = spec.weighted_basis(x)
    sq = (v * v) @ (1.0 / (spec.eigenvalues + lam))
    return float(sq.mean()), float(sq.std(ddof=1) / np.sqrt(n_draws))


def tail_constant(spec: SpectralModel, lam: float, n: int) -> float:
    """Deviation scale of the whitened operator error at sample size n:
    (2 kappa / sqrt(n)) * (kappa / sqrt(n lam) + sqrt(effdim))."""
    kappa = spec.kappa()
    eff = effective_dimension_spectral(spec, lam)
    return (2.0 * kappa / np.sqrt(n)) * (kappa / np.sqrt(n * lam) + np.sqrt(eff))


@dataclass(frozen=True)
class ConcentrationReport:
    """Monte-Carlo summary of the whitened operator deviation
    (L + lam)^(-1/2) (L - L_n)."""

    op_norms: np.ndarray = field(repr=False)
    hs_sq_mean: float
    hs_sq_bound: float
    tail_scale: float
    violations: dict
    n: int
    n_trials: int
    lam: float

    @property
    def hs_bound_holds(self) -> bool:
        return self.hs_sq_mean <= self.hs_sq_bound


def concentration_check(
    spec: SpectralModel,
    lam: float,
    n: int,
    n_trials: int,
    delta,
    seed,
) -> ConcentrationReport:
    """Sample the whitened operator deviation over independent datasets.

    Records the operator norm of every trial, the Monte-Carlo mean of the
    squared Hilbert-Schmidt norm against its proven bound
    kappa^2 * effdim / n, and how often the operator norm exceeds the
    tail bound tail_constant * log(2/delta) for each requested delta.
    """
    if not (np.isfinite(lam) and lam > 0):
        raise ValueError(f"lambda must be positive, got {lam}")
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    deltas = (delta,) if np.isscalar(delta) else tuple(delta)
    mu = spec.eigenvalues
    whiten = 1.0 / np.sqrt(mu + lam)
    op_norms = np.empty(n_trials)
    hs_sq = np.empty(n_trials)
    for t in range(n_trials):
        x = rng_for(seed, "concentration", t).random(n)
        dev = whiten[:, None] * (np.diag(mu) - empirical_operator_matrix(spec, x))
        op_norms[t] = np.linalg.norm(dev, 2)
        hs_sq[t] = (dev * dev).sum()
    kappa = spec.kappa()
    eff = effective_dimension_spectral(spec, lam)
    scale = tail_constant(spec, lam, n)
    violations = {
        d: int((op_norms > scale * np.log(2.0 / d)).sum()) for d in deltas
    }
    return ConcentrationReport(
        op_norms=op_norms,
        hs_sq_mean=float(hs_sq.mean()),
        hs_sq_bound=float(kappa * kappa * eff / n),
        tail_scale=float(scale),
        violations=violations,
        n=n,
        n_trials=n_trials,
        lam=lam,
    )
