"""Mercer kernels on the unit interval: pointwise evaluation, Gram assembly,
and the uniform bound kappa = sup sqrt(K(x, x)).

Two kernels are provided:

- ``Gaussian(bandwidth)`` on the real line.
- ``PeriodicSobolev(s, k_max)`` on [0, 1): the finitely truncated series

      K(x, y) = 1 + 2 * sum_{k=1}^{k_max} k^(-2s) * cos(2*pi*k*(x - y)),

  whose eigen-system under the uniform distribution is explicit
  (constant mode with eigenvalue 1, cosine/sine pairs with eigenvalue
  k^(-2s)).  The truncated kernel is treated as the exact kernel
  throughout the package, so every operator quantity built on it is
  finite-rank and exactly computable.

Gram matrices are mirrored from the upper triangle so they are
bit-exact symmetric.  For the truncated kernel the Gram is assembled
through the trigonometric feature factorization Phi @ Phi.T (the same
finite sum, accumulated in a different order), which keeps large-N
assembly at BLAS speed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Gaussian",
    "PeriodicSobolev",
    "kernel_from_config",
    "kernel_to_config",
    "trig_basis",
]


def _check_points(x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(x)):
        raise ValueError("kernel input contains non-finite values")
    return x


def trig_basis(x, k_max: int) -> np.ndarray:
    """Orthonormal trigonometric basis on [0, 1) under the uniform measure.

    Returns the (len(x), 2*k_max + 1) matrix with columns ordered as
    [1, sqrt(2)cos(2pi x), sqrt(2)sin(2pi x), sqrt(2)cos(4pi x), ...],
    matching the non-increasing eigenvalue order of PeriodicSobolev.
    """
    x = _check_points(x)
    k = np.arange(1, k_max + 1)
    ang = (2.0 * np.pi) * np.outer(x, k)
    basis = np.empty((x.shape[0], 2 * k_max + 1))
    basis[:, 0] = 1.0
    root2 = np.sqrt(2.0)
    basis[:, 1::2] = root2 * np.cos(ang)
    basis[:, 2::2] = root2 * np.sin(ang)
    return basis


@dataclass(frozen=True)
class Gaussian:
    """Gaussian kernel exp(-(x-y)^2 / (2 * bandwidth^2)) on the real line."""

    bandwidth: float

    def __post_init__(self):
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")

    def eval(self, x, y):
        x, y = _check_points(x), _check_points(y)
        d = (x - y) / self.bandwidth
        out = np.exp(-0.5 * d * d)
        return float(out[0]) if out.size == 1 else out

    def kappa(self) -> float:
        return 1.0

    def cross(self, x, y) -> np.ndarray:
        """Kernel matrix K[i, j] = K(x[i], y[j])."""
        x, y = _check_points(x), _check_points(y)
        d = (x[:, None] - y[None, :]) / self.bandwidth
        return np.exp(-0.5 * d * d)

    def gram(self, x) -> np.ndarray:
        x = _check_points(x)
        if x.size == 0:
            raise ValueError("gram requires a non-empty point set")
        g = self.cross(x, x)
        return np.triu(g) + np.triu(g, 1).T


@dataclass(frozen=True)
class PeriodicSobolev:
    """Truncated periodic kernel with polynomial eigenvalue decay k^(-2s)."""

    s: int
    k_max: int = 2000

    def __post_init__(self):
        if int(self.s) != self.s or self.s < 1:
            raise ValueError(f"s must be an integer >= 1, got {self.s}")
        if int(self.k_max) != self.k_max or self.k_max < 1:
            raise ValueError(f"k_max must be an integer >= 1, got {self.k_max}")

    def _weights(self) -> np.ndarray:
        k = np.arange(1, self.k_max + 1, dtype=float)
        return k ** (-2.0 * self.s)

    def eval(self, x, y):
        x, y = _check_points(x), _check_points(y)
        t = np.atleast_1d(x - y)
        k = np.arange(1, self.k_max + 1, dtype=float)
        out = 1.0 + 2.0 * np.cos(2.0 * np.pi * np.outer(t, k)) @ self._weights()
        return float(out[0]) if out.size == 1 else out

    def kappa(self) -> float:
        return float(np.sqrt(1.0 + 2.0 * self._weights().sum()))

    def feature_matrix(self, x) -> np.ndarray:
        """Rows are the feature vectors v(x_i) with K(x, y) = v(x).v(y)."""
        phi = trig_basis(x, self.k_max)
        phi[:, 1:] *= np.sqrt(np.repeat(self._weights(), 2))
        return phi

    def cross(self, x, y) -> np.ndarray:
        return self.feature_matrix(x) @ self.feature_matrix(y).T

    def gram(self, x) -> np.ndarray:
        x = _check_points(x)
        if x.size == 0:
            raise ValueError("gram requires a non-empty point set")
        v = self.feature_matrix(x)
        g = v @ v.T
        return np.triu(g) + np.triu(g, 1).T


def kernel_from_config(cfg: dict):
    """Build a kernel from its config-file form.

    {"kind": "gaussian", "bandwidth": w} or
    {"kind": "periodic_sobolev", "s": s, "k_max": k}.
    """
    kind = cfg.get("kind")
    if kind == "gaussian":
        return Gaussian(bandwidth=float(cfg["bandwidth"]))
    if kind == "periodic_sobolev":
        return PeriodicSobolev(s=int(cfg["s"]), k_max=int(cfg.get("k_max", 2000)))
    raise ValueError(f"unknown kernel kind: {kind!r}")


def kernel_to_config(kernel) -> dict:
    if isinstance(kernel, Gaussian):
        return {"kind": "gaussian", "bandwidth": kernel.bandwidth}
    if isinstance(kernel, PeriodicSobolev):
        return {"kind": "periodic_sobolev", "s": kernel.s, "k_max": kernel.k_max}
    raise ValueError(f"unknown kernel type: {type(kernel).__name__}")
