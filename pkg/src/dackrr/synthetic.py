"""Exact finite-rank spectral ground truth and seeded data generation.

The input distribution is fixed to the uniform distribution on [0, 1),
which makes the eigenfunctions of the truncated periodic kernel exactly
trigonometric and every spectral quantity a finite sum.

All randomness flows through ``rng_for(seed, *path)``: a Philox
(counter-based) generator keyed by the tuple (seed, *path).  Sub-streams
for different paths are independent and insensitive to the order in
which they are consumed, so trials can run concurrently without
changing any result.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from .kernels import PeriodicSobolev, trig_basis

__all__ = [
    "rng_for",
    "SpectralModel",
    "TargetFunction",
    "BoundedUniform",
    "GaussianNoise",
    "Heteroscedastic",
    "Dataset",
    "make_spectral",
    "make_source_target",
    "f_rho_eval",
    "sample_dataset",
    "save_dataset",
    "load_dataset",
    "noise_from_config",
]


def rng_for(seed, *path) -> np.random.Generator:
    """Philox generator for the sub-stream identified by (seed, *path).

    Components may be ints, short strings (hashed with crc32 so the key
    stays a plain integer tuple), or nested tuples thereof.
    """
    def flatten(part):
        if isinstance(part, (int, np.integer)):
            return [int(part) & 0xFFFFFFFFFFFFFFFF]
        if isinstance(part, str):
            return [zlib.crc32(part.encode())]
        if isinstance(part, tuple):
            return [k for sub in part for k in flatten(sub)]
        raise TypeError(f"seed path component must be int, str, or tuple, got {type(part).__name__}")

    key = tuple(k for part in (seed, *path) for k in flatten(part))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


@dataclass(frozen=True)
class SpectralModel:
    """Eigen-system of the truncated periodic kernel under uniform inputs.

    eigenvalues[0] = 1 belongs to the constant function; each frequency k
    contributes the pair sqrt(2)cos(2 pi k x), sqrt(2)sin(2 pi k x) with
    eigenvalue k^(-2s).  dim = 2*k_max + 1.
    """

    s: int
    k_max: int
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return 2 * self.k_max + 1

    def trace(self) -> float:
        return float(self.eigenvalues.sum())

    def kappa(self) -> float:
        return float(np.sqrt(self.trace()))

    def basis(self, x) -> np.ndarray:
        """(len(x), dim) matrix of orthonormal eigenfunction values."""
        return trig_basis(x, self.k_max)

    def weighted_basis(self, x) -> np.ndarray:
        """Feature rows v(x) = sqrt(mu) * e(x); K(x, y) = v(x).v(y)."""
        v = trig_basis(x, self.k_max)
        v *= np.sqrt(self.eigenvalues)
        return v


def make_spectral(kernel: PeriodicSobolev) -> SpectralModel:
    if not isinstance(kernel, PeriodicSobolev):
        raise ValueError(
            "exact spectral models are only available for the truncated "
            f"periodic kernel, not {type(kernel).__name__}"
        )
    mu = np.empty(2 * kernel.k_max + 1)
    mu[0] = 1.0
    k = np.arange(1, kernel.k_max + 1, dtype=float)
    mu[1::2] = k ** (-2.0 * kernel.s)
    mu[2::2] = mu[1::2]
    return SpectralModel(s=kernel.s, k_max=kernel.k_max, eigenvalues=mu)


@dataclass(frozen=True)
class TargetFunction:
    """Regression target with coefficients c_l = mu_l^r * g_l in the
    orthonormal basis; r is the smoothness exponent of the construction."""

    coeffs: np.ndarray = field(repr=False)
    r: float
    g_norm: float
    sup_bound: float

    def __call__(self, spec: SpectralModel, x):
        return f_rho_eval(self, spec, x)


def make_source_target(spec: SpectralModel, r: float, decay: float, seed) -> TargetFunction:
    """Deterministic target: |g| = 1 for the constant mode and k^(-decay)
    for both modes at frequency k; signs alternate by index starting from
    a seed-derived sign."""
    if not 0.0 < r <= 1.0:
        raise ValueError(f"source exponent r must lie in (0, 1], got {r}")
    if decay <= 0.5:
        raise ValueError(f"decay must exceed 1/2 for a square-summable g, got {decay}")
    g = np.empty(spec.dim)
    g[0] = 1.0
    k = np.arange(1, spec.k_max + 1, dtype=float)
    g[1::2] = k ** (-decay)
    g[2::2] = g[1::2]
    first = 1.0 if rng_for(seed, "sign").integers(0, 2) == 0 else -1.0
    signs = first * np.where(np.arange(spec.dim) % 2 == 0, 1.0, -1.0)
    g *= signs
    coeffs = spec.eigenvalues**r * g
    sup = abs(coeffs[0]) + np.sqrt(2.0) * np.abs(coeffs[1:]).sum()
    return TargetFunction(
        coeffs=coeffs,
        r=r,
        g_norm=float(np.sqrt((g * g).sum())),
        sup_bound=float(sup),
    )


def f_rho_eval(target: TargetFunction, spec: SpectralModel, x):
    out = spec.basis(x) @ target.coeffs
    return float(out[0]) if out.size == 1 else out


@dataclass(frozen=True)
class BoundedUniform:
    """Uniform noise on [-half_width, half_width]; outputs are a.s. bounded."""

    half_width: float

    def sample(self, rng: np.random.Generator, x: np.ndarray) -> np.ndarray:
        return rng.uniform(-self.half_width, self.half_width, size=x.shape)


@dataclass(frozen=True)
class GaussianNoise:
    """Homoscedastic Gaussian noise (uniformly bounded conditional variance)."""

    std: float

    def sample(self, rng: np.random.Generator, x: np.ndarray) -> np.ndarray:
        return rng.normal(0.0, self.std, size=x.shape)


@dataclass(frozen=True)
class Heteroscedastic:
    """Gaussian noise with input-dependent standard deviation.

    profile "linear": std(x) = scale * x; profile "sqrt": scale * sqrt(x).
    Generatable for completeness; no rate claims are attached to it.
    """

    scale: float
    profile: str = "linear"

    def std_fn(self, x: np.ndarray) -> np.ndarray:
        if self.profile == "linear":
            return self.scale * x
        if self.profile == "sqrt":
            return self.scale * np.sqrt(x)
        raise ValueError(f"unknown heteroscedastic profile: {self.profile!r}")

    def sample(self, rng: np.random.Generator, x: np.ndarray) -> np.ndarray:
        return rng.normal(0.0, 1.0, size=x.shape) * self.std_fn(x)


def noise_from_config(cfg: dict):
    kind = cfg.get("kind")
    if kind == "bounded_uniform":
        return BoundedUniform(half_width=float(cfg["half_width"]))
    if kind == "gaussian":
        return GaussianNoise(std=float(cfg["std"]))
    if kind == "heteroscedastic":
        return Heteroscedastic(scale=float(cfg["scale"]), profile=cfg.get("profile", "linear"))
    raise ValueError(f"unknown noise kind: {kind!r}")


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    seed: tuple

    @property
    def n(self) -> int:
        return self.x.shape[0]


def sample_dataset(target: TargetFunction, spec: SpectralModel, noise, n: int, seed, *path) -> Dataset:
    """n i.i.d. pairs with uniform inputs on [0, 1); fully determined by
    (seed, *path)."""
    if n < 1:
        raise ValueError(f"dataset size must be >= 1, got {n}")
    rng_x = rng_for(seed, "x", *path)
    rng_eps = rng_for(seed, "eps", *path)
    x = rng_x.random(n)
    y = f_rho_eval(target, spec, x) + noise.sample(rng_eps, x)
    return Dataset(x=x, y=np.atleast_1d(y), seed=(seed, *path))


def save_dataset(data: Dataset, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("x,y\n")
        for xi, yi in zip(data.x, data.y):
            fh.write(f"{xi:.17g},{yi:.17g}\n")


def load_dataset(path) -> Dataset:
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Dataset(x=raw[:, 0].copy(), y=raw[:, 1].copy(), seed=("file",))
