"""Data partitioning and the divide-and-conquer averaged estimator.

Each block is solved independently with the same regularization
parameter, blocks weighted by their share of the sample:

    f_avg = sum_j (|D_j| / N) * f_j.

Because every local estimator lives in the span of its own block's
kernel sections, the average is again a kernel expansion over the full
input set: the global coefficient at index i in block j is
w_j * alpha_i^(j).  Block solves are independent pure computations and
may run on a thread pool; results are assembled in block-index order so
the output is identical for every worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import krr
from .krr import KrrModel, NumericError, l2_dist_mc, rkhs_dist_sq
from .synthetic import Dataset, rng_for

__all__ = ["Partition", "AveragedModel", "partition", "fit_distributed", "compare_estimators"]


@dataclass(frozen=True)
class Partition:
    """Disjoint index blocks covering range(n), weighted by block size."""

    blocks: tuple = field(repr=False)
    n: int

    @property
    def m(self) -> int:
        return len(self.blocks)

    @property
    def weights(self) -> np.ndarray:
        return np.array([len(b) / self.n for b in self.blocks])


def partition(n: int, m: int, strategy: str = "contiguous", seed=0) -> Partition:
    """Split range(n) into m blocks whose sizes differ by at most one.

    "contiguous" slices the index range in order; "shuffled" applies a
    seed-deterministic permutation first.
    """
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    if strategy == "contiguous":
        idx = np.arange(n)
    elif strategy == "shuffled":
        idx = rng_for(seed, "partition").permutation(n)
    else:
        raise ValueError(f"unknown partition strategy: {strategy!r}")
    base, extra = divmod(n, m)
    blocks, start = [], 0
    for j in range(m):
        size = base + (1 if j < extra else 0)
        blocks.append(idx[start : start + size].copy())
        start += size
    return Partition(blocks=tuple(blocks), n=n)


@dataclass(frozen=True)
class AveragedModel:
    """Weighted average of per-block estimators, stored as one kernel
    expansion over the full input set."""

    model: KrrModel
    block_sizes: tuple
    lam: float

    @property
    def m(self) -> int:
        return len(self.block_sizes)

    def predict(self, x):
        return self.model.predict(x)

    def __call__(self, x):
        return self.model.predict(x)


def _solve_block(data: Dataset, idx: np.ndarray, lam: float, kernel, j: int) -> np.ndarray:
    block_data = Dataset(x=data.x[idx], y=data.y[idx], seed=data.seed)
    try:
        return krr.fit(block_data, lam, kernel, block=j).alpha
    except NumericError as exc:
        raise NumericError(f"block {j}: {exc}", pivot=exc.pivot, block=j) from exc


def fit_distributed(data: Dataset, part: Partition, lam: float, kernel, workers: int = 1) -> AveragedModel:
    """Solve every block independently and average with weights |D_j|/N."""
    if part.n != data.n:
        raise ValueError(f"partition covers {part.n} indices but dataset has {data.n}")
    if not (np.isfinite(lam) and lam > 0):
        raise ValueError(f"lambda must be positive, got {lam}")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            alphas = list(
                pool.map(
                    lambda j: _solve_block(data, part.blocks[j], lam, kernel, j),
                    range(part.m),
                )
            )
    else:
        alphas = [_solve_block(data, part.blocks[j], lam, kernel, j) for j in range(part.m)]
    global_alpha = np.zeros(data.n)
    for j, (idx, alpha_j) in enumerate(zip(part.blocks, alphas)):
        global_alpha[idx] = (len(idx) / data.n) * alpha_j
    model = KrrModel(support=data.x, alpha=global_alpha, lam=lam, kernel=kernel)
    return AveragedModel(
        model=model, block_sizes=tuple(len(b) for b in part.blocks), lam=lam
    )


def compare_estimators(data: Dataset, part: Partition, lam: float, kernel, n_test: int, seed) -> dict:
    """Distances between the averaged and the whole-data estimator:
    Monte-Carlo L2 distance and the exact RKHS distance."""
    full = krr.fit(data, lam, kernel)
    avg = fit_distributed(data, part, lam, kernel)
    rho = l2_dist_mc(avg.predict, full.predict, n_test, seed)
    k_sq = rkhs_dist_sq(avg.model, full)
    return {"rho_dist": rho, "k_dist": float(np.sqrt(max(k_sq, 0.0)))}
