"""Independent reference computations used only by the tests.

None of these are imported by the package: they re-derive quantities
along a different route (closed forms, brute-force summation, dense
solves) so the tests compare two independent implementations.
"""

import numpy as np


def bernoulli_b2(t):
    return t * t - t + 1.0 / 6.0


def bernoulli_b4(t):
    return t**4 - 2.0 * t**3 + t * t - 1.0 / 30.0


def periodic_kernel_closed_form(s: int, x, y):
    """Untruncated kernel value 1 + 2*sum_k cos(2 pi k (x-y))/k^(2s) via
    the Bernoulli-polynomial closed form (s = 1 or 2)."""
    t = np.mod(np.asarray(x, dtype=float) - np.asarray(y, dtype=float), 1.0)
    if s == 1:
        series = np.pi**2 * bernoulli_b2(t)
    elif s == 2:
        series = -(np.pi**4) / 3.0 * bernoulli_b4(t)
    else:
        raise ValueError("closed form implemented for s in {1, 2}")
    return 1.0 + 2.0 * series


def periodic_kernel_series(s: int, k_max: int, x, y):
    """Direct summation of the truncated series, highest frequency first."""
    t = float(x) - float(y)
    k = np.arange(k_max, 0, -1, dtype=float)
    return 1.0 + 2.0 * float((np.cos(2.0 * np.pi * k * t) / k ** (2 * s)).sum())


def truncation_tail(s: int, k_max: int, upto: int = 10_000_000) -> float:
    """Upper bound 2 * sum_{k > k_max} k^(-2s) by direct summation plus an
    integral remainder."""
    k = np.arange(k_max + 1, upto + 1, dtype=float)
    tail = (k ** (-2.0 * s)).sum()
    remainder = upto ** (1 - 2 * s) / (2 * s - 1)
    return 2.0 * float(tail + remainder)


def dense_krr_solve(gram: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Brute-force solve of (G + n lam I) alpha = y."""
    n = gram.shape[0]
    return np.linalg.solve(gram + n * lam * np.eye(n), y)


def predict_termwise(kernel, support, alpha, x) -> float:
    """Representer sum evaluated one term at a time."""
    total = 0.0
    for xi, ai in zip(support, alpha):
        total += float(ai) * float(kernel.eval(float(xi), float(x)))
    return total


def krr_objective(model, data) -> float:
    """Mean squared error plus lam * ||f||_K^2 for a coefficient vector."""
    gram = model.kernel.gram(data.x)
    pred = gram @ model.alpha
    mse = float(np.mean((pred - data.y) ** 2))
    return mse + model.lam * float(model.alpha @ gram @ model.alpha)


def spectral_coords(spec, model) -> np.ndarray:
    """RKHS-orthonormal coordinates of a kernel expansion."""
    return spec.weighted_basis(model.support).T @ model.alpha


def ols_loglog(points):
    """Closed-form OLS on (ln x, ln y): slope, stderr, intercept."""
    lx = np.log([p[0] for p in points])
    ly = np.log([p[1] for p in points])
    n = len(points)
    sxx = ((lx - lx.mean()) ** 2).sum()
    slope = ((lx - lx.mean()) * (ly - ly.mean())).sum() / sxx
    intercept = ly.mean() - slope * lx.mean()
    resid = ly - intercept - slope * lx
    stderr = np.sqrt(resid @ resid / (n - 2) / sxx) if n > 2 else 0.0
    return float(slope), float(stderr), float(intercept)
