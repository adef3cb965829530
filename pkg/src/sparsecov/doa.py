"""MUSIC / MVDR spectra on a direction-cosine grid, peak picking and RMSE scoring.

Augmented covariance matrices of size ``n`` are treated as covariances of a
virtual ULA with sensors at ``0 .. n-1`` (units of lambda/2).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment

from .estimators import check_hermitian, hermitian_eig

DEFAULT_GRID = 4001


class NotInvertibleError(ValueError):
    """Covariance is singular or indefinite, so MVDR is undefined."""


@dataclass(frozen=True)
class SpectrumGrid:
    u_values: np.ndarray
    power: np.ndarray

    @property
    def step(self) -> float:
        return float(self.u_values[1] - self.u_values[0])

    def to_csv(self) -> str:
        rows = ["u,power"] + [f"{u:.9g},{p:.9g}" for u, p in zip(self.u_values, self.power)]
        return "\n".join(rows) + "\n"


@dataclass(frozen=True)
class DoaEstimate:
    u_hat: np.ndarray
    deficient: bool = False


@dataclass(frozen=True)
class RmseResult:
    rmse_u: float
    rmse_db: float


def u_grid(grid_size: int) -> np.ndarray:
    if grid_size < 2:
        raise ValueError(f"grid needs at least 2 points, got {grid_size}")
    return np.linspace(-1.0, 1.0, grid_size)


@lru_cache(maxsize=16)
def _steering(n: int, grid_size: int) -> np.ndarray:
    # (n, G) virtual-ULA manifold; cached because every trial reuses it
    A = np.exp(1j * np.pi * np.outer(np.arange(n), u_grid(grid_size)))
    A.setflags(write=False)
    return A


def music_spectrum(cov, q: int, grid_size: int = DEFAULT_GRID) -> SpectrumGrid:
    cov = check_hermitian(cov)
    n = cov.shape[0]
    if not 1 <= q < n:
        raise ValueError(f"source count must satisfy 1 <= q < {n}, got {q}")
    En = hermitian_eig(cov, "value").eigenvectors[:, q:]
    A = _steering(n, grid_size)
    den = np.sum(np.abs(En.conj().T @ A) ** 2, axis=0)
    power = 1.0 / np.maximum(den, np.finfo(float).tiny)
    return SpectrumGrid(u_grid(grid_size), power)


def mvdr_spectrum(cov, grid_size: int = DEFAULT_GRID) -> SpectrumGrid:
    """Capon spectrum ``1 / (v^H R^-1 v)``; refuses singular or indefinite ``cov``."""
    cov = check_hermitian(cov)
    cov = (cov + cov.conj().T) / 2
    w = np.linalg.eigvalsh(cov)
    if not (w[-1] > 0 and w[0] > 1e-12 * w[-1]):
        raise NotInvertibleError(f"covariance eigenvalues span [{w[0]:.3e}, {w[-1]:.3e}]")
    inv = np.linalg.inv(cov)
    A = _steering(cov.shape[0], grid_size)
    den = np.einsum("ig,ij,jg->g", A.conj(), inv, A).real
    return SpectrumGrid(u_grid(grid_size), 1.0 / den)


def find_peaks(spectrum: SpectrumGrid, q: int, refine: bool = True) -> DoaEstimate:
    """Pick the ``q`` strongest strict local maxima, refined by a 3-point parabola.

    Endpoints count as maxima if they exceed their single neighbour. With
    fewer than ``q`` maxima the estimate is padded with the largest remaining
    grid values and flagged ``deficient``.
    """
    p = np.asarray(spectrum.power, dtype=float)
    u = np.asarray(spectrum.u_values, dtype=float)
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    if len(p) < 3:
        raise ValueError("peak search needs at least 3 grid points")
    left = np.concatenate(([-np.inf], p[:-1]))
    right = np.concatenate((p[1:], [-np.inf]))
    peaks = np.flatnonzero((p > left) & (p > right))
    # strongest first; ties go to the lower index
    peaks = peaks[np.lexsort((peaks, -p[peaks]))][:q]
    deficient = len(peaks) < q
    if deficient:
        rest = np.setdiff1d(np.arange(len(p)), peaks)
        rest = rest[np.lexsort((rest, -p[rest]))]
        peaks = np.concatenate((peaks, rest[: q - len(peaks)]))

    out = u[peaks].copy()
    if refine:
        step = u[1] - u[0]
        for i, k in enumerate(peaks):
            if 0 < k < len(p) - 1 and p[k] > p[k - 1] and p[k] > p[k + 1]:
                a, b, c = p[k - 1], p[k], p[k + 1]
                out[i] = u[k] + 0.5 * (a - c) / (a - 2 * b + c) * step
    return DoaEstimate(np.sort(out), deficient)


def matched_squared_errors(estimate, truth) -> np.ndarray:
    """Squared u-errors after pairing estimates to truth with minimum total error."""
    est = np.asarray(getattr(estimate, "u_hat", estimate), dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.shape != truth.shape:
        raise ValueError(f"estimate has {est.size} entries, truth has {truth.size}")
    cost = (est[:, None] - truth[None, :]) ** 2
    rows, cols = linear_sum_assignment(cost)
    return cost[rows, cols]


def to_db(rmse_u: float) -> float:
    with np.errstate(divide="ignore"):
        return float(20 * np.log10(rmse_u))


def doa_rmse(estimates, truth) -> RmseResult:
    """RMSE in direction cosine over all trials and sources, plus ``20 log10`` of it."""
    errs = [matched_squared_errors(e, truth) for e in estimates]
    if not errs:
        raise ValueError("no estimates to score")
    rmse = float(np.sqrt(np.mean(np.concatenate(errs))))
    return RmseResult(rmse, to_db(rmse))
