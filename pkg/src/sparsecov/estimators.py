"""Covariance estimators for sparse linear arrays.

All matrices are plain complex ``numpy`` arrays following the convention
``R[i, j] = E[x_i x_j^*]``. Hermitian Toeplitz matrices are therefore fully
described by their first column ``r[k] = R[k, 0]``.

Estimators provided:

* :func:`scm` -- sample covariance of the physical array.
* :func:`redundancy_average` -- projection onto Hermitian Toeplitz matrices.
* :func:`dam` -- direct augmented matrix built from unbiased coarray lags.
* :func:`pem` -- iterative Toeplitz / positive-definite alternation that keeps
  only the non-negative noise eigenvalues.
* :func:`aem` -- single-pass estimate that averages the absolute values of all
  noise eigenvalues.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .geometry import Coarray, SensorArray, coarray

Order = Literal["value", "magnitude"]


class DegenerateCaseError(ValueError):
    """Every noise eigenvalue is negative, so the positive-noise average is undefined."""

    def __init__(self, eigenvalues, iteration=0):
        self.eigenvalues = np.asarray(eigenvalues)
        self.iteration = iteration
        super().__init__(
            f"all noise eigenvalues are negative at iteration {iteration}; "
            "the positive-eigenvalue average has no terms"
        )


class NonConvergenceError(RuntimeError):
    """PEM did not reach its stopping tolerance; ``last_iterate`` holds the final matrix."""

    def __init__(self, last_iterate, iterations, ratio):
        self.last_iterate = last_iterate
        self.iterations = iterations
        self.ratio = ratio
        super().__init__(f"no convergence after {iterations} iterations (spread ratio {ratio:.3e})")


class SignalEigenvalueWarning(UserWarning):
    """A signal-slot eigenvalue passed to the AEM is negative, so the output is not PSD."""


def check_hermitian(m, tol=1e-10) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    scale = np.max(np.abs(m)) if m.size else 0.0
    if np.max(np.abs(m - m.conj().T), initial=0.0) > tol * max(scale, np.finfo(float).tiny):
        raise ValueError("matrix is not Hermitian")
    return m


def hermitian_toeplitz(first_column) -> np.ndarray:
    """Hermitian Toeplitz matrix with ``T[i, j] = r[i - j]`` and ``T[j, i] = conj(r[i - j])``."""
    r = np.asarray(first_column, dtype=complex).copy()
    r[0] = r[0].real
    n = len(r)
    lag = np.subtract.outer(np.arange(n), np.arange(n))
    return np.where(lag >= 0, r[np.abs(lag)], r[np.abs(lag)].conj())


def scm(snapshots) -> np.ndarray:
    """Sample covariance ``X X^H / T`` of an ``(L, T)`` snapshot block."""
    X = np.asarray(snapshots, dtype=complex)
    if X.ndim != 2 or X.shape[1] < 1:
        raise ValueError(f"expected an (L, T) snapshot matrix with T >= 1, got {X.shape}")
    S = X @ X.conj().T / X.shape[1]
    return (S + S.conj().T) / 2


def redundancy_average(m) -> np.ndarray:
    """Replace every entry by the mean of its diagonal (Hermitian Toeplitz projection).

    The mean of sub-diagonal ``k`` is averaged with the conjugate mean of
    super-diagonal ``k`` so the result is exactly Hermitian.
    """
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    if m.ndim != 2 or m.shape[1] != n:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    r = np.array([
        (np.diagonal(m, -k).mean() + np.diagonal(m, k).mean().conjugate()) / 2 for k in range(n)
    ])
    return hermitian_toeplitz(r)


def is_toeplitz(m, tol) -> bool:
    m = np.asarray(m)
    scale = np.max(np.abs(m))
    return bool(np.max(np.abs(m - redundancy_average(m)), initial=0.0) <= tol * scale)


# --------------------------------------------------------------------- coarray lags


@dataclass(frozen=True)
class LagEstimate:
    """Unbiased lag estimates r[0..L_A-1] together with the coarray they came from."""

    values: np.ndarray
    coarray: Coarray


def raw_lag_sequence(snapshots, array: SensorArray) -> tuple[np.ndarray, np.ndarray]:
    """Full-range correlation ``r0[k] = sum_m y[m] y*[m - k]`` averaged over snapshots.

    ``y`` is each snapshot placed on the filled grid with zeros at empty
    positions. Returns ``(lags, r0)`` with lags ``-(L_F-1) .. L_F-1``; no
    truncation or bias removal is applied.
    """
    X = np.asarray(snapshots, dtype=complex)
    Y = np.zeros((array.aperture, X.shape[1]), dtype=complex)
    Y[array.as_array()] = X
    n = array.aperture
    lags = np.arange(-(n - 1), n)
    r0 = np.empty(len(lags), dtype=complex)
    for i, k in enumerate(lags):
        if k >= 0:
            prod = Y[k:] * Y[: n - k].conj()
        else:
            prod = Y[: n + k] * Y[-k:].conj()
        r0[i] = prod.sum(axis=0).mean()
    return lags, r0


def lag_sequence(snapshots, array: SensorArray) -> LagEstimate:
    """Unbiased correlation estimates over the hole-free part of the coarray.

    Averages ``x_m x_n^*`` over every sensor pair with ``d_m - d_n = k`` and
    over all snapshots, for ``0 <= k < L_A``.
    """
    X = np.asarray(snapshots, dtype=complex)
    if X.ndim != 2 or X.shape[0] != array.n_sensors:
        raise ValueError(f"snapshots shape {X.shape} does not match {array.n_sensors} sensors")
    co = coarray(array)
    S = X @ X.conj().T / X.shape[1]
    d = array.as_array()
    diff = np.subtract.outer(d, d)
    keep = (diff >= 0) & (diff < co.hole_free_extent)
    lag = diff[keep]
    vals = S[keep]
    n = co.hole_free_extent
    r = np.bincount(lag, vals.real, n) + 1j * np.bincount(lag, vals.imag, n)
    r /= np.asarray(co.counts[:n], dtype=float)
    r[0] = r[0].real
    return LagEstimate(r, co)


def dam(snapshots, array: SensorArray) -> np.ndarray:
    """Direct augmented matrix: ``L_A x L_A`` Hermitian Toeplitz matrix of unbiased lags.

    Not guaranteed positive semi-definite.
    """
    return hermitian_toeplitz(lag_sequence(snapshots, array).values)


# -------------------------------------------------------------------- eigen-analysis


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    order: Order

    def reconstruct(self, eigenvalues=None) -> np.ndarray:
        w = self.eigenvalues if eigenvalues is None else np.asarray(eigenvalues, dtype=float)
        V = self.eigenvectors
        R = (V * w) @ V.conj().T
        return (R + R.conj().T) / 2


def sort_eigenvalues(w, order: Order = "value") -> np.ndarray:
    """Permutation putting ``w`` in the requested descending order.

    Magnitude ties are broken by descending signed value, then original index.
    """
    w = np.asarray(w, dtype=float)
    idx = np.arange(len(w))
    if order == "value":
        return np.lexsort((idx, -w))
    if order == "magnitude":
        return np.lexsort((idx, -w, -np.abs(w)))
    raise ValueError(f"unknown sort order {order!r}")


def hermitian_eig(m, order: Order = "value") -> EigenDecomposition:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    w, V = np.linalg.eigh((m + m.conj().T) / 2)
    perm = sort_eigenvalues(w, order)
    return EigenDecomposition(w[perm], V[:, perm], order)


def _check_q(q, n):
    if not 1 <= q < n:
        raise ValueError(f"source count must satisfy 1 <= q < {n}, got {q}")


def positive_noise_mean(eigenvalues, q: int) -> float:
    """Mean of the non-negative entries among ``eigenvalues[q:]`` (descending-value order).

    Raises DegenerateCaseError when none are non-negative.
    """
    noise = np.asarray(eigenvalues, dtype=float)[q:]
    kept = noise[noise >= 0]
    if kept.size == 0:
        raise DegenerateCaseError(eigenvalues)
    return float(kept.mean())


def absolute_noise_mean(eigenvalues, q: int) -> float:
    """Mean of ``|eigenvalues[q:]|`` (eigenvalues in descending-magnitude order)."""
    return float(np.mean(np.abs(np.asarray(eigenvalues, dtype=float)[q:])))


def noise_spread(eigenvalues, q: int) -> float:
    """``(lambda_{q+1} - lambda_min) / lambda_min``; infinite when lambda_min <= 0."""
    w = np.asarray(eigenvalues, dtype=float)
    if w[-1] <= 0:
        return np.inf
    return float((w[q] - w[-1]) / w[-1])


@dataclass(frozen=True)
class PemSettings:
    epsilon: float = 1e-6
    max_iterations: int = 500

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")


def pem(dam_matrix, q: int, settings: PemSettings | None = None, return_iterations=False):
    """Positive-eigenvalues-based matrix via alternating projections.

    Each pass replaces the noise eigenvalues by the mean of the non-negative
    ones, then redundancy-averages back to Toeplitz. Stops once the noise
    eigenvalues of the Toeplitz iterate are equal to within ``epsilon``
    (relative to the smallest one).

    Raises:
        DegenerateCaseError: no non-negative noise eigenvalue at some pass.
        NonConvergenceError: tolerance not met after ``max_iterations`` passes.
    """
    settings = settings or PemSettings()
    T = check_hermitian(dam_matrix)
    n = T.shape[0]
    _check_q(q, n)
    eye = np.eye(n)
    ratio = np.inf
    for it in range(1, settings.max_iterations + 1):
        e = hermitian_eig(T, "value")
        try:
            lam_n = positive_noise_mean(e.eigenvalues, q)
        except DegenerateCaseError as err:
            raise DegenerateCaseError(err.eigenvalues, it - 1) from None
        Vs = e.eigenvectors[:, :q]
        H = lam_n * eye + (Vs * (e.eigenvalues[:q] - lam_n)) @ Vs.conj().T
        T = redundancy_average(H)
        ratio = noise_spread(np.linalg.eigvalsh(T)[::-1], q)
        if ratio < settings.epsilon:
            return (T, it) if return_iterations else T
    raise NonConvergenceError(T, settings.max_iterations, ratio)


def aem(dam_matrix, q: int) -> np.ndarray:
    """Absolute-eigenvalues-based matrix.

    Eigenvalues are ranked by magnitude; the ``q`` largest keep their values
    and eigenvectors, the rest are all replaced by the mean of their absolute
    values. Single pass, not Toeplitz in general. PSD whenever the ``q``
    leading eigenvalues are non-negative; otherwise a
    :class:`SignalEigenvalueWarning` is issued and the values pass through.
    """
    m = check_hermitian(dam_matrix)
    _check_q(q, m.shape[0])
    e = hermitian_eig(m, "magnitude")
    if np.any(e.eigenvalues[:q] < 0):
        warnings.warn(
            f"negative signal eigenvalue(s) {e.eigenvalues[:q][e.eigenvalues[:q] < 0]}",
            SignalEigenvalueWarning,
            stacklevel=2,
        )
    w = e.eigenvalues.copy()
    w[q:] = absolute_noise_mean(e.eigenvalues, q)
    return e.reconstruct(w)


def toeplitz_sample(snapshots) -> np.ndarray:
    """Redundancy-averaged SCM of the physical array."""
    return redundancy_average(scm(snapshots))


# ----------------------------------------------------------------------- text format


def format_matrix(m) -> str:
    """Serialise a square complex matrix: ``n`` then ``n`` rows of ``re+imj`` literals."""
    m = np.asarray(m, dtype=complex)
    lines = [str(m.shape[0])]
    for row in m:
        lines.append(" ".join(f"{z.real:.17g}{z.imag:+.17g}j" for z in row))
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty matrix file")
    n = int(lines[0])
    if len(lines) != n + 1:
        raise ValueError(f"expected {n} rows, found {len(lines) - 1}")
    rows = [[complex(tok) for tok in ln.split()] for ln in lines[1:]]
    if any(len(r) != n for r in rows):
        raise ValueError(f"every row must have {n} entries")
    return np.array(rows, dtype=complex).reshape(n, n)


def write_matrix(path, m) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_matrix(m))


def read_matrix(path) -> np.ndarray:
    with open(path, encoding="ascii") as fh:
        return parse_matrix(fh.read())
