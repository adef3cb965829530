"""Linear sensor arrays on the half-wavelength grid and their difference coarrays.

Positions are integers in units of lambda/2 and are always canonicalised so the
first sensor sits at 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SensorArray:
    """Sparse linear array with sensors at integer multiples of lambda/2."""

    positions: tuple[int, ...]

    def __post_init__(self):
        p = tuple(int(x) for x in self.positions)
        if not p:
            raise ValueError("array needs at least one sensor")
        if p[0] != 0:
            raise ValueError(f"first position must be 0, got {p[0]}")
        if any(b <= a for a, b in zip(p, p[1:])):
            raise ValueError(f"positions must be strictly increasing: {p}")
        object.__setattr__(self, "positions", p)

    @property
    def n_sensors(self) -> int:
        """Number of physical sensors (L_S)."""
        return len(self.positions)

    @property
    def aperture(self) -> int:
        """Length of the filled grid spanned by the array (L_F = last position + 1)."""
        return self.positions[-1] + 1

    def as_array(self) -> np.ndarray:
        return np.asarray(self.positions, dtype=int)

    def __str__(self):
        return ",".join(str(p) for p in self.positions)


@dataclass(frozen=True)
class Coarray:
    """Pair counts of the difference coarray for non-negative lags."""

    counts: tuple[int, ...]
    hole_free_extent: int

    @property
    def fully_augmentable(self) -> bool:
        return self.hole_free_extent == len(self.counts)


def ula(n: int) -> SensorArray:
    if n < 1:
        raise ValueError(f"ULA needs at least one sensor, got {n}")
    return SensorArray(tuple(range(n)))


def coprime_interleaved(n1: int, s1: int, n2: int, s2: int) -> SensorArray:
    """Union of two uniform subarrays sharing the sensor at the origin.

    ``coprime_interleaved(4, 3, 5, 2)`` gives the 7-sensor array
    ``[0, 2, 3, 4, 6, 8, 9]``.
    """
    for name, v in (("n1", n1), ("s1", s1), ("n2", n2), ("s2", s2)):
        if int(v) != v or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v}")
    sub1 = {i * s1 for i in range(n1)}
    sub2 = {i * s2 for i in range(n2)}
    return SensorArray(tuple(sorted(sub1 | sub2)))


def from_positions(positions) -> SensorArray:
    """Build an array from arbitrary distinct integer positions (sorted, shifted to 0)."""
    p = [int(x) for x in positions]
    if not p:
        raise ValueError("empty position list")
    if len(set(p)) != len(p):
        raise ValueError(f"duplicate-position in {p}")
    if min(p) < 0:
        raise ValueError(f"positions must be non-negative: {p}")
    lo = min(p)
    return SensorArray(tuple(sorted(x - lo for x in p)))


def coarray(array: SensorArray) -> Coarray:
    d = array.as_array()
    diffs = (d[:, None] - d[None, :]).ravel()
    counts = np.bincount(diffs[diffs >= 0], minlength=array.aperture)
    zero = np.flatnonzero(counts == 0)
    extent = int(zero[0]) if zero.size else len(counts)
    return Coarray(tuple(int(c) for c in counts), extent)


def manifold(positions, u: float) -> np.ndarray:
    """Array manifold vector exp(j*pi*u*d) for direction cosine ``u``."""
    if abs(u) > 1:
        raise ValueError(f"direction cosine must lie in [-1, 1], got {u}")
    d = np.asarray(positions, dtype=float)
    return np.exp(1j * np.pi * u * d)


def manifold_matrix(positions, u_values) -> np.ndarray:
    """Manifold vectors for several directions as columns, shape (len(positions), len(u))."""
    u = np.asarray(u_values, dtype=float)
    if np.any(np.abs(u) > 1):
        raise ValueError("direction cosines must lie in [-1, 1]")
    d = np.asarray(positions, dtype=float)
    return np.exp(1j * np.pi * np.outer(d, u))


def parse_array(spec: str) -> SensorArray:
    """Parse a CLI array spec.

    Accepted forms: ``ula:L``, ``coprime:n1,s1,n2,s2``, ``pos:0,1,4`` or a bare
    comma-separated position list.
    """
    spec = spec.strip()
    kind, sep, rest = spec.partition(":")
    if not sep:
        kind, rest = "pos", spec
    kind = kind.strip().lower()
    try:
        values = [int(v) for v in rest.split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"malformed array spec {spec!r}") from None
    if kind == "ula":
        if len(values) != 1:
            raise ValueError(f"ula spec takes one value: {spec!r}")
        return ula(values[0])
    if kind == "coprime":
        if len(values) != 4:
            raise ValueError(f"coprime spec takes n1,s1,n2,s2: {spec!r}")
        return coprime_interleaved(*values)
    if kind in ("pos", "positions"):
        return from_positions(values)
    raise ValueError(f"unknown array kind {kind!r} in {spec!r}")
