"""Snapshot generation for uncorrelated planewaves in white circular Gaussian noise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SensorArray, manifold_matrix

# Half-power-beamwidth separation for a 10-element ULA, taken as given.
HALF_POWER_U = 0.2165 * 4 / 10


@dataclass(frozen=True)
class Source:
    u: float
    power: float

    def __post_init__(self):
        if abs(self.u) > 1:
            raise ValueError(f"direction cosine must lie in [-1, 1], got {self.u}")
        if not self.power > 0:
            raise ValueError(f"source power must be positive, got {self.power}")


@dataclass(frozen=True)
class Scenario:
    sources: tuple[Source, ...] = ()
    noise_power: float = 1.0
    snapshots: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        # zero noise is allowed for noiseless oracle checks
        if not self.noise_power >= 0:
            raise ValueError(f"noise power must be non-negative, got {self.noise_power}")
        if self.snapshots < 1:
            raise ValueError(f"need at least one snapshot, got {self.snapshots}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    @property
    def u_values(self) -> np.ndarray:
        return np.array([s.u for s in self.sources], dtype=float)

    @classmethod
    def from_snr(cls, u_values, snr_db, noise_power=1.0, snapshots=1, seed=0):
        """Build a scenario with per-source SNRs in dB relative to ``noise_power``.

        ``snr_db`` may be a scalar (shared by all sources) or one value per source.
        """
        u_values = list(u_values)
        snrs = np.broadcast_to(np.asarray(snr_db, dtype=float), (len(u_values),))
        sources = tuple(Source(float(u), snr_db_to_power(s, noise_power)) for u, s in zip(u_values, snrs))
        return cls(sources, noise_power, int(snapshots), int(seed))


def snr_db_to_power(snr_db: float, noise_power: float = 1.0) -> float:
    if not noise_power > 0:
        raise ValueError(f"noise power must be positive, got {noise_power}")
    return noise_power * 10.0 ** (snr_db / 10.0)


def complex_normal(rng: np.random.Generator, shape, variance=1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with E|z|^2 = variance."""
    scale = np.sqrt(np.asarray(variance, dtype=float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def generate_snapshots(scenario: Scenario, array: SensorArray) -> np.ndarray:
    """Draw an ``(L_S, T)`` block of measurements x(t) = sum_i v(u_i) s_i(t) + n(t).

    The random stream is fully determined by ``scenario.seed``. Source
    amplitudes are drawn before the noise so adding noise never changes them.
    """
    rng = make_rng(scenario.seed)
    T = scenario.snapshots
    q = scenario.n_sources
    powers = np.array([s.power for s in scenario.sources], dtype=float)
    amplitudes = complex_normal(rng, (q, T), powers[:, None]) if q else np.zeros((0, T), complex)
    noise = complex_normal(rng, (array.n_sensors, T), scenario.noise_power)
    steering = manifold_matrix(array.positions, scenario.u_values)
    return steering @ amplitudes + noise


def ensemble_covariance(scenario: Scenario, array: SensorArray) -> np.ndarray:
    """Analytic covariance sum_i p_i v_i v_i^H + noise_power * I of the snapshot model."""
    V = manifold_matrix(array.positions, scenario.u_values)
    powers = np.array([s.power for s in scenario.sources], dtype=float)
    R = (V * powers) @ V.conj().T
    return R + scenario.noise_power * np.eye(array.n_sensors)
