import numpy as np
import pytest

from sparsecov.geometry import coprime_interleaved
from sparsecov.simulate import HALF_POWER_U, Scenario, generate_snapshots

ACCEPTANCE_RESULTS = []


@pytest.fixture
def coprime():
    return coprime_interleaved(4, 3, 5, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_unitary(rng, n):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def hermitian_with_spectrum(rng, eigenvalues):
    Q = random_unitary(rng, len(eigenvalues))
    M = (Q * np.asarray(eigenvalues, dtype=float)) @ Q.conj().T
    return (M + M.conj().T) / 2


def two_source_trial(array, seed, snr_db=25.0, snapshots=25):
    sc = Scenario.from_snr([HALF_POWER_U, -HALF_POWER_U], snr_db, snapshots=snapshots, seed=seed)
    return generate_snapshots(sc, array)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(line)
