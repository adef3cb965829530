"""Deterministic Monte-Carlo experiments.

* :func:`run_rmse_sweep` -- DOA RMSE over an SNR x snapshot grid, every
  estimator/algorithm pair evaluated on the same datasets.
* :func:`run_eig_study` -- distribution of the smallest positive noise
  eigenvalue vs. the smallest |negative| noise eigenvalue of the DAM.
* :func:`find_degenerate_dataset` -- search for a DAM whose noise eigenvalues
  are all negative.

Every dataset is generated from a seed derived from ``(master seed, snr index,
snapshot index, trial index)`` so results do not depend on worker count.
"""

from __future__ import annotations

import csv
import io
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np
import yaml
from scipy.stats import ks_2samp

from . import doa
from .estimators import (
    DegenerateCaseError,
    NonConvergenceError,
    PemSettings,
    aem,
    dam,
    hermitian_eig,
    pem,
)
from .geometry import SensorArray, coarray, parse_array
from .simulate import Scenario, generate_snapshots

log = logging.getLogger(__name__)

ESTIMATORS = ("dam", "pem", "aem")
ALGORITHMS = ("music", "mvdr")
RMSE_HEADER = [
    "snr_db", "snapshots", "estimator", "algorithm", "rmse_u", "rmse_db", "trials_used", "trials_discarded",
]
EIG_HEADER = ["bin_left", "bin_right", "pdf_min_pos", "pdf_min_abs_neg"]


class ConfigError(ValueError):
    pass


class DegenerateNotFoundError(LookupError):
    def __init__(self, scanned):
        self.scanned = scanned
        super().__init__(f"no all-negative noise spectrum found in {scanned} datasets")


@dataclass(frozen=True)
class ExperimentConfig:
    array: str = "coprime:4,3,5,2"
    sources: tuple[float, ...] = (0.0866, -0.0866)
    snr_db: tuple[float, ...] = (0.0, 10.0, 20.0)
    snapshots: tuple[int, ...] = (5, 10, 100)
    trials: int = 200
    noise_power: float = 1.0
    estimators: tuple[str, ...] = ("pem", "aem")
    algorithms: tuple[str, ...] = ("music", "mvdr")
    seed: int = 0
    grid: int = doa.DEFAULT_GRID
    refine: bool = True
    pem: PemSettings = field(default_factory=PemSettings)
    realizations: int = 10_000
    bins: int = 100
    max_search: int = 10_000

    def __post_init__(self):
        for name in ("sources", "snr_db", "snapshots", "estimators", "algorithms"):
            value = tuple(getattr(self, name))
            if not value:
                raise ConfigError(f"{name}: must be a non-empty list")
            object.__setattr__(self, name, value)
        try:
            parse_array(self.array)
        except ValueError as exc:
            raise ConfigError(f"array: {exc}") from None
        if any(abs(u) > 1 for u in self.sources):
            raise ConfigError("sources: direction cosines must lie in [-1, 1]")
        if any(int(t) != t or t < 1 for t in self.snapshots):
            raise ConfigError("snapshots: entries must be positive integers")
        bad = set(self.estimators) - set(ESTIMATORS)
        if bad:
            raise ConfigError(f"estimators: unknown {sorted(bad)}, choose from {ESTIMATORS}")
        bad = set(self.algorithms) - set(ALGORITHMS)
        if bad:
            raise ConfigError(f"algorithms: unknown {sorted(bad)}, choose from {ALGORITHMS}")
        for name in ("trials", "realizations", "max_search"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name}: must be >= 1")
        if self.bins < 2:
            raise ConfigError("bins: must be >= 2")
        if self.grid < 3:
            raise ConfigError("grid: must be >= 3")
        if not self.noise_power > 0:
            raise ConfigError("noise_power: must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed: must be a 64-bit unsigned integer")
        if self.q >= coarray(self.sensor_array).hole_free_extent:
            raise ConfigError("sources: more sources than the coarray can resolve")

    @property
    def sensor_array(self) -> SensorArray:
        return parse_array(self.array)

    @property
    def q(self) -> int:
        return len(self.sources)

    def scenario(self, snr_db: float, snapshots: int, seed: int) -> Scenario:
        return Scenario.from_snr(self.sources, snr_db, self.noise_power, snapshots, seed)


_CONFIG_KEYS = {
    "array", "sources", "snr_db", "snapshots", "trials", "noise_power", "estimators", "algorithms",
    "seed", "grid", "refine", "pem", "realizations", "bins", "max_search",
}


def _as_list(value):
    return list(value) if isinstance(value, (list, tuple)) else [value]


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build a config from a parsed mapping, with field-level error messages."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
    kw = {}
    converters = {
        "array": str,
        "trials": int,
        "noise_power": float,
        "seed": int,
        "grid": int,
        "refine": bool,
        "realizations": int,
        "bins": int,
        "max_search": int,
    }
    try:
        for key, conv in converters.items():
            if key in raw:
                kw[key] = conv(raw[key])
        if "sources" in raw:
            kw["sources"] = tuple(
                float(s["u"]) if isinstance(s, dict) else float(s) for s in _as_list(raw["sources"])
            )
        if "snr_db" in raw:
            kw["snr_db"] = tuple(float(s) for s in _as_list(raw["snr_db"]))
        if "snapshots" in raw:
            kw["snapshots"] = tuple(int(s) for s in _as_list(raw["snapshots"]))
        for key in ("estimators", "algorithms"):
            if key in raw:
                kw[key] = tuple(str(s).lower() for s in _as_list(raw[key]))
        if "pem" in raw:
            p = raw["pem"] or {}
            extra = set(p) - {"epsilon", "max_iterations"}
            if extra:
                raise ConfigError(f"pem: unknown field(s) {sorted(extra)}")
            kw["pem"] = PemSettings(
                epsilon=float(p.get("epsilon", 1e-6)), max_iterations=int(p.get("max_iterations", 500))
            )
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid value: {exc}") from None
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
    return config_from_dict(raw or {})


def derive_seed(master: int, *indices: int) -> int:
    """64-bit dataset seed mixed from the master seed and experiment indices."""
    ss = np.random.SeedSequence([int(master), *(int(i) for i in indices)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _map(fn, items, threads):
    items = list(items)
    if threads is None:
        threads = os.cpu_count() or 1
    if threads <= 1 or len(items) < 2:
        return [fn(i) for i in items]
    chunk = max(1, len(items) // (4 * threads))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        # map preserves input order, so reductions are scheduling-independent
        return list(pool.map(fn, items, chunksize=chunk))


def noise_eigenvalues(matrix, q: int) -> np.ndarray:
    """Eigenvalues q+1..n of ``matrix`` in descending-value order."""
    return hermitian_eig(matrix, "value").eigenvalues[q:]


# ------------------------------------------------------------------------ RMSE sweep


@dataclass(frozen=True)
class RmseRow:
    snr_db: float
    snapshots: int
    estimator: str
    algorithm: str
    rmse_u: float
    rmse_db: float
    trials_used: int
    trials_discarded: int


@dataclass
class RmseTable:
    rows: list[RmseRow]

    def get(self, snr_db, snapshots, estimator, algorithm) -> RmseRow:
        for r in self.rows:
            if (r.snr_db, r.snapshots, r.estimator, r.algorithm) == (snr_db, snapshots, estimator, algorithm):
                return r
        raise KeyError((snr_db, snapshots, estimator, algorithm))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RMSE_HEADER)
        for r in self.rows:
            empty = r.trials_used == 0
            w.writerow([
                f"{r.snr_db:.9g}", r.snapshots, r.estimator, r.algorithm,
                "" if empty else f"{r.rmse_u:.9g}",
                "" if empty else f"{r.rmse_db:.9g}",
                r.trials_used, r.trials_discarded,
            ])
        return buf.getvalue()


@dataclass(frozen=True)
class TrialOutcome:
    seed: int
    discarded: bool
    reason: str = ""
    # (estimator, algorithm) -> squared errors, or None if that pair failed
    errors: dict | None = None


def _covariance(name, D, q, settings):
    if name == "dam":
        return D
    if name == "pem":
        return pem(D, q, settings)
    return aem(D, q)


def _spectrum(alg, cov, q, grid):
    if alg == "music":
        return doa.music_spectrum(cov, q, grid)
    return doa.mvdr_spectrum(cov, grid)


def rmse_trial(config: ExperimentConfig, key) -> TrialOutcome:
    """One dataset: generate, build the DAM once, score every estimator/algorithm pair."""
    i, j, k = key
    seed = derive_seed(config.seed, i, j, k)
    array = config.sensor_array
    q = config.q
    X = generate_snapshots(config.scenario(config.snr_db[i], config.snapshots[j], seed), array)
    D = dam(X, array)
    if np.all(noise_eigenvalues(D, q) < 0):
        return TrialOutcome(seed, True, "all-negative-noise")

    covs = {}
    for est in config.estimators:
        try:
            covs[est] = _covariance(est, D, q, config.pem)
        except (DegenerateCaseError, NonConvergenceError) as exc:
            # PEM failing past the DAM check still drops the dataset for every estimator
            return TrialOutcome(seed, True, type(exc).__name__)

    truth = np.asarray(config.sources)
    errors = {}
    for est in config.estimators:
        for alg in config.algorithms:
            try:
                spec = _spectrum(alg, covs[est], q, config.grid)
            except doa.NotInvertibleError:
                errors[(est, alg)] = None
                continue
            estimate = doa.find_peaks(spec, q, refine=config.refine)
            errors[(est, alg)] = doa.matched_squared_errors(estimate, truth)
    return TrialOutcome(seed, False, errors=errors)


def _cell_rows(config, snr, T, outcomes):
    rows = []
    for est in config.estimators:
        for alg in config.algorithms:
            errs = [o.errors[(est, alg)] for o in outcomes if not o.discarded and o.errors[(est, alg)] is not None]
            used = len(errs)
            if used:
                rmse = float(np.sqrt(np.mean(np.concatenate(errs))))
                rows.append(RmseRow(snr, T, est, alg, rmse, doa.to_db(rmse), used, config.trials - used))
            else:
                rows.append(RmseRow(snr, T, est, alg, float("nan"), float("nan"), 0, config.trials))
    return rows


def run_rmse_sweep(config: ExperimentConfig, threads: int | None = None, trial_log: list | None = None) -> RmseTable:
    """RMSE table over every (snr, snapshots) cell; see module docstring for seeding."""
    keys = [
        (i, j, k)
        for i in range(len(config.snr_db))
        for j in range(len(config.snapshots))
        for k in range(config.trials)
    ]
    outcomes = _map(partial(rmse_trial, config), keys, threads)
    rows = []
    per_cell = config.trials
    for c, (i, j) in enumerate((i, j) for i in range(len(config.snr_db)) for j in range(len(config.snapshots))):
        cell = outcomes[c * per_cell:(c + 1) * per_cell]
        snr, T = config.snr_db[i], config.snapshots[j]
        n_drop = sum(o.discarded for o in cell)
        if n_drop:
            log.info("snr=%g T=%d: discarded %d/%d datasets", snr, T, n_drop, per_cell)
        rows.extend(_cell_rows(config, snr, T, cell))
        if trial_log is not None:
            for k, o in enumerate(cell):
                trial_log.append((snr, T, k, o))
    return RmseTable(rows)


def trial_log_csv(config: ExperimentConfig, entries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    pairs = [(e, a) for e in config.estimators for a in config.algorithms]
    w.writerow(["snr_db", "snapshots", "trial", "seed", "status"] + [f"sqerr_{e}_{a}" for e, a in pairs])
    for snr, T, k, o in entries:
        status = f"discarded:{o.reason}" if o.discarded else "ok"
        vals = []
        for p in pairs:
            err = None if o.discarded else o.errors[p]
            vals.append("" if err is None else f"{float(np.sum(err)):.9g}")
        w.writerow([f"{snr:.9g}", T, k, o.seed, status] + vals)
    return buf.getvalue()


# ------------------------------------------------------------------- eigenvalue study


@dataclass
class EigCell:
    snr_db: float
    snapshots: int
    min_pos: np.ndarray
    min_abs_neg: np.ndarray
    all_negative: int
    bin_edges: np.ndarray
    pdf_min_pos: np.ndarray
    pdf_min_abs_neg: np.ndarray

    @property
    def ks_distance(self) -> float:
        if not (len(self.min_pos) and len(self.min_abs_neg)):
            return float("nan")
        return float(ks_2samp(self.min_pos, self.min_abs_neg).statistic)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(EIG_HEADER)
        e = self.bin_edges
        for b in range(len(e) - 1):
            w.writerow([f"{e[b]:.9g}", f"{e[b + 1]:.9g}", f"{self.pdf_min_pos[b]:.9g}", f"{self.pdf_min_abs_neg[b]:.9g}"])
        return buf.getvalue()


@dataclass
class EigStudyResult:
    cells: list[EigCell]

    def cell(self, snr_db, snapshots=None) -> EigCell:
        for c in self.cells:
            if c.snr_db == snr_db and (snapshots is None or c.snapshots == snapshots):
                return c
        raise KeyError((snr_db, snapshots))


def eig_trial(config: ExperimentConfig, key):
    """(min positive noise eigenvalue, min |negative noise eigenvalue|), NaN when a set is empty."""
    i, j, k = key
    seed = derive_seed(config.seed, i, j, k)
    X = generate_snapshots(config.scenario(config.snr_db[i], config.snapshots[j], seed), config.sensor_array)
    w = noise_eigenvalues(dam(X, config.sensor_array), config.q)
    pos = w[w > 0]
    neg = -w[w < 0]
    return (pos.min() if pos.size else np.nan, neg.min() if neg.size else np.nan)


def normalized_histograms(a, b, bins: int):
    """Density histograms of ``a`` and ``b`` over shared equal-width bins."""
    pooled = np.concatenate([a, b])
    if pooled.size == 0:
        edges = np.linspace(0.0, 1.0, bins + 1)
    else:
        lo, hi = float(pooled.min()), float(pooled.max())
        if hi <= lo:
            lo, hi = lo - 0.5, hi + 0.5
        edges = np.linspace(lo, hi, bins + 1)

    def density(x):
        if len(x) == 0:
            return np.zeros(bins)
        return np.histogram(x, bins=edges, density=True)[0]

    return edges, density(a), density(b)


def run_eig_study(config: ExperimentConfig, realizations: int | None = None, bins: int | None = None,
                  threads: int | None = None) -> EigStudyResult:
    realizations = realizations or config.realizations
    bins = bins or config.bins
    if realizations < 1 or bins < 2:
        raise ValueError("need realizations >= 1 and bins >= 2")
    cells = []
    for i, snr in enumerate(config.snr_db):
        for j, T in enumerate(config.snapshots):
            stats = np.array(_map(partial(eig_trial, config), [(i, j, k) for k in range(realizations)], threads))
            mp, mn = stats[:, 0], stats[:, 1]
            mp, mn = mp[~np.isnan(mp)], mn[~np.isnan(mn)]
            edges, hp, hn = normalized_histograms(mp, mn, bins)
            all_neg = int(np.sum(np.isnan(stats[:, 0])))
            cells.append(EigCell(snr, T, mp, mn, all_neg, edges, hp, hn))
    return EigStudyResult(cells)


# ------------------------------------------------------------------ degenerate search


def find_degenerate_dataset(config: ExperimentConfig, max_search: int | None = None):
    """Scan derived seeds (first SNR and snapshot entry) for an all-negative noise spectrum.

    Returns ``(seed, eigenvalues)`` with eigenvalues in descending-value order.
    The hit is confirmed: PEM must raise DegenerateCaseError and the AEM must
    come out positive semi-definite.
    """
    max_search = max_search or config.max_search
    if max_search < 1:
        raise ValueError("max_search must be >= 1")
    array = config.sensor_array
    q = config.q
    for k in range(max_search):
        seed = derive_seed(config.seed, 0, 0, k)
        X = generate_snapshots(config.scenario(config.snr_db[0], config.snapshots[0], seed), array)
        D = dam(X, array)
        w = hermitian_eig(D, "value").eigenvalues
        if np.all(w[q:] < 0):
            try:
                pem(D, q, config.pem)
            except DegenerateCaseError:
                pass
            else:
                raise AssertionError("PEM accepted an all-negative noise spectrum")
            R_w = np.linalg.eigvalsh(aem(D, q))
            assert R_w[0] >= -1e-10 * R_w[-1], "AEM output is not PSD"
            log.info("degenerate dataset after %d seeds", k + 1)
            return seed, w
    raise DegenerateNotFoundError(max_search)


def write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="ascii", newline="\n")
