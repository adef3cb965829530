"""Look for a dataset whose DAM noise eigenvalues are all negative and compare PEM/AEM on it.

    python scripts/degenerate_search.py [configs/degenerate_search.yaml]
"""

import argparse
from pathlib import Path

import numpy as np

from sparsecov.bench import DegenerateNotFoundError, derive_seed, find_degenerate_dataset, load_config
from sparsecov.estimators import dam, hermitian_eig
from sparsecov.simulate import generate_snapshots

ROOT = Path(__file__).resolve().parent.parent


def negative_count_histogram(cfg, n):
    arr = cfg.sensor_array
    counts = np.zeros(cfg.sensor_array.aperture + 1, dtype=int)
    for k in range(n):
        X = generate_snapshots(cfg.scenario(cfg.snr_db[0], cfg.snapshots[0], derive_seed(cfg.seed, 0, 0, k)), arr)
        w = hermitian_eig(dam(X, arr), "value").eigenvalues[cfg.q:]
        counts[int(np.sum(w < 0))] += 1
    return counts[: len(w) + 1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config", nargs="?", default=ROOT / "configs" / "degenerate_search.yaml")
    ap.add_argument("--max-search", type=int)
    args = ap.parse_args()
    cfg = load_config(args.config)

    try:
        seed, w = find_degenerate_dataset(cfg, args.max_search)
    except DegenerateNotFoundError as exc:
        print(exc)
        n = args.max_search or cfg.max_search
        hist = negative_count_histogram(cfg, n)
        print("datasets by number of negative noise eigenvalues:")
        for k, c in enumerate(hist):
            print(f"  {k:2d}: {c}")
        return
    print(f"seed {seed}")
    print("DAM eigenvalues (descending):", " ".join(f"{x:.4g}" for x in w))
    print("PEM raised the degenerate-case error; AEM returned a PSD matrix")


if __name__ == "__main__":
    main()
