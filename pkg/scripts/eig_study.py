"""Noise-eigenvalue study: smallest positive vs smallest |negative| DAM noise eigenvalue.

    python scripts/eig_study.py [configs/eig_study.yaml] [--out-dir results]
"""

import argparse
from pathlib import Path

from sparsecov.bench import load_config, run_eig_study, write_text

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config", nargs="?", default=ROOT / "configs" / "eig_study.yaml")
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--threads", type=int)
    args = ap.parse_args()

    cfg = load_config(args.config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = run_eig_study(cfg, threads=args.threads)
    for cell in res.cells:
        path = out / f"eig_snr{cell.snr_db:g}dB_T{cell.snapshots}.csv"
        write_text(path, cell.to_csv())
        print(f"SNR {cell.snr_db:>5g} dB, T={cell.snapshots}: "
              f"min+ n={len(cell.min_pos)} mean={cell.min_pos.mean():.4g} | "
              f"min|-| n={len(cell.min_abs_neg)} mean={cell.min_abs_neg.mean():.4g} | "
              f"KS={cell.ks_distance:.4f} all-negative={cell.all_negative} -> {path}")


if __name__ == "__main__":
    main()
