"""PEM vs AEM DOA RMSE sweep; prints the AEM/PEM ratio per cell.

    python scripts/rmse_sweep.py [configs/rmse_cuts.yaml] [--out results/rmse.csv]
"""

import argparse
from pathlib import Path

from sparsecov.bench import load_config, run_rmse_sweep, write_text

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config", nargs="?", default=ROOT / "configs" / "rmse_cuts.yaml")
    ap.add_argument("--out", default="results/rmse.csv")
    ap.add_argument("--threads", type=int)
    args = ap.parse_args()

    cfg = load_config(args.config)
    table = run_rmse_sweep(cfg, threads=args.threads)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_text(args.out, table.to_csv())

    print(f"{'snr':>5} {'T':>4} {'alg':>5} {'PEM dB':>8} {'AEM dB':>8} {'AEM/PEM':>8} {'used':>5}")
    for snr in cfg.snr_db:
        for T in cfg.snapshots:
            for alg in cfg.algorithms:
                try:
                    p = table.get(snr, T, "pem", alg)
                    a = table.get(snr, T, "aem", alg)
                except KeyError:
                    continue
                ratio = a.rmse_u / p.rmse_u if p.trials_used else float("nan")
                print(f"{snr:>5g} {T:>4d} {alg:>5} {p.rmse_db:>8.2f} {a.rmse_db:>8.2f} {ratio:>8.3f} {p.trials_used:>5d}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
