"""Write the bundled datasets as CSV files."""
import argparse
from pathlib import Path

from clusterp3s.datasets import BUNDLED
from clusterp3s.tabular import write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="data")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, make in BUNDLED.items():
        table = make() if name in ("tic-tac-toe", "car-style") else make(seed=args.seed)
        path = out / f"{name}.csv"
        write_csv(table, path)
        print(f"{path}: {table.n_rows} rows, {table.n_features} features, target {table.target.name!r}")


if __name__ == "__main__":
    main()
