"""Regenerate the seed-pinned regression fixtures under tests/fixtures."""
import argparse
import json
from pathlib import Path

from clusterp3s.datasets import wide_mixed
from clusterp3s.embed import embed_table


def autoencoder_trace(seed: int = 0) -> dict:
    table = wide_mixed()
    e, ae = embed_table(table, seed=seed)
    return {
        "table": "wide_mixed(n_features=38, n_rows=300, seed=0)",
        "seed": seed,
        "shape": list(e.shape),
        "loss_trace": ae.loss_trace,
        "condensed_row0_head": ae.condensed[0, :8].tolist(),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="tests/fixtures")
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = autoencoder_trace()
    (out / "autoencoder_trace.json").write_text(json.dumps(doc, indent=2) + "\n")
    print(f"autoencoder: loss {doc['loss_trace'][0]:.6g} -> {doc['loss_trace'][-1]:.6g}")


if __name__ == "__main__":
    main()
