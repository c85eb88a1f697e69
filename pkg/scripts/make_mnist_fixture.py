"""Build the 2,000-image MNIST fixture under tests/data/.

The source is the 5,000-image MNIST subset bundled with the ``mlxtend``
wheel (``mlxtend/data/data/mnist_5k.csv.gz``; 500 images per digit, sorted
by digit). The first 200 images of each digit are taken and interleaved by
a fixed permutation, then written as gzip-compressed IDX files.

    pip download mlxtend --no-deps -d /tmp/mlx
    python scripts/make_mnist_fixture.py /tmp/mlx/mlxtend-*.whl
"""
import argparse
import gzip
import io
import zipfile
from pathlib import Path

import numpy as np

from sgmca.dataio import write_idx

PER_DIGIT = 200


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("wheel", type=Path)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[1] / "tests" / "data")
    args = ap.parse_args()

    with zipfile.ZipFile(args.wheel) as z:
        raw = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz"))
    table = np.loadtxt(io.BytesIO(raw), delimiter=",")
    images = table[:, :-1].astype(np.uint8).reshape(-1, 28, 28)
    labels = table[:, -1].astype(np.uint8)

    keep = np.concatenate([np.flatnonzero(labels == d)[:PER_DIGIT] for d in range(10)])
    keep = keep[np.random.default_rng(20220805).permutation(keep.size)]
    args.out.mkdir(parents=True, exist_ok=True)
    write_idx(args.out / "mnist2k-images-idx3-ubyte.gz", images[keep])
    write_idx(args.out / "mnist2k-labels-idx1-ubyte.gz", labels[keep])
    print(f"wrote {keep.size} images to {args.out}")


if __name__ == "__main__":
    main()
