"""Convert the 5000-image MNIST sample shipped in the mlxtend wheel to IDX files.

    python scripts/fetch_mnist_subset.py [--csv path/to/mnist_5k.csv.gz] [--out data/mnist]

Without --csv the file is taken from an installed mlxtend.
"""
import argparse
import gzip
import shutil
from pathlib import Path

import numpy as np

from rscnet.data import write_idx_images, write_idx_labels


def locate_csv() -> Path:
    import mlxtend.data

    return Path(mlxtend.data.__file__).parent / "data" / "mnist_5k.csv.gz"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--csv", type=Path, default=None)
    ap.add_argument("--out", type=Path, default=Path("data/mnist"))
    args = ap.parse_args()
    src = args.csv or locate_csv()
    table = np.loadtxt(src, delimiter=",", dtype=np.int64)
    images = table[:, :-1].astype(np.uint8).reshape(-1, 28, 28)
    labels = table[:, -1].astype(np.uint8)
    args.out.mkdir(parents=True, exist_ok=True)
    for name, writer, arr in (("train-images-idx3-ubyte", write_idx_images, images),
                              ("train-labels-idx1-ubyte", write_idx_labels, labels)):
        raw = args.out / name
        writer(raw, arr)
        with open(raw, "rb") as fi, gzip.GzipFile(raw.with_suffix(".gz"), "wb", mtime=0) as fo:
            shutil.copyfileobj(fi, fo)
        raw.unlink()
    print(f"{images.shape[0]} images -> {args.out}")


if __name__ == "__main__":
    main()
