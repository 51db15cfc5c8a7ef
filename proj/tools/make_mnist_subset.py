#!/usr/bin/env python3
"""Write the 5000-image MNIST subset bundled with mlxtend as IDX files.

Usage: make_mnist_subset.py <path-to-mlxtend-wheel-or-mnist_5k.csv.gz> <out_dir>
"""
import gzip
import os
import struct
import sys
import zipfile


def read_rows(src):
    if src.endswith(".whl"):
        raw = zipfile.ZipFile(src).read("mlxtend/data/data/mnist_5k.csv.gz")
    else:
        with open(src, "rb") as fh:
            raw = fh.read()
    text = gzip.decompress(raw).decode()
    return [list(map(int, line.split(","))) for line in text.splitlines() if line]


def main():
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    rows = read_rows(sys.argv[1])
    out = sys.argv[2]
    os.makedirs(out, exist_ok=True)
    n = len(rows)
    with open(os.path.join(out, "mnist5k-images.idx3-ubyte"), "wb") as fh:
        fh.write(struct.pack(">IIII", 2051, n, 28, 28))
        for r in rows:
            fh.write(bytes(r[:784]))
    with open(os.path.join(out, "mnist5k-labels.idx1-ubyte"), "wb") as fh:
        fh.write(struct.pack(">II", 2049, n))
        fh.write(bytes(r[784] for r in rows))


if __name__ == "__main__":
    main()
