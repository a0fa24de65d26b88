"""Converts the digits shipped in the npm `mnist` package into IDX files.

Usage: python3 scripts/mnist_npm_to_idx.py <package-dir> <out-dir>

Every fifth sample of each digit goes to the test files, the rest to the
train files. Pixel intensities are stored as 0..1 floats in the package
and are written back as bytes.
"""

import json
import pathlib
import struct
import sys


def write_images(path, images):
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        for img in images:
            fh.write(bytes(img))


def write_labels(path, labels):
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", 0x801, len(labels)))
        fh.write(bytes(labels))


def main(pkg, out):
    pkg, out = pathlib.Path(pkg), pathlib.Path(out)
    train, test = [], []
    for digit in range(10):
        raw = json.loads((pkg / "src" / "digits" / f"{digit}.json").read_text())["data"]
        count = len(raw) // 784
        for i in range(count):
            px = [min(255, max(0, round(v * 255))) for v in raw[i * 784:(i + 1) * 784]]
            (test if i % 5 == 4 else train).append((px, digit))
    out.mkdir(parents=True, exist_ok=True)
    for name, rows in (("train", train), ("t10k", test)):
        write_images(out / f"{name}-images-idx3-ubyte", [r[0] for r in rows])
        write_labels(out / f"{name}-labels-idx1-ubyte", [r[1] for r in rows])
    print(f"{len(train)} train / {len(test)} test images written to {out}")


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    main(sys.argv[1], sys.argv[2])
