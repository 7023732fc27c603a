#!/usr/bin/env python3
"""Convert the digit JSON files shipped in the npm `mnist` package into IDX files.

The package holds 10,000 MNIST digits as 784 floats in [0, 1] (three decimals).
Pixels are mapped back to bytes with round(v * 255). Per class, the first
TRAIN_PER_CLASS digits go to the train files and the next TEST_PER_CLASS to the
t10k files.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 scripts/mnist_from_npm.py package/src/digits data/mnist
"""
import json
import struct
import sys
from pathlib import Path

TRAIN_PER_CLASS = 600
TEST_PER_CLASS = 250


def write_idx(out: Path, prefix: str, images, labels):
    with open(out / f"{prefix}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))
    with open(out / f"{prefix}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(bytes(labels))


def main():
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    train, test = ([], []), ([], [])
    for digit in range(10):
        flat = json.loads((src / f"{digit}.json").read_text())["data"]
        images = [
            [max(0, min(255, round(v * 255))) for v in flat[i : i + 784]]
            for i in range(0, len(flat), 784)
        ]
        assert len(images) >= TRAIN_PER_CLASS + TEST_PER_CLASS, digit
        for img in images[:TRAIN_PER_CLASS]:
            train[0].append(img)
            train[1].append(digit)
        for img in images[TRAIN_PER_CLASS : TRAIN_PER_CLASS + TEST_PER_CLASS]:
            test[0].append(img)
            test[1].append(digit)
    write_idx(out, "train", *train)
    write_idx(out, "t10k", *test)
    print(f"train={len(train[1])} test={len(test[1])} -> {out}")


if __name__ == "__main__":
    main()
