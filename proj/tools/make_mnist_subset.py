#!/usr/bin/env python3
"""Convert the digit JSON files shipped in the npm `mnist` package into IDX files.

The package bundles ~10k MNIST digits as per-class arrays of pixel/255 values
(rounded to 3 decimals). Every fifth sample of each class goes to the test
split; the rest go to train. Both splits are interleaved by a seeded shuffle so
class order does not leak into minibatches.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/make_mnist_subset.py package/src/digits data/mnist-subset
"""
import json
import random
import struct
import sys
from pathlib import Path

PIXELS = 28 * 28


def write_idx(path, samples):
    images = bytearray(struct.pack(">IIII", 0x00000803, len(samples), 28, 28))
    labels = bytearray(struct.pack(">II", 0x00000801, len(samples)))
    for pixels, label in samples:
        images.extend(pixels)
        labels.append(label)
    Path(f"{path}-images.idx").write_bytes(images)
    Path(f"{path}-labels.idx").write_bytes(labels)


def main(src, dst):
    train, test = [], []
    for digit in range(10):
        raw = json.loads(Path(src, f"{digit}.json").read_text())["data"]
        count = len(raw) // PIXELS
        for i in range(count):
            chunk = raw[i * PIXELS:(i + 1) * PIXELS]
            pixels = bytes(min(255, max(0, round(v * 255))) for v in chunk)
            (test if i % 5 == 4 else train).append((pixels, digit))
    rng = random.Random(20200731)
    rng.shuffle(train)
    rng.shuffle(test)
    Path(dst).mkdir(parents=True, exist_ok=True)
    write_idx(Path(dst, "train"), train)
    write_idx(Path(dst, "test"), test)
    print(f"train={len(train)} test={len(test)}")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
