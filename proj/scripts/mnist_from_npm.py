#!/usr/bin/env python3
"""Convert the digit JSON files shipped in the npm `mnist` package into IDX files.

Usage: npm pack mnist && tar xzf mnist-*.tgz
       python3 scripts/mnist_from_npm.py package/src/digits data/mnist

The package stores pixels as value/255 rounded to three decimals, so
round(v * 255) recovers the original byte exactly.
"""
import gzip
import json
import struct
import sys
from pathlib import Path


def main(src: Path, dst: Path) -> None:
    images = bytearray()
    labels = bytearray()
    count = 0
    for digit in range(10):
        data = json.loads((src / f"{digit}.json").read_text())["data"]
        n = len(data) // 784
        for i in range(n):
            chunk = data[i * 784:(i + 1) * 784]
            images.extend(min(255, max(0, round(v * 255))) for v in chunk)
            labels.append(digit)
        count += n
    dst.mkdir(parents=True, exist_ok=True)
    img = struct.pack(">IIII", 0x803, count, 28, 28) + bytes(images)
    lab = struct.pack(">II", 0x801, count) + bytes(labels)
    for name, payload in (("sample-images-idx3-ubyte.gz", img),
                          ("sample-labels-idx1-ubyte.gz", lab)):
        with open(dst / name, "wb") as fh:
            with gzip.GzipFile(fileobj=fh, mode="wb", mtime=0, filename="") as gz:
                gz.write(payload)
    print(f"wrote {count} digits to {dst}")


if __name__ == "__main__":
    main(Path(sys.argv[1]), Path(sys.argv[2]))
