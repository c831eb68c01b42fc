#!/usr/bin/env python3
"""Writes a 5000-image MNIST subset as IDX files.

The subset ships inside the mlxtend wheel (mlxtend/data/data/mnist_5k.csv.gz,
784 pixel columns then the label). Pass --wheel to use a local copy instead of
running `pip download`.
"""
import argparse
import gzip
import pathlib
import struct
import subprocess
import tempfile
import zipfile

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def find_wheel(dest):
    subprocess.run(["pip", "download", "mlxtend", "--no-deps", "-q", "-d", str(dest)], check=True)
    wheels = sorted(pathlib.Path(dest).glob("mlxtend-*.whl"))
    if not wheels:
        raise SystemExit("pip download produced no mlxtend wheel")
    return wheels[-1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data/mnist")
    ap.add_argument("--wheel")
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        wheel = pathlib.Path(args.wheel) if args.wheel else find_wheel(tmp)
        rows = gzip.decompress(zipfile.ZipFile(wheel).read(MEMBER)).decode().splitlines()

    images, labels = bytearray(), bytearray()
    for line in rows:
        vals = [int(float(v)) for v in line.split(",")]
        if len(vals) != 785:
            raise SystemExit(f"unexpected row width {len(vals)}")
        images.extend(bytes(vals[:784]))
        labels.append(vals[784])

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n = len(labels)
    (out / "images-idx3-ubyte").write_bytes(struct.pack(">IIII", 2051, n, 28, 28) + images)
    (out / "labels-idx1-ubyte").write_bytes(struct.pack(">II", 2049, n) + labels)
    print(f"wrote {n} images to {out}")


if __name__ == "__main__":
    main()
