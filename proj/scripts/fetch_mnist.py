#!/usr/bin/env python3
"""Fetches the MNIST IDX files into data/mnist (or a given directory).

Tries a list of well-known mirrors; any existing local copy of the four
files (train/t10k images/labels, raw or .gz) works just as well if you drop
it into the target directory yourself.
"""

import gzip
import os
import struct
import sys
import urllib.request

MIRRORS = [
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "https://storage.googleapis.com/cvdf-datasets/mnist/",
    "http://yann.lecun.com/exdb/mnist/",
]

FILES = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
]

MAGIC = {"images": 0x803, "labels": 0x801}


def verify(path: str) -> None:
    with open(path, "rb") as f:
        magic = struct.unpack(">I", f.read(4))[0]
    kind = "images" if "images" in path else "labels"
    if magic != MAGIC[kind]:
        raise RuntimeError(f"{path}: unexpected magic 0x{magic:08x}")


def fetch(name: str, out_dir: str) -> None:
    target = os.path.join(out_dir, name)
    if os.path.exists(target):
        verify(target)
        print(f"{name}: already present")
        return
    last_err = None
    for mirror in MIRRORS:
        url = mirror + name + ".gz"
        try:
            print(f"{name}: fetching {url}")
            with urllib.request.urlopen(url, timeout=60) as resp:
                payload = gzip.decompress(resp.read())
            with open(target, "wb") as f:
                f.write(payload)
            verify(target)
            return
        except Exception as err:  # noqa: BLE001 - try the next mirror
            last_err = err
            print(f"  failed: {err}")
    raise SystemExit(f"could not fetch {name}: {last_err}")


def main() -> None:
    out_dir = sys.argv[1] if len(sys.argv) > 1 else "data/mnist"
    os.makedirs(out_dir, exist_ok=True)
    for name in FILES:
        fetch(name, out_dir)
    print(f"done: {out_dir}")


if __name__ == "__main__":
    main()
