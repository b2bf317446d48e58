#!/usr/bin/env python3
"""Write the 5000-example MNIST subset bundled with mlxtend as an IDX file pair.

The subset holds 500 images per class (28x28, uint8). It is fetched from the
mlxtend wheel so that no direct download from the MNIST mirrors is needed.

    python3 tools/fetch_mnist_subset.py --out data/mnist5k
"""

import argparse
import glob
import gzip
import io
import os
import struct
import subprocess
import sys
import tempfile
import zipfile

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def read_rows(wheel_path):
    with zipfile.ZipFile(wheel_path) as wheel:
        text = gzip.decompress(wheel.read(MEMBER)).decode("ascii")
    rows = []
    for line in io.StringIO(text):
        line = line.strip()
        if not line:
            continue
        values = [int(float(v)) for v in line.split(",")]
        # 784 pixels followed by the label
        rows.append((values[:-1], values[-1]))
    return rows


def write_idx(out_dir, rows):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "images.idx3-ubyte"), "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(rows), 28, 28))
        for pixels, _ in rows:
            f.write(bytes(pixels))
    with open(os.path.join(out_dir, "labels.idx1-ubyte"), "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(rows)))
        f.write(bytes(label for _, label in rows))


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="data/mnist5k")
    parser.add_argument("--wheel", help="use an already downloaded mlxtend wheel")
    args = parser.parse_args()

    wheel = args.wheel
    if wheel is None:
        tmp = tempfile.mkdtemp()
        subprocess.check_call([sys.executable, "-m", "pip", "download", "--no-deps",
                               "--timeout", "120", "mlxtend==0.24.0", "-d", tmp])
        wheel = glob.glob(os.path.join(tmp, "mlxtend-*.whl"))[0]

    rows = read_rows(wheel)
    if len(rows) != 5000 or any(len(p) != 784 for p, _ in rows):
        sys.exit("unexpected subset layout")
    write_idx(args.out, rows)
    print(f"wrote {len(rows)} examples to {args.out}")


if __name__ == "__main__":
    main()
