"""Writes data/digits8x8.bin: the 8x8 handwritten digits set in the MRDS
fixture layout (see include/miracle/dataset.hpp). Pixels scaled to [0, 1]."""

import struct
import sys
from pathlib import Path

import numpy as np
from sklearn.datasets import load_digits


def main(out: Path) -> None:
    digits = load_digits()
    x = (digits.data / 16.0).astype("<f4")
    y = digits.target.astype("<u4")
    n, d_in = x.shape
    with out.open("wb") as f:
        f.write(b"MRDS")
        f.write(struct.pack("<BBIII", 1, 0, n, d_in, 10))
        f.write(x.tobytes())
        f.write(y.tobytes())


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data" / "digits8x8.bin")
