"""Regenerate the bundled 8-bit test images from scikit-image's sample data.

``moon`` serves as the magnitude image and ``camera`` as the phase image.
Each is block-averaged from 512x512 down to the bundled power-of-two sizes.
"""

from pathlib import Path

import numpy as np
from skimage import data

from ptychomg.io import save_pgm

OUT = Path(__file__).resolve().parents[1] / "src" / "ptychomg" / "data"
SIZES = (32, 64, 128, 256)


def block_average(img, n):
    f = img.shape[0] // n
    return img.reshape(n, f, n, f).mean(axis=(1, 3))


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for name, img in (("magnitude", data.moon()), ("phase", data.camera())):
        img = img.astype(np.float64)
        for n in SIZES:
            px = np.clip(np.rint(block_average(img, n)), 0, 255).astype(np.uint8)
            save_pgm(OUT / f"{name}_{n}.pgm", px)


if __name__ == "__main__":
    main()
