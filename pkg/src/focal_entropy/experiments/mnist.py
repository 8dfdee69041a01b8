"""MNIST ingestion into the two-feature binned task.

The class is 1 for the digit one and 0 otherwise.  Feature 1 is the share of
total intensity in the upper half of the image and feature 2 the share in
the left half.  Each is cut into four bins at its nearest-rank 25/50/75
percentiles; a value equal to a cut point goes to the lower bin.
"""

from __future__ import annotations

import gzip
import math
import struct
from pathlib import Path

import numpy as np

from focal_entropy.experiments.data import BinnedDataset

IMAGES_MAGIC = 2051
LABELS_MAGIC = 2049
RATIO_EPS = 1e-9
QUANTILES = (0.25, 0.5, 0.75)


class IdxFormatError(ValueError):
    """Malformed or truncated IDX file."""


def _read_bytes(path) -> bytes:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def read_idx(path, expected_magic: int) -> np.ndarray:
    """Parse an unsigned-byte IDX file into an array of its declared shape."""
    raw = _read_bytes(path)
    if len(raw) < 8:
        raise IdxFormatError(f"{path}: file too short for an IDX header")
    magic = struct.unpack(">I", raw[:4])[0]
    if magic != expected_magic:
        raise IdxFormatError(f"{path}: magic {magic}, expected {expected_magic}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IdxFormatError(f"{path}: truncated header")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    if expected_magic == IMAGES_MAGIC and dims[1:] != (28, 28):
        raise IdxFormatError(f"{path}: images must be 28x28, got {dims[1:]}")
    size = math.prod(dims)
    if len(raw) - header < size:
        raise IdxFormatError(f"{path}: expected {size} data bytes, found {len(raw) - header}")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(dims)


def write_idx(path, array: np.ndarray) -> None:
    """Write a uint8 array in IDX layout (used for fixtures)."""
    array = np.ascontiguousarray(array, dtype=np.uint8)
    magic = 0x0800 | array.ndim
    with open(path, "wb") as fh:
        fh.write(struct.pack(">I", magic))
        fh.write(struct.pack(f">{array.ndim}I", *array.shape))
        fh.write(array.tobytes())


def zoning_features(images: np.ndarray):
    """Upper-half and left-half intensity shares of each image."""
    img = images.astype(np.float64)
    total = img.sum(axis=(1, 2))
    h, w = img.shape[1] // 2, img.shape[2] // 2
    upper = img[:, :h, :].sum(axis=(1, 2))
    left = img[:, :, :w].sum(axis=(1, 2))
    return upper / (total + RATIO_EPS), left / (total + RATIO_EPS)


def nearest_rank_cuts(values: np.ndarray, quantiles=QUANTILES) -> np.ndarray:
    s = np.sort(values)
    ranks = [max(int(math.ceil(q * s.size)) - 1, 0) for q in quantiles]
    return s[ranks]


def quantize(values: np.ndarray, cuts: np.ndarray) -> np.ndarray:
    return np.searchsorted(cuts, values, side="left")


def ingest_mnist(images_path, labels_path) -> BinnedDataset:
    """Read the IDX pair and return the binned one-vs-rest dataset.

    Raises:
        IdxFormatError: bad magic, image size, truncation or count mismatch.
    """
    images = read_idx(images_path, IMAGES_MAGIC)
    labels = read_idx(labels_path, LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    f1, f2 = zoning_features(images)
    cuts1, cuts2 = nearest_rank_cuts(f1), nearest_rank_cuts(f2)
    c = (labels == 1).astype(np.int64)
    return BinnedDataset(
        quantize(f1, cuts1),
        quantize(f2, cuts2),
        c,
        meta={"source": "mnist", "cuts_f1": cuts1.tolist(), "cuts_f2": cuts2.tolist()},
    )
