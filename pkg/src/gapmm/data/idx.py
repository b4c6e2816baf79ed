"""IDX binary container (the MNIST-family format).

Magic: two zero bytes, a type byte (only 0x08, unsigned byte, is
supported), a dimension-count byte; then one big-endian uint32 per
dimension, then the raw payload.
"""

from __future__ import annotations

import struct

import numpy as np

UNSIGNED_BYTE = 0x08


class IDXParseError(ValueError):
    pass


def parse_idx(fh) -> np.ndarray:
    """Read one IDX tensor (uint8) from a binary stream."""
    magic = fh.read(4)
    if len(magic) < 4:
        raise IDXParseError("file too short for the 4-byte magic")
    if magic[0] != 0 or magic[1] != 0:
        raise IDXParseError(f"bad magic prefix {magic[:2].hex()}, expected 0000")
    if magic[2] != UNSIGNED_BYTE:
        raise IDXParseError(f"unsupported type byte 0x{magic[2]:02x}, "
                            f"only unsigned byte (0x08) is supported")
    ndim = magic[3]
    if ndim == 0:
        raise IDXParseError("dimension count is zero")
    raw = fh.read(4 * ndim)
    if len(raw) < 4 * ndim:
        raise IDXParseError("file truncated inside the dimension table")
    shape = struct.unpack(f">{ndim}I", raw)
    count = int(np.prod(shape))
    payload = fh.read(count)
    if len(payload) < count:
        raise IDXParseError(f"payload truncated: expected {count} bytes, "
                            f"got {len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(shape)


def write_idx(array: np.ndarray, fh):
    array = np.ascontiguousarray(array, dtype=np.uint8)
    fh.write(bytes([0, 0, UNSIGNED_BYTE, array.ndim]))
    fh.write(struct.pack(f">{array.ndim}I", *array.shape))
    fh.write(array.tobytes())


def load_idx_dataset(images_path, labels_path, num_classes: int):
    """Load an (images, labels) IDX pair into training samples.

    Pixels are scaled to [0, 1]; labels are one-hot encoded into
    ``num_classes`` outputs.
    """
    from ..chl.net import Sample

    with open(images_path, "rb") as fh:
        images = parse_idx(fh)
    with open(labels_path, "rb") as fh:
        labels = parse_idx(fh)
    if labels.ndim != 1:
        raise IDXParseError("labels file must be one-dimensional")
    if images.shape[0] != labels.shape[0]:
        raise IDXParseError(
            f"{images.shape[0]} images but {labels.shape[0]} labels")
    if labels.size and int(labels.max()) >= num_classes:
        raise IDXParseError(
            f"label {int(labels.max())} does not fit {num_classes} classes")
    flat = images.reshape(images.shape[0], -1).astype(float) / 255.0
    samples = []
    for x, y in zip(flat, labels):
        onehot = np.zeros(num_classes)
        onehot[int(y)] = 1.0
        samples.append(Sample(x=x, y=onehot))
    return samples
