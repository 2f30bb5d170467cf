"""Artifact formats.

Weights (``.simp``), little-endian::

    b"SIMP" | version u32 | L u32 | n_x u32 | n_y u32 | L*n_x*n_y float64 radians

layer-major, row-major (y outer, x inner) within a layer.

Dataset (``.simd``), little-endian::

    b"SIMD" | version u32 | class_count u32 | sample_count u32 | dim u32
    then per sample: label u32 | dim x (re float64, im float64)

The format carries no split tags. Writers store every training sample before
every test sample; readers mark, per class, the last ``max(1, round(0.2 n_c))``
samples of that class (in file order) as test. Files written here therefore
round-trip their split exactly.

CSV files always start with a header row; floats use Python's shortest
round-trip representation so identical runs give identical bytes.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from simwave.core import PhaseProfile
from simwave.errors import DomainError
from simwave.tasks.data import TEST_FRACTION, Dataset

WEIGHTS_MAGIC = b"SIMP"
DATASET_MAGIC = b"SIMD"
FORMAT_VERSION = 1


class FormatError(DomainError):
    """A binary artifact is truncated or carries the wrong magic/version."""


def write_weights(path, phases: PhaseProfile, n_x: int, n_y: int) -> None:
    L, n = phases.phases.shape
    if n != n_x * n_y:
        raise DomainError(f"{n} phases per layer do not fill a {n_x} x {n_y} grid")
    header = WEIGHTS_MAGIC + struct.pack("<4I", FORMAT_VERSION, L, n_x, n_y)
    Path(path).write_bytes(header + phases.phases.astype("<f8").tobytes())


def read_weights(path) -> tuple:
    """Returns ``(PhaseProfile, n_x, n_y)``."""
    raw = Path(path).read_bytes()
    if len(raw) < 20 or raw[:4] != WEIGHTS_MAGIC:
        raise FormatError(f"{path}: not a SIMP weights file")
    version, L, n_x, n_y = struct.unpack_from("<4I", raw, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported weights version {version}")
    count = L * n_x * n_y
    if len(raw) != 20 + 8 * count:
        raise FormatError(f"{path}: expected {count} phases, file size {len(raw)} disagrees")
    theta = np.frombuffer(raw, dtype="<f8", offset=20).reshape(L, n_x * n_y)
    return PhaseProfile(theta.astype(float)), n_x, n_y


def write_dataset(path, data: Dataset) -> None:
    order = np.concatenate([np.flatnonzero(data.is_train), np.flatnonzero(~data.is_train)])
    n, dim = len(order), data.dim
    rec = np.dtype([("label", "<u4"), ("iq", "<f8", (2 * dim,))])
    body = np.empty(n, dtype=rec)
    body["label"] = data.labels[order]
    iq = data.iq[order]
    inter = np.empty((n, 2 * dim))
    inter[:, 0::2] = iq.real
    inter[:, 1::2] = iq.imag
    body["iq"] = inter
    header = DATASET_MAGIC + struct.pack("<4I", FORMAT_VERSION, data.class_count, n, dim)
    Path(path).write_bytes(header + body.tobytes())


def split_tags(labels: np.ndarray, class_count: int) -> np.ndarray:
    """Train mask under the file-order split rule."""
    is_train = np.ones(len(labels), dtype=bool)
    for c in range(class_count):
        members = np.flatnonzero(labels == c)
        if len(members):
            n_test = max(1, int(round(TEST_FRACTION * len(members))))
            is_train[members[len(members) - n_test:]] = False
    return is_train


def read_dataset(path, seed: int = 0) -> Dataset:
    raw = Path(path).read_bytes()
    if len(raw) < 20 or raw[:4] != DATASET_MAGIC:
        raise FormatError(f"{path}: not a SIMD dataset file")
    version, classes, n, dim = struct.unpack_from("<4I", raw, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported dataset version {version}")
    rec = np.dtype([("label", "<u4"), ("iq", "<f8", (2 * dim,))])
    if len(raw) != 20 + n * rec.itemsize:
        raise FormatError(f"{path}: expected {n} samples of dim {dim}, file size disagrees")
    body = np.frombuffer(raw, dtype=rec, offset=20, count=n)
    labels = body["label"].astype(np.int64)
    iq = body["iq"][:, 0::2] + 1j * body["iq"][:, 1::2]
    return Dataset(iq, labels, split_tags(labels, classes), int(classes), seed)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "" if np.isnan(v) else repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_confusion(path, counts: np.ndarray) -> None:
    k = counts.shape[0]
    write_csv(path, ["truth"] + [f"pred_{j}" for j in range(k)],
              ([i] + list(counts[i]) for i in range(k)))


def write_history(path, history) -> None:
    write_csv(path, ["epoch", "train_loss", "train_acc", "test_loss", "test_acc"], history.rows())
