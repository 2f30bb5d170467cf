"""Synthetic SAR-like raw I/Q dataset and the global phase-rotation augmentation.

Each class is zero-mean, circularly symmetric complex Gaussian speckle laid
out on the layer-1 element grid. Classes differ in mean amplitude ``s_c``
(so that ``E|x_i| = s_c``) and in a Gaussian spatial correlation length
``rho_c`` measured in element pitches:

    corr(x_i, x_k) = exp(-|p_i - p_k|^2 / (2 rho_c^2)),   rho_c = 0 means white.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from simwave.errors import DomainError

# (name, amplitude scale s_c, correlation length rho_c in element pitches)
CLASS_TABLE = (
    ("ocean", 0.25, 0.0),
    ("forest", 0.5, 1.2),
    ("desert", 1.0, 2.4),
    ("urban", 2.0, 4.8),
)

TEST_FRACTION = 0.2


@dataclass(frozen=True)
class Sample:
    iq: np.ndarray
    label: int
    split: str = "train"


@dataclass(frozen=True)
class Dataset:
    """Samples stored column-wise: ``iq[n]`` is sample ``n``."""

    iq: np.ndarray
    labels: np.ndarray
    is_train: np.ndarray
    class_count: int
    generator_seed: int = 0

    def __post_init__(self):
        if self.iq.ndim != 2 or len(self.labels) != len(self.iq) or len(self.is_train) != len(self.iq):
            raise DomainError("inconsistent dataset arrays")
        if np.any(self.labels < 0) or np.any(self.labels >= self.class_count):
            raise DomainError("label out of range")
        if not np.all(np.isfinite(self.iq)):
            raise DomainError("dataset contains non-finite samples")

    @property
    def dim(self) -> int:
        return self.iq.shape[1]

    @property
    def samples(self) -> list:
        return [Sample(x, int(y), "train" if t else "test")
                for x, y, t in zip(self.iq, self.labels, self.is_train)]

    def split(self, name: str) -> "Dataset":
        if name not in ("train", "test"):
            raise DomainError(f"unknown split {name!r}")
        mask = self.is_train if name == "train" else ~self.is_train
        return Dataset(self.iq[mask], self.labels[mask], self.is_train[mask],
                       self.class_count, self.generator_seed)

    def __len__(self) -> int:
        return len(self.labels)


def grid_shape(dim: int) -> tuple:
    """Most square ``(n_y, n_x)`` factorization of ``dim`` with ``n_x >= n_y``."""
    n_y = int(np.floor(np.sqrt(dim)))
    while dim % n_y:
        n_y -= 1
    return n_y, dim // n_y


def correlation_matrix(shape: tuple, rho: float) -> np.ndarray:
    n_y, n_x = shape
    yy, xx = np.meshgrid(np.arange(n_y), np.arange(n_x), indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1).astype(float)
    if rho <= 0:
        return np.eye(len(pts))
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
    return np.exp(-d2 / (2.0 * rho**2))


def _color(corr: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(corr)
    return v * np.sqrt(np.clip(w, 0.0, None))


def gen_synthetic_dataset(class_count: int, per_class: int, dim: int, seed: int = 0,
                          grid: tuple | None = None) -> Dataset:
    """Draw ``per_class`` speckle samples per class with a stratified 80/20 split."""
    if not 2 <= class_count <= len(CLASS_TABLE):
        raise DomainError(f"class_count must lie in [2, {len(CLASS_TABLE)}], got {class_count}")
    if per_class < 2:
        raise DomainError("per_class must be >= 2 so both splits see every class")
    if dim < 1:
        raise DomainError("dim must be >= 1")
    shape = grid or grid_shape(dim)
    if shape[0] * shape[1] != dim:
        raise DomainError(f"grid {shape} does not hold {dim} elements")

    rng = np.random.default_rng(seed)
    n_test = max(1, int(round(TEST_FRACTION * per_class)))
    iq, labels, is_train = [], [], []
    for c in range(class_count):
        _, scale, rho = CLASS_TABLE[c]
        sigma = 2.0 * scale / np.sqrt(np.pi)
        color = _color(correlation_matrix(shape, rho))
        z = (rng.standard_normal((per_class, dim)) + 1j * rng.standard_normal((per_class, dim))) / np.sqrt(2.0)
        iq.append(sigma * z @ color.T)
        labels.append(np.full(per_class, c))
        mask = np.ones(per_class, dtype=bool)
        mask[rng.permutation(per_class)[:n_test]] = False
        is_train.append(mask)
    return Dataset(np.concatenate(iq), np.concatenate(labels), np.concatenate(is_train),
                   class_count, seed)


def rotation_factor(degrees: float) -> complex:
    """``exp(j pi degrees / 180)``, exact for multiples of 90 degrees."""
    quarter, rem = divmod(float(degrees), 90.0)
    if rem == 0.0:
        return (1 + 0j, 1j, -1 + 0j, -1j)[int(quarter) % 4]
    return complex(np.exp(1j * np.pi * degrees / 180.0))


def rotate_phase(sample, degrees: float):
    """Global I/Q phase rotation of a Sample, an iq array or a Dataset."""
    f = rotation_factor(degrees)
    if f == 1:
        # skip the multiply: (a + bj) * (1 + 0j) can flip the sign of a zero component
        return sample if isinstance(sample, (Sample, Dataset)) else np.array(sample)
    if isinstance(sample, Sample):
        return Sample(sample.iq * f, sample.label, sample.split)
    if isinstance(sample, Dataset):
        return Dataset(sample.iq * f, sample.labels, sample.is_train,
                       sample.class_count, sample.generator_seed)
    return np.asarray(sample) * f
