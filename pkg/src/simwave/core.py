"""Wave-domain core: SIM geometry, diffraction matrices, phase screens and the
end-to-end cascade operator.

Conventions
-----------
* Layers are indexed from 0 inside the code; ``element_positions`` takes the
  1-based layer number used in configs and reports.
* Elements inside a layer are ordered row-major with y as the outer index and
  x as the inner index: element ``m = iy * n_x + ix``.
* Layer ``l`` (1-based) sits in the plane ``z = (l - 1) * t``.
* All complex arithmetic is complex128.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from simwave.errors import DomainError

SPEED_OF_LIGHT = 299_792_458.0
TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SimGeometry:
    """Uniform stack of ``layers`` planar metasurfaces of ``n_x * n_y`` elements."""

    layers: int = 4
    n_x: int = 32
    n_y: int = 16
    spacing_x: float | None = None
    spacing_y: float | None = None
    depth: float = 0.05
    carrier_freq: float = 5e9

    def __post_init__(self):
        if int(self.layers) < 1:
            raise DomainError(f"layers must be >= 1, got {self.layers}")
        if int(self.n_x) < 1 or int(self.n_y) < 1:
            raise DomainError(f"n_x and n_y must be >= 1, got {self.n_x}, {self.n_y}")
        if not self.carrier_freq > 0:
            raise DomainError(f"carrier_freq must be > 0, got {self.carrier_freq}")
        # half-wavelength spacing unless given explicitly
        half = self.wavelength / 2.0
        if self.spacing_x is None:
            object.__setattr__(self, "spacing_x", half)
        if self.spacing_y is None:
            object.__setattr__(self, "spacing_y", half)
        if not (self.spacing_x > 0 and self.spacing_y > 0):
            raise DomainError("element spacings must be > 0")
        if not self.depth > 0:
            raise DomainError(f"depth must be > 0, got {self.depth}")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def per_layer(self) -> int:
        return self.n_x * self.n_y

    @property
    def total_elements(self) -> int:
        return self.layers * self.per_layer

    @property
    def layer_gap(self) -> float:
        """Uniform inter-layer distance.

        ``depth`` is the total stack thickness, so the gap is ``depth / (L - 1)``.
        A single layer has no internal gap; ``depth`` is then used as the
        distance to neighbouring planes (sources, exit aperture).
        """
        if self.layers == 1:
            return self.depth
        return self.depth / (self.layers - 1)


def _grid(n_x: int, n_y: int, d_x: float, d_y: float, z: float) -> np.ndarray:
    xs = (np.arange(n_x) - (n_x - 1) / 2.0) * d_x
    ys = (np.arange(n_y) - (n_y - 1) / 2.0) * d_y
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    pts = np.empty((n_x * n_y, 3))
    pts[:, 0] = xx.ravel()
    pts[:, 1] = yy.ravel()
    pts[:, 2] = z
    return pts


def element_positions(geometry: SimGeometry, layer: int) -> np.ndarray:
    """Coordinates of the elements of a layer, shape ``(n_x * n_y, 3)``.

    Args:
        geometry: stack description.
        layer: 1-based layer number.
    """
    if not 1 <= layer <= geometry.layers:
        raise DomainError(f"layer must lie in [1, {geometry.layers}], got {layer}")
    return _grid(geometry.n_x, geometry.n_y, geometry.spacing_x, geometry.spacing_y,
                 (layer - 1) * geometry.layer_gap)


def exit_aperture_positions(geometry: SimGeometry) -> np.ndarray:
    """Output aperture plane one layer gap beyond the last layer, same grid."""
    return _grid(geometry.n_x, geometry.n_y, geometry.spacing_x, geometry.spacing_y,
                 geometry.layers * geometry.layer_gap)


def source_positions(geometry: SimGeometry, count: int) -> np.ndarray:
    """Uniform linear array of ``count`` feeds along x, lambda/2 apart, one gap in front of layer 1."""
    pts = np.zeros((count, 3))
    pts[:, 0] = (np.arange(count) - (count - 1) / 2.0) * geometry.wavelength / 2.0
    pts[:, 2] = -geometry.layer_gap
    return pts


def rs_coefficients(src: np.ndarray, dst: np.ndarray, wavelength: float,
                    d_x: float, d_y: float) -> np.ndarray:
    """Rayleigh-Sommerfeld coefficient matrix, ``out[i, k]`` from ``src[k]`` to ``dst[i]``.

        w = (d_x d_y dz / r^2) (1 / (2 pi r) - j / lambda) exp(j 2 pi r / lambda)
    """
    src = np.atleast_2d(np.asarray(src, dtype=float))
    dst = np.atleast_2d(np.asarray(dst, dtype=float))
    diff = dst[:, None, :] - src[None, :, :]
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    dz = diff[..., 2]
    if np.any(r <= 0):
        raise DomainError("coincident source and destination points")
    if np.any(dz <= 0):
        raise DomainError("destination must lie strictly beyond source in z")
    amp = d_x * d_y * dz / r**2
    return amp * (1.0 / (TWO_PI * r) - 1j / wavelength) * np.exp(1j * TWO_PI * r / wavelength)


def propagation_coefficient(src, dst, wavelength: float, d_x: float, d_y: float) -> complex:
    """Scalar Rayleigh-Sommerfeld gain from one meta-atom to another."""
    return complex(rs_coefficients(np.asarray(src)[None], np.asarray(dst)[None],
                                   wavelength, d_x, d_y)[0, 0])


@dataclass(frozen=True)
class PhaseProfile:
    """Per-layer element phases, canonicalized to [0, 2pi)."""

    phases: np.ndarray

    def __post_init__(self):
        arr = np.array(self.phases, dtype=float, copy=True)
        if arr.ndim != 2:
            raise DomainError(f"phases must be 2-D (layers, elements), got shape {arr.shape}")
        arr = canonicalize(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "phases", arr)

    @classmethod
    def zeros(cls, geometry: SimGeometry) -> "PhaseProfile":
        return cls(np.zeros((geometry.layers, geometry.per_layer)))

    @classmethod
    def random(cls, geometry: SimGeometry, rng: np.random.Generator) -> "PhaseProfile":
        return cls(rng.uniform(0.0, TWO_PI, size=(geometry.layers, geometry.per_layer)))

    @property
    def layers(self) -> int:
        return self.phases.shape[0]

    @property
    def per_layer(self) -> int:
        return self.phases.shape[1]

    def check(self, geometry: SimGeometry) -> None:
        if self.phases.shape != (geometry.layers, geometry.per_layer):
            raise DomainError(f"phase profile shape {self.phases.shape} does not match geometry "
                              f"({geometry.layers}, {geometry.per_layer})")


def canonicalize(theta: np.ndarray) -> np.ndarray:
    out = np.mod(theta, TWO_PI)
    # np.mod of tiny negatives rounds up to exactly 2pi
    out[out >= TWO_PI] = 0.0
    return out


@dataclass(frozen=True)
class PropagationSet:
    """Diffraction matrices of a stack.

    ``layers[0]`` maps the input onto layer 1, ``layers[l]`` maps layer ``l``
    fields onto layer ``l + 1`` and ``exit`` maps the last layer onto the
    output aperture.
    """

    layers: tuple
    exit: np.ndarray

    def __post_init__(self):
        mats = tuple(np.asarray(w, dtype=complex) for w in self.layers)
        if not mats:
            raise DomainError("a propagation set needs at least one layer")
        n = mats[0].shape[0]
        for w in mats[1:]:
            if w.shape != (n, n):
                raise DomainError(f"inter-layer matrix has shape {w.shape}, expected {(n, n)}")
        ex = np.asarray(self.exit, dtype=complex)
        if ex.ndim != 2 or ex.shape[1] != n:
            raise DomainError(f"exit map has shape {ex.shape}, expected (*, {n})")
        for w in (*mats, ex):
            if not np.all(np.isfinite(w)):
                raise DomainError("propagation matrices must be finite")
            w.setflags(write=False)
        object.__setattr__(self, "layers", mats)
        object.__setattr__(self, "exit", ex)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def per_layer(self) -> int:
        return self.layers[0].shape[0]

    @property
    def input_dim(self) -> int:
        return self.layers[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.exit.shape[0]


def build_propagation_set(geometry: SimGeometry, input_dim: int, output_positions,
                          sources=None) -> PropagationSet:
    """Assemble the diffraction matrices of ``geometry``.

    With ``sources=None`` the input is written directly onto the layer-1
    fields (classifier mode), so ``input_dim`` must equal the per-layer
    element count and the input map is the identity. Otherwise ``sources``
    holds ``input_dim`` feed positions in front of layer 1.
    """
    lam = geometry.wavelength
    dx, dy = geometry.spacing_x, geometry.spacing_y
    n = geometry.per_layer
    output_positions = np.atleast_2d(np.asarray(output_positions, dtype=float))
    last = element_positions(geometry, geometry.layers)
    if np.any(output_positions[:, 2] <= last[0, 2]):
        raise DomainError("output positions must lie strictly beyond the last layer")

    if sources is None:
        if input_dim != n:
            raise DomainError(f"embedded input needs input_dim == {n}, got {input_dim}")
        first = np.eye(n, dtype=complex)
    else:
        sources = np.atleast_2d(np.asarray(sources, dtype=float))
        if sources.shape[0] != input_dim:
            raise DomainError(f"got {sources.shape[0]} source positions for input_dim {input_dim}")
        first = rs_coefficients(sources, element_positions(geometry, 1), lam, dx, dy)

    mats = [first]
    for l in range(2, geometry.layers + 1):
        mats.append(rs_coefficients(element_positions(geometry, l - 1),
                                    element_positions(geometry, l), lam, dx, dy))
    exit_map = rs_coefficients(last, output_positions, lam, dx, dy)
    return PropagationSet(tuple(mats), exit_map)


@dataclass(frozen=True)
class CascadeResponse:
    """End-to-end operator ``G`` with the per-layer factorization

        G = left[l] @ diag(exp(j theta_l)) @ right[l]

    where ``right[l]`` covers everything up to and including propagation into
    layer ``l`` and ``left[l]`` everything after its phase screen.
    """

    G: np.ndarray
    left: tuple = field(repr=False)
    right: tuple = field(repr=False)
    screens: np.ndarray = field(repr=False)

    @property
    def input_dim(self) -> int:
        return self.G.shape[1]

    @property
    def output_dim(self) -> int:
        return self.G.shape[0]


def cascade_response(props: PropagationSet, phases: PhaseProfile) -> CascadeResponse:
    """Compose the cascade for the given phase screens."""
    theta = phases.phases if isinstance(phases, PhaseProfile) else np.asarray(phases, dtype=float)
    if theta.shape != (props.depth, props.per_layer):
        raise DomainError(f"phase shape {theta.shape} does not match stack "
                          f"({props.depth}, {props.per_layer})")
    screens = np.exp(1j * theta)
    L = props.depth

    right = [props.layers[0]]
    for l in range(1, L):
        right.append(props.layers[l] @ (screens[l - 1][:, None] * right[l - 1]))
    left = [None] * L
    left[L - 1] = props.exit
    for l in range(L - 2, -1, -1):
        left[l] = (left[l + 1] * screens[l + 1][None, :]) @ props.layers[l + 1]

    G = (left[L - 1] * screens[L - 1][None, :]) @ right[L - 1]
    for m in (*left, *right, G, screens):
        m.setflags(write=False)
    return CascadeResponse(G, tuple(left), tuple(right), screens)


def apply_cascade(resp: CascadeResponse, x: np.ndarray) -> np.ndarray:
    """``G @ x`` for a vector or a batch of column vectors."""
    x = np.asarray(x)
    if x.shape[0] != resp.input_dim:
        raise DomainError(f"input has leading dimension {x.shape[0]}, expected {resp.input_dim}")
    return resp.G @ x


def quantize_phases(phases: PhaseProfile, bits: int) -> PhaseProfile:
    """Snap every phase to the nearest of ``2**bits`` uniform codewords.

    Exact ties resolve to the lower codeword index (round half down), so
    ``pi/2`` at one bit maps to 0.
    """
    if int(bits) < 1:
        raise DomainError(f"bits must be >= 1, got {bits}")
    levels = 2 ** int(bits)
    step = TWO_PI / levels
    scaled = phases.phases / step
    k = np.floor(scaled)
    k = np.where(scaled - k > 0.5, k + 1, k)
    k = np.mod(k, levels)
    return PhaseProfile(k * step)
