"""Separable planar array geometries, sources, and steering vectors.

The arrays live in the xz-plane with one sensor axis along x (M sensors,
"horizontal") and one along z (N sensors, "vertical"). Positions are in
wavelengths with the first sensor of each axis at the origin. Because the
geometry is separable, the joint steering vector is the Kronecker product of
the two axis steering vectors and the joint steering matrix is their
column-wise (Khatri-Rao) product.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import khatri_rao

from .errors import DomainError

TWO_PI = 2.0 * np.pi

# Largest adjacent spacing, in wavelengths, that keeps the phase map
# one-to-one over the visible region.
MAX_ADJACENT_SPACING = 0.5

# Relative tolerance used when deciding whether an axis is uniformly spaced.
UNIFORM_RTOL = 1e-9


class ArrayKind(str, Enum):
    """Supported separable planar layouts."""

    URA = "ura"
    NURA = "nura"
    UPGA = "upga"
    NUPGA = "nupga"


def angle_to_mu(angle_deg):
    """Map angles in degrees to spatial frequencies in radians per wavelength.

    The mapping is mu = 2*pi*cos(angle), so it is strictly decreasing on the
    domain [0, 180] and covers [-2*pi, 2*pi].

    Parameters
    ----------
    angle_deg : float or array_like
        Angle(s) measured from the array axis, in [0, 180] degrees.

    Returns
    -------
    float or ndarray
        Spatial frequency (frequencies), same shape as the input.
    """
    a = np.asarray(angle_deg, dtype=float)
    if np.any(a < 0.0) or np.any(a > 180.0):
        raise DomainError(f"angles must lie in [0, 180] degrees, got {angle_deg!r}")
    mu = _mu_unchecked(a)
    return float(mu) if np.isscalar(angle_deg) else mu


def _mu_unchecked(angle_deg):
    # angle map without domain validation, for search loops over known grids
    return TWO_PI * np.cos(np.deg2rad(angle_deg))


def mu_to_angle(mu):
    """Inverse of :func:`angle_to_mu`; maps [-2*pi, 2*pi] back to [0, 180] degrees."""
    m = np.asarray(mu, dtype=float)
    if np.any(np.abs(m) > TWO_PI):
        raise DomainError(f"spatial frequencies must lie in [-2*pi, 2*pi], got {mu!r}")
    ang = np.rad2deg(np.arccos(m / TWO_PI))
    return float(ang) if np.isscalar(mu) else ang


def steering_vector_1d(positions, mu):
    """Steering vector of one sensor axis at spatial frequency ``mu``.

    Element k is exp(-1j * mu * positions[k]); with positions[0] = 0 the
    first element is exactly 1.
    """
    p = np.asarray(positions, dtype=float)
    if p.size == 0:
        raise DomainError("positions must be non-empty")
    if p[0] != 0.0:
        raise DomainError("positions must start at the origin (positions[0] == 0)")
    return np.exp(-1j * mu * p)


def _validate_axis(positions, name):
    p = np.asarray(positions, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise DomainError(f"{name} must be a non-empty 1-D sequence")
    if p[0] != 0.0:
        raise DomainError(f"{name} must start at 0, got {p[0]}")
    d = np.diff(p)
    if p.size > 1 and np.any(d <= 0.0):
        raise DomainError(f"{name} must be strictly increasing")
    if p.size > 1 and np.any(d > MAX_ADJACENT_SPACING + 1e-12):
        raise DomainError(
            f"{name}: adjacent spacing may not exceed {MAX_ADJACENT_SPACING} wavelengths"
        )
    p.flags.writeable = False
    return p


@dataclass(frozen=True)
class ArrayGeometry:
    """Immutable sensor positions of a separable planar array.

    Attributes
    ----------
    kind : ArrayKind
        Layout tag. Rooting-based estimators check actual spacing
        uniformity, not the tag.
    x_positions : ndarray
        M positions along x, wavelengths, starting at 0, strictly increasing,
        adjacent gaps at most half a wavelength.
    z_positions : ndarray
        N positions along z, same constraints.
    """

    kind: ArrayKind
    x_positions: np.ndarray
    z_positions: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "kind", ArrayKind(self.kind))
        object.__setattr__(self, "x_positions", _validate_axis(self.x_positions, "x_positions"))
        object.__setattr__(self, "z_positions", _validate_axis(self.z_positions, "z_positions"))

    @property
    def m(self) -> int:
        """Sensor count along x."""
        return self.x_positions.size

    @property
    def n(self) -> int:
        """Sensor count along z."""
        return self.z_positions.size

    @property
    def mn(self) -> int:
        return self.m * self.n

    @classmethod
    def ura(cls, m, n, spacing=0.5, kind=ArrayKind.URA):
        """Uniform rectangular array with the given spacing in wavelengths."""
        if m < 1 or n < 1:
            raise DomainError("array must have at least one sensor per axis")
        if not 0.0 < spacing <= MAX_ADJACENT_SPACING:
            raise DomainError(f"spacing must lie in (0, {MAX_ADJACENT_SPACING}] wavelengths")
        return cls(kind, spacing * np.arange(m), spacing * np.arange(n))

    @classmethod
    def upga(cls, m, n, spacing=0.5):
        """Uniform parallelogram array; same separable axis model as the URA."""
        return cls.ura(m, n, spacing, kind=ArrayKind.UPGA)

    @classmethod
    def nura(cls, m, n, seed, spacing_range=(0.3, 0.5), kind=ArrayKind.NURA):
        """Non-uniform rectangular array with seeded random spacings.

        Adjacent gaps are drawn i.i.d. uniform from ``spacing_range``
        (wavelengths) so the geometry is reproducible from the seed.
        """
        if m < 1 or n < 1:
            raise DomainError("array must have at least one sensor per axis")
        lo, hi = spacing_range
        if not 0.0 < lo <= hi <= MAX_ADJACENT_SPACING:
            raise DomainError(
                f"spacing_range must satisfy 0 < lo <= hi <= {MAX_ADJACENT_SPACING}"
            )
        rng = np.random.default_rng(seed)
        x = np.concatenate(([0.0], np.cumsum(rng.uniform(lo, hi, size=m - 1))))
        z = np.concatenate(([0.0], np.cumsum(rng.uniform(lo, hi, size=n - 1))))
        return cls(kind, x, z)

    @classmethod
    def nupga(cls, m, n, seed, spacing_range=(0.3, 0.5)):
        """Non-uniform parallelogram array, seeded like the NURA."""
        return cls.nura(m, n, seed, spacing_range, kind=ArrayKind.NUPGA)

    def uniform_spacing_x(self):
        """Common x spacing in wavelengths, or None if the axis is non-uniform."""
        return _uniform_spacing(self.x_positions)

    def uniform_spacing_z(self):
        """Common z spacing in wavelengths, or None if the axis is non-uniform."""
        return _uniform_spacing(self.z_positions)

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "x_positions": self.x_positions.tolist(),
            "z_positions": self.z_positions.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, d: dict) -> "ArrayGeometry":
        try:
            kind = ArrayKind(d["kind"])
            x = d["x_positions"]
            z = d["z_positions"]
        except (KeyError, ValueError) as exc:
            raise DomainError(f"bad geometry description: {exc}") from exc
        return cls(kind, np.asarray(x, float), np.asarray(z, float))

    @classmethod
    def from_json(cls, text: str) -> "ArrayGeometry":
        return cls.from_json_dict(json.loads(text))


def _uniform_spacing(positions):
    if positions.size < 2:
        return None
    d = np.diff(positions)
    if np.allclose(d, d[0], rtol=UNIFORM_RTOL, atol=0.0):
        return float(d[0])
    return None


@dataclass(frozen=True)
class SourceSet:
    """P far-field sources given as (azimuth, elevation) pairs in degrees.

    Azimuth is measured from the x sensor axis, elevation from the z sensor
    axis; both lie in [0, 180]. Pairs must be distinct.
    """

    azimuth_deg: np.ndarray
    elevation_deg: np.ndarray

    def __post_init__(self):
        az = np.atleast_1d(np.asarray(self.azimuth_deg, dtype=float))
        el = np.atleast_1d(np.asarray(self.elevation_deg, dtype=float))
        if az.size == 0:
            raise DomainError("a source set must contain at least one source")
        if az.shape != el.shape or az.ndim != 1:
            raise DomainError("azimuth_deg and elevation_deg must be equal-length 1-D")
        if np.any((az < 0) | (az > 180)) or np.any((el < 0) | (el > 180)):
            raise DomainError("source angles must lie in [0, 180] degrees")
        pairs = {(a, e) for a, e in zip(az.tolist(), el.tolist())}
        if len(pairs) != az.size:
            raise DomainError("source (azimuth, elevation) pairs must be distinct")
        az.flags.writeable = False
        el.flags.writeable = False
        object.__setattr__(self, "azimuth_deg", az)
        object.__setattr__(self, "elevation_deg", el)

    @classmethod
    def from_pairs(cls, pairs) -> "SourceSet":
        """Build from an iterable of (azimuth_deg, elevation_deg) pairs."""
        arr = np.asarray(list(pairs), dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise DomainError("expected a sequence of (azimuth, elevation) pairs")
        return cls(arr[:, 0], arr[:, 1])

    @property
    def p(self) -> int:
        """Number of sources."""
        return self.azimuth_deg.size

    @property
    def mu_h(self) -> np.ndarray:
        """Horizontal (x-axis) spatial frequencies."""
        return angle_to_mu(self.azimuth_deg)

    @property
    def mu_v(self) -> np.ndarray:
        """Vertical (z-axis) spatial frequencies."""
        return angle_to_mu(self.elevation_deg)

    def pairs(self) -> np.ndarray:
        """P x 2 array of (azimuth, elevation) in degrees."""
        return np.column_stack([self.azimuth_deg, self.elevation_deg])


def steering_vector_2d(geom: ArrayGeometry, mu_h, mu_v) -> np.ndarray:
    """Joint steering vector a(mu_h, mu_v) of length M*N.

    The vertical index runs fastest: element m*N + n equals
    a_h[m] * a_v[n], i.e. the Kronecker product of the axis vectors.
    """
    ah = steering_vector_1d(geom.x_positions, mu_h)
    av = steering_vector_1d(geom.z_positions, mu_v)
    return np.kron(ah, av)


def steering_matrix(geom: ArrayGeometry, sources: SourceSet):
    """Joint steering matrix and its axis factors.

    Returns
    -------
    a : ndarray, shape (M*N, P)
        Column-wise Kronecker (Khatri-Rao) product of the factors.
    a_h : ndarray, shape (M, P)
        Horizontal factor, one column per source.
    a_v : ndarray, shape (N, P)
        Vertical factor.
    """
    a_h = np.exp(-1j * np.outer(geom.x_positions, sources.mu_h))
    a_v = np.exp(-1j * np.outer(geom.z_positions, sources.mu_v))
    return khatri_rao(a_h, a_v), a_h, a_v
