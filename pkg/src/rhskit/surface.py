"""RHS geometry, holographic pattern synthesis, quantization and power budgeting.

The surface lies in the y-z plane with its normal along +x.  Element
``(iy, iz)`` sits at ``(0, iy*d, iz*d)`` and elements are flattened in C
order, so flat index ``n = iy*n_z + iz``.  Directions use the zenith angle
``theta`` measured from +z and the azimuth ``phi`` measured from +x, which
makes broadside ``theta = 90 deg, phi = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ModeError

SPEED_OF_LIGHT = 299792458.0
DEFAULT_N_G = 1.732
# 1-bit ON/OFF radiated-power ratio of the fabricated element
ONE_BIT_POWER_RATIO = 3.0

_TOL = 1e-12


def freq_to_wavelength(freq_hz):
    return SPEED_OF_LIGHT / np.asarray(freq_hz, dtype=float)


@dataclass(frozen=True)
class Direction:
    """Propagation direction in radians; ``theta`` in [0, pi], ``phi`` in [0, 2pi)."""

    theta: float
    phi: float

    def __post_init__(self):
        if not (-_TOL <= self.theta <= np.pi + _TOL):
            raise ValueError(f"theta={self.theta} outside [0, pi]")
        if not (0.0 <= self.phi < 2 * np.pi):
            raise ValueError(f"phi={self.phi} outside [0, 2pi)")

    @classmethod
    def from_degrees(cls, theta_deg, phi_deg):
        """Build from degrees; azimuth is wrapped into [0, 360)."""
        phi = np.deg2rad(float(phi_deg) % 360.0)
        if phi >= 2 * np.pi:
            phi = 0.0
        return cls(float(np.deg2rad(theta_deg)), float(phi))

    @property
    def unit_vector(self):
        st = np.sin(self.theta)
        return np.array([st * np.cos(self.phi), st * np.sin(self.phi), np.cos(self.theta)])

    @property
    def degrees(self):
        return float(np.rad2deg(self.theta)), float(np.rad2deg(self.phi))


@dataclass(frozen=True, eq=False)
class DirectionGrid:
    """Flat set of directions, typically a regular angular grid."""

    theta: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        phi = np.mod(np.atleast_1d(np.asarray(self.phi, dtype=float)), 2 * np.pi)
        if theta.shape != phi.shape:
            raise ValueError("theta and phi must have the same shape")
        object.__setattr__(self, "theta", theta.ravel())
        object.__setattr__(self, "phi", phi.ravel())

    @classmethod
    def regular(cls, theta_deg=(0.0, 180.0), phi_deg=(-90.0, 90.0), step_deg=1.0):
        """Inclusive regular grid.  The default covers the front half-space."""
        t = np.arange(theta_deg[0], theta_deg[1] + step_deg / 2, step_deg)
        p = np.arange(phi_deg[0], phi_deg[1] + step_deg / 2, step_deg)
        tt, pp = np.meshgrid(t, p, indexing="ij")
        return cls(np.deg2rad(tt), np.deg2rad(pp))

    def __len__(self):
        return self.theta.size

    def __iter__(self):
        for t, p in zip(self.theta, self.phi):
            yield Direction(float(min(max(t, 0.0), np.pi)), float(p))

    def unit_vectors(self):
        st = np.sin(self.theta)
        return np.stack([st * np.cos(self.phi), st * np.sin(self.phi), np.cos(self.theta)], axis=1)

    def degrees(self):
        return np.rad2deg(self.theta), np.rad2deg(self.phi)


def unit_vectors(dirs) -> np.ndarray:
    """Return a (D, 3) array of unit vectors from any supported direction container."""
    if isinstance(dirs, DirectionGrid):
        return dirs.unit_vectors()
    if isinstance(dirs, Direction):
        return dirs.unit_vector[None, :]
    if isinstance(dirs, np.ndarray):
        u = np.atleast_2d(dirs).astype(float)
        if u.shape[1] != 3:
            raise ValueError("direction array must have shape (D, 3)")
        return u
    dirs = list(dirs)
    if not dirs:
        return np.zeros((0, 3))
    return np.stack([d.unit_vector for d in dirs])


@dataclass(frozen=True, eq=False)
class SurfaceGeometry:
    """Rectangular RHS lattice with embedded feeds.

    Parameters
    ----------
    n_y, n_z : int
        Element counts along y and z.
    lambda0 : float
        Free-space wavelength in meters.
    spacing : float, optional
        Element pitch in meters, ``lambda0 / 3`` by default.
    n_g : float
        Waveguide index; the reference wave has ``|k_s| = n_g * 2pi / lambda0``.
    feeds : array_like, optional
        (K, 3) feed coordinates.  Defaults to one feed at the lattice center.
    mask : array_like of bool, optional
        (n_y, n_z) activation flags, all active by default.
    """

    n_y: int
    n_z: int
    lambda0: float
    spacing: float | None = None
    n_g: float = DEFAULT_N_G
    feeds: np.ndarray | None = None
    mask: np.ndarray | None = None
    _positions: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.n_y) < 1 or int(self.n_z) < 1:
            raise ValueError("n_y and n_z must be >= 1")
        if self.lambda0 <= 0:
            raise ValueError("lambda0 must be positive")
        if self.n_g < 1:
            raise ValueError("n_g must be >= 1")
        object.__setattr__(self, "n_y", int(self.n_y))
        object.__setattr__(self, "n_z", int(self.n_z))
        spacing = self.lambda0 / 3 if self.spacing is None else float(self.spacing)
        if spacing <= 0:
            raise ValueError("spacing must be positive")
        object.__setattr__(self, "spacing", spacing)

        iy, iz = np.meshgrid(np.arange(self.n_y), np.arange(self.n_z), indexing="ij")
        pos = np.stack([np.zeros(iy.size), iy.ravel() * spacing, iz.ravel() * spacing], axis=1)
        pos.setflags(write=False)
        object.__setattr__(self, "_positions", pos)

        if self.feeds is None:
            feeds = np.array([[0.0, (self.n_y - 1) * spacing / 2, (self.n_z - 1) * spacing / 2]])
        else:
            feeds = np.atleast_2d(np.asarray(self.feeds, dtype=float))
        if feeds.size == 0 or feeds.shape[1] != 3:
            raise ValueError("feeds must be a non-empty (K, 3) array")
        if np.any(feeds[:, 0] > _TOL):
            raise ValueError("feeds must lie on or under the surface plane (x <= 0)")
        feeds.setflags(write=False)
        object.__setattr__(self, "feeds", feeds)

        if self.mask is None:
            mask = np.ones((self.n_y, self.n_z), dtype=bool)
        else:
            mask = np.asarray(self.mask, dtype=bool)
            if mask.shape != (self.n_y, self.n_z):
                raise ValueError(f"mask shape {mask.shape} != {(self.n_y, self.n_z)}")
            mask = mask.copy()
        if not mask.any():
            raise ValueError("at least one element must be active")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @property
    def shape(self):
        return (self.n_y, self.n_z)

    @property
    def n_elements(self):
        return self.n_y * self.n_z

    @property
    def n_feeds(self):
        return self.feeds.shape[0]

    @property
    def positions(self):
        return self._positions

    @property
    def k0(self):
        return 2 * np.pi / self.lambda0

    @property
    def k_s(self):
        return self.n_g * self.k0

    def guided_distance(self, feed_index=0):
        """Distance from feed ``feed_index`` to every element, flat order."""
        if not 0 <= feed_index < self.n_feeds:
            raise IndexError(f"feed index {feed_index} out of range for {self.n_feeds} feeds")
        return np.linalg.norm(self._positions - self.feeds[feed_index], axis=1)

    def with_mask(self, mask):
        return SurfaceGeometry(self.n_y, self.n_z, self.lambda0, self.spacing, self.n_g, self.feeds, mask)

    def with_feeds(self, feeds):
        return SurfaceGeometry(self.n_y, self.n_z, self.lambda0, self.spacing, self.n_g, feeds, self.mask)


def spread_feeds(n_y, n_z, spacing, k):
    """``k`` feeds evenly spaced along y at mid-height of the lattice."""
    ys = (np.arange(k) + 0.5) * n_y / k - 0.5
    return np.stack([np.zeros(k), ys * spacing, np.full(k, (n_z - 1) * spacing / 2)], axis=1)


@dataclass(frozen=True)
class Quantization:
    """Amplitude quantization rule.

    ``bits=None`` is continuous.  ``bits=1`` uses the two levels ``{low, high}``,
    by default ``{1/sqrt(3), 1}`` (the element's ON/OFF power ratio of 3).
    ``bits >= 2`` uses a uniform grid of ``2**bits`` levels over [0, 1].
    """

    bits: int | None = None
    low: float | None = None
    high: float = 1.0

    def __post_init__(self):
        if self.bits is not None:
            if int(self.bits) != self.bits or not 1 <= self.bits <= 16:
                raise ValueError("bits must be an integer in [1, 16]")
            if self.bits == 1:
                low = 1 / np.sqrt(ONE_BIT_POWER_RATIO) if self.low is None else float(self.low)
                if not 0.0 <= low < self.high <= 1.0:
                    raise ValueError("1-bit levels need 0 <= low < high <= 1")
                object.__setattr__(self, "low", low)

    @classmethod
    def binary(cls):
        """Plain on/off levels {0, 1}."""
        return cls(bits=1, low=0.0, high=1.0)

    @property
    def continuous(self):
        return self.bits is None

    @property
    def levels(self):
        if self.bits is None:
            return None
        if self.bits == 1:
            return np.array([self.low, self.high])
        return np.linspace(0.0, 1.0, 2**self.bits)

    def quantize(self, values):
        """Round to the nearest level; continuous mode only clips to [0, 1]."""
        v = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
        lv = self.levels
        if lv is None:
            return v
        if self.bits == 1:
            return np.where(v >= (lv[0] + lv[1]) / 2, lv[1], lv[0])
        # uniform grid: exact arithmetic keeps quantize idempotent
        steps = 2**self.bits - 1
        return np.round(v * steps) / steps

    def on_grid(self, values, atol=1e-12):
        lv = self.levels
        v = np.asarray(values, dtype=float)
        if lv is None:
            return bool(np.all((v >= -atol) & (v <= 1 + atol)))
        return bool(np.all(np.min(np.abs(v[..., None] - lv), axis=-1) <= atol))


@dataclass(frozen=True, eq=False)
class HolographicPattern:
    """Per-element radiation amplitudes in [0, 1].

    ``mask`` marks the active elements; masked-off entries are exactly zero.
    Only active entries are required to lie on the quantization grid.
    """

    amplitudes: np.ndarray
    quant: Quantization = Quantization()
    mask: np.ndarray | None = None

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=float)
        if np.any(~np.isfinite(a)) or np.any(a < -_TOL) or np.any(a > 1 + _TOL):
            raise ValueError("amplitudes must lie in [0, 1]")
        a = np.clip(a, 0.0, 1.0)
        mask = np.ones(a.shape, dtype=bool) if self.mask is None else np.asarray(self.mask, dtype=bool)
        if mask.shape != a.shape:
            raise ValueError("mask shape must match amplitudes")
        if np.any(a[~mask] != 0):
            raise ValueError("masked-off elements must have amplitude exactly 0")
        if not self.quant.on_grid(a[mask]):
            raise ValueError("active amplitudes are not on the quantization grid")
        a.setflags(write=False)
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def build(cls, values, quant=Quantization(), mask=None):
        """Quantize ``values`` and zero masked entries before construction."""
        v = quant.quantize(values)
        if mask is not None:
            v = np.where(np.asarray(mask, dtype=bool), v, 0.0)
        return cls(v, quant, mask)

    @classmethod
    def uniform(cls, shape, value=0.5, quant=Quantization(), mask=None):
        return cls.build(np.full(shape, float(value)), quant, mask)

    @property
    def flat(self):
        return self.amplitudes.ravel()

    @property
    def shape(self):
        return self.amplitudes.shape

    def scaled(self, s):
        """Scale then re-quantize; active elements stay on the grid."""
        return HolographicPattern.build(self.amplitudes * s, self.quant, self.mask)

    def with_mask(self, mask):
        return HolographicPattern.build(self.amplitudes, self.quant, mask)

    def requantize(self, quant):
        return HolographicPattern.build(self.amplitudes, quant, self.mask)


def _check_pattern(geom, pattern):
    if pattern.amplitudes.size != geom.n_elements:
        raise ValueError(f"pattern has {pattern.amplitudes.size} entries, geometry {geom.n_elements}")


def reference_phase(geom: SurfaceGeometry, feed_index: int = 0) -> np.ndarray:
    """Guided reference wave ``exp(-j |k_s| rho_n)`` spreading radially from the feed."""
    return np.exp(-1j * geom.k_s * geom.guided_distance(feed_index))


def reference_matrix(geom: SurfaceGeometry) -> np.ndarray:
    """(N, K) matrix whose column k is the reference wave of feed k."""
    return np.stack([reference_phase(geom, k) for k in range(geom.n_feeds)], axis=1)


def object_phase(geom: SurfaceGeometry, direction: Direction) -> np.ndarray:
    """Free-space object wave ``exp(-j k0 u . r_n)`` toward ``direction``."""
    return np.exp(-1j * geom.k0 * (geom.positions @ direction.unit_vector))


def interference(geom, feed_index, direction):
    return object_phase(geom, direction) * np.conj(reference_phase(geom, feed_index))


def single_beam_pattern(geom, feed_index, direction, quant=Quantization()) -> HolographicPattern:
    """Holographic pattern ``(Re[interference] + 1) / 2`` steering one beam."""
    m = (np.real(interference(geom, feed_index, direction)) + 1.0) / 2.0
    return HolographicPattern.build(m.reshape(geom.shape), quant, geom.mask)


def steering_matrix(geom, dirs) -> np.ndarray:
    """(D, N) far-field response ``exp(+j k0 u_d . r_n)``."""
    return np.exp(1j * geom.k0 * (unit_vectors(dirs) @ geom.positions.T))


def beampattern_gain(geom, pattern, feed_index, grid, normalize=False, steering=None):
    """Linear power gain of the pattern excited by one feed, per grid direction.

    ``steering`` may carry a precomputed :func:`steering_matrix` for ``grid``
    when many patterns are evaluated on the same directions.
    """
    _check_pattern(geom, pattern)
    A = steering_matrix(geom, grid) if steering is None else steering
    if A.shape[0] == 0:
        raise ValueError("direction grid is empty")
    field_ = A @ (pattern.flat * reference_phase(geom, feed_index))
    gain = np.abs(field_) ** 2
    if normalize:
        peak = gain.max()
        if peak > 0:
            gain = gain / peak
    return gain


def gain_to_db(gain, floor_db=-300.0):
    with np.errstate(divide="ignore"):
        return np.maximum(10 * np.log10(np.asarray(gain, dtype=float)), floor_db)


def beampattern_table(grid: DirectionGrid, gain) -> dict:
    """CSV-ready columns (theta_deg, phi_deg, gain_linear, gain_db)."""
    t, p = grid.degrees()
    return {"theta_deg": t, "phi_deg": p, "gain_linear": np.asarray(gain), "gain_db": gain_to_db(gain)}


@dataclass(frozen=True, eq=False)
class LeakageModel:
    """Power drawn by each element from the feed.

    ``mode='uniform'`` uses fixed ratios ``eta_n`` against the feed power.
    ``mode='serial-decay'`` lets each element, in guided order, leak the fraction
    ``decay_alpha * m_n**2`` of whatever power is still travelling.
    """

    per_element_ratio: float | np.ndarray = 1.0
    mode: str = "uniform"
    decay_alpha: float = 0.02

    def __post_init__(self):
        if self.mode not in ("uniform", "serial-decay"):
            raise ValueError(f"unknown leakage mode {self.mode!r}")
        eta = np.asarray(self.per_element_ratio, dtype=float)
        if np.any(eta <= 0) or np.any(eta > 1):
            raise ValueError("per-element ratios must lie in (0, 1]")
        if not 0 < self.decay_alpha < 1:
            raise ValueError("decay_alpha must lie in (0, 1)")

    def ratios(self, n):
        eta = np.asarray(self.per_element_ratio, dtype=float).ravel()
        if eta.size == 1:
            return np.full(n, eta[0])
        if eta.size != n:
            raise ValueError(f"leakage model has {eta.size} ratios for {n} elements")
        return eta


def serial_order(geom, feed_index=0):
    """Element indices sorted by guided distance; ties keep (n_y, n_z) order."""
    return np.argsort(geom.guided_distance(feed_index), kind="stable")


def serial_feed_power(geom, pattern, leak: LeakageModel, feed_index=0):
    """Per-element radiated power (element order) and the residual fraction."""
    if leak.mode != "serial-decay":
        raise ModeError(f"serial_feed_power needs mode 'serial-decay', got {leak.mode!r}")
    _check_pattern(geom, pattern)
    m2 = pattern.flat**2
    p = np.zeros(m2.size)
    residual = 1.0
    for n in serial_order(geom, feed_index):
        take = residual * leak.decay_alpha * m2[n]
        p[n] = take
        residual -= take
    return p, residual


def radiated_power(pattern, leak: LeakageModel, geom=None, feed_index=0):
    """Total power radiated, in units of the feed's transmit power."""
    if leak.mode == "uniform":
        return float(np.sum(leak.ratios(pattern.amplitudes.size) * pattern.flat**2))
    if geom is None:
        raise ModeError("serial-decay leakage needs the surface geometry")
    return 1.0 - serial_feed_power(geom, pattern, leak, feed_index)[1]


def enforce_leakage(pattern, leak: LeakageModel, P_t, geom=None, feed_index=0, bisect_iters=80):
    """Scale the pattern by the largest ``s`` in (0, 1] meeting the leakage budget.

    Continuous uniform-ratio patterns get the closed-form factor.  Otherwise
    ``s`` is found by bisection on the re-quantized pattern, whose radiated
    power is non-decreasing in ``s``.
    """
    if P_t <= 0:
        raise ValueError("P_t must be positive")
    power = lambda pat: radiated_power(pat, leak, geom, feed_index)
    if power(pattern) <= P_t:
        return pattern
    if leak.mode == "uniform" and pattern.quant.continuous:
        s = np.sqrt(P_t / power(pattern))
        out = HolographicPattern(pattern.amplitudes * s, pattern.quant, pattern.mask)
        if power(out) <= P_t:
            return out
    lo, hi = 0.0, 1.0
    if power(pattern.scaled(lo)) > P_t:
        raise ValueError("budget is below the lowest quantization level of the active elements")
    for _ in range(bisect_iters):
        mid = 0.5 * (lo + hi)
        if power(pattern.scaled(mid)) <= P_t:
            lo = mid
        else:
            hi = mid
    return pattern.scaled(lo)
