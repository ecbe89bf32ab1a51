"""Far-field and near-field channel models between the surface and users."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .surface import DEFAULT_N_G, Direction, SurfaceGeometry, object_phase


def ula_steering(m: int, angle: float = 0.0) -> np.ndarray:
    """Half-wavelength ULA response at the user, ``angle`` from broadside."""
    return np.exp(1j * np.pi * np.arange(m) * np.sin(angle))


def surface_steering(geom: SurfaceGeometry, direction: Direction) -> np.ndarray:
    """Surface-side steering vector; its conjugate maps element excitations to the user."""
    return object_phase(geom, direction)


@dataclass(frozen=True, eq=False)
class FarFieldChannel:
    """User-antenna by surface-element channel matrix and the paths behind it."""

    matrix: np.ndarray
    gains: tuple = ()
    directions: tuple = ()

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.matrix, dtype=complex))
        if not np.all(np.isfinite(H)):
            raise ValueError("channel entries must be finite")
        H.setflags(write=False)
        object.__setattr__(self, "matrix", H)

    @property
    def shape(self):
        return self.matrix.shape


def los_channel(geom, direction, complex_gain, M=1, user_angle=0.0) -> FarFieldChannel:
    """Rank-one line-of-sight channel ``g * a_user * a_surface^H``."""
    if M < 1:
        raise ValueError("M must be >= 1")
    a_u = ula_steering(M, user_angle)
    a_s = surface_steering(geom, direction)
    H = complex(complex_gain) * np.outer(a_u, np.conj(a_s))
    return FarFieldChannel(H, (complex(complex_gain),), (direction,))


def multipath_channel(geom, paths: Sequence, M=1) -> FarFieldChannel:
    """Sum of LoS components; each path is ``(gain, Direction)`` or ``(gain, Direction, user_angle)``."""
    paths = list(paths)
    if not paths:
        raise ValueError("at least one path is required")
    H = np.zeros((M, geom.n_elements), dtype=complex)
    for p in paths:
        H = H + los_channel(geom, p[1], p[0], M, p[2] if len(p) > 2 else 0.0).matrix
    return FarFieldChannel(H, tuple(complex(p[0]) for p in paths), tuple(p[1] for p in paths))


def random_unit_gain(rng, size=None):
    """Unit-magnitude complex gain(s) with uniform phase."""
    return np.exp(2j * np.pi * rng.random(size))


def random_paths(rng, n_paths, theta_range=(20.0, 160.0), phi_range=(-60.0, 60.0)):
    out = []
    for _ in range(n_paths):
        d = Direction.from_degrees(rng.uniform(*theta_range), rng.uniform(*phi_range))
        out.append((complex(random_unit_gain(rng)), d, float(rng.uniform(-np.pi / 3, np.pi / 3))))
    return out


# -------------------------------------------------------------------- near field


@dataclass(frozen=True, eq=False)
class LinearArray:
    """1-D RHS: elements at offsets ``delta_n * d`` along one axis.

    ``centered`` puts the array origin at its midpoint, so offsets run from
    ``-(N-1)d/2`` to ``(N-1)d/2``.  The feed sits at ``feed`` (meters, on the
    array axis), the array center by default.
    """

    n: int
    lambda0: float
    spacing: float | None = None
    n_g: float = DEFAULT_N_G
    feed: float | None = None
    centered: bool = True

    def __post_init__(self):
        if int(self.n) < 1 or self.lambda0 <= 0:
            raise ValueError("need n >= 1 and lambda0 > 0")
        object.__setattr__(self, "n", int(self.n))
        d = self.lambda0 / 3 if self.spacing is None else float(self.spacing)
        if d <= 0:
            raise ValueError("spacing must be positive")
        object.__setattr__(self, "spacing", d)
        if self.feed is None:
            object.__setattr__(self, "feed", float(self.offsets.mean()))

    @property
    def n_elements(self):
        return self.n

    @property
    def delta(self):
        idx = np.arange(self.n, dtype=float)
        return idx - (self.n - 1) / 2 if self.centered else idx

    @property
    def offsets(self):
        return self.delta * self.spacing

    @property
    def aperture(self):
        return (self.n - 1) * self.spacing

    @property
    def k0(self):
        return 2 * np.pi / self.lambda0

    @property
    def k_s(self):
        return self.n_g * self.k0

    def reference_phase(self):
        return np.exp(-1j * self.k_s * np.abs(self.offsets - self.feed))


class PolarRecovery(NamedTuple):
    r: float
    theta: float
    degenerate: bool


@dataclass(frozen=True)
class NearFieldUser:
    """User at range ``r`` and angle ``theta`` from the array axis."""

    r: float
    theta: float
    r_min: float = 0.0

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("r must be positive")
        if self.r < self.r_min:
            raise ValueError(f"r={self.r} is below r_min={self.r_min}")

    @property
    def psi(self):
        return float(np.cos(self.theta))

    @property
    def mu(self):
        return float((1.0 - self.psi**2) / self.r)

    @classmethod
    def from_psi_mu(cls, psi, mu, r_min=0.0):
        rec = recover_polar(psi, mu)
        if rec.degenerate:
            raise ValueError("range is unrecoverable when mu = 0 or |psi| = 1")
        return cls(rec.r, rec.theta, r_min)


def recover_polar(psi, mu, eps=1e-15) -> PolarRecovery:
    """Invert ``(psi, mu)`` to ``(r, theta)``; flags the endfire/far-field degenerate case."""
    if not -1.0 <= psi <= 1.0 or mu < 0:
        raise ValueError("need psi in [-1, 1] and mu >= 0")
    theta = float(np.arccos(psi))
    s2 = 1.0 - psi * psi
    if mu <= eps or s2 <= eps:
        return PolarRecovery(float("nan"), theta, True)
    return PolarRecovery(float(s2 / mu), theta, False)


def near_field_distance(offset, r, theta):
    """Exact and second-order element-to-user distance for element offset ``delta*d``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("r must be positive")
    x = np.asarray(offset, dtype=float)
    c = np.cos(theta)
    exact = np.sqrt(r * r - 2 * x * r * c + x * x)
    approx = r - x * c + x * x * (1 - c * c) / (2 * r)
    return exact, approx


def psi_mu_distance(offset, r, psi, mu):
    """Second-order distance written directly in the (psi, mu) domain."""
    x = np.asarray(offset, dtype=float)
    return r - x * psi + x * x * mu / 2


def spherical_channel(geom_1d: LinearArray, user: NearFieldUser, beta_gain=1.0, approx=False):
    """Per-element near-field channel ``beta * exp(-j 2pi r_n / lambda)``."""
    exact, apx = near_field_distance(geom_1d.offsets, user.r, user.theta)
    rn = apx if approx else exact
    return complex(beta_gain) * np.exp(-1j * geom_1d.k0 * rn)


def psi_mu_channel(geom_1d: LinearArray, psi, mu, beta_gain=1.0):
    """Channel from the (psi, mu) phase model, dropping the common range phase."""
    x = geom_1d.offsets
    return complex(beta_gain) * np.exp(-1j * geom_1d.k0 * (-x * psi + x * x * mu / 2))


# ------------------------------------------------------------------ CSV fixtures


def save_channel_csv(path, h):
    """Write a channel vector (element, real, imag) or matrix (antenna, element, real, imag)."""
    h = np.asarray(h, dtype=complex)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if h.ndim == 1:
            w.writerow(["element", "real", "imag"])
            for n, v in enumerate(h):
                w.writerow([n, repr(float(v.real)), repr(float(v.imag))])
        else:
            w.writerow(["antenna", "element", "real", "imag"])
            for m in range(h.shape[0]):
                for n in range(h.shape[1]):
                    w.writerow([m, n, repr(float(h[m, n].real)), repr(float(h[m, n].imag))])


def load_channel_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    head, body = rows[0], rows[1:]
    if head[0] == "element":
        out = np.zeros(len(body), dtype=complex)
        for n, re, im in body:
            out[int(n)] = complex(float(re), float(im))
        return out
    M = 1 + max(int(r[0]) for r in body)
    N = 1 + max(int(r[1]) for r in body)
    out = np.zeros((M, N), dtype=complex)
    for m, n, re, im in body:
        out[int(m), int(n)] = complex(float(re), float(im))
    return out
