"""Wave-packet states and their shared cutoff profile.

A packet concentrates at x0 on scale 1/t while oscillating at frequency
t^lambda * xi0 with lambda > 1.  Its transform is supported on the window
|xi - t^lambda*xi0| < t, which makes the spectral-patch representation
exact.  The profile fixes one smooth, radial, compactly supported bump for
the transform: equal to a constant b on |xi| <= 1/2, vanishing for
|xi| >= 1, with a smooth exponential partition bridge between, normalized
to unit L2 norm.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad, simpson
from scipy.interpolate import CubicSpline

from .spectral_core import TWO_PI, FrequencyWindow, SpectralPatch, inner_product_l2

_CHI_CACHE_POINTS = 2 ** 14
_CHI_SCAN_MAX = 400.0
_ETA_POINTS = 256
_Y_POINTS = 512


def _rise(u: np.ndarray, sharpness: float) -> np.ndarray:
    """C-infinity ramp: 0 for u <= 0, 1 for u >= 1."""
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(u > 0.0, np.exp(-sharpness / np.maximum(u, 1e-300)), 0.0)
        b = np.where(u < 1.0, np.exp(-sharpness / np.maximum(1.0 - u, 1e-300)), 0.0)
    return a / (a + b)


def bridge_sigma(r: np.ndarray, sharpness: float = 1.0) -> np.ndarray:
    """Radial cutoff shape: 1 on [0, 1/2], 0 on [1, inf), smooth between."""
    r = np.abs(np.asarray(r, dtype=float))
    out = np.zeros_like(r)
    out[r <= 0.5] = 1.0
    mid = (r > 0.5) & (r < 1.0)
    out[mid] = _rise((1.0 - r[mid]) / 0.5, sharpness)
    return out


class PacketProfile:
    """Shared cutoff data: normalization, tabulated physical profile, and
    the fixed unit-scale grids used by packet quadratures.

    Built once per sharpness and reused read-only by every packet.
    """

    def __init__(self, sharpness: float = 1.0):
        if not (sharpness > 0.0):
            raise ValueError("wave_packets: bridge sharpness must be positive")
        self.sharpness = float(sharpness)

        norm_sq, _ = quad(lambda r: bridge_sigma(r, sharpness) ** 2, 0.0, 1.0, limit=200)
        self.b = 1.0 / np.sqrt(2.0 * norm_sq)

        self._build_physical_cache()
        self._build_unit_grids()

    # -- transform side -------------------------------------------------

    def chi_hat(self, xi: np.ndarray) -> np.ndarray:
        return self.b * bridge_sigma(xi, self.sharpness)

    # -- physical side ---------------------------------------------------

    def _chi_exact(self, y: np.ndarray) -> np.ndarray:
        # chi(y) = (2/pi)^(1/2) * integral_0^1 cos(y*xi) chi_hat(xi) dxi
        xi = np.linspace(0.0, 1.0, 4097)
        weights = self.chi_hat(xi)
        out = np.empty(y.shape, dtype=float)
        for i in range(0, y.size, 2048):
            block = y[i : i + 2048]
            integrand = np.cos(np.outer(block, xi)) * weights
            out[i : i + 2048] = simpson(integrand, x=xi, axis=1)
        return np.sqrt(2.0 / np.pi) * out

    def _build_physical_cache(self):
        coarse = np.linspace(0.0, _CHI_SCAN_MAX, 8192)
        vals = np.abs(self._chi_exact(coarse))
        peak = vals[0]
        above12 = np.nonzero(vals > 1e-12 * peak)[0]
        above10 = np.nonzero(vals > 1e-10 * peak)[0]
        above6 = np.nonzero(vals > 1e-6 * peak)[0]
        self.radius_cache = float(coarse[above12[-1]]) + coarse[1]
        self.support_radius = float(coarse[above10[-1]]) + coarse[1]
        # |chi * S| tails scale like |chi|^2, so packet quadratures may stop
        # where the envelope reaches 1e-6 of the peak.
        self.tail_radius = float(coarse[above6[-1]]) + coarse[1]

        grid = np.linspace(0.0, self.radius_cache, _CHI_CACHE_POINTS)
        self._chi_grid = grid
        self._chi_vals = self._chi_exact(grid)
        self._chi_spline = CubicSpline(grid, self._chi_vals)
        self.chi0 = float(self._chi_vals[0])

    def chi(self, y: np.ndarray) -> np.ndarray:
        """Physical profile, interpolated from the cache (real and even)."""
        y = np.abs(np.asarray(y, dtype=float))
        out = np.zeros_like(y)
        inside = y < self.radius_cache
        out[inside] = self._chi_spline(y[inside])
        return out

    # -- unit-scale quadrature grids --------------------------------------

    def _build_unit_grids(self):
        deta = 2.0 / _ETA_POINTS
        self.eta = -1.0 + (np.arange(_ETA_POINTS) + 0.5) * deta
        self.chi_hat_eta = self.chi_hat(self.eta)

        r = self.tail_radius
        dy = 2.0 * r / _Y_POINTS
        self.y = -r + (np.arange(_Y_POINTS) + 0.5) * dy
        self.chi_y = self.chi(self.y)
        # Fourier kernel for S(y) = (2*pi)^(-1/2) * integral exp(i*y*eta) g(eta) deta
        self.unit_kernel = np.exp(1j * np.outer(self.y, self.eta)) * (
            deta / np.sqrt(TWO_PI)
        )
        self.y_weights = self.chi_y * dy


@lru_cache(maxsize=8)
def make_profile(bridge_sharpness: float = 1.0) -> PacketProfile:
    """Build (and cache) the cutoff profile for a given bridge sharpness."""
    return PacketProfile(bridge_sharpness)


@dataclass(frozen=True)
class WavePacketFamily:
    """Packets sharing one profile and one phase-space base point (x0, xi0)."""

    x0: float
    xi0: float
    lam: float
    profile: PacketProfile

    def __post_init__(self):
        if abs(abs(self.xi0) - 1.0) > 0.0:
            raise ValueError("wave_packets: xi0 must be a unit direction (+1 or -1)")
        if not (self.lam > 1.0):
            raise ValueError("wave_packets: lambda must exceed 1")

    def center(self, t: float) -> float:
        return float(t ** self.lam * self.xi0)

    def spectrum(self, t: float, xi: np.ndarray) -> np.ndarray:
        """Transform values: t^(-1/2) exp(-i*xi*x0) chi_hat((xi - t^lam*xi0)/t)."""
        xi = np.asarray(xi, dtype=float)
        envelope = self.profile.chi_hat((xi - self.center(t)) / t)
        return t ** -0.5 * np.exp(-1j * xi * self.x0) * envelope


def make_packet(
    family: WavePacketFamily,
    t: float,
    num_points: int = 256,
    lattice_spacing: float | None = None,
) -> SpectralPatch:
    """Spectral patch of the packet f_t.

    Without ``lattice_spacing`` the window is exactly
    [t^lam*xi0 - t, t^lam*xi0 + t] with ``num_points`` samples.  With it,
    the window snaps outward to the global midpoint lattice so that all
    patches in one node set share a single grid.
    """
    if t < 1.0:
        raise ValueError("wave_packets: packet scale t must be >= 1")
    center = family.center(t)
    if lattice_spacing is None:
        window = FrequencyWindow(center, float(t), num_points)
    else:
        d = float(lattice_spacing)
        k_lo = int(np.floor((center - t) / d - 0.5))
        k_hi = int(np.ceil((center + t) / d - 0.5))
        n = k_hi - k_lo + 1
        start = k_lo * d
        window = FrequencyWindow(start + 0.5 * n * d, 0.5 * n * d, n)
    values = family.spectrum(t, window.grid())
    return SpectralPatch(window, values, dim=1, sampler=lambda xi: family.spectrum(t, xi))


def lattice_spacing_for(nodes, points_per_min_window: int = 128) -> float:
    """Shared grid spacing for a node set: min window half-width / points."""
    t_min = float(np.min(np.asarray(nodes, dtype=float)))
    if t_min < 1.0:
        raise ValueError("wave_packets: all nodes must satisfy t >= 1")
    return t_min / points_per_min_window


@dataclass(frozen=True)
class OverlapTable:
    t_values: np.ndarray
    s_values: np.ndarray
    overlaps: np.ndarray          # |(f_t|f_s)| on the (t, s) grid
    separations: np.ndarray       # |t^lam - s^lam|
    envelope_constant: float      # C with |(f_t|f_s)| <= C / (1 + sep/T)


def packet_overlap_decay(
    family: WavePacketFamily, T: float, grid_points: int = 9
) -> OverlapTable:
    """Tabulate |(f_t|f_s)| on [T, 2T]^2 and fit the decay envelope."""
    if not (T > 2.0 ** (1.0 / (family.lam - 1.0))):
        raise ValueError("wave_packets: need T > 2^(1/(lambda-1)) for overlap decay")
    ts = np.linspace(T, 2.0 * T, grid_points)
    spacing = lattice_spacing_for(ts)
    patches = [make_packet(family, t, lattice_spacing=spacing) for t in ts]
    overlaps = np.empty((grid_points, grid_points))
    for i, p in enumerate(patches):
        for j, q in enumerate(patches):
            overlaps[i, j] = abs(inner_product_l2(p, q))
    sep = np.abs(
        ts[:, None] ** family.lam - ts[None, :] ** family.lam
    )
    envelope_constant = float(np.max(overlaps * (1.0 + sep / T)))
    return OverlapTable(ts, ts, overlaps, sep, envelope_constant)
