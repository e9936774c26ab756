"""Antenna-array layouts, array factor and line-of-sight channel gains.

Positions are spherical coordinates ``(radius_m, elevation_rad, azimuth_rad)``
centred on the array reference point.  Arrays lie in the horizontal plane, so
every antenna elevation is pi/2.

Channel entries are scaled so that ``abs(h_k @ w) ** 2`` is the received
power in watts when ``abs(w_n) ** 2`` is the transmit power of antenna n in
watts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidArgument, SingularGeometry

SPEED_OF_LIGHT = 299_792_458.0


def wavelength_for(frequency_hz: float) -> float:
    return SPEED_OF_LIGHT / frequency_hz


@dataclass(frozen=True)
class AntennaLayout:
    kind: str
    radii_m: np.ndarray
    elevations_rad: np.ndarray
    azimuths_rad: np.ndarray
    # element spacing for linear arrays, ring radius for circular ones
    dimension_m: float

    @property
    def n_antennas(self) -> int:
        return len(self.radii_m)

    @property
    def positions(self) -> np.ndarray:
        """N x 3 array of ``(radius, elevation, azimuth)`` rows."""
        return np.column_stack([self.radii_m, self.elevations_rad, self.azimuths_rad])


@dataclass(frozen=True)
class NodePlacement:
    radius_m: float
    azimuth_rad: float
    elevation_rad: float = np.pi / 2

    def __post_init__(self):
        if not self.radius_m > 0:
            raise SingularGeometry(f"node radius must be positive, got {self.radius_m}")

    @classmethod
    def from_degrees(cls, radius_m: float, azimuth_deg: float) -> "NodePlacement":
        return cls(float(radius_m), float(np.deg2rad(azimuth_deg)))


def isotropic(elevation: float, azimuth: float) -> float:
    return 1.0


@dataclass(frozen=True)
class AzimuthPattern:
    """Element gain tabulated over azimuth (degrees), linearly interpolated
    with wrap-around at 360."""

    azimuth_deg: Sequence[float]
    gain: Sequence[float]

    def __post_init__(self):
        if len(self.azimuth_deg) != len(self.gain) or len(self.gain) == 0:
            raise InvalidArgument("pattern table needs matching, nonempty columns")
        if min(self.gain) <= 0:
            raise InvalidArgument("pattern gains must be positive")

    def __call__(self, elevation: float, azimuth: float) -> float:
        az = np.rad2deg(azimuth) % 360.0
        return float(np.interp(az, self.azimuth_deg, self.gain, period=360.0))


@dataclass(frozen=True)
class RadioConstants:
    wavelength_m: float = wavelength_for(920e6)
    tx_element_gain: Callable[[float, float], float] = field(default=isotropic)
    rx_gain: float = 1.0

    def __post_init__(self):
        if not self.wavelength_m > 0:
            raise InvalidArgument("wavelength must be positive")
        if not self.rx_gain > 0:
            raise InvalidArgument("receive gain must be positive")


def build_layout(kind: str, n_antennas: int, spacing_or_radius_m: float) -> AntennaLayout:
    """Place ``n_antennas`` elements as a centred linear array (spacing given)
    or a uniform circular array (ring radius given).

    Antenna n (1-based) of a linear array sits on the azimuth-pi side when
    ``n < (N + 1) / 2`` and on the azimuth-0 side otherwise.  Circular arrays
    put antenna n at azimuth ``2 * pi * n / N``.
    """
    if n_antennas < 1:
        raise InvalidArgument(f"n_antennas must be >= 1, got {n_antennas}")
    if not spacing_or_radius_m > 0:
        raise InvalidArgument(f"array dimension must be positive, got {spacing_or_radius_m}")
    N = int(n_antennas)
    n = np.arange(1, N + 1, dtype=float)
    if kind == "linear":
        left = n < (N + 1) / 2
        radii = np.where(left, (N - 1) / 2 - (n - 1), n - 1 - (N - 1) / 2) * spacing_or_radius_m
        azimuths = np.where(left, np.pi, 0.0)
    elif kind == "circular":
        radii = np.full(N, float(spacing_or_radius_m))
        azimuths = 2 * np.pi / N * n
    else:
        raise InvalidArgument(f"unknown array kind {kind!r}")
    return AntennaLayout(
        kind=kind,
        radii_m=radii,
        elevations_rad=np.full(N, np.pi / 2),
        azimuths_rad=azimuths,
        dimension_m=float(spacing_or_radius_m),
    )


def _projection(layout: AntennaLayout, elevation: float, azimuth: float) -> np.ndarray:
    # <psi_ant_n, unit(theta, phi)> for horizontal-plane antennas
    return layout.radii_m * np.sin(elevation) * np.cos(azimuth - layout.azimuths_rad)


def steering_phasors(layout: AntennaLayout, direction, wavelength_m: float) -> np.ndarray:
    elevation, azimuth = direction
    return np.exp(1j * 2 * np.pi / wavelength_m * _projection(layout, elevation, azimuth))


def array_factor(layout: AntennaLayout, weights, direction, wavelength_m: float) -> complex:
    w = np.asarray(weights, dtype=complex)
    if w.shape != (layout.n_antennas,):
        raise InvalidArgument(
            f"weights length {w.size} does not match {layout.n_antennas} antennas")
    return complex(np.sum(w * steering_phasors(layout, direction, wavelength_m)))


def friis_amplitude(placement: NodePlacement, radio: RadioConstants) -> float:
    g_t = radio.tx_element_gain(placement.elevation_rad, placement.azimuth_rad)
    return radio.wavelength_m / (4 * np.pi * placement.radius_m) * np.sqrt(g_t * radio.rx_gain)


def channel_matrix(
    layout: AntennaLayout,
    placements: Sequence[NodePlacement],
    radio: Optional[RadioConstants] = None,
    perturbation_sigma: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """K x N complex channel gains for line-of-sight Friis propagation.

    ``perturbation_sigma`` > 0 multiplies every entry by ``1 + sigma * z``
    with z circular standard complex Gaussian, which stands in for channel
    estimation error.
    """
    radio = radio or RadioConstants()
    if len(placements) == 0:
        raise InvalidArgument("at least one node placement is required")
    H = np.empty((len(placements), layout.n_antennas), dtype=complex)
    for k, p in enumerate(placements):
        if not p.radius_m > 0:
            raise SingularGeometry(f"node {k} is at the array centre")
        H[k] = friis_amplitude(p, radio) * steering_phasors(
            layout, (p.elevation_rad, p.azimuth_rad), radio.wavelength_m)
    if perturbation_sigma > 0:
        rng = rng if rng is not None else np.random.default_rng()
        z = (rng.standard_normal(H.shape) + 1j * rng.standard_normal(H.shape)) / np.sqrt(2)
        H = H * (1 + perturbation_sigma * z)
    return H
