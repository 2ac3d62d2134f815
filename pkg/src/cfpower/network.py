"""Scenario geometry and large-scale channel statistics.

The service area is a square with wrap-around (torus) distances, so the
simulated patch behaves like the interior of a much larger network. Each
AP-UE link gets a large-scale gain from an urban-microcell pathloss law and
a spatial correlation matrix, either white (beta * I) or from a Gaussian
local-scattering profile for a half-wavelength uniform linear array.
"""

import math
from dataclasses import dataclass

import numpy as np

from .config import NetworkConfig
from .errors import ConfigError

# distances below 1 m are floored so the pathloss law stays below 0 dB
MIN_DISTANCE_M = 1.0

# the 9 torus images of a point: the original plus 8 shifted copies
_WRAP_SHIFTS = np.array(
    [[i, j] for i in (-1.0, 0.0, 1.0) for j in (-1.0, 0.0, 1.0)]
)

ANTENNA_SPACING = 0.5  # in wavelengths, along the x axis


def wrap_displacement(p, q, area_m):
    """Displacement q - p under the wrap-around metric.

    Returns the (dx, dy) of the image of q closest to p. Ties resolve to the
    first image in the fixed shift order.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    cand = q + _WRAP_SHIFTS * area_m - p
    idx = int(np.argmin(np.einsum("ij,ij->i", cand, cand)))
    return cand[idx]


def wrap_distance(p, q, area_m):
    """Torus distance between two points, floored at MIN_DISTANCE_M."""
    dx, dy = wrap_displacement(p, q, area_m)
    return max(math.hypot(dx, dy), MIN_DISTANCE_M)


def wrap_distance_matrix(points_a, points_b, area_m):
    """Pairwise torus distances, shape (len(a), len(b)), floored at 1 m."""
    a = np.asarray(points_a, dtype=float)[:, None, None, :]
    b = np.asarray(points_b, dtype=float)[None, :, None, :]
    diff = b + _WRAP_SHIFTS[None, None, :, :] * area_m - a
    d2 = np.min(np.einsum("abij,abij->abi", diff, diff), axis=-1)
    return np.maximum(np.sqrt(d2), MIN_DISTANCE_M)


def pathloss_beta(distance_m, offset_db=-30.5, exponent_db=36.7):
    """Large-scale channel gain (linear) at the given distance in meters."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(d < MIN_DISTANCE_M):
        raise ValueError("distance below the 1 m floor")
    beta_db = offset_db - exponent_db * np.log10(d)
    out = 10.0 ** (beta_db / 10.0)
    return float(out) if np.isscalar(distance_m) else out


@dataclass(frozen=True)
class Scenario:
    """One network drop: AP and UE positions plus wrap-around distances."""

    ap_positions: np.ndarray   # (L, 2)
    ue_positions: np.ndarray   # (K, 2)
    distances: np.ndarray      # (K, L)
    area_m: float


def place_aps(cfg: NetworkConfig, seed) -> np.ndarray:
    """AP coordinates, deterministic for grid placement, seeded otherwise.

    Grid placement puts APs at the centers of a sqrt(L) x sqrt(L) tiling of
    the square, so wrap-around spacing is uniform.
    """
    if cfg.ap_placement == "grid":
        side = math.isqrt(cfg.L)
        if side * side != cfg.L:
            raise ConfigError("grid placement needs a square L")
        step = cfg.area_m / side
        centers = step * (np.arange(side) + 0.5)
        xx, yy = np.meshgrid(centers, centers, indexing="xy")
        return np.column_stack([xx.ravel(), yy.ravel()])
    rng = np.random.default_rng(seed)
    return rng.uniform(0.0, cfg.area_m, size=(cfg.L, 2))


def drop_scenario(cfg: NetworkConfig, seed, ap_positions=None) -> Scenario:
    """Drop K UEs uniformly on the square; APs fixed per config.

    AP positions are infrastructure: pass `ap_positions` to reuse a layout
    across drops (the pipeline places them once per dataset).
    """
    rng = np.random.default_rng(seed)
    ue = rng.uniform(0.0, cfg.area_m, size=(cfg.K, 2))
    if ap_positions is None:
        ap_positions = place_aps(cfg, seed)
    ap = np.asarray(ap_positions, dtype=float)
    if ap.shape != (cfg.L, 2):
        raise ValueError(f"expected ({cfg.L}, 2) AP positions, got {ap.shape}")
    dist = wrap_distance_matrix(ue, ap, cfg.area_m)
    return Scenario(ap_positions=ap, ue_positions=ue, distances=dist,
                    area_m=cfg.area_m)


@dataclass(frozen=True)
class ChannelStatistics:
    """Per-link second-order statistics for one drop."""

    beta: np.ndarray   # (K, L) large-scale gains, linear
    R: np.ndarray      # (K, L, N, N) complex spatial correlation, tr/N = beta


def _local_scattering_matrix(beta, phi, spread_rad, n_antennas):
    """Closed-form Gaussian angular-spread ULA correlation, trace = N*beta."""
    m = np.arange(n_antennas)
    delta = m[:, None] - m[None, :]
    arg = 2.0 * np.pi * ANTENNA_SPACING * delta
    R = beta * np.exp(1j * arg * np.sin(phi)) \
        * np.exp(-0.5 * (spread_rad * arg * np.cos(phi)) ** 2)
    # the closed form can be slightly indefinite; clip and restore the trace
    eigval, eigvec = np.linalg.eigh(R)
    if eigval[0] < 0.0:
        eigval = np.clip(eigval, 0.0, None)
        R = (eigvec * eigval) @ eigvec.conj().T
        R *= n_antennas * beta / np.trace(R).real
    return R


def build_statistics(cfg: NetworkConfig, scenario: Scenario) -> ChannelStatistics:
    """Pathloss plus correlation matrices for every AP-UE pair."""
    beta = pathloss_beta(scenario.distances, cfg.pathloss_offset_db,
                         cfg.pathloss_exponent)
    K, L, N = cfg.K, cfg.L, cfg.N
    R = np.zeros((K, L, N, N), dtype=complex)
    if cfg.correlation_model == "uncorrelated":
        eye = np.eye(N)
        R[:] = beta[:, :, None, None] * eye
    else:
        spread = math.radians(cfg.angular_spread_deg)
        for k in range(K):
            for l in range(L):
                disp = wrap_displacement(scenario.ap_positions[l],
                                         scenario.ue_positions[k],
                                         cfg.area_m)
                phi = math.atan2(disp[1], disp[0])
                R[k, l] = _local_scattering_matrix(beta[k, l], phi, spread, N)
    return ChannelStatistics(beta=beta, R=R)
