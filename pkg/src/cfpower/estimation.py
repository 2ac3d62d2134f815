"""Channel realizations and per-AP MMSE channel estimation.

Channels are drawn as h = R^(1/2) z with z circularly-symmetric complex
Gaussian. Pilot observations at each AP are despread per pilot sequence,
so UEs sharing a pilot contaminate each other's estimates. Channel draws
and pilot-noise draws come from separate seeds.
"""

from dataclasses import dataclass

import numpy as np

from .config import NetworkConfig
from .network import ChannelStatistics
from .pilots import PilotAssignment


@dataclass(frozen=True)
class ChannelBatch:
    """Realizations of true and estimated channels for one drop."""

    h: np.ndarray        # (n_real, K, L, N) complex
    h_hat: np.ndarray    # (n_real, K, L, N) complex
    psi: np.ndarray      # (K, L, N, N) despread pilot covariance

    @property
    def n_real(self):
        return self.h.shape[0]


def _sqrtm_psd(R):
    """Hermitian PSD square root via eigendecomposition."""
    eigval, eigvec = np.linalg.eigh(R)
    eigval = np.clip(eigval, 0.0, None)
    return (eigvec * np.sqrt(eigval)) @ eigvec.conj().T


def sample_channels(stats: ChannelStatistics, n_real: int, seed) -> np.ndarray:
    """Draw (n_real, K, L, N) correlated Rayleigh channel realizations."""
    if n_real < 1:
        raise ValueError("n_real must be >= 1")
    K, L, N = stats.R.shape[:3]
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((n_real, K, L, N))
         + 1j * rng.standard_normal((n_real, K, L, N))) / np.sqrt(2.0)
    h = np.empty_like(z)
    for k in range(K):
        for l in range(L):
            S = _sqrtm_psd(stats.R[k, l])
            h[:, k, l, :] = z[:, k, l, :] @ S.T
    return h


def mmse_estimate(h: np.ndarray, stats: ChannelStatistics,
                  pilots: PilotAssignment, cfg: NetworkConfig,
                  noise_seed) -> ChannelBatch:
    """MMSE-estimate every AP-UE channel from contaminated pilot signals."""
    n_real, K, L, N = h.shape
    tau_p, p_ul, sigma2 = cfg.tau_p, cfg.p_ul, cfg.noise_power
    rng = np.random.default_rng(noise_seed)

    # despread observation per (pilot, AP):
    # y_t = sum_{i in group t} sqrt(tau_p p) h_i + n,  n ~ CN(0, sigma2 I)
    amp = np.sqrt(tau_p * p_ul)
    noise = (rng.standard_normal((n_real, tau_p, L, N))
             + 1j * rng.standard_normal((n_real, tau_p, L, N)))
    noise *= np.sqrt(sigma2 / 2.0)
    y = noise
    for t, group in enumerate(pilots.groups):
        for i in group:
            y[:, t] += amp * h[:, i]

    # psi is the covariance of y_t at one AP, shared by the pilot group
    psi = np.empty((K, L, N, N), dtype=complex)
    psi_tl = {}
    eye = np.eye(N)
    for t, group in enumerate(pilots.groups):
        if not group:
            continue
        for l in range(L):
            M = sigma2 * eye.astype(complex)
            for i in group:
                M = M + tau_p * p_ul * stats.R[i, l]
            psi_tl[(t, l)] = M
    for k in range(K):
        t = int(pilots.pilot_of[k])
        for l in range(L):
            psi[k, l] = psi_tl[(t, l)]

    h_hat = np.empty_like(h)
    for k in range(K):
        t = int(pilots.pilot_of[k])
        for l in range(L):
            P = psi_tl[(t, l)]
            # cholesky doubles as the positive-definiteness assertion
            np.linalg.cholesky(P)
            A = amp * stats.R[k, l] @ np.linalg.inv(P)
            h_hat[:, k, l, :] = y[:, t, l, :] @ A.T
    return ChannelBatch(h=h, h_hat=h_hat, psi=psi)
