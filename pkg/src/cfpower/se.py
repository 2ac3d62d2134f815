"""Hardening-bound spectral efficiency: parameter estimation and evaluation.

With square-root power weights mu (K x L) the achievable downlink SE of UE k
is prelog * log2(1 + SINR_k) with

    SINR_k = (a_k^T mu_k)^2 / (sum_i mu_i^T B_ki mu_i - (a_k^T mu_k)^2 + sigma2)

where a_kl is the modulus of the mean signal coefficient E{h_kl^H w_kl} and
B_ki collects the second moments Re E{h_kl^H w_il w_im^H h_km}. Both are
Monte-Carlo estimates over channel realizations; everything downstream
(optimizer, heuristics, learned allocators) consumes only (a, B, sigma2).

Binary container layout (little-endian): magic "CFSEP001", then
K, L as uint32, n_real as uint64, prelog, sigma2 as float64, then the a
payload (K*L float64, row-major) and the B payload (K*K*L*L float64,
row-major in (k, i, l, m)).
"""

import hashlib
import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from .config import NetworkConfig

log = logging.getLogger(__name__)

_MAGIC = b"CFSEP001"
_HEADER = struct.Struct("<8sIIQdd")

# tolerated relative slack on the per-AP power budget
BUDGET_SLACK = 1e-9

# chunk size for the realization reduction, fixed for determinism
_CHUNK = 256


@dataclass(frozen=True)
class PowerAllocation:
    """Square-root power weights mu (K x L) with their per-AP budget."""

    mu: np.ndarray
    p_max: float

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        object.__setattr__(self, "mu", mu)
        if mu.ndim != 2:
            raise ValueError("mu must be a K x L matrix")
        if np.any(mu < 0.0):
            raise ValueError("mu must be elementwise nonnegative")
        per_ap = np.sum(mu ** 2, axis=0)
        if np.any(per_ap > self.p_max * (1.0 + BUDGET_SLACK)):
            worst = float(per_ap.max())
            raise ValueError(
                f"per-AP power {worst:.6g} exceeds budget {self.p_max:.6g}")

    @property
    def rho(self) -> np.ndarray:
        """Allocated powers in watts, rho = mu^2."""
        return self.mu ** 2


@dataclass(frozen=True, eq=False)
class SEParameters:
    """Monte-Carlo estimates of the hardening-bound coefficients."""

    a: np.ndarray        # (K, L) nonnegative signal coefficients
    B: np.ndarray        # (K, K, L, L) interference second moments
    sigma2: float
    prelog: float
    n_real: int
    imag_residue: float = field(default=0.0, compare=False)

    def __eq__(self, other):
        # byte identity over the serialized payload; the residue is a
        # diagnostic and deliberately excluded
        if not isinstance(other, SEParameters):
            return NotImplemented
        return self.to_bytes() == other.to_bytes()

    @property
    def K(self):
        return self.a.shape[0]

    @property
    def L(self):
        return self.a.shape[1]

    def to_bytes(self) -> bytes:
        head = _HEADER.pack(_MAGIC, self.K, self.L, self.n_real,
                            self.prelog, self.sigma2)
        body_a = np.ascontiguousarray(self.a, dtype="<f8").tobytes()
        body_b = np.ascontiguousarray(self.B, dtype="<f8").tobytes()
        return head + body_a + body_b

    @classmethod
    def from_bytes(cls, blob: bytes) -> "SEParameters":
        from .errors import DataFormatError
        if len(blob) < _HEADER.size:
            raise DataFormatError("truncated SE parameter container")
        magic, K, L, n_real, prelog, sigma2 = _HEADER.unpack_from(blob, 0)
        if magic != _MAGIC:
            raise DataFormatError("bad magic for SE parameter container")
        need = _HEADER.size + 8 * (K * L + K * K * L * L)
        if len(blob) != need:
            raise DataFormatError("SE parameter container has wrong size")
        off = _HEADER.size
        a = np.frombuffer(blob, dtype="<f8", count=K * L, offset=off)
        off += 8 * K * L
        B = np.frombuffer(blob, dtype="<f8", count=K * K * L * L, offset=off)
        return cls(a=a.reshape(K, L).copy(),
                   B=B.reshape(K, K, L, L).copy(),
                   sigma2=sigma2, prelog=prelog, n_real=n_real)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "SEParameters":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()


def estimate_se_parameters(batch, w: np.ndarray,
                           cfg: NetworkConfig) -> SEParameters:
    """Estimate (a, B) by sample means over the batch realizations.

    The per-realization scalar g[k, i, l] = h_kl^H w_il carries everything:
    a_kl = |mean g[k, k, l]| and B_ki[l, m] = Re mean(g[k,i,l] conj g[k,i,m]).
    The reduction runs in fixed-size chunks in realization order, so results
    are deterministic for a given batch.
    """
    h = batch.h
    n_real, K, L, N = h.shape
    if n_real < 100:
        raise ValueError("need at least 100 realizations for stable estimates")
    if w.shape != h.shape:
        raise ValueError("precoders and channels must share a shape")
    s_acc = np.zeros((K, L), dtype=complex)
    b_acc = np.zeros((K, K, L, L), dtype=complex)
    for start in range(0, n_real, _CHUNK):
        hc = h[start:start + _CHUNK].conj()
        wc = w[start:start + _CHUNK]
        g = np.einsum("rkln,riln->rkil", hc, wc)
        idx = np.arange(K)
        s_acc += g[:, idx, idx, :].sum(axis=0)
        b_acc += np.einsum("rkil,rkim->kilm", g, g.conj())
    mean_sig = s_acc / n_real
    a = np.abs(mean_sig)
    B = b_acc.real / n_real
    # per-entry ratios are recorded, but the warning keys on the global
    # (Frobenius) ratio: weak links carry Monte-Carlo noise that swamps
    # their tiny means, while a genuine rotation error moves the strong
    # entries and therefore the global ratio
    ratio = np.abs(mean_sig.imag) / np.maximum(a, 1e-300)
    worst = float(ratio.max()) if a.size else 0.0
    total = float(np.linalg.norm(mean_sig))
    if total > 0.0 and float(np.linalg.norm(mean_sig.imag)) > 0.01 * total:
        log.warning("imaginary residue at %.3g of the signal mean; rotation "
                    "convention may be off for this precoder",
                    float(np.linalg.norm(mean_sig.imag)) / total)
    return SEParameters(a=a, B=B, sigma2=cfg.noise_power, prelog=cfg.prelog,
                        n_real=n_real, imag_residue=worst)


def effective_sinr(params: SEParameters, mu: np.ndarray) -> np.ndarray:
    """Hardening-bound SINR per UE for the weight matrix mu."""
    sig = np.einsum("kl,kl->k", params.a, mu)
    interf = np.einsum("il,kilm,im->k", mu, params.B, mu)
    den = interf - sig ** 2 + params.sigma2
    return sig ** 2 / den


def compute_se(params: SEParameters, alloc: PowerAllocation) -> np.ndarray:
    """Per-UE spectral efficiency (bit/s/Hz) of a feasible allocation."""
    mu = alloc.mu
    if mu.shape != (params.K, params.L):
        raise ValueError("allocation shape does not match parameters")
    sig = np.einsum("kl,kl->k", params.a, mu)
    interf = np.einsum("il,kilm,im->k", mu, params.B, mu)
    den = interf - sig ** 2 + params.sigma2
    if np.any(den < params.sigma2 * (1.0 - 1e-9)):
        raise RuntimeError("SINR denominator below the noise floor; "
                           "SE parameters are inconsistent")
    return params.prelog * np.log2(1.0 + sig ** 2 / den)
