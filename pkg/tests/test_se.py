"""Hardening-bound SE estimation and evaluation.

Two independent oracles anchor the Monte-Carlo estimator. First, a scalar
maximum-ratio case where both coefficients are known in closed form: with a
CN(0, c) estimate the signal coefficient is the Rayleigh mean sqrt(pi c / 4)
and the second moment collapses to the full channel gain beta. The frozen
literals below were computed with mpmath at 50 digits for a 200 m link under
the desk preset's pilot and noise numbers. Second, a naive double-loop
estimator recomputes (a, B) entry by entry on small batches and must agree
to machine precision.
"""

import logging

import numpy as np
import pytest

from cfpower.config import NetworkConfig
from cfpower.errors import DataFormatError
from cfpower.estimation import ChannelBatch, mmse_estimate, sample_channels
from cfpower.network import ChannelStatistics
from cfpower.pilots import assign_pilots
from cfpower.precoding import compute_precoders
from cfpower.se import (BUDGET_SLACK, PowerAllocation, SEParameters,
                        compute_se, effective_sinr, estimate_se_parameters)

BETA_200M = 3.2005153607261727e-12
C_200M = 2.2624427929150797e-12          # tau_p p beta^2 / (tau_p p beta + s2)
A_RAYLEIGH = 1.3330110330928612e-6       # sqrt(pi c / 4)


def scalar_mr_params(n_real=100000):
    cfg = NetworkConfig(L=1, K=1, N=1, area_m=500.0, tau_p=3)
    stats = ChannelStatistics(beta=np.array([[BETA_200M]]),
                              R=BETA_200M * np.ones((1, 1, 1, 1), complex))
    pilots = assign_pilots(stats.beta, cfg.tau_p)
    h = sample_channels(stats, n_real, seed=100)
    batch = mmse_estimate(h, stats, pilots, cfg, noise_seed=101)
    w = compute_precoders(batch, "mr", cfg.p_ul, cfg.noise_power)
    return cfg, estimate_se_parameters(batch, w, cfg)


def test_rayleigh_mean_oracle():
    cfg, params = scalar_mr_params()
    assert params.a[0, 0] == pytest.approx(A_RAYLEIGH, rel=0.01)
    # E|h^H w|^2 equals beta: the estimate contributes c, the error beta - c
    assert params.B[0, 0, 0, 0] == pytest.approx(BETA_200M, rel=0.01)
    # strong single entry: the recorded residue must be deep under the gate
    assert params.imag_residue < 0.01
    assert params.sigma2 == cfg.noise_power
    assert params.prelog == cfg.prelog


def naive_estimates(h, w):
    """Entry-by-entry reference estimator with no shared indexing."""
    n, K, L, _ = h.shape
    a = np.zeros((K, L))
    B = np.zeros((K, K, L, L))
    for k in range(K):
        for l in range(L):
            vals = [np.vdot(h[r, k, l], w[r, k, l]) for r in range(n)]
            a[k, l] = abs(sum(vals) / n)
    for k in range(K):
        for i in range(K):
            for l in range(L):
                for m in range(L):
                    acc = 0.0 + 0.0j
                    for r in range(n):
                        gl = np.vdot(h[r, k, l], w[r, i, l])
                        gm = np.vdot(h[r, k, m], w[r, i, m])
                        acc += gl * np.conj(gm)
                    B[k, i, l, m] = (acc / n).real
    return a, B


def random_batch(n_real, K=2, L=2, N=2, seed=0):
    rng = np.random.default_rng(seed)
    shape = (n_real, K, L, N)
    h = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    w = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    w /= np.linalg.norm(w, axis=-1, keepdims=True)
    return h, w


@pytest.mark.parametrize("n_real", [128, 300])
def test_estimator_matches_naive_loops(n_real):
    # 300 crosses the internal chunk boundary, 128 stays inside it
    h, w = random_batch(n_real)
    cfg = NetworkConfig(L=2, K=2, N=2, area_m=300.0, tau_p=2,
                        ap_placement="uniform-random")
    batch = ChannelBatch(h=h, h_hat=w, psi=np.zeros((2, 2, 2, 2), complex))
    params = estimate_se_parameters(batch, w, cfg)
    a_ref, b_ref = naive_estimates(h, w)
    assert np.allclose(params.a, a_ref, rtol=1e-12, atol=1e-15)
    assert np.allclose(params.B, b_ref, rtol=1e-12, atol=1e-15)
    assert params.n_real == n_real


def test_estimator_input_guards():
    h, w = random_batch(99)
    cfg = NetworkConfig(L=2, K=2, N=2, area_m=300.0, tau_p=2,
                        ap_placement="uniform-random")
    batch = ChannelBatch(h=h, h_hat=w, psi=np.zeros((2, 2, 2, 2), complex))
    with pytest.raises(ValueError, match="100"):
        estimate_se_parameters(batch, w, cfg)
    h, w = random_batch(128)
    batch = ChannelBatch(h=h, h_hat=w, psi=np.zeros((2, 2, 2, 2), complex))
    with pytest.raises(ValueError, match="shape"):
        estimate_se_parameters(batch, w[:, :1], cfg)


def test_rotation_warning_fires_only_when_rotated(caplog):
    cfg, _ = None, None
    h, w = random_batch(512, seed=3)
    # force means away from zero so the clean case has no residue issue
    h = h + 2.0
    w[:] = h / np.linalg.norm(h, axis=-1, keepdims=True)
    net = NetworkConfig(L=2, K=2, N=2, area_m=300.0, tau_p=2,
                        ap_placement="uniform-random")
    batch = ChannelBatch(h=h, h_hat=w, psi=np.zeros((2, 2, 2, 2), complex))
    with caplog.at_level(logging.WARNING, logger="cfpower.se"):
        clean = estimate_se_parameters(batch, w, net)
    assert not any("residue" in r.message for r in caplog.records)
    caplog.clear()
    with caplog.at_level(logging.WARNING, logger="cfpower.se"):
        rotated = estimate_se_parameters(batch, np.exp(0.3j) * w, net)
    assert any("residue" in r.message for r in caplog.records)
    # a global phase moves neither the modulus nor the second moments
    assert np.allclose(rotated.a, clean.a, rtol=1e-12)
    assert np.allclose(rotated.B, clean.B, rtol=1e-12)
    assert rotated.imag_residue > 0.25


def test_shipped_preset_build_stays_below_residue_gate(desk_cfg, caplog):
    from cfpower.network import place_aps
    from cfpower.pipeline import TEST_NAMESPACE, build_sample
    aps = place_aps(desk_cfg, desk_cfg.seed)
    with caplog.at_level(logging.WARNING, logger="cfpower.se"):
        build_sample(desk_cfg, aps, desk_cfg.seed, TEST_NAMESPACE, 3,
                     "rzf", 1000)
    assert not any("residue" in r.message for r in caplog.records)


def test_jensen_gap_on_real_sample(desk_sample, desk_cfg):
    # B_kk - a_k a_k^T is a covariance, so it must stay PSD
    params = desk_sample("rzf").params
    for k in range(desk_cfg.K):
        gap = params.B[k, k] - np.outer(params.a[k], params.a[k])
        eig = np.linalg.eigvalsh(0.5 * (gap + gap.T))
        assert eig.min() >= -1e-12 * max(eig.max(), 1e-300)


def test_sinr_positive_for_feasible_weights(desk_sample, desk_cfg):
    params = desk_sample("rzf").params
    rng = np.random.default_rng(0)
    mu = rng.uniform(0.0, 1.0, size=(desk_cfg.K, desk_cfg.L))
    mu *= np.sqrt(desk_cfg.p_max_dl) / np.linalg.norm(mu, axis=0)
    sinr = effective_sinr(params, mu)
    assert np.all(sinr > 0.0)
    se = compute_se(params, PowerAllocation(mu=mu, p_max=desk_cfg.p_max_dl))
    assert np.allclose(se, params.prelog * np.log2(1.0 + sinr))


def test_permutation_invariance(synthetic_params):
    params = synthetic_params(K=4, L=3, seed=1, sigma2=0.2)
    rng = np.random.default_rng(2)
    mu = rng.uniform(0.1, 0.5, size=(4, 3))
    perm = np.array([2, 0, 3, 1])
    permuted = SEParameters(a=params.a[perm],
                            B=params.B[perm][:, perm],
                            sigma2=params.sigma2, prelog=params.prelog,
                            n_real=params.n_real)
    sinr = effective_sinr(params, mu)
    sinr_p = effective_sinr(permuted, mu[perm])
    assert np.allclose(sinr_p, sinr[perm], rtol=1e-12)


def test_compute_se_guards(synthetic_params):
    params = synthetic_params(K=2, L=2, seed=3)
    alloc = PowerAllocation(mu=0.1 * np.ones((2, 2)), p_max=1.0)
    with pytest.raises(ValueError, match="shape"):
        compute_se(params, PowerAllocation(mu=0.1 * np.ones((3, 2)),
                                           p_max=1.0))
    # an all-zero B cannot explain a positive signal coefficient
    broken = SEParameters(a=params.a, B=np.zeros_like(params.B),
                          sigma2=params.sigma2, prelog=params.prelog,
                          n_real=params.n_real)
    with pytest.raises(RuntimeError, match="denominator"):
        compute_se(broken, alloc)


def test_allocation_validation():
    with pytest.raises(ValueError, match="nonnegative"):
        PowerAllocation(mu=np.array([[-0.1, 0.2]]), p_max=1.0)
    with pytest.raises(ValueError, match="budget"):
        PowerAllocation(mu=np.array([[1.0], [1.0]]), p_max=1.0)
    with pytest.raises(ValueError, match="matrix"):
        PowerAllocation(mu=np.zeros(3), p_max=1.0)
    # the documented slack is tight: just inside passes, just outside fails
    inside = np.sqrt(1.0 * (1.0 + 0.5 * BUDGET_SLACK))
    outside = np.sqrt(1.0 * (1.0 + 4.0 * BUDGET_SLACK))
    PowerAllocation(mu=np.array([[inside]]), p_max=1.0)
    with pytest.raises(ValueError, match="budget"):
        PowerAllocation(mu=np.array([[outside]]), p_max=1.0)
    alloc = PowerAllocation(mu=np.array([[0.5, 0.3]]), p_max=1.0)
    assert np.allclose(alloc.rho, [[0.25, 0.09]])


def test_serialization_roundtrip(tmp_path, synthetic_params):
    params = synthetic_params(K=3, L=2, seed=4, sigma2=0.7)
    blob = params.to_bytes()
    again = SEParameters.from_bytes(blob)
    assert np.array_equal(again.a, params.a)
    assert np.array_equal(again.B, params.B)
    assert again.sigma2 == params.sigma2
    assert again.prelog == params.prelog
    assert again.n_real == params.n_real
    # residue is a diagnostic, excluded from identity and bytes
    assert again == params
    assert again.to_bytes() == blob
    assert again.digest() == params.digest()
    path = tmp_path / "params.cfsep"
    params.save(path)
    assert SEParameters.load(path) == params


def test_serialization_rejects_corruption(synthetic_params):
    params = synthetic_params(K=2, L=2, seed=5)
    blob = params.to_bytes()
    with pytest.raises(DataFormatError, match="magic"):
        SEParameters.from_bytes(b"XXXXXXXX" + blob[8:])
    with pytest.raises(DataFormatError, match="size"):
        SEParameters.from_bytes(blob[:-8])
    with pytest.raises(DataFormatError, match="truncated"):
        SEParameters.from_bytes(blob[:10])
