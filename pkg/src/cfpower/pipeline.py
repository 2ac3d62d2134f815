"""End-to-end commands: dataset generation, training, evaluation, timing.

Seed discipline: every sample's randomness derives from
SeedSequence((master_seed, namespace, index)) where the namespace constant
differs between training data (TRAIN_NAMESPACE) and evaluation drops
(TEST_NAMESPACE), so the two populations can never share a pseudo-random
stream. Each sample splits into separate drop / channel / noise seeds.
AP positions are placed once per config and master seed and shared by all
samples.
"""

import csv
import glob
import logging
import os
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .allocator import (cluster_partition, features_for, labels_for,
                        load_model, model_features, predict_from_features,
                        save_model)
from .scaling import ScalerParams
from .config import NetworkConfig
from .dataset import DatasetFile, DatasetHeader, SampleRecord
from .errors import DataFormatError, SolverDegeneracyError
from .estimation import mmse_estimate, sample_channels
from .heuristics import equal_power, heuristic_allocation
from .mlp import TrainConfig, build_model, train
from .network import build_statistics, drop_scenario, place_aps
from .pilots import assign_pilots
from .precoding import compute_precoders
from .scaling import apply_scaler, fit_scaler
from .se import SEParameters, compute_se, estimate_se_parameters
from .wmmse import SolverConfig, wmmse_solve

log = logging.getLogger(__name__)

TRAIN_NAMESPACE = 0x7472    # training-sample seed space
TEST_NAMESPACE = 0x7465     # evaluation-drop seed space

LEARNED_STRATEGIES = ("ddnn", "ddnn-si", "cdnn")
STRATEGIES = ("wmmse-sumse", "wmmse-pf", "heuristic", "equal") \
    + LEARNED_STRATEGIES

DEFAULT_N_REAL = 1000
MODEL_SUFFIX = ".cfmlp"


def sample_seeds(master_seed: int, namespace: int, index: int):
    """Independent (drop, channel, noise) seeds for one sample."""
    ss = np.random.SeedSequence((master_seed, namespace, index))
    drop_s, chan_s, noise_s = ss.generate_state(3, np.uint64)
    return int(drop_s), int(chan_s), int(noise_s)


@dataclass(frozen=True)
class SampleInputs:
    """Everything a power allocator consumes for one drop."""

    beta: np.ndarray
    pilot_of: np.ndarray
    params: SEParameters


def build_sample(cfg: NetworkConfig, ap_positions, master_seed: int,
                 namespace: int, index: int, precoder: str,
                 n_real: int) -> SampleInputs:
    """Drop UEs, estimate channels, and reduce to SE parameters."""
    drop_s, chan_s, noise_s = sample_seeds(master_seed, namespace, index)
    scen = drop_scenario(cfg, drop_s, ap_positions)
    stats = build_statistics(cfg, scen)
    pil = assign_pilots(stats.beta, cfg.tau_p)
    h = sample_channels(stats, n_real, chan_s)
    batch = mmse_estimate(h, stats, pil, cfg, noise_s)
    w = compute_precoders(batch, precoder, cfg.p_ul, cfg.noise_power)
    params = estimate_se_parameters(batch, w, cfg)
    return SampleInputs(beta=stats.beta, pilot_of=pil.pilot_of, params=params)


def cmd_generate(cfg: NetworkConfig, n_samples: int, objective: str,
                 precoder: str, out_path, seed: Optional[int] = None,
                 n_real: int = DEFAULT_N_REAL,
                 solver_cfg: Optional[SolverConfig] = None,
                 max_degenerate_frac: float = 0.25) -> DatasetFile:
    """Generate (or resume) a labeled dataset of optimizer solutions."""
    master = cfg.seed if seed is None else int(seed)
    if solver_cfg is None:
        solver_cfg = SolverConfig(objective=objective)
    elif solver_cfg.objective != objective:
        raise ValueError("solver config objective disagrees with the dataset")
    header = DatasetHeader(config=cfg, objective=objective, precoder=precoder,
                           n_samples=n_samples, n_real=n_real,
                           master_seed=master)
    if os.path.exists(out_path):
        ds = DatasetFile.open(out_path)
        if ds.header != header:
            raise DataFormatError(
                f"{out_path}: existing dataset was generated under a "
                "different configuration")
        start = len(ds)
        log.info("resuming %s at sample %d", out_path, start)
    else:
        ds = DatasetFile.create(out_path, header)
        start = 0
    aps = place_aps(cfg, master)
    n_failed = 0
    for index in range(start, n_samples):
        sample = build_sample(cfg, aps, master, TRAIN_NAMESPACE, index,
                              precoder, n_real)
        result = wmmse_solve(sample.params, cfg.p_max_dl, solver_cfg,
                             beta=sample.beta)
        if not result.converged:
            n_failed += 1
        rec = SampleRecord(index=index, beta=sample.beta,
                           pilot_of=sample.pilot_of, mu=result.alloc.mu,
                           digest=bytes.fromhex(sample.params.digest()),
                           converged=result.converged,
                           subproblem_exhausted=result.subproblem_exhausted > 0,
                           n_outer=result.n_outer,
                           clamp_events=result.clamp_events,
                           sign_flips=result.sign_flips,
                           final_utility=result.utility)
        ds.append(rec)
        if (index + 1) % 100 == 0:
            log.info("generated %d / %d samples", index + 1, n_samples)
    n_new = n_samples - start
    if n_new > 0 and n_failed / n_new > max_degenerate_frac:
        raise SolverDegeneracyError(
            f"{n_failed} of {n_new} optimizer runs failed to converge")
    return ds


def _model_path(out_dir, kind, unit):
    return os.path.join(out_dir, f"{kind}-{unit:03d}{MODEL_SUFFIX}")


def load_models(models_dir, kind: str):
    """All models of a kind in a directory, ordered by unit id."""
    pattern = os.path.join(models_dir, f"{kind}-*{MODEL_SUFFIX}")
    paths = sorted(glob.glob(pattern))
    if not paths:
        raise DataFormatError(f"no {kind} models under {models_dir}")
    models = [load_model(p) for p in paths]
    return sorted(models, key=lambda m: m.unit_id)


def cmd_train(dataset_path, kind: str, out_dir,
              train_cfg: Optional[TrainConfig] = None,
              cluster_size: int = 4):
    """Fit one model per AP (or per cluster) from a generated dataset.

    Returns the list of written model paths. Loss curves land next to the
    models as loss-<model>.csv with columns epoch, train_mse, val_mse.
    """
    if train_cfg is None:
        train_cfg = TrainConfig()
    ds = DatasetFile.open(dataset_path)
    if len(ds) == 0:
        raise DataFormatError(f"{dataset_path}: dataset holds no samples")
    cfg = ds.header.config
    records = list(ds)
    betas = np.stack([r.beta for r in records])
    mus = np.stack([r.mu for r in records])
    n = betas.shape[0]

    clusters = None
    if kind == "cdnn":
        aps = place_aps(cfg, ds.header.master_seed)
        clusters = cluster_partition(aps, cluster_size)
        units = list(range(clusters.shape[0]))
        members = [tuple(int(a) for a in clusters[j]) for j in units]
    elif kind in ("ddnn", "ddnn-si"):
        units = list(range(cfg.L))
        members = [(u,) for u in units]
    else:
        raise ValueError(f"unknown model kind {kind!r}")

    feats = np.stack([features_for(kind, betas[i], cfg, clusters)
                      for i in range(n)])
    labels = np.stack([labels_for(kind, mus[i], clusters)
                       for i in range(n)])

    # one seeded split shared by every unit's model
    rng = np.random.default_rng(train_cfg.seed)
    perm = rng.permutation(n)
    n_val = max(1, int(round(train_cfg.validation_fraction * n))) \
        if train_cfg.validation_fraction > 0 and n >= 2 else 0
    val_idx, train_idx = perm[:n_val], perm[n_val:]

    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for unit in units:
        seed = np.random.SeedSequence(
            (train_cfg.seed, 0x6D6C, unit)).generate_state(1)[0]
        model = build_model(kind, cfg.K, unit_id=unit,
                            member_aps=members[unit],
                            cluster_size=cluster_size, seed=int(seed))
        X, Y = feats[:, unit, :], labels[:, unit, :]
        model.scaler = fit_scaler(X[train_idx])
        Xs = apply_scaler(model.scaler, X)
        val = (Xs[val_idx], Y[val_idx]) if n_val else None
        result = train(model, Xs[train_idx], Y[train_idx], train_cfg, val=val)
        path = _model_path(out_dir, kind, unit)
        save_model(model, path)
        paths.append(path)
        loss_path = os.path.join(
            out_dir, f"loss-{kind}-{unit:03d}.csv")
        with open(loss_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_mse", "val_mse"])
            for ep in range(train_cfg.epochs):
                writer.writerow([ep, repr(float(result.train_loss[ep])),
                                 repr(float(result.val_loss[ep]))])
        log.info("trained %s (final val mse %.3g)", path,
                 result.val_loss[-1])
    return paths


@dataclass
class EvalReport:
    """Per-strategy spectral efficiencies over the evaluation drops."""

    strategies: list
    se: dict                  # strategy -> (n_drops, K)
    alloc_seconds: dict       # strategy -> mean seconds per allocation
    digests: list             # per-drop SE parameter digests

    def mean_total_se(self, strategy) -> float:
        return float(self.se[strategy].sum(axis=1).mean())

    def mean_min_se(self, strategy) -> float:
        return float(self.se[strategy].min(axis=1).mean())

    def percentile_se(self, strategy, q) -> float:
        return float(np.percentile(self.se[strategy].reshape(-1), q))

    def cdf(self, strategy):
        values = np.sort(self.se[strategy].reshape(-1))
        cum = np.arange(1, values.size + 1) / values.size
        return values, cum

    def write_csvs(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        per_ue = os.path.join(out_dir, "per_ue_se.csv")
        with open(per_ue, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["drop", "strategy", "ue", "se"])
            for strat in self.strategies:
                se = self.se[strat]
                for d in range(se.shape[0]):
                    for k in range(se.shape[1]):
                        writer.writerow([d, strat, k, repr(float(se[d, k]))])
        cdf_path = os.path.join(out_dir, "cdf.csv")
        with open(cdf_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["strategy", "se", "cdf"])
            for strat in self.strategies:
                values, cum = self.cdf(strat)
                for se_val, c in zip(values, cum):
                    writer.writerow([strat, repr(float(se_val)),
                                     repr(float(c))])
        summary = os.path.join(out_dir, "summary.csv")
        with open(summary, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["strategy", "mean_total_se", "mean_min_se",
                             "p10_se", "mean_alloc_seconds"])
            for strat in self.strategies:
                writer.writerow([
                    strat,
                    repr(self.mean_total_se(strat)),
                    repr(self.mean_min_se(strat)),
                    repr(self.percentile_se(strat, 10.0)),
                    repr(float(self.alloc_seconds[strat])),
                ])
        return [per_ue, cdf_path, summary]


def _allocator_for(strategy, cfg, models):
    """Returns a callable sample -> PowerAllocation for one strategy."""
    if strategy == "wmmse-sumse":
        solver = SolverConfig(objective="sumse")
        return lambda s: wmmse_solve(s.params, cfg.p_max_dl, solver,
                                     beta=s.beta).alloc
    if strategy == "wmmse-pf":
        solver = SolverConfig(objective="pf")
        return lambda s: wmmse_solve(s.params, cfg.p_max_dl, solver,
                                     beta=s.beta).alloc
    if strategy == "heuristic":
        return lambda s: heuristic_allocation(s.beta, cfg.v_exponent,
                                              cfg.p_max_dl)
    if strategy == "equal":
        return lambda s: equal_power(cfg.K, cfg.L, cfg.p_max_dl)
    if strategy in LEARNED_STRATEGIES:
        group = models[strategy]
        return lambda s: predict_from_features(
            group, model_features(group, s.beta, cfg), cfg.K, cfg.L,
            cfg.p_max_dl)
    raise ValueError(f"unknown strategy {strategy!r}")


def cmd_evaluate(cfg: NetworkConfig, strategies, n_drops: int, precoder: str,
                 out_dir=None, seed: Optional[int] = None,
                 n_real: int = DEFAULT_N_REAL,
                 models_dir=None) -> EvalReport:
    """Evaluate strategies on identical held-out drops and SE parameters."""
    master = cfg.seed if seed is None else int(seed)
    strategies = list(strategies)
    models = {}
    for strat in strategies:
        if strat in LEARNED_STRATEGIES:
            if models_dir is None:
                raise DataFormatError(
                    f"strategy {strat} needs a models directory")
            models[strat] = load_models(models_dir, strat)
    allocators = {s: _allocator_for(s, cfg, models) for s in strategies}
    aps = place_aps(cfg, master)
    se = {s: np.empty((n_drops, cfg.K)) for s in strategies}
    seconds = {s: 0.0 for s in strategies}
    digests = []
    for drop in range(n_drops):
        sample = build_sample(cfg, aps, master, TEST_NAMESPACE, drop,
                              precoder, n_real)
        digest = sample.params.digest()
        digests.append(digest)
        for strat in strategies:
            # every strategy scores against the same parameter estimate
            assert sample.params.digest() == digest
            t0 = time.perf_counter()
            alloc = allocators[strat](sample)
            seconds[strat] += time.perf_counter() - t0
            se[strat][drop] = compute_se(sample.params, alloc)
        if (drop + 1) % 50 == 0:
            log.info("evaluated %d / %d drops", drop + 1, n_drops)
    report = EvalReport(strategies=strategies, se=se,
                        alloc_seconds={s: seconds[s] / max(n_drops, 1)
                                       for s in strategies},
                        digests=digests)
    if out_dir is not None:
        report.write_csvs(out_dir)
    return report


def cmd_inspect(path) -> dict:
    """Summarize any package container (dataset, model, SE parameters)."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
    if magic == b"CFDSET01":
        ds = DatasetFile.open(path)
        h = ds.header
        return {"type": "dataset", "objective": h.objective,
                "precoder": h.precoder, "n_samples_target": h.n_samples,
                "n_samples_present": len(ds), "n_real": h.n_real,
                "master_seed": h.master_seed, "config": h.config.to_dict()}
    if magic == b"CFMLP001":
        model = load_model(path)
        return {"type": "model", "kind": model.kind,
                "unit_id": model.unit_id,
                "member_aps": list(model.member_aps),
                "n_parameters": model.n_parameters(),
                "layer_sizes": [model.n_inputs]
                               + [l.W.shape[0] for l in model.layers],
                "activations": [l.activation for l in model.layers],
                "has_scaler": model.scaler is not None}
    if magic == b"CFSEP001":
        params = SEParameters.load(path)
        return {"type": "se-parameters", "K": params.K, "L": params.L,
                "n_real": params.n_real, "prelog": params.prelog,
                "sigma2": params.sigma2, "digest": params.digest()}
    raise DataFormatError(f"{path}: unrecognized container magic {magic!r}")


def _bench_models(cfg, kind, cluster_size, models_dir, seed):
    """Trained models when available, seeded random-weight stand-ins else."""
    if models_dir is not None:
        return load_models(models_dir, kind)
    if kind == "cdnn":
        clusters = cluster_partition(place_aps(cfg, seed), cluster_size)
        units = [(j, tuple(int(a) for a in clusters[j]))
                 for j in range(clusters.shape[0])]
    else:
        units = [(u, (u,)) for u in range(cfg.L)]
    models = []
    for unit, member in units:
        model = build_model(kind, cfg.K, unit_id=unit, member_aps=member,
                            cluster_size=cluster_size, seed=(seed, unit))
        n_f = model.n_inputs
        model.scaler = ScalerParams(median=np.zeros(n_f), iqr=np.ones(n_f))
        models.append(model)
    return models


def cmd_bench(cfg: NetworkConfig, strategies, n_repeats: int = 5,
              out_path=None, seed: Optional[int] = None,
              n_real: int = DEFAULT_N_REAL, models_dir=None,
              cluster_size: int = 4) -> dict:
    """Wall-clock per allocation on pre-generated inputs.

    Returns {strategy: {column: seconds}} with columns
    sumse-mr / sumse-rzf / pf-mr / pf-rzf; allocation timing for learned
    strategies covers scaling, forward passes, and post-processing on
    pre-built feature rows. The noop strategy measures harness overhead.
    """
    master = cfg.seed if seed is None else int(seed)
    aps = place_aps(cfg, master)
    samples = {p: build_sample(cfg, aps, master, TEST_NAMESPACE, 0, p, n_real)
               for p in ("mr", "rzf")}
    columns = [("sumse", "mr"), ("sumse", "rzf"), ("pf", "mr"), ("pf", "rzf")]
    results = {}
    for strat in strategies:
        row = {}
        for objective, precoder in columns:
            sample = samples[precoder]
            if strat == "wmmse":
                solver = SolverConfig(objective=objective)
                task = lambda s=sample, c=solver: wmmse_solve(
                    s.params, cfg.p_max_dl, c, beta=s.beta)
            elif strat in LEARNED_STRATEGIES:
                group = _bench_models(cfg, strat, cluster_size, models_dir,
                                      master)
                rows = model_features(group, sample.beta, cfg)
                task = lambda g=group, r=rows: predict_from_features(
                    g, r, cfg.K, cfg.L, cfg.p_max_dl)
            elif strat == "heuristic":
                task = lambda s=sample: heuristic_allocation(
                    s.beta, cfg.v_exponent, cfg.p_max_dl)
            elif strat == "equal":
                task = lambda: equal_power(cfg.K, cfg.L, cfg.p_max_dl)
            elif strat == "noop":
                task = lambda: None
            else:
                raise ValueError(f"unknown bench strategy {strat!r}")
            task()   # warm-up, outside the timed window
            t0 = time.perf_counter()
            for _ in range(n_repeats):
                task()
            row[f"{objective}-{precoder}"] = \
                (time.perf_counter() - t0) / n_repeats
        results[strat] = row
    if out_path is not None:
        with open(out_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["strategy"]
                            + [f"{o}-{p}" for o, p in columns])
            for strat in strategies:
                writer.writerow([strat] + [repr(results[strat][f"{o}-{p}"])
                                           for o, p in columns])
    return results
