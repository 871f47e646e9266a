"""
Seeded Monte Carlo trials and sweep aggregation.

Each trial index owns one :class:`numpy.random.SeedSequence` derived from
``(master_seed, trial_index)``. Its children seed the channel draw, the
direct-link training noise and the cascade training noise. The same trial
seed is reused at every point of the sweep axis, and every estimator in a
trial starts from the same cascade-noise seed.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..channel import ChannelSet, LinkBudget, PhaseConfig, dbm_to_watts, draw_scenario, total_channel
from ..errors import InvalidInputError
from ..estimation import (
    DirectEstimate,
    RankOneSet,
    all_zero_baseline,
    build_serom_plan,
    coobo_estimate,
    estimate_direct,
    obo_estimate,
    serom_estimate,
    spac_estimate,
)
from ..phase_design import (
    DesignConfig,
    RankPolicy,
    design_phases,
    effective_spectral_efficiency,
    exhaustive_search,
    transmit_beamformer,
)
from .config import ScenarioConfig

__all__ = [
    "STREAM_CHANNEL",
    "STREAM_DIRECT_NOISE",
    "STREAM_CASCADE_NOISE",
    "TrialRecord",
    "SweepRow",
    "SweepTable",
    "trial_seed",
    "run_trial",
    "run_sweep",
]

log = logging.getLogger(__name__)

STREAM_CHANNEL, STREAM_DIRECT_NOISE, STREAM_CASCADE_NOISE = 0, 1, 2


@dataclass
class TrialRecord:
    """
    Outcome of one estimator on one trial at one sweep point.

    A record whose estimator raised keeps the message in ``error`` and
    reports zero rate, so failures count against the estimator's mean.
    """

    trial: int
    estimator: str
    axis_value: float
    tau_d: int
    tau_c: int
    tau_total: int
    se_per_use: float
    se_effective: float
    iterations: int = 0
    wall_time: float = 0.0
    error: str | None = None
    streams: dict = field(default_factory=dict, repr=False)


@dataclass(frozen=True)
class SweepRow:
    axis_value: float
    estimator: str
    mean_se_per_use: float
    mean_se_eff: float
    stderr_se_eff: float
    tau_total: int
    trials: int
    failures: int = 0


@dataclass
class SweepTable:
    axis: str
    rows: list[SweepRow] = field(default_factory=list)
    config: ScenarioConfig | None = None

    def row(self, axis_value: float, estimator: str) -> SweepRow:
        for r in self.rows:
            if r.axis_value == axis_value and r.estimator == estimator:
                return r
        raise KeyError((axis_value, estimator))

    def series(self, estimator: str, metric: str = "mean_se_eff") -> tuple[list, list]:
        rows = [r for r in self.rows if r.estimator == estimator]
        return [r.axis_value for r in rows], [getattr(r, metric) for r in rows]


def trial_seed(master_seed: int, trial_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(trial_index),))


def _child(seed: np.random.SeedSequence, stream: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed.entropy, spawn_key=(*seed.spawn_key, stream))


def _stream_key(seed: np.random.SeedSequence) -> tuple:
    return (int(seed.entropy), *map(int, seed.spawn_key))


def _budgets(config: ScenarioConfig, p_dl_dbm: float) -> tuple[LinkBudget, LinkBudget]:
    """(data budget, training budget); the latter may have its noise removed."""
    p_ul = dbm_to_watts(p_dl_dbm if config.p_ul_dbm is None else config.p_ul_dbm)
    data = LinkBudget(p_ul=p_ul, p_dl=dbm_to_watts(p_dl_dbm), n0=dbm_to_watts(config.noise_dbm))
    training = replace(data, n0=0.0) if config.training_noiseless else data
    return data, training


def _designed_record(config, channels, est: RankOneSet, data: LinkBudget, gamma: int,
                     rank_policy: RankPolicy) -> tuple[float, float, int]:
    design = DesignConfig(max_outer_iters=config.max_outer_iters,
                          stop_threshold=config.stop_threshold,
                          quant_bits=config.quant_bits, rank_policy=rank_policy)
    result = design_phases(est.h_ub_hat, est.r_hats, data, design)
    h_hat = total_channel(est.h_ub_hat, est.r_hats, result.phase)
    bf = transmit_beamformer(h_hat, rank_policy)
    rep = effective_spectral_efficiency(channels, result.phase, bf.w, bf.rank_used,
                                        data, gamma, est.tau_total)
    return rep.se_per_use, rep.se_effective, result.iterations


def _run_estimator(name: str, config: ScenarioConfig, channels: ChannelSet,
                   direct: DirectEstimate, data: LinkBudget, training: LinkBudget,
                   direct_seed, cascade_seed, gamma: int):
    """Returns (tau_d, tau_c, se_per_use, se_eff, iterations)."""
    geo = channels.geometry
    numerical = RankPolicy.numerical()

    def rng():
        return np.random.default_rng(cascade_seed)

    if name == "perfect":
        est = RankOneSet(channels.h_ub, channels.rank_ones, 0, 0, "perfect")
        se, eff, it = _designed_record(config, channels, est, data, gamma, RankPolicy())
        return 0, 0, se, eff, it
    if name == "exhaustive":
        phase, _ = exhaustive_search(channels.h_ub, channels.rank_ones, data, config.quant_bits)
        bf = transmit_beamformer(channels.total(phase))
        rep = effective_spectral_efficiency(channels, phase, bf.w, bf.rank_used, data, gamma, 0)
        return 0, 0, rep.se_per_use, rep.se_effective, 0
    if name == "all-zero":
        # same noise stream as the direct-link training it replaces
        h_hat, tau = all_zero_baseline(channels, training, np.random.default_rng(direct_seed))
        phase = PhaseConfig.all_on(np.zeros(geo.l), config.quant_bits)
        bf = transmit_beamformer(h_hat, numerical)
        rep = effective_spectral_efficiency(channels, phase, bf.w, bf.rank_used, data, gamma, tau)
        return tau, 0, rep.se_per_use, rep.se_effective, 0

    if name == "obo":
        est = obo_estimate(channels, training, rng(), direct)
    elif name == "coobo":
        est = coobo_estimate(channels, training, rng(), direct)
    elif name == "spac":
        est, _ = spac_estimate(channels, training, rng(), direct)
    elif name == "serom":
        plan = build_serom_plan(config.serom_q, geo.l, config.quant_bits)
        est = serom_estimate(channels, training, plan, rng(), direct)
    else:
        raise InvalidInputError(f"unknown estimator {name!r}")
    se, eff, it = _designed_record(config, channels, est, data, gamma, numerical)
    return est.training_len_direct, est.training_len_cascade, se, eff, it


def _trial_at(config: ScenarioConfig, channels: ChannelSet, seed, p_dl_dbm: float,
              axis_value: float, gamma: int, trial_index: int) -> list[TrialRecord]:
    data, training = _budgets(config, p_dl_dbm)
    direct_seed = _child(seed, STREAM_DIRECT_NOISE)
    cascade_seed = _child(seed, STREAM_CASCADE_NOISE)
    direct = estimate_direct(channels, training, np.random.default_rng(direct_seed))
    streams = {"channel": _stream_key(_child(seed, STREAM_CHANNEL)),
               "direct_noise": _stream_key(direct_seed),
               "cascade_noise": _stream_key(cascade_seed)}
    records = []
    for name in config.estimators:
        t0 = time.perf_counter()
        try:
            tau_d, tau_c, se, eff, it = _run_estimator(
                name, config, channels, direct, data, training, direct_seed, cascade_seed, gamma)
            error = None
        except Exception as exc:  # recorded, not fatal to the trial
            log.warning("trial %d estimator %s failed: %s", trial_index, name, exc)
            tau_d, tau_c, se, eff, it = 0, 0, 0.0, 0.0, 0
            error = f"{type(exc).__name__}: {exc}"
        records.append(TrialRecord(
            trial=trial_index, estimator=name, axis_value=float(axis_value),
            tau_d=tau_d, tau_c=tau_c, tau_total=tau_d + tau_c,
            se_per_use=se, se_effective=eff, iterations=it,
            wall_time=time.perf_counter() - t0, error=error, streams=streams,
        ))
    return records


def _draw(config: ScenarioConfig, seed) -> ChannelSet:
    # path loss uses only mu0 and d0, so the channel is power-independent
    data, _ = _budgets(config, config.power_dbm[0])
    return draw_scenario(config.geometry, data, _child(seed, STREAM_CHANNEL))


def run_trial(config: ScenarioConfig, p_dl_dbm: float, trial_index: int,
              gamma: int | None = None) -> list[TrialRecord]:
    """
    Run every configured estimator on trial ``trial_index`` at ``p_dl_dbm``.

    The channel and all noise streams depend only on ``config.master_seed``
    and ``trial_index``.
    """
    seed = trial_seed(config.master_seed, trial_index)
    channels = _draw(config, seed)
    gamma = config.gamma if gamma is None else gamma
    return _trial_at(config, channels, seed, p_dl_dbm, p_dl_dbm, gamma, trial_index)


def _trial_all_points(config: ScenarioConfig, trial_index: int) -> list[TrialRecord]:
    seed = trial_seed(config.master_seed, trial_index)
    channels = _draw(config, seed)
    if config.axis == "power":
        out = []
        for p in config.power_dbm:
            out.extend(_trial_at(config, channels, seed, p, p, config.gamma, trial_index))
        return out
    # the per-use rate does not depend on the coherence length, only the prelog does
    base = _trial_at(config, channels, seed, config.power_dbm[0], config.power_dbm[0],
                     max(config.gamma_values), trial_index)
    out = []
    for g in config.gamma_values:
        for r in base:
            prelog = max(0.0, (g - r.tau_total) / g)
            out.append(replace(r, axis_value=float(g),
                               se_effective=prelog * r.se_per_use if prelog > 0 else 0.0))
    return out


def _aggregate(config: ScenarioConfig, records: list[TrialRecord]) -> SweepTable:
    table = SweepTable(axis=config.axis, config=config)
    for x in config.axis_values:
        for name in config.estimators:
            sel = [r for r in records if r.axis_value == x and r.estimator == name]
            eff = np.array([r.se_effective for r in sel])
            per_use = np.array([r.se_per_use for r in sel])
            stderr = float(eff.std(ddof=1) / np.sqrt(eff.size)) if eff.size > 1 else 0.0
            taus = {r.tau_total for r in sel if r.error is None}
            table.rows.append(SweepRow(
                axis_value=float(x), estimator=name,
                mean_se_per_use=float(per_use.mean()), mean_se_eff=float(eff.mean()),
                stderr_se_eff=stderr, tau_total=max(taus) if taus else 0,
                trials=len(sel), failures=sum(r.error is not None for r in sel),
            ))
    return table


def run_sweep(config: ScenarioConfig, jobs: int = 1,
              return_records: bool = False):
    """
    Run ``config.trials`` trials over the configured axis and aggregate.

    With ``jobs > 1`` trials run in worker processes; results are merged in
    trial-index order, so the table is identical to a serial run.
    """
    indices = range(config.trials)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_trial_all_points, [config] * config.trials, indices))
    else:
        chunks = [_trial_all_points(config, i) for i in indices]
    records = [r for chunk in chunks for r in chunk]
    table = _aggregate(config, records)
    return (table, records) if return_records else table
