"""
IRS phase-shift design, beamformers and spectral-efficiency metrics.

The design maximizes ``log2 det(I + lam * H_tot H_tot^H)`` one element at a
time. For fixed other phases the per-element optimum is closed form:
``phi_l = angle(Tr(R_l^H A_l^{-1} H_{-l}))`` with
``A_l = I + lam H_{-l} H_{-l}^H + lam R_l R_l^H``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet, LinkBudget, PhaseConfig, total_channel
from .errors import DegenerateChannelError, InvalidInputError, SearchSpaceError
from .numerics import TOL, capacity_log_det, pd_solve, svd

__all__ = [
    "RankPolicy",
    "DesignConfig",
    "DesignResult",
    "BeamformerResult",
    "SEReport",
    "spectral_efficiency",
    "uplink_spectral_efficiency",
    "transmit_beamformer",
    "optimal_phase_element",
    "design_phases",
    "quantize_phase",
    "exhaustive_search",
    "exhaustive_search_sweep",
    "effective_spectral_efficiency",
    "complexity_estimate",
    "DEFAULT_SEARCH_BUDGET",
]

DEFAULT_SEARCH_BUDGET = 2**20
_DEGENERATE_TRACE = 1e-15


@dataclass(frozen=True)
class RankPolicy:
    """``fixed`` uses ``min(N, M)``; ``numerical`` counts ``s_i > threshold * s_1``."""

    kind: str = "fixed"
    threshold: float = 1e-6

    def __post_init__(self):
        if self.kind not in ("fixed", "numerical"):
            raise InvalidInputError(f"unknown rank policy {self.kind!r}")

    @classmethod
    def numerical(cls, threshold: float = 1e-6) -> "RankPolicy":
        return cls("numerical", threshold)

    def rank(self, singular_values: np.ndarray) -> int:
        full = singular_values.size
        if self.kind == "fixed":
            return full
        s = np.asarray(singular_values)
        return max(1, min(full, int(np.sum(s > self.threshold * s[0]))))


@dataclass(frozen=True)
class DesignConfig:
    max_outer_iters: int = 20
    stop_threshold: float | None = None  # None -> 1e-3 * L radians
    quant_bits: int | None = None
    rank_policy: RankPolicy = RankPolicy.numerical()

    def __post_init__(self):
        if self.max_outer_iters < 1:
            raise InvalidInputError("max_outer_iters must be >= 1")
        if self.stop_threshold is not None and not self.stop_threshold > 0:
            raise InvalidInputError("stop_threshold must be positive")

    def threshold_for(self, l: int) -> float:
        return 1e-3 * l if self.stop_threshold is None else self.stop_threshold


@dataclass
class DesignResult:
    phase: PhaseConfig
    unquantized: np.ndarray
    iterations: int
    lam: float
    rank: int
    converged: bool
    se_trace: list = field(default_factory=list, repr=False)


@dataclass(frozen=True)
class BeamformerResult:
    w: np.ndarray
    f: np.ndarray
    rank_used: int
    singular_values: np.ndarray


@dataclass(frozen=True)
class SEReport:
    se_per_use: float
    se_effective: float
    tau_total: int
    coherence_len: int


def spectral_efficiency(h_tot, power: float, n0: float, r: int) -> float:
    """Beamformer-free downlink rate ``log2 det(I_N + P/(r N0) H H^H)``."""
    if r < 1:
        raise InvalidInputError("rank must be >= 1")
    return capacity_log_det(h_tot, power / (r * n0))


def uplink_spectral_efficiency(h_tot, p_ul: float, n0: float, r: int) -> float:
    """``log2 det(I_M + P_UL/(r N0) H^H H)``."""
    if r < 1:
        raise InvalidInputError("rank must be >= 1")
    return capacity_log_det(np.asarray(h_tot).conj().T, p_ul / (r * n0))


def transmit_beamformer(h_tot, rank_policy: RankPolicy = RankPolicy()) -> BeamformerResult:
    """Dominant singular vectors of the downlink channel ``H_tot^H``."""
    h_tot = np.asarray(h_tot, dtype=complex)
    if not np.any(h_tot):
        raise DegenerateChannelError("cannot beamform on an all-zero channel")
    dec = svd(h_tot.conj().T)
    s = dec.S
    r = rank_policy.rank(s)
    return BeamformerResult(w=dec.V[:, :r], f=dec.U[:, :r], rank_used=r,
                            singular_values=s)


def _solve_shifted_gram(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Solve ``A X = B`` for ``A = I + PSD``.

    The smallest eigenvalue of such ``A`` is at least 1 and the largest is at
    most its trace, so a bounded trace already rules out numerical
    singularity and a plain LU solve suffices; otherwise defer to the
    checked solver.
    """
    if np.real(np.trace(a)) < 1.0 / TOL.singular_ratio:
        return np.linalg.solve(a, b)
    return pd_solve(0.5 * (a + a.conj().T), b)


def optimal_phase_element(r_ell, h_minus_ell, lam: float) -> tuple[float, bool]:
    """
    Phase of one element maximizing the log-det objective, others held fixed.

    Returns ``(phi, degenerate)``. ``degenerate`` is set when the coupling
    trace vanishes (relative to ``|R| |H_-l|``), in which case every phase is
    optimal and ``0.0`` is returned.
    """
    r_ell = np.asarray(r_ell, dtype=complex)
    h_minus_ell = np.asarray(h_minus_ell, dtype=complex)
    if not lam > 0:
        raise InvalidInputError("lambda must be positive")
    n = r_ell.shape[0]
    a = (np.eye(n) + lam * (h_minus_ell @ h_minus_ell.conj().T)
         + lam * (r_ell @ r_ell.conj().T))
    x = _solve_shifted_gram(a, h_minus_ell)
    t = np.vdot(r_ell, x)
    scale = np.linalg.norm(r_ell) * np.linalg.norm(h_minus_ell)
    if abs(t) <= _DEGENERATE_TRACE * scale or t == 0:
        return 0.0, True
    return float(np.mod(np.angle(t), 2 * np.pi)), False


def quantize_phase(phi, b: int):
    """Round to the nearest point of ``{0, 2pi/2^b, ...}`` measured on the circle."""
    if b < 1:
        raise InvalidInputError("quantization bits must be >= 1")
    levels = 2 ** int(b)
    step = 2 * np.pi / levels
    k = np.mod(np.round(np.mod(phi, 2 * np.pi) / step), levels)
    out = k * step
    return float(out) if np.ndim(out) == 0 else out


def _circular_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = np.abs(np.mod(a - b, 2 * np.pi))
    return np.minimum(d, 2 * np.pi - d)


def design_phases(h_ub_hat, rank_ones, budget: LinkBudget,
                  config: DesignConfig = DesignConfig(),
                  record_trace: bool = False) -> DesignResult:
    """
    Iterative closed-form phase design.

    The initial pass sets elements in order, each against the direct link
    plus the elements already placed; subsequent sweeps re-optimize every
    element against all others until the summed circular change falls below
    the stop threshold or ``max_outer_iters`` sweeps have run. Phases are
    quantized once at the end.

    ``lam = P_DL / (r N0)`` is fixed from the rank of ``H_UB_hat + sum R_l``.
    With ``record_trace`` the full-channel rate after every sweep update is
    kept in ``se_trace`` (first entry is the rate after initialization).
    """
    h_ub_hat = np.asarray(h_ub_hat, dtype=complex)
    rank_ones = np.asarray(getattr(rank_ones, "r_hats", rank_ones), dtype=complex)
    l_count = rank_ones.shape[0]

    h_init = h_ub_hat + rank_ones.sum(axis=0)
    if np.any(h_init):
        r = config.rank_policy.rank(np.linalg.svd(h_init, compute_uv=False))
    else:
        r = min(h_ub_hat.shape)
    lam = budget.p_dl / (r * budget.n0)

    phases = np.zeros(l_count)
    h_cur = h_ub_hat.copy()
    for l in range(l_count):
        phases[l], _ = optimal_phase_element(rank_ones[l], h_cur, lam)
        h_cur = h_cur + np.exp(1j * phases[l]) * rank_ones[l]

    trace = [capacity_log_det(h_cur, lam)] if record_trace else []
    eps = config.threshold_for(l_count)
    previous = phases.copy()
    iterations, converged = 0, False
    for _ in range(config.max_outer_iters):
        iterations += 1
        for l in range(l_count):
            h_minus = h_cur - np.exp(1j * phases[l]) * rank_ones[l]
            phases[l], _ = optimal_phase_element(rank_ones[l], h_minus, lam)
            h_cur = h_minus + np.exp(1j * phases[l]) * rank_ones[l]
            if record_trace:
                trace.append(capacity_log_det(h_cur, lam))
        if np.sum(_circular_distance(phases, previous)) < eps:
            converged = True
            break
        previous = phases.copy()

    final = phases if config.quant_bits is None else quantize_phase(phases, config.quant_bits)
    return DesignResult(
        phase=PhaseConfig.all_on(np.atleast_1d(final), config.quant_bits),
        unquantized=phases.copy(), iterations=iterations, lam=lam, rank=r,
        converged=converged, se_trace=trace,
    )


def exhaustive_search(h_ub, rank_ones, budget: LinkBudget, b: int,
                      l_limit: int = DEFAULT_SEARCH_BUDGET,
                      rank: int | None = None, chunk: int = 1 << 15):
    """
    Global maximizer of the downlink rate over every ``b``-bit phase vector.

    ``l_limit`` is the evaluation budget; spaces larger than it are refused.
    Candidates are enumerated in lexicographic order and the first maximum is
    kept. ``rank`` defaults to ``min(N, M)``.

    Returns ``(PhaseConfig, se)``.
    """
    return exhaustive_search_sweep(h_ub, rank_ones, [budget], b, l_limit, rank, chunk)[0]


def exhaustive_search_sweep(h_ub, rank_ones, budgets, b: int,
                            l_limit: int = DEFAULT_SEARCH_BUDGET,
                            rank: int | None = None, chunk: int = 1 << 15) -> list:
    """
    :func:`exhaustive_search` for several link budgets at once.

    The channel spectrum of each candidate is computed once and scored under
    every budget. Returns one ``(PhaseConfig, se)`` per budget.
    """
    rank_ones = np.asarray(getattr(rank_ones, "r_hats", rank_ones), dtype=complex)
    h_ub = np.asarray(h_ub, dtype=complex)
    l_count, n, m = rank_ones.shape
    levels = 2 ** int(b)
    if b < 1:
        raise InvalidInputError("quantization bits must be >= 1")
    total = levels ** l_count
    if total > l_limit:
        raise SearchSpaceError(total, l_limit)
    r = min(n, m) if rank is None else rank
    lams = np.array([bud.p_dl / (r * bud.n0) for bud in budgets])
    grid = np.exp(2j * np.pi * np.arange(levels) / levels)
    flat = rank_ones.reshape(l_count, n * m)

    best_se = np.full(lams.size, -np.inf)
    best_index = np.zeros(lams.size, dtype=np.int64)
    # digits of the running index: element 0 is the most significant
    weights = levels ** np.arange(l_count - 1, -1, -1)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk))
        digits = (idx[:, None] // weights[None, :]) % levels
        h = (h_ub.reshape(1, -1) + grid[digits] @ flat).reshape(-1, n, m)
        # squared singular values from the smaller Gram matrix
        gram = h.conj().transpose(0, 2, 1) @ h if m <= n else h @ h.conj().transpose(0, 2, 1)
        s2 = np.clip(np.linalg.eigvalsh(gram), 0.0, None)
        se = np.log1p(lams[:, None, None] * s2[None]).sum(axis=2) / np.log(2.0)
        j = np.argmax(se, axis=1)
        chunk_best = se[np.arange(lams.size), j]
        better = chunk_best > best_se
        best_se[better] = chunk_best[better]
        best_index[better] = idx[j[better]]
    out = []
    for se_k, index in zip(best_se, best_index):
        digits = (int(index) // weights) % levels
        out.append((PhaseConfig.all_on(2 * np.pi * digits / levels, int(b)), float(se_k)))
    return out


def effective_spectral_efficiency(true_channels: ChannelSet, phase: PhaseConfig,
                                  w_hat, r_hat: int, budget: LinkBudget,
                                  gamma: int, tau_total: int) -> SEReport:
    """
    Rate on the true channel with beamformer ``w_hat`` built from estimates,
    scaled by the data fraction ``(gamma - tau) / gamma`` of the block.
    """
    if gamma < 1:
        raise InvalidInputError("coherence length must be >= 1")
    h_true = total_channel(true_channels.h_ub, true_channels.rank_ones, phase)
    w_hat = np.asarray(w_hat, dtype=complex)
    if w_hat.ndim == 1:
        w_hat = w_hat[:, None]
    se = capacity_log_det(w_hat.conj().T @ h_true, budget.p_dl / (r_hat * budget.n0))
    prelog = max(0.0, (gamma - tau_total) / gamma)
    return SEReport(se, prelog * se if prelog > 0 else 0.0, tau_total, gamma)


def complexity_estimate(technique: str, n: int, m: int, l: int, b: int = 0,
                        i: int = 0, i_init: int = 0, i_outer: int = 0) -> int:
    """Scalar multiplication counts (proportionality constants dropped)."""
    if technique == "algorithm-ref4":
        return i_init * l * m * n + i_outer * l * (4 * m * m * n + 3 * m**3)
    if technique == "proposed":
        return i * l * (3 * m * m * n + 2 * m**3)
    if technique == "exhaustive":
        return 2 ** (l * b) * (l * m * n)
    raise InvalidInputError(f"unknown technique {technique!r}")
