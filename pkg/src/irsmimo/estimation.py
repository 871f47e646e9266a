"""
Uplink training and estimation of the direct channel and the rank-one cascade.

Every estimator returns a :class:`RankOneSet` holding ``H_UB_hat``, the stack
of ``R_hat`` matrices and its training-length accounting. Training noise is
drawn from the generator the caller passes in, so estimators compared within
one trial can be given identical noise streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .channel import ChannelSet, LinkBudget, PhaseConfig, total_channel, upa_response
from .errors import DegenerateChannelError, DegenerateProjectionError, InvalidInputError
from .numerics import TOL, dft_matrix, svd

__all__ = [
    "PhaseConfig",
    "RankOneSet",
    "DirectEstimate",
    "SeromPlan",
    "SpacEstimate",
    "simulate_uplink_block",
    "estimate_direct",
    "cancel_direct",
    "obo_estimate",
    "coobo_estimate",
    "spac_index_set",
    "spac_estimate",
    "build_serom_plan",
    "serom_estimate",
    "all_zero_baseline",
    "training_length",
]


@dataclass
class RankOneSet:
    h_ub_hat: np.ndarray
    r_hats: np.ndarray
    training_len_direct: int
    training_len_cascade: int
    method: str
    diagnostics: dict = field(default_factory=dict, repr=False)

    @property
    def tau_total(self) -> int:
        return self.training_len_direct + self.training_len_cascade


@dataclass
class DirectEstimate:
    """``H_UB_hat`` with the training noise that produced it."""

    h_ub_hat: np.ndarray
    tau: int
    noise: np.ndarray

    @classmethod
    def perfect(cls, channels: ChannelSet) -> "DirectEstimate":
        n, m = channels.h_ub.shape
        return cls(channels.h_ub.copy(), m, np.zeros((n, m), dtype=complex))


@dataclass(frozen=True)
class SeromPlan:
    q: int
    omega: np.ndarray
    norm_factor: float
    quant_bits: int | None = None

    @property
    def l(self) -> int:  # noqa: E743
        return self.omega.shape[1]

    @property
    def gram(self) -> np.ndarray:
        return self.omega.conj().T @ self.omega


@dataclass(frozen=True)
class SpacEstimate:
    nu_ib_rx_hat: float
    xi_ib_rx_hat: float
    nu_ui_tx_hat: float
    xi_ui_tx_hat: float
    nu_irs_hat: float
    xi_irs_hat: float
    gamma_irs_hat: complex
    c_hats: dict


def training_length(method: str, geometry, q: int | None = None) -> int:
    """Cascade training length ``tau_c`` of ``method`` (slots)."""
    m, l = geometry.m, geometry.l
    table = {
        "obo": l * m,
        "coobo": 2 * l,
        "spac": (geometry.l_v + geometry.l_h - 1) * m,
        "all-zero": 0,
    }
    if method == "serom":
        if q is None:
            raise InvalidInputError("SEROM training length needs Q")
        return q * m
    try:
        return table[method]
    except KeyError:
        raise InvalidInputError(f"unknown estimator {method!r}") from None


def _noise(rng: np.random.Generator, shape, n0: float) -> np.ndarray:
    if n0 == 0:
        return np.zeros(shape, dtype=complex)
    return np.sqrt(n0 / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def simulate_uplink_block(h_tot_per_slot: Callable[[int], np.ndarray] | np.ndarray,
                          beamformers, power: float, n0: float,
                          rng: np.random.Generator) -> np.ndarray:
    """
    Received pilots ``y[t] = sqrt(P) H_tot[t] f[t] + n[t]``, stacked as columns.

    ``h_tot_per_slot`` is a callable ``t -> H_tot[t]`` or a fixed matrix;
    ``beamformers`` is an ``M x T`` matrix (or a sequence of vectors) whose
    columns must be unit norm.
    """
    f = np.asarray(beamformers, dtype=complex)
    if isinstance(beamformers, (list, tuple)):
        f = np.stack([np.asarray(b, dtype=complex) for b in beamformers], axis=1)
    if f.ndim == 1:
        f = f[:, None]
    norms = np.linalg.norm(f, axis=0)
    if np.any(np.abs(norms - 1.0) > TOL.unit_norm):
        raise InvalidInputError("training beamformers must have unit norm")
    if callable(h_tot_per_slot):
        y = np.stack([h_tot_per_slot(t) @ f[:, t] for t in range(f.shape[1])], axis=1)
    else:
        y = np.asarray(h_tot_per_slot) @ f
    y = np.sqrt(power) * y
    return y + _noise(rng, y.shape, n0)


def estimate_direct(channels: ChannelSet, budget: LinkBudget,
                    rng: np.random.Generator) -> DirectEstimate:
    """IRS off, ``M`` DFT pilots; ``H_UB_hat = Y F^H / sqrt(P_UL)``."""
    m = channels.h_ub.shape[1]
    f = dft_matrix(m)
    y = simulate_uplink_block(channels.h_ub, f, budget.p_ul, budget.n0, rng)
    noise = y - np.sqrt(budget.p_ul) * channels.h_ub @ f
    return DirectEstimate(y @ f.conj().T / np.sqrt(budget.p_ul), m, noise)


def cancel_direct(y, h_ub_hat, f, power: float) -> np.ndarray:
    """Remove the estimated direct-link contribution: ``y - sqrt(P) H_UB_hat f``."""
    return np.asarray(y) - np.sqrt(power) * np.asarray(h_ub_hat) @ np.asarray(f)


def _obo_rank_ones(channels: ChannelSet, budget: LinkBudget, rng, direct: DirectEstimate,
                   indices: Sequence[int]) -> np.ndarray:
    # phi_l = 0 during training, so the e^{-j phi} factor is 1
    n, m = channels.h_ub.shape
    f = dft_matrix(m)
    out = np.empty((len(indices), n, m), dtype=complex)
    for i, l in enumerate(indices):
        h = channels.h_ub + channels.rank_ones[l]
        y = simulate_uplink_block(h, f, budget.p_ul, budget.n0, rng)
        y_tilde = cancel_direct(y, direct.h_ub_hat, f, budget.p_ul)
        out[i] = y_tilde @ f.conj().T / np.sqrt(budget.p_ul)
    return out


def obo_estimate(channels: ChannelSet, budget: LinkBudget, rng: np.random.Generator,
                 direct: DirectEstimate) -> RankOneSet:
    """One-by-one estimation: element ``l`` alone on for ``M`` pilot slots."""
    l_count, _, m = channels.rank_ones.shape
    r_hats = _obo_rank_ones(channels, budget, rng, direct, range(l_count))
    return RankOneSet(direct.h_ub_hat, r_hats, direct.tau, l_count * m, "obo")


def coobo_estimate(channels: ChannelSet, budget: LinkBudget, rng: np.random.Generator,
                   direct: DirectEstimate) -> RankOneSet:
    """
    Cooperative one-by-one estimation with ideal analog feedback.

    Per element: one uplink pilot through ``f`` and one downlink pilot through
    ``w`` (both normalized all-ones vectors), combined as
    ``y_ul y_dl^H / ((sqrt(P_DL) w)^H y_ul)``. Noise draws are returned in
    ``diagnostics`` for offline checks.
    """
    l_count, n, m = channels.rank_ones.shape
    f = np.ones(m, dtype=complex) / np.sqrt(m)
    w = np.ones(n, dtype=complex) / np.sqrt(n)
    sp_ul, sp_dl = np.sqrt(budget.p_ul), np.sqrt(budget.p_dl)
    r_hats = np.empty((l_count, n, m), dtype=complex)
    n_ul = np.empty((l_count, n), dtype=complex)
    n_dl = np.empty((l_count, m), dtype=complex)
    for l in range(l_count):
        h = channels.h_ub + channels.rank_ones[l]
        n_ul[l] = _noise(rng, n, budget.n0)
        y_ul = sp_ul * h @ f + n_ul[l]
        n_dl[l] = _noise(rng, m, budget.n0)
        y_dl = sp_dl * h.conj().T @ w + n_dl[l]
        yt_ul = y_ul - sp_ul * direct.h_ub_hat @ f
        yt_dl = y_dl - sp_dl * direct.h_ub_hat.conj().T @ w
        denom = sp_dl * np.vdot(w, yt_ul)
        if abs(denom) < 1e-14 * np.linalg.norm(yt_ul) * sp_dl or denom == 0:
            raise DegenerateProjectionError(
                f"Co-OBO projection vanished for element {l}"
            )
        r_hats[l] = np.outer(yt_ul, yt_dl.conj()) / denom
    return RankOneSet(direct.h_ub_hat, r_hats, direct.tau, 2 * l_count, "coobo",
                      diagnostics={"f": f, "w": w, "noise_ul": n_ul, "noise_dl": n_dl})


def spac_index_set(l_v: int, l_h: int) -> tuple[list[int], list[int]]:
    """First IRS column and first IRS row (0-based, row-major numbering)."""
    column = [v * l_h for v in range(l_v)]
    row = list(range(l_h))
    return column, row


def _avg_ramp(vectors: Sequence[np.ndarray], dims: tuple[int, int]) -> tuple[float, float]:
    """Average phase step along the vertical and horizontal axes of UPA vectors."""
    d_v, d_h = dims
    nu_steps, xi_steps = [], []
    for vec in vectors:
        grid = vec.reshape(d_v, d_h)
        if d_v > 1:
            nu_steps.append(np.angle(grid[1:, :] / grid[:-1, :]).ravel())
        if d_h > 1:
            xi_steps.append(np.angle(grid[:, 1:] / grid[:, :-1]).ravel())
    nu = float(np.mean(np.concatenate(nu_steps))) if nu_steps else 0.0
    xi = float(np.mean(np.concatenate(xi_steps))) if xi_steps else 0.0
    return nu, xi


def spac_estimate(channels: ChannelSet, budget: LinkBudget, rng: np.random.Generator,
                  direct: DirectEstimate) -> tuple[RankOneSet, SpacEstimate]:
    """
    Single-path approximated channel estimation.

    OBO runs only on the first IRS column and row. The BS/UE spatial
    frequencies come from the dominant singular vectors of those estimates,
    the effective IRS frequencies from phase steps of the projected scalars
    ``c_l``, and every other ``R_l`` is rebuilt from the single-path form.
    """
    geo = channels.geometry
    l_v, l_h = geo.irs
    if l_v < 2 or l_h < 2:
        raise InvalidInputError("SPAC needs at least two IRS elements per axis")
    column, row = spac_index_set(l_v, l_h)
    s_irs = sorted(set(column) | set(row))
    observed = dict(zip(s_irs, _obo_rank_ones(channels, budget, rng, direct, s_irs)))

    left, right = [], []
    for l in s_irs:
        dec = svd(observed[l])
        u, v = dec.U[:, 0], dec.V[:, 0]
        if dec.S[0] == 0 or np.any(u == 0) or np.any(v == 0):
            raise DegenerateChannelError(f"rank-one estimate {l} has a zero singular-vector entry")
        left.append(u)
        right.append(v)
    nu_bs, xi_bs = _avg_ramp(left, geo.bs)
    nu_ue, xi_ue = _avg_ramp(right, geo.ue)
    a_bs = upa_response(nu_bs, xi_bs, geo.bs)
    a_ue = upa_response(nu_ue, xi_ue, geo.ue)

    c_hat = {l: complex(a_bs.conj() @ observed[l] @ a_ue) for l in s_irs}
    if any(c == 0 for c in c_hat.values()):
        raise DegenerateChannelError("projected SPAC observation is zero")
    nu_irs = float(np.mean([np.angle(c_hat[b] / c_hat[a]) for a, b in zip(column, column[1:])]))
    xi_irs = float(np.mean([np.angle(c_hat[b] / c_hat[a]) for a, b in zip(row, row[1:])]))

    l_count = geo.l
    a_irs = upa_response(nu_irs, xi_irs, geo.irs)
    gamma = complex(np.mean([c_hat[l] / (a_irs[l] / np.sqrt(l_count)) for l in s_irs]))

    base = (gamma / np.sqrt(l_count)) * np.outer(a_bs, a_ue.conj())
    r_hats = a_irs[:, None, None] * base[None, :, :]
    for l in s_irs:
        r_hats[l] = observed[l]

    tau_c = len(s_irs) * geo.m
    est = SpacEstimate(nu_bs, xi_bs, nu_ue, xi_ue, nu_irs, xi_irs, gamma, c_hat)
    rs = RankOneSet(direct.h_ub_hat, r_hats, direct.tau, tau_c, "spac",
                    diagnostics={"spac": est})
    return rs, est


def _quantize(phases: np.ndarray, bits: int | None) -> np.ndarray:
    if bits is None:
        return np.mod(phases, 2 * np.pi)
    levels = 2 ** int(bits)
    step = 2 * np.pi / levels
    return np.mod(np.round(np.mod(phases, 2 * np.pi) / step), levels) * step


def build_serom_plan(q: int, l: int, quant_bits: int | None = None) -> SeromPlan:
    """
    IRS training matrix ``Omega`` (``Q x L``, unit modulus) and its factor ``A``.

    ``Q >= L`` uses the first ``L`` columns of the ``Q``-point DFT; ``Q < L``
    takes ``Q`` evenly spaced rows of the ``L``-point DFT. Phases are quantized
    to ``quant_bits`` before ``A`` is computed from the resulting Gramian.
    """
    if q < 1 or l < 1:
        raise InvalidInputError("Q and L must be positive")
    size = max(q, l)
    if q >= l:
        rows, cols = np.arange(q), np.arange(l)
    else:
        rows, cols = (np.arange(q) * size) // q, np.arange(l)
    phases = -2 * np.pi * np.outer(rows, cols) / size
    omega = np.exp(1j * _quantize(phases, quant_bits))
    gram = omega.conj().T @ omega
    a = float(np.real(np.trace(gram)) / (q * np.sum(np.abs(gram.sum(axis=1)))))
    return SeromPlan(q, omega, a, quant_bits)


def serom_estimate(channels: ChannelSet, budget: LinkBudget, plan: SeromPlan,
                   rng: np.random.Generator, direct: DirectEstimate) -> RankOneSet:
    """Selective emphasis on rank-one matrices: ``Q`` all-on periods of ``M`` pilots."""
    l_count, n, m = channels.rank_ones.shape
    if plan.l != l_count:
        raise InvalidInputError(f"plan is for L={plan.l}, channel has L={l_count}")
    f = dft_matrix(m)
    blocks = np.empty((plan.q, n, m), dtype=complex)
    for q in range(plan.q):
        h = channels.h_ub + np.tensordot(plan.omega[q], channels.rank_ones, axes=1)
        y = simulate_uplink_block(h, f, budget.p_ul, budget.n0, rng)
        y_tilde = cancel_direct(y, direct.h_ub_hat, f, budget.p_ul)
        blocks[q] = y_tilde @ f.conj().T
    r_hats = (plan.norm_factor / np.sqrt(budget.p_ul)) * np.tensordot(
        plan.omega.conj().T, blocks, axes=1)
    return RankOneSet(direct.h_ub_hat, r_hats, direct.tau, plan.q * m, "serom")


def all_zero_baseline(channels: ChannelSet, budget: LinkBudget,
                      rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Estimate only ``H_UB + H_IB H_UI`` (all phases zero) from ``M`` DFT pilots."""
    m = channels.h_ub.shape[1]
    f = dft_matrix(m)
    l_count = channels.rank_ones.shape[0]
    h = total_channel(channels.h_ub, channels.rank_ones, PhaseConfig.all_on(np.zeros(l_count)))
    y = simulate_uplink_block(h, f, budget.p_ul, budget.n0, rng)
    return y @ f.conj().T / np.sqrt(budget.p_ul), m
