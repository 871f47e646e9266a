"""
UPA array responses, Rician link synthesis and the rank-one cascade.

The cascaded UE-IRS-BS channel ``H_IB @ diag(beta * exp(1j*phi)) @ H_UI``
is carried as a stack of rank-one matrices ``R[l] = H_IB[:, l] H_UI[l, :]``
(shape ``(L, N, M)``), so any reflection setting is a weighted sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "ArrayGeometry",
    "LinkBudget",
    "RicianLinkParams",
    "PathAngles",
    "ScenarioLinks",
    "PAPER_LINKS",
    "PhaseConfig",
    "ChannelSet",
    "db_to_linear",
    "dbm_to_watts",
    "upa_response",
    "path_loss",
    "draw_rician",
    "decompose_rank_ones",
    "total_channel",
    "draw_scenario",
    "link_streams",
]

# stream ids appended to the trial seed; UB/IB/UI offsets are fixed so
# every estimator in one trial sees the same channel
STREAM_UB, STREAM_IB, STREAM_UI, STREAM_DIST = 0, 1, 2, 3

THETA_RANGE = (-np.pi / 3, np.pi / 3)
PSI_RANGE = (-np.pi / 2, np.pi / 2)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class ArrayGeometry:
    """UPA sizes (vertical x horizontal) at the BS, UE and IRS."""

    n_v: int
    n_h: int
    m_v: int
    m_h: int
    l_v: int
    l_h: int

    def __post_init__(self):
        for name in ("n_v", "n_h", "m_v", "m_h", "l_v", "l_h"):
            if int(getattr(self, name)) < 1:
                raise InvalidInputError(f"{name} must be >= 1")

    @property
    def n(self) -> int:
        return self.n_v * self.n_h

    @property
    def m(self) -> int:
        return self.m_v * self.m_h

    @property
    def l(self) -> int:  # noqa: E743
        return self.l_v * self.l_h

    @property
    def bs(self) -> tuple[int, int]:
        return (self.n_v, self.n_h)

    @property
    def ue(self) -> tuple[int, int]:
        return (self.m_v, self.m_h)

    @property
    def irs(self) -> tuple[int, int]:
        return (self.l_v, self.l_h)


@dataclass(frozen=True)
class LinkBudget:
    """Powers and noise in linear watts; ``mu0`` linear path gain at ``d0`` metres."""

    p_ul: float
    p_dl: float
    n0: float = dbm_to_watts(-89.0)
    mu0: float = db_to_linear(-30.0)
    d0: float = 1.0

    def __post_init__(self):
        for name in ("p_ul", "p_dl", "mu0", "d0"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be strictly positive")
        # n0 = 0 is allowed only as a noiseless-training override
        if self.n0 < 0:
            raise InvalidInputError("n0 must be non-negative")

    @classmethod
    def from_dbm(cls, p_dl_dbm: float, p_ul_dbm: float | None = None,
                 noise_dbm: float = -89.0) -> "LinkBudget":
        p_ul_dbm = p_dl_dbm if p_ul_dbm is None else p_ul_dbm
        return cls(p_ul=dbm_to_watts(p_ul_dbm), p_dl=dbm_to_watts(p_dl_dbm),
                   n0=dbm_to_watts(noise_dbm))


@dataclass(frozen=True)
class RicianLinkParams:
    k_factor: float
    n_paths: int
    path_loss_exp: float
    distance: float

    def __post_init__(self):
        if self.k_factor < 0 or self.n_paths < 0 or not self.distance > 0:
            raise InvalidInputError(f"invalid Rician link parameters {self}")


@dataclass(frozen=True)
class PathAngles:
    """Spatial frequencies of one path at the receive and transmit arrays."""

    nu_rx: float
    xi_rx: float
    nu_tx: float
    xi_tx: float


@dataclass(frozen=True)
class LinkModel:
    k_db: float
    n_paths: int
    path_loss_exp: float


@dataclass(frozen=True)
class ScenarioLinks:
    """Per-link fading statistics and distance ranges for scenario draws."""

    ub: LinkModel = LinkModel(3.0, 7, 4.5)
    ib: LinkModel = LinkModel(5.0, 4, 2.5)
    ui: LinkModel = LinkModel(5.0, 4, 2.2)
    d_ui_range: tuple[float, float] = (5.0, 10.0)
    d_ib_range: tuple[float, float] = (90.0, 100.0)


PAPER_LINKS = ScenarioLinks()


@dataclass(frozen=True)
class PhaseConfig:
    """On/off magnitudes and phase shifts of the IRS elements."""

    magnitudes: np.ndarray
    phases: np.ndarray
    quant_bits: int | None = None

    def __post_init__(self):
        mags = np.asarray(self.magnitudes, dtype=float)
        phases = np.mod(np.asarray(self.phases, dtype=float), 2 * np.pi)
        if mags.shape != phases.shape or mags.ndim != 1:
            raise InvalidInputError("magnitudes and phases must be equal-length vectors")
        if not np.all((mags == 0) | (mags == 1)):
            raise InvalidInputError("magnitudes must be 0 or 1")
        object.__setattr__(self, "magnitudes", mags)
        object.__setattr__(self, "phases", phases)

    @classmethod
    def all_on(cls, phases, quant_bits: int | None = None) -> "PhaseConfig":
        phases = np.asarray(phases, dtype=float)
        return cls(np.ones(phases.shape), phases, quant_bits)

    @classmethod
    def single(cls, l: int, index: int, phase: float = 0.0) -> "PhaseConfig":
        mags = np.zeros(l)
        mags[index] = 1.0
        phases = np.zeros(l)
        phases[index] = phase
        return cls(mags, phases)

    @property
    def coefficients(self) -> np.ndarray:
        return self.magnitudes * np.exp(1j * self.phases)

    def __len__(self) -> int:
        return self.phases.size


@dataclass
class ChannelSet:
    """One channel realization plus everything needed to reproduce it."""

    h_ub: np.ndarray
    h_ib: np.ndarray
    h_ui: np.ndarray
    rank_ones: np.ndarray
    geometry: ArrayGeometry
    budget: LinkBudget | None = None
    distances: dict = field(default_factory=dict)
    los_angles: dict = field(default_factory=dict)

    def total(self, phase: PhaseConfig) -> np.ndarray:
        return total_channel(self.h_ub, self.rank_ones, phase)

    def to_dict(self) -> dict:
        def cplx(a):
            return {"re": np.real(a).tolist(), "im": np.imag(a).tolist()}

        return {
            "geometry": self.geometry.__dict__,
            "distances": self.distances,
            "los_angles": {k: v.__dict__ for k, v in self.los_angles.items()},
            "h_ub": cplx(self.h_ub),
            "h_ib": cplx(self.h_ib),
            "h_ui": cplx(self.h_ui),
        }


def upa_response(nu: float, xi: float, dims: tuple[int, int]) -> np.ndarray:
    """Unit-norm UPA steering vector, vertical ramp ``kron`` horizontal ramp."""
    d_v, d_h = dims
    a_v = np.exp(1j * nu * np.arange(d_v))
    a_h = np.exp(1j * xi * np.arange(d_h))
    return np.kron(a_v, a_h) / np.sqrt(d_v * d_h)


def path_loss(d: float, eta: float, budget: LinkBudget) -> float:
    """Linear power gain ``mu0 * (d / d0) ** -eta``."""
    if not d > 0:
        raise InvalidInputError(f"distance must be positive, got {d}")
    return budget.mu0 * (d / budget.d0) ** (-eta)


def _draw_frequencies(rng: np.random.Generator) -> tuple[float, float]:
    theta = rng.uniform(*THETA_RANGE)
    psi = rng.uniform(*PSI_RANGE)
    return np.pi * np.sin(theta), np.pi * np.sin(psi) * np.cos(theta)


def _complex_normal(rng: np.random.Generator, shape=None):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def draw_rician(params: RicianLinkParams, tx_dims: tuple[int, int],
                rx_dims: tuple[int, int], budget: LinkBudget,
                rng: np.random.Generator) -> tuple[np.ndarray, PathAngles]:
    """
    Draw one Rician MIMO link of shape ``(prod(rx_dims), prod(tx_dims))``.

    One LoS path plus ``params.n_paths`` NLoS paths; path gains are i.i.d.
    CN(0, 1). The draw order per path is (rx angles, tx angles, gain).

    Returns
    -------
    h : ndarray
        The complete link matrix (path loss and array gain included).
    los : PathAngles
        Spatial frequencies of the LoS path.
    """
    n_rx = rx_dims[0] * rx_dims[1]
    n_tx = tx_dims[0] * tx_dims[1]
    k = params.k_factor

    def path():
        nu_r, xi_r = _draw_frequencies(rng)
        nu_t, xi_t = _draw_frequencies(rng)
        alpha = _complex_normal(rng)
        outer = np.outer(upa_response(nu_r, xi_r, rx_dims),
                         upa_response(nu_t, xi_t, tx_dims).conj())
        return alpha * outer, PathAngles(nu_r, xi_r, nu_t, xi_t)

    los_term, los = path()
    h = np.sqrt(k) * los_term
    if params.n_paths > 0:
        nlos = sum(path()[0] for _ in range(params.n_paths))
        h = h + nlos / np.sqrt(params.n_paths)
    gain = path_loss(params.distance, params.path_loss_exp, budget)
    h = np.sqrt(gain) * np.sqrt(n_rx * n_tx / (1.0 + k)) * h
    return h, los


def decompose_rank_ones(h_ib, h_ui) -> np.ndarray:
    """Stack of ``R[l] = outer(H_IB[:, l], H_UI[l, :])``, shape ``(L, N, M)``."""
    h_ib = np.asarray(h_ib, dtype=complex)
    h_ui = np.asarray(h_ui, dtype=complex)
    if h_ib.ndim != 2 or h_ui.ndim != 2 or h_ib.shape[1] != h_ui.shape[0]:
        raise InvalidInputError(
            f"H_IB {h_ib.shape} and H_UI {h_ui.shape} do not share the IRS dimension"
        )
    return np.einsum("nl,lm->lnm", h_ib, h_ui)


def total_channel(h_ub, rank_ones, phase: PhaseConfig) -> np.ndarray:
    """``H_UB + sum_l beta_l exp(j phi_l) R_l``."""
    rank_ones = np.asarray(rank_ones)
    if len(phase) != rank_ones.shape[0]:
        raise InvalidInputError(
            f"phase config has {len(phase)} elements, channel has {rank_ones.shape[0]}"
        )
    return np.asarray(h_ub) + np.tensordot(phase.coefficients, rank_ones, axes=1)


def link_streams(seed) -> dict[str, np.random.Generator]:
    """Independent generators for the three links and the distance draw."""
    base = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    ids = {"ub": STREAM_UB, "ib": STREAM_IB, "ui": STREAM_UI, "dist": STREAM_DIST}
    return {
        name: np.random.default_rng(
            np.random.SeedSequence(base.entropy, spawn_key=(*base.spawn_key, sid))
        )
        for name, sid in ids.items()
    }


def draw_scenario(geometry: ArrayGeometry, budget: LinkBudget, seed,
                  links: ScenarioLinks = PAPER_LINKS) -> ChannelSet:
    """
    Draw distances and the three Rician links of one trial.

    ``seed`` is an int or ``SeedSequence``; the links use fixed sub-streams of
    it, so the same seed always yields the same ``ChannelSet``.
    """
    rngs = link_streams(seed)
    d_ui = rngs["dist"].uniform(*links.d_ui_range)
    d_ib = rngs["dist"].uniform(*links.d_ib_range)
    d_ub = rngs["dist"].uniform(d_ib - d_ui, d_ib + d_ui)

    def link(model: LinkModel, d: float):
        return RicianLinkParams(db_to_linear(model.k_db), model.n_paths,
                                model.path_loss_exp, d)

    h_ub, los_ub = draw_rician(link(links.ub, d_ub), geometry.ue, geometry.bs,
                               budget, rngs["ub"])
    h_ib, los_ib = draw_rician(link(links.ib, d_ib), geometry.irs, geometry.bs,
                               budget, rngs["ib"])
    h_ui, los_ui = draw_rician(link(links.ui, d_ui), geometry.ue, geometry.irs,
                               budget, rngs["ui"])
    return ChannelSet(
        h_ub=h_ub, h_ib=h_ib, h_ui=h_ui,
        rank_ones=decompose_rank_ones(h_ib, h_ui),
        geometry=geometry, budget=budget,
        distances={"ui": d_ui, "ib": d_ib, "ub": d_ub},
        los_angles={"ub": los_ub, "ib": los_ib, "ui": los_ui},
    )
