"""Channel estimation and phase design for IRS-assisted single-user MIMO links."""

from . import channel, errors, estimation, numerics, phase_design
from .channel import ArrayGeometry, ChannelSet, LinkBudget, PhaseConfig, draw_scenario
from .estimation import RankOneSet
from .phase_design import DesignConfig, RankPolicy, design_phases

__version__ = "0.1.0"

__all__ = [
    "channel",
    "errors",
    "estimation",
    "numerics",
    "phase_design",
    "ArrayGeometry",
    "ChannelSet",
    "LinkBudget",
    "PhaseConfig",
    "RankOneSet",
    "DesignConfig",
    "RankPolicy",
    "design_phases",
    "draw_scenario",
]
