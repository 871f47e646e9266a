"""
Scenario configuration: named presets, INI files and JSON sidecars.

An INI file has the flat sections ``[geometry]``, ``[budget]``, ``[sweep]``,
``[estimators]`` and ``[output]``. Every key is optional; missing keys fall
back to the chosen base preset (``small`` unless ``[sweep] preset`` names
another one).
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from ..channel import ArrayGeometry
from ..errors import InvalidInputError

__all__ = [
    "ESTIMATORS",
    "ScenarioConfig",
    "PRESETS",
    "preset",
    "parse_range",
    "load_config",
]

ESTIMATORS = ("perfect", "all-zero", "obo", "coobo", "spac", "serom", "exhaustive")


@dataclass(frozen=True)
class ScenarioConfig:
    """
    Everything that determines a sweep's output.

    ``axis`` is ``"power"`` (sweep ``power_dbm`` at fixed ``gamma``) or
    ``"gamma"`` (sweep ``gamma_values`` at ``power_dbm[0]``). ``p_ul_dbm``
    of ``None`` trains at the downlink power.
    """

    name: str
    geometry: ArrayGeometry
    power_dbm: tuple[float, ...] = (0.0, 10.0, 20.0, 30.0, 40.0)
    gamma: int = 150
    quant_bits: int = 2
    serom_q: int = 5
    trials: int = 500
    master_seed: int = 2021
    estimators: tuple[str, ...] = ("perfect", "all-zero", "obo", "coobo", "spac", "serom")
    axis: str = "power"
    gamma_values: tuple[int, ...] = ()
    p_ul_dbm: float | None = None
    noise_dbm: float = -89.0
    training_noiseless: bool = False
    max_outer_iters: int = 20
    stop_threshold: float | None = None
    out_dir: str = "results"
    emit_plot_data: bool = False
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "power_dbm", tuple(float(p) for p in self.power_dbm))
        object.__setattr__(self, "gamma_values", tuple(int(g) for g in self.gamma_values))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if self.trials < 1:
            raise InvalidInputError("trials must be >= 1")
        if self.gamma < 1 or any(g < 1 for g in self.gamma_values):
            raise InvalidInputError("coherence length must be >= 1")
        if not self.power_dbm or not all(math.isfinite(p) for p in self.power_dbm):
            raise InvalidInputError("power sweep must be a nonempty list of finite values")
        if self.axis not in ("power", "gamma"):
            raise InvalidInputError(f"unknown sweep axis {self.axis!r}")
        if self.axis == "gamma" and not self.gamma_values:
            raise InvalidInputError("a coherence-length sweep needs gamma_values")
        unknown = [e for e in self.estimators if e not in ESTIMATORS]
        if unknown or not self.estimators:
            raise InvalidInputError(f"unknown estimators {unknown}; choose from {ESTIMATORS}")
        if self.serom_q < 1 or self.quant_bits < 1:
            raise InvalidInputError("serom_q and quant_bits must be >= 1")

    @property
    def axis_values(self) -> tuple[float, ...]:
        return self.power_dbm if self.axis == "power" else tuple(map(float, self.gamma_values))

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("extra")
        d["geometry"] = asdict(self.geometry)
        d["power_dbm"] = list(self.power_dbm)
        d["gamma_values"] = list(self.gamma_values)
        d["estimators"] = list(self.estimators)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = dict(d)
        d["geometry"] = ArrayGeometry(**d["geometry"])
        known = {f for f in cls.__dataclass_fields__ if f != "extra"}
        return cls(**{k: v for k, v in d.items() if k in known})


_SMALL = ArrayGeometry(n_v=2, n_h=4, m_v=2, m_h=2, l_v=2, l_h=4)
_LARGE = ArrayGeometry(n_v=4, n_h=8, m_v=4, m_h=4, l_v=8, l_h=16)

PRESETS: dict[str, ScenarioConfig] = {
    "small": ScenarioConfig("small", _SMALL, gamma=150, quant_bits=2, serom_q=5),
    "large": ScenarioConfig("large", _LARGE, gamma=2400, quant_bits=4, serom_q=23),
    "search": ScenarioConfig(
        "search", ArrayGeometry(2, 2, 1, 2, 3, 3), gamma=1, quant_bits=2, serom_q=5,
        estimators=("perfect", "exhaustive"),
    ),
    "coherence": ScenarioConfig(
        "coherence", _LARGE, power_dbm=(30.0,), gamma=2400, quant_bits=4, serom_q=23,
        axis="gamma", gamma_values=tuple(range(200, 3001, 200)),
    ),
}


def preset(name: str) -> ScenarioConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise InvalidInputError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def parse_range(text: str) -> tuple[float, ...]:
    """``"LO:HI:STEP"`` (inclusive of HI) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        try:
            lo, hi, step = (float(x) for x in text.split(":"))
        except ValueError:
            raise InvalidInputError(f"range must be LO:HI:STEP, got {text!r}") from None
        if step <= 0 or hi < lo:
            raise InvalidInputError(f"empty or invalid range {text!r}")
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return tuple(lo + k * step for k in range(count))
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise InvalidInputError(f"cannot parse value list {text!r}") from None


def _dims(text: str) -> tuple[int, int]:
    try:
        v, h = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise InvalidInputError(f"array dimensions must look like 2x4, got {text!r}") from None
    return v, h


def _from_ini(path: Path) -> ScenarioConfig:
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise InvalidInputError(f"cannot read config {path}: {exc}") from exc

    def get(section, key, default=None):
        return cp.get(section, key, fallback=default) if cp.has_section(section) else default

    base = preset(get("sweep", "preset", "small"))
    upd: dict = {"name": get("output", "name", base.name)}

    geo = base.geometry
    for key, (fv, fh) in (("bs", ("n_v", "n_h")), ("ue", ("m_v", "m_h")), ("irs", ("l_v", "l_h"))):
        value = get("geometry", key)
        if value:
            v, h = _dims(value)
            geo = replace(geo, **{fv: v, fh: h})
    upd["geometry"] = geo

    if get("budget", "power_dbm"):
        upd["power_dbm"] = parse_range(get("budget", "power_dbm"))
    if get("budget", "p_ul_dbm"):
        upd["p_ul_dbm"] = float(get("budget", "p_ul_dbm"))
    if get("budget", "noise_dbm"):
        upd["noise_dbm"] = float(get("budget", "noise_dbm"))
    if get("budget", "training_noiseless"):
        upd["training_noiseless"] = cp.getboolean("budget", "training_noiseless")

    ints = ("gamma", "quant_bits", "serom_q", "trials", "master_seed", "max_outer_iters")
    for key in ints:
        if get("sweep", key):
            upd[key] = int(get("sweep", key))
    if get("sweep", "seed"):
        upd["master_seed"] = int(get("sweep", "seed"))
    if get("sweep", "axis"):
        upd["axis"] = get("sweep", "axis").strip()
    if get("sweep", "gamma_values"):
        upd["gamma_values"] = tuple(int(g) for g in parse_range(get("sweep", "gamma_values")))
    if get("sweep", "stop_threshold"):
        upd["stop_threshold"] = float(get("sweep", "stop_threshold"))

    if get("estimators", "list"):
        upd["estimators"] = tuple(e.strip() for e in get("estimators", "list").split(",") if e.strip())

    if get("output", "dir"):
        upd["out_dir"] = get("output", "dir")
    if get("output", "plot_data"):
        upd["emit_plot_data"] = cp.getboolean("output", "plot_data")
    return replace(base, **upd)


def load_config(path) -> ScenarioConfig:
    """Read an INI config or a JSON sidecar written by :func:`emit_results`."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(path.read_text())
        except (OSError, ValueError) as exc:
            raise InvalidInputError(f"cannot read JSON config {path}: {exc}") from exc
        return ScenarioConfig.from_dict(data.get("config", data))
    return _from_ini(path)
