"""
Run configuration: a single validated, serializable record of every knob.

Config files are YAML (or JSON, which is a YAML subset). Keys mirror the
:class:`LinkConfig` field names; fibre parameters live under ``fibre``.
Unknown keys are rejected.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import re

import yaml

from .framing import FrameGeometry
from .units import ConfigurationError, FibreParams



class _Loader(yaml.SafeLoader):
    """Safe loader that also reads exponent floats without a dot (``1e-12``)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^[-+]?(?:[0-9][0-9_]*)(?:\.[0-9_]*)?[eE][-+]?[0-9]+$
                   |^[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?$
                   |^[-+]?\.[0-9_]+(?:[eE][-+]?[0-9]+)?$
                   |^[-+]?\.(?:inf|Inf|INF)$|^\.(?:nan|NaN|NAN)$""", re.X),
    list("-+0123456789."),
)


def parse_value(text: str):
    """Parse a scalar or list written in YAML syntax."""
    return yaml.load(text, Loader=_Loader)


MODES = ("B", "QC")
CHANNELS = ("link", "b2b", "none")
SCHEMES = ("split", "exact")

# Guard interval quoted for the 12 x 80 km reference system; the dispersion
# formula gives about 3.64 ns for the same parameters.
REFERENCE_GUARD_S = 3.75e-9


@dataclass(frozen=True)
class LinkConfig:
    fibre: FibreParams = field(default_factory=FibreParams)
    n_carriers: int = 64
    oversampling: int = 8
    eta: float = 4.0
    W_hz: float = 56e9
    guard_s: float | None = None
    mode: str = "B"
    power_dbm: float = -8.0
    channel: str = "link"
    noise: bool = True
    noise_bandwidth_hz: float | None = None
    n_bursts: int = 200
    seed: int = 0
    ssfm_step_km: float = 0.5
    rho: float = 0.5
    t_scale_s: float = 1e-12
    nft_scheme: str = "split"
    rx_upsample: int = 1
    a_oversample: int = 8
    calibrate: bool = True
    n_train: int = 50
    kappa_frames: int = 256

    def __post_init__(self):
        if isinstance(self.fibre, dict):
            object.__setattr__(self, "fibre", FibreParams(**self.fibre))
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}")
        if self.channel not in CHANNELS:
            raise ConfigurationError(f"channel must be one of {CHANNELS}")
        if self.nft_scheme not in SCHEMES:
            raise ConfigurationError(f"nft_scheme must be one of {SCHEMES}")
        if self.n_bursts < 1 or self.n_train < 0 or self.kappa_frames < 1:
            raise ConfigurationError("burst counts must be positive")
        if not 0 <= self.rho <= 1:
            raise ConfigurationError("rho must lie in [0, 1]")
        if not self.ssfm_step_km > 0 or not self.t_scale_s > 0:
            raise ConfigurationError("step size and time scale must be positive")
        if self.rx_upsample < 1 or self.a_oversample < 1:
            raise ConfigurationError("upsampling factors must be >= 1")
        if self.guard_s is not None and not self.guard_s > 0:
            raise ConfigurationError("guard_s must be positive")
        try:
            self.geometry
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc

    @property
    def geometry(self) -> FrameGeometry:
        return FrameGeometry(self.n_carriers, self.oversampling, self.eta, self.W_hz)

    def with_(self, **changes) -> "LinkConfig":
        fibre_keys = {f.name for f in fields(FibreParams)}
        fibre_changes = {k: changes.pop(k) for k in list(changes) if k in fibre_keys}
        if fibre_changes:
            changes["fibre"] = self.fibre.with_(**fibre_changes)
        unknown = set(changes) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "LinkConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        if "fibre" in data:
            data["fibre"] = FibreParams(**data["fibre"])
        return cls(**data)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]


PRESETS = {
    "desk": LinkConfig(),
    # long-running: 16800-point bursts
    "paper": LinkConfig(n_carriers=1050, eta=1.2, power_dbm=-8.0, guard_s=REFERENCE_GUARD_S,
                        n_bursts=20, n_train=20),
    "fig2": LinkConfig(n_carriers=64, eta=4.0, channel="b2b"),
    "fig4": LinkConfig(n_carriers=210, eta=2.0, guard_s=REFERENCE_GUARD_S, channel="link"),
}


def preset(name: str) -> LinkConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def load_config(path, base: LinkConfig | None = None) -> tuple[LinkConfig, dict]:
    """Read a YAML/JSON config. Returns the config and any ``sweep`` axes it declares."""
    raw = parse_value(Path(path).read_text()) or {}
    if not isinstance(raw, dict):
        raise ConfigurationError("config file must hold a mapping")
    axes = raw.pop("sweep", {}) or {}
    name = raw.pop("preset", None)
    start = preset(name) if name else (base or LinkConfig())
    data = start.to_dict()
    fibre = raw.pop("fibre", {}) or {}
    data["fibre"].update(fibre)
    unknown = set(raw) - set(data)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    data.update(raw)
    return LinkConfig.from_dict(data), axes


def save_config(config: LinkConfig, path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
