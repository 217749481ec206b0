# Purpose: load the experiment configuration (config.yaml or a JSON
# document) into one frozen dataclass per command and validate every
# numeric parameter before any computation starts.
#

import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import ClassVar, Optional

import yaml

from lab_errors import ConfigError

logger = logging.getLogger(__name__)

global_cfg_file = "config.yaml"

FORMATS = ("csv", "json")
POSITIVITY_CASES = ("model", "diagonal", "complex", "negative", "jordan")


def parse_config_file(path=None):
    path = path or global_cfg_file
    try:
        with open(path) as f:
            config = yaml.load(f, Loader=yaml.FullLoader)
    except FileNotFoundError:
        raise ConfigError("<file>", f"configuration file {path} not found")
    except yaml.YAMLError as e:
        raise ConfigError("<file>", f"cannot parse {path}: {e}")
    if config is None:
        config = {}
    if not isinstance(config, dict):
        raise ConfigError("<root>", "configuration must be a mapping")
    return config


def is_power_of_two(n):
    return n > 0 and n & (n - 1) == 0


def _coerce(value, default, path):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(path, f"expected a list, got {value!r}")
        kind = type(default[0]) if default else None
        items = []
        for i, item in enumerate(value):
            items.append(_coerce(item, default[0], f"{path}[{i}]") if kind else item)
        return tuple(items)
    return value


def _build(cls, doc, path):
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(path, "expected a mapping")
    known = {f.name: f for f in dataclasses.fields(cls) if f.init}
    for key in doc:
        if key not in known:
            raise ConfigError(f"{path}.{key}" if path else key, "unknown key")
    values = {}
    for name, f in known.items():
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        if name in doc:
            sub = f"{path}.{name}" if path else name
            if dataclasses.is_dataclass(default):
                values[name] = _build(type(default), doc[name], sub)
            else:
                values[name] = _coerce(doc[name], default, sub)
    return cls(**values)


def _require(ok, path, message):
    if not ok:
        raise ConfigError(path, message)


@dataclass(frozen=True)
class ClassifyConfig:
    section: ClassVar[str] = "classify"
    tol_symp: float = 1e-10
    tol_unit: float = 1e-6
    tol_factor: float = 1e-8
    self_check_dims: tuple = (2, 4, 6)
    self_check_count: int = 100

    def __post_init__(self):
        _require(0 < self.tol_unit < 0.1, "classify.tol_unit", "must lie in (0, 0.1)")
        _require(self.tol_symp > 0, "classify.tol_symp", "must be positive")
        _require(self.tol_factor > 0, "classify.tol_factor", "must be positive")
        _require(all(d > 0 and d % 2 == 0 for d in self.self_check_dims), "classify.self_check_dims",
                 "dimensions must be positive and even")
        _require(self.self_check_count >= 0, "classify.self_check_count", "must be nonnegative")


@dataclass(frozen=True)
class ContractConfig:
    section: ClassVar[str] = "contract"
    lam: float = 1.0
    hbar_tilde: float = 0.2
    s: float = 0.3
    h_values: tuple = (0.01, 0.005, 0.0025, 0.00125)
    s_values: tuple = (0.0, 0.1, 0.2, 0.3, 0.4)
    L: float = 12.0
    N: int = 1024
    width: float = 1.0
    gap_width: float = 0.25
    refine: bool = False

    def __post_init__(self):
        _require(self.lam >= 0, "contract.lam", "must be nonnegative")
        _require(0 < self.hbar_tilde <= 1, "contract.hbar_tilde", "must lie in (0, 1]")
        _require(abs(self.s) <= 0.5, "contract.s", "|s| must not exceed 1/2")
        _require(len(self.h_values) > 0, "contract.h_values", "needs at least one value")
        for i, h in enumerate(self.h_values):
            _require(0 < h <= self.hbar_tilde, f"contract.h_values[{i}]", f"need 0 < h <= hbar_tilde = {self.hbar_tilde}")
        for i, s in enumerate(self.s_values):
            _require(abs(s) <= 0.5, f"contract.s_values[{i}]", "|s| must not exceed 1/2")
        _require(self.L > 0, "contract.L", "must be positive")
        _require(is_power_of_two(self.N), "contract.N", f"{self.N} is not a power of two")
        _require(self.width > 0, "contract.width", "must be positive")
        _require(self.gap_width > 0, "contract.gap_width", "must be positive")


@dataclass(frozen=True)
class LadderConfig:
    section: ClassVar[str] = "ladder"
    alpha: float = 1.0
    m_exponent: int = 2
    c0: float = 1.0
    n: int = 2
    h_values: tuple = (0.01, 0.001, 0.0001)
    certify_h: float = 0.001
    certify_count: Optional[int] = None
    L: float = 1.0
    N: int = 256
    nt: int = 64

    def __post_init__(self):
        _require(self.alpha > 0, "ladder.alpha", "must be positive")
        _require(self.m_exponent > 1, "ladder.m_exponent", "must exceed 1")
        _require(self.c0 >= 0, "ladder.c0", "must be nonnegative")
        _require(self.n >= 2, "ladder.n", "needs at least one transverse dimension")
        for i, h in enumerate(self.h_values):
            _require(0 < h < 1, f"ladder.h_values[{i}]", "must lie in (0, 1)")
        _require(0 < self.certify_h < 1, "ladder.certify_h", "must lie in (0, 1)")
        _require(self.certify_count is None or (isinstance(self.certify_count, int) and self.certify_count >= 0),
                 "ladder.certify_count", "must be a nonnegative integer or null for every entry")
        _require(self.L > 0, "ladder.L", "must be positive")
        _require(is_power_of_two(self.N), "ladder.N", f"{self.N} is not a power of two")
        _require(self.nt > 0 and self.nt % 2 == 0, "ladder.nt", "must be positive and even")


@dataclass(frozen=True)
class GeodesicConfig:
    section: ClassVar[str] = "geodesic"
    z0_values: tuple = (0.0, 0.5, -0.5)
    step: float = 1e-4
    perturbation: float = 1e-3
    periods: int = 1
    stride: int = 100
    bound: float = 10.0

    def __post_init__(self):
        for i, z0 in enumerate(self.z0_values):
            _require(z0 in (0.0, 0.5, -0.5), f"geodesic.z0_values[{i}]", "base orbits sit at z0 in {0, 1/2, -1/2}")
        _require(0 < self.step <= 0.01, "geodesic.step", "must lie in (0, 0.01]")
        _require(self.periods > 0, "geodesic.periods", "must be positive")
        _require(self.stride > 0, "geodesic.stride", "must be positive")
        _require(self.bound > 0, "geodesic.bound", "must be positive")


@dataclass(frozen=True)
class PositivityConfig:
    section: ClassVar[str] = "positivity"
    cases: tuple = POSITIVITY_CASES
    samples: int = 100000
    radius: float = 10.0
    sweep_max: float = 1000.0

    def __post_init__(self):
        for i, case in enumerate(self.cases):
            _require(case in POSITIVITY_CASES, f"positivity.cases[{i}]",
                     f"unknown case {case!r}, expected one of {', '.join(POSITIVITY_CASES)}")
        _require(self.samples > 0, "positivity.samples", "must be positive")
        _require(self.radius > 0, "positivity.radius", "must be positive")
        _require(self.sweep_max >= self.radius, "positivity.sweep_max", "must be at least the radius")


@dataclass(frozen=True)
class LabConfig:
    seed: int = 20231
    out: str = "results"
    format: str = "csv"
    jobs: int = 1
    classify: ClassifyConfig = field(default_factory=ClassifyConfig)
    contract: ContractConfig = field(default_factory=ContractConfig)
    ladder: LadderConfig = field(default_factory=LadderConfig)
    geodesic: GeodesicConfig = field(default_factory=GeodesicConfig)
    positivity: PositivityConfig = field(default_factory=PositivityConfig)

    def __post_init__(self):
        _require(0 <= self.seed < 2 ** 64, "seed", "must be an unsigned 64-bit integer")
        _require(self.format in FORMATS, "format", f"expected one of {', '.join(FORMATS)}")
        _require(self.jobs >= 1, "jobs", "must be at least 1")

    def as_dict(self):
        return dataclasses.asdict(self)

    def digest(self):
        canonical = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


def load_config(path=None, overrides=None):
    """
    Read the configuration file and apply command line overrides.

    overrides maps top-level keys (out, format, seed, jobs) to values; None
    entries are ignored.
    """
    doc = parse_config_file(path)
    for key, value in (overrides or {}).items():
        if value is not None:
            doc[key] = value
    config = _build(LabConfig, doc, "")
    logger.debug("configuration digest %s", config.digest())
    return config
