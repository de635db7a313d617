"""Experiment configuration: YAML file + built-in profile + defaults.

Precedence, lowest first: dataclass defaults, the selected profile, the
config file, explicit overrides (e.g. ``--seed``). Unknown keys are errors.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from fskmv.channel import EPA, FLAT, TapProfile, max_timing_offset
from fskmv.geometry import CellConfig
from fskmv.learning.training import LinkConfig, TrainConfig
from fskmv.oac import fsk_symbols_needed, obda_symbols_needed
from fskmv.waveform import OfdmConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelSection:
    # "epa", "flat", or a mapping with delays_ns / powers_db
    profile: object = "epa"
    t_sync: float | None = None
    n_err: int = 3
    sync_errors: bool = False
    integer_offsets: bool = True


@dataclass(frozen=True)
class OacSection:
    es: float = 2.0
    randomize: bool = True
    tci_threshold: float = 0.2
    # parameter count used for resource-budget reports; None means the model's own q
    budget_q: int | None = None


@dataclass(frozen=True)
class DataSection:
    dim: int = 16
    n_classes: int = 10
    center_scale: float = 1.0
    noise_std: float = 1.0
    n_test_per_class: int = 200
    train_images: str | None = None
    train_labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None

    @property
    def uses_idx(self) -> bool:
        return self.train_images is not None


@dataclass(frozen=True)
class AnalysisSection:
    r_max_values: tuple = (20.0, 50.0, 100.0, 200.0, 500.0, 1000.0)
    alpha_eff_values: tuple = (0.0, 1.0, 2.0, 3.0, 4.0)
    snr_db_values: tuple = (0.0, 10.0, 20.0, 30.0)
    q_values: tuple = (0.0, 0.1, 0.3, 0.5)
    rounds_max: int = 1000
    gamma: int = 1
    l1_smoothness: float = 1.0
    sigma1: float = 1.0
    f0_gap: float = 1.0


@dataclass(frozen=True)
class DetectorSection:
    trials: int = 20_000
    k_plus_values: tuple = (25, 30, 40, 50)
    snr_db_values: tuple = (20.0,)
    alpha_eff_values: tuple = (0.0, 2.0)
    num_eds: int = 50


@dataclass(frozen=True)
class PmeprSection:
    n_symbols: int = 10_000
    threshold_start_db: float = 0.0
    threshold_stop_db: float = 30.0
    threshold_step_db: float = 0.25
    oversampling: int = 8
    correlation: float = 0.9


@dataclass(frozen=True)
class ExperimentConfig:
    cell: CellConfig
    ofdm: OfdmConfig
    channel: ChannelSection
    oac: OacSection
    train: TrainConfig
    data: DataSection
    analysis: AnalysisSection
    detector: DetectorSection
    pmepr: PmeprSection
    seed: int = 0
    out: str = "results"
    profile: str = "desk"
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def tap_profile(self) -> TapProfile:
        return _tap_profile(self.channel.profile)

    def link(self) -> LinkConfig:
        return LinkConfig(
            cell=self.cell,
            ofdm=self.ofdm,
            profile=self.tap_profile,
            t_sync=self.channel.t_sync,
            n_err=self.channel.n_err,
            sync_errors=self.channel.sync_errors,
            integer_offsets=self.channel.integer_offsets,
            tci_threshold=self.oac.tci_threshold,
            randomize=self.oac.randomize,
            es=self.oac.es,
        )

    def model_q(self, dim: int | None = None) -> int:
        """Parameter count of the configured model for inputs of size ``dim``."""
        d = self.data.dim if dim is None else dim
        c = self.data.n_classes
        if self.train.model == "linear":
            return c * d + c
        h = self.train.hidden
        return h * d + h + c * h + c

    def budget_q(self) -> int:
        return self.oac.budget_q if self.oac.budget_q is not None else self.model_q()

    def fsk_symbols(self) -> int:
        return fsk_symbols_needed(self.budget_q(), self.ofdm.m_active)

    def obda_symbols(self) -> int:
        return obda_symbols_needed(self.budget_q(), self.ofdm.m_active)

    def config_hash(self) -> str:
        """Digest of the resolved settings; the output directory is left out."""
        blob = json.dumps(self.raw, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def meta(self, command: str) -> str:
        return f"command={command} profile={self.profile} seed={self.seed} config_sha256={self.config_hash()}"


_SECTIONS = {
    "cell": CellConfig,
    "ofdm": OfdmConfig,
    "channel": ChannelSection,
    "oac": OacSection,
    "train": TrainConfig,
    "data": DataSection,
    "analysis": AnalysisSection,
    "detector": DetectorSection,
    "pmepr": PmeprSection,
}
_TOP_LEVEL = {"seed", "out"}

PROFILES: dict[str, dict] = {
    "desk": {
        "cell": {"num_eds": 10, "snr_db": 20.0},
        "ofdm": {"n_fft": 256, "n_cp": 32, "m_active": 120},
        "train": {"rounds": 200, "batch_size": 32, "learning_rate": 0.01},
    },
    "paper": {
        "cell": {"num_eds": 50, "r_min": 10.0, "r_max": 100.0, "r_ref": 10.0, "alpha": 4.0, "beta": 4.0,
                 "snr_db": 20.0},
        "ofdm": {"n_fft": 2048, "n_cp": 144, "m_active": 1200, "subcarrier_spacing": 15e3},
        "channel": {"profile": "epa", "t_sync": 55.6e-9, "n_err": 3},
        "oac": {"tci_threshold": 0.2, "budget_q": 123090},
        "train": {"rounds": 500, "batch_size": 64, "learning_rate": 0.01},
    },
}


def _tap_profile(spec) -> TapProfile:
    if isinstance(spec, TapProfile):
        return spec
    if isinstance(spec, str):
        named = {"epa": EPA, "flat": FLAT}
        if spec.lower() not in named:
            raise ConfigError(f"channel.profile: unknown profile {spec!r}; expected one of {sorted(named)}")
        return named[spec.lower()]
    if isinstance(spec, dict):
        try:
            return TapProfile(tuple(spec["delays_ns"]), tuple(spec["powers_db"]))
        except KeyError as exc:
            raise ConfigError(f"channel.profile: missing key {exc.args[0]}") from None
        except ValueError as exc:
            raise ConfigError(f"channel.profile: {exc}") from None
    raise ConfigError(f"channel.profile: cannot interpret {spec!r}")


def _merge(base: dict, update: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in (update or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key != "profile":
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _build_section(name: str, cls, values: dict):
    if values is None:
        values = {}
    if not isinstance(values, dict):
        raise ConfigError(f"{name}: expected a mapping")
    values = dict(values)
    if name == "cell" and "snr_db" in values:
        snr = values.pop("snr_db")
        if "noise_var" in values:
            raise ConfigError("cell: give either snr_db or noise_var, not both")
        values["noise_var"] = 10 ** (-float(snr) / 10)
    known = {f.name for f in fields(cls)}
    for key in values:
        if key not in known:
            raise ConfigError(f"{name}.{key}: unknown key")
    for key, value in values.items():
        if isinstance(value, list):
            values[key] = tuple(value)
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from None


def build_config(data: dict | None = None, profile: str = "desk", **overrides) -> ExperimentConfig:
    """Resolve a config mapping against a profile and defaults, then validate."""
    if profile not in PROFILES:
        raise ConfigError(f"profile: unknown profile {profile!r}; expected one of {sorted(PROFILES)}")
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping at top level")
    for key in data:
        if key not in _SECTIONS and key not in _TOP_LEVEL:
            raise ConfigError(f"{key}: unknown key")
    base = copy.deepcopy(PROFILES[profile])
    if isinstance(data.get("cell"), dict) and "noise_var" in data["cell"]:
        base.get("cell", {}).pop("snr_db", None)
    merged = _merge(base, data)
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    sections = {name: _build_section(name, cls, merged.get(name)) for name, cls in _SECTIONS.items()}
    try:
        seed = int(merged.get("seed", 0))
    except (TypeError, ValueError):
        raise ConfigError("seed: must be an integer") from None
    if seed < 0:
        raise ConfigError("seed: must be non-negative")
    cfg = ExperimentConfig(**sections, seed=seed, out=str(merged.get("out", "results")), profile=profile,
                           raw={"profile": profile, **{k: v for k, v in merged.items() if k != "out"}, "seed": seed})
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    prof = cfg.tap_profile
    spread = prof.sample_powers(cfg.ofdm.sample_rate).size - 1
    max_off = max_timing_offset(cfg.ofdm, cfg.channel.t_sync) if cfg.channel.sync_errors else 0.0
    n_err = cfg.channel.n_err if cfg.channel.sync_errors else 0
    if cfg.channel.n_err < 0:
        raise ConfigError("channel.n_err: must be non-negative")
    if spread + math.ceil(max_off) + n_err > cfg.ofdm.n_cp:
        raise ConfigError(
            f"ofdm.n_cp: delay spread {spread} + timing offset {max_off:.3g} + n_err {n_err} exceeds n_cp={cfg.ofdm.n_cp}"
        )
    if cfg.ofdm.m_active % 2:
        raise ConfigError("ofdm.m_active: must be even for vote pairs")
    d = cfg.data
    if d.uses_idx and d.train_labels is None:
        raise ConfigError("data.train_labels: required with data.train_images")
    if d.test_images is not None and d.test_labels is None:
        raise ConfigError("data.test_labels: required with data.test_images")
    if cfg.oac.budget_q is not None and cfg.oac.budget_q < 1:
        raise ConfigError("oac.budget_q: must be positive")
    if cfg.detector.trials < 1000:
        raise ConfigError("detector.trials: at least 1000 trials are required")
    if cfg.pmepr.n_symbols < 1:
        raise ConfigError("pmepr.n_symbols: must be positive")


def load_config(path=None, profile: str = "desk", **overrides) -> ExperimentConfig:
    """Load a YAML config file (an empty file selects all defaults)."""
    data = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        try:
            data = yaml.safe_load(path.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: parse error: {exc}") from None
    return build_config(data, profile=profile, **overrides)
