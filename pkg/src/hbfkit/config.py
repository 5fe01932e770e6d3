"""Run configuration: typed parameter blocks plus INI-style config files.

Every field of :class:`SystemConfig` (and the other blocks) is addressable
by a flat ``section.key`` name in the config file, e.g. ``system.n_t``.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, field, replace


class ConfigError(ValueError):
    """Invalid or missing configuration value."""


FULL_PRECISION = "full"

# bits charged per unquantized RSSI value in feedback accounting
FULL_PRECISION_BITS = 64


@dataclass(frozen=True)
class SystemConfig:
    """Cell-level dimensions and radio constants."""

    n_t: int
    n_rf: int
    n_u: int
    k_ss: int
    noise_power_dbw: float
    seed: int
    p_max: float = 1.0
    n_b: int | str = FULL_PRECISION

    def __post_init__(self):
        if self.n_rf > self.n_t:
            raise ConfigError(f"system.n_rf ({self.n_rf}) must not exceed system.n_t ({self.n_t})")
        if self.n_u > self.n_rf:
            raise ConfigError(f"system.n_u ({self.n_u}) must not exceed system.n_rf ({self.n_rf})")
        if self.k_ss < 1:
            raise ConfigError("system.k_ss must be >= 1")
        if self.n_b != FULL_PRECISION:
            if not isinstance(self.n_b, int) or self.n_b < 1:
                raise ConfigError(f"system.n_b must be a positive int or '{FULL_PRECISION}', got {self.n_b!r}")
        if self.p_max <= 0:
            raise ConfigError("system.p_max must be positive")

    @property
    def sigma2(self) -> float:
        """Noise power in linear watts."""
        return 10.0 ** (self.noise_power_dbw / 10.0)

    @property
    def full_precision(self) -> bool:
        return self.n_b == FULL_PRECISION

    @property
    def rssi_bits(self) -> int:
        """Bits per fed-back RSSI value (64 when unquantized)."""
        return FULL_PRECISION_BITS if self.full_precision else int(self.n_b)


@dataclass(frozen=True)
class GaParams:
    """Genetic-algorithm knobs: population N_c, elite count, crossover fraction."""

    population: int
    elites: int
    crossover_fraction: float = 0.8
    max_generations: int = 200
    stall_generations: int = 30

    def __post_init__(self):
        if self.elites >= self.population:
            raise ConfigError("ga.elites must be smaller than ga.population")
        if not 0.0 < self.crossover_fraction < 1.0:
            raise ConfigError("ga.crossover_fraction must lie in (0, 1)")
        if self.max_generations < 1 or self.stall_generations < 1:
            raise ConfigError("ga generation limits must be >= 1")

    @classmethod
    def for_problem(cls, n_t: int, n_rf: int, **overrides) -> "GaParams":
        """Default sizing: N_c = 100*N_T*N_RF, 5% elites, crossover 0.8."""
        population = 100 * n_t * n_rf
        defaults = dict(
            population=population,
            elites=math.ceil(0.05 * population),
            crossover_fraction=0.8,
            max_generations=max(200, 20 * n_t),
            stall_generations=30,
        )
        defaults.update(overrides)
        return cls(**defaults)


@dataclass(frozen=True)
class CodebookBuildParams:
    """Codebook construction: append threshold, size cap, pruning floor."""

    xi: float = 1.005
    cap: int = 1000
    retention: float = 0.995

    def __post_init__(self):
        if self.xi <= 1.0:
            raise ConfigError("codebook.xi must be > 1")
        if not 0.0 < self.retention <= 1.0:
            raise ConfigError("codebook.retention must lie in (0, 1]")
        if self.cap < 1:
            raise ConfigError("codebook.cap must be >= 1")


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.85
    shuffle_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("dataset.train_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class ScenarioParams:
    """Raw scenario block; resolved into a ScenarioArea by hbfkit.channel."""

    area: str = "extended"
    grid_x: int = 0          # 0 -> archetype default
    grid_y: int = 0
    num_paths: int = 10
    pl_offset_db: float | None = None
    tx_norm: float = 1.0


@dataclass(frozen=True)
class ArrayParams:
    nx: int = 1
    ny: int = 0              # 0 -> inferred square-ish panel from n_t
    nz: int = 0
    spacing: float = 0.5


@dataclass(frozen=True)
class SsParams:
    calibration_samples: int = 10000
    design_n_b: int | str | None = None   # None -> deployment system.n_b


@dataclass(frozen=True)
class DatasetParams:
    n_core: int = 500
    n_dnn: int = 20000
    train_fraction: float = 0.85

    def __post_init__(self):
        if self.n_core < 1 or self.n_dnn < 1:
            raise ConfigError("dataset sizes must be >= 1")


@dataclass(frozen=True)
class TrainParams:
    epochs: int = 30
    batch_size: int = 500
    learning_rate: float = 0.001
    weight_decay: float = 1e-6
    plateau_factor: float = 0.1
    plateau_patience: int = 3
    dropout_keep: float = 0.95
    trunk_widths: tuple[int, ...] = (512, 512)
    conv_channels: int = 0
    bn_eps: float = 1e-5
    bn_momentum: float = 0.1
    shuffle: bool = True

    def __post_init__(self):
        if not 0.0 < self.dropout_keep <= 1.0:
            raise ConfigError("train.dropout_keep must lie in (0, 1]")


@dataclass(frozen=True)
class RunConfig:
    """Everything a pipeline run needs, one block per config section."""

    system: SystemConfig
    array: ArrayParams = ArrayParams()
    scenario: ScenarioParams = ScenarioParams()
    ga: GaParams | None = None             # None -> GaParams.for_problem
    ss: SsParams = SsParams()
    codebook: CodebookBuildParams = CodebookBuildParams()
    dataset: DatasetParams = DatasetParams()
    train: TrainParams = TrainParams()

    def ga_params(self) -> GaParams:
        if self.ga is not None:
            return self.ga
        return GaParams.for_problem(self.system.n_t, self.system.n_rf)

    def snapshot(self) -> dict:
        """JSON-safe dict of the full configuration (for manifests)."""
        d = asdict(self)
        d["train"]["trunk_widths"] = list(self.train.trunk_widths)
        return d


_REQUIRED_SYSTEM_KEYS = ("n_t", "n_rf", "n_u", "k_ss", "noise_power_dbw", "seed")


def _get_typed(parser, section, key, cast, default=None, required=False):
    if not parser.has_option(section, key):
        if required:
            raise ConfigError(f"missing required key {section}.{key}")
        return default
    raw = parser.get(section, key)
    try:
        return cast(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from exc


def _as_int(raw: str) -> int:
    return int(raw)


def _as_float(raw: str) -> float:
    return float(raw)


def _as_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def _as_bits(raw: str):
    raw = raw.strip().lower()
    if raw == FULL_PRECISION:
        return FULL_PRECISION
    return int(raw)


def _as_int_tuple(raw: str) -> tuple[int, ...]:
    return tuple(int(p) for p in raw.replace(",", " ").split())


def load_config(path) -> RunConfig:
    """Parse an INI-style config file into a RunConfig.

    Unknown sections are ignored; unknown keys inside known sections raise,
    so typos fail loudly.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    if not parser.has_section("system"):
        raise ConfigError("missing required section [system]")

    known = {
        "system": {"n_t", "n_rf", "n_u", "k_ss", "noise_power_dbw", "seed", "p_max", "n_b"},
        "array": {"nx", "ny", "nz", "spacing"},
        "scenario": {"area", "grid_x", "grid_y", "num_paths", "pl_offset_db", "tx_norm"},
        "ga": {"population", "elites", "crossover_fraction", "max_generations", "stall_generations"},
        "ss": {"calibration_samples", "design_n_b"},
        "codebook": {"xi", "cap", "retention"},
        "dataset": {"n_core", "n_dnn", "train_fraction"},
        "train": {
            "epochs", "batch_size", "learning_rate", "weight_decay", "plateau_factor",
            "plateau_patience", "dropout_keep", "trunk_widths", "conv_channels",
            "bn_eps", "bn_momentum", "shuffle",
        },
    }
    for section, keys in known.items():
        if parser.has_section(section):
            for key in parser.options(section):
                if key not in keys:
                    raise ConfigError(f"unknown key {section}.{key}")

    g = _get_typed
    system = SystemConfig(
        n_t=g(parser, "system", "n_t", _as_int, required=True),
        n_rf=g(parser, "system", "n_rf", _as_int, required=True),
        n_u=g(parser, "system", "n_u", _as_int, required=True),
        k_ss=g(parser, "system", "k_ss", _as_int, required=True),
        noise_power_dbw=g(parser, "system", "noise_power_dbw", _as_float, required=True),
        seed=g(parser, "system", "seed", _as_int, required=True),
        p_max=g(parser, "system", "p_max", _as_float, default=1.0),
        n_b=g(parser, "system", "n_b", _as_bits, default=FULL_PRECISION),
    )

    array = ArrayParams(
        nx=g(parser, "array", "nx", _as_int, default=1),
        ny=g(parser, "array", "ny", _as_int, default=0),
        nz=g(parser, "array", "nz", _as_int, default=0),
        spacing=g(parser, "array", "spacing", _as_float, default=0.5),
    )
    scenario = ScenarioParams(
        area=g(parser, "scenario", "area", str, default="extended"),
        grid_x=g(parser, "scenario", "grid_x", _as_int, default=0),
        grid_y=g(parser, "scenario", "grid_y", _as_int, default=0),
        num_paths=g(parser, "scenario", "num_paths", _as_int, default=10),
        pl_offset_db=g(parser, "scenario", "pl_offset_db", _as_float, default=None),
        tx_norm=g(parser, "scenario", "tx_norm", _as_float, default=1.0),
    )

    ga = None
    if parser.has_section("ga") and parser.options("ga"):
        base = GaParams.for_problem(system.n_t, system.n_rf)
        population = g(parser, "ga", "population", _as_int, default=base.population)
        ga = GaParams(
            population=population,
            elites=g(parser, "ga", "elites", _as_int, default=max(1, math.ceil(0.05 * population))),
            crossover_fraction=g(parser, "ga", "crossover_fraction", _as_float,
                                 default=base.crossover_fraction),
            max_generations=g(parser, "ga", "max_generations", _as_int,
                              default=base.max_generations),
            stall_generations=g(parser, "ga", "stall_generations", _as_int,
                                default=base.stall_generations),
        )

    ss = SsParams(
        calibration_samples=g(parser, "ss", "calibration_samples", _as_int, default=10000),
        design_n_b=g(parser, "ss", "design_n_b", _as_bits, default=None),
    )
    codebook = CodebookBuildParams(
        xi=g(parser, "codebook", "xi", _as_float, default=1.005),
        cap=g(parser, "codebook", "cap", _as_int, default=1000),
        retention=g(parser, "codebook", "retention", _as_float, default=0.995),
    )
    dataset = DatasetParams(
        n_core=g(parser, "dataset", "n_core", _as_int, default=500),
        n_dnn=g(parser, "dataset", "n_dnn", _as_int, default=20000),
        train_fraction=g(parser, "dataset", "train_fraction", _as_float, default=0.85),
    )
    train = TrainParams(
        epochs=g(parser, "train", "epochs", _as_int, default=30),
        batch_size=g(parser, "train", "batch_size", _as_int, default=500),
        learning_rate=g(parser, "train", "learning_rate", _as_float, default=0.001),
        weight_decay=g(parser, "train", "weight_decay", _as_float, default=1e-6),
        plateau_factor=g(parser, "train", "plateau_factor", _as_float, default=0.1),
        plateau_patience=g(parser, "train", "plateau_patience", _as_int, default=3),
        dropout_keep=g(parser, "train", "dropout_keep", _as_float, default=0.95),
        trunk_widths=g(parser, "train", "trunk_widths", _as_int_tuple, default=(512, 512)),
        conv_channels=g(parser, "train", "conv_channels", _as_int, default=0),
        bn_eps=g(parser, "train", "bn_eps", _as_float, default=1e-5),
        bn_momentum=g(parser, "train", "bn_momentum", _as_float, default=0.1),
        shuffle=g(parser, "train", "shuffle", _as_bool, default=True),
    )

    return RunConfig(system=system, array=array, scenario=scenario, ga=ga, ss=ss,
                     codebook=codebook, dataset=dataset, train=train)


def with_seed(cfg: RunConfig, seed: int) -> RunConfig:
    return replace(cfg, system=replace(cfg.system, seed=seed))
