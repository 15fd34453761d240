"""
config.py

Run configuration: one JSON document per command invocation, parsed into a
frozen dataclass per subcommand. Unknown keys and out-of-range values raise
ConfigError before any computation starts.

See docs/config.md for the schema.
"""

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, Mapping, Optional, Tuple

from .errors import ConfigError, OutputError
from .lattice import GOLDEN_RATIO, is_fibonacci_size

OUT_DIR_ENV = "AAS_LAB_OUT_DIR"
THREADS_ENV = "AAS_LAB_THREADS"

# sample counts of the published figures
FIGURE_FAITHFUL_SAMPLES = {
    "sweep": 5000,
    "qfi": 8000,
    "fidelity-map": 100,
}


def _require(condition: bool, message: str):
    if not condition:
        raise ConfigError(message)


def _sizes(values, name="sizes", fibonacci=True) -> Tuple[int, ...]:
    _require(isinstance(values, (list, tuple)) and len(values) > 0, f"'{name}' must be a non-empty list")
    sizes = []
    for value in values:
        _require(isinstance(value, int) and not isinstance(value, bool) and value >= 2,
                 f"'{name}' entries must be integers >= 2, got {value!r}")
        if fibonacci:
            _require(is_fibonacci_size(value), f"'{name}' entry {value} is not a Fibonacci number; "
                                               "set 'golden': true to use arbitrary sizes")
        sizes.append(value)
    return tuple(sizes)


def _floats(values, name) -> Tuple[float, ...]:
    _require(isinstance(values, (list, tuple)) and len(values) > 0, f"'{name}' must be a non-empty list")
    try:
        return tuple(float(value) for value in values)
    except (TypeError, ValueError):
        raise ConfigError(f"'{name}' must hold numbers, got {values!r}") from None


@dataclass(frozen=True)
class HGrid:
    """Log-spaced field grid: points_per_decade values per decade of h."""

    min_decade: float = -4.0
    max_decade: float = 0.0
    points_per_decade: int = 10

    def __post_init__(self):
        _require(self.max_decade > self.min_decade, "h grid needs max_decade > min_decade")
        _require(isinstance(self.points_per_decade, int) and self.points_per_decade >= 1,
                 "h grid points_per_decade must be an integer >= 1")


@dataclass(frozen=True)
class GridSpec:
    """Exponent grid for a collapse search."""

    start: float
    stop: float
    step: float = 0.001


@dataclass(frozen=True)
class _ModelSection:
    """Settings shared by commands that build Hamiltonians."""

    J: float = 1.0
    golden: bool = False

    @property
    def omega(self) -> Optional[float]:
        return GOLDEN_RATIO if self.golden else None

    def _check_detunings(self, deltas, name):
        _require(self.J > 0, f"'J' must be positive, got {self.J}")
        for delta in deltas:
            _require(2.0 * self.J + delta >= 0,
                     f"'{name}' value {delta} makes the AA amplitude 2J + delta negative")


@dataclass(frozen=True)
class SweepConfig(_ModelSection):
    sizes: Tuple[int, ...] = ()
    h_values: Optional[Tuple[float, ...]] = None
    h_grid: Optional[HGrid] = None
    deltas: Tuple[float, ...] = (0.0,)
    delta_rule: Optional[Dict[str, float]] = None
    qfi: bool = False
    n_samples: int = 500
    master_seed: int = 0
    chunk_size: int = 50

    def __post_init__(self):
        _require(bool(self.sizes), "sweep needs 'sizes'")
        object.__setattr__(self, "deltas", _floats(self.deltas, "deltas"))
        if self.h_values is not None:
            object.__setattr__(self, "h_values", _floats(self.h_values, "h_values"))
        _sizes(list(self.sizes), fibonacci=not self.golden)
        _require((self.h_values is None) != (self.h_grid is None), "sweep needs exactly one of 'h_values' and 'h_grid'")
        if self.delta_rule is not None:
            _require(set(self.delta_rule) == {"c", "nu_delta"}, "'delta_rule' needs exactly 'c' and 'nu_delta'")
            _require(self.delta_rule["nu_delta"] > 0, "'delta_rule' needs nu_delta > 0")
            self._check_detunings([self.delta_rule["c"] * size ** (-1.0 / self.delta_rule["nu_delta"])
                                   for size in self.sizes], "delta_rule")
        else:
            self._check_detunings(self.deltas, "deltas")
        _require(isinstance(self.qfi, bool), "'qfi' must be true or false")
        _check_sampling(self.n_samples, self.master_seed)
        _require(isinstance(self.chunk_size, int) and self.chunk_size >= 1, "'chunk_size' must be an integer >= 1")


@dataclass(frozen=True)
class CollapseConfig:
    input: str = ""
    ansatz: str = "zeta"
    fixed_exponents: Dict[str, float] = field(default_factory=dict)
    delta: Optional[float] = None
    sizes: Optional[Tuple[int, ...]] = None
    grid: Optional[GridSpec] = None
    flat_tol: float = 0.01

    def __post_init__(self):
        _require(bool(self.input), "collapse needs 'input'")
        kinds = ("zeta", "ipr", "gap", "zeta_2param", "ipr_2param", "gap_2param", "kappa")
        _require(self.ansatz in kinds, f"'ansatz' must be one of {kinds}, got {self.ansatz!r}")
        _require(self.flat_tol >= 0, "'flat_tol' must be non-negative")
        if self.sizes is not None:
            _sizes(list(self.sizes), fibonacci=False)


@dataclass(frozen=True)
class FitConfig:
    input: str = ""
    column: str = "zeta_mean"
    delta: Optional[float] = None
    L: Optional[int] = None
    window: Optional[Tuple[float, float]] = None
    nu: Optional[float] = None

    def __post_init__(self):
        _require(bool(self.input), "fit needs 'input'")
        if self.window is not None:
            _require(len(self.window) == 2 and self.window[0] < self.window[1],
                     "'window' must be [h_min, h_max] with h_min < h_max")


@dataclass(frozen=True)
class FidelityMapConfig(_ModelSection):
    L: int = 610
    deltas: Tuple[float, ...] = ()
    h_values: Optional[Tuple[float, ...]] = None
    h_grid: Optional[HGrid] = None
    delta_ref: Optional[float] = None
    n_samples: int = 500
    master_seed: int = 0
    chunk_size: int = 50

    def __post_init__(self):
        _sizes([self.L], "L", fibonacci=not self.golden)
        _require(bool(self.deltas), "fidelity-map needs 'deltas'")
        object.__setattr__(self, "deltas", _floats(self.deltas, "deltas"))
        self._check_detunings(self.deltas, "deltas")
        if self.delta_ref is not None:
            self._check_detunings([self.delta_ref], "delta_ref")
        if self.h_values is not None:
            object.__setattr__(self, "h_values", _floats(self.h_values, "h_values"))
        _require((self.h_values is None) != (self.h_grid is None),
                 "fidelity-map needs exactly one of 'h_values' and 'h_grid'")
        _check_sampling(self.n_samples, self.master_seed)


@dataclass(frozen=True)
class QfiConfig(_ModelSection):
    sizes: Tuple[int, ...] = ()
    h: float = 1e-9
    delta: float = 0.0
    n_samples: int = 500
    master_seed: int = 0
    nu: Optional[float] = None
    chunk_size: int = 50

    def __post_init__(self):
        _sizes(list(self.sizes), fibonacci=not self.golden)
        _require(self.h > 0, "'h' must be positive")
        self._check_detunings([self.delta], "delta")
        _check_sampling(self.n_samples, self.master_seed)


@dataclass(frozen=True)
class WavefunctionConfig(_ModelSection):
    L: int = 610
    delta: float = 0.0
    h: float = 1e-4
    phi: float = 0.0

    def __post_init__(self):
        _sizes([self.L], "L", fibonacci=not self.golden)
        _require(self.h >= 0, "'h' must be non-negative")
        self._check_detunings([self.delta], "delta")


@dataclass(frozen=True)
class DriftConfig:
    input: str = ""
    deltas: Optional[Tuple[float, ...]] = None
    grids: Dict[str, GridSpec] = field(default_factory=dict)
    flat_tol: float = 0.01

    def __post_init__(self):
        _require(bool(self.input), "drift needs 'input'")
        unknown = set(self.grids) - {"nu", "s", "z"}
        _require(not unknown, f"Unknown drift grids {sorted(unknown)}")


def _check_sampling(n_samples, master_seed):
    _require(isinstance(n_samples, int) and not isinstance(n_samples, bool) and n_samples >= 1,
             f"'n_samples' must be an integer >= 1, got {n_samples!r}")
    _require(isinstance(master_seed, int) and 0 <= master_seed < 2 ** 64,
             f"'master_seed' must be an unsigned 64-bit integer, got {master_seed!r}")


CONFIG_TYPES = {
    "sweep": SweepConfig,
    "collapse": CollapseConfig,
    "fit": FitConfig,
    "fidelity-map": FidelityMapConfig,
    "qfi": QfiConfig,
    "wavefunction": WavefunctionConfig,
    "drift": DriftConfig,
}

_NESTED = {"h_grid": HGrid, "grid": GridSpec}
_TUPLE_FIELDS = {"sizes", "h_values", "deltas", "window"}


def _build(cls, data: Mapping[str, Any], context: str):
    if not isinstance(data, Mapping):
        raise ConfigError(f"{context} must be a JSON object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unknown keys in {context}: {unknown}")
    values = {}
    for key, value in data.items():
        if key in _NESTED and value is not None:
            value = _build(_NESTED[key], value, f"{context}.{key}")
        elif key == "grids":
            if not isinstance(value, Mapping):
                raise ConfigError(f"{context}.grids must be a JSON object")
            value = {name: _build(GridSpec, spec, f"{context}.grids.{name}") for name, spec in value.items()}
        elif key in _TUPLE_FIELDS and value is not None:
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"'{key}' must be a list")
            value = tuple(value)
        values[key] = value
    try:
        return cls(**values)
    except TypeError as error:
        raise ConfigError(f"Invalid {context}: {error}") from None


def parse_config(command: str, data: Mapping[str, Any]):
    """Validate a config mapping for one subcommand.

    Args:
        command (str): Subcommand name, a key of CONFIG_TYPES.
        data (Mapping[str, Any]): Decoded JSON document.

    Returns:
        The frozen config dataclass for the command.

    Raises:
        ConfigError: On unknown commands, unknown keys or invalid values.
    """
    try:
        cls = CONFIG_TYPES[command]
    except KeyError:
        raise ConfigError(f"No configuration schema for command {command!r}") from None
    return _build(cls, data, f"{command} config")


def load_config(command: str, path: Optional[str]):
    """Read and validate the JSON config at path (an empty config when path is None)."""
    if path is None:
        return parse_config(command, {})
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as error:
        raise ConfigError(f"Invalid JSON in {path}: {error}") from None
    except OSError as error:
        raise OutputError(f"Cannot read config {path}: {error}") from None
    return parse_config(command, data)


def apply_overrides(config, command: str, seed: Optional[int] = None, samples: Optional[int] = None,
                    figure_faithful: bool = False):
    """Return config with command-line overrides applied.

    --samples wins over --figure-faithful, which wins over the file.
    """
    names = {f.name for f in fields(config)}
    changes: Dict[str, Any] = {}
    if figure_faithful and command in FIGURE_FAITHFUL_SAMPLES and "n_samples" in names:
        changes["n_samples"] = FIGURE_FAITHFUL_SAMPLES[command]
    if samples is not None:
        _require("n_samples" in names, f"--samples does not apply to '{command}'")
        changes["n_samples"] = samples
    if seed is not None:
        _require("master_seed" in names, f"--seed does not apply to '{command}'")
        changes["master_seed"] = seed
    return replace(config, **changes) if changes else config


def config_to_dict(config) -> Dict[str, Any]:
    """Plain JSON-ready mapping of a config, as stored in sidecars and the run ledger."""
    def plain(value):
        if isinstance(value, tuple):
            return [plain(item) for item in value]
        if isinstance(value, dict):
            return {key: plain(item) for key, item in value.items()}
        return value

    return {key: plain(value) for key, value in asdict(config).items()}


def resolve_out_dir(out: Optional[str]) -> str:
    """--out, else $AAS_LAB_OUT_DIR, else the working directory."""
    return out or os.environ.get(OUT_DIR_ENV) or os.getcwd()


def resolve_threads(threads: Optional[int]) -> int:
    """--threads, else $AAS_LAB_THREADS, else 1."""
    if threads is not None:
        value = threads
    else:
        raw = os.environ.get(THREADS_ENV)
        if raw is None:
            return 1
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    _require(value >= 1 or value == -1, f"Thread count must be >= 1 (or -1 for all cores), got {value}")
    return value

