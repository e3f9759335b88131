"""Parameter containers and the key = value run-config format.

Defaults are the Loihi column of the anisotropic-network parameter table,
plus the artifact-level choices (seeds, decay interpretation, weight
scaling, pooling weight) that the hardware description leaves open.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    """Raised when a parameter violates its invariants.

    ``field`` names the offending parameter so command-line tools can report it.
    """

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class GridSpec:
    """Sizes of the excitatory and inhibitory tori."""

    exc_side: int = 60
    inh_side: int = 30

    def __post_init__(self):
        if self.exc_side < 2 or self.inh_side < 1:
            raise ConfigError("exc_side", "grid sides must be positive")
        if self.exc_side != 2 * self.inh_side:
            raise ConfigError("inh_side", "exc_side must equal 2 * inh_side")

    @property
    def n_exc(self) -> int:
        return self.exc_side ** 2

    @property
    def n_inh(self) -> int:
        return self.inh_side ** 2


@dataclass(frozen=True)
class NeuronParams:
    """Loihi-style compartment parameters.

    ``current_decay`` and ``voltage_decay`` are decay constants on the
    0..4096 scale; the per-step retention factor is ``(4096 - delta) / 4096``.
    With ``decay_mode="exp"`` they are read as time constants in steps instead
    and the factor becomes ``exp(-1 / tau)``.
    """

    v_th: float = 64000.0
    current_decay: float = 380.0
    voltage_decay: float = 400.0
    t_ref: int = 2
    bias: float = 0.0
    weight_multiplier: float = 96.0
    decay_mode: str = "loihi"

    def __post_init__(self):
        if not self.v_th > 0:
            raise ConfigError("v_th", "threshold must be positive")
        if self.t_ref < 0:
            raise ConfigError("t_ref", "refractory period must be >= 0")
        if self.decay_mode not in ("loihi", "exp"):
            raise ConfigError("decay_mode", f"unknown mode {self.decay_mode!r}")
        for name in ("current_decay", "voltage_decay"):
            value = getattr(self, name)
            if self.decay_mode == "loihi" and not 0 <= value <= 4096:
                raise ConfigError(name, "decay must lie in [0, 4096]")
            if self.decay_mode == "exp" and not value > 0:
                raise ConfigError(name, "time constant must be positive")

    @property
    def current_factor(self) -> float:
        return _retention(self.current_decay, self.decay_mode)

    @property
    def voltage_factor(self) -> float:
        return _retention(self.voltage_decay, self.decay_mode)


def _retention(value: float, mode: str) -> float:
    if mode == "loihi":
        return (4096.0 - value) / 4096.0
    return math.exp(-1.0 / value)


@dataclass(frozen=True)
class NetworkConfig:
    """Everything needed to build and simulate one network instance.

    Weights are integer Loihi mantissas; the inhibitory one is given as a
    magnitude and applied with negative sign.  ``pool_weight`` is the
    mantissa of every excitatory-to-pooling synapse.

    ``profile`` selects the distance profile of local projections
    (``"radial"``: normally distributed radius, uniform angle; ``"gaussian"``:
    2D isotropic normal).  ``sigma_units`` says whether the widths are
    measured on the target population's own grid (``"target"``) or always on
    the excitatory grid (``"exc"``).
    """

    grid: GridSpec = field(default_factory=GridSpec)
    neuron: NeuronParams = field(default_factory=NeuronParams)
    kind: str = "anisotropic"
    p_conn: float = 0.05
    sigma_exc: float = 12.0
    sigma_inh: float = 9.0
    n_shift: int = 1
    perlin_scale: int = 4
    j_exc: int = 12
    j_inh: int = 48
    profile: str = "radial"
    sigma_units: str = "target"
    pool_window: int = 10
    pool_weight: int = 1
    input_origin: tuple[int, int] = (20, 20)
    input_size: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("anisotropic", "random"):
            raise ConfigError("kind", f"unknown network kind {self.kind!r}")
        if self.profile not in ("radial", "gaussian"):
            raise ConfigError("profile", f"unknown profile {self.profile!r}")
        if self.sigma_units not in ("target", "exc"):
            raise ConfigError("sigma_units", f"unknown units {self.sigma_units!r}")
        if not 0 < self.p_conn <= 1:
            raise ConfigError("p_conn", "connection probability must be in (0, 1]")
        if not self.sigma_exc > 0:
            raise ConfigError("sigma_exc", "must be positive")
        if not self.sigma_inh > 0:
            raise ConfigError("sigma_inh", "must be positive")
        if self.perlin_scale < 1:
            raise ConfigError("perlin_scale", "must be >= 1")
        if self.n_shift < 0:
            raise ConfigError("n_shift", "must be >= 0")
        for name in ("j_exc", "j_inh"):
            if getattr(self, name) < 0:
                raise ConfigError(name, "weight magnitude must be >= 0 (inhibition is negated)")
        if self.grid.exc_side % self.pool_window:
            raise ConfigError("pool_window", "exc_side must be divisible by the window")
        if self.input_size < 1 or self.input_size > self.grid.exc_side:
            raise ConfigError("input_size", "patch does not fit on the grid")

    @property
    def exc_out_degree(self) -> int:
        return int(self.p_conn * self.grid.n_exc)

    @property
    def inh_out_degree(self) -> int:
        return int(self.p_conn * self.grid.n_inh)

    def replace(self, **changes) -> "NetworkConfig":
        """Copy with top-level or nested (``neuron__v_th``) fields changed."""
        nested: dict[str, dict[str, Any]] = {}
        flat = {}
        for key, value in changes.items():
            if "__" in key:
                head, tail = key.split("__", 1)
                nested.setdefault(head, {})[tail] = value
            else:
                flat[key] = value
        for head, sub in nested.items():
            flat[head] = dataclasses.replace(getattr(self, head), **sub)
        return dataclasses.replace(self, **flat)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["input_origin"] = list(self.input_origin)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "NetworkConfig":
        d = dict(d)
        grid = GridSpec(**d.pop("grid", {}))
        neuron = NeuronParams(**d.pop("neuron", {}))
        if "input_origin" in d:
            d["input_origin"] = tuple(int(v) for v in d["input_origin"])
        return cls(grid=grid, neuron=neuron, **d)

    def digest(self) -> str:
        """Stable short hash of all parameters."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def random_control(cfg: NetworkConfig, **overrides) -> NetworkConfig:
    """Config of the size-matched random network paired with ``cfg``.

    The random control is tuned separately (its own weight scaling) so that
    its mean rate and variability resemble the anisotropic network's.
    """
    base = dict(kind="random", neuron__weight_multiplier=RANDOM_WEIGHT_MULTIPLIER)
    base.update(overrides)
    return cfg.replace(**base)


# the random control is tuned on its own: at this scaling its rate and Fano
# factor match the anisotropic network's and its activity ignites at once
RANDOM_WEIGHT_MULTIPLIER = 768.0


# --------------------------------------------------------------------------
# run configs: INI-style sections whose keys mirror the parameter table names

_SECTION_KEYS = {
    "network": {
        "npop_E": ("grid", "exc_side", lambda v: int(round(int(v) ** 0.5))),
        "npop_I": ("grid", "inh_side", lambda v: int(round(int(v) ** 0.5))),
        "kind": (None, "kind", str),
        "p_conn": (None, "p_conn", float),
        "sigma_E": (None, "sigma_exc", float),
        "sigma_I": (None, "sigma_inh", float),
        "n_shift": (None, "n_shift", int),
        "kappa_perlin": (None, "perlin_scale", int),
        "J_exc": (None, "j_exc", int),
        "J_inh": (None, "j_inh", int),
        "profile": (None, "profile", str),
        "sigma_units": (None, "sigma_units", str),
        "pool_window": (None, "pool_window", int),
        "pool_weight": (None, "pool_weight", int),
        "input_origin": (None, "input_origin", lambda v: tuple(int(x) for x in v.split(","))),
        "input_size": (None, "input_size", int),
        "seed": (None, "seed", int),
    },
    "neuron": {
        "v_th": ("neuron", "v_th", float),
        "tau_I": ("neuron", "current_decay", float),
        "tau_v": ("neuron", "voltage_decay", float),
        "t_ref": ("neuron", "t_ref", int),
        "I_bias": ("neuron", "bias", float),
        "weight_multiplier": ("neuron", "weight_multiplier", float),
        "decay_mode": ("neuron", "decay_mode", str),
    },
}


@dataclass(frozen=True)
class RunConfig:
    """A network config plus the experiment-level choices of a run."""

    network: NetworkConfig = field(default_factory=NetworkConfig)
    random_weight_multiplier: float = RANDOM_WEIGHT_MULTIPLIER
    readout: str = "pooling"
    trajectories: tuple[str, ...] = (
        "hide", "unhide", "move_down", "move_up",
        "pick_and_place", "put_on_top", "take_down",
    )
    trajectory_seed: int = 0
    alpha: float = 0.001
    l1_ratio: float = 0.05
    enet_max_iter: int = 100
    test_trials: tuple[int, ...] = tuple(range(25))
    enet_test_trials: tuple[int, ...] = (0, 5, 10, 15, 20)
    output_dir: str = "out"

    def __post_init__(self):
        if self.readout not in ("pooling", "excitatory"):
            raise ConfigError("readout", f"unknown readout {self.readout!r}")
        from .trajectories import NAMES
        unknown = [t for t in self.trajectories if t not in NAMES]
        if unknown or not self.trajectories:
            raise ConfigError("trajectories", f"unknown or empty trajectory list {unknown}")
        if self.enet_max_iter < 1:
            raise ConfigError("enet_max_iter", "must be >= 1")
        for name in ("test_trials", "enet_test_trials"):
            trials = getattr(self, name)
            if not trials or any(not 0 <= k < 25 for k in trials):
                raise ConfigError(name, "trial indices must lie in 0..24")

    def random_network(self) -> NetworkConfig:
        return random_control(
            self.network, neuron__weight_multiplier=self.random_weight_multiplier
        )

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["network"] = self.network.to_dict()
        d["trajectories"] = list(self.trajectories)
        d["test_trials"] = list(self.test_trials)
        d["enet_test_trials"] = list(self.enet_test_trials)
        return d

    def digest(self) -> str:
        d = self.to_dict()
        d.pop("output_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def load_run_config(path: str | Path) -> RunConfig:
    """Parse a run config file.

    Sections ``[network]``, ``[neuron]`` take parameter-table names
    (``npop_E``, ``sigma_E``, ``tau_I`` ...); ``[experiment]`` takes
    ``readout``, ``trajectories``, ``trajectory_seed``, ``alpha``,
    ``lambda``, ``enet_max_iter``, ``test_trials``, ``enet_test_trials``,
    ``output_dir`` and ``random_weight_multiplier``.  Unknown keys are an error.
    """
    parser = configparser.ConfigParser()
    parser.optionxform = str
    with open(path) as fh:
        parser.read_file(fh)
    return parse_run_config(parser)


def parse_run_config(parser: configparser.ConfigParser) -> RunConfig:
    changes: dict[str, Any] = {}
    for section, keys in _SECTION_KEYS.items():
        if not parser.has_section(section):
            continue
        for key, raw in parser.items(section):
            if key not in keys:
                raise ConfigError(key, f"unknown key in [{section}]")
            group, name, conv = keys[key]
            try:
                value = conv(raw)
            except ValueError as exc:
                raise ConfigError(key, f"cannot parse {raw!r}") from exc
            changes[f"{group}__{name}" if group else name] = value
    grid = {k.split("__")[1]: v for k, v in changes.items() if k.startswith("grid__")}
    for k in list(changes):
        if k.startswith("grid__"):
            del changes[k]
    base = NetworkConfig()
    if grid:
        base = dataclasses.replace(base, grid=GridSpec(**{**dataclasses.asdict(base.grid), **grid}))
    network = base.replace(**changes)

    run: dict[str, Any] = {}
    if parser.has_section("experiment"):
        for key, raw in parser.items("experiment"):
            if key == "readout":
                if raw not in ("pooling", "excitatory"):
                    raise ConfigError("readout", f"unknown readout {raw!r}")
                run["readout"] = raw
            elif key == "trajectories":
                run["trajectories"] = tuple(s.strip() for s in raw.split(",") if s.strip())
            elif key == "trajectory_seed":
                run["trajectory_seed"] = int(raw)
            elif key == "alpha":
                run["alpha"] = _nonneg(key, raw)
            elif key == "lambda":
                run["l1_ratio"] = _nonneg(key, raw)
            elif key == "enet_max_iter":
                run["enet_max_iter"] = int(_nonneg(key, raw))
            elif key in ("test_trials", "enet_test_trials"):
                try:
                    run[key] = tuple(int(v) for v in raw.split(",") if v.strip())
                except ValueError as exc:
                    raise ConfigError(key, f"cannot parse {raw!r}") from exc
            elif key == "random_weight_multiplier":
                run["random_weight_multiplier"] = _nonneg(key, raw)
            elif key == "output_dir":
                run["output_dir"] = raw
            else:
                raise ConfigError(key, "unknown key in [experiment]")
    return RunConfig(network=network, **run)


def _nonneg(key: str, raw: str) -> float:
    try:
        value = float(raw)
    except ValueError as exc:
        raise ConfigError(key, f"cannot parse {raw!r}") from exc
    if value < 0:
        raise ConfigError(key, "must be >= 0")
    return value


def dump_run_config(cfg: RunConfig) -> str:
    """Inverse of :func:`load_run_config` (round-trips every field)."""
    net = cfg.network
    lines = ["[network]"]
    lines += [
        f"npop_E = {net.grid.n_exc}",
        f"npop_I = {net.grid.n_inh}",
        f"kind = {net.kind}",
        f"p_conn = {net.p_conn!r}",
        f"sigma_E = {net.sigma_exc!r}",
        f"sigma_I = {net.sigma_inh!r}",
        f"n_shift = {net.n_shift}",
        f"kappa_perlin = {net.perlin_scale}",
        f"J_exc = {net.j_exc}",
        f"J_inh = {net.j_inh}",
        f"profile = {net.profile}",
        f"sigma_units = {net.sigma_units}",
        f"pool_window = {net.pool_window}",
        f"pool_weight = {net.pool_weight}",
        f"input_origin = {net.input_origin[0]},{net.input_origin[1]}",
        f"input_size = {net.input_size}",
        f"seed = {net.seed}",
        "",
        "[neuron]",
        f"v_th = {net.neuron.v_th!r}",
        f"tau_I = {net.neuron.current_decay!r}",
        f"tau_v = {net.neuron.voltage_decay!r}",
        f"t_ref = {net.neuron.t_ref}",
        f"I_bias = {net.neuron.bias!r}",
        f"weight_multiplier = {net.neuron.weight_multiplier!r}",
        f"decay_mode = {net.neuron.decay_mode}",
        "",
        "[experiment]",
        f"readout = {cfg.readout}",
        f"trajectories = {','.join(cfg.trajectories)}",
        f"trajectory_seed = {cfg.trajectory_seed}",
        f"alpha = {cfg.alpha!r}",
        f"lambda = {cfg.l1_ratio!r}",
        f"enet_max_iter = {cfg.enet_max_iter}",
        f"test_trials = {','.join(map(str, cfg.test_trials))}",
        f"enet_test_trials = {','.join(map(str, cfg.enet_test_trials))}",
        f"random_weight_multiplier = {cfg.random_weight_multiplier!r}",
        f"output_dir = {cfg.output_dir}",
        "",
    ]
    return "\n".join(lines)


__all__ = [
    "ConfigError", "GridSpec", "NeuronParams", "NetworkConfig", "RunConfig",
    "random_control", "load_run_config", "parse_run_config", "dump_run_config",
    "RANDOM_WEIGHT_MULTIPLIER",
]
