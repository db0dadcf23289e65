"""Plain-text scenario configuration.

One ``key = value`` pair per line, ``#`` starts a comment.  Numeric values
may carry a unit suffix and an optional ``2pi*`` factor::

    preset   = physical
    V        = 2pi*133.04 MHz
    gamma    = 1 kHz            # decay rate, 1e3 per second
    T        = 21.5 us
    sweep    = defect -2pi*15 MHz 2pi*15 MHz 21

Without units the numbers are taken as given (dimensionless runs use
``T = 1``).
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import atom

UNITS = {
    "ghz": 1e9, "mhz": 1e6, "khz": 1e3, "hz": 1.0,
    "s": 1.0, "ms": 1e-3, "us": 1e-6, "μs": 1e-6, "ns": 1e-9,
    "rad": 1.0,
}
GATE_NAMES = ("cz", "cnot", "custom")
FRAMES = ("full", "effective")
INTEGRATORS = ("expm", "rk")
SWEEP_CHANNELS = ("epsilon", "delta_prime", "defect", "gamma")
PRESETS = ("dimensionless", "physical")
DEFAULT_VT = atom.PHYSICAL_VT
DEFAULT_VB_RATIO = 30.0  # V / omega_b, i.e. omega_b = 600 / T at V T = 18000

_NUMBER = re.compile(
    r"^\s*(?P<sign>[-+]?)\s*(?P<twopi>2\s*pi\s*\*)?\s*(?P<num>[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?)"
    r"\s*(?P<unit>[A-Za-zμ]+)?\s*$")


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the offending field."""


def parse_quantity(text: str, key: str = "value") -> float:
    """Parse ``"[-]2pi*4.43 MHz"`` style quantities into SI floats."""
    m = _NUMBER.match(text)
    if not m:
        raise ConfigError(f"{key}: cannot parse quantity {text!r}")
    value = float(m.group("num"))
    if m.group("sign") == "-":
        value = -value
    if m.group("twopi"):
        value *= 2.0 * math.pi
    unit = m.group("unit")
    if unit:
        scale = UNITS.get(unit.lower()) or UNITS.get(unit)
        if scale is None:
            raise ConfigError(f"{key}: unknown unit {unit!r}")
        value *= scale
    return value


def _split_quantities(text: str) -> list[str]:
    """Split ``"-2pi*15 MHz 2pi*15 MHz 21"`` into quantity strings."""
    tokens = text.split()
    out: list[str] = []
    for tok in tokens:
        if out and re.fullmatch(r"[A-Za-zμ]+", tok) and tok.lower() in UNITS:
            out[-1] += " " + tok
        else:
            out.append(tok)
    return out


@dataclass(frozen=True)
class SweepSpec:
    channel: str
    start: float
    stop: float
    points: int

    def __post_init__(self):
        if self.channel not in SWEEP_CHANNELS:
            raise ConfigError(f"sweep: unknown channel {self.channel!r}; expected {SWEEP_CHANNELS}")
        if not self.start <= self.stop:
            raise ConfigError("sweep: start must not exceed stop")
        if self.points < 1:
            raise ConfigError("sweep: number of points must be positive")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)

    @classmethod
    def parse(cls, text: str) -> "SweepSpec":
        parts = text.split(None, 1)
        if len(parts) != 2:
            raise ConfigError("sweep: expected 'channel start stop points'")
        q = _split_quantities(parts[1])
        if len(q) != 3:
            raise ConfigError("sweep: expected 'channel start stop points'")
        try:
            points = int(q[2])
        except ValueError:
            raise ConfigError(f"sweep: points must be an integer, got {q[2]!r}") from None
        return cls(parts[0], parse_quantity(q[0], "sweep"), parse_quantity(q[1], "sweep"), points)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce one run or sweep.

    Exactly one of ``T`` and ``V`` may be left unset; the missing one
    follows from ``V T = vt``.  With both unset the run is dimensionless
    with ``T = 1``.  ``omega_b`` defaults to ``V / 30``.
    """

    gate: str = "cnot"
    v_a: float | None = None
    v_b: float | None = None
    eta: float = 1.0
    preset: str = "dimensionless"
    T: float | None = None
    V: float | None = None
    vt: float = DEFAULT_VT
    omega_b: float | None = None
    frame: str = "full"
    integrator: str = "expm"
    steps: int | None = None
    rtol: float = 1e-9
    certify: bool = False
    n_points: int = 4097
    epsilon: float = 0.0
    delta_prime: float = 0.0
    defect: float = 0.0
    gamma: float = 0.0
    snr: float = math.inf
    snr_unit: str = "db"
    seed: int = 0
    n_runs: int = 50
    input_state: str = "00+11"
    trace_points: int = 201
    sweep: SweepSpec | None = None

    def __post_init__(self):
        if self.gate not in GATE_NAMES:
            raise ConfigError(f"gate: expected one of {GATE_NAMES}, got {self.gate!r}")
        if self.gate == "custom" and (self.v_a is None or self.v_b is None):
            raise ConfigError("v_a, v_b: custom gates need both mixing angles")
        if self.preset not in PRESETS:
            raise ConfigError(f"preset: expected one of {PRESETS}, got {self.preset!r}")
        if self.frame not in FRAMES:
            raise ConfigError(f"frame: expected one of {FRAMES}, got {self.frame!r}")
        if self.integrator not in INTEGRATORS:
            raise ConfigError(f"integrator: expected one of {INTEGRATORS}, got {self.integrator!r}")
        if self.snr_unit not in ("db", "linear"):
            raise ConfigError("snr_unit: expected 'db' or 'linear'")
        for name in ("T", "V", "omega_b"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ConfigError(f"{name}: must be positive")
        if not self.vt > 0:
            raise ConfigError("vt: must be positive")
        if self.eta < 0:
            raise ConfigError("eta: must be non-negative")
        if self.gamma < 0:
            raise ConfigError("gamma: must be non-negative")
        if not self.snr > 0:
            raise ConfigError("snr: must be positive")
        if self.n_runs < 1:
            raise ConfigError("n_runs: must be at least 1")
        if self.n_points < 3 or self.n_points % 2 == 0:
            raise ConfigError("n_points: must be odd and at least 3")
        if self.steps is not None and self.steps < 1:
            raise ConfigError("steps: must be positive")
        if self.trace_points < 2:
            raise ConfigError("trace_points: must be at least 2")
        parse_input_state(self.input_state)

    # -- derived quantities -------------------------------------------------

    @property
    def angles(self) -> tuple[float, float]:
        if self.gate == "custom":
            return float(self.v_a), float(self.v_b)
        return atom.GATES[self.gate]

    def resolved(self) -> tuple[float, float, float]:
        """``(T, V, omega_b)`` after presets and the ``V T`` relation."""
        T, V, ob = self.T, self.V, self.omega_b
        if self.preset == "physical":
            V = V if V is not None else atom.TWO_PI * 133.04e6
            ob = ob if ob is not None else atom.TWO_PI * 4.43e6
        if T is None and V is None:
            T = 1.0
        if V is None:
            V = self.vt / T
        elif T is None:
            T = self.vt / V
        if ob is None:
            ob = V / DEFAULT_VB_RATIO
        return float(T), float(V), float(ob)

    def model_params(self, **overrides) -> atom.ModelParams:
        T, V, ob = self.resolved()
        v_a, v_b = self.angles
        kw = dict(V=V, omega_b=ob, T=T, v_a=v_a, v_b=v_b, gamma=self.gamma,
                  defect=self.defect, dipole_deviation=self.delta_prime, epsilon=self.epsilon)
        kw.update(overrides)
        return atom.ModelParams(**kw)

    def target(self) -> np.ndarray:
        return np.asarray(atom.target_gate(*self.angles))

    def propagation_config(self):
        from .dynamics import PropagationConfig
        return PropagationConfig(method=self.integrator, steps=self.steps, rtol=self.rtol,
                                 atol=self.rtol * 1e-2, seed=self.seed, certify=self.certify)

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["snr"] = "inf" if math.isinf(self.snr) else self.snr
        return d

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


_INT_KEYS = {"steps", "n_points", "seed", "n_runs", "trace_points"}
_STR_KEYS = {"gate", "preset", "frame", "integrator", "snr_unit", "input_state"}
_BOOL_KEYS = {"certify"}
_ALIASES = {"delta'": "delta_prime", "deltaprime": "delta_prime", "Omega_b": "omega_b",
            "ob": "omega_b", "runs": "n_runs", "method": "integrator"}


def parse_input_state(text: str) -> np.ndarray:
    """``"00+11"`` -> normalised computational amplitudes."""
    amps = np.zeros(4, dtype=complex)
    for label in text.replace(" ", "").split("+"):
        if label not in ("00", "01", "10", "11"):
            raise ConfigError(f"input_state: unknown basis label {label!r}")
        amps[int(label, 2)] += 1.0
    return amps / np.linalg.norm(amps)


def parse_config_text(text: str) -> ScenarioConfig:
    valid = {f.name for f in fields(ScenarioConfig)}
    kw: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key)
        if key not in valid:
            raise ConfigError(f"{key}: unknown configuration key (line {lineno})")
        try:
            if key in _STR_KEYS:
                kw[key] = value.lower() if key != "input_state" else value
            elif key in _BOOL_KEYS:
                kw[key] = value.lower() in ("1", "true", "yes", "on")
            elif key in _INT_KEYS:
                kw[key] = int(value)
            elif key == "sweep":
                kw[key] = SweepSpec.parse(value)
            elif key == "snr" and value.lower() in ("inf", "none", "off"):
                kw[key] = math.inf
            else:
                kw[key] = parse_quantity(value, key)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{key}: invalid value {value!r}") from None
    try:
        return ScenarioConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    return parse_config_text(text)
