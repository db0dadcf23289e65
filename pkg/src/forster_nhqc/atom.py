"""Two-atom Rydberg model with a resonant Förster exchange.

Per-atom levels are ordered ``(|0>, |1>, |r>, |r+>, |r->)`` and the
two-atom index is ``5 * i_a + i_b``.  Atom ``a`` carries the shaped,
resonant drive; atom ``b`` the constant, detuned drive of strength
``omega_b``.  All frequencies are angular (rad per unit time) and the
time unit is whatever ``T`` is expressed in.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .dynamics import FunctionHamiltonian, TermHamiltonian
from .operators import QuantumOperator, QuantumState

LEVELS = ("0", "1", "r", "r+", "r-")
N_LEVELS = len(LEVELS)
DIM = N_LEVELS * N_LEVELS
BASIS_LABEL = "a(0,1,r,r+,r-)(x)b(0,1,r,r+,r-)"
COMPUTATIONAL_INDICES = (0, 1, 5, 6)  # |00>, |01>, |10>, |11>

TWO_PI = 2.0 * math.pi
PHYSICAL_VT = 18000.0


@dataclass(frozen=True)
class LevelScheme:
    labels: tuple[str, ...] = LEVELS
    kinds: tuple[str, ...] = ("ground", "ground", "rydberg", "rydberg", "rydberg")
    names: tuple[str, ...] = (
        "5S1/2 F=1 mF=0",
        "5S1/2 F=2 mF=0",
        "59D3/2 mj=3/2",
        "61P1/2 mj=1/2",
        "57F5/2 mj=5/2",
    )

    def __post_init__(self):
        if len(self.labels) != 5 or self.kinds.count("ground") != 2 \
                or self.kinds.count("rydberg") != 3:
            raise ValueError("level scheme needs two ground and three Rydberg levels")

    def index(self, label: str) -> int:
        return self.labels.index(label)


@dataclass(frozen=True)
class ModelParams:
    """Physical knobs of the two-atom model.

    ``V`` is the design dipole-dipole strength; the Förster coupling
    actually used is ``V + dipole_deviation`` while the detuning of atom
    ``b``'s drive stays at ``detuning``.  ``detuning`` defaults to ``V``.
    """

    V: float
    omega_b: float
    T: float
    v_a: float = math.pi / 2
    v_b: float = math.pi / 4
    detuning: float | None = None
    gamma: float = 0.0
    defect: float = 0.0
    dipole_deviation: float = 0.0
    epsilon: float = 0.0
    c3: float | None = None
    distance: float | None = None

    def __post_init__(self):
        if not (self.V > 0 and self.T > 0 and self.omega_b >= 0):
            raise ValueError("V and T must be positive and omega_b non-negative")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.detuning is None:
            object.__setattr__(self, "detuning", self.V)
        if self.V < 10 * self.omega_b:
            warnings.warn(f"V/omega_b = {self.V / self.omega_b:.3g} < 10; the Förster "
                          "regime V >> omega_b is not satisfied", RuntimeWarning, stacklevel=3)

    @property
    def coupling(self) -> float:
        """Förster coupling strength including the deviation."""
        return self.V + self.dipole_deviation

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    @classmethod
    def baseline(cls, T: float = 1.0, **kw) -> "ModelParams":
        """``V = 18000 / T``, ``omega_b = 600 / T``, CNOT angles."""
        return cls(V=18000.0 / T, omega_b=600.0 / T, T=T, **kw)

    @classmethod
    def physical(cls, **kw) -> "ModelParams":
        """SI preset: ``V = 2pi x 133.04 MHz``, ``omega_b = 2pi x 4.43 MHz``.

        ``T`` defaults to ``18000 / V`` (about 21.53 us).  The gate fidelity
        oscillates with ``V T`` with a period near ``8 pi``, so rounding
        ``T`` to 21.5 us moves it from a maximum to a minimum.
        """
        V = TWO_PI * 133.04e6
        kw.setdefault("T", PHYSICAL_VT / V)
        return cls(V=V, omega_b=TWO_PI * 4.43e6, **kw)

    @classmethod
    def from_distance(cls, c3: float, distance: float, **kw) -> "ModelParams":
        """``V = sqrt(2) C3 / R^3``."""
        return cls(V=math.sqrt(2) * c3 / distance ** 3, c3=c3, distance=distance, **kw)


def check_regime(params: ModelParams, omega_a_max: float) -> None:
    """Warn when ``omega_b >> max omega_a`` fails by more than a factor 10."""
    if omega_a_max > 0 and params.omega_b < 10 * omega_a_max:
        warnings.warn(f"omega_b / max omega_a = {params.omega_b / omega_a_max:.3g} < 10; "
                      "the selective-coupling regime is not satisfied",
                      RuntimeWarning, stacklevel=3)


# ---------------------------------------------------------------------------
# Kets and dressed basis
# ---------------------------------------------------------------------------


def atom_ket(label: str, v: float = 0.0) -> np.ndarray:
    """Single-atom ket; ``"xi+"`` and ``"xi-"`` use mixing angle `v`."""
    k = np.zeros(N_LEVELS, dtype=complex)
    if label == "xi+":
        k[0], k[1] = math.cos(v), math.sin(v)
    elif label == "xi-":
        k[0], k[1] = -math.sin(v), math.cos(v)
    else:
        k[LEVELS.index(label)] = 1.0
    return k


def _ket_op(bra: np.ndarray, ket: np.ndarray) -> np.ndarray:
    return np.outer(ket, bra.conj())


@dataclass(frozen=True)
class DressedBasis:
    """Dressed and collective two-atom states for mixing angles ``(v_a, v_b)``."""

    v_a: float
    v_b: float

    def product(self, a: str, b: str) -> np.ndarray:
        return np.kron(atom_ket(a, self.v_a), atom_ket(b, self.v_b))

    def state(self, a: str, b: str) -> QuantumState:
        return QuantumState(self.product(a, b), BASIS_LABEL)

    @cached_property
    def rr(self) -> np.ndarray:
        return self.product("r", "r")

    @cached_property
    def R(self) -> np.ndarray:
        return (self.product("r+", "r-") + self.product("r-", "r+")) / math.sqrt(2)

    @cached_property
    def w_plus(self) -> np.ndarray:
        return (self.rr + self.R) / math.sqrt(2)

    @cached_property
    def w_minus(self) -> np.ndarray:
        return (self.rr - self.R) / math.sqrt(2)

    @cached_property
    def E_plus(self) -> np.ndarray:
        return (self.product("r", "xi+") + self.w_minus) / math.sqrt(2)

    @cached_property
    def E_minus(self) -> np.ndarray:
        return (self.product("r", "xi+") - self.w_minus) / math.sqrt(2)

    @cached_property
    def subspace(self) -> dict[str, np.ndarray]:
        """The four dressed ground states."""
        return {
            "xi-xi-": self.product("xi-", "xi-"),
            "xi-xi+": self.product("xi-", "xi+"),
            "xi+xi-": self.product("xi+", "xi-"),
            "xi+xi+": self.product("xi+", "xi+"),
        }

    @cached_property
    def to_dressed(self) -> np.ndarray:
        """4x4 map from computational to dressed-subspace amplitudes.

        Rows follow :attr:`subspace`, columns ``|00>, |01>, |10>, |11>``.
        """
        idx = list(COMPUTATIONAL_INDICES)
        return np.array([v[idx].conj() for v in self.subspace.values()])


# ---------------------------------------------------------------------------
# Hamiltonians
# ---------------------------------------------------------------------------


def dressed_rotation(v_a: float, v_b: float) -> np.ndarray:
    """Unitary whose columns are the product states over ``(xi+, xi-, r, r+, r-)``.

    Rewriting a Hamiltonian as ``W† H W`` exposes the decoupled ``xi-``
    levels as separate blocks, which makes propagation cheaper.
    """
    def single(v):
        w = np.eye(N_LEVELS, dtype=complex)
        w[:, 0], w[:, 1] = atom_ket("xi+", v), atom_ket("xi-", v)
        return w

    return np.kron(single(v_a), single(v_b))


def forster_matrix(coupling: float, defect: float = 0.0, basis: DressedBasis | None = None
                   ) -> np.ndarray:
    b = basis or DressedBasis(0.0, 0.0)
    h = coupling * (np.outer(b.rr, b.R.conj()) + np.outer(b.R, b.rr.conj()))
    if defect:
        h = h + defect * np.outer(b.R, b.R.conj())
    return h


def forster_hamiltonian(params: ModelParams) -> QuantumOperator:
    """``V' |rr><R| + h.c. + delta |R><R|`` with ``V' = V + dipole_deviation``."""
    return QuantumOperator(forster_matrix(params.coupling, params.defect), BASIS_LABEL)


def _drive_operators(params: ModelParams):
    eye = np.eye(N_LEVELS)
    a_op = np.kron(_ket_op(atom_ket("r"), atom_ket("xi+", params.v_a)), eye)
    bp_op = np.kron(eye, _ket_op(atom_ket("xi+", params.v_b), atom_ket("r+")))
    br_op = np.kron(eye, _ket_op(atom_ket("xi+", params.v_b), atom_ket("r")))
    return a_op, bp_op, br_op


def _omega_a_coefficient(params: ModelParams, pulse):
    scale = 1.0 + params.epsilon

    def coeff(ts):
        ox, oy = pulse.at(ts)
        return 0.5 * scale * (ox + 1j * oy)

    return coeff


def full_hamiltonian_source(params: ModelParams, pulse) -> TermHamiltonian:
    """Interaction-picture Hamiltonian ``H1 + H2 + H_F`` as a term source."""
    check_regime(params, 0.5 * float(np.max(np.hypot(pulse.omega_x, pulse.omega_y))))
    a_op, bp_op, br_op = _drive_operators(params)
    c = _omega_a_coefficient(params, pulse)
    ob, det = params.omega_b, params.detuning
    terms = [
        (a_op, c),
        (a_op.conj().T, lambda ts: np.conj(c(ts))),
        (bp_op, lambda ts: ob * np.exp(-1j * det * ts)),
        (bp_op.conj().T, lambda ts: ob * np.exp(1j * det * ts)),
        (br_op, lambda ts: ob * np.exp(1j * det * ts)),
        (br_op.conj().T, lambda ts: ob * np.exp(-1j * det * ts)),
    ]
    return TermHamiltonian(forster_matrix(params.coupling, params.defect), terms)


def _check_time(t: float, params: ModelParams) -> None:
    if not (-1e-12 * params.T <= t <= params.T * (1 + 1e-12)):
        raise ValueError(f"t = {t} lies outside [0, T = {params.T}]")


def full_hamiltonian(t: float, params: ModelParams, pulse) -> QuantumOperator:
    _check_time(t, params)
    return QuantumOperator(full_hamiltonian_source(params, pulse)(t), BASIS_LABEL)


def frame_projectors(params: ModelParams):
    b = DressedBasis(params.v_a, params.v_b)
    return np.outer(b.w_plus, b.w_plus.conj()), np.outer(b.w_minus, b.w_minus.conj())


def frame_rotation(t: float, params: ModelParams) -> QuantumOperator:
    """``exp(i V t (P+ - P-))`` with ``P+-`` the projectors on ``|w+->``."""
    pp, pm = frame_projectors(params)
    rot = (np.eye(DIM) - pp - pm + np.exp(1j * params.V * t) * pp
           + np.exp(-1j * params.V * t) * pm)
    return QuantumOperator(rot, BASIS_LABEL)


def _rotating_source(params: ModelParams, pulse) -> FunctionHamiltonian:
    full = full_hamiltonian_source(params, pulse)
    pp, pm = frame_projectors(params)
    rest = np.eye(DIM) - pp - pm
    shift = params.V * (pp - pm)

    def fn(ts):
        ph = np.exp(1j * params.V * ts)[:, None, None]
        rot = rest + ph * pp + np.conj(ph) * pm
        return rot @ full.batch(ts) @ np.conj(np.swapaxes(rot, 1, 2)) - shift

    probe = np.linspace(0.1, 0.9, 7) * params.T
    src = FunctionHamiltonian(fn, DIM, probe_times=probe)
    src.frequency_bound = 2.0 * params.V
    return src


def _proj(v: np.ndarray) -> np.ndarray:
    return np.outer(v, v.conj())


def _stage_terms(stage: str, params: ModelParams):
    """Static part and the operator multiplying ``omega_a exp(i phi_a)``."""
    b = DressedBasis(params.v_a, params.v_b)
    k = b.product
    ob, det = params.omega_b, params.detuning
    drive = np.outer(k("xi+", "xi-"), k("r", "xi-").conj())
    if stage == "effective":
        return np.zeros((DIM, DIM), complex), drive, None
    r_xp = k("r", "xi+")
    static = (ob / math.sqrt(2)) * (np.outer(r_xp, b.w_minus.conj()) + np.outer(b.w_minus, r_xp.conj()))
    if stage == "second_order":
        drive = drive + np.outer(k("xi+", "xi+"), r_xp.conj()) \
            + np.outer(k("xi+", "r+"), k("r", "r+").conj())
        stark = (ob ** 2 / det) * (
            _proj(k("xi-", "r")) + _proj(k("xi+", "r")) - _proj(k("xi-", "r+"))
            + _proj(k("xi+", "r")) - _proj(k("xi+", "r+")) + _proj(r_xp) - _proj(k("r", "r+"))
        ) + (ob ** 2 / (4 * det)) * (_proj(b.w_plus) - _proj(r_xp))
        # the omega_a^2 Stark term and the Raman term depend on the pulse
        extra = {
            "stark_a": (_proj(b.w_plus) - _proj(b.w_minus)) / (2 * det),
            "raman": -(ob / (math.sqrt(2) * det)) * np.outer(b.w_minus, k("xi+", "xi+").conj()),
        }
        return static + stark, drive, extra
    if stage == "reduced":
        static = static + (3 * ob ** 2 / (4 * det)) * _proj(r_xp)
        drive = drive + np.outer(k("xi+", "xi+"), r_xp.conj())
        return static, drive, None
    if stage == "diagonalized":
        e_sum = b.E_plus + b.E_minus
        static = (3 * ob ** 2 / (8 * det)) * np.outer(e_sum, e_sum.conj()) \
            + (ob / math.sqrt(2)) * (_proj(b.E_plus) - _proj(b.E_minus))
        drive = drive + np.outer(k("xi+", "xi+"), e_sum.conj()) / math.sqrt(2)
        return static, drive, None
    raise ValueError(f"unknown stage {stage!r}")


STAGES = ("full", "rotating", "second_order", "reduced", "diagonalized", "effective")


def stage_source(stage: str, params: ModelParams, pulse):
    """Hamiltonian source for one stage of the effective-model hierarchy.

    ``full``          interaction picture ``H1 + H2 + H_F``
    ``rotating``      ``R H R† + i (dR/dt) R†``
    ``second_order``  resonant part plus the printed Stark and Raman terms
    ``reduced``       couplings surviving for the dressed ground subspace
    ``diagonalized``  the same, written with ``|E+->``
    ``effective``     ``omega_a e^{i phi_a} |xi+ xi-><r xi-| + h.c.``
    """
    if stage == "full":
        return full_hamiltonian_source(params, pulse)
    if stage == "rotating":
        return _rotating_source(params, pulse)
    static, drive, extra = _stage_terms(stage, params)
    c = _omega_a_coefficient(params, pulse)
    terms = [(drive, c), (drive.conj().T, lambda ts: np.conj(c(ts)))]
    if extra is not None:
        terms.append((extra["stark_a"], lambda ts: np.abs(c(ts)) ** 2))
        raman = extra["raman"]
        terms += [(raman, c), (raman.conj().T, lambda ts: np.conj(c(ts)))]
    return TermHamiltonian(static, terms)


def stage_hamiltonian(stage: str, t: float, params: ModelParams, pulse) -> QuantumOperator:
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}; expected one of {STAGES}")
    _check_time(t, params)
    return QuantumOperator(stage_source(stage, params, pulse)(t), BASIS_LABEL)


# ---------------------------------------------------------------------------
# Target gates and dissipation
# ---------------------------------------------------------------------------


def target_gate(v_a: float, v_b: float) -> QuantumOperator:
    """Two-qubit holonomic gate in the basis ``|00>, |01>, |10>, |11>``."""
    sa, ca = math.sin(v_a) ** 2, math.cos(v_a) ** 2
    s2a = math.sin(2 * v_a)
    sb, cb = math.sin(v_b) ** 2, math.cos(v_b) ** 2
    s2b, c2b = math.sin(2 * v_b), math.cos(2 * v_b)
    m = np.array([
        [sa + ca * c2b, ca * s2b, -s2a * sb, 0.5 * s2a * s2b],
        [ca * s2b, sa - ca * c2b, 0.5 * s2a * s2b, -s2a * cb],
        [-s2a * sb, 0.5 * s2a * s2b, ca + sa * c2b, sa * s2b],
        [0.5 * s2a * s2b, -s2a * cb, sa * s2b, ca - sa * c2b],
    ], dtype=complex)
    return QuantumOperator(m, "computational")


GATES = {"cz": (math.pi / 2, math.pi), "cnot": (math.pi / 2, math.pi / 4)}


def lindblad_operators(gamma: float) -> list[QuantumOperator]:
    """``sqrt(gamma) |j>_p <p'|`` for both atoms, ``p'`` Rydberg, ``j`` ground."""
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    eye = np.eye(N_LEVELS)
    ops = []
    for atom in ("a", "b"):
        for p in ("r", "r+", "r-"):
            for j in ("0", "1"):
                single = math.sqrt(gamma) * _ket_op(atom_ket(p), atom_ket(j))
                full = np.kron(single, eye) if atom == "a" else np.kron(eye, single)
                ops.append(QuantumOperator(full, BASIS_LABEL))
    return ops


def computational_state(amplitudes) -> np.ndarray:
    """Embed 4 computational amplitudes into the 25-dimensional space."""
    psi = np.zeros(DIM, dtype=complex)
    psi[list(COMPUTATIONAL_INDICES)] = amplitudes
    return psi
