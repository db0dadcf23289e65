"""Invariant-based reverse engineering of the holonomic control fields.

The invariant of the driven two-level system spanned by ``|r xi->``
(upper) and ``|xi+ xi->`` (lower) is parameterised by two angles,

    I(t) = (u/2) (cos mu1 s_z + sin mu1 sin mu2 s_x + sin mu1 cos mu2 s_y),

with ``mu1(t) = pi sin^2(pi t / T)``.  The second angle follows from the
zero-sensitivity phase family ``chi(mu1) = eta (2 mu1 - sin 2 mu1)``:
since ``d chi/dt = mu2' / cos mu1`` along the invariant path,

    mu2(t) = (4 eta / 3) sin^3 mu1(t)            on [0, T/2]
    mu2(t) = -theta_g + mu2(T - t)               on [T/2, T].

Every ``tan mu1`` and ``1 / cos mu1`` factor appearing in the control
fields and phase rates is cancelled in closed form below, so nothing is
divided by a quantity that vanishes on the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.integrate import cumulative_simpson, simpson
from scipy.interpolate import CubicSpline

from .operators import QuantumOperator, QuantumState

INVARIANT_BASIS = "invariant2"  # ordered (|r xi->, |xi+ xi->)
DEFAULT_POINTS = 4097


def mu1_profile(t, T: float):
    """``pi sin^2(pi t / T)``."""
    return np.pi * np.sin(np.pi * np.asarray(t, dtype=float) / T) ** 2


def mu1_rate(t, T: float):
    return (np.pi ** 2 / T) * np.sin(2 * np.pi * np.asarray(t, dtype=float) / T)


def _second_half(t, T: float):
    return np.asarray(t, dtype=float) > 0.5 * T


def mu2_profile(t, T: float, eta: float = 1.0, theta_g: float = np.pi):
    """Second invariant angle; jumps by ``-theta_g`` just after ``T/2``.

    At ``t = T/2`` itself the first-half branch is returned.
    """
    base = (4.0 * eta / 3.0) * np.sin(mu1_profile(t, T)) ** 3
    return np.where(_second_half(t, T), base - theta_g, base)


def chi_profile(t, T: float, eta: float = 1.0, theta_g: float = np.pi):
    """``chi = mu2 + 2 alpha_2``; obeys ``chi(t) = chi(T - t) + theta_g`` after ``T/2``."""
    m1 = mu1_profile(t, T)
    base = eta * (2 * m1 - np.sin(2 * m1))
    return np.where(_second_half(t, T), base + theta_g, base)


class InvariantPoint(NamedTuple):
    mu1: np.ndarray
    mu2: np.ndarray
    dmu1: np.ndarray
    dmu2: np.ndarray


@dataclass(frozen=True, eq=False)
class InvariantTrajectory:
    """Invariant parameters sampled on a uniform grid over ``[0, T]``.

    The grid has an even number of intervals so that ``T/2`` is a sample;
    ``mu2`` takes its first-half value there.
    """

    T: float
    eta: float = 1.0
    theta_g: float = np.pi
    u: float = 1.0
    n_points: int = DEFAULT_POINTS
    t: np.ndarray = field(init=False)
    mu1: np.ndarray = field(init=False)
    mu2: np.ndarray = field(init=False)
    dmu1: np.ndarray = field(init=False)
    dmu2: np.ndarray = field(init=False)
    chi: np.ndarray = field(init=False)

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.n_points < 3 or self.n_points % 2 == 0:
            raise ValueError("n_points must be odd and >= 3 so that T/2 is on the grid")
        t = np.linspace(0.0, self.T, self.n_points)
        p = self.evaluate(t)
        for name, value in (("t", t), ("mu1", p.mu1), ("mu2", p.mu2), ("dmu1", p.dmu1),
                            ("dmu2", p.dmu2),
                            ("chi", chi_profile(t, self.T, self.eta, self.theta_g))):
            value = np.asarray(value)
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    def evaluate(self, t) -> InvariantPoint:
        m1 = mu1_profile(t, self.T)
        dm1 = mu1_rate(t, self.T)
        s = np.sin(m1)
        return InvariantPoint(
            mu1=m1,
            mu2=mu2_profile(t, self.T, self.eta, self.theta_g),
            dmu1=dm1,
            dmu2=4.0 * self.eta * s * s * np.cos(m1) * dm1,
        )

    def tan_mu1_dmu2(self, t):
        """``tan(mu1) * d(mu2)/dt`` with the cosine cancelled."""
        m1 = mu1_profile(t, self.T)
        return 4.0 * self.eta * np.sin(m1) ** 3 * mu1_rate(t, self.T)


def design_trajectory(T: float = 1.0, eta: float = 1.0, theta_g: float = np.pi,
                      u: float = 1.0, n_points: int = DEFAULT_POINTS) -> InvariantTrajectory:
    return InvariantTrajectory(T=T, eta=eta, theta_g=theta_g, u=u, n_points=n_points)


# ---------------------------------------------------------------------------
# Control fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PulseSchedule:
    """Control-field quadratures on a uniform grid.

    ``omega_a = sqrt(omega_x**2 + omega_y**2) / 2`` and
    ``phi_a = atan2(omega_y, omega_x)`` so that
    ``omega_a exp(i phi_a) = (omega_x + i omega_y) / 2``.

    :meth:`at` evaluates the exact fields when the schedule was designed
    from a trajectory and falls back to piecewise cubic interpolation
    (split at ``T/2``, where the fields have a kink) otherwise.
    """

    t: np.ndarray
    omega_x: np.ndarray
    omega_y: np.ndarray
    mu1: np.ndarray | None = None
    mu2: np.ndarray | None = None
    trajectory: InvariantTrajectory | None = None

    @property
    def T(self) -> float:
        return float(self.t[-1])

    @property
    def omega_a(self) -> np.ndarray:
        return 0.5 * np.hypot(self.omega_x, self.omega_y)

    @property
    def phi_a(self) -> np.ndarray:
        return np.arctan2(self.omega_y, self.omega_x)

    @property
    def omega_max(self) -> float:
        return float(max(np.max(np.abs(self.omega_x)), np.max(np.abs(self.omega_y))))

    def at(self, ts):
        ts = np.asarray(ts, dtype=float)
        if self.trajectory is not None:
            return _fields(self.trajectory, ts)
        return self._interpolated(ts)

    def _interpolated(self, ts):
        mid = np.searchsorted(self.t, 0.5 * self.T)
        if mid < self.t.size and np.isclose(self.t[mid], 0.5 * self.T) and 3 < mid < self.t.size - 4:
            halves = [slice(0, mid + 1), slice(mid, None)]
        else:
            halves = [slice(None)]
        out = []
        for samples in (self.omega_x, self.omega_y):
            splines = [CubicSpline(self.t[h], samples[h]) for h in halves]
            if len(splines) == 1:
                out.append(splines[0](ts))
            else:
                out.append(np.where(ts <= 0.5 * self.T, splines[0](ts), splines[1](ts)))
        return out[0], out[1]


def _fields(trajectory: InvariantTrajectory, t):
    p = trajectory.evaluate(t)
    a = trajectory.tan_mu1_dmu2(t)
    s2, c2 = np.sin(p.mu2), np.cos(p.mu2)
    omega_x = s2 * a - c2 * p.dmu1
    omega_y = c2 * a + s2 * p.dmu1
    return omega_x, omega_y


def control_fields(trajectory: InvariantTrajectory) -> PulseSchedule:
    """Invert the invariant equations for ``(omega_x, omega_y)``.

    Raises
    ------
    FloatingPointError
        If a non-finite field value appears.
    """
    ox, oy = _fields(trajectory, trajectory.t)
    if not (np.all(np.isfinite(ox)) and np.all(np.isfinite(oy))):
        raise FloatingPointError("non-finite control field; the profile breaks the cancellation")
    return PulseSchedule(trajectory.t, ox, oy, mu1=trajectory.mu1, mu2=trajectory.mu2,
                         trajectory=trajectory)


def invariant_ode_rates(mu1, mu2, omega_x, omega_y):
    """Right-hand side of the invariant-angle equations for given fields."""
    dmu1 = omega_y * np.sin(mu2) - omega_x * np.cos(mu2)
    dmu2 = (np.sin(mu2) * omega_x + np.cos(mu2) * omega_y) / np.tan(mu1)
    return dmu1, dmu2


def write_pulse_csv(path, pulse) -> None:
    """Write ``t,omega_x,omega_y,omega_a,phi_a,mu1,mu2``."""
    n = pulse.t.size
    ox, oy = np.asarray(pulse.omega_x), np.asarray(pulse.omega_y)
    base = getattr(pulse, "base", pulse)
    mu1 = base.mu1 if base.mu1 is not None else np.full(n, np.nan)
    mu2 = base.mu2 if base.mu2 is not None else np.full(n, np.nan)
    data = np.column_stack([pulse.t, ox, oy, 0.5 * np.hypot(ox, oy), np.arctan2(oy, ox),
                            mu1, mu2])
    np.savetxt(path, data, delimiter=",", header="t,omega_x,omega_y,omega_a,phi_a,mu1,mu2",
               comments="", fmt="%.17g")


def read_pulse_csv(path) -> PulseSchedule:
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    return PulseSchedule(data[:, 0], data[:, 1], data[:, 2], mu1=data[:, 5], mu2=data[:, 6])


# ---------------------------------------------------------------------------
# Invariant, eigenvectors, phases
# ---------------------------------------------------------------------------


def effective_two_level(omega_x, omega_y) -> np.ndarray:
    """``(omega_x s_x + omega_y s_y) / 2`` in the invariant basis."""
    c = 0.5 * (omega_x - 1j * omega_y)
    return np.array([[0, c], [np.conj(c), 0]], dtype=complex)


def invariant_operator(t: float, trajectory: InvariantTrajectory) -> QuantumOperator:
    p = trajectory.evaluate(t)
    m1, m2 = float(p.mu1), float(p.mu2)
    nx = math.sin(m1) * math.sin(m2)
    ny = math.sin(m1) * math.cos(m2)
    nz = math.cos(m1)
    mat = 0.5 * trajectory.u * np.array([[nz, nx - 1j * ny], [nx + 1j * ny, -nz]])
    return QuantumOperator(mat, INVARIANT_BASIS)


def invariant_eigenvectors(t: float, trajectory: InvariantTrajectory
                           ) -> tuple[QuantumState, QuantumState]:
    """Eigenvectors with eigenvalues ``+u/2`` and ``-u/2`` respectively."""
    p = trajectory.evaluate(t)
    c, s = math.cos(float(p.mu1) / 2), math.sin(float(p.mu1) / 2)
    m2 = float(p.mu2)
    v1 = np.array([c, 1j * np.exp(-1j * m2) * s])
    v2 = np.array([1j * np.exp(1j * m2) * s, c])
    return QuantumState(v1, INVARIANT_BASIS), QuantumState(v2, INVARIANT_BASIS)


class PhaseRates(NamedTuple):
    dynamic_1: np.ndarray
    geometric_1: np.ndarray
    dynamic_2: np.ndarray
    geometric_2: np.ndarray


def phase_rates(t, trajectory: InvariantTrajectory) -> PhaseRates:
    """Dynamic and geometric phase rates along both invariant eigenvectors.

    Uses ``mu2' sin^2 mu1 / (2 cos mu1) = 2 eta sin^4 mu1 mu1'``.
    The geometric rate excludes the ``theta_g`` jump at ``T/2``.
    """
    m1 = mu1_profile(t, trajectory.T)
    dm1 = mu1_rate(t, trajectory.T)
    s = np.sin(m1)
    dyn2 = 2.0 * trajectory.eta * s ** 4 * dm1
    geo2 = -4.0 * trajectory.eta * s * s * np.cos(m1) * np.sin(0.5 * m1) ** 2 * dm1
    return PhaseRates(-dyn2, -geo2, dyn2, geo2)


class PhaseLedger(NamedTuple):
    t: np.ndarray
    dynamic: np.ndarray
    geometric: np.ndarray


def integrate_phases(trajectory: InvariantTrajectory) -> PhaseLedger:
    """Cumulative dynamic and geometric phases of ``|theta_2>`` on the grid.

    Each half is integrated with Simpson's rule; the geometric phase gains
    ``theta_g`` across ``T/2`` where ``mu2`` jumps with ``mu1 = pi``.  The
    value stored at ``T/2`` is the one reached from the left.
    """
    t = trajectory.t
    mid = t.size // 2
    rates = phase_rates(t, trajectory)
    dyn = np.empty_like(t)
    geo = np.empty_like(t)
    for rate, out in ((rates.dynamic_2, dyn), (rates.geometric_2, geo)):
        left = cumulative_simpson(rate[: mid + 1], x=t[: mid + 1], initial=0.0)
        right = cumulative_simpson(rate[mid:], x=t[mid:], initial=0.0)
        out[: mid + 1] = left
        out[mid + 1:] = left[-1] + right[1:]
    geo[mid + 1:] += trajectory.theta_g
    return PhaseLedger(t, dyn, geo)


# ---------------------------------------------------------------------------
# Systematic-error sensitivity
# ---------------------------------------------------------------------------


class Sensitivity(NamedTuple):
    closed_form: float
    quadrature: float


def sensitivity_closed_form(eta: float) -> float:
    """``sin^2(eta pi) / eta^2`` (``pi^2`` in the ``eta -> 0`` limit)."""
    if eta < 0:
        raise ValueError("eta must be non-negative")
    if eta == 0:
        return math.pi ** 2
    return math.sin(eta * math.pi) ** 2 / eta ** 2


def sensitivity_quadrature(eta: float, T: float = 1.0, n_points: int = DEFAULT_POINTS) -> float:
    """``|int exp(i chi) mu1' sin^2 mu1 dt|^2`` with ``chi = mu2 + 2 alpha_2``.

    ``alpha_2`` is built from the numerically integrated phase rates, not
    from the closed form of ``chi``.
    """
    traj = design_trajectory(T=T, eta=eta, n_points=n_points)
    ledger = integrate_phases(traj)
    chi = traj.mu2 + 2.0 * (ledger.dynamic + ledger.geometric)
    integrand = np.exp(1j * chi) * traj.dmu1 * np.sin(traj.mu1) ** 2
    mid = traj.t.size // 2
    # T/2 belongs to both halves; integrand vanishes there.
    total = (simpson(integrand[: mid + 1], x=traj.t[: mid + 1])
             + simpson(integrand[mid:], x=traj.t[mid:]))
    return float(abs(total) ** 2)


def sensitivity_qs(eta: float, T: float = 1.0, n_points: int = DEFAULT_POINTS) -> Sensitivity:
    if eta < 0:
        raise ValueError("eta must be non-negative")
    return Sensitivity(sensitivity_closed_form(eta), sensitivity_quadrature(eta, T, n_points))
