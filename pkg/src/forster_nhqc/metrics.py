"""Fidelities, truth tables, phase ledgers and the perturbative sensitivity."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from .pulses import (InvariantTrajectory, PhaseLedger, effective_two_level, integrate_phases,
                     control_fields)

N_COMP = 4
METRICS = ("average-gate", "state", "density-state")


def average_gate_fidelity(m) -> float:
    """``(Tr[M M†] + |Tr M|^2) / (N (N + 1))`` for ``M = P U_target† U P``."""
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    return float((np.trace(m @ m.conj().T).real + abs(np.trace(m)) ** 2) / (n * (n + 1)))


def gate_fidelity(u_comp, target) -> float:
    """Average fidelity of the projected propagator `u_comp` against `target`."""
    return average_gate_fidelity(np.asarray(target).conj().T @ np.asarray(u_comp))


def state_fidelity(state, target) -> float:
    """``|<target|psi>|^2`` for a vector, ``<target|rho|target>`` for a matrix."""
    s = np.asarray(state, dtype=complex)
    tgt = np.asarray(target, dtype=complex)
    if s.ndim == 1:
        return float(abs(np.vdot(tgt, s)) ** 2)
    return float(np.real(tgt.conj() @ s @ tgt))


@dataclass(frozen=True, eq=False)
class FidelityTrace:
    times: np.ndarray
    values: np.ndarray
    metric: str = "average-gate"

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        v = np.asarray(self.values, dtype=float)
        if v.shape != np.shape(self.times):
            raise ValueError("times and values differ in length")
        if np.any(v < -1e-9) or np.any(v > 1 + 1e-9):
            raise ValueError("fidelity values must lie in [0, 1]")

    @property
    def final(self) -> float:
        return float(self.values[-1])

    def write_csv(self, path) -> None:
        write_columns_csv(path, {"t": self.times, "fidelity": self.values})


def gate_fidelity_trace(times, u_comps, target) -> FidelityTrace:
    """Average gate fidelity of each ``4x4`` block in `u_comps` against `target`."""
    vals = np.array([gate_fidelity(u, target) for u in u_comps])
    return FidelityTrace(np.asarray(times, dtype=float), np.clip(vals, 0.0, 1.0))


@dataclass(frozen=True, eq=False)
class TruthTable:
    """``populations[i, o] = |<o| U |i>|^2`` over computational inputs ``i``."""

    populations: np.ndarray
    labels: tuple[str, ...] = ("00", "01", "10", "11")

    def __post_init__(self):
        p = np.asarray(self.populations, dtype=float)
        if p.shape != (N_COMP, N_COMP):
            raise ValueError("truth table must be 4x4")
        if np.any(p < -1e-7) or np.any(p > 1 + 1e-7) or np.any(p.sum(axis=1) > 1 + 1e-7):
            raise ValueError("populations must lie in [0, 1] with row sums <= 1")
        object.__setattr__(self, "populations", p)

    @property
    def leakage(self) -> np.ndarray:
        return 1.0 - self.populations.sum(axis=1)

    def success(self, target) -> np.ndarray:
        """Population of the ideal image of each input under `target`."""
        image = np.argmax(np.abs(np.asarray(target)), axis=0)
        return self.populations[np.arange(N_COMP), image]

    def min_success(self, target) -> float:
        return float(self.success(target).min())

    def to_text(self) -> str:
        head = "in\\out " + " ".join(f"{lab:>8}" for lab in self.labels)
        rows = [f"{lab:>6} " + " ".join(f"{v:8.5f}" for v in row)
                for lab, row in zip(self.labels, self.populations)]
        return "\n".join([head] + rows) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_text())

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["input"] + [f"p_{lab}" for lab in self.labels])
            for lab, row in zip(self.labels, self.populations):
                w.writerow([lab] + [f"{v:.12g}" for v in row])


def truth_table(u, computational_indices=(0, 1, 5, 6)) -> TruthTable:
    """Truth table of a full propagator or of a projected ``4x4`` block."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (N_COMP, N_COMP):
        idx = list(computational_indices)
        u = u[np.ix_(idx, idx)]
    return TruthTable(np.abs(u.T) ** 2)


def truth_table_from_densities(rhos, computational_indices=(0, 1, 5, 6)) -> TruthTable:
    """Truth table from the final density operators of the four basis inputs."""
    idx = list(computational_indices)
    pops = np.array([np.real(np.diag(r)[idx]) for r in rhos])
    return TruthTable(np.clip(pops, 0.0, 1.0))


def open_system_average_fidelity(images, target) -> float:
    """Average fidelity of a channel restricted to the computational subspace.

    `images[i][j]` is the ``d x d`` (or already projected ``4 x 4``) output
    of the channel applied to ``|i><j|``.  With ``A_ij = <i|U† E(|i><j|) U|j>``
    the average fidelity is ``(sum_ij A_ij + sum_i Tr P E(|i><i|)) / (N (N+1))``,
    which reduces to the unitary formula when ``E`` is a unitary map.
    """
    images = np.asarray(images, dtype=complex)
    n = N_COMP
    if images.shape[-1] != n:
        raise ValueError("project the channel images onto the computational subspace first")
    u = np.asarray(target, dtype=complex)
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += (u[:, i].conj() @ images[i, j] @ u[:, j]).real
    total += sum(np.trace(images[i, i]).real for i in range(n))
    return float(total / (n * (n + 1)))


# ---------------------------------------------------------------------------
# Phases
# ---------------------------------------------------------------------------


def accumulated_phases(trajectory: InvariantTrajectory) -> PhaseLedger:
    """Cumulative dynamic and geometric phases of the gate eigenvector."""
    return integrate_phases(trajectory)


def _eigvec2(trajectory: InvariantTrajectory, t) -> np.ndarray:
    p = trajectory.evaluate(t)
    s, c = np.sin(p.mu1 / 2), np.cos(p.mu1 / 2)
    return np.stack([1j * np.exp(1j * p.mu2) * s, c + 0j], axis=-1)


def _eigvec1(trajectory: InvariantTrajectory, t) -> np.ndarray:
    p = trajectory.evaluate(t)
    s, c = np.sin(p.mu1 / 2), np.cos(p.mu1 / 2)
    return np.stack([c + 0j, 1j * np.exp(-1j * p.mu2) * s], axis=-1)


def _split_integral(t, f, cumulative=False):
    """Simpson's rule on each half of an odd grid."""
    mid = t.size // 2
    if not cumulative:
        return simpson(f[: mid + 1], x=t[: mid + 1]) + simpson(f[mid:], x=t[mid:])
    left = cumulative_simpson(f[: mid + 1], x=t[: mid + 1], initial=0.0)
    right = cumulative_simpson(f[mid:], x=t[mid:], initial=0.0)
    return np.concatenate([left, left[-1] + right[1:]])


def simulated_phases(trajectory: InvariantTrajectory, states, hamiltonians) -> PhaseLedger:
    """Phase ledger measured from a propagated two-level state.

    `states` are ``psi(t)`` on ``trajectory.t`` in the invariant basis
    ``(|r xi->, |xi+ xi->)`` starting from ``|xi+ xi->``; `hamiltonians` the
    matching ``2x2`` Hamiltonians.  The dynamic phase is
    ``-int <psi|H|psi> dt``; the total phase is ``arg <theta_2(t)|psi(t)>``
    tracked by continuity on each half, with the branch across ``T/2``
    chosen nearest to the designed ``theta_g`` jump of the eigenvector gauge.
    At ``t = T`` the total phase is anchored to ``arg <xi+ xi-|psi(T)>``
    on the branch nearest the tracked value.
    """
    t = trajectory.t
    psi = np.asarray(states, dtype=complex)
    h = np.asarray(hamiltonians, dtype=complex)
    energy = np.real(np.einsum("ni,nij,nj->n", psi.conj(), h, psi))
    dynamic = -_split_integral(t, energy, cumulative=True)
    overlap = np.einsum("ni,ni->n", _eigvec2(trajectory, t).conj(), psi)
    mid = t.size // 2
    total = np.empty_like(t)
    total[: mid + 1] = np.unwrap(np.angle(overlap[: mid + 1]))
    right = np.unwrap(np.angle(overlap[mid + 1:]))
    expected = total[mid] + trajectory.theta_g
    right += 2 * np.pi * np.round((expected - right[0]) / (2 * np.pi))
    total[mid + 1:] = right
    direct = np.angle(psi[-1, 1])
    total[-1] = direct + 2 * np.pi * np.round((total[-1] - direct) / (2 * np.pi))
    return PhaseLedger(t, dynamic, total - dynamic)


def effective_state_trace(trajectory: InvariantTrajectory, epsilon: float = 0.0,
                          steps: int = 16384):
    """Propagate ``|xi+ xi->`` under the designed two-level Hamiltonian.

    Returns ``(states, hamiltonians)`` sampled on ``trajectory.t``.
    """
    from .dynamics import FunctionHamiltonian, PropagationConfig, propagate_state

    pulse = control_fields(trajectory)

    def fn(ts):
        ox, oy = pulse.at(ts)
        c = 0.5 * (1 + epsilon) * (ox - 1j * oy)
        out = np.zeros((ts.size, 2, 2), dtype=complex)
        out[:, 0, 1] = c
        out[:, 1, 0] = np.conj(c)
        return out

    src = FunctionHamiltonian(fn, 2, pattern=np.ones((2, 2), bool))
    trace = propagate_state(src, np.array([0, 1], dtype=complex), trajectory.t,
                            PropagationConfig(steps=steps))
    return trace.states, fn(trajectory.t)


# ---------------------------------------------------------------------------
# Systematic error
# ---------------------------------------------------------------------------


def perturbative_amplitude(trajectory: InvariantTrajectory) -> complex:
    """``int e^{2 i alpha_2} <theta_1|H_eff|theta_2> dt`` on the trajectory grid.

    ``alpha_2`` is the Lewis-Riesenfeld phase of ``|theta_2>`` and
    ``alpha_1 = -alpha_2``.
    """
    t = trajectory.t
    pulse = control_fields(trajectory)
    ledger = integrate_phases(trajectory)
    alpha2 = ledger.dynamic + ledger.geometric
    h = np.array([effective_two_level(x, y) for x, y in zip(pulse.omega_x, pulse.omega_y)])
    v1, v2 = _eigvec1(trajectory, t), _eigvec2(trajectory, t)
    elem = np.einsum("ni,nij,nj->n", v1.conj(), h, v2)
    return complex(_split_integral(t, np.exp(2j * alpha2) * elem))


def perturbative_infidelity(trajectory: InvariantTrajectory, epsilon: float) -> float:
    """Second-order estimate ``eps^2 |int e^{2 i alpha_2} <theta_1|H_eff|theta_2> dt|^2``."""
    if abs(epsilon) > 0.2:
        raise ValueError("the perturbative estimate is only offered for |epsilon| <= 0.2")
    return float(epsilon ** 2 * abs(perturbative_amplitude(trajectory)) ** 2)


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------


def write_columns_csv(path, columns: dict) -> None:
    names = list(columns)
    data = [np.asarray(columns[n]) for n in names]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in zip(*data):
            w.writerow([f"{float(v):.12g}" for v in row])


def write_phase_csv(path, ledger: PhaseLedger) -> None:
    write_columns_csv(path, {"t": ledger.t, "dynamic": ledger.dynamic,
                             "geometric": ledger.geometric})
