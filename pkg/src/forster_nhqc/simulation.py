"""End-to-end gate runs: pulse, model, propagation and figures of merit.

Propagation happens in the dressed product basis (see
:func:`~forster_nhqc.atom.dressed_rotation`), where the Hamiltonian splits
into smaller invariant blocks; results are rotated back to the bare
computational basis before they are returned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import atom
from .dynamics import (PropagationConfig, TermHamiltonian, TraceDriftError,
                       propagate_computational_basis, propagate_lindblad, propagate_state)
from .metrics import (TruthTable, gate_fidelity, open_system_average_fidelity, state_fidelity,
                      truth_table, truth_table_from_densities)
from .pulses import PulseSchedule, control_fields, design_trajectory

COMP = list(atom.COMPUTATIONAL_INDICES)


def design_pulse(T: float = 1.0, eta: float = 1.0, n_points: int = 4097) -> PulseSchedule:
    return control_fields(design_trajectory(T=T, eta=eta, n_points=n_points))


def _frame(stage: str, params: atom.ModelParams, pulse):
    """Hamiltonian source in the fastest available basis and the rotation used."""
    src = atom.stage_source(stage, params, pulse)
    if isinstance(src, TermHamiltonian):
        w = atom.dressed_rotation(params.v_a, params.v_b)
        return src.transformed(w), w
    return src, np.eye(atom.DIM, dtype=complex)


def gate_propagators(params: atom.ModelParams, pulse, times=None, stage: str = "full",
                     config: PropagationConfig | None = None) -> np.ndarray:
    """Projected ``4x4`` propagators on the computational subspace at `times`."""
    times = np.array([0.0, params.T] if times is None else times, dtype=float)
    src, w = _frame(stage, params, pulse)
    wc = w[np.ix_(COMP, COMP)]
    # computational states are closed under the rotation, so only the 4x4 block is needed
    cols = propagate_state(src, w.conj().T[:, COMP], times, config).states
    return wc @ cols[:, COMP, :]


def gate_fidelity_at_T(params: atom.ModelParams, pulse, target, stage: str = "full",
                       config: PropagationConfig | None = None) -> float:
    u = gate_propagators(params, pulse, stage=stage, config=config)[-1]
    return gate_fidelity(u, np.asarray(target))


def full_propagator(params: atom.ModelParams, pulse, stage: str = "full",
                    config: PropagationConfig | None = None) -> np.ndarray:
    """The full ``25x25`` propagator over ``[0, T]`` in the bare basis."""
    src, w = _frame(stage, params, pulse)
    u = propagate_state(src, np.eye(atom.DIM, dtype=complex), [0.0, params.T], config).final
    return w @ u @ w.conj().T


def state_trace(params: atom.ModelParams, pulse, psi0, times, stage: str = "full",
                config: PropagationConfig | None = None) -> np.ndarray:
    """Bare-basis states at `times` starting from the 25-component `psi0`."""
    src, w = _frame(stage, params, pulse)
    states = propagate_state(src, w.conj().T @ np.asarray(psi0, dtype=complex), times,
                             config).states
    return states @ w.T


@dataclass(frozen=True)
class ChannelResult:
    """Computational-subspace images ``E(|i><j|)`` of an open-system gate run."""

    images: np.ndarray      # (4, 4, 4, 4): input i, input j, output block
    trace_drift: float
    n_steps: int

    def average_fidelity(self, target) -> float:
        return open_system_average_fidelity(self.images, np.asarray(target))

    def output(self, amplitudes) -> np.ndarray:
        """Projected output density for the input ``sum_i c_i |i>``."""
        c = np.asarray(amplitudes, dtype=complex)
        return np.einsum("i,j,ijab->ab", c, c.conj(), self.images)

    def state_fidelity(self, amplitudes, target_amplitudes) -> float:
        return state_fidelity(self.output(amplitudes), np.asarray(target_amplitudes))

    def truth_table(self) -> TruthTable:
        return truth_table_from_densities([self.images[i, i] for i in range(4)],
                                          computational_indices=range(4))


def open_system_channel(params: atom.ModelParams, pulse, stage: str = "full",
                        config: PropagationConfig | None = None,
                        trace_tol: float = 1e-7) -> ChannelResult:
    """Propagate all sixteen ``|i><j|`` through the Lindblad equation.

    Raises
    ------
    TraceDriftError
        If a diagonal input ``|i><i|`` loses or gains trace beyond `trace_tol`.
    """
    src, w = _frame(stage, params, pulse)
    ops = [w.conj().T @ np.asarray(c) @ w for c in atom.lindblad_operators(params.gamma)]
    kets = w.conj().T[:, COMP]
    stack = np.array([np.outer(kets[:, i], kets[:, j].conj()) for i in range(4) for j in range(4)])
    trace = propagate_lindblad(src, ops, stack, [0.0, params.T], config, check_input=False)
    final = w @ trace.final @ w.conj().T
    drift = max(abs(np.trace(final[5 * i]) - 1.0) for i in range(4))
    if drift > trace_tol:
        raise TraceDriftError(f"trace drifted by {drift:.3e}")
    images = final[:, COMP][:, :, COMP].reshape(4, 4, 4, 4)
    return ChannelResult(images, float(drift), trace.n_steps)


def closed_truth_table(params: atom.ModelParams, pulse, stage: str = "full",
                       config: PropagationConfig | None = None) -> TruthTable:
    return truth_table(gate_propagators(params, pulse, stage=stage, config=config)[-1])
