"""Holonomic two-qubit gates on Förster-coupled Rydberg atoms.

Submodules
----------
operators   dense operator algebra with basis labels
atom        two-atom model, Hamiltonian stages, target gates, collapse operators
pulses      invariant-based pulse design, phases and error sensitivity
dynamics    Schrödinger and Lindblad propagation, AWGN injection
metrics     fidelities, truth tables, phase ledgers
simulation  end-to-end gate runs
config, cli scenario files and the ``forster-nhqc`` command
"""

__version__ = "0.1.0"
