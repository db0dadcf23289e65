"""Time-ordered propagation of states, propagators and density operators.

Two integrators are provided and cross-check each other:

``"expm"``
    Piecewise exponential stepping with the fourth-order Magnus expansion
    (two Gauss-Legendre nodes per step).  Each step generator is
    diagonalised block by block, using the connected components of the
    Hamiltonian's structural sparsity pattern, so the step maps are
    unitary to machine precision.  Open systems use Strang splitting with
    the exact exponential of the (constant) dissipator.
``"rk"``
    Adaptive embedded Runge-Kutta (DOP853) on the state or density vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.sparse.csgraph import connected_components

from .operators import NotHermitianError

_GAUSS_OFFSET = math.sqrt(3.0) / 6.0
_MAGNUS_C = math.sqrt(3.0) / 12.0


class ConvergenceError(RuntimeError):
    """Integrator results changed by more than the certificate tolerance."""


class TraceDriftError(RuntimeError):
    """Density-operator trace drifted beyond tolerance."""


# ---------------------------------------------------------------------------
# Hamiltonian sources
# ---------------------------------------------------------------------------


class TermHamiltonian:
    """``H(t) = H0 + sum_k c_k(t) A_k`` with fixed operators ``A_k``.

    Coefficient functions must accept a 1-D array of times and return an
    array of the same length.  Hermiticity is the caller's job: add each
    non-Hermitian ``A`` together with ``A†`` and the conjugate coefficient.
    """

    def __init__(self, static, terms: Sequence[tuple[np.ndarray, Callable]] = ()):
        self.static = np.asarray(static, dtype=complex)
        self.dim = self.static.shape[0]
        ops = [np.asarray(a, dtype=complex) for a, _ in terms]
        self._ops = np.array(ops).reshape(len(ops), self.dim, self.dim)
        self._coeffs = [c for _, c in terms]
        pattern = np.abs(self.static) > 0
        for a in ops:
            pattern |= np.abs(a) > 0
        self.pattern = pattern

    def transformed(self, w: np.ndarray, tol: float = 1e-13) -> "TermHamiltonian":
        """The same Hamiltonian written in the basis given by the columns of `w`.

        Entries below ``tol`` times the largest entry of each operator are
        set to zero so that the sparsity pattern survives the rotation.
        """
        w = np.asarray(w, dtype=complex)

        def rotate(a):
            b = w.conj().T @ a @ w
            b[np.abs(b) <= tol * max(np.max(np.abs(a)), 1e-300)] = 0.0
            return b

        return TermHamiltonian(rotate(self.static),
                               [(rotate(a), c) for a, c in zip(self._ops, self._coeffs)])

    def batch(self, ts) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        out = np.broadcast_to(self.static, (ts.size, self.dim, self.dim)).copy()
        if self._coeffs:
            coeffs = np.stack([np.broadcast_to(c(ts), ts.shape) for c in self._coeffs],
                              axis=1).astype(complex)
            k = len(self._coeffs)
            out += (coeffs @ self._ops.reshape(k, -1)).reshape(out.shape)
        return out

    def __call__(self, t) -> np.ndarray:
        return self.batch(np.array([t]))[0]


class FunctionHamiltonian:
    """Hamiltonian given by a vectorised function ``ts -> (n, d, d)``.

    The sparsity pattern is taken from evaluations at `probe_times`; pass
    `pattern` explicitly when entries can vanish at every probe.
    """

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], dim: int,
                 probe_times=None, pattern=None):
        self._fn = fn
        self.dim = dim
        if pattern is None:
            probes = np.atleast_1d(probe_times if probe_times is not None else [0.0])
            pattern = np.any(np.abs(fn(np.asarray(probes, dtype=float))) > 0, axis=0)
        self.pattern = np.asarray(pattern, dtype=bool)

    def batch(self, ts) -> np.ndarray:
        return self._fn(np.atleast_1d(np.asarray(ts, dtype=float)))

    def __call__(self, t) -> np.ndarray:
        return self.batch(np.array([t]))[0]


def as_source(h):
    """Wrap a constant matrix as a Hamiltonian source; pass sources through."""
    if hasattr(h, "batch"):
        return h
    return TermHamiltonian(np.asarray(h, dtype=complex))


def block_partition(pattern: np.ndarray) -> list[np.ndarray]:
    """Index sets of the invariant blocks of a sparsity pattern."""
    sym = np.asarray(pattern, dtype=bool)
    sym = sym | sym.T
    n, labels = connected_components(sp.csr_matrix(sym), directed=False)
    return [np.flatnonzero(labels == k) for k in range(n)]


# ---------------------------------------------------------------------------
# Configuration and results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PropagationConfig:
    """Integrator settings.

    ``steps=None`` picks the step count from the Hamiltonian norm so that
    ``max ||H|| dt <= max_phase_per_step``, but never fewer than
    `min_steps`.  `frame` records which Hamiltonian a scenario propagates
    (``"full"``, ``"rotating"`` or ``"effective"``); the engine itself does
    not interpret it.
    """

    method: str = "expm"
    steps: int | None = None
    min_steps: int = 4096
    max_phase_per_step: float = 0.9
    rtol: float = 1e-9
    atol: float = 1e-11
    frame: str = "full"
    seed: int = 0
    chunk: int = 2048
    certify: bool = False
    certificate_tol: float = 1e-5

    def __post_init__(self):
        if self.method not in ("expm", "rk"):
            raise ValueError(f"unknown integrator {self.method!r}; use 'expm' or 'rk'")
        if self.frame not in ("full", "rotating", "effective"):
            raise ValueError(f"unknown frame {self.frame!r}")

    def refined(self, n_steps: int) -> "PropagationConfig":
        """Config with half the step (expm) or a 10x tighter tolerance (rk)."""
        if self.method == "expm":
            return replace(self, steps=2 * n_steps)
        return replace(self, rtol=self.rtol / 10, atol=self.atol / 10)


@dataclass
class StateTrace:
    times: np.ndarray
    states: np.ndarray  # (n_times, d) or (n_times, d, k)
    n_steps: int = 0

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


@dataclass
class DensityTrace:
    times: np.ndarray
    rhos: np.ndarray  # (n_times, d, d) or (n_times, k, d, d)
    n_steps: int = 0

    @property
    def final(self) -> np.ndarray:
        return self.rhos[-1]


# ---------------------------------------------------------------------------
# Step construction
# ---------------------------------------------------------------------------


def _spectral_bound(source, t0: float, t1: float, n_probe: int = 33) -> float:
    hs = source.batch(np.linspace(t0, t1, n_probe))
    return float(np.max(np.linalg.norm(hs, ord=2, axis=(1, 2))))


def _step_count(source, t0: float, t1: float, config: PropagationConfig) -> int:
    if config.steps is not None:
        return int(config.steps)
    # sources may declare oscillations faster than their norm suggests
    rate = _spectral_bound(source, t0, t1) + getattr(source, "frequency_bound", 0.0)
    n = math.ceil(rate * (t1 - t0) / config.max_phase_per_step)
    n = max(n, config.min_steps)
    return n + (n % 2)


def _step_grid(times: np.ndarray, n_total: int
               ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Step start times/widths whose boundaries include every sample time.

    Returns the per-step arrays and, for each sample time, the number of
    steps completed when it is reached.
    """
    span = times[-1] - times[0]
    starts, widths, marks = [], [], [0]
    for a, b in zip(times[:-1], times[1:]):
        k = max(1, math.ceil(round(n_total * (b - a) / span, 9))) if b > a else 0
        if k:
            edges = np.linspace(a, b, k + 1)
            starts.append(edges[:-1])
            widths.append(np.diff(edges))
        marks.append(marks[-1] + k)
    if not starts:
        return np.zeros(0), np.zeros(0), np.array(marks)
    return np.concatenate(starts), np.concatenate(widths), np.array(marks)


def _block_unitaries(h1: np.ndarray, h2: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Fourth-order Magnus step ``exp(-i G)`` from the two Gauss-point samples."""
    if h1.shape[1] == 1:
        return np.exp(-0.5j * w * (h1 + h2).real)
    comm = h2 @ h1 - h1 @ h2
    gen = 0.5 * w * (h1 + h2) - 1j * _MAGNUS_C * w * w * comm
    vals, vecs = np.linalg.eigh(gen)
    return (vecs * np.exp(-1j * vals)[:, None, :]) @ np.conj(np.swapaxes(vecs, 1, 2))


def _step_unitaries(source, starts: np.ndarray, widths: np.ndarray, blocks: list[np.ndarray],
                    herm_tol: float = 1e-10) -> np.ndarray:
    h1 = source.batch(starts + (0.5 - _GAUSS_OFFSET) * widths)
    h2 = source.batch(starts + (0.5 + _GAUSS_OFFSET) * widths)
    defect = max(np.max(np.abs(h - np.conj(np.swapaxes(h, 1, 2)))) for h in (h1, h2))
    if defect > herm_tol * max(1.0, float(np.max(np.abs(h1)))):
        raise NotHermitianError(f"Hamiltonian is not Hermitian (defect {defect:.3e})")
    n, d, _ = h1.shape
    w = widths[:, None, None]
    out = np.zeros((n, d, d), dtype=complex)
    for idx in blocks:
        sel = (slice(None), idx[:, None], idx[None, :])
        out[sel] = _block_unitaries(np.ascontiguousarray(h1[sel]),
                                    np.ascontiguousarray(h2[sel]), w)
    return out


def _iter_step_maps(source, starts, widths, config: PropagationConfig):
    blocks = block_partition(source.pattern)
    for s in range(0, starts.size, config.chunk):
        sl = slice(s, s + config.chunk)
        yield from _step_unitaries(source, starts[sl], widths[sl], blocks)


def _check_hermitian(source, times) -> None:
    hs = source.batch(np.linspace(times[0], times[-1], 9))
    defect = float(np.max(np.abs(hs - np.conj(np.swapaxes(hs, 1, 2)))))
    if defect > 1e-10 * max(1.0, float(np.max(np.abs(hs)))):
        raise NotHermitianError(f"Hamiltonian is not Hermitian (defect {defect:.3e})")


# ---------------------------------------------------------------------------
# Closed-system propagation
# ---------------------------------------------------------------------------


def propagate_state(hamiltonian, psi0, times, config: PropagationConfig | None = None
                    ) -> StateTrace:
    """Solve ``i dψ/dt = H(t) ψ`` and return ψ at each of `times`.

    `psi0` may be a vector of length ``d`` or a ``(d, k)`` matrix of
    columns propagated together (e.g. the identity for the full
    propagator).  The integration runs from ``times[0]`` to ``times[-1]``.
    """
    config = config or PropagationConfig()
    source = as_source(hamiltonian)
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) < 0):
        raise ValueError("times must be a non-decreasing 1-D array with >= 2 entries")
    psi = np.array(psi0, dtype=complex)
    vector = psi.ndim == 1
    if vector:
        norm = np.linalg.norm(psi)
        if abs(norm - 1.0) > 1e-8:
            raise ValueError(f"initial state is not normalised (norm {norm:.12f})")
        psi = psi[:, None]
    _check_hermitian(source, times)

    if config.method == "rk":
        out, n_steps = _rk_state(source, psi, times, config)
    else:
        n_steps = _step_count(source, times[0], times[-1], config)
        starts, widths, marks = _step_grid(times, n_steps)
        out = np.empty((times.size,) + psi.shape, dtype=complex)
        out[0] = psi
        cur, k, rec = psi, 0, 1
        for u in _iter_step_maps(source, starts, widths, config):
            cur = u @ cur
            k += 1
            while rec < times.size and marks[rec] == k:
                out[rec] = cur
                rec += 1
        while rec < times.size:
            out[rec] = cur
            rec += 1
        n_steps = starts.size
    if vector:
        out = out[..., 0]
    return StateTrace(times, out, n_steps)


def _rk_state(source, psi: np.ndarray, times: np.ndarray, config: PropagationConfig):
    shape = psi.shape

    def rhs(t, y):
        return (-1j * (source(t) @ y.reshape(shape))).ravel()

    sol = solve_ivp(rhs, (times[0], times[-1]), psi.ravel(), method="DOP853",
                    t_eval=times, rtol=config.rtol, atol=config.atol)
    if not sol.success:
        raise ConvergenceError(sol.message)
    out = sol.y.T.reshape((times.size,) + shape)
    return out, int(sol.nfev)


def propagator(hamiltonian, t0: float, t1: float, config: PropagationConfig | None = None
               ) -> np.ndarray:
    """Full ``U(t1, t0)``."""
    source = as_source(hamiltonian)
    trace = propagate_state(source, np.eye(source.dim, dtype=complex), [t0, t1], config)
    return trace.final


def propagate_computational_basis(hamiltonian, computational_indices, times,
                                  config: PropagationConfig | None = None) -> np.ndarray:
    """Propagate the computational basis states and project back.

    Returns an array ``(n_times, 4, 4)`` whose column ``j`` holds the
    computational-subspace components of ``U(t)|j>``.
    """
    source = as_source(hamiltonian)
    idx = np.asarray(computational_indices)
    cols = np.eye(source.dim, dtype=complex)[:, idx]
    trace = propagate_state(source, cols, times, config)
    return trace.states[:, idx, :]


# ---------------------------------------------------------------------------
# Open-system propagation
# ---------------------------------------------------------------------------


def dissipator_superoperator(collapse_ops) -> np.ndarray:
    """Row-major superoperator of ``sum_L (L ρ L† - {L†L, ρ}/2)``."""
    ops = [np.asarray(c, dtype=complex) for c in collapse_ops]
    d = ops[0].shape[0]
    eye = np.eye(d)
    sup = np.zeros((d * d, d * d), dtype=complex)
    for c in ops:
        cdc = c.conj().T @ c
        sup += np.kron(c, c.conj()) - 0.5 * np.kron(cdc, eye) - 0.5 * np.kron(eye, cdc.T)
    return sup


def lindblad_rhs(h: np.ndarray, collapse_ops, rho: np.ndarray) -> np.ndarray:
    """``dρ/dt = -i[H, ρ] + sum_L (L ρ L† - {L†L, ρ}/2)``."""
    out = -1j * (h @ rho - rho @ h)
    for c in collapse_ops:
        cd = c.conj().T
        cdc = cd @ c
        out += c @ rho @ cd - 0.5 * (cdc @ rho + rho @ cdc)
    return out


def propagate_lindblad(hamiltonian, collapse_ops, rho0, times,
                       config: PropagationConfig | None = None,
                       trace_tol: float = 1e-7, check_input: bool = True) -> DensityTrace:
    """Integrate the Lindblad master equation.

    `rho0` is a ``(d, d)`` density operator or a stack ``(k, d, d)`` of
    operators propagated together.  Because the equation is linear the
    stack members need not be physical states (``check_input=False``),
    which is how process fidelities are assembled from ``|i><j|``.

    Raises
    ------
    TraceDriftError
        If the trace of any physical input drifts by more than `trace_tol`.
    """
    config = config or PropagationConfig()
    source = as_source(hamiltonian)
    times = np.asarray(times, dtype=float)
    rho = np.array(rho0, dtype=complex)
    single = rho.ndim == 2
    if single:
        rho = rho[None]
    if check_input:
        for r in rho:
            if np.max(np.abs(r - r.conj().T)) > 1e-10:
                raise ValueError("initial density operator is not Hermitian")
            if abs(np.trace(r) - 1.0) > 1e-10:
                raise ValueError("initial density operator does not have unit trace")
            if np.linalg.eigvalsh(r).min() < -1e-10:
                raise ValueError("initial density operator is not positive semidefinite")
    ops = [np.asarray(c, dtype=complex) for c in collapse_ops]
    ops = [c for c in ops if np.any(c)]
    _check_hermitian(source, times)
    d = source.dim

    if config.method == "rk":
        out, n_steps = _rk_lindblad(source, ops, rho, times, config)
    else:
        n_steps = _step_count(source, times[0], times[-1], config)
        starts, widths, marks = _step_grid(times, n_steps)
        out = np.empty((times.size,) + rho.shape, dtype=complex)
        out[0] = rho
        sup = dissipator_superoperator(ops) if ops else None
        half_maps: dict[float, sp.csr_matrix] = {}

        def dissipate(r, width):
            if sup is None:
                return r
            key = round(float(width), 15)
            m = half_maps.get(key)
            if m is None:
                dense = sla.expm(sup * (0.5 * width))
                dense[np.abs(dense) < 1e-300] = 0.0
                m = half_maps[key] = sp.csr_matrix(dense)
            flat = r.reshape(r.shape[0], d * d).T
            return np.ascontiguousarray((m @ flat).T).reshape(r.shape)

        cur, k, rec = rho, 0, 1
        for u, width in zip(_iter_step_maps(source, starts, widths, config), widths):
            cur = dissipate(cur, width)
            cur = u @ cur @ u.conj().T
            cur = dissipate(cur, width)
            k += 1
            while rec < times.size and marks[rec] == k:
                out[rec] = cur
                rec += 1
        while rec < times.size:
            out[rec] = cur
            rec += 1
        n_steps = starts.size

    if check_input:
        drift = np.max(np.abs(np.trace(out, axis1=-2, axis2=-1) - 1.0))
        if drift > trace_tol:
            raise TraceDriftError(f"trace drifted by {drift:.3e}")
    if single:
        out = out[:, 0]
    return DensityTrace(times, out, n_steps)


def _rk_lindblad(source, ops, rho: np.ndarray, times, config: PropagationConfig):
    shape = rho.shape
    cds = [c.conj().T for c in ops]
    k_op = sum((cd @ c for c, cd in zip(ops, cds)), np.zeros((source.dim,) * 2, complex))

    def rhs(t, y):
        r = y.reshape(shape)
        h = source(t)
        heff = h - 0.5j * k_op
        dr = -1j * (heff @ r - r @ heff.conj().T)
        for c, cd in zip(ops, cds):
            dr += c @ r @ cd
        return dr.ravel()

    sol = solve_ivp(rhs, (times[0], times[-1]), rho.ravel(), method="DOP853",
                    t_eval=times, rtol=config.rtol, atol=config.atol)
    if not sol.success:
        raise ConvergenceError(sol.message)
    return sol.y.T.reshape((times.size,) + shape), int(sol.nfev)


# ---------------------------------------------------------------------------
# Convergence certificate
# ---------------------------------------------------------------------------


def certify(run: Callable[[PropagationConfig], float], config: PropagationConfig,
            n_steps: int, tol: float | None = None) -> tuple[float, float]:
    """Re-run `run` with a refined integrator and compare the metric.

    Returns ``(value, |value - refined value|)``.

    Raises
    ------
    ConvergenceError
        If the change reaches `tol` (default ``config.certificate_tol``).
    """
    tol = config.certificate_tol if tol is None else tol
    coarse = run(config)
    fine = run(config.refined(n_steps))
    delta = abs(fine - coarse)
    if delta >= tol:
        raise ConvergenceError(f"metric changed by {delta:.3e} on refinement (tol {tol:.1e})")
    return fine, delta


def default_step_count(hamiltonian, t0: float, t1: float,
                       config: PropagationConfig | None = None) -> int:
    return _step_count(as_source(hamiltonian), t0, t1, config or PropagationConfig())


# ---------------------------------------------------------------------------
# Additive white Gaussian noise
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NoisySchedule:
    """A pulse with AWGN added to both quadratures, held between samples.

    The clean pulse is still evaluated continuously; only the noise is
    sample-and-hold.  With ``snr = inf`` the realised samples are the base
    samples and :meth:`at` reproduces the base pulse exactly.
    """

    base: object
    snr: float
    seed: int
    noise_x: np.ndarray
    noise_y: np.ndarray
    omega_x: np.ndarray = field(init=False)
    omega_y: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "omega_x", self.base.omega_x + self.noise_x)
        object.__setattr__(self, "omega_y", self.base.omega_y + self.noise_y)

    @property
    def t(self) -> np.ndarray:
        return self.base.t

    @property
    def T(self) -> float:
        return self.base.T

    @property
    def omega_max(self) -> float:
        return float(max(np.max(np.abs(self.omega_x)), np.max(np.abs(self.omega_y))))

    def at(self, ts):
        ts = np.asarray(ts, dtype=float)
        ox, oy = self.base.at(ts)
        if not np.any(self.noise_x) and not np.any(self.noise_y):
            return ox, oy
        grid = self.base.t
        k = np.clip(np.searchsorted(grid, ts, side="right") - 1, 0, grid.size - 1)
        return ox + self.noise_x[k], oy + self.noise_y[k]


def add_awgn(pulse, snr: float, seed: int, unit: str = "db",
             reference: str = "measured", reference_power: float = 1.0) -> NoisySchedule:
    """Add white Gaussian noise to ``omega_x`` and ``omega_y`` samples.

    Noise power per quadrature is ``P_ref / snr_linear`` where
    ``snr_linear = 10**(snr/10)`` for ``unit="db"`` or ``snr`` itself for
    ``unit="linear"``.  ``reference="measured"`` takes ``P_ref`` as the
    mean power of that quadrature's clean samples; ``"absolute"`` uses
    `reference_power` (in squared field units).
    """
    if not snr > 0:
        raise ValueError("snr must be positive")
    n = pulse.t.size
    if math.isinf(snr):
        zeros = np.zeros(n)
        return NoisySchedule(pulse, snr, seed, zeros, zeros.copy())
    if unit == "db":
        ratio = 10.0 ** (snr / 10.0)
    elif unit == "linear":
        ratio = float(snr)
    else:
        raise ValueError(f"unknown snr unit {unit!r}")
    rng = np.random.default_rng(seed)
    noise = []
    for samples in (pulse.omega_x, pulse.omega_y):
        if reference == "measured":
            p_ref = float(np.mean(np.square(samples)))
        elif reference == "absolute":
            p_ref = float(reference_power)
        else:
            raise ValueError(f"unknown noise reference {reference!r}")
        noise.append(rng.normal(0.0, math.sqrt(p_ref / ratio), n))
    return NoisySchedule(pulse, snr, seed, noise[0], noise[1])


def write_trace_csv(path, times, columns: dict[str, np.ndarray]) -> None:
    """Write ``t,<label>...`` rows."""
    labels = list(columns)
    data = np.column_stack([np.asarray(times)] + [np.asarray(columns[k]).real for k in labels])
    header = ",".join(["t"] + labels)
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.12g")
