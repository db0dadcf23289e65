"""Acceptance criteria 1-10.

Each test carries a ``criterion`` marker; the terminal summary prints one
PASS/FAIL line per criterion with the measured values.  Tolerances are the
stated ones.  Two parts are known to fail and are kept as they are:

* criterion 4, strict form: ``|xi+ xi+>`` dips to 0.98975 during the gate;
* criterion 9, SNR = 2: the mean infidelity grows with the noise power.

The analysis for both is in the decisions ledger.
"""

import math
import os
import time

import numpy as np
import pytest

from forster_nhqc import atom, cli
from forster_nhqc.config import ScenarioConfig, SweepSpec
from forster_nhqc.dynamics import (FunctionHamiltonian, PropagationConfig, certify,
                                   propagate_lindblad, propagate_state)
from forster_nhqc.metrics import effective_state_trace, simulated_phases
from forster_nhqc.operators import is_unitary
from forster_nhqc.pulses import (control_fields, design_trajectory, effective_two_level,
                                 invariant_ode_rates, invariant_operator, sensitivity_closed_form,
                                 sensitivity_quadrature)
from forster_nhqc.simulation import (design_pulse, full_propagator, gate_fidelity_at_T,
                                     open_system_channel, state_trace)

CNOT = np.asarray(atom.target_gate(*atom.GATES["cnot"]))
CZ = np.asarray(atom.target_gate(*atom.GATES["cz"]))
JOBS = os.cpu_count() or 1


def criterion(key, label):
    return pytest.mark.criterion(key, label)


# -- 1. pulse design -------------------------------------------------------------


@criterion("1", "omega_max T")
def test_c1_pulse_design(record_property):
    t0 = time.perf_counter()
    pulse = control_fields(design_trajectory(T=1.0, eta=1.0))
    elapsed = time.perf_counter() - t0
    value = pulse.omega_max * pulse.T
    record_property("measured", f"{value:.4f}, {elapsed:.2f} s")
    assert abs(value - 36.05) <= 0.2
    assert elapsed < 1.0


# -- 2. closed-form sensitivity ------------------------------------------------------


@criterion("2", "quadrature vs sin^2(eta pi)/eta^2")
def test_c2_sensitivity(record_property):
    t0 = time.perf_counter()
    etas = (0.25, 0.5, 0.75, 1.0, 1.5, 2.0)
    quad = {eta: sensitivity_quadrature(eta) for eta in etas}
    elapsed = time.perf_counter() - t0
    # integer eta are exact zeros of the closed form (up to round-off in sin(pi))
    nonzero = [e for e in etas if e != int(e)]
    ratios = [quad[e] / sensitivity_closed_form(e) for e in nonzero]
    spread = max(abs(r / ratios[0] - 1) for r in ratios)
    record_property("measured", f"rel. spread {spread:.1e}, q(1) = {quad[1.0]:.1e}, "
                                f"q(2) = {quad[2.0]:.1e}, {elapsed:.2f} s")
    assert spread < 1e-6
    assert abs(ratios[0] - 1) < 1e-6
    assert quad[1.0] < 1e-10 and quad[2.0] < 1e-10
    assert elapsed < 1.0


# -- 3. phase ledger -------------------------------------------------------------------


@criterion("3", "theta_2(T), Theta_2(T)")
def test_c3_phase_ledger(record_property):
    t0 = time.perf_counter()
    tr = design_trajectory(T=1.0, eta=1.0)
    states, hams = effective_state_trace(tr)
    ledger = simulated_phases(tr, states, hams)
    elapsed = time.perf_counter() - t0
    dyn, geo = ledger.dynamic[-1], ledger.geometric[-1]
    record_property("measured", f"{dyn:.1e}, pi{geo - math.pi:+.1e}, {elapsed:.2f} s")
    assert abs(dyn) < 1e-6
    assert abs(geo - math.pi) < 1e-6
    assert elapsed < 5.0


# -- 4. effective-model validity ---------------------------------------------------------


@pytest.fixture(scope="module")
def subspace_traces(baseline, pulse):
    """Self-overlap populations of each subspace state under the full Hamiltonian."""
    t0 = time.perf_counter()
    b = atom.DressedBasis(baseline.v_a, baseline.v_b)
    ts = np.linspace(0.0, baseline.T, 4001)
    cfg = PropagationConfig(steps=40000)
    pops = {}
    for name, v in b.subspace.items():
        states = state_trace(baseline, pulse, v, ts, config=cfg)
        pops[name] = np.abs(states @ v.conj()) ** 2
    return pops, time.perf_counter() - t0


@criterion("4", "end of gate")
def test_c4_effective_model_at_end_of_gate(subspace_traces, record_property):
    pops, elapsed = subspace_traces
    final = {k: float(v[-1]) for k, v in pops.items()}
    record_property("measured", ", ".join(f"{k} {v:.5f}" for k, v in final.items())
                    + f", {elapsed:.0f} s")
    for name in ("xi-xi-", "xi-xi+", "xi+xi+"):
        assert final[name] > 0.99, name
    # the gate state leaves and comes back
    assert pops["xi+xi-"].min() < 0.01
    assert final["xi+xi-"] > 0.99
    assert elapsed < 120


@criterion("4", "throughout gate")
def test_c4_effective_model_throughout_gate(subspace_traces, record_property):
    """Populations stay above 0.99 at every sampled time.

    Known failure: ``|xi+ xi+>`` reaches 0.98975 near ``t = 0.24 T``.  The
    detuned atom-b drive and the ``Omega_a`` coupling to ``|E+->`` keep about
    1e-2 of virtual population outside the subspace in mid-gate.
    """
    pops, _ = subspace_traces
    lows = {k: float(pops[k].min()) for k in ("xi-xi-", "xi-xi+", "xi+xi+")}
    record_property("measured", ", ".join(f"min {k} {v:.5f}" for k, v in lows.items()))
    assert min(lows.values()) > 0.99, lows


# -- 5. CNOT and CZ fidelity ------------------------------------------------------------


@criterion("5", "CNOT")
def test_c5_cnot(baseline, pulse, record_property):
    t0 = time.perf_counter()
    f = gate_fidelity_at_T(baseline, pulse, CNOT)
    elapsed = time.perf_counter() - t0
    record_property("measured", f"F = {f:.5f}, {elapsed:.1f} s")
    assert abs(f - 0.9989) <= 0.001
    assert elapsed < 120


@criterion("5", "CZ")
def test_c5_cz(baseline, pulse, record_property):
    t0 = time.perf_counter()
    params = baseline.with_(v_a=atom.GATES["cz"][0], v_b=atom.GATES["cz"][1])
    f = gate_fidelity_at_T(params, pulse, CZ)
    elapsed = time.perf_counter() - t0
    record_property("measured", f"F = {f:.5f}, {elapsed:.1f} s")
    assert f >= 0.998
    assert elapsed < 120


# -- 6. robustness plateau ----------------------------------------------------------------


@criterion("6", "eta = 1 plateau")
def test_c6_plateau(tmp_path, record_property):
    t0 = time.perf_counter()
    cfg = ScenarioConfig(eta=1.0, sweep=SweepSpec("epsilon", -0.1, 0.1, 21))
    rows = cli.cmd_sweep(cfg, tmp_path, jobs=JOBS)
    elapsed = time.perf_counter() - t0
    assert len(rows) == 21 and all(r["status"] == "ok" for r in rows)
    worst = min(rows, key=lambda r: r["fidelity"])
    record_property("measured", f"min F = {worst['fidelity']:.5f} at eps = {worst['value']:+.2f}, "
                                f"{elapsed:.0f} s")
    assert worst["fidelity"] >= 0.998
    assert elapsed < 1800


@criterion("6", "eta = 0 at eps = +-0.1")
def test_c6_unprotected(baseline, record_property):
    pulse0 = design_pulse(eta=0.0)
    fs = [gate_fidelity_at_T(baseline.with_(epsilon=e), pulse0, CNOT) for e in (-0.1, 0.1)]
    record_property("measured", ", ".join(f"{f:.5f}" for f in fs))
    for f in fs:
        assert abs(f - 0.9747) <= 0.003


# -- 7. decay --------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def decay_channel(physical, physical_pulse):
    t0 = time.perf_counter()
    ch = open_system_channel(physical.with_(gamma=1e3), physical_pulse)
    return ch, time.perf_counter() - t0


@criterion("7", "state fidelity at 1 kHz")
def test_c7_state_fidelity(decay_channel, record_property):
    ch, elapsed = decay_channel
    c = np.array([1, 0, 1, 0]) / math.sqrt(2)
    f = ch.state_fidelity(c, CNOT @ c)
    record_property("measured", f"F = {f:.5f}, {elapsed:.0f} s")
    assert abs(f - 0.9942) <= 0.002
    assert elapsed < 1800


@criterion("7", "truth-table minimum at 1 kHz")
def test_c7_truth_table(decay_channel, record_property):
    ch, _ = decay_channel
    m = ch.truth_table().min_success(CNOT)
    record_property("measured", f"min = {m:.5f}")
    assert m >= 0.987


# -- 8. Förster defect ---------------------------------------------------------------------


@criterion("8", "defect 2pi x 8.5 MHz")
def test_c8_defect(physical, physical_pulse, record_property):
    t0 = time.perf_counter()
    f = gate_fidelity_at_T(physical.with_(defect=2 * math.pi * 8.5e6), physical_pulse, CNOT)
    elapsed = time.perf_counter() - t0
    record_property("measured", f"F = {f:.5f}, {elapsed:.1f} s")
    assert abs(f - 0.9864) <= 0.005
    assert elapsed < 600


@criterion("8", "defect = +-0.1 V")
def test_c8_defect_edges(physical, physical_pulse, record_property):
    fs = [gate_fidelity_at_T(physical.with_(defect=s * physical.V), physical_pulse, CNOT)
          for s in (-0.1, 0.1)]
    record_property("measured", ", ".join(f"{f:.4f}" for f in fs))
    assert min(fs) >= 0.96


# -- 9. AWGN Monte Carlo ----------------------------------------------------------------------


@pytest.mark.slow
@criterion("9", "SNR = 10")
def test_c9_awgn_snr10(tmp_path, record_property):
    _awgn(tmp_path, 10.0, record_property)


@pytest.mark.slow
@criterion("9", "SNR = 2")
def test_c9_awgn_snr2(tmp_path, record_property):
    """Mean infidelity within [0.0015, 0.0030] at SNR = 2 dB.

    Known failure: with noise power referenced to the signal, the excess
    infidelity scales as 10^(-SNR/10) and the mean lands near 0.0076.
    """
    _awgn(tmp_path, 2.0, record_property)


def _awgn(tmp_path, snr, record_property):
    t0 = time.perf_counter()
    cfg = ScenarioConfig(snr=snr, n_runs=50, seed=0)
    rows = cli.cmd_montecarlo(cfg, tmp_path, jobs=JOBS)
    elapsed = time.perf_counter() - t0
    assert len(rows) == 50 and all(r["status"] == "ok" for r in rows)
    mean = float(np.mean([r["infidelity"] for r in rows]))
    record_property("measured", f"mean 1-F = {mean:.5f}, {elapsed:.0f} s")
    assert 0.0015 <= mean <= 0.0030
    assert elapsed < 3600


# -- 10. property suites ------------------------------------------------------------------


@criterion("10", "convergence certificate")
def test_c10_certificate(baseline, pulse, record_property):
    def run(cfg):
        return gate_fidelity_at_T(baseline, pulse, CNOT, config=cfg)

    _, delta = certify(run, PropagationConfig(steps=20000), 20000)
    rk = run(PropagationConfig(method="rk", rtol=1e-9, atol=1e-11))
    expm = run(PropagationConfig(steps=40000))
    record_property("measured", f"halving step {delta:.1e}, expm vs rk {abs(rk - expm):.1e}")
    assert delta < 1e-5
    assert abs(rk - expm) < 1e-5


@criterion("10", "unitarity, trace, positivity")
def test_c10_invariants(baseline, pulse, physical, physical_pulse):
    u = full_propagator(baseline, pulse)
    assert is_unitary(u, 1e-8)
    params = physical.with_(gamma=1e4)
    psi = atom.computational_state([1, 0, 1, 0]) / math.sqrt(2)
    tr = propagate_lindblad(atom.stage_source("full", params, physical_pulse),
                            atom.lindblad_operators(params.gamma), np.outer(psi, psi.conj()),
                            np.linspace(0, params.T, 5), PropagationConfig(steps=8000))
    for r in tr.rhos:
        assert abs(np.trace(r) - 1) < 1e-7
        assert np.max(np.abs(r - r.conj().T)) < 1e-9
        assert np.linalg.eigvalsh(0.5 * (r + r.conj().T)).min() > -1e-7


@criterion("10", "ODE <-> inverse round trip")
def test_c10_round_trip(record_property):
    worst = 0.0
    for eta in (0.3, 1.0, 2.5):
        tr = design_trajectory(T=1.0, eta=eta, n_points=10001)
        pulse = control_fields(tr)
        keep = np.min(np.abs(tr.t[:, None] - np.array([0.0, 0.5, 1.0])), axis=1) > 1e-3
        d1, d2 = invariant_ode_rates(tr.mu1[keep], tr.mu2[keep], pulse.omega_x[keep],
                                     pulse.omega_y[keep])
        worst = max(worst, np.max(np.abs(d1 - tr.dmu1[keep])), np.max(np.abs(d2 - tr.dmu2[keep])))
    record_property("measured", f"{worst:.1e}")
    assert worst < 1e-9


def _d4(f, t, h):
    return (f(t - 2 * h) - 8 * f(t - h) + 8 * f(t + h) - f(t + 2 * h)) / (12 * h)


@criterion("10", "invariant-equation residual")
def test_c10_invariant_residual(record_property):
    tr = design_trajectory(T=1.0)
    pulse = control_fields(tr)
    worst = 0.0
    for t in np.linspace(0.03, 0.97, 21):
        if abs(t - 0.5) < 1e-2:
            continue
        d_inv = _d4(lambda s: np.asarray(invariant_operator(s, tr)), t, 1e-4)
        ox, oy = pulse.at(np.array([t]))
        h = effective_two_level(ox[0], oy[0])
        i_t = np.asarray(invariant_operator(t, tr))
        worst = max(worst, np.linalg.norm(1j * d_inv - (h @ i_t - i_t @ h)))
    scale = tr.u * pulse.omega_max
    record_property("measured", f"{worst / scale:.1e} of u Omega_max")
    assert worst < 1e-6 * scale


@criterion("10", "von Neumann residual")
def test_c10_von_neumann_residual(record_property):
    tr = design_trajectory(T=1.0)
    pulse = control_fields(tr)

    def fn(ts):
        ox, oy = pulse.at(ts)
        return np.array([effective_two_level(x, y) for x, y in zip(ox, oy)])

    src = FunctionHamiltonian(fn, 2, pattern=np.ones((2, 2), bool))
    h, worst = 1e-4, 0.0
    for t in (0.1, 0.3, 0.45, 0.6, 0.85):
        ts = np.concatenate([[0.0], t + h * np.arange(-2, 3)])
        psi = propagate_state(src, np.array([0, 1], complex), ts,
                              PropagationConfig(steps=65536)).states[1:]
        proj = np.einsum("ni,nj->nij", psi, psi.conj())
        d_proj = (proj[0] - 8 * proj[1] + 8 * proj[3] - proj[4]) / (12 * h)
        hm = fn(np.array([t]))[0]
        worst = max(worst, np.linalg.norm(d_proj + 1j * (hm @ proj[2] - proj[2] @ hm)))
    record_property("measured", f"{worst / pulse.omega_max:.1e} of Omega_max")
    assert worst < 1e-6 * pulse.omega_max


@criterion("10", "gate-matrix identities")
def test_c10_gate_identities():
    assert np.max(np.abs(CNOT - np.eye(4)[[0, 1, 3, 2]])) < 1e-12
    assert np.max(np.abs(CZ - np.diag([1, 1, 1, -1]))) < 1e-12
    rng = np.random.default_rng(2024)
    idx = list(atom.COMPUTATIONAL_INDICES)
    for va, vb in rng.uniform(-math.pi, math.pi, (200, 2)):
        u = np.asarray(atom.target_gate(va, vb))
        v = atom.DressedBasis(va, vb).product("xi+", "xi-")[idx]
        assert np.max(np.abs(u - (np.eye(4) - 2 * np.outer(v, v.conj())))) < 1e-12
        assert np.max(np.abs(u @ u.conj().T - np.eye(4))) < 1e-12
