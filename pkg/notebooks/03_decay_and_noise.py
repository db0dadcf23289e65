# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Decay, Förster defect and control noise
#
# These runs use SI units: `V = 2pi x 133.04 MHz`, `Omega_b = 2pi x 4.43 MHz`
# and `T = 18000 / V`, about 21.53 us.

# %%
import math

import numpy as np

from forster_nhqc import atom
from forster_nhqc.dynamics import add_awgn
from forster_nhqc.simulation import design_pulse, gate_fidelity_at_T, open_system_channel

params = atom.ModelParams.physical()
pulse = design_pulse(T=params.T)
cnot = np.asarray(atom.target_gate(*atom.GATES["cnot"]))
print(f"T = {params.T * 1e6:.3f} us")

# %% [markdown]
# ## Spontaneous emission
#
# Every Rydberg level of both atoms decays to `|0>` and `|1>` at rate `gamma`.
# The channel is built from the images of all sixteen `|i><j|`, so both the
# average fidelity and any input state can be read off one run.

# %%
ch = open_system_channel(params.with_(gamma=1e3), pulse)
c = np.array([1, 0, 1, 0]) / math.sqrt(2)
print(f"average F          = {ch.average_fidelity(cnot):.5f}")
print(f"(|00>+|10>)/sqrt2  = {ch.state_fidelity(c, cnot @ c):.5f}")
print(ch.truth_table().to_text())

# %% [markdown]
# ## Förster defect
#
# A detuning `delta` of the pair state `|R>` shifts the dressed energies.

# %%
for d_mhz in (-13.3, -8.5, 0.0, 8.5, 13.3):
    f = gate_fidelity_at_T(params.with_(defect=2 * math.pi * d_mhz * 1e6), pulse, cnot)
    print(f"delta/2pi = {d_mhz:+6.1f} MHz   F = {f:.5f}")

# %% [markdown]
# ## White noise on the controls
#
# Noise is added to the samples of both quadratures and held between them.
# The excess over the noiseless 1-F grows with the noise power, which rises
# by 10^0.8, about 6.3, from 10 dB to 2 dB.

# %%
for snr in (10.0, 2.0):
    inf = [1 - gate_fidelity_at_T(params, add_awgn(pulse, snr, seed), cnot) for seed in range(5)]
    print(f"SNR {snr:4.1f} dB   mean 1-F over 5 seeds = {np.mean(inf):.5f}")
