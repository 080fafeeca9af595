"""Ordinary versus doubled-theory Monte Carlo history probabilities.

Shared by the acceptance suite and tools/pilot_baseline.py.  The ordinary
theory samples the Wigner density and runs at kT_A; the doubled theory
samples the Husimi smearing (coherent auxiliary state) and runs at
kT_A + kT_B.  Both share one seed, so the dynamics noise is common.
"""

import numpy as np

from decohist import GaussianState, HistorySpec, ModelParams
from decohist.langevin import (
    combined_z_scores,
    history_probabilities_mc,
    sample_initial,
    simulate_langevin,
    total_variation,
)

HBAR = 0.05
MODEL = ModelParams(hbar=HBAR, potential="harmonic", omega=1.0)
STATE = GaussianState((0.0, 1.0), ((0.5, 0.0), (0.0, 0.5)))
HIST = HistorySpec(2.0, (1.0, 2.0), (np.arange(-6, 7.0), np.arange(-6, 7.0)), 1.0, "sharp")
GAMMA, KT_A, DT = 0.5, 10.0, 0.02
RATIOS = (1.0, 0.1, 0.01)


def decoherence_parameter():
    """2 m gamma kT_A tau Delta^2 / hbar^2."""
    return 2 * MODEL.mass * GAMMA * KT_A * HIST.tau * HIST.delta**2 / HBAR**2


def sweep(seed, K=100_000):
    """Total-variation distances and max z-scores for each kT_B / kT_A ratio."""
    sx = sp = np.sqrt(HBAR / 2)
    ea = sample_initial(STATE, "wigner", K, seed, hbar=HBAR)
    pa = history_probabilities_mc(
        simulate_langevin(ea, MODEL, GAMMA, KT_A, HIST.tau, DT, record_times=HIST.times), HIST)
    eb = sample_initial(STATE, "husimi", K, seed, sx, sp, hbar=HBAR)
    tv, zmax = [], []
    for r in RATIOS:
        tr = simulate_langevin(eb, MODEL, GAMMA, KT_A * (1 + r), HIST.tau, DT,
                               record_times=HIST.times)
        pb = history_probabilities_mc(tr, HIST)
        tv.append(total_variation(pa, pb))
        zmax.append(float(combined_z_scores(pa, pb).max()))
    return tv, zmax
