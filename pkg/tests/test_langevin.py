import json
import math

import numpy as np
import pytest
from scipy.linalg import expm

from decohist import FPBath, GaussianState, HistorySpec, ModelParams, StepSizeError, ValidationError
from decohist.gaussian_paths import gaussian_dfun
from decohist.langevin import (
    HistoryProbabilities,
    combined_z_scores,
    exact_step_matrices,
    history_probabilities_mc,
    max_step,
    sample_initial,
    simulate_langevin,
    total_variation,
)
from oracles import gaussian_moments

STATE = GaussianState((0.5, -1.0), ((0.8, 0.3), (0.3, 0.6)))
HARM = ModelParams(potential="harmonic", omega=1.0)


def test_wigner_sampling_moments():
    ens = sample_initial(STATE, "wigner", 200000, 1)
    pts = np.stack([ens.x0, ens.p0])
    assert np.abs(pts.mean(axis=1) - STATE.mu).max() <= 4 * math.sqrt(0.8 / 200000)
    assert np.abs(np.cov(pts) - STATE.sigma).max() <= 0.01
    assert len(ens.block_seeds) == math.ceil(200000 / 8192)


def test_husimi_sampling_adds_smearing():
    ens = sample_initial(STATE, "husimi", 200000, 2, 0.5, 1.0, hbar=1.0)
    cov = np.cov(np.stack([ens.x0, ens.p0]))
    assert np.abs(cov - (STATE.sigma + np.diag([0.25, 1.0]))).max() <= 0.02


def test_sampling_validation():
    with pytest.raises(ValidationError):
        sample_initial(STATE, "signed", 10, 0)
    with pytest.raises(ValidationError):
        sample_initial(STATE, "husimi", 10, 0)
    with pytest.raises(ValidationError):
        sample_initial(STATE, "husimi", 10, 0, 0.1, 0.1, hbar=1.0)
    with pytest.raises(ValidationError):
        sample_initial(GaussianState((0, 0), ((0.1, 0), (0, 0.1))), "wigner", 10, 0, hbar=1.0)


def test_reproducible_and_block_structured():
    a = sample_initial(STATE, "wigner", 20000, 7)
    b = sample_initial(STATE, "wigner", 20000, 7)
    c = sample_initial(STATE, "wigner", 9000, 7)
    assert np.array_equal(a.x0, b.x0)
    # a shorter run shares its leading blocks with a longer one
    assert np.array_equal(a.x0[:9000], c.x0)
    ta = simulate_langevin(a, HARM, 0.5, 1.0, 1.0, 0.01)
    tb = simulate_langevin(b, HARM, 0.5, 1.0, 1.0, 0.01, workers=3)
    assert np.array_equal(ta.x, tb.x) and np.array_equal(ta.p, tb.p)
    d = sample_initial(STATE, "wigner", 20000, 8)
    assert not np.array_equal(a.x0, d.x0)


@pytest.mark.parametrize("method,tol", [("exact", 1e-10), ("baoab", 1e-3), ("em", 2e-2)])
def test_deterministic_damped_oscillator(method, tol):
    model = ModelParams(mass=1.5, potential="harmonic", omega=1.2)
    ens = sample_initial(STATE, "wigner", 50, 3)
    tr = simulate_langevin(ens, model, 0.3, 0.0, 2.0, 0.005, method=method, record_times=[2.0])
    Phi = expm(model.linear_generator(0.3) * 2.0)
    ref = Phi @ np.stack([ens.x0, ens.p0])
    assert np.abs(tr.x[0] - ref[0]).max() <= tol
    assert np.abs(tr.p[0] - ref[1]).max() <= tol


def test_exact_step_matches_moment_ode():
    model = ModelParams(mass=2.0, potential="harmonic", omega=0.7)
    Phi, Qd = exact_step_matrices(model, 0.4, 1.5, 0.3)
    A = model.linear_generator(0.4)
    _, S = gaussian_moments(A, np.diag([0.0, 4 * 2.0 * 0.4 * 1.5]), [0, 0], np.zeros((2, 2)), 0.3)
    assert np.abs(Qd - S).max() <= 1e-12
    assert np.abs(Phi - expm(A * 0.3)).max() <= 1e-14


@pytest.mark.parametrize("method", ["exact", "baoab"])
def test_ensemble_covariance_follows_moment_ode(method):
    bath = FPBath(0.5, 2.0)
    ens = sample_initial(STATE, "wigner", 100000, 4)
    tr = simulate_langevin(ens, HARM, bath.gamma, bath.kT, 1.5, 0.01, method=method,
                           record_times=[1.5])
    A = HARM.linear_generator(bath.gamma)
    m, S = gaussian_moments(A, np.diag([0.0, 4 * bath.gamma * bath.kT]), STATE.mu, STATE.sigma, 1.5)
    cov = np.cov(np.stack([tr.x[0], tr.p[0]]))
    assert np.abs(cov - S).max() / np.abs(S).max() <= 0.02
    assert np.abs(np.array([tr.x[0].mean(), tr.p[0].mean()]) - m).max() <= 0.02


def test_free_particle_thermalises():
    mass, kT = 2.0, 1.5
    ens = sample_initial(GaussianState((0, 0), ((1, 0), (0, 0.1))), "wigner", 50000, 5)
    tr = simulate_langevin(ens, ModelParams(mass=mass), 1.0, kT, 5.0, 0.01, record_times=[5.0])
    assert tr.p[0].var() == pytest.approx(mass * kT, rel=0.03)


def test_noise_is_white_with_correct_strength():
    ens = sample_initial(STATE, "wigner", 20000, 6)
    gamma, kT, dt = 0.5, 2.0, 0.01
    tr = simulate_langevin(ens, HARM, gamma, kT, 0.2, dt, record_noise=True)
    eta = tr.noise
    assert eta.shape == (20, 20000)
    var = eta.var()
    assert var * dt == pytest.approx(4 * gamma * kT, rel=0.02)
    lag = np.mean(eta[1:] * eta[:-1]) / var
    assert abs(lag) <= 0.01


def test_unbounded_windows_give_unit_probability():
    ens = sample_initial(STATE, "wigner", 1000, 0)
    tr = simulate_langevin(ens, HARM, 0.5, 1.0, 1.0, 0.01, record_times=[0.5, 1.0])
    P = history_probabilities_mc(tr, HistorySpec(1.0, (0.5, 1.0), ((0,), (0,)), math.inf))
    assert P.estimates[0] == 1.0 and P.stderr[0] == 0.0 and P.remainder == 0.0


def test_sharp_gates_are_indicators():
    ens = sample_initial(STATE, "wigner", 4000, 0)
    tr = simulate_langevin(ens, HARM, 0.5, 1.0, 1.0, 0.01, record_times=[1.0])
    hist = HistorySpec(1.0, (1.0,), ((-1, 0, 1),), 1.0, "sharp")
    P = history_probabilities_mc(tr, hist)
    x = tr.x[0]
    assert P.estimates[1] == np.mean((x >= -0.5) & (x < 0.5))
    assert P.remainder == pytest.approx(np.mean((x < -1.5) | (x >= 1.5)))


def test_gate_probability_falls_with_temperature():
    hist = HistorySpec(2.0, (1.0, 2.0), ((0,), (0,)), 1.0, "sharp")
    ens = sample_initial(GaussianState((0, 0), ((0.1, 0), (0, 0.1))), "wigner", 20000, 3)
    probs = []
    for kT in (0.1, 1.0, 10.0):
        tr = simulate_langevin(ens, HARM, 0.5, kT, 2.0, 0.01, record_times=hist.times)
        probs.append(history_probabilities_mc(tr, hist).estimates[0])
    assert probs[0] > probs[1] > probs[2]


def test_small_hbar_matches_path_integral_diagonal():
    # ordinary theory: window kicks scale with hbar/delta, so at small hbar
    # the diagonal is the classical Wigner-sampled probability
    model = ModelParams(hbar=0.05, potential="harmonic", omega=1.0)
    state = GaussianState((0.0, 1.0), ((0.5, 0.0), (0.0, 0.5)))
    hist = HistorySpec(2.0, (1.0, 2.0), ((-1.0, 0.0, 1.0), (-1.0, 0.0, 1.0)), 0.5)
    D = gaussian_dfun(model, hist, 128, state, bath=FPBath(0.5, 2.0), normalization="trace")
    ens = sample_initial(state, "wigner", 200000, 9)
    tr = simulate_langevin(ens, model, 0.5, 2.0, 2.0, 0.01, record_times=hist.times)
    P = history_probabilities_mc(tr, hist)
    assert np.all(np.abs(D.diagonal - P.estimates) <= 3 * P.stderr)


def test_step_size_guard():
    assert max_step(HARM, 0.5) == pytest.approx(min(0.1, 2 * math.pi / 50))
    assert max_step(ModelParams(), 0.0) == math.inf
    ens = sample_initial(STATE, "wigner", 10, 0)
    with pytest.raises(StepSizeError):
        simulate_langevin(ens, HARM, 0.5, 1.0, 1.0, 0.2)
    with pytest.raises(ValidationError):
        simulate_langevin(ens, HARM, 0.5, 1.0, 1.0, 0.03)
    with pytest.raises(ValidationError):
        simulate_langevin(ens, ModelParams(potential="quartic", lam=1.0), 0.5, 1.0, 1.0, 0.01,
                          method="exact")
    with pytest.raises(ValidationError):
        simulate_langevin(ens, HARM, 0.5, 1.0, 1.0, 0.01, record_times=[0.005])


def test_quartic_model_runs_with_baoab():
    model = ModelParams(potential="quartic", lam=0.5)
    ens = sample_initial(STATE, "wigner", 2000, 0)
    tr = simulate_langevin(ens, model, 0.5, 0.0, 1.0, 0.001)
    assert tr.meta["method"] == "baoab"
    # energy decays under drag without noise
    E = 0.5 * tr.p**2 + model.potential_energy(tr.x)
    assert np.all(E[-1] <= E[0] + 1e-6)


def test_distances_and_serialisation(tmp_path):
    a = HistoryProbabilities(["x", "y"], np.array([0.5, 0.3]), np.array([0.01, 0.01]), 100)
    b = HistoryProbabilities(["x", "y"], np.array([0.4, 0.3]), np.array([0.0, 0.0]), 100)
    # escape outcomes 0.2 and 0.3 enter as one more history
    assert total_variation(a, b) == pytest.approx(0.1)
    assert combined_z_scores(a, b) == pytest.approx([10.0, 0.0])
    with pytest.raises(ValidationError):
        total_variation(a, HistoryProbabilities(["x"], np.array([1.0]), np.array([0.0]), 1))
    a.to_json(tmp_path / "p.json")
    assert json.loads((tmp_path / "p.json").read_text())["estimates"] == [0.5, 0.3]
    ens = sample_initial(STATE, "wigner", 3, 0)
    tr = simulate_langevin(ens, HARM, 0.5, 1.0, 0.02, 0.01)
    tr.to_csv(tmp_path / "t.csv")
    rows = (tmp_path / "t.csv").read_text().splitlines()
    assert rows[0] == "trajectory,t,X,P" and len(rows) == 1 + 3 * 3
