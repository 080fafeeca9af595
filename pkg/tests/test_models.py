import math

import numpy as np
import pytest

from decohist import (
    ConfigError,
    DecoherenceMatrix,
    FPBath,
    GaussianState,
    HistorySpec,
    ModelParams,
    PathQuadrature,
    ValidationError,
)


def test_model_validation():
    with pytest.raises(ValidationError):
        ModelParams(potential="cubic")
    with pytest.raises(ValidationError):
        ModelParams(mass=0.0)
    with pytest.raises(ValidationError):
        ModelParams(potential="harmonic")
    with pytest.raises(ValidationError):
        ModelParams(potential="quartic")
    with pytest.raises(ValidationError):
        ModelParams(hbar=float("nan"))


def test_potential_derivatives():
    m = ModelParams(mass=2.0, potential="harmonic_quartic", omega=1.5, lam=0.3)
    x = np.linspace(-2, 2, 7)
    V = 0.5 * 2.0 * 1.5**2 * x**2 + 0.3 * x**4
    assert np.allclose(m.potential_energy(x), V)
    assert np.allclose(m.derivative(x, 1), 2 * 2.25 * x + 1.2 * x**3)
    assert np.allclose(m.derivative(x, 3), 7.2 * x)
    assert np.allclose(m.derivative(x, 5), 0)
    assert np.allclose(m.force(x), -m.derivative(x, 1))


def test_linear_generator():
    A = ModelParams(mass=2.0, potential="harmonic", omega=3.0).linear_generator(0.5)
    assert np.array_equal(A, [[0, 0.5], [-18.0, -1.0]])
    with pytest.raises(ValidationError):
        ModelParams(potential="quartic", lam=1.0).linear_generator()


def test_bath_and_state_validation():
    assert FPBath(0.5, 2.0).diffusion(3.0) == pytest.approx(6.0)
    with pytest.raises(ValidationError):
        FPBath(-1.0, 1.0)
    with pytest.raises(ValidationError):
        GaussianState((0, 0), ((1, 2), (2, 1)))
    with pytest.raises(ValidationError):
        GaussianState((0, 0), ((1, 0.1), (0.2, 1)))
    with pytest.raises(ValidationError):
        GaussianState((0, 0, 0), ((1, 0), (0, 1)))
    with pytest.raises(ValidationError):
        GaussianState((0, 0), ((0.1, 0), (0, 0.1))).check_uncertainty(1.0)
    s = GaussianState.minimum_uncertainty(2.0, 0.5, 0.3)
    assert np.linalg.det(s.sigma) == pytest.approx(0.3**2 / 4)
    assert s.sigma[0, 0] == pytest.approx(0.3 / 2)


def test_history_spec():
    h = HistorySpec(2.0, (0.5, 2.0), ((-1, 1), (0,)), 0.5)
    assert h.strings() == [(-1.0, 0.0), (1.0, 0.0)]
    assert h.labels() == ["-1|0", "1|0"]
    assert h.window_weight(0.5, 0.0) == pytest.approx(math.exp(-0.5))
    sharp = HistorySpec(2.0, (1.0,), ((0,),), 1.0, "sharp")
    assert list(sharp.window_weight([-0.5, 0.4999, 0.5], 0.0)) == [1.0, 1.0, 0.0]
    wide = HistorySpec(2.0, (1.0,), ((0,),), math.inf)
    assert wide.window_weight(100.0, 0.0) == 1.0
    for bad in (
        dict(tau=1.0, times=(2.0,), centers=((0,),), delta=1.0),
        dict(tau=2.0, times=(1.0, 0.5), centers=((0,), (0,)), delta=1.0),
        dict(tau=2.0, times=(1.0,), centers=((1, 0),), delta=1.0),
        dict(tau=2.0, times=(1.0,), centers=((0,), (1,)), delta=1.0),
        dict(tau=2.0, times=(1.0,), centers=((0,),), delta=0.0),
    ):
        with pytest.raises(ValidationError):
            HistorySpec(**bad)


def test_path_quadrature_snap():
    q = PathQuadrature(10)
    assert q.snap(HistorySpec(2.0, (0.41, 2.0), ((0,), (0,)), 1.0)) == (2, 10)
    with pytest.raises(ValidationError):
        q.snap(HistorySpec(2.0, (0.41, 0.45), ((0,), (0,)), 1.0))
    with pytest.raises(ValidationError):
        PathQuadrature(0)


def test_decoherence_matrix():
    D = DecoherenceMatrix(["a", "b"], [[0.5, 0.1j], [-0.1j, 0.5]], (1.0,))
    assert D.im_ratio() == pytest.approx(0.2)
    assert np.array_equal(D.diagonal, [0.5, 0.5])
    with pytest.raises(ValidationError):
        DecoherenceMatrix(["a"], np.eye(2), (1.0,))


def test_config_error_location():
    e = ConfigError("unknown key", "run.ini", 7, "gama")
    assert str(e).startswith("run.ini:7")
    assert isinstance(e, ValueError)
