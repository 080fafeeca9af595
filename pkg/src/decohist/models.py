"""Shared parameter containers: system model, Fokker-Planck bath, Gaussian
states and coarse-grained history specifications."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ValidationError

POTENTIALS = ("free", "harmonic", "quartic", "harmonic_quartic")
WINDOWS = ("gaussian", "sharp")


def _finite(name, value):
    if not np.isfinite(value):
        raise ValidationError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class ModelParams:
    """One-dimensional particle in a polynomial potential.

    The potential is ``V(x) = m omega^2 x^2 / 2 + lam x^4`` with the terms
    switched on according to ``potential``.

    Parameters
    ----------
    mass : float
        Particle mass, > 0.
    hbar : float
        Reduced Planck constant in the chosen units, > 0.
    potential : {"free", "harmonic", "quartic", "harmonic_quartic"}
    omega : float
        Harmonic frequency (ignored for free and pure quartic models).
    lam : float
        Quartic coefficient (ignored unless the potential has a quartic part).
    """

    mass: float = 1.0
    hbar: float = 1.0
    potential: str = "free"
    omega: float = 0.0
    lam: float = 0.0

    def __post_init__(self):
        if self.potential not in POTENTIALS:
            raise ValidationError(
                f"potential must be one of {POTENTIALS}, got {self.potential!r}"
            )
        for name in ("mass", "hbar", "omega", "lam"):
            _finite(name, getattr(self, name))
        if self.mass <= 0 or self.hbar <= 0:
            raise ValidationError("mass and hbar must be positive")
        if self.omega < 0 or self.lam < 0:
            raise ValidationError("omega and lam must be non-negative")
        if self.potential in ("harmonic", "harmonic_quartic") and self.omega == 0:
            raise ValidationError("harmonic potentials need omega > 0")
        if self.potential in ("quartic", "harmonic_quartic") and self.lam == 0:
            raise ValidationError("quartic potentials need lam > 0")

    @property
    def is_linear(self) -> bool:
        """True when the equations of motion are linear (free or harmonic)."""
        return self.potential in ("free", "harmonic")

    @property
    def k2(self) -> float:
        """Coefficient of x^2 in V, i.e. m omega^2 / 2."""
        if self.potential in ("harmonic", "harmonic_quartic"):
            return 0.5 * self.mass * self.omega**2
        return 0.0

    @property
    def k4(self) -> float:
        if self.potential in ("quartic", "harmonic_quartic"):
            return self.lam
        return 0.0

    @property
    def frequency(self) -> float:
        """Harmonic frequency actually present in the potential (0 if none)."""
        return self.omega if self.potential in ("harmonic", "harmonic_quartic") else 0.0

    def derivative(self, x, order: int = 0):
        """n-th derivative of the potential evaluated at ``x``."""
        x = np.asarray(x, dtype=float)
        k2, k4 = self.k2, self.k4
        if order == 0:
            return k2 * x**2 + k4 * x**4
        if order == 1:
            return 2 * k2 * x + 4 * k4 * x**3
        if order == 2:
            return 2 * k2 + 12 * k4 * x**2 + 0 * x
        if order == 3:
            return 24 * k4 * x
        if order == 4:
            return 24 * k4 + 0 * x
        return np.zeros_like(x)

    def potential_energy(self, x):
        return self.derivative(x, 0)

    def force(self, x):
        return -self.derivative(x, 1)

    def linear_generator(self, gamma: float = 0.0) -> np.ndarray:
        """Drift matrix A of (x, p) for linear models: d/dt (x,p) = A (x,p)."""
        if not self.is_linear:
            raise ValidationError("linear generator requires a free or harmonic model")
        m = self.mass
        return np.array([[0.0, 1.0 / m], [-2.0 * self.k2, -2.0 * gamma]])


@dataclass(frozen=True)
class FPBath:
    """High-temperature ohmic environment in the Fokker-Planck limit.

    Drag on the momentum is ``2 gamma p`` and the momentum diffusion constant
    is ``2 m gamma kT``.
    """

    gamma: float = 0.0
    kT: float = 0.0

    def __post_init__(self):
        _finite("gamma", self.gamma)
        _finite("kT", self.kT)
        if self.gamma < 0 or self.kT < 0:
            raise ValidationError("gamma and kT must be non-negative")

    def diffusion(self, mass: float) -> float:
        return 2.0 * mass * self.gamma * self.kT


@dataclass(frozen=True)
class GaussianState:
    """Gaussian phase-space state: mean (x, p) and 2x2 covariance."""

    mean: tuple = (0.0, 0.0)
    cov: tuple = ((1.0, 0.0), (0.0, 1.0))

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        if mean.shape != (2,) or cov.shape != (2, 2):
            raise ValidationError("GaussianState needs a 2-vector mean and 2x2 covariance")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValidationError("GaussianState entries must be finite")
        if abs(cov[0, 1] - cov[1, 0]) > 1e-12 * max(1.0, np.abs(cov).max()):
            raise ValidationError("covariance must be symmetric")
        if cov[0, 0] <= 0 or np.linalg.det(cov) <= 0:
            raise ValidationError("covariance must be positive definite")
        object.__setattr__(self, "mean", tuple(mean))
        object.__setattr__(self, "cov", tuple(map(tuple, cov)))

    @property
    def mu(self) -> np.ndarray:
        return np.array(self.mean)

    @property
    def sigma(self) -> np.ndarray:
        return np.array(self.cov)

    def check_uncertainty(self, hbar: float):
        """Raise unless det(cov) >= hbar^2/4 (a physical Gaussian state)."""
        det = float(np.linalg.det(self.sigma))
        if det < hbar**2 / 4 - 1e-12:
            raise ValidationError(
                f"covariance determinant {det:.6g} violates the uncertainty bound "
                f"hbar^2/4 = {hbar**2 / 4:.6g}"
            )
        return self

    @classmethod
    def minimum_uncertainty(cls, mass: float, omega_ref: float, hbar: float,
                            mean=(0.0, 0.0)) -> "GaussianState":
        """Coherent-state Gaussian with position variance hbar/(2 m omega_ref)."""
        if omega_ref <= 0:
            raise ValidationError("omega_ref must be positive")
        sxx = hbar / (2.0 * mass * omega_ref)
        return cls(mean, ((sxx, 0.0), (0.0, hbar**2 / (4.0 * sxx))))


@dataclass(frozen=True)
class HistorySpec:
    """Coarse-grained history set: gates of width ``delta`` at given times.

    ``centers[k]`` is the strictly increasing grid of gate centres used at
    ``times[k]``.  Histories are all strings of one centre per time.
    """

    tau: float
    times: tuple
    centers: tuple
    delta: float
    window: str = "gaussian"

    def __post_init__(self):
        times = tuple(float(t) for t in np.atleast_1d(self.times))
        centers = tuple(tuple(float(c) for c in np.atleast_1d(g)) for g in self.centers)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "centers", centers)
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise ValidationError("tau must be positive")
        if self.window not in WINDOWS:
            raise ValidationError(f"window must be one of {WINDOWS}")
        if not self.delta > 0:
            raise ValidationError("gate width delta must be positive")
        if len(times) != len(centers):
            raise ValidationError("need one centre grid per projection time")
        if any(t <= 0 or t > self.tau * (1 + 1e-12) for t in times):
            raise ValidationError("projection times must lie in (0, tau]")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValidationError("projection times must be strictly increasing")
        for g in centers:
            if len(g) == 0 or not np.all(np.isfinite(g)):
                raise ValidationError("centre grids must be finite and non-empty")
            if any(b <= a for a, b in zip(g, g[1:])):
                raise ValidationError("centre grids must be strictly increasing")

    @property
    def n_times(self) -> int:
        return len(self.times)

    def strings(self) -> list:
        """All centre strings, last time varying fastest."""
        return list(itertools.product(*self.centers))

    def labels(self) -> list:
        return [history_label(s) for s in self.strings()]

    def window_weight(self, x, center):
        """Amplitude window w(x - center) (not squared)."""
        d = np.asarray(x, dtype=float) - center
        if self.window == "sharp":
            h = 0.5 * self.delta
            return ((d >= -h) & (d < h)).astype(float)
        if math.isinf(self.delta):
            return np.ones_like(d)
        return np.exp(-(d**2) / (2 * self.delta**2))


def history_label(values) -> str:
    return "|".join(f"{v:.12g}" for v in values)


@dataclass(frozen=True)
class PathQuadrature:
    """Time skeleton with ``slices`` equal steps over the history duration."""

    slices: int

    def __post_init__(self):
        if int(self.slices) != self.slices or self.slices < 1:
            raise ValidationError("slices must be a positive integer")

    def step(self, tau: float) -> float:
        return tau / self.slices

    def snap(self, hist: HistorySpec) -> tuple:
        """Slice indices of the projection times (rounded to the nearest boundary)."""
        dt = self.step(hist.tau)
        idx = tuple(int(round(t / dt)) for t in hist.times)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValidationError(
                "two projection times snap to the same slice; increase slices"
            )
        return idx


@dataclass
class DecoherenceMatrix:
    """Decoherence functional over pairs of histories.

    ``entries[i, j] = D(history_index[i], history_index[j])``.
    """

    history_index: list
    entries: np.ndarray
    times: tuple
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        n = len(self.history_index)
        if self.entries.shape != (n, n):
            raise ValidationError("entries must be square over the history index")

    @property
    def diagonal(self) -> np.ndarray:
        return np.real(np.diag(self.entries)).copy()

    def im_ratio(self) -> float:
        """max |Im D| / max |D|."""
        top = np.abs(self.entries).max()
        return float(np.abs(self.entries.imag).max() / top) if top > 0 else 0.0
