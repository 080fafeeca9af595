"""Exact Gaussian dynamics of a particle coupled to N harmonic oscillators.

The closed Hamiltonian is

    H = p^2/2m + V(x) + m dw2 x^2 / 2
        + sum_n [ p_n^2 / 2 m_n + m_n w_n^2 q_n^2 / 2 + c_n q_n x ],

with the counterterm dw2 = sum_n c_n^2 / (m m_n w_n^2) so that the
renormalised system frequency is the model frequency.  It is quadratic, so
means and covariances evolve exactly under exp(A t).  The propagator is
built from the normal modes of the mass-weighted stiffness matrix; only the
two system rows are formed unless the full matrix is requested.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import RecurrenceWarning, ValidationError
from .models import GaussianState, ModelParams

GRIDS = ("linear", "gauss_legendre", "log")


@dataclass
class BathSpec:
    """Discrete oscillator bath.

    Attributes
    ----------
    frequencies, masses, couplings : (N,) arrays
    cutoff : float
    gamma : float
        Target damping rate (FP drag 2 gamma).
    system_mass : float
    counterterm : float
        Frequency shift dw2 = sum c_n^2 / (m m_n w_n^2).
    grid : str
    """

    frequencies: np.ndarray
    masses: np.ndarray
    couplings: np.ndarray
    cutoff: float
    gamma: float
    system_mass: float
    grid: str = "linear"
    counterterm: float = field(init=False)

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        self.masses = np.asarray(self.masses, dtype=float)
        self.couplings = np.asarray(self.couplings, dtype=float)
        n = self.frequencies.size
        if n < 1 or self.masses.shape != (n,) or self.couplings.shape != (n,):
            raise ValidationError("bath arrays must share one length N >= 1")
        if np.any(self.frequencies <= 0) or np.any(self.masses <= 0):
            raise ValidationError("bath frequencies and masses must be positive")
        if not np.all(np.isfinite(self.couplings)):
            raise ValidationError("couplings must be finite")
        self.counterterm = float(
            np.sum(self.couplings**2 / (self.system_mass * self.masses * self.frequencies**2))
        )

    @property
    def size(self) -> int:
        return self.frequencies.size

    @property
    def recurrence_time(self) -> float:
        """2 pi N / cutoff (exact revival time of the linear grid)."""
        return 2 * math.pi * self.size / self.cutoff

    def with_couplings(self, couplings) -> "BathSpec":
        return BathSpec(self.frequencies, self.masses, couplings, self.cutoff, self.gamma,
                        self.system_mass, self.grid)


def discretize_ohmic_bath(gamma: float, cutoff: float, N: int, mass: float = 1.0,
                          bath_masses: float = 1.0, grid: str = "linear") -> BathSpec:
    """Ohmic bath J(w) = eta w (eta = 2 m gamma) up to ``cutoff``.

    Couplings follow c_n^2 = (2/pi) m_n w_n J(w_n) dw_n.  On the linear grid
    w_n = n cutoff / N and dw_n = cutoff / N.
    """
    if int(N) != N or N < 1:
        raise ValidationError("N must be a positive integer")
    if not cutoff > 0:
        raise ValidationError("cutoff must be positive")
    if gamma < 0 or mass <= 0 or bath_masses <= 0:
        raise ValidationError("gamma must be non-negative and masses positive")
    if grid == "linear":
        w = np.arange(1, N + 1) * cutoff / N
        dw = np.full(N, cutoff / N)
    elif grid == "gauss_legendre":
        nodes, weights = np.polynomial.legendre.leggauss(N)
        w = 0.5 * cutoff * (nodes + 1)
        dw = 0.5 * cutoff * weights
    elif grid == "log":
        w = cutoff * np.geomspace(1.0 / N, 1.0, N)
        dw = np.diff(np.r_[0.0, w])
    else:
        raise ValidationError(f"grid must be one of {GRIDS}")
    mn = np.full(N, float(bath_masses))
    eta = 2 * mass * gamma
    c = np.sqrt(2 / np.pi * mn * w * eta * w * dw)
    return BathSpec(w, mn, c, float(cutoff), float(gamma), float(mass), grid)


def stiffness_matrix(model: ModelParams, bath: BathSpec, counterterm: bool = True) -> np.ndarray:
    """Potential-energy matrix K with H = p^T M^-1 p / 2 + q^T K q / 2, q = (x, q_1..q_N)."""
    n = bath.size + 1
    K = np.zeros((n, n))
    K[0, 0] = 2 * model.k2 + (model.mass * bath.counterterm if counterterm else 0.0)
    K[0, 1:] = bath.couplings
    K[1:, 0] = bath.couplings
    K[1:, 1:] = np.diag(bath.masses * bath.frequencies**2)
    return K


def _mode_functions(ev, t):
    """cos-like c(t) and sin-like s(t) for each eigenvalue (hyperbolic if negative)."""
    c = np.empty_like(ev)
    s = np.empty_like(ev)
    pos = ev > 0
    neg = ev < 0
    zero = ~(pos | neg)
    w = np.sqrt(ev[pos])
    c[pos] = np.cos(w * t)
    s[pos] = np.sin(w * t) / w
    k = np.sqrt(-ev[neg])
    c[neg] = np.cosh(k * t)
    s[neg] = np.sinh(k * t) / k
    c[zero] = 1.0
    s[zero] = t
    return c, s


@dataclass
class CovarianceSeries:
    """Time series of a Gaussian state of the closed system.

    ``mean`` has shape (T, 2) and ``cov`` shape (T, 2, 2) for the system
    (x, p).  ``full_cov`` (T, 2n, 2n) and ``propagators`` are kept only on
    request.  Full phase-space ordering is (q_0..q_N, p_0..p_N).
    """

    times: np.ndarray
    mean: np.ndarray
    cov: np.ndarray
    dimension: int
    full_cov: np.ndarray | None = None
    propagators: np.ndarray | None = None
    generator: np.ndarray | None = None
    recurrence_time: float = math.inf
    recurrence_crossed: bool = False
    meta: dict = field(default_factory=dict)

    def to_csv(self, path):
        data = np.column_stack([self.times, self.mean[:, 0], self.mean[:, 1],
                                self.cov[:, 0, 0], self.cov[:, 0, 1], self.cov[:, 1, 1]])
        np.savetxt(path, data, delimiter=",", header="t,mean_x,mean_p,sxx,sxp,spp",
                   comments="", fmt="%.17g")


def thermal_bath_covariance(bath: BathSpec, kT: float):
    """Classical thermal variances <q_n^2> = kT/(m_n w_n^2) and <p_n^2> = m_n kT."""
    return kT / (bath.masses * bath.frequencies**2), bath.masses * kT


def evolve_gaussian_closed_system(model: ModelParams, bath: BathSpec, kT_A: float,
                                  state: GaussianState, tau: float, samples: int,
                                  counterterm: bool = True, keep_full: bool = False
                                  ) -> CovarianceSeries:
    """Exact mean and covariance of the system under the closed linear dynamics.

    The initial state is the system Gaussian times an uncorrelated classical
    thermal bath at temperature ``kT_A``.

    Parameters
    ----------
    samples : int
        Number of equally spaced output times on [0, tau] (inclusive).
    counterterm : bool
        Include the frequency counterterm (default); without it a free
        particle acquires unstable hyperbolic modes.
    keep_full : bool
        Also return the full propagators and covariances (memory grows as
        T (2N+2)^2).
    """
    if not model.is_linear:
        raise ValidationError("exact bath dynamics needs a free or harmonic model")
    if kT_A < 0 or not tau > 0:
        raise ValidationError("kT_A must be non-negative and tau positive")
    if int(samples) != samples or samples < 2:
        raise ValidationError("samples must be an integer >= 2")
    if abs(bath.system_mass - model.mass) > 1e-12 * model.mass:
        raise ValidationError("bath was discretised for a different system mass")
    m = model.mass
    n = bath.size + 1
    Mv = np.r_[m, bath.masses]
    sq = np.sqrt(Mv)
    K = stiffness_matrix(model, bath, counterterm)
    ev, U = np.linalg.eigh(K / np.outer(sq, sq))
    sqq, spp = thermal_bath_covariance(bath, kT_A)
    S0 = state.sigma
    Sq = np.diag(np.r_[S0[0, 0], sqq])
    Sp = np.diag(np.r_[S0[1, 1], spp])
    Sqp = np.zeros((n, n))
    Sqp[0, 0] = S0[0, 1]
    mu_q = np.r_[state.mu[0], np.zeros(bath.size)]
    mu_p = np.r_[state.mu[1], np.zeros(bath.size)]
    # q(t) = M^-1/2 U [c U^T M^1/2 q0 + s U^T M^-1/2 p0]
    # p(t) = M^1/2 U [-ev s U^T M^1/2 q0 + c U^T M^-1/2 p0]
    B = U.T * sq[None, :]
    Bp = U.T / sq[None, :]
    a = U[0, :]
    times = np.linspace(0.0, tau, int(samples))
    mean = np.empty((len(times), 2))
    cov = np.empty((len(times), 2, 2))
    full_cov = np.empty((len(times), 2 * n, 2 * n)) if keep_full else None
    props = np.empty((len(times), 2 * n, 2 * n)) if keep_full else None
    Sfull = np.block([[Sq, Sqp], [Sqp.T, Sp]])
    for k, t in enumerate(times):
        c, s = _mode_functions(ev, t)
        if keep_full:
            Uc = (U * c) @ U.T
            Us = (U * s) @ U.T
            Ue = (U * (-ev * s)) @ U.T
            Phi = np.block([
                [Uc / sq[:, None] * sq[None, :], Us / sq[:, None] / sq[None, :]],
                [Ue * sq[:, None] * sq[None, :], Uc * sq[:, None] / sq[None, :]],
            ])
            props[k] = Phi
            full_cov[k] = Phi @ Sfull @ Phi.T
            R = Phi[[0, n]]
        else:
            xq = (a * c) @ B / sq[0]
            xp = (a * s) @ Bp / sq[0]
            pq = (a * (-ev * s)) @ B * sq[0]
            pp = (a * c) @ Bp * sq[0]
            R = np.array([np.r_[xq, xp], np.r_[pq, pp]])
        Rq, Rp = R[:, :n], R[:, n:]
        mean[k] = Rq @ mu_q + Rp @ mu_p
        cov[k] = Rq @ Sq @ Rq.T + Rp @ Sp @ Rp.T + Rq @ Sqp @ Rp.T + Rp @ Sqp.T @ Rq.T
    cov = 0.5 * (cov + cov.transpose(0, 2, 1))
    crossed = tau > bath.recurrence_time
    if crossed:
        warnings.warn(
            f"tau = {tau:.6g} exceeds the bath recurrence time {bath.recurrence_time:.6g}; "
            "finite-bath revivals spoil the continuum limit",
            RecurrenceWarning,
            stacklevel=2,
        )
    A = None
    if keep_full:
        Minv = np.diag(1.0 / Mv)
        A = np.block([[np.zeros((n, n)), Minv], [-K, np.zeros((n, n))]])
    meta = {"N": bath.size, "cutoff": bath.cutoff, "gamma": bath.gamma, "kT_A": kT_A,
            "counterterm": bool(counterterm), "grid": bath.grid}
    return CovarianceSeries(times, mean, cov, 2 * n, full_cov, props, A,
                            bath.recurrence_time, crossed, meta)


def reduced_moments(series: CovarianceSeries):
    """System mean (T, 2) and covariance (T, 2, 2) of a series.

    Works on the system block of ``full_cov`` when present, so applying it
    to its own output (or repeatedly) gives the same result.
    """
    if isinstance(series, tuple):
        return series
    if series.full_cov is not None:
        n = series.dimension // 2
        idx = [0, n]
        cov = series.full_cov[:, idx][:, :, idx]
        return series.mean.copy(), cov
    return series.mean.copy(), series.cov.copy()


def ou_sigma_pp(times, mass: float, gamma: float, kT: float, spp0: float) -> np.ndarray:
    """Momentum variance of the free Fokker-Planck (Ornstein-Uhlenbeck) limit."""
    t = np.asarray(times, dtype=float)
    return mass * kT + (spp0 - mass * kT) * np.exp(-4 * gamma * t)


def energy_matrix(model: ModelParams, bath: BathSpec, counterterm: bool = True) -> np.ndarray:
    """Hessian H of the total energy in (q, p) ordering: E = z^T H z / 2."""
    n = bath.size + 1
    K = stiffness_matrix(model, bath, counterterm)
    Minv = np.diag(1.0 / np.r_[model.mass, bath.masses])
    Z = np.zeros((n, n))
    return np.block([[K, Z], [Z, Minv]])


def sup_relative_deviation(series: CovarianceSeries, model: ModelParams, bath: BathSpec,
                           kT: float, t_min: float = 0.0) -> float:
    """max_t |sigma_pp - OU| / OU over t >= t_min."""
    spp = series.cov[:, 1, 1]
    ou = ou_sigma_pp(series.times, model.mass, bath.gamma, kT, spp[0])
    sel = series.times >= t_min
    return float(np.max(np.abs(spp[sel] - ou[sel]) / ou[sel]))
