"""Split-step spectral solvers for phase-space evolution equations.

The generator

    dW/dt = -(p/m) dW/dx + V'(x) dW/dp + sum_n c_n V^(2n+1)(x) d^(2n+1)W/dp^(2n+1)
            + 2 gamma d(pW)/dp + 2 m gamma kT d^2W/dp^2,

    c_n = (-1)^n hbar^(2n) / (2^(2n) (2n+1)!),

is split into three exactly solvable pieces:

* free streaming in x, an exact shift applied in Fourier space along x;
* the potential force with Moyal corrections, a phase multiplier in Fourier
  space along p (x is a parameter there);
* drag plus diffusion, an Ornstein-Uhlenbeck step solved exactly in Fourier
  space along p.  The OU characteristic samples the spectrum off the grid,
  so the step is a fixed real N_p x N_p matrix built from a non-uniform DFT.

Strang composition is second order; a fourth-order Yoshida composition is
available when there is no diffusion (negative sub-steps are ill-posed for
a heat equation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..exceptions import BoundaryMassError, StabilityError, ValidationError
from ..models import FPBath, ModelParams
from .field import WignerField

SCHEMES = ("strang", "yoshida4")
MASS_TOL = 1e-6
EDGE_CELLS = 4


@dataclass(frozen=True)
class EvolutionSpec:
    """Parameters of a phase-space evolution run.

    Parameters
    ----------
    model : ModelParams
    duration : float
        Total evolution time.
    steps : int
        Number of (composite) time steps.
    drag : float
        Liouville drag rate gamma_L (classical dissipative flow, no noise).
    bath : FPBath, optional
        Environment for Fokker-Planck runs.
    moyal_order : int
        Number of quantum correction terms kept (0, 1 or 2).
    boundary_mass_tol : float
        Abort when the mass in the outer cells exceeds this value.
    scheme : {"strang", "yoshida4"}
    """

    model: ModelParams
    duration: float
    steps: int
    drag: float = 0.0
    bath: FPBath | None = None
    moyal_order: int = 1
    boundary_mass_tol: float = 1e-4
    scheme: str = "strang"

    def __post_init__(self):
        if not (self.duration >= 0 and np.isfinite(self.duration)):
            raise ValidationError("duration must be finite and non-negative")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValidationError("steps must be a positive integer")
        if self.drag < 0:
            raise ValidationError("drag must be non-negative")
        if self.moyal_order not in (0, 1, 2):
            raise ValidationError("moyal_order must be 0, 1 or 2")
        if self.scheme not in SCHEMES:
            raise ValidationError(f"scheme must be one of {SCHEMES}")
        if self.boundary_mass_tol <= 0:
            raise ValidationError("boundary_mass_tol must be positive")


def moyal_coefficient(n: int, hbar: float) -> float:
    """Coefficient of V^(2n+1) d_p^(2n+1) in the Wigner equation."""
    return (-1) ** n * hbar ** (2 * n) / (4**n * math.factorial(2 * n + 1))


class _Stepper:
    """Precomputed split operators for one grid and one parameter set."""

    def __init__(self, field: WignerField, model: ModelParams, gamma: float, kT: float,
                 moyal_order: int):
        self.model = model
        self.gamma = gamma
        self.diff = 2 * model.mass * gamma * kT
        self.kx = 2 * np.pi * np.fft.rfftfreq(field.n_x, field.dx)
        self.kp_r = 2 * np.pi * np.fft.rfftfreq(field.n_p, field.dp)
        self.kp = 2 * np.pi * np.fft.fftfreq(field.n_p, field.dp)
        self.x = field.x
        self.p = field.p
        self.force = model.derivative(self.x, 1)
        # Moyal corrections: sum_n c_n V^(2n+1)(x) (ik)^(2n+1)
        self.moyal = []
        for n in range(1, moyal_order + 1):
            dv = model.derivative(self.x, 2 * n + 1)
            if np.any(dv != 0):
                self.moyal.append((moyal_coefficient(n, model.hbar) * dv, 2 * n + 1))
        self.curvature = float(np.abs(model.derivative(self.x, 2)).max())
        self._kin = {}
        self._pot = {}
        self._ou = {}

    def check_step(self, h):
        # Strang splitting of a local oscillator is stable for omega h < 2
        if h * math.sqrt(self.curvature / self.model.mass) >= 2.0:
            raise StabilityError(
                f"time step {h:.3g} too large for the potential curvature on this grid"
            )

    def kinetic(self, W, h):
        mult = self._kin.get(h)
        if mult is None:
            mult = np.exp(-1j * np.outer(self.kx, self.p) * h / self.model.mass)
            self._kin[h] = mult
        return np.fft.irfft(np.fft.rfft(W, axis=0) * mult, n=W.shape[0], axis=0)

    def potential(self, W, h):
        mult = self._pot.get(h)
        if mult is None:
            ik = 1j * self.kp_r
            expo = np.outer(self.force, ik)
            for coef, order in self.moyal:
                expo = expo + np.outer(coef, ik**order)
            mult = np.exp(h * expo)
            self._pot[h] = mult
        return np.fft.irfft(np.fft.rfft(W, axis=1) * mult, n=W.shape[1], axis=1)

    def ou(self, W, h):
        if self.gamma == 0 and self.diff == 0:
            return W
        T = self._ou.get(h)
        if T is None:
            T = self._ou_matrix(h)
            self._ou[h] = T
        return W @ T.T

    def _ou_matrix(self, h):
        k, p = self.kp, self.p
        g = self.gamma
        if g > 0:
            shrink = math.exp(-2 * g * h)
            var = self.diff * (1 - math.exp(-4 * g * h)) / (4 * g)
        else:
            shrink = 1.0
            var = self.diff * h
        kappa = k * shrink
        # F(k) = F0(k e^{-2 gamma h}) exp(-var k^2); F0 from a non-uniform DFT
        fwd = np.exp(-1j * np.outer(kappa, p))
        inv = np.exp(1j * np.outer(p, k)) / len(p)
        return np.real(inv @ (np.exp(-var * k**2)[:, None] * fwd))


def _substeps(scheme, dt):
    if scheme == "strang":
        return [dt]
    th = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
    return [th * dt, (1 - 2 * th) * dt, th * dt]


def _run(W0: WignerField, model, gamma, kT, moyal_order, duration, steps, scheme, tol,
         callback=None) -> WignerField:
    mass0 = W0.mass()
    if abs(mass0 - 1.0) > MASS_TOL:
        raise ValidationError(f"initial field is not normalised (mass {mass0:.9g})")
    if W0.boundary_mass(EDGE_CELLS) > tol:
        raise BoundaryMassError("initial field already has mass at the grid boundary")
    if scheme == "yoshida4" and kT * gamma > 0:
        raise ValidationError("yoshida4 has negative sub-steps; not allowed with diffusion")
    st = _Stepper(W0, model, gamma, kT, moyal_order)
    dt = duration / steps
    subs = _substeps(scheme, dt)
    for h in subs:
        st.check_step(abs(h))
    W = W0.values.copy()
    for n in range(steps):
        for h in subs:
            W = st.kinetic(W, 0.5 * h)
            W = st.ou(W, 0.5 * h)
            W = st.potential(W, h)
            W = st.ou(W, 0.5 * h)
            W = st.kinetic(W, 0.5 * h)
        out = W0.with_values(W)
        bm = out.boundary_mass(EDGE_CELLS)
        if bm > tol:
            raise BoundaryMassError(
                f"boundary mass {bm:.3g} exceeds tolerance {tol:.3g} at t = {(n + 1) * dt:.6g}; "
                "enlarge the grid"
            )
        if callback is not None:
            callback((n + 1) * dt, out)
    return W0.with_values(W)


def evolve_liouville(W0: WignerField, spec: EvolutionSpec, callback=None) -> WignerField:
    """Classical Liouville flow with optional drag gamma_L (no noise, no Moyal terms)."""
    if spec.bath is not None:
        raise ValidationError("evolve_liouville takes no bath; use evolve_fokker_planck")
    return _run(W0, spec.model, spec.drag, 0.0, 0, spec.duration, spec.steps, spec.scheme,
                spec.boundary_mass_tol, callback)


def evolve_fokker_planck(W0: WignerField, spec: EvolutionSpec, callback=None) -> WignerField:
    """Reduced Wigner evolution with Fokker-Planck bath and Moyal corrections."""
    if spec.bath is None:
        raise ValidationError("evolve_fokker_planck needs a bath")
    if spec.drag != 0:
        raise ValidationError("set the damping through the bath, not drag")
    b = spec.bath
    return _run(W0, spec.model, b.gamma, b.kT, spec.moyal_order, spec.duration, spec.steps,
                spec.scheme, spec.boundary_mass_tol, callback)


def evolve_dqt_reduced(W0: WignerField, spec: EvolutionSpec, bath_a: FPBath,
                       bath_b: FPBath, callback=None) -> WignerField:
    """Traced doubled-theory evolution: Fokker-Planck at kT_A + kT_B, no Moyal terms."""
    eff = replace(spec, bath=FPBath(bath_a.gamma, bath_a.kT + bath_b.kT), moyal_order=0)
    return evolve_fokker_planck(W0, eff, callback)


def moment_ode_reference(model: ModelParams, bath: FPBath, mean0, cov0, times):
    """Exact first and second moments of the linear Fokker-Planck equation.

    Returns arrays of shape (T, 2) and (T, 2, 2).
    """
    from scipy.linalg import expm

    A = model.linear_generator(bath.gamma)
    Qc = np.array([[0.0, 0.0], [0.0, 4 * model.mass * bath.gamma * bath.kT]])
    means, covs = [], []
    for t in np.atleast_1d(times):
        Phi = expm(A * t)
        # Van Loan: noise covariance accumulated over [0, t]
        Z = expm(np.block([[-A, Qc], [np.zeros((2, 2)), A.T]]) * t)
        Qd = Z[2:, 2:].T @ Z[:2, 2:]
        means.append(Phi @ np.asarray(mean0))
        covs.append(Phi @ np.asarray(cov0) @ Phi.T + 0.5 * (Qd + Qd.T))
    return np.array(means), np.array(covs)
