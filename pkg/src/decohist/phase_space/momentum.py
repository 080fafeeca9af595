"""Two-time momentum histories of a Brownian particle.

The Caldeira-Leggett master equation is solved in the momentum
representation on the p-grid of a Wigner field.  With discrete density
matrix ``r_jl = h rho(p_j, p_l)`` (h the momentum spacing) the generator is

    kinetic     -(i / 2 m hbar)(p_j^2 - p_l^2) r_jl
    drag        (gamma / h) [S+ - S-](Pm r),   Pm_jl = (p_j + p_l)/2
    diffusion   (2 m gamma kT / h^2) [S+ - 2 + S-] r
    potential   -(i / hbar)[V(X), r],  X = i hbar d/dp (central difference)

where ``(S+- f)_jl = f_{j+-1, l+-1}``.  A momentum window is a function of p
only, hence diagonal here, and star products with it are ordinary products.
The functional

    D(a1 a2 | b1 b2) = Tr( P_b2 P_a2 e^{Lt}[P_a1 r P_b1] )

is evaluated by evolving the second-time window backwards with the adjoint
generator and contracting with the first-time windows and r.  For a free
particle the adjoint keeps diagonal operators diagonal, so disjoint
first-time windows give exactly zero interference.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.signal import resample

from ..exceptions import ValidationError
from ..models import DecoherenceMatrix, FPBath, HistorySpec, ModelParams, history_label
from .field import WignerField


def density_matrix_from_wigner(W: WignerField, hbar: float) -> np.ndarray:
    """Discrete momentum density matrix h rho(p_j, p_l) from a Wigner field.

    rho(p + q/2, p - q/2) = int W(x, p) exp(-i q x / hbar) dx, evaluated with
    mean momenta on the half-spaced grid (band-limited resampling along p).
    """
    n = W.n_p
    fine = resample(W.values, 2 * n, axis=1)  # mean momentum (p_j + p_l)/2
    h = W.dp
    j = np.arange(n)
    J, L = np.meshgrid(j, j, indexing="ij")
    s = J + L
    q = (J - L) * h
    x = W.x
    # int dx W_fine(x, s) exp(-i q x / hbar)
    phase = np.exp(-1j * q[..., None] * x[None, None, :] / hbar)
    rho = np.einsum("jlx,xjl->jl", phase, fine[:, s]) * W.dx
    r = h * rho
    return 0.5 * (r + r.conj().T)


def _shift(f, s):
    out = np.zeros_like(f)
    if s > 0:
        out[:-s, :-s] = f[s:, s:]
    else:
        out[-s:, -s:] = f[:s, :s]
    return out


class _AdjointGenerator:
    def __init__(self, p, model: ModelParams, bath: FPBath):
        self.h = p[1] - p[0]
        m, hbar = model.mass, model.hbar
        self.hbar = hbar
        P, Pp = np.meshgrid(p, p, indexing="ij")
        self.kin = -1j / (2 * m * hbar) * (P**2 - Pp**2)
        self.pm = 0.5 * (P + Pp)
        self.gamma = bath.gamma
        self.diff = 2 * m * bath.gamma * bath.kT
        self.V = None
        if model.potential != "free":
            n = len(p)
            d1 = (np.eye(n, k=1) - np.eye(n, k=-1)) / (2 * self.h)
            X = 1j * hbar * d1
            k2, k4 = model.k2, model.k4
            X2 = X @ X
            self.V = k2 * X2 + k4 * (X2 @ X2)
        # spectral radius bound for the RK4 step
        rad = np.abs(self.kin).max() + 4 * self.diff / self.h**2
        rad += 2 * self.gamma * np.abs(p).max() / self.h
        if self.V is not None:
            rad += 2 * np.abs(self.V).sum(axis=1).max() / hbar
        self.radius = rad

    def __call__(self, A):
        out = -self.kin * A
        if self.gamma:
            out = out + self.gamma / self.h * self.pm * (_shift(A, -1) - _shift(A, 1))
        if self.diff:
            out = out + self.diff / self.h**2 * (_shift(A, 1) - 2 * A + _shift(A, -1))
        if self.V is not None:
            out = out - 1j / self.hbar * (A @ self.V - self.V @ A)
        return out


def _rk4(gen, A, t, steps):
    dt = t / steps
    for _ in range(steps):
        k1 = gen(A)
        k2 = gen(A + 0.5 * dt * k1)
        k3 = gen(A + 0.5 * dt * k2)
        k4 = gen(A + dt * k3)
        A = A + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return A


def _windows(p, centers, delta, window):
    out = []
    for c in centers:
        d = p - c
        if window == "sharp":
            out.append(((d >= -delta / 2) & (d < delta / 2)).astype(float))
        else:
            out.append(np.exp(-(d**2) / (2 * delta**2)))
    return out


def _dfun(W0, model, bath, t, windows: HistorySpec, steps):
    if windows.n_times != 2:
        raise ValidationError("momentum histories use exactly two times (0 and t)")
    if t < 0:
        raise ValidationError("t must be non-negative")
    p = W0.p
    r = density_matrix_from_wigner(W0, model.hbar)
    chi1 = _windows(p, windows.centers[0], windows.delta, windows.window)
    chi2 = _windows(p, windows.centers[1], windows.delta, windows.window)
    gen = _AdjointGenerator(p, model, bath)
    if steps is None:
        steps = max(1, int(math.ceil(t * gen.radius / 2.0)))
    # the last-time operator P_b2 P_a2 is symmetric in (a2, b2)
    evolved = {}
    for a, b in itertools.combinations_with_replacement(range(len(chi2)), 2):
        A0 = np.diag((chi2[a] * chi2[b]).astype(complex))
        evolved[(a, b)] = _rk4(gen, A0, t, steps) if t > 0 else A0
    strings = list(itertools.product(range(len(chi1)), range(len(chi2))))
    n = len(strings)
    D = np.zeros((n, n), dtype=complex)
    for i, (a1, a2) in enumerate(strings):
        for j, (b1, b2) in enumerate(strings):
            if j < i:
                continue
            key = (min(a2, b2), max(a2, b2))
            A = evolved[key]
            # Tr(A sigma) with sigma = P_a1 r P_b1 (P_a1 on the left)
            sigma = chi1[a1][:, None] * r * chi1[b1][None, :]
            D[i, j] = np.sum(A.T * sigma)
            D[j, i] = np.conj(D[i, j])
    D[np.diag_indices(n)] = D.diagonal().real
    labels = [history_label((windows.centers[0][a], windows.centers[1][b])) for a, b in strings]
    meta = {"steps": steps, "t": t, "window": windows.window}
    return DecoherenceMatrix(labels, D, (0.0, float(t)), meta)


def momentum_history_dfun(W0: WignerField, bath: FPBath, t: float, windows: HistorySpec,
                          model: ModelParams | None = None, steps: int | None = None
                          ) -> DecoherenceMatrix:
    """Decoherence functional of momentum histories at times 0 and t.

    Parameters
    ----------
    W0 : WignerField
        Initial state; its p-grid is the computational grid.
    bath : FPBath
    t : float
        Second projection time.
    windows : HistorySpec
        Two centre grids in momentum (times and tau are informational).
    model : ModelParams, optional
        Must be free; defaults to unit mass and hbar = 1.
    steps : int, optional
        RK4 steps for the backward evolution (chosen from a stability bound
        when omitted).
    """
    model = model or ModelParams()
    if model.potential != "free":
        raise ValidationError("momentum decoherence is exact only for a free particle")
    return _dfun(W0, model, bath, t, windows, steps)


def momentum_history_dfun_with_potential(W0, bath, t, windows, model, steps=None):
    """Same functional for any polynomial potential (diagnostic; not exact)."""
    return _dfun(W0, model, bath, t, windows, steps)


def window_entropy(D: DecoherenceMatrix, n_second: int) -> float:
    """Shannon entropy of the second-time window occupancies."""
    probs = D.diagonal.reshape(-1, n_second).sum(axis=0)
    probs = probs[probs > 0]
    probs = probs / probs.sum()
    return float(-(probs * np.log(probs)).sum())
