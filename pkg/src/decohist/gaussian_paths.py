"""Gaussian path-integral evaluation of decoherence functionals for linear
open systems.

A history pair is a forward path x_0..x_M and a backward path x'_0..x'_M
that meet at the final time (x'_M = x_M).  After tracing a high-temperature
ohmic environment the integrand is the exponential of a complex quadratic
form

    E(z) = z^T Q z + l^T z + c,

in the path variables z, and gate windows w(x) = exp(-x^2 / 2 Delta^2) only
add rank-one terms.  Every entry of the decoherence functional is therefore
a closed-form Gaussian integral; the window-free integral (Tr rho = 1) fixes
the normalisation so that measure constants cancel.

Discretisation per slice of length dt:

* system action: the exact harmonic (or free) short-time kernel
  ``a (x_j^2 + x_{j+1}^2) + b x_j x_{j+1}``;
* dissipation: ``-m gamma xi ds/dt`` with midpoint xi and forward-difference
  s, where ``xi = x - x'`` and ``s = x + x'``;
* noise: ``-(2 m gamma kT / hbar^2) xi^2`` integrated with the trapezoidal rule;
* initial state: the Gaussian density-matrix kernel rho(x_0, x'_0).

The doubled theory adds an auxiliary pair (y, y') whose block is the complex
conjugate of an ordinary block with its own environment; gates act on the
sum X = x + y.  The result is real and non-negative up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .exceptions import IndefiniteFormError, NumericalError, StepSizeError, ValidationError
from .models import (
    DecoherenceMatrix,
    FPBath,
    GaussianState,
    HistorySpec,
    ModelParams,
    PathQuadrature,
    history_label,
)

COND_LIMIT = 1e14


@dataclass
class QuadraticForm:
    """Complex quadratic exponent over discretised path variables.

    Attributes
    ----------
    Q : (n, n) complex symmetric array
    l : (n,) complex array
    c : complex
    window_fwd, window_bwd : (n, T) arrays
        Column k is the linear combination of path variables tested by the
        gate at projection time k on the forward (resp. backward) branch.
    """

    Q: np.ndarray
    l: np.ndarray
    c: complex
    window_fwd: np.ndarray
    window_bwd: np.ndarray
    kind: str
    slices: int
    dt: float
    hbar: float
    snapped_times: tuple
    meta: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.Q.shape[0]

    def action_imag(self) -> np.ndarray:
        """Imaginary part of the action matrix S with E = (i/hbar) S."""
        return -self.hbar * self.Q.real


class _Builder:
    def __init__(self, n):
        self.Q = np.zeros((n, n), dtype=complex)
        self.l = np.zeros(n, dtype=complex)
        self.c = 0j

    def quad(self, a, b, coef):
        """Add coef * (a.z)(b.z) with a, b given as {index: weight}."""
        for i, wa in a.items():
            for j, wb in b.items():
                v = 0.5 * coef * wa * wb
                self.Q[i, j] += v
                self.Q[j, i] += v

    def lin(self, a, coef):
        for i, w in a.items():
            self.l[i] += coef * w


def _combo(*terms):
    out = {}
    for idx, w in terms:
        out[idx] = out.get(idx, 0.0) + w
    return out


def slice_kernel(model: ModelParams, dt: float):
    """Coefficients (a, b) of the exact one-slice action a(x0^2+x1^2) + b x0 x1."""
    m = model.mass
    w = model.frequency
    if w == 0:
        return m / (2 * dt), -m / dt
    if w * dt >= np.pi:
        need = int(np.ceil(w * dt / np.pi * 1.25))
        raise StepSizeError(
            f"omega*dt = {w * dt:.3g} >= pi; use at least {need}x more slices"
        )
    return m * w / (2 * np.tan(w * dt)), -m * w / np.sin(w * dt)


def _pair_block(B, fwd, bwd, M, dt, model, bath, state, conj):
    """Add one (forward, backward) path pair with its environment and state."""
    hbar, m = model.hbar, model.mass
    a, b = slice_kernel(model, dt)
    s = -1.0 if conj else 1.0
    ph = s * 1j / hbar
    noise = -2 * m * bath.gamma * bath.kT / hbar**2 * dt * 0.5
    for j in range(M):
        for v, sg in ((fwd, 1.0), (bwd, -1.0)):
            B.quad({v[j]: 1.0}, {v[j]: 1.0}, ph * sg * a)
            B.quad({v[j + 1]: 1.0}, {v[j + 1]: 1.0}, ph * sg * a)
            B.quad({v[j]: 1.0}, {v[j + 1]: 1.0}, ph * sg * b)
        xi0 = _combo((fwd[j], 1.0), (bwd[j], -1.0))
        xi1 = _combo((fwd[j + 1], 1.0), (bwd[j + 1], -1.0))
        if bath.gamma > 0:
            xbar = _combo((fwd[j], 0.5), (bwd[j], -0.5), (fwd[j + 1], 0.5), (bwd[j + 1], -0.5))
            ds = _combo((fwd[j + 1], 1.0), (bwd[j + 1], 1.0), (fwd[j], -1.0), (bwd[j], -1.0))
            B.quad(xbar, ds, ph * (-m * bath.gamma))
        if noise != 0:
            B.quad(xi0, xi0, noise)
            B.quad(xi1, xi1, noise)
    # initial density-matrix kernel in u = (x0 + x0')/2, xi = x0 - x0'
    mu, cov = state.mu, state.sigma
    sxx, sxp, spp = cov[0, 0], cov[0, 1], cov[1, 1]
    kap = sxp / sxx
    s2 = spp - sxp**2 / sxx
    u = _combo((fwd[0], 0.5), (bwd[0], 0.5))
    xi = _combo((fwd[0], 1.0), (bwd[0], -1.0))
    B.quad(u, u, -1 / (2 * sxx))
    B.lin(u, mu[0] / sxx)
    B.c += -mu[0] ** 2 / (2 * sxx)
    B.quad(u, xi, s * 1j / hbar * kap)
    B.lin(xi, s * 1j / hbar * (mu[1] - kap * mu[0]))
    B.quad(xi, xi, -s2 / (2 * hbar**2))


def _check_inputs(model, hist, quad):
    if not model.is_linear:
        raise ValidationError(
            "Gaussian path integrals need a quadratic action (free or harmonic potential)"
        )
    if hist.window != "gaussian":
        raise ValidationError("only Gaussian windows are integrable in closed form")
    idx = quad.snap(hist)
    dt = quad.step(hist.tau)
    slice_kernel(model, dt)
    return idx, dt


def _pair_indices(offset, M):
    fwd = [offset + j for j in range(M + 1)]
    bwd = [offset + M + 1 + j for j in range(M)] + [offset + M]
    return fwd, bwd


def assemble_sqt_form(model: ModelParams, bath: FPBath, hist: HistorySpec,
                      quad: PathQuadrature, rho_A: GaussianState) -> QuadraticForm:
    """Quadratic form of the reduced (single-system) theory.

    The 2M+1 path variables are x_0..x_M followed by x'_0..x'_{M-1}; the
    final point is shared.
    """
    idx, dt = _check_inputs(model, hist, quad)
    rho_A.check_uncertainty(model.hbar)
    M = quad.slices
    n = 2 * M + 1
    B = _Builder(n)
    fwd, bwd = _pair_indices(0, M)
    _pair_block(B, fwd, bwd, M, dt, model, bath, rho_A, conj=False)
    E = np.eye(n)
    wf = np.stack([E[fwd[j]] for j in idx], axis=1)
    wb = np.stack([E[bwd[j]] for j in idx], axis=1)
    return QuadraticForm(B.Q, B.l, B.c, wf, wb, "sqt", M, dt, model.hbar,
                         tuple(j * dt for j in idx))


def assemble_dqt_form(model: ModelParams, bath_a: FPBath, bath_b: FPBath,
                      hist: HistorySpec, quad: PathQuadrature, rho_A: GaussianState,
                      rho_B: GaussianState | None = None,
                      omega_ref: float | None = None) -> QuadraticForm:
    """Quadratic form of the doubled theory with two environments.

    Variables are the system pair (x, x') followed by the auxiliary pair
    (y, y'); gates test X = x + y on both branches.  ``rho_B`` defaults to
    the minimum-uncertainty state of width hbar / (2 m omega_ref), with
    ``omega_ref`` defaulting to the model frequency.
    """
    idx, dt = _check_inputs(model, hist, quad)
    rho_A.check_uncertainty(model.hbar)
    if rho_B is None:
        w = omega_ref if omega_ref is not None else model.frequency
        if not w or w <= 0:
            raise ValidationError("free models need an explicit omega_ref for rho_B")
        rho_B = GaussianState.minimum_uncertainty(model.mass, w, model.hbar)
    rho_B.check_uncertainty(model.hbar)
    M = quad.slices
    nA = 2 * M + 1
    n = 2 * nA
    B = _Builder(n)
    xf, xb = _pair_indices(0, M)
    yf, yb = _pair_indices(nA, M)
    _pair_block(B, xf, xb, M, dt, model, bath_a, rho_A, conj=False)
    _pair_block(B, yf, yb, M, dt, model, bath_b, rho_B, conj=True)
    E = np.eye(n)
    wf = np.stack([E[xf[j]] + E[yf[j]] for j in idx], axis=1)
    wb = np.stack([E[xb[j]] + E[yb[j]] for j in idx], axis=1)
    return QuadraticForm(B.Q, B.l, B.c, wf, wb, "dqt", M, dt, model.hbar,
                         tuple(j * dt for j in idx),
                         {"rho_B": {"mean": list(rho_B.mean), "cov": [list(r) for r in rho_B.cov]}})


def _pair_strings(hist):
    strings = np.array(hist.strings(), dtype=float).reshape(-1, hist.n_times)
    n = len(strings)
    fwd = np.repeat(strings, n, axis=0)
    bwd = np.tile(strings, (n, 1))
    return strings, np.hstack([fwd, bwd])


def evaluate_gaussian_dfun(form: QuadraticForm, hist: HistorySpec,
                           normalization: str = "grid") -> DecoherenceMatrix:
    """Closed-form Gaussian integration for every pair of centre strings.

    Parameters
    ----------
    form : QuadraticForm
    hist : HistorySpec
        Must be the history specification the form was assembled with.
    normalization : {"grid", "trace"}
        ``"trace"`` divides by the window-free integral (Tr rho = 1), giving
        the physical functional with windows w.  ``"grid"`` further rescales
        so that the diagonal sums to one over the supplied centre grid; the
        scale factor is stored in ``meta["trace_scale"]``.
    """
    if normalization not in ("grid", "trace"):
        raise ValidationError("normalization must be 'grid' or 'trace'")
    if form.window_fwd.shape[1] != hist.n_times:
        raise ValidationError("form and history specification disagree on the times")
    if hist.window != "gaussian":
        raise ValidationError("only Gaussian windows are integrable in closed form")
    A0 = -2.0 * form.Q
    herm = np.linalg.eigvalsh(A0.real)
    if herm.min() < -1e-10 * max(1.0, np.abs(herm).max()):
        raise IndefiniteFormError(
            f"real part of the form is indefinite (min eigenvalue {herm.min():.3g}); "
            f"try more slices than {form.slices}"
        )
    cond = np.linalg.cond(A0)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise NumericalError(f"near-singular Gaussian form (condition number {cond:.3g})")

    delta = hist.delta
    Vw = np.hstack([form.window_fwd, form.window_bwd]).astype(complex)
    V = Vw / delta
    lu0 = sla.lu_factor(A0)
    Ag = A0 + V @ V.T
    luG = sla.lu_factor(Ag)
    # det(Ag)/det(A0) = det(I + V^T A0^-1 V); eigenvalues have Re >= 1 so the
    # principal square roots are continuous from the window-free integral
    lam = np.linalg.eigvals(np.eye(V.shape[1]) + V.T @ sla.lu_solve(lu0, V))
    log_pref = -0.5 * np.sum(np.log(lam))
    g_l = sla.lu_solve(luG, form.l)
    G = Vw.T @ sla.lu_solve(luG, Vw)
    h = Vw.T @ g_l
    k0 = 0.5 * form.l @ g_l
    k00 = 0.5 * form.l @ sla.lu_solve(lu0, form.l)

    strings, pairs = _pair_strings(hist)
    cc = pairs / delta**2
    expo = (0.5 * np.einsum("ij,jk,ik->i", cc, G, cc) + cc @ h
            - np.sum(pairs**2, axis=1) / (2 * delta**2) + (k0 - k00) + log_pref)
    nh = len(strings)
    D = np.exp(expo).reshape(nh, nh)
    trace_scale = 1.0
    if normalization == "grid":
        trace_scale = float(np.real(np.trace(D)))
        if not trace_scale > 0:
            raise NumericalError("diagonal of the decoherence functional sums to zero")
        D = D / trace_scale
    labels = [history_label(s) for s in strings]
    meta = {"kind": form.kind, "slices": form.slices, "normalization": normalization,
            "trace_scale": trace_scale, "snapped_times": list(form.snapped_times)}
    return DecoherenceMatrix(labels, D, tuple(form.snapped_times), meta)


def richardson_error(coarse: DecoherenceMatrix, fine: DecoherenceMatrix,
                     order: int = 2) -> np.ndarray:
    """Entrywise error estimate for ``fine`` from a run with half the slices."""
    return np.abs(fine.entries - coarse.entries) / (2**order - 1)


def gaussian_dfun(model, hist, slices, rho_A, bath=None, bath_b=None, doubled=False,
                  rho_B=None, omega_ref=None, normalization="grid") -> DecoherenceMatrix:
    """Convenience wrapper: assemble and evaluate in one call."""
    quad = PathQuadrature(slices)
    bath = bath or FPBath()
    if doubled:
        form = assemble_dqt_form(model, bath, bath_b or FPBath(), hist, quad, rho_A,
                                 rho_B, omega_ref)
    else:
        form = assemble_sqt_form(model, bath, hist, quad, rho_A)
    return evaluate_gaussian_dfun(form, hist, normalization)
