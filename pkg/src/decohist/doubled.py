"""Doubled commuting variables on a truncated Fock space.

A system pair (x, p) is joined by an auxiliary pair (y, k) and combined as

    X = x + y,  Q = (x - y)/2,  K = (p + k)/2,  P = p - k,

so that X and P commute while [Q, P] = [X, K] = i hbar.  On a truncated
ladder basis these identities hold exactly away from the top Fock level of
either factor; ``safe_projector`` removes that level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln

from .exceptions import ValidationError

TOP_SUPPORT_TOL = 1e-8


@dataclass(frozen=True)
class FockTruncation:
    """Ladder basis with ``levels`` states for a particle of mass ``mass``.

    The canonical pair only needs two levels; the doubled construction
    requires at least four so that a non-trivial safe subspace exists.
    """

    levels: int
    mass: float = 1.0
    omega_ref: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if int(self.levels) != self.levels or self.levels < 2:
            raise ValidationError("levels must be an integer >= 2")
        if not (self.mass > 0 and self.omega_ref > 0 and self.hbar > 0):
            raise ValidationError("mass, omega_ref and hbar must be positive")

    @property
    def x_scale(self) -> float:
        return math.sqrt(self.hbar / (2 * self.mass * self.omega_ref))

    @property
    def p_scale(self) -> float:
        return math.sqrt(self.mass * self.omega_ref * self.hbar / 2)

    def require_doubled(self):
        if self.levels < 4:
            raise ValidationError("doubled operators need levels >= 4")


def lowering(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1).astype(complex)


def build_canonical_pair(trunc: FockTruncation):
    """Truncated position and momentum matrices.

    Returns
    -------
    x, p : (N, N) complex arrays
        ``x = sqrt(hbar/2 m w)(a + a^dag)``, ``p = i sqrt(m w hbar/2)(a^dag - a)``.
    """
    a = lowering(trunc.levels)
    ad = a.conj().T
    x = trunc.x_scale * (a + ad)
    p = 1j * trunc.p_scale * (ad - a)
    return x, p


def level_projector(n: int, keep: int) -> np.ndarray:
    """Projector onto the lowest ``keep`` levels of an n-level factor."""
    d = np.zeros(n)
    d[:keep] = 1.0
    return np.diag(d).astype(complex)


@dataclass
class DoubledOperators:
    """Operators on the N^2-dimensional space A (system) x B (auxiliary).

    All members are ``scipy.sparse`` CSR matrices; call ``.toarray()`` for
    dense copies.
    """

    X: np.ndarray
    Q: np.ndarray
    K: np.ndarray
    P: np.ndarray
    x: np.ndarray
    p: np.ndarray
    y: np.ndarray
    k: np.ndarray
    safe_projector: np.ndarray
    trunc: FockTruncation

    def subspace_projector(self, keep: int) -> np.ndarray:
        """Projector keeping the lowest ``keep`` levels of both factors."""
        n = self.trunc.levels
        if not 1 <= keep <= n - 1:
            raise ValidationError("keep must lie in [1, levels - 1]")
        pk = sp.csr_matrix(level_projector(n, keep))
        return sp.kron(pk, pk, format="csr")


def build_doubled_operators(trunc: FockTruncation) -> DoubledOperators:
    trunc.require_doubled()
    x1, p1 = (sp.csr_matrix(a) for a in build_canonical_pair(trunc))
    eye = sp.identity(trunc.levels, dtype=complex, format="csr")
    x = sp.kron(x1, eye, format="csr")
    p = sp.kron(p1, eye, format="csr")
    y = sp.kron(eye, x1, format="csr")
    k = sp.kron(eye, p1, format="csr")
    safe1 = sp.csr_matrix(level_projector(trunc.levels, trunc.levels - 1))
    return DoubledOperators(
        X=x + y, Q=0.5 * (x - y), K=0.5 * (p + k), P=p - k,
        x=x, p=p, y=y, k=k, safe_projector=sp.kron(safe1, safe1, format="csr"),
        trunc=trunc,
    )


def commutator(a, b):
    return a @ b - b @ a


def _check_factor_state(rho, n, name):
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (n, n):
        raise ValidationError(f"{name} must be {n}x{n}")
    if abs(np.trace(rho).real - 1) > 1e-10:
        raise ValidationError(f"{name} must have unit trace")
    if np.abs(rho - rho.conj().T).max() > 1e-12:
        raise ValidationError(f"{name} must be Hermitian")
    if rho[n - 1, n - 1].real >= TOP_SUPPORT_TOL:
        raise ValidationError(
            f"{name} has top-level population {rho[n - 1, n - 1].real:.3g}; "
            "increase the truncation"
        )
    return rho


def closeness_product(ops: DoubledOperators, rho_B, rho_A=None) -> float:
    """Return <(X - x)^2> <(P - p)^2> for the product state rho_A x rho_B.

    ``rho_A`` defaults to the ground state; the result does not depend on it.
    """
    n = ops.trunc.levels
    rho_B = _check_factor_state(rho_B, n, "rho_B")
    if rho_A is None:
        rho_A = fock_state(n, 0)
    rho_A = _check_factor_state(rho_A, n, "rho_A")
    rho = sp.kron(sp.csr_matrix(rho_A), sp.csr_matrix(rho_B), format="csr")
    dX = ops.X - ops.x
    dP = ops.P - ops.p
    vx = expectation(rho, dX @ dX)
    vp = expectation(rho, dP @ dP)
    return float(vx * vp)


def expectation(rho, op) -> float:
    """Re Tr(rho op) for dense or sparse arguments."""
    rho = sp.csr_matrix(rho)
    op = sp.csr_matrix(op)
    return float(np.real(rho.multiply(op.T).sum()))


def build_complex_pair(trunc: FockTruncation):
    """Complex combinations Xc = x + i y, Pc = p + i k and their Hamiltonian.

    Returns
    -------
    Xc, Pc, Hc : sparse (N^2, N^2) complex matrices
        ``Hc = Pc^dag Pc / 2m + m w^2 Xc^dag Xc / 2``.
    """
    ops = build_doubled_operators(trunc)
    Xc = (ops.x + 1j * ops.y).tocsr()
    Pc = (ops.p + 1j * ops.k).tocsr()
    m, w = trunc.mass, trunc.omega_ref
    Hc = Pc.conj().T @ Pc / (2 * m) + 0.5 * m * w**2 * (Xc.conj().T @ Xc)
    Hc = (0.5 * (Hc + Hc.conj().T)).tocsr()
    return Xc, Pc, Hc


def fock_state(n: int, level: int = 0) -> np.ndarray:
    rho = np.zeros((n, n), dtype=complex)
    rho[level, level] = 1.0
    return rho


def thermal_state(n: int, nbar: float) -> np.ndarray:
    """Truncated (renormalised) thermal state with mean occupation ``nbar``."""
    if nbar < 0:
        raise ValidationError("nbar must be non-negative")
    if nbar == 0:
        return fock_state(n, 0)
    q = nbar / (1 + nbar)
    w = q ** np.arange(n)
    return np.diag(w / w.sum()).astype(complex)


def squeezed_vacuum(n: int, r: float) -> np.ndarray:
    """Truncated squeezed vacuum exp(r (a^2 - a^dag^2)/2)|0>, renormalised."""
    psi = np.zeros(n, dtype=complex)
    t = math.tanh(r)
    for j in range(0, n, 2):
        h = j // 2
        # sqrt((2h)!) / (2^h h!) in log form
        logc = 0.5 * gammaln(j + 1) - h * math.log(2) - gammaln(h + 1)
        psi[j] = (-t) ** h * math.exp(logc) / math.sqrt(math.cosh(r))
    psi /= np.linalg.norm(psi)
    return np.outer(psi, psi.conj())
