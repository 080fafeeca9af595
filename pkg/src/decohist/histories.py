"""Exact decoherence functional for finite-dimensional closed systems.

Histories are strings of projectors applied at increasing times in the
Heisenberg picture.  The functional

    D(a, b) = Tr( C_a rho C_b^dagger ),   C_a = P_{a_n}(t_n) ... P_{a_1}(t_1)

is assembled densely; it is meant for dimensions up to a few hundred.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ValidationError
from .models import DecoherenceMatrix

HERMITIAN_TOL = 1e-12
PROJECTOR_TOL = 1e-8
FAMILY_TOL = 1e-10
ZERO_DIAGONAL = 1e-14


def _as_square(a, name):
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"{name} must be a square matrix")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} has non-finite entries")
    return a


def check_hermitian(a, name="matrix", tol=HERMITIAN_TOL):
    a = _as_square(a, name)
    scale = max(np.abs(a).max(), 1e-300)
    if np.abs(a - a.conj().T).max() > tol * scale:
        raise ValidationError(f"{name} is not Hermitian")
    return a


def check_projector(p, name="projector", tol=PROJECTOR_TOL):
    p = check_hermitian(p, name, tol=max(tol, HERMITIAN_TOL))
    if np.abs(p @ p - p).max() > tol:
        raise ValidationError(f"{name} is not idempotent (defect > {tol:g})")
    return p


def check_density_matrix(rho, tol=FAMILY_TOL):
    rho = check_hermitian(rho, "rho")
    if abs(np.trace(rho).real - 1.0) > tol:
        raise ValidationError("rho must have unit trace")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise ValidationError("rho must be positive semidefinite")
    return rho


@dataclass
class ProjectorFamily:
    """Exhaustive family of mutually orthogonal projectors used at one time."""

    members: list
    labels: list = None

    def __post_init__(self):
        self.members = [np.asarray(m, dtype=complex) for m in self.members]
        if not self.members:
            raise ValidationError("a projector family needs at least one member")
        if self.labels is None:
            self.labels = [str(i) for i in range(len(self.members))]
        self.labels = [str(lab) for lab in self.labels]
        if len(self.labels) != len(self.members):
            raise ValidationError("one label per projector required")

    @property
    def dim(self) -> int:
        return self.members[0].shape[0]

    def validate(self, tol=FAMILY_TOL):
        d = self.dim
        for lab, p in zip(self.labels, self.members):
            if p.shape != (d, d):
                raise ValidationError("projectors in a family must share a dimension")
            check_projector(p, f"projector {lab}")
        total = sum(self.members)
        if np.abs(total - np.eye(d)).max() > tol:
            raise ValidationError("projector family does not sum to the identity")
        for (i, a), (j, b) in itertools.combinations(enumerate(self.members), 2):
            if np.abs(a @ b).max() > tol:
                raise ValidationError(
                    f"projectors {self.labels[i]} and {self.labels[j]} are not orthogonal"
                )
        return self


def eigenprojector_family(H, tol=1e-9) -> ProjectorFamily:
    """Projectors onto the (possibly degenerate) eigenspaces of Hermitian H."""
    H = check_hermitian(H, "H")
    evals, evecs = np.linalg.eigh(H)
    groups = []
    for k, e in enumerate(evals):
        if groups and abs(e - evals[groups[-1][0]]) <= tol * max(1.0, abs(e)):
            groups[-1].append(k)
        else:
            groups.append([k])
    members, labels = [], []
    for g in groups:
        v = evecs[:, g]
        members.append(v @ v.conj().T)
        labels.append(f"E{len(labels)}")
    return ProjectorFamily(members, labels)


def basis_family(dim: int, blocks=None) -> ProjectorFamily:
    """Family of computational-basis projectors, optionally grouped in blocks."""
    if blocks is None:
        blocks = [[i] for i in range(dim)]
    members = []
    for b in blocks:
        p = np.zeros((dim, dim), dtype=complex)
        p[b, b] = 1.0
        members.append(p)
    return ProjectorFamily(members, [str(i) for i in range(len(blocks))])


def _propagator(H, t, hbar):
    evals, evecs = np.linalg.eigh(H)
    return (evecs * np.exp(-1j * evals * t / hbar)) @ evecs.conj().T


def heisenberg_projector(P, H, t: float, hbar: float = 1.0) -> np.ndarray:
    """Return exp(iHt/hbar) P exp(-iHt/hbar)."""
    H = check_hermitian(H, "H")
    P = check_projector(P, "P")
    if P.shape != H.shape:
        raise ValidationError("P and H must have the same shape")
    U = _propagator(H, t, hbar)
    out = U.conj().T @ P @ U
    return 0.5 * (out + out.conj().T)


def decoherence_functional(H, rho, times, families, hbar: float = 1.0) -> DecoherenceMatrix:
    """Decoherence functional of all projector strings.

    Parameters
    ----------
    H : (d, d) array
        Hermitian Hamiltonian.
    rho : (d, d) array
        Initial density matrix (unit trace, positive semidefinite).
    times : sequence of float
        Strictly increasing projection times, one per family.
    families : sequence of ProjectorFamily
    hbar : float

    Returns
    -------
    DecoherenceMatrix
        Indexed by label strings ``"a1,a2,..."`` with the last time varying
        fastest.
    """
    H = check_hermitian(H, "H")
    rho = check_density_matrix(rho)
    times = [float(t) for t in times]
    if len(times) != len(families) or not times:
        raise ValidationError("need exactly one projector family per time")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValidationError("times must be strictly increasing")
    d = H.shape[0]
    if rho.shape != (d, d):
        raise ValidationError("rho and H dimensions differ")
    for fam in families:
        if fam.dim != d:
            raise ValidationError("projector dimension differs from H")
        fam.validate()

    evals, evecs = np.linalg.eigh(H)

    def heis(p, t):
        u = (evecs * np.exp(-1j * evals * t / hbar)) @ evecs.conj().T
        return u.conj().T @ p @ u

    hp = [[heis(p, t) for p in fam.members] for fam, t in zip(families, times)]
    idx = list(itertools.product(*[range(len(f.members)) for f in families]))
    # chain operators P_{n-1}(t_{n-1}) ... P_1(t_1), built incrementally
    chains = {(): np.eye(d, dtype=complex)}
    for level in range(len(families) - 1):
        nxt = {}
        for prefix, c in chains.items():
            for k, p in enumerate(hp[level]):
                nxt[prefix + (k,)] = p @ c
        chains = nxt
    prefixes = list(chains)
    C = np.stack([chains[s] for s in prefixes])
    right = C.reshape(len(prefixes), -1).conj()
    # the last projectors are orthogonal, so Tr(P_b P_a X) vanishes unless a = b
    n_last = len(hp[-1])
    D = np.zeros((len(idx), len(idx)), dtype=complex)
    iu = np.triu_indices(len(prefixes), 1)
    for k, p in enumerate(hp[-1]):
        left = (p @ C @ rho).reshape(len(prefixes), -1)
        block = left @ right.T
        # enforce exact Hermiticity from the upper triangle
        block[(iu[1], iu[0])] = block[iu].conj()
        block[np.diag_indices(len(prefixes))] = block.diagonal().real
        D[k::n_last, k::n_last] = block
    labels = [",".join(f.labels[k] for f, k in zip(families, s)) for s in idx]
    return DecoherenceMatrix(labels, D, tuple(times), {"hbar": hbar})


def marginalize_last(D: DecoherenceMatrix, sizes) -> DecoherenceMatrix:
    """Sum a decoherence matrix over the last-time index on both sides.

    ``sizes`` lists the family sizes per time (as used to build ``D``).
    """
    sizes = list(sizes)
    if int(np.prod(sizes)) != len(D.history_index):
        raise ValidationError("sizes do not match the decoherence matrix")
    last = sizes[-1]
    n = len(D.history_index) // last
    E = D.entries.reshape(n, last, n, last).sum(axis=(1, 3))
    labels = [lab.rsplit(",", 1)[0] for lab in D.history_index[::last]]
    return DecoherenceMatrix(labels, E, D.times[:-1], dict(D.meta))


@dataclass
class ConsistencyReport:
    """Scalar consistency diagnostics of a decoherence matrix."""

    normalization: float
    epsilon_max: float
    additivity_defect: float
    probabilities: dict
    decoherent: bool
    tol: float
    im_ratio: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "normalization": self.normalization,
            "epsilon_max": self.epsilon_max,
            "additivity_defect": self.additivity_defect,
            "im_ratio": self.im_ratio,
            "decoherent": self.decoherent,
            "tol": self.tol,
            "probabilities": dict(self.probabilities),
        }


def epsilon_max(entries, zero=ZERO_DIAGONAL) -> float:
    """Largest |D_ij| / sqrt(D_ii D_jj) over distinct pairs with D_ii, D_jj >= zero."""
    entries = np.asarray(entries)
    d = np.real(np.diag(entries))
    ok = d >= zero
    if ok.sum() < 2:
        return 0.0
    sub = entries[np.ix_(ok, ok)]
    dd = d[ok]
    ratio = np.abs(sub) / np.sqrt(np.outer(dd, dd))
    np.fill_diagonal(ratio, 0.0)
    return float(ratio.max())


def analyze_decoherence(D: DecoherenceMatrix, tol: float = 1e-2) -> ConsistencyReport:
    """Consistency report: probabilities, epsilon_max and additivity defect.

    ``normalization`` is the sum of the probabilities (the diagonal); the sum
    of all entries, which equals Tr rho for complete families, is kept in
    ``extra["total"]``.

    The additivity defect of a pair (a, b) is
    |p(a or b) - p(a) - p(b)| = 2 |Re D(a, b)|.
    """
    E = D.entries
    diag = np.real(np.diag(E))
    norm = float(diag.sum())
    eps = epsilon_max(E)
    if len(diag) > 1:
        off = np.abs(E.real).copy()
        np.fill_diagonal(off, 0.0)
        defect = float(2.0 * off.max())
    else:
        defect = 0.0
    probs = {lab: float(p) for lab, p in zip(D.history_index, diag)}
    return ConsistencyReport(norm, eps, defect, probs, bool(eps <= tol), tol, D.im_ratio(),
                             {"total": float(np.real(E.sum()))})
