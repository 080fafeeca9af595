"""Phase-space grid container and serialisation.

Grids are cell-based: ``x_i = x_min + i dx`` with ``dx = (x_max - x_min)/N_x``
(the upper edge is excluded), which matches the periodic FFT solvers.

Binary layout (all little-endian)::

    offset  type        field
    0       8 bytes     magic b"WIGNERF1"
    8       uint32      N_x
    12      uint32      N_p
    16      float64 x4  x_min, x_max, p_min, p_max
    48      float64     values, N_x * N_p entries, row-major (x slowest)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..exceptions import ValidationError
from ..models import GaussianState

MAGIC = b"WIGNERF1"
_HEADER = struct.Struct("<8sII4d")


@dataclass
class WignerField:
    """Real phase-space function on a rectangular cell grid."""

    values: np.ndarray
    x_min: float
    x_max: float
    p_min: float
    p_max: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or min(self.values.shape) < 2:
            raise ValidationError("field values must be a 2-D array")
        if not (self.x_max > self.x_min and self.p_max > self.p_min):
            raise ValidationError("grid extents must be increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("field values must be finite")

    @property
    def n_x(self) -> int:
        return self.values.shape[0]

    @property
    def n_p(self) -> int:
        return self.values.shape[1]

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_x

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / self.n_p

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_x)

    @property
    def p(self) -> np.ndarray:
        return self.p_min + self.dp * np.arange(self.n_p)

    def mesh(self):
        return np.meshgrid(self.x, self.p, indexing="ij")

    @property
    def extents(self) -> tuple:
        return (self.x_min, self.x_max, self.p_min, self.p_max)

    def same_grid(self, other: "WignerField") -> bool:
        return self.values.shape == other.values.shape and np.allclose(
            self.extents, other.extents, rtol=0, atol=1e-12
        )

    def with_values(self, values) -> "WignerField":
        return WignerField(values, *self.extents)

    def mass(self) -> float:
        return float(self.values.sum() * self.dx * self.dp)

    def marginal_x(self) -> np.ndarray:
        return self.values.sum(axis=1) * self.dp

    def marginal_p(self) -> np.ndarray:
        return self.values.sum(axis=0) * self.dx

    def moments(self):
        """Mean (2,) and covariance (2, 2) of the normalised field."""
        X, P = self.mesh()
        w = self.values * self.dx * self.dp
        norm = w.sum()
        mx, mp = (w * X).sum() / norm, (w * P).sum() / norm
        sxx = (w * (X - mx) ** 2).sum() / norm
        spp = (w * (P - mp) ** 2).sum() / norm
        sxp = (w * (X - mx) * (P - mp)).sum() / norm
        return np.array([mx, mp]), np.array([[sxx, sxp], [sxp, spp]])

    def boundary_mass(self, edge: int = 4) -> float:
        """Integral of |W| over the outermost ``edge`` cells on every side."""
        a = np.abs(self.values)
        inner = a[edge:-edge, edge:-edge].sum() if min(a.shape) > 2 * edge else 0.0
        return float((a.sum() - inner) * self.dx * self.dp)

    # construction helpers

    @classmethod
    def from_function(cls, func, n_x, n_p, extents) -> "WignerField":
        x_min, x_max, p_min, p_max = (float(e) for e in extents)
        x = x_min + (x_max - x_min) / n_x * np.arange(n_x)
        p = p_min + (p_max - p_min) / n_p * np.arange(n_p)
        X, P = np.meshgrid(x, p, indexing="ij")
        return cls(func(X, P), x_min, x_max, p_min, p_max)

    @classmethod
    def zeros_like(cls, other: "WignerField") -> "WignerField":
        return cls(np.zeros_like(other.values), *other.extents)

    # serialisation

    def to_csv(self, path):
        X, P = self.mesh()
        data = np.column_stack([X.ravel(), P.ravel(), self.values.ravel()])
        np.savetxt(path, data, delimiter=",", header="x,p,W", comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path) -> "WignerField":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        xs = np.unique(data[:, 0])
        ps = np.unique(data[:, 1])
        if len(xs) * len(ps) != len(data):
            raise ValidationError("CSV does not describe a full rectangular grid")
        dx = (xs[-1] - xs[0]) / (len(xs) - 1)
        dp = (ps[-1] - ps[0]) / (len(ps) - 1)
        values = data[:, 2].reshape(len(xs), len(ps))
        return cls(values, xs[0], xs[0] + dx * len(xs), ps[0], ps[0] + dp * len(ps))

    def to_bytes(self) -> bytes:
        head = _HEADER.pack(MAGIC, self.n_x, self.n_p, *self.extents)
        return head + np.ascontiguousarray(self.values, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "WignerField":
        if len(blob) < _HEADER.size:
            raise ValidationError("binary field is truncated")
        magic, nx, npp, x0, x1, p0, p1 = _HEADER.unpack_from(blob)
        if magic != MAGIC:
            raise ValidationError("not a binary Wigner field (bad magic)")
        body = blob[_HEADER.size:]
        if len(body) != 8 * nx * npp:
            raise ValidationError("binary field size does not match its header")
        values = np.frombuffer(body, dtype="<f8").reshape(nx, npp).astype(float)
        return cls(values, x0, x1, p0, p1)

    def to_binary(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def from_binary(cls, path) -> "WignerField":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def gaussian_field(state: GaussianState, n_x: int, n_p: int, extents) -> WignerField:
    """Normalised Gaussian density with the given mean and covariance."""
    mu, S = state.mu, state.sigma
    Si = np.linalg.inv(S)
    norm = 1.0 / (2 * np.pi * np.sqrt(np.linalg.det(S)))

    def f(X, P):
        dx, dp = X - mu[0], P - mu[1]
        q = Si[0, 0] * dx**2 + 2 * Si[0, 1] * dx * dp + Si[1, 1] * dp**2
        return norm * np.exp(-0.5 * q)

    return WignerField.from_function(f, n_x, n_p, extents)


def cat_state_field(a: float, sigma: float, hbar: float, n_x: int, n_p: int,
                    extents, p0: float = 0.0) -> WignerField:
    """Wigner function of the even superposition of packets at x = +a and -a.

    Each packet is a minimum-uncertainty Gaussian with position width
    ``sigma`` and mean momentum ``p0``.
    """
    s2 = sigma**2
    overlap = np.exp(-(a**2) / (2 * s2))
    norm = 1.0 / (2 * (1 + overlap) * np.pi * hbar)

    def f(X, P):
        gp = np.exp(-2 * s2 * (P - p0) ** 2 / hbar**2)
        left = np.exp(-((X + a) ** 2) / (2 * s2))
        right = np.exp(-((X - a) ** 2) / (2 * s2))
        fringe = 2 * np.exp(-(X**2) / (2 * s2)) * np.cos(2 * a * (P - p0) / hbar)
        return norm * gp * (left + right + fringe)

    return WignerField.from_function(f, n_x, n_p, extents)
