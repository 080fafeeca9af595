"""Independent reference implementations used by the tests.

Nothing here imports the package's numerical kernels; each oracle uses a
different algorithm from the code under test.
"""

import itertools

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm


def naive_dfun(H, rho, times, families, hbar=1.0):
    """Decoherence functional by explicit products of Heisenberg projectors.

    Each entry multiplies the 2n + 1 matrices directly; the propagator is a
    dense matrix exponential.
    """
    heis = []
    for t, fam in zip(times, families):
        U = expm(-1j * np.asarray(H) * t / hbar)
        heis.append([U.conj().T @ P @ U for P in fam])
    strings = list(itertools.product(*[range(len(f)) for f in families]))
    n = len(strings)
    D = np.zeros((n, n), dtype=complex)
    for i, a in enumerate(strings):
        for j, b in enumerate(strings):
            left = np.eye(len(rho), dtype=complex)
            for k in range(len(a)):
                left = heis[k][a[k]] @ left
            right = np.eye(len(rho), dtype=complex)
            for k in range(len(b)):
                right = right @ heis[k][b[k]]
            D[i, j] = np.trace(left @ rho @ right)
    return D


def gaussian_moments(A, Qc, mean0, cov0, t):
    """Mean and covariance of dz = A z dt + noise by integrating the moment ODE."""
    n = len(mean0)

    def rhs(_, y):
        m = y[:n]
        S = y[n:].reshape(n, n)
        return np.r_[A @ m, (A @ S + S @ A.T + Qc).ravel()]

    y0 = np.r_[np.asarray(mean0, float), np.asarray(cov0, float).ravel()]
    sol = solve_ivp(rhs, (0.0, t), y0, method="DOP853", rtol=1e-12, atol=1e-14)
    y = sol.y[:, -1]
    return y[:n], y[n:].reshape(n, n)


def flow_backward(f, points, t):
    """Integrate dz/dt = -f(z) from each column of ``points`` over time t."""
    pts = np.asarray(points, float)
    d, k = pts.shape

    def rhs(_, y):
        return -f(y.reshape(d, k)).ravel()

    sol = solve_ivp(rhs, (0.0, t), pts.ravel(), method="DOP853", rtol=1e-12, atol=1e-12)
    return sol.y[:, -1].reshape(d, k)


def flow_forward(f, point, t):
    sol = solve_ivp(lambda _, y: f(y), (0.0, t), np.asarray(point, float), method="DOP853",
                    rtol=1e-13, atol=1e-13)
    return sol.y[:, -1]


def gaussian_density(x, p, mean, cov):
    S = np.asarray(cov)
    Si = np.linalg.inv(S)
    dx, dp = x - mean[0], p - mean[1]
    q = Si[0, 0] * dx**2 + 2 * Si[0, 1] * dx * dp + Si[1, 1] * dp**2
    return np.exp(-0.5 * q) / (2 * np.pi * np.sqrt(np.linalg.det(S)))


def gate_overlap_1d(mean, var, a, b, delta):
    """int N(x; mean, var) w(x - a) w(x - b) dx by dense quadrature."""
    xs = np.linspace(mean - 20 * np.sqrt(var) - 10 * delta, mean + 20 * np.sqrt(var) + 10 * delta,
                     400001)
    rho = np.exp(-((xs - mean) ** 2) / (2 * var)) / np.sqrt(2 * np.pi * var)
    w = np.exp(-((xs - a) ** 2) / (2 * delta**2) - (xs - b) ** 2 / (2 * delta**2))
    return np.trapezoid(rho * w, xs)
