"""Monte Carlo Langevin trajectories and history probabilities.

Trajectories solve

    m X'' + 2 m gamma X' + V'(X) = eta,   <eta(t) eta(s)> = 4 m gamma kT delta(t - s),

from initial points drawn from a Gaussian Wigner density (ordinary quantum
theory) or from its Husimi smearing (doubled theory).  History probabilities
are ensemble averages of gate indicators, or of squared Gaussian windows.

Random numbers come from ``numpy.random.SeedSequence`` streams keyed by
(block, stream) with a fixed block of trajectories, so results do not depend
on the number of workers and two runs that share a seed share their initial
and noise draws (common random numbers).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .exceptions import StepSizeError, ValidationError
from .models import GaussianState, HistorySpec, ModelParams, history_label

BLOCK_SIZE = 8192
STREAM_INITIAL, STREAM_SMEAR, STREAM_DYNAMICS = 0, 1, 2
KINDS = ("wigner", "husimi")
METHODS = ("auto", "exact", "baoab", "em")


def _rng(seed: int, block: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block, stream)))


def _blocks(K: int, block_size: int):
    return [(b, s, min(s + block_size, K)) for b, s in enumerate(range(0, K, block_size))]


@dataclass
class TrajectoryEnsemble:
    """Initial phase-space points of K trajectories.

    ``block_seeds`` lists the spawn keys of the per-block random streams;
    every trajectory belongs to exactly one block.
    """

    x0: np.ndarray
    p0: np.ndarray
    seed: int
    kind: str
    block_size: int = BLOCK_SIZE
    weights: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        self.p0 = np.asarray(self.p0, dtype=float)
        if self.x0.shape != self.p0.shape or self.x0.ndim != 1 or self.x0.size < 1:
            raise ValidationError("ensemble needs K >= 1 matching x0 and p0")
        if self.weights is None:
            self.weights = np.ones_like(self.x0)

    @property
    def count(self) -> int:
        return self.x0.size

    @property
    def block_seeds(self) -> list:
        return [(self.seed, b) for b, _, _ in _blocks(self.count, self.block_size)]


def sample_initial(state: GaussianState, kind: str, K: int, seed: int,
                   sigma_x: float | None = None, sigma_p: float | None = None,
                   hbar: float | None = None, block_size: int = BLOCK_SIZE
                   ) -> TrajectoryEnsemble:
    """Draw K initial points from a Gaussian Wigner density or its Husimi smearing.

    Parameters
    ----------
    state : GaussianState
        Wigner mean and covariance of the system state.
    kind : {"wigner", "husimi"}
    K : int
    seed : int
    sigma_x, sigma_p : float
        Husimi smearing widths (required for ``kind="husimi"``).
    hbar : float, optional
        When given, the uncertainty bounds of the state and of the widths are
        enforced.
    """
    if kind not in KINDS:
        raise ValidationError(f"kind must be one of {KINDS} (signed sampling is unsupported)")
    if int(K) != K or K < 1:
        raise ValidationError("K must be a positive integer")
    if int(seed) != seed or seed < 0:
        raise ValidationError("seed must be a non-negative integer")
    if hbar is not None:
        state.check_uncertainty(hbar)
    if kind == "husimi":
        if sigma_x is None or sigma_p is None or sigma_x <= 0 or sigma_p <= 0:
            raise ValidationError("husimi sampling needs positive sigma_x and sigma_p")
        if hbar is not None and sigma_x * sigma_p < hbar / 2 - 1e-12:
            raise ValidationError("husimi widths violate sigma_x sigma_p >= hbar/2")
    L = np.linalg.cholesky(state.sigma)
    mu = state.mu
    x0 = np.empty(K)
    p0 = np.empty(K)
    for b, s, e in _blocks(K, block_size):
        z = _rng(seed, b, STREAM_INITIAL).standard_normal((2, e - s))
        pts = mu[:, None] + L @ z
        if kind == "husimi":
            g = _rng(seed, b, STREAM_SMEAR).standard_normal((2, e - s))
            pts = pts + np.array([[sigma_x], [sigma_p]]) * g
        x0[s:e], p0[s:e] = pts
    meta = {"state": {"mean": list(state.mean), "cov": [list(r) for r in state.cov]}}
    if kind == "husimi":
        meta.update(sigma_x=sigma_x, sigma_p=sigma_p)
    return TrajectoryEnsemble(x0, p0, int(seed), kind, block_size, meta=meta)


@dataclass
class TrajectorySet:
    """Positions and momenta recorded at ``times``; arrays have shape (T, K)."""

    times: np.ndarray
    x: np.ndarray
    p: np.ndarray
    noise: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return self.x.shape[1]

    def at(self, t: float, tol: float = 1e-9):
        """Index of the recorded time closest to t (must be within tol)."""
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > tol * max(1.0, abs(t)):
            raise ValidationError(f"time {t} was not recorded")
        return k

    def to_csv(self, path, max_trajectories: int | None = None):
        """Rows (trajectory id, t, X, P), trajectory-major."""
        K = self.count if max_trajectories is None else min(max_trajectories, self.count)
        T = len(self.times)
        ids = np.repeat(np.arange(K), T)
        t = np.tile(self.times, K)
        data = np.column_stack([ids, t, self.x[:, :K].T.ravel(), self.p[:, :K].T.ravel()])
        np.savetxt(path, data, delimiter=",", header="trajectory,t,X,P", comments="",
                   fmt=["%d", "%.17g", "%.17g", "%.17g"])


def max_step(model: ModelParams, gamma: float) -> float:
    """Largest allowed time step: min(1/(20 gamma), period/50)."""
    bound = math.inf
    if gamma > 0:
        bound = 1.0 / (20.0 * gamma)
    w = model.frequency
    if w > 0:
        bound = min(bound, 2 * math.pi / w / 50.0)
    return bound


def exact_step_matrices(model: ModelParams, gamma: float, kT: float, dt: float):
    """Propagator and noise covariance of one exact step of the linear SDE."""
    A = model.linear_generator(gamma)
    Qc = np.array([[0.0, 0.0], [0.0, 4 * model.mass * gamma * kT]])
    Phi = expm(A * dt)
    Z = expm(np.block([[-A, Qc], [np.zeros((2, 2)), A.T]]) * dt)
    Qd = Z[2:, 2:].T @ Z[:2, 2:]
    return Phi, 0.5 * (Qd + Qd.T)


def _noise_factor(Qd):
    """Lower factor with the momentum noise driven by the first normal."""
    # order (p, x) so that z0 alone drives p
    S = Qd[::-1, ::-1]
    if S[0, 0] <= 0:
        return np.zeros((2, 2))
    l00 = math.sqrt(S[0, 0])
    l10 = S[1, 0] / l00
    l11 = math.sqrt(max(S[1, 1] - l10**2, 0.0))
    # rows are (x, p) noise, columns the normals (z0, z1)
    return np.array([[l10, l11], [l00, 0.0]])


def simulate_langevin(ens: TrajectoryEnsemble, model: ModelParams, gamma: float, kT: float,
                      tau: float, dt: float, method: str = "auto", record_times=None,
                      record_noise: bool = False, workers: int = 1) -> TrajectorySet:
    """Integrate the Langevin equation for every trajectory of ``ens``.

    Parameters
    ----------
    method : {"auto", "exact", "baoab", "em"}
        ``exact`` samples the exact Gaussian transition of linear models;
        ``baoab`` is the splitting with an exact Ornstein-Uhlenbeck kick;
        ``em`` is semi-implicit Euler-Maruyama.  ``auto`` picks ``exact`` for
        linear models and ``baoab`` otherwise.
    record_times : sequence of float, optional
        Times to record (snapped to the step grid); all steps by default.
    record_noise : bool
        Also return the momentum noise force eta_n at every step, shape
        (steps, K).
    """
    if method not in METHODS:
        raise ValidationError(f"method must be one of {METHODS}")
    if gamma < 0 or kT < 0:
        raise ValidationError("gamma and kT must be non-negative")
    if not (tau > 0 and dt > 0):
        raise ValidationError("tau and dt must be positive")
    bound = max_step(model, gamma)
    if dt > bound * (1 + 1e-12):
        raise StepSizeError(f"dt = {dt:.6g} exceeds the stability bound {bound:.6g}")
    steps = int(round(tau / dt))
    if abs(steps * dt - tau) > 1e-9 * tau:
        raise ValidationError("tau must be an integer multiple of dt")
    if method == "auto":
        method = "exact" if model.is_linear else "baoab"
    if method == "exact" and not model.is_linear:
        raise ValidationError("the exact method needs a free or harmonic model")
    if record_times is None:
        rec_idx = np.arange(steps + 1)
    else:
        rec_idx = np.array([int(round(t / dt)) for t in np.atleast_1d(record_times)])
        if np.any(np.abs(rec_idx * dt - np.atleast_1d(record_times)) > 1e-9 * max(tau, 1)):
            raise ValidationError("record times must lie on the step grid")
        if np.any(rec_idx < 0) or np.any(rec_idx > steps):
            raise ValidationError("record times must lie in [0, tau]")
    K = ens.count
    T = len(rec_idx)
    X = np.empty((T, K))
    P = np.empty((T, K))
    noise = np.empty((steps, K)) if record_noise else None
    m = model.mass
    eta_scale = math.sqrt(4 * m * gamma * kT / dt)
    if method == "exact":
        Phi, Qd = exact_step_matrices(model, gamma, kT, dt)
        Lq = _noise_factor(Qd)
    else:
        c1 = math.exp(-2 * gamma * dt)
        c2 = math.sqrt(m * kT * (1 - c1**2))
        em_scale = math.sqrt(4 * m * gamma * kT * dt)
    stochastic = gamma * kT > 0
    slot = {int(i): [k for k, j in enumerate(rec_idx) if j == i] for i in set(rec_idx.tolist())}

    def run_block(args):
        b, s, e = args
        n = e - s
        rng = _rng(ens.seed, b, STREAM_DYNAMICS)
        x = ens.x0[s:e].copy()
        p = ens.p0[s:e].copy()

        def record(i):
            for k in slot.get(i, ()):
                X[k, s:e] = x
                P[k, s:e] = p

        record(0)
        for i in range(1, steps + 1):
            z = rng.standard_normal((2, n)) if stochastic else np.zeros((2, n))
            if noise is not None:
                noise[i - 1, s:e] = eta_scale * z[0]
            if method == "exact":
                xn = Phi[0, 0] * x + Phi[0, 1] * p + Lq[0, 0] * z[0] + Lq[0, 1] * z[1]
                p = Phi[1, 0] * x + Phi[1, 1] * p + Lq[1, 0] * z[0]
                x = xn
            elif method == "baoab":
                p = p - 0.5 * dt * model.derivative(x, 1)
                x = x + 0.5 * dt * p / m
                p = c1 * p + c2 * z[0]
                x = x + 0.5 * dt * p / m
                p = p - 0.5 * dt * model.derivative(x, 1)
            else:
                p = p + dt * (-model.derivative(x, 1) - 2 * gamma * p) + em_scale * z[0]
                x = x + dt * p / m
            record(i)

    blocks = _blocks(K, ens.block_size)
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_block, blocks))
    else:
        for blk in blocks:
            run_block(blk)
    meta = {"method": method, "dt": dt, "tau": tau, "gamma": gamma, "kT": kT,
            "seed": ens.seed, "kind": ens.kind, "K": K}
    return TrajectorySet(rec_idx * dt, X, P, noise, meta)


@dataclass
class HistoryProbabilities:
    """Monte Carlo history probabilities with standard errors."""

    labels: list
    estimates: np.ndarray
    stderr: np.ndarray
    count: int
    meta: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        return float(np.sum(self.estimates))

    @property
    def remainder(self) -> float:
        """Probability of leaving every gate at some time."""
        return 1.0 - self.total

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "estimates": [float(v) for v in self.estimates],
            "stderr": [float(v) for v in self.stderr],
            "K": int(self.count),
            "meta": self.meta,
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def history_probabilities_mc(trajs: TrajectorySet, hist: HistorySpec) -> HistoryProbabilities:
    """Fraction of trajectories passing through each gate string.

    Sharp windows use indicators; Gaussian windows use the squared amplitude
    window exp(-(x - c)^2 / Delta^2) as the probability weight.
    """
    K = trajs.count
    if K < 1:
        raise ValidationError("empty ensemble")
    tmax = float(trajs.times.max())
    if any(t > tmax + 1e-9 for t in hist.times):
        raise ValidationError("projection times exceed the simulated interval")
    per_time = []
    for t, grid in zip(hist.times, hist.centers):
        x = trajs.x[trajs.at(t)]
        per_time.append(np.array([hist.window_weight(x, c) ** 2 for c in grid]))
    strings = hist.strings()
    idx = list(np.ndindex(*[len(g) for g in hist.centers]))
    est = np.empty(len(strings))
    err = np.empty(len(strings))
    for i, ii in enumerate(idx):
        w = per_time[0][ii[0]]
        for k in range(1, len(ii)):
            w = w * per_time[k][ii[k]]
        est[i] = w.mean()
        err[i] = w.std(ddof=1) / math.sqrt(K) if K > 1 else 0.0
    meta = dict(trajs.meta)
    meta.update(times=list(hist.times), delta=hist.delta, window=hist.window)
    return HistoryProbabilities([history_label(s) for s in strings], est, err, K, meta)


def total_variation(a: HistoryProbabilities, b: HistoryProbabilities) -> float:
    """Total-variation distance, counting the escape outcome as one more history."""
    if list(a.labels) != list(b.labels):
        raise ValidationError("probability sets have different histories")
    d = np.abs(np.asarray(a.estimates) - np.asarray(b.estimates)).sum()
    d += abs(a.remainder - b.remainder)
    return float(0.5 * d)


def combined_z_scores(a: HistoryProbabilities, b: HistoryProbabilities) -> np.ndarray:
    """|p_a - p_b| / sqrt(se_a^2 + se_b^2) per history (0 where both errors vanish)."""
    diff = np.abs(np.asarray(a.estimates) - np.asarray(b.estimates))
    se = np.hypot(a.stderr, b.stderr)
    out = np.zeros_like(diff)
    nz = se > 0
    out[nz] = diff[nz] / se[nz]
    out[~nz & (diff > 0)] = np.inf
    return out
