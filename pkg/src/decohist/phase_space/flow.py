"""Deterministic first-order flows dB/dt = f(B) and their history weights.

A flow is given by component expressions in the configuration variables
(parsed with sympy) or by a vectorised callable.  Because the flow is
deterministic, histories of B are sets of initial conditions and their
probabilities add; the decoherence matrix built from a pushed-forward
ensemble is diagonal.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import sympy

from ..exceptions import ValidationError
from ..models import DecoherenceMatrix, ModelParams, history_label


@dataclass
class VectorFieldSpec:
    """Component functions f_k of a d-dimensional first-order flow.

    Parameters
    ----------
    components : sequence of str or callable
        Either sympy-parsable expressions in ``labels`` or a single callable
        ``f(B) -> dB/dt`` acting on arrays of shape (d, ...).
    labels : sequence of str
        Variable names, one per dimension.
    """

    components: tuple
    labels: tuple

    def __post_init__(self):
        self.labels = tuple(self.labels)
        if callable(self.components):
            self.components = self.components
        else:
            self.components = tuple(self.components)
            if len(self.components) != len(self.labels):
                raise ValidationError("one component per variable required")

    @property
    def dimension(self) -> int:
        return len(self.labels)

    @classmethod
    def hamiltonian(cls, model: ModelParams, drag: float = 0.0) -> "VectorFieldSpec":
        """Canonical flow (p/m, -V'(x) - 2 gamma_L p) for a model."""
        m = model.mass
        k2, k4 = model.k2, model.k4
        fp = f"-({2 * k2!r})*x - ({4 * k4!r})*x**3 - ({2 * drag!r})*p"
        return cls((f"p/{m!r}", fp), ("x", "p"))


@dataclass
class GeneralFlow:
    """Compiled flow with a vectorised right-hand side."""

    spec: VectorFieldSpec
    rhs: object

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    def __call__(self, B):
        return self.rhs(B)

    def integrate(self, B0, t: float, steps: int) -> np.ndarray:
        """Fourth-order Runge-Kutta characteristics; B0 has shape (d, ...)."""
        B = np.array(B0, dtype=float)
        if B.shape[0] != self.dimension:
            raise ValidationError("leading axis of B0 must match the flow dimension")
        if steps < 1:
            raise ValidationError("steps must be positive")
        h = t / steps
        f = self.rhs
        for _ in range(steps):
            k1 = f(B)
            k2 = f(B + 0.5 * h * k1)
            k3 = f(B + 0.5 * h * k2)
            k4 = f(B + h * k3)
            B = B + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        return B

    def trajectory(self, B0, times, steps_per_unit: int = 1000) -> np.ndarray:
        """States at increasing ``times`` (shape (len(times), d, ...))."""
        out = []
        B = np.array(B0, dtype=float)
        t_prev = 0.0
        for t in times:
            dt = t - t_prev
            if dt < 0:
                raise ValidationError("times must be non-decreasing")
            if dt > 0:
                B = self.integrate(B, dt, max(1, int(np.ceil(dt * steps_per_unit))))
            out.append(B.copy())
            t_prev = t
        return np.array(out)

    def pushforward_dfun(self, samples, times, centers, delta, steps_per_unit=1000,
                         window="sharp") -> DecoherenceMatrix:
        """History weights of an ensemble of initial points under the flow.

        Parameters
        ----------
        samples : (d, K) array
            Initial points, equally weighted.
        times : increasing sequence of float
        centers : sequence of sequences
            Gate centres in the first coordinate, one grid per time.
        delta : float
            Gate width.
        """
        samples = np.asarray(samples, dtype=float)
        traj = self.trajectory(samples, times, steps_per_unit)
        K = samples.shape[1]
        strings = list(itertools.product(*centers))
        probs = np.zeros(len(strings))
        for i, s in enumerate(strings):
            w = np.ones(K)
            for k, c in enumerate(s):
                d = traj[k, 0] - c
                if window == "sharp":
                    w = w * ((d >= -delta / 2) & (d < delta / 2))
                else:
                    w = w * np.exp(-(d**2) / delta**2)
            probs[i] = w.mean()
        # classical weights are additive: no interference terms
        D = np.diag(probs).astype(complex)
        return DecoherenceMatrix([history_label(s) for s in strings], D, tuple(times),
                                 {"samples": K})


def build_general_dqt_flow(field: VectorFieldSpec) -> GeneralFlow:
    """Compile a flow specification into a vectorised right-hand side."""
    d = field.dimension
    if d > 3:
        raise ValidationError("flows are limited to three dimensions")
    if callable(field.components):
        return GeneralFlow(field, field.components)
    syms = sympy.symbols(field.labels)
    if d == 1:
        syms = (syms,) if not isinstance(syms, tuple) else syms
    local = {str(s): s for s in syms}
    exprs = []
    for comp in field.components:
        try:
            e = sympy.sympify(comp, locals=local)
        except (sympy.SympifyError, SyntaxError, TypeError) as exc:
            raise ValidationError(f"cannot parse component {comp!r}: {exc}") from exc
        extra = e.free_symbols - set(syms)
        if extra:
            raise ValidationError(
                f"component {comp!r} uses unknown symbols {sorted(map(str, extra))}"
            )
        exprs.append(e)
    fns = [sympy.lambdify(syms, e, "numpy") for e in exprs]

    def rhs(B):
        args = [B[i] for i in range(d)]
        return np.stack([np.broadcast_to(f(*args), B[0].shape).astype(float) for f in fns])

    return GeneralFlow(field, rhs)
