"""Convex recovery solvers.

Both programs -- norm minimization over a residual ball, and trace
minimization over the PSD cone with affine data constraints -- are solved
by Douglas-Rachford splitting between the regularizer's prox and an exact
projection onto the data-consistency set.  The ball projection reduces to
a 1-D root-find on the Lagrange multiplier in the operator's SVD basis;
the affine (eta = 0) projection is the pseudo-inverse correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .measure import MeasurementOperator, OperatorKind
from .reg import Regularizer, TracePSD


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 20_000
    tol_primal: float = 1e-8
    tol_dual: float = 1e-8
    penalty: float = 1.0
    seed: int = 0
    record_history: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.tol_primal <= 0 or self.tol_dual <= 0 or self.penalty <= 0:
            raise ValueError("tolerances and penalty must be positive")


@dataclass(frozen=True)
class RecoveryResult:
    estimate: np.ndarray
    objective: float
    residual_norm: float
    iterations: int
    converged: bool
    infeasible: bool = False
    history: np.ndarray | None = field(default=None, compare=False)


class _BallProjector:
    """Exact Euclidean projection onto {x : ||A x - y|| <= eta}."""

    def __init__(self, a: np.ndarray, y: np.ndarray, eta: float):
        self.a, self.y, self.eta = a, y, eta
        u, s, vt = np.linalg.svd(a, full_matrices=False)
        keep = s > s[0] * 1e-13 if s.size else s > 0
        self.u, self.s, self.vt = u[:, keep], s[keep], vt[keep]
        self.y_range = self.u.T @ y          # coords of y in range(A)
        y_perp = y - self.u @ self.y_range
        self.y_perp_sq = float(np.dot(y_perp, y_perp))
        ynorm = float(np.linalg.norm(y))
        self.infeasible = math.sqrt(self.y_perp_sq) > max(eta, 1e-10 * max(1.0, ynorm))

    def __call__(self, p: np.ndarray) -> np.ndarray:
        r = self.a @ p - self.y
        rnorm = np.linalg.norm(r)
        if rnorm <= self.eta:
            return p
        c = self.s * (self.vt @ p) - self.y_range  # range-space residual coords
        if self.eta == 0.0:
            return p - self.vt.T @ ((self.vt @ p) - self.y_range / self.s)

        def excess(lam: float) -> float:
            return float(np.sum((c / (1.0 + lam * self.s ** 2)) ** 2)
                         + self.y_perp_sq - self.eta ** 2)

        hi = 1.0
        while excess(hi) > 0 and hi < 1e18:
            hi *= 4.0
        if excess(hi) > 0:
            lam = hi  # empty constraint set; best-effort shrink, flagged upstream
        else:
            lam = brentq(excess, 0.0, hi, xtol=1e-14, rtol=1e-14)
        shrink = lam * self.s / (1.0 + lam * self.s ** 2)
        return p - self.vt.T @ (shrink * c)


def _lifted_design(op: MeasurementOperator) -> np.ndarray:
    """m x d^2 matrix whose rows are vec(psi_i psi_i^t)."""
    return np.einsum("id,ie->ide", op.vectors, op.vectors).reshape(op.m, -1)


def _douglas_rachford(prox_f, proj_c, n: int, scale: float,
                      opts: SolverOptions, feas_fn):
    """DR iteration on f + indicator(C); returns (x_feas, v_prox, iters, conv).

    ``feas_fn(v)`` measures the constraint violation of the prox iterate,
    used with the primal residual ||v - x|| for stopping.
    """
    w = np.zeros(n)
    t = opts.penalty
    x = v = w
    converged = False
    it = 0
    history = [] if opts.record_history else None
    for it in range(1, opts.max_iters + 1):
        x = proj_c(w)
        v = prox_f(2.0 * x - w, t)
        step = v - x
        w = w + step
        if history is not None:
            # diagnostic envelope: best constraint violation achieved so
            # far, which is nonincreasing by construction (the raw
            # per-iteration violation oscillates under this splitting)
            cur = feas_fn(v)
            history.append(cur if not history else min(history[-1], cur))
        if it % 10 == 0 or it == opts.max_iters:
            primal = np.linalg.norm(step)
            if primal <= opts.tol_primal * scale and feas_fn(v) <= opts.tol_dual * scale:
                converged = True
                break
    hist = None if history is None else np.asarray(history)
    return x, v, it, converged, hist


def recover_constrained(f: Regularizer, op: MeasurementOperator,
                        y: np.ndarray, eta: float,
                        opts: SolverOptions | None = None) -> RecoveryResult:
    """Minimize f(x) subject to ||Phi x - y|| <= eta."""
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    opts = opts or SolverOptions()
    a = op.rows
    if op.kind is not OperatorKind.DENSE:
        raise ValueError("constrained recovery needs a dense operator; "
                         "use phase_retrieval_sdp for lifted ensembles")
    y = np.asarray(y, dtype=float)
    proj = _BallProjector(a, y, eta)
    shape = op.signal_shape
    scale = max(1.0, float(np.linalg.norm(y)))

    def prox_flat(z, t):
        return f.prox(z.reshape(shape), t).ravel()

    def feas(vflat):
        return max(0.0, float(np.linalg.norm(a @ vflat - y)) - eta)

    x, v, iters, converged, hist = _douglas_rachford(
        prox_flat, proj, a.shape[1], scale, opts, feas)
    if proj.infeasible:
        converged = False
    estimate = x.reshape(shape)  # projection output: feasible by construction
    residual = float(np.linalg.norm(a @ x - y))
    return RecoveryResult(estimate, f.value(estimate), residual, iters,
                          converged, infeasible=proj.infeasible, history=hist)


def phase_retrieval_sdp(op: MeasurementOperator, y: np.ndarray,
                        opts: SolverOptions | None = None) -> RecoveryResult:
    """Minimize trace(X) over PSD X with trace(X Psi_i) = y_i.

    The estimate returned is the PSD prox iterate; its per-measurement
    violation max_i |trace(X Psi_i) - y_i| is reported as the residual.
    """
    if op.kind is not OperatorKind.LIFTED:
        raise ValueError("phase retrieval needs a lifted rank-one operator")
    y = np.asarray(y, dtype=float)
    if y.shape != (op.m,):
        raise ValueError("measurement vector length mismatch")
    if np.any(y < -1e-10):
        raise ValueError("phase retrieval measurements are magnitudes (y >= 0)")
    opts = opts or SolverOptions()
    d = op.signal_shape[0]
    a = _lifted_design(op)
    proj = _BallProjector(a, y, 0.0)
    reg = TracePSD(d=d)
    scale = max(1.0, float(np.max(np.abs(y))))

    def prox_flat(z, t):
        return reg.prox(z.reshape(d, d), t).ravel()

    def feas(vflat):
        return float(np.max(np.abs(a @ vflat - y))) if op.m else 0.0

    x, v, iters, converged, hist = _douglas_rachford(
        prox_flat, proj, d * d, scale, opts, feas)
    if proj.infeasible:
        converged = False
    estimate = v.reshape(d, d)   # prox output: PSD by construction
    estimate = 0.5 * (estimate + estimate.T)
    violation = float(np.max(np.abs(a @ estimate.ravel() - y)))
    return RecoveryResult(estimate, float(np.trace(estimate)), violation,
                          iters, converged, infeasible=proj.infeasible,
                          history=hist)


def extract_rank1(x_mat: np.ndarray) -> tuple[np.ndarray, float]:
    """Top-eigenpair factorization of a PSD matrix.

    Returns (x, residual) with x = sqrt(lam_1) v_1, the sign fixed so the
    largest-magnitude entry of x is positive, and residual the relative
    Frobenius defect ||X - x x^t|| / ||X|| (zero for the zero matrix).
    """
    x_mat = np.asarray(x_mat, dtype=float)
    norm = np.linalg.norm(x_mat)
    if norm == 0.0:
        return np.zeros(x_mat.shape[0]), 0.0
    lam, vecs = np.linalg.eigh(0.5 * (x_mat + x_mat.T))
    top = max(float(lam[-1]), 0.0)
    x = math.sqrt(top) * vecs[:, -1]
    if x[np.argmax(np.abs(x))] < 0:
        x = -x
    residual = float(np.linalg.norm(x_mat - np.outer(x, x)) / norm)
    return x, residual
