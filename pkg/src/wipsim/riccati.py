"""Continuous algebraic Riccati solver and the LQR balance gain.

The gain regulates the pitch/translation subsystem with u = -K x in error
coordinates. The solver is the Hamiltonian Schur method: order the stable
invariant subspace of

    H = [[A, -B R^-1 B^T],
         [-Q, -A^T]]

to the front, read P off the subspace basis, then polish with Kleinman
iterations (each one a Lyapunov solve) until the residual

    ||A^T P + P A - P B R^-1 B^T P + Q||_F <= 1e-8 (1 + ||P||_F)

is met. A stabilizable pair is detected, not assumed: if the stable subspace
is not n-dimensional the pair cannot be stabilized (or the problem loses
detectability on the imaginary axis) and solve fails loudly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from .plant import LinearModel, PendulumState

__all__ = [
    "LqrWeights",
    "LqrGain",
    "NotStabilizableError",
    "CareDivergenceError",
    "RESIDUAL_RTOL",
    "care_residual",
    "stabilizing_solution",
    "solve_care",
    "control_torque",
]

RESIDUAL_RTOL = 1e-8


class NotStabilizableError(ValueError):
    """The stable invariant subspace of the Hamiltonian is deficient."""


class CareDivergenceError(RuntimeError):
    """Refinement could not reach the residual tolerance."""

    def __init__(self, history: Sequence[float]):
        self.history = list(history)
        super().__init__(
            "Riccati refinement stalled; residual history: "
            + ", ".join(f"{r:.3e}" for r in self.history))


@dataclass(frozen=True)
class LqrWeights:
    q_diag: Tuple[float, float, float, float] = (500.0, 1.0, 500.0, 0.2)
    r: float = 1e-4

    def __post_init__(self):
        if len(self.q_diag) != 4:
            raise ValueError("q_diag must have 4 entries")
        if any(q < 0 or not math.isfinite(q) for q in self.q_diag):
            raise ValueError("q_diag entries must be finite and >= 0")
        if not any(q > 0 for q in self.q_diag):
            raise ValueError("q_diag needs at least one positive entry")
        if not (math.isfinite(self.r) and self.r > 0):
            raise ValueError("r must be finite and > 0")


@dataclass(frozen=True)
class LqrGain:
    K: np.ndarray                  # 1 x n row
    P: np.ndarray                  # n x n symmetric
    closed_loop_eigs: np.ndarray   # eig(A - B K)
    residual_norm: float


def care_residual(A, B, Q, R, P) -> float:
    RB = linalg.solve(R, B.T @ P)
    return float(np.linalg.norm(A.T @ P + P @ A - P @ B @ RB + Q, "fro"))


def _schur_solution(A, B, Q, R) -> np.ndarray:
    n = A.shape[0]
    G = B @ linalg.solve(R, B.T)
    H = np.block([[A, -G], [-Q, -A.T]])
    T, Z, sdim = linalg.schur(H, sort="lhp")
    if sdim != n:
        raise NotStabilizableError(
            f"stable subspace has dimension {sdim}, expected {n}: "
            "the pair is not stabilizable (or loses detectability on the imaginary axis)")
    Z11 = Z[:n, :n]
    Z21 = Z[n:, :n]
    # an uncontrollable unstable mode keeps sdim == n (its mirror image is
    # stable) but makes the graph-space basis singular
    if np.linalg.svd(Z11, compute_uv=False)[-1] <= 1e-12:
        raise NotStabilizableError(
            "stable subspace is not a graph over the state space: "
            "no stabilizing solution exists")
    # P Z11 = Z21  ->  P = Z21 Z11^-1, computed without forming the inverse
    P = linalg.solve(Z11.T, Z21.T).T
    return 0.5 * (P + P.T)


def stabilizing_solution(A, B, Q, R, max_refine: int = 25):
    """Stabilizing CARE solution with residual polish.

    Returns (P, K, closed_loop_eigs, residual). Raises NotStabilizableError
    or CareDivergenceError (carrying the residual history).
    """
    A = np.atleast_2d(np.asarray(A, float))
    B = np.asarray(B, float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    Q = np.atleast_2d(np.asarray(Q, float))
    R = np.atleast_2d(np.asarray(R, float))

    P = _schur_solution(A, B, Q, R)
    tol = RESIDUAL_RTOL * (1.0 + np.linalg.norm(P, "fro"))
    history = [care_residual(A, B, Q, R, P)]
    while history[-1] > tol and len(history) <= max_refine:
        K = linalg.solve(R, B.T @ P)
        Acl = A - B @ K
        if np.max(np.linalg.eigvals(Acl).real) >= 0:
            raise CareDivergenceError(history)
        # Kleinman step: (A-BK)^T P+ + P+ (A-BK) = -(Q + K^T R K)
        P = linalg.solve_continuous_lyapunov(Acl.T, -(Q + K.T @ R @ K))
        P = 0.5 * (P + P.T)
        tol = RESIDUAL_RTOL * (1.0 + np.linalg.norm(P, "fro"))
        res = care_residual(A, B, Q, R, P)
        if res >= history[-1] and res > tol:
            history.append(res)
            raise CareDivergenceError(history)
        history.append(res)
    if history[-1] > tol:
        raise CareDivergenceError(history)

    K = linalg.solve(R, B.T @ P)
    eigs = np.linalg.eigvals(A - B @ K)
    if np.max(eigs.real) >= 0:
        raise NotStabilizableError("closed loop is not Hurwitz after solve")
    return P, K, eigs, history[-1]


def solve_care(model: LinearModel, w: LqrWeights = LqrWeights()) -> LqrGain:
    Q = np.diag(w.q_diag)
    R = np.array([[w.r]])
    P, K, eigs, res = stabilizing_solution(model.A, model.B, Q, R)
    return LqrGain(K=K, P=P, closed_loop_eigs=eigs, residual_norm=res)


def control_torque(gain: LqrGain, s: PendulumState,
                   theta_ref: float = 0.0, phi_ref: float = 0.0) -> float:
    """Total wheel torque u = -K [theta - theta_ref, phi - phi_ref, rates]."""
    k = gain.K[0]
    return -(k[0] * (s.theta - theta_ref)
             + k[1] * (s.phi - phi_ref)
             + k[2] * s.theta_dot
             + k[3] * s.phi_dot)
