"""Dense box-constrained QP with equality constraints, by primal active set.

Solves

    minimize    x^T diag(w) x
    subject to  C x = d,  lo <= x <= hi

for small dense problems (tension allocation: a handful of muscles, one or
two joints). The equality rows stay in the working set permanently; bounds
enter and leave it. Each subproblem is solved through the J x J system
C_S D C_S^T lam = rhs with D = 1/(2 w_S), which stays tiny regardless of the
number of muscles.

Feasibility is detected up front with a bounded least-squares solve; an
infeasible instance raises QpInfeasibleError carrying the minimum-norm
equality violation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import linprog, lsq_linear

__all__ = ["QpInfeasibleError", "QpSolution", "solve_box_qp"]

_FEAS_RTOL = 1e-9
_BOUND_EPS = 1e-11


class QpInfeasibleError(ValueError):
    def __init__(self, violation: float):
        self.violation = violation
        super().__init__(
            f"no point in the box satisfies the equality constraints "
            f"(minimum violation {violation:.3e})")


@dataclass(frozen=True)
class QpSolution:
    x: np.ndarray
    lam: np.ndarray            # equality multipliers
    active_lower: Tuple[int, ...]
    active_upper: Tuple[int, ...]
    objective: float
    equality_residual: float
    iterations: int


def _certify_optimal(w, C, x, lo, hi) -> Optional[np.ndarray]:
    """Equality multipliers proving x optimal, or None.

    At a degenerate vertex (more bounds active than free directions) the
    reduced system is rank deficient and its least-squares multipliers are
    meaningless, so the working-set loop can stall. Optimality is then
    settled exactly: find lam with the gradient condition 2 w x = C^T lam
    + mu, where mu vanishes on interior components and has the sign of the
    active bound elsewhere. That is a tiny linear feasibility problem.
    """
    J, M = C.shape
    g = 2.0 * w * x
    atol = 1e-7 * (1.0 + np.abs(g))
    rows, rhs = [], []
    for i in range(M):
        ci = C[:, i]
        if lo[i] >= hi[i]:
            continue  # pinned: its multiplier is unrestricted
        if x[i] <= lo[i] + _BOUND_EPS:
            rows.append(ci)
            rhs.append(g[i] + atol[i])
        elif x[i] >= hi[i] - _BOUND_EPS:
            rows.append(-ci)
            rhs.append(-g[i] + atol[i])
        else:
            rows.append(ci)
            rhs.append(g[i] + atol[i])
            rows.append(-ci)
            rhs.append(-g[i] + atol[i])
    res = linprog(np.zeros(J), A_ub=np.array(rows), b_ub=np.array(rhs),
                  bounds=[(None, None)] * J, method="highs")
    return res.x if res.success else None


def _restore_equality(C, d, x, lo, hi):
    """Nudge the interior components so C x = d holds to machine precision."""
    for _ in range(4):
        r = d - C @ x
        if np.linalg.norm(r) <= 1e-13 * (1.0 + np.linalg.norm(d)):
            break
        S = (x > lo + _BOUND_EPS) & (x < hi - _BOUND_EPS)
        if not S.any():
            S = np.ones(x.size, bool)
        dx = np.linalg.lstsq(C[:, S], r, rcond=None)[0]
        x = x.copy()
        x[S] += dx
        np.clip(x, lo, hi, out=x)
    return x


def solve_box_qp(w, C, d, lo, hi, max_iter: int | None = None,
                 x0=None) -> QpSolution:
    w = np.asarray(w, float)
    C = np.atleast_2d(np.asarray(C, float))
    d = np.atleast_1d(np.asarray(d, float))
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    J, M = C.shape
    if w.shape != (M,) or lo.shape != (M,) or hi.shape != (M,) or d.shape != (J,):
        raise ValueError("inconsistent QP dimensions")
    if np.any(w <= 0):
        raise ValueError("weights must be strictly positive")
    if np.any(lo > hi):
        raise ValueError("lower bound exceeds upper bound")

    # Phase 1: bounded least squares doubles as the infeasibility detector.
    # A warm start near the new optimum skips it; if the start cannot be
    # restored to feasibility we fall through to the full detector.
    x = None
    if x0 is not None:
        cand = _restore_equality(C, d, np.clip(np.asarray(x0, float), lo, hi), lo, hi)
        if np.linalg.norm(C @ cand - d) <= _FEAS_RTOL * (1.0 + np.linalg.norm(d)):
            x = cand
    if x is None:
        # bvls requires lo < hi, so pinned components are substituted out
        pin = lo >= hi
        cand = np.where(pin, lo, 0.0)
        if (~pin).any():
            res = lsq_linear(C[:, ~pin], d - C[:, pin] @ lo[pin],
                             bounds=(lo[~pin], hi[~pin]), method="bvls")
            cand[~pin] = res.x
        violation = float(np.linalg.norm(C @ cand - d))
        if violation > _FEAS_RTOL * (1.0 + np.linalg.norm(d)):
            raise QpInfeasibleError(violation)
        x = _restore_equality(C, d, np.clip(cand, lo, hi), lo, hi)

    side = np.zeros(M, dtype=int)
    side[x <= lo + _BOUND_EPS] = -1
    side[x >= hi - _BOUND_EPS] = +1

    lam = np.zeros(J)
    limit = max_iter if max_iter is not None else 50 * M + 50
    stall = 0
    for it in range(1, limit + 1):
        S = side == 0
        vB = np.where(side < 0, lo, hi)
        rhs = d - (C[:, ~S] @ vB[~S] if (~S).any() else 0.0)
        CS = C[:, S]
        Dh = 1.0 / (2.0 * w[S])
        H = CS @ (Dh[:, None] * CS.T)
        try:
            lam = np.linalg.solve(H, rhs)
        except np.linalg.LinAlgError:
            lam = np.linalg.lstsq(H, rhs, rcond=None)[0]
        xS = Dh * (CS.T @ lam)
        target = vB.copy()
        target[S] = xS

        # Walk toward the subproblem optimum; stop at the first blocking bound.
        step = target - x
        t = 1.0
        blocker, bside = -1, 0
        for i in np.where(S)[0]:
            if step[i] > _BOUND_EPS:
                ti = (hi[i] - x[i]) / step[i]
                if ti < t - 1e-15:
                    t, blocker, bside = ti, i, +1
            elif step[i] < -_BOUND_EPS:
                ti = (lo[i] - x[i]) / step[i]
                if ti < t - 1e-15:
                    t, blocker, bside = ti, i, -1
        tc = max(0.0, min(1.0, t))
        moved = tc * float(np.linalg.norm(step))
        x = x + tc * step
        # A run of iterations that never move x means the working set is
        # churning at a degenerate vertex, where the rank-deficient
        # subproblem yields meaningless multipliers. Settle it exactly.
        stall = stall + 1 if moved <= 1e-12 * (1.0 + np.linalg.norm(x)) else 0
        if stall > M + J + 4:
            cert = _certify_optimal(w, C, x, lo, hi)
            if cert is None:
                raise RuntimeError("active set stalled at a non-optimal point")
            x = _restore_equality(C, d, x, lo, hi)
            return QpSolution(
                x=x,
                lam=cert,
                active_lower=tuple(
                    int(i) for i in np.where(x <= lo + _BOUND_EPS)[0]),
                active_upper=tuple(
                    int(i) for i in np.where(x >= hi - _BOUND_EPS)[0]),
                objective=float(w @ (x * x)),
                equality_residual=float(np.linalg.norm(C @ x - d)),
                iterations=it,
            )
        if blocker >= 0:
            x[blocker] = lo[blocker] if bside < 0 else hi[blocker]
            side[blocker] = bside
            continue

        # Full step taken: KKT check on the bound multipliers.
        mu = 2.0 * w * x - C.T @ lam
        violating = []
        for i in np.where(side != 0)[0]:
            if lo[i] >= hi[i]:
                continue  # pinned: its multiplier is unrestricted
            m = mu[i] if side[i] < 0 else -mu[i]
            if m < -1e-12:
                violating.append((m, i))
        if not violating:
            x = _restore_equality(C, d, x, lo, hi)
            eq = float(np.linalg.norm(C @ x - d))
            return QpSolution(
                x=x,
                lam=lam,
                active_lower=tuple(int(i) for i in np.where(side == -1)[0]),
                active_upper=tuple(int(i) for i in np.where(side == +1)[0]),
                objective=float(w @ (x * x)),
                equality_residual=eq,
                iterations=it,
            )
        # Most-negative multiplier normally; Bland's lowest-index rule once
        # the count suggests degenerate cycling, which guarantees exit.
        if it > 3 * (M + J) + 10:
            drop = min(i for _, i in violating)
        else:
            drop = min(violating)[1]
        side[drop] = 0
    cert = _certify_optimal(w, C, x, lo, hi)
    if cert is not None:
        x = _restore_equality(C, d, x, lo, hi)
        return QpSolution(
            x=x,
            lam=cert,
            active_lower=tuple(int(i) for i in np.where(x <= lo + _BOUND_EPS)[0]),
            active_upper=tuple(int(i) for i in np.where(x >= hi - _BOUND_EPS)[0]),
            objective=float(w @ (x * x)),
            equality_residual=float(np.linalg.norm(C @ x - d)),
            iterations=limit,
        )
    raise RuntimeError(f"active-set did not converge within {limit} iterations")
