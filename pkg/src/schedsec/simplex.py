"""Dense two-phase primal simplex for small box-constrained LPs.

Solves   min c.x   s.t.  A x <= b,  lower <= x <= upper.

Written for the tiny relaxations that appear in the spoofing search: a few
dozen variables at most, so every iteration just refactorizes the basis
densely.  Bounds may pin variables (lower == upper) and uppers may be
infinite.  Bland's rule is used for both the entering and the leaving
choice, which rules out cycling; bound flips are taken whenever the
entering variable reaches its opposite bound first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError

_RATIO_EPS = 1e-11


@dataclass
class LpResult:
    status: str              # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    objective: float | None
    iterations: int


def _simplex_loop(Abar, b, cost, lower, upper, basis, status, tol, max_iter):
    """Core bounded-variable iteration; mutates basis/status, returns the
    iteration count.  `status` holds 'L'/'U' for nonbasic, 'B' for basic."""
    m, total = Abar.shape
    for it in range(max_iter):
        B = Abar[:, basis]
        x_nb = np.where(np.array([s == "U" for s in status]), upper, lower)
        nb_mask = np.array([s != "B" for s in status])
        rhs = b - Abar[:, nb_mask] @ x_nb[nb_mask]
        try:
            x_B = np.linalg.solve(B, rhs)
            y = np.linalg.solve(B.T, cost[basis])
        except np.linalg.LinAlgError:
            raise NumericalError("simplex basis became singular") from None
        # entering variable: Bland's rule over violated reduced costs
        enter = -1
        sigma = 0.0
        for j in range(total):
            if status[j] == "B" or upper[j] - lower[j] <= _RATIO_EPS:
                continue
            d = cost[j] - y @ Abar[:, j]
            if status[j] == "L" and d < -tol:
                enter, sigma = j, 1.0
                break
            if status[j] == "U" and d > tol:
                enter, sigma = j, -1.0
                break
        if enter < 0:
            return it  # optimal for this phase
        w = np.linalg.solve(B, Abar[:, enter])
        # ratio test: how far can the entering variable move
        t_best = upper[enter] - lower[enter]
        leave = -1
        leave_to = ""
        for i in range(m):
            g = sigma * w[i]
            if g > _RATIO_EPS:
                t_i = (x_B[i] - lower[basis[i]]) / g
                hit = "L"
            elif g < -_RATIO_EPS:
                t_i = (x_B[i] - upper[basis[i]]) / g
                hit = "U"
            else:
                continue
            t_i = max(t_i, 0.0)
            if (t_i < t_best - _RATIO_EPS
                    or (t_i < t_best + _RATIO_EPS
                        and (leave < 0 or basis[i] < basis[leave]))):
                t_best, leave, leave_to = t_i, i, hit
        if not np.isfinite(t_best):
            return -1  # unbounded ray
        if leave < 0:
            # entering variable flips to its opposite bound
            status[enter] = "U" if status[enter] == "L" else "L"
            continue
        out = basis[leave]
        status[out] = leave_to
        basis[leave] = enter
        status[enter] = "B"
    raise NumericalError(f"simplex did not terminate within {max_iter} iterations")


def solve_bounded_lp(c, A_ub, b_ub, lower, upper, tol: float = 1e-9,
                     max_iter: int | None = None) -> LpResult:
    """Minimize c.x subject to A_ub x <= b_ub and lower <= x <= upper."""
    c = np.asarray(c, dtype=float)
    A = np.asarray(A_ub, dtype=float)
    b = np.asarray(b_ub, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    n = c.shape[0]
    if A.ndim != 2 or A.shape[1] != n:
        raise ValidationError(f"constraint matrix shape {A.shape} does not fit {n} variables")
    m = A.shape[0]
    if b.shape != (m,) or lower.shape != (n,) or upper.shape != (n,):
        raise ValidationError("b, lower, upper must match the constraint dimensions")
    if np.any(~np.isfinite(lower)):
        raise ValidationError("lower bounds must be finite")
    if np.any(upper < lower - _RATIO_EPS):
        return LpResult("infeasible", None, None, 0)

    # variables: n structural, m slacks, plus one artificial per violated row
    resid = b - A @ lower
    art_rows = [k for k in range(m) if resid[k] < -_RATIO_EPS]
    p = len(art_rows)
    total = n + m + p
    Abar = np.zeros((m, total))
    Abar[:, :n] = A
    Abar[:, n:n + m] = np.eye(m)
    for idx, k in enumerate(art_rows):
        Abar[k, n + m + idx] = -1.0
    lo = np.concatenate([lower, np.zeros(m), np.zeros(p)])
    hi = np.concatenate([upper, np.full(m, np.inf), np.full(p, np.inf)])

    status = ["L"] * total
    basis = []
    for k in range(m):
        if k in art_rows:
            j = n + m + art_rows.index(k)
        else:
            j = n + k
        basis.append(j)
        status[j] = "B"

    iters = 0
    if p:
        c1 = np.zeros(total)
        c1[n + m:] = 1.0
        maxit = max_iter or 200 * (total + m) + 1000
        r = _simplex_loop(Abar, b, c1, lo, hi, basis, status, tol, maxit)
        if r < 0:
            raise NumericalError("phase-1 subproblem claimed an unbounded ray")
        iters += r
        x = _current_point(Abar, b, lo, hi, basis, status)
        if float(c1 @ x) > 1e-7:
            return LpResult("infeasible", None, None, iters)
        hi[n + m:] = 0.0  # lock artificials for phase 2

    c2 = np.concatenate([c, np.zeros(m + p)])
    maxit = max_iter or 200 * (total + m) + 1000
    r = _simplex_loop(Abar, b, c2, lo, hi, basis, status, tol, maxit)
    if r < 0:
        return LpResult("unbounded", None, None, iters)
    iters += r
    x = _current_point(Abar, b, lo, hi, basis, status)
    xs = x[:n]
    return LpResult("optimal", xs, float(c @ xs), iters)


def _current_point(Abar, b, lower, upper, basis, status):
    total = Abar.shape[1]
    x = np.where(np.array([s == "U" for s in status]), upper, lower).astype(float)
    nb_mask = np.array([s != "B" for s in status])
    rhs = b - Abar[:, nb_mask] @ x[nb_mask]
    x_B = np.linalg.solve(Abar[:, basis], rhs)
    for i, j in enumerate(basis):
        x[j] = x_B[i]
    return x
