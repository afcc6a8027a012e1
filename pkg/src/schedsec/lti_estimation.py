"""Steady-state Kalman filtering machinery for scalar/vector LTI processes.

A sensor observes x(k+1) = A x(k) + w(k), y(k) = C x(k) + v(k) with
w ~ N(0, Q), v ~ N(0, R), and runs a local Kalman filter.  The two maps that
drive everything downstream are the covariance prediction step

    lyapunov_step:  X -> A X A' + Q

and the measurement-update step

    riccati_step:   X -> X - X C' (C X C' + R)^{-1} C X.

Their composition has a unique positive semidefinite fixed point P_bar (the
steady-state estimation error covariance) whenever (A, C) is detectable and
(A, sqrt(Q)) is stabilizable.  The trace ladder t -> Tr[h^t(P_bar)] prices
the cost of going t slots without a packet.
"""

from __future__ import annotations

import io
import json
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (ConvergenceError, NumericalError, StabilityWarning,
                     ValidationError)

PSD_TOL = 1e-9
INSTABILITY_TOL = 1e-12
RESIDUAL_TOL = 1e-8


def _as_matrix(value, rows=None, cols=None):
    M = np.array(value, dtype=float)
    if M.ndim != 2:
        raise ValidationError(f"expected a 2-D matrix, got shape {M.shape}")
    if rows is not None and M.shape[0] != rows:
        raise ValidationError(f"expected {rows} rows, got {M.shape[0]}")
    if cols is not None and M.shape[1] != cols:
        raise ValidationError(f"expected {cols} columns, got {M.shape[1]}")
    return M


def _symmetrize(X):
    return (X + X.T) / 2.0


def _check_symmetric(M, tol=PSD_TOL):
    return bool(np.all(np.abs(M - M.T) <= tol * (1.0 + np.abs(M).max(initial=0.0))))


def _min_eigenvalue(M):
    return float(np.linalg.eigvalsh(_symmetrize(M)).min())


def _psd_sqrt(M):
    """Symmetric PSD square root via eigendecomposition."""
    w, V = np.linalg.eigh(_symmetrize(M))
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.T


def _pbh_detectable(A, C):
    """PBH test: every eigenvalue of A on or outside the unit circle must be
    observable through C."""
    n = A.shape[0]
    for lam in np.linalg.eigvals(A):
        if abs(lam) >= 1.0 - PSD_TOL:
            M = np.vstack([A - lam * np.eye(n), C.astype(complex)])
            if np.linalg.matrix_rank(M) < n:
                return False
    return True


def _pbh_stabilizable(A, B):
    n = A.shape[0]
    for lam in np.linalg.eigvals(A):
        if abs(lam) >= 1.0 - PSD_TOL:
            M = np.hstack([A - lam * np.eye(n), B.astype(complex)])
            if np.linalg.matrix_rank(M) < n:
                return False
    return True


@dataclass(eq=False)
class LinearSystem:
    """One sensor's process and measurement model.

    A: n x n state matrix, C: m x n output matrix, Q: n x n process noise
    covariance (PSD), R: m x m measurement noise covariance (PD), Pi: n x n
    initial state covariance (PSD).  `name` is used to prefix validation
    error messages, e.g. the loader sets it to "system 2".
    """

    A: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    Pi: np.ndarray
    name: str = "system"

    def __post_init__(self):
        self.A = _as_matrix(self._field("A", self.A))
        n = self.A.shape[1]
        if self.A.shape[0] != n:
            raise ValidationError(f"{self.name} field 'A': must be square, got {self.A.shape}")
        self.C = _as_matrix(self._field("C", self.C), cols=n)
        m = self.C.shape[0]
        self.Q = self._cov("Q", self.Q, n, kind="psd")
        self.R = self._cov("R", self.R, m, kind="pd")
        self.Pi = self._cov("Pi", self.Pi, n, kind="psd")
        if not _pbh_detectable(self.A, self.C):
            raise ValidationError(
                f"{self.name}: (A, C) is not detectable; the steady-state "
                f"error covariance does not exist")
        if not _pbh_stabilizable(self.A, _psd_sqrt(self.Q)):
            raise ValidationError(
                f"{self.name}: (A, sqrt(Q)) is not stabilizable; the "
                f"steady-state error covariance is not defined")
        if not self.is_unstable:
            warnings.warn(
                f"{self.name}: spectral radius {self.spectral_radius:.6g} <= 1; "
                f"the process is not strictly unstable and blocked sensors "
                f"will not diverge", StabilityWarning, stacklevel=2)

    def _field(self, fname, value):
        try:
            return np.array(value, dtype=float)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{self.name} field '{fname}': {exc}") from None

    def _cov(self, fname, value, size, kind):
        try:
            M = _as_matrix(self._field(fname, value), rows=size, cols=size)
        except ValidationError as exc:
            raise ValidationError(f"{self.name} field '{fname}': {exc}") from None
        if not _check_symmetric(M):
            raise ValidationError(f"{self.name} field '{fname}': not symmetric")
        lo = _min_eigenvalue(M)
        if kind == "pd" and lo <= PSD_TOL:
            raise ValidationError(
                f"{self.name} field '{fname}': must be positive definite "
                f"(min eigenvalue {lo:.3g})")
        if kind == "psd" and lo < -PSD_TOL:
            raise ValidationError(
                f"{self.name} field '{fname}': must be positive semidefinite "
                f"(min eigenvalue {lo:.3g})")
        return _symmetrize(M)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.C.shape[0]

    @property
    def spectral_radius(self) -> float:
        return float(np.abs(np.linalg.eigvals(self.A)).max())

    @property
    def is_unstable(self) -> bool:
        return self.spectral_radius > 1.0 + INSTABILITY_TOL


def lyapunov_step(sys: LinearSystem, X) -> np.ndarray:
    """One open-loop covariance prediction: A X A' + Q, symmetrized."""
    X = _as_matrix(X, rows=sys.n, cols=sys.n)
    return _symmetrize(sys.A @ X @ sys.A.T + sys.Q)


def riccati_step(sys: LinearSystem, X) -> np.ndarray:
    """One measurement update: X - X C' (C X C' + R)^{-1} C X, symmetrized."""
    X = _as_matrix(X, rows=sys.n, cols=sys.n)
    S = sys.C @ X @ sys.C.T + sys.R
    try:
        gain = np.linalg.solve(S, sys.C @ X)
    except np.linalg.LinAlgError:
        raise NumericalError(
            f"{sys.name}: innovation covariance is singular") from None
    return _symmetrize(X - X @ sys.C.T @ gain)


class SteadyState:
    """Steady-state covariance P_bar plus a lazily extended trace ladder.

    ladder entry t is Tr[h^t(P_bar)].  The ladder is an append-only cache;
    reading beyond the materialized prefix extends it in place, which is safe
    to share across threads holding the GIL.
    """

    def __init__(self, sys: LinearSystem, P_bar: np.ndarray, residual: float,
                 iterations: int):
        self.sys = sys
        self.P_bar = _symmetrize(np.array(P_bar, dtype=float))
        self.residual = float(residual)
        self.iterations = int(iterations)
        self._frontier = self.P_bar.copy()
        self._traces = [float(np.trace(self.P_bar))]

    def trace(self, t: int) -> float:
        """Tr[h^t(P_bar)]; extends the ladder on demand."""
        if t < 0:
            raise ValidationError(f"ladder index must be >= 0, got {t}")
        while len(self._traces) <= t:
            self._frontier = lyapunov_step(self.sys, self._frontier)
            self._traces.append(float(np.trace(self._frontier)))
        return self._traces[t]

    def ladder(self, upto: int) -> list[float]:
        """Traces [Tr h^0(P_bar), ..., Tr h^upto(P_bar)]."""
        self.trace(upto)
        return self._traces[: upto + 1]

    @property
    def trace_ladder(self) -> tuple[float, ...]:
        """The currently materialized ladder prefix."""
        return tuple(self._traces)


def steady_state(sys: LinearSystem, tol: float = 1e-10,
                 max_iter: int = 100_000, prefill: int = 0) -> SteadyState:
    """Fixed-point iteration of the combined predict+update covariance map.

    Starts from Pi and iterates X <- riccati_step(lyapunov_step(X)) until the
    Frobenius change drops below `tol`.  Raises ConvergenceError (carrying
    the last residual) if `max_iter` is exhausted.
    """
    if tol <= 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise ValidationError(f"max_iter must be >= 1, got {max_iter}")
    X = sys.Pi.copy()
    delta = np.inf
    for it in range(int(max_iter)):
        X_next = riccati_step(sys, lyapunov_step(sys, X))
        delta = float(np.linalg.norm(X_next - X, "fro"))
        X = X_next
        if delta <= tol:
            break
    else:
        raise ConvergenceError(
            f"{sys.name}: steady-state iteration did not converge in "
            f"{max_iter} steps (last change {delta:.3g})", residual=delta)
    residual = float(np.linalg.norm(riccati_step(sys, lyapunov_step(sys, X)) - X, "fro"))
    if residual > RESIDUAL_TOL:
        raise ConvergenceError(
            f"{sys.name}: converged point violates the fixed-point residual "
            f"bound ({residual:.3g} > {RESIDUAL_TOL})", residual=residual)
    ss = SteadyState(sys, X, residual, iterations=it + 1)
    if prefill > 0:
        ss.trace(prefill)
    return ss


def _steady_state_doubling(sys: LinearSystem, iters: int = 100) -> np.ndarray:
    """Structured doubling iteration for the same fixed point.

    Kept as an independent cross-check of steady_state: squares the closed
    loop each step, so it converges quadratically.  Returns P_bar.
    """
    n = sys.n
    Ak = sys.A.T.copy()
    Gk = sys.C.T @ np.linalg.solve(sys.R, sys.C)
    Hk = sys.Q.copy()
    for _ in range(iters):
        M = np.linalg.inv(np.eye(n) + Gk @ Hk)
        A_next = Ak @ M @ Ak
        G_next = Gk + Ak @ M @ Gk @ Ak.T
        H_next = _symmetrize(Hk + Ak.T @ Hk @ M @ Ak)
        if np.linalg.norm(H_next - Hk, "fro") <= 1e-14 * (1.0 + np.linalg.norm(H_next, "fro")):
            Hk = H_next
            break
        Ak, Gk, Hk = A_next, G_next, H_next
    # Hk is the pre-measurement fixed point; one update maps it to P_bar.
    return riccati_step(sys, Hk)


def local_kalman_update(sys: LinearSystem, x_prev, P_prev, y):
    """One step of the sensor-side Kalman filter.

    Returns (x_hat, P): the posterior state estimate and its error
    covariance after predicting through the dynamics and fusing the
    measurement y.
    """
    x_prev = np.asarray(x_prev, dtype=float).reshape(sys.n)
    y = np.asarray(y, dtype=float).reshape(sys.m)
    x_pred = sys.A @ x_prev
    P_pred = lyapunov_step(sys, P_prev)
    S = sys.C @ P_pred @ sys.C.T + sys.R
    try:
        K = np.linalg.solve(S.T, (P_pred @ sys.C.T).T).T
    except np.linalg.LinAlgError:
        raise NumericalError(
            f"{sys.name}: innovation covariance is singular") from None
    x_hat = x_pred + K @ (y - sys.C @ x_pred)
    P = riccati_step(sys, P_pred)
    return x_hat, P


def load_systems(source) -> list[LinearSystem]:
    """Load sensor models from a JSON array of objects with keys
    "A", "C", "Q", "R", "Pi" (row-major nested arrays).

    `source` may be a path or an open text file.  Validation errors name the
    offending system index and field.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    elif isinstance(source, io.IOBase) or hasattr(source, "read"):
        doc = json.load(source)
    else:
        doc = source
    if not isinstance(doc, list):
        raise ValidationError("systems document must be a JSON array")
    if not doc:
        raise ValidationError("systems document is empty")
    out = []
    for i, entry in enumerate(doc):
        if not isinstance(entry, dict):
            raise ValidationError(f"system {i}: expected an object, got {type(entry).__name__}")
        for key in ("A", "C", "Q", "R", "Pi"):
            if key not in entry:
                raise ValidationError(f"system {i} field '{key}': missing")
        out.append(LinearSystem(A=entry["A"], C=entry["C"], Q=entry["Q"],
                                R=entry["R"], Pi=entry["Pi"], name=f"system {i}"))
    return out
