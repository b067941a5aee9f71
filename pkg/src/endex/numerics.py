"""Small dense numerical kernels.

Transient integration, damped Newton, finite-difference Jacobians, a
shifted-QR eigenvalue solver for matrices up to 4x4 and stability
classification.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .model import DomainError

log = logging.getLogger(__name__)

IMAG_TOL = 1e-9


class StiffnessError(RuntimeError):
    """Step size underflow in the integrator."""

    def __init__(self, message: str, t: float, last_state: np.ndarray):
        super().__init__(message)
        self.t = t
        self.last_state = last_state


class ConvergenceError(RuntimeError):
    """Newton iteration did not reach the residual tolerance."""

    def __init__(self, message: str, best: np.ndarray, residual_norm: float):
        super().__init__(message)
        self.best = best
        self.residual_norm = residual_norm


class SingularJacobianError(ConvergenceError):
    """The Newton matrix is rank deficient."""


# -- data carriers ---------------------------------------------------------


@dataclass
class Event:
    """Timed switch of one named parameter."""

    time: float
    name: str
    value: float


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    event_log: list[tuple[float, str]] = field(default_factory=list)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.shape[0] != self.times.shape[0]:
            raise ValueError("states and times differ in length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class EigenSet:
    values: tuple[complex, ...]
    source_matrix_dim: int

    def __post_init__(self):
        if len(self.values) != self.source_matrix_dim:
            raise ValueError("number of eigenvalues differs from matrix dimension")

    def max_real_part(self) -> float:
        return max(v.real for v in self.values)

    def leading(self) -> complex:
        """Eigenvalue with the largest real part (positive imaginary part on ties)."""
        return max(self.values, key=lambda v: (v.real, v.imag))

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=complex)


@dataclass(frozen=True)
class StabilityClass:
    kind: str
    oscillatory: bool
    max_real_part: float

    @property
    def stable(self) -> bool:
        return self.kind == "stable"


# -- integration -----------------------------------------------------------


def _apply_event(params, ev: Event):
    if params is None:
        raise ValueError("timed events need a parameter set to act on")
    if isinstance(params, Mapping):
        return {**params, ev.name: ev.value}
    return params.with_values(**{ev.name: ev.value})


def integrate(
    rhs: Callable,
    s0: Sequence[float],
    t_span: tuple[float, float],
    tol: tuple[float, float] = (1e-8, 1e-10),
    events: Sequence[Event] = (),
    params=None,
    nonnegative: Sequence[int] = (),
    sample_dt: float | None = None,
    method: str = "Radau",
) -> Trajectory:
    """Integrate ``dx/dt = rhs(x[, params])`` with adaptive implicit steps.

    Parameters
    ----------
    rhs : callable
        ``rhs(x)`` or, when *params* is given, ``rhs(x, params)``.
    s0 : array_like
        Initial state.
    t_span : (float, float)
        Start and end time, increasing.
    tol : (float, float)
        Relative and absolute local error tolerances.
    events : sequence of Event
        Parameter switches.  Integration stops exactly at each event time,
        the parameter is replaced and integration restarts.  Events outside
        ``t_span`` are ignored.
    params : ModelParams or mapping, optional
        Parameter set passed to *rhs*.
    nonnegative : sequence of int
        Components clamped at zero before evaluating *rhs*.  The first clamp
        of each segment is recorded in the event log.
    sample_dt : float, optional
        If given, output is sampled on a uniform grid (event times included);
        otherwise the solver's own steps are returned.

    Returns
    -------
    Trajectory
    """
    t0, t1 = map(float, t_span)
    if not t1 > t0:
        raise ValueError(f"t_span must be increasing, got {t_span}")
    rtol, atol = tol
    if not (rtol > 0 and atol > 0):
        raise ValueError("tolerances must be positive")
    x = np.asarray(s0, dtype=float).copy()
    if not np.all(np.isfinite(x)):
        raise DomainError("non-finite initial state")

    pending = sorted((e for e in events if t0 < e.time < t1), key=lambda e: e.time)
    breaks = [t0] + [e.time for e in pending] + [t1]
    times: list[np.ndarray] = []
    states: list[np.ndarray] = []
    event_log: list[tuple[float, str]] = []
    nonneg = list(nonnegative)
    current = params

    for k in range(len(breaks) - 1):
        ta, tb = breaks[k], breaks[k + 1]
        if k > 0:
            ev = pending[k - 1]
            before = _param_value(current, ev.name)
            current = _apply_event(current, ev)
            event_log.append((ta, f"{ev.name}: {before:g} -> {ev.value:g}"))
            log.debug("t=%g: %s switched to %g", ta, ev.name, ev.value)
        clamped = [False]

        def f(t, y, _p=current, _clamped=clamped):
            if nonneg and np.any(y[nonneg] < 0):
                y = y.copy()
                neg = [i for i in nonneg if y[i] < 0]
                y[neg] = 0.0
                if not _clamped[0]:
                    _clamped[0] = True
                    event_log.append((float(t), f"clamped components {neg} to zero"))
                    log.debug("t=%g: clamped components %s", t, neg)
            dy = rhs(y) if _p is None else rhs(y, _p)
            dy = np.asarray(dy, dtype=float)
            if not np.all(np.isfinite(dy)):
                raise DomainError(f"non-finite derivative at t={t}: {dy}")
            return dy

        t_eval = None
        if sample_dt is not None:
            n = max(int(math.ceil((tb - ta) / sample_dt - 1e-9)), 1)
            t_eval = np.linspace(ta, tb, n + 1)
        sol = solve_ivp(f, (ta, tb), x, method=method, rtol=rtol, atol=atol, t_eval=t_eval)
        if sol.status != 0:
            last = sol.y[:, -1] if sol.y.size else x
            tl = float(sol.t[-1]) if sol.t.size else ta
            raise StiffnessError(f"integration failed at t={tl}: {sol.message}", tl, last)
        seg_t, seg_y = sol.t, sol.y.T
        if k > 0:
            seg_t, seg_y = seg_t[1:], seg_y[1:]
        times.append(seg_t)
        states.append(seg_y)
        x = sol.y[:, -1].copy()

    states_arr = np.vstack(states)
    for i in nonneg:
        states_arr[:, i] = np.maximum(states_arr[:, i], 0.0)
    event_log.sort(key=lambda e: e[0])
    return Trajectory(np.concatenate(times), states_arr, event_log)


def _param_value(params, name: str) -> float:
    if isinstance(params, Mapping):
        return float(params.get(name, float("nan")))
    return params.get(name)


# -- Jacobians and Newton --------------------------------------------------


def fd_jacobian(
    f: Callable[[np.ndarray], np.ndarray],
    x: Sequence[float],
    h_rel: float = 1e-6,
    scale: Sequence[float] | None = None,
) -> np.ndarray:
    """Central-difference Jacobian.

    Column ``j`` uses the step ``h_rel * max(|x_j|, scale_j)``.  If one side
    of the stencil leaves the domain of *f*, a one-sided difference is used
    for that column.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    scale = np.ones(n) if scale is None else np.asarray(scale, dtype=float)
    f0 = None
    cols = []
    for j in range(n):
        h = h_rel * max(abs(x[j]), scale[j])
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        try:
            fp = np.asarray(f(xp), dtype=float)
        except DomainError:
            fp = None
        try:
            fm = np.asarray(f(xm), dtype=float)
        except DomainError:
            fm = None
        # divide by the steps actually taken, which may differ from h by rounding;
        # non-finite columns are reported below, so suppress numpy's warnings
        with np.errstate(invalid="ignore", over="ignore"):
            if fp is not None and fm is not None:
                col = (fp - fm) / (xp[j] - xm[j])
            else:
                if f0 is None:
                    f0 = np.asarray(f(x), dtype=float)
                if fp is not None:
                    col = (fp - f0) / (xp[j] - x[j])
                elif fm is not None:
                    col = (f0 - fm) / (x[j] - xm[j])
                else:
                    raise DomainError(f"function undefined on both sides of column {j}")
        if not np.all(np.isfinite(col)):
            raise DomainError(f"non-finite function value in Jacobian column {j}")
        cols.append(col)
    return np.column_stack(cols)


def _natural_decrease(J, rn, dx_norm, lam) -> bool:
    """Monotonicity of the simplified Newton correction (affine invariant).

    Accepts a step whose next correction ``J^-1 r(x_new)`` is shorter than
    the current one, even if the raw residual grew.  This matters when one
    slow mode leaves a tiny residual far from the root.
    """
    try:
        corr = np.linalg.solve(J, rn)
    except np.linalg.LinAlgError:
        return False
    return float(np.max(np.abs(corr))) <= (1.0 - lam / 4.0) * dx_norm


def newton_solve(
    residual: Callable[[np.ndarray], np.ndarray],
    guess: Sequence[float],
    tol: float = 1e-9,
    max_iter: int = 50,
    jac: Callable[[np.ndarray], np.ndarray] | None = None,
    scale: Sequence[float] | None = None,
    max_halvings: int = 20,
    nonnegative: Sequence[int] = (),
) -> np.ndarray:
    """Damped Newton iteration on ``residual(x) = 0``.

    Converged means ``max|residual(x)| < tol``.  A full step that increases
    the residual norm (or leaves the residual's domain) is halved up to
    *max_halvings* times.  Components listed in *nonnegative* are projected:
    a step that would take one below zero leaves it at a tenth of its value.
    A damped step is also accepted when the next simplified Newton
    correction shrinks, which keeps badly scaled residuals from stalling
    the iteration.

    Raises
    ------
    ConvergenceError
        If *max_iter* is exhausted or no damped step reduces the residual.
        Carries the best iterate and its residual norm.
    SingularJacobianError
        If the Newton matrix is singular.
    """
    x = np.asarray(guess, dtype=float).copy()
    if not np.all(np.isfinite(x)):
        raise DomainError("non-finite Newton guess")
    nonneg = list(nonnegative)
    if not tol > 0:
        raise ValueError("tol must be positive")
    r = np.asarray(residual(x), dtype=float)
    norm = float(np.max(np.abs(r)))
    if not math.isfinite(norm):
        raise DomainError("non-finite residual at the initial guess")
    for _ in range(max_iter):
        if norm < tol:
            return x
        J = jac(x) if jac is not None else fd_jacobian(residual, x, scale=scale)
        try:
            dx = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            raise SingularJacobianError("singular Jacobian", x, norm) from None
        if not np.all(np.isfinite(dx)) or np.linalg.cond(J) > 1e15:
            raise SingularJacobianError("Jacobian is numerically rank deficient", x, norm)
        dx_norm = float(np.max(np.abs(dx)))
        lam = 1.0
        for _ in range(max_halvings + 1):
            xn = x + lam * dx
            for i in nonneg:
                if xn[i] < 0:
                    xn[i] = 0.1 * max(x[i], 0.0)
            try:
                rn = np.asarray(residual(xn), dtype=float)
                nn = float(np.max(np.abs(rn)))
            except DomainError:
                nn = math.inf
            if math.isfinite(nn) and (
                nn < norm or _natural_decrease(J, rn, dx_norm, lam)
            ):
                break
            lam *= 0.5
        else:
            raise ConvergenceError(
                f"line search failed, residual {norm:.3e}", x, norm
            )
        x, r, norm = xn, rn, nn
    if norm < tol:
        return x
    raise ConvergenceError(
        f"no convergence in {max_iter} iterations, residual {norm:.3e}", x, norm
    )


# -- eigenvalues -----------------------------------------------------------


def _balance(A: np.ndarray) -> np.ndarray:
    """Diagonal similarity by powers of two equalising row and column norms."""
    A = A.copy()
    n = A.shape[0]
    radix = 2.0
    converged = False
    while not converged:
        converged = True
        for i in range(n):
            c = np.sum(np.abs(A[:, i])) - abs(A[i, i])
            r = np.sum(np.abs(A[i, :])) - abs(A[i, i])
            if c == 0 or r == 0:
                continue
            g, f, s = r / radix, 1.0, c + r
            while c < g:
                f *= radix
                c *= radix * radix
            g = r * radix
            while c > g:
                f /= radix
                c /= radix * radix
            if (c + r) / f < 0.95 * s:
                converged = False
                A[i, :] /= f
                A[:, i] *= f
    return A


def _hessenberg(A: np.ndarray) -> np.ndarray:
    H = A.copy()
    n = H.shape[0]
    for k in range(n - 2):
        v = H[k + 1 :, k].copy()
        alpha = np.linalg.norm(v)
        if alpha == 0:
            continue
        v[0] += math.copysign(alpha, v[0])
        v /= np.linalg.norm(v)
        H[k + 1 :, :] -= 2.0 * np.outer(v, v @ H[k + 1 :, :])
        H[:, k + 1 :] -= 2.0 * np.outer(H[:, k + 1 :] @ v, v)
        H[k + 2 :, k] = 0.0
    return H


def _eig2(a: float, b: float, c: float, d: float) -> tuple[complex, complex]:
    half_tr = 0.5 * (a + d)
    disc = (0.5 * (a - d)) ** 2 + b * c
    if disc >= 0:
        root = math.sqrt(disc)
        big = half_tr + math.copysign(root, half_tr) if half_tr != 0 else root
        det = a * d - b * c
        small = det / big if big != 0 else half_tr - root
        return complex(big), complex(small)
    im = math.sqrt(-disc)
    return complex(half_tr, im), complex(half_tr, -im)


def _qr_eigenvalues(H: np.ndarray, max_sweeps: int = 200) -> list[complex]:
    """Francis double-shift QR on an upper Hessenberg matrix with deflation."""
    H = H.copy()
    out: list[complex] = []
    hi = H.shape[0] - 1
    eps = np.finfo(float).eps
    stall = 0
    while hi >= 0:
        if hi == 0:
            out.append(complex(H[0, 0]))
            break
        # locate the active unreduced block [lo, hi]
        lo = hi
        while lo > 0:
            s = abs(H[lo - 1, lo - 1]) + abs(H[lo, lo])
            if s == 0:
                s = np.linalg.norm(H[: hi + 1, : hi + 1], 1)
            if abs(H[lo, lo - 1]) <= eps * s:
                H[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            out.append(complex(H[hi, hi]))
            hi -= 1
            stall = 0
            continue
        if lo == hi - 1:
            out.extend(_eig2(H[hi - 1, hi - 1], H[hi - 1, hi], H[hi, hi - 1], H[hi, hi]))
            hi -= 2
            stall = 0
            continue
        stall += 1
        if stall > max_sweeps:
            raise ConvergenceError("QR iteration did not converge", H, float("nan"))
        B = H[lo : hi + 1, lo : hi + 1]
        m = B.shape[0]
        if stall % 11 == 0:
            # exceptional shift breaks symmetric cycles
            w = abs(B[m - 1, m - 2]) + abs(B[m - 2, m - 3])
            s, t = 1.5 * w, w * w
        else:
            s = B[m - 2, m - 2] + B[m - 1, m - 1]
            t = B[m - 2, m - 2] * B[m - 1, m - 1] - B[m - 2, m - 1] * B[m - 1, m - 2]
        M = B @ B - s * B + t * np.eye(m)
        Q, _ = np.linalg.qr(M)
        B = Q.T @ B @ Q
        # restore Hessenberg form lost to rounding
        B[np.tril_indices(m, -2)] = 0.0
        H[lo : hi + 1, lo : hi + 1] = B
    return out


def eigenvalues(M) -> EigenSet:
    """All eigenvalues of a real square matrix of dimension 1 to 4."""
    A = np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    n = A.shape[0]
    if not 1 <= n <= 4:
        raise ValueError(f"dimension must be 1..4, got {n}")
    if not np.all(np.isfinite(A)):
        raise DomainError("matrix has non-finite entries")
    if n == 1:
        vals = [complex(A[0, 0])]
    else:
        # exact power-of-two scaling keeps products clear of under- and overflow
        top = float(np.max(np.abs(A)))
        f = 2.0 ** -math.frexp(top)[1] if top > 0 else 1.0
        A = A * f
        if n == 2:
            vals = list(_eig2(A[0, 0], A[0, 1], A[1, 0], A[1, 1]))
        else:
            vals = _qr_eigenvalues(_hessenberg(_balance(A)))
        vals = [v / f for v in vals]
    vals.sort(key=lambda v: (-v.real, -v.imag))
    return EigenSet(tuple(vals), n)


def classify(e: EigenSet, margin: float = 0.0) -> StabilityClass:
    """Stable iff every real part is below ``-margin``; zero counts as unstable."""
    if not e.values:
        raise ValueError("empty eigenvalue set")
    top = e.max_real_part()
    leaders = [v for v in e.values if v.real == top]
    oscillatory = any(abs(v.imag) > 0 for v in leaders)
    kind = "stable" if top < -margin else "unstable"
    return StabilityClass(kind, oscillatory, top)
