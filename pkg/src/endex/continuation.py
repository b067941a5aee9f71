"""Steady-state branches, stability along them, and singular points.

Branches are traced with natural-parameter steps (previous solution as the
next guess).  When the step collapses near a turning point, tracing switches
to pseudo-arclength steps in scaled coordinates and stays there.  Sign
changes of the leading eigenvalue's real part between consecutive records
are refined by bisection along the chord joining them.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import model
from .model import DomainError
from .numerics import (
    IMAG_TOL,
    ConvergenceError,
    EigenSet,
    StabilityClass,
    classify,
    eigenvalues,
    fd_jacobian,
    integrate,
    newton_solve,
)
from .params import TUNABLE, ModelParams, ParameterError, si_unit

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-9
STATE_NAMES = ("c1", "T1", "c2", "T2")
SEED_TIME = 200.0


class SeedError(RuntimeError):
    """The branch could not be started at its first parameter value."""


class DegenerateLocusError(RuntimeError):
    """A fold could not be continued even one step in the second parameter."""


@dataclass(frozen=True)
class ParamRef:
    name: str

    def __post_init__(self):
        if self.name not in TUNABLE:
            raise ParameterError(
                f"{self.name!r} is not a bifurcation parameter; choose one of {TUNABLE}"
            )

    @property
    def units(self) -> str:
        return si_unit(self.name)


@dataclass
class StepControl:
    """Step sizes as fractions of the parameter range."""

    initial: float = 1 / 200
    floor: float = 1e-5
    ceiling: float = 1 / 50
    max_state_jump: float = 0.05
    max_points: int = 5000


@dataclass
class SteadyStateRecord:
    param_value: float
    state: np.ndarray
    eigen: EigenSet
    stability: StabilityClass
    residual_norm: float
    derived: dict[str, float] = field(default_factory=dict)


@dataclass
class SingularPoint:
    kind: str
    param_value: float
    state: np.ndarray
    crossing_eigenvalue: complex
    confident: bool = True
    label: str = ""


@dataclass
class Problem:
    """A parameterised vector field ``rhs(x, mu)`` with scaling information.

    ``res_scale`` divides the residual for convergence tests; ``x_scale`` and
    ``mu_scale`` set the metric used for arclength steps.
    """

    rhs: Callable[[np.ndarray, float], np.ndarray]
    dim: int
    res_scale: np.ndarray | None = None
    x_scale: np.ndarray | None = None
    fd_scale: np.ndarray | None = None
    derived: Callable[[np.ndarray, float], dict] | None = None
    nonnegative: tuple[int, ...] = ()

    def __post_init__(self):
        ones = np.ones(self.dim)
        self.res_scale = ones if self.res_scale is None else np.asarray(self.res_scale, float)
        self.x_scale = ones if self.x_scale is None else np.asarray(self.x_scale, float)
        self.fd_scale = ones if self.fd_scale is None else np.asarray(self.fd_scale, float)

    def residual(self, x, mu) -> np.ndarray:
        return np.asarray(self.rhs(x, mu), dtype=float) / self.res_scale

    def jacobian(self, x, mu) -> np.ndarray:
        return fd_jacobian(lambda y: self.rhs(y, mu), x, scale=self.fd_scale)

    def record(self, x, mu, margin: float = 0.0) -> SteadyStateRecord:
        x = np.array(x, dtype=float)
        eig = eigenvalues(self.jacobian(x, mu))
        res = float(np.max(np.abs(self.residual(x, mu))))
        derived = self.derived(x, mu) if self.derived is not None else {}
        return SteadyStateRecord(float(mu), x, eig, classify(eig, margin), res, derived)


@dataclass
class Branch:
    records: list[SteadyStateRecord]
    singular_points: list[SingularPoint]
    param: ParamRef | str
    truncated: bool = False
    mode: str = "endex"
    problem: Problem | None = field(default=None, repr=False, compare=False)
    tol: float = field(default=NEWTON_TOL, repr=False)

    @property
    def param_name(self) -> str:
        return self.param.name if isinstance(self.param, ParamRef) else str(self.param)

    def param_values(self) -> np.ndarray:
        return np.array([r.param_value for r in self.records])

    def states(self) -> np.ndarray:
        return np.array([r.state for r in self.records])

    def max_real_parts(self) -> np.ndarray:
        return np.array([r.stability.max_real_part for r in self.records])

    def column(self, key: str) -> np.ndarray:
        """State component (``c1``, ``T1``, ...) or derived quantity per record."""
        if key in STATE_NAMES:
            i = STATE_NAMES.index(key)
            return np.array(
                [r.state[i] if i < r.state.size else math.nan for r in self.records]
            )
        return np.array([r.derived[key] for r in self.records])

    def folds(self) -> list[SingularPoint]:
        return [s for s in self.singular_points if s.kind == "fold"]

    def hopfs(self) -> list[SingularPoint]:
        return [s for s in self.singular_points if s.kind == "hopf"]

    def __len__(self) -> int:
        return len(self.records)


# -- model glue ------------------------------------------------------------


def model_problem(P: ModelParams, mode: str, param: ParamRef | str) -> Problem:
    """Wrap the model right-hand side as a one-parameter family."""
    name = param.name if isinstance(param, ParamRef) else param
    f = model.rhs_for(mode)
    dim = 4 if mode == "endex" else 2
    scale = model.state_scale(P, mode)

    def at(mu):
        # a trial step outside the parameter's domain is a failed evaluation,
        # which Newton answers by backtracking
        try:
            return P.with_values(**{name: mu})
        except ParameterError as exc:
            raise DomainError(str(exc)) from None

    def rhs(x, mu):
        return f(x, at(mu))

    def derived(x, mu):
        return model.derived_quantities(x, at(mu), mode)

    return Problem(
        rhs=rhs,
        dim=dim,
        res_scale=scale,
        x_scale=scale,
        fd_scale=model.fd_scale(mode),
        derived=derived,
        nonnegative=model.nonnegative_components(mode),
    )


def seed_state(P: ModelParams, mode: str = "endex", duration: float = SEED_TIME) -> np.ndarray:
    """Terminal state of a transient started from the inlet conditions."""
    fl = P.flow
    if mode == "endex":
        x0 = [fl.c1_in, fl.T1_in, 0.0, fl.T1_in]
    else:
        x0 = [fl.c1_in, fl.T1_in]
    traj = integrate(
        model.rhs_for(mode),
        x0,
        (0.0, duration),
        params=P,
        nonnegative=model.nonnegative_components(mode),
    )
    return traj.final


def solve_steady(
    P: ModelParams,
    mode: str = "endex",
    guess: Sequence[float] | None = None,
    tol: float = NEWTON_TOL,
    margin: float = 0.0,
) -> SteadyStateRecord:
    """Newton steady state with eigenvalues and stability.

    Without a guess the transient seed procedure supplies one.
    """
    f = model.rhs_for(mode)
    scale = model.state_scale(P, mode)
    if guess is None:
        guess = seed_state(P, mode)
    fds = model.fd_scale(mode)
    x = newton_solve(
        lambda y: f(y, P) / scale,
        guess,
        tol=tol,
        scale=fds,
        nonnegative=model.nonnegative_components(mode),
    )
    J = fd_jacobian(lambda y: f(y, P), x, scale=fds)
    eig = eigenvalues(J)
    res = float(np.max(np.abs(f(x, P) / scale)))
    return SteadyStateRecord(
        float("nan"), x, eig, classify(eig, margin), res, model.derived_quantities(x, P, mode)
    )


# -- tracing ---------------------------------------------------------------


def _newton(problem: Problem, x, mu, tol):
    return newton_solve(
        lambda y: problem.residual(y, mu),
        x,
        tol=tol,
        scale=problem.fd_scale,
        nonnegative=problem.nonnegative,
    )


def _scaled(problem: Problem, x, mu, mu_scale):
    return np.append(np.asarray(x) / problem.x_scale, mu / mu_scale)


def _unscaled(problem: Problem, y, mu_scale):
    return y[:-1] * problem.x_scale, y[-1] * mu_scale


def _arclength_correct(problem, y_pred, direction, mu_scale, tol, max_iter=30):
    """Solve ``G(y) = 0`` on the hyperplane through *y_pred* normal to *direction*."""

    def aug(y):
        x, mu = _unscaled(problem, y, mu_scale)
        g = problem.residual(x, mu)
        return np.append(g, direction @ (y - y_pred))

    return newton_solve(aug, y_pred, tol=tol, max_iter=max_iter, scale=np.full(y_pred.size, 1e-3))


def _tangent(problem, y, mu_scale, previous=None):
    def g(yy):
        xx, mm = _unscaled(problem, yy, mu_scale)
        return problem.residual(xx, mm)

    J = fd_jacobian(g, y, scale=np.full(y.size, 1e-3))
    # null vector of the n x (n+1) Jacobian
    _, _, vt = np.linalg.svd(J)
    t = vt[-1]
    if previous is not None and t @ previous < 0:
        t = -t
    return t / np.linalg.norm(t)


def trace_problem(
    problem: Problem,
    lo: float,
    hi: float,
    x0: Sequence[float],
    step: StepControl | None = None,
    start: str = "lo",
    tol: float = NEWTON_TOL,
    param: ParamRef | str = "mu",
    mode: str = "",
    margin: float = 0.0,
    detect: bool = True,
) -> Branch:
    """Trace the steady states of *problem* over ``[lo, hi]``.

    Parameters
    ----------
    problem : Problem
    lo, hi : float
        Parameter range, ``lo <= hi``.
    x0 : array_like
        Guess for the steady state at the starting end.
    step : StepControl, optional
    start : {'lo', 'hi'}
        End of the range at which tracing starts.
    tol : float
        Scaled residual tolerance for every record.

    Returns
    -------
    Branch
        Records ordered by arclength.  ``truncated`` is set when the step
        limit is hit or the corrector fails at the minimum step.
    """
    if not lo <= hi:
        raise ValueError(f"empty range ({lo}, {hi})")
    step = step or StepControl()
    span = hi - lo
    sign = 1.0 if start == "lo" else -1.0
    mu0 = lo if start == "lo" else hi
    try:
        x = _newton(problem, x0, mu0, tol)
    except (ConvergenceError, DomainError) as exc:
        raise SeedError(f"no steady state found at {param} = {mu0}: {exc}") from exc
    records = [problem.record(x, mu0, margin)]
    branch = Branch(records, [], param, mode=mode, problem=problem, tol=tol)
    if span == 0:
        return branch

    h = step.initial * span
    h_min, h_max = step.floor * span, step.ceiling * span
    mu = mu0
    successes = 0
    arclength = False
    end = hi if sign > 0 else lo

    while len(records) < step.max_points:
        mu_next = mu + sign * h
        if sign * (mu_next - end) > 0:
            mu_next = end
        ok = False
        try:
            xn = _newton(problem, x, mu_next, tol)
            jump = float(np.linalg.norm((xn - x) / problem.x_scale))
            ok = jump <= step.max_state_jump and _same_det_sign(problem, x, mu, xn, mu_next)
        except (ConvergenceError, DomainError):
            pass
        if ok:
            x, mu = xn, mu_next
            records.append(problem.record(x, mu, margin))
            if mu == end:
                break
            successes += 1
            if successes >= 2:
                h = min(2 * h, h_max)
                successes = 0
            continue
        successes = 0
        h *= 0.5
        if h < h_min:
            arclength = True
            break

    if arclength:
        log.debug("switching to pseudo-arclength at %s = %g", param, mu)
        done = _arclength_leg(problem, records, lo, hi, span, step, tol, margin)
        branch.truncated = not done
    elif len(records) >= step.max_points:
        branch.truncated = True

    if detect and len(records) >= 2:
        branch.singular_points = detect_singularities(branch)
    return branch


def _same_det_sign(problem, x0, mu0, x1, mu1) -> bool:
    d0 = np.linalg.det(problem.jacobian(x0, mu0))
    d1 = np.linalg.det(problem.jacobian(x1, mu1))
    return d0 == 0 or d1 == 0 or math.copysign(1, d0) == math.copysign(1, d1)


def _arclength_leg(problem, records, lo, hi, span, step, tol, margin) -> bool:
    """Continue *records* by pseudo-arclength until the branch leaves [lo, hi].

    Returns False if the corrector failed at the minimum step or the point
    budget ran out.
    """
    mu_scale = span
    ys = [_scaled(problem, r.state, r.param_value, mu_scale) for r in records[-2:]]
    y = ys[-1]
    prev_dir = ys[-1] - ys[0] if len(ys) == 2 else None
    if prev_dir is not None and np.linalg.norm(prev_dir) == 0:
        prev_dir = None
    t = _tangent(problem, y, mu_scale, prev_dir)
    ds = step.initial
    ds_min, ds_max = step.floor, step.ceiling
    lo_s, hi_s = lo / mu_scale, hi / mu_scale
    while len(records) < step.max_points:
        y_pred = y + ds * t
        try:
            yn = _arclength_correct(problem, y_pred, t, mu_scale, tol)
            ok = np.linalg.norm(yn - y) <= 2.5 * ds
        except (ConvergenceError, DomainError):
            ok = False
        if not ok:
            ds *= 0.5
            if ds < ds_min:
                return False
            continue
        mu_n = yn[-1]
        if mu_n > hi_s or mu_n < lo_s:
            # finish exactly on the boundary when the branch crosses it
            edge = hi if mu_n > hi_s else lo
            x_prev, _ = _unscaled(problem, y, mu_scale)
            frac = (edge / mu_scale - y[-1]) / (mu_n - y[-1])
            x_guess = x_prev + frac * (yn[:-1] - y[:-1]) * problem.x_scale
            try:
                xe = _newton(problem, x_guess, edge, tol)
                records.append(problem.record(xe, edge, margin))
            except (ConvergenceError, DomainError):
                pass
            return True
        x_n, m_n = _unscaled(problem, yn, mu_scale)
        records.append(problem.record(x_n, m_n, margin))
        t_new = _tangent(problem, yn, mu_scale, yn - y)
        y, t = yn, t_new
        ds = min(1.5 * ds, ds_max)
    return False


def trace_branch(
    P: ModelParams,
    param: ParamRef | str,
    range: tuple[float, float],
    initial_guess: Sequence[float] | None = None,
    step: StepControl | None = None,
    mode: str = "endex",
    start: str = "lo",
    tol: float = NEWTON_TOL,
    margin: float = 0.0,
) -> Branch:
    """Steady-state branch of the model against one parameter.

    Without *initial_guess* the branch is seeded by a 200 s transient from
    the inlet conditions at the starting parameter value.
    """
    param = param if isinstance(param, ParamRef) else ParamRef(param)
    lo, hi = map(float, range)
    if initial_guess is None:
        initial_guess = seed_state(P.with_values(**{param.name: lo if start == "lo" else hi}), mode)
    problem = model_problem(P, mode, param)
    return trace_problem(
        problem, lo, hi, initial_guess, step, start, tol, param=param, mode=mode, margin=margin
    )


# -- singular points -------------------------------------------------------


def _chord_point(problem, ya, yb, sigma, mu_scale, tol):
    d = yb - ya
    y_pred = ya + sigma * d
    y = _arclength_correct(problem, y_pred, d / np.linalg.norm(d), mu_scale, tol)
    x, mu = _unscaled(problem, y, mu_scale)
    return y, x, mu


def _det_positive(rec: SteadyStateRecord) -> bool:
    # det J is the product of the eigenvalues; conjugate pairs contribute
    # |lambda|^2 > 0, so only a real eigenvalue through zero flips its sign
    return bool(np.prod(rec.eigen.as_array()).real > 0)


def _n_unstable(rec: SteadyStateRecord) -> int:
    return sum(v.real >= 0 for v in rec.eigen.values)


def _crossing(rec: SteadyStateRecord, kind: str) -> complex:
    vals = rec.eigen.values
    if kind == "fold":
        real = [v for v in vals if abs(v.imag) < IMAG_TOL] or list(vals)
        return min(real, key=abs)
    pairs = [v for v in vals if v.imag >= IMAG_TOL] or list(vals)
    return min(pairs, key=lambda v: abs(v.real))


def detect_singularities(
    b: Branch, rel_tol: float = 1e-6, max_iter: int = 80
) -> list[SingularPoint]:
    """Locate folds and Hopf points between consecutive records.

    A fold is bracketed by a sign change of the Jacobian determinant (a real
    eigenvalue through zero).  A Hopf point is bracketed by a change of two
    in the number of eigenvalues with non-negative real part that the
    determinant does not explain (a conjugate pair through the imaginary
    axis).  Counting rather than watching the leading real part keeps
    detection working on branches that are already unstable.

    Each bracket is bisected along the chord joining the two records, with
    the branch re-solved on the normal hyperplane, until the scaled bracket
    width drops below ``rel_tol``.  A bracket that does not close within
    *max_iter* halvings yields an unrefined point with ``confident=False``.
    """
    if len(b.records) < 2:
        raise ValueError("need at least two records")
    problem = b.problem
    mus = b.param_values()
    mu_scale = max(float(np.ptp(mus)), abs(float(mus[0])), 1e-12)
    out: list[SingularPoint] = []
    for ra, rb in zip(b.records, b.records[1:]):
        flips = _det_positive(ra) != _det_positive(rb)
        jump = abs(_n_unstable(ra) - _n_unstable(rb)) - int(flips)
        tests = []
        if flips:
            tests.append(("fold", lambda r, side=_det_positive(ra): _det_positive(r) == side))
        if jump >= 2:
            tests.append(("hopf", lambda r, side=_n_unstable(ra): _n_unstable(r) == side))
        for kind, on_lo_side in tests:
            out.append(_refine(problem, ra, rb, kind, on_lo_side, mu_scale, b.tol,
                               rel_tol, max_iter))
    return out


def _refine(problem, ra, rb, kind, on_lo_side, mu_scale, tol, rel_tol, max_iter) -> SingularPoint:
    ya = _scaled(problem, ra.state, ra.param_value, mu_scale)
    yb = _scaled(problem, rb.state, rb.param_value, mu_scale)
    s_lo, s_hi = 0.0, 1.0
    rec_lo, rec_hi = ra, rb
    confident = False
    for _ in range(max_iter):
        if np.linalg.norm((s_hi - s_lo) * (yb - ya)) <= rel_tol:
            confident = True
            break
        s_mid = 0.5 * (s_lo + s_hi)
        try:
            _, x, mu = _chord_point(problem, ya, yb, s_mid, mu_scale, tol)
        except (ConvergenceError, DomainError):
            break
        rec = problem.record(x, mu)
        if on_lo_side(rec):
            s_lo, rec_lo = s_mid, rec
        else:
            s_hi, rec_hi = s_mid, rec
    lams = [_crossing(r, kind) for r in (rec_lo, rec_hi)]
    lam = min(lams, key=lambda v: abs(v.real))
    return SingularPoint(
        kind=kind,
        param_value=0.5 * (rec_lo.param_value + rec_hi.param_value),
        state=0.5 * (rec_lo.state + rec_hi.state),
        crossing_eigenvalue=lam,
        confident=confident,
    )


def solve_on_branch(b: Branch, value: float, guess: Sequence[float]) -> SteadyStateRecord:
    """Newton solve of *b*'s problem at parameter *value* from *guess*."""
    x = _newton(b.problem, guess, value, b.tol)
    return b.problem.record(x, value)


def solutions_at(b: Branch, value: float) -> list[SteadyStateRecord]:
    """All steady states on *b* at parameter *value*, one per bracketing segment.

    Each is found by Newton seeded from linear interpolation between the two
    records whose parameter values bracket *value*.
    """
    problem = b.problem
    out: list[SteadyStateRecord] = []
    for ra, rb in zip(b.records, b.records[1:]):
        a, c = ra.param_value, rb.param_value
        if a == c or not min(a, c) <= value <= max(a, c):
            continue
        w = (value - a) / (c - a)
        guess = (1 - w) * ra.state + w * rb.state
        try:
            x = _newton(problem, guess, value, b.tol)
        except (ConvergenceError, DomainError):
            continue
        if any(
            np.linalg.norm((x - r.state) / problem.x_scale) < 1e-6 for r in out
        ):
            continue
        out.append(problem.record(x, value))
    return out


# -- fold loci -------------------------------------------------------------


@dataclass
class FoldLocus:
    points: list[tuple[float, float]]
    states: list[np.ndarray]
    complete: bool = True

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


def _fold_system(problem_for, x_scale, mu_scale):
    """Residual of ``G(x, mu) = 0, det(Gx) = 0`` for a fixed second parameter."""

    def residual(z, nu):
        prob = problem_for(nu)
        x, mu = z[:-1] * x_scale, z[-1] * mu_scale
        g = prob.residual(x, mu)
        J = prob.jacobian(x, mu)
        Js = (J / prob.res_scale[:, None]) * x_scale[None, :]
        return np.append(g, np.linalg.det(Js))

    return residual


def continue_fold(
    problem_for: Callable[[float], Problem],
    fold: SingularPoint,
    nu_range: tuple[float, float],
    nu_start: float | None = None,
    step: StepControl | None = None,
    tol: float = 1e-9,
) -> FoldLocus:
    """Continue a fold of ``problem_for(nu)`` in the second parameter *nu*.

    The fold is corrected at each *nu* by Newton on the determinant-augmented
    system.  Stepping stops at the end of *nu_range* or when the corrector
    fails at the minimum step, in which case ``complete`` is False.
    """
    lo, hi = map(float, nu_range)
    nu0 = lo if nu_start is None else nu_start
    base = problem_for(nu0)
    x_scale = base.x_scale
    mu_scale = max(abs(fold.param_value), 1.0)
    res = _fold_system(problem_for, x_scale, mu_scale)
    z = np.append(np.asarray(fold.state) / x_scale, fold.param_value / mu_scale)
    z = newton_solve(lambda zz: res(zz, nu0), z, tol=tol, scale=np.full(z.size, 1e-3))
    points = [(z[-1] * mu_scale, nu0)]
    states = [z[:-1] * x_scale]
    span = hi - lo
    if span == 0:
        return FoldLocus(points, states, True)
    step = step or StepControl(initial=1 / 50, floor=1e-4, ceiling=1 / 20)
    h, h_min, h_max = step.initial * span, step.floor * span, step.ceiling * span
    nu = nu0
    zs = [z]
    nus = [nu0]
    while nu < hi:
        nu_n = min(nu + h, hi)
        if len(zs) >= 2:
            # secant predictor in nu
            z_pred = zs[-1] + (zs[-1] - zs[-2]) * (nu_n - nus[-1]) / (nus[-1] - nus[-2])
        else:
            z_pred = zs[-1]
        try:
            zn = newton_solve(
                lambda zz: res(zz, nu_n), z_pred, tol=tol, scale=np.full(z.size, 1e-3)
            )
            ok = np.linalg.norm(zn - zs[-1]) < 0.2
        except (ConvergenceError, DomainError):
            ok = False
        if not ok:
            h *= 0.5
            if h < h_min:
                if len(points) == 1:
                    raise DegenerateLocusError(f"fold lost at first step from nu = {nu0}")
                return FoldLocus(points, states, False)
            continue
        nu = nu_n
        zs.append(zn)
        nus.append(nu)
        points.append((zn[-1] * mu_scale, nu))
        states.append(zn[:-1] * x_scale)
        h = min(1.5 * h, h_max)
    return FoldLocus(points, states, True)


def trace_fold_locus(
    P: ModelParams,
    fold: SingularPoint,
    first_param: ParamRef | str,
    second_param: ParamRef | str,
    range: tuple[float, float],
    step: StepControl | None = None,
    mode: str = "endex",
) -> FoldLocus:
    """Two-parameter locus of a fold, as ``(first, second)`` parameter pairs.

    The fold must belong to a branch traced at ``second_param = range[0]``.
    """
    first = first_param.name if isinstance(first_param, ParamRef) else first_param
    second = second_param.name if isinstance(second_param, ParamRef) else ParamRef(second_param).name

    def problem_for(nu):
        return model_problem(P.with_values(**{second: nu}), mode, first)

    return continue_fold(problem_for, fold, range, step=step)
