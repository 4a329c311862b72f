"""Minimization of the k-th variational eigenvalue over the basis parameters.

The scale ``s`` never requires new Gamma evaluations, so it gets its own
one-dimensional search (:func:`minimize_scale`).  The full search over
``(p, t, s)`` runs Nelder-Mead in the coordinates ``(ln p, ln(t - t_min), ln s)``
so that every trial point is admissible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .elements import MatrixBundle, build_bundle
from .errors import BracketError, DomainError, NumericalError, VarboundError
from .potential import BasisSpec, Channel, Potential, minimum_t

S_MIN, S_MAX = 1e-6, 1e6
T_CEILING = 150.0          # t is never explored beyond t_min + T_CEILING
SIMPLEX_STEP = 0.25
XATOL, FATOL = 1e-8, 1e-10
MAX_EVALS = 2500           # per Nelder-Mead run
SCALE_RTOL = 1e-10
SURVEY_P = (0.5, 0.75, 1.0, 1.5, 2.0)
SURVEY_DT = (0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0)


@dataclass
class OptimizationResult:
    """Best parameters found and the k-th eigenvalue they give.

    ``trace`` holds ``((p, t, s), value)`` for every evaluation when tracing
    was requested, otherwise it is empty.
    """

    best_params: tuple[float, float, float]
    best_value: float
    evaluations: int
    trace: list = field(default_factory=list)
    converged: bool = True
    k: int = 0


# --- scale only ---------------------------------------------------------------


def _scale_objective(bundle, k, counter, trace):
    def f(s):
        counter[0] += 1
        try:
            value = float(bundle.eigenvalues(s)[k])
        except NumericalError:
            value = math.inf
        if trace is not None:
            trace.append(((bundle.power, bundle.exponent_shift, float(s)), value))
        return value

    return f


def _bracket_scale(f, s0):
    """Geometric expansion from s0 until f rises on both sides of a point."""
    ratio = 1.25
    a, b = s0, s0 * ratio
    fa, fb = f(a), f(b)
    if fb > fa:
        a, b, fa, fb = b, a, fb, fa
        ratio = 1.0 / ratio
    # now f(b) <= f(a); keep walking in the direction a -> b with growing steps
    log_step = math.log(ratio)
    while True:
        log_step = math.copysign(min(abs(log_step) * 1.5, math.log(10.0)), log_step)
        c = b * math.exp(log_step)
        if not S_MIN <= c <= S_MAX:
            c = min(max(c, S_MIN), S_MAX)
            fc = f(c)
            if fc > fb:
                return a, b, c
            raise BracketError(
                f"no minimum of the eigenvalue in s within [{S_MIN:g}, {S_MAX:g}]"
            )
        fc = f(c)
        if fc > fb:
            return a, b, c
        a, b, fa, fb = b, c, fb, fc


def _golden(f, bracket):
    lo, mid, hi = sorted(bracket)
    res = minimize_scalar(f, bracket=(lo, mid, hi), method="golden", options={"xtol": SCALE_RTOL})
    return float(res.x), float(res.fun)


def minimize_scale(
    bundle: MatrixBundle, k: int = 0, s_init: float = 1.0, trace: bool = False
) -> OptimizationResult:
    """Minimize the k-th eigenvalue of a bundle over the scale s alone.

    Brackets a minimum by geometric expansion from ``s_init``, refines it by
    golden section, then checks three points on each side; if one of them is
    lower the search restarts from it.
    """
    if not 0 <= k < bundle.size:
        raise DomainError(f"k={k} out of range for basis size {bundle.size}")
    if not s_init > 0:
        raise DomainError(f"s_init must be positive, got {s_init!r}")
    counter, log = [0], ([] if trace else None)
    f = _scale_objective(bundle, k, counter, log)
    s0 = min(max(s_init, S_MIN), S_MAX)
    converged = False
    for _ in range(4):
        s_best, f_best = _golden(f, _bracket_scale(f, s0))
        probes = [s_best * math.exp(sign * h) for h in (1e-3, 1e-2, 1e-1) for sign in (-1, 1)]
        lower = [(f(s), s) for s in probes if S_MIN <= s <= S_MAX]
        value, s = min(lower, default=(math.inf, None))
        if not value < f_best:
            converged = True
            break
        s0 = s
    return OptimizationResult(
        (bundle.power, bundle.exponent_shift, s_best), f_best, counter[0], log or [], converged, k
    )


# --- full (p, t, s) -----------------------------------------------------------


class _Objective:
    """k-th eigenvalue as a function of transformed coordinates, with bookkeeping."""

    def __init__(self, potential, channel, n, k, trace):
        self.potential, self.channel, self.n, self.k = potential, channel, n, k
        self.t_min = minimum_t(potential)
        self.evaluations = 0
        self.trace = [] if trace else None
        self.best = (math.inf, None)
        self._bundle = None

    def params(self, x):
        return (math.exp(x[0]), self.t_min + math.exp(x[1]), math.exp(x[2]))

    def coords(self, params):
        p, t, s = params
        return np.array([math.log(p), math.log(t - self.t_min), math.log(s)])

    def bundle(self, p, t):
        b = self._bundle
        if b is None or b.power != p or b.exponent_shift != t:
            b = build_bundle(self.potential, BasisSpec(self.n, p, t), self.channel)
            self._bundle = b
        return b

    def _record(self, params, v):
        if self.trace is not None:
            self.trace.append((params, v))
        if v < self.best[0]:
            self.best = (v, params)

    def value(self, params):
        p, t, s = params
        self.evaluations += 1
        if t - self.t_min > T_CEILING or not (S_MIN <= s <= S_MAX) or not 1e-3 < p < 1e3:
            v = math.inf
        else:
            try:
                v = float(self.bundle(p, t).eigenvalues(s)[self.k])
            except (NumericalError, ArithmeticError, ValueError):
                v = math.inf
        if not math.isfinite(v):
            v = math.inf
        self._record(params, v)
        return v

    def scale_search(self, p, t, s):
        """minimize_scale at fixed (p, t); failures are ignored."""
        try:
            res = minimize_scale(self.bundle(p, t), self.k, s, trace=self.trace is not None)
        except (VarboundError, ArithmeticError, ValueError):
            return math.inf
        self.evaluations += res.evaluations
        if self.trace is not None:
            self.trace.extend(res.trace)
        if res.best_value < self.best[0]:
            self.best = (res.best_value, res.best_params)
        return res.best_value

    def __call__(self, x):
        return self.value(self.params(x))


def _nelder_mead(obj, x0):
    simplex = x0 + np.vstack([np.zeros(3), SIMPLEX_STEP * np.eye(3)])
    return minimize(
        obj,
        x0,
        method="Nelder-Mead",
        options={
            "initial_simplex": simplex,
            "xatol": XATOL,
            "fatol": FATOL,
            "maxfev": MAX_EVALS,
            "adaptive": False,
        },
    )


def minimize_full(
    potential: Potential,
    channel: Channel = Channel(),
    n: int = 1,
    k: int = 0,
    init: tuple[float, float, float] | None = None,
    trace: bool = False,
    survey: bool | None = None,
) -> OptimizationResult:
    """Minimize the k-th variational eigenvalue over (p, t, s).

    Steps: a scale-only search at the initial (p, t); optionally a coarse
    survey of (p, t) on SURVEY_P x (t_min + SURVEY_DT), each point with its
    own scale search; Nelder-Mead from the best point so far in the
    transformed coordinates, restarted once from the best vertex; a final
    scale-only polish.  The survey is on by default only when ``init`` is not
    given.  The reported point is the best one evaluated, so the result never
    exceeds the initial value.
    """
    if not 0 <= k < n:
        raise DomainError(f"k={k} out of range for basis size {n}")
    if survey is None:
        survey = init is None
    if init is None:
        init = suggest_initial(potential, channel)
    p, t, s = (float(v) for v in init)
    BasisSpec(n, p, t, s).check(potential)

    obj = _Objective(potential, channel, n, k, trace)
    obj.value((p, t, s))
    obj.scale_search(p, t, s)
    if survey:
        for sp in SURVEY_P:
            for dt in SURVEY_DT:
                obj.scale_search(sp, obj.t_min + dt, s)
    if not math.isfinite(obj.best[0]):
        raise NumericalError(f"the initial point {tuple(init)} cannot be evaluated")

    converged = True
    for _ in range(2):
        res = _nelder_mead(obj, obj.coords(obj.best[1]))
        converged = bool(res.success)

    bp, bt, bs = obj.best[1]
    obj.scale_search(bp, bt, bs)
    value, params = obj.best
    return OptimizationResult(
        tuple(float(v) for v in params), value, obj.evaluations, obj.trace or [], converged, k
    )


def suggest_initial(potential: Potential, channel: Channel = Channel()) -> tuple[float, float, float]:
    """Starting (p, t, s) for minimize_full.

    When the strongest singularity of the effective potential is r^-2, with
    total strength lam (explicit term divided by the kinetic factor, plus the
    centrifugal constant), t = 1 + |1 - sqrt(1 + 4 lam)| matches the exact
    small-r behavior.  Otherwise t sits one unit above its lower limit.
    """
    t_min = minimum_t(potential)
    if potential.min_exponent() < -2:
        return (2.0, t_min + 1.0, 1.0)
    lam = channel.centrifugal + potential.coefficient(-2.0) / potential.kinetic_factor
    if lam != 0 and 1 + 4 * lam >= 0:
        return (2.0, 1.0 + abs(1.0 - math.sqrt(1.0 + 4.0 * lam)), 1.0)
    return (2.0, max(1.0, t_min + 1.0), 1.0)
