"""Bounded Nelder-Mead simplex search for noisy, integer-valued objectives.

Two things differ from a textbook implementation:

* Candidate points are clamped into the box bounds before evaluation.
* Cached vertex values go stale under counting noise (a lucky low draw would
  otherwise pin the simplex), so the best vertex is re-measured every
  ``revaluation_interval`` evaluations.

:func:`track` keeps the search running indefinitely against a time-varying
objective and re-inflates the simplex whenever it collapses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

Objective = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class NelderMeadOptions:
    """Coefficients and stopping rules; lengths are in objective units (volts)."""

    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    initial_scale: float = 0.25
    max_evaluations: int = 200
    revaluation_interval: int = 10
    convergence_window: int = 10
    convergence_diameter: float = 0.01
    collapse_diameter: float = 0.01
    lower: Optional[tuple] = None
    upper: Optional[tuple] = None
    bounds_mode: str = "clamp"

    def __post_init__(self):
        if not self.reflection > 0:
            raise ValueError("reflection coefficient must be positive")
        if not self.expansion > self.reflection:
            raise ValueError("expansion coefficient must exceed reflection")
        if not 0 < self.contraction < 1:
            raise ValueError("contraction coefficient must lie in (0, 1)")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink coefficient must lie in (0, 1)")
        if not self.initial_scale > 0:
            raise ValueError("initial_scale must be positive")
        if self.max_evaluations < 1:
            raise ValueError("max_evaluations must be at least 1")
        if self.revaluation_interval < 0:
            raise ValueError("revaluation_interval must be >= 0 (0 disables)")
        if self.bounds_mode != "clamp":
            raise ValueError(f"unsupported bounds_mode {self.bounds_mode!r}")
        if (self.lower is None) != (self.upper is None):
            raise ValueError("give both lower and upper bounds, or neither")
        if self.lower is not None:
            object.__setattr__(self, "lower", tuple(map(float, self.lower)))
            object.__setattr__(self, "upper", tuple(map(float, self.upper)))
            if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
                raise ValueError("each lower bound must be below its upper bound")

    @classmethod
    def for_actuator(cls, spec, **overrides) -> "NelderMeadOptions":
        """Defaults scaled to an actuator's half-wave voltage and limits."""
        v_pi = spec.v_pi
        kw = dict(
            initial_scale=0.25 * v_pi,
            convergence_diameter=0.01 * v_pi,
            collapse_diameter=0.01 * v_pi,
            lower=tuple(spec.lower),
            upper=tuple(spec.upper),
        )
        kw.update(overrides)
        return cls(**kw)

    def clamp(self, x: np.ndarray) -> np.ndarray:
        if self.lower is None:
            return x
        return np.minimum(np.maximum(x, self.lower), self.upper)


@dataclass(frozen=True)
class EvaluationRecord:
    index: int
    voltages: tuple
    objective_value: float
    wall_time: float
    kind: str = "step"


@dataclass
class Simplex:
    """``n + 1`` vertices with cached values and the age of each value."""

    vertices: np.ndarray
    values: np.ndarray
    age: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.age = np.asarray(self.age, dtype=int)
        n = self.vertices.shape[1]
        if self.vertices.shape != (n + 1, n):
            raise ValueError(f"simplex needs n+1 vertices of dimension n, got {self.vertices.shape}")

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def best(self) -> int:
        return int(np.argmin(self.values))

    def diameter(self) -> float:
        diffs = self.vertices[:, None, :] - self.vertices[None, :, :]
        return float(np.sqrt((diffs**2).sum(axis=-1)).max())

    def copy(self) -> "Simplex":
        return Simplex(self.vertices.copy(), self.values.copy(), self.age.copy())


@dataclass
class OptimizationTrace:
    records: list = field(default_factory=list)
    reinflations: list = field(default_factory=list)
    refreshes: list = field(default_factory=list)
    converged: bool = False

    @property
    def values(self) -> np.ndarray:
        return np.array([r.objective_value for r in self.records])


class BudgetExhausted(RuntimeError):
    """Raised by :class:`Evaluator` when ``max_evaluations`` is used up."""


class Evaluator:
    """Wraps an objective: clamps to bounds, counts and records evaluations.

    Each evaluation consumes one integration ``period`` of simulated time;
    record ``k`` carries ``wall_time = k * period``.
    """

    def __init__(self, objective: Objective, options: NelderMeadOptions, period: float = 1.0, trace=None):
        self.objective = objective
        self.options = options
        self.period = period
        self.trace = trace if trace is not None else OptimizationTrace()
        self.budgeted = False

    @property
    def count(self) -> int:
        return len(self.trace.records)

    def __call__(self, x, kind: str = "step") -> float:
        x = self.options.clamp(np.asarray(x, dtype=float))
        index = self.count
        if self.budgeted and index >= self.options.max_evaluations:
            raise BudgetExhausted(index)
        value = float(self.objective(x))
        self.trace.records.append(EvaluationRecord(index, tuple(x.tolist()), value, index * self.period, kind))
        return value


def _as_evaluator(objective, options) -> Evaluator:
    if isinstance(objective, Evaluator):
        return objective
    return Evaluator(objective, options)


def initial_simplex(x0, scale: float, objective=None, options: Optional[NelderMeadOptions] = None) -> Simplex:
    """Axis-aligned simplex ``x0, x0 + scale e_i`` clamped into bounds.

    Vertices pushed past an upper bound are mirrored to ``x0 - scale e_i``
    so that clamping never collapses a vertex onto ``x0``. Values are left
    as ``inf`` when no objective is given.
    """
    if not scale > 0:
        raise ValueError(f"simplex scale must be positive, got {scale}")
    options = options or NelderMeadOptions()
    x0 = options.clamp(np.asarray(x0, dtype=float))
    n = x0.size
    verts = [x0]
    for i in range(n):
        v = x0.copy()
        v[i] += scale
        if options.upper is not None and v[i] > options.upper[i]:
            v[i] = x0[i] - scale
        verts.append(options.clamp(v))
    verts = np.array(verts)
    if objective is None:
        values = np.full(n + 1, np.inf)
    else:
        ev = _as_evaluator(objective, options)
        values = np.array([ev(v, kind="init") for v in verts])
    # age counts evaluations since each value was taken
    age = np.arange(n, -1, -1) if objective is not None else np.zeros(n + 1, dtype=int)
    return Simplex(verts, values, age)


def step(simplex: Simplex, objective, options: Optional[NelderMeadOptions] = None) -> Simplex:
    """One Nelder-Mead iteration; returns the updated simplex (input untouched)."""
    options = options or NelderMeadOptions()
    ev = _as_evaluator(objective, options)
    s = simplex.copy()
    start = ev.count
    measured = {}  # vertex slot -> evaluation index of its new value

    def accept(i, x, fx):
        s.vertices[i] = x
        s.values[i] = fx
        measured[i] = ev.count - 1

    order = np.argsort(s.values, kind="stable")
    s.vertices, s.values, s.age = s.vertices[order], s.values[order], s.age[order]
    n = s.dim
    best_f, second_worst_f, worst_f = s.values[0], s.values[n - 1], s.values[n]
    worst_x = s.vertices[n].copy()
    centroid = s.vertices[:n].mean(axis=0)

    xr = options.clamp(centroid + options.reflection * (centroid - worst_x))
    fr = ev(xr)
    if fr < best_f:
        xe = options.clamp(centroid + options.expansion * (centroid - worst_x))
        fe = ev(xe)
        if fe < fr:
            accept(n, xe, fe)
        else:
            s.vertices[n], s.values[n] = xr, fr
            measured[n] = ev.count - 2
    elif fr < second_worst_f:
        accept(n, xr, fr)
    else:
        if fr < worst_f:
            xc = options.clamp(centroid + options.contraction * (xr - centroid))
            fc = ev(xc)
            contracted = fc <= fr
        else:
            xc = options.clamp(centroid + options.contraction * (worst_x - centroid))
            fc = ev(xc)
            contracted = fc < worst_f
        if contracted:
            accept(n, xc, fc)
        else:
            x_best = s.vertices[0].copy()
            for i in range(1, n + 1):
                xs = options.clamp(x_best + options.shrink * (s.vertices[i] - x_best))
                accept(i, xs, ev(xs, kind="shrink"))

    last = ev.count - 1
    s.age += ev.count - start
    for i, idx in measured.items():
        s.age[i] = last - idx
    return s


def refresh_best(simplex: Simplex, objective, options: Optional[NelderMeadOptions] = None) -> Simplex:
    """Re-measure the best vertex and replace its cached value."""
    options = options or NelderMeadOptions()
    ev = _as_evaluator(objective, options)
    s = simplex.copy()
    i = s.best
    s.values[i] = ev(s.vertices[i], kind="refresh")
    s.age += 1
    s.age[i] = 0
    ev.trace.refreshes.append(ev.count - 1)
    return s


def _value_spread_ok(s: Simplex) -> bool:
    best = float(s.values.min())
    spread = float(s.values.max() - best)
    # Poisson-scale tolerance; the floor keeps noiseless objectives convergent
    return spread < max(2.0 * math.sqrt(max(best, 0.0)), 1e-12 * max(1.0, abs(best)))


class _Loop:
    """Shared driver for :func:`minimize` and :func:`track`."""

    def __init__(self, objective, x0, options: NelderMeadOptions, period: float):
        self.options = options
        self.ev = Evaluator(objective, options, period)
        self.ev.budgeted = True
        try:
            self.simplex = initial_simplex(x0, options.initial_scale, self.ev, options)
        except BudgetExhausted:
            # budget smaller than the simplex: keep what was measured
            s = initial_simplex(x0, options.initial_scale, None, options)
            measured = self.ev.trace.values
            s.values[: measured.size] = measured
            self.simplex = s
        self.last_refresh = self.ev.count

    @property
    def done(self) -> bool:
        return self.ev.count >= self.options.max_evaluations

    def advance(self) -> bool:
        """One refresh or simplex step; False once the budget ran out mid-step."""
        try:
            self._advance()
        except BudgetExhausted:
            return False
        return True

    def _advance(self) -> None:
        opts = self.options
        if opts.revaluation_interval and self.ev.count - self.last_refresh >= opts.revaluation_interval:
            self.simplex = refresh_best(self.simplex, self.ev, opts)
            self.last_refresh = self.ev.count
            return
        self.simplex = step(self.simplex, self.ev, opts)

    def reinflate(self) -> None:
        s = self.simplex
        i = s.best
        x_best, f_best = s.vertices[i].copy(), s.values[i]
        self.ev.trace.reinflations.append(self.ev.count)
        fresh = initial_simplex(x_best, self.options.initial_scale / 4.0, None, self.options)
        values = [f_best] + [self.ev(v, kind="reinflate") for v in fresh.vertices[1:]]
        n = s.dim
        age = np.concatenate([[s.age[i] + n], np.arange(n - 1, -1, -1)])
        self.simplex = Simplex(fresh.vertices, values, age)


def minimize(objective: Objective, x0, options: Optional[NelderMeadOptions] = None, period: float = 1.0):
    """Minimize ``objective`` from ``x0``.

    Stops after ``max_evaluations`` or once the simplex diameter is below
    ``convergence_diameter`` and the value spread is within Poisson scale,
    both holding for ``convergence_window`` consecutive evaluations.

    Returns
    -------
    best : np.ndarray
        vertex with the lowest cached value
    trace : OptimizationTrace
        every evaluation, including refreshes
    """
    options = options or NelderMeadOptions()
    loop = _Loop(objective, x0, options, period)
    settled_since = None
    while not loop.done:
        if not loop.advance():
            break
        s = loop.simplex
        if s.diameter() < options.convergence_diameter and _value_spread_ok(s):
            if settled_since is None:
                settled_since = loop.ev.count
            elif loop.ev.count - settled_since >= options.convergence_window:
                loop.ev.trace.converged = True
                break
        else:
            settled_since = None
    return loop.simplex.vertices[loop.simplex.best].copy(), loop.ev.trace


def track(objective: Objective, x0, options: Optional[NelderMeadOptions] = None, period: float = 1.0):
    """Run the simplex continuously against a time-varying objective.

    Never stops on convergence; runs for ``max_evaluations``. A collapsed
    simplex (diameter below ``collapse_diameter``) is re-inflated around the
    best vertex at a quarter of ``initial_scale``.
    """
    options = options or NelderMeadOptions()
    loop = _Loop(objective, x0, options, period)
    while not loop.done:
        if not loop.advance():
            break
        if loop.simplex.diameter() < options.collapse_diameter and not loop.done:
            try:
                loop.reinflate()
            except BudgetExhausted:
                break
    return loop.simplex.vertices[loop.simplex.best].copy(), loop.ev.trace


def with_budget(options: NelderMeadOptions, max_evaluations: int) -> NelderMeadOptions:
    return replace(options, max_evaluations=max_evaluations)
