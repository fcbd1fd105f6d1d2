"""Seeded simulations of non-local alignment and tracking.

Every objective evaluation is one integration period ``T``: the simulator
computes both observers' bases at the current time, draws Poisson counts for
the (h_a, h_b) and (h_a, v_b) detector pairs plus both singles rates, and
hands the (h_a, h_b) count to the optimizer.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .hardware import (
    ActuatorSpec,
    DriftModel,
    DriftProcess,
    Static,
    basis_vector,
)
from .optimizer import NelderMeadOptions, minimize, track
from .photon_pair import CoincidenceModel, TwoPhotonState, coincidence_probability_fast
from .polarization import PolarizationTransform, StokesVector, rotation_matrix

POLES = {
    "plus-s1": StokesVector(1.0, 0.0, 0.0),
    "minus-s1": StokesVector(-1.0, 0.0, 0.0),
    "plus-s2": StokesVector(0.0, 1.0, 0.0),
    "minus-s2": StokesVector(0.0, -1.0, 0.0),
    "plus-s3": StokesVector(0.0, 0.0, 1.0),
    "minus-s3": StokesVector(0.0, 0.0, -1.0),
}

ER_WINDOW = 5


@dataclass(frozen=True)
class AlignmentScenario:
    """Everything needed to reproduce one alignment or tracking run.

    Exactly one of ``bob_basis`` (a fixed target) and ``bob_drift`` (a
    time-varying channel in front of Bob's PBS) must be given.
    """

    bob_basis: Optional[StokesVector] = None
    bob_drift: Optional[DriftModel] = None
    state: TwoPhotonState = TwoPhotonState()
    model: CoincidenceModel = CoincidenceModel()
    alice_actuator: ActuatorSpec = ActuatorSpec.uniform(3)
    alice_channel: DriftModel = Static(PolarizationTransform.identity())
    alice_pbs: StokesVector = StokesVector(1.0, 0.0, 0.0)
    options: Optional[NelderMeadOptions] = None
    seed: int = 0
    evaluations: int = 200
    x0: Optional[tuple] = None
    noiseless: bool = False

    def __post_init__(self):
        if (self.bob_basis is None) == (self.bob_drift is None):
            raise ValueError("give exactly one of bob_basis and bob_drift")
        if self.evaluations < 1:
            raise ValueError("evaluation budget must be positive")
        if self.x0 is not None and len(self.x0) != self.alice_actuator.n_stages:
            raise ValueError("x0 length must match the number of actuator stages")

    def resolved_options(self) -> NelderMeadOptions:
        opts = self.options or NelderMeadOptions.for_actuator(self.alice_actuator)
        return replace(opts, max_evaluations=self.evaluations)

    def start(self) -> np.ndarray:
        if self.x0 is not None:
            return np.asarray(self.x0, dtype=float)
        return np.array([vpi / 2.0 for _, vpi in self.alice_actuator.stages])


@dataclass
class RunTrace:
    """Per-evaluation log of one run, plus its final state."""

    T: float
    eval_index: np.ndarray
    sim_time: np.ndarray
    voltages: np.ndarray
    c_hh: np.ndarray
    c_hv: np.ndarray
    singles_a: np.ndarray
    singles_b: np.ndarray
    theta_ab: np.ndarray
    best_voltages: np.ndarray
    final_theta_error: float
    reinflations: list = field(default_factory=list)

    def __len__(self):
        return len(self.eval_index)

    def trailing_extinction(self, width: int = ER_WINDOW) -> np.ndarray:
        """Extinction ratio over the ``width`` evaluations ending at each index.

        Entries before the first full window are NaN.
        """
        return _rolling_er(self.c_hh, self.c_hv, width)

    def first_reach(self, threshold: float, width: int = ER_WINDOW) -> Optional[int]:
        """Evaluation count at which the trailing ER first reaches ``threshold``."""
        er = self.trailing_extinction(width)
        hits = np.nonzero(er >= threshold)[0]
        return int(hits[0]) + 1 if hits.size else None


def _rolling_er(c_hh, c_hv, width):
    out = np.full(len(c_hh), np.nan)
    if len(c_hh) < width:
        return out
    kernel = np.ones(width)
    hh = np.convolve(np.asarray(c_hh, float), kernel, mode="valid")
    hv = np.convolve(np.asarray(c_hv, float), kernel, mode="valid")
    with np.errstate(divide="ignore", invalid="ignore"):
        er = np.where(hv > 0, 1.0 - hh / hv, 0.0)
    out[width - 1 :] = np.clip(er, 0.0, 1.0)
    return out


def extinction_ratio(trace: RunTrace, window: slice = slice(-ER_WINDOW, None)) -> float:
    """``1 - mean(C_hh) / mean(C_hv)`` over ``window``, clamped to [0, 1]."""
    hh = np.asarray(trace.c_hh[window], dtype=float)
    hv = np.asarray(trace.c_hv[window], dtype=float)
    if hh.size == 0:
        raise ValueError("extinction ratio window is empty")
    mean_hv = hv.mean()
    if mean_hv <= 0:
        return 0.0
    return float(min(max(1.0 - hh.mean() / mean_hv, 0.0), 1.0))


def sample_uniform_basis(rng: np.random.Generator) -> StokesVector:
    """Uniformly distributed point on the Poincare sphere."""
    while True:
        v = rng.normal(size=3)
        norm = float(np.linalg.norm(v))
        if norm > 1e-12:
            return StokesVector.from_array(v / norm)


def _static_rotation(drift: DriftModel):
    if isinstance(drift, Static):
        return rotation_matrix(drift.u)
    return None


class _Simulator:
    """Objective closure shared by alignment and tracking runs."""

    def __init__(self, scenario: AlignmentScenario):
        sc = scenario
        self.sc = sc
        self.spec = sc.alice_actuator
        self.T = sc.model.T
        self.rng = np.random.default_rng([sc.seed, 0])
        self.gamma = sc.state.gamma
        self.c = sc.state.crystal_axis.as_array()
        self.pbs = tuple(sc.alice_pbs.as_array())
        self.alice_rot = _static_rotation(sc.alice_channel)
        self.alice_drift = None if self.alice_rot is not None else DriftProcess(sc.alice_channel, np.random.default_rng([sc.seed, 1]))
        if sc.bob_basis is not None:
            self._bob_fixed = sc.bob_basis.as_array()
            self.bob_drift = None
        else:
            self._bob_fixed = None
            self.bob_drift = DriftProcess(sc.bob_drift, np.random.default_rng([sc.seed, 2]))
        m = sc.model
        self.scale_p = 4.0 * m.r_p * m.T
        self.mean_a = m.r_a * m.T
        self.rows = []

    def alice(self, v, t):
        if self.alice_rot is not None:
            return basis_vector(self.spec, v, self.alice_rot, self.pbs)
        return basis_vector(self.spec, v, rotation_matrix(self.alice_drift.at(t)), self.pbs)

    def bob(self, t):
        if self._bob_fixed is not None:
            return self._bob_fixed
        return self.bob_drift.basis(t).as_array()

    def __call__(self, v) -> float:
        k = len(self.rows)
        t = k * self.T
        a = self.alice(v, t)
        b = self.bob(t)
        p_hh = coincidence_probability_fast(a, b, self.gamma, self.c, False)
        p_hv = coincidence_probability_fast(a, b, self.gamma, self.c, True)
        mean_hh = self.scale_p * p_hh + self.mean_a
        mean_hv = self.scale_p * p_hv + self.mean_a
        rng = self.rng
        if self.sc.noiseless:
            c_hh, c_hv = mean_hh, mean_hv
        else:
            c_hh, c_hv = float(rng.poisson(mean_hh)), float(rng.poisson(mean_hv))
        m = self.sc.model
        s_a = int(rng.poisson(m.r_singles_a * m.T))
        s_b = int(rng.poisson(m.r_singles_b * m.T))
        dot = min(1.0, max(-1.0, float(a @ b)))
        self.rows.append((k, t, *v, c_hh, c_hv, s_a, s_b, math.acos(dot)))
        return c_hh

    def finish(self, best, opt_trace) -> RunTrace:
        n = self.spec.n_stages
        arr = np.array(self.rows, dtype=float).reshape(-1, 7 + n)
        t_last = (len(self.rows) - 1) * self.T
        a = self.alice(best, t_last)
        b = self.bob(t_last)
        err = math.acos(min(1.0, max(-1.0, float(a @ b))))
        return RunTrace(
            T=self.T,
            eval_index=arr[:, 0].astype(int),
            sim_time=arr[:, 1],
            voltages=arr[:, 2 : 2 + n],
            c_hh=arr[:, 2 + n],
            c_hv=arr[:, 3 + n],
            singles_a=arr[:, 4 + n].astype(int),
            singles_b=arr[:, 5 + n].astype(int),
            theta_ab=arr[:, 6 + n],
            best_voltages=np.asarray(best, dtype=float),
            final_theta_error=err,
            reinflations=list(opt_trace.reinflations),
        )


def run_alignment(scenario: AlignmentScenario) -> RunTrace:
    """Align Alice's basis to Bob's by minimizing (h_a, h_b) coincidences."""
    sim = _Simulator(scenario)
    best, opt_trace = minimize(sim, scenario.start(), scenario.resolved_options(), period=sim.T)
    return sim.finish(best, opt_trace)


def run_tracking(scenario: AlignmentScenario) -> RunTrace:
    """Keep Alice aligned to a drifting Bob for the whole evaluation budget."""
    sim = _Simulator(scenario)
    best, opt_trace = track(sim, scenario.start(), scenario.resolved_options(), period=sim.T)
    return sim.finish(best, opt_trace)


# -- sweeps --------------------------------------------------------------------


@dataclass
class SweepResult:
    """Mean final alignment error per grid cell.

    ``errors`` holds the per-target final errors (radians) with shape
    ``(n_cells, targets_per_point)``; targets are shared across cells so
    cells can be compared pairwise.
    """

    coord_names: tuple
    coords: list
    errors: np.ndarray
    contours: dict = field(default_factory=dict)

    @property
    def mean(self) -> np.ndarray:
        return self.errors.mean(axis=1)

    @property
    def std(self) -> np.ndarray:
        return self.errors.std(axis=1, ddof=1) if self.errors.shape[1] > 1 else np.zeros(len(self.coords))

    @property
    def n_runs(self) -> int:
        return int(self.errors.shape[1])

    def rows(self):
        for coord, mean, std in zip(self.coords, self.mean, self.std):
            yield (*coord, math.degrees(mean), math.degrees(std), self.n_runs)


def sweep_targets(root_seed: int, count: int) -> list:
    """Uniform targets derived from the root seed by stable index."""
    return [sample_uniform_basis(np.random.default_rng([root_seed, 7, i])) for i in range(count)]


def _final_error(scenario: AlignmentScenario) -> float:
    return run_alignment(scenario).final_theta_error


def _run_cells(scenarios, workers: int) -> list:
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_final_error, scenarios, chunksize=8))
    return [_final_error(s) for s in scenarios]


def _grid_sweep(base: AlignmentScenario, models: list, targets_per_point: int, workers: int) -> np.ndarray:
    targets = sweep_targets(base.seed, targets_per_point)
    scenarios = []
    for cell, model in enumerate(models):
        for i, target in enumerate(targets):
            seed = int(np.random.SeedSequence([base.seed, cell, i]).generate_state(1)[0])
            scenarios.append(replace(base, model=model, bob_basis=target, bob_drift=None, seed=seed))
    errors = _run_cells(scenarios, workers)
    return np.array(errors).reshape(len(models), targets_per_point)


def sweep_integration_time(
    base_scenario: AlignmentScenario,
    T_grid,
    targets_per_point: int = 100,
    workers: int = 1,
) -> SweepResult:
    """Final alignment error versus integration period at fixed rates."""
    T_grid = [float(T) for T in T_grid]
    if not T_grid:
        raise ValueError("T_grid must not be empty")
    models = [replace(base_scenario.model, T=T) for T in T_grid]
    errors = _grid_sweep(base_scenario, models, targets_per_point, workers)
    return SweepResult(("T_s",), [(T,) for T in T_grid], errors)


def sweep_rate_grid(
    base_scenario: AlignmentScenario,
    rpT_grid,
    raT_grid,
    targets_per_point: int = 100,
    workers: int = 1,
) -> SweepResult:
    """Final alignment error over mean pair counts ``r_p T`` and accidentals ``r_a T``.

    Counts are realised by fixing ``T`` at the base model's value and
    scaling the rates. Cells are ordered with ``r_a T`` varying fastest.
    """
    rpT_grid = [float(x) for x in rpT_grid]
    raT_grid = [float(x) for x in raT_grid]
    if not rpT_grid or not raT_grid:
        raise ValueError("rate grids must not be empty")
    T = base_scenario.model.T
    coords, models = [], []
    for rpT in rpT_grid:
        for raT in raT_grid:
            coords.append((rpT, raT))
            models.append(replace(base_scenario.model, r_p=rpT / T, r_a=raT / T))
    errors = _grid_sweep(base_scenario, models, targets_per_point, workers)
    contours = constant_ratio_contours(rpT_grid, raT_grid)
    return SweepResult(("rpT", "raT"), coords, errors, contours)


def constant_ratio_contours(rpT_grid, raT_grid, ratios=None) -> dict:
    """Lines of constant ``r_p / r_a`` across the grid, as (raT, rpT) point lists."""
    lo, hi = min(raT_grid), max(raT_grid)
    if ratios is None:
        ratios = sorted({round(rp / ra, 6) for rp in rpT_grid for ra in raT_grid if ra > 0})
    ra = np.geomspace(lo, hi, 16) if lo > 0 else np.linspace(lo, hi, 16)
    return {float(r): [(float(x), float(r * x)) for x in ra] for r in ratios}
