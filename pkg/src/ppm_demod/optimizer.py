"""Numerical choice of the nulling residue and PSA gain for the CPN receiver."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .analytic import policy_error_grid
from .core import DetectorModel, ModulationConfig, NullingMode, NullingPolicy

GRID_POINTS = 32
MAX_REFINE_EVALS = 1000
PARAM_TOL = 1e-4
DEFAULT_GAIN_MAX = 10.0
_LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class OptimizationResult:
    n0_star: float
    gain_star: float
    p_error_star: float
    evaluations: int
    converged: bool
    mode: NullingMode = NullingMode.TYPE1

    @property
    def policy(self) -> NullingPolicy:
        if self.n0_star == 0.0 and self.gain_star == 1.0:
            return NullingPolicy.baseline()
        if self.mode is NullingMode.TYPE1:
            return NullingPolicy.type1(self.n0_star)
        return NullingPolicy.type2(self.n0_star, self.gain_star)


def default_n0_max(N: float) -> float:
    return 4.0 * N + 1.0


def _log_axis(upper: float, points: int) -> np.ndarray:
    """0 followed by ``points - 1`` geometrically spaced values up to ``upper``."""
    if upper <= 0.0:
        return np.zeros(1)
    lower = min(1e-6, upper / 10.0)
    return np.concatenate(([0.0], np.geomspace(lower, upper, points - 1)))


def _neighbour_step(axis: np.ndarray, idx: int) -> float:
    if axis.size == 1:
        return 0.0
    lo = axis[max(idx - 1, 0)]
    hi = axis[min(idx + 1, axis.size - 1)]
    return max((hi - lo) / 2.0, PARAM_TOL)


def optimize_policy(
    config: ModulationConfig,
    det: DetectorModel,
    mode,
    *,
    n0_max: Optional[float] = None,
    gain_max: float = DEFAULT_GAIN_MAX,
    grid_points: int = GRID_POINTS,
) -> OptimizationResult:
    """Minimize the CPN symbol error over n0 (type 1) or (n0, gain) (type 2).

    A coarse grid (logarithmic in n0 and in gain - 1, with the end points 0
    and 1 included) picks the starting point for a bounded Nelder-Mead run on
    log(P_e). The baseline policy is always a candidate, so the result is
    never worse than exact nulling.
    """
    mode = NullingMode(mode)
    if mode is NullingMode.BASELINE:
        raise ValueError("baseline nulling has nothing to optimize")
    if n0_max is None:
        n0_max = default_n0_max(config.N)
    if mode is NullingMode.TYPE1:
        gain_max = 1.0

    def error(n0, gain):
        return policy_error_grid(config, det, n0, gain)

    baseline = float(error(0.0, 1.0))
    candidates = [(baseline, 0.0, 1.0)]
    evaluations = 1
    converged = True

    if mode is NullingMode.TYPE2 and gain_max > 1.0:
        # nested search space: the type 1 optimum seeds the type 2 candidates
        inner = optimize_policy(config, det, NullingMode.TYPE1, n0_max=n0_max, grid_points=grid_points)
        candidates.append((inner.p_error_star, inner.n0_star, inner.gain_star))
        evaluations += inner.evaluations
        converged = inner.converged

    n0_axis = _log_axis(n0_max, grid_points)
    gain_axis = 1.0 + _log_axis(gain_max - 1.0, grid_points)
    surface = error(n0_axis[:, None], gain_axis[None, :])
    evaluations += surface.size
    i, j = np.unravel_index(int(np.argmin(surface)), surface.shape)
    candidates.append((float(surface[i, j]), float(n0_axis[i]), float(gain_axis[j])))

    free = [(0.0, n0_max)] if n0_max > 0.0 else []
    start = [n0_axis[i]] if free else []
    steps = [_neighbour_step(n0_axis, i)] if free else []
    if gain_max > 1.0:
        free.append((1.0, gain_max))
        start.append(gain_axis[j])
        steps.append(_neighbour_step(gain_axis, j))

    if free:
        def unpack(x):
            n0 = x[0] if n0_max > 0.0 else 0.0
            gain = x[-1] if gain_max > 1.0 else 1.0
            return n0, gain

        def objective(x):
            n0, gain = unpack(np.clip(x, [b[0] for b in free], [b[1] for b in free]))
            return math.log(max(float(error(n0, gain)), _LOG_FLOOR))

        x0 = np.array(start)
        simplex = [x0]
        for k, step in enumerate(steps):
            vertex = x0.copy()
            lo, hi = free[k]
            vertex[k] = x0[k] + step if x0[k] + step <= hi else x0[k] - step
            simplex.append(np.clip(vertex, lo, hi))
        res = minimize(
            objective,
            x0,
            method="Nelder-Mead",
            bounds=free,
            options={
                "xatol": PARAM_TOL,
                "fatol": 1e-10,
                "maxfev": MAX_REFINE_EVALS,
                "initial_simplex": np.array(simplex),
            },
        )
        evaluations += res.nfev
        converged = converged and bool(res.success)
        n0, gain = unpack(np.clip(res.x, [b[0] for b in free], [b[1] for b in free]))
        candidates.append((float(error(n0, gain)), float(n0), float(gain)))
        evaluations += 1

    # ties resolve towards the earliest (simplest) candidate
    p_star, n0_star, gain_star = min(candidates, key=lambda c: c[0])
    return OptimizationResult(
        n0_star=n0_star,
        gain_star=gain_star,
        p_error_star=p_star,
        evaluations=evaluations,
        converged=converged,
        mode=mode,
    )
