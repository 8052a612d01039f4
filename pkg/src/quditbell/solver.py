"""Numerical search for violations and threshold efficiencies.

Measurement vectors are parameterized by hyperspherical angles (``d - 1``
angles per unit vector in ``R^d``).  When the state is optimized too, its
Schmidt coefficients are the absolute values of another hyperspherical unit
vector, which covers the whole simplex of squared coefficients.

Local searches are derivative-free (Powell by default, Nelder-Mead on
request) and globalized by seeded random restarts.  Every reported value is
recomputed through :func:`quditbell.bell.evaluate` on the returned settings.

Threshold efficiencies are found in two stages.  A multistart search first
minimizes the threshold of a fixed table,

    eta(T) = -scaled(T) / fixed(T),

which is where ``fixed + scaled / eta`` changes sign.  Bisection on ``eta``
then refines the bracket, maximizing the modified expression at every
midpoint from the best basins of the first stage.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from . import constructions as cons
from .bell import BellExpression, DetectionFamily, build_ch, build_i4422, build_inn22, evaluate
from .quantum import (
    MeasurementSettings,
    SchmidtState,
    _table_arrays,
    correlation_table,
    schmidt_from_epsilon,
)

log = logging.getLogger(__name__)

__all__ = [
    "FamilySpec",
    "NoisePoint",
    "OptimizerConfig",
    "OptimumResult",
    "SweepPoint",
    "ThresholdResult",
    "epsilon_zero_threshold",
    "family_spec",
    "fixed_threshold",
    "is_monotone",
    "maximize_over_settings",
    "maximize_over_state_and_settings",
    "sweep_epsilon",
    "sweep_noise",
    "threshold_efficiency",
]

RATIO_CAP = 2.0
POOL_SPREAD = 0.05


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 64
    max_iterations: int = 20000
    x_tolerance: float = 1e-8
    f_tolerance: float = 1e-10
    seed: int = 0
    seed_with_paper_constructions: bool = True
    optimize_state: bool = False
    method: str = "Powell"
    bracket_width: float = 1e-4
    pool_size: int = 8

    def __post_init__(self) -> None:
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.x_tolerance <= 0 or self.f_tolerance <= 0 or self.bracket_width <= 0:
            raise ValueError("tolerances must be positive")
        if self.method not in ("Powell", "Nelder-Mead"):
            raise ValueError(f"unsupported local search {self.method!r}")
        if self.pool_size < 1:
            raise ValueError("pool_size must be at least 1")

    @classmethod
    def for_dim(cls, dim: int, **overrides) -> "OptimizerConfig":
        """Default restart budget: 64 up to qutrits, 256 beyond."""
        overrides.setdefault("restarts", 64 if dim <= 3 else 256)
        return cls(**overrides)

    def to_json(self) -> dict:
        return {
            "restarts": self.restarts,
            "maxIterations": self.max_iterations,
            "xTolerance": self.x_tolerance,
            "fTolerance": self.f_tolerance,
            "seed": self.seed,
            "seedWithPaperConstructions": self.seed_with_paper_constructions,
            "optimizeState": self.optimize_state,
            "method": self.method,
            "bracketWidth": self.bracket_width,
            "poolSize": self.pool_size,
        }


@dataclass(frozen=True, eq=False)
class OptimumResult:
    value: float
    settings_a: MeasurementSettings
    settings_b: MeasurementSettings
    state: SchmidtState
    start_index: int

    def __iter__(self):
        # allows ``value, (a, b) = maximize_over_settings(...)``
        yield self.value
        yield (self.settings_a, self.settings_b)


@dataclass(frozen=True, eq=False)
class ThresholdResult:
    """``eta is None`` means the family is not violated even at ``eta = 1``."""

    eta: float | None
    value_at_eta: float
    settings_a: MeasurementSettings | None
    settings_b: MeasurementSettings | None
    state: SchmidtState | None
    iterations: int
    bracket: tuple[float, float] = (0.0, 1.0)

    @property
    def found(self) -> bool:
        return self.eta is not None

    def to_json(self) -> dict:
        return {
            "eta": self.eta,
            "valueAtEta": self.value_at_eta,
            "iterations": self.iterations,
            "bracket": list(self.bracket),
            "state": None if self.state is None else self.state.to_json(),
            "settingsA": None if self.settings_a is None else self.settings_a.to_json(),
            "settingsB": None if self.settings_b is None else self.settings_b.to_json(),
        }


# -- parameterization -------------------------------------------------------


def _angles_to_vectors(theta: np.ndarray) -> np.ndarray:
    m = theta.shape[0]
    out = np.ones((m, theta.shape[1] + 1))
    out[:, :-1] = np.cos(theta)
    out[:, 1:] *= np.cumprod(np.sin(theta), axis=1)
    return out


def _vectors_to_angles(v: np.ndarray) -> np.ndarray:
    v = np.atleast_2d(np.asarray(v, dtype=float))
    d = v.shape[1]
    theta = np.empty((v.shape[0], d - 1))
    for i in range(d - 2):
        theta[:, i] = np.arctan2(np.linalg.norm(v[:, i + 1 :], axis=1), v[:, i])
    theta[:, d - 2] = np.arctan2(v[:, d - 1], v[:, d - 2])
    return theta


class _Problem:
    """Maps a flat parameter vector to (Schmidt coefficients, A, B)."""

    def __init__(self, dim: int, n_a: int, n_b: int, state: SchmidtState | None, noise: float):
        self.dim, self.n_a, self.n_b = dim, n_a, n_b
        self.state = state
        self.noise = state.noise if state is not None else noise
        self.n_state = 0 if state is not None else dim - 1
        self.size = self.n_state + (n_a + n_b) * (dim - 1)

    def unpack(self, x: np.ndarray):
        if self.state is None:
            lam = np.abs(_angles_to_vectors(x[None, : self.n_state])[0])
        else:
            lam = self.state.lam
        vecs = _angles_to_vectors(x[self.n_state :].reshape(-1, self.dim - 1))
        return lam, vecs[: self.n_a], vecs[self.n_a :]

    def pack(self, lam, a, b) -> np.ndarray:
        parts = []
        if self.state is None:
            parts.append(_vectors_to_angles(lam).ravel())
        parts.append(_vectors_to_angles(np.vstack([a, b])).ravel())
        return np.concatenate(parts)

    def random_point(self, rng: np.random.Generator) -> np.ndarray:
        vecs = rng.standard_normal((self.n_a + self.n_b, self.dim))
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        lam = None
        if self.state is None:
            lam = np.abs(rng.standard_normal(self.dim))
            lam /= np.linalg.norm(lam)
        return self.pack(lam, vecs[: self.n_a], vecs[self.n_a :])

    def arrays(self, x: np.ndarray):
        lam, a, b = self.unpack(x)
        return _table_arrays(lam, a, b, self.noise)

    def materialize(self, x: np.ndarray):
        lam, a, b = self.unpack(x)
        state = self.state
        if state is None:
            state = SchmidtState(lam / np.linalg.norm(lam), self.noise)
        return state, MeasurementSettings.normalized(a), MeasurementSettings.normalized(b)


def _linear(expr: BellExpression, arrays) -> float:
    joint, marg_a, marg_b = arrays
    return float(
        expr.constant
        + np.sum(expr.c_joint * joint)
        + expr.c_a @ marg_a
        + expr.c_b @ marg_b
    )


def _ratio(fixed: float, scaled: float) -> float:
    """Smallest efficiency at which ``fixed + scaled / eta`` is positive,
    continuously capped at ``RATIO_CAP`` (plus the deficit when ``fixed <= 0``)."""
    if -scaled < RATIO_CAP * fixed:
        return max(-scaled / fixed, 0.0)
    return RATIO_CAP + max(0.0, -fixed)


def _local_search(fun, x0: np.ndarray, cfg: OptimizerConfig, stop=None) -> tuple[float, np.ndarray]:
    """Minimize ``fun`` from ``x0``; never returns a point worse than ``x0``.

    ``stop(x)`` is checked once per iteration and ends the search early.
    """
    if cfg.method == "Powell":
        options = {"xtol": cfg.x_tolerance, "ftol": cfg.f_tolerance, "maxfev": cfg.max_iterations}
    else:
        options = {
            "xatol": cfg.x_tolerance,
            "fatol": cfg.f_tolerance,
            "maxfev": cfg.max_iterations,
            "adaptive": True,
        }
    f0 = fun(x0)
    callback = None
    if stop is not None:

        def callback(intermediate_result):
            if stop(intermediate_result.x):
                raise StopIteration

    res = minimize(fun, x0, method=cfg.method, options=options, callback=callback)
    if res.fun <= f0:
        return float(res.fun), np.asarray(res.x, dtype=float)
    return float(f0), x0


def _multistart(fun, starts: Sequence[np.ndarray], cfg: OptimizerConfig) -> list[tuple[float, int, np.ndarray]]:
    """Local search from each start; sorted by (objective, start index)."""
    found = []
    for index, x0 in enumerate(starts):
        f, x = _local_search(fun, x0, cfg)
        found.append((f, index, x))
    found.sort(key=lambda item: (item[0], item[1]))
    return found


def _starts(problem: _Problem, seeds: Iterable, cfg: OptimizerConfig) -> list[np.ndarray]:
    """Seed points first (in the given order), then ``cfg.restarts`` random points."""
    starts = []
    for seed in seeds:
        lam, a, b = seed
        if lam is None and problem.state is None:
            lam = np.full(problem.dim, problem.dim**-0.5)
        starts.append(problem.pack(lam, a, b))
    rng = np.random.default_rng(cfg.seed)
    starts.extend(problem.random_point(rng) for _ in range(cfg.restarts))
    return starts


def _as_seed(settings, state: SchmidtState | None = None):
    a, b = settings
    a = a.vectors if isinstance(a, MeasurementSettings) else np.asarray(a, dtype=float)
    b = b.vectors if isinstance(b, MeasurementSettings) else np.asarray(b, dtype=float)
    return (None if state is None else state.lam, a, b)


def _state_epsilon(state: SchmidtState | None, dim: int) -> float:
    if state is None:
        return 1.0 / math.sqrt(dim)
    return float(state.lam[-1])


def construction_seeds(expr: BellExpression, dim: int, epsilon: float) -> list[tuple]:
    """Closed-form settings matching ``expr`` (by its joint coefficients) and ``dim``."""
    seeds = []
    n_a, n_b = expr.n_a, expr.n_b
    eps = min(max(epsilon, 1e-9), 1.0)
    if n_a == n_b == dim and np.array_equal(expr.c_joint, build_inn22(dim).c_joint):
        for q0 in (cons.q0_for_epsilon(dim, eps), math.sqrt(0.9)):
            a, b = cons.asymmetric_settings(dim, q0)
            seeds.append((None, a.vectors, b.vectors))
    if dim == 2 and np.array_equal(expr.c_joint, build_ch().c_joint):
        for c in (cons.eberhard_maxent(), cons.eberhard_partial(min(eps, 0.5))):
            seeds.append((None, c.settings_a.vectors, c.settings_b.vectors))
    if dim == 4 and np.array_equal(expr.c_joint, build_i4422().c_joint):
        for c in (cons.i4422_maxent(), cons.i4422_small_epsilon(min(eps, 0.5))):
            seeds.append((None, c.settings_a.vectors, c.settings_b.vectors))
    return seeds


def _collect_seeds(expr, dim, state, cfg, seeds) -> list[tuple]:
    out = [_as_seed(s) if len(s) == 2 else s for s in seeds]
    if cfg.seed_with_paper_constructions:
        out.extend(construction_seeds(expr, dim, _state_epsilon(state, dim)))
    return out


# -- maximization -----------------------------------------------------------


def _maximize(expr, problem: _Problem, cfg: OptimizerConfig, seeds) -> OptimumResult:
    starts = _starts(problem, seeds, cfg)

    def objective(x):
        # shifted so the relative stopping rule acts like an absolute one near 0
        return 1.0 - _linear(expr, problem.arrays(x))

    found = _multistart(objective, starts, cfg)
    best = None
    for f, index, x in found[: max(cfg.pool_size, 1)]:
        state, a, b = problem.materialize(x)
        value = evaluate(expr, correlation_table(state, a, b))
        if best is None or value > best.value:
            best = OptimumResult(value, a, b, state, index)
    return best


def maximize_over_settings(
    expr: BellExpression,
    state: SchmidtState,
    cfg: OptimizerConfig | None = None,
    seeds: Sequence = (),
) -> OptimumResult:
    """Best value of ``expr`` over measurement vectors for a fixed state.

    ``seeds`` are extra ``(settings_a, settings_b)`` starting points; with
    ``cfg.seed_with_paper_constructions`` the matching closed-form settings
    are added as well.
    """
    dim = state.dim
    cfg = cfg or OptimizerConfig.for_dim(dim)
    problem = _Problem(dim, expr.n_a, expr.n_b, state, state.noise)
    return _maximize(expr, problem, cfg, _collect_seeds(expr, dim, state, cfg, seeds))


def maximize_over_state_and_settings(
    expr: BellExpression,
    dim: int,
    cfg: OptimizerConfig | None = None,
    noise: float = 0.0,
    seeds: Sequence = (),
) -> OptimumResult:
    """Like :func:`maximize_over_settings` but the Schmidt coefficients are free too."""
    if dim < 2:
        raise ValueError("dimension must be at least 2")
    cfg = cfg or OptimizerConfig.for_dim(dim, optimize_state=True)
    if not cfg.optimize_state:
        raise ValueError("maximize_over_state_and_settings needs cfg.optimize_state")
    problem = _Problem(dim, expr.n_a, expr.n_b, None, noise)
    return _maximize(expr, problem, cfg, _collect_seeds(expr, dim, None, cfg, seeds))


# -- thresholds -------------------------------------------------------------


def fixed_threshold(family: DetectionFamily, table) -> float:
    """Threshold efficiency of one correlation table (``inf`` if never violated)."""
    fixed, scaled = family.parts()
    f, s = evaluate(fixed, table), evaluate(scaled, table)
    if s > 0:
        raise ValueError("family value decreases with efficiency on this table")
    if f <= 0:
        return math.inf
    return -s / f


def _check_monotone(family: DetectionFamily, table) -> None:
    _, scaled = family.parts()
    if evaluate(scaled, table) > 1e-12:
        raise ValueError("family value is not nondecreasing in the efficiency for this table")


def _bisect_fixed(family, state, settings_a, settings_b, cfg) -> ThresholdResult:
    table = correlation_table(state, settings_a, settings_b)
    _check_monotone(family, table)
    value = lambda eta: evaluate(family.at(eta), table)  # noqa: E731
    if value(1.0) <= cfg.f_tolerance:
        return ThresholdResult(None, value(1.0), settings_a, settings_b, state, 0)
    lo, hi, steps = 0.0, 1.0, 0
    while hi - lo > cfg.bracket_width:
        mid = 0.5 * (lo + hi)
        # exact sign test: on a fixed table there is no search noise to absorb,
        # and a tolerance would shift the root when the value's slope is tiny
        if value(mid) > 0.0:
            hi = mid
        else:
            lo = mid
        steps += 1
    eta = 0.5 * (lo + hi)
    return ThresholdResult(eta, value(eta), settings_a, settings_b, state, steps, (lo, hi))


def threshold_efficiency(
    family: DetectionFamily,
    state: SchmidtState | None = None,
    dim: int | None = None,
    cfg: OptimizerConfig | None = None,
    settings: tuple[MeasurementSettings, MeasurementSettings] | None = None,
    seeds: Sequence = (),
    noise: float = 0.0,
) -> ThresholdResult:
    """Smallest efficiency at which the family is violated.

    With ``settings`` the table is fixed and only bisection runs.  Otherwise
    the measurements (and the state, when ``state`` is None) are optimized.
    """
    if state is not None:
        dim = state.dim
    if dim is None:
        raise ValueError("give either a state or a dimension")
    cfg = cfg or OptimizerConfig.for_dim(dim)
    if settings is not None:
        if state is None:
            raise ValueError("fixed settings need a fixed state")
        return _bisect_fixed(family, state, settings[0], settings[1], cfg)

    expr = family.expr
    problem = _Problem(dim, expr.n_a, expr.n_b, state, noise)
    fixed, scaled = family.parts()

    def ratio(x):
        arrays = problem.arrays(x)
        return _ratio(_linear(fixed, arrays), _linear(scaled, arrays))

    def value(x, eta):
        arrays = problem.arrays(x)
        return _linear(fixed, arrays) + _linear(scaled, arrays) / eta

    starts = _starts(problem, _collect_seeds(expr, dim, state, cfg, seeds), cfg)
    found = _multistart(ratio, starts, cfg)
    # basins far above the best one cannot cross the bracket midpoints
    best_ratio = found[0][0]
    pool = [x for r, _, x in found[: cfg.pool_size] if r <= best_ratio + POOL_SPREAD]
    incumbent = pool[0]

    def search(eta):
        """Maximize the value at ``eta`` from the pool; first violating point wins."""
        for x0 in pool:
            arrays = problem.arrays(x0)
            scale = max(abs(_linear(fixed, arrays)), abs(_linear(scaled, arrays)), 1e-300)
            violated = lambda z: value(z, eta) > cfg.f_tolerance  # noqa: E731
            _, x = _local_search(lambda z: 1.0 - value(z, eta) / scale, x0, cfg, stop=violated)
            if violated(x):
                return x
        return None

    lo, hi, steps = 0.0, 1.0, 0
    if value(incumbent, 1.0) <= cfg.f_tolerance:
        witness = search(1.0)
        if witness is None:
            state_out, a, b = problem.materialize(incumbent)
            v1 = evaluate(family.at(1.0), correlation_table(state_out, a, b))
            return ThresholdResult(None, v1, a, b, state_out, 0)
        incumbent = witness
        pool.insert(0, witness)

    while hi - lo > cfg.bracket_width:
        mid = 0.5 * (lo + hi)
        if value(incumbent, mid) > cfg.f_tolerance:
            hi = mid
        else:
            witness = search(mid)
            if witness is None:
                lo = mid
            else:
                hi = mid
                incumbent = witness
                pool.insert(0, witness)
                del pool[cfg.pool_size + 1 :]
        steps += 1

    eta = 0.5 * (lo + hi)
    state_out, a, b = problem.materialize(incumbent)
    table = correlation_table(state_out, a, b)
    _check_monotone(family, table)
    return ThresholdResult(eta, evaluate(family.at(eta), table), a, b, state_out, steps, (lo, hi))


# -- sweeps -----------------------------------------------------------------


@dataclass(frozen=True)
class FamilySpec:
    name: str
    family: DetectionFamily
    dim: int


def family_spec(name: str, n: int = 3) -> FamilySpec:
    """``"ch"`` (qubits), ``"asymmetric"`` (I_NN22 in dimension ``n``) or ``"i4422"``."""
    if name == "ch":
        return FamilySpec("ch", DetectionFamily(build_ch(), "symmetric"), 2)
    if name in ("asymmetric", "inn22"):
        return FamilySpec(f"asymmetric{n}", DetectionFamily(build_inn22(n), "asymmetric"), n)
    if name in ("i4422", "symmetric-i4422"):
        return FamilySpec("i4422", DetectionFamily(build_i4422(), "symmetric"), 4)
    raise KeyError(f"unknown family {name!r}")


@dataclass(frozen=True)
class SweepPoint:
    epsilon: float
    p: float
    eta: float | None
    value: float
    converged: bool


@dataclass(frozen=True)
class NoisePoint:
    p: float
    family: str
    eta: float | None
    epsilon: float | None
    value: float
    converged: bool


def is_monotone(points: Sequence[SweepPoint], tol: float = 1e-3) -> bool:
    """True if the threshold never decreases (beyond ``tol``) as epsilon grows."""
    etas = [pt.eta for pt in sorted(points, key=lambda pt: pt.epsilon) if pt.eta is not None]
    return all(b >= a - tol for a, b in zip(etas, etas[1:]))


def _witness_seed(result: ThresholdResult):
    return (None, result.settings_a.vectors, result.settings_b.vectors)


def sweep_epsilon(
    spec: FamilySpec,
    grid: Sequence[float],
    noise: float = 0.0,
    cfg: OptimizerConfig | None = None,
    warm_start: bool = True,
) -> list[SweepPoint]:
    """Optimized threshold along a grid of the entanglement parameter epsilon."""
    if any(not 0.0 < e <= 1.0 for e in grid):
        raise ValueError("epsilon grid values must lie in (0, 1]")
    if not 0.0 <= noise < 1.0:
        raise ValueError("noise must lie in [0, 1)")
    cfg = cfg or OptimizerConfig.for_dim(spec.dim)
    points, seeds = [], []
    for eps in grid:
        state = schmidt_from_epsilon(spec.dim, eps, noise)
        result = threshold_efficiency(spec.family, state, cfg=cfg, seeds=seeds)
        points.append(SweepPoint(eps, noise, result.eta, result.value_at_eta, result.found))
        if warm_start and result.found:
            seeds = [_witness_seed(result)]
        log.info("%s eps=%.6f p=%.4f eta=%s", spec.name, eps, noise, result.eta)
    if noise == 0.0 and not is_monotone(points):
        log.warning("%s sweep at p=0 is not monotone in epsilon", spec.name)
    return points


def epsilon_zero_threshold(n: int, noise: float = 0.0, cfg: OptimizerConfig | None = None) -> ThresholdResult:
    """Asymmetric ``I_NN22`` at epsilon = 0, run on the maximally entangled state of dimension ``n - 1``."""
    if n < 3:
        raise ValueError("the epsilon = 0 point needs n >= 3")
    family = DetectionFamily(build_inn22(n), "asymmetric")
    state = SchmidtState(np.full(n - 1, (n - 1) ** -0.5), noise)
    return threshold_efficiency(family, state, cfg=cfg or OptimizerConfig.for_dim(n - 1))


def sweep_noise(
    specs: Sequence[FamilySpec],
    grid: Sequence[float],
    cfg: OptimizerConfig | None = None,
    eps_min: float = 1e-3,
    log_eps_tolerance: float = 0.02,
    scan_points: int = 7,
) -> list[NoisePoint]:
    """Threshold minimized over epsilon, for every noise level and family.

    The outer search runs over ``log10(epsilon)`` in
    ``[log10(eps_min), log10(1/sqrt(dim))]``: a coarse scan of ``scan_points``
    (endpoints included, since without noise the infimum sits at the lower
    end) followed by a bounded scalar minimization around the best one.
    """
    if any(not 0.0 <= p <= 0.05 for p in grid):
        raise ValueError("noise grid values must lie in [0, 0.05]")
    if scan_points < 3:
        raise ValueError("scan_points must be at least 3")
    out = []
    for spec in specs:
        run_cfg = cfg or OptimizerConfig.for_dim(spec.dim)
        seeds: list = []
        for p in grid:
            cache: dict[float, ThresholdResult] = {}

            def inner(log_eps: float) -> float:
                eps = float(10.0**log_eps)
                if eps not in cache:
                    state = schmidt_from_epsilon(spec.dim, eps, p)
                    cache[eps] = threshold_efficiency(spec.family, state, cfg=run_cfg, seeds=seeds)
                res = cache[eps]
                return res.eta if res.found else 2.0 - res.value_at_eta

            lo, hi = math.log10(eps_min), math.log10(1.0 / math.sqrt(spec.dim))
            # coarse scan first: with noise, small epsilon gives no violation at all
            # and the flat penalty there would mislead a bracketing search
            coarse = np.linspace(lo, hi, scan_points)
            scores = [inner(x) for x in coarse]
            k = int(np.argmin(scores))
            a, b = coarse[max(k - 1, 0)], coarse[min(k + 1, scan_points - 1)]
            minimize_scalar(inner, bounds=(a, b), method="bounded", options={"xatol": log_eps_tolerance})
            eps_best = min(cache, key=lambda e: (not cache[e].found, cache[e].eta or 2.0, e))
            best = cache[eps_best]
            if best.found:
                seeds = [_witness_seed(best)]
                out.append(NoisePoint(p, spec.name, best.eta, float(eps_best), best.value_at_eta, True))
            else:
                out.append(NoisePoint(p, spec.name, None, None, best.value_at_eta, False))
            log.info("%s p=%.4f eta=%s eps=%s", spec.name, p, best.eta, eps_best)
    return out
