"""Estimators and verifiers built on the solvers and drivers.

Everything here reduces a run to a small report object with a ``to_dict``
method: convergence-order regressions, the windowed area-cancellation
statistic, Riemann-sum recovery of stored areas, the integral explosion
criterion, the two-solution demonstration, and a Hölder exponent fit.
Reports carry the knobs they were produced with, so a serialized report is
interpretable without the code that made it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import (
    AreaProcess,
    DriverPath,
    GrowthEnvelope,
    Partition,
    Trajectory,
    VectorField,
    chen_combine,
    control_fit,
)
from .drivers import CounterexampleConfig, example1_driver, example1_solution_pair
from .schemes import DefectReport, SchemeConfig, corrected_solve, defect, euler_solve

__all__ = [
    "RateReport",
    "convergence_study",
    "gbm_terminal_ito",
    "gbm_terminal_stratonovich",
    "ConditionStat",
    "condition21_stat",
    "condition21_recompute",
    "riemann_area_recovery",
    "CriterionReport",
    "explosion_criterion",
    "NonuniquenessReport",
    "nonuniqueness_demo",
    "holder_estimate",
    "chen_residuals",
]


# ---------------------------------------------------------------------------
# convergence-order regression


@dataclass
class RateReport:
    """Mesh-refinement errors and their fitted log-log slope.

    ``k_values`` and ``errors`` keep only the meshes with a strictly positive
    error; ``n_zero`` counts the excluded exact ones.  When every mesh is
    exact the report is flagged and the slope is NaN.  The two coarsest
    meshes are dropped from the fit by default as pre-asymptotic, recorded in
    ``n_dropped``.
    """

    k_values: np.ndarray
    errors: np.ndarray
    slope: float
    intercept: float
    oracle: str
    scheme: str
    exact: bool
    n_dropped: int
    n_zero: int

    def to_dict(self) -> dict:
        return {
            "k_values": [int(k) for k in self.k_values],
            "errors": [float(e) for e in self.errors],
            "slope": None if math.isnan(self.slope) else float(self.slope),
            "intercept": None if math.isnan(self.intercept) else float(self.intercept),
            "oracle": self.oracle,
            "scheme": self.scheme,
            "exact": self.exact,
            "n_dropped": self.n_dropped,
            "n_zero": self.n_zero,
        }


def gbm_terminal_ito(path: DriverPath, y0) -> np.ndarray:
    """Terminal value of dY = Y dX in the Ito sense for a scalar driver."""
    if path.d != 1:
        raise ValueError("closed-form oracle is one-dimensional")
    dw = float(path.values[-1, 0] - path.values[0, 0])
    span = float(path.times[-1] - path.times[0])
    y0 = float(np.asarray(y0).reshape(-1)[0])
    return np.array([y0 * math.exp(dw - 0.5 * span)])


def gbm_terminal_stratonovich(path: DriverPath, y0) -> np.ndarray:
    """Terminal value of dY = Y dX in the Stratonovich sense."""
    if path.d != 1:
        raise ValueError("closed-form oracle is one-dimensional")
    dw = float(path.values[-1, 0] - path.values[0, 0])
    y0 = float(np.asarray(y0).reshape(-1)[0])
    return np.array([y0 * math.exp(dw)])


def convergence_study(
    field: VectorField,
    path: DriverPath,
    y0,
    k_values: Sequence[int],
    scheme: str = "euler",
    area: AreaProcess | None = None,
    reference: Callable | np.ndarray | None = None,
    drop_coarsest: int = 2,
    config: SchemeConfig | None = None,
) -> RateReport:
    """Run one scheme over nested uniform partitions and regress the error.

    All meshes subsample the same driver realization, so the study measures
    discretization error alone.  ``reference`` is either a callable
    ``(path, y0) -> terminal state`` (closed-form oracle), a terminal state
    array, or ``None``, in which case the corrected scheme on the full grid
    stands in; that fallback requires the grid to be at least 16x finer than
    the finest requested mesh, and an area process.

    Errors are Euclidean distances between terminal states.  Zero errors are
    excluded from the regression; if every mesh is exact the report says so
    instead of fitting a slope.
    """
    ks = sorted(int(k) for k in k_values)
    if len(ks) < 2:
        raise ValueError("need at least two mesh sizes")
    if any(path.n_intervals % k for k in ks):
        raise ValueError("every mesh size must divide the driver grid")
    if scheme not in ("euler", "corrected"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if scheme == "corrected" and area is None:
        raise ValueError("corrected scheme needs an area process")

    if callable(reference):
        ref = np.asarray(reference(path, y0), dtype=float).reshape(-1)
        oracle = getattr(reference, "__name__", "callable oracle")
    elif reference is None:
        if area is None:
            raise ValueError("fine-mesh fallback reference needs an area process")
        if path.n_intervals < 16 * ks[-1]:
            raise ValueError(
                "fine-mesh reference wants the grid 16x finer than the finest mesh"
            )
        ref = corrected_solve(field, path, area, y0, config=config).final
        oracle = "corrected scheme on the full grid"
    else:
        ref = np.asarray(reference, dtype=float).reshape(-1)
        oracle = "fixed terminal state"

    errors = np.empty(len(ks))
    for m, k in enumerate(ks):
        stride = path.n_intervals // k
        part = Partition(path.times[::stride])
        if scheme == "euler":
            traj = euler_solve(field, path, y0, partition=part, config=config)
        else:
            traj = corrected_solve(field, path, area, y0, partition=part, config=config)
        errors[m] = float(np.linalg.norm(traj.final - ref))

    keep = errors > 0.0
    n_zero = int(np.count_nonzero(~keep))
    ks_kept = np.asarray(ks)[keep]
    errs_kept = errors[keep]
    if ks_kept.size == 0:
        return RateReport(
            k_values=ks_kept,
            errors=errs_kept,
            slope=math.nan,
            intercept=math.nan,
            oracle=oracle,
            scheme=scheme,
            exact=True,
            n_dropped=0,
            n_zero=n_zero,
        )
    n_drop = min(drop_coarsest, max(0, ks_kept.size - 2))
    fit_k = ks_kept[n_drop:]
    fit_e = errs_kept[n_drop:]
    if fit_k.size >= 2:
        slope, intercept = np.polyfit(np.log2(fit_k), np.log2(fit_e), 1)
    else:
        slope, intercept = math.nan, math.nan
    return RateReport(
        k_values=ks_kept,
        errors=errs_kept,
        slope=float(slope),
        intercept=float(intercept),
        oracle=oracle,
        scheme=scheme,
        exact=False,
        n_dropped=n_drop,
        n_zero=n_zero,
    )


# ---------------------------------------------------------------------------
# windowed area-cancellation statistic


@dataclass
class ConditionStat:
    """Max of |sum of consecutive small-interval areas| over a normalizer.

    The normalizer is ``(m - k)^beta * h^(2 alpha)`` for a window of
    ``m - k`` blocks of width ``h``.  ``argmax`` is the winning
    ``(k, m, h)``; recomputing the ratio there reproduces ``value`` bitwise,
    see :func:`condition21_recompute`.  ``per_level`` lists the max ratio at
    each dyadic level separately, coarse to fine.
    """

    alpha: float
    beta: float
    value: float
    argmax: tuple[int, int, float]
    levels: list[int]
    per_level: list[float]
    window_cap: int

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "value": self.value,
            "argmax": {
                "k": self.argmax[0],
                "m": self.argmax[1],
                "h": self.argmax[2],
            },
            "levels": list(self.levels),
            "per_level": [float(v) for v in self.per_level],
            "window_cap": self.window_cap,
        }


def _dyadic_depth(area: AreaProcess) -> int:
    n = area.n_intervals
    depth = n.bit_length() - 1
    if 2**depth != n:
        raise ValueError(f"area grid must have 2^L intervals, got {n}")
    times = area.path.times
    h = (times[-1] - times[0]) / n
    if np.max(np.abs(np.diff(times) - h)) > 1e-9 * h:
        raise ValueError("area grid must be uniform")
    return depth


def _level_prefix(area: AreaProcess, level: int) -> tuple[np.ndarray, float]:
    """Blocks folded to 2^level intervals, returned as prefix sums.

    Folding halves the block count repeatedly with the pairwise combination
    rule, so the level-j blocks are exactly the areas over width-h dyadic
    cells.  The same function serves the scan and the argmax recomputation,
    which keeps the two bitwise consistent.
    """
    depth = _dyadic_depth(area)
    if not 0 <= level <= depth:
        raise ValueError(f"level {level} outside [0, {depth}]")
    blocks = area.per_interval
    incs = area.path.increments
    for _ in range(depth - level):
        blocks = blocks[0::2] + blocks[1::2] + np.einsum(
            "ki,kj->kij", incs[0::2], incs[1::2]
        )
        incs = incs[0::2] + incs[1::2]
    prefix = np.zeros((blocks.shape[0] + 1,) + blocks.shape[1:])
    np.cumsum(blocks, axis=0, out=prefix[1:])
    times = area.path.times
    h = (times[-1] - times[0]) / 2**level
    return prefix, h


def condition21_stat(
    area: AreaProcess,
    alpha: float,
    beta: float,
    levels: Sequence[int] = range(4, 13),
    window_cap: int = 2**12,
) -> ConditionStat:
    """Exhaustive windowed-cancellation scan over dyadic levels.

    At each level the blocks are the areas of the 2^j uniform cells; every
    window start is scanned for every window length up to ``window_cap``
    (lengths above the cap are skipped, which only matters beyond level 12).
    Magnitudes are max-entry norms of the summed blocks.
    """
    if not (0 < alpha < 1 and 0 < beta < 1):
        raise ValueError("alpha and beta must lie in (0, 1)")
    levels = sorted(set(int(j) for j in levels))
    depth = _dyadic_depth(area)
    if levels and levels[-1] > depth:
        raise ValueError(f"level {levels[-1]} finer than the grid (depth {depth})")
    if not levels:
        raise ValueError("no levels requested")

    best_value = -math.inf
    best_arg = (0, 1, math.nan)
    per_level = []
    for j in levels:
        prefix, h = _level_prefix(area, j)
        n = prefix.shape[0] - 1
        level_best = 0.0
        level_arg = (0, 1)
        for w in range(1, min(n, window_cap) + 1):
            mags = np.max(np.abs(prefix[w:] - prefix[:-w]), axis=(1, 2))
            k = int(np.argmax(mags))
            ratio = float(mags[k]) / (w**beta * h ** (2 * alpha))
            if ratio > level_best:
                level_best = ratio
                level_arg = (k, k + w)
        per_level.append(level_best)
        if level_best > best_value:
            best_value = level_best
            best_arg = (level_arg[0], level_arg[1], h)
    return ConditionStat(
        alpha=float(alpha),
        beta=float(beta),
        value=float(best_value),
        argmax=best_arg,
        levels=levels,
        per_level=per_level,
        window_cap=int(window_cap),
    )


def condition21_recompute(
    area: AreaProcess, alpha: float, beta: float, k: int, m: int, h: float
) -> float:
    """Re-evaluate the window statistic at one (k, m, h) triple.

    Follows the identical fold-prefix-difference arithmetic as the scan, so
    the returned float matches the scan's value bit for bit at the reported
    argmax.
    """
    times = area.path.times
    span = float(times[-1] - times[0])
    level = round(math.log2(span / h))
    prefix, h_level = _level_prefix(area, level)
    if not (0 <= k < m <= prefix.shape[0] - 1):
        raise ValueError(f"window ({k}, {m}) outside level {level}")
    w = m - k
    mag = float(np.max(np.abs(prefix[m] - prefix[k])))
    return mag / (w**beta * h_level ** (2 * alpha))


# ---------------------------------------------------------------------------
# Riemann-sum recovery of stored areas


def riemann_area_recovery(
    path: DriverPath,
    area: AreaProcess,
    s: float,
    t: float,
    n_list: Sequence[int],
) -> np.ndarray:
    """Left-point Riemann sums over [s, t] against the stored area block.

    The sum at resolution N is ``sum_k (x(u_k) - x(s)) (x(u_{k+1}) - x(u_k))``
    over a uniform refinement; the error is the max-entry distance to the
    area the process reports for the same pair.  ``s`` and ``t`` must be grid
    times.
    """
    i = _time_index(path, s)
    j = _time_index(path, t)
    if i > j:
        raise ValueError("need s <= t")
    target = area.pair(i, j)
    xs = path.values[i]
    errors = np.empty(len(n_list))
    for m, n in enumerate(n_list):
        if n < 1:
            raise ValueError("refinement counts must be positive")
        u = np.linspace(path.times[i], path.times[j], int(n) + 1)
        xu = path.eval(u)
        riem = np.einsum("ki,kj->ij", xu[:-1] - xs, np.diff(xu, axis=0))
        errors[m] = float(np.max(np.abs(riem - target)))
    return errors


def _time_index(path: DriverPath, t: float) -> int:
    idx = int(np.argmin(np.abs(path.times - t)))
    scale = max(abs(float(t)), float(path.times[-1] - path.times[0]))
    if abs(path.times[idx] - t) > 1e-9 * scale:
        raise ValueError(f"t={t} is not a grid time of the path")
    return idx


# ---------------------------------------------------------------------------
# integral explosion criterion


@dataclass
class CriterionReport:
    """Dyadic partial integrals of the growth-envelope criterion.

    ``partials[j]`` integrates the envelope expression over
    ``[2^j, 2^(j+1)]``.  The verdict is a trend call: a fitted tail slope
    (log2 of partials against octave index) at or above the break-even value
    means the improper integral keeps accumulating, which rules explosion
    out; a negative slope means it converges, leaving explosion possible.
    """

    verdict: str
    p: float
    gamma: float
    beta: float
    r_max: float
    partials: np.ndarray
    octaves: np.ndarray
    tail_slope: float
    total: float

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "p": self.p,
            "gamma": self.gamma,
            "beta": self.beta,
            "r_max": self.r_max,
            "octaves": [int(j) for j in self.octaves],
            "partials": [float(v) for v in self.partials],
            "tail_slope": self.tail_slope,
            "total": self.total,
        }


_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(32)


def explosion_criterion(
    env: GrowthEnvelope,
    p: float,
    gamma: float,
    r_max: float = 2.0**20,
    tail_octaves: int = 5,
) -> CriterionReport:
    """Classify the growth-envelope integral as convergent or not.

    The integrand is ``(A(R)^(1-p) D(R)^(p-1-beta*p))^(1/beta)`` with
    ``A = env.area_growth`` and ``D = env.growth``.  Each octave is
    integrated with 32-point Gauss-Legendre, exact to machine precision for
    power-law envelopes, which is what the closed-form cross-check uses.
    Divergence of an improper integral is not decidable from finitely many
    octaves; the verdict is the trend of the dyadic contributions, with the
    fitted tail slope exposed for inspection.
    """
    if not p >= 1:
        raise ValueError("p must be at least 1")
    if not p < gamma <= 1 + env.beta + 1e-12:
        raise ValueError(
            f"need p < gamma <= 1 + beta, got p={p}, gamma={gamma}, beta={env.beta}"
        )
    if r_max < 1e3:
        raise ValueError("r_max must be at least 1e3")
    env.validate()
    beta = env.beta
    n_oct = int(math.floor(math.log2(r_max)))

    def integrand(r: np.ndarray) -> np.ndarray:
        a = np.asarray(env.area_growth(r), dtype=float)
        d = np.asarray(env.growth(r), dtype=float)
        return (a ** (1.0 - p) * d ** (p - 1.0 - beta * p)) ** (1.0 / beta)

    partials = np.empty(n_oct)
    for j in range(n_oct):
        lo, hi = 2.0**j, 2.0 ** (j + 1)
        mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
        partials[j] = half * float(
            np.dot(_GAUSS_WEIGHTS, integrand(mid + half * _GAUSS_NODES))
        )
    if np.any(~np.isfinite(partials)) or np.any(partials <= 0):
        raise ValueError("criterion integrand must be positive and finite")

    n_tail = min(tail_octaves, n_oct)
    idx = np.arange(n_oct - n_tail, n_oct)
    tail_slope = float(np.polyfit(idx, np.log2(partials[idx]), 1)[0])
    # Octave contributions of R^q scale by 2^(q+1); break-even (q = -1) sits
    # at slope 0.  A small allowance keeps roundoff on the convergent side.
    verdict = "diverges-trend" if tail_slope > -0.029 else "converges"
    return CriterionReport(
        verdict=verdict,
        p=float(p),
        gamma=float(gamma),
        beta=float(beta),
        r_max=float(r_max),
        partials=partials,
        octaves=np.arange(n_oct),
        tail_slope=tail_slope,
        total=float(np.sum(partials)),
    )


# ---------------------------------------------------------------------------
# two-solution demonstration


@dataclass
class NonuniquenessReport:
    """Two distinct solutions of one system, with their defect certificates.

    ``separation`` is the terminal gap in the first component;
    ``defect_scale`` is ``max(M_a, M_b) * omega(0, T)^(gamma/p)``, the size
    below which two near-solutions could still be the same solution in
    disguise.  A large ``ratio`` of the two is the point of the exercise.
    """

    traj_a: Trajectory
    traj_b: Trajectory
    defect_a: DefectReport
    defect_b: DefectReport
    separation: float
    defect_scale: float
    ratio: float
    config: CounterexampleConfig

    def to_dict(self) -> dict:
        return {
            "separation": self.separation,
            "defect_scale": self.defect_scale,
            "ratio": self.ratio,
            "fitted_m_a": self.defect_a.fitted_constant,
            "fitted_m_b": self.defect_b.fitted_constant,
            "gamma": self.config.gamma,
            "p": self.config.p,
            "beta_exp": self.config.beta_exp,
            "rho_exp": self.config.rho_exp,
            "t_max": self.config.t_max,
            "grid": self.config.grid,
        }


def nonuniqueness_demo(cfg: CounterexampleConfig | None = None) -> NonuniquenessReport:
    """Build both solutions of the oscillatory system and certify the gap.

    The flat branch keeps its first component at zero; the grown branch
    accumulates a positive first component whose growth is checked pointwise
    against the floor ``3 t^beta`` before anything else runs, rejecting
    configurations where the demonstration would be vacuous.  Both branches
    get adjacent-pair defect reports against one shared control fit, and the
    terminal separation is compared with the defect scale.
    """
    cfg = cfg or CounterexampleConfig()
    path, field = example1_driver(cfg)
    traj_a, traj_b = example1_solution_pair(cfg, path)

    t = path.times[1:]
    floor = 3.0 * t**cfg.beta_exp
    grown = traj_b.states[1:, 0]
    low = grown < floor
    if np.any(low):
        t_bad = float(t[np.argmax(low)])
        raise ValueError(
            f"grown branch dips under 3 t^beta at t={t_bad:.6g}; "
            "this exponent configuration does not separate the solutions"
        )

    control = control_fit(path, cfg.p)
    defect_a = defect(
        traj_a, field, path, cfg.gamma, cfg.p, pairs="adjacent", control=control
    )
    defect_b = defect(
        traj_b, field, path, cfg.gamma, cfg.p, pairs="adjacent", control=control
    )
    separation = float(abs(traj_b.final[0] - traj_a.final[0]))
    m = max(defect_a.fitted_constant, defect_b.fitted_constant)
    scale = m * float(
        control.omega(path.times[0], path.times[-1]) ** (cfg.gamma / cfg.p)
    )
    ratio = separation / scale if scale > 0 else math.inf
    return NonuniquenessReport(
        traj_a=traj_a,
        traj_b=traj_b,
        defect_a=defect_a,
        defect_b=defect_b,
        separation=separation,
        defect_scale=scale,
        ratio=ratio,
        config=cfg,
    )


# ---------------------------------------------------------------------------
# regularity fits and algebra checks


def holder_estimate(
    path: DriverPath, n_resample: int = 4096, max_lag: int = 256
) -> float:
    """Fitted Hölder exponent from sup increments over dyadic lags.

    The path is resampled uniformly (piecewise linearly) and the largest
    Euclidean increment at lags 1, 2, 4, ... is regressed against the lag on
    log axes.  A constant path has no increments to fit and reports +inf,
    matching the convention that flat paths are infinitely regular.
    """
    if path.times.size < 64:
        raise ValueError("need at least 64 samples for a regularity fit")
    t = np.linspace(path.times[0], path.times[-1], n_resample + 1)
    x = path.eval(t)
    dt = t[1] - t[0]
    lags, sups = [], []
    lag = 1
    while lag <= min(max_lag, n_resample - 1):
        sup = float(np.max(np.linalg.norm(x[lag:] - x[:-lag], axis=1)))
        if sup > 0.0:
            lags.append(lag * dt)
            sups.append(sup)
        lag *= 2
    if len(sups) < 2:
        return math.inf
    slope = np.polyfit(np.log(lags), np.log(sups), 1)[0]
    return float(slope)


def chen_residuals(
    area: AreaProcess, n_triples: int = 1000, seed: int = 0
) -> np.ndarray:
    """Consistency residuals of the two-parameter area on random triples.

    For grid indices i < j < k the block over (i, k) must equal the two
    sub-blocks combined with the increment cross term; the residual is the
    max-entry distance.  Anything persistently above roundoff means the
    process's algebra is broken.
    """
    if area.n_intervals < 2:
        raise ValueError("need at least two intervals to form a triple")
    rng = np.random.default_rng(seed)
    x = area.path.values
    residuals = np.empty(n_triples)
    for m in range(n_triples):
        i, j, k = np.sort(rng.choice(area.n_intervals + 1, size=3, replace=False))
        combined = chen_combine(
            area.pair(i, j), area.pair(j, k), x[j] - x[i], x[k] - x[j]
        )
        residuals[m] = float(np.max(np.abs(area.pair(i, k) - combined)))
    return residuals
