"""Driver-path gallery: stochastic, analytic, and adversarial signals.

Everything a scheme consumes is produced here as a (:class:`DriverPath`,
:class:`AreaProcess`) pair on a concrete grid:

* Brownian paths with Ito or Stratonovich area blocks (exact diagonals,
  bridge-substep off-diagonals), plus degenerate and user-perturbed variants;
* polynomial paths with closed-form area blocks, the reference case where
  every estimate can be checked against exact calculus;
* an oscillatory two-component driver whose integral equation has two exact
  solutions from the same initial data (the non-uniqueness demo), built on a
  geometric grid with a semi-analytic quadrature for the grown branch;
* a self-similar nested-chain curve with prescribed Holder exponent,
  evaluated on demand because its finest resolution is never materialized;
* a spiral driver carrying a prescribed blow-up time, assembled from radial
  growth envelopes by homogenization, mollification, and a time change.

All random constructions are driven by ``np.random.SeedSequence([seed, tag])``
substreams so each ingredient is reproducible independently of call order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dataclass_field
from typing import Callable

import numpy as np

from .core import (
    AreaProcess,
    DriverPath,
    GrowthEnvelope,
    Trajectory,
    VectorField,
)

__all__ = [
    "BrownianConfig",
    "brownian_path",
    "ito_area",
    "stratonovich_area",
    "degenerate_area",
    "perturbed_area",
    "PolynomialPath",
    "analytic_area",
    "CounterexampleConfig",
    "example1_driver",
    "example1_field",
    "example1_solution_pair",
    "example2_driver",
    "example2_modified_field",
    "ChainCurve",
    "build_chain_curve",
    "holder_chain_curve",
    "ExplosionConfig",
    "ProcessedEnvelope",
    "power_law_envelope",
    "process_envelope",
    "ExplosionDriver",
    "explosion_driver",
    "adaptive_simpson",
    "save_driver",
    "load_driver",
]


# ---------------------------------------------------------------------------
# Brownian paths and areas

# Substream tags keep the path increments and the bridge refinement noise on
# disjoint generator states, so either can be regenerated without the other.
# The values are arbitrary but frozen: golden numbers in the test suite were
# calibrated against these exact streams.
_PATH_STREAM = 27
_BRIDGE_STREAM = 28


@dataclass(frozen=True)
class BrownianConfig:
    """Dyadic-grid Brownian driver parameters.

    ``level`` fixes the grid at 2**level uniform intervals on [0, t_end];
    ``substeps`` is the bridge resolution used for off-diagonal area entries.
    """

    d: int
    level: int
    seed: int
    t_end: float = 1.0
    substeps: int = 16

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be at least 1")
        if not 1 <= self.level <= 24:
            raise ValueError("level must be between 1 and 24")
        if self.substeps < 2:
            raise ValueError("substeps must be at least 2")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")

    @property
    def n_intervals(self) -> int:
        return 2**self.level


def brownian_path(config: BrownianConfig) -> DriverPath:
    """Sample a Brownian path on the dyadic grid fixed by ``config``.

    Increments come from the ``_PATH_STREAM`` substream; the bridge noise
    used by the area constructors lives on ``_BRIDGE_STREAM``, so path and
    area are reproducible separately.
    """
    k = config.n_intervals
    h = config.t_end / k
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, _PATH_STREAM]))
    incs = rng.standard_normal((k, config.d)) * math.sqrt(h)
    values = np.vstack([np.zeros(config.d), np.cumsum(incs, axis=0)])
    times = np.linspace(0.0, config.t_end, k + 1)
    return DriverPath(times, values, holder_alpha=0.5, p=2.5)


def _bridge_offdiag(path: DriverPath, config: BrownianConfig) -> np.ndarray:
    """Left-point Riemann sums over one shared bridge per interval.

    Each interval gets a single d-dimensional bridge with ``substeps``
    pieces, conditioned on the observed increment; all (i, j) entries are
    computed from the same realization.
    """
    k = path.n_intervals
    d = path.d
    r = config.substeps
    h = np.diff(path.times)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, _BRIDGE_STREAM]))
    xi = rng.standard_normal((k, r, d))
    xi -= xi.mean(axis=1, keepdims=True)
    dw = path.increments
    sub = dw[:, None, :] / r + xi * np.sqrt(h[:, None, None] / r)
    # partial sums *before* each substep (left endpoint of the substep)
    left = np.cumsum(sub, axis=1) - sub
    return np.einsum("kmi,kmj->kij", left, sub)


def ito_area(path: DriverPath, config: BrownianConfig) -> AreaProcess:
    """Ito area blocks: exact diagonal identity, bridge off-diagonals.

    The diagonal needs no simulation at all: per interval it equals
    ``(dW_j^2 - h) / 2`` pathwise.  Off-diagonals use the shared bridge of
    :func:`_bridge_offdiag`.  For d = 1 the bridge is skipped entirely.
    """
    k = path.n_intervals
    d = path.d
    h = np.diff(path.times)
    dw = path.increments
    if d == 1:
        blocks = np.zeros((k, 1, 1))
    else:
        blocks = _bridge_offdiag(path, config)
    diag = 0.5 * (dw**2 - h[:, None])
    idx = np.arange(d)
    blocks[:, idx, idx] = diag
    return AreaProcess(path, blocks, "ito", seed=config.seed, substeps=config.substeps)


def stratonovich_area(ito: AreaProcess) -> AreaProcess:
    """Stratonovich area blocks: the Ito blocks shifted by h/2 on the diagonal.

    Operates on an existing Ito area so the off-diagonal entries agree
    bitwise between the two conventions; they come from the same bridge
    realization by construction.
    """
    if ito.kind != "ito":
        raise ValueError(f"expected an Ito area, got kind={ito.kind!r}")
    blocks = ito.per_interval.copy()
    h = np.diff(ito.path.times)
    idx = np.arange(ito.d)
    blocks[:, idx, idx] += 0.5 * h[:, None]
    return AreaProcess(ito.path, blocks, "stratonovich", seed=ito.seed, substeps=ito.substeps)


def degenerate_area(path: DriverPath) -> AreaProcess:
    """The collapsed area ``A(s, t) = -x(s) (x(t) - x(s))^T``.

    This satisfies the Chen identity exactly as an algebraic fact, for any
    path whatsoever, which is what makes it a useful degenerate companion:
    it carries no genuine second-order information yet passes every
    consistency check a true area must pass.
    """
    x = path.values
    blocks = -np.einsum("ki,kj->kij", x[:-1], np.diff(x, axis=0))
    return AreaProcess(path, blocks, "degenerate")


def perturbed_area(base: AreaProcess, phi: Callable[[float, float], np.ndarray]) -> AreaProcess:
    """Add a per-interval perturbation ``phi(s, t)`` to an existing area.

    Coarse pairs inherit the perturbation through the Chen fold like any
    other block content.  ``phi`` must return a (d, d) array.
    """
    t = base.path.times
    blocks = base.per_interval.copy()
    for k in range(base.n_intervals):
        blocks[k] += np.asarray(phi(t[k], t[k + 1]), dtype=float)
    return AreaProcess(base.path, blocks, "perturbed", seed=base.seed, substeps=base.substeps)


# ---------------------------------------------------------------------------
# Polynomial paths with closed-form areas


@dataclass(frozen=True)
class PolynomialPath:
    """A d-dimensional polynomial curve, the fully solvable reference driver.

    ``coeffs[i]`` are ascending power-basis coefficients of component i.
    Areas have closed forms through antiderivatives of products, so this is
    the case against which Riemann-sum estimates are tested.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.atleast_2d(np.asarray(self.coeffs, dtype=float))
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def d(self) -> int:
        return self.coeffs.shape[0]

    def value(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        vals = [np.polynomial.polynomial.polyval(t, c) for c in self.coeffs]
        return np.stack(vals, axis=-1)

    def sample(self, times) -> DriverPath:
        times = np.asarray(times, dtype=float)
        return DriverPath(times, self.value(times), holder_alpha=1.0, p=1.0)

    def _cross_antiderivatives(self):
        # Q[r][j] = antiderivative of x_r * x_j'
        poly = np.polynomial.polynomial
        out = []
        for r in range(self.d):
            row = []
            for j in range(self.d):
                prod = poly.polymul(self.coeffs[r], poly.polyder(self.coeffs[j]))
                row.append(poly.polyint(prod))
            out.append(row)
        return out

    def area(self, s: float, t: float) -> np.ndarray:
        """Exact area block over (s, t)."""
        q = self._cross_antiderivatives()
        poly = np.polynomial.polynomial
        xs = self.value(s)
        out = np.empty((self.d, self.d))
        for r in range(self.d):
            for j in range(self.d):
                raw = poly.polyval(t, q[r][j]) - poly.polyval(s, q[r][j])
                out[r, j] = raw - xs[r] * (
                    poly.polyval(t, self.coeffs[j]) - poly.polyval(s, self.coeffs[j])
                )
        return out


def analytic_area(poly: PolynomialPath, path: DriverPath) -> AreaProcess:
    """Exact per-interval area blocks of a polynomial path on a given grid.

    The grid values of ``path`` are trusted to come from ``poly.sample``;
    only the times are used here.
    """
    q = poly._cross_antiderivatives()
    polyv = np.polynomial.polynomial.polyval
    t = path.times
    x = poly.value(t)
    k = path.n_intervals
    blocks = np.empty((k, poly.d, poly.d))
    for r in range(poly.d):
        for j in range(poly.d):
            prim = polyv(t, q[r][j])
            blocks[:, r, j] = (prim[1:] - prim[:-1]) - x[:-1, r] * (x[1:, j] - x[:-1, j])
    return AreaProcess(path, blocks, "analytic")


# ---------------------------------------------------------------------------
# Oscillatory counterexample driver (two exact solutions, one initial value)


@dataclass(frozen=True)
class CounterexampleConfig:
    """Exponents and grid for the non-uniqueness demonstration.

    The driver is ``x1 = t^b cos(t^-r), x2 = t^b (2 + sin(t^-r))`` on a
    geometric grid, with ``b = beta_exp`` and ``r = rho_exp``.  Admissibility
    requires the exponent chain

        gamma < rho/beta < (rho + 1)/beta < p

    (so the coefficient is rough enough to break uniqueness while the driver
    still has finite p-variation), which is validated eagerly.  ``ramp`` is
    the relative width of the smoothstep collar in the coefficient field.
    """

    gamma: float = 1.05
    p: float = 1.9
    beta_exp: float = 4.0
    rho_exp: float = 5.0
    t_max: float = 0.15
    grid: int = 65536
    t_min_factor: float = 1e-3
    ramp: float = 0.15

    def __post_init__(self):
        chain = (self.gamma, self.rho_exp / self.beta_exp,
                 (self.rho_exp + 1) / self.beta_exp, self.p)
        if not (chain[0] < chain[1] < chain[2] < chain[3]):
            raise ValueError(
                "exponent chain gamma < rho/beta < (rho+1)/beta < p violated: "
                f"{chain[0]:.4g} < {chain[1]:.4g} < {chain[2]:.4g} < {chain[3]:.4g}"
            )
        if self.gamma <= 1:
            raise ValueError("gamma must exceed 1")
        if not 0 < self.ramp <= 0.5:
            raise ValueError("ramp must lie in (0, 0.5]")
        if self.grid < 16:
            raise ValueError("grid too small to be meaningful")
        if not 0 < self.t_min_factor < 1:
            raise ValueError("t_min_factor must lie in (0, 1)")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")

    @property
    def holder_alpha(self) -> float:
        return self.beta_exp / (self.rho_exp + 1)

    @property
    def growth_exponent(self) -> float:
        """Leading power of the grown branch, beta*(gamma+1) - rho."""
        return self.beta_exp * (self.gamma + 1) - self.rho_exp


def _example1_values(cfg: CounterexampleConfig, t: np.ndarray) -> np.ndarray:
    phase = t ** (-cfg.rho_exp)
    amp = t**cfg.beta_exp
    return np.column_stack([amp * np.cos(phase), amp * (2.0 + np.sin(phase))])


def example1_driver(cfg: CounterexampleConfig):
    """Oscillatory driver and its rough coefficient field, as a pair.

    The grid is geometric from ``t_min_factor * t_max`` up to ``t_max`` with a
    single initial cell down to t = 0, where both components vanish by the
    amplitude factor ``t^beta``.  Returns ``(path, field)``.
    """
    t = np.concatenate([
        [0.0],
        np.geomspace(cfg.t_min_factor * cfg.t_max, cfg.t_max, cfg.grid),
    ])
    values = np.vstack([np.zeros(2), _example1_values(cfg, t[1:])])
    path = DriverPath(t, values, holder_alpha=cfg.holder_alpha, p=cfg.p)
    return path, example1_field(cfg)


def example1_field(cfg: CounterexampleConfig) -> VectorField:
    """The coefficient field whose roughness breaks uniqueness.

    Component 2 just copies the second driver component (f[1, 1] = 1).
    Component 1 is ``(y2)^gamma`` against the first driver component, gated
    by a C^1 smoothstep in |y1|/y2: identically zero for |y1| <= ramp * y2
    (so the zero branch solves the equation exactly) and identically
    ``(y2)^gamma`` for |y1| >= 2 * ramp * y2 (the grown branch sits there).
    Only evaluation is provided; the field is deliberately no smoother than
    its gamma grade and the schemes that need derivatives must not use it.
    """
    gamma = cfg.gamma
    tau = cfg.ramp

    def func(y):
        y1, y2 = float(y[0]), float(y[1])
        out = np.zeros((2, 2))
        out[1, 1] = 1.0
        if y2 > 0:
            u = (abs(y1) - tau * y2) / (tau * y2)
            if u > 0:
                u = min(u, 1.0)
                out[0, 0] = (u * u * (3 - 2 * u)) * y2**gamma
        return out

    return VectorField(2, 2, func, smoothness=gamma)


def _periodic_harmonics(fn, n_samples: int = 4096, n_keep: int = 256):
    """Mean and complex harmonics of a smooth 2*pi-periodic function."""
    theta = np.arange(n_samples) * (2 * np.pi / n_samples)
    spec = np.fft.rfft(fn(theta)) / n_samples
    mean = float(spec[0].real)
    return mean, 2.0 * spec[1 : n_keep + 1]


def _oscillatory_tail(mean: float, harmonics: np.ndarray, a: float, u: np.ndarray,
                      n_terms: int = 6) -> np.ndarray:
    """``integral_u^inf s^-a g(s) ds`` for periodic g with the given spectrum.

    The mean contributes the exact power tail; the zero-mean remainder is
    expanded by repeated integration by parts against zero-mean periodic
    antiderivatives.  Each pass gains a factor ~1/u, so with u >= 1e4 the
    truncation after ``n_terms`` passes is far below double precision.
    """
    if a <= 1:
        raise ValueError("tail integral needs a > 1")
    u = np.asarray(u, dtype=float)
    total = mean * u ** (1.0 - a) / (a - 1.0)
    freqs = np.arange(1, harmonics.size + 1)
    correction = np.zeros_like(u)
    block = 4096
    for lo in range(0, u.size, block):
        uu = u[lo : lo + block]
        phase = np.exp(1j * np.outer(uu, freqs))
        fac = 1.0
        acc = np.zeros(uu.size)
        for k in range(1, n_terms + 1):
            hk = harmonics / (1j * freqs) ** k
            hk_at_u = (phase * hk[None, :]).sum(axis=1).real
            acc -= fac * uu ** (-(a + k - 1.0)) * hk_at_u
            fac *= a + k - 1.0
        correction[lo : lo + block] = acc
    return total + correction


def _example1_grown_component(cfg: CounterexampleConfig, t: np.ndarray) -> np.ndarray:
    """Semi-analytic values of the grown branch's first component.

    Substituting u = s^-rho turns the defining integral into two oscillatory
    power tails, handled by :func:`_oscillatory_tail`.  Exact zero at t = 0.
    """
    gamma, beta, rho = cfg.gamma, cfg.beta_exp, cfg.rho_exp
    kappa = (beta * (gamma + 1) - rho) / rho
    mean1, harm1 = _periodic_harmonics(lambda th: (2 + np.sin(th)) ** gamma * np.sin(th))
    mean2, harm2 = _periodic_harmonics(lambda th: (2 + np.sin(th)) ** gamma * np.cos(th))
    out = np.zeros_like(t)
    pos = t > 0
    u = t[pos] ** (-rho)
    out[pos] = _oscillatory_tail(mean1, harm1, kappa + 1.0, u) + (
        beta / rho
    ) * _oscillatory_tail(mean2, harm2, kappa + 2.0, u)
    return out


def example1_solution_pair(cfg: CounterexampleConfig, path: DriverPath):
    """The two exact solutions from the same (zero) initial state.

    Returns ``(flat, grown)`` trajectories on the driver grid.  The flat
    branch keeps the first component at zero; the grown branch's first
    component is the true integral of ``(x2)^gamma`` against ``x1``,
    evaluated semi-analytically.  Both share the second component ``x2``.
    """
    t = path.times
    x2 = path.values[:, 1]
    flat = Trajectory(t, np.column_stack([np.zeros_like(t), x2]), scheme="exact")
    grown = Trajectory(
        t, np.column_stack([_example1_grown_component(cfg, t), x2]), scheme="exact"
    )
    return flat, grown


# ---------------------------------------------------------------------------
# Spiral driver with a collapsed area (modified-dynamics demo)


def example2_driver(cfg: CounterexampleConfig) -> DriverPath:
    """Spiral driver ``t^b (cos t^-r, sin t^-r)`` on the same geometric grid.

    Pair it with :func:`degenerate_area`: the collapsed blocks satisfy Chen
    exactly, yet feeding them to the corrected scheme steers the solution
    toward modified dynamics rather than the nominal ones.
    """
    t = np.concatenate([
        [0.0],
        np.geomspace(cfg.t_min_factor * cfg.t_max, cfg.t_max, cfg.grid),
    ])
    phase = t[1:] ** (-cfg.rho_exp)
    amp = t[1:] ** cfg.beta_exp
    values = np.vstack(
        [np.zeros(2), np.column_stack([amp * np.cos(phase), amp * np.sin(phase)])]
    )
    return DriverPath(t, values, holder_alpha=cfg.holder_alpha, p=cfg.p)


def example2_modified_field(base: VectorField, rho_exp: float) -> VectorField:
    """Rescale a field by the literal factor ``(1 - rho_exp)``.

    This is the effective coefficient toward which the corrected scheme
    drifts when fed the collapsed area on the spiral driver.  The factor is
    negative for rho_exp > 1; that sign flip is intentional and is the whole
    point of the demonstration, not a bug.
    """
    factor = 1.0 - rho_exp

    def func(y):
        return factor * base.eval(y)

    deriv1 = (lambda y: factor * base.deriv1(y)) if base.has_deriv1 else None
    deriv2 = (lambda y: factor * base.deriv2(y)) if base.has_deriv2 else None
    return VectorField(base.n, base.d, func, deriv1=deriv1, deriv2=deriv2,
                       smoothness=base.smoothness)


# ---------------------------------------------------------------------------
# Nested-chain curve with prescribed Holder exponent


_SIDE_MIDDLE = {
    "L": lambda n: (0, n // 2),
    "R": lambda n: (n - 1, n // 2),
    "B": lambda n: (n // 2, 0),
    "T": lambda n: (n // 2, n - 1),
}

# The eight square symmetries as ((col, row) action, side relabeling).
_TRANSFORMS = [
    (lambda c, r, N: (c, r), {"L": "L", "R": "R", "T": "T", "B": "B"}),
    (lambda c, r, N: (N - r, c), {"L": "B", "R": "T", "T": "L", "B": "R"}),
    (lambda c, r, N: (N - c, N - r), {"L": "R", "R": "L", "T": "B", "B": "T"}),
    (lambda c, r, N: (r, N - c), {"L": "T", "R": "B", "T": "R", "B": "L"}),
    (lambda c, r, N: (N - c, r), {"L": "R", "R": "L", "T": "T", "B": "B"}),
    (lambda c, r, N: (c, N - r), {"L": "L", "R": "R", "T": "B", "B": "T"}),
    (lambda c, r, N: (r, c), {"L": "B", "R": "T", "T": "R", "B": "L"}),
    (lambda c, r, N: (N - r, N - c), {"L": "T", "R": "B", "T": "L", "B": "R"}),
]


def _straight_zigzag_rows(k: int, extra: int) -> list[int]:
    """Run endpoint rows for a straight serpentine consuming ``extra`` squares.

    Runs live on the k odd columns; pairs of legs swing up from the middle
    row and back, each pair of amplitude h eating 2h squares.
    """
    n = 2 * k + 1
    if extra % 2:
        raise ValueError("extra squares must be even")
    swings = extra // 2
    heights = []
    for _ in range(k // 2):
        take = min(k - 1, swings)
        heights.append(take)
        swings -= take
    if swings:
        raise ValueError(f"straight chain cannot absorb {extra} extra squares at k={k}")
    rows = [k]
    for h in heights:
        rows.extend([k + h, k])
    while len(rows) < k + 1:
        rows.append(k)
    return rows[: k + 1]


def _straight_chain(k: int, m: int) -> list[tuple[int, int]]:
    """Canonical left-to-right chain of odd length m in the (2k+1)-grid."""
    n = 2 * k + 1
    rows = _straight_zigzag_rows(k, m - n)
    squares = [(0, k)]
    cur = k
    for i in range(k):
        col = 2 * i + 1
        target = rows[i + 1]
        step = 1 if target >= cur else -1
        for r in range(cur, target + step, step):
            squares.append((col, r))
        cur = target
        if i < k - 1:
            squares.append((col + 1, cur))
    squares.append((n - 1, k))
    if len(squares) != m:
        raise AssertionError(f"straight chain built {len(squares)} squares, wanted {m}")
    return squares


def _corner_leg_bounds(k: int) -> list[tuple[int, int]]:
    """Row interval each serpentine run may sweep, per leg.

    Runs live on odd columns left of the climb column k.  Only a run on
    column k-1 (the last one when k is even) is pinned below the climb; all
    other columns are at least two away from it and may use the full
    interior height.
    """
    n = 2 * k + 1
    v = k // 2
    bounds = []
    for i in range(v):
        col = 2 * i + 1
        if col == k - 1:
            bounds.append((1, k - 1))
        else:
            bounds.append((1, n - 2))
    return bounds


def _corner_suffix(k: int) -> list[dict]:
    """Travel ranges achievable by serpentine leg suffixes.

    ``suffix[i][row]`` is the (min, max) total vertical travel of legs
    i..v-1 starting from ``row``, or None when infeasible; legs must end on
    row k-1 beside the climb column, and a leg from a to b is admissible
    when the swept interval fits the leg's bounds.  All values between min
    and max with min's parity are achievable.
    """
    v = k // 2
    bounds = _corner_leg_bounds(k)
    target = k - 1
    rows = range(1, 2 * k)
    suffix: list[dict] = [dict() for _ in range(v + 1)]
    suffix[v] = {r: ((0, 0) if r == target else None) for r in rows}
    for i in range(v - 1, -1, -1):
        blo, bhi = bounds[i]
        for r in rows:
            best = None
            for e in range(blo, bhi + 1):
                if not (blo <= min(r, e) and max(r, e) <= bhi):
                    continue
                nxt = suffix[i + 1].get(e)
                if nxt is None:
                    continue
                step = abs(r - e)
                lo, hi = step + nxt[0], step + nxt[1]
                best = (
                    (lo, hi) if best is None else (min(best[0], lo), max(best[1], hi))
                )
            suffix[i][r] = best
    return suffix


def _corner_travel_range(k: int) -> tuple[int, int]:
    """Min and max total vertical travel of the corner serpentine legs."""
    rng = _corner_suffix(k)[0].get(k)
    if rng is None:
        raise AssertionError(f"corner serpentine has no legs at k={k}")
    return rng


def _corner_legs(k: int, d: int) -> list[int]:
    """Run endpoint rows consuming exactly d squares of vertical travel.

    Greedy forward construction: each leg takes the largest admissible swing
    that leaves the remaining travel achievable by the suffix table.
    """
    v = k // 2
    bounds = _corner_leg_bounds(k)
    suffix = _corner_suffix(k)
    cur, rem = k, d
    legs = []
    for i in range(v):
        blo, bhi = bounds[i]
        chosen = None
        for e in sorted(range(blo, bhi + 1), key=lambda e: -abs(e - cur)):
            if not (blo <= min(cur, e) and max(cur, e) <= bhi):
                continue
            nxt = suffix[i + 1].get(e)
            if nxt is None:
                continue
            left = rem - abs(cur - e)
            if nxt[0] <= left <= nxt[1] and (left - nxt[0]) % 2 == 0:
                chosen = e
                break
        if chosen is None:
            raise ValueError(f"no corner leg assignment for k={k}, d={d}")
        legs.append(chosen)
        rem -= abs(cur - chosen)
        cur = chosen
    if rem:
        raise AssertionError("corner legs left unconsumed travel")
    return legs


def _corner_serpentine(k: int, m: int) -> list[tuple[int, int]]:
    """Left-to-top chain: serpentine in the lower-left strip, then a climb.

    The climb along the exit column can host rectangular detours into the
    right half (stride-4 slots) when the serpentine strip alone cannot reach
    the requested length.
    """
    n = 2 * k + 1
    v = k // 2
    d_min, d_max = _corner_travel_range(k)
    slots = list(range(k, 2 * k - 3 + 1, 4))
    detour_cap = 2 * len(slots) * (k - 1)
    if not (n + 1 + d_min <= m <= n + 1 + d_max + detour_cap):
        raise ValueError(f"corner serpentine cannot reach m={m} at k={k}")
    need = m - (n + 1)  # always odd: m and n are odd
    d = min(d_max, need)
    detour = need - d
    legs = _corner_legs(k, d)
    squares = [(0, k)]
    cur = k
    for i in range(v):
        col = 2 * i + 1
        target = legs[i]
        step = 1 if target >= cur else -1
        for r in range(cur, target + step, step):
            squares.append((col, r))
        cur = target
        if i < v - 1:
            squares.append((col + 1, cur))
    if k % 2 == 1:
        squares.append((k - 1, k - 1))
    # climb with optional detours
    detour_per_slot = {}
    rem_det = detour // 2
    for r in slots:
        take = min(k - 1, rem_det)
        if take:
            detour_per_slot[r] = take
            rem_det -= take
    if rem_det:
        raise AssertionError("detour bookkeeping failed")
    r = k - 1
    while r <= n - 1:
        squares.append((k, r))
        if r in detour_per_slot:
            dd = detour_per_slot[r]
            for c in range(k + 1, k + dd + 1):
                squares.append((c, r))
            squares.append((k + dd, r + 1))
            for c in range(k + dd, k, -1):
                squares.append((c, r + 2))
            r += 2  # the (k, r+2) square is appended by the loop head
            continue
        r += 1
    if len(squares) != m:
        raise AssertionError(f"corner serpentine built {len(squares)} squares, wanted {m}")
    return squares


def _corner_chain(k: int, m: int) -> list[tuple[int, int]]:
    """Canonical left-to-top chain of odd length m."""
    n = 2 * k + 1
    if m == n:
        squares = [(c, k) for c in range(k + 1)]
        squares += [(k, r) for r in range(k + 1, n)]
        return squares
    j = (m - n) // 2
    if m <= n + 2 * (k - 1):
        # dropped-L: dip j rows below the middle before turning
        squares = [(0, k), (1, k)]
        squares += [(1, k - i) for i in range(1, j + 1)]
        squares += [(c, k - j) for c in range(2, k + 1)]
        squares += [(k, r) for r in range(k - j + 1, n)]
        if len(squares) != m:
            raise AssertionError("dropped-L length mismatch")
        return squares
    return _corner_serpentine(k, m)


def _chain_capacity(k: int) -> int:
    """Largest odd chain length feasible for *every* entry/exit geometry.

    The hard ceiling is k^2, the bound the scale-band selection relies on;
    below it the binding constraint is whichever of the straight or corner
    families saturates first.
    """
    n = 2 * k + 1
    straight_max = n + 2 * (k // 2) * (k - 1)
    d_max = _corner_travel_range(k)[1]
    slots = len(range(k, 2 * k - 3 + 1, 4))
    corner_max = max(n + 2 * (k - 1), n + 1 + d_max + 2 * slots * (k - 1))
    cap = min(straight_max, corner_max, k * k)
    return cap if cap % 2 else cap - 1


def _validate_chain(squares, n: int, m: int, entry: str, exit_: str) -> None:
    """Assert the geometric chain contract; raises AssertionError on breach."""
    assert len(squares) == m, f"length {len(squares)} != {m}"
    assert len(set(squares)) == m, "chain revisits a square"
    first, last = squares[0], squares[-1]
    assert first == _SIDE_MIDDLE[entry](n), f"bad entry square {first}"
    assert last == _SIDE_MIDDLE[exit_](n), f"bad exit square {last}"
    for i, (c, r) in enumerate(squares):
        assert 0 <= c < n and 0 <= r < n, "square outside the grid"
        if i not in (0, m - 1):
            assert 1 <= c <= n - 2 and 1 <= r <= n - 2, (
                f"interior square {squares[i]} touches the boundary"
            )
    for i in range(m - 1):
        dc = abs(squares[i][0] - squares[i + 1][0])
        dr = abs(squares[i][1] - squares[i + 1][1])
        assert dc + dr == 1, f"squares {i},{i + 1} not side-adjacent"
    for i in range(m):
        for j in range(i + 2, m):
            dc = abs(squares[i][0] - squares[j][0])
            dr = abs(squares[i][1] - squares[j][1])
            if j - i == 2:
                assert dc + dr >= 2, f"squares {i},{j} touch along a side"
            else:
                assert max(dc, dr) >= 2, f"squares {i},{j} too close (gap {j - i})"


def _chain_with_sides(k: int, m: int, entry: str, exit_: str):
    """Oriented chain plus per-square (entry, exit) side labels."""
    n = 2 * k + 1
    opposite = {"L": "R", "R": "L", "T": "B", "B": "T"}
    if exit_ == opposite[entry]:
        base = _straight_chain(k, m)
        canon = ("L", "R")
    else:
        base = _corner_chain(k, m)
        canon = ("L", "T")
    for action, relabel in _TRANSFORMS:
        if relabel[canon[0]] == entry and relabel[canon[1]] == exit_:
            squares = [action(c, r, n - 1) for c, r in base]
            break
    else:  # pragma: no cover - the transform table is exhaustive
        raise AssertionError(f"no symmetry maps {canon} to {(entry, exit_)}")
    _validate_chain(squares, n, m, entry, exit_)
    step_side = {(1, 0): ("R", "L"), (-1, 0): ("L", "R"), (0, 1): ("T", "B"), (0, -1): ("B", "T")}
    entries = [entry]
    exits = []
    for i in range(m - 1):
        dc = squares[i + 1][0] - squares[i][0]
        dr = squares[i + 1][1] - squares[i][1]
        out_side, in_side = step_side[(dc, dr)]
        exits.append(out_side)
        entries.append(in_side)
    exits.append(exit_)
    return squares, entries, exits


def _select_levels(alpha: float, depth: int, k_max: int = 12):
    """Greedy (k, m) sequence keeping eps_r / delta_r^alpha inside [1/3, 3].

    Smallest k wins; among feasible odd m in [n, capacity] the one pulling
    the running ratio closest to 1 wins.
    """
    levels = []
    log_ratio = 0.0
    band = math.log(3.0)
    for level in range(depth):
        placed = False
        for k in range(3, k_max + 1):
            n = 2 * k + 1
            cap = _chain_capacity(k)
            best = None
            for m in range(n, cap + 1, 2):
                cand = log_ratio + alpha * math.log(m) - math.log(n)
                if abs(cand) <= band and (best is None or abs(cand) < abs(best[1])):
                    best = (m, cand)
            if best is not None:
                levels.append((k, best[0]))
                log_ratio = best[1]
                placed = True
                break
        if not placed:
            raise ValueError(
                f"level {level + 1}: no odd m in [2k+1, k^2] with k <= {k_max} keeps "
                f"eps/delta^alpha in [1/3, 3] at alpha={alpha} "
                f"(running log-ratio {log_ratio:.3f}); a larger k_max may help"
            )
    return levels


class ChainCurve:
    """On-demand evaluator for the nested-chain curve on [0, 1] -> [0, 1]^2.

    Level r subdivides each square into (2 k_r + 1)^2 cells and routes a
    chain of m_r interior squares between the sides inherited from level
    r - 1.  Time is split in mixed radix (m_1, ..., m_depth); a query
    descends one chain per level and returns the center of the final square.
    The full resolution is never materialized: at the shipped defaults the
    finest grid has ~1.7e8 cells.

    The curve is alpha-Holder from below and above up to fixed constants:
    queries gap apart by delta_r move the value by about eps_r, with
    eps_r / delta_r^alpha pinned to [1/3, 3] by level selection.
    """

    def __init__(self, alpha: float, depth: int, k_max: int = 12):
        if not 0.5 < alpha < 1:
            raise ValueError("alpha must lie in (1/2, 1)")
        if not 1 <= depth <= 8:
            raise ValueError("depth must lie in 1..8")
        self.alpha = float(alpha)
        self.depth = int(depth)
        self.levels = _select_levels(alpha, depth, k_max=k_max)
        self.n_seq = [2 * k + 1 for k, _ in self.levels]
        self.m_seq = [m for _, m in self.levels]
        self.eps = np.cumprod([1.0 / n for n in self.n_seq])
        self.delta = np.cumprod([1.0 / m for m in self.m_seq])
        self.total_cells = 1
        for m in self.m_seq:
            self.total_cells *= m
        self._cache: dict = {}

    def _chain(self, level: int, entry: str, exit_: str):
        k, m = self.levels[level]
        key = (k, m, entry, exit_)
        if key not in self._cache:
            self._cache[key] = _chain_with_sides(k, m, entry, exit_)
        return self._cache[key]

    def digits(self, index: int) -> list[int]:
        """Mixed-radix digits of a flat cell index, most significant first."""
        if not 0 <= index < self.total_cells:
            raise IndexError("cell index out of range")
        out = []
        rest = index
        for m in reversed(self.m_seq):
            out.append(rest % m)
            rest //= m
        return out[::-1]

    def eval_index(self, index: int) -> np.ndarray:
        """Center of the depth-level square holding the given time cell."""
        digits = self.digits(index)
        x0, y0, size = 0.0, 0.0, 1.0
        entry, exit_ = "L", "R"
        for level, digit in enumerate(digits):
            squares, entries, exits = self._chain(level, entry, exit_)
            c, r = squares[digit]
            n = self.n_seq[level]
            size /= n
            x0 += c * size
            y0 += r * size
            entry, exit_ = entries[digit], exits[digit]
        return np.array([x0 + 0.5 * size, y0 + 0.5 * size])

    def eval(self, t) -> np.ndarray:
        """Curve value(s) at time(s) in [0, 1]."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((t_arr.size, 2))
        for i, ti in enumerate(t_arr):
            idx = min(max(int(ti * self.total_cells), 0), self.total_cells - 1)
            out[i] = self.eval_index(idx)
        if np.isscalar(t) or np.asarray(t).ndim == 0:
            return out[0]
        return out

    def sample(self, n_samples: int = 2**14) -> DriverPath:
        """Uniform-grid sample as a DriverPath (capped at 2**16 points)."""
        n_samples = min(int(n_samples), 2**16)
        if n_samples < 2:
            raise ValueError("need at least two samples")
        times = np.linspace(0.0, 1.0, n_samples)
        return DriverPath(
            times, self.eval(times), holder_alpha=self.alpha, p=1.0 / self.alpha
        )

    def band_stats(self, n_pairs: int, rng: np.random.Generator):
        """Empirical scale-band constants over random query pairs.

        For each pair a level r in [1, depth-1] is drawn, then a time gap in
        (delta_{r+1}, delta_r]; the pair contributes |du|/eps_r to the upper
        constant and |du|/eps_{r+1} to the lower one (sup norm).  The deepest
        band is excluded: the evaluator is piecewise constant below the depth
        resolution, so gaps under delta_depth can sit inside one cell.
        """
        c_upper, c_lower = 0.0, math.inf
        for _ in range(n_pairs):
            r = int(rng.integers(1, self.depth))  # 1 .. depth-1
            lo, hi = self.delta[r], self.delta[r - 1]
            gap = math.exp(rng.uniform(math.log(lo), math.log(hi)))
            gap_cells = max(int(gap * self.total_cells), 1)
            start = int(rng.integers(0, self.total_cells - gap_cells))
            du = self.eval_index(start + gap_cells) - self.eval_index(start)
            mag = float(np.max(np.abs(du)))
            c_upper = max(c_upper, mag / self.eps[r - 1])
            c_lower = min(c_lower, mag / self.eps[r])
        return c_lower, c_upper


def build_chain_curve(alpha: float, depth: int) -> ChainCurve:
    return ChainCurve(alpha, depth)


def holder_chain_curve(alpha: float, depth: int, n_samples: int = 2**14) -> DriverPath:
    """Sampled nested-chain curve with prescribed Holder exponent."""
    return build_chain_curve(alpha, depth).sample(n_samples)


# ---------------------------------------------------------------------------
# Explosion driver from growth envelopes


def adaptive_simpson(fn, a: float, b: float, rtol: float = 1e-8,
                     max_depth: int = 40) -> float:
    """Classic adaptive Simpson quadrature with relative tolerance control."""
    fa, fb = fn(a), fn(b)
    mid = 0.5 * (a + b)
    fm = fn(mid)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    scale = max(abs(whole), 1e-300)

    def recurse(lo, hi, flo, fmid, fhi, acc, depth):
        m1 = 0.5 * (lo + 0.5 * (lo + hi))
        m2 = 0.5 * (0.5 * (lo + hi) + hi)
        f1, f2 = fn(m1), fn(m2)
        mid_ = 0.5 * (lo + hi)
        left = (mid_ - lo) / 6.0 * (flo + 4.0 * f1 + fmid)
        right = (hi - mid_) / 6.0 * (fmid + 4.0 * f2 + fhi)
        if depth >= max_depth or abs(left + right - acc) <= 15.0 * rtol * scale:
            return left + right + (left + right - acc) / 15.0
        return recurse(lo, mid_, flo, f1, fmid, left, depth + 1) + recurse(
            mid_, hi, fmid, f2, fhi, right, depth + 1
        )

    return recurse(a, b, fa, fm, fb, whole, 0)


def _cumulative_simpson(fn, grid: np.ndarray, rtol: float = 1e-8) -> np.ndarray:
    """Cumulative integral of ``fn`` along ``grid`` (vectorized per cell).

    Every cell is integrated with composite Simpson, doubling the point count
    until the Richardson difference is below tolerance relative to the
    running total.  ``fn`` must accept arrays.
    """
    lo, hi = grid[:-1], grid[1:]
    prev = None
    npts = 2
    while True:
        offs = np.linspace(0.0, 1.0, 2 * npts + 1)
        pts = lo[:, None] + (hi - lo)[:, None] * offs[None, :]
        vals = fn(pts.ravel()).reshape(pts.shape)
        weights = np.ones(2 * npts + 1)
        weights[1:-1:2] = 4.0
        weights[2:-1:2] = 2.0
        cells = (hi - lo) / (6.0 * npts) * (vals * weights[None, :]).sum(axis=1)
        if prev is not None:
            err = np.max(np.abs(cells - prev))
            if err <= rtol * max(float(np.sum(np.abs(cells))), 1e-300):
                break
            if npts > 64:
                break
        prev = cells
        npts *= 2
    return np.concatenate([[0.0], np.cumsum(cells)])


@dataclass(frozen=True)
class ExplosionConfig:
    """Tuning for the blow-up driver construction."""

    y_max: float = 1e7
    n_grid: int = 2**14
    u_points: int = 512
    u_max: float = 1e4
    rtol: float = 1e-8
    t_pad: float = 1.05

    def __post_init__(self):
        if self.y_max <= 10 or self.n_grid < 256 or self.u_points < 8:
            raise ValueError("explosion config out of its sensible range")
        if not self.t_pad > 1:
            raise ValueError("t_pad must exceed 1")


def power_law_envelope(growth_exp: float, area_exp: float, beta: float) -> GrowthEnvelope:
    """Envelope pair D(R) = R^growth_exp, A(R) = R^area_exp."""
    env = GrowthEnvelope(
        growth=lambda r: np.asarray(r, dtype=float) ** growth_exp,
        area_growth=lambda r: np.asarray(r, dtype=float) ** area_exp,
        beta=beta,
    )
    return env


@dataclass
class ProcessedEnvelope:
    """Homogenized and mollified envelope data shared by driver and criterion.

    ``dstar``/``astar`` interpolate log-log tables, which is exact for
    power-law inputs.  ``integrand(y)`` is the blow-up time density
    ``astar^-rho2 * dstar^-rho1`` whose total integral is the blow-up time.
    """

    p: float
    beta: float
    r_hom: int
    rho1: float
    rho2: float
    y_tab: np.ndarray
    dstar_tab: np.ndarray
    astar_tab: np.ndarray

    def __post_init__(self):
        self._log_y = np.log(self.y_tab)
        self._log_d = np.log(self.dstar_tab)
        self._log_a = np.log(self.astar_tab)

    def _interp(self, y, log_tab):
        y = np.asarray(y, dtype=float)
        out = np.exp(np.interp(np.log(np.maximum(y, self.y_tab[0])), self._log_y, log_tab))
        return out if out.ndim else float(out)

    def dstar(self, y):
        return self._interp(y, self._log_d)

    def astar(self, y):
        return self._interp(y, self._log_a)

    def integrand(self, y):
        return self.astar(y) ** (-self.rho2) * self.dstar(y) ** (-self.rho1)

    def phase_density(self, y):
        return (self.astar(y) / self.dstar(y)) ** (1.0 / self.beta)

    def radius_factor(self, y):
        d, a = self.dstar(y), self.astar(y)
        return (d ** (1.0 - self.beta) / a) ** (1.0 / self.beta)


def _mollifier_weights(n_nodes: int = 65):
    """Simpson nodes/weights of the unit-mass bump on [1, 2]."""
    u = np.linspace(1.0, 2.0, n_nodes)
    w = np.exp(-1.0 / np.maximum(1.0 - (2.0 * u - 3.0) ** 2, 1e-12))
    w[0] = w[-1] = 0.0
    simps = np.ones(n_nodes)
    simps[1:-1:2] = 4.0
    simps[2:-1:2] = 2.0
    simps *= (u[1] - u[0]) / 3.0
    mass = float(np.sum(w * simps))
    return u, w * simps / mass


def process_envelope(
    envelope: GrowthEnvelope, p: float, config: ExplosionConfig | None = None
) -> ProcessedEnvelope:
    """Homogenize and mollify a growth envelope for blow-up computations.

    Homogenization takes the infimum of ``u^r D(y/u)`` over a geometric
    u-grid on [1, u_max], with ``r`` just above 1/min(rho1, rho2); the
    mollification averages over the dilation window [1, 2] against a bump,
    scaled by 2^-r.  Both steps map power laws to power laws (up to
    constants), which the acceptance oracle for the criterion relies on.
    """
    cfg = config or ExplosionConfig()
    beta = envelope.beta
    if not p - 1 < beta:
        raise ValueError(f"need beta > p - 1 for the construction (beta={beta}, p={p})")
    envelope.validate()
    rho1 = (beta * p + 1.0 - p) / beta
    rho2 = (p - 1.0) / beta
    r_hom = int(math.floor(1.0 / min(rho1, rho2))) + 1
    u_grid = np.geomspace(1.0, cfg.u_max, cfg.u_points)
    u_pow = u_grid**r_hom

    def homogenized(vals_fn, y):
        # inf over the u-grid of u^r * f(y/u); vectorized in y, chunked so
        # the (points, u_points) work matrix stays a few tens of megabytes
        y = np.asarray(y, dtype=float).ravel()
        out = np.empty(y.size)
        step = 8192
        for lo in range(0, y.size, step):
            block = y[lo : lo + step, None] / u_grid[None, :]
            out[lo : lo + step] = np.min(u_pow[None, :] * vals_fn(block), axis=1)
        return out

    # dense tables out to 2*y_max so the mollifier window never extrapolates
    y_tab = np.geomspace(1.0, 2.0 * cfg.y_max, cfg.n_grid + 1)
    nodes, weights = _mollifier_weights()
    d_h = homogenized(envelope.growth, np.outer(y_tab, nodes)).reshape(
        y_tab.size, nodes.size
    )
    a_h = homogenized(envelope.area_growth, np.outer(y_tab, nodes)).reshape(
        y_tab.size, nodes.size
    )
    scale = 2.0**-r_hom
    dstar_tab = scale * d_h @ weights
    astar_tab = scale * a_h @ weights
    return ProcessedEnvelope(
        p=p,
        beta=beta,
        r_hom=r_hom,
        rho1=rho1,
        rho2=rho2,
        y_tab=y_tab,
        dstar_tab=dstar_tab,
        astar_tab=astar_tab,
    )


@dataclass
class ExplosionDriver:
    """A driver path engineered to blow up its companion system in finite time.

    ``path`` spirals with radius shrinking to zero as t approaches
    ``t_star`` (and is frozen at the origin afterwards), while the scalar
    state y(t) of ``field`` grows without bound.  ``state_trajectory``
    reports that growth on the construction grid with the explosion index
    set at the first crossing of ``threshold``.
    """

    path: DriverPath
    field: VectorField
    t_star: float
    y_grid: np.ndarray
    t_grid: np.ndarray
    phase: np.ndarray
    processed: ProcessedEnvelope
    threshold: float = 1e6

    def __iter__(self):
        # unpacks as (field, path, t_star) for callers that want the bare triple
        return iter((self.field, self.path, self.t_star))

    def state_of_t(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        logy = np.interp(t, self.t_grid, np.log(self.y_grid))
        return np.exp(logy)

    def state_trajectory(self) -> Trajectory:
        y = self.y_grid
        exploded = np.nonzero(y > self.threshold)[0]
        stop = exploded[0] if exploded.size else y.size - 1
        return Trajectory(
            times=self.t_grid[: stop + 1],
            states=y[: stop + 1, None],
            scheme="construction",
            exploded_at=int(exploded[0]) if exploded.size else None,
        )


def explosion_driver(
    envelope: GrowthEnvelope,
    p: float,
    gamma: float | None = None,
    config: ExplosionConfig | None = None,
) -> ExplosionDriver:
    """Build the spiral driver with a prescribed finite blow-up time.

    ``gamma`` is the smoothness grade claimed for the constructed field; it
    defaults to 1 + beta and must not exceed it (the construction cannot
    deliver more) while staying above p (below that the correction theory
    does not apply).  Unpack the result as ``field, path, t_star`` or keep
    the richer object.

    The state is time-changed so that ``y'(t) = D*(y)``-paced growth costs
    total time ``integral_1^inf astar^-rho2 dstar^-rho1 dy``; the driver
    rotates with phase ``lambda(y)`` and radius ``alpha(y)`` chosen so that
    ``f(y) x'(t) = y'(t)`` holds identically.  The identity
    ``dstar * radius * phase' = 1`` is what makes the construction
    self-verifying: any residual seen downstream is quadrature and
    interpolation error, not modeling error.

    Raises ValueError when the blow-up integral diverges (no finite t_star).
    """
    cfg = config or ExplosionConfig()
    if gamma is None:
        gamma = 1.0 + envelope.beta
    if not p < gamma <= 1.0 + envelope.beta + 1e-12:
        raise ValueError(
            f"gamma={gamma} must lie in (p, 1 + beta] = ({p}, {1.0 + envelope.beta}]"
        )
    proc = process_envelope(envelope, p, cfg)
    y = np.geomspace(1.0, cfg.y_max, cfg.n_grid + 1)
    t_of_y = _cumulative_simpson(proc.integrand, y, cfg.rtol)
    lam = _cumulative_simpson(proc.phase_density, y, cfg.rtol)

    # close the time integral over (y_max, inf) by power-tail extrapolation
    tail_window = y > y[-1] / 4.0
    ly, lf = np.log(y[tail_window]), np.log(proc.integrand(y[tail_window]))
    slope = np.polyfit(ly, lf, 1)[0]
    if slope >= -1.0 - 1e-6:
        raise ValueError(
            "blow-up time integral diverges for this envelope "
            f"(local exponent {-slope:.4f} <= 1)"
        )
    tail = proc.integrand(y[-1]) * y[-1] / (-slope - 1.0)
    t_star = float(t_of_y[-1] + tail)

    radius = proc.radius_factor(y)
    xy = np.column_stack([radius * np.cos(lam), radius * np.sin(lam)])
    times = t_of_y.copy()
    # freeze the driver at the origin from t_star onward
    t_end = cfg.t_pad * t_star
    times = np.concatenate([times, [t_star, t_end]])
    xy = np.vstack([xy, [0.0, 0.0], [0.0, 0.0]])
    path = DriverPath(times, xy, holder_alpha=None, p=p)

    y_lo = float(y[0])
    lam_tab, log_y_tab = lam, np.log(y)

    def func(state):
        yy = max(float(state[0]), y_lo)
        lam_here = float(np.interp(math.log(yy), log_y_tab, lam_tab))
        d_here = float(proc.dstar(yy))
        return np.array([[-math.sin(lam_here) * d_here, math.cos(lam_here) * d_here]])

    field = VectorField(1, 2, func, smoothness=gamma)
    return ExplosionDriver(
        path=path,
        field=field,
        t_star=t_star,
        y_grid=y,
        t_grid=t_of_y,
        phase=lam,
        processed=proc,
    )


# ---------------------------------------------------------------------------
# Serialization


def save_driver(filename, path: DriverPath, area: AreaProcess | None = None) -> None:
    """Write a path (and optional area) as canonical JSON.

    Floats serialize via repr so a load/save round trip is byte-identical.
    """
    payload = {
        "d": path.d,
        "times": path.times.tolist(),
        "values": path.values.tolist(),
        "holder_alpha": path.holder_alpha,
        "p": path.p,
        "kind": area.kind if area is not None else None,
        "seed": area.seed if area is not None else None,
        "substeps": area.substeps if area is not None else None,
        "areas": area.per_interval.tolist() if area is not None else None,
    }
    with open(filename, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_driver(filename):
    """Inverse of :func:`save_driver`; returns ``(path, area_or_None)``."""
    with open(filename) as fh:
        payload = json.load(fh)
    path = DriverPath(
        np.asarray(payload["times"], dtype=float),
        np.asarray(payload["values"], dtype=float),
        holder_alpha=payload.get("holder_alpha"),
        p=payload.get("p"),
    )
    if payload.get("areas") is None:
        return path, None
    area = AreaProcess(
        path,
        np.asarray(payload["areas"], dtype=float),
        payload["kind"],
        seed=payload.get("seed"),
        substeps=payload.get("substeps"),
    )
    return path, area
