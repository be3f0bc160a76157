"""Pathwise stochastic calculus on uniformly sampled paths.

All processes live on a shared uniform :class:`TimeGrid`.  Integrals are the
finite Riemann sums themselves (left endpoint for Ito, midpoint for
Stratonovich, increment products for covariation), not approximations of a
separate limit object: the discrete identities used by the verifier
(midpoint product rule, ``strat - ito = cov/2``) hold exactly up to
floating-point rounding.

Wiener increments come from a counter-based generator (Philox keyed by the
seed) through the inverse normal CDF, one draw per increment index.  A path
is therefore a pure function of ``(grid, seed)``, extending a path in time
never changes earlier increments, and the increments after any index can be
regenerated from a different sub-seed while the prefix stays bitwise equal.
Floating-point caveat: bitwise reproducibility is guaranteed for a fixed
platform/numpy build; across platforms the last ulp of ``ndtri``/``exp`` may
differ.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

__all__ = [
    "TimeGrid",
    "SamplePath",
    "RandomClock",
    "GridMismatchError",
    "sample_wiener",
    "sample_wiener_tail_swap",
    "ito_integral",
    "stratonovich_integral",
    "quadratic_covariation",
    "check_product_rule",
    "exp_path",
    "build_clock",
    "constant_path",
    "path_from_values",
    "restrict",
    "write_path_csv",
]

# exp overflow guard: exp(x) overflows float64 slightly above x = 709
_EXP_ARG_LIMIT = 700.0


class GridMismatchError(ValueError):
    """Raised when two paths do not share the same time grid."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of [0, horizon] with ``steps`` increments."""

    horizon: float
    steps: int

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"grid needs at least one step, got {self.steps}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)

    def refine(self, factor: int) -> "TimeGrid":
        return TimeGrid(self.horizon, self.steps * factor)

    def index_at(self, t: float) -> int:
        """Index of the grid node closest to ``t`` (must lie on the grid)."""
        k = int(round(t / self.dt))
        if not 0 <= k <= self.steps or abs(k * self.dt - t) > 1e-9 * max(self.dt, 1.0):
            raise ValueError(f"time {t} is not a node of {self}")
        return k


@dataclass(frozen=True)
class SamplePath:
    """A real-valued process sampled at every node of a time grid.

    ``lineage`` records how the values were produced (seed and transform
    chain) so derived artifacts are traceable to their generating seed.
    """

    grid: TimeGrid
    values: np.ndarray
    lineage: str = "anonymous"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (self.grid.steps + 1,):
            raise ValueError(
                f"expected {self.grid.steps + 1} values, got shape {values.shape}"
            )
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def at(self, t: float) -> float:
        return float(self.values[self.grid.index_at(t)])

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)


@dataclass(frozen=True)
class RandomClock:
    """Strictly increasing rescaled time tau(t) sampled on a grid."""

    grid: TimeGrid
    values: np.ndarray
    lineage: str = "clock"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (self.grid.steps + 1,):
            raise ValueError("clock needs one value per grid node")
        if values[0] != 0.0:
            raise ValueError("clock must start at zero")
        if not np.all(np.diff(values) > 0):
            raise ValueError("clock must be strictly increasing")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def horizon(self) -> float:
        return float(self.values[-1])


def _require_shared_grid(x: SamplePath, y: SamplePath) -> None:
    if x.grid != y.grid:
        raise GridMismatchError(f"paths on different grids: {x.grid} vs {y.grid}")


def _standard_normals(seed: int, count: int) -> np.ndarray:
    """``count`` unit normals, the i-th a pure function of (seed, i)."""
    raw = np.random.Philox(key=int(seed)).random_raw(count)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


def sample_wiener(grid: TimeGrid, seed: int) -> SamplePath:
    """Sample a Wiener path on ``grid``.

    Increments are independent N(0, dt) variables; increment ``i`` depends
    only on ``(seed, i)``, which makes prefixes stable under extension and
    under tail regeneration (see :func:`sample_wiener_tail_swap`).
    """
    z = _standard_normals(seed, grid.steps)
    w = np.empty(grid.steps + 1)
    w[0] = 0.0
    np.cumsum(z * np.sqrt(grid.dt), out=w[1:])
    return SamplePath(grid, w, lineage=f"wiener(seed={seed})")


def sample_wiener_tail_swap(
    grid: TimeGrid, seed: int, tail_seed: int, split_index: int
) -> SamplePath:
    """Wiener path using ``seed`` increments before ``split_index`` and
    ``tail_seed`` increments from it onward.

    The prefix up to node ``split_index`` is bitwise identical to
    ``sample_wiener(grid, seed)``; used by the causality check.
    """
    if not 0 <= split_index <= grid.steps:
        raise ValueError("split index outside grid")
    z = _standard_normals(seed, grid.steps)
    z_tail = _standard_normals(tail_seed, grid.steps)
    z[split_index:] = z_tail[split_index:]
    w = np.empty(grid.steps + 1)
    w[0] = 0.0
    np.cumsum(z * np.sqrt(grid.dt), out=w[1:])
    return SamplePath(
        grid, w, lineage=f"wiener(seed={seed},tail={tail_seed}@{split_index})"
    )


def constant_path(grid: TimeGrid, value: float) -> SamplePath:
    return SamplePath(grid, np.full(grid.steps + 1, float(value)), lineage=f"const({value})")


def path_from_values(grid: TimeGrid, values, lineage: str = "explicit") -> SamplePath:
    return SamplePath(grid, np.asarray(values, dtype=np.float64), lineage=lineage)


def _running_sum(terms: np.ndarray) -> np.ndarray:
    out = np.empty(terms.size + 1)
    out[0] = 0.0
    np.cumsum(terms, out=out[1:])
    return out


def ito_integral(x: SamplePath, y: SamplePath) -> SamplePath:
    """Running left-endpoint Riemann sum of X against dY."""
    _require_shared_grid(x, y)
    terms = x.values[:-1] * np.diff(y.values)
    return SamplePath(x.grid, _running_sum(terms), lineage=f"ito[{x.lineage},{y.lineage}]")


def stratonovich_integral(x: SamplePath, y: SamplePath) -> SamplePath:
    """Running midpoint Riemann sum of X against dY."""
    _require_shared_grid(x, y)
    terms = 0.5 * (x.values[:-1] + x.values[1:]) * np.diff(y.values)
    return SamplePath(x.grid, _running_sum(terms), lineage=f"strat[{x.lineage},{y.lineage}]")


def quadratic_covariation(x: SamplePath, y: SamplePath) -> SamplePath:
    """Running sum of increment products dX * dY."""
    _require_shared_grid(x, y)
    terms = np.diff(x.values) * np.diff(y.values)
    return SamplePath(x.grid, _running_sum(terms), lineage=f"cov[{x.lineage},{y.lineage}]")


def check_product_rule(x: SamplePath, y: SamplePath) -> float:
    """Max-norm residual of the midpoint product rule.

    ``X_t Y_t - X_0 Y_0 = int X o dY + int Y o dX`` telescopes exactly for
    midpoint sums; the returned residual is pure rounding noise.
    """
    _require_shared_grid(x, y)
    lhs = x.values * y.values - x.values[0] * y.values[0]
    rhs = stratonovich_integral(x, y).values + stratonovich_integral(y, x).values
    return float(np.abs(lhs - rhs).max())


def exp_path(w: SamplePath, alpha: float) -> SamplePath:
    """Node-wise ``exp(alpha * W)``."""
    scale = np.abs(alpha * w.values).max()
    if scale > _EXP_ARG_LIMIT:
        raise OverflowError(
            f"exp argument reaches {scale:.1f}, beyond the float64 range guard"
        )
    return SamplePath(w.grid, np.exp(alpha * w.values), lineage=f"exp({alpha}*{w.lineage})")


def build_clock(w: SamplePath, mode: str = "trapezoid") -> RandomClock:
    """Rescaled time tau(t) = int_0^t exp(-W(s)/2) ds by trapezoid quadrature.

    Strictly increasing because the integrand is positive.  ``mode
    'lookahead'`` is a deliberately broken variant (each increment peeks one
    node into the future) kept as the negative control for the causality
    check; never use it for real runs.
    """
    e = np.exp(-0.5 * w.values)
    dt = w.grid.dt
    if mode == "trapezoid":
        steps = 0.5 * dt * (e[:-1] + e[1:])
    elif mode == "lookahead":
        e_next = np.concatenate([e[1:], e[-1:]])
        steps = 0.5 * dt * (e[:-1] + e_next[1:])
    else:
        raise ValueError(f"unknown clock mode {mode!r}")
    tau = np.empty(w.grid.steps + 1)
    tau[0] = 0.0
    np.cumsum(steps, out=tau[1:])
    return RandomClock(w.grid, tau, lineage=f"clock[{mode},{w.lineage}]")


def restrict(path: SamplePath, factor: int) -> SamplePath:
    """Restrict a path to every ``factor``-th node (nested coarser grid).

    The restriction of a Wiener path is a Wiener path on the coarse grid;
    refinement ladders compare residuals across grids on the same underlying
    realization this way.
    """
    if factor < 1 or path.grid.steps % factor:
        raise ValueError(f"{factor} does not divide {path.grid.steps} steps")
    coarse = TimeGrid(path.grid.horizon, path.grid.steps // factor)
    return SamplePath(coarse, path.values[::factor].copy(),
                      lineage=f"restrict({factor},{path.lineage})")


def write_path_csv(path: SamplePath, destination) -> None:
    """Write (t, value) rows to ``destination`` (path or file object)."""
    close = False
    if hasattr(destination, "write"):
        fh = destination
    else:
        fh = open(destination, "w", newline="")
        close = True
    try:
        writer = csv.writer(fh)
        writer.writerow(["t", "value"])
        for t, v in zip(path.grid.nodes, path.values):
            writer.writerow([repr(float(t)), repr(float(v))])
    finally:
        if close:
            fh.close()
