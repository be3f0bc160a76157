"""Spatial domains, piecewise-constant gas data, and the energy threshold.

A domain is an axis-aligned box, optionally periodic, partitioned into
axis-aligned sub-boxes on which the initial density and temperature are
constant.  The pressure offset ``lambda0`` is shared by all subdomains and
must exceed every ``rho0 * theta0`` product; the target kinetic energy
density on each subdomain follows from it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Box",
    "DomainSpec",
    "GasData",
    "InfeasibleEnergyError",
    "unit_square",
    "kinetic_target",
    "initial_energy_density",
    "energy_threshold",
    "required_lambda",
    "sample_gas_data",
]


class InfeasibleEnergyError(ValueError):
    """Target total energy below the reachable threshold."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned box [lo_k, hi_k) per axis."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("box corner dimensions differ")
        if not all(h > l for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"degenerate box {self.lo}..{self.hi}")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def lengths(self) -> tuple:
        return tuple(h - l for l, h in zip(self.lo, self.hi))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def contains(self, point, closed: bool = False) -> bool:
        op = (lambda a, b: a <= b) if closed else (lambda a, b: a < b)
        return all(l <= p and op(p, h) for l, p, h in zip(self.lo, point, self.hi))


@dataclass(frozen=True)
class DomainSpec:
    """Box domain with boundary mode and a sub-box partition.

    ``boundary`` is ``"periodic"`` (torus, no walls) or ``"wall"``
    (impermeable on all sides).  Subdomains must tile the box exactly; the
    half-open convention assigns every interior interface to exactly one
    piece.
    """

    box: Box
    boundary: str = "periodic"
    subdomains: tuple = ()

    def __post_init__(self):
        if self.box.dim not in (2, 3):
            raise ValueError("only 2- and 3-dimensional boxes are supported")
        if self.boundary not in ("wall", "periodic"):
            raise ValueError(f"unknown boundary mode {self.boundary!r}")
        if not self.subdomains:
            object.__setattr__(self, "subdomains", (self.box,))
        self._check_partition()

    def _check_partition(self):
        vol = sum(sub.volume for sub in self.subdomains)
        if abs(vol - self.box.volume) > 1e-9 * self.box.volume:
            raise ValueError("subdomain volumes do not add up to the box volume")
        for i, a in enumerate(self.subdomains):
            if not (self.box.contains(a.lo, closed=True) and self.box.contains(a.hi, closed=True)):
                raise ValueError(f"subdomain {i} leaves the box")
            for b in self.subdomains[i + 1:]:
                overlap = all(
                    min(ah, bh) - max(al, bl) > 1e-12
                    for al, ah, bl, bh in zip(a.lo, a.hi, b.lo, b.hi)
                )
                if overlap:
                    raise ValueError("subdomains overlap")

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def n_subdomains(self) -> int:
        return len(self.subdomains)

    def subdomain_index(self, point) -> int:
        for i, sub in enumerate(self.subdomains):
            if sub.contains(point):
                return i
        # points on the closing faces of the box belong to the last piece
        for i, sub in enumerate(self.subdomains):
            if sub.contains(point, closed=True):
                return i
        raise ValueError(f"point {point} outside the domain")


def unit_square(boundary: str = "periodic", splits=None) -> DomainSpec:
    """Convenience constructor used throughout the tests and configs."""
    box = Box((0.0, 0.0), (1.0, 1.0))
    if splits is None:
        return DomainSpec(box, boundary)
    nx, ny = splits
    xs = np.linspace(0.0, 1.0, nx + 1)
    ys = np.linspace(0.0, 1.0, ny + 1)
    subs = tuple(
        Box((xs[i], ys[j]), (xs[i + 1], ys[j + 1]))
        for i in range(nx)
        for j in range(ny)
    )
    return DomainSpec(box, boundary, subs)


@dataclass(frozen=True)
class GasData:
    """Piecewise-constant initial state plus the shared pressure offset.

    ``rho0`` and ``theta0`` carry one value per subdomain.  ``gamma > 1`` is
    the adiabatic exponent; ``cv = 1/(gamma - 1)``.  ``lambda0`` must leave
    ``lambda0 - rho0*theta0`` positive on every piece so each target kinetic
    energy is positive.
    """

    rho0: tuple
    theta0: tuple
    gamma: float
    lambda0: float
    bounds: tuple = ((0.0, np.inf), (0.0, np.inf))  # (rho_lo, rho_hi), (theta_lo, theta_hi)

    def __post_init__(self):
        rho = tuple(float(r) for r in np.atleast_1d(self.rho0))
        theta = tuple(float(t) for t in np.atleast_1d(self.theta0))
        object.__setattr__(self, "rho0", rho)
        object.__setattr__(self, "theta0", theta)
        if len(rho) != len(theta):
            raise ValueError("rho0 and theta0 need one value per subdomain")
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        (rlo, rhi), (tlo, thi) = self.bounds
        for r, t in zip(rho, theta):
            if not (r > 0 and t > 0):
                raise ValueError("density and temperature must be positive")
            if not (rlo <= r <= rhi and tlo <= t <= thi):
                raise ValueError(f"data ({r}, {t}) violates bounds {self.bounds}")
            if not self.lambda0 - r * t > 0:
                raise ValueError(
                    f"lambda0 = {self.lambda0} does not exceed rho0*theta0 = {r * t}"
                )

    @property
    def cv(self) -> float:
        return 1.0 / (self.gamma - 1.0)

    @property
    def n_subdomains(self) -> int:
        return len(self.rho0)

    def pressure0(self, i: int) -> float:
        return self.rho0[i] * self.theta0[i]


def kinetic_target(data: GasData, i: int, dim: int = 2) -> float:
    """Per-subdomain target kinetic energy density K0 with
    (N/2) K0 = lambda0 - rho0 theta0."""
    gap = data.lambda0 - data.pressure0(i)
    if gap <= 0:
        raise ValueError("nonpositive kinetic target")
    return 2.0 * gap / dim


def initial_energy_density(data: GasData, i: int, dim: int = 2) -> float:
    """Total initial energy density on subdomain i:
    (2/N)(lambda0 - rho0 theta0) + cv rho0 theta0."""
    return 2.0 / dim * (data.lambda0 - data.pressure0(i)) + data.cv * data.pressure0(i)


def energy_threshold(domain: DomainSpec, rho0, theta0, gamma: float) -> float:
    """Infimum of achievable total energy over admissible pressure offsets.

    The offset must exceed max_i rho0_i theta0_i; letting it drop to that
    maximum leaves residual kinetic energy on every non-maximal piece, so
    the threshold is sum_i |Q_i| [ (2/N)(max_j p_j - p_i) + cv p_i ].
    """
    cv = 1.0 / (gamma - 1.0)
    dim = domain.dim
    p = np.array([r * t for r, t in zip(rho0, theta0)])
    vols = np.array([sub.volume for sub in domain.subdomains])
    return float(np.sum(vols * (2.0 / dim * (p.max() - p) + cv * p)))


def required_lambda(domain: DomainSpec, rho0, theta0, gamma: float,
                    energy_target: float) -> float:
    """Pressure offset that makes total initial energy equal the target.

    The total energy is linear in the offset, so the solve is closed form:
    sum_i |Q_i| [ (2/N)(lambda0 - p_i) + cv p_i ] = E_target.
    """
    threshold = energy_threshold(domain, rho0, theta0, gamma)
    if not energy_target > threshold:
        raise InfeasibleEnergyError(
            f"target energy {energy_target} is not above the threshold {threshold}"
        )
    cv = 1.0 / (gamma - 1.0)
    dim = domain.dim
    p = np.array([r * t for r, t in zip(rho0, theta0)])
    vols = np.array([sub.volume for sub in domain.subdomains])
    lam = (energy_target - np.sum(vols * (cv - 2.0 / dim) * p)) * dim / (2.0 * vols.sum())
    return float(lam)


def sample_gas_data(domain: DomainSpec, bounds, gamma: float, lambda0: float,
                    data_seed: int) -> GasData:
    """Draw per-subdomain (rho0, theta0) uniformly from the given bounds.

    One draw at load time per subdomain; the data depend only on
    ``data_seed`` and never on the driving noise.
    """
    (rlo, rhi), (tlo, thi) = bounds
    if not (0 < rlo <= rhi and 0 < tlo <= thi):
        raise ValueError(f"invalid data bounds {bounds}")
    raw = np.random.Philox(key=int(data_seed)).random_raw(2 * domain.n_subdomains)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    rho = rlo + (rhi - rlo) * u[: domain.n_subdomains]
    theta = tlo + (thi - tlo) * u[domain.n_subdomains:]
    return GasData(tuple(rho), tuple(theta), gamma, lambda0, bounds=bounds)
