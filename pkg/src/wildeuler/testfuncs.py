"""Smooth test-function batteries for the weak-form residual checks.

All functions come with closed-form gradients so spatial quadrature is the
only discretization in a residual.  Three families:

* scalar profiles on the closure of the box (free trace) for the mass,
  energy, internal-energy and entropy identities; nonnegative members are
  flagged for the entropy check;
* vector fields with zero normal trace on walls (or plain periodic fields)
  for the momentum identity;
* separable space-time functions, compactly supported in time, for the
  deterministic incompressible-system checks.

Bumps are radial ``(1 - r^2)^4`` profiles, C^3 across their support edge,
placed at three scales inside a target box.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .domain import Box, DomainSpec

__all__ = [
    "ScalarTestFunction",
    "VectorTestFunction",
    "TimeProfile",
    "SpaceTimeTestFunction",
    "bump_scalar",
    "scalar_battery",
    "vector_battery",
    "spacetime_battery",
]


@dataclass(frozen=True)
class ScalarTestFunction:
    name: str
    value: Callable
    grad: Callable
    nonnegative: bool = False
    support: Optional[Box] = None

    def __call__(self, X, Y):
        return self.value(X, Y)


@dataclass(frozen=True)
class VectorTestFunction:
    """Vector field with closed-form Jacobian; ``zero_normal_trace`` declares
    phi . n = 0 on the box walls (vacuous on the torus)."""

    name: str
    value: Callable          # (X, Y) -> (phi1, phi2)
    jacobian: Callable       # (X, Y) -> ((d1phi1, d2phi1), (d1phi2, d2phi2))
    zero_normal_trace: bool = True
    support: Optional[Box] = None


@dataclass(frozen=True)
class TimeProfile:
    name: str
    value: Callable
    derivative: Callable
    vanishes_after: float


@dataclass(frozen=True)
class SpaceTimeTestFunction:
    """Separable phi(t, x) = profile(t) * spatial(x)."""

    time: TimeProfile
    spatial: VectorTestFunction

    @property
    def name(self) -> str:
        return f"{self.time.name}*{self.spatial.name}"


def _bump_parts(X, Y, center, width):
    s = ((X - center[0]) ** 2 + (Y - center[1]) ** 2) / width**2
    inside = s < 1.0
    core = np.where(inside, 1.0 - s, 0.0)
    return core, inside


def bump_scalar(center, width, name=None) -> ScalarTestFunction:
    """Radial bump (1 - r^2/w^2)^4 supported on a disk."""

    def value(X, Y):
        core, _ = _bump_parts(X, Y, center, width)
        return core**4

    def grad(X, Y):
        core, inside = _bump_parts(X, Y, center, width)
        common = np.where(inside, -8.0 * core**3 / width**2, 0.0)
        return common * (X - center[0]), common * (Y - center[1])

    sup = Box((center[0] - width, center[1] - width),
              (center[0] + width, center[1] + width))
    return ScalarTestFunction(name or f"bump({center},{width})", value, grad,
                              nonnegative=True, support=sup)


def _bump_vector(center, width, name) -> VectorTestFunction:
    """Perpendicular gradient of a bump potential: divergence-free, compact.

    The potential (1 - r^2/w^2)^6 is taken two powers smoother than the
    scalar bumps because the momentum residual integrates its second
    derivatives; quadrature error on the battery must sit well below the
    stochastic discretization it is calibrated against."""

    def value(X, Y):
        core, inside = _bump_parts(X, Y, center, width)
        common = np.where(inside, -12.0 * core**5 / width**2, 0.0)
        # phi = perp grad of core^6: (d/dy, -d/dx)
        return common * (Y - center[1]), -common * (X - center[0])

    def jacobian(X, Y):
        core, inside = _bump_parts(X, Y, center, width)
        u = X - center[0]
        v = Y - center[1]
        w2 = width**2
        c4 = np.where(inside, core**4, 0.0)
        c5 = np.where(inside, core**5, 0.0)
        dyy = -12.0 * c5 / w2 + 120.0 * c4 * v * v / w2**2
        dxx = -12.0 * c5 / w2 + 120.0 * c4 * u * u / w2**2
        dxy = 120.0 * c4 * u * v / w2**2
        # phi1 = d(core^6)/dy, phi2 = -d(core^6)/dx
        return (dxy, dyy), (-dxx, -dxy)

    sup = Box((center[0] - width, center[1] - width),
              (center[0] + width, center[1] + width))
    return VectorTestFunction(name, value, jacobian, zero_normal_trace=True,
                              support=sup)


def _bump_centers(box: Box, scales=(0.4, 0.2, 0.1)):
    cx = 0.5 * (box.lo[0] + box.hi[0])
    cy = 0.5 * (box.lo[1] + box.hi[1])
    ext = min(box.lengths)
    out = []
    for i, s in enumerate(scales):
        # offset the smaller bumps so the battery probes distinct regions
        shift = 0.15 * ext * (i % 2) * (1 if i < 2 else -1)
        out.append(((cx + shift, cy - shift), s * ext))
    return out


def scalar_battery(domain: DomainSpec, modes: int = 2) -> list:
    """Constant, low trig modes, and bumps at three scales per subdomain."""
    box = domain.box
    lo, (lx, ly) = box.lo, box.lengths
    battery = [
        ScalarTestFunction("one", lambda X, Y: np.ones_like(X),
                           lambda X, Y: (np.zeros_like(X), np.zeros_like(Y)),
                           nonnegative=True)
    ]
    if domain.boundary == "periodic":
        wavenumbers = [(1, 0), (0, 1), (1, 1)][: max(1, modes)]
        for kx, ky in wavenumbers:
            ax, ay = 2 * np.pi * kx / lx, 2 * np.pi * ky / ly

            def value(X, Y, ax=ax, ay=ay):
                return np.cos(ax * (X - lo[0])) * np.cos(ay * (Y - lo[1]))

            def grad(X, Y, ax=ax, ay=ay):
                return (-ax * np.sin(ax * (X - lo[0])) * np.cos(ay * (Y - lo[1])),
                        -ay * np.cos(ax * (X - lo[0])) * np.sin(ay * (Y - lo[1])))

            battery.append(ScalarTestFunction(f"cos({kx},{ky})", value, grad))
    else:
        for kx, ky in [(1, 0), (0, 1)][: max(1, modes)]:
            ax, ay = np.pi * kx / lx, np.pi * ky / ly

            def value(X, Y, ax=ax, ay=ay):
                return np.cos(ax * (X - lo[0])) * np.cos(ay * (Y - lo[1]))

            def grad(X, Y, ax=ax, ay=ay):
                return (-ax * np.sin(ax * (X - lo[0])) * np.cos(ay * (Y - lo[1])),
                        -ay * np.cos(ax * (X - lo[0])) * np.sin(ay * (Y - lo[1])))

            battery.append(ScalarTestFunction(f"coswall({kx},{ky})", value, grad))
    for i, sub in enumerate(domain.subdomains):
        for center, width in _bump_centers(sub):
            battery.append(bump_scalar(center, width, name=f"bump{i}({width:.3g})"))
    return battery


def vector_battery(domain: DomainSpec, modes: int = 2) -> list:
    """Momentum-equation battery: tangential trig fields plus bump rotors."""
    box = domain.box
    lo, (lx, ly) = box.lo, box.lengths
    battery = []
    if domain.boundary == "periodic":
        specs = [(1, 0), (0, 1), (1, 1)][: max(1, modes + 1)]
        for kx, ky in specs:
            ax, ay = 2 * np.pi * kx / lx, 2 * np.pi * ky / ly

            def value(X, Y, ax=ax, ay=ay):
                return (np.sin(ay * (Y - lo[1])) if ay else np.sin(ax * (X - lo[0])),
                        np.sin(ax * (X - lo[0])) if ax else np.sin(ay * (Y - lo[1])))

            def jacobian(X, Y, ax=ax, ay=ay):
                zero = np.zeros_like(X)
                if ay and ax:
                    return ((zero, ay * np.cos(ay * (Y - lo[1]))),
                            (ax * np.cos(ax * (X - lo[0])), zero))
                if ay:
                    return ((zero, ay * np.cos(ay * (Y - lo[1]))),
                            (zero, ay * np.cos(ay * (Y - lo[1]))))
                return ((ax * np.cos(ax * (X - lo[0])), zero),
                        (ax * np.cos(ax * (X - lo[0])), zero))

            battery.append(VectorTestFunction(f"trig({kx},{ky})", value, jacobian))
    else:
        # components vanish on the walls they are normal to
        for m in range(1, max(2, modes + 1)):
            ax, ay = np.pi * m / lx, np.pi * m / ly

            def value(X, Y, ax=ax, ay=ay):
                return (np.sin(ax * (X - lo[0])) * np.cos(ay * (Y - lo[1])),
                        np.cos(ax * (X - lo[0])) * np.sin(ay * (Y - lo[1])))

            def jacobian(X, Y, ax=ax, ay=ay):
                sx, cx = np.sin(ax * (X - lo[0])), np.cos(ax * (X - lo[0]))
                sy, cy = np.sin(ay * (Y - lo[1])), np.cos(ay * (Y - lo[1]))
                return ((ax * cx * cy, -ay * sx * sy),
                        (-ax * sx * sy, ay * cx * cy))

            battery.append(VectorTestFunction(f"walltrig({m})", value, jacobian))
    for i, sub in enumerate(domain.subdomains):
        for center, width in _bump_centers(sub, scales=(0.35, 0.22)):
            battery.append(_bump_vector(center, width, name=f"rotor{i}({width:.3g})"))
    return battery


def _time_bump(t0: float, width: float, name: str) -> TimeProfile:
    def value(t):
        u = (np.asarray(t) - t0) / width
        inside = np.abs(u) < 1.0
        return np.where(inside, (1.0 - u**2) ** 4, 0.0)

    def derivative(t):
        u = (np.asarray(t) - t0) / width
        inside = np.abs(u) < 1.0
        return np.where(inside, -8.0 * u * (1.0 - u**2) ** 3 / width, 0.0)

    return TimeProfile(name, value, derivative, vanishes_after=t0 + width)


def _time_ramp_from_start(width: float) -> TimeProfile:
    """Equals 1 at t = 0 with zero slope, smoothly off by t = width."""

    def value(t):
        u = np.asarray(t) / width
        inside = u < 1.0
        return np.where(inside, (1.0 - u**2) ** 4, 0.0)

    def derivative(t):
        u = np.asarray(t) / width
        inside = u < 1.0
        return np.where(inside, -8.0 * u * (1.0 - u**2) ** 3 / width, 0.0)

    return TimeProfile(f"ramp({width:.3g})", value, derivative, vanishes_after=width)


def spacetime_battery(domain: DomainSpec, horizon: float) -> list:
    """Space-time battery for the incompressible-system residuals."""
    spatial = vector_battery(domain, modes=1)
    profiles = [
        _time_ramp_from_start(0.6 * horizon),
        _time_bump(0.5 * horizon, 0.35 * horizon, "midbump"),
    ]
    return [SpaceTimeTestFunction(p, s) for p in profiles for s in spatial]
