"""Assemble candidate solutions of the noise-driven system from a
divergence-free field and a Wiener path.

The chain is: random clock tau(t) = int exp(-W/2), time-rescaled field
w(t, x) = v(tau(t), x), momentum m = w exp(-W/2), temperature
theta = theta0 exp(-W), entropy s = cv log(theta) - log(rho), total energy
E = |m|^2 / (2 rho) + cv rho theta.  Density never moves: rho(t, .) = rho0.

Evaluating anything at time index k reads W only on [0, t_k]; the clock is
a prefix integral and the scalings are instantaneous, which is what the
causality check exercises.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import GasData, initial_energy_density
from .fields import VelocityField
from .paths import RandomClock, SamplePath, build_clock

__all__ = ["EulerSolution", "EnergyLedger", "ClockOverrunError",
           "temperature", "entropy", "assemble", "ledger"]


class ClockOverrunError(ValueError):
    """The rescaled horizon leaves the generated field window."""


@dataclass(frozen=True)
class EulerSolution:
    """Immutable bundle of gas data, field, noise and clock with evaluators.

    ``momentum_exponent`` is -0.5 for the real scaling ``m = w exp(-W/2)``;
    the verifier's negative control flips the sign.
    """

    data: GasData
    field: VelocityField
    noise: SamplePath
    clock: RandomClock
    momentum_exponent: float = -0.5

    def __post_init__(self):
        if self.noise.grid != self.clock.grid:
            raise ValueError("noise and clock must share the time grid")
        if self.data.n_subdomains != self.field.domain.n_subdomains:
            raise ValueError("gas data and field disagree on the partition")
        labels = self.field.grid.subdomain_labels(self.field.domain)
        rho = np.asarray(self.data.rho0)[labels]
        theta = np.asarray(self.data.theta0)[labels]
        for arr in (labels, rho, theta):
            arr.flags.writeable = False
        object.__setattr__(self, "_labels", labels)
        object.__setattr__(self, "_rho0", rho)
        object.__setattr__(self, "_theta0", theta)

    # -- static node fields ------------------------------------------------
    @property
    def labels(self) -> np.ndarray:
        return self._labels

    @property
    def rho(self) -> np.ndarray:
        """Density field; constant in time by the solenoidal ansatz."""
        return self._rho0

    @property
    def entropy0(self) -> np.ndarray:
        return self.data.cv * np.log(self._theta0) - np.log(self._rho0)

    @property
    def grid_weights(self) -> np.ndarray:
        return self.field.grid.quad_weights()

    @property
    def time_grid(self):
        return self.noise.grid

    # -- time-sliced evaluators ---------------------------------------------
    def rescaled_field(self, k: int) -> np.ndarray:
        """w(t_k, .) = v(tau(t_k), .)."""
        return self.field.at_time(self.clock.values[k])

    def momentum(self, k: int) -> np.ndarray:
        return self.rescaled_field(k) * np.exp(self.momentum_exponent * self.noise.values[k])

    def temperature_at(self, k: int) -> np.ndarray:
        return self._theta0 * np.exp(-self.noise.values[k])

    def pressure(self, k: int) -> np.ndarray:
        return self._rho0 * self.temperature_at(k)

    def entropy_at(self, k: int) -> np.ndarray:
        return self.entropy0 - self.data.cv * self.noise.values[k]

    def total_energy(self, k: int) -> np.ndarray:
        m = self.momentum(k)
        return 0.5 * (m**2).sum(-1) / self._rho0 + self.data.cv * self._rho0 * self.temperature_at(k)

    # -- block evaluators (vectorized over a span of time nodes) ------------
    def momentum_block(self, ks: np.ndarray) -> np.ndarray:
        idx, blend = self.field.slice_weights(self.clock.values[ks])
        v = self.field.values
        if self.field.stationary:
            w = np.broadcast_to(v[0], (ks.size,) + v.shape[1:])
        else:
            w = v[idx] * (1.0 - blend)[:, None, None, None] + v[idx + 1] * blend[:, None, None, None]
        scale = np.exp(self.momentum_exponent * self.noise.values[ks])
        return w * scale[:, None, None, None]


def temperature(data: GasData, noise: SamplePath):
    """theta(t, x) = theta0(x) exp(-W(t)) as a (time index -> field) map."""
    theta0 = np.asarray(data.theta0)

    def evaluator(k: int, labels: np.ndarray) -> np.ndarray:
        return theta0[labels] * np.exp(-noise.values[k])

    return evaluator


def entropy(data: GasData, solution: EulerSolution):
    """s(t, x); the shift from s(0, x) is the spatially uniform -cv W(t)."""

    def evaluator(k: int) -> np.ndarray:
        return solution.entropy_at(k)

    return evaluator


def assemble(data: GasData, field: VelocityField, noise: SamplePath,
             clock_mode: str = "trapezoid",
             momentum_exponent: float = -0.5) -> EulerSolution:
    """Build the candidate solution tied to one noise path and one field.

    Raises :class:`ClockOverrunError` when the rescaled horizon tau(T)
    exceeds the generated field window (stationary fields extend freely).
    """
    clock = build_clock(noise, mode=clock_mode)
    if not field.stationary and clock.horizon > field.horizon * (1 + 1e-12):
        raise ClockOverrunError(
            f"clock reaches {clock.horizon:.4f} but the field was generated "
            f"on [0, {field.horizon}]; regenerate with horizon >= {clock.horizon:.4f}"
        )
    return EulerSolution(data, field, noise, clock, momentum_exponent)


@dataclass(frozen=True)
class EnergyLedger:
    """Spatial integrals per time node plus the closed-form prediction.

    ``energy_pred`` is exp(-W(t)) times the initial total energy computed
    from the prescribed kinetic targets, exact for defect-free fields.
    """

    times: np.ndarray
    mass: np.ndarray
    total_energy: np.ndarray
    entropy_integral: np.ndarray
    energy_pred: np.ndarray

    def mass_drift(self) -> float:
        return float(np.abs(self.mass - self.mass[0]).max())

    def energy_gap(self) -> float:
        scale = max(abs(float(self.energy_pred[0])), 1e-300)
        return float(np.abs(self.total_energy - self.energy_pred).max() / scale)


def ledger(solution: EulerSolution) -> EnergyLedger:
    grid = solution.time_grid
    w = solution.grid_weights
    n = grid.steps + 1
    mass = np.empty(n)
    total = np.empty(n)
    ent = np.empty(n)
    for k in range(n):
        mass[k] = (w * solution.rho).sum()
        total[k] = (w * solution.total_energy(k)).sum()
        ent[k] = (w * solution.rho * solution.entropy_at(k)).sum()
    domain = solution.field.domain
    e0 = sum(sub.volume * initial_energy_density(solution.data, i, domain.dim)
             for i, sub in enumerate(domain.subdomains))
    pred = np.exp(-solution.noise.values) * e0
    return EnergyLedger(grid.nodes, mass, total, ent, pred)
