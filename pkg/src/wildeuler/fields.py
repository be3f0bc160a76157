"""Divergence-free space-time velocity fields on box grids.

Fields store a stream-function array and the node-sampled velocity derived
from it, so the discrete divergence vanishes structurally: for smooth
(generator) fields the velocity is the central-difference perpendicular
gradient and the central divergence cancels term by term; the stripe
fixture's velocity is the exact per-stripe slope of its piecewise-linear
stream function, constant along the flow axis.

Periodic grids carry ``n`` nodes per axis (the closing edge is the wrap);
wall grids carry ``n + 1`` with one-sided differences at the edges.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .domain import Box, DomainSpec

__all__ = [
    "SpaceGrid",
    "VelocityField",
    "shear_fixture",
    "paste",
    "discrete_divergence",
    "kinetic_energy_density",
    "save_field",
    "load_field",
    "write_slice_csv",
]


@dataclass(frozen=True)
class SpaceGrid:
    """Uniform node grid over a 2-d box."""

    box: Box
    cells: tuple  # (nx, ny)
    boundary: str

    def __post_init__(self):
        if self.box.dim != 2:
            raise ValueError("space grids are two-dimensional")
        nx, ny = self.cells
        if nx < 4 or ny < 4:
            raise ValueError(f"grid too coarse: {self.cells}")
        if self.boundary not in ("periodic", "wall"):
            raise ValueError(f"unknown boundary {self.boundary!r}")

    @property
    def spacing(self) -> tuple:
        lx, ly = self.box.lengths
        return (lx / self.cells[0], ly / self.cells[1])

    @property
    def shape(self) -> tuple:
        nx, ny = self.cells
        return (nx, ny) if self.boundary == "periodic" else (nx + 1, ny + 1)

    @property
    def nodes(self) -> tuple:
        dx, dy = self.spacing
        sx, sy = self.shape
        return (self.box.lo[0] + dx * np.arange(sx), self.box.lo[1] + dy * np.arange(sy))

    def meshgrid(self):
        x, y = self.nodes
        return np.meshgrid(x, y, indexing="ij")

    def quad_weights(self) -> np.ndarray:
        """Trapezoid weights; plain cell measure on periodic grids."""
        dx, dy = self.spacing
        w = np.full(self.shape, dx * dy)
        if self.boundary == "wall":
            w[0, :] *= 0.5
            w[-1, :] *= 0.5
            w[:, 0] *= 0.5
            w[:, -1] *= 0.5
        return w

    def _d_axis(self, f: np.ndarray, axis: int) -> np.ndarray:
        """Central difference along a spatial axis (last two axes of f)."""
        h = self.spacing[axis]
        ax = f.ndim - 2 + axis
        if self.boundary == "periodic":
            return (np.roll(f, -1, axis=ax) - np.roll(f, 1, axis=ax)) / (2 * h)
        out = np.empty_like(f)
        sl = [slice(None)] * f.ndim
        lo, mid, hi = [sl.copy() for _ in range(3)]
        lo[ax], mid[ax], hi[ax] = slice(0, -2), slice(1, -1), slice(2, None)
        out[tuple(mid)] = (f[tuple(hi)] - f[tuple(lo)]) / (2 * h)
        first, second = sl.copy(), sl.copy()
        first[ax], second[ax] = 0, 1
        out[tuple(first)] = (f[tuple(second)] - f[tuple(first)]) / h
        last, prev = sl.copy(), sl.copy()
        last[ax], prev[ax] = -1, -2
        out[tuple(last)] = (f[tuple(last)] - f[tuple(prev)]) / h
        return out

    def perp_grad(self, psi: np.ndarray) -> np.ndarray:
        """v = (d psi / dy, -d psi / dx) at every node."""
        return np.stack([self._d_axis(psi, 1), -self._d_axis(psi, 0)], axis=-1)

    def divergence(self, v: np.ndarray) -> np.ndarray:
        return self._d_axis(v[..., 0], 0) + self._d_axis(v[..., 1], 1)

    def subdomain_labels(self, domain: DomainSpec) -> np.ndarray:
        """Subdomain index per node, half-open along each axis."""
        X, Y = self.meshgrid()
        labels = np.full(self.shape, -1, dtype=np.int64)
        for i, sub in enumerate(domain.subdomains):
            mask = (X >= sub.lo[0]) & (Y >= sub.lo[1])
            closing_x = sub.hi[0] >= domain.box.hi[0] - 1e-12
            closing_y = sub.hi[1] >= domain.box.hi[1] - 1e-12
            mask &= (X <= sub.hi[0]) if closing_x else (X < sub.hi[0])
            mask &= (Y <= sub.hi[1]) if closing_y else (Y < sub.hi[1])
            labels[mask & (labels < 0)] = i
        if (labels < 0).any():
            raise ValueError("grid nodes left unassigned by the partition")
        return labels


@dataclass(frozen=True)
class VelocityField:
    """Grid-sampled divergence-free field with its generating stream function.

    ``psi`` has shape (nt + 1, *grid.shape) and ``values`` the same with a
    trailing component axis.  ``kinetic_targets`` records the prescribed
    kinetic energy density per subdomain.  ``stationary`` marks fields that
    are constant in time and hence evaluable at any rescaled time.
    """

    domain: DomainSpec
    grid: SpaceGrid
    horizon: float
    psi: np.ndarray
    values: np.ndarray
    kinetic_targets: tuple
    lineage: str = "field"
    stationary: bool = False

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=np.float64)
        vals = np.asarray(self.values, dtype=np.float64)
        if psi.ndim != 3 or vals.shape != psi.shape + (2,):
            raise ValueError(f"inconsistent field shapes {psi.shape} / {vals.shape}")
        if psi.shape[1:] != self.grid.shape:
            raise ValueError("field arrays do not match the grid")
        if psi.shape[0] < 2:
            raise ValueError("need at least two time slices")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        psi.flags.writeable = False
        vals.flags.writeable = False
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "values", vals)

    @property
    def n_slices(self) -> int:
        return self.psi.shape[0]

    @property
    def dt(self) -> float:
        return self.horizon / (self.n_slices - 1)

    def time_nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_slices)

    def slice_weights(self, tau) -> tuple:
        """(index, blend) so that v(tau) = (1-blend) v[i] + blend v[i+1]."""
        tau = np.asarray(tau, dtype=np.float64)
        if self.stationary:
            return np.zeros(tau.shape, dtype=np.int64), np.zeros_like(tau)
        if np.any(tau < -1e-12) or np.any(tau > self.horizon * (1 + 1e-12)):
            raise ValueError(
                f"rescaled time outside the generated window [0, {self.horizon}]; "
                "regenerate with a longer horizon"
            )
        pos = np.clip(tau / self.dt, 0.0, self.n_slices - 1 - 1e-12)
        idx = pos.astype(np.int64)
        return idx, pos - idx

    def at_time(self, tau: float) -> np.ndarray:
        i, b = self.slice_weights(float(tau))
        if b == 0.0:
            return self.values[int(i)]
        return (1.0 - b) * self.values[int(i)] + b * self.values[int(i) + 1]

    def with_lineage(self, lineage: str) -> "VelocityField":
        return replace(self, lineage=lineage)


def discrete_divergence(field: VelocityField) -> np.ndarray:
    return field.grid.divergence(field.values)


def kinetic_energy_density(field: VelocityField, rho0_nodes: np.ndarray) -> np.ndarray:
    """Pointwise |v|^2 / (2 rho0), shape (nt + 1, *grid.shape)."""
    return 0.5 * (field.values ** 2).sum(axis=-1) / rho0_nodes


def _stripe_sign(y: np.ndarray, lo: float, hi: float, stripes: int) -> np.ndarray:
    """Alternating +-1 bands; nodes on internal edges join the upper band."""
    h = (hi - lo) / stripes
    idx = np.floor((y - lo) / h + 1e-12).astype(np.int64)
    idx = np.clip(idx, 0, stripes - 1)
    return np.where(idx % 2 == 0, 1.0, -1.0)


def shear_fixture(domain: DomainSpec, grid: SpaceGrid, speed: float,
                  stripes: int, horizon: float = 1.0) -> VelocityField:
    """Stationary stripe flow v = (speed * sigma(y), 0) with |v| = speed.

    sigma alternates sign across horizontal bands, so the momentum tensor is
    constant and the field is an exact steady weak solution with constant
    pressure.  The flow axis must be periodic: on a walled box the stripe
    flux through the side walls breaks the continuity identity for test
    functions that do not vanish there.
    """
    if domain.dim != 2:
        raise ValueError("the stripe fixture is two-dimensional")
    if stripes < 1:
        raise ValueError("need at least one stripe")
    if domain.boundary != "periodic":
        raise ValueError("stripe fixture requires a periodic box")
    x, y = grid.nodes
    lo, hi = domain.box.lo[1], domain.box.hi[1]
    sigma = _stripe_sign(y, lo, hi, stripes)
    h = (hi - lo) / stripes

    # psi(y) = speed * int sigma: a zigzag rising on even stripes and
    # falling on odd ones, exact at the nodes
    rel = np.clip(y - lo, 0.0, hi - lo)
    idx = np.clip(np.floor(rel / h + 1e-12).astype(np.int64), 0, stripes - 1)
    frac = rel - idx * h
    psi_line = speed * np.where(idx % 2 == 0, frac, h - frac)

    u = speed * sigma  # x-velocity, function of y only
    nx = grid.shape[0]
    psi = np.broadcast_to(psi_line, (2, nx, y.size)).copy()
    vals = np.zeros((2, nx, y.size, 2))
    vals[..., 0] = u
    targets = tuple(0.5 * speed ** 2 for _ in domain.subdomains)
    return VelocityField(domain, grid, horizon, psi, vals, targets,
                         lineage=f"shear(c={speed},stripes={stripes})",
                         stationary=True)


def paste(pieces, domain: DomainSpec, grid: SpaceGrid) -> VelocityField:
    """Assemble per-subdomain fields into one global field.

    Pieces must share the time grid and the node spacing of the global grid;
    every global node takes its value from the piece owning it under the
    half-open convention.  Each piece is responsible for its own zero normal
    trace, so the pasted field needs no blending.
    """
    if len(pieces) != domain.n_subdomains:
        raise ValueError("one piece per subdomain required")
    ref = pieces[0]
    for p in pieces[1:]:
        if p.n_slices != ref.n_slices or abs(p.horizon - ref.horizon) > 1e-12:
            raise ValueError("pieces disagree on the time grid")
        if not np.allclose(p.grid.spacing, grid.spacing):
            raise ValueError("piece grid spacing differs from the global grid")
    labels = grid.subdomain_labels(domain)
    X, Y = grid.meshgrid()
    psi = np.zeros((ref.n_slices,) + grid.shape)
    vals = np.zeros((ref.n_slices,) + grid.shape + (2,))
    for i, piece in enumerate(pieces):
        mask = labels == i
        px, py = piece.grid.nodes
        ix = np.rint((X[mask] - px[0]) / piece.grid.spacing[0]).astype(np.int64)
        iy = np.rint((Y[mask] - py[0]) / piece.grid.spacing[1]).astype(np.int64)
        if piece.grid.boundary == "periodic":
            # the closing edge wraps back to node zero
            ix %= piece.grid.shape[0]
            iy %= piece.grid.shape[1]
        if ix.max() >= piece.grid.shape[0] or iy.max() >= piece.grid.shape[1]:
            raise ValueError(f"piece {i} does not cover its subdomain nodes")
        psi[:, mask] = piece.psi[:, ix, iy]
        vals[:, mask] = piece.values[:, ix, iy]
    targets = tuple(p.kinetic_targets[0] for p in pieces)
    return VelocityField(domain, grid, ref.horizon, psi, vals, targets,
                         lineage="paste[" + ",".join(p.lineage for p in pieces) + "]",
                         stationary=all(p.stationary for p in pieces))


def save_field(field: VelocityField, directory) -> None:
    """Write a field as .npy arrays plus a JSON header (no timestamps)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    np.save(d / "psi.npy", field.psi)
    np.save(d / "values.npy", field.values)
    meta = {
        "box_lo": list(field.domain.box.lo),
        "box_hi": list(field.domain.box.hi),
        "boundary": field.domain.boundary,
        "subdomains": [[list(s.lo), list(s.hi)] for s in field.domain.subdomains],
        "cells": list(field.grid.cells),
        "horizon": field.horizon,
        "kinetic_targets": list(field.kinetic_targets),
        "lineage": field.lineage,
        "stationary": field.stationary,
        "layout": "time-major, row-major space, trailing component axis",
    }
    (d / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def load_field(directory) -> VelocityField:
    d = Path(directory)
    meta = json.loads((d / "meta.json").read_text())
    subs = tuple(Box(tuple(lo), tuple(hi)) for lo, hi in meta["subdomains"])
    domain = DomainSpec(Box(tuple(meta["box_lo"]), tuple(meta["box_hi"])),
                        meta["boundary"], subs)
    grid = SpaceGrid(domain.box, tuple(meta["cells"]), meta["boundary"])
    return VelocityField(domain, grid, meta["horizon"],
                         np.load(d / "psi.npy"), np.load(d / "values.npy"),
                         tuple(meta["kinetic_targets"]), meta["lineage"],
                         meta["stationary"])


def write_slice_csv(field: VelocityField, slice_index: int, destination) -> None:
    """One t-slice as CSV rows (x, y, vx, vy)."""
    X, Y = field.grid.meshgrid()
    v = field.values[slice_index]
    with open(destination, "w") as fh:
        fh.write("x,y,vx,vy\n")
        for xi, yi, vx, vy in zip(X.ravel(), Y.ravel(), v[..., 0].ravel(), v[..., 1].ravel()):
            fh.write(f"{float(xi)!r},{float(yi)!r},{float(vx)!r},{float(vy)!r}\n")
