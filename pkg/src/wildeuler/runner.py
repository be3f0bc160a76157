"""End-to-end run orchestration: generate, assemble, verify, certify.

Artifacts live under an output directory with a manifest tying every file
to the resolved configuration hash and the seeds that produced it.  All
writers are deterministic (no timestamps), so re-running a command over
the same configuration reproduces the artifact bytes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .convex import GeneratorCertificate, StageRecord, branch_family, generate_wild
from .domain import DomainSpec
from .fields import SpaceGrid, VelocityField, load_field, paste, save_field, write_slice_csv
from .paths import TimeGrid, build_clock, sample_wiener, write_path_csv
from .solution import assemble, ledger
from .verify import (
    EQUATIONS,
    causality_check,
    measured_rate,
    nonuniqueness_certificate,
    residual_incompressible,
    run_equation_suite,
)

__all__ = [
    "ArtifactError",
    "run_generate",
    "run_assemble",
    "run_verify",
    "run_certify",
    "load_run_certificates",
]

MUTATIONS = ("flip-momentum-sign", "drop-half-drift", "ito-sums", "broken-clock")


class ArtifactError(RuntimeError):
    """Missing or mismatched artifacts for the requested configuration."""


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _manifest(config: RunConfig, command: str, extra: dict = None) -> dict:
    payload = {
        "command": command,
        "config_hash": config.hash,
        "generation_hash": config.generation_hash,
        "config": config.raw,
        "package_version": __version__,
        "numpy_version": np.__version__,
    }
    payload.update(extra or {})
    return payload


def _space_grid(config: RunConfig) -> SpaceGrid:
    return SpaceGrid(config.domain.box, config.cells, config.domain.boundary)


def _piece_setup(config: RunConfig, index: int):
    """Sub-grid and boundary mode for one subdomain's construction."""
    domain = config.domain
    piece = domain.subdomains[index]
    gx, gy = config.cells
    lx, ly = domain.box.lengths
    nx = max(8, int(round(gx * piece.lengths[0] / lx)))
    ny = max(8, int(round(gy * piece.lengths[1] / ly)))
    covers_box = domain.n_subdomains == 1
    boundary = domain.boundary if covers_box else "wall"
    return piece, SpaceGrid(piece, (nx, ny), boundary)


def _build_piece(config: RunConfig, index: int, seed: int):
    piece, grid = _piece_setup(config, index)
    if config.generator_mode == "fixture":
        from .fields import shear_fixture

        sub_domain = DomainSpec(piece, "periodic")
        field = shear_fixture(sub_domain, grid, config.fixture_speed(index),
                              config.stripes, horizon=config.field_horizon)
        return field, None
    return generate_wild(piece, config.data.rho0[index], config.data.theta0[index],
                         config.lambda0, grid, config.field_horizon,
                         config.field_slices, config.stages, seed,
                         config.generator_params)


def run_generate(config: RunConfig, outdir) -> dict:
    """Build the per-subdomain fields, paste, persist, and certify."""
    out = Path(outdir)
    base_seed = config.generator_seed
    pieces, certs = [], []
    for i in range(config.domain.n_subdomains):
        field, cert = _build_piece(config, i, base_seed + i)
        pieces.append(field)
        certs.append(cert)
    if len(pieces) == 1:
        global_field = pieces[0]
    else:
        global_field = paste(pieces, config.domain, _space_grid(config))
    save_field(global_field, out / "field")
    cert_payload = [c.as_dict() if c else {"fixture": True} for c in certs]
    _write_json(out / "certificates.json", {"subdomains": cert_payload})
    _write_json(out / "manifest.json", _manifest(config, "generate", {
        "seed": base_seed,
        "kinetic_targets": list(global_field.kinetic_targets),
        "lambda0": config.lambda0,
    }))
    return {"field": global_field, "certificates": certs, "outdir": str(out)}


def _check_artifacts(config: RunConfig, artifacts) -> Path:
    adir = Path(artifacts)
    manifest = adir / "manifest.json"
    if not manifest.is_file():
        raise ArtifactError(f"no manifest under {adir}")
    recorded = json.loads(manifest.read_text())
    if recorded.get("generation_hash") != config.generation_hash:
        raise ArtifactError(
            f"artifact generation hash {recorded.get('generation_hash')} does "
            f"not match the configuration's {config.generation_hash}"
        )
    return adir


def load_run_certificates(artifacts) -> list:
    payload = json.loads((Path(artifacts) / "certificates.json").read_text())
    certs = []
    for entry in payload["subdomains"]:
        if entry.get("fixture"):
            certs.append(None)
            continue
        stages = tuple(
            StageRecord(s["stage"], s["modes"], s["seed"], s["defect"], s["ratio"],
                        s["min_defect"], s["residual_linear"], s["residual"])
            for s in entry["stages"]
        )
        certs.append(GeneratorCertificate(entry["seed"], entry["initial_defect"],
                                          stages, entry["kinetic_gap"],
                                          entry["final_modes"]))
    return certs


def run_assemble(config: RunConfig, artifacts, outdir, seed: int = None) -> dict:
    """Tie the generated field to one noise path; export snapshots."""
    adir = _check_artifacts(config, artifacts)
    out = Path(outdir)
    field = load_field(adir / "field")
    seed = config.ensemble_seeds[0] if seed is None else seed
    grid = TimeGrid(config.horizon, config.steps)
    noise = sample_wiener(grid, seed)
    sol = assemble(config.data, field, noise)
    out.mkdir(parents=True, exist_ok=True)
    write_path_csv(noise, out / "wiener.csv")
    write_path_csv(sol.clock, out / "clock.csv")

    led = ledger(sol)
    with open(out / "ledger.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "mass", "total_energy", "entropy_integral", "energy_pred"])
        for row in zip(led.times, led.mass, led.total_energy,
                       led.entropy_integral, led.energy_pred):
            writer.writerow([repr(float(x)) for x in row])

    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    checkpoints = np.unique(np.round(np.linspace(0, grid.steps, 5)).astype(int))
    for k in checkpoints:
        m = sol.momentum(int(k))
        X, Y = field.grid.meshgrid()
        with open(snap_dir / f"momentum_t{grid.nodes[k]:.4f}.csv", "w") as fh:
            fh.write("x,y,mx,my\n")
            for xi, yi, mx, my in zip(X.ravel(), Y.ravel(),
                                      m[..., 0].ravel(), m[..., 1].ravel()):
                fh.write(f"{float(xi)!r},{float(yi)!r},{float(mx)!r},{float(my)!r}\n")
    _write_json(out / "manifest.json", _manifest(config, "assemble", {
        "seed": seed,
        "artifact_hash": config.hash,
        "mass_drift": led.mass_drift(),
        "energy_gap": led.energy_gap(),
    }))
    return {"solution": sol, "ledger": led, "outdir": str(out)}


def _assemble_for_verify(config: RunConfig, field, seed: int, mutate: str = None):
    grid = TimeGrid(config.horizon, config.steps)
    noise = sample_wiener(grid, seed)
    momentum_exponent = +0.5 if mutate == "flip-momentum-sign" else -0.5
    clock_mode = "lookahead" if mutate == "broken-clock" else "trapezoid"
    sol = assemble(config.data, field, noise, clock_mode=clock_mode,
                   momentum_exponent=momentum_exponent)
    options = config.verifier
    if mutate == "drop-half-drift":
        from dataclasses import replace

        options = replace(options, momentum_drift_factor=1.0)
    elif mutate == "ito-sums":
        from dataclasses import replace

        options = replace(options, stochastic_rule="left")
    return sol, options


def run_verify(config: RunConfig, artifacts, outdir, mutate: str = None,
               rates: bool = False) -> dict:
    """Residual suite over the ensemble seeds; nonzero report on failure."""
    if mutate is not None and mutate not in MUTATIONS:
        raise ValueError(f"unknown mutation {mutate!r}; choose from {MUTATIONS}")
    adir = _check_artifacts(config, artifacts)
    out = Path(outdir)
    field = load_field(adir / "field")
    certs = load_run_certificates(adir)
    worst_cert = _worst_certificate(certs)

    all_reports = {}
    failures = []
    for seed in config.ensemble_seeds:
        sol, options = _assemble_for_verify(config, field, seed, mutate)
        reports = run_equation_suite(sol, options, tolerance=config.tolerance,
                                     certificate=worst_cert)
        all_reports[seed] = reports
        failures.extend(f"{eq}@seed{seed}" for eq, r in reports.items() if not r.passed)

    incompressible = residual_incompressible(
        field, config.data.rho0, config.data.theta0, config.lambda0)
    causality = causality_check(
        config.data, field, TimeGrid(config.horizon, config.steps),
        config.ensemble_seeds[0], t_star=config.horizon / 2,
        clock_mode="lookahead" if mutate == "broken-clock" else "trapezoid")
    if not causality.passed:
        failures.append(f"causality: {causality.first_divergence}")

    rate_table = {}
    if rates:
        rate_table = _rate_ladder(config, field, worst_cert)

    payload = {
        "mutation": mutate,
        "failures": failures,
        "passed": not failures,
        "reports": {
            str(seed): {eq: rep.as_dict() for eq, rep in reports.items()}
            for seed, reports in all_reports.items()
        },
        "incompressible": incompressible.as_dict(),
        "causality": causality.as_dict(),
        "rates": rate_table,
        "tolerance_model": config.tolerance.as_dict(),
    }
    _write_json(out / "reports.json", payload)
    _write_csv_reports(out / "reports.csv", all_reports)
    _write_json(out / "manifest.json", _manifest(config, "verify", {
        "mutation": mutate, "passed": not failures}))
    return {"passed": not failures, "failures": failures, "reports": all_reports,
            "incompressible": incompressible, "causality": causality,
            "rates": rate_table, "outdir": str(out)}


def _worst_certificate(certs):
    real = [c for c in certs if c is not None]
    if not real:
        return None
    return max(real, key=lambda c: c.kinetic_gap)


def _write_csv_reports(path: Path, all_reports: dict) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "equation", "test_function", "tau", "residual"])
        for seed, reports in all_reports.items():
            for eq, rep in reports.items():
                for name, row in rep.residuals.items():
                    for tau, val in zip(rep.checkpoint_times, row):
                        writer.writerow([seed, eq, name, repr(float(tau)),
                                         repr(float(val))])


def _rate_ladder(config: RunConfig, field: VelocityField, certificate) -> dict:
    """Measured convergence orders on a 3-rung temporal and spatial ladder.

    Temporal orders come from the trig battery members (exact spatial sums,
    so the stochastic discretization dominates); spatial orders from the
    full battery.  Rungs reuse one underlying realization via restriction.
    """
    from .paths import restrict

    fine = sample_wiener(TimeGrid(config.horizon, config.steps * 4), config.ensemble_seeds[0])
    temporal = {eq: [] for eq in EQUATIONS}
    dts = []
    for factor in (4, 2, 1):
        noise = restrict(fine, factor)
        sol = assemble(config.data, field, noise)
        reports = run_equation_suite(sol, config.verifier)
        dts.append(noise.grid.dt)
        for eq, rep in reports.items():
            rows = [r.max() for name, r in rep.residuals.items()
                    if name.startswith(("trig", "cos", "one"))]
            temporal[eq].append(max(rows) if rows else 0.0)
    spatial = {eq: [] for eq in EQUATIONS}
    hs = []
    noise = restrict(fine, 4)
    for divider in (4, 2, 1):
        cells = tuple(max(8, c // divider) for c in config.cells)
        grid = SpaceGrid(config.domain.box, cells, config.domain.boundary)
        small = _regrid_fixture(config, grid)
        sol = assemble(config.data, small, noise)
        reports = run_equation_suite(sol, config.verifier)
        hs.append(max(grid.spacing))
        for eq, rep in reports.items():
            spatial[eq].append(rep.sup_residual)
    out = {"temporal": {}, "spatial": {}, "dt": dts, "dx": hs}
    for eq in EQUATIONS:
        sups_t = temporal[eq]
        out["temporal"][eq] = {
            "sups": sups_t,
            "order": measured_rate(dts, sups_t) if min(sups_t) > 1e-13 else None,
        }
        sups_x = spatial[eq]
        out["spatial"][eq] = {
            "sups": sups_x,
            "order": measured_rate(hs, sups_x) if min(sups_x) > 1e-13 else None,
        }
    return out


def _regrid_fixture(config: RunConfig, grid: SpaceGrid) -> VelocityField:
    if config.generator_mode != "fixture" or config.domain.n_subdomains != 1:
        raise ArtifactError("rate ladders are supported for single-piece fixture runs")
    from .fields import shear_fixture

    return shear_fixture(config.domain, grid, config.fixture_speed(0),
                         config.stripes, horizon=config.field_horizon)


def run_certify(config: RunConfig, outdir) -> dict:
    """Branch-family construction plus pairwise non-uniqueness certificates."""
    if config.domain.n_subdomains != 1:
        raise ArtifactError("certification runs on a single-subdomain configuration")
    if len(config.branch_seeds) < 2:
        raise ArtifactError("need at least two branch seeds to certify distinctness")
    out = Path(outdir)
    piece = config.domain.subdomains[0]
    grid = _space_grid(config)
    family = branch_family(piece, config.data.rho0[0], config.data.theta0[0],
                           config.lambda0, grid, config.field_horizon,
                           config.field_slices, config.common_stages,
                           config.branch_time, config.branch_seeds,
                           config.branch_stages, params=config.generator_params)
    noise = sample_wiener(TimeGrid(config.horizon, config.steps),
                          config.ensemble_seeds[0])
    solutions = [assemble(config.data, f, noise) for f, _ in family]

    pairs = []
    all_passed = True
    for i in range(len(family)):
        for j in range(i + 1, len(family)):
            cert = nonuniqueness_certificate(
                solutions[i], solutions[j], config.branch_time,
                options=config.verifier, tolerance=config.tolerance,
                certificates=(family[i][1], family[j][1]))
            all_passed &= cert.passed
            pairs.append({
                "seeds": [config.branch_seeds[i], config.branch_seeds[j]],
                "certificate": cert.as_dict(),
            })
    for (field, cert), seed in zip(family, config.branch_seeds):
        save_field(field, out / "branches" / str(seed))
        _write_json(out / "branches" / str(seed) / "certificate.json", cert.as_dict())
    _write_json(out / "nonuniqueness.json", {"pairs": pairs, "passed": all_passed})
    _write_json(out / "manifest.json", _manifest(config, "certify", {
        "branch_seeds": list(config.branch_seeds),
        "passed": all_passed,
    }))
    return {"passed": all_passed, "pairs": pairs, "family": family,
            "solutions": solutions, "outdir": str(out)}
