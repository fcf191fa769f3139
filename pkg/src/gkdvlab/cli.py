"""Command-line entry point: spectrum / evolve / construct / classify /
monotonicity / report.

Every command reads one TOML config, writes its artifacts plus a
manifest.json into the output directory, and maps package errors onto
stable exit codes: 0 ok, 2 config, 3 numeric, 4 convergence, 5 I/O.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, config_digest, parse_config
from .constructor import build_family
from .diagnostics import (
    ProjectionSeries,
    alpha_ode_residual,
    classify,
    fit_rate,
    local_quantities,
    psi_derivatives,
    psi_scalar,
    uniqueness_residual,
    weights,
)
from .errors import (
    AmbiguityError,
    ArgumentError,
    BlowUpError,
    ClassificationError,
    ConfigurationError,
    ConvergenceError,
    DegenerateBasisError,
    DomainError,
    GkdvError,
    HorizonError,
    ResolutionError,
    WindowError,
)
from .evolver import EvolveConfig, evolve
from .grid import h1_distance, make_grid
from .linearized import eigenvalue_ode_oracle, solve_spectrum
from .profiles import interaction_constants, multisoliton_sum
from .snapshots import load_trajectory, save_trajectory

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_CONVERGENCE = 4
EXIT_IO = 5

_CONFIG_ERRORS = (ConfigurationError, ArgumentError, WindowError)
_NUMERIC_ERRORS = (
    BlowUpError,
    ResolutionError,
    AmbiguityError,
    DegenerateBasisError,
    HorizonError,
    DomainError,
)
_CONVERGENCE_ERRORS = (ConvergenceError, ClassificationError)


def _json_dump(obj, path: Path):
    path.write_text(json.dumps(obj, sort_keys=True, indent=1, default=float) + "\n")


def _write_manifest(cfg: RunConfig, command: str, outdir: Path):
    import scipy

    manifest = {
        "command": command,
        "config_sha256": config_digest(cfg),
        "schema_version": 1,
        "seed": cfg.seed,
        "versions": {
            "gkdvlab": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    _json_dump(manifest, outdir / "manifest.json")


def _basis_grid(cfg: RunConfig, c: float):
    """Basis grid commensurate with the run grid: same or coarser spacing,
    box wide enough for the mode tails at speed c."""
    h = cfg.grid.spacing
    # Aim near 10 points per decay length, then round the factor down to a
    # power of two so the spacings stay commensurate.
    factor = 1
    while h * factor * 2 <= 1.0 / (10.0 * math.sqrt(c)):
        factor *= 2
    spacing = h * factor
    n = 2048
    width = n * spacing
    target = max(120.0 / math.sqrt(c), 60.0)
    while width < target:
        n *= 2
        width = n * spacing
    return make_grid(n, width, -width / 2.0)


def _solve_bases(cfg: RunConfig):
    return tuple(
        solve_spectrum(cfg.family.p, m.c, _basis_grid(cfg, m.c))
        for m in cfg.family.members
    )


def _constants(cfg: RunConfig, bases):
    return interaction_constants(
        cfg.family, bases[0].e_c, bases[0].eta0, cfg.gamma_eff_divisor
    )


def _series_csv(path: Path, header: list[str], rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def cmd_spectrum(cfg: RunConfig, args, outdir: Path) -> int:
    bases = _solve_bases(cfg)
    cst = _constants(cfg, bases)
    report = {"members": [], "constants": {
        "sigma0": cst.sigma0,
        "gamma_paper": cst.gamma_paper,
        "gamma_eff": cst.gamma_eff,
        "e0": cst.e0,
        "eta0": cst.eta0,
    }}
    for m, b in zip(cfg.family.members, bases):
        entry = {
            "c": m.c,
            "e_c": b.e_c,
            "eta0": b.eta0,
            "eigen_residual": b.eigen_residual,
            "checks": _lemma_checks(b),
        }
        if args.oracle:
            roots = eigenvalue_ode_oracle(cfg.family.p, m.c)
            entry["oracle_roots"] = roots
            entry["oracle_rel_err"] = (
                abs(roots[-1] - b.e_c) / b.e_c if roots else None
            )
        report["members"].append(entry)
    _json_dump(report, outdir / "spectrum.json")
    return EXIT_OK


def _lemma_checks(b) -> dict:
    from .grid import l2_inner, l2_norm, spectral_derivative
    from .linearized import apply_operator
    from .profiles import q_profile

    qp = spectral_derivative(q_profile(b.p, b.c, b.grid, b.q_center), 1)
    pair = l2_inner(b.y_plus, b.z_minus)
    ortho = l2_inner(b.y_plus, b.z_plus)
    kernel_p = l2_inner(b.z_plus, qp)
    kernel_m = l2_inner(b.z_minus, qp)
    idp = l2_norm(
        apply_operator("L", b.p, b.c, b.q_center, spectral_derivative(b.z_plus, 1))
        + b.e_c * b.z_plus
    )
    idm = l2_norm(
        apply_operator("L", b.p, b.c, b.q_center, spectral_derivative(b.z_minus, 1))
        - b.e_c * b.z_minus
    )
    sign = l2_inner(qp, spectral_derivative(b.y_plus, 1))
    return {
        "pairing_unit": bool(abs(pair - 1.0) < 1e-8),
        "pairing_orthogonal": bool(abs(ortho) < 1e-8),
        "kernel_orthogonal": bool(abs(kernel_p) < 1e-8 and abs(kernel_m) < 1e-8),
        "adjoint_identity": bool(idp < 1e-6 and idm < 1e-6),
        "sign_positive": bool(sign > 0),
    }


def cmd_evolve(cfg: RunConfig, args, outdir: Path) -> int:
    if args.initial:
        from .snapshots import read_snapshot

        u0 = read_snapshot(args.initial)
    else:
        u0 = multisoliton_sum(cfg.family, cfg.t_near, cfg.grid)
    ecfg = EvolveConfig(
        t_start=cfg.t_near,
        t_end=cfg.horizon,
        dt=cfg.dt,
        record_stride=cfg.record_stride,
        dealias=cfg.dealias,
        stability_factor=cfg.stability_factor,
    )
    traj = evolve(u0, cfg.family.p, ecfg)
    save_trajectory(traj, outdir / "trajectory")
    rows = []
    for t, snap, m, e in zip(
        traj.times, traj.snapshots, traj.mass_series, traj.energy_series
    ):
        rows.append((t, m, e, h1_distance(snap, multisoliton_sum(cfg.family, t, cfg.grid))))
    _series_csv(outdir / "series.csv", ["t", "mass", "energy", "h1_residual"], rows)
    return EXIT_OK


def _parse_amplitudes(s: str, n: int):
    try:
        vals = tuple(float(v) for v in s.split(","))
    except ValueError as exc:
        raise ConfigurationError(f"bad amplitude list {s!r}") from exc
    if len(vals) != n:
        raise ConfigurationError(f"need {n} amplitudes, got {len(vals)}")
    return vals


def cmd_construct(cfg: RunConfig, args, outdir: Path) -> int:
    amplitudes = _parse_amplitudes(args.A, cfg.family.n_solitons)
    bases = _solve_bases(cfg)
    cst = _constants(cfg, bases)
    build = build_family(
        cfg.family,
        bases,
        cfg.grid,
        amplitudes,
        cfg.horizon,
        cfg.t_near,
        cfg.dt,
        cfg.record_stride,
        tol=cfg.shoot_tol,
        gamma_eff=cst.gamma_eff,
    )
    shooting = []
    for stage in build.stages:
        j = stage.spec.j
        sdir = outdir / f"stage_{j}"
        save_trajectory(stage.trajectory, sdir / "trajectory")
        _series_csv(
            sdir / "residuals.csv",
            ["t", "z_h1", "tube"],
            zip(stage.trajectory.times, stage.z_norms, stage.tube),
        )
        shooting.append(
            {
                "stage": j,
                "b": list(stage.b),
                "iterations": stage.iterations,
                "residual": [float(r) for r in stage.residual],
                "tube_ok": stage.tube_ok,
                "report": stage.report,
            }
        )
    _json_dump({"A": list(amplitudes), "stages": shooting}, outdir / "shooting.json")
    return EXIT_OK


def _family_builder(cfg: RunConfig, bases, cst):
    n = cfg.family.n_solitons
    cache: dict = {}

    def builder(prefix):
        key = tuple(prefix)
        if key not in cache:
            amplitudes = tuple(prefix) + (0.0,) * (n - len(prefix))
            build = build_family(
                cfg.family,
                bases,
                cfg.grid,
                amplitudes,
                cfg.horizon,
                cfg.t_near,
                cfg.dt,
                cfg.record_stride,
                tol=cfg.shoot_tol,
                gamma_eff=cst.gamma_eff,
            )
            cache[key] = build.trajectory
        return cache[key]

    return builder


def cmd_classify(cfg: RunConfig, args, outdir: Path) -> int:
    traj = load_trajectory(args.traj)
    bases = _solve_bases(cfg)
    cst = _constants(cfg, bases)
    builder = _family_builder(cfg, bases, cst)
    result = classify(
        traj, cfg.family, bases, builder, cst.gamma_eff, cfg.shoot_tol
    )
    theta = uniqueness_residual(traj, tuple(result.A), builder, bases)
    _series_csv(outdir / "theta.csv", ["t", "theta"], theta)
    _json_dump(
        {
            "A": [float(a) for a in result.A],
            "tol_class": result.tol_class,
            "plateaus": [dict(p) for p in result.plateaus],
            "theta_series": "theta.csv",
        },
        outdir / "classification.json",
    )
    return EXIT_OK


def cmd_monotonicity(cfg: RunConfig, args, outdir: Path) -> int:
    traj = load_trajectory(args.traj)
    bases = _solve_bases(cfg)
    cst = _constants(cfg, bases)
    s0 = cst.sigma0
    grid = traj.grid

    x = grid.nodes
    d1, _, d3 = psi_derivatives(s0, x)
    checks = {
        "psi_mirror": bool(
            np.max(np.abs(psi_scalar(s0, x) + psi_scalar(s0, -x) - 1.0)) < 1e-12
        ),
        "psi_third_derivative_bound": bool(
            np.all(np.abs(d3) <= (s0 / 4.0) * np.abs(d1) + 1e-300)
        ),
    }
    ws = weights(cfg.family, s0, float(traj.times[0]), grid)
    part = sum(phi.values for phi in ws.phi)
    checks["partition_of_unity"] = bool(np.max(np.abs(part - 1.0)) < 1e-12)
    checks["h_x_nonpositive"] = bool(np.all(ws.h_x.values <= 0))
    checks["h_t_dominates"] = bool(
        np.all(ws.h_t.values >= s0 * np.abs(ws.h_x.values) - 1e-15)
    )

    rows = []
    for t, snap in zip(traj.times, traj.snapshots):
        m, e, et = local_quantities(snap, cfg.family, float(t), s0)
        rows.append((t, *m, *e, *et))
    n = cfg.family.n_solitons
    header = (
        ["t"]
        + [f"M_{j+1}" for j in range(n)]
        + [f"E_{j+1}" for j in range(n)]
        + [f"Etilde_{j+1}" for j in range(n)]
    )
    _series_csv(outdir / "local_quantities.csv", header, rows)
    _json_dump(checks, outdir / "monotonicity.json")
    return EXIT_OK


def cmd_report(cfg: RunConfig, args, outdir: Path) -> int:
    summary = {}
    for name in ("spectrum.json", "shooting.json", "classification.json", "monotonicity.json"):
        path = outdir / name
        if path.exists():
            summary[name.removesuffix(".json")] = json.loads(path.read_text())
    _json_dump(summary, outdir / "report.json")
    (outdir / "plots.py").write_text(_PLOT_SCRIPT)
    return EXIT_OK


_PLOT_SCRIPT = '''"""Static plots regenerated from the CSV artifacts next to this script."""
import csv
import pathlib

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = pathlib.Path(__file__).parent
for name in ("series.csv", "theta.csv", "local_quantities.csv"):
    path = here / name
    if not path.exists():
        continue
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        continue
    keys = [k for k in rows[0] if k != "t"]
    t = [float(r["t"]) for r in rows]
    fig, ax = plt.subplots()
    for k in keys:
        ax.plot(t, [float(r[k]) for r in rows], label=k)
    ax.set_xlabel("t")
    ax.set_yscale("log")
    ax.legend(fontsize=6)
    fig.savefig(here / (path.stem + ".png"), dpi=150)
    plt.close(fig)
'''


_COMMANDS = {
    "spectrum": cmd_spectrum,
    "evolve": cmd_evolve,
    "construct": cmd_construct,
    "classify": cmd_classify,
    "monotonicity": cmd_monotonicity,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gkdvlab", description="multi-soliton construction laboratory"
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML experiment file")
        p.add_argument("--output", help="override run.output_dir")
        if name == "spectrum":
            p.add_argument(
                "--oracle", action="store_true",
                help="also run the shooting oracle for each speed",
            )
        if name == "evolve":
            p.add_argument("--initial", help="initial-data snapshot (default: soliton sum)")
        if name == "construct":
            p.add_argument("--A", required=True, help="comma-separated amplitudes")
        if name in ("classify", "monotonicity"):
            p.add_argument("--traj", required=True, help="trajectory directory")
    return parser


def main(argv=None) -> int:
    threads = os.environ.get("GKDV_LAB_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(Path(args.config).read_text())
        outdir = Path(args.output or cfg.output_dir)
        outdir.mkdir(parents=True, exist_ok=True)
        code = _COMMANDS[args.command](cfg, args, outdir)
        _write_manifest(cfg, args.command, outdir)
        return code
    except _CONFIG_ERRORS as exc:
        _emit_error(exc)
        return EXIT_CONFIG
    except _NUMERIC_ERRORS as exc:
        _emit_error(exc)
        return EXIT_NUMERIC
    except _CONVERGENCE_ERRORS as exc:
        _emit_error(exc)
        return EXIT_CONVERGENCE
    except OSError as exc:
        _emit_error(exc)
        return EXIT_IO
    except GkdvError as exc:  # unclassified package error: treat as numeric
        _emit_error(exc)
        return EXIT_NUMERIC


def _emit_error(exc: Exception):
    print(
        json.dumps(
            {"error": type(exc).__name__, "message": str(exc)}, sort_keys=True
        ),
        file=sys.stderr,
    )


if __name__ == "__main__":
    sys.exit(main())
