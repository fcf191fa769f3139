"""Backward shooting construction of the multi-soliton solution family.

Family members are labeled by amplitudes (A_1, ..., A_N): member j decays
onto the multi-soliton together with an extra A_j e^{-e_j t} y_plus ripple
on soliton j.  Each member is built by stages: stage 0 shoots the base
multi-soliton from the pure soliton sum at the horizon S, and stage j adds
the amplitude-A_j perturbation on top of the stage j-1 solution.

In each stage the final data at S carries free coefficients b_k along the
y_plus modes of the faster solitons k > j (the directions that grow under
backward evolution); a damped Newton iteration on b drives the grown
components, measured at the near end t0, to zero.  A tube
C e^{-(rate) t} around the reference acts as trust region for the iterates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, ConvergenceError, HorizonError
from .evolver import EvolveConfig, Trajectory, evolve
from .grid import Field, GridSpec, h1_norm, l2_inner
from .linearized import LinearizedBasis, mode_on_grid
from .profiles import SolitonFamily, multisoliton_sum

__all__ = [
    "FinalDataSpec",
    "ShootingResult",
    "FamilyBuild",
    "gram_matrix",
    "modulated_beta",
    "assemble_final_data",
    "shoot",
    "build_family",
]

# Finite-difference step floor for the Newton Jacobian.
FD_REL_STEP = 1e-7
FD_ABS_FLOOR = 1e-9
MAX_DAMPINGS = 6


def _member_center(fam: SolitonFamily, k: int, t: float) -> float:
    m = fam.members[k]
    return m.c * t + m.x0


@dataclass(frozen=True)
class FinalDataSpec:
    """Final data u(S) = phi_ref(S) + A_j e^{-e_j S} y_j^+(S) + sum_k b_k y_k^+(S).

    ``j`` is the 1-based index of the perturbed soliton (0 for the base
    stage, where no amplitude term is present) and ``b`` holds one
    coefficient per faster soliton k = j+1..N (k = 1..N when j = 0).
    """

    fam: SolitonFamily
    j: int
    amplitude: float
    horizon: float
    b: tuple[float, ...]

    def __post_init__(self):
        n = self.fam.n_solitons
        if not 0 <= self.j <= n:
            raise ArgumentError(f"stage index j must be in 0..{n}, got {self.j}")
        if self.j == 0 and self.amplitude != 0.0:
            raise ArgumentError("the base stage takes no amplitude")
        expected = n - self.j if self.j > 0 else n
        if len(self.b) != expected:
            raise ArgumentError(
                f"stage j = {self.j} needs {expected} free coefficients, got {len(self.b)}"
            )

    @property
    def free_indices(self) -> tuple[int, ...]:
        """0-based soliton indices carrying free coefficients."""
        start = self.j if self.j > 0 else 0
        return tuple(range(start, self.fam.n_solitons))


@dataclass(frozen=True)
class ShootingResult:
    spec: FinalDataSpec
    b: tuple[float, ...]
    iterations: int
    residual: np.ndarray = field(repr=False)
    trajectory: Trajectory = field(repr=False)
    z_fields: tuple[Field, ...] = field(repr=False)
    z_norms: np.ndarray = field(repr=False)
    tube: np.ndarray = field(repr=False)
    tube_ok: bool = True
    report: dict = field(default_factory=dict, repr=False)


@dataclass(frozen=True)
class FamilyBuild:
    fam: SolitonFamily
    amplitudes: tuple[float, ...]
    stages: tuple[ShootingResult, ...]

    @property
    def trajectory(self) -> Trajectory:
        return self.stages[-1].trajectory


def gram_matrix(
    fam: SolitonFamily,
    bases: tuple[LinearizedBasis, ...],
    j: int,
    horizon: float,
    grid: GridSpec,
) -> np.ndarray:
    """Pairings (y_l^+(S), z_k^-(S)) over the free indices of stage j.

    Diagonal entries are 1 by normalization; off-diagonal entries decay with
    the soliton separations at the horizon.
    """
    start = j if j > 0 else 0
    idx = range(start, fam.n_solitons)
    ys = [
        mode_on_grid(bases[k], "y_plus", grid, _member_center(fam, k, horizon))
        for k in idx
    ]
    zs = [
        mode_on_grid(bases[k], "z_minus", grid, _member_center(fam, k, horizon))
        for k in idx
    ]
    return np.array([[l2_inner(y, z) for y in ys] for z in zs])


def modulated_beta(gram: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Solve gram @ beta = a, guarding the near-identity precondition."""
    dev = np.linalg.norm(gram - np.eye(len(gram)), 2)
    if dev > 0.5:
        raise HorizonError(
            f"mode pairings deviate from identity by {dev:.3g} > 0.5; "
            "increase the horizon or the soliton separations"
        )
    return np.linalg.solve(gram, np.asarray(a, dtype=float))


def assemble_final_data(
    phi_S: Field,
    spec: FinalDataSpec,
    bases: tuple[LinearizedBasis, ...],
) -> Field:
    values = phi_S.values.copy()
    if spec.j > 0:
        k = spec.j - 1
        y = mode_on_grid(
            bases[k], "y_plus", phi_S.grid, _member_center(spec.fam, k, spec.horizon)
        )
        values = values + spec.amplitude * math.exp(
            -bases[k].e_c * spec.horizon
        ) * y.values
    for bk, k in zip(spec.b, spec.free_indices):
        y = mode_on_grid(
            bases[k], "y_plus", phi_S.grid, _member_center(spec.fam, k, spec.horizon)
        )
        values = values + bk * y.values
    return Field(phi_S.grid, values)


def _reference_at(
    ref_traj: Trajectory | None, fam: SolitonFamily, grid: GridSpec, t: float
) -> Field:
    if ref_traj is None:
        return multisoliton_sum(fam, t, grid)
    return ref_traj.at_time(t)


def _z_field(
    u: Field,
    t: float,
    spec: FinalDataSpec,
    bases: tuple[LinearizedBasis, ...],
    ref_traj: Trajectory | None,
) -> Field:
    z = u - _reference_at(ref_traj, spec.fam, u.grid, t)
    if spec.j > 0:
        k = spec.j - 1
        y = mode_on_grid(
            bases[k], "y_plus", u.grid, _member_center(spec.fam, k, t)
        )
        z = z - (spec.amplitude * math.exp(-bases[k].e_c * t)) * y
    return z


def shoot(
    fam: SolitonFamily,
    bases: tuple[LinearizedBasis, ...],
    grid: GridSpec,
    j: int,
    amplitude: float,
    horizon: float,
    t_near: float,
    dt: float,
    record_stride: int,
    ref_traj: Trajectory | None = None,
    tol: float = 1e-8,
    max_iter: int = 15,
    tube_margin: float = 100.0,
    gamma_eff: float = 0.0,
    b0: tuple[float, ...] | None = None,
) -> ShootingResult:
    """One construction stage: Newton on the free final-data coefficients.

    The residual is the vector of pairings of z(t_near) with the z_minus
    modes of the free solitons; these are the components that grow backward
    in time, so controlling them at t_near pins the solution.
    """
    if horizon <= t_near:
        raise ArgumentError("horizon must exceed t_near")
    n_free = (fam.n_solitons - j) if j > 0 else fam.n_solitons
    spec0 = FinalDataSpec(fam, j, amplitude, horizon, tuple([0.0] * n_free))
    cfg = EvolveConfig(
        t_start=horizon, t_end=t_near, dt=dt, record_stride=record_stride
    )
    phi_S = _reference_at(ref_traj, fam, grid, horizon)

    e_free = np.array([bases[k].e_c for k in spec0.free_indices])
    e_max = e_free.max() if n_free else max(b.e_c for b in bases)
    noise_floor = 10.0 * np.finfo(float).eps * math.exp(e_max * (horizon - t_near))
    gram = gram_matrix(fam, bases, j, horizon, grid)

    def run(b: tuple[float, ...]):
        sp = FinalDataSpec(fam, j, amplitude, horizon, b)
        u_S = assemble_final_data(phi_S, sp, bases)
        traj = evolve(u_S, fam.p, cfg).reversed()
        u0 = traj.snapshots[0]
        z0 = _z_field(u0, t_near, sp, bases, ref_traj)
        r = np.array(
            [
                l2_inner(
                    z0,
                    mode_on_grid(
                        bases[k], "z_minus", grid, _member_center(fam, k, t_near)
                    ),
                )
                for k in sp.free_indices
            ]
        )
        return r, traj

    b = np.array(b0 if b0 is not None else [0.0] * n_free, dtype=float)
    r, traj = run(tuple(b))
    iterations = 0
    while n_free and np.max(np.abs(r)) > tol:
        if iterations >= max_iter:
            raise ConvergenceError(
                f"shooting stage j = {j} did not reach tol {tol:g} in "
                f"{max_iter} iterations (residual {np.max(np.abs(r)):.3g})"
            )
        iterations += 1
        jac = np.empty((n_free, n_free))
        for col in range(n_free):
            h = max(FD_REL_STEP * abs(b[col]), FD_ABS_FLOOR)
            bp = b.copy()
            bp[col] += h
            rp, _ = run(tuple(bp))
            jac[:, col] = (rp - r) / h
        step = np.linalg.solve(jac, r)
        damp = 1.0
        for _ in range(MAX_DAMPINGS + 1):
            cand = b - damp * step
            rc, tc = run(tuple(cand))
            if np.max(np.abs(rc)) < np.max(np.abs(r)):
                b, r, traj = cand, rc, tc
                break
            damp *= 0.5
        else:
            raise ConvergenceError(
                f"shooting stage j = {j}: damping exhausted at iteration {iterations}"
            )

    sp = FinalDataSpec(fam, j, amplitude, horizon, tuple(b))
    zs = tuple(
        _z_field(u, t, sp, bases, ref_traj)
        for t, u in zip(traj.times, traj.snapshots)
    )
    z_norms = np.array([h1_norm(z) for z in zs])
    rate = bases[max(j, 1) - 1].e_c + gamma_eff
    anchor = max(z_norms[-1], tol)
    tube = tube_margin * anchor * np.exp(rate * (horizon - traj.times))
    tube_ok = bool(np.all(z_norms <= tube))
    report = {
        "noise_floor": noise_floor,
        "tol": tol,
        "tol_above_floor": tol >= noise_floor,
        "gram_deviation": float(np.linalg.norm(gram - np.eye(n_free), 2))
        if n_free
        else 0.0,
        "rate": rate,
    }
    return ShootingResult(
        spec=sp,
        b=tuple(b),
        iterations=iterations,
        residual=r,
        trajectory=traj,
        z_fields=zs,
        z_norms=z_norms,
        tube=tube,
        tube_ok=tube_ok,
        report=report,
    )


def build_family(
    fam: SolitonFamily,
    bases: tuple[LinearizedBasis, ...],
    grid: GridSpec,
    amplitudes: tuple[float, ...],
    horizon: float,
    t_near: float,
    dt: float,
    record_stride: int,
    tol: float = 1e-8,
    max_iter: int = 15,
    tube_margin: float = 100.0,
    gamma_eff: float = 0.0,
) -> FamilyBuild:
    """Staged construction of the family member with the given amplitudes.

    Stage 0 builds the base multi-soliton; stage j perturbs the previous
    stage by amplitude A_j on soliton j.  A_j = 0 stages still rerun the
    shoot (with a zero amplitude the solve is cheap and the bookkeeping
    stays uniform); the last stage has no free coefficients and is a single
    backward solve.
    """
    if len(amplitudes) != fam.n_solitons:
        raise ArgumentError("need one amplitude per soliton")
    stages = []
    ref: Trajectory | None = None
    for j in range(fam.n_solitons + 1):
        res = shoot(
            fam,
            bases,
            grid,
            j,
            0.0 if j == 0 else float(amplitudes[j - 1]),
            horizon,
            t_near,
            dt,
            record_stride,
            ref_traj=ref,
            tol=tol,
            max_iter=max_iter,
            tube_margin=tube_margin,
            gamma_eff=gamma_eff,
        )
        stages.append(res)
        ref = res.trajectory
    return FamilyBuild(fam=fam, amplitudes=tuple(amplitudes), stages=tuple(stages))
