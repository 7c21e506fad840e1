"""Fast oracle checks runnable from the command line."""
from __future__ import annotations

import numpy as np

from .covariance import model_stack, rearrange_to_lags, build_Rr
from .crb import CrbInput, crb_theta, crb_theta_schur, derivative_matrices, model_covariance
from .estimator import estimate, music_spectrum, subspace_split
from .geometry import (design_aligned, design_misaligned, difference_coarray,
                       max_consecutive_dof, virtual_positions)


def check_coarray_closed_form() -> bool:
    for kind, build in (("aligned", design_aligned), ("misaligned", design_misaligned)):
        for M in range(2, 9):
            for G in range(0, 4):
                lags = difference_coarray(virtual_positions(build(M, G)))
                if lags.consecutive_count != max_consecutive_dof(M, G, kind):
                    return False
    return True


def check_reference_layouts() -> bool:
    a, m = design_aligned(3, 1), design_misaligned(4, 1)
    return (a.positions[0] == (0, 2, 7) and a.max_lag == 11
            and m.positions[0] == (0, 1, 3, 7) and m.max_lag == 9)


def check_exact_recovery() -> bool:
    rng = np.random.default_rng(1)
    for build in (lambda: design_aligned(3, 1), lambda: design_misaligned(4, 1)):
        design = build()
        K = design.max_lag
        angles = np.sort(rng.choice(np.arange(-70, 71, 3), K, replace=False)).astype(float)
        r = rearrange_to_lags(model_stack(design, angles, np.ones(K), 1.0), design)
        res = estimate(r, "fixed", k=K)
        if np.max(np.abs(res.angles_deg - angles)) > 1e-6:
            return False
    return True


def check_root_vs_grid() -> bool:
    design = design_aligned(3, 1)
    angles = np.array([-31.7, 4.2, 40.9])
    r = rearrange_to_lags(model_stack(design, angles, np.ones(3), 1.0), design)
    _, Uw, _ = subspace_split(build_Rr(r), 3)
    grid = np.arange(-89.0, 89.0, 0.001)
    spec = music_spectrum(Uw, grid)
    peaks = np.flatnonzero((spec[1:-1] > spec[:-2]) & (spec[1:-1] > spec[2:])) + 1
    top = np.sort(grid[peaks[np.argsort(spec[peaks])[-3:]]])
    res = estimate(r, "fixed", k=3)
    return bool(np.max(np.abs(top - res.angles_deg)) <= 0.002)


def check_fim_derivatives() -> bool:
    inp = CrbInput(design_aligned(3, 1), (-12.0, 25.0), (1.0, 2.0), 0.5, 100)
    D_th, _ = derivative_matrices(inp)
    h = 1e-5
    for k in range(2):
        hi, lo = list(inp.angles_deg), list(inp.angles_deg)
        hi[k] += np.rad2deg(h)
        lo[k] -= np.rad2deg(h)
        Rp = model_covariance(CrbInput(inp.design, tuple(hi), inp.powers, inp.noise_var, 100))
        Rm = model_covariance(CrbInput(inp.design, tuple(lo), inp.powers, inp.noise_var, 100))
        fd = ((Rp - Rm) / (2 * h)).ravel(order="F")
        if np.linalg.norm(fd - D_th[:, k]) > 1e-6 * np.linalg.norm(D_th[:, k]):
            return False
    return True


def check_crb_schur() -> bool:
    inp = CrbInput(design_aligned(3, 1), (0.0,), (1.0,), 1.0, 500)
    a, b = crb_theta(inp), crb_theta_schur(inp)
    return bool(np.max(np.abs(a - b)) <= 1e-8 * np.max(np.abs(b)))


CHECKS = [
    ("co-array closed forms (brute force)", check_coarray_closed_form),
    ("reference layouts", check_reference_layouts),
    ("exact-covariance recovery at K = Delta", check_exact_recovery),
    ("root-MUSIC vs 0.001 deg grid MUSIC", check_root_vs_grid),
    ("FIM columns vs finite differences", check_fim_derivatives),
    ("closed-form CRB vs inverse-FIM block", check_crb_schur),
]


def run_selftest(echo=print) -> bool:
    ok = True
    for name, fn in CHECKS:
        passed = fn()
        ok &= passed
        echo(f"{'PASS' if passed else 'FAIL'}  {name}")
    return ok
