"""LoS-count detection and closed-form DOA estimation by polynomial rooting."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .covariance import LagVector, build_Rr


class EstimationError(RuntimeError):
    """Numerical failure inside the estimator."""


class NoSourceError(EstimationError):
    """Flat eigenvalue spectrum: no detectable source."""


class CapacityError(ValueError):
    """More sources requested than the co-array can resolve."""


EIG_FLOOR = 1e-12
DEFAULT_MIN_RATIO = 2.0


@dataclass
class EstimationResult:
    k_hat: int
    angles_deg: np.ndarray
    eigenvalues: np.ndarray
    roots: np.ndarray
    ratio_curve: np.ndarray

    def to_dict(self) -> dict:
        return {
            "k_hat": int(self.k_hat),
            "angles_deg": [float(a) for a in self.angles_deg],
            "eigenvalues": [float(e) for e in self.eigenvalues],
            "roots": [[float(z.real), float(z.imag)] for z in self.roots],
            "ratio_curve": [float(f) for f in self.ratio_curve],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EstimationResult":
        return cls(
            k_hat=int(data["k_hat"]),
            angles_deg=np.array(data["angles_deg"], dtype=float),
            eigenvalues=np.array(data["eigenvalues"], dtype=float),
            roots=np.array([complex(a, b) for a, b in data["roots"]], dtype=complex),
            ratio_curve=np.array(data["ratio_curve"], dtype=float),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def floor_spectrum(rho: np.ndarray) -> np.ndarray:
    """Raise every eigenvalue to the sampling-error level.

    The finite-sample R_r need not be positive semidefinite. The magnitude of
    its most negative eigenvalue measures the sampling error, and anything
    smaller cannot be told apart from zero. The relative floor EIG_FLOOR
    covers exact covariances, where negatives are pure rounding.
    """
    floor = max(EIG_FLOOR * rho[0], -min(float(rho.min()), 0.0))
    return np.maximum(rho, floor)


def ratio_curve(eigenvalues) -> np.ndarray:
    """Consecutive ratios rho_k / rho_{k+1}, k = 1..len-1, of the floored spectrum."""
    rho = np.asarray(eigenvalues, dtype=float)
    if rho.ndim != 1 or rho.size < 2:
        raise ValueError("need at least two eigenvalues")
    if rho[0] <= 0:
        raise NoSourceError("no detectable source")
    rho = floor_spectrum(rho)
    return rho[:-1] / rho[1:]


def detect_los_count(eigenvalues, min_ratio: float = DEFAULT_MIN_RATIO) -> int:
    """Index of the first peak of the eigenvalue-ratio curve.

    A peak is a strict local maximum of ``f_k = rho_k / rho_{k+1}`` (the
    value past the end counts as ``-inf``) whose height reaches
    ``min_ratio``. Finite-sample LoS eigenvalues are never exactly equal,
    so without the height gate small ripples inside the LoS group would be
    taken as the gap. ``min_ratio=0`` gives the bare first-local-maximum
    rule. If no peak clears the gate the global maximum is used.

    Eigenvalues are floored at the sampling-error level first (see
    :func:`floor_spectrum`).

    Args:
        eigenvalues: Descending spectrum of R_r.
        min_ratio: Smallest eigenvalue ratio accepted as a LoS/NLoS gap.

    Raises:
        NoSourceError: If the spectrum is flat.
    """
    f = ratio_curve(eigenvalues)
    if np.allclose(f, 1.0, rtol=0, atol=1e-12):
        raise NoSourceError("no detectable source")
    n = f.size
    for k in range(n):
        nxt = f[k + 1] if k + 1 < n else -np.inf
        if f[k] > nxt and f[k] >= min_ratio:
            return k + 1
    return int(np.argmax(f)) + 1


def mdl_count(eigenvalues, T: int) -> int:
    """Wax-Kailath MDL estimate of the total number of (LoS + NLoS) paths."""
    rho = np.sort(np.asarray(eigenvalues, dtype=float))[::-1]
    N = rho.size
    if rho[0] <= 0:
        return 0
    rho = floor_spectrum(rho)
    cost = np.empty(N)
    for k in range(N):
        tail = rho[k:]
        m = N - k
        log_ratio = np.mean(np.log(tail)) - np.log(np.mean(tail))
        cost[k] = -T * m * log_ratio + 0.5 * k * (2 * N - k) * np.log(T)
    return int(np.argmin(cost))


def subspace_split(Rr: np.ndarray, k_hat: int):
    """Eigen-split of R_r into signal and interference-plus-noise bases.

    Returns:
        (Us, Uw, eigenvalues) with eigenvalues in descending order.
    """
    n = Rr.shape[0]
    if k_hat > n - 1:
        raise CapacityError(f"K={k_hat} exceeds the co-array capacity {n - 1}")
    if k_hat < 1:
        raise ValueError("need at least one source")
    w, U = np.linalg.eigh(Rr)
    w, U = w[::-1], U[:, ::-1]
    return U[:, :k_hat], U[:, k_hat:], w


def root_polynomial(Uw: np.ndarray) -> np.ndarray:
    """Coefficients c_m, m = -(n-1)..n-1, of p(1/z)^T Uw Uw^H p(z).

    c_m is the sum of the m-th diagonal of Q = Uw Uw^H (entry [i, j] with
    i - j = m), so c_{-m} = conj(c_m).
    """
    Q = Uw @ Uw.conj().T
    n = Q.shape[0]
    return np.array([np.trace(Q, offset=-m) for m in range(-(n - 1), n)])


REFINE_BAND = 0.05


def refine_phase(Uw: np.ndarray, phi: float, iters: int = 60, max_step: float = 0.02) -> float:
    """Gauss-Newton on ||Uw^H v(phi)||^2 with v_m = exp(-j m phi).

    A target is a double root of the coefficient polynomial, so rounding in
    the coefficients can move it by the square root of machine precision and
    more when several targets crowd near endfire. Evaluating the null spectrum
    through Uw directly avoids that loss.
    """
    m = np.arange(Uw.shape[0])
    UwH = Uw.conj().T
    for _ in range(iters):
        v = np.exp(-1j * m * phi)
        h = UwH @ v
        hp = UwH @ (-1j * m * v)
        den = np.vdot(hp, hp).real
        if den <= 0.0:
            break
        step = float(np.clip(-np.vdot(hp, h).real / den, -max_step, max_step))
        phi += step
        if abs(step) < 1e-15:
            break
    return float(np.angle(np.exp(1j * phi)))


def select_roots(roots: np.ndarray, dedup_tol: float = 1e-3, Uw: np.ndarray | None = None):
    """Distinct candidates folded into the closed unit disk, nearest the unit circle first.

    Outside roots are reflected to pair them with their inside partners. When
    ``Uw`` is given, candidates within ``REFINE_BAND`` of the circle get their
    phase refined, and candidates that land on the same phase are one root.

    Returns:
        (candidates, radial distances), both sorted by distance to the circle.
    """
    roots = roots[np.isfinite(roots)]
    inside = roots.astype(complex)
    outside = np.abs(roots) > 1.0
    inside[outside] = 1.0 / roots[outside].conj()
    rad = 1.0 - np.abs(inside)
    phase = np.angle(inside)
    refined = np.zeros(inside.size, dtype=bool)
    if Uw is not None:
        refined = rad < REFINE_BAND
        phase[refined] = [refine_phase(Uw, p) for p in phase[refined]]
    kept: list[int] = []
    for i in np.argsort(rad, kind="stable"):
        zi = (1.0 - rad[i]) * np.exp(1j * phase[i])
        dup = False
        for j in kept:
            if refined[i] and refined[j]:
                dup = abs(np.angle(np.exp(1j * (phase[i] - phase[j])))) < 1e-7
            else:
                zj = (1.0 - rad[j]) * np.exp(1j * phase[j])
                dup = abs(zi - zj) < dedup_tol
            if dup:
                break
        if not dup:
            kept.append(i)
    kept_arr = np.array(kept, dtype=int)
    return (1.0 - rad[kept_arr]) * np.exp(1j * phase[kept_arr]), rad[kept_arr]


def root_music(Uw: np.ndarray, k_hat: int, d: float = 0.5, wavelength: float = 1.0,
               refine: bool = True):
    """DOA estimates from the noise-subspace root polynomial.

    Returns:
        (angles_deg ascending, selected roots)
    """
    coeffs = root_polynomial(Uw)
    # numpy.roots wants the highest power first.
    roots = np.roots(coeffs[::-1])
    cand, _ = select_roots(roots, Uw=Uw if refine else None)
    if cand.size < k_hat:
        raise EstimationError("not enough roots inside the unit disk")
    scale = wavelength / (2 * np.pi * d)
    chosen_z, chosen_t = [], []
    for z in cand:
        s = scale * np.angle(z)
        if abs(s) >= 1.0:
            continue
        chosen_z.append(z)
        chosen_t.append(np.rad2deg(np.arcsin(s)))
        if len(chosen_z) == k_hat:
            break
    if len(chosen_z) < k_hat:
        raise EstimationError("too few roots map to valid angles")
    order = np.argsort(chosen_t)
    return np.asarray(chosen_t)[order], np.asarray(chosen_z)[order]


def music_spectrum(Uw: np.ndarray, grid_deg, d: float = 0.5, wavelength: float = 1.0) -> np.ndarray:
    """Spectral MUSIC pseudo-spectrum on the R_r manifold (test oracle)."""
    n = Uw.shape[0]
    w = 2 * np.pi * np.sin(np.deg2rad(np.asarray(grid_deg))) / wavelength
    C = np.exp(-1j * np.arange(n)[:, None] * d * w[None, :])
    proj = Uw.conj().T @ C
    denom = np.sum(np.abs(proj) ** 2, axis=0)
    return 1.0 / np.maximum(denom, 1e-300)


def mse_prediction(root_mse: float, angle_deg: float, delta: int, d: float = 0.5,
                   wavelength: float = 1.0) -> float:
    if not abs(angle_deg) < 90.0:
        raise ValueError("angle outside (-90, 90)")
    c = np.cos(np.deg2rad(angle_deg))
    return (wavelength / (2 * np.pi * d * c)) ** 2 * root_mse / (2 * (delta + 1))


def estimate(r: LagVector, method: str = "ratio", k: int | None = None, T: int | None = None,
             d: float = 0.5, wavelength: float = 1.0,
             min_ratio: float = DEFAULT_MIN_RATIO, refine: bool = True) -> EstimationResult:
    """Runs detection plus root-MUSIC on a lag vector.

    Args:
        r: Co-array observation vector.
        method: ``ratio`` (first-peak eigenvalue ratio), ``mdl`` or ``fixed``.
        k: Source count for ``fixed``.
        T: Snapshot count, required by ``mdl``.
        refine: Polish near-circle root phases on the null spectrum.
    """
    Rr = build_Rr(r)
    w = np.linalg.eigvalsh(Rr)[::-1]
    f = ratio_curve(w)
    if method == "ratio":
        k_hat = detect_los_count(w, min_ratio)
    elif method == "mdl":
        if T is None:
            raise ValueError("MDL needs the snapshot count")
        k_hat = mdl_count(w, T)
    elif method == "fixed":
        if k is None:
            raise ValueError("fixed method needs k")
        k_hat = k
    else:
        raise ValueError(f"unknown method {method!r}")
    if k_hat == 0:
        raise NoSourceError("no detectable source")
    k_hat = min(k_hat, r.delta) if method == "mdl" else k_hat
    _, Uw, w = subspace_split(Rr, k_hat)
    angles, roots = root_music(Uw, k_hat, d, wavelength, refine)
    return EstimationResult(k_hat, angles, w, roots, f)
