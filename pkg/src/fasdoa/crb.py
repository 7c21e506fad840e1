"""Stochastic CRB for LoS DOAs with uncorrelated sources and known noise power."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import GeometryDesign


class CrbUndefinedError(ValueError):
    """The FIM is singular for this configuration."""


@dataclass(frozen=True)
class CrbInput:
    design: GeometryDesign
    angles_deg: tuple[float, ...]
    powers: tuple[float, ...]
    noise_var: float
    snapshots: int
    wavelength: float = 1.0
    manifold: str = "stacked"

    def __post_init__(self):
        if len(self.angles_deg) != len(self.powers):
            raise ValueError("one power per angle")
        if any(p <= 0 for p in self.powers):
            raise ValueError("powers must be positive")
        if self.noise_var <= 0:
            raise ValueError("noise variance must be positive")
        if self.snapshots < 1:
            raise ValueError("need at least one snapshot")
        if self.manifold not in ("stacked", "per_movement"):
            raise ValueError(f"unknown manifold {self.manifold!r}")

    @property
    def K(self) -> int:
        return len(self.angles_deg)


def stacked_coordinates(design: GeometryDesign, wavelength: float = 1.0) -> np.ndarray:
    """Metric coordinates of the movement-stacked manifold, in units of wavelength."""
    pos = np.concatenate([np.asarray(p, dtype=float) for p in design.positions])
    return pos * design.d / wavelength


def _block_mask(inp: CrbInput) -> np.ndarray | None:
    # Independent symbols per movement zero every cross-movement block.
    if inp.manifold == "stacked":
        return None
    block = np.repeat(np.arange(inp.design.n_movements), inp.design.M)
    return (block[:, None] == block[None, :]).astype(float)


def _manifold(inp: CrbInput):
    x = stacked_coordinates(inp.design, inp.wavelength)
    th = np.deg2rad(np.asarray(inp.angles_deg, dtype=float))
    A = np.exp(-2j * np.pi * x[:, None] * np.sin(th)[None, :])
    dA = -2j * np.pi * np.cos(th)[None, :] * x[:, None] * A
    return A, dA


def model_covariance(inp: CrbInput) -> np.ndarray:
    A, _ = _manifold(inp)
    p = np.asarray(inp.powers, dtype=float)
    R = (A * p) @ A.conj().T
    mask = _block_mask(inp)
    if mask is not None:
        R = R * mask
    return R + inp.noise_var * np.eye(A.shape[0])


def derivative_matrices(inp: CrbInput):
    """(D_theta, D_p): vec of dR/dtheta_k (radians) and dR/dp_k, column-major."""
    A, dA = _manifold(inp)
    p = np.asarray(inp.powers, dtype=float)
    N, K = A.shape
    mask = _block_mask(inp)
    if mask is None:
        mask = np.ones((N, N))
    D_th = np.empty((N * N, K), dtype=complex)
    D_p = np.empty((N * N, K), dtype=complex)
    for k in range(K):
        a, da = A[:, k], dA[:, k]
        dR = p[k] * (np.outer(da, a.conj()) + np.outer(a, da.conj()))
        D_th[:, k] = (mask * dR).ravel(order="F")
        D_p[:, k] = (mask * np.outer(a, a.conj())).ravel(order="F")
    return D_th, D_p


def _inv_sqrt(R: np.ndarray) -> np.ndarray:
    w, U = np.linalg.eigh(R)
    return (U / np.sqrt(w)) @ U.conj().T


def weight_matrix(R: np.ndarray) -> np.ndarray:
    # vec(A)^H (R^-T kron R^-1) vec(B) = tr(R^-1 A R^-1 B)
    Ri = np.linalg.inv(R)
    return np.kron(Ri.T, Ri)


def fim(inp: CrbInput) -> np.ndarray:
    """Fisher information over [theta_1..theta_K, p_1..p_K] (angles in radians)."""
    R = model_covariance(inp)
    if np.linalg.cond(R) > 1e14:
        raise CrbUndefinedError("model covariance is singular")
    D = np.hstack(derivative_matrices(inp))
    F = inp.snapshots * (D.conj().T @ weight_matrix(R) @ D)
    return 0.5 * (F + F.conj().T)


def _check_capacity(inp: CrbInput) -> None:
    delta = inp.design.max_lag
    if 2 * inp.K > 2 * delta + 1:
        raise CrbUndefinedError(f"K={inp.K} exceeds the identifiable limit for Delta={delta}")


def crb_theta(inp: CrbInput) -> np.ndarray:
    """K x K DOA bound in rad^2 via the projected (closed-form) expression."""
    _check_capacity(inp)
    R = model_covariance(inp)
    Ri_half = _inv_sqrt(R)
    W_half = np.kron(Ri_half.T, Ri_half)
    D_th, D_p = derivative_matrices(inp)
    G = W_half @ D_th
    X = W_half @ D_p
    XhX = X.conj().T @ X
    if np.linalg.cond(XhX) > 1e12:
        raise CrbUndefinedError("bound undefined for this configuration")
    P_perp = np.eye(X.shape[0]) - X @ np.linalg.solve(XhX, X.conj().T)
    J = G.conj().T @ P_perp @ G
    J = 0.5 * (J + J.conj().T).real
    w = np.linalg.eigvalsh(J)
    # An indefinite J means the angles are not identifiable from this manifold.
    if w[0] <= 1e-12 * w[-1]:
        raise CrbUndefinedError("bound undefined for this configuration")
    return np.linalg.inv(J) / inp.snapshots


def crb_theta_schur(inp: CrbInput) -> np.ndarray:
    """Oracle: theta-block of the inverse FIM."""
    _check_capacity(inp)
    F = fim(inp).real
    return np.linalg.inv(F)[: inp.K, : inp.K]


def crb_deg(inp: CrbInput) -> np.ndarray:
    """Diagonal of the DOA bound in degrees^2."""
    return np.diag(crb_theta(inp)) * (180.0 / np.pi) ** 2


def crb_rmse_deg(inp: CrbInput) -> float:
    """sqrt of the mean diagonal bound, comparable with a pooled RMSE."""
    return float(np.sqrt(np.mean(crb_deg(inp))))
