"""Sample covariances, co-array lag rearrangement and the Toeplitz matrix R_r."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import toeplitz

from .geometry import GeometryDesign


class CovarianceError(ValueError):
    pass


class StackMode(str, Enum):
    STACKED = "stacked"
    PER_MOVEMENT = "per_movement"


@dataclass
class CovarianceStack:
    mode: StackMode
    matrices: list[np.ndarray]
    snapshot_count: int


@dataclass
class LagVector:
    """Observation vector over lags -delta..delta; ``values[delta + l]`` is lag l."""

    delta: int
    values: np.ndarray
    counts: np.ndarray | None = None

    def at(self, lag: int) -> complex:
        return self.values[self.delta + lag]

    @property
    def lags(self) -> np.ndarray:
        return np.arange(-self.delta, self.delta + 1)


def _hermitize(R: np.ndarray) -> np.ndarray:
    return 0.5 * (R + R.conj().T)


def sample_covariance(blocks, mode: StackMode | str = StackMode.STACKED) -> CovarianceStack:
    """(1/T) Y Y^H, either on the movement-stacked output or per movement.

    Args:
        blocks: Sequence of :class:`~fasdoa.signal.SnapshotBlock` or raw
            M x T arrays, ordered by movement index.
        mode: ``stacked`` concatenates all movements into one M(G+1) vector
            per snapshot (aligned signals); ``per_movement`` keeps G+1
            separate M x M estimates.
    """
    mode = StackMode(mode)
    mats = [np.asarray(getattr(b, "samples", b)) for b in blocks]
    if not mats:
        raise CovarianceError("no snapshot blocks")
    if mode is StackMode.STACKED:
        T = mats[0].shape[1]
        if any(m.shape[1] != T for m in mats):
            raise CovarianceError("stacked mode needs equal snapshot counts")
        Y = np.vstack(mats)
        return CovarianceStack(mode, [_hermitize(Y @ Y.conj().T / T)], T)
    out = [_hermitize(Y @ Y.conj().T / Y.shape[1]) for Y in mats]
    return CovarianceStack(mode, out, mats[0].shape[1])


def _row_coordinates(cov: CovarianceStack, design: GeometryDesign) -> list[np.ndarray]:
    if cov.mode is StackMode.STACKED:
        coords = [np.concatenate([np.asarray(p) for p in design.positions])]
    else:
        coords = [np.asarray(p) for p in design.positions]
    if len(coords) != len(cov.matrices) or any(
            c.size != R.shape[0] for c, R in zip(coords, cov.matrices)):
        raise CovarianceError("design does not match covariance dimensions")
    return coords


def rearrange_to_lags(cov: CovarianceStack, design: GeometryDesign,
                      delta: int | None = None) -> LagVector:
    """Averages covariance entries sharing a co-array lag into r(-delta..delta).

    Entry ``R[p, q]`` estimates ``E{y_p y_q^*}`` and therefore lands on lag
    ``x_q - x_p``. Per-movement matrices are pooled before averaging.
    """
    if delta is None:
        delta = design.max_lag
    coords = _row_coordinates(cov, design)
    n = 2 * delta + 1
    sums = np.zeros(n, dtype=complex)
    counts = np.zeros(n, dtype=np.int64)
    for x, R in zip(coords, cov.matrices):
        lag = (x[None, :] - x[:, None]).ravel()
        keep = np.abs(lag) <= delta
        idx = lag[keep] + delta
        np.add.at(sums, idx, R.ravel()[keep])
        counts += np.bincount(idx, minlength=n)
    if np.any(counts == 0):
        missing = (np.flatnonzero(counts == 0) - delta).tolist()
        raise CovarianceError(f"no covariance entries for lags {missing}")
    r = sums / counts
    r = 0.5 * (r + r[::-1].conj())
    r[delta] = r[delta].real
    return LagVector(delta, r, counts)


def build_Rr(r: LagVector) -> np.ndarray:
    """(delta+1) x (delta+1) Hermitian Toeplitz matrix with entry [m, n] = r(n - m).

    Column i is the exchange-reversed window r[i : i + delta] of the lag vector.
    """
    D = r.delta
    col = r.values[D::-1]
    row = r.values[D:]
    return toeplitz(col, row)


def analytic_lags(angles, powers, noise_var: float, delta: int, d: float = 0.5,
                  wavelength: float = 1.0) -> LagVector:
    """Closed-form r(l) = sum_k p_k exp(j l d w_k) + noise_var * delta(l)."""
    lags = np.arange(-delta, delta + 1)
    w = 2 * np.pi * np.sin(np.deg2rad(np.asarray(angles, dtype=float))) / wavelength
    r = np.exp(1j * lags[:, None] * d * w[None, :]) @ np.asarray(powers, dtype=float)
    r = r.astype(complex)
    r[delta] += noise_var
    return LagVector(delta, r)


def model_stack(design: GeometryDesign, angles, powers, noise_var: float,
                wavelength: float = 1.0, mode: StackMode | str | None = None) -> CovarianceStack:
    """Infinite-snapshot covariance for uncorrelated sources and white noise."""
    from .signal import steering_matrix
    if mode is None:
        mode = StackMode.STACKED if design.stacked else StackMode.PER_MOVEMENT
    mode = StackMode(mode)
    p = np.asarray(powers, dtype=float)
    if mode is StackMode.STACKED:
        groups = [np.concatenate([np.asarray(x) for x in design.positions])]
    else:
        groups = [np.asarray(x) for x in design.positions]
    mats = []
    for x in groups:
        A = steering_matrix(x, design.d, wavelength, angles)
        mats.append((A * p) @ A.conj().T + noise_var * np.eye(x.size))
    return CovarianceStack(mode, mats, 0)


def dump_matrix(path, M: np.ndarray) -> None:
    """Writes a complex matrix as text (real and imaginary parts interleaved)."""
    M = np.atleast_2d(M)
    out = np.empty((M.shape[0], 2 * M.shape[1]))
    out[:, 0::2] = M.real
    out[:, 1::2] = M.imag
    np.savetxt(path, out, fmt="%.17g")


def load_matrix(path) -> np.ndarray:
    raw = np.atleast_2d(np.loadtxt(path))
    return raw[:, 0::2] + 1j * raw[:, 1::2]
