"""Narrowband multipath snapshot synthesis for fluid-antenna arrays."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .geometry import GeometryDesign


class Alignment(str, Enum):
    ALIGNED = "aligned"
    MISALIGNED = "misaligned"


# Stream identifiers for per-role RNGs; changing these breaks reproducibility.
ROLE_GAINS = 1
ROLE_SYMBOLS = 2
ROLE_NOISE = 3
ROLE_SCENARIO = 4


@dataclass(frozen=True)
class Target:
    los_angle: float
    nlos_angles: tuple[float, ...] = ()


@dataclass(frozen=True)
class Scenario:
    """Targets plus link-level parameters for one Monte-Carlo trial.

    ``snr_db`` is the per-LoS-path SNR: LoS gains and symbols both have unit
    mean power, so the noise variance is ``10**(-snr_db/10)``.
    """

    targets: tuple[Target, ...]
    snr_db: float = 10.0
    snapshots: int = 500
    alignment: Alignment = Alignment.ALIGNED
    nlos_attenuation_db: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.snapshots < 1:
            raise ValueError("need at least one snapshot")
        los = [t.los_angle for t in self.targets]
        if len(set(los)) != len(los):
            raise ValueError("LoS angles must be distinct")
        for t in self.targets:
            for a in (t.los_angle, *t.nlos_angles):
                if not -90.0 < a < 90.0:
                    raise ValueError(f"angle {a} outside (-90, 90)")

    @property
    def los_angles(self) -> np.ndarray:
        return np.array([t.los_angle for t in self.targets], dtype=float)

    @property
    def noise_var(self) -> float:
        return noise_variance(self.snr_db)


@dataclass
class SnapshotBlock:
    movement_index: int
    samples: np.ndarray  # M x T


def noise_variance(snr_db: float) -> float:
    return 10.0 ** (-snr_db / 10.0)


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for a (seed, trial, role, ...) key."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *keys])))


def steering_vector(positions, d: float, wavelength: float, angle: float) -> np.ndarray:
    """exp(-j x_i 2 pi sin(theta) / lambda) for element coordinates x_i = position_i * d."""
    if not abs(angle) < 90.0:
        raise ValueError(f"angle {angle} outside (-90, 90)")
    x = np.asarray(positions, dtype=float) * d
    return np.exp(-2j * np.pi * x * np.sin(np.deg2rad(angle)) / wavelength)


def steering_matrix(positions, d: float, wavelength: float, angles) -> np.ndarray:
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    if angles.size and not np.all(np.abs(angles) < 90.0):
        raise ValueError("angles outside (-90, 90)")
    x = np.asarray(positions, dtype=float)[:, None] * d
    return np.exp(-2j * np.pi * x * np.sin(np.deg2rad(angles))[None, :] / wavelength)


def _cgauss(rng: np.random.Generator, shape, power: float = 1.0) -> np.ndarray:
    # Snapshot axis first so draws for T snapshots are a prefix of draws for T' > T.
    z = rng.standard_normal((*shape, 2))
    return np.sqrt(power / 2.0) * (z[..., 0] + 1j * z[..., 1])


def synthesize(scenario: Scenario, design: GeometryDesign, trial: int = 0,
               wavelength: float = 1.0) -> list[SnapshotBlock]:
    """Draws one snapshot block per movement index.

    Path gains are i.i.d. over the snapshot index and shared by all movements.
    Aligned scenarios reuse the same symbol stream for every movement; the
    misaligned regime draws fresh symbols per movement.

    Args:
        scenario: Targets, SNR, snapshot count and seed.
        design: Array geometry; ``design.d`` is expressed in wavelengths
            when ``wavelength`` is 1.
        trial: Monte-Carlo trial index, mixed into every RNG stream.
        wavelength: Carrier wavelength in the same unit as ``design.d``.

    Returns:
        List of ``G + 1`` blocks with M x T complex samples.
    """
    T = scenario.snapshots
    K = len(scenario.targets)
    n_mov = design.n_movements
    paths = [(k, t.los_angle, 1.0) for k, t in enumerate(scenario.targets)]
    nlos_power = 10.0 ** (-scenario.nlos_attenuation_db / 10.0)
    paths += [(k, a, nlos_power) for k, t in enumerate(scenario.targets) for a in t.nlos_angles]
    P = len(paths)

    gains = _cgauss(rng_for(scenario.seed, trial, ROLE_GAINS), (T, P))
    gains *= np.sqrt([p for _, _, p in paths])[None, :]
    sym_rng = rng_for(scenario.seed, trial, ROLE_SYMBOLS)
    if scenario.alignment is Alignment.ALIGNED:
        s = _cgauss(sym_rng, (T, K))
        symbols = [s] * n_mov
    else:
        s = _cgauss(sym_rng, (T, n_mov, K))
        symbols = [s[:, v, :] for v in range(n_mov)]
    noise_rng = rng_for(scenario.seed, trial, ROLE_NOISE)
    noise = _cgauss(noise_rng, (T, n_mov, design.M), scenario.noise_var)

    owner = np.array([k for k, _, _ in paths], dtype=int)
    angles = np.array([a for _, a, _ in paths], dtype=float)
    blocks = []
    for v in range(n_mov):
        A = steering_matrix(design.positions[v], design.d, wavelength, angles)
        if P:
            # Each path carries its target's symbol stream.
            x = gains * symbols[v][:, owner]
            y = A @ x.T
        else:
            y = np.zeros((design.M, T), dtype=complex)
        blocks.append(SnapshotBlock(v, y + noise[:, v, :].T))
    return blocks
