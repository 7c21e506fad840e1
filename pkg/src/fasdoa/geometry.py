"""Fluid-antenna array designs and difference co-array utilities.

All element coordinates are stored as exact integers in units of the basic
movement step ``d``. The physical spacing only enters when steering phases
are built.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class DesignError(ValueError):
    """Raised for invalid or self-inconsistent array designs."""


class DesignKind(str, Enum):
    ALIGNED = "aligned"
    MISALIGNED = "misaligned"
    RAW = "raw"


@dataclass(frozen=True)
class GeometryDesign:
    """Array blueprint: subarray sizes, movement count and per-movement layout.

    ``positions[v]`` holds the integer coordinates of all ``M1 + M2`` physical
    elements after ``v`` movements, subarray 1 first.
    """

    kind: DesignKind
    M1: int
    M2: int
    G: int
    positions: tuple[tuple[int, ...], ...]
    d: float = 0.5  # in wavelengths

    @property
    def M(self) -> int:
        return self.M1 + self.M2

    @property
    def delta1(self) -> int:
        return self.G + 1

    @property
    def delta2(self) -> int | None:
        if self.kind is DesignKind.ALIGNED:
            return self.M1 * (self.G + 1) ** 2
        return None

    @property
    def n_movements(self) -> int:
        return len(self.positions)

    @property
    def max_lag(self) -> int:
        """Largest lag Delta of the guaranteed consecutive co-array range."""
        if self.kind is DesignKind.ALIGNED:
            d1 = self.delta1
            return self.M1 * d1 - 1 + self.M1 * self.M2 * d1 ** 2
        if self.kind is DesignKind.MISALIGNED:
            return self.M1 - 1 + self.M1 * self.M2 * self.delta1
        return difference_coarray(virtual_positions(self)).hi

    @property
    def stacked(self) -> bool:
        """Whether snapshots across movements are combined coherently."""
        return self.kind is not DesignKind.MISALIGNED

    def subarray(self, v: int, which: int) -> tuple[int, ...]:
        pos = self.positions[v]
        return pos[: self.M1] if which == 1 else pos[self.M1:]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "M1": self.M1,
            "M2": self.M2,
            "G": self.G,
            "d": self.d,
            "positions": [list(p) for p in self.positions],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GeometryDesign":
        design = cls(
            kind=DesignKind(data["kind"]),
            M1=int(data["M1"]),
            M2=int(data["M2"]),
            G=int(data["G"]),
            positions=tuple(tuple(int(x) for x in p) for p in data["positions"]),
            d=float(data.get("d", 0.5)),
        )
        _validate(design)
        return design

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True)
class LagSet:
    """Difference co-array of an integer position set."""

    lags: tuple[int, ...]
    lo: int
    hi: int

    @property
    def consecutive_count(self) -> int:
        return self.hi - self.lo + 1

    @property
    def consecutive_range(self) -> tuple[int, int]:
        return self.lo, self.hi


def optimal_split(M: int) -> tuple[int, int]:
    """Antenna split between the two subarrays; odd M favours subarray 1."""
    if M < 2:
        raise DesignError(f"need at least 2 antennas, got M={M}")
    M1 = (M + 1) // 2
    return M1, M - M1


def aligned_positions(M1: int, M2: int, G: int, N: int) -> tuple[int, ...]:
    d1 = G + 1
    d2 = M1 * d1 ** 2
    start2 = (2 * M1 - 1) * d1 + G + M1 * N * d1
    sub1 = [N + i * d1 for i in range(M1)]
    sub2 = [start2 + j * d2 for j in range(M2)]
    return tuple(sub1 + sub2)


def misaligned_positions(M1: int, M2: int, G: int, g: int) -> tuple[int, ...]:
    d1 = G + 1
    sub1 = list(range(M1))
    sub2 = [(2 * M1 - 1) + j * M1 * d1 + g * M1 for j in range(M2)]
    return tuple(sub1 + sub2)


def _check_counts(M: int, G: int) -> None:
    if M < 2:
        raise DesignError(f"need at least 2 antennas, got M={M}")
    if G < 0:
        raise DesignError(f"movement count must be non-negative, got G={G}")


def _validate(design: GeometryDesign) -> None:
    if design.M1 < 1 or design.M2 < 1:
        raise DesignError("each subarray needs at least one element")
    if len(design.positions) != design.G + 1:
        raise DesignError("expected one layout per movement index 0..G")
    for v, pos in enumerate(design.positions):
        if len(pos) != design.M:
            raise DesignError(f"movement {v}: expected {design.M} elements")
        if len(set(pos)) != len(pos):
            raise DesignError(f"movement {v}: colliding element positions")
    if design.kind is DesignKind.RAW:
        return
    sub1 = {x for v in range(design.n_movements) for x in design.subarray(v, 1)}
    sub2 = {x for v in range(design.n_movements) for x in design.subarray(v, 2)}
    if sub1 & sub2:
        raise DesignError("subarray 2 overlaps subarray 1 territory")


def design_with_split(kind: DesignKind | str, M1: int, M2: int, G: int,
                      d: float = 0.5) -> GeometryDesign:
    """Builds a design with an explicit antenna split (used for split searches)."""
    kind = DesignKind(kind)
    _check_counts(M1 + M2, G)
    if kind is DesignKind.ALIGNED:
        layout = aligned_positions
    elif kind is DesignKind.MISALIGNED:
        layout = misaligned_positions
    else:
        raise DesignError("use raw_design for user-supplied layouts")
    positions = tuple(layout(M1, M2, G, v) for v in range(G + 1))
    design = GeometryDesign(kind, M1, M2, G, positions, d)
    _validate(design)
    return design


def design_aligned(M: int, G: int, d: float = 0.5) -> GeometryDesign:
    """Two-subarray FA design for signals that stay aligned across movements.

    Subarray 1 steps by ``d`` per movement and subarray 2 by ``M1 (G+1) d``,
    so the union over movements fills a contiguous co-array.

    Args:
        M: Total number of antennas (at least 2).
        G: Number of movements inside one coherence block.
        d: Basic movement unit in wavelengths.
    """
    _check_counts(M, G)
    M1, M2 = optimal_split(M)
    return design_with_split(DesignKind.ALIGNED, M1, M2, G, d)


def design_misaligned(M: int, G: int, d: float = 0.5) -> GeometryDesign:
    """Hybrid design: fixed unit-spaced subarray 1, movable sparse subarray 2."""
    _check_counts(M, G)
    M1, M2 = optimal_split(M)
    return design_with_split(DesignKind.MISALIGNED, M1, M2, G, d)


def raw_design(positions, d: float = 0.5, stacked: bool = True) -> GeometryDesign:
    """Escape hatch wrapping arbitrary per-movement layouts.

    ``positions`` is either a flat list (single movement) or a list of
    per-movement lists. Raw designs are always processed like aligned ones
    (coherent stacking) unless ``stacked`` is False.
    """
    arr = [list(p) for p in positions] if np.ndim(positions) == 2 else [list(positions)]
    n = len(arr[0])
    kind = DesignKind.RAW if stacked else DesignKind.MISALIGNED
    design = GeometryDesign(kind, n, 0, len(arr) - 1,
                            tuple(tuple(int(x) for x in p) for p in arr), d)
    if len(design.positions) != design.G + 1 or any(len(set(p)) != n for p in arr):
        raise DesignError("invalid raw layout")
    return design


def virtual_positions(design: GeometryDesign) -> tuple[int, ...]:
    """Sorted union of element coordinates over all movements."""
    return tuple(sorted({x for pos in design.positions for x in pos}))


def difference_coarray(positions) -> LagSet:
    """All pairwise differences plus the consecutive run around lag 0."""
    pos = np.unique(np.asarray(positions, dtype=np.int64))
    if pos.size == 0:
        raise DesignError("empty position set")
    lags = np.unique((pos[:, None] - pos[None, :]).ravel())
    present = set(lags.tolist())
    hi = 0
    while hi + 1 in present:
        hi += 1
    return LagSet(tuple(lags.tolist()), -hi, hi)


def consecutive_dof(kind: DesignKind | str, M1: int, M2: int, G: int) -> int:
    """Closed-form consecutive DoF count for a given split."""
    kind = DesignKind(kind)
    d1 = G + 1
    if kind is DesignKind.ALIGNED:
        return 2 * (M1 * d1 - 1 + M1 * M2 * d1 ** 2) + 1
    if kind is DesignKind.MISALIGNED:
        return 2 * (M1 - 1 + M1 * M2 * d1) + 1
    raise DesignError("closed form only exists for the two FA designs")


def max_consecutive_dof(M: int, G: int, kind: DesignKind | str) -> int:
    """Maximum consecutive DoF under the optimal split, by parity of M."""
    _check_counts(M, G)
    kind = DesignKind(kind)
    d1 = G + 1
    if kind is DesignKind.ALIGNED:
        if M % 2 == 0:
            return M * d1 + M * M * d1 * d1 // 2 - 1
        return (M + 1) * d1 + (M * M - 1) * d1 * d1 // 2 - 1
    if kind is DesignKind.MISALIGNED:
        if M % 2 == 0:
            return M - 1 + M * M * d1 // 2
        return M + (M * M - 1) * d1 // 2
    raise DesignError("closed form only exists for the two FA designs")


def min_subarray_separation(design: GeometryDesign) -> int:
    """Smallest |x1 - x2| between the subarrays over all movements (units of d)."""
    best = None
    for v in range(design.n_movements):
        a = np.asarray(design.subarray(v, 1))
        for w in range(design.n_movements):
            b = np.asarray(design.subarray(w, 2))
            sep = int(np.min(np.abs(a[:, None] - b[None, :])))
            best = sep if best is None else min(best, sep)
    return best


def coarray_report(design: GeometryDesign) -> dict:
    virt = virtual_positions(design)
    lag_set = difference_coarray(virt)
    report = {
        "design": design.to_dict(),
        "virtual_positions": list(virt),
        "consecutive_range": list(lag_set.consecutive_range),
        "consecutive_dof": lag_set.consecutive_count,
        "max_lag": design.max_lag,
    }
    if design.kind is not DesignKind.RAW:
        report["closed_form_dof"] = consecutive_dof(design.kind, design.M1, design.M2, design.G)
    return report
