"""Phase-space densities on a square grid, block coarse-graining and the
discrete baker's map.

A field holds one nonnegative value per fine cell of an n x n grid over the
unit square; values[i, j] is the density on x-cell i, y-cell j and each cell
has measure 1/n^2. For n = 2^m the baker's map (x, y) -> (2x mod 1,
(y + floor(2x)) / 2) becomes a bit shift of cell indices: the top bit of i
moves to the top of j, and the dropped lowest bit of j fills the lowest bit
of i. That makes every step an exact permutation of cells.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import entr

logger = logging.getLogger(__name__)

MASS_TOLERANCE = 1e-10
EQUILIBRIUM_THRESHOLD = 0.01


class GridError(Exception):
    """Malformed field or incompatible partition."""
    pass


@dataclass(frozen=True, eq=False)
class DensityField:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] == 0:
            raise GridError(f"field must be a nonempty square grid, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise GridError("field values must be finite")
        if np.any(v < 0):
            raise GridError("field values must be nonnegative")
        mass = v.sum() / v.size
        if abs(mass - 1.0) > MASS_TOLERANCE:
            raise GridError(f"field mass is {mass}, expected 1")
        v.setflags(write=False)
        object.__setattr__(self, 'values', v)

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    @property
    def mass(self) -> float:
        return float(self.values.sum() / self.values.size)

    def occupied(self) -> int:
        return int(np.count_nonzero(self.values))

    @classmethod
    def uniform(cls, n: int) -> 'DensityField':
        return cls(np.ones((n, n)))

    @classmethod
    def indicator(cls, n: int, mask: np.ndarray) -> 'DensityField':
        """Normalized indicator of the cells where `mask` is true."""
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (n, n):
            raise GridError(f"mask shape {mask.shape} does not match {n}x{n}")
        count = int(mask.sum())
        if count == 0:
            raise GridError("indicator of an empty set")
        return cls(mask * (n * n / count))

    @classmethod
    def left_half(cls, n: int) -> 'DensityField':
        mask = np.zeros((n, n), dtype=bool)
        mask[: n // 2, :] = True
        return cls.indicator(n, mask)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> 'DensityField':
        v = rng.random((n, n))
        return cls(v * (v.size / v.sum()))


@dataclass(frozen=True)
class CellPartition:
    """k x k coarse blocks tiling an n x n grid."""
    resolution: int
    blocks: int

    def __post_init__(self):
        if self.resolution < 1 or self.blocks < 1:
            raise GridError(f"bad partition {self.blocks}x{self.blocks} of {self.resolution}")
        if self.resolution % self.blocks:
            raise GridError(f"{self.blocks} blocks do not tile a grid of {self.resolution}")

    @property
    def block_size(self) -> int:
        return self.resolution // self.blocks

    @property
    def cell_volume(self) -> float:
        return 1.0 / self.blocks ** 2


def coarse_grain_classical(field: DensityField, partition: CellPartition) -> DensityField:
    """Replace each coarse cell by its average; all-zero cells stay zero."""
    n = field.resolution
    if partition.resolution != n:
        raise GridError(f"partition for {partition.resolution}, field of {n}")
    k, s = partition.blocks, partition.block_size
    blocks = field.values.reshape(k, s, k, s)
    top = blocks.max(axis=(1, 3))
    # constant blocks keep their value bit for bit
    means = np.where(top == blocks.min(axis=(1, 3)), top, blocks.mean(axis=(1, 3)))
    return DensityField(np.repeat(np.repeat(means, s, axis=0), s, axis=1))


def _bits(n: int) -> int:
    if n < 2 or n & (n - 1):
        raise GridError(f"baker's map needs a power-of-two resolution, got {n}")
    return n.bit_length() - 1


def mixing_step(field: DensityField) -> DensityField:
    """Push the density forward by one baker's map step."""
    n = field.resolution
    m = _bits(n)
    i, j = np.indices((n, n))
    top = i >> (m - 1)
    new_i = ((i << 1) & (n - 1)) | (j & 1)
    new_j = (j >> 1) | (top << (m - 1))
    out = np.empty_like(field.values)
    out[new_i, new_j] = field.values
    return DensityField(out)


def evolve_field(field: DensityField, steps: int) -> List[DensityField]:
    """The field after 0, 1, ..., steps applications of the baker's map."""
    if steps < 0:
        raise GridError(f"negative step count {steps}")
    fields = [field]
    for _ in range(steps):
        fields.append(mixing_step(fields[-1]))
    return fields


@dataclass(frozen=True)
class LiouvilleReport:
    occupied_counts: Tuple[int, ...]
    masses: Tuple[float, ...]

    @property
    def constant(self) -> bool:
        return len(set(self.occupied_counts)) <= 1

    @property
    def max_mass_error(self) -> float:
        return max((abs(m - 1.0) for m in self.masses), default=0.0)


def liouville_check(fields: Sequence[DensityField]) -> LiouvilleReport:
    """Occupied fine-cell count and mass at each step."""
    return LiouvilleReport(tuple(f.occupied() for f in fields),
                           tuple(f.mass for f in fields))


def l1_distance_to_uniform(field: DensityField) -> float:
    return float(np.abs(field.values - 1.0).sum() / field.values.size)


def gibbs_entropy(field: DensityField) -> float:
    """-∫ rho log rho over the unit square; zero for the uniform field."""
    return float(entr(field.values).sum() / field.values.size)


@dataclass(frozen=True)
class EquilibriumApproach:
    coarse_distances: Tuple[float, ...]
    fine_distances: Tuple[float, ...]
    coarse_entropies: Tuple[float, ...]
    fine_entropies: Tuple[float, ...]
    liouville: LiouvilleReport
    threshold: float = EQUILIBRIUM_THRESHOLD

    @property
    def steps(self) -> int:
        return len(self.coarse_distances) - 1

    @property
    def first_equilibrated_step(self) -> Optional[int]:
        for step, d in enumerate(self.coarse_distances):
            if d < self.threshold:
                return step
        return None


def equilibrium_approach(initial: DensityField, partition: CellPartition,
                         steps: int) -> EquilibriumApproach:
    """Coarse and fine distance-to-uniform series over `steps` baker steps."""
    if partition.blocks >= initial.resolution:
        raise GridError("coarse partition must be strictly coarser than the grid")
    fields = evolve_field(initial, steps)
    coarse = [coarse_grain_classical(f, partition) for f in fields]
    logger.info("classical: %d steps on %dx%d, %dx%d blocks", steps,
                initial.resolution, initial.resolution, partition.blocks, partition.blocks)
    return EquilibriumApproach(
        coarse_distances=tuple(l1_distance_to_uniform(c) for c in coarse),
        fine_distances=tuple(l1_distance_to_uniform(f) for f in fields),
        coarse_entropies=tuple(gibbs_entropy(c) for c in coarse),
        fine_entropies=tuple(gibbs_entropy(f) for f in fields),
        liouville=liouville_check(fields),
    )
