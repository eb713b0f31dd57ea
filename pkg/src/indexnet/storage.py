"""Storage back ends for ITensor data.

Each storage holds numbers in the internal index order of its owning tensor.
They are plain containers; the owning ITensor decides how to combine them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .qn import QN

__all__ = ["BlockSparse", "Combiner", "Dense", "Diag", "DiagUniform", "Storage", "result_dtype"]


def result_dtype(*items) -> np.dtype:
    """float64 unless any argument (array, dtype or scalar) is complex."""
    for x in items:
        if isinstance(x, np.ndarray):
            if np.iscomplexobj(x):
                return np.dtype(complex)
        elif isinstance(x, np.dtype):
            if x.kind == "c":
                return np.dtype(complex)
        elif isinstance(x, (complex, np.complexfloating)):
            return np.dtype(complex)
    return np.dtype(float)


class Storage:
    kind = "?"

    @property
    def dtype(self) -> np.dtype:
        raise NotImplementedError

    def copy(self) -> Storage:
        raise NotImplementedError

    def conj(self) -> Storage:
        raise NotImplementedError

    def scale(self, c) -> Storage:
        raise NotImplementedError


@dataclass
class Dense(Storage):
    """Full array whose shape is the tuple of index dimensions."""

    data: np.ndarray
    kind = "Dense"

    @property
    def dtype(self):
        return self.data.dtype

    def copy(self):
        return Dense(self.data.copy())

    def conj(self):
        return Dense(self.data.conj()) if np.iscomplexobj(self.data) else self.copy()

    def scale(self, c):
        return Dense(self.data * c)


@dataclass
class Diag(Storage):
    """Diagonal values; length is the smallest index dimension."""

    values: np.ndarray
    kind = "Diag"

    @property
    def dtype(self):
        return self.values.dtype

    def copy(self):
        return Diag(self.values.copy())

    def conj(self):
        return Diag(self.values.conj()) if np.iscomplexobj(self.values) else self.copy()

    def scale(self, c):
        return Diag(self.values * c)


@dataclass
class DiagUniform(Storage):
    """Diagonal tensor storing only the repeated diagonal value."""

    value: float | complex = 1.0
    kind = "DiagUniform"

    @property
    def dtype(self):
        return result_dtype(self.value)

    def copy(self):
        return DiagUniform(self.value)

    def conj(self):
        return DiagUniform(np.conj(self.value) if np.iscomplexobj(self.value) else self.value)

    def scale(self, c):
        return DiagUniform(self.value * c)


@dataclass
class Combiner(Storage):
    """Data-free marker; the first index of the owning tensor is the combined one."""

    kind = "Combiner"

    @property
    def dtype(self):
        return np.dtype(float)

    def copy(self):
        return Combiner()

    def conj(self):
        return Combiner()

    def scale(self, c):
        raise TypeError("cannot scale a combiner")


@dataclass
class BlockSparse(Storage):
    """Map from block coordinate (one subspace ordinal per index) to a dense block.

    ``flux`` is ``None`` while no block has been allocated.
    """

    blocks: dict = field(default_factory=dict)
    flux: QN | None = None
    kind = "BlockSparse"

    @property
    def dtype(self):
        return result_dtype(*self.blocks.values())

    def copy(self):
        return BlockSparse({k: v.copy() for k, v in self.blocks.items()}, self.flux)

    def conj(self):
        if self.dtype.kind != "c":
            return self.copy()
        return BlockSparse({k: v.conj() for k, v in self.blocks.items()}, self.flux)

    def scale(self, c):
        return BlockSparse({k: v * c for k, v in self.blocks.items()}, self.flux)
