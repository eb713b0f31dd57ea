"""Tensor indices with identity.

An :class:`Index` is a vector space (its dimension, optionally split into
quantum-number subspaces) together with an identity made of an immutable
random id, a set of tags and a prime level.  Two indices are equal, and
therefore contract, when id, tags and prime level all agree.  The arrow
direction of a quantum-number index is not part of equality.
"""

from __future__ import annotations

import enum
import random
import re
import threading
from typing import Iterable, Sequence

from .qn import QN

MAX_TAGS = 4
MAX_TAG_LENGTH = 8
_TAG_RE = re.compile(r"^[A-Za-z0-9=+\-/._]+$")

__all__ = [
    "Arrow",
    "Index",
    "IndexSpecError",
    "IndexVal",
    "TagSet",
    "dag",
    "noprime",
    "prime",
    "seed_ids",
    "setprime",
    "sim",
]


class IndexSpecError(ValueError):
    """Raised for invalid index construction or manipulation."""


# -- id generation -----------------------------------------------------------

_id_lock = threading.Lock()
_id_rng = random.Random()
_id_rng.seed()


def seed_ids(seed: int | None) -> None:
    """Reseed the id generator (``None`` reseeds from system entropy)."""
    with _id_lock:
        _id_rng.seed(seed)


def _new_id() -> int:
    with _id_lock:
        return _id_rng.getrandbits(64)


# -- tags --------------------------------------------------------------------


class TagSet(tuple):
    """Sorted, deduplicated tuple of at most four short tags."""

    __slots__ = ()

    def __new__(cls, tags: str | Iterable[str] = ""):
        if isinstance(tags, TagSet):
            return tags
        if isinstance(tags, str):
            items = [t.strip() for t in tags.split(",")]
        else:
            items = [str(t).strip() for t in tags]
        items = sorted({t for t in items if t})
        for t in items:
            if len(t) > MAX_TAG_LENGTH:
                raise IndexSpecError(f"tag {t!r} longer than {MAX_TAG_LENGTH} characters")
            if not _TAG_RE.match(t):
                raise IndexSpecError(f"tag {t!r} contains invalid characters")
        if len(items) > MAX_TAGS:
            raise IndexSpecError(f"at most {MAX_TAGS} tags allowed, got {items}")
        return super().__new__(cls, items)

    def add(self, other: str | Iterable[str]) -> TagSet:
        return TagSet(tuple(self) + tuple(TagSet(other)))

    def remove(self, other: str | Iterable[str]) -> TagSet:
        drop = set(TagSet(other))
        return TagSet(t for t in self if t not in drop)

    def replace(self, old: str | Iterable[str], new: str | Iterable[str]) -> TagSet:
        old = TagSet(old)
        if not set(old) <= set(self):
            return self
        return self.remove(old).add(new)

    def has(self, tags: str | Iterable[str]) -> bool:
        return set(TagSet(tags)) <= set(self)

    def __str__(self) -> str:
        return ",".join(self)


# -- arrows ------------------------------------------------------------------


class Arrow(enum.IntEnum):
    In = -1
    Neither = 0
    Out = 1

    def reverse(self) -> Arrow:
        return Arrow(-int(self))


# -- Index -------------------------------------------------------------------


class Index:
    """A tensor leg.

    Parameters
    ----------
    space : int or sequence of (QN, int)
        Either the dimension, or the ordered list of quantum-number subspaces.
        Subspace order is kept exactly as given; it fixes the block layout.
    tags : str
        Comma separated tags, e.g. ``"Site,S=1/2"``.
    dir : Arrow
        Direction for QN indices (default ``Out``).  Ignored for plain indices.
    plev : int
        Prime level.
    """

    __slots__ = ("_id", "_dim", "_tags", "_plev", "_space", "_dir", "_hash", "_offsets")

    def __init__(self, space, tags: str | Iterable[str] = "", *, dir: Arrow | None = None,
                 plev: int = 0, id: int | None = None):
        if isinstance(space, (int,)) or (hasattr(space, "__index__") and not isinstance(space, (list, tuple))):
            dim = int(space)
            if dim < 1:
                raise IndexSpecError(f"index dimension must be >= 1, got {dim}")
            qspace = None
            direction = Arrow.Neither
        else:
            qspace = tuple((q if isinstance(q, QN) else QN(q), int(d)) for q, d in space)
            if not qspace:
                raise IndexSpecError("QN index needs at least one subspace")
            if any(d < 1 for _, d in qspace):
                raise IndexSpecError("QN subspace dimensions must be >= 1")
            dim = sum(d for _, d in qspace)
            direction = Arrow.Out if dir is None else Arrow(dir)
            if direction == Arrow.Neither:
                raise IndexSpecError("QN index must have direction In or Out")
        if plev < 0:
            raise IndexSpecError(f"prime level must be >= 0, got {plev}")
        self._init(_new_id() if id is None else int(id), dim, TagSet(tags), int(plev),
                   qspace, direction)

    def _init(self, id_, dim, tags, plev, space, direction):
        self._id = id_
        self._dim = dim
        self._tags = tags
        self._plev = plev
        self._space = space
        self._dir = direction
        self._hash = hash((id_, tags, plev))
        self._offsets = None

    def _copy_with(self, *, tags=None, plev=None, dir=None, id=None) -> Index:
        new = Index.__new__(Index)
        new._init(
            self._id if id is None else id,
            self._dim,
            self._tags if tags is None else tags,
            self._plev if plev is None else plev,
            self._space,
            self._dir if dir is None else dir,
        )
        return new

    # -- properties --------------------------------------------------------

    @property
    def id(self) -> int:
        return self._id

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def tags(self) -> TagSet:
        return self._tags

    @property
    def plev(self) -> int:
        return self._plev

    @property
    def dir(self) -> Arrow:
        return self._dir

    @property
    def space(self) -> tuple[tuple[QN, int], ...] | None:
        """QN subspaces as ``((qn, dim), ...)``, or ``None`` for a plain index."""
        return self._space

    @property
    def has_qns(self) -> bool:
        return self._space is not None

    @property
    def nblocks(self) -> int:
        return 1 if self._space is None else len(self._space)

    def blockdim(self, b: int) -> int:
        return self._dim if self._space is None else self._space[b][1]

    def qn(self, b: int) -> QN:
        """QN of subspace ``b`` (0-based)."""
        return QN() if self._space is None else self._space[b][0]

    def flux_qn(self, b: int) -> QN:
        """Signed contribution of subspace ``b`` to a block flux."""
        q = self.qn(b)
        return q if self._dir != Arrow.In else -q

    @property
    def offsets(self) -> tuple[int, ...]:
        """Start offset of every subspace within the full dimension."""
        if self._offsets is None:
            offs, o = [], 0
            for b in range(self.nblocks):
                offs.append(o)
                o += self.blockdim(b)
            self._offsets = tuple(offs)
        return self._offsets

    def block_of(self, pos: int) -> tuple[int, int]:
        """Map a 0-based position to ``(subspace, offset within subspace)``."""
        if self._space is None:
            return 0, pos
        o = 0
        for b, (_, d) in enumerate(self._space):
            if pos < o + d:
                return b, pos - o
            o += d
        raise IndexSpecError(f"position {pos} out of range for dimension {self._dim}")

    # -- identity ------------------------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, Index):
            return NotImplemented
        return (self._id == other._id and self._plev == other._plev
                and self._tags == other._tags)

    def __hash__(self) -> int:
        return self._hash

    def same_space(self, other: Index) -> bool:
        """True when dimensions and subspace layouts coincide."""
        return self._dim == other._dim and self._space == other._space

    # -- modified copies -----------------------------------------------------

    def prime(self, inc: int = 1) -> Index:
        return self.setprime(self._plev + inc)

    def setprime(self, plev: int) -> Index:
        if plev < 0:
            raise IndexSpecError(f"prime level cannot become negative ({plev})")
        return self._copy_with(plev=plev)

    def noprime(self) -> Index:
        return self.setprime(0)

    def addtags(self, tags) -> Index:
        return self._copy_with(tags=self._tags.add(tags))

    def removetags(self, tags) -> Index:
        return self._copy_with(tags=self._tags.remove(tags))

    def replacetags(self, old, new) -> Index:
        return self._copy_with(tags=self._tags.replace(old, new))

    def settags(self, tags) -> Index:
        return self._copy_with(tags=TagSet(tags))

    def hastags(self, tags) -> bool:
        return self._tags.has(tags)

    def dag(self) -> Index:
        if self._dir == Arrow.Neither:
            return self
        return self._copy_with(dir=self._dir.reverse())

    def setdir(self, direction: Arrow) -> Index:
        if self._space is None:
            return self
        return self._copy_with(dir=Arrow(direction))

    def sim(self) -> Index:
        """Same space, tags and prime level but a fresh id."""
        return self._copy_with(id=_new_id())

    def __call__(self, val: int) -> IndexVal:
        return IndexVal(self, val)

    # -- display -------------------------------------------------------------

    def __repr__(self) -> str:
        parts = [f"dim={self._dim}", f"id={self._id % 1000}"]
        if self._tags:
            parts.append(f'"{self._tags}"')
        s = "(" + "|".join(parts) + ")" + "'" * self._plev
        if self._space is not None:
            s += " <" + self._dir.name + "> " + " ".join(f"{q}=>{d}" for q, d in self._space)
        return s


class IndexVal:
    """An index paired with a 1-based value, as used for element access."""

    __slots__ = ("index", "val")

    def __init__(self, index: Index, val: int):
        val = int(val)
        if not 1 <= val <= index.dim:
            raise IndexSpecError(f"value {val} out of range 1..{index.dim} for {index}")
        self.index = index
        self.val = val

    def __iter__(self):
        return iter((self.index, self.val))

    def __repr__(self) -> str:
        return f"{self.index}=>{self.val}"


# -- free functions ------------------------------------------------------------


def prime(i: Index, inc: int = 1) -> Index:
    return i.prime(inc)


def setprime(i: Index, plev: int) -> Index:
    return i.setprime(plev)


def noprime(i: Index) -> Index:
    return i.noprime()


def dag(i: Index) -> Index:
    return i.dag()


def sim(i: Index) -> Index:
    return i.sim()


def dims(inds: Sequence[Index]) -> tuple[int, ...]:
    return tuple(i.dim for i in inds)
