"""ITensor: a tensor addressed by its indices rather than by dimension order.

The internal order of ``ITensor.inds`` fixes the memory layout of the storage
but is never semantic.  Contraction (``A * B``) sums over every pair of equal
indices, addition aligns the two layouts automatically, and element access
takes ``index(value)`` pairs in any order::

    i, j = Index(2, "i"), Index(3, "j")
    A = ITensor(i, j)
    A[j(3), i(1)] = 0.5
    B = random_itensor(j, i)
    C = A + B
"""

from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np

from . import engine
from .index import Arrow, Index, IndexVal, TagSet
from .qn import QN
from .storage import BlockSparse, Combiner, Dense, Diag, DiagUniform, Storage, result_dtype

__all__ = [
    "ITensor",
    "TensorError",
    "combinedind",
    "combiner",
    "commonind",
    "commoninds",
    "dag",
    "delta",
    "diag_itensor",
    "flux",
    "hasind",
    "hasinds",
    "inds",
    "random_itensor",
    "scalar",
    "to_blocksparse",
    "uniqueinds",
]


class TensorError(ValueError):
    """Raised for invalid tensor operations."""


_rng = np.random.default_rng()


def set_rng(rng: np.random.Generator | int | None) -> None:
    """Replace the default generator used by random constructors."""
    global _rng
    _rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def _is_number(x) -> bool:
    return isinstance(x, (int, float, complex, np.number))


def _all_qn(inds: Sequence[Index]) -> bool:
    return len(inds) > 0 and all(i.has_qns for i in inds)


def block_flux(inds: Sequence[Index], coord: Sequence[int]) -> QN:
    q = QN()
    for i, b in zip(inds, coord):
        q = q + i.flux_qn(b)
    return q


def _diag_len(inds: Sequence[Index]) -> int:
    return min(i.dim for i in inds) if inds else 1


def _diag_to_array(values: np.ndarray, inds: Sequence[Index]) -> np.ndarray:
    arr = np.zeros(tuple(i.dim for i in inds), dtype=values.dtype)
    m = len(values)
    if inds:
        ar = np.arange(m)
        arr[(ar,) * len(inds)] = values
    else:
        arr = np.asarray(values.sum(), dtype=values.dtype)
    return arr


def _blocks_to_array(blocks: dict, inds: Sequence[Index], dtype) -> np.ndarray:
    arr = np.zeros(tuple(i.dim for i in inds), dtype=dtype)
    for coord, blk in blocks.items():
        sl = tuple(slice(i.offsets[b], i.offsets[b] + i.blockdim(b)) for i, b in zip(inds, coord))
        arr[sl] = blk
    return arr


class ITensor:
    """Tensor over an unordered set of indices.

    ``ITensor(i, j, ...)`` makes a zero tensor: dense for plain indices, an
    empty block-sparse tensor (flux not yet fixed) when every index carries
    quantum numbers.
    """

    __slots__ = ("_inds", "_store")

    def __init__(self, *inds: Index, storage: Storage | None = None):
        if len(inds) == 1 and isinstance(inds[0], (list, tuple)):
            inds = tuple(inds[0])
        inds = tuple(inds)
        if len(set(inds)) != len(inds):
            raise TensorError(f"duplicate index in {inds}")
        if storage is None:
            if _all_qn(inds):
                storage = BlockSparse()
            else:
                storage = Dense(np.zeros(tuple(i.dim for i in inds)))
        self._inds = inds
        self._store = storage

    @classmethod
    def _make(cls, inds, storage) -> ITensor:
        t = cls.__new__(cls)
        t._inds = tuple(inds)
        t._store = storage
        return t

    @classmethod
    def from_array(cls, array, *inds: Index) -> ITensor:
        """Dense tensor whose element ``array[a, b, ...]`` sits at ``inds[0](a+1), inds[1](b+1), ...``."""
        if len(inds) == 1 and isinstance(inds[0], (list, tuple)):
            inds = tuple(inds[0])
        arr = np.array(array, dtype=result_dtype(np.asarray(array)))
        if arr.shape != tuple(i.dim for i in inds):
            raise TensorError(f"array shape {arr.shape} does not match index dims")
        return cls(*inds, storage=Dense(arr))

    # -- basic properties ------------------------------------------------------

    @property
    def inds(self) -> tuple[Index, ...]:
        return self._inds

    @property
    def storage(self) -> Storage:
        return self._store

    @property
    def order(self) -> int:
        return len(self._inds)

    ndim = order

    @property
    def dtype(self) -> np.dtype:
        return self._store.dtype

    @property
    def is_complex(self) -> bool:
        return self.dtype.kind == "c"

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(i.dim for i in self._inds)

    @property
    def kind(self) -> str:
        return self._store.kind

    def nnz(self) -> int:
        """Number of stored numbers."""
        st = self._store
        if isinstance(st, Dense):
            return st.data.size
        if isinstance(st, Diag):
            return st.values.size
        if isinstance(st, DiagUniform):
            return 1
        if isinstance(st, BlockSparse):
            return sum(b.size for b in st.blocks.values())
        return 0

    def nnzblocks(self) -> int:
        st = self._store
        return len(st.blocks) if isinstance(st, BlockSparse) else 1

    def copy(self) -> ITensor:
        return ITensor._make(self._inds, self._store.copy())

    def __repr__(self) -> str:
        lines = [f"ITensor ord={self.order} {self.kind}"]
        lines += [f"  {i!r}" for i in self._inds]
        return "\n".join(lines)

    # -- element access ----------------------------------------------------------

    def _positions(self, ivals) -> tuple[int, ...]:
        if isinstance(ivals, IndexVal):
            ivals = (ivals,)
        ivals = tuple(ivals)
        if len(ivals) != len(self._inds):
            raise TensorError(f"need exactly {len(self._inds)} index values, got {len(ivals)}")
        lookup = {i: k for k, i in enumerate(self._inds)}
        pos = [None] * len(self._inds)
        for iv in ivals:
            if not isinstance(iv, IndexVal):
                iv = IndexVal(*iv)
            k = lookup.get(iv.index)
            if k is None or pos[k] is not None:
                raise TensorError(f"index value {iv} does not address this tensor")
            pos[k] = iv.val - 1
        return tuple(pos)

    def __getitem__(self, ivals):
        pos = self._positions(ivals)
        st = self._store
        if isinstance(st, Dense):
            v = st.data[pos]
        elif isinstance(st, (Diag, DiagUniform)):
            if len(set(pos)) > 1:
                return 0.0
            t = pos[0] if pos else 0
            if isinstance(st, DiagUniform):
                return st.value
            v = st.values[t] if t < len(st.values) else 0.0
        elif isinstance(st, BlockSparse):
            coord, off = zip(*(i.block_of(p) for i, p in zip(self._inds, pos))) if pos else ((), ())
            blk = st.blocks.get(tuple(coord))
            if blk is None:
                return 0.0
            v = blk[tuple(off)]
        else:
            raise TensorError("combiner tensors have no elements")
        return v.item() if hasattr(v, "item") else v

    def __setitem__(self, ivals, value) -> None:
        pos = self._positions(ivals)
        st = self._store
        cplx = result_dtype(value).kind == "c"
        if isinstance(st, Dense):
            if cplx and not np.iscomplexobj(st.data):
                st.data = st.data.astype(complex)
            st.data[pos] = value
        elif isinstance(st, (Diag, DiagUniform)):
            if len(set(pos)) > 1:
                raise TensorError("cannot set an off-diagonal element of a diagonal tensor")
            if isinstance(st, DiagUniform):
                st = Diag(np.full(_diag_len(self._inds), st.value, dtype=result_dtype(st.value)))
                self._store = st
            if cplx and not np.iscomplexobj(st.values):
                st.values = st.values.astype(complex)
            st.values[pos[0] if pos else 0] = value
        elif isinstance(st, BlockSparse):
            coord, off = zip(*(i.block_of(p) for i, p in zip(self._inds, pos)))
            coord = tuple(coord)
            q = block_flux(self._inds, coord)
            if st.flux is None:
                st.flux = q
            elif st.flux != q:
                raise TensorError(
                    f"element has flux {q}, inconsistent with tensor flux {st.flux}"
                )
            blk = st.blocks.get(coord)
            if blk is None:
                blk = np.zeros(tuple(i.blockdim(b) for i, b in zip(self._inds, coord)),
                               dtype=complex if cplx else float)
                st.blocks[coord] = blk
            elif cplx and not np.iscomplexobj(blk):
                blk = blk.astype(complex)
                st.blocks[coord] = blk
            blk[tuple(off)] = value
        else:
            raise TensorError("combiner tensors have no elements")

    get = __getitem__

    def set(self, ivals, value) -> None:
        self[ivals] = value

    # -- conversion ---------------------------------------------------------------

    def array(self, *order: Index) -> np.ndarray:
        """Dense numpy copy of the data with dimensions in the given index order.

        With no arguments the internal order is used.
        """
        if len(order) == 1 and isinstance(order[0], (list, tuple)):
            order = tuple(order[0])
        arr = self._dense_data()
        if not order:
            return arr.copy()
        if len(order) != len(self._inds) or set(order) != set(self._inds):
            raise TensorError("array order must list every index exactly once")
        lookup = {i: k for k, i in enumerate(self._inds)}
        perm = [lookup[i] for i in order]
        return np.array(engine.permutedims(arr, perm), copy=True)

    def _dense_data(self) -> np.ndarray:
        st = self._store
        if isinstance(st, Dense):
            return st.data
        if isinstance(st, Diag):
            return _diag_to_array(st.values, self._inds)
        if isinstance(st, DiagUniform):
            vals = np.full(_diag_len(self._inds), st.value, dtype=result_dtype(st.value))
            return _diag_to_array(vals, self._inds)
        if isinstance(st, BlockSparse):
            return _blocks_to_array(st.blocks, self._inds, st.dtype)
        raise TensorError("combiner tensors cannot be densified")

    def to_dense(self) -> ITensor:
        """Same tensor with Dense storage (quantum-number information on indices kept)."""
        return ITensor._make(self._inds, Dense(np.array(self._dense_data(), copy=True)))

    def permute(self, *order: Index) -> ITensor:
        """Dense copy whose internal layout follows ``order``."""
        if len(order) == 1 and isinstance(order[0], (list, tuple)):
            order = tuple(order[0])
        if isinstance(self._store, BlockSparse):
            lookup = {i: k for k, i in enumerate(self._inds)}
            perm = [lookup[i] for i in order]
            return _permute_blocksparse(self, perm)
        return ITensor._make(order, Dense(self.array(*order)))

    def scalar(self):
        if self._inds:
            raise TensorError(f"scalar() needs an order-0 tensor, got order {self.order}")
        v = self._dense_data()
        v = v.item() if hasattr(v, "item") else v
        return v

    # -- algebra ------------------------------------------------------------------

    def __mul__(self, other):
        if isinstance(other, ITensor):
            return contract(self, other)
        if _is_number(other):
            return ITensor._make(self._inds, self._store.scale(other))
        return NotImplemented

    def __rmul__(self, other):
        if _is_number(other):
            return ITensor._make(self._inds, self._store.scale(other))
        return NotImplemented

    def __truediv__(self, other):
        if _is_number(other):
            return ITensor._make(self._inds, self._store.scale(1.0 / other))
        return NotImplemented

    def __neg__(self):
        return ITensor._make(self._inds, self._store.scale(-1))

    def __add__(self, other):
        if not isinstance(other, ITensor):
            return NotImplemented
        return add(self, other)

    def __sub__(self, other):
        if not isinstance(other, ITensor):
            return NotImplemented
        return add(self, -other)

    def norm(self) -> float:
        st = self._store
        if isinstance(st, Dense):
            return float(np.linalg.norm(st.data.ravel()))
        if isinstance(st, Diag):
            return float(np.linalg.norm(st.values))
        if isinstance(st, DiagUniform):
            return float(abs(st.value) * np.sqrt(_diag_len(self._inds)))
        if isinstance(st, BlockSparse):
            return float(np.sqrt(sum(np.vdot(b, b).real for b in st.blocks.values())))
        raise TensorError("combiner has no norm")

    def conj(self) -> ITensor:
        """Complex conjugate of the data; arrows untouched."""
        return ITensor._make(self._inds, self._store.conj())

    def dag(self) -> ITensor:
        """Complex conjugate with every index arrow reversed."""
        st = self._store.conj()
        if isinstance(st, BlockSparse) and st.flux is not None:
            st.flux = -st.flux
        return ITensor._make(tuple(i.dag() for i in self._inds), st)

    @property
    def real(self) -> ITensor:
        st = self._store
        if isinstance(st, Dense):
            return ITensor._make(self._inds, Dense(st.data.real.copy()))
        if isinstance(st, BlockSparse):
            return ITensor._make(self._inds, BlockSparse({k: v.real.copy() for k, v in st.blocks.items()}, st.flux))
        if isinstance(st, Diag):
            return ITensor._make(self._inds, Diag(st.values.real.copy()))
        if isinstance(st, DiagUniform):
            return ITensor._make(self._inds, DiagUniform(float(np.real(st.value))))
        return self.copy()

    # -- index manipulation ---------------------------------------------------------

    def _select(self, inds, tags, plev=None) -> list[bool]:
        sel_inds = set(inds) if inds else None
        sel_tags = TagSet(tags) if tags is not None else None
        out = []
        for i in self._inds:
            ok = True
            if sel_inds is not None and i not in sel_inds:
                ok = False
            if sel_tags is not None and not i.tags.has(sel_tags):
                ok = False
            if plev is not None and i.plev != plev:
                ok = False
            out.append(ok)
        return out

    def _map_inds(self, fn, inds=(), tags=None, plev=None) -> ITensor:
        if len(inds) == 1 and isinstance(inds[0], (list, tuple)):
            inds = tuple(inds[0])
        sel = self._select(inds, tags, plev)
        new = tuple(fn(i) if s else i for i, s in zip(self._inds, sel))
        if len(set(new)) != len(new):
            raise TensorError("index operation would create duplicate indices")
        return ITensor._make(new, self._store)

    def prime(self, *inds: Index, n: int = 1, tags=None, plev=None) -> ITensor:
        """Raise prime levels (all indices, or those given / matching ``tags``)."""
        return self._map_inds(lambda i: i.prime(n), inds, tags, plev)

    def noprime(self, *inds: Index, tags=None) -> ITensor:
        return self._map_inds(lambda i: i.noprime(), inds, tags)

    def setprime(self, plev: int, *inds: Index, tags=None) -> ITensor:
        return self._map_inds(lambda i: i.setprime(plev), inds, tags)

    def mapprime(self, old: int, new: int, *inds: Index, tags=None) -> ITensor:
        return self._map_inds(lambda i: i.setprime(new), inds, tags, plev=old)

    def addtags(self, new_tags, *inds: Index, tags=None) -> ITensor:
        return self._map_inds(lambda i: i.addtags(new_tags), inds, tags)

    def removetags(self, old_tags, *inds: Index, tags=None) -> ITensor:
        return self._map_inds(lambda i: i.removetags(old_tags), inds, tags)

    def replacetags(self, old_tags, new_tags, *inds: Index) -> ITensor:
        return self._map_inds(lambda i: i.replacetags(old_tags, new_tags), inds, None)

    def settags(self, new_tags, *inds: Index, tags=None) -> ITensor:
        return self._map_inds(lambda i: i.settags(new_tags), inds, tags)

    def replaceinds(self, old: Sequence[Index], new: Sequence[Index]) -> ITensor:
        """Swap each index in ``old`` for the matching one in ``new`` (same dimension).

        A quantum-number replacement keeps the arrow of the index it replaces;
        data is not touched.
        """
        mapping = dict(zip(old, new))
        out = []
        for i in self._inds:
            j = mapping.get(i)
            if j is None:
                out.append(i)
                continue
            if j.dim != i.dim:
                raise TensorError(f"cannot replace {i} by {j}: dimensions differ")
            if isinstance(self._store, BlockSparse) and j.space != i.space:
                raise TensorError(f"cannot replace {i} by {j}: subspaces differ")
            out.append(j.setdir(i.dir) if i.has_qns and j.has_qns else j)
        if len(set(out)) != len(out):
            raise TensorError("replacement creates duplicate indices")
        return ITensor._make(out, self._store)

    def replaceind(self, old: Index, new: Index) -> ITensor:
        return self.replaceinds([old], [new])

    # -- queries --------------------------------------------------------------------

    def hasind(self, i: Index) -> bool:
        return i in self._inds

    def hasinds(self, *inds: Index) -> bool:
        if len(inds) == 1 and isinstance(inds[0], (list, tuple)):
            inds = tuple(inds[0])
        s = set(self._inds)
        return all(i in s for i in inds)

    def index(self, *, tags=None, plev=None) -> Index | None:
        """First index matching ``tags`` (and ``plev`` if given)."""
        for i, ok in zip(self._inds, self._select((), tags, plev)):
            if ok:
                return i
        return None

    def flux(self) -> QN | None:
        st = self._store
        if isinstance(st, BlockSparse):
            return st.flux
        if isinstance(st, (Diag, DiagUniform)) and _all_qn(self._inds):
            return to_blocksparse(self).storage.flux
        raise TensorError("flux is only defined for quantum-number (block-sparse) tensors")


# -- constructors ----------------------------------------------------------------------


def random_itensor(*inds: Index, dtype=float, flux: QN | None = None,
                   rng: np.random.Generator | None = None) -> ITensor:
    """Tensor with i.i.d. standard-normal elements.

    For quantum-number indices only the blocks with the requested ``flux``
    (default ``QN()``) are filled.
    """
    if len(inds) == 1 and isinstance(inds[0], (list, tuple)):
        inds = tuple(inds[0])
    rng = _rng if rng is None else rng
    cplx = np.dtype(dtype).kind == "c"

    def draw(shape):
        x = rng.standard_normal(shape)
        if cplx:
            x = x + 1j * rng.standard_normal(shape)
        return x

    if not _all_qn(inds):
        return ITensor(*inds, storage=Dense(np.asarray(draw(tuple(i.dim for i in inds)))))
    target = QN() if flux is None else flux
    blocks = {}
    for coord in itertools.product(*(range(i.nblocks) for i in inds)):
        if block_flux(inds, coord) == target:
            blocks[coord] = draw(tuple(i.blockdim(b) for i, b in zip(inds, coord)))
    if not blocks:
        raise TensorError(f"no block of these indices has flux {target}")
    return ITensor(*inds, storage=BlockSparse(blocks, target))


def delta(*inds: Index, value=1.0) -> ITensor:
    """Uniform diagonal tensor (ones on the diagonal by default)."""
    if len(inds) == 1 and isinstance(inds[0], (list, tuple)):
        inds = tuple(inds[0])
    if len(inds) < 1:
        raise TensorError("delta needs at least one index")
    return ITensor(*inds, storage=DiagUniform(value))


def diag_itensor(values, *inds: Index) -> ITensor:
    """Diagonal tensor with the given diagonal (length = smallest dimension)."""
    if len(inds) == 1 and isinstance(inds[0], (list, tuple)):
        inds = tuple(inds[0])
    vals = np.asarray(values)
    vals = vals.astype(result_dtype(vals))
    if vals.ndim != 1 or len(vals) != _diag_len(inds):
        raise TensorError("diagonal length must equal the smallest index dimension")
    return ITensor(*inds, storage=Diag(vals.copy()))


def combiner(*inds: Index, tags: str = "CMB,Link") -> ITensor:
    """Tensor that fuses ``inds`` into one new index on contraction.

    Contracting the result with a tensor holding the combined index splits it
    back.  The combined index is available via :func:`combinedind`.
    """
    if len(inds) == 1 and isinstance(inds[0], (list, tuple)):
        inds = tuple(inds[0])
    if not inds:
        raise TensorError("combiner needs at least one index")
    if any(i.has_qns for i in inds):
        raise TensorError("combiners over quantum-number indices are not supported")
    c = Index(int(np.prod([i.dim for i in inds])), tags)
    return ITensor(c, *inds, storage=Combiner())


def combinedind(C: ITensor) -> Index:
    if not isinstance(C.storage, Combiner):
        raise TensorError("not a combiner tensor")
    return C.inds[0]


def to_blocksparse(T: ITensor, tol: float = 0.0) -> ITensor:
    """Block-sparse copy of a tensor over quantum-number indices.

    Blocks whose entries are all within ``tol`` of zero are dropped; every
    remaining block must share one flux.
    """
    if isinstance(T.storage, BlockSparse):
        return T.copy()
    if not _all_qn(T.inds):
        raise TensorError("block-sparse storage needs quantum-number indices")
    arr = T._dense_data()
    blocks, fl = {}, None
    for coord in itertools.product(*(range(i.nblocks) for i in T.inds)):
        sl = tuple(slice(i.offsets[b], i.offsets[b] + i.blockdim(b)) for i, b in zip(T.inds, coord))
        blk = arr[sl]
        if not np.any(np.abs(blk) > tol):
            continue
        q = block_flux(T.inds, coord)
        if fl is None:
            fl = q
        elif q != fl:
            raise TensorError(f"tensor has no well-defined flux ({fl} and {q} both present)")
        blocks[coord] = np.array(blk, copy=True)
    return ITensor._make(T.inds, BlockSparse(blocks, fl))


# -- free-function queries ------------------------------------------------------------------


def inds(T: ITensor) -> tuple[Index, ...]:
    return T.inds


def hasind(T: ITensor, i: Index) -> bool:
    return T.hasind(i)


def hasinds(T: ITensor, *inds: Index) -> bool:
    return T.hasinds(*inds)


def commoninds(A: ITensor, B: ITensor) -> list[Index]:
    s = set(B.inds)
    return [i for i in A.inds if i in s]


def commonind(A: ITensor, B: ITensor) -> Index | None:
    """First index of ``A`` that ``B`` also has."""
    c = commoninds(A, B)
    return c[0] if c else None


def uniqueinds(A: ITensor, B: ITensor) -> list[Index]:
    s = set(B.inds)
    return [i for i in A.inds if i not in s]


def scalar(T: ITensor):
    return T.scalar()


def flux(T: ITensor) -> QN | None:
    return T.flux()


def dag(T: ITensor) -> ITensor:
    return T.dag()


# -- addition ------------------------------------------------------------------------------------


def _perm_to(A: ITensor, B: ITensor) -> list[int]:
    """Positions in ``B`` of ``A``'s indices (in A's order)."""
    if len(A.inds) != len(B.inds) or set(A.inds) != set(B.inds):
        raise TensorError("addition needs identical index sets")
    lookup = {i: k for k, i in enumerate(B.inds)}
    return [lookup[i] for i in A.inds]


def _permute_blocksparse(T: ITensor, perm: Sequence[int]) -> ITensor:
    st = T.storage
    blocks = {tuple(c[p] for p in perm): engine.permutedims(b, perm) for c, b in st.blocks.items()}
    return ITensor._make(tuple(T.inds[p] for p in perm), BlockSparse(blocks, st.flux))


def add(A: ITensor, B: ITensor) -> ITensor:
    """Element-wise sum of two tensors over the same indices, in any order."""
    perm = _perm_to(A, B)
    sa, sb = A.storage, B.storage
    if isinstance(sa, Combiner) or isinstance(sb, Combiner):
        raise TensorError("cannot add combiners")
    if isinstance(sa, BlockSparse) != isinstance(sb, BlockSparse):
        raise TensorError("cannot add block-sparse and non-block-sparse tensors; densify explicitly")
    if isinstance(sa, BlockSparse):
        if sa.flux is not None and sb.flux is not None and sa.flux != sb.flux:
            raise TensorError(f"flux mismatch in addition: {sa.flux} vs {sb.flux}")
        blocks = {k: v.copy() for k, v in sa.blocks.items()}
        for c, b in sb.blocks.items():
            ca = tuple(c[p] for p in perm)
            bp = engine.permutedims(b, perm)
            if ca in blocks:
                blocks[ca] = blocks[ca] + bp
            else:
                blocks[ca] = np.array(bp, copy=True)
        fl = sa.flux if sa.flux is not None else sb.flux
        return ITensor._make(A.inds, BlockSparse(blocks, fl))
    diag_like = (Diag, DiagUniform)
    if isinstance(sa, diag_like) and isinstance(sb, diag_like):
        m = _diag_len(A.inds)
        va = sa.values if isinstance(sa, Diag) else np.full(m, sa.value)
        vb = sb.values if isinstance(sb, Diag) else np.full(m, sb.value)
        return ITensor._make(A.inds, Diag(va + vb))
    data = A._dense_data() + engine.permutedims(B._dense_data(), perm)
    return ITensor._make(A.inds, Dense(data))


# -- contraction ----------------------------------------------------------------------------------


def _match(A: ITensor, B: ITensor) -> list[tuple[int, int]]:
    lookup = {i: k for k, i in enumerate(B.inds)}
    pairs = []
    for ka, i in enumerate(A.inds):
        kb = lookup.get(i)
        if kb is None:
            continue
        j = B.inds[kb]
        if i.dir != Arrow.Neither and j.dir != Arrow.Neither and i.dir == j.dir:
            raise TensorError(f"cannot contract {i}: QN indices need opposite arrows")
        pairs.append((ka, kb))
    return pairs


def _labels(A: ITensor, B: ITensor, pairs):
    la = list(range(1, A.order + 1))
    lb = list(range(A.order + 1, A.order + B.order + 1))
    for n, (ka, kb) in enumerate(pairs):
        la[ka] = -(n + 1)
        lb[kb] = -(n + 1)
    return la, lb


def _free_inds(A, B, pairs):
    ma = {ka for ka, _ in pairs}
    mb = {kb for _, kb in pairs}
    return ([i for k, i in enumerate(A.inds) if k not in ma],
            [i for k, i in enumerate(B.inds) if k not in mb])


def contract(A: ITensor, B: ITensor) -> ITensor:
    """Sum over all indices shared by ``A`` and ``B`` (outer product if none)."""
    pairs = _match(A, B)
    sa, sb = A.storage, B.storage

    if isinstance(sa, Combiner) or isinstance(sb, Combiner):
        if isinstance(sa, Combiner) and isinstance(sb, Combiner):
            raise TensorError("contracting two combiners is not supported")
        if isinstance(sa, Combiner):
            return _contract_combiner(A, B)
        return _contract_combiner(B, A)

    if A.order == 0 or B.order == 0:
        if A.order == 0:
            return B * A.scalar()
        return A * B.scalar()

    diag_like = (Diag, DiagUniform)
    for X, Y, flip in ((A, B, False), (B, A, True)):
        if (isinstance(X.storage, DiagUniform) and X.order == 2
                and not isinstance(Y.storage, diag_like)):
            rel = _try_relabel(X, Y, pairs, flip)
            if rel is not None:
                return rel

    if isinstance(sa, diag_like) and isinstance(sb, diag_like):
        if pairs:
            return _contract_diag_diag(A, B, pairs)
        return _contract_dense(A.to_dense(), B.to_dense(), pairs)

    if isinstance(sa, diag_like) or isinstance(sb, diag_like):
        D, T, flip = (A, B, False) if isinstance(sa, diag_like) else (B, A, True)
        if isinstance(T.storage, BlockSparse):
            try:
                Db = to_blocksparse(D)
            except TensorError:
                Db = None
            if Db is not None and Db.storage.blocks:
                return contract(Db, T) if not flip else contract(T, Db)
            T = T.to_dense()
        dpairs = [(kb, ka) for ka, kb in pairs] if flip else pairs
        return _contract_diag_dense(D, T, dpairs)

    if isinstance(sa, BlockSparse) and isinstance(sb, BlockSparse):
        return _contract_blocksparse(A, B, pairs)
    return _contract_dense(A, B, pairs)


def _contract_dense(A, B, pairs) -> ITensor:
    la, lb = _labels(A, B, pairs)
    fa, fb = _free_inds(A, B, pairs)
    data, _ = engine.dense_contract(A._dense_data(), la, B._dense_data(), lb)
    return ITensor._make(fa + fb, Dense(data))


def _contract_blocksparse(A, B, pairs) -> ITensor:
    la, lb = _labels(A, B, pairs)
    fa, fb = _free_inds(A, B, pairs)
    sa, sb = A.storage, B.storage
    blocks, _ = engine.blocksparse_contract(sa.blocks, la, sb.blocks, lb)
    out_inds = fa + fb
    if sa.flux is None or sb.flux is None:
        fl = None
    else:
        fl = sa.flux + sb.flux
    if not out_inds:
        val = blocks.get((), np.zeros((), dtype=result_dtype(sa.dtype, sb.dtype)))
        return ITensor._make((), Dense(np.asarray(val)))
    return ITensor._make(out_inds, BlockSparse(blocks, fl if blocks or fl is not None else None))


def _try_relabel(D: ITensor, T: ITensor, pairs, flip) -> ITensor | None:
    """delta(k, i) * T(k, ...) -> T(i, ...) without moving data."""
    if len(pairs) != 1:
        return None
    kd = pairs[0][1] if flip else pairs[0][0]
    kt = pairs[0][0] if flip else pairs[0][1]
    other = D.inds[1 - kd]
    old = T.inds[kt]
    if other.dim != old.dim or other in T.inds:
        return None
    if isinstance(T.storage, BlockSparse):
        if other.space != old.space or other.dir != old.dir:
            return None
    value = D.storage.value
    new_inds = list(T.inds)
    new_inds[kt] = other
    st = T.storage if value == 1 else T.storage.scale(value)
    return ITensor._make(new_inds, st.copy() if st is T.storage else st)


def _diag_values(D: ITensor) -> np.ndarray:
    st = D.storage
    if isinstance(st, Diag):
        return st.values
    return np.full(_diag_len(D.inds), st.value, dtype=result_dtype(st.value))


def _contract_diag_diag(A, B, pairs) -> ITensor:
    fa, fb = _free_inds(A, B, pairs)
    va, vb = _diag_values(A), _diag_values(B)
    m = min(len(va), len(vb))
    prod = va[:m] * vb[:m]
    out = fa + fb
    if not out:
        return ITensor._make((), Dense(np.asarray(prod.sum())))
    mres = _diag_len(out)
    if mres <= m:
        vals = prod[:mres]
    else:
        vals = np.zeros(mres, dtype=prod.dtype)
        vals[:m] = prod
    if isinstance(A.storage, DiagUniform) and isinstance(B.storage, DiagUniform) and mres <= m:
        return ITensor._make(out, DiagUniform(A.storage.value * B.storage.value))
    return ITensor._make(out, Diag(np.array(vals, copy=True)))


def _contract_diag_dense(D, T, pairs) -> ITensor:
    """Diagonal ``D`` times dense ``T``; ``pairs`` are (D position, T position)."""
    if not pairs:
        return _contract_dense(D.to_dense(), T, pairs)
    v = _diag_values(D)
    m = len(v)
    data = T._dense_data()
    dmatched = [kd for kd, _ in pairs]
    tmatched = [kt for _, kt in pairs]
    tfree = [k for k in range(T.order) if k not in tmatched]
    dfree = [k for k in range(D.order) if k not in dmatched]
    x = engine.permutedims(data, tmatched + tfree)
    ar = np.arange(m)
    x = x[(ar,) * len(tmatched)]  # shape (m, free T dims...)
    x = x * v.reshape((m,) + (1,) * (x.ndim - 1))
    out_inds = [T.inds[k] for k in tfree] + [D.inds[k] for k in dfree]
    if not dfree:
        return ITensor._make(out_inds, Dense(x.sum(axis=0)))
    shape = tuple(i.dim for i in out_inds)
    res = np.zeros(shape, dtype=x.dtype)
    xt = np.moveaxis(x, 0, -1)
    res[(Ellipsis,) + (ar,) * len(dfree)] = xt
    return ITensor._make(out_inds, Dense(res))


def _contract_combiner(C: ITensor, T: ITensor) -> ITensor:
    c, parts = C.inds[0], list(C.inds[1:])
    if isinstance(T.storage, BlockSparse):
        raise TensorError("combiners do not act on block-sparse tensors")
    data = T._dense_data()
    pos = {i: k for k, i in enumerate(T.inds)}
    if c in pos and not any(p in pos for p in parts):
        k = pos[c]
        rest = [q for q in range(T.order) if q != k]
        x = engine.permutedims(data, rest + [k])
        x = x.reshape(tuple(T.inds[q].dim for q in rest) + tuple(p.dim for p in parts))
        return ITensor._make([T.inds[q] for q in rest] + parts, Dense(x))
    if all(p in pos for p in parts) and c not in pos:
        ks = [pos[p] for p in parts]
        rest = [q for q in range(T.order) if q not in ks]
        x = engine.permutedims(data, rest + ks)
        x = x.reshape(tuple(T.inds[q].dim for q in rest) + (c.dim,))
        return ITensor._make([T.inds[q] for q in rest] + [c], Dense(np.ascontiguousarray(x)))
    raise TensorError("combiner needs either all of its indices or its combined index on the other tensor")
