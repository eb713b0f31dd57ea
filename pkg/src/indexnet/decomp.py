"""Factorizations of ITensors over a chosen bipartition of their indices.

The row indices are given explicitly; every other index is a column index.
Dense tensors are reshaped into one matrix.  Block-sparse tensors are split
into one matrix per row-flux sector, each factorized independently, and the
new link index carries one subspace per surviving sector.  Arrow directions
are chosen so that ``U`` (or ``Q``) has zero flux and the remaining factor
carries the flux of the input.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import engine
from .index import Arrow, Index
from .qn import QN
from .storage import BlockSparse, Dense, Diag
from .tensor import ITensor, TensorError, block_flux

__all__ = [
    "Spectrum",
    "TruncationParams",
    "counters",
    "eigen_hermitian",
    "factorize",
    "qr",
    "svd",
    "truncate_spectrum",
]

#: number of factorizations performed, by kind
counters: Counter = Counter()


@dataclass(frozen=True)
class TruncationParams:
    """Controls how many singular/eigen values a factorization keeps.

    ``cutoff`` bounds the relative discarded weight, ``maxdim`` caps and
    ``mindim`` floors the number of kept values.
    """

    cutoff: float = 0.0
    maxdim: int | None = None
    mindim: int = 1

    def __post_init__(self):
        if self.cutoff < 0:
            raise ValueError(f"cutoff must be non-negative, got {self.cutoff}")
        if self.mindim < 1:
            raise ValueError("mindim must be >= 1")
        if self.maxdim is not None:
            if self.maxdim < 1:
                raise ValueError("maxdim must be >= 1")
            if self.mindim > self.maxdim:
                raise ValueError("mindim cannot exceed maxdim")


@dataclass
class Spectrum:
    """Kept values (descending) and the relative truncation error."""

    values: np.ndarray
    truncerr: float = 0.0
    discarded: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _params(trunc, cutoff, maxdim, mindim) -> TruncationParams:
    if trunc is None:
        trunc = TruncationParams()
    if cutoff is None and maxdim is None and mindim is None:
        return trunc
    return TruncationParams(
        cutoff=trunc.cutoff if cutoff is None else cutoff,
        maxdim=trunc.maxdim if maxdim is None else maxdim,
        mindim=trunc.mindim if mindim is None else mindim,
    )


def truncate_spectrum(values, trunc: TruncationParams | None = None, *, power: int = 2
                      ) -> tuple[int, float]:
    """Number of leading values to keep, and the resulting truncation error.

    ``values`` must be sorted descending.  The error of keeping ``n`` values is
    ``sum(values[n:]**power) / sum(values**power)``; the smallest ``n`` whose
    error does not exceed ``trunc.cutoff`` is chosen, then clamped to
    ``[mindim, maxdim]`` (and to ``len(values)``).
    """
    trunc = trunc or TruncationParams()
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("cannot truncate an empty spectrum")
    if np.any(np.diff(v) > 0):
        raise ValueError("values must be sorted in descending order")
    w = np.clip(v, 0.0, None) ** power
    total = w.sum()
    size = len(v)
    if total == 0:
        n = 1
    else:
        # tail[n] = weight discarded when keeping n values
        tail = np.concatenate([np.cumsum(w[::-1])[::-1], [0.0]])
        ok = np.nonzero(tail / total <= trunc.cutoff)[0]
        n = int(ok[0]) if ok.size else size
        n = max(n, 1)
    n = max(n, min(trunc.mindim, size))
    if trunc.maxdim is not None:
        n = min(n, trunc.maxdim)
    n = min(n, size)
    err = float(w[n:].sum() / total) if total > 0 else 0.0
    return n, err


# -- matrix views ------------------------------------------------------------------


def _split(T: ITensor, row_inds: Sequence[Index]) -> tuple[list[int], list[int]]:
    row_inds = list(row_inds)
    pos = {i: k for k, i in enumerate(T.inds)}
    if not row_inds or any(i not in pos for i in row_inds):
        raise TensorError("row indices must be a non-empty subset of the tensor's indices")
    if len(set(row_inds)) != len(row_inds):
        raise TensorError("repeated row index")
    rpos = [pos[i] for i in row_inds]
    cpos = [k for k in range(T.order) if k not in rpos]
    if not cpos:
        raise TensorError("row indices cannot be all of the tensor's indices")
    return rpos, cpos


def _dense_matrix(T: ITensor, rpos, cpos) -> np.ndarray:
    data = T.to_dense().storage.data if not isinstance(T.storage, Dense) else T.storage.data
    m = int(np.prod([T.inds[k].dim for k in rpos]))
    return engine.permutedims(data, rpos + cpos).reshape(m, -1)


def _coord_size(inds: Sequence[Index], coord) -> int:
    return int(np.prod([i.blockdim(b) for i, b in zip(inds, coord)]))


def _offsets(inds, coords):
    offs, o = {}, 0
    for c in coords:
        size = _coord_size(inds, c)
        offs[c] = (o, size)
        o += size
    return offs, o


def _qn_sectors(T: ITensor, rpos, cpos, square: bool = False):
    """Group stored blocks of ``T`` by the flux of their row part.

    Returns ``[(qn, row_coords, col_coords, matrix)]`` sorted by ``qn``.
    With ``square`` the same coordinate list is used for rows and columns.
    """
    st = T.storage
    rinds = [T.inds[k] for k in rpos]
    cinds = [T.inds[k] for k in cpos]
    groups: dict[QN, dict] = {}
    for coord, blk in st.blocks.items():
        rc = tuple(coord[k] for k in rpos)
        cc = tuple(coord[k] for k in cpos)
        q = block_flux(rinds, rc)
        g = groups.setdefault(q, {"rows": set(), "cols": set(), "blocks": []})
        g["rows"].add(rc)
        g["cols"].add(cc)
        g["blocks"].append((rc, cc, blk))
    out = []
    dtype = st.dtype
    for q in sorted(groups):
        g = groups[q]
        if square:
            coords = sorted(g["rows"] | g["cols"])
            rows, cols = coords, coords
        else:
            rows, cols = sorted(g["rows"]), sorted(g["cols"])
        roffs, m = _offsets(rinds, rows)
        coffs, n = _offsets(cinds, cols)
        mat = np.zeros((m, n), dtype=dtype)
        for rc, cc, blk in g["blocks"]:
            r0, rs = roffs[rc]
            c0, cs = coffs[cc]
            mat[r0:r0 + rs, c0:c0 + cs] = engine.permutedims(blk, rpos + cpos).reshape(rs, cs)
        out.append((q, rows, cols, mat))
    return out, rinds, cinds


def _unpack_rows(mat, inds, coords, link_block: int, link_first: bool = False):
    """Cut a (rows x k) matrix into blocks ``{coord + (link_block,): array}``."""
    offs, _ = _offsets(inds, coords)
    k = mat.shape[1]
    blocks = {}
    for c in coords:
        r0, rs = offs[c]
        piece = mat[r0:r0 + rs, :]
        shape = tuple(i.blockdim(b) for i, b in zip(inds, c))
        if link_first:
            blocks[(link_block,) + c] = np.ascontiguousarray(piece.T.reshape((k,) + shape))
        else:
            blocks[c + (link_block,)] = np.ascontiguousarray(piece.reshape(shape + (k,)))
    return blocks


# -- SVD ------------------------------------------------------------------------------


def svd(T: ITensor, row_inds: Sequence[Index], trunc: TruncationParams | None = None, *,
        cutoff: float | None = None, maxdim: int | None = None, mindim: int | None = None,
        lefttags: str = "Link,u", righttags: str = "Link,v"):
    """Thin SVD ``T = U * S * V`` over the bipartition ``row_inds`` | rest.

    Returns ``(U, S, V, spectrum)``.  ``U`` carries ``row_inds`` and a new index
    ``u``; ``S`` is diagonal over ``(u, v)``; ``V`` carries the column indices
    and ``v``.
    """
    trunc = _params(trunc, cutoff, maxdim, mindim)
    rpos, cpos = _split(T, row_inds)
    counters["svd"] += 1
    prov = engine.get_provider()
    rinds = [T.inds[k] for k in rpos]
    cinds = [T.inds[k] for k in cpos]

    if not isinstance(T.storage, BlockSparse):
        mat = _dense_matrix(T, rpos, cpos)
        u, s, vh = prov.svd(mat)
        n, err = truncate_spectrum(s, trunc)
        uind = Index(n, lefttags)
        vind = Index(n, righttags)
        U = ITensor.from_array(u[:, :n].reshape(tuple(i.dim for i in rinds) + (n,)), *rinds, uind)
        V = ITensor.from_array(vh[:n, :].T.reshape(tuple(i.dim for i in cinds) + (n,)), *cinds, vind)
        S = ITensor(uind, vind, storage=Diag(np.array(s[:n], dtype=float)))
        return U, S, V, Spectrum(s[:n].copy(), err, s[n:].copy())

    if not T.storage.blocks:
        raise TensorError("cannot factorize a block-sparse tensor with no blocks")
    sectors, rinds, cinds = _qn_sectors(T, rpos, cpos)
    results = []
    for q, rows, cols, mat in sectors:
        u, s, vh = prov.svd(mat)
        results.append((q, rows, cols, u, s, vh))
    merged = np.concatenate([r[4] for r in results])
    order = np.argsort(-merged, kind="stable")
    n, err = truncate_spectrum(merged[order], trunc)
    keep_mask = np.zeros(len(merged), dtype=bool)
    keep_mask[order[:n]] = True
    kept_vals = merged[order[:n]]
    discarded = merged[order[n:]]

    space, ublocks, sblocks, vblocks = [], {}, {}, {}
    start = 0
    for q, rows, cols, u, s, vh in results:
        k = int(keep_mask[start:start + len(s)].sum())
        start += len(s)
        if k == 0:
            continue
        b = len(space)
        space.append((q, k))
        ublocks.update(_unpack_rows(u[:, :k], rinds, rows, b))
        vblocks.update(_unpack_rows(vh[:k, :].T, cinds, cols, b))
        sblocks[(b, b)] = np.diag(s[:k]).astype(float)
    uind = Index(space, lefttags, dir=Arrow.In)
    vind = Index(space, righttags, dir=Arrow.In)
    flux_t = T.storage.flux
    U = ITensor(*rinds, uind, storage=BlockSparse(ublocks, QN()))
    S = ITensor(uind.dag(), vind, storage=BlockSparse(sblocks, QN()))
    V = ITensor(*cinds, vind.dag(), storage=BlockSparse(vblocks, flux_t))
    return U, S, V, Spectrum(kept_vals, err, discarded)


# -- QR ---------------------------------------------------------------------------------


def qr(T: ITensor, row_inds: Sequence[Index], *, tags: str = "Link,qr"):
    """Thin QR ``T = Q * R``; ``Q`` carries ``row_inds`` and is an isometry."""
    rpos, cpos = _split(T, row_inds)
    counters["qr"] += 1
    prov = engine.get_provider()
    rinds = [T.inds[k] for k in rpos]
    cinds = [T.inds[k] for k in cpos]

    if not isinstance(T.storage, BlockSparse):
        mat = _dense_matrix(T, rpos, cpos)
        q, r = prov.qr(mat)
        k = q.shape[1]
        link = Index(k, tags)
        Q = ITensor.from_array(q.reshape(tuple(i.dim for i in rinds) + (k,)), *rinds, link)
        R = ITensor.from_array(r.reshape((k,) + tuple(i.dim for i in cinds)), link, *cinds)
        return Q, R

    if not T.storage.blocks:
        raise TensorError("cannot factorize a block-sparse tensor with no blocks")
    sectors, rinds, cinds = _qn_sectors(T, rpos, cpos)
    space, qblocks, rblocks = [], {}, {}
    for qn, rows, cols, mat in sectors:
        q, r = prov.qr(mat)
        b = len(space)
        space.append((qn, q.shape[1]))
        qblocks.update(_unpack_rows(q, rinds, rows, b))
        rblocks.update(_unpack_rows(r.T, cinds, cols, b, link_first=True))
    link = Index(space, tags, dir=Arrow.In)
    Q = ITensor(*rinds, link, storage=BlockSparse(qblocks, QN()))
    R = ITensor(link.dag(), *cinds, storage=BlockSparse(rblocks, T.storage.flux))
    return Q, R


# -- Hermitian eigendecomposition ------------------------------------------------------------


def eigen_hermitian(T: ITensor, row_inds: Sequence[Index], trunc: TruncationParams | None = None,
                    *, col_inds: Sequence[Index] | None = None, cutoff: float | None = None,
                    maxdim: int | None = None, mindim: int | None = None,
                    tags: str = "Link,eig", hermitian_tol: float = 1e-10):
    """Eigendecomposition of ``T`` viewed as a Hermitian matrix rows x cols.

    ``col_inds`` defaults to the primed partners of ``row_inds``.  Returns
    ``(U, D, spectrum)`` with ``U`` over ``row_inds`` plus a new index ``l``
    and ``D`` diagonal over ``(l, l')`` (eigenvalues ordered by descending
    magnitude, which is plain descending order for density matrices), so that for
    primed partners ``T ≈ U * D * dag(U)'``.
    """
    trunc = _params(trunc, cutoff, maxdim, mindim)
    row_inds = list(row_inds)
    if col_inds is None:
        col_inds = [i.prime() for i in row_inds]
    col_inds = list(col_inds)
    if len(col_inds) != len(row_inds) or not T.hasinds(*col_inds):
        raise TensorError("eigen_hermitian needs a column partner for every row index")
    if set(row_inds) | set(col_inds) != set(T.inds) or len(T.inds) != 2 * len(row_inds):
        raise TensorError("rows and columns must cover every index exactly once")
    pos = {i: k for k, i in enumerate(T.inds)}
    rpos = [pos[i] for i in row_inds]
    cpos = [pos[i] for i in col_inds]
    counters["eigen"] += 1
    prov = engine.get_provider()
    rinds = [T.inds[k] for k in rpos]

    def check(mat):
        scale = max(1.0, float(np.abs(mat).max()) if mat.size else 1.0)
        if np.abs(mat - mat.conj().T).max() > hermitian_tol * scale:
            raise TensorError("tensor is not Hermitian for this bipartition")

    if not isinstance(T.storage, BlockSparse):
        mat = engine.permutedims(T._dense_data(), rpos + cpos).reshape(
            int(np.prod([i.dim for i in rinds])), -1)
        check(mat)
        w, v = prov.eigh((mat + mat.conj().T) / 2)
        order = np.argsort(-np.abs(w), kind="stable")
        w, v = w[order], v[:, order]
        n, err = _truncate_eigs(w, trunc)
        link = Index(n, tags)
        U = ITensor.from_array(v[:, :n].reshape(tuple(i.dim for i in rinds) + (n,)), *rinds, link)
        D = ITensor(link, link.prime(), storage=Diag(np.array(w[:n], dtype=float)))
        return U, D, Spectrum(w[:n].copy(), err, w[n:].copy())

    if not T.storage.blocks:
        raise TensorError("cannot factorize a block-sparse tensor with no blocks")
    sectors, rinds, _ = _qn_sectors(T, rpos, cpos, square=True)
    results = []
    for q, rows, _, mat in sectors:
        check(mat)
        w, v = prov.eigh((mat + mat.conj().T) / 2)
        order = np.argsort(-np.abs(w), kind="stable")
        results.append((q, rows, w[order], v[:, order]))
    merged = np.concatenate([r[2] for r in results])
    order = np.argsort(-np.abs(merged), kind="stable")
    n, err = _truncate_eigs(merged[order], trunc)
    keep = np.zeros(len(merged), dtype=bool)
    keep[order[:n]] = True
    space, ublocks, dblocks = [], {}, {}
    start = 0
    for q, rows, w, v in results:
        k = int(keep[start:start + len(w)].sum())
        start += len(w)
        if k == 0:
            continue
        b = len(space)
        space.append((q, k))
        ublocks.update(_unpack_rows(v[:, :k], rinds, rows, b))
        dblocks[(b, b)] = np.diag(w[:k]).astype(float)
    link = Index(space, tags, dir=Arrow.In)
    U = ITensor(*rinds, link, storage=BlockSparse(ublocks, QN()))
    D = ITensor(link.dag(), link.prime(), storage=BlockSparse(dblocks, QN()))
    return U, D, Spectrum(merged[order[:n]], err, merged[order[n:]])


def _truncate_eigs(w: np.ndarray, trunc: TruncationParams) -> tuple[int, float]:
    """Truncate eigenvalues sorted by descending magnitude, weighting each by ``|w|``."""
    return truncate_spectrum(np.abs(w), trunc, power=1)


# -- convenience ----------------------------------------------------------------------------------


def factorize(T: ITensor, row_inds: Sequence[Index], trunc: TruncationParams | None = None, *,
              absorb: str = "right", tags: str = "Link", **kw):
    """Split ``T`` into two tensors sharing one new index.

    The singular values are absorbed into the ``right`` (default) or ``left``
    factor, so the other factor is an isometry.  Returns ``(L, R, spectrum)``.
    """
    U, S, V, spec = svd(T, row_inds, trunc, **kw)
    if absorb == "right":
        L, R, link = U, S * V, U.inds[-1]
    elif absorb == "left":
        L, R, link = U * S, V, V.inds[-1]
    else:
        raise ValueError("absorb must be 'left' or 'right'")
    newlink = link.settags(tags)
    return L.replaceinds([link], [newlink]), R.replaceinds([link], [newlink]), spec
