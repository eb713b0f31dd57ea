"""Label-based contraction of raw dense arrays and block-sparse block maps.

Labels follow the usual convention: a negative label marks a dimension that
is contracted with the dimension carrying the same label in the other
operand, a positive label marks a free dimension.  The result carries the
free labels of ``A`` (in operand order) followed by those of ``B``.

Dense contractions are done by permuting both operands into matrix form and
calling the general matrix multiply of the active :class:`LinalgProvider`.
"""

from __future__ import annotations

from collections import Counter
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "ContractionError",
    "LinalgProvider",
    "NumpyProvider",
    "blocksparse_contract",
    "counters",
    "dense_contract",
    "get_provider",
    "permutedims",
    "set_provider",
]


class ContractionError(ValueError):
    """Raised when labels or shapes are inconsistent."""


#: instrumentation: ``madds`` (scalar multiply-adds issued to gemm),
#: ``permutes`` (operand permutations that moved data), ``gemm`` (calls)
counters: Counter = Counter()


class LinalgProvider:
    """Dense linear algebra used by contraction and factorizations.

    Subclasses swap in accelerated kernels; every method takes and returns
    2-d numpy arrays.
    """

    def gemm(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def qr(self, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Thin QR."""
        raise NotImplementedError

    def svd(self, a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Thin SVD ``a = u @ diag(s) @ vh`` with ``s`` descending."""
        raise NotImplementedError

    def eigh(self, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Hermitian eigendecomposition with eigenvalues ascending."""
        raise NotImplementedError


class NumpyProvider(LinalgProvider):
    """Reference provider backed by numpy's BLAS/LAPACK bindings."""

    def gemm(self, a, b):
        return a @ b

    def qr(self, a):
        return np.linalg.qr(a, mode="reduced")

    def svd(self, a):
        try:
            return np.linalg.svd(a, full_matrices=False)
        except np.linalg.LinAlgError:
            # gesdd occasionally fails to converge; gesvd is slower but robust
            import scipy.linalg

            return scipy.linalg.svd(a, full_matrices=False, lapack_driver="gesvd")

    def eigh(self, a):
        return np.linalg.eigh(a)


_provider: LinalgProvider = NumpyProvider()


def get_provider() -> LinalgProvider:
    return _provider


def set_provider(provider: LinalgProvider) -> LinalgProvider:
    """Install ``provider`` and return the previous one."""
    global _provider
    old, _provider = _provider, provider
    return old


# -- permutation ---------------------------------------------------------------


def _check_perm(perm: Sequence[int], ndim: int) -> tuple[int, ...]:
    perm = tuple(int(p) for p in perm)
    if sorted(perm) != list(range(ndim)):
        raise ContractionError(f"{perm} is not a permutation of {ndim} dimensions")
    return perm


def permutedims(t: np.ndarray, perm: Sequence[int]) -> np.ndarray:
    """Return ``t`` with dimensions reordered so output dim ``k`` is input dim ``perm[k]``.

    The identity permutation returns ``t`` itself.
    """
    perm = _check_perm(perm, t.ndim)
    if perm == tuple(range(t.ndim)):
        return t
    return np.ascontiguousarray(np.transpose(t, perm))


# -- dense contraction -----------------------------------------------------------


def _analyze(labels_a: Sequence[int], labels_b: Sequence[int], shape_a, shape_b):
    if len(labels_a) != len(shape_a) or len(labels_b) != len(shape_b):
        raise ContractionError("one label per dimension required")
    for labels in (labels_a, labels_b):
        pos = [l for l in labels if l > 0]
        if len(set(pos)) != len(pos):
            raise ContractionError(f"repeated free label in {labels}")
        if 0 in labels:
            raise ContractionError("label 0 is not allowed")
    neg_a = [l for l in labels_a if l < 0]
    neg_b = [l for l in labels_b if l < 0]
    if len(set(neg_a)) != len(neg_a) or sorted(neg_a) != sorted(neg_b):
        raise ContractionError(
            f"contracted labels must appear exactly once in each operand: {labels_a} / {labels_b}"
        )
    for l in neg_a:
        if shape_a[labels_a.index(l)] != shape_b[labels_b.index(l)]:
            raise ContractionError(f"dimension mismatch on contracted label {l}")
    if set(l for l in labels_a if l > 0) & set(l for l in labels_b if l > 0):
        raise ContractionError("free labels shared between operands")
    return neg_a, neg_b


def _matrix_layout(labels, contracted, size):
    """Axis order needed for ``labels`` to be (free..., contracted...) or the reverse.

    Returns ``(perm, contracted_first, moved)``; ``moved`` is False when the
    operand is already in one of the two matrix layouts.
    """
    free = [k for k, l in enumerate(labels) if l > 0]
    cpos = [labels.index(l) for l in contracted]
    natural = list(range(len(labels)))
    if free + cpos == natural:
        return free + cpos, False, False
    if cpos + free == natural:
        return cpos + free, True, False
    return free + cpos, False, True


def dense_contract(a: np.ndarray, labels_a: Sequence[int], b: np.ndarray,
                   labels_b: Sequence[int]) -> tuple[np.ndarray, tuple[int, ...]]:
    """Contract two dense arrays over their shared negative labels.

    Returns the result array and its labels (free labels of ``a`` then ``b``).
    """
    labels_a, labels_b = list(labels_a), list(labels_b)
    neg_a, _ = _analyze(labels_a, labels_b, a.shape, b.shape)
    out_labels = tuple([l for l in labels_a if l > 0] + [l for l in labels_b if l > 0])
    free_a = [a.shape[k] for k, l in enumerate(labels_a) if l > 0]
    free_b = [b.shape[k] for k, l in enumerate(labels_b) if l > 0]
    csize = int(np.prod([a.shape[labels_a.index(l)] for l in neg_a], dtype=np.int64))
    ma = int(np.prod(free_a, dtype=np.int64))
    nb = int(np.prod(free_b, dtype=np.int64))

    # candidate orders for the contracted dims: as they sit in A, or in B;
    # pick the one that moves the least data
    order_a = [l for l in labels_a if l < 0]
    order_b = [l for l in labels_b if l < 0]
    best = None
    for order in (order_a, order_b):
        pa, a_cfirst, moved_a = _matrix_layout(labels_a, order, a.size)
        pb, b_cfirst, moved_b = _matrix_layout(labels_b, order, b.size)
        cost = (a.size if moved_a else 0) + (b.size if moved_b else 0)
        if best is None or cost < best[0]:
            best = (cost, pa, a_cfirst, moved_a, pb, b_cfirst, moved_b)
        if order_a == order_b:
            break
    _, pa, a_cfirst, moved_a, pb, b_cfirst, moved_b = best

    if moved_a:
        counters["permutes"] += 1
    if moved_b:
        counters["permutes"] += 1
    at = permutedims(a, pa)
    bt = permutedims(b, pb)
    amat = at.reshape(csize, ma).T if a_cfirst else at.reshape(ma, csize)
    # B is wanted as (contracted, free)
    if b_cfirst:
        bmat = bt.reshape(csize, nb)
    else:
        bmat = bt.reshape(nb, csize).T
    counters["gemm"] += 1
    counters["madds"] += ma * nb * csize
    c = _provider.gemm(amat, bmat)
    return c.reshape(tuple(free_a) + tuple(free_b)), out_labels


# -- block-sparse contraction ------------------------------------------------------


def blocksparse_contract(
    blocks_a: Mapping[tuple[int, ...], np.ndarray],
    labels_a: Sequence[int],
    blocks_b: Mapping[tuple[int, ...], np.ndarray],
    labels_b: Sequence[int],
) -> tuple[dict[tuple[int, ...], np.ndarray], tuple[int, ...]]:
    """Contract two block-sparse tensors given as ``{block coordinate: array}``.

    Every pair of stored blocks whose coordinates agree on all contracted
    dimensions is contracted densely; contributions landing on the same output
    coordinate are summed.  Output blocks are accumulated in sorted
    coordinate order.
    """
    labels_a, labels_b = list(labels_a), list(labels_b)
    nega = [l for l in labels_a if l < 0]
    if len(labels_a) and blocks_a:
        sample = next(iter(blocks_a.values()))
        if sample.ndim != len(labels_a):
            raise ContractionError("label count does not match block order")
    cpos_a = [labels_a.index(l) for l in nega]
    cpos_b = [labels_b.index(l) for l in nega]
    fpos_a = [k for k, l in enumerate(labels_a) if l > 0]
    fpos_b = [k for k, l in enumerate(labels_b) if l > 0]
    out_labels = tuple([labels_a[k] for k in fpos_a] + [labels_b[k] for k in fpos_b])

    by_key: dict[tuple[int, ...], list] = {}
    for cb, blk in blocks_b.items():
        by_key.setdefault(tuple(cb[k] for k in cpos_b), []).append((cb, blk))

    contributions: dict[tuple[int, ...], list[np.ndarray]] = {}
    for ca in sorted(blocks_a):
        blk_a = blocks_a[ca]
        key = tuple(ca[k] for k in cpos_a)
        for cb, blk_b in by_key.get(key, ()):
            for la, lb in zip(cpos_a, cpos_b):
                if blk_a.shape[la] != blk_b.shape[lb]:
                    raise ContractionError(
                        f"subspace structure mismatch on contracted dimension (block {ca} vs {cb})"
                    )
            c, _ = dense_contract(blk_a, labels_a, blk_b, labels_b)
            out = tuple(ca[k] for k in fpos_a) + tuple(cb[k] for k in fpos_b)
            contributions.setdefault(out, []).append(c)

    result = {}
    for out in sorted(contributions):
        parts = contributions[out]
        acc = parts[0]
        for p in parts[1:]:
            acc = acc + p
        result[out] = acc
    return result, out_labels
