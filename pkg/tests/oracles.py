"""Reference implementations used to check the library.

Nothing here calls the contraction engine or the decompositions: tensors are
read element by element through ``T[i(v), ...]`` and combined with explicit
loops, and Hamiltonians are built from Kronecker products.
"""

from __future__ import annotations

import itertools

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla


def elements(T, order):
    """Dense array of ``T`` in ``order`` read one element at a time."""
    out = np.zeros(tuple(i.dim for i in order), dtype=complex)
    for vals in itertools.product(*(range(1, i.dim + 1) for i in order)):
        out[tuple(v - 1 for v in vals)] = T[[i(v) for i, v in zip(order, vals)]]
    return out


def nested_loop_contract(A, B):
    """Contract ``A`` and ``B`` over shared indices with explicit loops.

    Returns ``(free_inds, array)``; free indices of ``A`` come first.
    """
    shared = [i for i in A.inds if i in set(B.inds)]
    free = [i for i in A.inds if i not in shared] + [i for i in B.inds if i not in set(A.inds)]
    a = elements(A, list(A.inds))
    b = elements(B, list(B.inds))
    apos = {i: k for k, i in enumerate(A.inds)}
    bpos = {i: k for k, i in enumerate(B.inds)}
    out = np.zeros(tuple(i.dim for i in free), dtype=complex)
    for fv in itertools.product(*(range(i.dim) for i in free)):
        acc = 0.0
        for cv in itertools.product(*(range(i.dim) for i in shared)):
            val = dict(zip(free, fv))
            val.update(zip(shared, cv))
            ia = [0] * len(A.inds)
            for i, k in apos.items():
                ia[k] = val[i]
            ib = [0] * len(B.inds)
            for i, k in bpos.items():
                ib[k] = val[i]
            acc += a[tuple(ia)] * b[tuple(ib)]
        out[fv] = acc
    return free, out


# -- spin chain Hamiltonians -------------------------------------------------------------

SZ = np.diag([0.5, -0.5])
SP = np.array([[0.0, 1.0], [0.0, 0.0]])
SM = SP.T.copy()
SX = (SP + SM) / 2


def kron_op(N, ops, d=2):
    """Sparse ``N``-site operator with ``ops[j]`` on site ``j`` (1-based), identity elsewhere.

    Site 1 is the most significant factor, matching a row-major flattening
    of indices ``s_1 ... s_N``.
    """
    M = sp.identity(1, format="csr")
    for j in range(1, N + 1):
        M = sp.kron(M, sp.csr_matrix(ops[j]) if j in ops else sp.identity(d), format="csr")
    return M


def heisenberg_matrix(N, sparse=True):
    H = sp.csr_matrix((2 ** N, 2 ** N))
    for j in range(1, N):
        H = H + 0.5 * kron_op(N, {j: SP, j + 1: SM}) + 0.5 * kron_op(N, {j: SM, j + 1: SP})
        H = H + kron_op(N, {j: SZ, j + 1: SZ})
    return H if sparse else H.toarray()


def lowest_levels(H, k=2):
    """``k`` lowest eigenvalues (with multiplicity) of a sparse Hermitian matrix."""
    if H.shape[0] <= 512:
        return np.linalg.eigvalsh(H.toarray())[:k]
    return np.sort(sla.eigsh(H, k=k, which="SA", tol=1e-13)[0])


def lowest_distinct_levels(H, k=2, tol=1e-8):
    """Lowest ``k`` distinct eigenvalues."""
    w = lowest_levels(H, k=12 if H.shape[0] > 512 else H.shape[0])
    out = [w[0]]
    for x in w[1:]:
        if x - out[-1] > tol:
            out.append(x)
        if len(out) == k:
            break
    return np.array(out)


def identical(a, b) -> bool:
    """Structural, bit-exact equality for values an archive can hold."""
    from indexnet import MPO, MPS, Index, ITensor
    from indexnet.storage import BlockSparse

    if type(a) is not type(b):
        return False
    if isinstance(a, np.ndarray):
        return a.dtype == b.dtype and a.shape == b.shape and a.tobytes() == b.tobytes()
    if isinstance(a, Index):
        return (a == b and a.dim == b.dim and a.dir == b.dir and a.space == b.space)
    if isinstance(a, ITensor):
        sa, sb = a.storage, b.storage
        if len(a.inds) != len(b.inds) or not all(identical(x, y) for x, y in zip(a.inds, b.inds)):
            return False
        if type(sa) is not type(sb):
            return False
        if isinstance(sa, BlockSparse):
            return sa.flux == sb.flux and sa.blocks.keys() == sb.blocks.keys() and all(
                identical(sa.blocks[k], sb.blocks[k]) for k in sa.blocks)
        return all(identical(getattr(sa, f), getattr(sb, f)) for f in vars(sa))
    if isinstance(a, (MPS, MPO)):
        return (len(a) == len(b) and a.llim == b.llim and a.rlim == b.rlim
                and all(identical(x, y) for x, y in zip(a, b)))
    if isinstance(a, (list, tuple)):
        return len(a) == len(b) and all(identical(x, y) for x, y in zip(a, b))
    if isinstance(a, dict):
        return list(a) == list(b) and all(identical(a[k], b[k]) for k in a)
    if isinstance(a, float) and np.isnan(a):
        return np.isnan(b)
    return a == b
