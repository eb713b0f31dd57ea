"""Matrix product states and operators.

Sites are numbered from 1.  Tensor ``j`` of an MPS carries the site index
``s_j`` and the link indices shared with its neighbours, tagged
``Link,l=<bond>``.  MPO tensors carry ``s_j'`` and ``dag(s_j)`` instead of
``s_j``.  ``llim``/``rlim`` record which tensors are known to be left or right
orthogonal: every tensor at position ``<= llim`` is left orthogonal and every
tensor at position ``>= rlim`` is right orthogonal.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .decomp import TruncationParams, eigen_hermitian, factorize, qr
from .index import Index
from .qn import QN
from .sitetypes import op as site_op
from .sitetypes import state as site_state
from .storage import BlockSparse, Dense
from .tensor import ITensor, TensorError, commonind, commoninds, random_itensor

__all__ = [
    "MPO",
    "MPS",
    "add",
    "apply",
    "contract_mpo",
    "expect",
    "identity_mpo",
    "inner",
    "inner_mpo",
    "mps_from_tensor",
    "norm",
    "product_mps",
    "random_mps",
    "to_tensor",
    "total_flux",
]


def _trunc(trunc, kw) -> TruncationParams:
    if trunc is None:
        trunc = TruncationParams()
    if kw:
        fields = {"cutoff": trunc.cutoff, "maxdim": trunc.maxdim, "mindim": trunc.mindim}
        fields.update(kw)
        trunc = TruncationParams(**fields)
    return trunc


class _Chain:
    """Shared machinery of MPS and MPO: a list of tensors plus gauge bounds."""

    def __init__(self, tensors: Sequence[ITensor], llim: int = 0, rlim: int | None = None):
        self._t = list(tensors)
        self.llim = llim
        self.rlim = len(self._t) + 1 if rlim is None else rlim

    def __len__(self) -> int:
        return len(self._t)

    def __getitem__(self, j: int) -> ITensor:
        if not 1 <= j <= len(self._t):
            raise IndexError(f"site {j} out of range 1..{len(self._t)}")
        return self._t[j - 1]

    def __setitem__(self, j: int, T: ITensor) -> None:
        if not 1 <= j <= len(self._t):
            raise IndexError(f"site {j} out of range 1..{len(self._t)}")
        self._t[j - 1] = T
        self.llim = min(self.llim, j - 1)
        self.rlim = max(self.rlim, j + 1)

    def _set(self, j: int, T: ITensor) -> None:
        """Replace a tensor without touching the gauge bounds."""
        self._t[j - 1] = T

    def __iter__(self):
        return iter(self._t)

    @property
    def tensors(self) -> list[ITensor]:
        return list(self._t)

    def copy(self):
        new = type(self).__new__(type(self))
        _Chain.__init__(new, [T.copy() for T in self._t], self.llim, self.rlim)
        return new

    def linkind(self, b: int) -> Index | None:
        """Index shared by tensors ``b`` and ``b+1`` (as it appears on tensor ``b``)."""
        if not 1 <= b < len(self._t):
            return None
        return commonind(self._t[b - 1], self._t[b])

    def linkinds(self) -> list[Index]:
        return [self.linkind(b) for b in range(1, len(self._t))]

    def linkdims(self) -> list[int]:
        return [l.dim for l in self.linkinds()]

    def maxlinkdim(self) -> int:
        return max(self.linkdims(), default=1)

    def siteinds_at(self, j: int) -> list[Index]:
        links = {self.linkind(j - 1), self.linkind(j)} - {None}
        return [i for i in self[j].inds if i not in links]

    @property
    def orthocenter(self) -> int | None:
        if self.rlim - self.llim == 2:
            return self.llim + 1
        return None

    # -- gauge ------------------------------------------------------------------

    def orthogonalize(self, j: int):
        """Move the orthogonality center to site ``j`` with QR sweeps.

        Only tensors between the current gauge bounds and ``j`` are factorized.
        """
        N = len(self._t)
        if not 1 <= j <= N:
            raise IndexError(f"site {j} out of range 1..{N}")
        while self.llim < j - 1:
            b = self.llim + 1
            link = self.linkind(b)
            A = self._t[b - 1]
            rows = [i for i in A.inds if i != link]
            Q, R = qr(A, rows, tags=str(link.tags))
            self._t[b - 1] = Q
            self._t[b] = R * self._t[b]
            self.llim = b
            if self.rlim < b + 2:
                self.rlim = b + 2
        while self.rlim > j + 1:
            b = self.rlim - 1
            link = self.linkind(b - 1)
            A = self._t[b - 1]
            rows = [i for i in A.inds if i != link]
            Q, R = qr(A, rows, tags=str(link.tags))
            self._t[b - 1] = Q
            self._t[b - 2] = self._t[b - 2] * R
            self.rlim = b
            if self.llim > b - 2:
                self.llim = b - 2
        return self

    def truncate(self, trunc: TruncationParams | None = None, **kw) -> list[float]:
        """Sweep SVDs right to left imposing ``trunc`` on every bond.

        Returns the truncation error of each bond (bond ``N-1`` first).
        """
        trunc = _trunc(trunc, kw)
        N = len(self._t)
        errs = []
        if N < 2:
            return errs
        self.orthogonalize(N)
        for j in range(N, 1, -1):
            link = self.linkind(j - 1)
            A = self._t[j - 1]
            L, R, spec = factorize(A, [link], trunc, absorb="left", tags=str(link.tags))
            # L carries (link, new); R is right orthogonal
            self._t[j - 1] = R
            self._t[j - 2] = self._t[j - 2] * L
            errs.append(spec.truncerr)
        self.llim, self.rlim = 0, 2
        return errs

    def normalize(self):
        """Scale to unit norm (moves the center to site 1 if not set)."""
        c = self.orthocenter
        if c is None:
            self.orthogonalize(1)
            c = 1
        nrm = self._t[c - 1].norm()
        if nrm == 0:
            raise ValueError("cannot normalize a zero state")
        self._t[c - 1] = self._t[c - 1] / nrm
        return self

    # -- scalar algebra ----------------------------------------------------------

    def __mul__(self, c):
        if not isinstance(c, (int, float, complex, np.number)):
            return NotImplemented
        new = self.copy()
        k = new.orthocenter or 1
        new._t[k - 1] = new._t[k - 1] * c
        return new

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def __truediv__(self, c):
        return self * (1.0 / c)

    def __add__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return add(self, other)

    def __sub__(self, other):
        return add(self, -other)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(N={len(self)}, linkdims={self.linkdims()})"


class MPS(_Chain):
    """Matrix product state."""

    def siteind(self, j: int) -> Index:
        s = self.siteinds_at(j)
        if len(s) != 1:
            raise TensorError(f"MPS tensor {j} should have one site index, found {len(s)}")
        return s[0]

    def siteinds(self) -> list[Index]:
        return [self.siteind(j) for j in range(1, len(self) + 1)]


class MPO(_Chain):
    """Matrix product operator mapping ``s_j`` to ``s_j'``."""

    def siteinds(self) -> list[Index]:
        """Unprimed site index of every tensor."""
        out = []
        for j in range(1, len(self) + 1):
            s = [i for i in self.siteinds_at(j) if i.plev == 0]
            if len(s) != 1:
                raise TensorError(f"MPO tensor {j} should have one unprimed site index")
            out.append(s[0])
        return out


# -- construction ---------------------------------------------------------------------


def _link_tags(b: int) -> str:
    return f"Link,l={b}"


def product_mps(sites: Sequence[Index], states: Sequence[str] | str) -> MPS:
    """Bond-dimension-1 MPS of basis states named per site."""
    N = len(sites)
    if isinstance(states, str):
        states = [states] * N
    if len(states) != N:
        raise ValueError("need one state name per site")
    vecs = [site_state(name, s) for name, s in zip(states, sites)]
    qn = sites[0].has_qns
    tensors = []
    total = QN()
    left = None
    for j, (s, v) in enumerate(zip(sites, vecs), start=1):
        arr = v.array(s)
        inds = [s]
        shape = [s.dim]
        if left is not None:
            inds.insert(0, left.dag())
            shape.insert(0, 1)
        right = None
        if j < N:
            if qn:
                total = total + v.flux()
                right = Index([(total, 1)], _link_tags(j), dir=-1)
            else:
                right = Index(1, _link_tags(j))
            inds.append(right)
            shape.append(1)
        T = ITensor.from_array(arr.reshape(shape), *inds)
        if qn:
            from .tensor import to_blocksparse

            T = to_blocksparse(T)
        tensors.append(T)
        left = right
    psi = MPS(tensors)
    psi.llim, psi.rlim = 0, 2
    return psi


def random_mps(sites: Sequence[Index], linkdim: int = 1, *, state: Sequence[str] | None = None,
               rng: np.random.Generator | int | None = None) -> MPS:
    """Normalized random MPS with link dimensions up to ``linkdim``.

    Starts from a product state (random single-site vectors, or the basis
    ``state`` which is required for quantum-number sites) and entangles it
    with sweeps of random charge-conserving two-site gates truncated to
    ``linkdim``.
    """
    if linkdim < 1:
        raise ValueError("linkdim must be >= 1")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    N = len(sites)
    qn = sites[0].has_qns
    if state is not None:
        psi = product_mps(sites, state)
    elif qn:
        raise ValueError("random_mps over quantum-number sites needs an initial state")
    else:
        psi = product_mps_from_vectors(sites, [rng.standard_normal(s.dim) for s in sites])
    if N == 1 or linkdim == 1:
        return psi.normalize()
    d = max(s.dim for s in sites)
    nsweeps = max(1, math.ceil(math.log(linkdim) / math.log(d * d))) + 1
    trunc = TruncationParams(maxdim=linkdim)
    for _ in range(nsweeps):
        for b in range(1, N):
            psi.orthogonalize(b)
            s1, s2 = sites[b - 1], sites[b]
            G = random_itensor(s1.prime(), s2.prime(), s1.dag(), s2.dag(), rng=rng)
            phi = (psi[b] * psi[b + 1]) * G
            phi = phi.noprime(s1.prime(), s2.prime())
            link = psi.linkind(b)
            rows = [i for i in psi[b].inds if i != link]
            L, R, _ = factorize(phi, rows, trunc, absorb="right", tags=_link_tags(b))
            psi._set(b, L)
            psi._set(b + 1, R / max(R.norm(), 1e-300))
            psi.llim, psi.rlim = b, b + 2
    return psi.normalize()


def product_mps_from_vectors(sites: Sequence[Index], vectors: Sequence[np.ndarray]) -> MPS:
    """Dense product MPS from one amplitude vector per site."""
    N = len(sites)
    links = [Index(1, _link_tags(b)) for b in range(1, N)]
    tensors = []
    for j, (s, v) in enumerate(zip(sites, vectors), start=1):
        inds, shape = [s], [s.dim]
        if j > 1:
            inds.insert(0, links[j - 2])
            shape.insert(0, 1)
        if j < N:
            inds.append(links[j - 1])
            shape.append(1)
        tensors.append(ITensor.from_array(np.asarray(v).reshape(shape), *inds))
    return MPS(tensors)


def mps_from_tensor(T: ITensor, sites: Sequence[Index], trunc: TruncationParams | None = None,
                    **kw) -> MPS:
    """Factor a full tensor over ``sites`` into an MPS with successive SVDs."""
    trunc = _trunc(trunc, kw)
    N = len(sites)
    tensors = []
    rest = T
    left = None
    for j in range(1, N):
        rows = [sites[j - 1]] if left is None else [left, sites[j - 1]]
        L, R, _ = factorize(rest, rows, trunc, absorb="right", tags=_link_tags(j))
        tensors.append(L)
        left = commonind(L, R)
        rest = R
    tensors.append(rest)
    psi = MPS(tensors)
    psi.llim, psi.rlim = N - 1, N + 1
    return psi


def identity_mpo(sites: Sequence[Index]) -> MPO:
    """Product MPO of identity operators."""
    N = len(sites)
    qn = sites[0].has_qns
    links = [Index([(QN(), 1)], _link_tags(b)) if qn else Index(1, _link_tags(b))
             for b in range(1, N)]
    tensors = []
    for j, s in enumerate(sites, start=1):
        T = site_op("Id", s)
        if j > 1:
            T = T * _unit(links[j - 2].dag() if qn else links[j - 2])
        if j < N:
            T = T * _unit(links[j - 1])
        tensors.append(T)
    return MPO(tensors)


def _unit(i: Index) -> ITensor:
    T = ITensor(i)
    T[i(1)] = 1.0
    return T


def to_tensor(chain: _Chain) -> ITensor:
    """Contract the whole chain into one tensor (small systems only)."""
    T = chain[1]
    for j in range(2, len(chain) + 1):
        T = T * chain[j]
    return T


def total_flux(psi: _Chain) -> QN:
    q = QN()
    for T in psi:
        q = q + T.flux()
    return q


# -- addition -----------------------------------------------------------------------------


def _embed(T: ITensor, mapping: dict) -> ITensor:
    """Place ``T`` into larger indices: ``mapping[old] = (new, elem_offset, block_offset)``."""
    new_inds = [mapping[i][0] if i in mapping else i for i in T.inds]
    if isinstance(T.storage, BlockSparse):
        axes = [(k, mapping[i][2]) for k, i in enumerate(T.inds) if i in mapping]
        blocks = {}
        for c, blk in T.storage.blocks.items():
            c = list(c)
            for k, off in axes:
                c[k] += off
            blocks[tuple(c)] = blk.copy()
        return ITensor(*new_inds, storage=BlockSparse(blocks, T.storage.flux))
    data = T._dense_data()
    out = np.zeros(tuple(i.dim for i in new_inds), dtype=data.dtype)
    sl = tuple(slice(mapping[i][1], mapping[i][1] + i.dim) if i in mapping else slice(None)
               for i in T.inds)
    out[sl] = data
    return ITensor(*new_inds, storage=Dense(out))


def _flip(i: Index) -> Index:
    """Same space described with the opposite arrow (QNs negated)."""
    return Index([(-q, d) for q, d in i.space], i.tags, dir=i.dir.reverse(), plev=i.plev)


def add(psi: _Chain, phi: _Chain, trunc: TruncationParams | None = None, **kw) -> _Chain:
    """Sum of two chains over the same site indices, by direct sum of links then truncation."""
    N = len(psi)
    if len(phi) != N:
        raise ValueError("cannot add chains of different lengths")
    for j in range(1, N + 1):
        if set(psi.siteinds_at(j)) != set(phi.siteinds_at(j)):
            raise ValueError(f"site indices differ at site {j}")
    if N == 1:
        return type(psi)([psi[1] + phi[1]])
    new_links = []
    maps_a = [dict() for _ in range(N + 1)]
    maps_b = [dict() for _ in range(N + 1)]
    for b in range(1, N):
        la, lb = psi.linkind(b), phi.linkind(b)
        if la.has_qns:
            lb_eff = lb if lb.dir == la.dir else _flip(lb)
            space = list(la.space) + list(lb_eff.space)
            nl = Index(space, la.tags, dir=la.dir)
            noff_a = len(la.space)
        else:
            nl = Index(la.dim + lb.dim, la.tags)
            noff_a = 1
        new_links.append(nl)
        # on tensor b the link appears as-is, on tensor b+1 as its dag
        maps_a[b][la] = (nl, 0, 0)
        maps_b[b][lb] = (nl, la.dim, noff_a)
        maps_a[b + 1][la] = (nl.dag(), 0, 0)
        maps_b[b + 1][lb] = (nl.dag(), la.dim, noff_a)
    tensors = []
    for j in range(1, N + 1):
        A = _embed(psi[j], maps_a[j])
        B = _embed(phi[j], maps_b[j])
        tensors.append(A + B)
    out = type(psi)(tensors)
    out.truncate(_trunc(trunc, kw))
    return out


# -- overlaps -------------------------------------------------------------------------------


def _sim_links(psi: _Chain, conj: bool = False) -> list[ITensor]:
    """Tensors of ``psi`` (conjugated if ``conj``) with fresh link ids."""
    links = psi.linkinds()
    fresh = [l.sim() for l in links]
    out = []
    for j in range(1, len(psi) + 1):
        T = psi[j].dag() if conj else psi[j]
        old, new = [], []
        for b in (j - 1, j):
            if 1 <= b < len(psi):
                old.append(links[b - 1])
                new.append(fresh[b - 1])
        out.append(T.replaceinds(old, new))
    return out


def _dag_sim_links(psi: _Chain) -> list[ITensor]:
    """Conjugated tensors of ``psi`` with fresh link ids (so they never meet ``psi``'s links)."""
    return _sim_links(psi, conj=True)


def inner(psi: MPS, phi: MPS):
    """``<psi|phi>`` (``psi`` conjugated) by zipper contraction."""
    if len(psi) != len(phi):
        raise ValueError("length mismatch")
    for j in range(1, len(psi) + 1):
        if psi.siteind(j) != phi.siteind(j):
            raise ValueError(f"site index mismatch at site {j}")
    bra = _dag_sim_links(psi)
    E = None
    for j in range(1, len(psi) + 1):
        E = phi[j] if E is None else E * phi[j]
        E = E * bra[j - 1]
    return E.scalar()


def norm(psi: MPS) -> float:
    return math.sqrt(abs(inner(psi, psi)))


def inner_mpo(psi: MPS, H: MPO, phi: MPS):
    """``<psi|H|phi>``."""
    if not (len(psi) == len(H) == len(phi)):
        raise ValueError("length mismatch")
    bra = _dag_sim_links(psi)
    E = None
    for j in range(1, len(psi) + 1):
        s = psi.siteind(j)
        b = bra[j - 1].prime(s.dag())
        E = phi[j] if E is None else E * phi[j]
        E = E * H[j]
        E = E * b
    return E.scalar()


def expect(psi: MPS, opname: str, sites: Sequence[int] | None = None) -> list[float]:
    """``<psi|O_j|psi> / <psi|psi>`` for each site ``j``."""
    psi = psi.copy()
    N = len(psi)
    sites = range(1, N + 1) if sites is None else sites
    out = []
    for j in sites:
        psi.orthogonalize(j)
        A = psi[j]
        s = psi.siteind(j)
        O = site_op(opname, s)
        Ad = A.dag()
        num = ((Ad.prime(s.dag()) * O) * A).scalar()
        den = (Ad * A).scalar()
        out.append(float(np.real(num / den)))
    return out


# -- operator application ------------------------------------------------------------------


def _fuse_links(tensors: list[ITensor], cls):
    """Left-to-right QR sweep merging the several indices shared by neighbours into one."""
    N = len(tensors)
    for j in range(1, N):
        A, B = tensors[j - 1], tensors[j]
        shared = commoninds(A, B)
        rows = [i for i in A.inds if i not in shared]
        Q, R = qr(A, rows, tags=_link_tags(j))
        tensors[j - 1] = Q
        tensors[j] = R * B
    out = cls(tensors)
    out.llim, out.rlim = N - 1, N + 1
    return out


def apply(W: MPO, psi: MPS, method: str = "densitymatrix", trunc: TruncationParams | None = None,
          **kw) -> MPS:
    """Approximate ``W|psi>``.

    ``method="naive"`` contracts site by site (link dims multiply) and then
    truncates; ``method="densitymatrix"`` builds reduced density matrices of
    the product from the right and keeps their dominant eigenvectors.
    """
    trunc = _trunc(trunc, kw)
    N = len(psi)
    if len(W) != N:
        raise ValueError("length mismatch")
    sites = psi.siteinds()
    wsites = W.siteinds()
    if any(a != b for a, b in zip(sites, wsites)):
        raise ValueError("MPO and MPS site indices differ")
    X = []
    for j in range(1, N + 1):
        s = sites[j - 1]
        X.append((W[j] * psi[j]).noprime(s.prime()))
    if method == "naive":
        out = _fuse_links(X, MPS)
        out.truncate(trunc)
        return out
    if method != "densitymatrix":
        raise ValueError(f"unknown method {method!r}")
    if N == 1:
        return MPS(X)

    def links_of(j):
        return [i for i in X[j - 1].inds if i != sites[j - 1]]

    E = [None] * (N + 1)
    for j in range(1, N):
        Xd = X[j - 1].dag().prime(*links_of(j))
        E[j] = X[j - 1] * Xd if j == 1 else (E[j - 1] * X[j - 1]) * Xd
    new = [None] * (N + 1)
    O = None
    for j in range(N, 1, -1):
        Y = X[j - 1] if O is None else X[j - 1] * O
        rho = (E[j - 1] * Y) * Y.dag().prime()
        rows = [sites[j - 1]]
        if O is not None:
            rows.append(commonind(O, new[j + 1]))
        U, _, _ = eigen_hermitian(rho, rows, trunc, tags=_link_tags(j - 1))
        new[j] = U
        O = Y * U.dag()
    new[1] = X[0] * O
    out = MPS(new[1:])
    out.llim, out.rlim = 0, 2
    return out


def contract_mpo(R: MPO, W: MPO, trunc: TruncationParams | None = None, **kw) -> MPO:
    """MPO for the operator product ``R W`` (``W`` acts first)."""
    trunc = _trunc(trunc, kw)
    N = len(W)
    if len(R) != N:
        raise ValueError("length mismatch")
    Rs = _sim_links(R)
    X = []
    for j in range(1, N + 1):
        Rp = Rs[j - 1].prime(tags="Site")
        T = Rp * W[j]
        X.append(T.mapprime(2, 1, tags="Site"))
    out = _fuse_links(X, MPO)
    out.truncate(trunc)
    return out
