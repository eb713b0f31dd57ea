"""Sums of local operator products and their compilation into MPOs.

An :class:`OpSum` collects terms ``coef * O1_{i1} O2_{i2} ...``.  :func:`to_mpo`
turns it into a compact MPO: for each bond the coefficient matrix linking the
operator strings left of the bond to those right of it is factorized with an
SVD (one block per left quantum number), and only the nonzero singular
directions become MPO channels.  Besides those, every bond has a ``start``
channel (identities so far) and a ``done`` channel (a full term already
placed).
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from numbers import Number
from typing import Sequence

import numpy as np

from .index import Index
from .mps import MPO
from .qn import QN
from .sitetypes import op_matrix
from .storage import Dense
from .tensor import ITensor, to_blocksparse

__all__ = ["OpSum", "OpSumError", "Term", "to_mpo"]

#: singular values below this fraction of the largest one in their block are dropped
SVD_CUTOFF = 1e-15


class OpSumError(ValueError):
    """Malformed term or an operator sum that cannot become an MPO."""


@dataclass(frozen=True)
class Term:
    coef: complex
    factors: tuple[tuple[str, int], ...]


def _parse(args) -> Term:
    args = list(args)
    coef: Number = 1.0
    if args and isinstance(args[0], Number) and not isinstance(args[0], bool):
        coef = args.pop(0)
    if not args or len(args) % 2:
        raise OpSumError("a term needs operator/site pairs after the optional coefficient")
    factors = []
    for name, site in zip(args[::2], args[1::2]):
        if not isinstance(name, str):
            raise OpSumError(f"operator name must be a string, got {name!r}")
        if isinstance(site, bool) or not isinstance(site, (int, np.integer)):
            raise OpSumError(f"site must be an integer, got {site!r}")
        factors.append((name, int(site)))
    return Term(coef, tuple(factors))


class OpSum:
    """Accumulates operator terms.

    >>> H = OpSum()
    >>> H += 0.5, "S+", 1, "S-", 2
    >>> H += "Sz", 1, "Sz", 2
    """

    def __init__(self, terms: Sequence[Term] = ()):
        self.terms: list[Term] = list(terms)

    def add(self, *args) -> OpSum:
        self.terms.append(_parse(args))
        return self

    def __iadd__(self, item):
        if isinstance(item, OpSum):
            self.terms.extend(item.terms)
        elif isinstance(item, tuple):
            self.terms.append(_parse(item))
        else:
            return NotImplemented
        return self

    def __add__(self, other: OpSum) -> OpSum:
        if not isinstance(other, OpSum):
            return NotImplemented
        return OpSum(self.terms + other.terms)

    def __mul__(self, c) -> OpSum:
        if not isinstance(c, Number):
            return NotImplemented
        return OpSum([Term(t.coef * c, t.factors) for t in self.terms])

    __rmul__ = __mul__

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __repr__(self) -> str:
        return f"OpSum({len(self.terms)} terms)"


# A local factor is the ordered tuple of operator names acting on one site.
# A term in canonical form is a tuple of (site, names) sorted by site.


def _canonical(opsum: OpSum, N: int) -> dict[tuple, complex]:
    terms: dict[tuple, complex] = defaultdict(complex)
    for t in opsum.terms:
        per_site: dict[int, list[str]] = defaultdict(list)
        for name, site in t.factors:
            if not 1 <= site <= N:
                raise OpSumError(f"site {site} out of range 1..{N}")
            per_site[site].append(name)
        key = tuple((j, tuple(per_site[j])) for j in sorted(per_site))
        terms[key] += t.coef
    return {k: v for k, v in terms.items() if v != 0}


class _Local:
    """Caches products of site operators and their QN flux."""

    def __init__(self, sites: Sequence[Index]):
        self.sites = sites
        self._mats: dict = {}
        self._flux: dict = {}

    def mat(self, j: int, names: tuple[str, ...]) -> np.ndarray:
        key = (j, names)
        if key not in self._mats:
            s = self.sites[j - 1]
            m = np.eye(s.dim)
            for name in names:
                m = m @ op_matrix(name, s)
            self._mats[key] = m
        return self._mats[key]

    def flux(self, j: int, names: tuple[str, ...]) -> QN:
        key = (j, names)
        if key not in self._flux:
            s = self.sites[j - 1]
            m = self.mat(j, names)
            found = None
            for r, c in zip(*np.nonzero(m)):
                q = s.qn(s.block_of(r)[0]) - s.qn(s.block_of(c)[0])
                if found is None:
                    found = q
                elif q != found:
                    raise OpSumError(f"operator {names} on site {j} has no definite flux")
            self._flux[key] = QN() if found is None else found
        return self._flux[key]

    def string_flux(self, string) -> QN:
        q = QN()
        for j, names in string:
            q = q + self.flux(j, names)
        return q


def _bond_factors(terms: dict, local: _Local, N: int, use_qns: bool):
    """For each bond, map left strings to channel vectors and right strings to coefficients.

    Returns per bond ``b`` (1..N-1) a tuple ``(U, R, chan_qns)`` where ``U[left]``
    and ``R[right]`` are vectors over the bond's channels (``start`` = 0 and
    ``done`` = 1 are included with zero entries).
    """
    out = [None] * (N + 1)
    for b in range(1, N):
        rows: dict = {}
        cols: dict = {}
        entries = []
        for key, c in terms.items():
            if key[0][0] <= b < key[-1][0]:
                left = tuple(f for f in key if f[0] <= b)
                right = tuple(f for f in key if f[0] > b)
                r = rows.setdefault(left, len(rows))
                k = cols.setdefault(right, len(cols))
                entries.append((r, k, c))
        lefts = list(rows)
        groups: dict[QN, list[int]] = defaultdict(list)
        for r, left in enumerate(lefts):
            groups[local.string_flux(left) if use_qns else QN()].append(r)
        M = np.zeros((len(rows), len(cols)), dtype=complex)
        for r, k, c in entries:
            M[r, k] += c
        U: dict = {}
        R: dict = {right: [] for right in cols}
        chan_qns = [QN(), None]  # done QN filled in by caller
        blocks = []
        for q in sorted(groups):
            idx = groups[q]
            u, s, vh = np.linalg.svd(M[idx], full_matrices=False)
            keep = int(np.sum(s > SVD_CUTOFF * s[0])) if s.size and s[0] > 0 else 0
            blocks.append((q, idx, u[:, :keep], (u[:, :keep].conj().T @ M[idx])))
        chi = 2 + sum(blk[2].shape[1] for blk in blocks)
        off = 2
        for q, idx, u, rm in blocks:
            n = u.shape[1]
            for a, r in enumerate(idx):
                v = np.zeros(chi, dtype=complex)
                v[off:off + n] = u[a]
                U[lefts[r]] = v
            for right, k in cols.items():
                R[right].append((off, rm[:, k]))
            chan_qns.extend([q] * n)
            off += n
        Rv = {}
        for right, parts in R.items():
            v = np.zeros(chi, dtype=complex)
            for o, vals in parts:
                v[o:o + len(vals)] = vals
            Rv[right] = v
        out[b] = (U, Rv, chan_qns)
    return out


def to_mpo(opsum: OpSum, sites: Sequence[Index]) -> MPO:
    """Compile ``opsum`` into an MPO over ``sites``.

    Repeated terms are summed first.  With quantum-number sites every term
    must carry the same total flux.
    """
    N = len(sites)
    terms = _canonical(opsum, N)
    if not terms:
        raise OpSumError("operator sum has no nonzero terms")
    local = _Local(sites)
    use_qns = sites[0].has_qns
    total = QN()
    if use_qns:
        fluxes = {local.string_flux(k) for k in terms}
        if len(fluxes) > 1:
            raise OpSumError(f"terms carry different total flux: {sorted(fluxes)}")
        total = fluxes.pop()
    bonds = _bond_factors(terms, local, N, use_qns)
    for b in range(1, N):
        bonds[b][2][1] = total

    complex_ = any(np.iscomplexobj(v) and np.imag(v) != 0 for v in terms.values())
    complex_ = complex_ or any(np.iscomplexobj(local.mat(j, n)) for k in terms for j, n in k)

    def chi(b):
        return 1 if b in (0, N) else len(bonds[b][2])

    def start(b):
        return 0 if b < N else None

    def done(b):
        if b == 0:
            return None
        return 0 if b == N else 1

    single = defaultdict(complex)   # (site, names) -> coefficient
    for key, c in terms.items():
        if len(key) == 1:
            single[key[0]] += c
    arrays = []
    for j in range(1, N + 1):
        d = sites[j - 1].dim
        W = np.zeros((chi(j - 1), d, d, chi(j)), dtype=complex)
        eye = np.eye(d)
        if start(j - 1) is not None and start(j) is not None:
            W[start(j - 1), :, :, start(j)] += eye
        if done(j - 1) is not None and done(j) is not None:
            W[done(j - 1), :, :, done(j)] += eye
        for (site, names), c in single.items():
            if site == j:
                W[start(j - 1), :, :, done(j)] += c * local.mat(j, names)
        if j < N:
            U_j = bonds[j][0]
            for left, vec in U_j.items():
                here = [f for f in left if f[0] == j]
                m = local.mat(j, here[0][1]) if here else eye
                if left[0][0] == j:
                    W[start(j - 1)] += np.einsum("rc,k->rck", m, vec)
                else:
                    prev = tuple(f for f in left if f[0] < j)
                    vl = bonds[j - 1][0][prev]
                    W += np.einsum("a,rc,k->arck", vl.conj(), m, vec)
        if j > 1:
            R_prev = bonds[j - 1][1]
            for right, vec in R_prev.items():
                if len(right) == 1 and right[0][0] == j:
                    m = local.mat(j, right[0][1])
                    W[:, :, :, done(j)] += np.einsum("a,rc->arc", vec, m)
        arrays.append(W if complex_ else W.real.copy())

    links = []
    perms = []
    for b in range(1, N):
        qns = bonds[b][2]
        if use_qns:
            order = sorted(range(len(qns)), key=lambda k: qns[k])
            space = []
            for k in order:
                if space and space[-1][0] == qns[k]:
                    space[-1] = (qns[k], space[-1][1] + 1)
                else:
                    space.append((qns[k], 1))
            links.append(Index(space, f"Link,l={b}"))
            perms.append(order)
        else:
            links.append(Index(len(qns), f"Link,l={b}"))
            perms.append(list(range(len(qns))))

    tensors = []
    for j in range(1, N + 1):
        W = arrays[j - 1]
        s = sites[j - 1]
        if j > 1:
            W = W[perms[j - 2]]
        if j < N:
            W = W[..., perms[j - 1]]
        inds = [s.prime(), s.dag()]
        if j == 1:
            W = W[0]
        else:
            inds.insert(0, links[j - 2])
        if j == N:
            W = W[..., 0]
        else:
            inds.append(links[j - 1].dag())
        T = ITensor(*inds, storage=Dense(np.ascontiguousarray(W)))
        tensors.append(to_blocksparse(T) if use_qns else T)
    return MPO(tensors)
