"""Local Hilbert-space definitions looked up through index tags.

A site type is registered under a tag such as ``"S=1/2"``.  Any index
carrying that tag can then produce named operators (``op("Sz", s)``) and
basis states (``state("Up", s)``).  Spin ``Sz`` quantum numbers are stored
doubled so they stay integers: an up spin-1/2 carries ``QN("Sz", 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .index import Index
from .qn import QN
from .tensor import ITensor, TensorError, to_blocksparse

__all__ = [
    "SiteDef",
    "SiteTypeError",
    "op",
    "op_matrix",
    "register_sitetype",
    "siteinds",
    "sitetype_of",
    "spin_sitedef",
    "state",
]


class SiteTypeError(KeyError):
    """Unknown site type, operator or state name."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


@dataclass
class SiteDef:
    """Definition of one local Hilbert space.

    ``ops`` maps operator names to ``dim x dim`` matrices where entry ``[r, c]``
    is the element between output state ``r`` and input state ``c``.
    ``states`` maps names to 0-based basis ordinals.  ``qns`` lists one QN per
    basis state; consecutive equal QNs are merged into one subspace.
    """

    tag: str
    dim: int
    ops: dict[str, np.ndarray] = field(default_factory=dict)
    states: dict[str, int] = field(default_factory=dict)
    qns: list[QN] | None = None

    def __post_init__(self):
        self.ops = {k: np.asarray(v) for k, v in self.ops.items()}
        for name, m in self.ops.items():
            if m.shape != (self.dim, self.dim):
                raise ValueError(f"operator {name!r} of site type {self.tag!r} has shape "
                                 f"{m.shape}, expected {(self.dim, self.dim)}")
        for name, k in self.states.items():
            if not 0 <= k < self.dim:
                raise ValueError(f"state {name!r} ordinal {k} out of range")
        if self.qns is not None and len(self.qns) != self.dim:
            raise ValueError("need one QN per basis state")
        if "Id" not in self.ops:
            self.ops["Id"] = np.eye(self.dim)

    def space(self) -> list[tuple[QN, int]]:
        out: list[tuple[QN, int]] = []
        for q in self.qns:
            if out and out[-1][0] == q:
                out[-1] = (q, out[-1][1] + 1)
            else:
                out.append((q, 1))
        return out


_registry: dict[str, SiteDef] = {}


def register_sitetype(sdef: SiteDef, *, overwrite: bool = False) -> None:
    if sdef.tag in _registry and not overwrite:
        raise ValueError(f"site type {sdef.tag!r} already registered")
    _registry[sdef.tag] = sdef


def sitetype_of(s: Index) -> SiteDef:
    found = [_registry[t] for t in s.tags if t in _registry]
    if not found:
        raise SiteTypeError(f"no registered site type among tags {tuple(s.tags)}")
    if len(found) > 1:
        raise SiteTypeError(f"ambiguous site types {[f.tag for f in found]} on one index")
    return found[0]


def siteinds(tag: str, n: int, *, conserve_qns: bool = False) -> list[Index]:
    """``n`` fresh site indices tagged ``tag,Site,n=<j>`` (``j`` from 1)."""
    if tag not in _registry:
        raise SiteTypeError(f"unknown site type {tag!r}")
    sdef = _registry[tag]
    out = []
    for j in range(1, n + 1):
        tags = f"{tag},Site,n={j}"
        if conserve_qns:
            if sdef.qns is None:
                raise ValueError(f"site type {tag!r} defines no quantum numbers")
            out.append(Index(sdef.space(), tags))
        else:
            out.append(Index(sdef.dim, tags))
    return out


def op_matrix(name: str, s: Index) -> np.ndarray:
    sdef = sitetype_of(s)
    try:
        return sdef.ops[name]
    except KeyError:
        raise SiteTypeError(f"operator {name!r} not defined for site type {sdef.tag!r}") from None


def op(name: str, s: Index) -> ITensor:
    """Operator ``name`` as an ITensor with indices ``(s', dag(s))``."""
    mat = op_matrix(name, s)
    sp, sd = s.prime(), s.dag()
    T = ITensor.from_array(mat, sp, sd)
    if s.has_qns:
        try:
            T = to_blocksparse(T)
        except TensorError as err:
            raise TensorError(f"operator {name!r} has no definite flux: {err}") from None
    return T


def state(name: str, s: Index) -> ITensor:
    """Basis vector ``name`` on ``s``."""
    sdef = sitetype_of(s)
    if name not in sdef.states:
        raise SiteTypeError(f"state {name!r} not defined for site type {sdef.tag!r}")
    v = np.zeros(s.dim)
    v[sdef.states[name]] = 1.0
    T = ITensor.from_array(v, s)
    return to_blocksparse(T) if s.has_qns else T


# -- built-in types -------------------------------------------------------------------


def spin_sitedef(tag: str, twice_s: int, states: Mapping[str, int] | None = None) -> SiteDef:
    """Spin-S site with basis ordered from ``Sz = +S`` down to ``-S``."""
    d = twice_s + 1
    m = np.array([twice_s / 2 - k for k in range(d)])
    sp = np.zeros((d, d))
    for k in range(1, d):
        # <m+1| S+ |m> = sqrt(S(S+1) - m(m+1))
        s = twice_s / 2
        sp[k - 1, k] = np.sqrt(s * (s + 1) - m[k] * (m[k] + 1))
    ops = {
        "Sz": np.diag(m),
        "S+": sp,
        "S-": sp.T.copy(),
        "Sx": (sp + sp.T) / 2,
        "iSy": (sp - sp.T) / 2,
        "Sy": (sp - sp.T) / 2j,
    }
    qns = [QN("Sz", int(round(2 * x))) for x in m]
    return SiteDef(tag, d, ops, dict(states or {}), qns)


def _builtin() -> None:
    register_sitetype(spin_sitedef("S=1/2", 1, {"Up": 0, "Dn": 1, "Z+": 0, "Z-": 1}))
    register_sitetype(spin_sitedef("S=3/2", 3, {"3/2": 0, "1/2": 1, "-1/2": 2, "-3/2": 3}))
    a = np.array([[0.0, 1.0], [0.0, 0.0]])
    register_sitetype(SiteDef(
        "Boson", 2,
        ops={"a": a, "adag": a.T.copy(), "n": np.diag([0.0, 1.0])},
        states={"0": 0, "1": 1, "Emp": 0, "Occ": 1},
        qns=[QN("N", 0), QN("N", 1)],
    ))


_builtin()
