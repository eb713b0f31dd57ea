"""Two-site DMRG.

The effective Hamiltonian on bond ``b`` is applied without ever being formed:
cached left and right environments are contracted with the two-site tensor
and the two MPO tensors of the window.  Several MPOs are handled by summing
their projections; previously found states enter as a penalty
``weight * sum_i |v_i><v_i|``.
"""

from __future__ import annotations

import math
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .decomp import TruncationParams, factorize
from .mps import MPO, MPS, _dag_sim_links, inner, inner_mpo
from .tensor import ITensor

__all__ = [
    "EnergyObserver",
    "Observer",
    "ProjMPO",
    "ProjMPOSum",
    "ProjMPS",
    "Snapshot",
    "Sweeps",
    "dmrg",
    "lanczos_ground",
]


class DMRGError(RuntimeError):
    pass


# -- sweep schedule ----------------------------------------------------------------------


def _schedule(values, name, *, allow_zero=False):
    if isinstance(values, (int, float)):
        values = [values]
    values = list(values)
    if not values:
        raise ValueError(f"{name} schedule must be nonempty")
    for v in values:
        if v is None:
            continue
        if v < 0 or (v == 0 and not allow_zero):
            raise ValueError(f"{name} values must be positive, got {v}")
    return values


@dataclass
class Sweeps:
    """Per-sweep truncation and eigensolver settings.

    Schedules are lists; sweep ``n`` (from 1) uses entry ``n-1`` and the last
    entry repeats.  ``maxdim`` may be ``None`` (unbounded).

    >>> sw = Sweeps(5, maxdim=[10, 20, 100, 100, 200], cutoff=1e-11)
    >>> sw.maxdim_at(5), sw.maxdim_at(9)
    (200, 200)
    """

    nsweep: int
    maxdim: list = field(default_factory=lambda: [None])
    cutoff: list = field(default_factory=lambda: [0.0])
    mindim: list = field(default_factory=lambda: [1])
    krylovdim: int = 6
    maxrestarts: int = 3
    maxmatvec: int = 20
    eigtol: float = 1e-14

    def __post_init__(self):
        if self.nsweep < 1:
            raise ValueError("nsweep must be >= 1")
        self.maxdim = _schedule(self.maxdim, "maxdim")
        self.cutoff = _schedule(self.cutoff, "cutoff", allow_zero=True)
        self.mindim = _schedule(self.mindim, "mindim")
        if self.krylovdim < 1 or self.maxrestarts < 1 or self.maxmatvec < 1:
            raise ValueError("eigensolver caps must be positive")

    @staticmethod
    def _at(values, n):
        return values[min(n, len(values)) - 1]

    def maxdim_at(self, n: int):
        return self._at(self.maxdim, n)

    def cutoff_at(self, n: int) -> float:
        return self._at(self.cutoff, n)

    def mindim_at(self, n: int) -> int:
        return self._at(self.mindim, n)

    def trunc_at(self, n: int) -> TruncationParams:
        return TruncationParams(cutoff=self.cutoff_at(n), maxdim=self.maxdim_at(n),
                                mindim=self.mindim_at(n))


# -- local eigensolver --------------------------------------------------------------------


def _dot(a: ITensor, b: ITensor) -> complex:
    return (a.dag() * b).scalar()


def lanczos_ground(apply: Callable[[ITensor], ITensor], x0: ITensor, *, krylovdim: int = 6,
                   maxrestarts: int = 3, maxmatvec: int = 20, tol: float = 1e-14):
    """Lowest eigenpair of a Hermitian map by restarted Lanczos.

    Each restart builds a Krylov basis (fully reorthogonalized) from the
    current Ritz vector.  Stops when the Ritz residual drops below
    ``tol * max(1, |theta|)`` or the matvec budget is spent.  Returns
    ``(theta, x)`` with ``x`` normalized.
    """
    nrm = x0.norm()
    if nrm == 0:
        raise DMRGError("initial vector is zero")
    x = x0 / nrm
    theta = None
    used = 0
    for _ in range(maxrestarts):
        V = [x]
        alpha, beta = [], []
        resid = 0.0
        while True:
            w = apply(V[-1])
            used += 1
            a = float(np.real(_dot(V[-1], w)))
            alpha.append(a)
            w = w - V[-1] * a
            if len(V) > 1:
                w = w - V[-2] * beta[-1]
            for v in V:
                w = w - v * _dot(v, w)
            b = w.norm()
            T = np.diag(alpha) + np.diag(beta, 1) + np.diag(beta, -1)
            evals, evecs = np.linalg.eigh(T)
            theta = evals[0]
            resid = abs(b * evecs[-1, 0])
            if (resid <= tol * max(1.0, abs(theta)) or b < 1e-300 or len(V) >= krylovdim
                    or used >= maxmatvec):
                break
            beta.append(b)
            V.append(w / b)
        y = evecs[:, 0]
        x = V[0] * y[0]
        for k in range(1, len(V)):
            x = x + V[k] * y[k]
        x = x / x.norm()
        if resid <= tol * max(1.0, abs(theta)) or used >= maxmatvec:
            break
    return float(theta), x


# -- projected operators -------------------------------------------------------------------


class _Envs:
    """Left/right environment cache around a two-site window.

    ``L[j]`` covers sites ``1..j`` and ``R[j]`` covers ``j..N``; ``None`` stands
    for the trivial boundary environment.  Entries with ``j <= lpos`` and
    ``j >= rpos`` are up to date.
    """

    def __init__(self, N: int):
        self.N = N
        self.L: dict[int, ITensor | None] = {0: None}
        self.R: dict[int, ITensor | None] = {N + 1: None}
        self.lpos = 0
        self.rpos = N + 1
        self.b = None
        self.counters = Counter()

    def _grow_left(self, E, psi, j):  # pragma: no cover - abstract
        raise NotImplementedError

    def _grow_right(self, E, psi, j):  # pragma: no cover - abstract
        raise NotImplementedError

    def position(self, psi: MPS, b: int) -> None:
        if not 1 <= b < self.N:
            raise DMRGError(f"bond {b} out of range 1..{self.N - 1}")
        if psi.llim < b - 1 or psi.rlim > b + 2:
            raise DMRGError(f"orthogonality center not inside window [{b}, {b + 1}]")
        if self.lpos > b - 1:
            self.lpos = b - 1
        while self.lpos < b - 1:
            j = self.lpos + 1
            self.L[j] = self._grow_left(self.L[j - 1], psi, j)
            self.counters["left"] += 1
            self.lpos = j
        if self.rpos < b + 2:
            self.rpos = b + 2
        while self.rpos > b + 2:
            j = self.rpos - 1
            self.R[j] = self._grow_right(self.R[j + 1], psi, j)
            self.counters["right"] += 1
            self.rpos = j
        self.b = b


class ProjMPO(_Envs):
    """``H`` projected onto the two-site window of an MPS."""

    def __init__(self, H: MPO):
        super().__init__(len(H))
        self.H = H

    def _grow_left(self, E, psi, j):
        A = psi[j]
        T = A if E is None else E * A
        return (T * self.H[j]) * A.dag().prime()

    def _grow_right(self, E, psi, j):
        A = psi[j]
        T = A if E is None else E * A
        return (T * self.H[j]) * A.dag().prime()

    def product(self, x: ITensor) -> ITensor:
        b = self.b
        L, R = self.L[b - 1], self.R[b + 2]
        y = x if L is None else L * x
        y = y * self.H[b]
        y = y * self.H[b + 1]
        if R is not None:
            y = y * R
        return y.noprime()


class ProjMPS(_Envs):
    """Penalty ``weight * |v><v|`` restricted to the window."""

    def __init__(self, v: MPS, weight: float):
        super().__init__(len(v))
        self.v = v
        self.weight = weight
        self._vd = _dag_sim_links(v)

    def _grow_left(self, E, psi, j):
        T = psi[j] if E is None else E * psi[j]
        return T * self._vd[j - 1]

    _grow_right = _grow_left

    def local(self) -> ITensor:
        """The window-projected ``<v|`` (indices dual to the two-site tensor)."""
        b = self.b
        L, R = self.L[b - 1], self.R[b + 2]
        y = self._vd[b - 1] if L is None else L * self._vd[b - 1]
        y = y * self._vd[b]
        return y if R is None else y * R

    def product(self, x: ITensor) -> ITensor:
        y = self.local()
        return y.dag() * (self.weight * (y * x).scalar())


class ProjMPOSum:
    """Sum of several projected MPOs plus optional state penalties."""

    def __init__(self, Hs: Sequence[MPO], ortho: Sequence[MPS] = (), weight: float = 10.0):
        self.terms = [ProjMPO(H) for H in Hs]
        self.penalties = [ProjMPS(v, weight) for v in ortho]

    def position(self, psi: MPS, b: int) -> None:
        for P in self.terms + self.penalties:
            P.position(psi, b)

    def product(self, x: ITensor) -> ITensor:
        y = self.terms[0].product(x)
        for P in self.terms[1:] + self.penalties:
            y = y + P.product(x)
        return y


# -- observer --------------------------------------------------------------------------


@dataclass(frozen=True)
class Snapshot:
    sweep: int
    bond: int
    direction: str  # "right" or "left"
    energy: float
    psi: MPS


class Observer:
    """Base observer: ``measure`` runs after every bond update, ``checkdone`` after every sweep."""

    def measure(self, snap: Snapshot) -> None:
        pass

    def checkdone(self, snap: Snapshot) -> bool:
        return False


class EnergyObserver(Observer):
    """Records sweep energies; stops once a sweep changes the energy by less than ``etol``."""

    def __init__(self, etol: float = 0.0):
        self.etol = etol
        self.energies: list[float] = []

    def checkdone(self, snap: Snapshot) -> bool:
        self.energies.append(snap.energy)
        if self.etol > 0 and len(self.energies) > 1:
            return abs(self.energies[-1] - self.energies[-2]) < self.etol
        return False


# -- driver ------------------------------------------------------------------------------


def _energy(Hs: Sequence[MPO], psi: MPS) -> float:
    num = sum(inner_mpo(psi, H, psi) for H in Hs)
    return float(np.real(num / inner(psi, psi)))


def dmrg(H: MPO | Sequence[MPO], psi0: MPS, sweeps: Sweeps, *, observer: Observer | None = None,
         ortho_states: Sequence[MPS] = (), weight: float = 10.0, outputlevel: int = 1,
         log: Callable[[str], None] = print, timing: bool = True):
    """Minimize ``<psi|H|psi>`` by two-site sweeps starting from ``psi0``.

    ``H`` may be a list of MPOs, treated as their sum.  States in
    ``ortho_states`` are penalized with ``weight``.  Returns
    ``(energy, psi)`` where energy is the expectation value of the (summed)
    Hamiltonian in the normalized final state.
    """
    Hs = [H] if isinstance(H, MPO) else list(H)
    if not Hs:
        raise ValueError("need at least one MPO")
    N = len(psi0)
    if N < 2:
        raise ValueError("dmrg needs at least two sites")
    sites = psi0.siteinds()
    for W in Hs:
        if len(W) != N:
            raise ValueError("MPO and MPS lengths differ")
        if W.siteinds() != sites:
            raise ValueError("MPO and MPS site indices differ")
    for v in ortho_states:
        if len(v) != N or v.siteinds() != sites:
            raise ValueError("orthogonal state is not compatible with psi0")

    psi = psi0.copy()
    psi.orthogonalize(1)
    psi.normalize()
    P = ProjMPOSum(Hs, ortho_states, weight)
    energy = math.nan
    for n in range(1, sweeps.nsweep + 1):
        t0 = time.perf_counter()
        trunc = sweeps.trunc_at(n)
        for direction, bonds in (("right", range(1, N)), ("left", range(N - 1, 0, -1))):
            for b in bonds:
                P.position(psi, b)
                phi = psi[b] * psi[b + 1]
                energy, phi = lanczos_ground(
                    P.product, phi, krylovdim=sweeps.krylovdim, maxrestarts=sweeps.maxrestarts,
                    maxmatvec=sweeps.maxmatvec, tol=sweeps.eigtol)
                link = psi.linkind(b)
                rows = [i for i in psi[b].inds if i != link]
                absorb = "right" if direction == "right" else "left"
                L, R, _ = factorize(phi, rows, trunc, absorb=absorb, tags=str(link.tags))
                psi._set(b, L)
                psi._set(b + 1, R)
                if direction == "right":
                    psi.llim, psi.rlim = b, b + 2
                else:
                    psi.llim, psi.rlim = b - 1, b + 1
                if observer is not None:
                    observer.measure(Snapshot(n, b, direction, energy, psi))
        elapsed = time.perf_counter() - t0 if timing else 0.0
        if outputlevel > 0:
            log(f"After sweep {n} energy={energy:.12f} maxlinkdim={psi.maxlinkdim()} "
                f"time={elapsed:.3f}")
        if observer is not None and observer.checkdone(Snapshot(n, 0, "left", energy, psi)):
            break
    psi.normalize()
    return _energy(Hs, psi), psi
