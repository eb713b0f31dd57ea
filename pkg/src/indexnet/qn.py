"""Named abelian quantum numbers.

A :class:`QN` is a small immutable collection of named integer charges.  Each
charge adds either as a plain integer (modulus 1) or modulo ``N`` (modulus
``N > 1``).  Names that are absent behave as value 0, so ``QN("Sz", 0)`` and
``QN()`` compare equal.
"""

from __future__ import annotations

from functools import total_ordering
from typing import Iterable

MAX_ENTRIES = 4
MAX_NAME_LENGTH = 8

__all__ = ["QN", "QNError"]


class QNError(ValueError):
    """Raised for malformed quantum numbers or incompatible arithmetic."""


def _check_entry(name: str, value: int, modulus: int = 1) -> tuple[str, int, int]:
    if not isinstance(name, str):
        raise QNError(f"QN name must be a string, got {name!r}")
    if len(name) > MAX_NAME_LENGTH:
        raise QNError(f"QN name {name!r} longer than {MAX_NAME_LENGTH} characters")
    modulus = int(modulus)
    if modulus < 1:
        raise QNError(f"QN modulus must be >= 1, got {modulus}")
    value = int(value)
    if modulus > 1:
        value %= modulus
    return name, value, modulus


@total_ordering
class QN:
    """Quantum number made of up to four ``(name, value, modulus)`` entries.

    Accepted forms::

        QN()                      # empty, the additive identity
        QN(2)                     # unnamed charge (name "")
        QN("Sz", 1)
        QN("P", 1, 2)             # Z_2 charge
        QN(("N", 1), ("Sz", -1))  # several charges, any order
    """

    __slots__ = ("_entries", "_hash")

    def __init__(self, *args):
        if not args:
            raw: list[tuple] = []
        elif isinstance(args[0], tuple):
            raw = list(args)
        elif isinstance(args[0], str):
            raw = [tuple(args)]
        else:
            raw = [("",) + tuple(args)]
        entries = []
        for item in raw:
            if not 2 <= len(item) <= 3:
                raise QNError(f"QN entry must be (name, value[, modulus]), got {item!r}")
            entries.append(_check_entry(*item))
        self._entries = self._normalize(entries)
        self._hash = hash(self._key())

    @classmethod
    def _from_entries(cls, entries: Iterable[tuple[str, int, int]]) -> QN:
        q = cls.__new__(cls)
        q._entries = cls._normalize(list(entries))
        q._hash = hash(q._key())
        return q

    @staticmethod
    def _normalize(entries: list[tuple[str, int, int]]) -> tuple[tuple[str, int, int], ...]:
        entries.sort(key=lambda e: e[0])
        for a, b in zip(entries, entries[1:]):
            if a[0] == b[0]:
                raise QNError(f"duplicate QN name {a[0]!r}")
        if len(entries) > MAX_ENTRIES:
            raise QNError(f"QN holds at most {MAX_ENTRIES} named charges")
        return tuple(entries)

    # -- accessors ---------------------------------------------------------

    @property
    def entries(self) -> tuple[tuple[str, int, int], ...]:
        """Sorted ``(name, value, modulus)`` triples, as stored."""
        return self._entries

    def val(self, name: str) -> int:
        for n, v, _ in self._entries:
            if n == name:
                return v
        return 0

    def modulus(self, name: str) -> int:
        for n, _, m in self._entries:
            if n == name:
                return m
        return 1

    def is_zero(self) -> bool:
        return all(v == 0 for _, v, _ in self._entries)

    def _key(self) -> tuple[tuple[str, int], ...]:
        return tuple((n, v) for n, v, _ in self._entries if v != 0)

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other: QN) -> QN:
        if not isinstance(other, QN):
            return NotImplemented
        merged: dict[str, list[int]] = {n: [v, m] for n, v, m in self._entries}
        for n, v, m in other._entries:
            if n not in merged:
                merged[n] = [v, m]
                continue
            v0, m0 = merged[n]
            if m0 != m:
                # a zero-valued plain entry is the same as an absent one
                if m0 == 1 and v0 == 0:
                    m0 = m
                elif not (m == 1 and v == 0):
                    raise QNError(f"conflicting moduli {m0} and {m} for QN name {n!r}")
            merged[n] = [v0 + v, m0]
        return QN._from_entries(
            (n, v % m if m > 1 else v, m) for n, (v, m) in merged.items()
        )

    def __neg__(self) -> QN:
        return QN._from_entries(
            (n, (m - v) % m if m > 1 else -v, m) for n, v, m in self._entries
        )

    def __sub__(self, other: QN) -> QN:
        if not isinstance(other, QN):
            return NotImplemented
        return self + (-other)

    def __mul__(self, k: int) -> QN:
        """Integer multiple; ``-1 * q`` is ``-q``."""
        if not isinstance(k, int):
            return NotImplemented
        out = QN()
        base = self if k >= 0 else -self
        for _ in range(abs(k)):
            out = out + base
        return out

    __rmul__ = __mul__

    # -- comparison --------------------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, QN):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self) -> int:
        return self._hash

    def __lt__(self, other: QN) -> bool:
        if not isinstance(other, QN):
            return NotImplemented
        names = sorted({n for n, _, _ in self._entries} | {n for n, _, _ in other._entries})
        for n in names:
            a, b = self.val(n), other.val(n)
            if a != b:
                return a < b
        return False

    def __repr__(self) -> str:
        if not self._entries:
            return "QN()"
        parts = []
        for n, v, m in self._entries:
            parts.append(f"({n!r},{v})" if m == 1 else f"({n!r},{v},{m})")
        if len(parts) == 1:
            return "QN" + parts[0]
        return "QN(" + ",".join(parts) + ")"
