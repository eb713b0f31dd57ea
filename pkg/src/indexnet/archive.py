"""Versioned binary archive for indices, tensors, MPS/MPO and run metadata.

File layout::

    8 bytes   magic  b"IDXNETAR"
    8 bytes   little-endian u64 length of the JSON header
    header    UTF-8 JSON: {"version", "root", "arrays"}
    payload   concatenated little-endian array buffers

``root`` is a tree of plain JSON values and typed records
(``{"@type": "Index", ...}``).  Numeric arrays are stored out of line and
referenced by position in ``arrays`` so floating-point data round-trips
bit-exactly.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .index import Arrow, Index
from .mps import MPO, MPS
from .qn import QN
from .storage import BlockSparse, Combiner, Dense, Diag, DiagUniform
from .tensor import ITensor

__all__ = ["ArchiveError", "ArchiveVersionError", "FORMAT_VERSION", "dumps", "loads",
           "read", "write"]

MAGIC = b"IDXNETAR"
FORMAT_VERSION = 1


class ArchiveError(IOError):
    """Unreadable or malformed archive."""


class ArchiveVersionError(ArchiveError):
    pass


class _Writer:
    def __init__(self):
        self.arrays: list[np.ndarray] = []

    def array(self, a) -> dict:
        a = np.asarray(a)
        self.arrays.append(a.astype(a.dtype.newbyteorder("<"), order="C"))
        return {"@array": len(self.arrays) - 1}

    def scalar(self, x):
        if isinstance(x, (complex, np.complexfloating)):
            return {"@type": "complex", "re": float(x.real), "im": float(x.imag)}
        if isinstance(x, np.floating):
            return float(x)
        if isinstance(x, np.integer):
            return int(x)
        return x

    def encode(self, x):
        if x is None or isinstance(x, (bool, str)):
            return x
        if isinstance(x, (int, float, complex, np.number)):
            return self.scalar(x)
        if isinstance(x, np.ndarray):
            return self.array(x)
        if isinstance(x, QN):
            return {"@type": "QN", "entries": [list(e) for e in x.entries]}
        if isinstance(x, Index):
            rec = {"@type": "Index", "id": str(x.id), "dim": x.dim, "tags": list(x.tags),
                   "plev": x.plev, "dir": int(x.dir)}
            if x.has_qns:
                rec["space"] = [[self.encode(q), d] for q, d in x.space]
            return rec
        if isinstance(x, ITensor):
            return {"@type": "ITensor", "inds": [self.encode(i) for i in x.inds],
                    "storage": self.storage(x.storage)}
        if isinstance(x, (MPS, MPO)):
            return {"@type": type(x).__name__, "tensors": [self.encode(T) for T in x],
                    "llim": x.llim, "rlim": x.rlim}
        if isinstance(x, tuple):
            return {"@type": "tuple", "items": [self.encode(v) for v in x]}
        if isinstance(x, list):
            return [self.encode(v) for v in x]
        if isinstance(x, dict):
            if not all(isinstance(k, str) for k in x):
                raise TypeError("only dicts with string keys can be archived")
            if any(k.startswith("@") for k in x):
                return {"@type": "dict", "items": [[k, self.encode(v)] for k, v in x.items()]}
            return {k: self.encode(v) for k, v in x.items()}
        raise TypeError(f"cannot archive object of type {type(x).__name__}")

    def storage(self, s) -> dict:
        if isinstance(s, Dense):
            return {"kind": "Dense", "data": self.array(s.data)}
        if isinstance(s, Diag):
            return {"kind": "Diag", "values": self.array(s.values)}
        if isinstance(s, DiagUniform):
            return {"kind": "DiagUniform", "value": self.scalar(s.value)}
        if isinstance(s, Combiner):
            return {"kind": "Combiner"}
        if isinstance(s, BlockSparse):
            return {"kind": "BlockSparse",
                    "flux": None if s.flux is None else self.encode(s.flux),
                    "blocks": [[list(map(int, c)), self.array(b)] for c, b in s.blocks.items()]}
        raise TypeError(f"cannot archive storage {type(s).__name__}")


class _Reader:
    def __init__(self, arrays):
        self.arrays = arrays

    def decode(self, x):
        if isinstance(x, list):
            return [self.decode(v) for v in x]
        if not isinstance(x, dict):
            return x
        if "@array" in x:
            return self.arrays[x["@array"]]
        t = x.get("@type")
        if t is None:
            return {k: self.decode(v) for k, v in x.items()}
        if t == "complex":
            return complex(x["re"], x["im"])
        if t == "tuple":
            return tuple(self.decode(v) for v in x["items"])
        if t == "dict":
            return {k: self.decode(v) for k, v in x["items"]}
        if t == "QN":
            return QN._from_entries(tuple(e) for e in x["entries"])
        if t == "Index":
            space = x.get("space")
            if space is not None:
                space = [(self.decode(q), d) for q, d in space]
                return Index(space, x["tags"], dir=Arrow(x["dir"]), plev=x["plev"], id=int(x["id"]))
            return Index(x["dim"], x["tags"], plev=x["plev"], id=int(x["id"]))
        if t == "ITensor":
            inds = [self.decode(i) for i in x["inds"]]
            return ITensor._make(inds, self.storage(x["storage"]))
        if t in ("MPS", "MPO"):
            cls = MPS if t == "MPS" else MPO
            return cls([self.decode(T) for T in x["tensors"]], x["llim"], x["rlim"])
        raise ArchiveError(f"unknown record type {t!r}")

    def storage(self, s):
        kind = s["kind"]
        if kind == "Dense":
            return Dense(self.decode(s["data"]))
        if kind == "Diag":
            return Diag(self.decode(s["values"]))
        if kind == "DiagUniform":
            return DiagUniform(self.decode(s["value"]))
        if kind == "Combiner":
            return Combiner()
        if kind == "BlockSparse":
            flux = None if s["flux"] is None else self.decode(s["flux"])
            return BlockSparse({tuple(c): self.decode(b) for c, b in s["blocks"]}, flux)
        raise ArchiveError(f"unknown storage kind {kind!r}")


def dumps(obj) -> bytes:
    w = _Writer()
    root = w.encode(obj)
    table, offset = [], 0
    for a in w.arrays:
        table.append({"offset": offset, "nbytes": a.nbytes, "dtype": a.dtype.str,
                      "shape": list(a.shape)})
        offset += a.nbytes
    header = json.dumps({"version": FORMAT_VERSION, "root": root, "arrays": table},
                        separators=(",", ":")).encode()
    return b"".join([MAGIC, struct.pack("<Q", len(header)), header] + [a.tobytes() for a in w.arrays])


def loads(buf: bytes):
    if len(buf) < 16 or buf[:8] != MAGIC:
        raise ArchiveError("not an archive (bad magic bytes)")
    (hlen,) = struct.unpack("<Q", buf[8:16])
    if 16 + hlen > len(buf):
        raise ArchiveError("truncated archive header")
    try:
        header = json.loads(buf[16:16 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise ArchiveError(f"corrupt archive header: {err}") from None
    version = header.get("version")
    if version != FORMAT_VERSION:
        raise ArchiveVersionError(f"archive version {version} is not supported "
                                  f"(expected {FORMAT_VERSION})")
    base = 16 + hlen
    arrays = []
    for rec in header["arrays"]:
        start = base + rec["offset"]
        end = start + rec["nbytes"]
        if end > len(buf):
            raise ArchiveError("truncated archive payload")
        dt = np.dtype(rec["dtype"])
        a = np.frombuffer(buf[start:end], dtype=dt).reshape(tuple(rec["shape"]))
        arrays.append(a.astype(dt.newbyteorder("="), copy=True))
    try:
        return _Reader(arrays).decode(header["root"])
    except (KeyError, TypeError, ValueError, IndexError) as err:
        raise ArchiveError(f"corrupt archive record: {err}") from None


def write(obj, path) -> None:
    Path(path).write_bytes(dumps(obj))


def read(path):
    return loads(Path(path).read_bytes())
