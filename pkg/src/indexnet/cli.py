"""Command-line front end.

::

    python -m indexnet run config.json
    python -m indexnet inspect result.idx
    python -m indexnet expect result.idx --op Sz

Config (JSON)::

    {
      "model": "heisenberg",        # or "tfim" or "custom"
      "terms_file": "terms.txt",    # custom only: lines "coef op site [op site ...]"
      "N": 100,
      "site_type": "S=1/2",
      "conserve_qns": false,
      "initial_state": "neel",      # "neel", "random", or a list of state names
      "linkdim": 10,                # link dimension of the random start state
      "sweeps": {"nsweep": 5, "maxdim": [10, 20, 100, 100, 200], "cutoff": 1e-11},
      "seed": 1234,
      "excited_states": 0,
      "weight": 10.0,
      "J": 1.0, "h": 1.0,           # tfim couplings
      "timing": true,               # false prints time=0.000 for reproducible logs
      "output": "result.idx"
    }

The environment variable ``INDEXNET_SEED`` overrides ``seed``.
Exit codes: 2 bad config, 3 runtime failure, 4 file I/O failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import archive
from .dmrg import Sweeps, dmrg
from .index import seed_ids
from .mps import MPS, expect, random_mps
from .opsum import OpSum, to_mpo
from .sitetypes import siteinds, sitetype_of

EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_IO = 4
SEED_ENV = "INDEXNET_SEED"

_KNOWN_KEYS = {"model", "terms_file", "N", "site_type", "conserve_qns", "initial_state",
               "linkdim", "sweeps", "seed", "excited_states", "weight", "J", "h", "timing",
               "output"}


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    try:
        with open(path) as f:
            cfg = json.load(f)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    cfg = validate_config(cfg, base=Path(path).parent)
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            cfg["seed"] = int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return cfg


def validate_config(cfg: dict, base: Path = Path(".")) -> dict:
    unknown = set(cfg) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    out = {
        "model": cfg.get("model", "heisenberg"),
        "N": cfg.get("N"),
        "site_type": cfg.get("site_type", "S=1/2"),
        "conserve_qns": bool(cfg.get("conserve_qns", False)),
        "initial_state": cfg.get("initial_state", "neel"),
        "linkdim": cfg.get("linkdim", 10),
        "seed": cfg.get("seed", 0),
        "excited_states": cfg.get("excited_states", 0),
        "weight": cfg.get("weight", 10.0),
        "J": cfg.get("J", 1.0),
        "h": cfg.get("h", 1.0),
        "timing": bool(cfg.get("timing", True)),
        "output": cfg.get("output"),
        "terms_file": cfg.get("terms_file"),
    }
    if out["model"] not in ("heisenberg", "tfim", "custom"):
        raise ConfigError(f"unknown model {out['model']!r}")
    N = out["N"]
    if not isinstance(N, int) or isinstance(N, bool) or N < 2:
        raise ConfigError("N must be an integer >= 2")
    if out["model"] == "custom":
        if not out["terms_file"]:
            raise ConfigError("custom model needs terms_file")
        out["terms_file"] = str(base / out["terms_file"])
    if out["model"] == "tfim" and out["conserve_qns"]:
        raise ConfigError("tfim does not conserve Sz; set conserve_qns to false")
    for key in ("linkdim", "excited_states"):
        v = out[key]
        if not isinstance(v, int) or isinstance(v, bool) or v < (1 if key == "linkdim" else 0):
            raise ConfigError(f"invalid {key}: {v!r}")
    if not isinstance(out["seed"], int):
        raise ConfigError("seed must be an integer")
    init = out["initial_state"]
    if isinstance(init, list):
        if len(init) != N or not all(isinstance(s, str) for s in init):
            raise ConfigError("initial_state list needs one state name per site")
    elif init not in ("neel", "random"):
        raise ConfigError(f"unknown initial_state {init!r}")
    if out["conserve_qns"] and init == "random":
        raise ConfigError("random initial_state needs a state pattern with conserve_qns")
    sw = cfg.get("sweeps")
    if not isinstance(sw, dict):
        raise ConfigError("sweeps must be an object")
    try:
        out["sweeps"] = Sweeps(**sw)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"invalid sweeps: {err}") from None
    out["sweeps_raw"] = sw
    return out


def parse_terms(text: str) -> OpSum:
    """Parse lines ``coef op site [op site ...]``; ``#`` starts a comment."""
    H = OpSum()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            coef = complex(parts[0].replace("i", "j"))
            coef = coef.real if coef.imag == 0 else coef
            args = [coef]
            for name, site in zip(parts[1::2], parts[2::2]):
                args += [name, int(site)]
            if len(parts) < 3 or len(parts) % 2 == 0:
                raise ValueError("expected operator/site pairs")
            H.add(*args)
        except ValueError as err:
            raise ConfigError(f"terms file line {lineno}: {err}") from None
    if not len(H):
        raise ConfigError("terms file has no terms")
    return H


def build_model(cfg: dict) -> OpSum:
    N = cfg["N"]
    H = OpSum()
    if cfg["model"] == "heisenberg":
        for j in range(1, N):
            H += 0.5, "S+", j, "S-", j + 1
            H += 0.5, "S-", j, "S+", j + 1
            H += "Sz", j, "Sz", j + 1
    elif cfg["model"] == "tfim":
        for j in range(1, N):
            H += -cfg["J"], "Sz", j, "Sz", j + 1
        for j in range(1, N + 1):
            H += -cfg["h"], "Sx", j
    else:
        try:
            text = Path(cfg["terms_file"]).read_text()
        except OSError as err:
            raise OSError(f"cannot read terms file: {err}") from err
        H = parse_terms(text)
    return H


def _neel(sites) -> list[str]:
    names = sorted(sitetype_of(sites[0]).states.items(), key=lambda kv: kv[1])
    up = names[0][0]
    dn = names[-1][0]
    return [up if j % 2 else dn for j in range(1, len(sites) + 1)]


def run(cfg: dict, out=None) -> dict:
    out = sys.stdout if out is None else out
    seed_ids(cfg["seed"])
    rng = np.random.default_rng(cfg["seed"])
    sites = siteinds(cfg["site_type"], cfg["N"], conserve_qns=cfg["conserve_qns"])
    H = to_mpo(build_model(cfg), sites)
    init = cfg["initial_state"]
    if init == "neel":
        init = _neel(sites)
    psi0 = random_mps(sites, cfg["linkdim"], state=None if init == "random" else init, rng=rng)
    log_lines: list[str] = []

    def log(line):
        log_lines.append(line)
        print(line, file=out, flush=True)

    energies, states = [], []
    for k in range(cfg["excited_states"] + 1):
        if k:
            log(f"Excited state {k}")
        energy, psi = dmrg(H, psi0, cfg["sweeps"], ortho_states=states, weight=cfg["weight"],
                           log=log, timing=cfg["timing"])
        energies.append(energy)
        states.append(psi)
        log(("G.S. energy" if k == 0 else f"Energy {k}") + f" = {energy:.12f}")
    result = {"energies": energies, "states": states, "log": log_lines}
    if cfg["output"]:
        meta = {k: v for k, v in cfg.items() if k not in ("sweeps",)}
        meta["sweeps"] = meta.pop("sweeps_raw")
        archive.write({"config": meta, "energies": energies, "log": log_lines,
                       "psi": states[0], "states": states, "H": H}, cfg["output"])
    return result


def _load_mps(path) -> MPS:
    obj = archive.read(path)
    if isinstance(obj, MPS):
        return obj
    if isinstance(obj, dict) and isinstance(obj.get("psi"), MPS):
        return obj["psi"]
    raise archive.ArchiveError("archive holds no MPS")


def inspect(path, out=None) -> None:
    out = sys.stdout if out is None else out
    obj = archive.read(path)

    def describe(x, indent=""):
        if isinstance(x, dict):
            for k, v in x.items():
                if isinstance(v, (dict, list)) and v and k != "log":
                    print(f"{indent}{k}:", file=out)
                    describe(v, indent + "  ")
                else:
                    print(f"{indent}{k}: {_short(v)}", file=out)
        elif isinstance(x, list):
            for k, v in enumerate(x):
                print(f"{indent}[{k}] {_short(v)}", file=out)
        else:
            print(f"{indent}{_short(x)}", file=out)

    describe(obj)


def _short(v) -> str:
    if isinstance(v, list) and v and isinstance(v[0], str):
        return f"<{len(v)} lines>"
    return repr(v)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="indexnet", description="Tensor network DMRG runner")
    sub = p.add_subparsers(dest="cmd", required=True)
    pr = sub.add_parser("run", help="run DMRG from a JSON config")
    pr.add_argument("config")
    pi = sub.add_parser("inspect", help="summarize an archive")
    pi.add_argument("archive")
    pe = sub.add_parser("expect", help="local expectation values of the stored MPS")
    pe.add_argument("archive")
    pe.add_argument("--op", required=True)
    args = p.parse_args(argv)
    try:
        if args.cmd == "run":
            cfg = load_config(args.config)
            run(cfg)
        elif args.cmd == "inspect":
            inspect(args.archive)
        else:
            psi = _load_mps(args.archive)
            for j, v in enumerate(expect(psi, args.op), start=1):
                print(f"{j} {v + 0.0:.12f}")
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, archive.ArchiveError) as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    except Exception as err:  # noqa: BLE001 - surfaced as a runtime failure code
        print(f"runtime error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0
