from __future__ import annotations

import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from oracles import heisenberg_matrix, identical, lowest_levels
from indexnet import archive
from indexnet.cli import ConfigError, load_config, main, parse_terms, run

DATA = Path(__file__).parent / "data"
GOLDEN_CONFIG = DATA / "heisenberg8.json"
GOLDEN_LOG = DATA / "heisenberg8.golden.log"


def write_config(tmp_path, **overrides):
    cfg = {"model": "heisenberg", "N": 6, "sweeps": {"nsweep": 3, "maxdim": [8, 16]},
           "seed": 3, "timing": False}
    cfg.update(overrides)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return p


def cli(*args, env=None):
    import os

    full_env = dict(os.environ)
    full_env.pop("INDEXNET_SEED", None)
    full_env.update(env or {})
    return subprocess.run([sys.executable, "-m", "indexnet", *map(str, args)],
                          capture_output=True, text=True, env=full_env)


# ---- golden log and determinism ----


class TestGolden:
    def test_log_matches_golden(self, monkeypatch):
        monkeypatch.delenv("INDEXNET_SEED", raising=False)
        out = io.StringIO()
        run(load_config(GOLDEN_CONFIG), out=out)
        assert out.getvalue() == GOLDEN_LOG.read_text()

    def test_golden_energies_match_ed(self):
        lines = GOLDEN_LOG.read_text().splitlines()
        e0 = float(next(l for l in lines if l.startswith("G.S.")).split("=")[1])
        assert e0 == pytest.approx(lowest_levels(heisenberg_matrix(8), 1)[0], rel=1e-10)

    def test_rerun_identical(self, tmp_path):
        cfg = write_config(tmp_path, output=str(tmp_path / "a.idx"))
        first = cli("run", cfg)
        (tmp_path / "a.idx").rename(tmp_path / "first.idx")
        second = cli("run", cfg)
        assert first.returncode == second.returncode == 0
        assert first.stdout == second.stdout
        assert (tmp_path / "first.idx").read_bytes() == (tmp_path / "a.idx").read_bytes()

    def test_seed_env_override(self, tmp_path):
        cfg = write_config(tmp_path, initial_state="random", linkdim=2, seed=1,
                           sweeps={"nsweep": 1, "maxdim": 2})
        base = cli("run", cfg).stdout
        same = cli("run", cfg, env={"INDEXNET_SEED": "1"}).stdout
        other = cli("run", cfg, env={"INDEXNET_SEED": "99"}).stdout
        assert base == same and base != other


# ---- subcommands ----


class TestCommands:
    @pytest.fixture
    def result(self, tmp_path):
        out = tmp_path / "r.idx"
        cfg = write_config(tmp_path, conserve_qns=True, output="r.idx")
        # relative output paths resolve against the working directory
        proc = subprocess.run([sys.executable, "-m", "indexnet", "run", str(cfg)],
                              capture_output=True, text=True, cwd=tmp_path)
        assert proc.returncode == 0, proc.stderr
        return out

    def test_archive_contents(self, result):
        obj = archive.read(result)
        assert set(obj) >= {"config", "energies", "log", "psi", "H"}
        assert obj["config"]["N"] == 6
        assert identical(archive.loads(archive.dumps(obj)), obj)

    def test_inspect(self, result):
        proc = cli("inspect", result)
        assert proc.returncode == 0
        assert "energies" in proc.stdout and "MPS" in proc.stdout

    def test_expect_sz_sums_to_zero(self, result):
        proc = cli("expect", result, "--op", "Sz")
        vals = [float(l.split()[1]) for l in proc.stdout.splitlines()]
        assert len(vals) == 6 and abs(sum(vals)) < 1e-10
        assert vals[0] == pytest.approx(vals[-1], abs=1e-8)

    def test_custom_terms(self, tmp_path):
        (tmp_path / "terms.txt").write_text(
            "# Ising pair plus field\n-1.0 Sz 1 Sz 2\n-1.0 Sz 2 Sz 3\n0.5 Sx 1\n0.5 Sx 2\n0.5 Sx 3\n")
        cfg = write_config(tmp_path, model="custom", terms_file="terms.txt", N=3,
                           initial_state="random")
        proc = cli("run", cfg)
        assert proc.returncode == 0, proc.stderr
        e = float(proc.stdout.splitlines()[-1].split("=")[1])
        sz = np.diag([0.5, -0.5])
        sx = np.array([[0, 0.5], [0.5, 0]])
        one = np.eye(2)
        k = lambda a, b, c: np.kron(a, np.kron(b, c))  # noqa: E731
        H = -k(sz, sz, one) - k(one, sz, sz) + 0.5 * (k(sx, one, one) + k(one, sx, one) + k(one, one, sx))
        assert e == pytest.approx(np.linalg.eigvalsh(H)[0], abs=1e-10)

    def test_tfim_critical_point(self, tmp_path):
        cfg = write_config(tmp_path, model="tfim", N=6, J=1.0, h=0.5, initial_state="random",
                           sweeps={"nsweep": 4, "maxdim": 16})
        proc = cli("run", cfg)
        e = float(proc.stdout.splitlines()[-1].split("=")[1])
        sz = np.diag([0.5, -0.5])
        sx = np.array([[0, 0.5], [0.5, 0]])

        def at(o, j):
            m = np.eye(1)
            for k in range(6):
                m = np.kron(m, o if k == j else np.eye(2))
            return m

        H = sum(-at(sz, j) @ at(sz, j + 1) for j in range(5)) - 0.5 * sum(at(sx, j) for j in range(6))
        assert e == pytest.approx(np.linalg.eigvalsh(H)[0], abs=1e-9)


# ---- configuration and exit codes ----


class TestErrors:
    @pytest.mark.parametrize("overrides", [
        {"N": 1},
        {"model": "hubbard"},
        {"bogus": 1},
        {"sweeps": {"nsweep": 0}},
        {"model": "tfim", "conserve_qns": True},
        {"initial_state": ["Up"]},
        {"model": "custom"},
    ])
    def test_bad_config_exit_2(self, tmp_path, overrides):
        proc = cli("run", write_config(tmp_path, **overrides))
        assert proc.returncode == 2 and "config error" in proc.stderr

    def test_bad_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{not json")
        assert cli("run", p).returncode == 2

    def test_bad_seed_env(self, tmp_path):
        assert cli("run", write_config(tmp_path), env={"INDEXNET_SEED": "x"}).returncode == 2

    def test_runtime_failure_exit_3(self, tmp_path):
        # unknown state name only surfaces when the state is built
        cfg = write_config(tmp_path, N=2, initial_state=["Up", "Sideways"])
        proc = cli("run", cfg)
        assert proc.returncode == 3 and "runtime error" in proc.stderr

    def test_io_failures_exit_4(self, tmp_path):
        assert cli("run", tmp_path / "missing.json").returncode == 4
        bad = tmp_path / "bad.idx"
        bad.write_bytes(b"garbage")
        assert cli("inspect", bad).returncode == 4
        assert cli("expect", bad, "--op", "Sz").returncode == 4
        cfg = write_config(tmp_path, model="custom", terms_file="nothere.txt")
        assert cli("run", cfg).returncode == 4

    def test_parse_terms(self):
        H = parse_terms("0.5 S+ 1 S- 2\n1 Sz 1  # comment\n\n")
        assert len(H) == 2
        with pytest.raises(ConfigError, match="line 1"):
            parse_terms("1.0 Sz")

    def test_main_in_process(self, tmp_path, capsys):
        assert main(["run", str(write_config(tmp_path, N=4))]) == 0
        assert "G.S. energy" in capsys.readouterr().out
