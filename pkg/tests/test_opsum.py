from __future__ import annotations

import numpy as np
import pytest

from oracles import SM, SP, SX, SZ, heisenberg_matrix, kron_op
from indexnet import OpSum, OpSumError, siteinds, to_mpo, to_tensor

MATS = {"Sz": SZ, "S+": SP, "S-": SM, "Sx": SX, "Id": np.eye(2)}


def heisenberg(N):
    H = OpSum()
    for j in range(1, N):
        H += 0.5, "S+", j, "S-", j + 1
        H += 0.5, "S-", j, "S+", j + 1
        H += "Sz", j, "Sz", j + 1
    return H


def densify(W, sites):
    N = len(sites)
    T = to_tensor(W)
    return T.array(*[s.prime() for s in sites], *sites).reshape(2 ** N, 2 ** N)


def kron_opsum(H, N):
    """Dense matrix of an OpSum built term by term from Kronecker products."""
    out = np.zeros((2 ** N, 2 ** N), dtype=complex)
    for t in H.terms:
        per_site = {}
        for name, j in t.factors:
            per_site[j] = per_site.get(j, np.eye(2)) @ MATS[name]
        out += t.coef * kron_op(N, per_site).toarray()
    return out


# ---- term parsing ----


class TestOpSum:
    def test_accumulate(self):
        H = OpSum()
        H += 0.5, "S+", 1, "S-", 2
        H += "Sz", 1
        H.add(2.0, "Sz", 2)
        assert len(H) == 3
        assert H.terms[1].coef == 1.0
        assert len(H + H) == 6 and (2 * H).terms[0].coef == 1.0

    @pytest.mark.parametrize("term", [(1.0,), ("Sz",), (1.0, "Sz", "x"), (1.0, 3, 1)])
    def test_malformed(self, term):
        with pytest.raises(OpSumError):
            OpSum().add(*term)


# ---- compilation ----


class TestToMPO:
    @pytest.mark.parametrize("N", [4, 5, 8, 13, 20])
    def test_heisenberg_link_dim(self, N):
        W = to_mpo(heisenberg(N), siteinds("S=1/2", N))
        assert W.maxlinkdim() == 5

    @pytest.mark.parametrize("qn", [False, True])
    def test_heisenberg_matches_kronecker(self, qn):
        sites = siteinds("S=1/2", 4, conserve_qns=qn)
        got = densify(to_mpo(heisenberg(4), sites), sites)
        np.testing.assert_allclose(got, heisenberg_matrix(4, sparse=False), atol=1e-12)

    def test_random_opsums(self):
        rng = np.random.default_rng(5)
        names = ["Sz", "S+", "S-", "Sx"]
        for _ in range(15):
            N = int(rng.integers(2, 6))
            H = OpSum()
            for _ in range(int(rng.integers(1, 8))):
                k = int(rng.integers(1, 4))
                args = [complex(rng.standard_normal(), rng.standard_normal())]
                for _ in range(k):
                    args += [str(rng.choice(names)), int(rng.integers(1, N + 1))]
                H.add(*args)
            sites = siteinds("S=1/2", N)
            np.testing.assert_allclose(densify(to_mpo(H, sites), sites), kron_opsum(H, N),
                                       atol=1e-12)

    def test_duplicates_summed(self):
        sites = siteinds("S=1/2", 3)
        H = OpSum()
        H += "Sz", 1, "Sz", 3
        H += "Sz", 1, "Sz", 3
        H += -2.0, "Sz", 1, "Sz", 3
        H += "Sz", 2
        W = to_mpo(H, sites)
        np.testing.assert_allclose(densify(W, sites), kron_op(3, {2: SZ}).toarray(), atol=1e-14)

    def test_same_site_product_order(self):
        sites = siteinds("S=1/2", 2)
        H = OpSum()
        H += "S+", 1, "S-", 1
        np.testing.assert_allclose(densify(to_mpo(H, sites), sites),
                                   kron_op(2, {1: SP @ SM}).toarray(), atol=1e-14)

    def test_qn_long_range(self):
        sites = siteinds("S=1/2", 5, conserve_qns=True)
        H = OpSum()
        H += 0.3, "S+", 1, "S-", 5
        H += 0.3, "S-", 1, "S+", 5
        H += 0.7, "Sz", 2, "Sz", 4
        H += -0.2, "Sz", 3
        np.testing.assert_allclose(densify(to_mpo(H, sites), sites), kron_opsum(H, 5), atol=1e-12)

    def test_mixed_flux_rejected(self):
        sites = siteinds("S=1/2", 2, conserve_qns=True)
        H = OpSum()
        H += "S+", 1
        H += "Sz", 2
        with pytest.raises(OpSumError, match="different total flux"):
            to_mpo(H, sites)

    def test_site_out_of_range(self):
        with pytest.raises(OpSumError, match="out of range"):
            to_mpo(OpSum().add("Sz", 4), siteinds("S=1/2", 3))
