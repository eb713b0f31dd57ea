from __future__ import annotations

import numpy as np
import pytest

from cases import KINDS, random_pair
from oracles import elements, nested_loop_contract
from indexnet import (
    QN,
    Index,
    ITensor,
    TensorError,
    combinedind,
    combiner,
    commoninds,
    delta,
    diag_itensor,
    random_itensor,
    to_blocksparse,
    uniqueinds,
)
from indexnet import engine


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def rel_err(got, ref):
    return np.linalg.norm(np.asarray(got) - ref) / max(np.linalg.norm(ref), 1e-300)


# ---- element access ----


class TestElements:
    def test_set_get_order_free(self):
        i, j = Index(2, "i"), Index(3, "j")
        T = ITensor(i, j)
        T[j(3), i(1)] = 5.0
        assert T[i(1), j(3)] == 5.0
        assert T.array(i, j)[0, 2] == 5.0
        assert T.array(j, i)[2, 0] == 5.0

    def test_wrong_indices(self):
        i, j, k = Index(2), Index(2), Index(2)
        T = ITensor(i, j)
        with pytest.raises(TensorError, match="does not address"):
            T[i(1), k(1)]
        with pytest.raises(TensorError, match="exactly 2"):
            T[i(1)]

    def test_complex_promotion(self):
        i = Index(2)
        T = ITensor(i)
        T[i(1)] = 1j
        assert T.is_complex and T[i(1)] == 1j

    def test_qn_flux_enforced(self):
        s = Index([(QN("N", 0), 1), (QN("N", 1), 1)], "s")
        T = ITensor(s.prime(), s.dag())
        assert T.flux() is None
        T[s.prime()(1), s.dag()(2)] = 1.0
        assert T.flux() == QN("N", -1)
        assert T.nnz() == 1
        with pytest.raises(TensorError, match="inconsistent"):
            T[s.prime()(2), s.dag()(2)] = 1.0


# ---- addition ----


class TestAddition:
    def test_permuted_index_order(self, rng):
        i, j, k = Index(2), Index(3), Index(4)
        A = random_itensor(i, j, k, rng=rng)
        B = random_itensor(k, i, j, rng=rng)
        C = A + B
        np.testing.assert_allclose(C.array(i, j, k), A.array(i, j, k) + B.array(i, j, k))
        np.testing.assert_allclose((A - A).array(i, j, k), 0.0)

    def test_mismatched_indices(self, rng):
        i, j = Index(2), Index(2)
        with pytest.raises(TensorError):
            random_itensor(i, rng=rng) + random_itensor(j, rng=rng)

    def test_blocksparse_flux_mismatch(self, rng):
        s = Index([(QN("Sz", 1), 1), (QN("Sz", -1), 1)])
        A = random_itensor(s.prime(), s.dag(), flux=QN(), rng=rng)
        B = random_itensor(s.prime(), s.dag(), flux=QN("Sz", 2), rng=rng)
        with pytest.raises(TensorError, match="flux mismatch"):
            A + B


# ---- contraction ----


class TestContraction:
    def test_appendix_example(self, rng):
        a, b, c, d, i, j = (Index(3, "a"), Index(2, "b"), Index(4, "c"), Index(5, "d"),
                            Index(2, "i"), Index(6, "j"))
        A = random_itensor(a, b, d, c, rng=rng)
        B = random_itensor(i, d, j, rng=rng)
        C = A * B
        assert C.hasinds(a, b, c, i, j) and C.order == 5
        ref = np.einsum("abdc,idj->abcij", A.array(a, b, d, c), B.array(i, d, j))
        np.testing.assert_allclose(C.array(a, b, c, i, j), ref, atol=1e-12)

    def test_inner_product_is_scalar(self, rng):
        i, j = Index(3), Index(4)
        A = random_itensor(i, j, rng=rng)
        B = random_itensor(j, i, rng=rng)
        assert (A * B).order == 0
        assert (A * B).scalar() == pytest.approx(np.sum(A.array(i, j) * B.array(i, j)))

    def test_prime_levels_do_not_contract(self, rng):
        i = Index(2)
        A = random_itensor(i, rng=rng)
        B = random_itensor(i.prime(), rng=rng)
        assert set((A * B).inds) == {i, i.prime()}

    def test_qn_arrows_must_oppose(self, rng):
        s = Index([(QN("Sz", 1), 1), (QN("Sz", -1), 1)])
        A = random_itensor(s, flux=QN("Sz", 1), rng=rng)
        with pytest.raises(TensorError, match="arrow"):
            A * A

    @pytest.mark.parametrize("kind", KINDS)
    def test_random_vs_nested_loops(self, kind, rng):
        for _ in range(40):
            A, B = random_pair(rng, kind)
            C = A * B
            free, ref = nested_loop_contract(A, B)
            assert set(C.inds) == set(free)
            got = C.array(*free) if free else np.array(C.scalar())
            assert rel_err(got, ref) < 1e-12

    def test_flux_adds(self, rng):
        q = Index([(QN("Sz", 1), 1), (QN("Sz", -1), 1)])
        r = Index([(QN("Sz", 2), 1), (QN("Sz", 0), 2)])
        A = random_itensor(q, r, flux=QN("Sz", 1), rng=rng)
        B = random_itensor(r.dag(), q.prime(), flux=QN("Sz", -3), rng=rng)
        assert (A * B).flux() == QN("Sz", -2)

    def test_delta_relabels_without_arithmetic(self, rng):
        i, j, k = Index(3), Index(3), Index(2)
        T = random_itensor(i, k, rng=rng)
        before = engine.counters.copy()
        R = delta(i, j) * T
        assert engine.counters == before
        np.testing.assert_array_equal(R.array(j, k), T.array(i, k))

    def test_diag_times_dense(self, rng):
        i, j = Index(3), Index(3)
        D = diag_itensor([1.0, 2.0, 3.0], i, j)
        T = random_itensor(j, rng=rng)
        np.testing.assert_allclose((D * T).array(i), np.array([1, 2, 3]) * T.array(j))

    def test_diag_times_diag_stays_diag(self):
        i, j, k = Index(3), Index(3), Index(3)
        C = diag_itensor([1.0, 2.0, 3.0], i, j) * diag_itensor([2.0, 2.0, 2.0], j, k)
        assert C.kind == "Diag"
        np.testing.assert_allclose(C.array(i, k), np.diag([2.0, 4.0, 6.0]))


# ---- combiners ----


class TestCombiner:
    def test_round_trip(self, rng):
        i, j, k = Index(2), Index(3), Index(4)
        T = random_itensor(i, j, k, rng=rng)
        C = combiner(i, k)
        ci = combinedind(C)
        F = C * T
        assert set(F.inds) == {ci, j} and ci.dim == 8
        back = F * C
        np.testing.assert_allclose(back.array(i, j, k), T.array(i, j, k))


# ---- conversions and queries ----


class TestMisc:
    def test_to_blocksparse_matches_dense(self, rng):
        s = Index([(QN("N", 0), 2), (QN("N", 1), 2)])
        A = random_itensor(s.prime(), s.dag(), flux=QN(), rng=rng)
        D = ITensor.from_array(A.array(s.prime(), s.dag()), s.prime(), s.dag())
        B = to_blocksparse(D)
        assert B.flux() == QN() and B.nnzblocks() == A.nnzblocks()
        np.testing.assert_array_equal(elements(B, [s.prime(), s.dag()]),
                                      elements(A, [s.prime(), s.dag()]))

    def test_index_queries(self, rng):
        i, j, k = Index(2, "i"), Index(2, "j"), Index(2, "k")
        A, B = random_itensor(i, j, rng=rng), random_itensor(j, k, rng=rng)
        assert commoninds(A, B) == [j]
        assert uniqueinds(A, B) == [i]
        assert A.index(tags="i") == i

    def test_prime_selected(self, rng):
        i, j = Index(2, "Site"), Index(2, "Link")
        A = random_itensor(i, j, rng=rng)
        P = A.prime(tags="Site")
        assert set(P.inds) == {i.prime(), j}
        assert P.noprime().hasinds(i, j)

    def test_dag_conjugates_and_flips(self, rng):
        s = Index([(QN("Sz", 1), 1), (QN("Sz", -1), 1)])
        A = random_itensor(s, s.prime().dag(), dtype=complex, flux=QN(), rng=rng)
        D = A.dag()
        assert D.inds[0].dir == -A.inds[0].dir
        np.testing.assert_allclose(D.array(s, s.prime()), A.array(s, s.prime()).conj())
