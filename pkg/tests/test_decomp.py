from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from indexnet import (
    QN,
    Index,
    ITensor,
    TruncationParams,
    eigen_hermitian,
    factorize,
    qr,
    random_itensor,
    svd,
    truncate_spectrum,
)
from indexnet.tensor import commonind


@pytest.fixture
def rng():
    return np.random.default_rng(99)


def cut_point_oracle(values, cutoff, maxdim, mindim, power=2):
    """Try every cut point and keep the first admissible one."""
    w = [max(v, 0.0) ** power for v in values]
    total = sum(w)
    chosen = len(values)
    for n in range(1, len(values) + 1):
        if total == 0 or sum(w[n:]) / total <= cutoff:
            chosen = n
            break
    chosen = max(chosen, min(mindim, len(values)))
    if maxdim is not None:
        chosen = min(chosen, maxdim)
    return chosen


def is_isometry(U, link):
    """``dag(U) * U'`` over everything except ``link`` is the identity on ``link``."""
    others = [i for i in U.inds if i != link]
    G = U.dag() * U.prime(link)
    return np.allclose(G.array(link.dag() if link.has_qns else link, link.prime()),
                       np.eye(link.dim), atol=1e-12) and len(others) > 0


def qn_index(rng, tags=""):
    space = [(QN("Sz", int(q)), int(rng.integers(1, 3))) for q in (-2, 0, 2)]
    return Index(space, tags)


# ---- truncate_spectrum ----


class TestTruncateSpectrum:
    def test_examples(self):
        v = np.array([1.0, 0.1, 0.01, 0.001])
        assert truncate_spectrum(v, TruncationParams(cutoff=0.0))[0] == 4
        n, err = truncate_spectrum(v, TruncationParams(cutoff=1e-3))
        assert n == 2
        assert err == pytest.approx((0.01 ** 2 + 0.001 ** 2) / np.sum(v ** 2))
        assert truncate_spectrum(v, TruncationParams(maxdim=1))[0] == 1
        assert truncate_spectrum(v, TruncationParams(cutoff=1.0, mindim=3))[0] == 3

    def test_rejects_unsorted(self):
        with pytest.raises(ValueError, match="descending"):
            truncate_spectrum([0.1, 1.0])

    def test_exhaustive_oracle(self, rng):
        for _ in range(2000):
            m = int(rng.integers(1, 12))
            v = np.sort(rng.exponential(size=m) ** rng.integers(1, 6))[::-1]
            if rng.random() < 0.1:
                v[rng.integers(0, m):] = 0.0
            cutoff = float(10.0 ** rng.uniform(-12, 0))
            maxdim = None if rng.random() < 0.3 else int(rng.integers(1, 12))
            mindim = int(rng.integers(1, 4))
            if maxdim is not None and mindim > maxdim:
                mindim = maxdim
            n, _ = truncate_spectrum(v, TruncationParams(cutoff, maxdim, mindim))
            assert n == cut_point_oracle(v, cutoff, maxdim, mindim)

    @given(st.lists(st.floats(0, 1e3), min_size=1, max_size=20), st.floats(0, 1))
    @settings(max_examples=200)
    def test_error_bound(self, values, cutoff):
        v = np.sort(np.array(values))[::-1]
        n, err = truncate_spectrum(v, TruncationParams(cutoff=cutoff))
        assert 1 <= n <= len(v)
        assert err <= cutoff + 1e-12


# ---- SVD ----


class TestSVD:
    def test_dense_reconstructs(self, rng):
        i, j, k = Index(3), Index(4), Index(5)
        T = random_itensor(i, j, k, dtype=complex, rng=rng)
        U, S, V, spec = svd(T, [i, k])
        assert ((U * S * V) - T).norm() < 1e-12 * T.norm()
        u = commonind(U, S)
        v = commonind(S, V)
        assert is_isometry(U, u) and is_isometry(V, v)
        assert spec.truncerr == 0.0

    def test_bounds_respected(self, rng):
        i, j = Index(20), Index(20)
        T = random_itensor(i, j, rng=rng)
        U, S, V, spec = svd(T, [i], cutoff=1e-8, maxdim=10)
        assert commonind(U, S).dim <= 10
        s = np.linalg.svd(T.array(i, j), compute_uv=False)
        assert spec.truncerr == pytest.approx(np.sum(s[10:] ** 2) / np.sum(s ** 2))

    def test_cutoff_only(self, rng):
        i, j = Index(6), Index(6)
        s = np.array([1.0, 0.5, 1e-5, 1e-6, 0.0, 0.0])
        qa, _ = np.linalg.qr(rng.standard_normal((6, 6)))
        qb, _ = np.linalg.qr(rng.standard_normal((6, 6)))
        T = ITensor.from_array(qa @ np.diag(s) @ qb.T, i, j)
        U, S, V, spec = svd(T, [i], cutoff=1e-8)
        assert commonind(U, S).dim == 2
        assert spec.truncerr <= 1e-8

    def test_qn_svd(self, rng):
        a, b, c = qn_index(rng, "a"), qn_index(rng, "b"), qn_index(rng, "c")
        T = random_itensor(a, b.dag(), c, flux=QN("Sz", 2), rng=rng)
        U, S, V, _ = svd(T, [a, c])
        assert U.flux() == QN() and S.flux() == QN() and V.flux() == QN("Sz", 2)
        assert ((U * S * V) - T).norm() < 1e-12 * T.norm()
        assert is_isometry(U, commonind(U, S))

    def test_qn_truncation_is_global(self, rng):
        a, b = qn_index(rng, "a"), qn_index(rng, "b")
        T = random_itensor(a, b.dag(), rng=rng)
        dense = ITensor.from_array(T.array(a, b.dag()), a, b.dag())
        *_, spec_qn = svd(T, [a], maxdim=3)
        *_, spec_dense = svd(dense, [a], maxdim=3)
        np.testing.assert_allclose(spec_qn.values, spec_dense.values, atol=1e-12)


# ---- QR and eigen ----


class TestQR:
    def test_dense(self, rng):
        i, j, k = Index(4), Index(3), Index(2)
        T = random_itensor(i, j, k, rng=rng)
        Q, R = qr(T, [i, k])
        assert (Q * R - T).norm() < 1e-12 * T.norm()
        assert is_isometry(Q, commonind(Q, R))

    def test_qn(self, rng):
        a, b = qn_index(rng), qn_index(rng)
        T = random_itensor(a, b.dag(), a.prime(), flux=QN("Sz", -2), rng=rng)
        Q, R = qr(T, [a, a.prime()])
        assert Q.flux() == QN() and R.flux() == QN("Sz", -2)
        assert (Q * R - T).norm() < 1e-12 * T.norm()


class TestEigen:
    def _hermitian(self, rng, inds):
        X = random_itensor(*inds, *[i.prime().dag() for i in inds], dtype=complex, rng=rng)
        return X + X.dag().mapprime(1, 2).mapprime(0, 1).mapprime(2, 0)

    def test_dense(self, rng):
        i, j = Index(3), Index(2)
        H = self._hermitian(rng, [i, j])
        U, D, spec = eigen_hermitian(H, [i, j])
        l = commonind(U, D)
        back = U * D * U.dag().prime()
        assert (back - H).norm() < 1e-12 * H.norm()
        assert is_isometry(U, l)
        assert np.all(np.diff(np.abs(spec.values)) <= 0)

    def test_qn(self, rng):
        a = qn_index(rng)
        H = self._hermitian(rng, [a])
        U, D, spec = eigen_hermitian(H, [a])
        assert (U * D * U.dag().prime() - H).norm() < 1e-12 * H.norm()

    def test_not_hermitian(self, rng):
        i = Index(3)
        H = random_itensor(i, i.prime(), rng=rng)
        with pytest.raises(Exception, match="Hermitian"):
            eigen_hermitian(H, [i])


class TestFactorize:
    @pytest.mark.parametrize("absorb", ["left", "right"])
    def test_one_side_is_isometry(self, absorb, rng):
        i, j = Index(4), Index(5)
        T = random_itensor(i, j, rng=rng)
        L, R, _ = factorize(T, [i], absorb=absorb, tags="Link,l=1")
        link = commonind(L, R)
        assert link.hastags("l=1")
        assert (L * R - T).norm() < 1e-12 * T.norm()
        assert is_isometry(R if absorb == "left" else L, link)
