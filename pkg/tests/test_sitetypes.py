from __future__ import annotations

import numpy as np
import pytest

from indexnet import QN, SiteDef, SiteTypeError, op, register_sitetype, siteinds, state
from indexnet.sitetypes import spin_sitedef


def mat(name, s):
    return op(name, s).array(s.prime(), s.dag())


# ---- built-in spin types ----


class TestSpins:
    def test_spin_half(self):
        s = siteinds("S=1/2", 1)[0]
        np.testing.assert_allclose(mat("Sz", s), np.diag([0.5, -0.5]))
        np.testing.assert_allclose(mat("S+", s), [[0, 1], [0, 0]])
        np.testing.assert_allclose(mat("Sx", s) @ mat("Sx", s), 0.25 * np.eye(2))

    def test_spin_three_halves(self):
        s = siteinds("S=3/2", 1)[0]
        np.testing.assert_allclose(np.diag(mat("Sz", s)), [1.5, 0.5, -0.5, -1.5])
        np.testing.assert_allclose(np.diag(mat("S+", s), 1), [np.sqrt(3), 2.0, np.sqrt(3)])
        np.testing.assert_allclose(mat("S-", s), mat("S+", s).T)

    def test_su2_algebra(self):
        s = siteinds("S=3/2", 1)[0]
        sx, sy, sz = mat("Sx", s), mat("Sy", s), mat("Sz", s)
        np.testing.assert_allclose(sx @ sy - sy @ sx, 1j * sz, atol=1e-14)
        np.testing.assert_allclose(sx @ sx + sy @ sy + sz @ sz, 15 / 4 * np.eye(4), atol=1e-14)

    def test_tags_and_qns(self):
        sites = siteinds("S=1/2", 3, conserve_qns=True)
        assert sites[2].hastags("S=1/2,Site,n=3")
        assert sites[0].space == ((QN("Sz", 1), 1), (QN("Sz", -1), 1))
        assert op("S+", sites[0]).flux() == QN("Sz", 2)
        assert op("Sz", sites[0]).flux() == QN()


# ---- bosons ----


class TestBoson:
    def test_annihilation_flux_and_storage(self):
        s = siteinds("Boson", 1, conserve_qns=True)[0]
        a = op("a", s)
        assert a.flux() == QN("N", -1)
        assert a.nnz() == 1

    def test_states(self):
        s = siteinds("Boson", 1)[0]
        np.testing.assert_allclose(state("Occ", s).array(s), [0.0, 1.0])


# ---- registry ----


class TestRegistry:
    def test_unknown_names(self):
        s = siteinds("S=1/2", 1)[0]
        with pytest.raises(SiteTypeError, match="not defined"):
            op("Bogus", s)
        with pytest.raises(SiteTypeError, match="unknown site type"):
            siteinds("Nope", 2)

    def test_register_custom(self):
        register_sitetype(spin_sitedef("S=1", 2, {"Up": 0, "Z0": 1, "Dn": 2}), overwrite=True)
        s = siteinds("S=1", 1)[0]
        np.testing.assert_allclose(np.diag(mat("S+", s), 1), [np.sqrt(2), np.sqrt(2)])
        with pytest.raises(ValueError, match="already registered"):
            register_sitetype(spin_sitedef("S=1", 2))

    def test_bad_shape(self):
        with pytest.raises(ValueError, match="shape"):
            SiteDef("Bad", 2, ops={"X": np.eye(3)})
