"""Geometric kernels: brute-force oracles and fast-path/fallback agreement."""

import numpy as np

from coarsegen import kernels
from coarsegen.geometry import aligned_rmsd

RNG = np.random.default_rng(7)


class TestPairsWithinCutoff:
    def test_matches_brute_force(self):
        coords = RNG.uniform(0, 10, size=(40, 3))
        got = {tuple(p) for p in kernels.pairs_within_cutoff(coords, 4.0)}
        want = {(i, j)
                for i in range(40) for j in range(i + 1, 40)
                if np.linalg.norm(coords[i] - coords[j]) <= 4.0}
        assert got == want

    def test_empty_and_single(self):
        assert kernels.pairs_within_cutoff(np.zeros((0, 3)), 4.0).shape == (0, 2)
        assert kernels.pairs_within_cutoff(np.zeros((1, 3)), 4.0).shape == (0, 2)

    def test_paths_agree(self):
        coords = RNG.uniform(0, 8, size=(30, 3))
        fast = kernels.pairs_within_cutoff(coords, 3.0)
        slow = kernels._pairs_within_cutoff_numpy(coords, 3.0)
        np.testing.assert_array_equal(np.sort(fast, axis=0), np.sort(slow, axis=0))


class TestGaussianBasis:
    def test_closed_form(self):
        d = RNG.uniform(0, 10, size=20)
        centers = np.linspace(0, 10, 16)
        width = 10.0 / 15
        got = kernels.gaussian_basis(d, centers, width)
        want = np.exp(-0.5 * ((d[:, None] - centers) / width) ** 2)
        np.testing.assert_allclose(got, want, atol=1e-14)

    def test_at_center_equals_one(self):
        centers = np.array([1.0, 2.0, 3.0])
        out = kernels.gaussian_basis(np.array([2.0]), centers, 0.5)
        assert out[0, 1] == 1.0

    def test_far_beyond_centers_vanishes(self):
        centers = np.linspace(0, 10, 16)
        width = 10.0 / 15
        out = kernels.gaussian_basis(np.array([10.0 + 10 * width]), centers, width)
        assert np.abs(out).max() < 1e-10

    def test_paths_agree(self):
        d = RNG.uniform(0, 10, size=50)
        centers = np.linspace(0, 10, 8)
        fast = kernels.gaussian_basis(d, centers, 0.7)
        slow = kernels._gaussian_basis_numpy(d, centers, 0.7)
        np.testing.assert_allclose(fast, slow, atol=1e-14)


class TestRmsdMatrix:
    def test_matches_alignment_oracle(self):
        a = RNG.standard_normal((4, 9, 3))
        b = RNG.standard_normal((3, 9, 3))
        mat = kernels.rmsd_matrix(a, b)
        for k in range(4):
            for l in range(3):
                assert abs(mat[k, l] - aligned_rmsd(a[k], b[l])) < 1e-9

    def test_symmetric_in_role(self):
        a = RNG.standard_normal((3, 7, 3))
        b = RNG.standard_normal((2, 7, 3))
        np.testing.assert_allclose(kernels.rmsd_matrix(a, b),
                                   kernels.rmsd_matrix(b, a).T, atol=1e-10)

    def test_identical_rows_zero(self):
        a = RNG.standard_normal((2, 6, 3))
        mat = kernels.rmsd_matrix(a, a)
        assert np.abs(np.diag(mat)).max() < 1e-9
