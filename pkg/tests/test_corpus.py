"""Synthetic corpus generator: determinism, chemistry invariants, and the
relationship between the exact and approximate conformers."""

import numpy as np
import pytest

from coarsegen.coarsen import find_rotatable_bonds
from coarsegen.corpus import apply_torsions, make_corpus, make_molecule
from coarsegen.geometry import aligned_rmsd
from coarsegen.molio import Conformer


class TestDeterminism:
    def test_same_seed_bit_identical(self):
        a = make_corpus(3, 7)
        b = make_corpus(3, 7)
        for ma, mb in zip(a, b):
            np.testing.assert_array_equal(ma.gt.coords, mb.gt.coords)
            np.testing.assert_array_equal(ma.ref.coords, mb.ref.coords)
            for ta, tb in zip(ma.truth_ensemble, mb.truth_ensemble):
                np.testing.assert_array_equal(ta.coords, tb.coords)
            assert [x.element for x in ma.graph.atoms] == \
                   [x.element for x in mb.graph.atoms]

    def test_different_seeds_differ(self):
        a = make_corpus(1, 0)[0]
        b = make_corpus(1, 1)[0]
        assert (a.gt.coords.shape != b.gt.coords.shape
                or np.abs(a.gt.coords - b.gt.coords).max() > 0)


class TestChemistryInvariants:
    def test_valences_and_elements(self):
        for mol in make_corpus(10, 11):
            adj = mol.graph.adjacency()
            for k, atom in enumerate(mol.graph.atoms):
                n = len(adj[k])
                if atom.element == "C":
                    assert n == 4
                elif atom.element == "O":
                    assert n == 2
                elif atom.element == "H":
                    assert n == 1
                else:  # pragma: no cover
                    raise AssertionError(atom.element)

    def test_no_atom_clashes(self):
        for mol in make_corpus(10, 13):
            c = mol.gt.coords
            d = np.linalg.norm(c[:, None] - c[None, :], axis=-1)
            np.fill_diagonal(d, np.inf)
            assert d.min() > 0.8

    def test_truth_ensemble_size(self):
        mol = make_corpus(1, 2, n_truth=7)[0]
        assert len(mol.truth_ensemble) == 7

    def test_beads_track_rotatable_bonds(self):
        for mol in make_corpus(10, 17):
            k = len(find_rotatable_bonds(mol.graph))
            assert mol.mapping.n_beads == k + 1


class TestReferenceQuality:
    def test_zero_noise_zero_torsion_gives_exact_reference(self):
        for mol in make_corpus(5, 3, sigma=0.0, torsion_scale=0.0):
            np.testing.assert_allclose(
                aligned_rmsd(mol.ref.coords, mol.gt.coords), 0.0, atol=1e-9)
            for t in mol.truth_ensemble:
                np.testing.assert_allclose(
                    aligned_rmsd(t.coords, mol.gt.coords), 0.0, atol=1e-9)

    def test_default_reference_is_distorted(self):
        errs = [aligned_rmsd(m.ref.coords, m.gt.coords)
                for m in make_corpus(10, 4)]
        assert min(errs) > 0.05

    def test_torsions_preserve_bond_lengths(self):
        mol = make_corpus(1, 5)[0]
        rot = find_rotatable_bonds(mol.graph)
        if not rot:
            pytest.skip("sampled molecule has no rotatable bonds")
        angles = {rot[0]: 1.3}
        out = apply_torsions(mol.gt.coords, mol.graph, angles)
        for b in mol.graph.bonds:
            want = np.linalg.norm(mol.gt.coords[b.i] - mol.gt.coords[b.j])
            got = np.linalg.norm(out[b.i] - out[b.j])
            np.testing.assert_allclose(got, want, atol=1e-9)

    def test_conformers_expose_validated_coords(self):
        mol = make_corpus(1, 6)[0]
        assert isinstance(mol.ref, Conformer)
        assert np.isfinite(mol.ref.coords).all()


class TestSingleMolecule:
    def test_make_molecule_respects_rng_stream(self):
        rng = np.random.default_rng(9)
        a = make_molecule(rng)
        b = make_molecule(rng)      # stream advances: different molecule
        assert (a.gt.coords.shape != b.gt.coords.shape
                or np.abs(a.gt.coords - b.gt.coords).max() > 0)
