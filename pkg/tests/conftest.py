import numpy as np
import pytest

from coarsegen.coarsen import coarse_grain
from coarsegen.molio import Atom, Bond, Conformer, build_graph
from coarsegen.nn import ModelConfig
from coarsegen.params import ParameterStore


@pytest.fixture
def small_cfg():
    return ModelConfig(hidden_dim=8, latent_channels=4, layers=2)


@pytest.fixture
def store():
    return ParameterStore(seed=0)


def butane_like(seed: int = 0, jitter: float = 0.1):
    """4-heavy-atom chain with one rotatable bond (two beads)."""
    rng = np.random.default_rng(seed)
    atoms = [Atom("C", 0, 1), Atom("C", 0, 2), Atom("C", 0, 2), Atom("C", 0, 1)]
    bonds = [Bond(0, 1), Bond(1, 2), Bond(2, 3)]
    base = np.array([[0.0, 0, 0], [1.5, 0, 0], [2.3, 1.2, 0], [3.8, 1.2, 0.4]])
    ref = base + jitter * rng.standard_normal(base.shape)
    gt = base + jitter * rng.standard_normal(base.shape)
    graph = build_graph(atoms, bonds, Conformer(ref), 4.0)
    mapping = coarse_grain(graph, Conformer(ref))
    return graph, mapping, gt, ref


@pytest.fixture
def micro_molecule():
    return butane_like()
