"""Synthetic desk-scale molecule corpus.

Generates alkane/ether-like chains (6-20 heavy atoms, 1-5 rotatable bonds)
with a ground-truth conformer, a noisy torsion-perturbed "approximate"
reference conformer standing in for a cheminformatics embedding, and a
small ensemble of independently torsion-sampled ground-truth conformers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coarsen import CGMapping, coarse_grain, find_rotatable_bonds
from .molio import Atom, Bond, Conformer, MolecularGraph, build_graph


@dataclass
class ToyMolecule:
    graph: MolecularGraph          # aux edges built from the reference conformer
    gt: Conformer
    ref: Conformer
    truth_ensemble: list[Conformer]
    mapping: CGMapping             # built from the reference conformer


def _rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = axis / np.linalg.norm(axis)
    k = np.array([[0, -axis[2], axis[1]],
                  [axis[2], 0, -axis[0]],
                  [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)


def _place_atom(coords: list[np.ndarray], anchor: np.ndarray, length: float,
                rng: np.random.Generator, min_sep: float = 0.9) -> np.ndarray:
    for _ in range(200):
        direction = rng.standard_normal(3)
        direction /= np.linalg.norm(direction)
        pos = anchor + length * direction
        if all(np.linalg.norm(pos - c) > min_sep for c in coords):
            return pos
    return pos  # crowded fallback; still finite


def _component_side(n: int, bonds: list[tuple[int, int]], severed: tuple[int, int],
                    side: int) -> set[int]:
    """Atoms reachable from ``side`` without crossing the severed bond."""
    adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in bonds:
        if {i, j} == set(severed):
            continue
        adj[i].append(j)
        adj[j].append(i)
    seen = {side}
    stack = [side]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def apply_torsions(coords: np.ndarray, graph: MolecularGraph,
                   angles: dict[int, float]) -> np.ndarray:
    """Rotate subtrees about rotatable bonds by the given angles (radians)."""
    out = coords.copy()
    bond_pairs = [(b.i, b.j) for b in graph.bonds]
    for bond_idx, angle in angles.items():
        b = graph.bonds[bond_idx]
        side = _component_side(graph.n_atoms, bond_pairs, (b.i, b.j), b.j)
        axis = out[b.j] - out[b.i]
        rot = _rotation_about_axis(axis, angle)
        pivot = out[b.i]
        for a in side:
            out[a] = rot @ (out[a] - pivot) + pivot
    return out


def _build_topology(rng: np.random.Generator):
    """Random chain topology: backbone C/O with methyl branches and hydrogens."""
    backbone = int(rng.integers(4, 9))            # 1..5 rotatable bonds
    elements = ["C"] * backbone
    for pos in range(1, backbone - 1):
        if elements[pos - 1] != "O" and rng.random() < 0.25:
            elements[pos] = "O"
    bonds = [(i, i + 1) for i in range(backbone - 1)]

    hosts = [p for p in range(1, backbone - 1) if elements[p] == "C"]
    capacity = {p: 2 for p in hosts}
    n_branch = int(rng.integers(max(0, 6 - backbone), 5))
    for _ in range(n_branch):
        open_hosts = [p for p in hosts if capacity[p] > 0]
        if not open_hosts or len(elements) >= 20:
            break
        host = int(rng.choice(open_hosts))
        capacity[host] -= 1
        elements.append("C")
        bonds.append((host, len(elements) - 1))

    # hydrogens to fill valence (C: 4, O: 2)
    valence = {"C": 4, "O": 2}
    degree = [0] * len(elements)
    for i, j in bonds:
        degree[i] += 1
        degree[j] += 1
    n_heavy = len(elements)
    for a in range(n_heavy):
        for _ in range(valence[elements[a]] - degree[a]):
            elements.append("H")
            bonds.append((a, len(elements) - 1))
    return elements, bonds, n_heavy


def _embed(elements, bonds, rng: np.random.Generator) -> np.ndarray:
    adj: dict[int, list[int]] = {k: [] for k in range(len(elements))}
    for i, j in bonds:
        adj[i].append(j)
        adj[j].append(i)
    coords: list[np.ndarray] = [np.zeros(3)]
    placed = {0}
    stack = [0]
    coord_map = {0: np.zeros(3)}
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w in placed:
                continue
            length = 1.0 if "H" in (elements[v], elements[w]) else 1.5
            pos = _place_atom(list(coord_map.values()), coord_map[v], length, rng)
            coord_map[w] = pos
            placed.add(w)
            stack.append(w)
    return np.stack([coord_map[k] for k in range(len(elements))])


def make_molecule(rng: np.random.Generator, sigma: float = 0.3,
                  n_truth: int = 5, cutoff: float = 4.0,
                  torsion_scale: float = 1.0) -> ToyMolecule:
    elements, bond_pairs, _ = _build_topology(rng)
    heavy_deg = [0] * len(elements)
    for i, j in bond_pairs:
        if elements[j] != "H":
            heavy_deg[i] += 1
        if elements[i] != "H":
            heavy_deg[j] += 1
    atoms = [Atom(el, 0, heavy_deg[k], False) for k, el in enumerate(elements)]
    bonds = [Bond(i, j, "single") for i, j in bond_pairs]

    gt_coords = _embed(elements, bond_pairs, rng)
    bare = MolecularGraph(atoms, bonds)
    rot = find_rotatable_bonds(bare)

    def torsion_variant(base: np.ndarray, noise_sigma: float) -> np.ndarray:
        angles = {idx: torsion_scale * float(rng.uniform(-np.pi, np.pi))
                  for idx in rot}
        out = apply_torsions(base, bare, angles)
        if noise_sigma > 0:
            out = out + rng.normal(0.0, noise_sigma, size=out.shape)
        return out

    ref_coords = torsion_variant(gt_coords, sigma)
    truth = [Conformer(torsion_variant(gt_coords, 0.0)) for _ in range(n_truth)]

    ref = Conformer(ref_coords)
    graph = build_graph(atoms, bonds, ref, cutoff)
    mapping = coarse_grain(graph, ref)
    return ToyMolecule(graph=graph, gt=Conformer(gt_coords), ref=ref,
                       truth_ensemble=truth, mapping=mapping)


def make_corpus(count: int, seed: int, sigma: float = 0.3,
                n_truth: int = 5, torsion_scale: float = 1.0) -> list[ToyMolecule]:
    """Deterministic corpus: same seed, bit-identical molecules."""
    rng = np.random.default_rng(seed)
    return [make_molecule(rng, sigma=sigma, n_truth=n_truth,
                          torsion_scale=torsion_scale)
            for _ in range(count)]
