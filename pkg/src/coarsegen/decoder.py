"""Backmapping decoder: aggregated-attention channel selection followed by
bead-wise autoregressive (or single-pass) coordinate refinement.

Refinement predicts a distortion of the reference conformer: every layer
re-anchors coordinates at the reference, so zeroed update networks return
the reference exactly. Coordinates and centroids enter invariant feature
mixing through vector-neuron norms, keeping the whole decoder equivariant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, concat, segment_sum, softmax
from .coarsen import CGMapping
from .encoder import center, encode_reference
from .latent import prior_params, sample
from .molio import Conformer, MolecularGraph
from .nn import ModelConfig, affine, attention, mlp, vn_mlp, vn_norms
from .params import ParameterStore


def channel_selection(z: Tensor, mapping: CGMapping,
                      ref_coords: np.ndarray) -> Tensor:
    """Backmap the bead latent to per-atom 3-vectors via single-head attention.

    Queries are the reference coordinates of each bead's member atoms; keys
    and values are the bead's latent channels (embedding dimension 3, scale
    1/sqrt(3)). Output rows land at the atoms' global indices.
    """
    if z.shape[0] != mapping.n_beads:
        raise ValueError("latent bead count does not match mapping")
    ref_coords = np.asarray(ref_coords, dtype=np.float64)
    pieces = []
    member_order = []
    for bead in range(mapping.n_beads):
        members = sorted(mapping.members[bead])
        member_order.extend(members)
        q = Tensor(ref_coords[members])            # n_I x 3
        keys = z[bead]                             # F x 3
        scores = (q @ keys.swapaxes(0, 1)) / np.sqrt(3.0)
        weights = softmax(scores, axis=1)
        pieces.append(weights @ keys)
    stacked = concat(pieces, axis=0)
    inverse = np.argsort(np.asarray(member_order, dtype=np.intp))
    return stacked[inverse]


@dataclass
class GenerationState:
    """Progress of bead-wise autoregressive decoding."""
    order: list[int]
    next_pos: int = 0
    generated_beads: list[int] = field(default_factory=list)
    atom_ids: list[int] = field(default_factory=list)
    coord_blocks: list[Tensor] = field(default_factory=list)
    h_blocks: list[Tensor] = field(default_factory=list)

    @property
    def prev_centroid(self) -> np.ndarray:
        if not self.atom_ids:
            return np.zeros(3)
        coords = np.concatenate([c.data for c in self.coord_blocks], axis=0)
        return coords.mean(axis=0)


def _local_edges(graph: MolecularGraph, atoms: list[int]):
    """Covalent + auxiliary directed edges restricted to an atom subset."""
    pos = {a: k for k, a in enumerate(atoms)}
    src, dst = [], []
    pairs = [(b.i, b.j) for b in graph.bonds] + list(graph.aux_edges)
    for i, j in pairs:
        if i in pos and j in pos:
            src += [pos[i], pos[j]]
            dst += [pos[j], pos[i]]
    s = np.asarray(src, dtype=np.intp)
    d = np.asarray(dst, dtype=np.intp)
    deg = np.bincount(d, minlength=len(atoms)).astype(np.float64)
    inv = np.where(deg > 0, 1.0 / np.maximum(deg, 1.0), 0.0)
    return s, d, inv


def _refine(store: ParameterStore, cfg: ModelConfig, x0: Tensor, x_ref: Tensor,
            h0: Tensor, edges, prev_coords: Tensor | None,
            prev_h: Tensor | None) -> tuple[Tensor, Tensor]:
    """Stacked distortion-learning message passing over one atom subset."""
    D = cfg.hidden_dim
    src, dst, inv_deg = edges
    s = x0.shape[0]
    x, h = x0, h0
    for layer in range(cfg.layers):
        lt = cfg.layer_tag(layer)
        if prev_coords is not None:
            mu = prev_coords.mean(axis=0, keepdims=True)
        else:
            mu = Tensor(np.zeros((1, 3)))
        dx = (x - mu).reshape(s, 1, 3)
        dx_inv = vn_norms(vn_mlp(store, f"dec.{lt}.vn_mix", dx, D, D))
        d2mu = ((x - mu) * (x - mu)).sum(axis=1, keepdims=True)
        h_mix = mlp(store, f"dec.{lt}.phi_m", concat([h, dx_inv, d2mu], axis=1), D, D)

        diff = x[dst] - x[src]
        d2 = (diff * diff).sum(axis=1, keepdims=True)
        dref_j = x[dst] - x_ref[src]
        d2ref_j = (dref_j * dref_j).sum(axis=1, keepdims=True)
        dref_i = x[dst] - x_ref[dst]
        d2ref_i = (dref_i * dref_i).sum(axis=1, keepdims=True)
        m_in = concat([h_mix[dst], h_mix[src], d2, d2ref_j, d2ref_i], axis=1)
        m_e = mlp(store, f"dec.{lt}.phi_e", m_in, D, D)
        m_node = segment_sum(m_e, dst, s) * Tensor(inv_deg[:, None])

        if prev_h is not None:
            u = attention(store, f"dec.{lt}.att", h_mix, prev_h)
        else:
            u = Tensor(np.zeros((s, D)))

        gate = mlp(store, f"dec.{lt}.phi_x", m_e, D, 1)
        dist = (d2 + 1e-12).sqrt()
        x = x_ref + segment_sum(diff * (gate / (dist + 1.0)), dst,
                                s) * Tensor(inv_deg[:, None])
        h_in = concat([h_mix, m_node, u, h0], axis=1)
        h = (1.0 - cfg.beta_update) * h + cfg.beta_update * mlp(
            store, f"dec.{lt}.phi_h", h_in, D, D)
    return x, h


def _decoder_atom_features(store: ParameterStore, cfg: ModelConfig,
                           graph: MolecularGraph) -> Tensor:
    return affine(store, "dec.emb", Tensor(graph.feature_matrix()), cfg.hidden_dim)


def ar_step(store: ParameterStore, cfg: ModelConfig, state: GenerationState,
            bead: int, x_cs: Tensor, ref_coords: np.ndarray,
            graph: MolecularGraph, mapping: CGMapping, h0_all: Tensor,
            teacher_coords: np.ndarray | None = None) -> GenerationState:
    """Decode one bead, conditioning on all previously generated atoms."""
    if bead in state.generated_beads:
        raise ValueError(f"bead {bead} decoded twice")
    if state.next_pos >= len(state.order) or state.order[state.next_pos] != bead:
        raise ValueError(f"bead {bead} decoded out of order")
    members = sorted(mapping.members[bead])
    x0 = x_cs[np.asarray(members, dtype=np.intp)]
    x_ref = Tensor(np.asarray(ref_coords)[members])
    h0 = h0_all[np.asarray(members, dtype=np.intp)]
    edges = _local_edges(graph, members)

    if state.atom_ids:
        if teacher_coords is not None:
            prev_coords = Tensor(np.asarray(teacher_coords)[state.atom_ids])
        else:
            prev_coords = concat(state.coord_blocks, axis=0)
        prev_h = concat(state.h_blocks, axis=0)
    else:
        prev_coords = None
        prev_h = None

    coords, h = _refine(store, cfg, x0, x_ref, h0, edges, prev_coords, prev_h)
    return GenerationState(
        order=state.order,
        next_pos=state.next_pos + 1,
        generated_beads=state.generated_beads + [bead],
        atom_ids=state.atom_ids + members,
        coord_blocks=state.coord_blocks + [coords],
        h_blocks=state.h_blocks + [h],
    )


def _scatter_atom_rows(blocks: list[Tensor], atom_ids: list[int]) -> Tensor:
    stacked = concat(blocks, axis=0)
    inverse = np.argsort(np.asarray(atom_ids, dtype=np.intp))
    return stacked[inverse]


def decode_ar(store: ParameterStore, cfg: ModelConfig, z: Tensor,
              mapping: CGMapping, ref_coords: np.ndarray, graph: MolecularGraph,
              order: list[int],
              teacher_coords: np.ndarray | None = None) -> Tensor:
    """Autoregressive decoding over the bead order; optional teacher forcing."""
    x_cs = channel_selection(z, mapping, ref_coords)
    h0_all = _decoder_atom_features(store, cfg, graph)
    state = GenerationState(order=list(order))
    for bead in order:
        state = ar_step(store, cfg, state, bead, x_cs, ref_coords, graph,
                        mapping, h0_all, teacher_coords)
    return _scatter_atom_rows(state.coord_blocks, state.atom_ids)


def decode_ot(store: ParameterStore, cfg: ModelConfig, z: Tensor,
              mapping: CGMapping, ref_coords: np.ndarray,
              graph: MolecularGraph) -> Tensor:
    """Single-pass decoding: all atoms at once, no autoregressive context."""
    x_cs = channel_selection(z, mapping, ref_coords)
    h0_all = _decoder_atom_features(store, cfg, graph)
    atoms = list(range(graph.n_atoms))
    x_ref = Tensor(np.asarray(ref_coords))
    edges = _local_edges(graph, atoms)
    coords, _ = _refine(store, cfg, x_cs, x_ref, h0_all, edges, None, None)
    return coords


def generate(store: ParameterStore, cfg: ModelConfig, graph: MolecularGraph,
             mapping: CGMapping, ref_coords: np.ndarray, order: list[int],
             rng: np.random.Generator, mode: str = "ar",
             noise: np.ndarray | None = None) -> Conformer:
    """Sample a conformer from the learned prior conditioned on the reference."""
    if mode not in ("ar", "ot"):
        raise ValueError(f"unknown decode mode {mode!r}")
    ref_c, centroid = center(np.asarray(ref_coords))
    z_ref = encode_reference(store, cfg, graph, mapping, ref_c)
    prior = prior_params(store, cfg, z_ref)
    z_sample = sample(prior, rng, noise=noise)
    if mode == "ar":
        coords = decode_ar(store, cfg, z_sample, mapping, ref_c, graph, order)
    else:
        coords = decode_ot(store, cfg, z_sample, mapping, ref_c, graph)
    return Conformer(coords.data + centroid)
