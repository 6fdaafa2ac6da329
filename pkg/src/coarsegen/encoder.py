"""Hierarchical graph-matching encoder.

Each layer stacks a fine-grained message-passing module, an atom-to-bead
pooling module and a coarse-grained point-convolution module. Two paths run
side by side (ground truth and approximate reference); cross attention flows
only from the reference path into the ground-truth path, so the reference
latent never depends on ground-truth coordinates. The output per path is an
equivariant latent tensor of shape (beads, channels, 3).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, concat, segment_sum
from .coarsen import BeadGraph, CGMapping, build_bead_graph
from .molio import MolecularGraph
from .nn import ModelConfig, affine, attention, mlp, rbf_expand, vn_mlp, vn_norms
from .params import ParameterStore

_DIST_EPS = 1e-12

GT = "gt"
REF = "ref"


def center(coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Subtract the centroid; returns (centered coordinates, centroid)."""
    coords = np.asarray(coords, dtype=np.float64)
    centroid = coords.mean(axis=0)
    return coords - centroid, centroid


@dataclass
class FgState:
    h: Tensor        # n x D invariant features
    x: Tensor        # n x 3 coordinates
    x0: Tensor       # n x 3 layer-0 anchor
    f: Tensor        # n x D original embedded features (re-fed each layer)


@dataclass
class CgState:
    H: Tensor        # N x D invariant bead features
    X: Tensor        # N x 3 bead coordinates
    X0: Tensor       # N x 3 anchor
    H0: Tensor       # N x D original pooled features
    v: Tensor        # N x F x 3 equivariant features (zero-initialized)


@dataclass
class EdgeSet:
    src: np.ndarray
    dst: np.ndarray
    feats: np.ndarray    # per directed edge
    inv_degree: np.ndarray  # 1/deg per receiver (0 for isolated nodes)


def directed_edges(graph: MolecularGraph) -> EdgeSet:
    """Covalent + auxiliary edges, both directions, with bond-type one-hots."""
    order_idx = {"single": 0, "double": 1, "triple": 2, "aromatic": 3}
    src, dst, feats = [], [], []
    for b in graph.bonds:
        f = np.zeros(4)
        f[order_idx[b.order]] = 1.0
        for s, d in ((b.i, b.j), (b.j, b.i)):
            src.append(s)
            dst.append(d)
            feats.append(f)
    for i, j in graph.aux_edges:
        for s, d in ((i, j), (j, i)):
            src.append(s)
            dst.append(d)
            feats.append(np.zeros(4))
    n = graph.n_atoms
    src_a = np.asarray(src, dtype=np.intp)
    dst_a = np.asarray(dst, dtype=np.intp)
    deg = np.bincount(dst_a, minlength=n).astype(np.float64)
    inv = np.where(deg > 0, 1.0 / np.maximum(deg, 1.0), 0.0)
    f_a = np.stack(feats) if feats else np.zeros((0, 4))
    return EdgeSet(src_a, dst_a, f_a, inv)


def bead_edge_set(bead_graph: BeadGraph) -> EdgeSet:
    src, dst = [], []
    for i, j in bead_graph.edges:
        src += [i, j]
        dst += [j, i]
    n = bead_graph.n_beads
    src_a = np.asarray(src, dtype=np.intp)
    dst_a = np.asarray(dst, dtype=np.intp)
    deg = np.bincount(dst_a, minlength=n).astype(np.float64)
    inv = np.where(deg > 0, 1.0 / np.maximum(deg, 1.0), 0.0)
    return EdgeSet(src_a, dst_a, np.zeros((len(src), 0)), inv)


def _pair_dist2(x: Tensor, src, dst) -> Tensor:
    diff = x[dst] - x[src]
    return (diff * diff).sum(axis=1, keepdims=True)


def init_fg_state(store: ParameterStore, cfg: ModelConfig, graph: MolecularGraph,
                  coords: np.ndarray, ref_path: bool) -> FgState:
    ptag = cfg.path_tag(ref_path)
    feats = Tensor(graph.feature_matrix())
    h0 = affine(store, f"enc.{ptag}.emb", feats, cfg.hidden_dim)
    x = Tensor(coords)
    return FgState(h=h0, x=x, x0=x, f=h0)


def init_cg_state(cfg: ModelConfig, fg: FgState, mapping: CGMapping) -> CgState:
    assignment = np.asarray(mapping.assignment, dtype=np.intp)
    n_beads = mapping.n_beads
    sizes = np.bincount(assignment, minlength=n_beads).astype(np.float64)
    inv_sizes = Tensor((1.0 / sizes)[:, None])
    H0 = segment_sum(fg.h, assignment, n_beads) * inv_sizes
    X0 = segment_sum(fg.x, assignment, n_beads) * inv_sizes
    v0 = Tensor(np.zeros((n_beads, cfg.latent_channels, 3)))
    return CgState(H=H0, X=X0, X0=X0, H0=H0, v=v0)


def fg_layer(store: ParameterStore, cfg: ModelConfig, layer: int,
             states: dict[str, FgState], edges: EdgeSet) -> dict[str, FgState]:
    """One fine-grained update of both paths; attention flows ref -> gt only."""
    lt = cfg.layer_tag(layer)
    D = cfg.hidden_dim
    out: dict[str, FgState] = {}
    messages: dict[str, tuple[Tensor, Tensor]] = {}
    n = states[next(iter(states))].h.shape[0]

    for path, st in states.items():
        pfx = f"enc.{cfg.path_tag(path == REF)}.fg.{lt}"
        d2 = _pair_dist2(st.x, edges.src, edges.dst)
        m_in = concat([st.h[edges.dst], st.h[edges.src], d2, Tensor(edges.feats)], axis=1)
        m_e = mlp(store, f"{pfx}.phi_e", m_in, D, D)
        m_node = segment_sum(m_e, edges.dst, n) * Tensor(edges.inv_degree[:, None])
        messages[path] = (m_e, m_node)

    for path, st in states.items():
        pfx = f"enc.{cfg.path_tag(path == REF)}.fg.{lt}"
        m_e, m_node = messages[path]
        gate = mlp(store, f"{pfx}.phi_x", m_e, D, 1)
        diff = st.x[edges.dst] - st.x[edges.src]
        dist = (_pair_dist2(st.x, edges.src, edges.dst) + _DIST_EPS).sqrt()
        # distance-normalized, degree-averaged update keeps deep stacks stable
        coord_sum = segment_sum(diff * (gate / (dist + 1.0)), edges.dst,
                                n) * Tensor(edges.inv_degree[:, None])
        x_new = cfg.eta_x * st.x0 + (1.0 - cfg.eta_x) * st.x + coord_sum
        if path == GT and REF in states:
            u = attention(store, f"enc.fg.{lt}.att", st.h, states[REF].h)
        else:
            u = Tensor(np.zeros((n, D)))
        h_in = concat([st.h, m_node, u, st.f], axis=1)
        h_new = (1.0 - cfg.eta_h) * st.h + cfg.eta_h * mlp(
            store, f"{pfx}.phi_h", h_in, D, D)
        out[path] = FgState(h=h_new, x=x_new, x0=st.x0, f=st.f)
    return out


def pool_layer(store: ParameterStore, cfg: ModelConfig, layer: int,
               fg: FgState, cg: CgState, mapping: CGMapping,
               ref_path: bool) -> CgState:
    """Pool fine-grained state into beads; the fine state is left unchanged."""
    lt = cfg.layer_tag(layer)
    D = cfg.hidden_dim
    pfx = f"enc.{cfg.path_tag(ref_path)}.pool.{lt}"
    atom_idx = np.arange(len(mapping.assignment), dtype=np.intp)
    bead_idx = np.asarray(mapping.assignment, dtype=np.intp)
    n_beads = mapping.n_beads
    sizes = np.bincount(bead_idx, minlength=n_beads).astype(np.float64)
    inv_sizes = Tensor((1.0 / sizes)[:, None])

    diff = cg.X[bead_idx] - fg.x[atom_idx]
    d2 = (diff * diff).sum(axis=1, keepdims=True)
    ones = Tensor(np.ones((len(atom_idx), 1)))
    m_in = concat([cg.H[bead_idx], fg.h[atom_idx], d2, ones], axis=1)
    m_e = mlp(store, f"{pfx}.phi_e", m_in, D, D)
    m_bead = segment_sum(m_e, bead_idx, n_beads) * inv_sizes

    gate = mlp(store, f"{pfx}.phi_x", m_e, D, 1)
    dist = (d2 + _DIST_EPS).sqrt()
    coord_sum = segment_sum(diff * (gate / (dist + 1.0)), bead_idx,
                            n_beads) * inv_sizes
    X_new = cfg.eta_pool_x * cg.X0 + (1.0 - cfg.eta_pool_x) * cg.X + coord_sum

    h_in = concat([cg.H, m_bead, cg.H0], axis=1)
    H_new = (1.0 - cfg.eta_pool_h) * cg.H + cfg.eta_pool_h * mlp(
        store, f"{pfx}.phi_h", h_in, D, D)
    return CgState(H=H_new, X=X_new, X0=cg.X0, H0=cg.H0, v=cg.v)


def cg_layer(store: ParameterStore, cfg: ModelConfig, layer: int,
             states: dict[str, CgState], edges: EdgeSet) -> dict[str, CgState]:
    """Point-convolution update of bead features and equivariant channels."""
    lt = cfg.layer_tag(layer)
    D, F = cfg.hidden_dim, cfg.latent_channels
    centers, width = cfg.rbf_centers, cfg.rbf_width
    out: dict[str, CgState] = {}
    aggregates: dict[str, tuple[Tensor, Tensor]] = {}
    n_beads = states[next(iter(states))].H.shape[0]

    for path, st in states.items():
        pfx = f"enc.{cfg.path_tag(path == REF)}.cg.{lt}"
        # equivariant/invariant feature mixing
        h1 = mlp(store, f"{pfx}.phi1",
                 concat([st.H, vn_norms(vn_mlp(store, f"{pfx}.vn1", st.v, F, F))], axis=1),
                 D, D)
        h2 = mlp(store, f"{pfx}.phi2",
                 concat([st.H, vn_norms(vn_mlp(store, f"{pfx}.vn2", st.v, F, F))], axis=1),
                 D, F)
        gate = mlp(store, f"{pfx}.phi3", st.H, D, F)
        v1 = gate.reshape(n_beads, F, 1) * vn_mlp(store, f"{pfx}.vn3", st.v, F, F)

        if len(edges.src):
            r = st.X[edges.dst] - st.X[edges.src]
            dist = ((r * r).sum(axis=1) + _DIST_EPS).sqrt()
            k1 = rbf_expand(store, f"{pfx}.ker1", dist, centers, width, D)
            k2 = rbf_expand(store, f"{pfx}.ker2", dist, centers, width, F)
            k3 = rbf_expand(store, f"{pfx}.ker3", dist, centers, width, F)
            e = len(edges.src)
            mh_e = k1 * h1[edges.src]
            mv_e = (k2.reshape(e, F, 1) * v1[edges.src]
                    + (k3 * h2[edges.src]).reshape(e, F, 1) * r.reshape(e, 1, 3))
            mh = segment_sum(mh_e, edges.dst, n_beads)
            mv = segment_sum(mv_e, edges.dst, n_beads)
        else:
            mh = Tensor(np.zeros((n_beads, D)))
            mv = Tensor(np.zeros((n_beads, F, 3)))
        aggregates[path] = (mh, mv)

    for path, st in states.items():
        pfx = f"enc.{cfg.path_tag(path == REF)}.cg.{lt}"
        mh, mv = aggregates[path]
        if path == GT and REF in states:
            u = attention(store, f"enc.cg.{lt}.att", st.H, states[REF].H)
        else:
            u = Tensor(np.zeros((n_beads, D)))
        H_new = (1.0 - cfg.eta_cg_h) * st.H + cfg.eta_cg_h * mlp(
            store, f"{pfx}.upd_h", concat([st.H, mh, u], axis=1), D, D)
        v_new = (1.0 - cfg.eta_cg_v) * st.v + cfg.eta_cg_v * vn_mlp(
            store, f"{pfx}.vn4", concat([st.v, mv], axis=1), F, F)
        out[path] = CgState(H=H_new, X=st.X, X0=st.X0, H0=st.H0, v=v_new)
    return out


def _encode_paths(store: ParameterStore, cfg: ModelConfig, graph: MolecularGraph,
                  mapping: CGMapping, coords: dict[str, np.ndarray]) -> dict[str, Tensor]:
    """Run the stacked fg/pool/cg layers; coords must be pre-centered."""
    edges = directed_edges(graph)
    fg_states = {p: init_fg_state(store, cfg, graph, c, ref_path=(p == REF))
                 for p, c in coords.items()}
    cg_states = {p: init_cg_state(cfg, st, mapping) for p, st in fg_states.items()}
    bead_edges = bead_edge_set(build_bead_graph(graph, mapping, cfg.aux_cutoff))

    for layer in range(cfg.layers):
        fg_states = fg_layer(store, cfg, layer, fg_states, edges)
        cg_states = {p: pool_layer(store, cfg, layer, fg_states[p], cg_states[p],
                                   mapping, ref_path=(p == REF))
                     for p in fg_states}
        cg_states = cg_layer(store, cfg, layer, cg_states, bead_edges)
    return {p: st.v for p, st in cg_states.items()}


def encode(store: ParameterStore, cfg: ModelConfig, graph: MolecularGraph,
           mapping: CGMapping, gt_coords: np.ndarray,
           ref_coords: np.ndarray) -> tuple[Tensor, Tensor]:
    """Encode both conformers into latent tensors (Z for ground truth, Z~ for
    the reference). Inputs are centered internally."""
    gt_c, _ = center(gt_coords)
    ref_c, _ = center(ref_coords)
    latents = _encode_paths(store, cfg, graph, mapping, {GT: gt_c, REF: ref_c})
    return latents[GT], latents[REF]


def encode_reference(store: ParameterStore, cfg: ModelConfig, graph: MolecularGraph,
                     mapping: CGMapping, ref_coords: np.ndarray) -> Tensor:
    """Encode only the reference path (used by the learned prior at inference)."""
    ref_c, _ = center(ref_coords)
    return _encode_paths(store, cfg, graph, mapping, {REF: ref_c})[REF]
