"""Differentiable building blocks: shallow MLPs, vector-neuron layers,
learned RBF expansions and scaled dot-product attention.

All blocks read their weights from a :class:`~coarsegen.params.ParameterStore`
under a caller-supplied name prefix; creating and applying a block are the
same call, so parameters materialize lazily on first use.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, concat, softmax
from .molio import FEATURE_DIM
from .params import ParameterStore

_VN_EPS = 1e-12


@dataclass
class ModelConfig:
    hidden_dim: int = 32          # D, invariant feature width
    latent_channels: int = 32     # F, equivariant latent channels
    layers: int = 5               # encoder and decoder message-passing depth
    n_rbf: int = 16
    rbf_max: float = 10.0
    eta_x: float = 0.5
    eta_h: float = 0.5
    eta_pool_x: float = 0.5
    eta_pool_h: float = 0.5
    eta_cg_h: float = 0.5
    eta_cg_v: float = 0.5
    beta_update: float = 0.5      # decoder feature-update weight
    share_paths: bool = True      # tie ground-truth / reference path weights
    tie_layers: bool = False      # tie weights across message-passing layers
    feat_dim: int = FEATURE_DIM
    bond_feat_dim: int = 4
    logvar_min: float = -10.0
    logvar_max: float = 10.0
    aux_cutoff: float = 4.0

    @property
    def rbf_centers(self) -> np.ndarray:
        return np.linspace(0.0, self.rbf_max, self.n_rbf)

    @property
    def rbf_width(self) -> float:
        return self.rbf_max / max(self.n_rbf - 1, 1)

    def layer_tag(self, layer: int) -> str:
        return "shared" if self.tie_layers else f"l{layer}"

    def path_tag(self, ref_path: bool) -> str:
        return "ref" if (ref_path and not self.share_paths) else "main"


def mlp(store: ParameterStore, prefix: str, x: Tensor,
        d_hidden: int, d_out: int) -> Tensor:
    """Two affine layers with a SiLU between them."""
    d_in = x.shape[-1]
    w0 = store.new(f"{prefix}.w0", (d_in, d_hidden), fan_in=d_in)
    b0 = store.new(f"{prefix}.b0", (d_hidden,), fan_in=d_in)
    w1 = store.new(f"{prefix}.w1", (d_hidden, d_out), fan_in=d_hidden)
    b1 = store.new(f"{prefix}.b1", (d_out,), fan_in=d_hidden)
    return (x @ w0 + b0).silu() @ w1 + b1


def affine(store: ParameterStore, prefix: str, x: Tensor, d_out: int) -> Tensor:
    d_in = x.shape[-1]
    w = store.new(f"{prefix}.w", (d_in, d_out), fan_in=d_in)
    b = store.new(f"{prefix}.b", (d_out,), fan_in=d_in)
    return x @ w + b


def vn_linear(store: ParameterStore, name: str, v: Tensor, f_out: int) -> Tensor:
    """Channel-mixing linear map acting on the left of (..., F, 3) features."""
    f_in = v.shape[-2]
    w = store.new(name, (f_out, f_in), fan_in=f_in)
    return w @ v

def vn_nonlin(store: ParameterStore, name: str, v: Tensor) -> Tensor:
    """Vector-neuron direction-projection nonlinearity.

    Channels whose inner product with a learned direction is negative are
    projected onto the plane orthogonal to that direction; the map commutes
    with right-rotation of the 3-vectors.
    """
    f = v.shape[-2]
    u = store.new(name, (f, f), fan_in=f)
    d = u @ v
    dot = (v * d).sum(axis=-1, keepdims=True)
    dnorm2 = (d * d).sum(axis=-1, keepdims=True) + _VN_EPS
    mask = Tensor((dot.data < 0.0).astype(np.float64))
    return v - mask * (dot / dnorm2) * d


def vn_mlp(store: ParameterStore, prefix: str, v: Tensor,
           f_hidden: int, f_out: int) -> Tensor:
    """Two vector-neuron linear maps with the projection nonlinearity between."""
    h = vn_linear(store, f"{prefix}.w0", v, f_hidden)
    h = vn_nonlin(store, f"{prefix}.u", h)
    return vn_linear(store, f"{prefix}.w1", h, f_out)


def vn_norms(v: Tensor) -> Tensor:
    """Per-channel Euclidean norms of (..., F, 3) features (rotation invariant)."""
    return ((v * v).sum(axis=-1) + _VN_EPS).sqrt()


def rbf_expand(store: ParameterStore, prefix: str, d: Tensor,
               centers: np.ndarray, width: float, d_out: int) -> Tensor:
    """Gaussian radial basis of a distance, through a learned linear map."""
    if np.any(d.data < 0.0):
        raise ValueError("distances must be nonnegative")
    z = (d.reshape(-1, 1) - Tensor(centers)) / width
    basis = (-0.5 * z * z).exp()
    return affine(store, prefix, basis, d_out)


def attention(store: ParameterStore, prefix: str, h_query: Tensor,
              h_key: Tensor) -> Tensor:
    """Scaled dot-product cross attention; softmax runs over the senders."""
    d = h_query.shape[-1]
    q = affine(store, f"{prefix}.q", h_query, d)
    k = affine(store, f"{prefix}.k", h_key, d)
    w = store.new(f"{prefix}.w", (h_key.shape[-1], d), fan_in=h_key.shape[-1])
    scores = (q @ k.T) / np.sqrt(d)
    coeff = softmax(scores, axis=1)
    return coeff @ (h_key @ w)
