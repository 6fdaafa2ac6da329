"""Training loop: ELBO (optionally annealed) or optimal-transport objectives,
plain SGD with a stepped learning-rate decay, per-epoch checkpoints and
structured logging. Deterministic for a fixed run configuration and seed."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .autodiff import Tensor, backward
from .coarsen import build_bead_graph, order_beads
from .corpus import ToyMolecule, make_corpus
from .decoder import decode_ar, decode_ot
from .encoder import center, encode
from .latent import kl_divergence, posterior_params, prior_params, sample
from .losses import LossWeights, aligned_mse, distance_loss, elbo_loss, ot_loss
from .nn import ModelConfig
from .params import ParameterStore

log = logging.getLogger("coarsegen.train")

PRESETS = ("elbo-ar", "elbo-annealed", "ot")


@dataclass
class RunConfig:
    preset: str = "elbo-ar"
    epochs: int = 3
    lr: float = 1e-3
    lr_decay: float = 0.2          # multiplier applied per epoch
    batch_size: int = 1
    seed: int = 0
    corpus_size: int = 8
    corpus_seed: int = 0
    sigma: float = 0.3
    n_truth: int = 5
    ot_samples: int = 3            # generated ensemble size for the OT preset
    optimizer: str = "sgd"         # "sgd" (default) or "adam"
    layers: int = 2
    hidden_dim: int = 16
    latent_channels: int = 8
    share_paths: bool = True
    tie_layers: bool = False
    weights: LossWeights = field(default_factory=LossWeights)
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; choose from {PRESETS}")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.preset == "elbo-annealed":
            self.weights.anneal_beta1 = True

    def model_config(self) -> ModelConfig:
        return ModelConfig(hidden_dim=self.hidden_dim,
                           latent_channels=self.latent_channels,
                           layers=self.layers,
                           share_paths=self.share_paths,
                           tie_layers=self.tie_layers)

    def config_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def lr_at(self, epoch: int) -> float:
        return self.lr * self.lr_decay ** epoch


@dataclass
class TrainResult:
    store: ParameterStore
    history: list[dict]            # one breakdown dict per optimizer step
    config: RunConfig


def molecule_loss(store: ParameterStore, cfg: ModelConfig, mol: ToyMolecule,
                  run: RunConfig, epoch: int,
                  rng: np.random.Generator) -> tuple[Tensor, dict[str, float]]:
    """Differentiable loss for one molecule under the configured preset."""
    graph, mapping = mol.graph, mol.mapping
    gt_c, _ = center(mol.gt.coords)
    ref_c, _ = center(mol.ref.coords)

    if run.preset == "ot":
        # reconstruct the first K truth conformers through their posteriors;
        # the transport plan resolves the unordered matching against the same
        # K truths (square plans can reach zero cost at perfect reconstruction)
        truth = [center(t.coords)[0] for t in mol.truth_ensemble]
        k = min(run.ot_samples, len(truth))
        truth = truth[:k]
        generated = []
        kl_total = None
        for t_c in truth:
            z_t, z_ref = encode(store, cfg, graph, mapping, t_c, ref_c)
            post = posterior_params(store, cfg, z_t, z_ref)
            prior = prior_params(store, cfg, z_ref)
            term = kl_divergence(post, prior)
            kl_total = term if kl_total is None else kl_total + term
            z = sample(post, rng)
            generated.append(decode_ot(store, cfg, z, mapping, ref_c, graph))
        kl = kl_total * (1.0 / k)
        recon, _plan = ot_loss(generated, truth, graph)
        b1 = run.weights.beta1_at(epoch)
        total = recon + b1 * kl
        breakdown = {"recon": float(recon.data), "kl": float(kl.data),
                     "dist": 0.0, "beta1": b1, "beta2": 0.0,
                     "total": float(total.data)}
        return total, breakdown

    z_gt, z_ref = encode(store, cfg, graph, mapping, gt_c, ref_c)
    post = posterior_params(store, cfg, z_gt, z_ref)
    prior = prior_params(store, cfg, z_ref)
    kl = kl_divergence(post, prior)

    order = order_beads(mapping, build_bead_graph(graph, mapping, cfg.aux_cutoff))
    z = sample(post, rng)
    coords = decode_ar(store, cfg, z, mapping, ref_c, graph, order,
                       teacher_coords=gt_c)
    recon = aligned_mse(coords, gt_c)
    dist = distance_loss(coords, gt_c, graph)
    return elbo_loss(recon, kl, dist, run.weights, epoch)


def _check_finite(breakdown: dict[str, float], step: int) -> None:
    if not all(math.isfinite(v) for v in breakdown.values()):
        raise RuntimeError(
            f"non-finite loss at step {step}: "
            + " ".join(f"{k}={v:g}" for k, v in breakdown.items()))


def checkpoint_path(run: RunConfig, epoch: int) -> str:
    assert run.checkpoint_dir is not None
    return os.path.join(run.checkpoint_dir, f"ckpt_epoch{epoch}.bin")


def train(run: RunConfig, store: ParameterStore | None = None,
          start_epoch: int = 0, corpus: list[ToyMolecule] | None = None) -> TrainResult:
    """Run (or resume from ``start_epoch``) the configured training job.

    Per-epoch RNG streams are derived from the seed and epoch index, so a
    resume from an epoch-boundary checkpoint replays the run bit-exactly.
    """
    if store is None:
        store = ParameterStore(seed=run.seed)
    cfg = run.model_config()
    if corpus is None:
        corpus = make_corpus(run.corpus_size, run.corpus_seed,
                             sigma=run.sigma, n_truth=run.n_truth)
    if run.checkpoint_dir:
        os.makedirs(run.checkpoint_dir, exist_ok=True)

    history: list[dict] = []
    for epoch in range(start_epoch, run.epochs):
        rng = np.random.default_rng(run.seed + 1000 * (epoch + 1))
        lr = run.lr_at(epoch)
        for batch_start in range(0, len(corpus), run.batch_size):
            batch = corpus[batch_start:batch_start + run.batch_size]
            store.zero_grad()
            total = Tensor(0.0)
            agg: dict[str, float] = {}
            for mol in batch:
                loss, breakdown = molecule_loss(store, cfg, mol, run, epoch, rng)
                total = total + loss
                for k, v in breakdown.items():
                    agg[k] = agg.get(k, 0.0) + v / len(batch)
            backward(total * (1.0 / len(batch)))
            _check_finite(agg, store.step)
            if run.optimizer == "adam":
                store.adam_step(lr)
            else:
                store.sgd_step(lr)
            agg.update(epoch=epoch, step=store.step, lr=lr)
            history.append(agg)
            log.info("step=%d epoch=%d lr=%g recon=%.6f kl=%.6f dist=%.6f "
                     "beta1=%g beta2=%g total=%.6f",
                     store.step, epoch, lr, agg["recon"], agg["kl"],
                     agg["dist"], agg["beta1"], agg["beta2"], agg["total"])
        if run.checkpoint_dir:
            store.save(checkpoint_path(run, epoch))
    return TrainResult(store=store, history=history, config=run)


def resume(run: RunConfig, checkpoint: str,
           corpus: list[ToyMolecule] | None = None) -> TrainResult:
    """Continue a run from an epoch checkpoint written by :func:`train`."""
    store = ParameterStore.load(checkpoint)
    steps_per_epoch = math.ceil(
        max(run.corpus_size if corpus is None else len(corpus), 1) / run.batch_size)
    completed = store.step // steps_per_epoch
    return train(run, store=store, start_epoch=completed, corpus=corpus)
