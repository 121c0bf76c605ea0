"""Training, early stopping and per-node uncertainty reports."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, fields
from typing import List, Optional

import numpy as np

from ..datasets import UNLABELED, GraphDataset
from ..diffmath import tensor as T
from ..diffmath.optim import AdamState, adam_step, clip_grad_norm
from ..propagation import PprConfig, ppr_matrix, propagation_operator
from ..secondorder import UncertaintyReport, dirichlet_report, mixture_report, shannon_entropy
from ..sparse import spmm
from . import graph as G
from .postnet import (
    PostNetConfig,
    PostNetPredictor,
    class_logits,
    default_certainty_budget,
    feature_alphas_tensor,
)

log = logging.getLogger(__name__)


class TrainingDiverged(FloatingPointError):
    def __init__(self, epoch, reason):
        super().__init__(f"training diverged at epoch {epoch}: {reason}")
        self.epoch = epoch


@dataclass
class TrainConfig:
    model: str = G.LOP_GPN
    teleport_epsilon: float = 0.1
    power_iterations: int = 10
    sparsify_delta: Optional[float] = None
    hidden_dim: int = 64
    latent_dim: int = 16
    flow_layers: int = 8
    learning_rate: float = 1e-3
    max_epochs: int = 2000
    patience: int = 50
    entropy_weight: float = 1e-4
    grad_clip: Optional[float] = 10.0
    certainty_budget: Optional[float] = None

    def __post_init__(self):
        G.normalization_for(self.model)
        if self.max_epochs < 0 or self.patience < 1:
            raise ValueError("max_epochs must be >= 0 and patience >= 1")

    def ppr(self) -> PprConfig:
        return PprConfig(
            teleport_epsilon=self.teleport_epsilon,
            power_iterations=self.power_iterations,
            sparsify_delta=self.sparsify_delta,
            normalization=G.normalization_for(self.model),
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> TrainConfig:
        known = {f.name: f for f in fields(cls)}
        return cls(**{k: v for k, v in values.items() if k in known})


@dataclass
class TrainedModel:
    kind: str
    predictor: PostNetPredictor
    config: TrainConfig
    seed: int
    history: List[dict] = field(default_factory=list)
    best_epoch: int = 0

    def ppr(self) -> PprConfig:
        return self.config.ppr()


class _Graph:
    """Per-dataset constants: propagation operator, explicit PPR matrix."""

    def __init__(self, kind: str, dataset: GraphDataset, cfg: PprConfig):
        self.kind = kind
        self.cfg = cfg
        self.op = propagation_operator(dataset.adjacency, cfg)
        self.pi = ppr_matrix(dataset.adjacency, cfg) if kind == G.LOP_GPN else None


def _forward(model_kind, predictor, p, dataset, graph: _Graph):
    """Return the tape payload the losses need, plus posterior mean probabilities."""
    if model_kind == G.APPNP:
        probs = G.softmax_tensor(class_logits(p, dataset.features))
        prop = G.propagate_tensor(graph.op, probs, graph.cfg.power_iterations)
        return prop, prop.value
    alphas = feature_alphas_tensor(predictor, p, dataset.features)
    if model_kind == G.LOP_GPN:
        a = alphas.value
        return alphas, spmm(graph.pi, a / a.sum(axis=1, keepdims=True))
    agg = G.propagate_tensor(graph.op, alphas, graph.cfg.power_iterations)
    return agg, agg.value / agg.value.sum(axis=1, keepdims=True)


def _loss(model_kind, payload, dataset, graph, mask, entropy_weight):
    if model_kind == G.APPNP:
        return G.loss_appnp(payload, dataset.labels, mask)
    if model_kind == G.LOP_GPN:
        return G.loss_lop(payload, graph.pi, dataset.labels, mask, entropy_weight)
    return G.loss_gpn(payload, dataset.labels, mask, entropy_weight)


def _accuracy(mean_probs, labels, mask):
    idx = np.flatnonzero(mask & (labels != UNLABELED))
    if len(idx) == 0:
        return float("nan")
    return float(np.mean(np.argmax(mean_probs[idx], axis=1) == labels[idx]))


def build_predictor(dataset: GraphDataset, cfg: TrainConfig, seed: int) -> PostNetPredictor:
    train_labels = dataset.labels[dataset.train_mask & (dataset.labels != UNLABELED)]
    if len(train_labels) == 0:
        raise ValueError("dataset has no labeled training nodes")
    counts = np.bincount(train_labels, minlength=dataset.n_classes).astype(np.float64)
    budget = cfg.certainty_budget
    if budget is None:
        budget = default_certainty_budget(len(train_labels), cfg.latent_dim)
    pc = PostNetConfig(dataset.feature_dim, dataset.n_classes, cfg.hidden_dim, cfg.latent_dim, cfg.flow_layers)
    return PostNetPredictor.initialize(pc, counts / counts.sum(), budget, seed)


def train(kind: str, dataset: GraphDataset, cfg: Optional[TrainConfig] = None, seed: int = 0) -> TrainedModel:
    """Adam with global-norm clipping; early stopping on validation loss.

    The parameters with the lowest validation loss are returned.
    """
    if not dataset.has_split:
        raise ValueError("dataset needs train/val masks; call datasets.split first")
    cfg = TrainConfig(**{**(cfg.to_dict() if cfg else {}), "model": kind})
    predictor = build_predictor(dataset, cfg, seed)
    graph = _Graph(kind, dataset, cfg.ppr())
    train_mask = dataset.train_mask & (dataset.labels != UNLABELED)
    val_mask = dataset.val_mask & (dataset.labels != UNLABELED)
    if not val_mask.any():
        val_mask = train_mask

    names = sorted(predictor.params)
    state = AdamState(learning_rate=cfg.learning_rate)
    best = (np.inf, {k: v.copy() for k, v in predictor.params.items()}, 0)
    history = []
    stale = 0
    for epoch in range(1, cfg.max_epochs + 1):
        p = predictor.tensors(requires_grad=True)
        try:
            payload, mean_probs = _forward(kind, predictor, p, dataset, graph)
            train_loss = _loss(kind, payload, dataset, graph, train_mask, cfg.entropy_weight)
            val_loss = _loss(kind, payload, dataset, graph, val_mask, cfg.entropy_weight).item()
        except FloatingPointError as exc:
            raise TrainingDiverged(epoch, exc) from exc
        T.backward(train_loss)
        grads = [p[k].grad if p[k].grad is not None else np.zeros_like(p[k].value) for k in names]
        if not all(np.all(np.isfinite(g)) for g in grads):
            raise TrainingDiverged(epoch, "non-finite gradient")
        grads, grad_norm = clip_grad_norm(grads, cfg.grad_clip)
        history.append(
            {
                "epoch": epoch,
                "train_loss": train_loss.item(),
                "val_loss": val_loss,
                "val_accuracy": _accuracy(mean_probs, dataset.labels, val_mask),
                "grad_norm": grad_norm,
            }
        )
        if val_loss < best[0]:
            best = (val_loss, {k: v.copy() for k, v in predictor.params.items()}, epoch - 1)
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                log.info("%s seed %d: early stop at epoch %d", kind, seed, epoch)
                break
        updated = adam_step([predictor.params[k] for k in names], grads, state)
        predictor.params = dict(zip(names, updated))

    if history:
        # the last update may beat every evaluated state; evaluate it once
        p = predictor.tensors()
        payload, _ = _forward(kind, predictor, p, dataset, graph)
        final_val = _loss(kind, payload, dataset, graph, val_mask, cfg.entropy_weight).item()
        if not final_val < best[0]:
            predictor.params = best[1]
        else:
            best = (final_val, best[1], len(history))
    return TrainedModel(kind, predictor, cfg, seed, history, best_epoch=best[2])


@dataclass
class Prediction:
    report: UncertaintyReport
    predicted: np.ndarray
    mean_probs: np.ndarray


def predict_report(model: TrainedModel, dataset: GraphDataset) -> Prediction:
    """Per-node measures and argmax predictions (lowest class index wins ties).

    The APPNP baseline only provides ``tu``; its other measures are NaN.
    """
    kind = model.kind
    graph = _Graph(kind, dataset, model.ppr())
    p = model.predictor.tensors()
    if kind == G.APPNP:
        probs = G.softmax_tensor(class_logits(p, dataset.features)).value
        for _ in range(graph.cfg.power_iterations):
            probs = spmm(graph.op, probs)
        nan = np.full(dataset.n_nodes, np.nan)
        report = UncertaintyReport(tu=shannon_entropy(probs), au=nan, eu=nan, eu_pc=nan, eu_so=nan)
        return Prediction(report, np.argmax(probs, axis=1), probs)
    alphas = feature_alphas_tensor(model.predictor, p, dataset.features).value
    if kind == G.LOP_GPN:
        report = mixture_report(graph.pi, alphas)
        mean_probs = spmm(graph.pi, alphas / alphas.sum(axis=1, keepdims=True))
    else:
        agg = alphas
        for _ in range(graph.cfg.power_iterations):
            agg = spmm(graph.op, agg)
        report = dirichlet_report(agg)
        mean_probs = agg / agg.sum(axis=1, keepdims=True)
    return Prediction(report, np.argmax(mean_probs, axis=1), mean_probs)


def accuracy(prediction: Prediction, dataset: GraphDataset, mask) -> float:
    return _accuracy(prediction.mean_probs, dataset.labels, np.asarray(mask, bool))
