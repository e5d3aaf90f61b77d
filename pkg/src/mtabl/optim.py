"""Mini-batch training: gradient accumulation, Adam / SGD-momentum updates,
the [0, 1] projection of the attention mixing coefficient, and epoch
orchestration with seeded shuffling.

The loop is sequential over optimizer steps; within a batch, per-sample
gradients are summed in sample order and averaged, which keeps two runs
with the same seed, config and data bit-identical. Model selection keeps
the parameters of the best validation macro-F1 epoch (best training loss
when there is no validation split).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ConfigurationError, DivergenceError
from .layers import MTABLParams, TABLParams, params_from_dict, params_to_dict
from .losses import PROB_FLOOR, cross_entropy, inverse_frequency_weights, uniform_weights
from .metrics import EvalReport, evaluate
from .network import (
    NetworkSpec,
    attention_lambdas,
    clone_network_params,
    init_network_params,
    network_backward,
    network_forward,
    predict_labels,
)

ALGORITHMS = ("adam", "sgd-momentum")


@dataclass
class OptimConfig:
    algorithm: str = "adam"
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    momentum: float = 0.9
    batch_size: int = 256
    max_epochs: int = 200
    lr_decay: float = 0.1
    lr_patience: int = 10
    seed: int = 0
    class_weighting: str = "inverse"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"algorithm must be one of {ALGORITHMS}")
        if self.learning_rate < 0:
            raise ConfigurationError("learning_rate must be nonnegative")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigurationError("beta1 and beta2 must lie in [0, 1)")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigurationError("batch_size and max_epochs must be >= 1")
        if self.class_weighting not in ("inverse", "uniform"):
            raise ConfigurationError("class_weighting must be 'inverse' or 'uniform'")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class TrainState:
    """Optimizer accumulators; shapes mirror the parameters exactly."""

    step_count: int
    learning_rate: float
    first_moments: list[dict]
    second_moments: list[dict]
    velocities: list[dict]

    @classmethod
    def initial(cls, params: list, cfg: OptimConfig) -> "TrainState":
        def zeros_like_tree(p):
            return {
                name: 0.0 if isinstance(value, float) else np.zeros_like(value)
                for name, value in params_to_dict(p).items()
            }

        return cls(
            step_count=0,
            learning_rate=cfg.learning_rate,
            first_moments=[zeros_like_tree(p) for p in params],
            second_moments=[zeros_like_tree(p) for p in params],
            velocities=[zeros_like_tree(p) for p in params],
        )


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    learning_rate: float
    lambdas: list[float]
    clamp_events: int
    val_report: EvalReport | None = None

    def to_dict(self) -> dict:
        d = {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "learning_rate": self.learning_rate,
            "lambdas": self.lambdas,
            "clamp_events": self.clamp_events,
        }
        if self.val_report is not None:
            d.update(
                val_accuracy=self.val_report.accuracy,
                val_precision=self.val_report.macro_precision,
                val_recall=self.val_report.macro_recall,
                val_f1=self.val_report.macro_f1,
            )
        return d


def _apply_constraints(p):
    """Clamp lam onto [0, 1]; re-pin attention diagonals when frozen."""
    if isinstance(p, (TABLParams, MTABLParams)):
        p.lam = min(max(p.lam, 0.0), 1.0)
        assert 0.0 <= p.lam <= 1.0
        if p.fix_attention_diag:
            mats = p.heads if isinstance(p, MTABLParams) else [p.W]
            for w in mats:
                np.fill_diagonal(w, 1.0 / w.shape[0])
    return p


def step(params: list, grads: list, state: TrainState, cfg: OptimConfig):
    """One optimizer update; returns the new parameter list and the state.

    Adam uses bias-corrected moment estimates; SGD uses classic momentum.
    The mixing coefficient is projected back onto [0, 1] after every update.
    """
    lr = state.learning_rate
    t = state.step_count + 1
    new_params = []
    for p, g, m, v, vel in zip(params, grads, state.first_moments,
                               state.second_moments, state.velocities):
        values = params_to_dict(p)
        updated = {}
        for name, value in values.items():
            grad = g[name]
            if cfg.algorithm == "adam":
                m[name] = cfg.beta1 * m[name] + (1.0 - cfg.beta1) * grad
                v[name] = cfg.beta2 * v[name] + (1.0 - cfg.beta2) * (grad * grad)
                m_hat = m[name] / (1.0 - cfg.beta1 ** t)
                v_hat = v[name] / (1.0 - cfg.beta2 ** t)
                new_value = value - lr * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
            else:
                vel[name] = cfg.momentum * vel[name] + grad
                new_value = value - lr * vel[name]
            updated[name] = float(new_value) if isinstance(value, float) else new_value
        new_params.append(_apply_constraints(params_from_dict(p, updated)))
    state.step_count = t
    return new_params, state


def _first_nonfinite_layer(caches) -> str:
    for i, cache in enumerate(caches):
        for name in ("xbar", "z", "y"):
            value = getattr(cache, name)
            if value is not None and not np.isfinite(value).all():
                return f"layer {i} ({cache.kind})"
    return "loss"


def _first_nonfinite_params(params) -> str:
    from .layers import param_items

    for i, p in enumerate(params):
        for name, value in param_items(p):
            if not np.isfinite(np.asarray(value)).all():
                return f"layer {i} parameters ({name})"
    return "the forward pass (overflowing attention scores)"


def batch_gradients(spec: NetworkSpec, params: list, batch, class_weights):
    """Mean loss and mean per-sample gradients over one batch.

    Returns (loss, grads, clamp_events) where grads mirrors the parameter
    structure and clamp_events counts samples whose true-class probability
    had to be floored before the log.
    """
    if not batch:
        raise ConfigurationError("batch must be nonempty")
    total: list[dict] | None = None
    loss_sum = 0.0
    clamped = 0
    for sample in batch:
        try:
            probs, caches = network_forward(sample.x, spec, params)
        except AssertionError:
            # Masks go NaN only when the scores overflowed upstream.
            raise DivergenceError(
                f"non-finite attention mask, {_first_nonfinite_params(params)}"
            ) from None
        if probs[sample.label, 0] < PROB_FLOOR:
            clamped += 1
        loss, grad_scores = cross_entropy(probs, sample.label, class_weights)
        if not math.isfinite(loss):
            raise DivergenceError(
                f"non-finite loss, first bad values in {_first_nonfinite_layer(caches)}"
            )
        loss_sum += loss
        grads, _ = network_backward(spec, params, caches, grad_scores,
                                    grad_wrt_preactivation=True)
        if total is None:
            total = grads
        else:
            for acc, g in zip(total, grads):
                for name in acc:
                    acc[name] = acc[name] + g[name]
    inv = 1.0 / len(batch)
    for acc in total:
        for name in acc:
            acc[name] = acc[name] * inv
    return loss_sum * inv, total, clamped


def _class_weights(cfg: OptimConfig, dataset: Dataset):
    if cfg.class_weighting == "uniform" or not dataset.train:
        return uniform_weights()
    return inverse_frequency_weights(dataset.labels("train"))


def train(spec: NetworkSpec, dataset: Dataset, cfg: OptimConfig, *,
          initial_params: list | None = None, log_sink=None, on_step=None):
    """Full training run; returns (best parameters, list of EpochRecord).

    Shuffled mini-batches per epoch, mean-gradient updates, validation
    after every epoch. The learning rate is multiplied by ``lr_decay``
    whenever the selection metric fails to improve for ``lr_patience``
    epochs. ``log_sink`` receives every EpochRecord as it is produced;
    ``on_step`` is called with (params, state) after every optimizer step.
    """
    if not dataset.train:
        raise ConfigurationError("training partition is empty")
    if dataset.sample_dims() != spec.input_dims:
        raise ConfigurationError(
            f"dataset samples are {dataset.sample_dims()}, network expects {spec.input_dims}"
        )
    rng = np.random.default_rng(cfg.seed)
    params = initial_params if initial_params is not None else init_network_params(spec, rng)
    state = TrainState.initial(params, cfg)
    weights = _class_weights(cfg, dataset)

    best_params = clone_network_params(params)
    best_metric = -math.inf
    stale = 0
    records: list[EpochRecord] = []
    n = len(dataset.train)

    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        loss_sum = 0.0
        clamp_events = 0
        for start in range(0, n, cfg.batch_size):
            batch = [dataset.train[i] for i in order[start:start + cfg.batch_size]]
            try:
                loss, grads, clamped = batch_gradients(spec, params, batch, weights)
            except DivergenceError as err:
                raise DivergenceError(
                    f"epoch {epoch}, batch {start // cfg.batch_size}: {err}"
                ) from err
            params, state = step(params, grads, state, cfg)
            if on_step is not None:
                on_step(params, state)
            loss_sum += loss * len(batch)
            clamp_events += clamped

        val_report = None
        if dataset.validation:
            preds = predict_labels(spec, params, dataset.validation)
            val_report = evaluate(preds, dataset.labels("validation"))
            metric = val_report.macro_f1
        else:
            metric = -loss_sum / n

        record = EpochRecord(
            epoch=epoch, train_loss=loss_sum / n, learning_rate=state.learning_rate,
            lambdas=attention_lambdas(params), clamp_events=clamp_events,
            val_report=val_report,
        )
        records.append(record)
        if log_sink is not None:
            log_sink(record)

        if metric > best_metric:
            best_metric = metric
            best_params = clone_network_params(params)
            stale = 0
        else:
            stale += 1
            if stale >= cfg.lr_patience:
                state.learning_rate *= cfg.lr_decay
                stale = 0

    return best_params, records
