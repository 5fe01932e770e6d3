"""Training loops for the two precoder networks.

Both follow the same recipe: epochs of mini-batch steps where the loss is
the unsupervised sum-rate objective (per-codeword rate terms recomputed
inside every step), Adam with decoupled weight decay on the weights only,
and reduce-on-plateau learning-rate scheduling.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .config import TrainParams
from .losses import CodebookTensors, loss_afp, loss_hbf
from .network import Network, NetworkSpec
from .rand import rng_stream

logger = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-6
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(net: Network, state: AdamState) -> None:
    """One Adam update from the gradients stored on the parameters.

    Weight decay is decoupled and applied to weight matrices only (not
    biases or batch-norm parameters).
    """
    state.step_count += 1
    t = state.step_count
    bias1 = 1.0 - state.beta1 ** t
    bias2 = 1.0 - state.beta2 ** t
    for name, param in net.params.items():
        grad = param.grad
        if grad is None:
            continue
        if name not in state.m:
            state.m[name] = np.zeros_like(param.data)
            state.v[name] = np.zeros_like(param.data)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad
        update = (m / bias1) / (np.sqrt(v / bias2) + state.eps)
        if state.weight_decay and name.endswith("/w"):
            param.data -= state.lr * state.weight_decay * param.data
        param.data -= state.lr * update


@dataclass
class PlateauState:
    factor: float = 0.1
    patience: int = 3
    best: float = np.inf
    bad_epochs: int = 0

    def step(self, loss: float, adam: AdamState) -> float:
        """Update after an epoch; returns the (possibly reduced) lr."""
        if loss < self.best:
            self.best = loss
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
            if self.bad_epochs >= self.patience:
                adam.lr *= self.factor
                self.bad_epochs = 0
        return adam.lr


@dataclass
class TrainState:
    net: Network
    adam: AdamState
    plateau: PlateauState
    epoch: int = 0
    loss_history: list = field(default_factory=list)
    lr_history: list = field(default_factory=list)


def plateau_step(state: PlateauState, loss: float, adam: AdamState) -> float:
    return state.step(loss, adam)


def _batches(n: int, batch_size: int, order: np.ndarray):
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def train_network(variant: str, inputs: np.ndarray, channels: np.ndarray,
                  cb_tensors: CodebookTensors, sigma2: float,
                  params: TrainParams, spec: NetworkSpec, seed: int,
                  log_rows: list | None = None) -> TrainState:
    """Unsupervised training of one network variant.

    ``inputs`` is the (N, K*N_U) quantized-RSSI design matrix, ``channels``
    the matching (N, n_t, n_u) full-CSI batch used only inside the loss.
    Deterministic for a fixed seed (single-threaded reductions).
    """
    if spec.variant != variant:
        raise ValueError("spec variant mismatch")
    if params.epochs < 1:
        raise ValueError("nothing to train: epochs must be >= 1")
    net = Network(spec, rng_stream(seed, "init", variant))
    adam = AdamState(lr=params.learning_rate, weight_decay=params.weight_decay)
    plateau = PlateauState(factor=params.plateau_factor, patience=params.plateau_patience)
    state = TrainState(net=net, adam=adam, plateau=plateau)
    n = inputs.shape[0]

    for epoch in range(params.epochs):
        t0 = time.monotonic()
        if params.shuffle:
            order = rng_stream(seed, "shuffle", variant, epoch).permutation(n)
        else:
            order = np.arange(n)
        drop_rng = rng_stream(seed, "dropout", variant, epoch)
        epoch_losses = []
        for step, batch in enumerate(_batches(n, params.batch_size, order)):
            out = net.forward(inputs[batch], train=True, rng=drop_rng)
            pair = net.regression_to_complex(out.regression)
            if variant == "hbf_net":
                loss = loss_hbf(out.p, pair, channels[batch], cb_tensors, sigma2)
            else:
                loss, _, _ = loss_afp(out.p, pair, channels[batch], cb_tensors, sigma2)
            value = float(loss.data)
            if not np.isfinite(value):
                raise TrainingDivergedError(
                    f"{variant}: non-finite loss {value} at epoch {epoch} step {step}")
            loss.backward()
            adam_step(net, adam)
            epoch_losses.append(value)
        epoch_loss = float(np.mean(epoch_losses))
        lr = plateau.step(epoch_loss, adam)
        state.loss_history.append(epoch_loss)
        state.lr_history.append(lr)
        state.epoch = epoch + 1
        if log_rows is not None:
            log_rows.append({"epoch": epoch, "train_loss": epoch_loss, "lr": lr})
        logger.info("%s epoch %d: loss %.5f lr %.2e (%.1fs)", variant, epoch,
                    epoch_loss, lr, time.monotonic() - t0)
    return state


def train_hbf_net(inputs, channels, cb_tensors, sigma2, params, spec, seed,
                  log_rows=None) -> TrainState:
    return train_network("hbf_net", inputs, channels, cb_tensors, sigma2,
                         params, spec, seed, log_rows)


def train_afp_net(inputs, channels, cb_tensors, sigma2, params, spec, seed,
                  log_rows=None) -> TrainState:
    return train_network("afp_net", inputs, channels, cb_tensors, sigma2,
                         params, spec, seed, log_rows)
