"""Multi-task precoder network: shared trunk, softmax codeword head, and a
regression head for the digital (HBF-Net) or fully digital (AFP-Net)
precoder, built on the in-package autodiff engine.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .fileio import sha256_bytes
from .linalg import Codebook, normalize_hybrid, unit_columns

VARIANTS = ("hbf_net", "afp_net")


@dataclass(frozen=True)
class NetworkSpec:
    variant: str
    n_t: int
    n_rf: int
    n_u: int
    k_ss: int
    codebook_size: int
    trunk_widths: tuple[int, ...] = (512, 512)
    conv_channels: int = 0      # 0 disables the optional 1-D front conv
    kernel: int = 3
    leaky_slope: float = 0.01
    bn_eps: float = 1e-5
    bn_momentum: float = 0.1
    dropout_keep: float = 0.95

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if not 0.0 < self.dropout_keep <= 1.0:
            raise ValueError("dropout keep probability must lie in (0, 1]")
        object.__setattr__(self, "trunk_widths", tuple(self.trunk_widths))

    @property
    def input_width(self) -> int:
        return self.k_ss * self.n_u

    @property
    def regression_width(self) -> int:
        per_user = self.n_rf if self.variant == "hbf_net" else self.n_t
        return 2 * self.n_u * per_user

    def spec_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return sha256_bytes(blob)


@dataclass
class HeadOutputs:
    p: Tensor
    regression: Tensor


class Network:
    """Parameter container plus the forward graph builder."""

    def __init__(self, spec: NetworkSpec, rng: np.random.Generator):
        self.spec = spec
        self.params: dict[str, Tensor] = {}
        self.running: dict[str, np.ndarray] = {}
        widths = list(spec.trunk_widths)
        in_width = spec.input_width
        if spec.conv_channels:
            self._add_dense("conv", spec.n_u * spec.kernel, spec.conv_channels, rng)
            in_width = spec.conv_channels * spec.k_ss
        previous = in_width
        for i, width in enumerate(widths):
            self._add_dense(f"trunk{i}", previous, width, rng)
            self._add_batchnorm(f"bn{i}", width)
            previous = width
        self._add_dense("head_ap", previous, spec.codebook_size, rng)
        self._add_dense("head_reg", previous, spec.regression_width, rng)

    def _add_dense(self, name: str, fan_in: int, fan_out: int,
                   rng: np.random.Generator):
        scale = np.sqrt(2.0 / fan_in)
        self.params[f"{name}/w"] = Tensor(rng.standard_normal((fan_in, fan_out)) * scale)
        self.params[f"{name}/b"] = Tensor(np.zeros(fan_out))

    def _add_batchnorm(self, name: str, width: int):
        self.params[f"{name}/gamma"] = Tensor(np.ones(width))
        self.params[f"{name}/beta"] = Tensor(np.zeros(width))
        self.running[f"{name}/mean"] = np.zeros(width)
        self.running[f"{name}/var"] = np.ones(width)

    def _dense(self, name: str, x: Tensor) -> Tensor:
        return x @ self.params[f"{name}/w"] + self.params[f"{name}/b"]

    def _batchnorm(self, name: str, x: Tensor, train: bool) -> Tensor:
        spec = self.spec
        if train:
            mean = ad.tmean(x, axis=0, keepdims=True)
            centered = x - mean
            var = ad.tmean(centered * centered, axis=0, keepdims=True)
            m = spec.bn_momentum
            self.running[f"{name}/mean"] *= 1.0 - m
            self.running[f"{name}/mean"] += m * mean.data.reshape(-1)
            self.running[f"{name}/var"] *= 1.0 - m
            self.running[f"{name}/var"] += m * var.data.reshape(-1)
        else:
            mean = ad.constant(self.running[f"{name}/mean"])
            centered = x - mean
            var = ad.constant(self.running[f"{name}/var"])
        inv = 1.0 / ad.sqrt(var + spec.bn_eps)
        return centered * inv * self.params[f"{name}/gamma"] + self.params[f"{name}/beta"]

    def _conv_front(self, x: Tensor) -> Tensor:
        """Same-width 1-D convolution over the K axis (kernel 3, zero pad 1)."""
        spec = self.spec
        b = x.shape[0]
        grid = ad.reshape(x, (b, spec.n_u, spec.k_ss))
        zeros = ad.constant(np.zeros((b, spec.n_u, 1)))
        padded = ad.concat([zeros, grid, zeros], axis=2)
        windows = [ad.reshape(padded[:, :, t:t + spec.kernel], (b, 1, spec.n_u * spec.kernel))
                   for t in range(spec.k_ss)]
        stacked = ad.concat(windows, axis=1)          # (B, K, n_u*kernel)
        out = self._dense("conv", stacked)            # (B, K, conv_channels)
        out = ad.leaky_relu(out, spec.leaky_slope)
        return ad.reshape(out, (b, spec.k_ss * spec.conv_channels))

    def forward(self, inputs: np.ndarray, train: bool = False,
                rng: np.random.Generator | None = None) -> HeadOutputs:
        """Run the trunk and both heads.

        Train mode uses batch statistics and (seeded) dropout; eval mode is
        a pure function of (parameters, inputs).
        """
        spec = self.spec
        inputs = np.asarray(inputs, dtype=np.float64)
        if inputs.ndim != 2 or inputs.shape[1] != spec.input_width:
            raise ValueError(f"expected inputs of width {spec.input_width}, "
                             f"got {inputs.shape}")
        x = ad.constant(inputs)
        if spec.conv_channels:
            x = self._conv_front(x)
        for i in range(len(spec.trunk_widths)):
            x = self._dense(f"trunk{i}", x)
            x = self._batchnorm(f"bn{i}", x, train)
            x = ad.leaky_relu(x, spec.leaky_slope)
            if train and spec.dropout_keep < 1.0:
                if rng is None:
                    raise ValueError("train-mode forward needs an rng for dropout")
                mask = (rng.random(x.shape) < spec.dropout_keep) / spec.dropout_keep
                x = x * ad.constant(mask)
        logits = self._dense("head_ap", x)
        return HeadOutputs(p=ad.softmax(logits, axis=-1),
                           regression=self._dense("head_reg", x))

    def regression_to_complex(self, regression: Tensor) -> tuple[Tensor, Tensor]:
        """Split the flat head output into (re, im) stacks of per-user columns."""
        spec = self.spec
        per_user = spec.n_rf if spec.variant == "hbf_net" else spec.n_t
        half = spec.n_u * per_user
        batch = regression.shape[0]
        re = ad.reshape(regression[:, :half], (batch, spec.n_u, per_user))
        im = ad.reshape(regression[:, half:], (batch, spec.n_u, per_user))
        # row-per-user layout -> columns
        return ad.swapaxes(re, -1, -2), ad.swapaxes(im, -1, -2)


def predict_hybrid(net: Network, inputs: np.ndarray, cb: Codebook,
                   pinvs: np.ndarray | None = None):
    """Evaluation rule: argmax codeword (ties to the lowest index) plus the
    normalized digital precoder per sample.

    Returns (indices, list of W matrices).
    """
    spec = net.spec
    out = net.forward(inputs, train=False)
    p = out.p.data
    picks = np.argmax(p, axis=1)
    re, im = net.regression_to_complex(out.regression)
    reg = re.data + 1j * im.data
    if pinvs is None and spec.variant == "afp_net":
        pinvs = cb.pinvs()
    precoders = []
    for i, l in enumerate(picks):
        ap = cb[int(l)]
        if spec.variant == "afp_net":
            u_mat = unit_columns(reg[i], skip_zero=True)
            w = pinvs[int(l)] @ u_mat
        else:
            w = reg[i]
        precoders.append(normalize_hybrid(ap, w, skip_zero=True))
    return picks, precoders


def predict_fdp(net: Network, inputs: np.ndarray) -> np.ndarray:
    """AFP-Net's fully digital output, unit-normalized per user: (B, n_t, n_u)."""
    if net.spec.variant != "afp_net":
        raise ValueError("FDP prediction exists only for afp_net")
    out = net.forward(inputs, train=False)
    re, im = net.regression_to_complex(out.regression)
    u_all = re.data + 1j * im.data
    return np.stack([unit_columns(u, skip_zero=True) for u in u_all])


CHECKPOINT_VERSION = 1


def save_checkpoint(path, net: Network, extra: dict | None = None,
                    optimizer: dict | None = None) -> None:
    """Versioned checkpoint: spec hash, parameter blobs, optimizer state."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "spec": asdict(net.spec),
        "spec_hash": net.spec.spec_hash(),
        "extra": extra or {},
    }
    arrays = {f"param:{k}": v.data for k, v in net.params.items()}
    arrays.update({f"running:{k}": v for k, v in net.running.items()})
    if optimizer:
        arrays.update({f"opt:{k}": v for k, v in optimizer.items()})
    np.savez(path, meta=json.dumps(meta, sort_keys=True), **arrays)


def load_checkpoint(path) -> tuple[Network, dict, dict]:
    """Returns (network, meta dict, optimizer arrays)."""
    blob = np.load(path, allow_pickle=False)
    meta = json.loads(str(blob["meta"]))
    if meta.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
    spec_dict = dict(meta["spec"])
    spec_dict["trunk_widths"] = tuple(spec_dict["trunk_widths"])
    spec = NetworkSpec(**spec_dict)
    net = Network(spec, np.random.default_rng(0))
    for key in blob.files:
        if key.startswith("param:"):
            net.params[key[6:]] = Tensor(blob[key])
        elif key.startswith("running:"):
            net.running[key[8:]] = np.array(blob[key])
    optimizer = {key[4:]: np.array(blob[key]) for key in blob.files
                 if key.startswith("opt:")}
    return net, meta, optimizer
