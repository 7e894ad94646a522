"""Fully connected tanh networks evaluated in jet arithmetic."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .jets import Jet, JetOverflowError, Tape, affine, input_jets, tanh

INPUT_WIDTH = 3  # (x, y, t)


@dataclass(frozen=True)
class LayerSpec:
    """Widths ``n_1 .. n_{L+1}``; tanh on hidden layers, affine output."""

    widths: tuple[int, ...]
    activation: str = "tanh"

    def __post_init__(self):
        w = tuple(int(v) for v in self.widths)
        object.__setattr__(self, "widths", w)
        if len(w) < 3:
            raise ValueError("a network needs at least one hidden layer")
        if any(v <= 0 for v in w):
            raise ValueError(f"layer widths must be positive, got {w}")
        if w[0] != INPUT_WIDTH:
            raise ValueError(f"input width must be {INPUT_WIDTH} (x, y, t), got {w[0]}")
        if self.activation != "tanh":
            raise ValueError("only tanh activation is supported")

    @classmethod
    def mlp(cls, hidden, n_out: int) -> "LayerSpec":
        return cls((INPUT_WIDTH, *hidden, n_out))

    @property
    def n_params(self) -> int:
        w = self.widths
        return sum(w[l + 1] * (w[l] + 1) for l in range(len(w) - 1))

    @property
    def n_out(self) -> int:
        return self.widths[-1]


def param_count(widths) -> int:
    """N = sum_l n_{l+1} (n_l + 1)."""
    return sum(widths[l + 1] * (widths[l] + 1) for l in range(len(widths) - 1))


@dataclass
class Network:
    """A layer stack whose weights and biases are views into ``params``.

    Layer ``l`` stores ``W^l`` (row-major, ``n_{l+1} x n_l``) followed by
    ``b^l``.  Replacing ``params`` in place (e.g. by the optimizer) updates
    every layer.
    """

    spec: LayerSpec
    params: np.ndarray
    seed: int = 0
    _layers: list = field(init=False, repr=False)

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float)
        if self.params.shape != (self.spec.n_params,):
            raise ValueError(
                f"expected {self.spec.n_params} parameters for widths {self.spec.widths}, "
                f"got {self.params.shape}")
        self.bind(self.params)

    def bind(self, params: np.ndarray) -> None:
        """Point the layer views at ``params`` (must be a 1-D float array)."""
        self.params = params
        self._layers = []
        off = 0
        w = self.spec.widths
        for l in range(len(w) - 1):
            n_in, n_out = w[l], w[l + 1]
            W = params[off:off + n_out * n_in].reshape(n_out, n_in)
            off += n_out * n_in
            b = params[off:off + n_out]
            off += n_out
            self._layers.append((W, b))

    @property
    def layers(self):
        return list(self._layers)

    def forward_jet(self, points, tape: Tape | None = None) -> Jet:
        """Jets of all outputs at ``points`` (shape (B, 3) or (3,)).

        With ``tape`` given, weights and biases are watched leaves of that
        tape (in layer order); their leaf handles are stored in
        :attr:`leaves` for :meth:`Tape.gradient`.
        """
        pts = np.asarray(points, dtype=float)
        if not np.isfinite(pts).all():
            raise ValueError("non-finite sampling point")
        x = input_jets(pts)
        leaves = []
        n = len(self._layers)
        for l, (W, b) in enumerate(self._layers):
            if tape is not None:
                W, b = tape.watch(W), tape.watch(b)
                leaves += [W, b]
            try:
                x = affine(x, W, b)
                if l < n - 1:
                    x = tanh(x)
            except JetOverflowError as exc:
                raise JetOverflowError(f"non-finite activations in layer {l + 1}") from exc
        self.leaves = leaves
        return x

    def __call__(self, points) -> np.ndarray:
        """Plain forward pass (values only)."""
        h = np.asarray(points, dtype=float)
        n = len(self._layers)
        for l, (W, b) in enumerate(self._layers):
            h = h @ W.T + b
            if l < n - 1:
                h = np.tanh(h)
        return h


def init_network(spec: LayerSpec, seed: int) -> Network:
    """Glorot-uniform weights, zero biases, from ``default_rng(seed)``."""
    rng = np.random.default_rng(seed)
    parts = []
    w = spec.widths
    for l in range(len(w) - 1):
        n_in, n_out = w[l], w[l + 1]
        lim = np.sqrt(6.0 / (n_in + n_out))
        parts.append(rng.uniform(-lim, lim, size=n_out * n_in))
        parts.append(np.zeros(n_out))
    return Network(spec, np.concatenate(parts), seed=seed)


# -- checkpoints ------------------------------------------------------------
#
# Plain text, one record per network:
#
#   twophase-dnn checkpoint 1
#   networks <k>
#   net <index> seed <seed> widths <n_1> ... <n_{L+1}> nparams <N>
#   <N lines, one parameter each, as float.hex()>
#
# float.hex is exact, so loading restores bit-identical parameters and two
# identical runs give byte-identical files.

_MAGIC = "twophase-dnn checkpoint 1"


def save_checkpoint(path, nets) -> None:
    lines = [_MAGIC, f"networks {len(nets)}"]
    for i, net in enumerate(nets):
        widths = " ".join(str(v) for v in net.spec.widths)
        lines.append(f"net {i} seed {net.seed} widths {widths} nparams {net.spec.n_params}")
        lines.extend(float(v).hex() for v in net.params)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_checkpoint(path) -> list[Network]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != _MAGIC:
        raise ValueError(f"{path}: not a twophase-dnn checkpoint")
    k = int(lines[1].split()[1])
    pos = 2
    nets = []
    for _ in range(k):
        head = lines[pos].split()
        pos += 1
        seed = int(head[3])
        iw = head.index("widths")
        inp = head.index("nparams")
        widths = tuple(int(v) for v in head[iw + 1:inp])
        n = int(head[inp + 1])
        params = np.array([float.fromhex(v) for v in lines[pos:pos + n]])
        pos += n
        nets.append(Network(LayerSpec(widths), params, seed=seed))
    return nets
