"""Generator and discriminator networks built on the autodiff engine."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Param, Tensor
from ..codec.tables import ZIGZAG
from ..codec.transforms import DCT_MATRIX
from .config import ModelConfig


def block_idct_kernel(dtype=np.float64) -> np.ndarray:
    """(64, 1, 8, 8) kernel whose channel k is the spatial basis of zig-zag position k."""
    k = np.empty((64, 1, 8, 8), dtype=np.float64)
    for pos in range(64):
        u, v = divmod(int(ZIGZAG[pos]), 8)
        k[pos, 0] = np.outer(DCT_MATRIX[u], DCT_MATRIX[v])
    return k.astype(dtype)


def block_idct(x: Tensor, kernel: Tensor) -> Tensor:
    """(N, 64, Hb, Wb) zig-zag coefficient channels -> (N, 1, 8Hb, 8Wb) pixels.

    A stride-8 transposed convolution with the fixed basis kernel; the kernel
    is a plain Tensor so it never collects gradients.
    """
    return ad.transposed_conv2d(x, kernel, None, stride=8)


class Net:
    """Named parameters plus batch-norm running statistics."""

    def __init__(self, name: str, dtype):
        self.name = name
        self.dtype = np.dtype(dtype)
        self.params: dict[str, Param] = {}
        self.bn: dict[str, ad.BatchNormState] = {}

    def _conv(self, rng, name, cin, cout, k, bias=True):
        std = np.sqrt(2.0 / (cin * k * k))
        self.params[f"{name}.w"] = Param(rng.normal(0.0, std, (cout, cin, k, k)), "kernel", self.dtype)
        if bias:
            self.params[f"{name}.b"] = Param(np.zeros(cout), "bias", self.dtype)

    def _upconv(self, rng, name, cin, cout):
        std = np.sqrt(2.0 / (cin * 4))
        self.params[f"{name}.w"] = Param(rng.normal(0.0, std, (cin, cout, 2, 2)), "kernel", self.dtype)
        self.params[f"{name}.b"] = Param(np.zeros(cout), "bias", self.dtype)

    def _dense(self, rng, name, nin, nout):
        std = np.sqrt(2.0 / nin)
        self.params[f"{name}.w"] = Param(rng.normal(0.0, std, (nout, nin)), "kernel", self.dtype)
        self.params[f"{name}.b"] = Param(np.zeros(nout), "bias", self.dtype)

    def _zero_score_head(self, index):
        # An untrained discriminator scores every input exactly 0.5.
        self.params[f"fc{index}.w"].data[...] = 0

    def _bn(self, name, channels):
        self.params[f"{name}.gamma"] = Param(np.ones(channels), "bn-gamma", self.dtype)
        self.params[f"{name}.beta"] = Param(np.zeros(channels), "bn-beta", self.dtype)
        self.bn[name] = ad.BatchNormState(channels, dtype=self.dtype)

    def conv(self, x, name, stride=1, padding=1):
        return ad.conv2d(x, self.params[f"{name}.w"], self.params.get(f"{name}.b"), stride, padding)

    def batch_norm(self, x, name, training):
        return ad.batch_norm2d(x, self.params[f"{name}.gamma"], self.params[f"{name}.beta"],
                               self.bn[name], training)

    def dense(self, x, name):
        return ad.dense(x, self.params[f"{name}.w"], self.params[f"{name}.b"])

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def n_parameters(self) -> int:
        return sum(p.size for p in self.params.values())


class Generator(Net):
    """U-Net over either a 64-channel coefficient grid or a 1-channel pixel tile.

    Each block is two 3x3 conv + batch-norm + leaky-ReLU layers; down-sampling
    is 2x2 max pooling and up-sampling a stride-2 transposed convolution.

    In the coefficient domain the head emits 64 zig-zag channels per block,
    which a fixed block-IDCT turns into a pixel-resolution logit map.
    """

    def __init__(self, cfg: ModelConfig, rng, dtype=np.float32):
        super().__init__("generator", dtype)
        self.cfg = cfg
        widths = cfg.generator_widths
        cin = 64 if cfg.input_domain == "dct" else 1
        for i, w in enumerate(widths[:-1]):
            self._block(rng, f"down{i}", cin, w)
            cin = w
        self._block(rng, "mid", cin, widths[-1])
        for i in reversed(range(len(widths) - 1)):
            self._upconv(rng, f"up{i}.t", widths[i + 1], widths[i])
            self._block(rng, f"up{i}", 2 * widths[i], widths[i])
        out_ch = 64 if cfg.input_domain == "dct" else 1
        # Zero head: every pixel starts at probability 0.5.
        self.params["head.w"] = Param(np.zeros((out_ch, widths[0], 1, 1)), "kernel", self.dtype)
        self.params["head.b"] = Param(np.zeros(out_ch), "bias", self.dtype)
        self.idct = Tensor(block_idct_kernel(self.dtype))

    def _block(self, rng, name, cin, cout):
        for part, c in (("a", cin), ("b", cout)):
            self._conv(rng, f"{name}.{part}", c, cout, 3, bias=False)
            self._bn(f"{name}.{part}.bn", cout)

    def _apply_block(self, h, name, training):
        for part in ("a", "b"):
            h = self.batch_norm(self.conv(h, f"{name}.{part}"), f"{name}.{part}.bn", training)
            h = ad.leaky_relu(h, self.cfg.slope)
        return h

    def expected_input_shape(self) -> tuple[int, int, int]:
        t = self.cfg.tile_size
        return (64, t // 8, t // 8) if self.cfg.input_domain == "dct" else (1, t, t)

    def logits(self, x: Tensor, training: bool = True) -> Tensor:
        if x.shape[1:] != self.expected_input_shape():
            raise ValueError(f"generator expects (N, {self.expected_input_shape()}) input, got {x.shape}")
        depth = len(self.cfg.generator_widths) - 1
        skips = []
        h = x
        for i in range(depth):
            h = self._apply_block(h, f"down{i}", training)
            skips.append(h)
            h = ad.max_pool2(h)
        h = self._apply_block(h, "mid", training)
        for i in reversed(range(depth)):
            h = ad.transposed_conv2d(h, self.params[f"up{i}.t.w"], self.params[f"up{i}.t.b"], stride=2)
            h = ad.concat_channels(h, skips[i])
            h = self._apply_block(h, f"up{i}", training)
        h = self.conv(h, "head", padding=0)
        if self.cfg.input_domain == "dct":
            h = block_idct(h, self.idct)
        return h

    def __call__(self, x: Tensor, training: bool = True) -> Tensor:
        """Probability map (N, 1, tile, tile) with values in (0, 1)."""
        return ad.sigmoid(self.logits(x, training))


class GlobalDiscriminator(Net):
    """Two conv+BN+leaky-ReLU layers, one 2x2 average pool, three dense layers."""

    def __init__(self, cfg: ModelConfig, rng, dtype=np.float32):
        super().__init__("global", dtype)
        self.cfg = cfg
        c1, c2 = cfg.global_channels
        self._conv(rng, "conv0", 1, c1, 3)
        self._bn("bn0", c1)
        self._conv(rng, "conv1", c1, c2, 3)
        self._bn("bn1", c2)
        side = cfg.tile_size // 8
        nin = c2 * side * side
        for i, nout in enumerate(cfg.global_dense + (1,)):
            self._dense(rng, f"fc{i}", nin, nout)
            nin = nout
        self._zero_score_head(len(cfg.global_dense))

    def __call__(self, x: Tensor, training: bool = True) -> Tensor:
        t = self.cfg.tile_size
        if x.shape[1:] != (1, t, t):
            raise ValueError(f"global discriminator expects (N, 1, {t}, {t}), got {x.shape}")
        s = self.cfg.slope
        h = ad.leaky_relu(self.batch_norm(self.conv(x, "conv0", stride=2), "bn0", training), s)
        h = ad.leaky_relu(self.batch_norm(self.conv(h, "conv1", stride=2), "bn1", training), s)
        h = ad.flatten(ad.avg_pool2(h))
        n = len(self.cfg.global_dense)
        for i in range(n):
            h = ad.leaky_relu(self.dense(h, f"fc{i}"), s)
        return ad.sigmoid(self.dense(h, f"fc{n}"))


class LocalDiscriminator(Net):
    """Five conv+BN+leaky-ReLU layers and four dense layers; no pooling."""

    def __init__(self, cfg: ModelConfig, rng, dtype=np.float32):
        super().__init__("local", dtype)
        self.cfg = cfg
        cin, side = 1, cfg.patch_size
        for i, (cout, stride) in enumerate(zip(cfg.local_channels, cfg.local_strides)):
            self._conv(rng, f"conv{i}", cin, cout, 3)
            self._bn(f"bn{i}", cout)
            cin = cout
            side = ad.conv_output_size(side, 3, stride, 1)
        nin = cin * side * side
        for i, nout in enumerate(cfg.local_dense + (1,)):
            self._dense(rng, f"fc{i}", nin, nout)
            nin = nout
        self._zero_score_head(len(cfg.local_dense))

    def __call__(self, x: Tensor, training: bool = True) -> Tensor:
        p = self.cfg.patch_size
        if x.shape[1:] != (1, p, p):
            raise ValueError(f"local discriminator expects (N, 1, {p}, {p}), got {x.shape}")
        s = self.cfg.slope
        h = x
        for i, stride in enumerate(self.cfg.local_strides):
            h = ad.leaky_relu(self.batch_norm(self.conv(h, f"conv{i}", stride=stride), f"bn{i}", training), s)
        h = ad.flatten(h)
        n = len(self.cfg.local_dense)
        for i in range(n):
            h = ad.leaky_relu(self.dense(h, f"fc{i}"), s)
        return ad.sigmoid(self.dense(h, f"fc{n}"))


def extract_patches(x, patch: int = 32):
    """(N, 1, H, W) map -> (N * (H/p) * (W/p), 1, p, p), row-major per image.

    Accepts a Tensor (differentiable) or an ndarray.
    """
    arr = x.data if isinstance(x, Tensor) else np.asarray(x)
    if arr.ndim == 2:
        arr = arr[None, None]
        x = arr if not isinstance(x, Tensor) else ad.reshape(x, arr.shape)
    n, c, h, w = arr.shape
    if h % patch or w % patch:
        raise ValueError(f"map {h}x{w} is not divisible into {patch}x{patch} patches")
    gh, gw = h // patch, w // patch
    if isinstance(x, Tensor):
        t = ad.reshape(x, (n, c, gh, patch, gw, patch))
        t = ad.transpose(t, (0, 2, 4, 1, 3, 5))
        return ad.reshape(t, (n * gh * gw, c, patch, patch))
    t = arr.reshape(n, c, gh, patch, gw, patch).transpose(0, 2, 4, 1, 3, 5)
    return t.reshape(n * gh * gw, c, patch, patch)


def reassemble_patches(patches: np.ndarray, height: int, width: int) -> np.ndarray:
    """Inverse of :func:`extract_patches` for ndarray input; returns (N, C, H, W)."""
    patches = np.asarray(patches)
    k, c, p, _ = patches.shape
    gh, gw = height // p, width // p
    n = k // (gh * gw)
    if n * gh * gw != k:
        raise ValueError("patch count does not match the requested map size")
    return patches.reshape(n, gh, gw, c, p, p).transpose(0, 3, 1, 4, 2, 5).reshape(n, c, height, width)
