"""The dual-discriminator GAN: model container, training step, checkpoints."""

from __future__ import annotations

import contextlib
import json
import time
from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import OptimizerState, Tensor, backward, optimizer_step
from ..codec import CoefficientTensor, decode_image, partial_decode
from .config import TrainConfig
from .losses import bce_loss, focal_loss, total_loss
from .nets import Generator, GlobalDiscriminator, LocalDiscriminator, extract_patches

# Dequantized coefficients are divided by this (the largest DC magnitude).
COEFF_SCALE = 1024.0


def coefficients_to_input(coeffs: CoefficientTensor) -> np.ndarray:
    """(64, Hb, Wb) generator input: dequantized, scaled, one channel per zig-zag position."""
    return (coeffs.dequantized() / COEFF_SCALE).transpose(2, 0, 1)


def pixels_to_input(gray: np.ndarray) -> np.ndarray:
    return ((np.asarray(gray, dtype=np.float64) - 128.0) / 128.0)[None]


def stream_to_input(stream: bytes, domain: str = "dct") -> np.ndarray:
    """Generator input for one JFIF tile; "dct" never runs the inverse DCT."""
    if domain == "dct":
        return coefficients_to_input(partial_decode(stream).components[0])
    return pixels_to_input(decode_image(stream).samples[:, :, 0])


class DdganModel:
    def __init__(self, config: TrainConfig):
        self.config = config
        rng = np.random.default_rng(config.seed)
        dtype = np.dtype(config.dtype)
        self.generator = Generator(config.model, rng, dtype)
        self.global_disc = GlobalDiscriminator(config.model, rng, dtype)
        self.local_disc = LocalDiscriminator(config.model, rng, dtype)
        self.opt = {name: self._adam(name) for name in ("generator", "global", "local")}
        self.step = 0

    def _adam(self, net: str):
        c = self.config
        lr = c.lr if net == "generator" or c.disc_lr is None else c.disc_lr
        return OptimizerState(lr=lr, beta1=c.beta1, beta2=c.beta2)

    @property
    def nets(self):
        return {"generator": self.generator, "global": self.global_disc, "local": self.local_disc}

    def generate(self, inputs: np.ndarray) -> np.ndarray:
        """Probability maps for a batch of generator inputs, without recording a graph."""
        with ad.no_grad():
            return self.generator(Tensor(np.asarray(inputs, dtype=self.config.dtype)), training=False).data

    # -- persistence ---------------------------------------------------------

    def save(self, path):
        arrays = {}
        for net_name, net in self.nets.items():
            for k, p in net.params.items():
                arrays[f"param/{net_name}/{k}"] = p.data
            for k, st in net.bn.items():
                arrays[f"bn/{net_name}/{k}/mean"] = st.mean
                arrays[f"bn/{net_name}/{k}/var"] = st.var
            opt = self.opt[net_name]
            for k in opt.m:
                arrays[f"adam/{net_name}/m/{k}"] = opt.m[k]
                arrays[f"adam/{net_name}/v/{k}"] = opt.v[k]
        meta = {
            "config": self.config.to_dict(),
            "step": self.step,
            "adam_steps": {k: o.step for k, o in self.opt.items()},
        }
        ad.save_arrays(path, arrays, meta)

    @classmethod
    def load(cls, path) -> DdganModel:
        arrays, meta = ad.load_arrays(path)
        model = cls(TrainConfig.from_dict(meta["config"]))
        model.step = meta["step"]
        for net_name, net in model.nets.items():
            for k, p in net.params.items():
                key = f"param/{net_name}/{k}"
                if key not in arrays:
                    raise ad.CheckpointError(f"checkpoint lacks {key}")
                if arrays[key].shape != p.shape:
                    raise ad.CheckpointError(f"{key}: shape {arrays[key].shape} != {p.shape}")
                p.data = arrays[key].astype(p.dtype)
            for k, st in net.bn.items():
                st.mean = arrays[f"bn/{net_name}/{k}/mean"].copy()
                st.var = arrays[f"bn/{net_name}/{k}/var"].copy()
            opt = model.opt[net_name]
            opt.step = meta["adam_steps"][net_name]
            for k in net.params:
                if f"adam/{net_name}/m/{k}" in arrays:
                    opt.m[k] = arrays[f"adam/{net_name}/m/{k}"].copy()
                    opt.v[k] = arrays[f"adam/{net_name}/v/{k}"].copy()
        return model


@dataclass
class StepMetrics:
    step: int
    l_gen: float
    l_global: float
    l_local: float
    l_total: float
    d_global: float
    d_local: float

    def record(self) -> dict:
        return {k: (round(v, 10) if isinstance(v, float) else v) for k, v in self.__dict__.items()}


@contextlib.contextmanager
def _frozen_stats(*nets):
    saved = [(st, st.mean.copy(), st.var.copy()) for net in nets for st in net.bn.values()]
    try:
        yield
    finally:
        for st, mean, var in saved:
            st.mean, st.var = mean, var


def train_step(model: DdganModel, inputs, targets) -> StepMetrics:
    """One discriminator update followed by one generator update.

    ``inputs`` is (N, C, h, w) generator input; ``targets`` is (N, 1, T, T)
    ground truth with 1 = background (white) and 0 = ink.
    """
    cfg = model.config
    inputs = np.asarray(inputs, dtype=cfg.dtype)
    targets = np.asarray(targets, dtype=cfg.dtype)
    if inputs.shape[0] == 0:
        raise ValueError("empty batch")
    if inputs.shape[0] != targets.shape[0]:
        raise ValueError(f"{inputs.shape[0]} inputs but {targets.shape[0]} ground-truth maps")
    n = inputs.shape[0]
    patch = cfg.model.patch_size
    gen, dg, dl = model.generator, model.global_disc, model.local_disc

    fake = gen(Tensor(inputs))

    # Discriminators: real ground truth labelled 1, detached fakes labelled 0.
    both = np.concatenate([targets, fake.data], axis=0)
    labels = np.concatenate([np.ones(n), np.zeros(n)])
    d_global = bce_loss(dg(Tensor(both)).reshape(-1), labels)
    patches = extract_patches(both, patch)
    per = patches.shape[0] // (2 * n)
    d_local = bce_loss(dl(Tensor(patches)).reshape(-1), np.repeat(labels, per))
    backward(ad.add(d_global, d_local))
    optimizer_step(dg.params, model.opt["global"])
    optimizer_step(dl.params, model.opt["local"])

    # Generator: focal loss against ground truth plus adversarial terms. The
    # discriminators score the same real+fake batch composition they were
    # trained on (batch-norm statistics of a fake-only batch would differ);
    # only the fake half enters the loss, and running statistics are left
    # as the discriminator update set them.
    l_gen = focal_loss(fake, targets, cfg.focal_alpha, cfg.focal_gamma)
    mixed = ad.concat_batch(Tensor(targets), fake)
    with _frozen_stats(dg, dl):
        g_scores = ad.reshape(dg(mixed), (2 * n,))
        l_scores = ad.reshape(dl(extract_patches(mixed, patch)), (2 * n * per,))
    l_global = bce_loss(ad.slice_batch(g_scores, n, 2 * n), np.ones(n))
    l_local = bce_loss(ad.slice_batch(l_scores, n * per, 2 * n * per), np.ones(n * per))
    total = total_loss(l_global, l_local, l_gen, cfg.weights)
    backward(total)
    optimizer_step(gen.params, model.opt["generator"])
    dg.zero_grad()
    dl.zero_grad()

    model.step += 1
    return StepMetrics(model.step, l_gen.item(), l_global.item(), l_local.item(), total.item(),
                       d_global.item(), d_local.item())


def iterate_batches(n_samples: int, batch_size: int, seed: int, epoch: int):
    """Seeded per-epoch shuffle; yields index arrays."""
    order = np.random.default_rng([seed, epoch]).permutation(n_samples)
    for i in range(0, n_samples, batch_size):
        yield order[i:i + batch_size]


def train(model: DdganModel, inputs, targets, log=None, timing=None, epochs=None):
    """Run ``epochs`` passes (default from the config) over in-memory samples.

    ``log`` receives one deterministic metrics dict per step; ``timing``
    receives {step, wall_time} records, kept apart so metric logs stay
    bit-identical across runs.
    """
    cfg = model.config
    inputs = np.asarray(inputs)
    targets = np.asarray(targets)
    history = []
    start = time.perf_counter()
    for epoch in range(epochs or cfg.epochs):
        for idx in iterate_batches(len(inputs), cfg.batch_size, cfg.seed, epoch):
            m = train_step(model, inputs[idx], targets[idx])
            rec = {"epoch": epoch, **m.record()}
            history.append(rec)
            if log:
                log(rec)
            if timing:
                timing({"step": m.step, "wall_time": round(time.perf_counter() - start, 6)})
            if cfg.max_steps and model.step >= cfg.max_steps:
                return history
    return history


def write_jsonl(fp):
    def emit(rec):
        fp.write(json.dumps(rec, sort_keys=True) + "\n")
        fp.flush()
    return emit
