"""Networks, losses, the training step, inference and checkpoints."""

import math
from dataclasses import replace

import numpy as np
import pytest
from conftest import SMALL_MODEL, small_config, synthetic_tiles

from cdbin.autodiff import Tensor, backward
from cdbin.codec import PixelImage, decode_image, encode_any_size, encode_image, partial_decode
from cdbin.data.synthetic import synthetic_document
from cdbin.ddgan.config import LossWeights, ModelConfig
from cdbin.ddgan.infer import binarize, binarize_tiles, probability_map
from cdbin.ddgan.losses import EPS, bce_loss, focal_loss, total_loss
from cdbin.ddgan.model import (
    DdganModel,
    coefficients_to_input,
    iterate_batches,
    stream_to_input,
    train,
    train_step,
)
from cdbin.ddgan.nets import (
    Generator,
    GlobalDiscriminator,
    LocalDiscriminator,
    block_idct,
    block_idct_kernel,
    extract_patches,
    reassemble_patches,
)

W = LossWeights()


# -- losses -------------------------------------------------------------------

def test_total_loss_examples():
    assert total_loss(0, 0, 1, W) == 75
    assert abs(total_loss(0.1, 0.2, 0.05, W) - 4.3) < 1e-12
    assert total_loss(0, 0, 0, W) == 0


def test_total_loss_linear_in_each_term():
    assert total_loss(1, 0, 0, W) == 0.5
    assert total_loss(0, 1, 0, W) == 2.5
    assert total_loss(0, 0, 1, W) == 75
    a, b, c = 0.3, 0.7, 0.11
    assert math.isclose(total_loss(a, b, c, W), 0.5 * a + 2.5 * b + 75 * c, rel_tol=1e-12)
    # equal raw losses: local contribution strictly exceeds global
    assert W.mu * W.sigma * 1.0 > W.mu * 1.0


def test_total_loss_tensor_matches_float():
    t = total_loss(Tensor(np.array(0.1)), Tensor(np.array(0.2)), Tensor(np.array(0.05)), W)
    assert abs(t.item() - 4.3) < 1e-12


def test_total_loss_rejects_non_finite():
    with pytest.raises(ValueError):
        total_loss(float("nan"), 0, 0, W)
    with pytest.raises(ValueError):
        total_loss(0, float("inf"), 0, W)


def test_loss_weight_invariants():
    with pytest.raises(ValueError):
        LossWeights(sigma=1.0)
    with pytest.raises(ValueError):
        LossWeights(mu=-1)
    with pytest.raises(ValueError):
        LossWeights(mu=5, lam=1)


def test_focal_examples():
    p = Tensor(np.array([[0.5]]))
    assert abs(focal_loss(p, np.array([[1.0]])).item() - 0.25 * 0.25 * math.log(2)) < 1e-9
    near = Tensor(np.full((4, 4), 1 - 1e-6))
    assert focal_loss(near, np.ones((4, 4))).item() < 1e-12
    rng = np.random.default_rng(0)
    q = rng.uniform(0.01, 0.99, (3, 5))
    y = (rng.random((3, 5)) > 0.5).astype(float)
    assert math.isclose(focal_loss(Tensor(q), y, alpha=1, gamma=0).item(), bce_loss(Tensor(q), y).item(), rel_tol=1e-12)


def test_focal_errors():
    with pytest.raises(ValueError):
        focal_loss(Tensor(np.full((2, 2), 0.5)), np.ones((3, 3)))
    with pytest.raises(ValueError):
        focal_loss(Tensor(np.full((2, 2), 0.5)), np.full((2, 2), 0.5))


def test_bce_examples():
    assert abs(bce_loss(Tensor(np.array([0.5])), np.array([1.0])).item() - math.log(2)) < 1e-12
    p = np.array([0.1, 0.3, 0.8])
    assert math.isclose(bce_loss(Tensor(p), np.ones(3)).item(), bce_loss(Tensor(1 - p), np.zeros(3)).item())
    assert bce_loss(Tensor(np.array([1 - 1e-9, 1e-9])), np.array([1.0, 0.0])).item() < 1e-6


def test_losses_finite_at_extremes():
    p = Tensor(np.array([0.0, 1.0, 0.0, 1.0]), requires_grad=True)
    y = np.array([1.0, 0.0, 0.0, 1.0])
    for loss in (bce_loss(p, y), focal_loss(p, y)):
        assert math.isfinite(loss.item())
        assert loss.item() <= -math.log(EPS) + 1e-6
        backward(loss)
        assert np.all(np.isfinite(p.grad))
        p.grad = None


# -- networks -------------------------------------------------------------------

@pytest.fixture(scope="module")
def nets():
    rng = np.random.default_rng(0)
    return Generator(SMALL_MODEL, rng), GlobalDiscriminator(SMALL_MODEL, rng), LocalDiscriminator(SMALL_MODEL, rng)


def test_generator_contract(nets):
    gen = nets[0]
    rng = np.random.default_rng(1)
    gen.params["head.w"].data = rng.normal(0, 1, gen.params["head.w"].shape).astype(np.float32)
    x = Tensor(rng.normal(0, 0.1, (2, 64, 32, 32)).astype(np.float32))
    y = gen(x, training=False).data
    gen.params["head.w"].data[...] = 0
    assert y.shape == (2, 1, 256, 256)
    assert np.all((y > 0) & (y < 1))
    with pytest.raises(ValueError):
        gen(Tensor(np.zeros((1, 64, 16, 16), np.float32)))


def test_default_generator_shape():
    cfg = ModelConfig()
    assert cfg.generator_widths == (64, 128, 256, 512)
    with pytest.raises(ValueError):
        ModelConfig(tile_size=250)


def test_idct_stage_is_fixed(four_tiles):
    streams, gt = four_tiles
    model = DdganModel(small_config(lr=1e-2))
    before = model.generator.idct.data.copy()
    x = np.stack([stream_to_input(s) for s in streams[:2]])
    train_step(model, x, gt[:2, None] / 255.0)
    assert "idct" not in " ".join(model.generator.params)
    assert np.array_equal(model.generator.idct.data, before)
    assert np.array_equal(before, block_idct_kernel(np.float32))


def test_extract_patches():
    m = np.arange(256 * 256, dtype=float).reshape(256, 256)
    p = extract_patches(m)
    assert p.shape == (64, 1, 32, 32)
    assert np.array_equal(p[0, 0], m[:32, :32])
    assert np.array_equal(p[1, 0], m[:32, 32:64])
    assert np.array_equal(reassemble_patches(p, 256, 256)[0, 0], m)
    with pytest.raises(ValueError):
        extract_patches(np.zeros((100, 100)))


def test_discriminators(nets):
    _, dg, dl = nets
    rng = np.random.default_rng(2)
    # perturb the zero score heads so outputs vary with the input
    for d in (dg, dl):
        last = max(k for k in d.params if k.endswith(".w") and k.startswith("fc"))
        d.params[last].data = rng.normal(0, 1, d.params[last].shape).astype(np.float32)
    g = dg(Tensor(rng.random((3, 1, 256, 256), dtype=np.float32)), training=False).data
    loc = dl(Tensor(rng.random((5, 1, 32, 32), dtype=np.float32)), training=False).data
    assert g.shape == (3, 1) and loc.shape == (5, 1)
    assert np.all((g > 0) & (g < 1)) and np.all((loc > 0) & (loc < 1))
    x = Tensor(rng.random((2, 1, 256, 256), dtype=np.float32))
    assert np.array_equal(dg(x, training=False).data, dg(x, training=False).data)
    with pytest.raises(ValueError):
        dg(Tensor(np.zeros((1, 1, 128, 128), np.float32)))
    with pytest.raises(ValueError):
        dl(Tensor(np.zeros((1, 1, 16, 16), np.float32)))


def test_local_discriminator_layers():
    cfg = ModelConfig()
    dl = LocalDiscriminator(cfg, np.random.default_rng(0))
    convs = [k for k in dl.params if k.startswith("conv") and k.endswith(".w")]
    fcs = [k for k in dl.params if k.startswith("fc") and k.endswith(".w")]
    assert len(convs) == 5 and len(fcs) == 4
    dg = GlobalDiscriminator(cfg, np.random.default_rng(0))
    assert len([k for k in dg.params if k.startswith("conv") and k.endswith(".w")]) == 2
    assert len([k for k in dg.params if k.startswith("fc") and k.endswith(".w")]) == 3


# -- bridge with the codec --------------------------------------------------------

def _bridge_error(stream):
    jc = partial_decode(stream)
    coeffs = jc.components[0].dequantized().transpose(2, 0, 1)[None].astype(np.float64)
    pixels = block_idct(Tensor(coeffs), Tensor(block_idct_kernel())).data[0, 0] + 128.0
    ref = decode_image(stream).gray().astype(np.float64)
    return np.abs(np.clip(np.round(pixels), 0, 255) - ref).max()


def test_bridge_matches_decoder():
    streams, _ = synthetic_tiles(10, seed=100)
    rng = np.random.default_rng(5)
    streams.append(encode_image(PixelImage(rng.integers(0, 256, (256, 256), dtype=np.uint8)), 50))
    assert max(_bridge_error(s) for s in streams) <= 1


def test_coefficient_input_layout(four_tiles):
    x = stream_to_input(four_tiles[0][0])
    assert x.shape == (64, 32, 32)
    assert np.abs(x).max() <= 1.0 + 1e-9
    jc = partial_decode(four_tiles[0][0])
    assert np.array_equal(x, coefficients_to_input(jc.components[0]))
    assert x[0, 0, 0] * 1024 == jc.components[0].dequantized()[0, 0, 0]


# -- training step -------------------------------------------------------------------

def _batch(four_tiles, n=2):
    streams, gt = four_tiles
    return np.stack([stream_to_input(s) for s in streams[:n]]), gt[:n, None] / 255.0


def test_first_discriminator_loss_is_ln2(four_tiles):
    x, y = _batch(four_tiles)
    m = train_step(DdganModel(small_config()), x, y)
    assert abs(m.d_global - math.log(2)) < 1e-6
    assert abs(m.d_local - math.log(2)) < 1e-6


def test_train_step_validation(four_tiles):
    x, y = _batch(four_tiles)
    model = DdganModel(small_config())
    with pytest.raises(ValueError):
        train_step(model, x[:0], y[:0])
    with pytest.raises(ValueError):
        train_step(model, x, y[:1])


def test_train_step_deterministic(four_tiles):
    x, y = _batch(four_tiles)
    runs = []
    for _ in range(2):
        model = DdganModel(small_config(seed=3, lr=1e-3))
        runs.append([train_step(model, x, y).record() for _ in range(3)])
    assert runs[0] == runs[1]


def test_label_swap_negates_score_head_gradient(four_tiles):
    x, y = _batch(four_tiles)
    model = DdganModel(small_config())
    fake = model.generate(x)
    both = Tensor(np.concatenate([y, fake]).astype(np.float32))
    labels = np.array([1.0, 1.0, 0.0, 0.0])
    grads = []
    for lab in (labels, 1 - labels):
        dg = model.global_disc
        backward(bce_loss(dg(both).reshape(-1), lab))
        grads.append(dg.params["fc2.w"].grad.copy())
        dg.zero_grad()
    assert np.abs(grads[0]).max() > 0
    assert np.allclose(grads[0], -grads[1], atol=1e-7)


def test_iterate_batches_seeded():
    a = [b.tolist() for b in iterate_batches(10, 3, seed=1, epoch=0)]
    assert a == [b.tolist() for b in iterate_batches(10, 3, seed=1, epoch=0)]
    assert a != [b.tolist() for b in iterate_batches(10, 3, seed=1, epoch=1)]
    assert sorted(sum(a, [])) == list(range(10)) and [len(b) for b in a] == [3, 3, 3, 1]


@pytest.mark.slow
def test_focal_loss_decreases_over_200_steps(four_tiles):
    streams, gt = four_tiles
    x = np.stack([stream_to_input(s) for s in streams])
    cfg = small_config(batch_size=4, lr=1e-2, epochs=200)
    hist = train(DdganModel(cfg), x, gt[:, None] / 255.0)
    losses = [h["l_gen"] for h in hist]
    assert len(losses) == 200
    assert np.mean(losses[-20:]) < np.mean(losses[:20])


# -- checkpoints and inference ----------------------------------------------------------

def test_checkpoint_round_trip(tmp_path, four_tiles):
    x, y = _batch(four_tiles)
    model = DdganModel(small_config(lr=1e-3))
    train_step(model, x, y)
    path = tmp_path / "m.ckpt"
    model.save(path)
    loaded = DdganModel.load(path)
    assert loaded.step == 1 and loaded.config == model.config
    assert np.array_equal(loaded.generate(x), model.generate(x))
    # continued training from the checkpoint matches continued training in memory
    assert train_step(loaded, x, y).record() == train_step(model, x, y).record()


def test_binarize_contract():
    rng = np.random.default_rng(0)
    model = DdganModel(small_config())
    head = model.generator.params["head.w"]
    head.data = rng.normal(0, 0.5, head.shape).astype(np.float32)
    doc, _ = synthetic_document(200, 300, seed=4)
    stream = encode_any_size(PixelImage(doc), 50)
    out = binarize(stream, model)
    assert out.samples.shape[:2] == (200, 300)
    assert set(np.unique(out.gray())) <= {0, 255}
    prob = probability_map(stream, model)
    assert prob.shape == (200, 300) and np.all((prob > 0) & (prob < 1))
    tile = np.pad(doc, ((0, 56), (0, 0)))[:, :256]
    tiles = binarize_tiles([encode_image(PixelImage(tile), 50)], model)
    assert tiles.shape == (1, 256, 256) and set(np.unique(tiles)) <= {0, 255}
    with pytest.raises(ValueError):
        probability_map(stream, model, pad=12)


def test_binarize_rejects_pixel_model():
    cfg = small_config(model=replace(SMALL_MODEL, input_domain="pixel"))
    with pytest.raises(ValueError):
        probability_map(encode_image(PixelImage(np.zeros((16, 16), np.uint8))), DdganModel(cfg))
