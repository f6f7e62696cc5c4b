import numpy as np
import pytest

from vidconsist.denoiser import (
    PARAM_NAMES,
    ConditioningEmbedding,
    Sample,
    apply_update,
    init_model,
    load_checkpoint,
    loss_gradients,
    parameter_count,
    predict_noise,
    save_checkpoint,
    timestep_encoding,
)

from .conftest import make_emb
from .oracles import max_rel_err


def _batch(model, rng, n=2, mask=None, position=0.0):
    out = []
    for _ in range(n):
        out.append(
            Sample(
                rng.standard_normal(model.frame_shape),
                int(rng.integers(1, model.T + 1)),
                make_emb(int(rng.integers(1 << 30)), model.h_dim, model.c_dim),
                rng.standard_normal(model.frame_shape),
                mask,
                position,
            )
        )
    return out


def _fd_grads(model, batch, h=1e-5):
    grads = {}
    for k in PARAM_NAMES:
        g = np.zeros_like(model.params[k])
        flat = model.params[k].reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            lp = loss_gradients(model, batch)[1]
            flat[idx] = orig - h
            lm = loss_gradients(model, batch)[1]
            flat[idx] = orig
            g.reshape(-1)[idx] = (lp - lm) / (2 * h)
        grads[k] = g
    return grads


def test_init_deterministic_and_seeded():
    a = init_model((4, 4, 1), 6, (3, 2), seed=1, t_dim=4, T=10)
    b = init_model((4, 4, 1), 6, (3, 2), seed=1, t_dim=4, T=10)
    c = init_model((4, 4, 1), 6, (3, 2), seed=2, t_dim=4, T=10)
    assert all(np.array_equal(a.params[k], b.params[k]) for k in PARAM_NAMES)
    assert any(not np.array_equal(a.params[k], c.params[k]) for k in PARAM_NAMES)


def test_parameter_count_hand_computed():
    # input 64 + 8 (t) + 8 (h) + 8 (c) = 88
    # 88*32 + 32 + 32*32 + 32 + 32*64 + 64 = 6016
    model = init_model((8, 8, 1), 32, (8, 8), seed=0, t_dim=8, T=50)
    assert model.n_params == 6016
    assert parameter_count((8, 8, 1), 32, 8, 8, 8) == 6016


@pytest.mark.parametrize("shape,hidden", [((0, 4, 1), 4), ((4, 4, 1), 0), ((4, 4), 3)])
def test_init_rejects_bad_dims(shape, hidden):
    with pytest.raises(ValueError):
        init_model(shape, hidden, (2, 2), seed=0)


def test_predict_noise_pure_and_shaped(tiny_model, emb, rng):
    x = rng.standard_normal(tiny_model.frame_shape)
    a = predict_noise(tiny_model, x, 3, emb)
    b = predict_noise(tiny_model, x, 3, emb)
    assert a.shape == x.shape
    assert a.tobytes() == b.tobytes()
    assert np.all(np.isfinite(a))


def test_predict_noise_shape_errors(tiny_model, emb):
    with pytest.raises(ValueError):
        predict_noise(tiny_model, np.zeros((2, 2, 2)), 3, emb)
    with pytest.raises(ValueError):
        predict_noise(tiny_model, np.zeros(tiny_model.frame_shape), 3, make_emb(0, 4, 2))


def test_forward_pass_against_plain_arithmetic():
    model = init_model((2, 2, 1), 3, (2, 1), seed=0, t_dim=2, T=10)
    for k in PARAM_NAMES:
        model.params[k][...] = 0.01 if k.startswith("W") else 0.0
    emb = ConditioningEmbedding(np.array([0.5, -1.0]), np.array([2.0]))
    x = np.array([1.0, -2.0, 0.25, 3.0]).reshape(2, 2, 1)
    t = 4
    # encoding for length 2 is [sin(pi t/T), cos(pi t/T)]
    import math

    u = [1.0, -2.0, 0.25, 3.0, math.sin(math.pi * 0.4), math.cos(math.pi * 0.4), 0.5, -1.0, 2.0]
    a1 = [math.tanh(sum(0.01 * v for v in u))] * 3
    a2 = [math.tanh(sum(0.01 * v for v in a1))] * 3
    y = [sum(0.01 * v for v in a2)] * 4
    got = predict_noise(model, x, t, emb).ravel()
    np.testing.assert_allclose(got, y, rtol=1e-14)


def test_timestep_encoding_deterministic():
    a = timestep_encoding(3, 10, 5)
    assert a.shape == (5,)
    assert np.array_equal(a, timestep_encoding(3, 10, 5))
    assert timestep_encoding(3, 10, 0).size == 0


def test_zero_loss_at_exact_target(tiny_model, emb, rng):
    x = rng.standard_normal(tiny_model.frame_shape)
    target = predict_noise(tiny_model, x, 2, emb)
    grads, loss = loss_gradients(tiny_model, [Sample(x, 2, emb, target)])
    assert loss == 0.0
    assert all(np.all(g == 0) for g in grads.values())


def test_zero_mask_annihilates(tiny_model, rng):
    batch = _batch(tiny_model, rng, mask=np.zeros(tiny_model.frame_shape[:2]))
    grads, loss = loss_gradients(tiny_model, batch)
    assert loss == 0.0
    assert all(np.all(g == 0) for g in grads.values())


def test_empty_batch(tiny_model):
    with pytest.raises(ValueError):
        loss_gradients(tiny_model, [])


def test_bad_mask_shape(tiny_model, rng):
    with pytest.raises(ValueError):
        loss_gradients(tiny_model, _batch(tiny_model, rng, mask=np.ones((5, 5))))


@pytest.mark.parametrize("seed", range(20))
def test_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    model = init_model((2, 2, 2), 4, (2, 2), seed=seed, t_dim=3, T=10, pos_dim=seed % 3)
    mask = rng.integers(0, 2, size=(2, 2)) if seed % 2 else None
    batch = _batch(model, rng, n=1 + seed % 3, mask=mask, position=0.25)
    analytic, _ = loss_gradients(model, batch)
    assert max_rel_err(analytic, _fd_grads(model, batch)) <= 1e-5


def test_mask_linearity(tiny_model, rng):
    m1 = rng.integers(0, 2, size=tiny_model.frame_shape[:2])
    m2 = 1 - m1
    base = _batch(tiny_model, rng, n=3)
    g1, _ = loss_gradients(tiny_model, [s._replace(mask=m1) for s in base])
    g2, _ = loss_gradients(tiny_model, [s._replace(mask=m2) for s in base])
    g12, _ = loss_gradients(tiny_model, [s._replace(mask=m1 + m2) for s in base])
    for k in PARAM_NAMES:
        np.testing.assert_allclose(g12[k], g1[k] + g2[k], rtol=0, atol=1e-12)


def test_apply_update_lr_zero(tiny_model, rng):
    grads, _ = loss_gradients(tiny_model, _batch(tiny_model, rng))
    new = apply_update(tiny_model, grads, 0.0)
    assert all(np.array_equal(new.params[k], tiny_model.params[k]) for k in PARAM_NAMES)


def test_apply_update_arithmetic(tiny_model):
    grads = {k: np.zeros_like(v) for k, v in tiny_model.params.items()}
    model = tiny_model.copy()
    model.params["b3"][0] = 1.0
    grads["b3"][0] = 2.0
    new = apply_update(model, grads, 0.1)
    assert new.params["b3"][0] == pytest.approx(0.8, abs=1e-15)
    assert model.params["b3"][0] == 1.0


def test_apply_update_rejects(tiny_model):
    grads = {k: np.zeros_like(v) for k, v in tiny_model.params.items()}
    bad = dict(grads, W1=np.zeros((1, 1)))
    with pytest.raises(ValueError):
        apply_update(tiny_model, bad, 0.1)
    nan = dict(grads, b2=np.full_like(grads["b2"], np.nan))
    with pytest.raises(FloatingPointError):
        apply_update(tiny_model, nan, 0.1)


def test_updates_converge_on_quadratic(tiny_model):
    centre = {k: np.full_like(v, 0.3) for k, v in tiny_model.params.items()}
    model = tiny_model
    for _ in range(200):
        grads = {k: 2 * (model.params[k] - centre[k]) for k in PARAM_NAMES}
        model = apply_update(model, grads, 0.1)
    for k in PARAM_NAMES:
        np.testing.assert_allclose(model.params[k], centre[k], atol=1e-12)


def test_descent_property(rng):
    for seed in range(10):
        model = init_model((2, 3, 1), 6, (2, 2), seed=seed, t_dim=4, T=10)
        batch = _batch(model, np.random.default_rng(seed), n=2)
        grads, loss = loss_gradients(model, batch)
        after = loss_gradients(apply_update(model, grads, 1e-4), batch)[1]
        assert after < loss


def test_checkpoint_round_trip(tmp_path):
    model = init_model((3, 4, 2), 7, (3, 5), seed=3, t_dim=6, T=20, pos_dim=2)
    save_checkpoint(model, tmp_path / "m.vcm")
    back = load_checkpoint(tmp_path / "m.vcm")
    assert (back.frame_shape, back.hidden, back.t_dim, back.h_dim, back.c_dim, back.T, back.pos_dim) == (
        (3, 4, 2), 7, 6, 3, 5, 20, 2,
    )
    for k in PARAM_NAMES:
        assert back.params[k].tobytes() == model.params[k].tobytes()
    raw = (tmp_path / "m.vcm").read_bytes()
    assert raw[:4] == b"VCDM"
    assert int.from_bytes(raw[4:8], "little") == 1


def test_checkpoint_rejects_corruption(tmp_path):
    model = init_model((2, 2, 1), 3, (1, 1), seed=0, t_dim=2, T=5)
    p = tmp_path / "m.vcm"
    save_checkpoint(model, p)
    raw = p.read_bytes()
    (tmp_path / "trunc.vcm").write_bytes(raw[:-8])
    (tmp_path / "magic.vcm").write_bytes(b"XXXX" + raw[4:])
    (tmp_path / "ver.vcm").write_bytes(raw[:4] + (9).to_bytes(4, "little") + raw[8:])
    for name in ("trunc.vcm", "magic.vcm", "ver.vcm"):
        with pytest.raises(ValueError):
            load_checkpoint(tmp_path / name)
