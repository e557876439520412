import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import fd_gradients, max_relative_error, random_small_model

from landvec.errors import DimensionError, DivergenceError, EmptyDatasetError, UsageError
from landvec.randfunc import generate_suite
from landvec.sampling import LandscapeVector
from landvec.vae import (
    TrainConfig,
    build_model,
    check_latent_size,
    decode,
    encode,
    evaluate_losses,
    loss_and_grads,
    loss_kl,
    loss_mse,
    loss_vae,
    train,
    vae_forward,
)


def test_loss_kl_examples():
    assert loss_kl([0.0], [0.0]) == 0.0
    assert loss_kl([1.0], [0.0]) == 0.5
    # independent scalar evaluation
    assert loss_kl([0.0], [math.log(2)]) == pytest.approx(0.5 * (2 - 1 - math.log(2)), abs=1e-15)
    assert loss_kl([0.0], [math.log(2)]) == pytest.approx(0.15343, abs=1e-5)


def test_loss_mse_examples():
    assert loss_mse([0.2, 0.4], [0.2, 0.4]) == 0.0
    assert loss_mse([0, 1], [1, 1]) == 1.0
    assert loss_mse([0, 0, 0], [0.5, 0.5, 0.5]) == 0.75
    with pytest.raises(DimensionError):
        loss_mse([0, 1], [0, 1, 2])


def test_loss_vae_examples():
    x, xh = np.array([0.1, 0.7]), np.array([0.3, 0.2])
    mu, sg = np.array([0.4, -1.0]), np.array([0.3, -0.2])
    assert loss_vae(x, xh, mu, sg, 0.0) == loss_mse(x, xh)
    assert loss_vae(x, x, [0.0], [0.0], 0.3) == 0.0
    assert 0.001 * 10 + 0.2 == pytest.approx(0.21)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=1, max_size=8))
def test_loss_kl_nonnegative(pairs):
    mu, sg = np.array(pairs).T
    assert loss_kl(mu, sg) >= 0.0


def test_architecture():
    m = build_model("vae", 64, 16, seed=1)
    dims = [(l.in_dim, l.out_dim, l.activation) for l in m.layers]
    assert dims == [
        (64, 32, "relu"), (32, 16, "relu"), (16, 16, "identity"), (16, 16, "identity"),
        (16, 16, "relu"), (16, 32, "relu"), (32, 64, "sigmoid"),
    ]
    ae = build_model("ae", 64, 8)
    assert ae.logvar_head is None and len(ae.layers) == 6


def test_latent_size_constraint():
    check_latent_size(256, 64)
    with pytest.raises(UsageError):
        check_latent_size(256, 70)
    with pytest.raises(UsageError):
        check_latent_size(64, 0)
    with pytest.raises(UsageError):
        build_model("gan", 64, 4)


def test_vae_forward_properties(small_vae, rng):
    x = rng.uniform(0, 1, 16)
    xh, mu, sg = vae_forward(small_vae, x, np.zeros(2))
    assert np.array_equal(xh, decode(small_vae, mu).values)
    assert np.all((xh > 0) & (xh < 1))
    # vanishing variance: push the log-variance head to -50
    small_vae.logvar_head.W[:] = 0.0
    small_vae.logvar_head.b[:] = -50.0
    xh2, mu2, _ = vae_forward(small_vae, x, np.array([3.0, -2.0]))
    assert np.allclose(xh2, decode(small_vae, mu2).values, atol=1e-9)
    with pytest.raises(DimensionError):
        vae_forward(small_vae, x[:5], np.zeros(2))


def test_gradients_match_finite_differences(rng):
    for seed in range(3):
        model = random_small_model("vae", seed)
        X = rng.uniform(0, 1, (4, 16))
        eps = rng.standard_normal((4, 2))
        _, _, _, grads = loss_and_grads(model, X, eps, 0.5)
        assert max_relative_error(grads, fd_gradients(model, X, eps, 0.5)) < 1e-4


def test_ae_gradients(rng):
    model = random_small_model("ae", 9)
    X = rng.uniform(0, 1, (3, 16))
    _, _, kl, grads = loss_and_grads(model, X, None, 0.0)
    assert kl == 0.0
    assert max_relative_error(grads, fd_gradients(model, X, None, 0.0)) < 1e-4


def test_encode_decode_contracts(small_vae, rng):
    x = LandscapeVector(rng.uniform(0, 1, 16))
    z = encode(small_vae, x)
    assert z.shape == (2,) and np.array_equal(z, encode(small_vae, x))
    out = decode(small_vae, z)
    assert isinstance(out, LandscapeVector) and len(out) == 16
    assert np.array_equal(out.values, decode(small_vae, z).values)
    with pytest.raises(DimensionError):
        encode(small_vae, np.zeros(15))
    with pytest.raises(DimensionError):
        decode(small_vae, np.zeros(3))


@pytest.fixture(scope="module")
def small_data():
    return generate_suite(1000, 2, seed=5, m=6)[1]


def test_training_improves_and_is_deterministic(small_data):
    cfg = TrainConfig(beta=0.001, epochs=50, seed=4)
    a = train(small_data, cfg, "vae", 8)
    b = train(small_data, cfg, "vae", 8)
    hist = a.metadata["history"]
    assert hist[-1]["val_loss_mse"] < hist[0]["val_loss_mse"]
    assert hist[-1]["train_loss"] <= hist[0]["train_loss"]
    assert all(np.array_equal(p, q) for p, q in zip(a.params(), b.params()))
    assert a.metadata["n_validation"] == 100 and a.metadata["epochs"] == 50
    # reconstruction sanity bound on training landscapes
    train_mse = hist[-1]["train_mse"]
    recon = decode(a, encode(a, small_data[:20]))
    per_example = np.sum((recon - small_data[:20]) ** 2, axis=1)
    assert per_example.mean() < 10 * train_mse


def test_beta_zero_vae_loss_is_reconstruction(small_data):
    m = train(small_data[:200], TrainConfig(beta=0.0, epochs=2), "vae", 4)
    for rec in m.metadata["history"]:
        assert rec["val_loss_vae"] == rec["val_loss_mse"]
        assert rec["train_loss"] == pytest.approx(rec["train_mse"], rel=1e-12)


def test_validation_losses_use_mean(small_vae, rng):
    X = rng.uniform(0, 1, (5, 16))
    out = evaluate_losses(small_vae, X, beta=0.5)
    recon = decode(small_vae, encode(small_vae, X))
    assert out["loss_mse"] == pytest.approx(np.sum((recon - X) ** 2) / 5)


def test_train_errors():
    with pytest.raises(EmptyDatasetError):
        train(np.zeros((0, 16)), TrainConfig(epochs=1), "vae", 2)
    with pytest.raises(DivergenceError):
        train(np.full((4, 16), np.nan), TrainConfig(epochs=1), "vae", 2)
    with pytest.raises(UsageError):
        TrainConfig(beta=-1)
    with pytest.raises(UsageError):
        TrainConfig(validation_fraction=1.0)
