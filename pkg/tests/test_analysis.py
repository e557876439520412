import numpy as np
import pytest
from scipy.spatial.distance import pdist
from scipy.stats import ortho_group

from landvec.analysis import (
    DEFAULT_KL_WEIGHTS,
    DEFAULT_LATENT_SIZES,
    classical_mds,
    latent_traversal,
    mds_csv,
    sweep,
    traversal_deltas,
)
from landvec.errors import ConvergenceError, DimensionError, IndexOutOfRangeError, NonFiniteInputError, UsageError
from landvec.randfunc import generate_suite
from landvec.vae import TrainConfig, decode, encode, loss_mse


def test_triangle_345():
    X = np.zeros((3, 5))
    X[1, 0] = 3.0
    X[2, 1] = 4.0
    emb = classical_mds(X)
    assert np.allclose(sorted(pdist(emb.points)), [3.0, 4.0, 5.0], atol=1e-6)
    assert emb.stress < 1e-6


def test_planar_configuration_recovered(rng):
    P = rng.standard_normal((30, 2))
    P -= P.mean(axis=0)
    emb = classical_mds(P)
    assert np.allclose(pdist(emb.points), pdist(P), atol=1e-6)
    # recovered up to an orthogonal map
    Q, *_ = np.linalg.lstsq(emb.points, P, rcond=None)
    assert np.allclose(Q @ Q.T, np.eye(2), atol=1e-6)


def test_duplicates_and_centering(rng):
    X = rng.standard_normal((10, 4))
    X[7] = X[2]
    emb = classical_mds(X)
    assert np.linalg.norm(emb.points[7] - emb.points[2]) < 1e-9
    assert np.all(np.abs(emb.points.mean(axis=0)) < 1e-9)


def test_stress_orthogonal_invariance(rng):
    X = rng.standard_normal((25, 6))
    Q = ortho_group.rvs(6, random_state=3)
    a, b = classical_mds(X), classical_mds(X @ Q.T)
    assert a.stress == pytest.approx(b.stress, abs=1e-8)
    assert np.allclose(pdist(a.points), pdist(b.points), atol=1e-6)


def test_mds_errors(rng):
    with pytest.raises(UsageError):
        classical_mds(np.zeros((2, 3)))
    with pytest.raises(NonFiniteInputError):
        classical_mds([[0, 0], [1, np.nan], [2, 2]])
    with pytest.raises(DimensionError):
        classical_mds(np.zeros(5))
    with pytest.raises(ConvergenceError) as info:
        classical_mds(rng.standard_normal((20, 5)), max_iter=1)
    assert info.value.iterations == 1


def test_mds_csv():
    emb = classical_mds([[0, 0], [3, 0], [0, 4]])
    lines = mds_csv(emb, labels=["a", "b", "c"]).splitlines()
    assert lines[0] == "id,label,mds_x,mds_y" and len(lines) == 4
    assert lines[2].startswith("1,b,")
    with pytest.raises(DimensionError):
        mds_csv(emb, labels=["a"])


def test_traversal_contracts(small_vae):
    z0 = np.array([0.3, -0.2])
    deltas = traversal_deltas()
    assert deltas == [-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0]
    frames = latent_traversal(small_vae, z0, 1, deltas)
    assert len(frames) == 9
    assert np.array_equal(frames[4], decode(small_vae, z0).values)
    same = latent_traversal(small_vae, z0, 0, [0.0] * 5)
    assert all(np.array_equal(f, same[0]) for f in same)
    with pytest.raises(IndexOutOfRangeError):
        latent_traversal(small_vae, z0, 2, deltas)
    with pytest.raises(DimensionError):
        latent_traversal(small_vae, [0.0], 0, deltas)
    with pytest.raises(UsageError):
        traversal_deltas(step=0)


def test_traversal_smooth_on_trained_model(desk):
    deltas = traversal_deltas(-1.0, 1.0, 0.1)
    assert len(deltas) == 21
    near, far = [], []
    for x in desk.values[:20]:
        z0 = encode(desk.model, x)
        for index in range(desk.model.ls):
            frames = latent_traversal(desk.model, z0, index, deltas)
            near.append(np.mean([loss_mse(a, b) for a, b in zip(frames, frames[1:])]))
            far.append(loss_mse(frames[0], frames[-1]))
    assert np.mean(near) < np.mean(far)


def test_default_grid():
    assert len(DEFAULT_LATENT_SIZES) * len(DEFAULT_KL_WEIGHTS) == 25


def test_small_sweep():
    data = generate_suite(200, 2, seed=8, m=5)[1]
    cfg = TrainConfig(epochs=2, seed=1)
    res = sweep((2, 4), (0.001, 0.01), data, cfg, fingerprint="abc")
    assert len(res.rows) == 4 and res.seed == 1 and res.dataset_fingerprint == "abc"
    for r in res.rows:
        assert all(np.isfinite(r[k]) and r[k] >= 0 for k in ("loss_vae", "loss_mse", "loss_kl"))
        assert r["loss_vae"] == pytest.approx(r["kl_weight"] * r["loss_kl"] + r["loss_mse"], rel=1e-12)
    again = sweep((2, 4), (0.001, 0.01), data, cfg, fingerprint="abc")
    assert again.to_csv() == res.to_csv()
    lines = res.to_csv().splitlines()
    assert lines[0] == "latent_size,kl_weight,loss_vae,loss_mse,loss_kl" and len(lines) == 5
    assert res.cell(4, 0.01)["latent_size"] == 4
    with pytest.raises(UsageError):
        sweep((9,), (0.001,), data, cfg)
