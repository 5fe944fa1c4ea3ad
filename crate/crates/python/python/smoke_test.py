"""Smoke test for the fjd_py extension module.

Build and install first, e.g. `pip install --no-build-isolation crates/python`,
then run `python crates/python/python/smoke_test.py`.
"""

import math
import os
import tempfile

import numpy as np

import fjd_py


def close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def check_closed_form_pair():
    # Image y has the same marginal in both; only the x-y coupling differs.
    a = fjd_py.GaussianStats([0.0, 0.0], [[2.0, 2.0], [2.0, 4.0]])
    b = fjd_py.GaussianStats([0.0, 0.0], [[2.0, 2.0], [2.0, 2.1]])
    joint = fjd_py.frechet_distance(a, b)
    expected = 10.1 - 2.0 * math.sqrt(20.4 + 2.0 * math.sqrt(0.8))
    assert close(joint.value, expected, 1e-12), (joint, expected)
    assert abs(float(joint) - joint.value) == 0.0

    marg_a = fjd_py.GaussianStats([0.0], [[2.0]])
    marg_b = fjd_py.GaussianStats([0.0], [[2.0]])
    assert fjd_py.frechet_distance(marg_a, marg_b).value == 0.0


def check_scores_on_arrays():
    rng = np.random.default_rng(0)
    ref_img = rng.normal(size=(500, 4))
    ref_cond = ref_img[:, :2] + 0.1 * rng.normal(size=(500, 2))
    gen_img = rng.normal(size=(500, 4))
    gen_cond = rng.normal(size=(500, 2))

    fid = fjd_py.compute_fid(ref_img.tolist(), gen_img.tolist()).value
    score, alpha = fjd_py.compute_fjd(ref_img.tolist(), ref_cond.tolist(), gen_img.tolist(), gen_cond.tolist())
    assert score.value >= fid
    assert close(alpha, fjd_py.calibrate_alpha(ref_img.tolist(), ref_cond.tolist()), 0.0)

    # numpy arrays are accepted directly.
    fixed, used = fjd_py.compute_fjd(ref_img, ref_cond, gen_img, gen_cond, alpha=alpha)
    assert used == alpha
    assert close(fixed.value, score.value, 1e-12)

    sweep = fjd_py.sweep_alpha(ref_img, ref_cond, gen_img, gen_cond, [0.0, 0.5, 1.0, 2.0])
    assert close(sweep[0][1], fid, 1e-9)
    assert all(b[1] >= a[1] for a, b in zip(sweep, sweep[1:]))

    stats = fjd_py.GaussianStats.estimate(ref_img)
    assert stats.dim == 4 and stats.count == 500
    assert np.allclose(stats.cov, np.cov(ref_img, rowvar=False), atol=1e-12)


def check_errors():
    try:
        fjd_py.compute_fid([[1.0, 2.0], [3.0, 4.0]], [[1.0], [2.0]])
    except fjd_py.FjdError as e:
        assert isinstance(e, ValueError)
    else:
        raise AssertionError("dimension mismatch accepted")
    try:
        fjd_py.frechet_distance(
            fjd_py.GaussianStats([0.0, 0.0], [[1.0, 0.0], [0.0, -1.0]]),
            fjd_py.GaussianStats([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]]),
        )
    except fjd_py.FjdError as e:
        assert "not PSD" in str(e), e
    else:
        raise AssertionError("indefinite covariance accepted")


def check_embedders_and_io():
    assert fjd_py.one_hot(2, 4) == [0.0, 0.0, 1.0, 0.0]
    assert fjd_py.n_hot([0, 3, 3], 4) == [1.0, 0.0, 0.0, 1.0]

    images, conds = fjd_py.make_sprites(120, "mask", seed=1)
    assert len(images) == 120 and len(images[0]) == 64 * 64
    pca = fjd_py.Pca(images, 16)
    latent = pca.encode(images[:10])
    assert len(latent) == 10 and len(latent[0]) == 16
    assert 0.0 < pca.explained_variance_ratio <= 1.0

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "latent.fjde")
        fjd_py.write_embeddings(path, latent)
        back = fjd_py.read_embeddings(path)
        assert np.allclose(back, np.asarray(latent, dtype=np.float32))


def check_experiments():
    table = fjd_py.run_experiment("gaussian_exact")
    row = table["rows"][0]
    assert row["fid"] == 0.0
    assert close(row["fjd"], 0.678991, 1e-5), row

    noise = fjd_py.run_experiment("noise", "class", n=300, seed=3, sweep=[0.0, 0.1, 0.2])
    fids = [r["fid"] for r in noise["rows"]]
    assert fids[0] == 0.0 and fids[0] < fids[1] < fids[2], fids
    assert noise["alpha_6dp"] == f"{noise['alpha']:.6f}"

    fid_floor, fjd_floor = fjd_py.control_floor("noise", "class", n=300, seed=3)
    assert fid_floor > 0.0 and fjd_floor > 0.0


def main():
    check_closed_form_pair()
    check_scores_on_arrays()
    check_errors()
    check_embedders_and_io()
    check_experiments()
    print(f"fjd_py {fjd_py.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
