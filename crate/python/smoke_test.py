"""Smoke test for the spdsl Python extension.

Build and install first, e.g. `maturin develop -m crates/python/Cargo.toml`.
"""

import numpy as np
from scipy.linalg import eigh, logm

import spdsl


def random_spd(rng, n):
    a = rng.standard_normal((n, n))
    return a @ a.T / n + 0.5 * np.eye(n)


def main():
    rng = np.random.default_rng(0)
    x, y = random_spd(rng, 5), random_spd(rng, 5)

    lx = np.array(spdsl.spd_log(x.tolist()))
    assert np.allclose(lx, logm(x).real, atol=1e-10)
    assert np.allclose(spdsl.spd_exp(lx.tolist()), x, atol=1e-10)

    lem = np.linalg.norm(logm(x).real - logm(y).real) ** 2
    assert abs(spdsl.dist2(x.tolist(), y.tolist(), "lem") - lem) < 1e-9 * max(1.0, lem)

    aim = np.sum(np.log(eigh(x, y, eigvals_only=True)) ** 2)
    assert abs(spdsl.dist2(x.tolist(), y.tolist(), "aim") - aim) < 1e-9 * max(1.0, aim)

    _, ld = np.linalg.slogdet((x + y) / 2)
    stein = ld - 0.5 * (np.linalg.slogdet(x)[1] + np.linalg.slogdet(y)[1])
    assert abs(spdsl.dist2(x.tolist(), y.tolist(), "stein") - stein) < 1e-9 * max(1.0, stein)

    w = np.linalg.qr(rng.standard_normal((5, 2)))[0]
    assert np.allclose(spdsl.map_down(x.tolist(), w.tolist()), w.T @ x @ w, atol=1e-12)

    for metric in ("aim", "stein", "lem"):
        err = spdsl.gradient_check(metric, seed=1)
        assert err < 1e-5, (metric, err)

    samples, labels = spdsl.synth_dataset(n=8, classes=3, per_class=8, noise=1.0, seed=2, informative_dim=3)
    train_idx = [i for i in range(len(labels)) if i % 2 == 0]
    test_idx = [i for i in range(len(labels)) if i % 2 == 1]
    tr_s, tr_l = [samples[i] for i in train_idx], [labels[i] for i in train_idx]
    te_s, te_l = [samples[i] for i in test_idx], [labels[i] for i in test_idx]

    out = spdsl.train(tr_s, tr_l, target_dim=3, metric="lem", vb=2, max_iters=30, seed=3)
    j = out["j_trace"]
    assert len(j) == out["iterations"] + 1
    assert j[-1] >= j[0]
    assert j[-1] <= out["upper_bound"] + 1e-12
    assert np.array(out["transform"]).shape == (8, 3)

    base = spdsl.knn_accuracy(tr_s, tr_l, te_s, te_l, metric="lem")
    learned = spdsl.knn_accuracy(tr_s, tr_l, te_s, te_l, metric="lem", transform=out["transform"])
    assert 0.0 <= base <= 1.0 and 0.0 <= learned <= 1.0

    frames = rng.standard_normal((30, 4)).tolist()
    d = np.array(spdsl.cov_descriptor(frames, augment_mean=True))
    assert d.shape == (5, 5) and np.all(np.linalg.eigvalsh(d) > 0)

    try:
        spdsl.dist2(x.tolist(), y.tolist(), "cosine")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown metric accepted")
    try:
        spdsl.map_down(x.tolist(), np.eye(5).tolist())
    except ValueError:
        pass
    else:
        raise AssertionError("bad transform accepted")

    print(f"J {j[0]:.4f} -> {j[-1]:.4f} ({out['stop_reason']}), 1-NN {base:.3f} -> {learned:.3f}")
    print("smoke test passed")


if __name__ == "__main__":
    main()
