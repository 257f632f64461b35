"""Smoke test for the pyxailab extension module.

Build and install first, e.g.

    pip install --no-build-isolation ./crates/python

then run `python python/smoke_test.py`.
"""

import os
import sys
import tempfile

import pyxailab as xl


def check(cond, what):
    if not cond:
        sys.exit(f"FAIL {what}")
    print(f"ok   {what}")


def main():
    data = xl.Dataset.synthetic(600, seed=1)
    check(len(data) == 600 and data.width == 14, "synthetic dataset shape")
    sens = data.sensitive_index
    train, test = data.split(0.25, seed=2)
    check(len(train) + len(test) == 600, "split keeps every row")

    f = xl.biased_rule(data)
    psi = xl.unbiased_rule(data)
    x = test.row(0)
    check(f.predict(x) == int(x[sens]), "biased rule reads the sensitive feature")

    bg = train.row(0)
    exact = xl.exact_shapley(f, x, bg)
    kernel = xl.explain_kernel_shap(f, x, [bg], exact_threshold=14)
    gap = max(abs(a - b) for a, b in zip(exact.weights, kernel.weights))
    check(gap < 1e-6, f"kernel SHAP matches exact Shapley (max gap {gap:.1e})")
    total = exact.intercept + sum(exact.weights)
    check(abs(total - f.predict_proba(x)[1]) < 1e-8, "local accuracy")

    lime = xl.explain_lime(f, train, x, n_samples=1000)
    check(lime.ranking()[0] == sens, "LIME ranks the sensitive feature first on f")

    shl = xl.explain_shlime(f, train, x, [bg])
    check(len(shl.weights) == data.width, "SHLIME returns one weight per feature")

    det, heldout = xl.train_ood_detector(train, "lime", seed=3)
    check(det.heldout_f1 > 0.8, f"LIME detector separates perturbations (F1 {det.heldout_f1:.3f})")
    e = xl.scaffold(f, psi, det)
    fid = xl.fidelity(e, f, test)
    check(fid > 0.95, f"scaffold agrees with f on real rows ({fid:.3f})")
    weak = det.degrade(0.6, heldout, 0.05, seed=4)
    check(abs(weak.measured_f1 - 0.6) <= 0.05, f"degraded detector F1 {weak.measured_f1:.3f}")

    with tempfile.TemporaryDirectory() as tmp:
        cfg = os.path.join(tmp, "pca.toml")
        with open(cfg, "w") as fh:
            fh.write('seed = 5\n[data.synthetic]\nn_rows = 200\n[experiment]\nkind = "pca"\n')
        manifest = xl.run_experiment(cfg, os.path.join(tmp, "out"))
        check('status = "complete"' in manifest, "config-driven PCA run completes")
        check(os.path.exists(os.path.join(tmp, "out", "pca.csv")), "pca.csv written")

    print(f"pyxailab {xl.__version__}: all smoke checks passed")


if __name__ == "__main__":
    main()
