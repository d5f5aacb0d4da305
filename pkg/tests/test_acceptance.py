"""Acceptance suite: one test per top-level criterion.

Each test is self-contained, seeded, and prints a single summary line on
success (visible with -v through the test name, and with -s through the
printed line).
"""

import math
import os
import time

import numpy as np
import pytest

from docgaze.density import Fixation, Scanpath, build_fdm, dwell_map
from docgaze.imitate import (
    N_WEIGHTS,
    ImitationConfig,
    ImitationModel,
    LinearPolicy,
    discriminator_update,
    feature_matrix,
    policy_distribution,
    state_features,
)
from docgaze.kernels import gaussian_blur
from docgaze.layout import assign_cluster, elbow_curve, kmeans_pp
from docgaze.metrics import (
    FixationClusterer,
    auc_judd,
    cc,
    fit_fixation_clusterer,
    kl,
    multimatch,
    nss,
    sauc,
    sequence_score,
)
from docgaze.simulate import (
    GRID_COLS,
    GRID_ROWS,
    N_ACTIONS,
    foveate_update,
    init_belief,
    rollout,
)
from oracles import (
    auc_judd_oracle,
    cc_oracle,
    kl_oracle,
    lcs_oracle,
    multimatch_oracle,
    nss_oracle,
    sauc_oracle,
)

SCREEN = (480.0, 320.0)


def _fix(pts):
    return [Fixation(float(x), float(y)) for x, y in pts]


def _path(pts, image_id="i", subject_id="s"):
    return Scanpath(image_id, subject_id, tuple(
        Fixation(float(x), float(y), 200.0, index=k)
        for k, (x, y) in enumerate(pts)))


def test_metric_oracle_suite():
    """Saliency and scanpath metrics agree with brute-force oracles on
    100+ seeded 8x8 / length-7 instances within 1e-9, in under 30 s."""
    start = time.time()
    tol = 1e-9
    n = 0
    modes = np.array([(x, y) for y in (40.0, 280.0)
                      for x in (40.0, 160.0, 300.0, 440.0)])
    clusterer = FixationClusterer(bandwidth=100.0)
    clusterer.modes = modes
    for seed in range(110):
        rng = np.random.default_rng(1000 + seed)
        v = rng.random((8, 8))
        pts = rng.uniform(0, 8, (7, 2))
        spts = np.column_stack([rng.uniform(4, 8, 10), rng.uniform(0, 8, 10)])
        pts[:, 0] = rng.uniform(0, 4, 7)  # keep positives clear of negatives
        p = rng.random((8, 8))
        q = rng.random((8, 8))
        p /= p.sum()
        q /= q.sum()
        assert abs(nss(v, _fix(pts)) - nss_oracle(v, pts)) < tol
        assert abs(cc(v, p) - cc_oracle(v, p)) < tol
        assert abs(kl(p, q) - kl_oracle(p, q, 2.2e-16)) < tol
        assert abs(auc_judd(v, _fix(pts)) - auc_judd_oracle(v, pts)) < tol
        assert abs(sauc(v, _fix(pts), _fix(spts))
                   - sauc_oracle(v, pts, spts)) < tol

        ia = rng.integers(0, len(modes), 7)
        ib = rng.integers(0, len(modes), 7)
        sa = _path([tuple(modes[i]) for i in ia])
        sb = _path([tuple(modes[i]) for i in ib])
        want_ss = lcs_oracle(list(ia), list(ib)) / 7.0
        assert abs(sequence_score(sa, sb, clusterer) - want_ss) < tol

        p1 = rng.uniform((0, 0), SCREEN, (7, 2))
        p2 = rng.uniform((0, 0), SCREEN, (7, 2))
        got = multimatch(_path(p1), _path(p2), SCREEN)
        want = multimatch_oracle(p1, p2, SCREEN)
        for k in want:
            assert abs(got[k] - want[k]) < tol
        n += 1
    elapsed = time.time() - start
    assert n >= 100 and elapsed < 30.0
    print(f"PASS metric-oracle-suite: {n} instances, {elapsed:.1f}s")


def test_identity_and_degenerate_suite():
    """Identities: cc(m,m)=1, kl(p,p)=0, SS(s,s)=1, multimatch(s,s)=1 in
    all dims; constant-map AUC=0.5; zero-variance NSS raises."""
    rng = np.random.default_rng(0)
    m = rng.random((8, 8))
    assert abs(cc(m, m) - 1.0) <= 1e-12
    p = m / m.sum()
    assert abs(kl(p, p)) <= 1e-12

    pts = rng.uniform((0, 0), SCREEN, (7, 2))
    sp = _path(pts)
    clusterer = fit_fixation_clusterer([sp])
    assert sequence_score(sp, sp, clusterer) == 1.0
    mm = multimatch(sp, sp, SCREEN)
    for k in ("shape", "direction", "length", "position"):
        assert mm[k] == pytest.approx(1.0, abs=1e-12)

    const = np.ones((8, 8))
    assert auc_judd(const, _fix([(3, 3)])) == 0.5
    assert sauc(const, _fix([(1, 1)]), _fix([(5, 5)])) == 0.5
    with pytest.raises(ValueError):
        nss(const, _fix([(3, 3)]))
    print("PASS identity-degenerate-suite")


def test_affine_invariance_suite():
    """nss/cc/auc_judd/sauc unchanged to 1e-9 under positive affine
    rescaling, 1000 random cases."""
    tol = 1e-9
    for seed in range(1000):
        rng = np.random.default_rng(20_000 + seed)
        v = rng.random((8, 8))
        a = float(rng.uniform(0.1, 10.0))
        b = float(rng.uniform(-5.0, 5.0))
        w = a * v + b
        pts = np.column_stack([rng.uniform(0, 4, 5), rng.uniform(0, 8, 5)])
        spts = np.column_stack([rng.uniform(4, 8, 8), rng.uniform(0, 8, 8)])
        fixes, sfixes = _fix(pts), _fix(spts)
        other = rng.random((8, 8))
        assert abs(nss(v, fixes) - nss(w, fixes)) < tol
        assert abs(cc(v, other) - cc(w, other)) < tol
        assert abs(auc_judd(v, fixes) - auc_judd(w, fixes)) < tol
        assert abs(sauc(v, fixes, sfixes) - sauc(w, fixes, sfixes)) < tol
    print("PASS affine-invariance-suite: 1000 cases")


def test_belief_dynamics_suite():
    """Foveation only touches masked cells, full mask copies H exactly,
    layout channel is constant, and 10^4 seeded length-7 rollouts never
    revisit a cell."""
    rng = np.random.default_rng(5)
    low = rng.random((5, GRID_ROWS, GRID_COLS))
    lay = rng.random((GRID_ROWS, GRID_COLS))
    high = rng.random((5, GRID_ROWS, GRID_COLS))
    b = init_belief(low, lay)

    b1 = foveate_update(b, 200, radius=2.5, high_res=high)
    from docgaze.simulate import circular_mask

    mask = circular_mask(200, 2.5)
    assert np.array_equal(b1.component_channels[:, ~mask],
                          b.component_channels[:, ~mask])
    assert np.array_equal(b1.component_channels[:, mask], high[:, mask])
    assert np.array_equal(b1.layout, lay)

    b_full = foveate_update(b, 200, radius=1e9, high_res=high)
    assert np.array_equal(b_full.component_channels, high)

    probs = np.random.default_rng(1).dirichlet(np.ones(N_ACTIONS) * 0.1)

    class FixedPolicy:
        def action_distribution(self, state):
            return probs

    n_runs = 10_000
    for seed in range(n_runs):
        actions, _ = rollout(FixedPolicy(), b, high, 7, rng_seed=seed)
        assert len(set(actions)) == 7
    print(f"PASS belief-dynamics-suite: {n_runs} rollouts, no revisits")


def test_mass_conservation_suite():
    """Blur-based constructions conserve pre-normalization mass within
    1e-6 relative; dwell-map mass equals the duration sum."""
    rng = np.random.default_rng(9)
    for sigma in (0.5, 2.0, 8.0, 25.0):
        v = rng.random((40, 60))
        out = gaussian_blur(v, sigma)
        assert abs(out.sum() - v.sum()) <= 1e-6 * v.sum()

    fixes = [Fixation(float(x), float(y), float(d))
             for x, y, d in zip(rng.uniform(0, 60, 20),
                                rng.uniform(0, 40, 20),
                                rng.uniform(100, 400, 20))]
    m = build_fdm(fixes, 60, 40, sigma=25.0, normalize=False)
    assert abs(m.sum() - 20.0) <= 1e-6 * 20.0

    dm = dwell_map(fixes, 60, 40, sigma=25.0)
    total_ms = sum(f.duration_ms for f in fixes)
    assert abs(dm.sum() - total_ms) <= 1e-6 * total_ms
    print("PASS mass-conservation-suite")


def test_clustering_suite():
    """Seeded k-means++ is bitwise reproducible, assignment matches an
    exhaustive scan on 1000 vectors, nested wcss is non-increasing over
    k=1..8, and a 6-blob corpus elbows at k=6."""
    rng = np.random.default_rng(17)
    pts = rng.random((200, 4))
    m1 = kmeans_pp(pts, 5, seed=3)
    m2 = kmeans_pp(pts, 5, seed=3)
    assert np.array_equal(m1.centers, m2.centers) and m1.wcss == m2.wcss

    probes = rng.random((1000, 4))
    for v in probes:
        d = ((m1.centers - v) ** 2).sum(axis=1)
        assert assign_cluster(v, m1) == int(np.argmin(d))

    curve = elbow_curve(pts, range(1, 9), seed=0)
    wcss = [w for _, w in curve]
    assert all(b <= a + 1e-12 for a, b in zip(wcss, wcss[1:]))

    # six tight, well-separated blobs in the 4-d ratio space
    centers = rng.random((6, 4)) * 0.8 + 0.1
    blob_pts = np.vstack([
        rng.normal(c, 0.01, size=(30, 4)) for c in centers
    ])
    blob_curve = elbow_curve(blob_pts, range(1, 9), seed=1)
    blob_wcss = dict(blob_curve)
    rel_drop = {k: (blob_wcss[k - 1] - blob_wcss[k]) / blob_wcss[k - 1]
                for k in range(2, 9)}
    assert max(rel_drop, key=rel_drop.get) == 6
    print("PASS clustering-suite: elbow at k=6")


def test_gradient_suite():
    """Analytic policy/critic/discriminator gradients match central finite
    differences at relative error < 1e-5 on 50 seeded configurations."""
    h = 1e-6
    max_rel = 0.0
    for seed in range(50):
        rng = np.random.default_rng(40_000 + seed)
        theta = rng.normal(0, 0.3, N_WEIGHTS)
        b = init_belief(rng.random((5, GRID_ROWS, GRID_COLS)),
                        rng.random((GRID_ROWS, GRID_COLS)))
        visited = tuple(rng.integers(0, N_ACTIONS, 4))
        for cell in visited:
            object.__setattr__(b, "visited", b.visited | {int(cell)})
        feats = feature_matrix(b)
        mask = b.visited_mask()
        action = int(rng.choice(np.flatnonzero(~mask)))

        # policy: grad of log pi(a|s) wrt theta
        def logp(t):
            z = np.where(mask, -np.inf, feats @ t)
            z = z - z[~mask].max()
            e = np.where(mask, 0, np.exp(z))
            return math.log(e[action] / e.sum())

        model = ImitationModel(theta=theta.copy())
        dist = policy_distribution(model, b)
        analytic = feats[action] - dist @ feats
        fd = np.array([
            (logp(theta + h * e) - logp(theta - h * e)) / (2 * h)
            for e in np.eye(N_WEIGHTS)
        ])
        rel = np.linalg.norm(analytic - fd) / np.linalg.norm(fd)
        assert rel < 1e-5
        max_rel = max(max_rel, rel)

        # critic: grad of (psi@v - target)^2
        v = rng.normal(0, 0.3, N_WEIGHTS)
        psi = state_features(feats, mask)
        target = float(rng.normal())
        analytic_c = 2.0 * (psi @ v - target) * psi

        def closs(w):
            return (psi @ w - target) ** 2

        fd_c = np.array([
            (closs(v + h * e) - closs(v - h * e)) / (2 * h)
            for e in np.eye(N_WEIGHTS)
        ])
        rel = np.linalg.norm(analytic_c - fd_c) / np.linalg.norm(fd_c)
        assert rel < 1e-5
        max_rel = max(max_rel, rel)

        # discriminator: recover the gradient from one unit-lr update
        w0 = rng.normal(0, 0.3, N_WEIGHTS)
        real = rng.normal(0.3, 1.0, (12, N_WEIGHTS))
        fake = rng.normal(-0.3, 1.0, (12, N_WEIGHTS))
        dm = ImitationModel(disc=w0.copy())
        updated, _ = discriminator_update(dm, real, fake, lr=1.0)
        analytic_d = w0 - updated.disc

        def dloss(w):
            def sig(x):
                return 1.0 / (1.0 + np.exp(-x))

            dr = np.clip(sig(real @ w), 1e-6, 1 - 1e-6)
            df = np.clip(sig(fake @ w), 1e-6, 1 - 1e-6)
            return -(np.log(dr).mean() + np.log(1 - df).mean()) / 2

        fd_d = np.array([
            (dloss(w0 + h * e) - dloss(w0 - h * e)) / (2 * h)
            for e in np.eye(N_WEIGHTS)
        ])
        rel = np.linalg.norm(analytic_d - fd_d) / np.linalg.norm(fd_d)
        assert rel < 1e-5
        max_rel = max(max_rel, rel)
    print(f"PASS gradient-suite: 50 configs, max rel err {max_rel:.2e}")


def _mean_heldout_ss(model, examples, heldout, horizon=7, bandwidth=40.0,
                     n_gen=3):
    scores = []
    for ex in examples:
        paths = heldout[ex.image_id]
        clusterer = fit_fixation_clusterer(paths, bandwidth)
        for g in range(n_gen):
            _, sp = rollout(LinearPolicy(model), ex.b0, ex.high_res, horizon,
                            rng_seed=123 + g, image_size=ex.image_size,
                            image_id=ex.image_id, subject_id="gen")
            for ref in paths:
                scores.append(sequence_score(sp, ref, clusterer))
    return float(np.mean(scores))


def test_imitation_desk_scale():
    """Adversarial imitation on 20 planted-policy documents (15 epochs,
    batch 32) lifts held-out Sequence Score over the untrained uniform
    policy by at least 0.05, in under 5 minutes."""
    from docgaze.imitate import train
    from docgaze.synth import make_imitation_dataset

    start = time.time()
    examples, heldout = make_imitation_dataset(n_images=20,
                                               paths_per_image=10, seed=11)
    config = ImitationConfig(epochs=15, batch_size=32, lr=5.0,
                             critic_lr=0.05, disc_lr=1.0, disc_steps=10,
                             episodes_per_image=8, ppo_epochs=8, seed=0)
    trained, history = train(examples, config)
    ss_untrained = _mean_heldout_ss(ImitationModel(), examples, heldout)
    ss_trained = _mean_heldout_ss(trained, examples, heldout)
    elapsed = time.time() - start
    assert elapsed < 300.0
    assert ss_trained - ss_untrained >= 0.05, (
        f"trained {ss_trained:.3f} vs untrained {ss_untrained:.3f}")
    assert all(np.isfinite(row["disc_loss"]) for row in history)
    print(f"PASS imitation-desk-scale: SS {ss_untrained:.3f} -> "
          f"{ss_trained:.3f}, {elapsed:.0f}s")


@pytest.mark.skipif(
    not os.environ.get("DOCGAZE_REAL_DATA"),
    reason="set DOCGAZE_REAL_DATA to a real-dataset manifest to enable",
)
def test_real_data_qualitative():
    """On a supplied real dataset: logos attract attention most, then
    faces and texts; banners rank lowest; inter-observer sequence score is
    meaningful; fixation entropy is computable per image."""
    from docgaze import pipeline
    from docgaze.density import fdm_entropy
    from docgaze.metrics import component_fixation_proportions, inter_observer
    from docgaze.io import load_manifest
    from docgaze.simulate import cell_center

    manifest = load_manifest(os.environ["DOCGAZE_REAL_DATA"])
    entries = manifest.entries
    assert entries, "empty manifest"

    pooled = {c: [] for c in ("face", "text", "logo", "banner", "image")}
    by_image = {}
    entropies = []
    for entry in entries:
        seg = pipeline.entry_segmentation(entry)
        paths = pipeline.entry_scanpaths(entry)
        by_image[entry.image_id] = paths
        table = component_fixation_proportions(paths, seg)
        for comp, row in table.items():
            pooled[comp].extend(v for v in row if v is not None)
        entropies.append(fdm_entropy(pipeline.gt_fdm(entry, seg, 25.0)))

    means = {c: np.mean(v) for c, v in pooled.items() if v}
    assert means["logo"] > means["face"] > means["text"]
    assert means["banner"] == min(means.values())  # banner blindness

    seg0 = pipeline.entry_segmentation(entries[0])
    io_scores = inter_observer(by_image, (seg0.width, seg0.height))
    assert 0.0 < io_scores["sequence_score"] < 1.0

    # random-policy baseline must fall below inter-observer agreement
    rng = np.random.default_rng(0)
    rand_ss = []
    for entry in entries[:10]:
        paths = by_image[entry.image_id]
        if len(paths) < 2:
            continue
        clusterer = fit_fixation_clusterer(paths)
        cells = rng.choice(N_ACTIONS, size=7, replace=False)
        pts = [cell_center(int(c), seg0.width, seg0.height) for c in cells]
        rnd = _path(pts)
        rand_ss.extend(sequence_score(rnd, p, clusterer) for p in paths)
    assert io_scores["sequence_score"] > np.mean(rand_ss)
    assert all(np.isfinite(e) for e in entropies)
    print("PASS real-data-qualitative")


def test_cli_end_to_end(corpus_manifest, tmp_path):
    """Full pipeline on the bundled corpus, twice with the same seed:
    exit 0 everywhere and byte-identical outputs, in under 2 minutes."""
    from docgaze.cli import main

    start = time.time()
    manifest = str(corpus_manifest)

    def run(base):
        steps = [
            ["build-fdm", "--manifest", manifest, "--split", "train",
             "--out-dir", str(base / "fdm")],
            ["cluster", "--manifest", manifest, "--split", "train",
             "--k", "3", "--seed", "7", "--out-dir", str(base / "model")],
            ["fit-priors", "--manifest", manifest, "--split", "train",
             "--model-dir", str(base / "model"),
             "--out-dir", str(base / "model")],
            ["predict", "--manifest", manifest, "--split", "test",
             "--model-dir", str(base / "model"),
             "--out-dir", str(base / "pred")],
            ["simulate", "--manifest", manifest, "--split", "test",
             "--model-dir", str(base / "model"), "--seed", "1",
             "--out-dir", str(base / "sim")],
            ["evaluate", "--manifest", manifest, "--split", "test",
             "--pred-dir", str(base / "pred"),
             "--pred-scanpaths", str(base / "sim" / "scanpaths.csv"),
             "--out-dir", str(base / "eval")],
            ["render", "--image",
             str(corpus_manifest.parent / "images" / "doc009.png"),
             "--map", str(base / "pred" / "doc009_pred.png"),
             "--out", str(base / "render.png")],
        ]
        for argv in steps:
            assert main(argv) == 0, f"step failed: {argv[0]}"

    run(tmp_path / "run1")
    run(tmp_path / "run2")

    files1 = sorted(p for p in (tmp_path / "run1").rglob("*") if p.is_file())
    assert files1
    for p1 in files1:
        p2 = tmp_path / "run2" / p1.relative_to(tmp_path / "run1")
        assert p2.is_file(), f"missing in second run: {p2}"
        assert p1.read_bytes() == p2.read_bytes(), f"differs: {p1.name}"
    elapsed = time.time() - start
    assert elapsed < 120.0
    print(f"PASS cli-end-to-end: {len(files1)} byte-stable files, "
          f"{elapsed:.0f}s")
