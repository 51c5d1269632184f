import numpy as np
import pytest

from liplive.verification.motion_net import (ARCH_TAG, MotionDataError, MotionVerifierModel,
                                             cnn_shapes, forward, init_params, loss_and_grads,
                                             prepare, softmax, train_motion_verifier,
                                             verify_motion)

TABLE_SHAPES = [(6, 128), (6, 64, 32), (6, 32, 32), (6, 32, 64), (6, 32, 128), (6, 16, 128),
                (1, 16, 128)]


def test_shapes():
    assert cnn_shapes() == TABLE_SHAPES
    p = init_params(0)
    assert p["fc.w"].shape == (64 + 16 * 128, 2)
    assert forward(p, np.zeros((3, 6, 128))).shape == (3, 2)


def test_gradient_check():
    rng = np.random.default_rng(0)
    p = init_params(1)
    x = rng.standard_normal((3, 6, 128))
    y = np.array([0, 1, 1])
    _, g = loss_and_grads(p, x, y)
    names = sorted(p)
    worst = 0.0
    for k in range(10):
        name = names[k % len(names)]
        flat = np.abs(g[name]).ravel()
        idx = np.unravel_index(rng.choice(np.argsort(flat)[-20:]), g[name].shape)
        eps = 1e-5
        old = p[name][idx]
        p[name][idx] = old + eps
        lp, _ = loss_and_grads(p, x, y)
        p[name][idx] = old - eps
        lm, _ = loss_and_grads(p, x, y)
        p[name][idx] = old
        num = (lp - lm) / (2 * eps)
        rel = abs(num - g[name][idx]) / max(abs(num), abs(g[name][idx]))
        worst = max(worst, rel)
    assert worst < 1e-4


def test_softmax_and_finite_logits():
    p = init_params(2)
    x = np.random.default_rng(3).uniform(-1e3, 1e3, (4, 6, 128))
    logits = forward(p, x)
    assert np.all(np.isfinite(logits))
    assert np.allclose(softmax(logits).sum(axis=1), 1.0, atol=1e-9)


def test_prepare_checks_shape():
    with pytest.raises(MotionDataError):
        prepare([np.zeros((4, 128))])
    with pytest.raises(MotionDataError):
        train_motion_verifier([], [np.zeros((6, 128))])


def test_prepare_unit_rms():
    x = prepare([3.0 * np.random.default_rng(0).standard_normal((6, 128))])
    assert np.sqrt(np.mean(x ** 2)) == pytest.approx(1.0)


def _toy(seed):
    rng = np.random.default_rng(seed)
    t = np.arange(128) / 128
    pos = np.sin(2 * np.pi * 3 * t) * np.ones((6, 1)) + 0.05 * rng.standard_normal((6, 128))
    neg = rng.standard_normal((6, 128))
    return pos, neg


def test_memorise_duplicates():
    pos, neg = _toy(0)
    m = train_motion_verifier([pos] * 8, [neg] * 8, max_iter=200, seed=3)
    assert np.all(m.probabilities([pos]) > 0.5) and np.all(m.probabilities([neg]) < 0.5)


def test_training_deterministic_and_loss_falls():
    rng = np.random.default_rng(1)
    pos = [_toy(s)[0] for s in range(12)]
    neg = [rng.standard_normal((6, 128)) for _ in range(12)]
    a = train_motion_verifier(pos, neg, max_iter=12, seed=5, target_loss=0.0, patience=100)
    b = train_motion_verifier(pos, neg, max_iter=12, seed=5, target_loss=0.0, patience=100)
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)
    h = np.convolve(a.history, np.ones(3) / 3, mode="valid")
    assert np.all(np.diff(h) <= 1e-3) and a.history[-1] < a.history[0]


def test_roundtrip_bit_exact(tmp_path):
    m = MotionVerifierModel(init_params(4), {"lr": 0.001}, [0.5, 0.4])
    m.save(tmp_path / "m.json")
    back = MotionVerifierModel.load(tmp_path / "m.json")
    assert back.arch == ARCH_TAG and back.hyper == m.hyper and back.history == m.history
    assert all(np.array_equal(m.params[k], back.params[k]) for k in m.params)
    d = m.to_dict()
    d["arch"] = "other"
    with pytest.raises(MotionDataError):
        MotionVerifierModel.from_dict(d)


class _Stub:
    def __init__(self, probs):
        self.probs = np.asarray(probs, float)

    def probabilities(self, fragments):
        return self.probs[: len(fragments)]


@pytest.mark.parametrize("probs,ok", [([0.9, 0.8, 0.7, 0.1], True), ([0.9, 0.8, 0.2, 0.1], False),
                                      ([0.9, 0.9, 0.9, 0.9], True), ([0.5, 0.5, 0.5, 0.5], False)])
def test_majority_rule(probs, ok):
    assert verify_motion(_Stub(probs), [None] * 4, 4).passed is ok


def test_no_fragments_fail():
    d = verify_motion(_Stub([]), [], 4)
    assert not d.passed and d.n_valid == 0


def test_order_invariance(motion_model, genuine_signal):
    from liplive.segmentation import segment_characters
    frags = list(segment_characters(genuine_signal, expected_count=4))
    a = verify_motion(motion_model, frags, 4)
    b = verify_motion(motion_model, frags[::-1], 4)
    assert a.passed == b.passed and a.n_valid == b.n_valid
    assert sorted(a.scores) == pytest.approx(sorted(b.scores))
