import numpy as np
import pytest

from hypertrust.optim import AdamState, adam_step


def test_zero_grad_no_decay_is_identity():
    p = {"w": np.array([[1.0, -2.0]])}
    out = adam_step(p, {"w": np.zeros((1, 2))}, AdamState())
    np.testing.assert_array_equal(out["w"], p["w"])


def test_first_step_is_sign_scaled():
    g = np.array([[0.5, -3.0, 1e-3]])
    st = AdamState(lr=0.01)
    out = adam_step({"w": np.zeros((1, 3))}, {"w": g}, st)
    np.testing.assert_allclose(out["w"], -0.01 * g / (np.abs(g) + 1e-8), rtol=1e-12)
    assert st.step == 1


def test_weight_decay_shrinks():
    w = np.array([[2.0, -4.0]])
    st = AdamState(lr=1e-3, weight_decay=1e-5)
    out = adam_step({"w": w}, {"w": np.zeros_like(w)}, st)
    np.testing.assert_allclose(out["w"], w * (1 - 1e-3 * 1e-5), rtol=0, atol=1e-15)


def test_matches_handwritten_recursion():
    rng = np.random.default_rng(0)
    w = rng.normal(size=(2, 3))
    st = AdamState(lr=0.05, weight_decay=0.1)
    m = np.zeros_like(w)
    v = np.zeros_like(w)
    ref = w.copy()
    cur = {"w": w.copy()}
    for t in range(1, 6):
        g = rng.normal(size=w.shape)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref = ref - 0.05 * 0.1 * ref
        ref = ref - 0.05 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
        cur = adam_step(cur, {"w": g}, st)
    np.testing.assert_allclose(cur["w"], ref, rtol=1e-12)


def test_deterministic_bitwise():
    rng = np.random.default_rng(1)
    w, g = rng.normal(size=(4, 4)), rng.normal(size=(4, 4))
    a = adam_step({"w": w}, {"w": g}, AdamState(weight_decay=1e-5))
    b = adam_step({"w": w}, {"w": g}, AdamState(weight_decay=1e-5))
    assert a["w"].tobytes() == b["w"].tobytes()


def test_shape_mismatch():
    with pytest.raises(ValueError):
        adam_step({"w": np.zeros(2)}, {"w": np.zeros(3)}, AdamState())
