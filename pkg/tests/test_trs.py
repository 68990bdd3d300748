import numpy as np
import pytest

from sketchdfo.interp_model import build_model
from sketchdfo.trs import EPS_H, solve_trs


def quad(g, H, s):
    return g @ s + 0.5 * s @ H @ s


def cauchy_point(g, H, delta):
    gHg = g @ H @ g
    gn = np.linalg.norm(g)
    tau = delta / gn if gHg <= 0 else min(delta / gn, gn**2 / gHg)
    return -tau * g


def random_instance(rng):
    d = int(rng.integers(1, 21))
    rank = int(rng.integers(0, d + 1))
    B = rng.standard_normal((rank, d)) * 10 ** rng.uniform(-3, 3)
    g = rng.standard_normal(d) * 10 ** rng.uniform(-4, 4)
    return g, B.T @ B, 10 ** rng.uniform(-3, 2)


@pytest.mark.parametrize(
    "g, H, delta, step, decrease",
    [
        ([1.0, 0.0], np.eye(2), 2.0, [-1.0, 0.0], 0.5),
        ([1.0, 0.0], np.eye(2), 0.5, [-0.5, 0.0], 0.375),
        ([3.0, 4.0], np.zeros((2, 2)), 1.0, [-0.6, -0.8], 5.0),
    ],
)
def test_examples(g, H, delta, step, decrease):
    s, pred = solve_trs((np.array(g), H), delta)
    assert np.allclose(s, step, rtol=0, atol=1e-15)
    assert pred == pytest.approx(decrease, rel=1e-14)


def test_accepts_model_object():
    model = build_model(np.eye(2), np.array([1.0, 0.0]))
    s, pred = solve_trs(model, 2.0)
    assert np.allclose(s, [-1.0, 0.0]) and pred == pytest.approx(0.5)


def test_zero_gradient():
    s, pred = solve_trs((np.zeros(3), np.eye(3)), 1.0)
    assert not s.any() and pred == 0.0


def test_bad_radius():
    with pytest.raises(ValueError):
        solve_trs((np.ones(2), np.eye(2)), 0.0)


def test_random_psd_feasibility_and_cauchy():
    rng = np.random.default_rng(20240601)
    for _ in range(1000):
        g, H, delta = random_instance(rng)
        s, pred = solve_trs((g, H), delta)
        assert np.linalg.norm(s) <= delta * (1 + 1e-12)
        assert pred >= 0
        scale = np.linalg.norm(g) * np.linalg.norm(s) + np.abs(H).sum() * (s @ s)
        assert abs(pred + quad(g, H, s)) <= 1e-12 * scale
        gn = np.linalg.norm(g)
        bound = 0.5 * gn * min(delta, gn / (np.linalg.norm(H, 2) + EPS_H))
        assert pred >= bound * (1 - 1e-10)
        sc = cauchy_point(g, H, delta)
        assert quad(g, H, s) <= quad(g, H, sc) + 1e-12 * scale


def test_interior_newton_point():
    rng = np.random.default_rng(5)
    for _ in range(200):
        d = int(rng.integers(1, 21))
        B = rng.standard_normal((d + 3, d))
        H = B.T @ B
        g = rng.standard_normal(d)
        newton = -np.linalg.solve(H, g)
        delta = 2 * np.linalg.norm(newton)
        s, _ = solve_trs((g, H), delta, tol=1e-12 * np.linalg.norm(g), maxiter=10 * d)
        assert np.linalg.norm(s - newton) <= 1e-8 * np.linalg.norm(newton)


def test_small_curvature_late_in_cg():
    # well-conditioned H but a large gradient scale: late CG directions are
    # tiny and must not be mistaken for zero curvature
    rng = np.random.default_rng(0)
    A = rng.standard_normal((200, 20))
    H, g = A.T @ A, -A.T @ rng.standard_normal(200) * 1e3
    newton = -np.linalg.solve(H, g)
    s, _ = solve_trs((g, H), 10 * np.linalg.norm(newton), tol=0.0)
    assert np.linalg.norm(s - newton) <= 1e-10 * np.linalg.norm(newton)
