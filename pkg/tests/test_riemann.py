import numpy as np
import pytest

from spinwalk import model as M
from spinwalk import riemann as R


def test_chart_round_trip(rng):
    for d in (2, 3, 4):
        for x in M.hat(rng.standard_normal((200, d))):
            c = R.chart_of(x)
            assert abs(x[c.q]) == np.abs(x).max()
            assert c.sign == (1 if x[c.q] >= 0 else -1)
            assert np.abs(R.chart_inverse(c) - x).max() < 1e-14


def test_chart_examples():
    c = R.chart_of(np.array([0.0, 1.0]))
    assert (c.q, c.sign) == (1, 1) and c.z.shape == (1,) and c.z[0] == 0.0
    c = R.chart_of(np.array([1.0, 0.0, 0.0, 0.0]))
    assert c.q == 0 and np.all(c.z == 0.0)
    with pytest.raises(R.ChartError):
        R.chart_embed(0, 1, np.array([0.8, 0.7]))


def test_metric_isotropic_closed_form(rng):
    iso = M.isotropic(3)
    for x in M.hat(rng.standard_normal((50, 3))):
        me = R.metric_eval(iso, x)
        q = R.chart_of(x).q
        idx = [i for i in range(3) if i != q]
        expect = np.eye(2) - np.outer(x[idx], x[idx])
        assert np.abs(me.g_inv - expect).max() < 1e-14


def test_metric_rotation2d_example():
    me = R.metric_eval(M.rotation2d(0.5), np.array([0.0, 1.0]))
    assert me.g_inv.shape == (1, 1)
    assert abs(me.g_inv[0, 0] - 0.25) < 1e-14


def test_metric_product_identity(rng):
    for model in M.builtin_models():
        for x in M.hat(rng.standard_normal((200, model.d))):
            me = R.metric_eval(model, x)
            assert np.abs(me.g @ me.g_inv - np.eye(model.d - 1)).max() < 1e-9
            assert np.abs(me.g - me.g.T).max() < 1e-12
            assert np.linalg.eigvalsh(me.g_inv).min() > 0
            assert me.sqrt_det_g > 0


def test_christoffel_circle_closed_form():
    # S^1 with the round metric in a 1-d chart: g_11 = 1/(1-z^2),
    # Gamma^1_11 = z / (1 - z^2) by direct differentiation
    iso = M.isotropic(2)
    for z in (-0.5, -0.2, 0.1, 0.4):
        x = np.array([z, np.sqrt(1 - z * z)])
        gam = R.christoffel(iso, x, 1e-4)
        assert gam.shape == (1, 1, 1)
        assert abs(gam[0, 0, 0] - z / (1 - z * z)) < 1e-6


def test_christoffel_symmetry_and_richardson(rng):
    model = M.rotation4d(0.5)
    x = M.hat(rng.standard_normal(4))
    gam = R.christoffel(model, x, 1e-4)
    assert np.abs(gam - gam.transpose(0, 2, 1)).max() < 1e-6
    # halving h changes the symbols by O(h^2)
    x = M.hat(np.array([0.3, 0.9, 0.2, 0.1]))
    g1 = R.christoffel(model, x, 4e-3)
    g2 = R.christoffel(model, x, 2e-3)
    g3 = R.christoffel(model, x, 1e-3)
    ratio = np.abs(g1 - g2).max() / np.abs(g2 - g3).max()
    assert 3.0 < ratio < 5.0
    near_boundary = M.hat(np.array([0.05, 0.9, 0.3, 0.2]))
    with pytest.raises(R.ChartError):
        R.christoffel(M.isotropic(4), near_boundary, 1e-4, chart=(0, 1))
    with pytest.raises(ValueError):
        R.christoffel(model, x, 1.0)


def test_laplace_beltrami_constants_and_harmonic():
    iso = M.isotropic(2)
    one = lambda y: np.ones(y.shape[:-1]) if y.ndim > 1 else 1.0
    f = lambda y: y[..., 0]
    for th in (0.4, 2.0, 3.8, 5.7):
        x = np.array([np.cos(th), np.sin(th)])
        assert abs(R.laplace_beltrami(iso, one, x)) < 1e-8
        # first spherical harmonic on the circle: eigenvalue -1
        assert abs(R.laplace_beltrami(iso, f, x) + x[0]) < 1e-6


def test_laplace_beltrami_chart_independence():
    model = M.rotation2d(0.5)
    f = lambda y: y[..., 0] * y[..., 1]
    x = M.hat(np.array([0.8, 0.61]))
    lb0 = R.laplace_beltrami(model, f, x, chart=(0, 1))
    lb1 = R.laplace_beltrami(model, f, x, chart=(1, 1))
    assert abs(lb0 - lb1) < 1e-5


def test_a0_field_properties(rng):
    iso = M.isotropic(4)
    y = M.hat(rng.standard_normal((40, 4)))
    assert np.abs(R.a0_field(iso, y)).max() == 0.0
    model = M.rotation4d(0.5)
    a0 = R.a0_field(model, y)
    # trace identity: trace sigma_sym = V + 2 <A0(y), y> at unit y
    tr = np.einsum("nii->n", M.sigma_sym(model, y))
    assert np.abs(tr - model.V - 2 * np.einsum("ni,ni->n", a0, y)).max() < 1e-5
    # 0-homogeneous field: A0(2y) = A0(y)/2
    assert np.abs(R.a0_field(model, 2.0 * y) - a0 / 2.0).max() < 1e-6
    with pytest.raises(ValueError):
        R.a0_field(model, np.zeros(4))


def test_drift_fields(rng):
    iso = M.isotropic(3)
    x = M.hat(rng.standard_normal((30, 3)))
    s0, s = R.drift_fields(iso, x)
    assert np.abs(s0).max() < 1e-12
    expect = np.eye(3) - x[:, :, None] * x[:, None, :]
    assert np.abs(s - expect).max() < 1e-12
    for model in M.builtin_models():
        pts = M.hat(rng.standard_normal((200, model.d)))
        s0, s = R.drift_fields(model, pts)
        assert np.abs(np.einsum("ni,nij->nj", pts, s)).max() < 1e-8
        assert np.abs(np.einsum("ni,ni->n", pts, s0)).max() < 1e-8


def test_frame_reproduces_inverse_metric(rng):
    for model in M.builtin_models():
        for x in M.hat(rng.standard_normal((50, model.d))):
            me = R.metric_eval(model, x)
            _, s = R.drift_fields(model, x)
            q = R.chart_of(x).q
            idx = [i for i in range(model.d) if i != q]
            frame = s[idx, :]
            assert np.abs(frame @ frame.T - me.g_inv).max() < 1e-6


def test_generator_circle_oracle():
    # isotropic d=2: G = (1/2) d^2/dtheta^2, so G cos(theta) = -cos(theta)/2
    iso = M.isotropic(2)
    f = lambda y: y[..., 0]
    for th in (0.7, 2.2, 4.1):
        x = np.array([np.cos(th), np.sin(th)])
        g = R.generator_apply(iso, f, x[None, :])
        assert abs(np.asarray(g).ravel()[0] + 0.5 * x[0]) < 1e-6
    one = lambda y: np.ones(y.shape[:-1])
    assert abs(np.asarray(R.generator_apply(iso, one, np.array([[1.0, 0.0]]))).ravel()[0]) < 1e-10


def test_generator_decomposition(rng):
    # G = (1/2) Laplace-Beltrami + V0 with V0 first order
    model = M.rotation4d(0.5)
    f = lambda y: y[..., 0] * y[..., 1] + 0.3 * y[..., 2]
    for x in M.hat(rng.standard_normal((5, 4))):
        g = float(np.asarray(R.generator_apply(model, f, x[None, :])).ravel()[0])
        lb = R.laplace_beltrami(model, f, x)
        v0 = R.v0_apply(model, f, x)
        assert abs(g - 0.5 * lb - v0) < 1e-12  # identity by definition
        assert abs(v0) < 1e-4  # built-in rotation fields have vanishing drift part


def test_v0_leibniz_and_linearity(rng):
    model = M.rotation2d(0.5)
    f = lambda y: np.sin(y[..., 0]) + y[..., 1]
    g = lambda y: y[..., 0] * y[..., 1]
    x = M.hat(np.array([0.9, 0.44]))
    v_f = R.v0_apply(model, f, x)
    v_g = R.v0_apply(model, g, x)
    both = R.v0_apply(model, lambda y: f(y) + 2.0 * g(y), x)
    assert abs(both - v_f - 2.0 * v_g) < 1e-6
    f2 = lambda y: f(y) ** 2
    assert abs(R.v0_apply(model, f2, x) - 2.0 * f(x) * v_f) < 1e-3


def test_isotropic_v0_vanishes(rng):
    iso = M.isotropic(2)
    f = lambda y: y[..., 0] ** 2 + 0.5 * y[..., 1]
    for th in (0.5, 2.4):
        x = np.array([np.cos(th), np.sin(th)])
        assert abs(R.v0_apply(iso, f, x)) < 1e-6


def test_geometry_identity_suite_passes(rng):
    for model in M.builtin_models():
        reports = R.geometry_identity_suite(model, n_points=150, rng=rng, n_leibniz=6)
        for rep in reports:
            assert rep.pass_, (model.family, rep.name, rep.statistic)


def test_gradient_diagnostic_builtins():
    # built-in families are gradient-type (V0 == 0); the diagnostic must agree
    assert R.gradient_diagnostic(M.rotation2d(0.5)).pass_
    assert R.gradient_diagnostic(M.rotation4d(0.5), n_points=6).pass_
