"""Numerical Riemannian geometry of the sphere with metric g = sigma^-2:
charts, metric and inverse, Christoffel symbols, Laplace-Beltrami operator,
the drift fields of the spherical diffusion, its generator, and the
first-order part V0.

Derivatives are central finite differences with an exposed step h (default
1e-4). Chart-coordinate functions accept z batched as (..., d-1) for one
fixed chart; the public point-wise operations pick the canonical chart
(largest-|coordinate| axis) and group batched inputs by chart.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelSpec, hat, sigma2, sigma_sym
from .stats import TestReport

DEFAULT_STEP = 1e-4
CHART_BOUNDARY = 0.1


class ChartError(ValueError):
    pass


@dataclass
class ChartPoint:
    """Canonical chart data of a sphere point: drop coordinate q (0-based),
    remember its sign, keep the remaining coordinates z inside the unit ball."""

    q: int
    sign: int
    z: np.ndarray
    x: np.ndarray


def chart_of(x) -> ChartPoint:
    x = np.asarray(x, dtype=float)
    q = int(np.argmax(np.abs(x)))
    sign = 1 if x[q] >= 0 else -1
    z = np.delete(x, q)
    return ChartPoint(q=q, sign=sign, z=z, x=x)


def chart_embed(q: int, sign: int, z) -> np.ndarray:
    """Inverse chart map: restore x_q = sign * sqrt(1 - |z|^2)."""
    z = np.asarray(z, dtype=float)
    nrm2 = np.sum(z * z, axis=-1)
    if np.any(nrm2 >= 1.0):
        raise ChartError("chart coordinates must lie in the open unit ball")
    xq = sign * np.sqrt(1.0 - nrm2)
    return np.insert(z, q, xq, axis=-1)


def chart_inverse(c: ChartPoint) -> np.ndarray:
    return chart_embed(c.q, c.sign, c.z)


@dataclass
class MetricEval:
    g: np.ndarray
    g_inv: np.ndarray
    sqrt_det_g: float


def _metric_in_chart(model: ModelSpec, q: int, sign: int, z):
    """(g_ij, g^ij, sqrt det g) at chart points z, batched over leading axes.

    g^ij = sigma2_ij - x_i x_j on the off-q indices; g_ij by the closed form
    in terms of sigma^-2 and 1/x_q (differentiating this closed form keeps the
    Christoffel symbols free of compounded inversion error).
    """
    z = np.asarray(z, dtype=float)
    x = chart_embed(q, sign, z)
    idx = [i for i in range(model.d) if i != q]
    s2 = sigma2(model, x, check=False)
    s2inv = np.linalg.inv(s2)
    xi = x[..., idx]
    xq = x[..., q]
    g_inv = s2[..., idx, :][..., :, idx] - xi[..., :, None] * xi[..., None, :]
    si = s2inv[..., idx, :][..., :, idx]
    sq = s2inv[..., q, :][..., idx]
    sqq = s2inv[..., q, q]
    g = (
        si
        + (sqq / xq**2)[..., None, None] * xi[..., :, None] * xi[..., None, :]
        - (sq[..., :, None] * xi[..., None, :] + sq[..., None, :] * xi[..., :, None]) / xq[..., None, None]
    )
    sqrt_det = np.sqrt(np.linalg.det(g))
    return g, g_inv, sqrt_det


def metric_eval(model: ModelSpec, x) -> MetricEval:
    """Metric data at one sphere point in its canonical chart."""
    c = chart_of(x)
    g, g_inv, sdet = _metric_in_chart(model, c.q, c.sign, c.z)
    return MetricEval(g=g, g_inv=g_inv, sqrt_det_g=float(sdet))


def _chart_guard(x, q):
    if abs(np.asarray(x, dtype=float)[q]) < CHART_BOUNDARY:
        raise ChartError(
            f"|x_q| = {abs(x[q]):.3f} < {CHART_BOUNDARY}: too close to the chart boundary, "
            "evaluate in a different chart"
        )


def christoffel(model: ModelSpec, x, h: float = DEFAULT_STEP, chart=None) -> np.ndarray:
    """Christoffel symbols Gamma^k_ij of g in the (canonical) chart at x.

    Derivatives of the closed-form g_ij by central differences in the chart
    coordinates; the result is symmetric in (i, j).
    """
    if not 1e-7 < h < 1e-2:
        raise ValueError("finite-difference step must lie in (1e-7, 1e-2)")
    x = np.asarray(x, dtype=float)
    if chart is None:
        c = chart_of(x)
        q, sign, z = c.q, c.sign, c.z
    else:
        q, sign = chart
        z = np.delete(x, q)
    _chart_guard(x, q)
    m = model.d - 1
    _, g_inv, _ = _metric_in_chart(model, q, sign, z)
    # dg[l, i, j] = E_l(g_ij)
    shifts = np.concatenate([z + h * np.eye(m), z - h * np.eye(m)], axis=0)
    g_shift = _metric_in_chart(model, q, sign, shifts)[0]
    dg = (g_shift[:m] - g_shift[m:]) / (2.0 * h)  # dg[l, i, j] = E_l(g_ij)
    # bracket[i, j, l] = E_i(g_jl) + E_j(g_il) - E_l(g_ij)
    bracket = dg + dg.transpose(1, 0, 2) - np.moveaxis(dg, 0, 2)
    return 0.5 * np.einsum("kl,ijl->kij", g_inv, bracket)


def _second_differences(fn, z, h):
    """Hessian and gradient of fn on chart coordinates by central differences."""
    z = np.asarray(z, dtype=float)
    m = z.size
    eye = np.eye(m)
    f0 = fn(z)
    grad = np.empty(m)
    hess = np.empty((m, m))
    fp = np.empty(m)
    fm = np.empty(m)
    for i in range(m):
        fp[i] = fn(z + h * eye[i])
        fm[i] = fn(z - h * eye[i])
        grad[i] = (fp[i] - fm[i]) / (2.0 * h)
        hess[i, i] = (fp[i] - 2.0 * f0 + fm[i]) / (h * h)
    for i in range(m):
        for j in range(i + 1, m):
            fpp = fn(z + h * (eye[i] + eye[j]))
            fpm = fn(z + h * (eye[i] - eye[j]))
            fmp = fn(z - h * (eye[i] - eye[j]))
            fmm = fn(z - h * (eye[i] + eye[j]))
            hess[i, j] = hess[j, i] = (fpp - fpm - fmp + fmm) / (4.0 * h * h)
    return grad, hess


def laplace_beltrami(model: ModelSpec, f, x, h: float = DEFAULT_STEP, chart=None) -> float:
    """Laplace-Beltrami of a scalar sphere field at x via the chart formula
    sum_ij g^ij (E_i E_j f - sum_k Gamma^k_ij E_k f)."""
    x = np.asarray(x, dtype=float)
    if chart is None:
        c = chart_of(x)
        q, sign, z = c.q, c.sign, c.z
    else:
        q, sign = chart
        z = np.delete(x, q)
    _chart_guard(x, q)
    _, g_inv, _ = _metric_in_chart(model, q, sign, z)
    gamma = christoffel(model, x, h, chart=(q, sign))

    def fn(zz):
        return float(f(chart_embed(q, sign, zz)))

    grad, hess = _second_differences(fn, z, h)
    return float(np.einsum("ij,ij->", g_inv, hess - np.einsum("kij,k->ij", gamma, grad)))


def a0_field(model: ModelSpec, y, h: float = DEFAULT_STEP) -> np.ndarray:
    """Drift-generating field A0(y) = (1/2) sum_j D A_j(y) A_j(y), with
    A_j(y) the j-th column of the symmetric root extended 0-homogeneously.

    Jacobians are ambient central differences; broadcasts over leading axes.
    """
    y = np.asarray(y, dtype=float)
    d = model.d
    if np.any(np.linalg.norm(y, axis=-1) == 0):
        raise ValueError("A0 is undefined at the origin")
    A = sigma_sym(model, hat(y), check=False)
    # partial[..., k, i, j] = d A_ij / d y_k
    eye = np.eye(d)
    plus = sigma_sym(model, hat(y[..., None, :] + h * eye), check=False)
    minus = sigma_sym(model, hat(y[..., None, :] - h * eye), check=False)
    partial = (plus - minus) / (2.0 * h)
    return 0.5 * np.einsum("...kij,...kj->...i", partial, A)


def drift_fields(model: ModelSpec, x, h: float = DEFAULT_STEP):
    """S_0(x) = -(I - x x^T) A0(x) and S_j(x) = (sigma_sym(x) - x x^T) e_j.

    Returns (S0, S) with S0 shaped (..., d) and S[..., :, j] the j-th field;
    all outputs are tangent to the sphere.
    """
    x = np.asarray(x, dtype=float)
    a0 = a0_field(model, x, h)
    s0 = -(a0 - np.einsum("...i,...i->...", x, a0)[..., None] * x)
    s = sigma_sym(model, x, check=False) - x[..., :, None] * x[..., None, :]
    return s0, s


def _directional(f, x, v, h):
    """Central difference of the 0-homogeneous extension of f along v."""
    return (f(hat(x + h * v)) - f(hat(x - h * v))) / (2.0 * h)


def generator_apply(model: ModelSpec, f, x, h: float = DEFAULT_STEP):
    """Generator of the spherical diffusion applied to f at x (batched):
    G f = S_0(f) + (1/2) sum_j S_j(S_j(f)).

    The iterated derivative differentiates the scalar field y -> df(y) S_j(y)
    along S_j (the field varies between evaluation points), not the
    fixed-direction second derivative.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    s0, s = drift_fields(model, x, h)
    total = _directional(f, x, s0, h)

    def field_derivative(y, j):
        sy = sigma_sym(model, y, check=False)[..., :, j] - y * y[..., j, None]
        return _directional(f, y, sy, h)

    for j in range(model.d):
        sj = s[..., :, j]
        up = field_derivative(hat(x + h * sj), j)
        down = field_derivative(hat(x - h * sj), j)
        total = total + 0.5 * (up - down) / (2.0 * h)
    return total if total.size > 1 else float(total[0])


def v0_apply(model: ModelSpec, f, x, h: float = DEFAULT_STEP) -> float:
    """First-order part V0 f = G f - (1/2) Laplace-Beltrami f at one point."""
    x = np.asarray(x, dtype=float)
    g = generator_apply(model, f, x[None, :], h)
    lb = laplace_beltrami(model, f, x, h)
    return float(np.asarray(g).ravel()[0] - 0.5 * lb)


def v0_vector(model: ModelSpec, x, h: float = DEFAULT_STEP) -> np.ndarray:
    """Ambient representation of V0 at x: components V0 applied to the
    coordinate functions. Tangent to the sphere up to finite-difference error."""
    x = np.asarray(x, dtype=float)
    out = np.empty(model.d)
    for i in range(model.d):
        out[i] = v0_apply(model, lambda y, i=i: y[..., i], x, h)
    return out


# ---------------------------------------------------------------------------
# identity suites


def geometry_identity_suite(model: ModelSpec, n_points: int = 1000, h: float = DEFAULT_STEP,
                            rng=None, n_leibniz: int = 20) -> list:
    """Numerical identities tying the metric, the drift fields and V0 together.

    Checks, over quasi-uniform sphere samples: g g^-1 = I; tangency of all
    S_j; sum_j S_j^i S_j^k = g^ik in charts; trace sigma_sym = V + 2 <A0, x>;
    and the Leibniz rule for V0 (first-order operator certificate).
    """
    rng = np.random.default_rng(1) if rng is None else rng
    pts = hat(rng.standard_normal((n_points, model.d)))
    prov = f"geometry identity suite for {model.describe()}, h={h}"

    dev_metric = 0.0
    dev_frame = 0.0
    for x in pts:
        me = metric_eval(model, x)
        dev_metric = max(dev_metric, float(np.abs(me.g @ me.g_inv - np.eye(model.d - 1)).max()))
        _, s = drift_fields(model, x, h)
        idx = [i for i in range(model.d) if i != chart_of(x).q]
        frame = s[idx, :]  # rows: chart components of the fields
        dev_frame = max(dev_frame, float(np.abs(frame @ frame.T - me.g_inv).max()))

    s0, s = drift_fields(model, pts, h)
    tang = np.abs(np.einsum("ni,nij->nj", pts, s)).max()
    tang = max(float(tang), float(np.abs(np.einsum("ni,ni->n", pts, s0)).max()))

    a0 = a0_field(model, pts, h)
    trace_dev = float(
        np.abs(
            np.einsum("nii->n", sigma_sym(model, pts, check=False))
            - model.V
            - 2.0 * np.einsum("ni,ni->n", a0, pts)
        ).max()
    )

    sub = pts[: min(n_leibniz, n_points)]
    f = lambda y: np.sin(y[..., 0]) + y[..., -1] * y[..., 0]
    f2 = lambda y: f(y) ** 2
    dev_leib = 0.0
    for x in sub:
        v0_f = v0_apply(model, f, x, h)
        v0_f2 = v0_apply(model, f2, x, h)
        dev_leib = max(dev_leib, abs(v0_f2 - 2.0 * f(x) * v0_f))

    return [
        TestReport("metric_product_identity", dev_metric, 1e-9, pass_=dev_metric < 1e-9,
                   n=n_points, provenance=prov),
        TestReport("drift_field_tangency", tang, 1e-8, pass_=tang < 1e-8, n=n_points, provenance=prov),
        TestReport("frame_reproduces_inverse_metric", dev_frame, 1e-6, pass_=dev_frame < 1e-6,
                   n=n_points, provenance=prov),
        TestReport("trace_drift_identity", trace_dev, 1e-5, pass_=trace_dev < 1e-5,
                   n=n_points, provenance=prov),
        TestReport("v0_leibniz_rule", dev_leib, 1e-3, pass_=dev_leib < 1e-3,
                   n=len(sub), provenance=prov),
    ]


def gradient_diagnostic(model: ModelSpec, n_points: int = 24, h: float = DEFAULT_STEP,
                        rng=None, tol: float = 5e-3) -> TestReport:
    """Empirical test whether V0 is a gradient field for this model.

    d=2: closed-loop integral (holonomy) of the V0 one-form around the
    circle. d>=3: sampled antisymmetry residual of the exterior derivative of
    omega = g(V0, .) in charts. Reported, never assumed.
    """
    if model.d == 2:
        theta = np.linspace(0.0, 2.0 * np.pi, 256, endpoint=False)
        integrand = np.empty(theta.size)
        for k, th in enumerate(theta):
            x = np.array([np.cos(th), np.sin(th)])
            e_th = np.array([-np.sin(th), np.cos(th)])
            v0 = v0_vector(model, x, h)
            s_sq = float(e_th @ sigma2(model, x) @ e_th)
            integrand[k] = (v0 @ e_th) / s_sq  # dF0/dtheta when a potential exists
        holonomy = abs(float(np.mean(integrand) * 2.0 * np.pi))
        return TestReport("v0_gradient_holonomy", holonomy, tol, pass_=holonomy < tol,
                          n=theta.size, provenance=f"loop integral of the V0 one-form, {model.describe()}")
    rng = np.random.default_rng(3) if rng is None else rng
    pts = hat(rng.standard_normal((n_points, model.d)))
    worst = 0.0
    fd = 10 * h

    def omega(q, sign, z):
        x = chart_embed(q, sign, z)
        g, _, _ = _metric_in_chart(model, q, sign, z)
        v0 = v0_vector(model, x, h)
        idx = [i for i in range(model.d) if i != q]
        return g @ v0[idx]

    for x in pts:
        c = chart_of(x)
        m = model.d - 1
        eye = np.eye(m)
        # d omega (E_i, E_j) = E_i omega_j - E_j omega_i
        grad_omega = np.empty((m, m))
        for i in range(m):
            op = omega(c.q, c.sign, c.z + fd * eye[i])
            om = omega(c.q, c.sign, c.z - fd * eye[i])
            grad_omega[i] = (op - om) / (2.0 * fd)
        worst = max(worst, float(np.abs(grad_omega - grad_omega.T).max()))
    return TestReport("v0_gradient_antisymmetry", worst, tol, pass_=worst < tol,
                      n=n_points, provenance=f"sampled exterior-derivative residual, {model.describe()}")
