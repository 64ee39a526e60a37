"""The spherical diffusion: renormalized Euler integration, stationary-law
estimation, generator-based stationarity diagnostics, and the d=2 stationary
Fokker-Planck solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ModelSpec, apply_sigma_sym, hat, sigma2
from .paths import check_grid
from .riemann import generator_apply
from .stats import TestReport

DEFAULT_H = 1e-3
DEFAULT_BURN_IN = 50.0
DEFAULT_THIN = 0.5


@dataclass
class SphericalPath:
    times: np.ndarray
    values: np.ndarray  # (len(times), d), unit rows

    def __post_init__(self):
        self.times = check_grid(self.times)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[0] != self.times.size:
            raise ValueError("times and values disagree in length")

    def value_at(self, t):
        """Renormalized linear interpolation between knots."""
        cols = np.stack([np.interp(t, self.times, col) for col in self.values.T], axis=-1)
        return hat(cols)


@dataclass
class EmpiricalSphereLaw:
    samples: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        norms = np.linalg.norm(self.samples, axis=-1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("law samples must be unit vectors")

    def draw(self, n: int, rng) -> np.ndarray:
        idx = rng.integers(0, self.samples.shape[0], size=n)
        return self.samples[idx]


def step_sphere_sde(model: ModelSpec, x, h: float, dw) -> np.ndarray:
    """One Euler step of the spherical SDE followed by renormalization.

    Increment (sigma_sym(x) - x x^T) dW - ((V-1)/2) x h; on the sphere the
    radial part of the drift is killed by the projection back to unit norm.
    Broadcasts over leading axes of x and dw; h may be an array of per-path
    steps (time-changed integration).
    """
    h = np.asarray(h, dtype=float)
    if np.any(h <= 0):
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=float)
    dw = np.asarray(dw, dtype=float)
    radial = np.einsum("...i,...i->...", x, dw)[..., None]
    incr = apply_sigma_sym(model, x, dw) - x * radial - 0.5 * (model.V - 1.0) * h[..., None] * x
    return hat(x + incr)


def simulate_sphere_path(model: ModelSpec, x0, grid, rng) -> SphericalPath:
    """Euler path on a (possibly non-uniform) grid; weak order 1."""
    grid = check_grid(grid)
    x = hat(np.asarray(x0, dtype=float))
    out = np.empty((grid.size, model.d))
    out[0] = x
    for i in range(1, grid.size):
        dt = grid[i] - grid[i - 1]
        dw = rng.standard_normal(model.d) * np.sqrt(dt)
        x = step_sphere_sde(model, x, dt, dw)
        out[i] = x
    return SphericalPath(times=np.asarray(grid, dtype=float), values=out)


def _step_chains(model: ModelSpec, x, h, n_steps, rng):
    sq = np.sqrt(h)
    for _ in range(n_steps):
        dw = rng.standard_normal(x.shape) * sq
        x = step_sphere_sde(model, x, h, dw)
    return x


def estimate_stationary(model: ModelSpec, burn_in: float = DEFAULT_BURN_IN,
                        n_samples: int = 10_000, thin: float = DEFAULT_THIN,
                        rng=None, h: float = DEFAULT_H, chains: int = 64,
                        x0=None) -> EmpiricalSphereLaw:
    """Sample the stationary law by thinning parallel chains after burn-in.

    Chains start from antipodal pairs of x0 (default e1), so start dependence
    shows up as disagreement between the two halves of the output; the
    uniform-ergodicity diagnostic compares them.
    """
    if burn_in < 10:
        raise ValueError("burn_in below 10 does not reach stationarity for the built-in families")
    rng = np.random.default_rng(0) if rng is None else rng
    base = np.zeros(model.d)
    base[0] = 1.0
    x0 = base if x0 is None else hat(np.asarray(x0, dtype=float))
    x = np.tile(x0, (chains, 1))
    x[1::2] *= -1.0
    x = _step_chains(model, x, h, int(np.ceil(burn_in / h)), rng)
    thin_steps = max(int(np.ceil(thin / h)), 1)
    rounds = int(np.ceil(n_samples / chains))
    out = np.empty((rounds * chains, model.d))
    for k in range(rounds):
        x = _step_chains(model, x, h, thin_steps, rng)
        out[k * chains : (k + 1) * chains] = x
    return EmpiricalSphereLaw(
        samples=out[:n_samples],
        meta={"burn_in": burn_in, "thin": thin, "h": h, "chains": chains, "model": model.describe()},
    )


def ergodicity_diagnostic(model: ModelSpec, law: EmpiricalSphereLaw, test_fns=None,
                          h: float = 1e-4, max_points: int = 4000, band: float = 4.0) -> TestReport:
    """Weak-form stationarity: under the stationary law the generator
    integrates to zero, so |mean G f| / SE should look like noise for every
    test function. Reports the worst normalized residual."""
    if law.samples.shape[0] == 0:
        raise ValueError("empty law")
    x = law.samples[:max_points]
    if test_fns is None:
        test_fns = monomial_dictionary(model.d, degree=2)
    worst = 0.0
    for f in test_fns:
        vals = np.asarray(generator_apply(model, f, x, h))
        se = vals.std(ddof=1) / np.sqrt(vals.size)
        t = 0.0 if se == 0 else abs(vals.mean()) / se
        worst = max(worst, float(t))
    return TestReport(
        name="generator_stationarity",
        statistic=worst,
        threshold=band,
        pass_=worst < band,
        n=x.shape[0],
        provenance=f"max |mean G f|/SE over {len(test_fns)} test functions, {model.describe()}",
    )


def monomial_dictionary(d: int, degree: int = 3) -> list:
    """Coordinate monomials x_i, x_i x_j, x_i x_j x_k up to the given degree."""
    fns = []
    for i in range(d):
        fns.append(lambda y, i=i: y[..., i])
    if degree >= 2:
        for i in range(d):
            for j in range(i, d):
                fns.append(lambda y, i=i, j=j: y[..., i] * y[..., j])
    if degree >= 3:
        for i in range(d):
            for j in range(i, d):
                for k in range(j, d):
                    fns.append(lambda y, i=i, j=j, k=k: y[..., i] * y[..., j] * y[..., k])
    return fns


# ---------------------------------------------------------------------------
# d = 2: exact angle coefficients and the stationary Fokker-Planck solve


def circle_coefficients(model: ModelSpec, theta):
    """Ito drift b(theta) and squared diffusion s2(theta) of the angle.

    With x = (cos t, sin t): s2 = e_t^T sigma^2(x) e_t (the tangent eigenvalue
    of sigma^2) and b = tr(Sigma H Sigma)/2 with Sigma = sigma_sym - x x^T and
    H the ambient Hessian of the angle; both closed-form in the model.
    """
    if model.d != 2:
        raise ValueError("circle coefficients require d = 2")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    x = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    e_t = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
    s2 = np.einsum("...i,...ij,...j->...", e_t, sigma2(model, x, check=False), e_t)
    from .model import sigma_sym

    sig = sigma_sym(model, x, check=False) - x[..., :, None] * x[..., None, :]
    x1, x2 = x[..., 0], x[..., 1]
    h11 = 2.0 * x1 * x2
    h12 = x2 * x2 - x1 * x1
    hess = np.empty(theta.shape + (2, 2))
    hess[..., 0, 0] = h11
    hess[..., 0, 1] = h12
    hess[..., 1, 0] = h12
    hess[..., 1, 1] = -h11
    b = 0.5 * np.einsum("...ij,...jk,...ki->...", sig, hess, sig)
    return b, s2


@dataclass
class CircleDensity:
    """Periodic probability density on [0, 2 pi), piecewise linear between grid nodes."""

    theta: np.ndarray
    p: np.ndarray

    def __call__(self, t):
        t = np.mod(np.asarray(t, dtype=float), 2.0 * np.pi)
        grid = np.concatenate([self.theta, [2.0 * np.pi]])
        vals = np.concatenate([self.p, [self.p[0]]])
        return np.interp(t, grid, vals)


def stationary_density_circle(model: ModelSpec, n_grid: int = 512) -> CircleDensity:
    """Stationary density of the angle by a periodic second-order
    finite-difference solve of (1/2)(s2 p)'' - (b p)' = 0, normalized to
    integrate to one.

    The one-dimensional nullspace of the discrete operator (periodic
    boundary, constant probability flux) is pinned down by replacing one row
    with the normalization.
    """
    if model.d != 2:
        raise ValueError("the Fokker-Planck solve is for d = 2")
    theta = np.linspace(0.0, 2.0 * np.pi, n_grid, endpoint=False)
    dx = 2.0 * np.pi / n_grid
    b, s2 = circle_coefficients(model, theta)
    mat = np.zeros((n_grid, n_grid))
    idx = np.arange(n_grid)
    up = (idx + 1) % n_grid
    down = (idx - 1) % n_grid
    # row i: 0.5 * (s2 p)'' - (b p)' at node i
    mat[idx, up] += 0.5 * s2[up] / dx**2 - b[up] / (2.0 * dx)
    mat[idx, idx] += -s2[idx] / dx**2
    mat[idx, down] += 0.5 * s2[down] / dx**2 + b[down] / (2.0 * dx)
    mat[0, :] = dx  # normalization row: sum p dx = 1
    rhs = np.zeros(n_grid)
    rhs[0] = 1.0
    try:
        p = np.linalg.solve(mat, rhs)
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular Fokker-Planck system: coefficients are not elliptic") from exc
    if np.any(p <= 0):
        raise ValueError("Fokker-Planck solution is not positive: invalid model")
    p /= p.sum() * dx
    return CircleDensity(theta=theta, p=p)


def gradient_case_density(model: ModelSpec, f0, n_grid: int = 512) -> CircleDensity:
    """Candidate stationary angle density exp(2 F0) * sqrt(g_theta) when V0
    has the potential F0 (caller's hypothesis); the metric length of d/dtheta
    is 1/s(theta). Must match the Fokker-Planck solve when the hypothesis holds."""
    if model.d != 2:
        raise ValueError("implemented on the circle; higher d goes through gradient_density_at")
    theta = np.linspace(0.0, 2.0 * np.pi, n_grid, endpoint=False)
    x = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    _, s2 = circle_coefficients(model, theta)
    w = np.exp(2.0 * np.asarray(f0(x), dtype=float)) / np.sqrt(s2)
    dx = 2.0 * np.pi / n_grid
    w /= w.sum() * dx
    return CircleDensity(theta=theta, p=w)


def gradient_density_at(model: ModelSpec, f0, x) -> float:
    """Unnormalized candidate density exp(2 F0(x)) sqrt(det g) in the
    canonical chart at x (any dimension)."""
    from .riemann import metric_eval

    me = metric_eval(model, x)
    return float(np.exp(2.0 * f0(np.asarray(x, dtype=float))) * me.sqrt_det_g)


def fit_circle_potential(model: ModelSpec, n_grid: int = 256, h: float = 1e-4):
    """Fit F0 on the circle by integrating the V0 one-form; returns
    (thetas, F0 values, holonomy). Zero holonomy certifies the gradient case."""
    from .riemann import v0_vector

    theta = np.linspace(0.0, 2.0 * np.pi, n_grid, endpoint=False)
    deriv = np.empty(n_grid)
    for k, th in enumerate(theta):
        x = np.array([np.cos(th), np.sin(th)])
        e_th = np.array([-np.sin(th), np.cos(th)])
        _, s2 = circle_coefficients(model, th)
        deriv[k] = float(v0_vector(model, x, h) @ e_th) / float(s2[0])
    dx = 2.0 * np.pi / n_grid
    holonomy = float(deriv.sum() * dx)
    f0_vals = np.concatenate([[0.0], np.cumsum(deriv[:-1]) * dx])
    return theta, f0_vals, holonomy
