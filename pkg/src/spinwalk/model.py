"""Covariance fields sigma^2 on the unit sphere, their square roots, and
structural validators.

A model is a parametric family of SPD matrix fields u -> sigma2(u) on S^{d-1}
with constant radial eigenvalue U (sigma2(u) u = U u) and constant trace V.
Built-in families:

  isotropic   sigma2 = U * I, so V = d * U
  rotation2d  sigma2(u) = U * R(u) A^2 R(u)^T with A = diag(1, b), R(u) the
              complex-multiplication matrix of u in R^2; V = U * (1 + b^2)
  rotation4d  sigma2(u) = U * R(u) A^2 R(u)^T with A = diag(1, a2, a3, a4),
              R(u) the left quaternion-multiplication matrix of u in R^4

All point-wise operations broadcast over leading axes: `u` may be shaped
(..., d) and matrix outputs are (..., d, d).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

UNIT_TOL = 1e-9

FAMILIES = ("isotropic", "rotation2d", "rotation4d")


class ModelError(ValueError):
    """Invalid model parameters or inputs outside an operation's domain."""


def hat(x, axis=-1):
    """Radial projection x/||x|| with the convention 0 -> e1."""
    x = np.asarray(x, dtype=float)
    n = np.linalg.norm(x, axis=axis, keepdims=True)
    safe = np.where(n == 0.0, 1.0, n)
    u = x / safe
    e1 = np.zeros(x.shape[-1])
    e1[0] = 1.0
    return np.where(n == 0.0, e1, u)


def complex_mul_matrix(u):
    """2x2 rotation-scaling matrix of multiplication by u in C ~ R^2."""
    u = np.asarray(u, dtype=float)
    u1, u2 = u[..., 0], u[..., 1]
    row0 = np.stack([u1, -u2], axis=-1)
    row1 = np.stack([u2, u1], axis=-1)
    return np.stack([row0, row1], axis=-2)


def quat_mul_matrix(u):
    """4x4 matrix of left quaternion multiplication v -> u * v."""
    u = np.asarray(u, dtype=float)
    a, b, c, d = u[..., 0], u[..., 1], u[..., 2], u[..., 3]
    rows = [
        np.stack([a, -b, -c, -d], axis=-1),
        np.stack([b, a, -d, c], axis=-1),
        np.stack([c, d, a, -b], axis=-1),
        np.stack([d, -c, b, a], axis=-1),
    ]
    return np.stack(rows, axis=-2)


def quat_mul(u, v):
    """Quaternion product u * v, vectorized over leading axes."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    a, b, c, d = u[..., 0], u[..., 1], u[..., 2], u[..., 3]
    e, f, g, h = v[..., 0], v[..., 1], v[..., 2], v[..., 3]
    return np.stack(
        [
            a * e - b * f - c * g - d * h,
            a * f + b * e + c * h - d * g,
            a * g - b * h + c * e + d * f,
            a * h + b * g - c * f + d * e,
        ],
        axis=-1,
    )


def complex_mul(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return np.stack(
        [
            u[..., 0] * v[..., 0] - u[..., 1] * v[..., 1],
            u[..., 0] * v[..., 1] + u[..., 1] * v[..., 0],
        ],
        axis=-1,
    )


def rotation_matrix(d: int, u):
    """R(u) in SO(d) with R(u) e1 = u, for d in {2, 4}.

    d=2 uses complex multiplication, d=4 left quaternion multiplication.
    """
    if d == 2:
        return complex_mul_matrix(u)
    if d == 4:
        return quat_mul_matrix(u)
    raise ModelError(f"rotation_matrix requires d in {{2, 4}}, got {d}")


def _check_unit(u, d, tol=UNIT_TOL):
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != d:
        raise ModelError(f"expected vectors in R^{d}, got shape {u.shape}")
    err = np.abs(np.linalg.norm(u, axis=-1) - 1.0)
    if np.any(err > tol):
        raise ModelError(f"input not on the unit sphere (max |norm-1| = {err.max():.3e})")
    return u


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of one covariance field on S^{d-1}.

    `diag` holds the diagonal of A for rotation families (diag[0] must be 1 so
    that A e1 = e1). U scales the whole field; built-ins default to U = 1.
    """

    d: int
    family: str
    U: float = 1.0
    diag: tuple = field(default=())

    def __post_init__(self):
        if self.d < 2:
            raise ModelError(f"dimension must be >= 2, got {self.d}")
        if self.family not in FAMILIES:
            raise ModelError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.U <= 0:
            raise ModelError(f"U must be positive, got {self.U}")
        if self.family == "isotropic":
            if self.diag:
                raise ModelError("isotropic family takes no diagonal parameters")
        else:
            if self.d not in (2, 4):
                raise ModelError(f"{self.family} requires d in {{2, 4}}, got {self.d}")
            if len(self.diag) != self.d:
                raise ModelError(f"{self.family} needs {self.d} diagonal entries, got {len(self.diag)}")
            if self.diag[0] != 1.0:
                raise ModelError("rotation families require A e1 = e1 (diag[0] = 1)")
            if any(a <= 0 for a in self.diag):
                raise ModelError("diagonal entries must be positive")
        if not self.U < self.V:
            raise ModelError(f"need U < V (got U={self.U}, V={self.V}); the angular motion degenerates otherwise")

    @property
    def V(self) -> float:
        """Constant trace of sigma2 over the sphere."""
        if self.family == "isotropic":
            return self.U * self.d
        return self.U * float(sum(a * a for a in self.diag))

    @property
    def delta(self) -> float:
        """Dimension V/U of the squared-radius diffusion."""
        return self.V / self.U

    @property
    def A(self) -> np.ndarray:
        if self.family == "isotropic":
            return np.eye(self.d)
        return np.diag(np.asarray(self.diag, dtype=float))

    def describe(self) -> str:
        extra = "" if self.family == "isotropic" else f", diag={tuple(self.diag)}"
        return f"{self.family}(d={self.d}, U={self.U}, V={self.V}{extra})"


def isotropic(d: int, U: float = 1.0) -> ModelSpec:
    return ModelSpec(d=d, family="isotropic", U=U)


def rotation2d(b: float, U: float = 1.0) -> ModelSpec:
    return ModelSpec(d=2, family="rotation2d", U=U, diag=(1.0, float(b)))


def rotation4d(a: float, U: float = 1.0) -> ModelSpec:
    return ModelSpec(d=4, family="rotation4d", U=U, diag=(1.0, float(a), float(a), float(a)))


def builtin_models() -> list:
    """Canonical instances exercised by the validation suites."""
    return [isotropic(2), rotation2d(0.5), rotation4d(0.5)]


def sigma2(model: ModelSpec, u, check: bool = True):
    """Covariance matrix sigma^2(u), shaped (..., d, d)."""
    u = np.asarray(u, dtype=float)
    if check:
        u = _check_unit(u, model.d)
    if model.family == "isotropic":
        eye = np.eye(model.d)
        return np.broadcast_to(eye * model.U, u.shape + (model.d,)).copy()
    R = rotation_matrix(model.d, u)
    a2 = np.asarray(model.diag, dtype=float) ** 2
    return model.U * np.einsum("...ik,k,...jk->...ij", R, a2, R)


def sigma_rot(model: ModelSpec, u, check: bool = True):
    """Rotation square root R(u) A, satisfying (R A)(R A)^T = sigma^2(u)."""
    if model.family == "isotropic":
        raise ModelError("the rotation square root exists only for rotation families")
    u = np.asarray(u, dtype=float)
    if check:
        u = _check_unit(u, model.d)
    R = rotation_matrix(model.d, u)
    a = np.asarray(model.diag, dtype=float)
    return np.sqrt(model.U) * R * a  # right-multiply by diag(a)


def spd_sqrt(mat):
    """Unique SPD square root of an SPD matrix, by eigendecomposition."""
    mat = np.asarray(mat, dtype=float)
    w, q = np.linalg.eigh(mat)
    if np.any(w <= 0):
        raise ModelError(f"matrix is not positive definite (min eigenvalue {w.min():.3e})")
    return np.einsum("...ik,...k,...jk->...ij", q, np.sqrt(w), q)


def sigma_sym(model: ModelSpec, u, check: bool = True):
    """Unique symmetric positive-definite square root of sigma^2(u).

    Rotation families admit the closed form R(u) A R(u)^T (the eigenvectors of
    sigma^2(u) are the columns of R(u)); arbitrary SPD input goes through
    `spd_sqrt`. Both agree by uniqueness of the SPD root.
    """
    u = np.asarray(u, dtype=float)
    if check:
        u = _check_unit(u, model.d)
    if model.family == "isotropic":
        eye = np.eye(model.d)
        return np.broadcast_to(eye * np.sqrt(model.U), u.shape + (model.d,)).copy()
    R = rotation_matrix(model.d, u)
    a = np.asarray(model.diag, dtype=float)
    return np.sqrt(model.U) * np.einsum("...ik,k,...jk->...ij", R, a, R)


def apply_sigma_rot(model: ModelSpec, u, xi):
    """sigma_rot(u) @ xi without forming matrices (hot path for walks)."""
    a = np.asarray(model.diag, dtype=float)
    w = np.asarray(xi, dtype=float) * a
    prod = complex_mul(u, w) if model.d == 2 else quat_mul(u, w)
    return np.sqrt(model.U) * prod


def _conj(u):
    out = -np.asarray(u, dtype=float)
    out[..., 0] = -out[..., 0]
    return out


def apply_sigma_sym(model: ModelSpec, u, xi):
    """sigma_sym(u) @ xi without forming matrices."""
    xi = np.asarray(xi, dtype=float)
    if model.family == "isotropic":
        return np.sqrt(model.U) * xi
    a = np.asarray(model.diag, dtype=float)
    mul = complex_mul if model.d == 2 else quat_mul
    return np.sqrt(model.U) * mul(u, a * mul(_conj(u), xi))


def ellipticity_floor(model: ModelSpec, n_samples: int = 256, rng=None) -> float:
    """Certified lower bound lambda on the eigenvalues of sigma_sym over a
    sphere sample: lambda = (eps / V^(d-1))^(1/2) with eps a sampled lower
    bound on det sigma^2."""
    rng = np.random.default_rng(0) if rng is None else rng
    u = hat(rng.standard_normal((n_samples, model.d)))
    det = np.linalg.det(sigma2(model, u))
    eps = float(det.min())
    if eps <= 0:
        raise ModelError("sigma^2 is numerically singular on the sphere sample")
    return float(np.sqrt(eps / model.V ** (model.d - 1)))


def random_sphere_points(d: int, n: int, rng) -> np.ndarray:
    """Quasi-uniform sphere points: normalized standard Gaussian draws."""
    return hat(rng.standard_normal((n, d)))


def validate_assumptions(model: ModelSpec, n_samples: int = 1000, tol: float = 1e-10, rng=None):
    """Check the structural assumptions on sigma^2 over a sphere sample.

    Returns a list of TestReport covering: radial eigenvalue U and trace V
    (constant-variance assumption), u an eigenvector of sigma^2(u), and
    positive-definiteness. Failures appear in the reports, not as exceptions.
    """
    from .stats import TestReport

    if n_samples < 1:
        raise ModelError("n_samples must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    u = random_sphere_points(model.d, n_samples, rng)
    s2 = sigma2(model, u)
    s2u = np.einsum("...ij,...j->...i", s2, u)

    radial = np.einsum("...i,...i->...", u, s2u)
    dev_u = float(np.abs(radial - model.U).max())
    trace = np.einsum("...ii->...", s2)
    dev_v = float(np.abs(trace - model.V).max())
    # off-radial component of sigma^2(u) u measures failure of the eigenvector condition
    tangential = s2u - radial[..., None] * u
    dev_evec = float(np.linalg.norm(tangential, axis=-1).max())
    min_eig = float(np.linalg.eigvalsh(s2).min())

    prov = f"structural identities of {model.describe()} on {n_samples} sampled directions"
    return [
        TestReport("radial_eigenvalue_constant", dev_u, tol, pass_=dev_u <= tol, n=n_samples, provenance=prov),
        TestReport("trace_constant", dev_v, tol, pass_=dev_v <= tol, n=n_samples, provenance=prov),
        TestReport("direction_is_eigenvector", dev_evec, tol, pass_=dev_evec <= tol, n=n_samples, provenance=prov),
        TestReport("sigma2_positive_definite", min_eig, 0.0, pass_=min_eig > 0.0, n=n_samples,
                   provenance=prov + " (statistic = min eigenvalue, must be > threshold)"),
    ]
