"""Zero-drift walks with direction-dependent increment covariance, and the
scaled functionals whose limits the closed-form laws describe.

Heavy Monte Carlo runs are replica-parallel: each replica owns an RNG stream
(callable k -> Generator), so results are bit-identical regardless of block
size or thread count. Stepping is vectorized across replica blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ModelSpec, apply_sigma_rot, apply_sigma_sym, hat
from .paths import VectorPath

NOISES = ("gaussian", "rademacher")
ROOTS = ("symmetric", "rotation")
BLOCK = 4096
STEP_CHUNK = 512


@dataclass
class WalkConfig:
    model: ModelSpec
    noise: str = "gaussian"
    x0: np.ndarray | None = None
    square_root: str = "symmetric"
    perturbation: object = None  # callable r -> epsilon(r), adds epsilon * I to the covariance

    def __post_init__(self):
        if self.noise not in NOISES:
            raise ValueError(f"noise must be one of {NOISES}")
        if self.square_root not in ROOTS:
            raise ValueError(f"square_root must be one of {ROOTS}")
        if self.square_root == "rotation" and self.model.family == "isotropic":
            raise ValueError("the rotation square root requires a rotation family")
        self.x0 = np.zeros(self.model.d) if self.x0 is None else np.asarray(self.x0, dtype=float)
        if self.x0.shape != (self.model.d,):
            raise ValueError(f"x0 must be a point in R^{self.model.d}")


@dataclass
class WalkPath:
    positions: np.ndarray  # (n_steps + 1, d)

    def __len__(self):
        return self.positions.shape[0]


@dataclass
class EmpiricalLaw:
    """Sample collection with metadata for the statistical tests."""

    samples: np.ndarray
    meta: dict = field(default_factory=dict)


def _noise(gen, kind: str, shape):
    if kind == "gaussian":
        return gen.standard_normal(shape)
    return 2.0 * gen.integers(0, 2, size=shape).astype(float) - 1.0


def _increments(config: WalkConfig, x, xi, xi_extra=None):
    """sigma(x-hat) xi for a batch of positions and noises; the perturbation
    hook adds an independent isotropic covariance defect epsilon(||x||) I."""
    u = hat(x)
    if config.square_root == "rotation":
        incr = apply_sigma_rot(config.model, u, xi)
    else:
        incr = apply_sigma_sym(config.model, u, xi)
    if config.perturbation is not None:
        if xi_extra is None:
            raise ValueError("perturbed walks need the extra noise draw")
        r = np.linalg.norm(x, axis=-1)
        eps = np.asarray(config.perturbation(r), dtype=float)
        incr = incr + np.sqrt(np.maximum(eps, 0.0))[..., None] * xi_extra
    return incr


def walk_step(config: WalkConfig, x, rng):
    """One increment x -> x + sigma(x-hat) xi; broadcasts over leading axes."""
    x = np.asarray(x, dtype=float)
    xi = _noise(rng, config.noise, x.shape)
    extra = rng.standard_normal(x.shape) if config.perturbation is not None else None
    return x + _increments(config, x, xi, extra)


def simulate_walk(config: WalkConfig, n_steps: int, rng) -> WalkPath:
    out = np.empty((n_steps + 1, config.model.d))
    out[0] = config.x0
    x = config.x0.copy()
    for m in range(n_steps):
        x = walk_step(config, x, rng)
        out[m + 1] = x
    return WalkPath(positions=out)


def scaled_path(path: WalkPath, n: int, horizon: float = 1.0) -> VectorPath:
    """Diffusive rescaling: value at t_k = k/n is X_k / sqrt(n) (right-
    continuous step interpolation is exact on this grid)."""
    need = int(np.floor(n * horizon))
    if len(path) - 1 < need:
        raise ValueError(f"path of {len(path) - 1} steps cannot be scaled to horizon {horizon} with n={n}")
    ks = np.arange(need + 1)
    return VectorPath(times=ks / n, values=path.positions[ks] / np.sqrt(n))


def _resolve_streams(streams, replicas: int):
    if callable(streams):
        return streams
    children = streams.spawn(replicas)
    return lambda k: np.random.Generator(np.random.PCG64(children[k]))


def _blocks(replicas: int, block: int):
    for start in range(0, replicas, block):
        yield start, min(start + block, replicas)


def marginal_samples(config: WalkConfig, n: int, replicas: int, streams,
                     block: int = BLOCK) -> EmpiricalLaw:
    """Independent replicas of X_n / sqrt(n).

    `streams` is a callable k -> Generator (one stream per replica) or a
    Generator to spawn them from.
    """
    get = _resolve_streams(streams, replicas)
    d = config.model.d
    out = np.empty((replicas, d))
    for lo, hi in _blocks(replicas, block):
        gens = [get(k) for k in range(lo, hi)]
        x = np.tile(config.x0, (hi - lo, 1))
        done = 0
        while done < n:
            m = min(STEP_CHUNK, n - done)
            slab = np.stack([_noise(g, config.noise, (m, d)) for g in gens])
            for j in range(m):
                x += _increments(config, x, slab[:, j, :])
            done += m
        out[lo:hi] = x / np.sqrt(n)
    return EmpiricalLaw(samples=out, meta={"n": n, "replicas": replicas, "kind": "scaled_endpoint",
                                           "model": config.model.describe()})


def exit_stats(config: WalkConfig, n: int, a: float, replicas: int, streams,
               horizon: float = 30.0, block: int = BLOCK) -> EmpiricalLaw:
    """First exit out of the ball of radius a sqrt(n): per replica the pair
    (tau/n, exit direction), plus a censoring flag for replicas still inside
    at the horizon (horizon * n steps)."""
    if a <= 0:
        raise ValueError("a must be positive")
    get = _resolve_streams(streams, replicas)
    d = config.model.d
    level = a * np.sqrt(n)
    max_steps = int(horizon * n)
    times = np.full(replicas, np.nan)
    dirs = np.zeros((replicas, d))
    for lo, hi in _blocks(replicas, block):
        gens = [get(k) for k in range(lo, hi)]
        x = np.tile(config.x0, (hi - lo, 1))
        active = np.arange(hi - lo)
        m = 0
        while active.size and m < max_steps:
            chunk = min(STEP_CHUNK, max_steps - m)
            slab = np.stack([_noise(gens[k], config.noise, (chunk, d)) for k in active])
            xa = x[active]
            exited = np.zeros(active.size, dtype=bool)
            for j in range(chunk):
                live = ~exited
                xa[live] += _increments(config, xa[live], slab[live, j, :])
                crossed = live.copy()
                crossed[live] = np.linalg.norm(xa[live], axis=-1) >= level
                if np.any(crossed):
                    idx = active[crossed]
                    times[lo + idx] = (m + j + 1) / n
                    dirs[lo + idx] = hat(xa[crossed])
                    exited |= crossed
            x[active] = xa
            active = active[~exited]
            m += chunk
    censored = np.isnan(times)
    return EmpiricalLaw(
        samples=np.column_stack([times, dirs]),
        meta={"n": n, "a": a, "replicas": replicas, "censored": censored,
              "kind": "exit_pairs", "model": config.model.describe()},
    )


def ergodic_average(path: WalkPath, f) -> float:
    """Average of f over the radially projected path (origin uses e1)."""
    return float(np.mean(np.asarray(f(hat(path.positions)))))


def return_statistics(config: WalkConfig, n: int, eps: float, replicas: int, streams,
                      block: int = BLOCK) -> dict:
    """Late-window return diagnostics for the recurrence classification.

    Per replica, over steps in [n/2, n]: the minimum of ||X_m|| / sqrt(n) and
    the fraction of the window with ||X_m|| < eps sqrt(n). Returns the raw
    per-replica statistics with their medians; whether medians separate the
    recurrent and transient regimes is asserted by the caller.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    get = _resolve_streams(streams, replicas)
    d = config.model.d
    w_lo = n // 2
    minima = np.full(replicas, np.inf)
    occupation = np.zeros(replicas)
    for lo, hi in _blocks(replicas, block):
        gens = [get(k) for k in range(lo, hi)]
        x = np.tile(config.x0, (hi - lo, 1))
        m = 0
        while m < n:
            chunk = min(STEP_CHUNK, n - m)
            slab = np.stack([_noise(g, config.noise, (chunk, d)) for g in gens])
            for j in range(chunk):
                x += _increments(config, x, slab[:, j, :])
                step_idx = m + j + 1
                if step_idx >= w_lo:
                    r = np.linalg.norm(x, axis=-1) / np.sqrt(n)
                    minima[lo:hi] = np.minimum(minima[lo:hi], r)
                    occupation[lo:hi] += r < eps
            m += chunk
    window = n - w_lo
    return {
        "minima": minima,
        "occupation_fraction": occupation / window,
        "median_min": float(np.median(minima)),
        "median_occupation": float(np.median(occupation / window)),
        "delta": config.model.delta,
        "boundary": bool(abs(config.model.delta - 2.0) < 1e-12),
        "n": n,
        "eps": eps,
    }
