"""Per-sensor, per-target spatio-temporal GP velocity models.

The kernel is a product of spatial and temporal squared-exponential factors,
so the learned velocity field can drift over both position and time. One
scalar GP posterior drives both velocity components (shared Gram solves,
isotropic predictive covariance). Trajectory predictions roll the posterior
mean forward and carry a block-diagonal Gaussian over the visited positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize

from .errors import GramFactorizationError
from .world import Measurement

LOG_2PI = math.log(2.0 * math.pi)

# escalation schedule for Gram factorization
_JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)

# variance floor keeping trajectory covariance blocks positive definite
_VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class KernelParams:
    """Hyperparameters of the spatio-temporal squared-exponential kernel."""

    signal_std: float = 1.0
    length_space: float = 2.0
    length_time: float = 4.0
    noise_std: float = 0.1

    def __post_init__(self):
        for name in ("signal_std", "length_space", "length_time", "noise_std"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


def kernel_eval(p1, p2, params: KernelParams) -> float:
    """Kernel value between two (position, time) points."""
    (x1, t1), (x2, t2) = p1, p2
    dx = np.asarray(x1, dtype=float) - np.asarray(x2, dtype=float)
    dsq = float(dx @ dx)
    dt = float(t1) - float(t2)
    return (params.signal_std ** 2
            * math.exp(-dsq / (2.0 * params.length_space ** 2))
            * math.exp(-dt * dt / (2.0 * params.length_time ** 2)))


def _kernel_cross(params, X1, T1, X2, T2):
    """Kernel matrix between (n1, 2)+(n1,) and (n2, 2)+(n2,) point sets."""
    dsq = ((X1[:, None, :] - X2[None, :, :]) ** 2).sum(axis=2)
    dts = (T1[:, None] - T2[None, :]) ** 2
    return params.signal_std ** 2 * np.exp(
        -dsq / (2.0 * params.length_space ** 2)
        - dts / (2.0 * params.length_time ** 2))


def chol_with_jitter(K: np.ndarray):
    """Cholesky factor of K, escalating diagonal jitter until it succeeds."""
    n = K.shape[0]
    for jit in _JITTERS:
        try:
            return np.linalg.cholesky(K + jit * np.eye(n)), jit
        except np.linalg.LinAlgError:
            continue
    raise GramFactorizationError(
        f"factorization failed for {n}x{n} Gram matrix after max jitter")


@dataclass(frozen=True)
class GpModel:
    """Training window and hyperparameters for one (sensor, target) pair.

    Value type: ingest returns a new model. Inputs are ((x, y), t) points and
    outputs are velocity 2-vectors; the window keeps at most window_cap points,
    evicting oldest first.
    """

    sensor_id: int
    target_id: int
    params: KernelParams = KernelParams()
    inputs: tuple = ()
    outputs: tuple = ()
    window_cap: int = 150

    def __post_init__(self):
        if len(self.inputs) != len(self.outputs):
            raise ValueError("inputs and outputs must have equal length")
        if len(self.inputs) > self.window_cap:
            raise ValueError("training window exceeds window_cap")

    @property
    def n(self) -> int:
        return len(self.inputs)

    @cached_property
    def _arrays(self):
        X = np.array([xy for (xy, _) in self.inputs], dtype=float).reshape(-1, 2)
        T = np.array([t for (_, t) in self.inputs], dtype=float)
        Z = np.array(self.outputs, dtype=float).reshape(-1, 2)
        return X, T, Z

    @cached_property
    def _factor(self):
        X, T, Z = self._arrays
        K = _kernel_cross(self.params, X, T, X, T)
        K[np.diag_indices_from(K)] += self.params.noise_std ** 2
        L, _ = chol_with_jitter(K)
        alpha = cho_solve((L, True), Z)
        return L, alpha


@dataclass(frozen=True)
class VelocityPrediction:
    """Isotropic Gaussian over velocity at one query point."""

    mean: np.ndarray
    variance: float

    def cov(self) -> np.ndarray:
        return self.variance * np.eye(2)


def gp_predict(model: GpModel, query) -> VelocityPrediction:
    """Posterior velocity at a (position, time) query.

    An empty model returns the prior: zero mean, signal variance.
    """
    pos, t = query
    sigma2 = model.params.signal_std ** 2
    if model.n == 0:
        return VelocityPrediction(np.zeros(2), sigma2)
    X, T, _ = model._arrays
    L, alpha = model._factor
    kvec = _kernel_cross(model.params,
                         np.asarray(pos, dtype=float).reshape(1, 2),
                         np.array([float(t)]), X, T)[0]
    mean = kvec @ alpha
    v = solve_triangular(L, kvec, lower=True)
    var = max(sigma2 - float(v @ v), 0.0)
    return VelocityPrediction(mean, var)


@dataclass(frozen=True)
class TrajectoryGaussian:
    """Block-diagonal Gaussian over a predicted position sequence.

    mean stacks the per-step positions (length 2H); cov_blocks holds one SPD
    2x2 block per step. Raising the density to a power is represented lazily
    by the scale exponent: the effective covariance is cov_blocks / scale.
    """

    start_step: int
    mean: np.ndarray
    cov_blocks: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).ravel()
        blocks = np.asarray(self.cov_blocks, dtype=float)
        if blocks.ndim != 3 or blocks.shape[1:] != (2, 2):
            raise ValueError("cov_blocks must have shape (H, 2, 2)")
        if mean.size != 2 * blocks.shape[0]:
            raise ValueError("mean length must be 2H")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov_blocks", blocks)

    @property
    def horizon(self) -> int:
        return self.cov_blocks.shape[0]

    @property
    def mean_points(self) -> np.ndarray:
        return self.mean.reshape(-1, 2)

    @property
    def scaled_blocks(self) -> np.ndarray:
        """Covariance blocks with the lazy exponent applied."""
        if self.scale == 1.0:
            return self.cov_blocks
        return self.cov_blocks / self.scale

    def with_scale(self, alpha: float) -> "TrajectoryGaussian":
        return replace(self, scale=self.scale * alpha)


def nominal_path(model: GpModel, x_k, k: int, H: int, dt: float) -> np.ndarray:
    """Roll the posterior mean velocity forward H steps from x_k at step k."""
    if H < 1:
        raise ValueError("H must be >= 1")
    pos = np.asarray(x_k, dtype=float).reshape(2).copy()
    path = np.empty((H, 2))
    for i in range(H):
        pred = gp_predict(model, (pos, (k + i) * dt))
        pos = pos + pred.mean * dt
        path[i] = pos
    return path


def local_trajectory_pdf(model: GpModel, x_k, k: int, H: int,
                         dt: float) -> TrajectoryGaussian:
    """Gaussian over the next H positions along the nominal path.

    The mean is exactly the nominal path; each step's block is the isotropic
    predictive velocity variance at that nominal point scaled by dt^2, giving
    a position covariance.
    """
    if H < 1:
        raise ValueError("H must be >= 1")
    pos = np.asarray(x_k, dtype=float).reshape(2).copy()
    mean = np.empty((H, 2))
    var = np.empty(H)
    for i in range(H):
        pred = gp_predict(model, (pos, (k + i) * dt))
        pos = pos + pred.mean * dt
        mean[i] = pos
        var[i] = gp_predict(model, (pos, (k + i + 1) * dt)).variance
    blocks = np.zeros((H, 2, 2))
    scaled = np.maximum(var * dt * dt, _VAR_FLOOR)
    blocks[:, 0, 0] = scaled
    blocks[:, 1, 1] = scaled
    return TrajectoryGaussian(k, mean.ravel(), blocks)


def ingest(model: GpModel, m: Measurement, dt: float) -> GpModel:
    """Append one measurement to the training window (oldest evicted at cap)."""
    if m.target_id != model.target_id:
        raise ValueError(
            f"measurement target {m.target_id} does not match model target "
            f"{model.target_id}")
    xy = (float(m.observed_position[0]), float(m.observed_position[1]))
    inputs = model.inputs + ((xy, m.time_step * dt),)
    outputs = model.outputs + ((float(m.observed_velocity[0]),
                                float(m.observed_velocity[1])),)
    if len(inputs) > model.window_cap:
        inputs = inputs[-model.window_cap:]
        outputs = outputs[-model.window_cap:]
    return replace(model, inputs=inputs, outputs=outputs)


# -- hyperparameter fitting -------------------------------------------------

_LOG_BOUNDS = ((math.log(2e-2), math.log(5e1)),
               (math.log(2e-1), math.log(3e1)),
               (math.log(2e-1), math.log(6e1)))

_FIXED_STARTS = ((1.0, 2.0, 4.0), (0.5, 1.0, 2.0), (2.0, 6.0, 12.0))


def log_marginal_likelihood(model: GpModel, params: KernelParams) -> float:
    """Marginal likelihood of the training window, summed over components."""
    if model.n == 0:
        return 0.0
    X, T, Z = model._arrays
    K = _kernel_cross(params, X, T, X, T)
    K[np.diag_indices_from(K)] += params.noise_std ** 2
    L, _ = chol_with_jitter(K)
    alpha = cho_solve((L, True), Z)
    logdet = 2.0 * float(np.log(np.diag(L)).sum())
    return float(-0.5 * (Z * alpha).sum() - logdet - model.n * LOG_2PI)


def fit_hyperparameters(model: GpModel, window_min: int = 10,
                        max_iter: int = 40) -> KernelParams:
    """Maximize the marginal likelihood over (signal_std, length_space, length_time).

    Noise is held at the known sensor level. Deterministic: a fixed grid of
    starts plus the incumbent, each refined by bounded L-BFGS with analytic
    gradients; the best point across all runs and all seeds is returned, so
    the result is never worse than any start. Below window_min points the
    incumbent is returned unchanged.
    """
    if model.n < window_min:
        return model.params
    X, T, Z = model._arrays
    n = model.n
    Dx = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
    Dt = (T[:, None] - T[None, :]) ** 2
    noise_var = model.params.noise_std ** 2
    eye = np.eye(n)

    def nll_grad(u):
        sig2 = math.exp(2.0 * u[0])
        lx2 = math.exp(2.0 * u[1])
        lt2 = math.exp(2.0 * u[2])
        Kf = sig2 * np.exp(-Dx / (2.0 * lx2) - Dt / (2.0 * lt2))
        K = Kf + noise_var * eye
        try:
            L = np.linalg.cholesky(K)
        except np.linalg.LinAlgError:
            return 1e12, np.zeros(3)
        alpha = cho_solve((L, True), Z)
        logdet = 2.0 * float(np.log(np.diag(L)).sum())
        nll = 0.5 * float((Z * alpha).sum()) + logdet + n * LOG_2PI
        Kinv = cho_solve((L, True), eye)
        Q = alpha @ alpha.T - 2.0 * Kinv
        g = np.array([
            -0.5 * float((Q * (2.0 * Kf)).sum()),
            -0.5 * float((Q * (Kf * (Dx / lx2))).sum()),
            -0.5 * float((Q * (Kf * (Dt / lt2))).sum()),
        ])
        return nll, g

    incumbent = (model.params.signal_std, model.params.length_space,
                 model.params.length_time)
    starts = [incumbent] + [s for s in _FIXED_STARTS if s != incumbent]
    best_u, best_val = None, math.inf
    for s in starts:
        u0 = np.clip(np.log(s), [b[0] for b in _LOG_BOUNDS],
                     [b[1] for b in _LOG_BOUNDS])
        val0, _ = nll_grad(u0)
        if val0 < best_val:
            best_u, best_val = u0, val0
        res = minimize(nll_grad, u0, jac=True, method="L-BFGS-B",
                       bounds=_LOG_BOUNDS, options={"maxiter": max_iter})
        if res.fun < best_val:
            best_u, best_val = res.x, float(res.fun)
    if best_u is None or not np.isfinite(best_val):
        return model.params
    sig, lx, lt = np.exp(best_u)
    return KernelParams(float(sig), float(lx), float(lt),
                        model.params.noise_std)
