"""Gaussian pose belief with EKF prediction and range-bearing updates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .world import Control, Landmark, Pose, apply_control, wrap_angle

# default noise, per second of motion (R) and per observation (Q)
DEFAULT_R = np.diag([1e-4, 1e-4, 1e-5])
DEFAULT_Q = np.diag([1e-2, 1e-3])


class SingularInnovation(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True, eq=False)
class GaussianBelief:
    mean: Pose
    cov: np.ndarray

    def __post_init__(self):
        cov = np.array(self.cov, dtype=float).reshape(3, 3)
        cov.setflags(write=False)
        object.__setattr__(self, "cov", cov)

    @classmethod
    def certain(cls, mean: Pose) -> "GaussianBelief":
        return cls(mean, np.zeros((3, 3)))

    def check(self, sym_tol: float = 1e-12, eig_tol: float = 1e-10) -> None:
        """Raise ``AssertionError`` unless the covariance is symmetric PSD."""
        asym = np.max(np.abs(self.cov - self.cov.T))
        assert asym <= sym_tol, f"covariance asymmetry {asym}"
        low = np.min(np.linalg.eigvalsh(self.cov))
        assert low >= -eig_tol, f"covariance eigenvalue {low}"


@dataclass(frozen=True)
class Measurement:
    range: float
    bearing: float
    landmark_id: int

    def as_array(self) -> np.ndarray:
        return np.array([self.range, self.bearing])


def _symmetrize(c: np.ndarray) -> np.ndarray:
    return 0.5 * (c + c.T)


def motion_jacobian(mean: Pose, u: Control) -> np.ndarray:
    heading = mean.theta + u.delta_rot1
    F = np.eye(3)
    F[0, 2] = -u.delta_trans * math.sin(heading)
    F[1, 2] = u.delta_trans * math.cos(heading)
    return F


def predict(b: GaussianBelief, u: Control, R) -> GaussianBelief:
    F = motion_jacobian(b.mean, u)
    cov = F @ b.cov @ F.T + np.asarray(R, dtype=float)
    return GaussianBelief(apply_control(b.mean, u), _symmetrize(cov))


def _offset(mean: Pose, lm: Landmark) -> tuple[float, float, float]:
    dx = lm.x - mean.x
    dy = lm.y - mean.y
    r = math.hypot(dx, dy)
    if r <= 1e-9:
        raise ValueError(f"degenerate range to landmark {lm.id}")
    return dx, dy, r


def measurement_jacobian(mean: Pose, lm: Landmark) -> np.ndarray:
    dx, dy, r = _offset(mean, lm)
    r2 = r * r
    return np.array([
        [-dx / r, -dy / r, 0.0],
        [dy / r2, -dx / r2, -1.0],
    ])


def predict_measurement(mean: Pose, lm: Landmark) -> Measurement:
    dx, dy, r = _offset(mean, lm)
    return Measurement(r, wrap_angle(math.atan2(dy, dx) - mean.theta), lm.id)


def simulate_observation(b_propagated: GaussianBelief, lm: Landmark, Q,
                         rng_seed: int) -> Measurement:
    """Nominal measurement from the belief mean, corrupted by Gaussian noise ``Q``."""
    z = predict_measurement(b_propagated.mean, lm)
    rng = np.random.default_rng(rng_seed)
    noise = rng.multivariate_normal(np.zeros(2), np.asarray(Q, dtype=float), method="eigh")
    return Measurement(max(z.range + noise[0], 1e-9), wrap_angle(z.bearing + noise[1]), lm.id)


def update(b_propagated: GaussianBelief, z: Measurement, lm: Landmark, Q) -> GaussianBelief:
    """EKF correction with one range-bearing measurement, linearized at the prior mean."""
    mu = b_propagated.mean
    sigma = b_propagated.cov
    H = measurement_jacobian(mu, lm)
    zhat = predict_measurement(mu, lm)
    innov = np.array([z.range - zhat.range, wrap_angle(z.bearing - zhat.bearing)])
    S = H @ sigma @ H.T + np.asarray(Q, dtype=float)
    det = S[0, 0] * S[1, 1] - S[0, 1] * S[1, 0]
    scale = abs(S[0, 0] * S[1, 1]) + abs(S[0, 1] * S[1, 0])
    if not (np.isfinite(det) and abs(det) > 1e-15 * scale):
        raise SingularInnovation("singular innovation covariance")
    S_inv = np.array([[S[1, 1], -S[0, 1]], [-S[1, 0], S[0, 0]]]) / det
    K = sigma @ H.T @ S_inv
    dmu = K @ innov
    mean = Pose(mu.x + dmu[0], mu.y + dmu[1], mu.theta + dmu[2])
    cov = (np.eye(3) - K @ H) @ sigma
    return GaussianBelief(mean, _symmetrize(cov))


def trace_of(b: GaussianBelief) -> float:
    return float(np.trace(b.cov))
