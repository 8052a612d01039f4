"""Correlations of real Schmidt-form states under rank-1 projective measurements.

The state is ``sum_k lam[k] |k>|k>`` mixed with white noise of weight
``noise``.  A setting is a real unit vector ``v``; outcome +1 is the projector
``|v><v|`` and outcome -1 its complement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bell import CorrelationTable

NORM_TOL = 1e-12

__all__ = [
    "MeasurementSettings",
    "SchmidtState",
    "closed_form_table",
    "correlation_table",
    "schmidt_from_epsilon",
]


@dataclass(frozen=True, eq=False)
class SchmidtState:
    lam: np.ndarray
    noise: float = 0.0

    def __post_init__(self) -> None:
        lam = np.array(self.lam, dtype=float)
        if lam.ndim != 1 or lam.size < 2:
            raise ValueError("Schmidt coefficients must be a vector of length >= 2")
        if np.any(lam < 0.0):
            raise ValueError("Schmidt coefficients must be nonnegative")
        if abs(lam @ lam - 1.0) > NORM_TOL:
            raise ValueError(f"squared Schmidt coefficients sum to {lam @ lam!r}, not 1")
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError(f"noise weight must lie in [0, 1], got {self.noise}")
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "noise", float(self.noise))

    @property
    def dim(self) -> int:
        return self.lam.size

    def to_json(self) -> dict:
        return {"dim": self.dim, "lambda": self.lam.tolist(), "noise": self.noise}

    @classmethod
    def from_json(cls, doc: dict) -> "SchmidtState":
        state = cls(doc["lambda"], doc.get("noise", 0.0))
        if state.dim != int(doc["dim"]):
            raise ValueError("dim does not match the number of Schmidt coefficients")
        return state


@dataclass(frozen=True, eq=False)
class MeasurementSettings:
    """One real unit vector per setting, stored as the rows of ``vectors``."""

    vectors: np.ndarray

    def __post_init__(self) -> None:
        vectors = np.array(self.vectors, dtype=float)
        if vectors.ndim != 2:
            raise ValueError("settings must be a 2-D array (one row per setting)")
        norms = np.linalg.norm(vectors, axis=1)
        if np.any(np.abs(norms - 1.0) > NORM_TOL):
            raise ValueError(f"measurement vectors must have unit norm, got norms {norms}")
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)

    @classmethod
    def normalized(cls, vectors) -> "MeasurementSettings":
        vectors = np.asarray(vectors, dtype=float)
        return cls(vectors / np.linalg.norm(vectors, axis=1, keepdims=True))

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    def __len__(self) -> int:
        return self.count

    def to_json(self) -> dict:
        return {"dim": self.dim, "vectors": self.vectors.tolist()}

    @classmethod
    def from_json(cls, doc: dict) -> "MeasurementSettings":
        settings = cls(doc["vectors"])
        if settings.dim != int(doc["dim"]):
            raise ValueError("dim does not match the vector length")
        return settings


def schmidt_from_epsilon(n: int, epsilon: float, noise: float = 0.0) -> SchmidtState:
    """``sqrt((1-eps^2)/(n-1))`` on the first ``n-1`` levels and ``eps`` on the last."""
    if n < 2:
        raise ValueError(f"dimension must be at least 2, got {n}")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    lam = np.full(n, math.sqrt((1.0 - epsilon**2) / (n - 1)))
    lam[-1] = epsilon
    # absorb the rounding of the square root so the state passes its own check
    lam /= math.sqrt(lam @ lam)
    return SchmidtState(lam, noise)


def correlation_table(
    state: SchmidtState, settings_a: MeasurementSettings, settings_b: MeasurementSettings
) -> CorrelationTable:
    if settings_a.dim != state.dim or settings_b.dim != state.dim:
        raise ValueError(
            f"state has dimension {state.dim}, settings have "
            f"{settings_a.dim} and {settings_b.dim}"
        )
    joint, marg_a, marg_b = _table_arrays(
        state.lam, settings_a.vectors, settings_b.vectors, state.noise
    )
    return CorrelationTable(joint, marg_a, marg_b)


def _table_arrays(lam, a, b, noise):
    # shared by correlation_table and the optimizer's inner loop
    n = lam.size
    joint = ((a * lam) @ b.T) ** 2
    lam2 = lam * lam
    marg_a = (a * a) @ lam2
    marg_b = (b * b) @ lam2
    if noise:
        keep = 1.0 - noise
        joint = keep * joint + noise / n**2
        marg_a = keep * marg_a + noise / n
        marg_b = keep * marg_b + noise / n
    return joint, marg_a, marg_b


def closed_form_table(n: int, epsilon: float, q0: float) -> CorrelationTable:
    """Pure-state table of the asymmetric construction from its closed-form entries.

    ``P(A_1)``, ``P(B_y)`` (y >= 2), ``P(A_1,B_y)``, ``P(A_x,B_x)`` (x >= 2) and
    ``P(A_x,B_y)`` (x > y) come from closed-form expressions; ``P(A_x)`` for
    x >= 2, ``P(B_1)`` and the joints above the diagonal have no closed form
    and are computed from the measurement vectors.
    """
    from .constructions import asymmetric_settings, recursion_coefficients

    if n < 2:
        raise ValueError(f"dimension must be at least 2, got {n}")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    if not 0.0 <= q0 <= 1.0:
        raise ValueError(f"q0 must lie in [0, 1], got {q0}")

    coeffs = recursion_coefficients(n, q0)
    p0, p1 = coeffs.p[0], coeffs.p[1]
    q1 = coeffs.q[1]
    eps2 = epsilon**2
    bulk = math.sqrt((1.0 - eps2) / (n - 1))

    settings_a, settings_b = asymmetric_settings(n, q0)
    filled = correlation_table(schmidt_from_epsilon(n, epsilon), settings_a, settings_b)
    joint = filled.joint.copy()
    marg_a = filled.marg_a.copy()
    marg_b = filled.marg_b.copy()

    marg_a[0] = eps2
    marg_b[1:] = (1.0 - eps2) / (n - 1) * (1.0 - q0**2) + eps2 * q0**2
    joint[0, :] = eps2 * q0**2
    diagonal = (bulk * p1 * q1 + epsilon * p0 * q0) ** 2
    below = (bulk * p1 * q1 / (1 - n) + epsilon * p0 * q0) ** 2
    for x in range(1, n):
        joint[x, x] = diagonal
        joint[x, :x] = below
    return CorrelationTable(joint, marg_a, marg_b)
