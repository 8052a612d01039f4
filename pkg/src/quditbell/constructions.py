"""Explicit states and measurements with known detection thresholds.

* the asymmetric ``I_NN22`` family: ladder-shaped settings built from the
  ``p_k``/``q_k`` recursions, with the entanglement parameter chosen so that
  all below-diagonal joint probabilities vanish;
* Eberhard's CH thresholds for qubits;
* the symmetric ``I_4422^4`` ququart settings (maximally entangled optimum and
  the small-epsilon family).

Constructions are addressable by name, e.g. ``inn22(3,0.95)``,
``ch-eberhard-maxent``, ``ch-eberhard-partial(0.001)``, ``i4422-maxent`` and
``i4422-smalleps(0.001)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .bell import (
    BellExpression,
    CorrelationTable,
    DetectionFamily,
    build_ch,
    build_i4422,
    build_inn22,
)
from .quantum import MeasurementSettings, SchmidtState, correlation_table, schmidt_from_epsilon

__all__ = [
    "Construction",
    "QuquartParams",
    "RecursionCoefficients",
    "asymmetric_settings",
    "asymmetric_threshold",
    "asymmetric_value_closed_form",
    "ch_settings",
    "construction",
    "construction_names",
    "eberhard_maxent",
    "eberhard_partial",
    "i4422_maxent",
    "i4422_small_epsilon",
    "inn22_construction",
    "optimal_epsilon",
    "q0_for_epsilon",
    "ququart_settings",
    "recursion_coefficients",
]

# optimum for maximally entangled ququarts, known to four decimals
MAXENT_P1 = (0.9159, 0.0499)
MAXENT_P2 = (0.5625, -0.3035)
MAXENT_Q1 = (0.9159, -0.0499)
MAXENT_Q2 = (0.5625, 0.3035)


@dataclass(frozen=True, eq=False)
class RecursionCoefficients:
    p: np.ndarray
    q: np.ndarray


def _ladder(first: float, second: float, n: int) -> np.ndarray:
    c = np.empty(n)
    c[0] = first
    if n > 1:
        c[1] = second
    for k in range(1, n - 1):
        c[k + 1] = math.sqrt(1.0 - 1.0 / (n - k) ** 2) * c[k]
    return c


def recursion_coefficients(n: int, q0: float) -> RecursionCoefficients:
    if n < 2:
        raise ValueError(f"dimension must be at least 2, got {n}")
    if not 0.0 <= q0 <= 1.0:
        raise ValueError(f"q0 must lie in [0, 1], got {q0}")
    p = _ladder(math.sqrt(1.0 / n), math.sqrt((n - 1) / n), n)
    q = _ladder(q0, math.sqrt(max(0.0, 1.0 - q0 * q0)), n)
    return RecursionCoefficients(p, q)


def _ladder_vector(c: np.ndarray, x: int, n: int) -> np.ndarray:
    """Row ``x`` (1-based) of the ladder: ``c_0`` last, ``c_k/(n-k)`` above it,
    and ``-c_x`` at position ``n-x`` unless ``x == n``."""
    v = np.zeros(n)
    v[n - 1] = c[0]
    for k in range(1, min(x, n)):
        v[n - 1 - k] = c[k] / (n - k)
    if x < n:
        v[n - 1 - x] = -c[x]
    return v


def asymmetric_settings(n: int, q0: float) -> tuple[MeasurementSettings, MeasurementSettings]:
    if n < 2:
        raise ValueError(f"dimension must be at least 2, got {n}")
    coeffs = recursion_coefficients(n, q0)
    alice = [np.eye(n)[n - 1]] + [_ladder_vector(coeffs.p, x, n) for x in range(2, n + 1)]
    bob = [_ladder_vector(coeffs.q, y, n) for y in range(1, n + 1)]
    return MeasurementSettings.normalized(alice), MeasurementSettings.normalized(bob)


def optimal_epsilon(n: int, q0: float) -> float:
    """Entanglement parameter cancelling every ``P(A_x,B_y)`` with ``x > y``."""
    q0sq = q0 * q0
    return math.sqrt((1.0 - q0sq) / (1.0 + ((n - 1) ** 2 - 1) * q0sq))


def q0_for_epsilon(n: int, epsilon: float) -> float:
    """Inverse of ``optimal_epsilon`` in its first argument's family."""
    eps2 = epsilon * epsilon
    return math.sqrt((1.0 - eps2) / (1.0 + ((n - 1) ** 2 - 1) * eps2))


def asymmetric_value_closed_form(n: int, q0: float, eta_b: float) -> float:
    if eta_b <= 0.0:
        raise ValueError("efficiency must be positive")
    eps = optimal_epsilon(n, q0)
    return eps * eps * (-1.0 / eta_b + q0 * q0 * n)


def asymmetric_threshold(n: int, q0: float) -> float:
    if q0 <= 0.0:
        raise ValueError("q0 must be positive for a finite threshold")
    return 1.0 / (n * q0 * q0)


def ch_settings(p1: float, p2: float) -> tuple[MeasurementSettings, MeasurementSettings]:
    u = math.sqrt(max(0.0, 1.0 - p1 * p1))
    v = math.sqrt(max(0.0, 1.0 - p2 * p2))
    alice = MeasurementSettings.normalized([[-u, p1], [v, p2]])
    bob = MeasurementSettings.normalized([[u, p1], [-v, p2]])
    return alice, bob


@dataclass(frozen=True, eq=False)
class QuquartParams:
    u: float
    v: float
    p1: tuple[float, float]
    p2: tuple[float, float]
    q1: tuple[float, float]
    q2: tuple[float, float]

    @classmethod
    def from_vectors(cls, p1, p2, q1, q2) -> "QuquartParams":
        """Derive ``u``, ``v`` from unit-norm completion of the 4-vectors."""
        n1 = float(np.dot(p1, p1))
        n2 = float(np.dot(p2, p2))
        return cls(
            math.sqrt(max(0.0, (1.0 - n1) / 2.0)),
            math.sqrt(max(0.0, (1.0 - n2) / 2.0)),
            tuple(p1),
            tuple(p2),
            tuple(q1),
            tuple(q2),
        )

    @classmethod
    def small_epsilon(cls, epsilon: float) -> "QuquartParams":
        delta = (3.0 / 4.0) ** 0.25 * math.sqrt(epsilon)
        h = 1.0 / math.sqrt(2.0)
        return cls(
            math.sqrt(3.0 / 8.0) * (math.sqrt(5.0) - 1.0) * epsilon,
            0.5,
            (0.0, 1.0),
            (delta, h),
            (0.0, 1.0),
            (-delta, h),
        )


def ququart_settings(params: QuquartParams) -> tuple[MeasurementSettings, MeasurementSettings]:
    p1, p2, q1, q2 = (np.asarray(w, dtype=float) for w in (params.p1, params.p2, params.q1, params.q2))
    for i, (p, q) in enumerate(((p1, q1), (p2, q2)), start=1):
        if abs(np.linalg.norm(p) - np.linalg.norm(q)) > 1e-9:
            raise ValueError(f"|p{i}| and |q{i}| differ; the settings would be inconsistent")
    u, v = params.u, params.v
    alice = [
        [-u, -u, *p1],
        [-v, v, *p2],
        [u, u, *p1],
        [v, -v, *p2],
    ]
    bob = [
        [-u, u, *q1],
        [-v, -v, *q2],
        [u, -u, *q1],
        [v, v, *q2],
    ]
    return MeasurementSettings.normalized(alice), MeasurementSettings.normalized(bob)


@dataclass(frozen=True, eq=False)
class Construction:
    name: str
    family: DetectionFamily
    state: SchmidtState
    settings_a: MeasurementSettings
    settings_b: MeasurementSettings

    @property
    def expr(self) -> BellExpression:
        return self.family.expr

    @property
    def dim(self) -> int:
        return self.state.dim

    def table(self) -> CorrelationTable:
        return correlation_table(self.state, self.settings_a, self.settings_b)


def inn22_construction(n: int, q0: float, noise: float = 0.0) -> Construction:
    eps = optimal_epsilon(n, q0)
    a, b = asymmetric_settings(n, q0)
    return Construction(
        f"inn22({n},{q0:g})",
        DetectionFamily(build_inn22(n), "asymmetric"),
        schmidt_from_epsilon(n, eps, noise),
        a,
        b,
    )


def eberhard_maxent(noise: float = 0.0) -> Construction:
    a, b = ch_settings(math.cos(math.pi / 16), math.cos(3 * math.pi / 16))
    return Construction(
        "ch-eberhard-maxent",
        DetectionFamily(build_ch(), "symmetric"),
        schmidt_from_epsilon(2, 1 / math.sqrt(2), noise),
        a,
        b,
    )


def eberhard_partial(epsilon: float, noise: float = 0.0) -> Construction:
    a, b = ch_settings(1.0, math.sqrt(1.0 - epsilon))
    return Construction(
        f"ch-eberhard-partial({epsilon:g})",
        DetectionFamily(build_ch(), "symmetric"),
        schmidt_from_epsilon(2, epsilon, noise),
        a,
        b,
    )


def i4422_maxent(noise: float = 0.0) -> Construction:
    a, b = ququart_settings(QuquartParams.from_vectors(MAXENT_P1, MAXENT_P2, MAXENT_Q1, MAXENT_Q2))
    return Construction(
        "i4422-maxent",
        DetectionFamily(build_i4422(), "symmetric"),
        schmidt_from_epsilon(4, 0.5, noise),
        a,
        b,
    )


def i4422_small_epsilon(epsilon: float, noise: float = 0.0) -> Construction:
    a, b = ququart_settings(QuquartParams.small_epsilon(epsilon))
    return Construction(
        f"i4422-smalleps({epsilon:g})",
        DetectionFamily(build_i4422(), "symmetric"),
        schmidt_from_epsilon(4, epsilon, noise),
        a,
        b,
    )


_REGISTRY = {
    "inn22": (inn22_construction, (int, float)),
    "ch-eberhard-maxent": (eberhard_maxent, ()),
    "ch-eberhard-partial": (eberhard_partial, (float,)),
    "i4422-maxent": (i4422_maxent, ()),
    "i4422-smalleps": (i4422_small_epsilon, (float,)),
}

_NAME_RE = re.compile(r"^\s*([a-z0-9-]+)\s*(?:\((.*)\))?\s*$")


def construction_names() -> list[str]:
    return sorted(_REGISTRY)


def construction(name: str, noise: float = 0.0) -> Construction:
    """Look up a construction such as ``"inn22(3,0.95)"`` or ``"i4422-maxent"``."""
    match = _NAME_RE.match(name)
    if not match or match.group(1) not in _REGISTRY:
        raise KeyError(f"unknown construction {name!r}; known: {', '.join(construction_names())}")
    factory, types = _REGISTRY[match.group(1)]
    raw = [s for s in (match.group(2) or "").split(",") if s.strip()]
    if len(raw) != len(types):
        raise ValueError(f"{match.group(1)} takes {len(types)} argument(s), got {len(raw)}")
    args = [t(s) for t, s in zip(types, raw)]
    return factory(*args, noise=noise)
