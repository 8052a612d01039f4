"""Bell scenarios with binary outcomes: expressions, correlation tables,
detection-efficiency transformations and exact local bounds.

All probabilities refer to the "+1" outcome: ``joint[x, y] = P(A_x=1, B_y=1)``,
``marg_a[x] = P(A_x=1)`` and ``marg_b[y] = P(B_y=1)``.  Settings are indexed
from 0 in arrays; the expression builders that follow textbook notation
(``build_ch_sub``) take 1-based indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np

TOL = 1e-12
MAX_ENUMERATION_SETTINGS = 20

__all__ = [
    "BellExpression",
    "CorrelationTable",
    "DetectionFamily",
    "DetectionScheme",
    "DeterministicStrategy",
    "ScenarioTooLarge",
    "apply_detection",
    "build_ch",
    "build_ch_sub",
    "build_i4422",
    "build_inn22",
    "deterministic_table",
    "evaluate",
    "local_bound",
    "modify_for_detection",
]


class ScenarioTooLarge(ValueError):
    """Raised when local-bound enumeration would be infeasible."""


def _frozen(values: Any, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-dimensional array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CorrelationTable:
    joint: np.ndarray
    marg_a: np.ndarray
    marg_b: np.ndarray

    def __post_init__(self) -> None:
        joint = _frozen(self.joint, 2)
        marg_a = _frozen(self.marg_a, 1)
        marg_b = _frozen(self.marg_b, 1)
        if joint.shape != (marg_a.size, marg_b.size):
            raise ValueError(
                f"joint has shape {joint.shape}, marginals have sizes "
                f"{marg_a.size} and {marg_b.size}"
            )
        object.__setattr__(self, "joint", joint)
        object.__setattr__(self, "marg_a", marg_a)
        object.__setattr__(self, "marg_b", marg_b)
        if np.any(joint < -TOL):
            raise ValueError("negative joint probability")
        cap = np.minimum.outer(marg_a, marg_b)
        if np.any(joint > cap + TOL):
            raise ValueError("joint probability exceeds a marginal")
        if np.any(marg_a[:, None] + marg_b[None, :] - joint > 1 + TOL):
            raise ValueError("P(A_x) + P(B_y) - P(A_x,B_y) exceeds 1")

    @property
    def n_a(self) -> int:
        return self.marg_a.size

    @property
    def n_b(self) -> int:
        return self.marg_b.size

    def outcome_distribution(self, x: int, y: int) -> np.ndarray:
        """Full distribution ``[P(+,+), P(+,-), P(-,+), P(-,-)]`` for settings (x, y)."""
        pab = self.joint[x, y]
        pa = self.marg_a[x]
        pb = self.marg_b[y]
        return np.array([pab, pa - pab, pb - pab, 1.0 - pa - pb + pab])

    def to_json(self) -> dict:
        return {
            "nA": self.n_a,
            "nB": self.n_b,
            "joint": self.joint.tolist(),
            "margA": self.marg_a.tolist(),
            "margB": self.marg_b.tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "CorrelationTable":
        n_a, n_b = int(doc["nA"]), int(doc["nB"])
        table = cls(
            np.reshape(np.asarray(doc["joint"], dtype=float), (n_a, n_b)),
            doc["margA"],
            doc["margB"],
        )
        return table


@dataclass(frozen=True, eq=False)
class BellExpression:
    """Linear functional ``constant + <c_joint, joint> + <c_a, marg_a> + <c_b, marg_b>``."""

    c_joint: np.ndarray
    c_a: np.ndarray
    c_b: np.ndarray
    constant: float = 0.0
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        c_joint = _frozen(self.c_joint, 2)
        c_a = _frozen(self.c_a, 1)
        c_b = _frozen(self.c_b, 1)
        if c_joint.shape != (c_a.size, c_b.size):
            raise ValueError(
                f"c_joint has shape {c_joint.shape}, marginal coefficients have "
                f"sizes {c_a.size} and {c_b.size}"
            )
        object.__setattr__(self, "c_joint", c_joint)
        object.__setattr__(self, "c_a", c_a)
        object.__setattr__(self, "c_b", c_b)
        object.__setattr__(self, "constant", float(self.constant))

    @property
    def n_a(self) -> int:
        return self.c_a.size

    @property
    def n_b(self) -> int:
        return self.c_b.size

    @cached_property
    def bound(self) -> float:
        """Local bound, computed once by enumeration."""
        return local_bound(self)[0]

    def __add__(self, other: "BellExpression") -> "BellExpression":
        if (self.n_a, self.n_b) != (other.n_a, other.n_b):
            raise ValueError("scenario sizes differ")
        return BellExpression(
            self.c_joint + other.c_joint,
            self.c_a + other.c_a,
            self.c_b + other.c_b,
            self.constant + other.constant,
        )

    def __neg__(self) -> "BellExpression":
        return BellExpression(-self.c_joint, -self.c_a, -self.c_b, -self.constant)

    def __sub__(self, other: "BellExpression") -> "BellExpression":
        return self + (-other)

    def to_json(self) -> dict:
        return {
            "nA": self.n_a,
            "nB": self.n_b,
            "cJoint": self.c_joint.tolist(),
            "cA": self.c_a.tolist(),
            "cB": self.c_b.tolist(),
            "constant": self.constant,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "BellExpression":
        try:
            n_a, n_b = int(doc["nA"]), int(doc["nB"])
            # nested rows or a flat row-major list are both accepted
            c_joint = np.reshape(np.asarray(doc["cJoint"], dtype=float), (n_a, n_b))
            return cls(c_joint, doc["cA"], doc["cB"], float(doc.get("constant", 0.0)))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed expression document: {exc}") from exc


@dataclass(frozen=True)
class DeterministicStrategy:
    out_a: tuple[int, ...]
    out_b: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "out_a", tuple(int(v) for v in self.out_a))
        object.__setattr__(self, "out_b", tuple(int(v) for v in self.out_b))
        if any(v not in (1, -1) for v in self.out_a + self.out_b):
            raise ValueError("deterministic outputs must be +1 or -1")

    def __str__(self) -> str:
        def fmt(out):
            return " ".join("+1" if v == 1 else "-1" for v in out)

        return f"A: {fmt(self.out_a)} | B: {fmt(self.out_b)}"


@dataclass(frozen=True)
class DetectionScheme:
    """No-click events are binned as outcome -1 on the inefficient side(s).

    ``kind`` is ``"none"``, ``"symmetric"`` (both parties have efficiency
    ``eta``) or ``"asymmetric"`` (Alice is perfect, Bob has ``eta``).
    """

    kind: str = "none"
    eta: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("none", "symmetric", "asymmetric"):
            raise ValueError(f"unknown detection scheme {self.kind!r}")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"efficiency must lie in (0, 1], got {self.eta}")

    @classmethod
    def symmetric(cls, eta: float) -> "DetectionScheme":
        return cls("symmetric", eta)

    @classmethod
    def asymmetric(cls, eta_b: float) -> "DetectionScheme":
        return cls("asymmetric", eta_b)

    @property
    def normalizer(self) -> float:
        if self.kind == "symmetric":
            return self.eta**2
        if self.kind == "asymmetric":
            return self.eta
        return 1.0


def _check_sizes(expr: BellExpression, table: CorrelationTable) -> None:
    if (expr.n_a, expr.n_b) != (table.n_a, table.n_b):
        raise ValueError(
            f"expression is {expr.n_a}x{expr.n_b} but table is {table.n_a}x{table.n_b}"
        )


def evaluate(expr: BellExpression, table: CorrelationTable) -> float:
    _check_sizes(expr, table)
    return float(
        expr.constant
        + np.sum(expr.c_joint * table.joint)
        + expr.c_a @ table.marg_a
        + expr.c_b @ table.marg_b
    )


def deterministic_table(strategy: DeterministicStrategy) -> CorrelationTable:
    a = (np.asarray(strategy.out_a) == 1).astype(float)
    b = (np.asarray(strategy.out_b) == 1).astype(float)
    return CorrelationTable(np.outer(a, b), a, b)


def local_bound(expr: BellExpression) -> tuple[float, DeterministicStrategy]:
    """Maximum of ``expr`` over deterministic local strategies.

    Alice's strategies are enumerated in lexicographic order (+1 before -1)
    and Bob best-responds setting by setting, preferring +1 on ties.  The
    first maximizer in that order is therefore the lexicographically
    smallest ``(out_a, out_b)`` among all maximizers.
    """
    n_a, n_b = expr.n_a, expr.n_b
    if n_a > MAX_ENUMERATION_SETTINGS or n_b > MAX_ENUMERATION_SETTINGS:
        raise ScenarioTooLarge(
            f"{n_a}x{n_b} scenario exceeds the enumeration limit of "
            f"{MAX_ENUMERATION_SETTINGS} settings per party"
        )
    shifts = np.arange(n_a - 1, -1, -1)
    best_value = -np.inf
    best_a = best_b = None
    chunk = 1 << 16
    for start in range(0, 1 << n_a, chunk):
        idx = np.arange(start, min(start + chunk, 1 << n_a))
        # bit set means output -1, so counting upwards is lexicographic order
        a = ((idx[:, None] >> shifts) & 1 == 0).astype(float)
        response = expr.c_b + a @ expr.c_joint
        values = expr.constant + a @ expr.c_a + np.maximum(response, 0.0).sum(axis=1)
        k = int(np.argmax(values))
        if values[k] > best_value:
            best_value = float(values[k])
            best_a = a[k]
            best_b = response[k] >= 0.0
    strategy = DeterministicStrategy(
        tuple(1 if v else -1 for v in best_a), tuple(1 if v else -1 for v in best_b)
    )
    # recompute through the public path so the pair is exactly consistent
    return evaluate(expr, deterministic_table(strategy)), strategy


def apply_detection(table: CorrelationTable, scheme: DetectionScheme) -> CorrelationTable:
    eta = scheme.eta
    if scheme.kind == "symmetric":
        return CorrelationTable(eta**2 * table.joint, eta * table.marg_a, eta * table.marg_b)
    if scheme.kind == "asymmetric":
        return CorrelationTable(eta * table.joint, table.marg_a, eta * table.marg_b)
    return table


def modify_for_detection(expr: BellExpression, scheme: DetectionScheme) -> BellExpression:
    """Efficiency-dependent expression, normalized so that
    ``evaluate(result, T) == evaluate(expr, apply_detection(T, scheme)) / scheme.normalizer``.
    """
    if scheme.kind == "none":
        return expr
    if expr.constant != 0.0:
        raise ValueError("detection modification requires a constant-free expression")
    eta = scheme.eta
    if scheme.kind == "symmetric":
        return BellExpression(expr.c_joint, expr.c_a / eta, expr.c_b / eta, name=expr.name)
    return BellExpression(expr.c_joint, expr.c_a / eta, expr.c_b, name=expr.name)


@dataclass(frozen=True)
class DetectionFamily:
    """An expression together with the efficiency scheme that modifies it.

    For every ``eta`` the modified expression splits as
    ``fixed + scaled / eta``; ``parts`` returns that split.
    """

    expr: BellExpression
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in ("symmetric", "asymmetric"):
            raise ValueError(f"unknown family kind {self.kind!r}")

    def scheme(self, eta: float) -> DetectionScheme:
        return DetectionScheme(self.kind, eta)

    def at(self, eta: float) -> BellExpression:
        return modify_for_detection(self.expr, self.scheme(eta))

    def parts(self) -> tuple[BellExpression, BellExpression]:
        e = self.expr
        zeros_a, zeros_b = np.zeros(e.n_a), np.zeros(e.n_b)
        if self.kind == "symmetric":
            fixed = BellExpression(e.c_joint, zeros_a, zeros_b)
            scaled = BellExpression(np.zeros_like(e.c_joint), e.c_a, e.c_b)
        else:
            fixed = BellExpression(e.c_joint, zeros_a, e.c_b)
            scaled = BellExpression(np.zeros_like(e.c_joint), e.c_a, zeros_b)
        return fixed, scaled


def build_inn22(n: int) -> BellExpression:
    if n < 2:
        raise ValueError(f"I_NN22 needs at least 2 settings, got {n}")
    c_joint = np.zeros((n, n))
    c_joint[0, :] = 1.0
    for x in range(1, n):
        c_joint[x, x] = 1.0
        c_joint[x, :x] = -1.0
    c_a = np.zeros(n)
    c_a[0] = -1.0
    c_b = -np.ones(n)
    c_b[0] = 0.0
    return BellExpression(c_joint, c_a, c_b, name=f"I_{n}{n}22")


def build_ch() -> BellExpression:
    return BellExpression([[1.0, 1.0], [1.0, -1.0]], [-1.0, 0.0], [-1.0, 0.0], name="I_CH")


def build_ch_sub(i: int, j: int, m: int, n: int, settings: int = 4) -> BellExpression:
    """CH block on Alice settings (i, j) and Bob settings (m, n), 1-based,
    lifted into a ``settings`` x ``settings`` scenario."""
    if not all(1 <= k <= settings for k in (i, j, m, n)):
        raise ValueError(f"setting indices must lie in 1..{settings}")
    i, j, m, n = i - 1, j - 1, m - 1, n - 1
    c_joint = np.zeros((settings, settings))
    c_a = np.zeros(settings)
    c_b = np.zeros(settings)
    c_joint[i, m] += 1.0
    c_joint[j, m] += 1.0
    c_joint[i, n] += 1.0
    c_joint[j, n] -= 1.0
    c_a[i] -= 1.0
    c_b[m] -= 1.0
    return BellExpression(c_joint, c_a, c_b)


def build_i4422() -> BellExpression:
    total = (
        build_ch_sub(1, 2, 1, 2)
        + build_ch_sub(3, 4, 3, 4)
        - build_ch_sub(2, 1, 4, 3)
        - build_ch_sub(4, 3, 2, 1)
    )
    marginals = np.array([0.0, 1.0, 0.0, 1.0])
    penalty = BellExpression(np.zeros((4, 4)), marginals, marginals)
    expr = total - penalty
    return BellExpression(expr.c_joint, expr.c_a, expr.c_b, name="I_4422^4")
