import math

import numpy as np
import pytest

from quditbell.bell import DetectionScheme, build_i4422, build_inn22, evaluate, local_bound, modify_for_detection
from quditbell.constructions import (
    QuquartParams,
    asymmetric_settings,
    asymmetric_threshold,
    asymmetric_value_closed_form,
    ch_settings,
    construction,
    construction_names,
    eberhard_maxent,
    eberhard_partial,
    i4422_maxent,
    i4422_small_epsilon,
    inn22_construction,
    optimal_epsilon,
    q0_for_epsilon,
    ququart_settings,
    recursion_coefficients,
)
from quditbell.quantum import correlation_table, schmidt_from_epsilon
from quditbell.solver import fixed_threshold

GOLDEN = (math.sqrt(5) - 1) / 2


def test_recursion_examples():
    c = recursion_coefficients(3, 0.5)
    assert np.allclose(c.p, [math.sqrt(1 / 3), math.sqrt(2 / 3), math.sqrt(1 / 2)], atol=1e-15)
    assert np.allclose(recursion_coefficients(3, 1.0).q, [1, 0, 0])
    assert np.allclose(recursion_coefficients(2, 0.3).p, [math.sqrt(0.5)] * 2, atol=1e-15)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_recursion_invariants(n, rng):
    q0 = float(rng.random())
    c = recursion_coefficients(n, q0)
    assert c.p[0] ** 2 == pytest.approx(1 / n, abs=1e-15)
    assert c.p[1] ** 2 == pytest.approx((n - 1) / n, abs=1e-15)
    assert c.q[1] ** 2 == pytest.approx(1 - q0**2, abs=1e-15)
    for k in range(1, n - 1):
        assert c.p[k + 1] ** 2 == pytest.approx((1 - 1 / (n - k) ** 2) * c.p[k] ** 2, abs=1e-15)
        assert c.q[k + 1] ** 2 == pytest.approx((1 - 1 / (n - k) ** 2) * c.q[k] ** 2, abs=1e-15)
    assert np.all(c.p >= 0) and np.all(c.q >= 0)


def test_recursion_rejects_bad_input():
    with pytest.raises(ValueError):
        recursion_coefficients(1, 0.5)
    with pytest.raises(ValueError):
        recursion_coefficients(3, 1.1)


def test_asymmetric_settings_n3():
    a, b = asymmetric_settings(3, 0.7)
    assert a.vectors[0].tolist() == [0, 0, 1]
    assert np.allclose(a.vectors[1], [-math.sqrt(0.5), math.sqrt(2 / 3) / 2, math.sqrt(1 / 3)], atol=1e-15)
    q1 = math.sqrt(1 - 0.49)
    assert np.allclose(b.vectors[0], [0, -q1, 0.7], atol=1e-15)


def test_asymmetric_settings_degenerate():
    _, b = asymmetric_settings(3, 1.0)
    assert np.allclose(b.vectors, [[0, 0, 1]] * 3)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_settings_unit_norm_and_sign_flip(n, rng):
    a, b = asymmetric_settings(n, float(rng.random()))
    assert np.allclose(np.linalg.norm(a.vectors, axis=1), 1, atol=1e-12)
    assert np.allclose(np.linalg.norm(b.vectors, axis=1), 1, atol=1e-12)
    # for N = 2 Alice's first vector is fixed, so only Bob has the flipped pair
    pairs = [b.vectors] + ([a.vectors] if n > 2 else [])
    for vecs in pairs:
        last, prev = vecs[-1], vecs[-2]
        diff = np.flatnonzero(np.abs(last - prev) > 1e-15)
        assert diff.size == 1
        k = diff[0]
        assert last[k] == pytest.approx(-prev[k], abs=1e-15)
        assert np.all(np.abs(prev[:k]) < 1e-15)


def test_optimal_epsilon_examples():
    assert optimal_epsilon(3, 1.0) == 0.0
    assert optimal_epsilon(3, 0.0) == 1.0
    assert optimal_epsilon(3, math.sqrt(0.9)) ** 2 == pytest.approx(0.1 / 3.7, abs=1e-15)


def test_q0_for_epsilon_inverts(rng):
    for n in range(2, 7):
        q0 = float(rng.random())
        assert q0_for_epsilon(n, optimal_epsilon(n, q0)) == pytest.approx(q0, abs=1e-12)


def test_closed_form_value_examples():
    q0 = math.sqrt(0.9)
    assert asymmetric_value_closed_form(3, q0, 1 / 2.7) == pytest.approx(0.0, abs=1e-15)
    assert asymmetric_value_closed_form(3, q0, 0.5) == pytest.approx(0.0189189, abs=1e-7)
    assert asymmetric_value_closed_form(4, 1.0, 0.3) == 0.0
    with pytest.raises(ValueError):
        asymmetric_value_closed_form(3, q0, 0.0)


def test_threshold_formula():
    assert asymmetric_threshold(3, math.sqrt(0.9)) == pytest.approx(0.37037, abs=1e-5)
    assert asymmetric_threshold(3, 1.0) == pytest.approx(1 / 3)
    assert asymmetric_threshold(2, 1.0) == 0.5
    with pytest.raises(ValueError):
        asymmetric_threshold(3, 0.0)


def test_cancellation_and_closed_form_consistency(rng):
    for _ in range(60):
        n = int(rng.integers(2, 7))
        q0 = float(rng.uniform(0.01, 1.0))
        eta = float(rng.uniform(0.01, 1.0))
        c = inn22_construction(n, q0)
        t = c.table()
        assert np.all(np.abs(t.joint[np.tril_indices(n, -1)]) < 1e-12)
        value = evaluate(modify_for_detection(build_inn22(n), DetectionScheme.asymmetric(eta)), t)
        assert value == pytest.approx(asymmetric_value_closed_form(n, q0, eta), abs=1e-12)


def test_inn22_construction_fixed_threshold():
    q0 = math.sqrt(0.9)
    c = inn22_construction(3, q0)
    assert fixed_threshold(c.family, c.table()) == pytest.approx(1 / 2.7, abs=1e-12)


def test_ch_settings_layout():
    a, b = ch_settings(0.6, 0.8)
    assert np.allclose(a.vectors, [[-0.8, 0.6], [0.6, 0.8]])
    assert np.allclose(b.vectors, [[0.8, 0.6], [-0.6, 0.8]])


def test_ch_aligned_settings_do_not_violate():
    a, b = ch_settings(1.0, 1.0)
    c = eberhard_maxent()
    for eps in (0.1, 0.5, 1 / math.sqrt(2), 0.9):
        t = correlation_table(schmidt_from_epsilon(2, eps), a, b)
        assert evaluate(c.expr, t) <= 1e-15


def test_eberhard_thresholds():
    c = eberhard_maxent()
    assert fixed_threshold(c.family, c.table()) == pytest.approx(2 / (1 + math.sqrt(2)), abs=1e-3)
    c = eberhard_partial(1e-3)
    assert fixed_threshold(c.family, c.table()) == pytest.approx(2 / 3, abs=1e-2)


def test_eberhard_maxent_uses_pi_over_16():
    c = eberhard_maxent()
    assert abs(c.settings_a.vectors[0, 0]) == pytest.approx(math.sin(math.pi / 16), abs=1e-15)
    assert abs(c.settings_a.vectors[1, 0]) == pytest.approx(math.sin(3 * math.pi / 16), abs=1e-15)


def test_ququart_maxent_threshold():
    c = i4422_maxent()
    assert fixed_threshold(c.family, c.table()) == pytest.approx(0.7698, abs=1e-3)


@pytest.mark.parametrize("eps,tol", [(1e-2, 5e-3), (1e-3, 5e-3), (1e-4, 1e-3)])
def test_ququart_small_epsilon_threshold(eps, tol):
    c = i4422_small_epsilon(eps)
    assert fixed_threshold(c.family, c.table()) == pytest.approx(GOLDEN, abs=tol)


def test_ququart_vectors_unit_norm():
    for c in (i4422_maxent(), i4422_small_epsilon(1e-3)):
        assert np.allclose(np.linalg.norm(c.settings_a.vectors, axis=1), 1, atol=1e-12)
        assert np.allclose(np.linalg.norm(c.settings_b.vectors, axis=1), 1, atol=1e-12)


def test_ququart_params_consistency():
    p = QuquartParams.from_vectors((0.9159, 0.0499), (0.5625, -0.3035), (0.9159, -0.0499), (0.5625, 0.3035))
    assert 2 * p.u**2 + 0.9159**2 + 0.0499**2 == pytest.approx(1, abs=1e-15)
    assert 2 * p.v**2 + 0.5625**2 + 0.3035**2 == pytest.approx(1, abs=1e-15)


def test_ququart_rejects_inconsistent_norms():
    with pytest.raises(ValueError):
        ququart_settings(QuquartParams(0.1, 0.1, (0.0, 1.0), (0.0, 1.0), (0.0, 0.5), (0.0, 1.0)))


def test_ququart_degenerate_is_classical():
    a, b = ququart_settings(QuquartParams(0.0, 0.0, (0.0, 1.0), (0.0, 1.0), (0.0, 1.0), (0.0, 1.0)))
    assert np.allclose(a.vectors, [[0, 0, 0, 1]] * 4) and np.allclose(b.vectors, [[0, 0, 0, 1]] * 4)
    expr = build_i4422()
    assert local_bound(expr)[0] == 0.0
    for eps in (0.01, 0.5, 0.9):
        assert evaluate(expr, correlation_table(schmidt_from_epsilon(4, eps), a, b)) <= 1e-12


def test_registry():
    assert set(construction_names()) == {
        "inn22", "ch-eberhard-maxent", "ch-eberhard-partial", "i4422-maxent", "i4422-smalleps",
    }
    c = construction("inn22(3, 0.95)")
    assert c.dim == 3 and c.expr.n_a == 3
    assert construction("i4422-smalleps(0.001)", noise=0.01).state.noise == 0.01
    assert construction("ch-eberhard-maxent").dim == 2
    with pytest.raises(KeyError):
        construction("chsh")
    with pytest.raises(ValueError):
        construction("inn22(3)")
    with pytest.raises(ValueError):
        construction("ch-eberhard-partial(abc)")
