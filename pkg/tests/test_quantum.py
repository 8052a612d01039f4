import json
import math

import numpy as np
import pytest

from quditbell.bell import CorrelationTable
from quditbell.constructions import asymmetric_settings, optimal_epsilon
from quditbell.quantum import (
    MeasurementSettings,
    SchmidtState,
    closed_form_table,
    correlation_table,
    schmidt_from_epsilon,
)


def dense_table(state: SchmidtState, a: MeasurementSettings, b: MeasurementSettings):
    """Oracle: full density matrix on C^N (x) C^N and explicit projector traces."""
    n = state.dim
    psi = np.zeros(n * n)
    for k, lam in enumerate(state.lam):
        psi[k * n + k] = lam
    rho = (1 - state.noise) * np.outer(psi, psi) + state.noise * np.eye(n * n) / n**2
    eye = np.eye(n)
    pa = [np.outer(v, v) for v in a.vectors]
    pb = [np.outer(v, v) for v in b.vectors]
    joint = np.array([[np.trace(rho @ np.kron(p, q)) for q in pb] for p in pa])
    marg_a = np.array([np.trace(rho @ np.kron(p, eye)) for p in pa])
    marg_b = np.array([np.trace(rho @ np.kron(eye, q)) for q in pb])
    return joint, marg_a, marg_b


def random_settings(rng, count, dim):
    return MeasurementSettings.normalized(rng.normal(size=(count, dim)))


def random_state(rng, dim, noise=0.0):
    lam = np.abs(rng.normal(size=dim))
    return SchmidtState(lam / np.linalg.norm(lam), noise)


def test_matches_dense_oracle(rng):
    for _ in range(100):
        dim = int(rng.integers(2, 5))
        state = random_state(rng, dim, float(rng.choice([0.0, rng.random()])))
        a, b = random_settings(rng, 3, dim), random_settings(rng, 2, dim)
        t = correlation_table(state, a, b)
        joint, ma, mb = dense_table(state, a, b)
        assert np.allclose(t.joint, joint, atol=1e-12)
        assert np.allclose(t.marg_a, ma, atol=1e-12)
        assert np.allclose(t.marg_b, mb, atol=1e-12)


def test_outcome_normalization(rng):
    for _ in range(100):
        dim = int(rng.integers(2, 6))
        t = correlation_table(random_state(rng, dim, rng.random() * 0.2), random_settings(rng, 3, dim),
                              random_settings(rng, 3, dim))
        for x in range(3):
            for y in range(3):
                d = t.outcome_distribution(x, y)
                assert d.sum() == pytest.approx(1.0, abs=1e-12)
                assert d.min() >= -1e-12
                assert t.joint[x, y] <= min(t.marg_a[x], t.marg_b[y]) + 1e-12


def test_noise_linearity(rng):
    for _ in range(100):
        dim = int(rng.integers(2, 6))
        pure = random_state(rng, dim)
        p = float(rng.random())
        a, b = random_settings(rng, 2, dim), random_settings(rng, 3, dim)
        t0 = correlation_table(pure, a, b)
        tp = correlation_table(SchmidtState(pure.lam, p), a, b)
        assert np.allclose(tp.joint, (1 - p) * t0.joint + p / dim**2, atol=1e-12)
        assert np.allclose(tp.marg_a, (1 - p) * t0.marg_a + p / dim, atol=1e-12)
        assert np.allclose(tp.marg_b, (1 - p) * t0.marg_b + p / dim, atol=1e-12)


def test_permutation_covariance(rng):
    for _ in range(100):
        dim = int(rng.integers(2, 6))
        state = random_state(rng, dim)
        a, b = random_settings(rng, 3, dim), random_settings(rng, 3, dim)
        perm = rng.permutation(dim)
        t = correlation_table(state, a, b)
        tp = correlation_table(
            SchmidtState(state.lam[perm]),
            MeasurementSettings(a.vectors[:, perm]),
            MeasurementSettings(b.vectors[:, perm]),
        )
        assert np.allclose(t.joint, tp.joint, atol=1e-12)
        assert np.allclose(t.marg_a, tp.marg_a, atol=1e-12)


def _specified_entries(n):
    """Entries the closed form defines: joint mask, Alice marginal mask, Bob marginal mask."""
    joint = np.zeros((n, n), bool)
    joint[0, :] = True
    for x in range(1, n):
        joint[x, : x + 1] = True
    ma = np.zeros(n, bool)
    ma[0] = True
    mb = np.ones(n, bool)
    mb[0] = False
    return joint, ma, mb


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_closed_form_agrees_with_tensor_rule(n, rng):
    jm, am, bm = _specified_entries(n)
    for _ in range(20):
        eps, q0 = float(rng.random()), float(rng.random())
        cf = closed_form_table(n, eps, q0)
        a, b = asymmetric_settings(n, q0)
        t = correlation_table(schmidt_from_epsilon(n, eps), a, b)
        assert np.allclose(cf.joint[jm], t.joint[jm], atol=1e-12)
        assert np.allclose(cf.marg_a[am], t.marg_a[am], atol=1e-12)
        assert np.allclose(cf.marg_b[bm], t.marg_b[bm], atol=1e-12)


def test_closed_form_examples():
    q0 = math.sqrt(0.9)
    eps = optimal_epsilon(3, q0)
    t = closed_form_table(3, eps, q0)
    assert t.marg_a[0] == pytest.approx(0.1 / 3.7, abs=1e-6)
    assert t.marg_a[0] == pytest.approx(0.027027, abs=1e-6)
    assert np.allclose(t.joint[0], 0.0243243, atol=1e-6)
    full = correlation_table(schmidt_from_epsilon(3, eps), *asymmetric_settings(3, q0))
    assert np.allclose(full.joint, t.joint, atol=1e-12)
    assert np.allclose(full.marg_a, t.marg_a, atol=1e-12)
    assert np.allclose(full.marg_b, t.marg_b, atol=1e-12)
    assert np.all(np.abs(full.joint[np.tril_indices(3, -1)]) < 1e-12)


def test_closed_form_degenerate_limits():
    t = closed_form_table(4, 0.3, 1.0)
    assert np.allclose(t.marg_b[1:], 0.09, atol=1e-12)
    t = closed_form_table(4, 0.0, 0.6)
    assert t.marg_a[0] == 0.0 and np.all(t.joint[0] == 0.0)


def test_closed_form_rejects_out_of_range():
    for args in [(1, 0.5, 0.5), (3, 1.2, 0.5), (3, 0.5, -0.1)]:
        with pytest.raises(ValueError):
            closed_form_table(*args)


def test_schmidt_examples():
    assert np.allclose(schmidt_from_epsilon(2, 1 / math.sqrt(2)).lam, [1 / math.sqrt(2)] * 2, atol=1e-15)
    assert np.allclose(schmidt_from_epsilon(4, 0.5).lam, [0.5] * 4, atol=1e-15)
    assert schmidt_from_epsilon(3, 1.0).lam.tolist() == [0.0, 0.0, 1.0]
    with pytest.raises(ValueError):
        schmidt_from_epsilon(3, 1.5)
    with pytest.raises(ValueError):
        schmidt_from_epsilon(1, 0.5)


def test_product_state_marginal():
    a = MeasurementSettings([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    b = MeasurementSettings([[0.0, 1.0, 0.0]])
    t = correlation_table(schmidt_from_epsilon(3, 1.0), a, b)
    assert t.marg_a[0] == 1.0


def test_state_validation():
    with pytest.raises(ValueError):
        SchmidtState([0.6, 0.6])
    with pytest.raises(ValueError):
        SchmidtState([-0.6, 0.8])
    with pytest.raises(ValueError):
        SchmidtState([0.6, 0.8], noise=1.5)


def test_settings_validation():
    with pytest.raises(ValueError):
        MeasurementSettings([[1.0, 1.0]])
    s = MeasurementSettings.normalized([[3.0, 4.0]])
    assert np.allclose(s.vectors, [[0.6, 0.8]])
    assert s.dim == 2 and s.count == 1


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        correlation_table(schmidt_from_epsilon(3, 0.5), MeasurementSettings([[1.0, 0.0]]),
                          MeasurementSettings([[1.0, 0.0, 0.0]]))


def test_json_round_trip():
    state = schmidt_from_epsilon(3, 0.2, 0.01)
    doc = json.loads(json.dumps(state.to_json()))
    assert set(doc) == {"dim", "lambda", "noise"}
    back = SchmidtState.from_json(doc)
    assert np.array_equal(back.lam, state.lam) and back.noise == state.noise
    s = MeasurementSettings.normalized([[1.0, 2.0], [0.0, 1.0]])
    doc = json.loads(json.dumps(s.to_json()))
    assert set(doc) == {"dim", "vectors"}
    assert np.array_equal(MeasurementSettings.from_json(doc).vectors, s.vectors)


def test_table_is_a_correlation_table():
    t = correlation_table(schmidt_from_epsilon(2, 0.3), MeasurementSettings([[1.0, 0.0]]),
                          MeasurementSettings([[0.0, 1.0]]))
    assert isinstance(t, CorrelationTable)
