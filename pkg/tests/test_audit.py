import numpy as np

from parahess.audit import (audit_comparisons, audit_convolutions, convolution_law_margins,
                            discrete_lipschitz, random_lipschitz_field, random_problem)


def test_random_field_is_lipschitz(rng):
    u = random_lipschitz_field(rng, lip=2.0)
    assert discrete_lipschitz(u) <= 2.0 + 1e-12


def test_convolution_margins_small_audit():
    res = audit_convolutions(fields=10, seed=3)
    assert res.passed, res.details
    assert res.line().startswith("PASS convolution laws")


def test_idempotence_only_checked_above_lipschitz(rng):
    u = random_lipschitz_field(rng)
    A = u.osc() + 1.0
    T = u.times[-1]
    low = convolution_law_margins(u, 2.5 * A / T, A)
    high = convolution_law_margins(u, max(2.5 * A / T, 2 * discrete_lipschitz(u)), A)
    assert "idempotence" in high and high["idempotence"] <= 1e-14
    if 2.5 * A / T < discrete_lipschitz(u):
        assert "idempotence" not in low


def test_random_problems_are_valid(rng):
    for _ in range(5):
        p, params = random_problem(rng)
        p.validate()
        q, _ = random_problem(rng, offset=0.1, drift=0.2, params=params)
        d = p.domain.defined
        assert np.all(q.initial_slice()[d] >= p.initial_slice()[d])


def test_comparison_audit_small():
    res = audit_comparisons(problems=2, seed=1)
    assert res.passed and res.trials == 4
