import math

import numpy as np
import pytest

from langenv.grid import make_grid
from langenv.integrate import SchemeConfig
from langenv.lab import (PathEvent, estimate_event_probability,
                         h_eps_scaling_study, rate_ladder,
                         sk_convergence_study, tightness_diagnostics,
                         wilson_interval)
from langenv.model import ModelSpec, validate_model
from langenv.coefficients import make_constant_field
from langenv.environment import trivial_environment


def test_wilson_interval_orders_and_bounds():
    for hits, n in ((0, 10), (3, 10), (10, 10), (17, 1000)):
        lo, hi = wilson_interval(hits, n)
        assert 0.0 <= lo <= hits / n <= hi <= 1.0


def test_wilson_coverage_bernoulli_oracle():
    rng = np.random.default_rng(2024)
    n, p, reps = 1000, 0.3, 1000
    covered = 0
    for hits in rng.binomial(n, p, size=reps):
        lo, hi = wilson_interval(int(hits), n)
        covered += lo <= p <= hi
    assert covered / reps >= 0.93


def test_ci_honesty_on_schilder_configuration(constant_model):
    # 100 independent repetitions of the estimate; the 95% Wilson interval
    # must cover the known probability in at least 93 of them.  At n = 1000
    # the node-sup bias (~2% of p) is far inside the +-29% interval.
    import scipy.stats
    exact = 2.0 * scipy.stats.norm.sf(2.0)
    grid = make_grid(0, 1, 3200)
    event = PathEvent(kind="sup_coord_exceeds", threshold=1.0,
                      applies_to="overdamped")
    covered = 0
    for rep in range(100):
        est = estimate_event_probability(constant_model, 0.25, event, 1000,
                                         90_000 + rep, grid)
        covered += est.ci_low <= exact <= est.ci_high
    assert covered >= 93


def test_deterministic_model_never_hits(two_state_model):
    # sigma = 0 variant: X follows the averaged flow closely, never 2 above.

    spec = two_state_model.spec
    model = validate_model(ModelSpec(
        coefficients=make_constant_field(sigma=0.0, b=[[3.0], [-3.0]]),
        environment=spec.environment, x0=spec.x0, x1=spec.x1))
    event = PathEvent(kind="sup_norm_exceeds", threshold=3.0,
                      applies_to="second_order")
    est = estimate_event_probability(model, 0.1, event, 200, 7,
                                     make_grid(0, 1, 100))
    assert est.n_hits == 0
    assert est.ci_low == 0.0


def test_fair_coin_endpoint_sign(constant_model):
    event = PathEvent(kind="endpoint_in_halfspace", threshold=0.0,
                      applies_to="overdamped")
    est = estimate_event_probability(constant_model, 0.5, event, 20_000, 11,
                                     make_grid(0, 1, 50))
    assert est.ci_low <= 0.5 <= est.ci_high


def test_schilder_event_small_scale(constant_model):
    # One-sided sup crossing of sqrt(eps) w: exact 2 Phibar(a / sqrt(eps)).
    eps, n = 0.25, 20_000
    event = PathEvent(kind="sup_coord_exceeds", threshold=1.0,
                      applies_to="overdamped")
    est = estimate_event_probability(constant_model, eps, event, n, 3,
                                     make_grid(0, 1, 800))
    from scipy.stats import norm
    exact = 2.0 * norm.sf(1.0 / math.sqrt(eps))
    half = (est.ci_high - est.ci_low) / 2.0
    assert abs(est.p_hat - exact) < 3.0 * half


def test_ladder_requires_decreasing_eps(constant_model):
    event = PathEvent(kind="sup_coord_exceeds", threshold=1.0)
    with pytest.raises(ValueError):
        rate_ladder(constant_model, event, [0.1, 0.25], 100, 0,
                    make_grid(0, 1, 10))


def test_ladder_censoring_flags(constant_model):
    # Impossibly high threshold: zero hits at every eps.
    event = PathEvent(kind="sup_coord_exceeds", threshold=50.0)
    ladder = rate_ladder(constant_model, event, [0.2, 0.1], 50, 0,
                         make_grid(0, 1, 20))
    assert all(r.censored for r in ladder.rows)
    assert all(math.isnan(r.eps_log_p) for r in ladder.rows)


def test_non_rare_event_rate_is_near_zero(constant_model):
    event = PathEvent(kind="sup_coord_exceeds", threshold=0.05)
    ladder = rate_ladder(constant_model, event, [0.25], 4000, 5,
                         make_grid(0, 1, 200))
    row = ladder.rows[0]
    assert row.estimate.p_hat > 0.85
    assert abs(row.eps_log_p) < 0.05


def test_ladder_per_eps_replica_counts(constant_model):
    event = PathEvent(kind="sup_coord_exceeds", threshold=1.0)
    ladder = rate_ladder(constant_model, event, [0.25, 0.1], [400, 200], 5,
                         make_grid(0, 1, 50))
    assert ladder.rows[0].estimate.n_replicas == 400
    assert ladder.rows[1].estimate.n_replicas == 200


def test_sk_study_single_eps_has_no_slope(constant_model):
    study = sk_convergence_study(constant_model, [0.2], 16, 0,
                                 make_grid(0, 1, 50))
    assert study.slope is None
    assert len(study.rows) == 1


def test_tightness_norm_rows_decrease_in_L(constant_model):
    rows = tightness_diagnostics(constant_model, [0.4], [0.5, 1.0, 2.0], [],
                                 0.5, 400, 9, make_grid(0, 1, 100))
    norm_rows = [r for r in rows if r.kind == "norm"]
    ps = [r.p_hat for r in norm_rows]
    assert ps == sorted(ps, reverse=True)


def test_tightness_modulus_censored_when_ell_large(constant_model):
    rows = tightness_diagnostics(constant_model, [0.2], [], [0.02], 50.0,
                                 100, 1, make_grid(0, 1, 50))
    mod = [r for r in rows if r.kind.startswith("modulus")]
    assert mod and all(r.censored for r in mod)


def test_tightness_union_dominates_sup(constant_model):
    rows = tightness_diagnostics(constant_model, [0.3], [], [0.1], 0.4,
                                 500, 4, make_grid(0, 1, 100))
    sup_row = next(r for r in rows if r.kind == "modulus_sup")
    union_row = next(r for r in rows if r.kind == "modulus_union")
    assert union_row.p_hat >= sup_row.p_hat


def test_h_scaling_sigma_linearity(constant_model):
    # H is pathwise linear in sigma: doubling sigma doubles every
    # realization exactly under the same seed.
    spec = constant_model.spec
    doubled = validate_model(ModelSpec(
        coefficients=make_constant_field(sigma=2.0),
        environment=trivial_environment(), x0=spec.x0, x1=spec.x1))
    grid = make_grid(0, 1, 100)
    s1 = h_eps_scaling_study(constant_model, [0.2], 64, 21, grid)
    s2 = h_eps_scaling_study(doubled, [0.2], 64, 21, grid)
    assert abs(s2.rows[0][1] - 2.0 * s1.rows[0][1]) < 0.1 * s2.rows[0][1]


def test_h_scaling_undefined_for_noiseless_model():
    model = validate_model(ModelSpec(
        coefficients=make_constant_field(sigma=0.0),
        environment=trivial_environment(), x0=np.zeros(1), x1=np.zeros(1)))
    study = h_eps_scaling_study(model, [0.4, 0.2], 16, 0, make_grid(0, 1, 50))
    assert study.slope is None
    assert all(m == 0.0 for _, m in study.rows)


def test_studies_are_thread_invariant(constant_model):
    grid = make_grid(0, 1, 64)
    event = PathEvent(kind="sup_coord_exceeds", threshold=1.0,
                      applies_to="second_order")
    a = estimate_event_probability(constant_model, 0.25, event, 600, 3, grid,
                                   SchemeConfig(), threads=1)
    b = estimate_event_probability(constant_model, 0.25, event, 600, 3, grid,
                                   SchemeConfig(), threads=4)
    assert a == b
    s1 = sk_convergence_study(constant_model, [0.4, 0.2], 80, 3, grid,
                              threads=1)
    s2 = sk_convergence_study(constant_model, [0.4, 0.2], 80, 3, grid,
                              threads=3)
    assert s1.rows == s2.rows
