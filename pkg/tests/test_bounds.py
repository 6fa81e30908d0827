import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pdfp_langevin.bounds import (
    BoundCheckRow,
    HypothesisViolation,
    TheoryInputs,
    chi2_initial_bound,
    empirical_bound_check,
    expectation_bound,
    gradient_sum_bounds,
    kl_bound,
    moreau_strong_convexity,
    tv_bound,
    tv_bound_terms,
    write_bound_csv,
)
from pdfp_langevin.pdfp import HypothesisWarning


def _oracle(m, M2, rho, delta, gamma, lam, K, C, d, l, rmin, gap, n, N):
    """Formula script written independently of the package."""
    e = max(1 - (m + 1 / rho) ** 2 * (2 * gamma / (M2 + 1 / rho) - gamma**2), 1 - lam * rmin) ** K
    mr = m / (1 + rho * m)
    g2c2 = gamma**2 * C**2
    exp_b = (1 - mr * delta * (1 - e)) ** n * gap + (2 * d * lam * rho + g2c2 * e) / (2 * lam * rho**2 * mr * (1 - e))
    s1 = 2 / (1 - e) * gap + N * delta * (2 * d * lam * rho + g2c2 * e) / (lam * rho**2 * (1 - e))
    s2 = 2 * e / (1 - e) * gap + N * delta * e * (2 * d * lam * rho + g2c2) / (lam * rho**2 * (1 - e))
    s3 = 4 * (1 + e) / (1 - e) * gap + 4 * N * delta * (d * lam * rho * (1 + e) + g2c2 * e) / (lam * rho**2 * (1 - e))
    kl = (2 * delta**2 * (1 + e) + 3 * rho**2 * e) / (3 * rho**2 * (1 - e)) * gap + (
        l * d * lam * rho * (4 * delta**2 * (1 + e) + 3 * delta * rho * (1 - e) + 6 * rho**2 * e)
        + l * g2c2 * e * (4 * delta**2 + 3 * rho**2)
    ) / (6 * lam * rho**4 * (1 - e))
    tv1 = 0.5 * math.exp(-(d / 4) * math.log(rho * mr) - l * mr / 2)
    tv2 = math.sqrt((lam * d * (2 * delta**2 * rho**2 + 4 * l * delta**2 * rho + 3 * l * delta * rho**2) + e * (
        lam * d * (2 * delta**2 * rho**2 + 3 * rho**4 + 4 * l * delta**2 * rho - 3 * l * delta * rho**2 + 6 * l * rho**3)
        + l * g2c2 * (4 * delta**2 + 3 * rho**2))) / (12 * lam * rho**4 * (1 - e)))
    return dict(exp=exp_b, sums=(s1, s2, s3), kl=kl, tv=tv1 + tv2)


PINNED = dict(m=1.0, M2=2.0, rho=0.1, delta=0.05, gamma=0.05, lam=0.5, K=3, C=1.5, d=4, l=20.0,
              rho_min_BBt=0.8, initial_gap=0.7)
# frozen from the oracle above at n=25, N=400
GOLDEN = dict(exp=56.57548612705751, sums=(2048.801020408163, 447.4010204081631, 4992.4040816326515),
              kl=631.7173469387756, tv=17.782795743079447)


def _random_inputs(rng):
    M2 = rng.uniform(0.5, 5)
    rho = rng.uniform(0.01, 2)
    gamma = rng.uniform(0.05, 1.9) / (M2 + 1 / rho)
    return TheoryInputs(
        m=rng.uniform(0.1, 1) * M2, M2=M2, rho=rho, delta=rng.uniform(0.05, 1) * rho, gamma=gamma,
        lam=rng.uniform(0.1, 1), K=int(rng.integers(1, 30)), C=rng.uniform(0, 3), d=int(rng.integers(1, 50)),
        l=rng.uniform(0.1, 50), rho_min_BBt=rng.uniform(0.05, 1), initial_gap=rng.uniform(0, 5),
    )


def _oracle_for(t, n=0, N=1):
    return _oracle(t.m, t.M2, t.rho, t.delta, t.gamma, t.lam, t.K, t.C, t.d, t.l, t.rho_min_BBt,
                   t.initial_gap, n, N)


def test_moreau_strong_convexity_examples():
    assert moreau_strong_convexity(1.0, 1.0) == 0.5
    assert moreau_strong_convexity(0.0, 0.3) == 0.0
    assert abs(moreau_strong_convexity(2.0, 1e-2) - 2.0) > abs(moreau_strong_convexity(2.0, 1e-4) - 2.0)
    assert moreau_strong_convexity(2.0, 1e-4) == pytest.approx(2.0, rel=1e-3)


def test_pinned_golden_values():
    t = TheoryInputs(**PINNED)
    assert expectation_bound(t, 25) == pytest.approx(GOLDEN["exp"], rel=1e-12)
    np.testing.assert_allclose(gradient_sum_bounds(t, 400), GOLDEN["sums"], rtol=1e-12)
    assert kl_bound(t) == pytest.approx(GOLDEN["kl"], rel=1e-12)
    assert tv_bound(t) == pytest.approx(GOLDEN["tv"], rel=1e-12)


def test_bounds_match_oracle_on_random_inputs():
    rng = np.random.default_rng(0)
    checked = 0
    while checked < 100:
        t = _random_inputs(rng)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", HypothesisWarning)
            if t.eta >= 1:
                continue
        n, N = int(rng.integers(0, 500)), int(rng.integers(1, 500))
        o = _oracle_for(t, n, N)
        assert expectation_bound(t, n) == pytest.approx(o["exp"], rel=1e-12)
        np.testing.assert_allclose(gradient_sum_bounds(t, N), o["sums"], rtol=1e-12)
        assert kl_bound(t) == pytest.approx(o["kl"], rel=1e-12)
        assert tv_bound(t) == pytest.approx(o["tv"], rel=1e-12)
        checked += 1


def test_expectation_bound_limits():
    t = TheoryInputs(**PINNED)
    e = t.eta_K()
    mr = t.m_rho
    floor = (2 * t.d * t.lam * t.rho + t.gamma**2 * t.C**2 * e) / (2 * t.lam * t.rho**2 * mr * (1 - e))
    assert expectation_bound(t, 0) == pytest.approx(t.initial_gap + floor, rel=1e-14)
    assert expectation_bound(t, 10**7) == pytest.approx(floor, rel=1e-12)


def test_kl_bound_at_eta_k_zero():
    # gamma = 1/(M2 + 1/rho) with m = M2 and lam * rho_min = 1 gives eta = 0
    t = TheoryInputs(m=1.0, M2=1.0, rho=0.2, delta=0.1, gamma=1 / 6, lam=1.0, K=1, C=1.0, d=3, l=5.0,
                     rho_min_BBt=1.0, initial_gap=0.4)
    assert t.eta_K() == pytest.approx(0.0, abs=1e-15)
    d, r, dl, l = 3, 0.2, 0.1, 5.0
    expected = 2 * dl**2 / (3 * r**2) * 0.4 + l * d * (4 * dl**2 + 3 * dl * r) / (6 * r**3)
    assert kl_bound(t) == pytest.approx(expected, rel=1e-12)


def test_tv_bound_large_k_drops_eta_terms():
    t = TheoryInputs(**{**PINNED, "K": 10_000})
    d, r, dl, l, lam = t.d, t.rho, t.delta, t.l, t.lam
    tail = math.sqrt(lam * d * (2 * dl**2 * r**2 + 4 * l * dl**2 * r + 3 * l * dl * r**2) / (12 * lam * r**4))
    assert tv_bound_terms(t)[1] == pytest.approx(tail, rel=1e-12)
    long_run = TheoryInputs(**{**PINNED, "l": 1e4})
    assert tv_bound_terms(long_run)[0] < 1e-100


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_monotonicity(seed):
    t = _random_inputs(np.random.default_rng(seed))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HypothesisWarning)
        if t.eta >= 1:
            return
    vals = [expectation_bound(t, n) for n in (0, 1, 10, 100, 1000)]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(vals, vals[1:]))
    more_k = TheoryInputs(**{**t.__dict__, "K": t.K + 5})
    assert kl_bound(more_k) <= kl_bound(t) * (1 + 1e-12)
    assert gradient_sum_bounds(more_k, 10)[1] <= gradient_sum_bounds(t, 10)[1] * (1 + 1e-12)
    longer = TheoryInputs(**{**t.__dict__, "l": t.l * 2})
    assert kl_bound(longer) >= kl_bound(t)
    assert tv_bound_terms(longer)[0] < tv_bound_terms(t)[0]


def test_hypothesis_violations():
    degenerate = TheoryInputs(**{**PINNED, "rho_min_BBt": 0.0})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HypothesisWarning)
        for fn in (lambda t: expectation_bound(t, 3), kl_bound, tv_bound, lambda t: gradient_sum_bounds(t, 3)):
            with pytest.raises(HypothesisViolation):
                fn(degenerate)
    with pytest.raises(HypothesisViolation):
        expectation_bound(TheoryInputs(**{**PINNED, "m": 0.0}), 1)
    with pytest.raises(ValueError):
        TheoryInputs(**{**PINNED, "delta": 0.5})


def test_chi2_initial_bound():
    assert chi2_initial_bound(1.0, 1.0, 2) == pytest.approx(2.0)
    assert chi2_initial_bound(1.0, 0.1, 4) == pytest.approx((0.1 / 1.1) ** -2)


def test_empirical_check_gaussian_edge_case():
    rows, t = empirical_bound_check("gaussian", rho=0.1, delta=0.1, K=1, n_chains=200,
                                    checkpoints=(0, 10, 100), seed=2)
    assert t.C == 0.0
    assert all(math.isfinite(r.bound) and r.holds for r in rows)


def test_empirical_gap_shrinks_with_k():
    kw = dict(rho=0.1, delta=0.1, gamma=0.02, n_chains=200, checkpoints=(0, 300), seed=3)
    r1, t1 = empirical_bound_check("lasso_posterior", K=1, **kw)
    r20, _ = empirical_bound_check("lasso_posterior", K=20, **kw)
    assert 0 < t1.eta < 1
    assert r20[1].empirical < r1[1].empirical
    assert all(r.holds for r in r1 + r20)


def test_bound_csv(tmp_path):
    p = tmp_path / "b.csv"
    write_bound_csv([BoundCheckRow("expectation_gap", 0, 0.5, 0.1, 2.0)], p)
    assert p.read_text().splitlines() == ["quantity,n,empirical,stderr,bound,holds",
                                          "expectation_gap,0,0.5,0.1,2.0,True"]
